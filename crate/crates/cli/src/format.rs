//! On-disk formats: mixture/model JSON, JSON Lines datasets, and atomic
//! writes. Floats are written with 17 significant digits so every `f64`
//! reads back to the same bits.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use ldslab::lds::{LdsParams, MixtureSpec, Trajectory};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, CliResult};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn write_f64_17<W: ?Sized + io::Write>(writer: &mut W, value: f64) -> io::Result<()> {
    write!(writer, "{value:.16e}")
}

struct Compact17;

impl Formatter for Compact17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write_f64_17(writer, value)
    }
}

struct Pretty17<'a>(PrettyFormatter<'a>);

impl Formatter for Pretty17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write_f64_17(writer, value)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17-significant-digit floats and a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Pretty17(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    out.push(b'\n');
    out
}

fn to_json_line<T: Serialize>(value: &T, out: &mut Vec<u8>) {
    let mut ser = serde_json::Serializer::with_formatter(&mut *out, Compact17);
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    out.push(b'\n');
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> CliResult<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::data(
            "bad_model",
            format!("matrix {name} must be {nrows}x{ncols} (row-major)"),
        ));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

/// Mixture or learned model. `s` and `learned` are only present on models
/// written by `learn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub weights: Vec<f64>,
    pub components: Vec<ComponentFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learned: Option<serde_json::Value>,
}

impl ModelFile {
    pub fn from_parts(weights: &[f64], params: &[LdsParams]) -> ModelFile {
        let d = params[0].dims();
        ModelFile {
            m: d.m,
            n: d.n,
            p: d.p,
            k: params.len(),
            weights: weights.to_vec(),
            components: params
                .iter()
                .map(|c| ComponentFile {
                    a: rows(c.a()),
                    b: rows(c.b()),
                    c: rows(c.c()),
                    d: rows(c.d()),
                })
                .collect(),
            s: None,
            learned: None,
        }
    }

    pub fn from_mixture(mix: &MixtureSpec) -> ModelFile {
        ModelFile::from_parts(mix.weights(), mix.components())
    }

    pub fn params(&self) -> CliResult<Vec<LdsParams>> {
        if self.k == 0 || self.components.len() != self.k || self.weights.len() != self.k {
            return Err(CliError::data(
                "bad_model",
                format!(
                    "k = {} but {} components and {} weights",
                    self.k,
                    self.components.len(),
                    self.weights.len()
                ),
            ));
        }
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (m, n, p) = (self.m, self.n, self.p);
                let params = LdsParams::new(
                    from_rows(&format!("components[{i}].a"), &c.a, n, n)?,
                    from_rows(&format!("components[{i}].b"), &c.b, n, p)?,
                    from_rows(&format!("components[{i}].c"), &c.c, m, n)?,
                    from_rows(&format!("components[{i}].d"), &c.d, m, p)?,
                )?;
                Ok(params)
            })
            .collect()
    }

    pub fn mixture(&self) -> CliResult<MixtureSpec> {
        Ok(MixtureSpec::new(self.params()?, self.weights.clone())?)
    }
}

pub fn read_model(path: &Path) -> CliResult<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data("bad_model", format!("{}: {e}", path.display())))
}

pub fn write_model(path: &Path, model: &ModelFile) -> CliResult<()> {
    write_atomic(path, &to_json_pretty(model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryLine {
    label: Option<usize>,
    /// `ℓ` rows of `p` inputs.
    u: Vec<Vec<f64>>,
    /// `ℓ` rows of `m` observations.
    y: Vec<Vec<f64>>,
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn from_columns(cols: &[Vec<f64>], what: &str, line: usize) -> CliResult<DMatrix<f64>> {
    let dim = cols.first().map_or(0, |c| c.len());
    if cols.is_empty() || dim == 0 || cols.iter().any(|c| c.len() != dim) {
        return Err(CliError::data(
            "bad_dataset",
            format!("line {line}: \"{what}\" must be a non-empty list of equal-length vectors"),
        ));
    }
    Ok(DMatrix::from_fn(dim, cols.len(), |i, t| cols[t][i]))
}

pub fn write_dataset(path: &Path, dataset: &[Trajectory]) -> CliResult<()> {
    let mut out = Vec::new();
    for traj in dataset {
        let line = TrajectoryLine {
            label: traj.label,
            u: columns(traj.inputs()),
            y: columns(traj.outputs()),
        };
        to_json_line(&line, &mut out);
    }
    write_atomic(path, &out)
}

pub fn read_dataset(path: &Path) -> CliResult<Vec<Trajectory>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut dataset = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let number = idx + 1;
        let parsed: TrajectoryLine = serde_json::from_str(&line)
            .map_err(|e| CliError::data("bad_dataset", format!("{}:{number}: {e}", path.display())))?;
        if parsed.u.len() != parsed.y.len() {
            return Err(CliError::data(
                "bad_dataset",
                format!("line {number}: u has {} steps but y has {}", parsed.u.len(), parsed.y.len()),
            ));
        }
        let u = from_columns(&parsed.u, "u", number)?;
        let y = from_columns(&parsed.y, "y", number)?;
        if let Some(first) = dataset.first() {
            let first: &Trajectory = first;
            if first.m() != y.nrows() || first.p() != u.nrows() {
                return Err(CliError::data(
                    "bad_dataset",
                    format!("line {number}: dimensions differ from the first trajectory"),
                ));
            }
        }
        dataset.push(Trajectory::new(u, y, parsed.label)?);
    }
    if dataset.is_empty() {
        return Err(CliError::data("empty_dataset", format!("{} has no trajectories", path.display())));
    }
    Ok(dataset)
}
