//! Empirical and exact moment statistics.
//!
//! For lags `k1, k2, k3 ∈ 0..=2s` the sixth-moment block is the mean of
//!
//! ```text
//! y[k1+k2+k3+2] ⊗ u[k1+k2+2] ⊗ y[k1+k2+1] ⊗ u[k1+1] ⊗ y[k1] ⊗ u[0]
//! ```
//!
//! (0-based times), whose expectation under a mixture is
//! `Σ_i w_i X_{i,k3} ⊗ X_{i,k2} ⊗ X_{i,k1}`. Blocks are stored row-major over
//! the six indices `(y3, u3, y2, u2, y1, u1)`, so a block is the outer product
//! of three `m·p` vectors `vec(y uᵀ)`, most significant first.
//!
//! The Markov matrix `[X_0, …, X_{2s}]` flattens to a vector of length
//! `(2s+1)·m·p` with index `k·(m·p) + row·p + col` for entry `(row, col)` of
//! block `X_k`. [`assemble_pi`] places block `(k1, k2, k3)` so that the first
//! mode of the order-3 result carries lag `k3`, the second `k2` and the third
//! `k1`; with exact blocks the result is `Σ_i w_i v(G_i)^{⊗3}`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{LdsError, Result};
use crate::lds::{MixtureSpec, Trajectory};
use crate::tensor::Tensor3;

/// Trajectories per accumulation shard. Shards are fixed by index so the
/// summation order does not depend on the thread count.
const SHARD: usize = 1024;

/// The full `(2s+1)³` grid of sixth-moment blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensor6 {
    s: usize,
    m: usize,
    p: usize,
    blocks: Vec<Option<Vec<f64>>>,
}

impl MomentTensor6 {
    /// A grid with no blocks filled in.
    pub fn empty(s: usize, m: usize, p: usize) -> Self {
        let lags = 2 * s + 1;
        MomentTensor6 {
            s,
            m,
            p,
            blocks: vec![None; lags * lags * lags],
        }
    }

    pub fn s(&self) -> usize {
        self.s
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of entries in one block, `(m·p)³`.
    pub fn block_len(&self) -> usize {
        (self.m * self.p).pow(3)
    }

    fn slot(&self, k1: usize, k2: usize, k3: usize) -> Result<usize> {
        let lags = 2 * self.s + 1;
        if k1 >= lags || k2 >= lags || k3 >= lags {
            return Err(LdsError::IndexOutOfRange {
                index: k1.max(k2).max(k3),
                length: lags,
            });
        }
        Ok((k1 * lags + k2) * lags + k3)
    }

    pub fn block(&self, k1: usize, k2: usize, k3: usize) -> Result<&[f64]> {
        let slot = self.slot(k1, k2, k3)?;
        self.blocks[slot]
            .as_deref()
            .ok_or(LdsError::MissingBlock(k1, k2, k3))
    }

    pub fn set_block(&mut self, k1: usize, k2: usize, k3: usize, data: Vec<f64>) -> Result<()> {
        if data.len() != self.block_len() {
            return Err(LdsError::DimensionMismatch {
                matrix: "moment block",
                expected: self.block_len().to_string(),
                found: data.len().to_string(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LdsError::NonFinite("moment block"));
        }
        let slot = self.slot(k1, k2, k3)?;
        self.blocks[slot] = Some(data);
        Ok(())
    }

    /// Entry `(y3, u3, y2, u2, y1, u1)` of block `(k1, k2, k3)`.
    #[allow(clippy::too_many_arguments)]
    pub fn entry(&self, k1: usize, k2: usize, k3: usize, idx: [usize; 6]) -> Result<f64> {
        let (m, p) = (self.m, self.p);
        let [a, b, c, d, e, f] = idx;
        let pos = ((((a * p + b) * m + c) * p + d) * m + e) * p + f;
        Ok(self.block(k1, k2, k3)?[pos])
    }
}

/// Order-3 tensor of side `(2s+1)·m·p` obtained by flattening mode pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTensor3 {
    pub s: usize,
    pub m: usize,
    pub p: usize,
    pub tensor: Tensor3,
}

impl FlatTensor3 {
    pub fn new(s: usize, m: usize, p: usize, tensor: Tensor3) -> Result<Self> {
        let q = (2 * s + 1) * m * p;
        if tensor.q() != q {
            return Err(LdsError::DimensionMismatch {
                matrix: "flattened tensor",
                expected: q.to_string(),
                found: tensor.q().to_string(),
            });
        }
        Ok(FlatTensor3 { s, m, p, tensor })
    }

    pub fn q(&self) -> usize {
        self.tensor.q()
    }
}

/// Blocks `R_0, …, R_{2s}` of the input/output cross-covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovarianceStack {
    blocks: Vec<DMatrix<f64>>,
}

impl CrossCovarianceStack {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(LdsError::InvalidArgument("cross-covariance stack is empty".into()));
        };
        let shape = first.shape();
        if let Some(bad) = blocks.iter().find(|b| b.shape() != shape) {
            return Err(LdsError::DimensionMismatch {
                matrix: "cross-covariance block",
                expected: format!("{}x{}", shape.0, shape.1),
                found: format!("{}x{}", bad.nrows(), bad.ncols()),
            });
        }
        Ok(CrossCovarianceStack { blocks })
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// `[R_0 R_1 … R_{2s}]` as an `m × (2s+1)p` matrix.
    pub fn assembled(&self) -> DMatrix<f64> {
        let (m, p) = self.blocks[0].shape();
        let mut out = DMatrix::zeros(m, p * self.blocks.len());
        for (j, b) in self.blocks.iter().enumerate() {
            out.columns_mut(j * p, p).copy_from(b);
        }
        out
    }
}

fn check_dataset(dataset: &[Trajectory], required: usize) -> Result<(usize, usize)> {
    let first = dataset.first().ok_or(LdsError::EmptyDataset)?;
    let (m, p) = (first.m(), first.p());
    for (index, traj) in dataset.iter().enumerate() {
        if traj.len() < required {
            return Err(LdsError::TrajectoryTooShort {
                index,
                length: traj.len(),
                required,
            });
        }
        if traj.m() != m || traj.p() != p {
            return Err(LdsError::DimensionMismatch {
                matrix: "trajectory",
                expected: format!("m={m}, p={p}"),
                found: format!("m={}, p={} at index {index}", traj.m(), traj.p()),
            });
        }
    }
    Ok((m, p))
}

/// Neumaier-compensated running sum over equally sized vectors.
struct CompensatedSum {
    sum: Vec<f64>,
    carry: Vec<f64>,
}

impl CompensatedSum {
    fn new(len: usize) -> Self {
        CompensatedSum {
            sum: vec![0.0; len],
            carry: vec![0.0; len],
        }
    }

    fn add(&mut self, values: &[f64]) {
        for ((s, c), &x) in self.sum.iter_mut().zip(self.carry.iter_mut()).zip(values) {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
    }

    fn finish(self) -> Vec<f64> {
        self.sum.iter().zip(&self.carry).map(|(s, c)| s + c).collect()
    }
}

/// Sums `per_traj` over the dataset in fixed shards, merging shard partials
/// in shard order with compensation, and divides by `N`.
fn sharded_mean<F>(dataset: &[Trajectory], len: usize, per_traj: F) -> Vec<f64>
where
    F: Fn(&Trajectory, &mut [f64]) + Sync,
{
    let partials: Vec<Vec<f64>> = dataset
        .par_chunks(SHARD)
        .map(|chunk| {
            let mut acc = CompensatedSum::new(len);
            let mut scratch = vec![0.0; len];
            for traj in chunk {
                scratch.iter_mut().for_each(|x| *x = 0.0);
                per_traj(traj, &mut scratch);
                acc.add(&scratch);
            }
            acc.finish()
        })
        .collect();
    let mut total = CompensatedSum::new(len);
    for part in &partials {
        total.add(part);
    }
    let n = dataset.len() as f64;
    total.finish().into_iter().map(|x| x / n).collect()
}

/// `vec(y[ty] u[tu]ᵀ)`, row-major, length `m·p`.
fn pair_product(traj: &Trajectory, ty: usize, tu: usize, out: &mut [f64]) {
    let (y, u) = (traj.outputs(), traj.inputs());
    let p = u.nrows();
    for r in 0..y.nrows() {
        let yr = y[(r, ty)];
        for c in 0..p {
            out[r * p + c] = yr * u[(c, tu)];
        }
    }
}

/// Adds `z3 ⊗ z2 ⊗ z1` into `out`.
fn add_triple_outer(z3: &[f64], z2: &[f64], z1: &[f64], out: &mut [f64]) {
    let d = z1.len();
    let mut pos = 0;
    for &a in z3 {
        for &b in z2 {
            let ab = a * b;
            for (o, &c) in out[pos..pos + d].iter_mut().zip(z1) {
                *o += ab * c;
            }
            pos += d;
        }
    }
}

/// Minimum trajectory length for block `(k1, k2, k3)`.
pub fn required_length(k1: usize, k2: usize, k3: usize) -> usize {
    k1 + k2 + k3 + 3
}

/// Empirical mean of `y[k1] u[0]ᵀ`.
pub fn estimate_cross_covariance(dataset: &[Trajectory], k1: usize) -> Result<DMatrix<f64>> {
    let (m, p) = check_dataset(dataset, k1 + 1)?;
    let mean = sharded_mean(dataset, m * p, |traj, out| pair_product(traj, k1, 0, out));
    Ok(DMatrix::from_row_slice(m, p, &mean))
}

/// `Σ_i w_i X_{i,k1}`.
pub fn exact_cross_covariance(mix: &MixtureSpec, k1: usize) -> DMatrix<f64> {
    mix.components()
        .iter()
        .zip(mix.weights())
        .map(|(c, &w)| c.markov_parameter(k1) * w)
        .fold(DMatrix::zeros(mix.dims().m, mix.dims().p), |acc, x| acc + x)
}

/// Empirical `R_0, …, R_{2s}` in one pass.
pub fn estimate_cross_covariance_stack(dataset: &[Trajectory], s: usize) -> Result<CrossCovarianceStack> {
    let lags = 2 * s + 1;
    let (m, p) = check_dataset(dataset, lags)?;
    let mp = m * p;
    let mean = sharded_mean(dataset, lags * mp, |traj, out| {
        for k in 0..lags {
            pair_product(traj, k, 0, &mut out[k * mp..(k + 1) * mp]);
        }
    });
    CrossCovarianceStack::new(
        (0..lags)
            .map(|k| DMatrix::from_row_slice(m, p, &mean[k * mp..(k + 1) * mp]))
            .collect(),
    )
}

pub fn exact_cross_covariance_stack(mix: &MixtureSpec, s: usize) -> CrossCovarianceStack {
    CrossCovarianceStack::new((0..=2 * s).map(|k| exact_cross_covariance(mix, k)).collect())
        .expect("exact stack is well formed")
}

fn add_traj_block(traj: &Trajectory, k1: usize, k2: usize, k3: usize, z: &mut [Vec<f64>; 3], out: &mut [f64]) {
    let [z1, z2, z3] = z;
    pair_product(traj, k1, 0, z1);
    pair_product(traj, k1 + k2 + 1, k1 + 1, z2);
    pair_product(traj, k1 + k2 + k3 + 2, k1 + k2 + 2, z3);
    add_triple_outer(z3, z2, z1, out);
}

/// Empirical sixth-moment block `(k1, k2, k3)`.
pub fn estimate_sixth_moment_block(dataset: &[Trajectory], k1: usize, k2: usize, k3: usize) -> Result<Vec<f64>> {
    let (m, p) = check_dataset(dataset, required_length(k1, k2, k3))?;
    let mp = m * p;
    Ok(sharded_mean(dataset, mp * mp * mp, |traj, out| {
        let mut z = [vec![0.0; mp], vec![0.0; mp], vec![0.0; mp]];
        add_traj_block(traj, k1, k2, k3, &mut z, out);
    }))
}

/// Every block for lags `0..=2s`, estimated from the same trajectories in
/// a single pass.
pub fn estimate_sixth_moments(dataset: &[Trajectory], s: usize) -> Result<MomentTensor6> {
    let top = 2 * s;
    let (m, p) = check_dataset(dataset, required_length(top, top, top))?;
    let mp = m * p;
    let block_len = mp * mp * mp;
    let lags = top + 1;
    let mean = sharded_mean(dataset, lags * lags * lags * block_len, |traj, out| {
        let mut z = [vec![0.0; mp], vec![0.0; mp], vec![0.0; mp]];
        let mut slot = 0;
        for k1 in 0..lags {
            for k2 in 0..lags {
                for k3 in 0..lags {
                    add_traj_block(traj, k1, k2, k3, &mut z, &mut out[slot * block_len..(slot + 1) * block_len]);
                    slot += 1;
                }
            }
        }
    });
    let mut tensor = MomentTensor6::empty(s, m, p);
    for (slot, chunk) in mean.chunks(block_len).enumerate() {
        tensor.blocks[slot] = Some(chunk.to_vec());
    }
    Ok(tensor)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// `Σ_i w_i X_{i,k3} ⊗ X_{i,k2} ⊗ X_{i,k1}`.
pub fn exact_sixth_moment_block(mix: &MixtureSpec, k1: usize, k2: usize, k3: usize) -> Vec<f64> {
    let Dims { m, p } = Dims::of(mix);
    let mp = m * p;
    let mut out = vec![0.0; mp * mp * mp];
    for (c, &w) in mix.components().iter().zip(mix.weights()) {
        let x1 = row_major(&c.markov_parameter(k1));
        let x2 = row_major(&c.markov_parameter(k2));
        let x3: Vec<f64> = row_major(&c.markov_parameter(k3)).iter().map(|v| v * w).collect();
        add_triple_outer(&x3, &x2, &x1, &mut out);
    }
    out
}

struct Dims {
    m: usize,
    p: usize,
}

impl Dims {
    fn of(mix: &MixtureSpec) -> Self {
        let d = mix.dims();
        Dims { m: d.m, p: d.p }
    }
}

pub fn exact_sixth_moments(mix: &MixtureSpec, s: usize) -> MomentTensor6 {
    let Dims { m, p } = Dims::of(mix);
    let mut tensor = MomentTensor6::empty(s, m, p);
    let lags = 2 * s + 1;
    for k1 in 0..lags {
        for k2 in 0..lags {
            for k3 in 0..lags {
                tensor
                    .set_block(k1, k2, k3, exact_sixth_moment_block(mix, k1, k2, k3))
                    .expect("exact block has the right shape");
            }
        }
    }
    tensor
}

/// Pieces the block grid into one order-3 tensor of side `(2s+1)·m·p`.
pub fn assemble_pi(blocks: &MomentTensor6) -> Result<FlatTensor3> {
    let (s, m, p) = (blocks.s, blocks.m, blocks.p);
    let mp = m * p;
    let lags = 2 * s + 1;
    let q = lags * mp;
    let mut tensor = Tensor3::zeros(q);
    for k1 in 0..lags {
        for k2 in 0..lags {
            for k3 in 0..lags {
                let block = blocks.block(k1, k2, k3)?;
                let mut pos = 0;
                for i3 in 0..mp {
                    for i2 in 0..mp {
                        for i1 in 0..mp {
                            tensor[(k3 * mp + i3, k2 * mp + i2, k1 * mp + i1)] = block[pos];
                            pos += 1;
                        }
                    }
                }
            }
        }
    }
    FlatTensor3::new(s, m, p, tensor)
}

/// Flattens `[X_0 … X_T]` (an `m × (T+1)p` matrix) to a vector with index
/// `k·(m·p) + row·p + col`.
pub fn flatten_markov(g: &DMatrix<f64>, p: usize) -> Result<DVector<f64>> {
    let m = g.nrows();
    if p == 0 || g.ncols() % p != 0 {
        return Err(LdsError::DimensionMismatch {
            matrix: "Markov matrix",
            expected: format!("width divisible by p={p}"),
            found: format!("{}x{}", m, g.ncols()),
        });
    }
    let blocks = g.ncols() / p;
    let mut v = DVector::zeros(blocks * m * p);
    for k in 0..blocks {
        for r in 0..m {
            for c in 0..p {
                v[k * m * p + r * p + c] = g[(r, k * p + c)];
            }
        }
    }
    Ok(v)
}

/// Inverse of [`flatten_markov`].
pub fn unflatten_markov(v: &DVector<f64>, m: usize, p: usize) -> Result<DMatrix<f64>> {
    let mp = m * p;
    if mp == 0 || v.len() % mp != 0 {
        return Err(LdsError::DimensionMismatch {
            matrix: "flattened Markov vector",
            expected: format!("length divisible by m*p={mp}"),
            found: v.len().to_string(),
        });
    }
    let blocks = v.len() / mp;
    let mut g = DMatrix::zeros(m, blocks * p);
    for k in 0..blocks {
        for r in 0..m {
            for c in 0..p {
                g[(r, k * p + c)] = v[k * mp + r * p + c];
            }
        }
    }
    Ok(g)
}
