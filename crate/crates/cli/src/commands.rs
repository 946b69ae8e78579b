//! The six subcommands. Each returns the human-readable summary that `main`
//! prints on stdout; files are written as a side effect.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ldslab::lds::{
    random_well_behaved_mixture, sample_mixture_dataset, substream, well_behaved_report, Dims, MixtureSpec,
    NoiseConfig, RandomSystemOptions, Trajectory,
};
use ldslab::learner::{
    align_similarity, canonicalize_fully_observed, learn_from_moments, AlignmentReport, ClusterModel, LearnConfig,
    LearnedMixture,
};
use ldslab::linalg::min_cost_assignment;
use ldslab::moments::{assemble_pi, estimate_cross_covariance_stack, estimate_sixth_moments};
use ldslab::LdsError;
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{min_length, RunConfig};
use crate::error::{CliError, CliResult};
use crate::format::{read_dataset, read_model, to_json_pretty, write_atomic, write_dataset, write_model, ModelFile};

const DEFAULT_KAPPA: f64 = 50.0;
const DEFAULT_GAMMA: f64 = 0.3;
const DEFAULT_SEEDS: usize = 5;

/// Stream index for drawing a random ground-truth mixture.
const MIXTURE_STREAM: u64 = u64::MAX;
/// Stream index for the decomposition's random contractions.
const LEARN_STREAM: u64 = u64::MAX - 1;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GIT_REV: &str = env!("LDSLAB_GIT_REV");

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::data("io", e.to_string());
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| CliError::data("io", e.to_string()))
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// The ground truth for `generate` and `sweep`: read from `--mixture`, or a
/// random well-behaved mixture drawn from the seed.
fn truth_mixture(cfg: &RunConfig) -> CliResult<MixtureSpec> {
    if let Some(path) = &cfg.mixture {
        return read_model(path)?.mixture();
    }
    let k = cfg.require(cfg.k, "k")?;
    let n = cfg.require(cfg.n, "n")?;
    let dims = Dims {
        m: cfg.m.unwrap_or(n),
        n,
        p: cfg.p.unwrap_or(n),
    };
    let mut rng = substream(cfg.seed(), MIXTURE_STREAM);
    Ok(random_well_behaved_mixture(
        &mut rng,
        k,
        dims,
        cfg.s_or_default(),
        cfg.kappa.unwrap_or(DEFAULT_KAPPA),
        cfg.gamma.unwrap_or(DEFAULT_GAMMA),
        &RandomSystemOptions::default(),
        1000,
    )?)
}

fn sample(cfg: &RunConfig, mix: &MixtureSpec, n_traj: usize, seed: u64) -> CliResult<Vec<Trajectory>> {
    let length = cfg.length.unwrap_or_else(|| min_length(cfg.s_or_default()));
    let noise = NoiseConfig::new(seed, cfg.noise_scale())?;
    Ok(sample_mixture_dataset(mix, n_traj, length, &noise)?)
}

pub fn cmd_generate(cfg: &RunConfig) -> CliResult<String> {
    let dataset_path = cfg.require_path(&cfg.dataset, "dataset")?;
    let truth_path = cfg.require_path(&cfg.truth, "truth")?;
    let n_traj = cfg.require(cfg.trajectories, "trajectories")?;
    let mix = truth_mixture(cfg)?;
    let data = sample(cfg, &mix, n_traj, cfg.seed())?;
    write_model(truth_path, &ModelFile::from_mixture(&mix))?;
    write_dataset(dataset_path, &data)?;
    let d = mix.dims();
    Ok(format!(
        "wrote {} trajectories of length {} (k={}, m={}, n={}, p={}) to {}\nwrote mixture to {}\n",
        data.len(),
        data[0].len(),
        mix.k(),
        d.m,
        d.n,
        d.p,
        dataset_path.display(),
        truth_path.display()
    ))
}

/// Wall time of each learning stage, in seconds.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StageTimes {
    pub moments_s: f64,
    pub decomposition_s: f64,
}

/// Runs the learner on a dataset with the CLI's stream conventions.
pub fn learn_dataset(data: &[Trajectory], k: usize, n: usize, s: usize, seed: u64) -> CliResult<(LearnedMixture, StageTimes)> {
    let first = &data[0];
    let shortest = data.iter().map(Trajectory::len).min().unwrap_or(0);
    if shortest < min_length(s) {
        return Err(CliError::data(
            "trajectory_too_short",
            format!("shortest trajectory has length {shortest}, learning with s={s} needs {}", min_length(s)),
        ));
    }
    let capacity = (2 * s + 1) * first.m() * first.p();
    if k > capacity {
        return Err(LdsError::RankTooLarge { rank: k, capacity }.into());
    }
    let config = LearnConfig::new(k, n, s);
    let start = Instant::now();
    let flat = assemble_pi(&estimate_sixth_moments(data, s)?)?;
    let rhat = estimate_cross_covariance_stack(data, s)?;
    let moments_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let learned = learn_from_moments(&flat, &rhat, &config, &mut substream(seed, LEARN_STREAM))?;
    let times = StageTimes {
        moments_s,
        decomposition_s: start.elapsed().as_secs_f64(),
    };
    Ok((learned, times))
}

fn learned_diagnostics(learned: &LearnedMixture) -> Value {
    json!({
        "tensor_residual": learned.diagnostics.tensor_residual,
        "regression_residual": learned.diagnostics.regression_residual,
        "weight_sum": learned.diagnostics.weight_sum,
        "components": learned.components.iter().map(|c| json!({
            "raw_weight": c.raw_weight,
            "regression_weight_raw": c.wtilde_raw,
            "regression_weight": c.wtilde,
            "clamped": c.clamped,
            "hankel_rank": c.hankel_rank,
            "rank_warning": c.rank_warning,
        })).collect::<Vec<_>>(),
    })
}

pub fn learned_model_file(learned: &LearnedMixture) -> ModelFile {
    let mut file = ModelFile::from_parts(&learned.weights(), &learned.params());
    file.s = Some(learned.s);
    file.learned = Some(learned_diagnostics(learned));
    file
}

pub fn cmd_learn(cfg: &RunConfig) -> CliResult<String> {
    let dataset_path = cfg.require_path(&cfg.dataset, "dataset")?;
    let model_path = cfg.require_path(&cfg.model, "model")?;
    let k = cfg.require(cfg.k, "k")?;
    let n = cfg.require(cfg.n, "n")?;
    let s = cfg.s_or_default();
    let total = Instant::now();

    let start = Instant::now();
    let data = read_dataset(dataset_path)?;
    let load_s = start.elapsed().as_secs_f64();

    let (learned, times) = learn_dataset(&data, k, n, s, cfg.seed())?;

    let start = Instant::now();
    let model = learned_model_file(&learned);
    write_model(model_path, &model)?;
    let write_s = start.elapsed().as_secs_f64();

    let manifest_path = cfg.manifest.clone().unwrap_or_else(|| with_ext(model_path, "manifest.json"));
    let manifest = json!({
        "tool": "ldslab",
        "version": VERSION,
        "git_rev": GIT_REV,
        "mode": "learn",
        "seed": cfg.seed(),
        "config": cfg,
        "threads": rayon::current_num_threads(),
        "dataset": {
            "path": dataset_path,
            "trajectories": data.len(),
            "min_length": data.iter().map(Trajectory::len).min(),
            "m": data[0].m(),
            "p": data[0].p(),
        },
        "stages": {
            "load_s": load_s,
            "moments_s": times.moments_s,
            "decomposition_s": times.decomposition_s,
            "write_s": write_s,
            "total_s": total.elapsed().as_secs_f64(),
        },
        "diagnostics": model.learned,
    });
    write_atomic(&manifest_path, &to_json_pretty(&manifest))?;

    let mut out = format!(
        "learned k={k} n={n} s={s} from {} trajectories\n",
        data.len()
    );
    for (i, c) in learned.components.iter().enumerate() {
        let _ = writeln!(
            out,
            "  component {i}: weight {:.6}{}{}",
            c.weight,
            if c.clamped { " (regression weight clamped)" } else { "" },
            if c.rank_warning { " (Hankel rank warning)" } else { "" },
        );
    }
    let _ = writeln!(out, "tensor residual {:.3e}", learned.diagnostics.tensor_residual);
    let _ = writeln!(out, "wrote model to {}\nwrote manifest to {}", model_path.display(), manifest_path.display());
    Ok(out)
}

fn alignment_json(report: &AlignmentReport) -> Value {
    json!({
        "permutation": report.permutation,
        "max_param_error": report.max_param_error,
        "max_weight_error": report.max_weight_error,
        "max_error": report.max_error,
        "components": report.components.iter().enumerate().map(|(j, c)| json!({
            "component": j,
            "truth_index": c.truth_index,
            "err_a": c.err_a,
            "err_b": c.err_b,
            "err_c": c.err_c,
            "err_d": c.err_d,
            "err_w": c.err_w,
            "markov_distance": c.markov_distance,
            "condition": c.condition,
            "singular": c.singular,
        })).collect::<Vec<_>>(),
    })
}

pub const EVALUATE_COLUMNS: [&str; 10] = [
    "component",
    "truth_index",
    "err_a",
    "err_b",
    "err_c",
    "err_d",
    "err_w",
    "markov_distance",
    "condition",
    "singular",
];

pub fn cmd_evaluate(cfg: &RunConfig) -> CliResult<String> {
    let truth = read_model(cfg.require_path(&cfg.truth, "truth")?)?.mixture()?;
    let model = read_model(cfg.require_path(&cfg.model, "model")?)?;
    let s = cfg.s.or(model.s).unwrap_or(2);
    let report = align_similarity(&truth, &model.weights, &model.params()?, s)?;

    if let Some(prefix) = &cfg.output {
        let rows: Vec<Vec<String>> = report
            .components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                vec![
                    j.to_string(),
                    c.truth_index.to_string(),
                    num(c.err_a),
                    num(c.err_b),
                    num(c.err_c),
                    num(c.err_d),
                    num(c.err_w),
                    num(c.markov_distance),
                    num(c.condition),
                    c.singular.to_string(),
                ]
            })
            .collect();
        let header: Vec<String> = EVALUATE_COLUMNS.iter().map(|s| s.to_string()).collect();
        write_atomic(&with_ext(prefix, "csv"), &csv_bytes(&header, &rows)?)?;
        write_atomic(&with_ext(prefix, "json"), &to_json_pretty(&alignment_json(&report)))?;
    }

    let mut out = format!("alignment with s={s}; learned component -> true component {:?}\n", report.permutation);
    let _ = writeln!(out, "{:>9} {:>5} {:>11} {:>11} {:>11} {:>11} {:>11}", "component", "truth", "err_a", "err_b", "err_c", "err_d", "err_w");
    for (j, c) in report.components.iter().enumerate() {
        let _ = writeln!(
            out,
            "{j:>9} {:>5} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}{}",
            c.truth_index,
            c.err_a,
            c.err_b,
            c.err_c,
            c.err_d,
            c.err_w,
            if c.singular { "  (ill-conditioned basis change)" } else { "" }
        );
    }
    let _ = writeln!(
        out,
        "max parameter error {:.3e}, max weight error {:.3e}",
        report.max_param_error, report.max_weight_error
    );
    Ok(out)
}

/// Fraction of labelled trajectories whose assigned component matches the
/// label after the best one-to-one relabeling.
pub fn matched_accuracy(assigned: &[usize], labels: &[Option<usize>]) -> Option<(f64, Vec<usize>)> {
    let pairs: Vec<(usize, usize)> = assigned
        .iter()
        .zip(labels)
        .filter_map(|(&a, l)| l.map(|l| (a, l)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let size = pairs.iter().map(|&(a, l)| a.max(l) + 1).max().unwrap_or(1);
    let mut counts = DMatrix::<f64>::zeros(size, size);
    for &(a, l) in &pairs {
        counts[(a, l)] += 1.0;
    }
    let mapping = min_cost_assignment(&(-&counts));
    let hits: f64 = mapping.iter().enumerate().map(|(a, &l)| counts[(a, l)]).sum();
    Some((hits / pairs.len() as f64, mapping))
}

pub fn cmd_cluster(cfg: &RunConfig) -> CliResult<String> {
    let model = read_model(cfg.require_path(&cfg.model, "model")?)?;
    let data = read_dataset(cfg.require_path(&cfg.dataset, "dataset")?)?;
    let prefix = cfg.require_path(&cfg.output, "output")?;
    let mut params = model.params()?;
    if cfg.fully_observed.unwrap_or(false) {
        params = params.iter().map(canonicalize_fully_observed).collect::<ldslab::Result<_>>()?;
    }
    if data[0].m() != model.m || data[0].p() != model.p {
        return Err(CliError::data(
            "dimension_mismatch",
            format!(
                "dataset has m={}, p={} but the model has m={}, p={}",
                data[0].m(),
                data[0].p(),
                model.m,
                model.p
            ),
        ));
    }
    let mut cluster = ClusterModel::new(&model.weights, &params)?;
    cluster.prepare(data.iter().map(Trajectory::len).collect::<BTreeSet<_>>())?;
    let posteriors = cluster.posteriors(&data)?;
    let assigned: Vec<usize> = posteriors.iter().map(|p| p.argmax()).collect();
    let labels: Vec<Option<usize>> = data.iter().map(|t| t.label).collect();
    let has_labels = labels.iter().any(Option::is_some);
    let accuracy = matched_accuracy(&assigned, &labels);

    let k = model.k;
    let mut header = vec!["index".to_string()];
    if has_labels {
        header.push("label".into());
    }
    header.push("assigned".into());
    header.extend((0..k).map(|i| format!("posterior_{i}")));
    let rows: Vec<Vec<String>> = posteriors
        .iter()
        .enumerate()
        .map(|(i, post)| {
            let mut row = vec![i.to_string()];
            if has_labels {
                row.push(labels[i].map(|l| l.to_string()).unwrap_or_default());
            }
            row.push(assigned[i].to_string());
            row.extend(post.probabilities.iter().map(|&p| num(p)));
            row
        })
        .collect();
    write_atomic(&with_ext(prefix, "csv"), &csv_bytes(&header, &rows)?)?;

    let mut summary = json!({
        "k": k,
        "trajectories": data.len(),
        "fully_observed": cfg.fully_observed.unwrap_or(false),
        "rows": posteriors.iter().enumerate().map(|(i, post)| json!({
            "index": i,
            "label": labels[i],
            "assigned": assigned[i],
            "posterior": post.probabilities,
        })).collect::<Vec<_>>(),
    });
    if let Some((acc, mapping)) = &accuracy {
        summary["accuracy"] = json!(acc);
        summary["label_matching"] = json!(mapping);
    }
    write_atomic(&with_ext(prefix, "json"), &to_json_pretty(&summary))?;

    let mut out = format!("clustered {} trajectories into {k} components\n", data.len());
    for c in 0..k {
        let count = assigned.iter().filter(|&&a| a == c).count();
        let _ = writeln!(out, "  component {c}: {count}");
    }
    if let Some((acc, _)) = accuracy {
        let _ = writeln!(out, "accuracy {acc:.4}");
    }
    let _ = writeln!(out, "wrote {}", with_ext(prefix, "csv").display());
    Ok(out)
}

pub fn cmd_validate(cfg: &RunConfig) -> CliResult<String> {
    let mix = read_model(cfg.require_path(&cfg.model, "model")?)?.mixture()?;
    let s = cfg.s_or_default();
    let kappa = cfg.require(cfg.kappa, "kappa")?;
    let w_min = cfg.require(cfg.w_min, "w-min")?;
    let gamma = cfg.require(cfg.gamma, "gamma")?;
    let r = well_behaved_report(&mix, s, kappa, w_min, gamma);

    let report = json!({
        "s": r.s,
        "kappa": r.kappa_bound,
        "w_min_bound": r.w_min_bound,
        "gamma_bound": r.gamma_bound,
        "gamma": r.gamma,
        "w_min": r.w_min,
        "well_behaved": r.passes(),
        "checks": {
            "weights": r.pass.weights,
            "nontrivial_bc": r.pass.nontrivial_bc,
            "boundedness": r.pass.boundedness,
            "observability": r.pass.observability,
            "controllability": r.pass.controllability,
            "joint_nondegeneracy": r.pass.joint_nondegeneracy,
        },
        "sigma_min_claim_holds": r.sigma_min_claim_holds,
        "components": r.components.iter().map(|c| json!({
            "norm_a": c.norm_a,
            "norm_b": c.norm_b,
            "norm_c": c.norm_c,
            "norm_d": c.norm_d,
            "obs_rank": c.obs_rank,
            "ctrl_rank": c.ctrl_rank,
            "obs_ratio": c.obs_ratio,
            "ctrl_ratio": c.ctrl_ratio,
            "sigma_min_obs": c.sigma_min_obs,
            "sigma_min_ctrl": c.sigma_min_ctrl,
        })).collect::<Vec<_>>(),
    });
    if let Some(prefix) = &cfg.output {
        write_atomic(&with_ext(prefix, "json"), &to_json_pretty(&report))?;
    }

    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    let mut out = format!(
        "well-behaved (s={s}, kappa={kappa}, w_min={w_min}, gamma={gamma}): {}\n",
        if r.passes() { "yes" } else { "no" }
    );
    let _ = writeln!(out, "  weights              {} (smallest {:.4})", mark(r.pass.weights), r.w_min);
    let _ = writeln!(out, "  ||B||, ||C|| >= 1    {}", mark(r.pass.nontrivial_bc));
    let _ = writeln!(out, "  boundedness          {}", mark(r.pass.boundedness));
    let _ = writeln!(out, "  observability        {}", mark(r.pass.observability));
    let _ = writeln!(out, "  controllability      {}", mark(r.pass.controllability));
    let _ = writeln!(out, "  joint nondegeneracy  {} (gamma {:.4})", mark(r.pass.joint_nondegeneracy), r.gamma);
    for (i, c) in r.components.iter().enumerate() {
        let _ = writeln!(
            out,
            "  component {i}: obs rank {} ratio {:.3}, ctrl rank {} ratio {:.3}",
            c.obs_rank, c.obs_ratio, c.ctrl_rank, c.ctrl_ratio
        );
    }
    Ok(out)
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "n_trajectories",
    "seed",
    "err_a",
    "err_b",
    "err_c",
    "err_d",
    "max_param_error",
    "weight_error",
    "max_error",
    "wall_time_s",
    "error",
    "converged",
];

/// One grid point and seed of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n_trajectories: usize,
    pub seed: u64,
    pub err_a: f64,
    pub err_b: f64,
    pub err_c: f64,
    pub err_d: f64,
    pub max_param_error: f64,
    pub weight_error: f64,
    pub max_error: f64,
    pub wall_time_s: f64,
    /// Error code when learning failed for this point.
    pub error: Option<String>,
}

/// Learns from `n_traj` fresh trajectories drawn with `seed` and aligns to
/// `truth`. Identical to `generate`, `learn` and `evaluate` run with that seed.
pub fn sweep_point(cfg: &RunConfig, truth: &MixtureSpec, n_traj: usize, seed: u64) -> SweepRow {
    let s = cfg.s_or_default();
    let start = Instant::now();
    let result = (|| -> CliResult<AlignmentReport> {
        let data = sample(cfg, truth, n_traj, seed)?;
        let n = cfg.n.unwrap_or(truth.dims().n);
        let k = cfg.k.unwrap_or(truth.k());
        let (learned, _) = learn_dataset(&data, k, n, s, seed)?;
        Ok(learned.align(truth)?)
    })();
    let wall_time_s = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => {
            let worst = |f: fn(&ldslab::learner::ComponentAlignment) -> f64| r.components.iter().map(f).fold(0.0, f64::max);
            SweepRow {
                n_trajectories: n_traj,
                seed,
                err_a: worst(|c| c.err_a),
                err_b: worst(|c| c.err_b),
                err_c: worst(|c| c.err_c),
                err_d: worst(|c| c.err_d),
                max_param_error: r.max_param_error,
                weight_error: r.max_weight_error,
                max_error: r.max_error,
                wall_time_s,
                error: None,
            }
        }
        Err(e) => SweepRow {
            n_trajectories: n_traj,
            seed,
            err_a: f64::NAN,
            err_b: f64::NAN,
            err_c: f64::NAN,
            err_d: f64::NAN,
            max_param_error: f64::NAN,
            weight_error: f64::NAN,
            max_error: f64::NAN,
            wall_time_s,
            error: Some(e.code),
        },
    }
}

pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<String> {
    let prefix = cfg.require_path(&cfg.output, "output")?;
    let grid = match &cfg.grid {
        Some(g) if !g.is_empty() => g.clone(),
        _ => return Err(CliError::usage("--grid needs at least one trajectory count")),
    };
    let seeds = cfg.seeds.unwrap_or(DEFAULT_SEEDS);
    let truth = truth_mixture(cfg)?;
    let mut rows = Vec::with_capacity(grid.len() * seeds);
    for &n_traj in &grid {
        for j in 0..seeds {
            rows.push(sweep_point(cfg, &truth, n_traj, cfg.seed().wrapping_add(j as u64)));
        }
    }

    let header: Vec<String> = SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n_trajectories.to_string(),
                r.seed.to_string(),
                num(r.err_a),
                num(r.err_b),
                num(r.err_c),
                num(r.err_d),
                num(r.max_param_error),
                num(r.weight_error),
                num(r.max_error),
                num(r.wall_time_s),
                r.error.clone().unwrap_or_default(),
                r.error.is_none().to_string(),
            ]
        })
        .collect();
    write_atomic(&with_ext(prefix, "csv"), &csv_bytes(&header, &csv_rows)?)?;
    let summary = json!({
        "seed": cfg.seed(),
        "seeds": seeds,
        "grid": grid,
        "truth": ModelFile::from_mixture(&truth),
        "rows": rows,
    });
    write_atomic(&with_ext(prefix, "json"), &to_json_pretty(&summary))?;

    let mut out = format!("sweep over {} grid points x {seeds} seeds\n", grid.len());
    let _ = writeln!(out, "{:>12} {:>14} {:>14} {:>8}", "N", "mean max err", "mean weight err", "failed");
    for &n_traj in &grid {
        let at: Vec<&SweepRow> = rows.iter().filter(|r| r.n_trajectories == n_traj).collect();
        let ok: Vec<&&SweepRow> = at.iter().filter(|r| r.error.is_none()).collect();
        let mean = |f: fn(&SweepRow) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        let _ = writeln!(
            out,
            "{n_traj:>12} {:>14.4e} {:>14.4e} {:>8}",
            mean(|r| r.max_param_error),
            mean(|r| r.weight_error),
            at.len() - ok.len()
        );
    }
    let _ = writeln!(out, "wrote {}", with_ext(prefix, "csv").display());
    Ok(out)
}
