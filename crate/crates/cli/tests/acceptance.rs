//! Acceptance checks. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits nonzero if any fails. Pass criterion numbers as
//! arguments to run a subset: `cargo test --test acceptance -- 6 7`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use ldslab::ho_kalman::{ho_kalman, realization_residual};
use ldslab::lds::{
    closed_form_observation, joint_nondegeneracy_gamma, random_lds, random_well_behaved_mixture,
    sample_mixture_dataset, simulate_trajectory, simulate_with_draws, substream, well_behaved_report, Dims, LdsParams,
    MixtureSpec, NoiseConfig, NoiseDraws, RandomSystemOptions, Trajectory,
};
use ldslab::learner::{canonicalize_fully_observed, cluster_posterior, component_log_likelihood, learn_from_exact_moments, LearnConfig};
use ldslab::linalg::{eigenvalues, min_cost_assignment};
use ldslab::moments::{estimate_sixth_moments, exact_sixth_moment_block};
use ldslab::tensor::{jennrich_decompose, JennrichOptions, Tensor3};
use ldslab_cli::commands::learn_dataset;
use ldslab_cli::format::{write_dataset, write_model, ModelFile};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

// ---------------------------------------------------------------- helpers

fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_dims<R: Rng>(rng: &mut R) -> Dims {
    Dims {
        m: rng.random_range(1..=3),
        n: rng.random_range(1..=3),
        p: rng.random_range(1..=3),
    }
}

/// Smallest and largest singular values from the eigenvalues of the Gram matrix
/// on the short side.
fn extreme_singular_values(m: &DMatrix<f64>) -> (f64, f64) {
    let gram = if m.nrows() >= m.ncols() { m.transpose() * m } else { m * m.transpose() };
    let ev = gram.symmetric_eigen().eigenvalues;
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
    let hi = ev.iter().copied().fold(0.0, f64::max).sqrt();
    (lo, hi)
}

fn observability(p: &LdsParams, s: usize) -> DMatrix<f64> {
    let (m, n) = (p.m(), p.n());
    let mut out = DMatrix::zeros(m * s, n);
    let mut block = p.c().clone();
    for i in 0..s {
        out.view_mut((i * m, 0), (m, n)).copy_from(&block);
        block = &block * p.a();
    }
    out
}

fn controllability(p: &LdsParams, s: usize) -> DMatrix<f64> {
    let (n, q) = (p.n(), p.p());
    let mut out = DMatrix::zeros(n, q * s);
    let mut block = p.b().clone();
    for i in 0..s {
        out.view_mut((0, i * q), (n, q)).copy_from(&block);
        block = p.a() * &block;
    }
    out
}

/// `[D, CB, CAB, …]` up to `horizon`, by direct products.
fn markov_blocks(p: &LdsParams, horizon: usize) -> DMatrix<f64> {
    let (m, q) = (p.m(), p.p());
    let mut g = DMatrix::zeros(m, q * (horizon + 1));
    g.view_mut((0, 0), (m, q)).copy_from(p.d());
    let mut a_pow = DMatrix::identity(p.n(), p.n());
    for j in 1..=horizon {
        let block = p.c() * &a_pow * p.b();
        g.view_mut((0, j * q), (m, q)).copy_from(&block);
        a_pow = &a_pow * p.a();
    }
    g
}

/// Errors of `est` against `truth` after the basis change `T = Ô⁺ O`,
/// solved through the normal equations: `[A, B, C, D]`.
fn aligned_errors(truth: &LdsParams, est: &LdsParams, s: usize) -> [f64; 4] {
    let o = observability(truth, s);
    let o_hat = observability(est, s);
    let gram = o_hat.transpose() * &o_hat;
    let t = gram.lu().solve(&(o_hat.transpose() * o)).expect("estimate is observable");
    let t_inv = t.clone().try_inverse().expect("basis change is invertible");
    [
        (truth.a() - &t_inv * est.a() * &t).norm(),
        (truth.b() - &t_inv * est.b()).norm(),
        (truth.c() - est.c() * &t).norm(),
        (truth.d() - est.d()).norm(),
    ]
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

/// Best matching of estimated to true components: `(max parameter error,
/// max weight error, perm)` where `perm[j]` is the true index for estimate `j`.
fn mixture_errors(truth: &MixtureSpec, weights: &[f64], est: &[LdsParams], s: usize) -> (f64, f64, Vec<usize>) {
    let mut best = (f64::INFINITY, f64::INFINITY, Vec::new());
    for perm in permutations(truth.k()) {
        let mut param = 0.0f64;
        let mut weight = 0.0f64;
        for (j, &i) in perm.iter().enumerate() {
            let errs = aligned_errors(&truth.components()[i], &est[j], s);
            param = errs.iter().copied().fold(param, f64::max);
            weight = weight.max((truth.weights()[i] - weights[j]).abs());
        }
        if param < best.0 {
            best = (param, weight, perm);
        }
    }
    best
}

fn unequal_weight_mixture(seed: u64, k: usize, dims: Dims, s: usize) -> MixtureSpec {
    let mix = random_well_behaved_mixture(&mut substream(seed, 0), k, dims, s, 50.0, 0.3, &RandomSystemOptions::default(), 500)
        .expect("well-behaved mixture");
    let raw: Vec<f64> = (0..k).map(|i| 1.0 + (seed.wrapping_add(i as u64) % 5) as f64 * 0.3).collect();
    let total: f64 = raw.iter().sum();
    MixtureSpec::new(mix.components().to_vec(), raw.iter().map(|w| w / total).collect()).unwrap()
}

fn row_major(n_rows: usize, n_cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n_rows, n_cols, data)
}

/// Two-component `m = n = p = 2` mixture with equal weights and γ ≈ 3.8 at s = 2.
fn committed_mixture() -> MixtureSpec {
    let first = LdsParams::new(
        row_major(2, 2, &[-0.39539611784027057, 0.006096667199203469, -0.021461883451304585, -0.11504210490219274]),
        row_major(2, 2, &[-0.8507470917214476, -0.5311662484705346, 2.5132388240313124, -0.1817349292785056]),
        row_major(2, 2, &[1.371561448441511, 0.8640829598636984, 1.3390385533850837, 2.53434962249815]),
        row_major(2, 2, &[0.7386688295829055, 0.5923972193025477, 0.9558552473348231, 0.2995622134439007]),
    )
    .unwrap();
    let second = LdsParams::new(
        row_major(2, 2, &[0.1207127270275453, -0.01405482520854366, -0.07538823034391778, -0.23679122236424197]),
        row_major(2, 2, &[-1.1746583145738063, -1.5191627236531478, -1.29915327421795, 0.04103374799200856]),
        row_major(2, 2, &[-0.5370521239426521, 1.366587212158229, -1.8344651105188736, 0.04637586823243116]),
        row_major(2, 2, &[1.381941774399495, 0.8827119181578855, 0.9210244254628027, -0.09398315536166381]),
    )
    .unwrap();
    MixtureSpec::uniform(vec![first, second]).unwrap()
}

// ---------------------------------------------------------------- criteria

fn simulation_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = substream(seed, 0);
        let dims = random_dims(&mut rng);
        let len = rng.random_range(1..=30);
        let params = random_lds(&mut rng, dims, &RandomSystemOptions::default());
        let noise = NoiseConfig::standard(seed);
        let traj = simulate_trajectory(&params, len, &noise, &mut substream(seed, 1)).unwrap();
        let draws = NoiseDraws::sample(dims, len, noise.noise_scale, &mut substream(seed, 1));
        assert_eq!(traj, simulate_with_draws(&params, &draws, None).unwrap());
        for t in 0..len {
            let closed = closed_form_observation(&params, t, &draws).unwrap();
            worst = worst.max((traj.y(t) - &closed).amax());
            // Independent unrolling: C A^t x0 + Σ_j C A^{t-1-j} (B u_j + w_j) + D u_t + z_t.
            let mut y = params.d() * draws.u.column(t) + draws.z.column(t);
            let mut a_pow = DMatrix::identity(dims.n, dims.n);
            for j in (0..t).rev() {
                y += params.c() * &a_pow * (params.b() * draws.u.column(j) + draws.w.column(j));
                a_pow = &a_pow * params.a();
            }
            y += params.c() * &a_pow * &draws.x0;
            worst_oracle = worst_oracle.max((traj.y(t) - y).amax());
        }
    }
    Outcome::new(
        worst <= 1e-12 && worst_oracle <= 1e-12,
        format!("max |sim - closed form| = {worst:.2e}, vs unrolled oracle {worst_oracle:.2e} (tol 1e-12, 100 systems)"),
    )
}

fn moment_unbiasedness() -> Outcome {
    let dims = Dims { m: 2, n: 2, p: 2 };
    let s = 2;
    let mix = random_well_behaved_mixture(&mut substream(2, 0), 2, dims, s, 50.0, 0.3, &RandomSystemOptions::default(), 500)
        .unwrap();
    let data = sample_mixture_dataset(&mix, 100_000, 6 * (s + 1), &NoiseConfig::standard(200)).unwrap();
    let blocks = estimate_sixth_moments(&data, s).unwrap();
    let mut worst_z = 0.0f64;
    let mut outside = 0usize;
    let mut mean_mismatch = 0.0f64;
    for k1 in 0..=2 * s {
        for k2 in 0..=2 * s {
            for k3 in 0..=2 * s {
                let est = blocks.block(k1, k2, k3).unwrap();
                let exact = exact_sixth_moment_block(&mix, k1, k2, k3);
                let (mean, se) = common::sixth_moment_mean_and_se(&data, k1, k2, k3);
                for i in 0..est.len() {
                    mean_mismatch = mean_mismatch.max((est[i] - mean[i]).abs() / mean[i].abs().max(1.0));
                    let z = (est[i] - exact[i]).abs() / se[i];
                    worst_z = worst_z.max(z);
                    if z > 5.0 {
                        outside += 1;
                    }
                }
            }
        }
    }

    // Error at N and 4N, averaged over independent datasets.
    let total_error = |n: usize, seed: u64| {
        let data = sample_mixture_dataset(&mix, n, 6 * (s + 1), &NoiseConfig::standard(seed)).unwrap();
        let blocks = estimate_sixth_moments(&data, s).unwrap();
        let mut sq = 0.0;
        for k1 in 0..=2 * s {
            for k2 in 0..=2 * s {
                for k3 in 0..=2 * s {
                    let est = blocks.block(k1, k2, k3).unwrap();
                    let exact = exact_sixth_moment_block(&mix, k1, k2, k3);
                    sq += est.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                }
            }
        }
        sq.sqrt()
    };
    let seeds = 6;
    let small: f64 = (0..seeds).map(|i| total_error(25_000, 300 + i)).sum::<f64>() / seeds as f64;
    let large: f64 = (0..seeds).map(|i| total_error(100_000, 400 + i)).sum::<f64>() / seeds as f64;
    let ratio = small / large;
    Outcome::new(
        outside == 0 && mean_mismatch <= 1e-9 && (1.4..=2.6).contains(&ratio),
        format!(
            "{outside} of 8000 entries beyond 5 SE (max z {worst_z:.2}); error ratio N=2.5e4 vs 1e5 = {ratio:.3} (want 2 +/- 30%)"
        ),
    )
}

/// Unit-norm Gaussian columns with smallest singular value at least 0.1.
fn factor_matrix<R: Rng>(rng: &mut R, q: usize, r: usize) -> DMatrix<f64> {
    loop {
        let mut f = gaussian(rng, q, r);
        for mut col in f.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        if extreme_singular_values(&f).0 >= 0.1 {
            return f;
        }
    }
}

fn outer3(x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Vec<f64> {
    let q = x.len();
    let mut out = vec![0.0; q * q * q];
    for i in 0..q {
        for j in 0..q {
            for k in 0..q {
                out[(i * q + j) * q + k] = x[i] * y[j] * z[k];
            }
        }
    }
    out
}

fn jennrich_exactness() -> Outcome {
    let opts = JennrichOptions::default();
    let mut exact_ok = 0;
    let mut robust_ok = 0;
    let mut worst_exact = 0.0f64;
    let mut worst_robust = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = substream(seed, 30);
        let r = rng.random_range(1..=10);
        let q = rng.random_range(r.max(2)..=30);
        let [x, y, z] = [0, 1, 2].map(|_| factor_matrix(&mut rng, q, r));
        let truth: Vec<Vec<f64>> = (0..r)
            .map(|i| outer3(&x.column(i).into_owned(), &y.column(i).into_owned(), &z.column(i).into_owned()))
            .collect();
        let mut sum = vec![0.0; q * q * q];
        for t in &truth {
            for (a, b) in sum.iter_mut().zip(t) {
                *a += b;
            }
        }
        let mut noise: Vec<f64> = (0..q * q * q).map(|_| rng.sample(StandardNormal)).collect();
        let noise_norm = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
        noise.iter_mut().for_each(|v| *v *= 1e-6 / noise_norm);
        let perturbed: Vec<f64> = sum.iter().zip(&noise).map(|(a, b)| a + b).collect();

        let score = |data: Vec<f64>, rng_seed: u64| -> f64 {
            let tensor = Tensor3::from_vec(q, data).unwrap();
            let Ok(found) = jennrich_decompose(&tensor, r, &mut substream(rng_seed, 31), &opts) else {
                return f64::INFINITY;
            };
            let found: Vec<Tensor3> = found.iter().map(|c| c.tensor()).collect();
            let dist = |i: usize, j: usize| {
                truth[i].iter().zip(found[j].as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            };
            let cost = DMatrix::from_fn(r, r, dist);
            let assign = min_cost_assignment(&cost);
            assign.iter().enumerate().map(|(i, &j)| cost[(i, j)]).fold(0.0, f64::max)
        };
        let e = score(sum, seed);
        let p = score(perturbed, seed);
        worst_exact = worst_exact.max(if e.is_finite() { e } else { 0.0 });
        worst_robust = worst_robust.max(if p.is_finite() { p } else { 0.0 });
        exact_ok += (e <= 1e-6) as usize;
        robust_ok += (p <= 1e-3) as usize;
    }
    Outcome::new(
        exact_ok >= 95 && robust_ok >= 90,
        format!(
            "exact: {exact_ok}/100 within 1e-6 (worst finite {worst_exact:.1e}); perturbed 1e-6: {robust_ok}/100 within 1e-3 (worst finite {worst_robust:.1e})"
        ),
    )
}

/// `max(‖C − Ĉ T‖_F, ‖B − T⁻¹ B̂‖_F)` at `T`.
struct BasisMismatch {
    truth: LdsParams,
    est: LdsParams,
}

impl CostFunction for BasisMismatch {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        let n = self.truth.n();
        let t = DMatrix::from_column_slice(n, n, x);
        let Some(t_inv) = t.clone().try_inverse() else {
            return Ok(f64::INFINITY);
        };
        let err_c = (self.truth.c() - self.est.c() * &t).norm();
        let err_b = (self.truth.b() - t_inv * self.est.b()).norm();
        Ok(err_c.max(err_b))
    }
}

/// Smallest `max(‖C − Ĉ T‖_F, ‖B − T⁻¹ B̂‖_F)` found by Nelder-Mead over `T`,
/// starting from `Ô⁺ O`.
fn best_alignment(truth: &LdsParams, est: &LdsParams, s: usize) -> f64 {
    let o_hat = observability(est, s);
    let start = (o_hat.transpose() * &o_hat)
        .lu()
        .solve(&(o_hat.transpose() * observability(truth, s)))
        .unwrap();
    let x0: Vec<f64> = start.as_slice().to_vec();
    let mut simplex = vec![x0.clone()];
    for i in 0..x0.len() {
        let mut v = x0.clone();
        v[i] += 0.05 * start.norm() / (x0.len() as f64).sqrt();
        simplex.push(v);
    }
    let problem = BasisMismatch {
        truth: truth.clone(),
        est: est.clone(),
    };
    let initial = problem.cost(&x0).unwrap();
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).unwrap();
    let best = Executor::new(problem, solver)
        .configure(|state| state.max_iters(20_000))
        .run()
        .map(|res| res.state.best_cost)
        .unwrap_or(f64::INFINITY);
    best.min(initial)
}

fn matched_eigen_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let ea = eigenvalues(a);
    let eb = eigenvalues(b);
    let n = ea.len();
    permutations(n)
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| (ea[i] - eb[j]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

fn ho_kalman_exactness() -> Outcome {
    let s = 3;
    let mut systems = 0;
    let mut worst_residual = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut bound_ok = 0;
    let mut bound_checks = 0;
    let mut worst_bound_ratio = 0.0f64;
    let mut searched = 0;
    let mut seed = 0u64;
    while systems < 100 {
        seed += 1;
        let mut rng = substream(seed, 40);
        let dims = random_dims(&mut rng);
        let truth = random_lds(&mut rng, dims, &RandomSystemOptions::default());
        let obs = extreme_singular_values(&observability(&truth, s));
        let ctrl = extreme_singular_values(&controllability(&truth, s));
        if obs.0 <= 1e-6 * obs.1 || ctrl.0 <= 1e-6 * ctrl.1 {
            continue;
        }
        systems += 1;
        let g = markov_blocks(&truth, 2 * s);
        let real = ho_kalman(&g, dims.p, s, dims.n).unwrap();
        worst_residual = worst_residual.max(realization_residual(&g, &real.params, s).unwrap());
        worst_residual = worst_residual.max((markov_blocks(&real.params, 2 * s) - &g).amax());
        worst_eig = worst_eig.max(matched_eigen_gap(truth.a(), real.params.a()));

        for delta in [1e-6, 1e-4] {
            let mut dg = gaussian(&mut rng, g.nrows(), g.ncols());
            dg *= delta / extreme_singular_values(&dg).1;
            let est = ho_kalman(&(&g + &dg), dims.p, s, dims.n).unwrap().params;
            let [_, err_b, err_c, err_d] = aligned_errors(&truth, &est, s);
            let n = dims.n as f64;
            let bound = 5.0 * (n * delta).sqrt();
            let mut err_bc = err_b.max(err_c);
            if err_bc > bound {
                err_bc = best_alignment(&truth, &est, s);
                searched += 1;
            }
            bound_checks += 1;
            worst_bound_ratio = worst_bound_ratio.max(err_bc / bound);
            if err_bc <= bound && err_d <= n.sqrt() * delta {
                bound_ok += 1;
            }
        }
    }
    Outcome::new(
        worst_residual <= 1e-8 && worst_eig <= 1e-6 && bound_ok == bound_checks,
        format!(
            "residual {worst_residual:.1e} (tol 1e-8), eigenvalue gap {worst_eig:.1e} (tol 1e-6); stable bound held {bound_ok}/{bound_checks} (largest error/bound {worst_bound_ratio:.3}, {searched} needed a search over T)"
        ),
    )
}

fn noiseless_pipeline() -> Outcome {
    let dims = Dims { m: 2, n: 2, p: 2 };
    let s = 2;
    let mut passed = 0;
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..50u64 {
        let k = 1 + (seed % 3) as usize;
        let mix = unequal_weight_mixture(1000 + seed, k, dims, s);
        assert!(joint_nondegeneracy_gamma(&mix, s) >= 0.3);
        let Ok(learned) = learn_from_exact_moments(&mix, &LearnConfig::new(k, dims.n, s), &mut substream(seed, 1)) else {
            continue;
        };
        let (param, weight, _) = mixture_errors(&mix, &learned.weights(), &learned.params(), s);
        if param <= 1e-6 && weight <= 1e-8 {
            passed += 1;
            worst = (worst.0.max(param), worst.1.max(weight));
        }
    }
    Outcome::new(
        passed >= 45,
        format!(
            "{passed}/50 seeds with parameter error <= 1e-6 and weight error <= 1e-8 (largest among passing: {:.1e}, {:.1e})",
            worst.0, worst.1
        ),
    )
}

const CRITERION6_SEED: u64 = 2024;

fn end_to_end() -> Outcome {
    let mix = committed_mixture();
    let s = 2;
    let gamma = joint_nondegeneracy_gamma(&mix, s);
    let data = sample_mixture_dataset(&mix, 200_000, 6 * (s + 1), &NoiseConfig::standard(CRITERION6_SEED)).unwrap();
    let mut rows = Vec::new();
    for n_traj in [20_000, 200_000] {
        let errs = match learn_dataset(&data[..n_traj], 2, 2, s, CRITERION6_SEED) {
            Ok((learned, _)) => {
                let (param, weight, _) = mixture_errors(&mix, &learned.weights(), &learned.params(), s);
                let lib = learned.align(&mix).unwrap();
                assert!((lib.max_param_error - param).abs() <= 1e-9 * param.max(1.0));
                (param, weight)
            }
            Err(_) => (f64::INFINITY, f64::INFINITY),
        };
        rows.push((n_traj, errs));
    }
    let (_, (small_param, _)) = rows[0];
    let (_, (param, weight)) = rows[1];
    Outcome::new(
        gamma >= 0.5 && param <= 0.15 && weight <= 0.05 && small_param > param,
        format!(
            "gamma {gamma:.3}; N=2e4: param {small_param:.4}; N=2e5: param {param:.4} (tol 0.15), weight {weight:.4} (tol 0.05)"
        ),
    )
}

fn clustering() -> Outcome {
    let truth = MixtureSpec::uniform(vec![LdsParams::scalar(0.9, 1.0, 1.0, 0.0), LdsParams::scalar(-0.9, 1.0, 1.0, 0.0)])
        .unwrap();
    let len = 18;
    let test = sample_mixture_dataset(&truth, 1000, len, &NoiseConfig::standard(7)).unwrap();

    let mut correct = 0;
    let mut worst_ll = 0.0f64;
    let true_post: Vec<Vec<f64>> = test
        .iter()
        .map(|traj| {
            let post = cluster_posterior(truth.weights(), truth.components(), traj).unwrap();
            if Some(post.argmax()) == traj.label {
                correct += 1;
            }
            for c in truth.components() {
                let lib = component_log_likelihood(c, traj).unwrap();
                worst_ll = worst_ll.max((lib - common::kalman_log_likelihood(c, traj)).abs());
                worst_ll = worst_ll.max((lib - common::brute_force_log_likelihood(c, traj)).abs());
            }
            post.probabilities
        })
        .collect();

    let train = sample_mixture_dataset(&truth, 200_000, len, &NoiseConfig::standard(77)).unwrap();
    let (close, detail) = match learn_dataset(&train, 2, 1, 2, 77) {
        Ok((learned, _)) => {
            let params: Vec<LdsParams> = learned.params().iter().map(|p| canonicalize_fully_observed(p).unwrap()).collect();
            let (param, _, perm) = mixture_errors(&truth, &learned.weights(), &params, 2);
            let weights = learned.weights();
            let close = test
                .iter()
                .zip(&true_post)
                .filter(|(traj, tp)| {
                    let lp = cluster_posterior(&weights, &params, traj).unwrap().probabilities;
                    let tv: f64 = perm.iter().enumerate().map(|(j, &i)| (lp[j] - tp[i]).abs()).sum::<f64>() / 2.0;
                    tv <= 0.05
                })
                .count();
            (close, format!("learned parameter error {param:.4}"))
        }
        Err(e) => (0, format!("learning failed: {e}")),
    };
    let accuracy = correct as f64 / test.len() as f64;
    Outcome::new(
        accuracy >= 0.99 && close >= 950 && worst_ll <= 1e-8,
        format!(
            "true-parameter accuracy {accuracy:.3} (want >= 0.99); learned posterior within TV 0.05 on {close}/1000 (want >= 950, {detail}); log-likelihood gap {worst_ll:.1e} (tol 1e-8)"
        ),
    )
}

fn diagnostics() -> Outcome {
    let mut worst_dup = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = substream(seed, 80);
        let dims = random_dims(&mut rng);
        let a = random_lds(&mut rng, dims, &RandomSystemOptions::default());
        let b = random_lds(&mut rng, dims, &RandomSystemOptions::default());
        let dup = MixtureSpec::uniform(vec![a.clone(), b, a]).unwrap();
        let s = 1 + (seed % 3) as usize;
        worst_dup = worst_dup.max(well_behaved_report(&dup, s, 100.0, 0.0, 0.0).gamma);
    }

    let s = 3;
    let kappa = 20.0;
    let mut found = 0;
    let mut violations = 0;
    let mut seed = 0u64;
    while found < 100 && seed < 100_000 {
        seed += 1;
        let mut rng = substream(seed, 81);
        let dims = random_dims(&mut rng);
        let params = random_lds(&mut rng, dims, &RandomSystemOptions::default());
        let mix = MixtureSpec::uniform(vec![params.clone()]).unwrap();
        if !well_behaved_report(&mix, s, kappa, 0.0, 0.0).passes() {
            continue;
        }
        found += 1;
        let limit = (s as f64).sqrt() * kappa;
        let obs_min = extreme_singular_values(&observability(&params, s)).0;
        let ctrl_min = extreme_singular_values(&controllability(&params, s)).0;
        if obs_min > limit || ctrl_min > limit {
            violations += 1;
        }
        let mut a_pow = DMatrix::identity(dims.n, dims.n);
        for t in 1..=4 * s {
            a_pow = &a_pow * params.a();
            let rhs = ((dims.n as f64).sqrt() * kappa).powf(t as f64 / s as f64);
            if a_pow.norm() > rhs * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    Outcome::new(
        worst_dup == 0.0 && found == 100 && violations == 0,
        format!("largest gamma with a duplicated component {worst_dup:.1e}; {found} passing systems, {violations} inequality violations"),
    )
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mixture = dir.path().join("mixture.json");
    let data_path = dir.path().join("data.jsonl");
    write_model(&mixture, &ModelFile::from_mixture(&committed_mixture())).unwrap();
    let data: Vec<Trajectory> = sample_mixture_dataset(&committed_mixture(), 20_000, 18, &NoiseConfig::standard(9)).unwrap();
    write_dataset(&data_path, &data).unwrap();

    let mut outputs = Vec::new();
    for threads in [None, Some("1"), Some("2"), Some("4"), Some("8")] {
        for run in 0..2 {
            let model = dir.path().join(format!("model-{}-{run}.json", threads.unwrap_or("default")));
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_ldslab"));
            cmd.args(["learn", "--dataset", data_path.to_str().unwrap(), "--model", model.to_str().unwrap()])
                .args(["--k", "2", "--n", "2", "--s", "2", "--seed", "31"])
                .env_remove("LDSLAB_THREADS");
            if let Some(t) = threads {
                cmd.env("LDSLAB_THREADS", t);
            }
            let out = cmd.output().unwrap();
            if !out.status.success() {
                return Outcome::new(false, format!("learn failed: {}", String::from_utf8_lossy(&out.stderr)));
            }
            outputs.push(std::fs::read(&model).unwrap());
        }
    }
    let identical = outputs.iter().all(|o| o == &outputs[0]);
    Outcome::new(
        identical,
        format!("{} model files over thread settings default/1/2/4/8, all byte-identical: {identical}", outputs.len()),
    )
}

// ---------------------------------------------------------------- driver

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(u32, &str, Check, Option<Duration>); 9] = [
        (1, "simulation oracle", simulation_oracle, Some(Duration::from_secs(10))),
        (2, "moment unbiasedness", moment_unbiasedness, Some(Duration::from_secs(300))),
        (3, "Jennrich exactness", jennrich_exactness, Some(Duration::from_secs(120))),
        (4, "Ho-Kalman exactness", ho_kalman_exactness, Some(Duration::from_secs(60))),
        (5, "noiseless-oracle pipeline", noiseless_pipeline, Some(Duration::from_secs(120))),
        (6, "end-to-end statistical run", end_to_end, Some(Duration::from_secs(900))),
        (7, "clustering optimality", clustering, None),
        (8, "diagnostics", diagnostics, Some(Duration::from_secs(60))),
        (9, "reproducibility", reproducibility, None),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, check, limit) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = outcome.pass && in_time;
        let budget = limit.map(|l| format!(" of {}s", l.as_secs())).unwrap_or_default();
        println!(
            "criterion {id} {}: {name}: {} [{:.1}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
