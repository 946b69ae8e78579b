//! Linear dynamical systems, mixtures of them, trajectory simulation and the
//! observability / controllability diagnostics.
//!
//! A single system evolves as
//!
//! ```text
//! x[t+1] = A x[t] + B u[t] + w[t]
//! y[t]   = C x[t] + D u[t] + z[t]
//! ```
//!
//! with `u[t] ~ N(0, I_p)` and `x[0], w[t], z[t]` isotropic Gaussians scaled
//! by [`NoiseConfig::noise_scale`]. Time is 0-based throughout: a trajectory of
//! length `ℓ` holds `u[0..ℓ]` and `y[0..ℓ]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{LdsError, Result};
use crate::linalg::{self, SortedSvd, RANK_RTOL};

/// Parameters `(A, B, C, D)` of one linear dynamical system.
#[derive(Debug, Clone, PartialEq)]
pub struct LdsParams {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

fn check_finite(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LdsError::NonFinite(name))
    }
}

fn mismatch(matrix: &'static str, expected: (usize, usize), found: (usize, usize)) -> LdsError {
    LdsError::DimensionMismatch {
        matrix,
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}

impl LdsParams {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(mismatch("A", (n, n), a.shape()));
        }
        let p = b.ncols();
        if b.nrows() != n {
            return Err(mismatch("B", (n, p), b.shape()));
        }
        let m = c.nrows();
        if c.ncols() != n {
            return Err(mismatch("C", (m, n), c.shape()));
        }
        if d.shape() != (m, p) {
            return Err(mismatch("D", (m, p), d.shape()));
        }
        check_finite("A", &a)?;
        check_finite("B", &b)?;
        check_finite("C", &c)?;
        check_finite("D", &d)?;
        Ok(LdsParams { a, b, c, d })
    }

    /// Scalar system with `n = m = p = 1`.
    pub fn scalar(a: f64, b: f64, c: f64, d: f64) -> Self {
        let one = |x| DMatrix::from_element(1, 1, x);
        LdsParams::new(one(a), one(b), one(c), one(d)).expect("scalar system is well formed")
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Observation dimension.
    pub fn m(&self) -> usize {
        self.c.nrows()
    }
    /// Input dimension.
    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn dims(&self) -> Dims {
        Dims {
            m: self.m(),
            n: self.n(),
            p: self.p(),
        }
    }

    /// Change of state basis `x' = T x`: `(T A T⁻¹, T B, C T⁻¹, D)`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<LdsParams> {
        let n = self.n();
        if t.shape() != (n, n) {
            return Err(mismatch("T", (n, n), t.shape()));
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| LdsError::InvalidArgument("similarity transform is singular".into()))?;
        LdsParams::new(
            t * &self.a * &t_inv,
            t * &self.b,
            &self.c * &t_inv,
            self.d.clone(),
        )
    }

    /// Markov parameter `X_j`: `D` for `j = 0`, `C A^{j-1} B` otherwise.
    pub fn markov_parameter(&self, j: usize) -> DMatrix<f64> {
        if j == 0 {
            return self.d.clone();
        }
        // Same multiplication order as `markov_matrix`, so blocks agree bitwise.
        let mut a_pow_b = self.b.clone();
        for _ in 1..j {
            a_pow_b = &self.a * a_pow_b;
        }
        &self.c * a_pow_b
    }

    /// `G_T = [D, CB, CAB, …, CA^{T-1}B]`, an `m × (T+1)p` matrix.
    pub fn markov_matrix(&self, horizon: usize) -> DMatrix<f64> {
        let (m, p) = (self.m(), self.p());
        let mut g = DMatrix::zeros(m, (horizon + 1) * p);
        g.columns_mut(0, p).copy_from(&self.d);
        let mut a_pow_b = self.b.clone();
        for j in 1..=horizon {
            g.columns_mut(j * p, p).copy_from(&(&self.c * &a_pow_b));
            a_pow_b = &self.a * a_pow_b;
        }
        g
    }

    /// `O_s = [C; CA; …; CA^{s-1}]`, an `sm × n` matrix.
    pub fn observability_matrix(&self, s: usize) -> DMatrix<f64> {
        let (m, n) = (self.m(), self.n());
        let mut o = DMatrix::zeros(s * m, n);
        let mut block = self.c.clone();
        for i in 0..s {
            o.rows_mut(i * m, m).copy_from(&block);
            block = block * &self.a;
        }
        o
    }

    /// `Q_s = [B, AB, …, A^{s-1}B]`, an `n × sp` matrix.
    pub fn controllability_matrix(&self, s: usize) -> DMatrix<f64> {
        let (n, p) = (self.n(), self.p());
        let mut q = DMatrix::zeros(n, s * p);
        let mut block = self.b.clone();
        for j in 0..s {
            q.columns_mut(j * p, p).copy_from(&block);
            block = &self.a * block;
        }
        q
    }
}

/// Shared dimensions `(m, n, p)` of a system or mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub p: usize,
}

/// Weighted mixture of systems sharing `(m, n, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    components: Vec<LdsParams>,
    weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(components: Vec<LdsParams>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(LdsError::InvalidArgument("mixture needs at least one component".into()));
        }
        if components.len() != weights.len() {
            return Err(LdsError::InvalidArgument(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        let dims = components[0].dims();
        if let Some(i) = components.iter().position(|c| c.dims() != dims) {
            return Err(LdsError::InvalidArgument(format!(
                "component {i} has dimensions {:?}, expected {:?}",
                components[i].dims(),
                dims
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(LdsError::InvalidArgument("weights must be strictly positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LdsError::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(MixtureSpec { components, weights })
    }

    /// Equal-weight mixture.
    pub fn uniform(components: Vec<LdsParams>) -> Result<Self> {
        let k = components.len().max(1);
        MixtureSpec::new(components, vec![1.0 / k as f64; k])
    }

    pub fn components(&self) -> &[LdsParams] {
        &self.components
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn k(&self) -> usize {
        self.components.len()
    }
    pub fn dims(&self) -> Dims {
        self.components[0].dims()
    }

    /// Reorders components (and weights) so that new index `i` holds old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<MixtureSpec> {
        MixtureSpec::new(
            perm.iter().map(|&i| self.components[i].clone()).collect(),
            perm.iter().map(|&i| self.weights[i]).collect(),
        )
    }

    /// Index drawn by the mixing weights from a uniform variate in `[0, 1)`.
    fn pick(&self, uniform: f64) -> usize {
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if uniform < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }
}

/// Inputs `u[0..ℓ]` (columns of a `p × ℓ` matrix) and observations `y[0..ℓ]`
/// (columns of an `m × ℓ` matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    u: DMatrix<f64>,
    y: DMatrix<f64>,
    pub label: Option<usize>,
}

impl Trajectory {
    pub fn new(u: DMatrix<f64>, y: DMatrix<f64>, label: Option<usize>) -> Result<Self> {
        if u.ncols() != y.ncols() {
            return Err(LdsError::InvalidArgument(format!(
                "u has {} steps but y has {}",
                u.ncols(),
                y.ncols()
            )));
        }
        if u.ncols() == 0 {
            return Err(LdsError::InvalidArgument("trajectory must have at least one step".into()));
        }
        check_finite("u", &u)?;
        check_finite("y", &y)?;
        Ok(Trajectory { u, y, label })
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All inputs as a `p × ℓ` matrix.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// All observations as an `m × ℓ` matrix.
    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn u(&self, t: usize) -> DVector<f64> {
        self.u.column(t).into_owned()
    }

    pub fn y(&self, t: usize) -> DVector<f64> {
        self.y.column(t).into_owned()
    }

    pub fn m(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.u.nrows()
    }
}

/// Seed and noise multiplier. `noise_scale = 1` is the standard isotropic
/// model; `0` removes the initial state and both noise terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub seed: u64,
    pub noise_scale: f64,
}

impl NoiseConfig {
    pub fn new(seed: u64, noise_scale: f64) -> Result<Self> {
        if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
            return Err(LdsError::InvalidArgument(format!(
                "noise_scale must be a finite nonnegative number, got {noise_scale}"
            )));
        }
        Ok(NoiseConfig { seed, noise_scale })
    }

    pub fn standard(seed: u64) -> Self {
        NoiseConfig {
            seed,
            noise_scale: 1.0,
        }
    }

    pub fn noiseless(seed: u64) -> Self {
        NoiseConfig {
            seed,
            noise_scale: 0.0,
        }
    }
}

/// Generator for trajectory `index` under `seed`.
///
/// ChaCha20 keyed by the seed, with the trajectory index selecting the
/// stream, so every trajectory has its own reproducible substream.
pub fn substream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * scale
    })
}

/// One realization of every random quantity driving a trajectory.
///
/// Columns are time steps: `u` is `p × ℓ`, `w` is `n × ℓ`, `z` is `m × ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraws {
    pub x0: DVector<f64>,
    pub u: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl NoiseDraws {
    pub fn sample<R: Rng + ?Sized>(dims: Dims, length: usize, noise_scale: f64, rng: &mut R) -> Self {
        let x0 = gaussian_matrix(rng, dims.n, 1, noise_scale).column(0).into_owned();
        let mut u = DMatrix::zeros(dims.p, length);
        let mut w = DMatrix::zeros(dims.n, length);
        let mut z = DMatrix::zeros(dims.m, length);
        for t in 0..length {
            for i in 0..dims.p {
                u[(i, t)] = rng.sample(StandardNormal);
            }
            for i in 0..dims.n {
                let e: f64 = rng.sample(StandardNormal);
                w[(i, t)] = e * noise_scale;
            }
            for i in 0..dims.m {
                let e: f64 = rng.sample(StandardNormal);
                z[(i, t)] = e * noise_scale;
            }
        }
        NoiseDraws { x0, u, w, z }
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, params: &LdsParams) -> Result<()> {
        let dims = params.dims();
        let len = self.len();
        if self.x0.len() != dims.n {
            return Err(mismatch("x0", (dims.n, 1), (self.x0.len(), 1)));
        }
        if self.u.nrows() != dims.p {
            return Err(mismatch("u", (dims.p, len), self.u.shape()));
        }
        if self.w.shape() != (dims.n, len) {
            return Err(mismatch("w", (dims.n, len), self.w.shape()));
        }
        if self.z.shape() != (dims.m, len) {
            return Err(mismatch("z", (dims.m, len), self.z.shape()));
        }
        Ok(())
    }
}

/// Iterates the state recursion on explicit noise draws.
pub fn simulate_with_draws(params: &LdsParams, draws: &NoiseDraws, label: Option<usize>) -> Result<Trajectory> {
    draws.check(params)?;
    let len = draws.len();
    let mut y = DMatrix::zeros(params.m(), len);
    let mut x = draws.x0.clone();
    for t in 0..len {
        let u_t = draws.u.column(t);
        let y_t = params.c() * &x + params.d() * u_t + draws.z.column(t);
        y.set_column(t, &y_t);
        x = params.a() * &x + params.b() * u_t + draws.w.column(t);
    }
    Trajectory::new(draws.u.clone(), y, label)
}

/// Draws noise for `length` steps from `rng` and simulates one trajectory.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    params: &LdsParams,
    length: usize,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    if length == 0 {
        return Err(LdsError::InvalidArgument("trajectory length must be positive".into()));
    }
    let draws = NoiseDraws::sample(params.dims(), length, noise.noise_scale, rng);
    simulate_with_draws(params, &draws, None)
}

/// Evaluates `y_t` from the unrolled sum
/// `Σ_{i=1}^{t} (C A^{i-1} B u_{t-i} + C A^{i-1} w_{t-i}) + C A^t x_0 + D u_t + z_t`.
pub fn closed_form_observation(params: &LdsParams, t: usize, draws: &NoiseDraws) -> Result<DVector<f64>> {
    draws.check(params)?;
    if t >= draws.len() {
        return Err(LdsError::IndexOutOfRange {
            index: t,
            length: draws.len(),
        });
    }
    let mut y = params.d() * draws.u.column(t) + draws.z.column(t);
    // c_a = C A^{i-1}
    let mut c_a = params.c().clone();
    for i in 1..=t {
        y += &c_a * params.b() * draws.u.column(t - i);
        y += &c_a * draws.w.column(t - i);
        c_a = c_a * params.a();
    }
    y += c_a * &draws.x0;
    Ok(y)
}

/// Samples `n_traj` labelled trajectories from a mixture.
///
/// Trajectory `i` uses [`substream`]`(seed, i)`, first for the component
/// draw and then for the simulation, so the output does not depend on the
/// number of worker threads.
pub fn sample_mixture_dataset(
    mix: &MixtureSpec,
    n_traj: usize,
    length: usize,
    noise: &NoiseConfig,
) -> Result<Vec<Trajectory>> {
    if n_traj == 0 {
        return Err(LdsError::InvalidArgument("number of trajectories must be positive".into()));
    }
    if length == 0 {
        return Err(LdsError::InvalidArgument("trajectory length must be positive".into()));
    }
    (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(noise.seed, i as u64);
            let label = mix.pick(rng.random::<f64>());
            let component = &mix.components[label];
            let draws = NoiseDraws::sample(component.dims(), length, noise.noise_scale, &mut rng);
            simulate_with_draws(component, &draws, Some(label))
        })
        .collect()
}

/// Smallest singular value of the matrix whose columns are the flattened
/// `G_{L_i, s}`; the largest γ for which the mixture is jointly nondegenerate.
///
/// Values at or below `PINV_RTOL · σ_max` are rounding noise and are
/// reported as exactly zero.
pub fn joint_nondegeneracy_gamma(mix: &MixtureSpec, s: usize) -> f64 {
    let cols: Vec<DVector<f64>> = mix
        .components()
        .iter()
        .map(|c| {
            let g = c.markov_matrix(s);
            DVector::from_column_slice(g.as_slice())
        })
        .collect();
    let k = cols.len();
    if k > cols[0].len() {
        return 0.0;
    }
    let svd = linalg::SortedSvd::new(&DMatrix::from_columns(&cols));
    let smallest = svd.s[k - 1];
    if smallest <= linalg::PINV_RTOL * svd.sigma_max() {
        0.0
    } else {
        smallest
    }
}

/// Per-component observability and controllability measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDiagnostics {
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_c: f64,
    pub norm_d: f64,
    pub obs_rank: usize,
    pub ctrl_rank: usize,
    /// `σ_max(O_{2s}) / σ_min(O_s)`.
    pub obs_ratio: f64,
    /// `σ_max(Q_{2s}) / σ_min(Q_s)`.
    pub ctrl_ratio: f64,
    pub sigma_min_obs: f64,
    pub sigma_min_ctrl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WellBehavedChecks {
    pub weights: bool,
    pub nontrivial_bc: bool,
    pub boundedness: bool,
    pub observability: bool,
    pub controllability: bool,
    pub joint_nondegeneracy: bool,
}

impl WellBehavedChecks {
    pub fn all(&self) -> bool {
        self.weights
            && self.nontrivial_bc
            && self.boundedness
            && self.observability
            && self.controllability
            && self.joint_nondegeneracy
    }
}

/// Outcome of checking every well-behavedness assumption on a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct WellBehavedReport {
    pub s: usize,
    pub kappa_bound: f64,
    pub w_min_bound: f64,
    pub gamma_bound: f64,
    /// Measured joint nondegeneracy.
    pub gamma: f64,
    /// Measured smallest weight.
    pub w_min: f64,
    pub components: Vec<ComponentDiagnostics>,
    pub pass: WellBehavedChecks,
    /// `σ_min(O_s) ≤ √s κ` and `σ_min(Q_s) ≤ √s κ` for every component.
    pub sigma_min_claim_holds: bool,
}

impl WellBehavedReport {
    pub fn obs_ratios(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.obs_ratio).collect()
    }

    pub fn ctrl_ratios(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.ctrl_ratio).collect()
    }

    pub fn passes(&self) -> bool {
        self.pass.all()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

fn component_diagnostics(params: &LdsParams, s: usize) -> ComponentDiagnostics {
    let o_s = SortedSvd::new(&params.observability_matrix(s));
    let o_2s = SortedSvd::new(&params.observability_matrix(2 * s));
    let q_s = SortedSvd::new(&params.controllability_matrix(s));
    let q_2s = SortedSvd::new(&params.controllability_matrix(2 * s));
    let n = params.n();
    // σ_n is the relevant smallest singular value once rank n is required;
    // a short matrix simply has fewer than n singular values.
    let nth = |svd: &SortedSvd| if svd.s.len() >= n && n > 0 { svd.s[n - 1] } else { 0.0 };
    let sigma_min_obs = nth(&o_s);
    let sigma_min_ctrl = nth(&q_s);
    ComponentDiagnostics {
        norm_a: linalg::spectral_norm(params.a()),
        norm_b: linalg::spectral_norm(params.b()),
        norm_c: linalg::spectral_norm(params.c()),
        norm_d: linalg::spectral_norm(params.d()),
        obs_rank: o_s.rank(RANK_RTOL),
        ctrl_rank: q_s.rank(RANK_RTOL),
        obs_ratio: ratio(o_2s.sigma_max(), sigma_min_obs),
        ctrl_ratio: ratio(q_2s.sigma_max(), sigma_min_ctrl),
        sigma_min_obs,
        sigma_min_ctrl,
    }
}

/// Checks every assumption of a well-behaved mixture and records measured values.
///
/// Observability and controllability both require rank exactly `n`, read as
/// "`O_s` has full column rank and `Q_s` has full row rank".
pub fn well_behaved_report(mix: &MixtureSpec, s: usize, kappa: f64, w_min: f64, gamma: f64) -> WellBehavedReport {
    let components: Vec<ComponentDiagnostics> =
        mix.components().iter().map(|c| component_diagnostics(c, s)).collect();
    let n = mix.dims().n;
    let measured_gamma = joint_nondegeneracy_gamma(mix, s);
    let measured_w_min = mix.weights().iter().copied().fold(f64::INFINITY, f64::min);
    let sqrt_s_kappa = (s as f64).sqrt() * kappa;
    let pass = WellBehavedChecks {
        weights: measured_w_min >= w_min,
        nontrivial_bc: components.iter().all(|c| c.norm_b >= 1.0 && c.norm_c >= 1.0),
        boundedness: components
            .iter()
            .all(|c| c.norm_a <= kappa && c.norm_b <= kappa && c.norm_c <= kappa && c.norm_d <= kappa),
        observability: components.iter().all(|c| c.obs_rank == n && c.obs_ratio <= kappa),
        controllability: components.iter().all(|c| c.ctrl_rank == n && c.ctrl_ratio <= kappa),
        joint_nondegeneracy: measured_gamma >= gamma,
    };
    let sigma_min_claim_holds = components
        .iter()
        .all(|c| c.sigma_min_obs <= sqrt_s_kappa && c.sigma_min_ctrl <= sqrt_s_kappa);
    WellBehavedReport {
        s,
        kappa_bound: kappa,
        w_min_bound: w_min,
        gamma_bound: gamma,
        gamma: measured_gamma,
        w_min: measured_w_min,
        components,
        pass,
        sigma_min_claim_holds,
    }
}

/// Evaluates `‖A^t‖_F ≤ (√n κ)^{t/s}`.
pub fn power_norm_check(params: &LdsParams, s: usize, kappa: f64, t: usize) -> bool {
    let lhs = linalg::matrix_power(params.a(), t).norm();
    let rhs = ((params.n() as f64).sqrt() * kappa).powf(t as f64 / s as f64);
    lhs <= rhs * (1.0 + 1e-12)
}

/// Knobs for drawing random systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSystemOptions {
    /// Spectral radius of `A` is drawn uniformly from this range.
    pub spectral_radius: (f64, f64),
    /// Scale of the Gaussian entries of `D`.
    pub feedthrough_scale: f64,
}

impl Default for RandomSystemOptions {
    fn default() -> Self {
        RandomSystemOptions {
            spectral_radius: (0.2, 0.8),
            feedthrough_scale: 0.5,
        }
    }
}

/// Draws a random system: Gaussian `A` rescaled to a random spectral radius,
/// Gaussian `B` and `C` rescaled to operator norm at least 1, Gaussian `D`.
pub fn random_lds<R: Rng + ?Sized>(rng: &mut R, dims: Dims, opts: &RandomSystemOptions) -> LdsParams {
    let Dims { m, n, p } = dims;
    let mut a = gaussian_matrix(rng, n, n, 1.0 / (n as f64).sqrt());
    let radius = linalg::eigenvalues(&a).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (lo, hi) = opts.spectral_radius;
    let target = lo + (hi - lo) * rng.random::<f64>();
    if radius > 0.0 {
        a *= target / radius;
    }
    let mut b = gaussian_matrix(rng, n, p, 1.0);
    let mut c = gaussian_matrix(rng, m, n, 1.0);
    for mat in [&mut b, &mut c] {
        let norm = linalg::spectral_norm(mat);
        if norm < 1.0 && norm > 0.0 {
            *mat /= norm;
        }
    }
    let d = gaussian_matrix(rng, m, p, opts.feedthrough_scale);
    LdsParams::new(a, b, c, d).expect("random system is well formed")
}

/// Draws random mixtures until one satisfies every well-behavedness check
/// with the given bounds, giving up after `max_tries`.
#[allow(clippy::too_many_arguments)]
pub fn random_well_behaved_mixture<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    dims: Dims,
    s: usize,
    kappa: f64,
    gamma: f64,
    opts: &RandomSystemOptions,
    max_tries: usize,
) -> Result<MixtureSpec> {
    for _ in 0..max_tries {
        let components = (0..k).map(|_| random_lds(rng, dims, opts)).collect();
        let mix = MixtureSpec::uniform(components)?;
        let report = well_behaved_report(&mix, s, kappa, 0.0, gamma);
        if report.passes() {
            return Ok(mix);
        }
    }
    Err(LdsError::InvalidArgument(format!(
        "no well-behaved mixture found in {max_tries} draws (k={k}, s={s}, kappa={kappa}, gamma={gamma})"
    )))
}
