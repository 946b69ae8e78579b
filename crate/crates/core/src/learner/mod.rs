//! End-to-end learning of a mixture from unlabeled trajectories, evaluation
//! against ground truth up to similarity, and posterior clustering.

mod align;
mod cluster;
mod markov;

pub use align::{align_similarity, AlignmentReport, ComponentAlignment};
pub use cluster::{
    canonicalize_fully_observed, cluster_dataset, cluster_posterior, component_log_likelihood, ClusterModel,
    GaussianTrajectoryModel, PosteriorReport,
};
pub use markov::{
    finalize_components, learn_markov_components, recover_weights, FinalComponents, MarkovEstimates, WeightFit,
    WEIGHT_FLOOR,
};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{LdsError, Result};
use crate::ho_kalman::ho_kalman;
use crate::lds::{LdsParams, MixtureSpec, Trajectory};
use crate::moments::{
    assemble_pi, estimate_cross_covariance_stack, estimate_sixth_moments, exact_cross_covariance_stack,
    exact_sixth_moments, required_length, CrossCovarianceStack, FlatTensor3,
};
use crate::tensor::JennrichOptions;

/// Model sizes the learner is told up front.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    /// Number of components.
    pub k: usize,
    /// State dimension.
    pub n: usize,
    /// Observability / controllability horizon.
    pub s: usize,
    /// Symmetrize the moment tensor and its rank-one terms before reading
    /// off Markov parameters.
    pub symmetrize: bool,
    pub jennrich: JennrichOptions,
}

impl LearnConfig {
    pub fn new(k: usize, n: usize, s: usize) -> Self {
        LearnConfig {
            k,
            n,
            s,
            symmetrize: true,
            jennrich: JennrichOptions::default(),
        }
    }

    /// Shortest trajectory the moment estimators accept, `6s + 3`.
    pub fn min_length(&self) -> usize {
        let top = 2 * self.s;
        required_length(top, top, top)
    }
}

/// One learned component with its intermediate estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedComponent {
    /// Renormalized weight `ŵ`.
    pub weight: f64,
    pub params: LdsParams,
    /// `G̃ ≈ w^{1/3} G`.
    pub gtilde: DMatrix<f64>,
    /// Unconstrained regression coefficient.
    pub wtilde_raw: f64,
    /// Coefficient after flooring.
    pub wtilde: f64,
    pub clamped: bool,
    /// `Ĝ = G̃ / √w̃`.
    pub ghat: DMatrix<f64>,
    /// `w̃^{3/2}` before renormalization.
    pub raw_weight: f64,
    pub hankel_rank: usize,
    pub rank_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnDiagnostics {
    pub tensor_residual: f64,
    pub regression_residual: f64,
    /// `Σ w̃_i^{3/2}` before renormalization.
    pub weight_sum: f64,
}

/// Estimated mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedMixture {
    pub s: usize,
    pub components: Vec<LearnedComponent>,
    pub diagnostics: LearnDiagnostics,
}

impl LearnedMixture {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn params(&self) -> Vec<LdsParams> {
        self.components.iter().map(|c| c.params.clone()).collect()
    }

    pub fn align(&self, truth: &MixtureSpec) -> Result<AlignmentReport> {
        align_similarity(truth, &self.weights(), &self.params(), self.s)
    }
}

fn validate(config: &LearnConfig, q: usize) -> Result<()> {
    if config.k == 0 || config.n == 0 || config.s == 0 {
        return Err(LdsError::InvalidArgument("k, n and s must be positive".into()));
    }
    if config.k > q {
        return Err(LdsError::RankTooLarge {
            rank: config.k,
            capacity: q,
        });
    }
    Ok(())
}

/// Runs everything after moment estimation: decomposition, weight
/// regression, rescaling and one Ho-Kalman realization per component.
///
/// Feeding exact moments here is the noiseless oracle path.
pub fn learn_from_moments<R: Rng + ?Sized>(
    flat: &FlatTensor3,
    rhat: &CrossCovarianceStack,
    config: &LearnConfig,
    rng: &mut R,
) -> Result<LearnedMixture> {
    validate(config, flat.q())?;
    if flat.s != config.s {
        return Err(LdsError::InvalidArgument(format!(
            "moment tensor built for s={} but s={} requested",
            flat.s, config.s
        )));
    }
    let markov = learn_markov_components(flat, config.k, config.symmetrize, rng, &config.jennrich)?;
    let fit = recover_weights(&markov.gtilde, rhat)?;
    let fin = finalize_components(&markov.gtilde, &fit.wtilde)?;
    let realizations = fin
        .ghat
        .par_iter()
        .map(|g| ho_kalman(g, flat.p, config.s, config.n))
        .collect::<Result<Vec<_>>>()?;
    let components = realizations
        .into_iter()
        .enumerate()
        .map(|(i, real)| LearnedComponent {
            weight: fin.weights[i],
            params: real.params,
            gtilde: markov.gtilde[i].clone(),
            wtilde_raw: fit.raw[i],
            wtilde: fit.wtilde[i],
            clamped: fit.clamped[i],
            ghat: fin.ghat[i].clone(),
            raw_weight: fin.raw_weights[i],
            hankel_rank: real.hankel_rank,
            rank_warning: real.rank_warning,
        })
        .collect();
    Ok(LearnedMixture {
        s: config.s,
        components,
        diagnostics: LearnDiagnostics {
            tensor_residual: markov.tensor_residual,
            regression_residual: fit.residual,
            weight_sum: fin.raw_weights.iter().sum(),
        },
    })
}

/// Learns a `k`-component mixture from trajectories of length at least `6s + 3`.
pub fn learn_mixture<R: Rng + ?Sized>(dataset: &[Trajectory], config: &LearnConfig, rng: &mut R) -> Result<LearnedMixture> {
    let first = dataset.first().ok_or(LdsError::EmptyDataset)?;
    validate(config, (2 * config.s + 1) * first.m() * first.p())?;
    let blocks = estimate_sixth_moments(dataset, config.s)?;
    let flat = assemble_pi(&blocks)?;
    let rhat = estimate_cross_covariance_stack(dataset, config.s)?;
    learn_from_moments(&flat, &rhat, config, rng)
}

/// The pipeline on exact population moments of `mix`.
pub fn learn_from_exact_moments<R: Rng + ?Sized>(
    mix: &MixtureSpec,
    config: &LearnConfig,
    rng: &mut R,
) -> Result<LearnedMixture> {
    let flat = assemble_pi(&exact_sixth_moments(mix, config.s))?;
    let rhat = exact_cross_covariance_stack(mix, config.s);
    learn_from_moments(&flat, &rhat, config, rng)
}
