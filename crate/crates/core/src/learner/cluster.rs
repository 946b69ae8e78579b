//! Exact trajectory likelihoods and Bayes posteriors over components.
//!
//! Under the unit-covariance model the stacked vector
//! `(u[0..ℓ], y[0..ℓ])` is a linear image of `(x0, u, w, z)`, all standard
//! normal, so it is Gaussian with covariance `L Lᵀ` for the map `L`.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{LdsError, Result};
use crate::lds::{LdsParams, Trajectory};

const JITTER: f64 = 1e-10;

/// Joint Gaussian law of `(u[0..ℓ], y[0..ℓ])` for one system and length.
#[derive(Debug, Clone)]
pub struct GaussianTrajectoryModel {
    len: usize,
    m: usize,
    p: usize,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl GaussianTrajectoryModel {
    pub fn new(params: &LdsParams, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(LdsError::InvalidArgument("trajectory length must be positive".into()));
        }
        let (m, n, p) = (params.m(), params.n(), params.p());
        let obs_dim = len * (p + m);
        let latent_dim = n + len * (p + n + m);
        let u_off = n;
        let w_off = n + len * p;
        let z_off = n + len * (p + n);
        let y_row = len * p;

        // C A^k for k = 0..len
        let mut c_pows = Vec::with_capacity(len);
        let mut cur = params.c().clone();
        for _ in 0..len {
            c_pows.push(cur.clone());
            cur = cur * params.a();
        }
        let c_pow_b: Vec<DMatrix<f64>> = c_pows.iter().map(|ca| ca * params.b()).collect();

        let mut map = DMatrix::zeros(obs_dim, latent_dim);
        for t in 0..len {
            for i in 0..p {
                map[(t * p + i, u_off + t * p + i)] = 1.0;
            }
            let row = y_row + t * m;
            map.view_mut((row, 0), (m, n)).copy_from(&c_pows[t]);
            for j in 0..t {
                let lag = t - 1 - j;
                map.view_mut((row, u_off + j * p), (m, p)).copy_from(&c_pow_b[lag]);
                map.view_mut((row, w_off + j * n), (m, n)).copy_from(&c_pows[lag]);
            }
            map.view_mut((row, u_off + t * p), (m, p)).copy_from(params.d());
            for i in 0..m {
                map[(row + i, z_off + t * m + i)] = 1.0;
            }
        }
        let cov = &map * map.transpose();
        let chol = match Cholesky::new(cov.clone()) {
            Some(c) => c,
            None => Cholesky::new(cov + DMatrix::identity(obs_dim, obs_dim) * JITTER).ok_or_else(|| {
                LdsError::NotPositiveDefinite(format!("trajectory covariance of dimension {obs_dim}"))
            })?,
        };
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(GaussianTrajectoryModel { len, m, p, chol, log_det })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Stacks a trajectory as `(u[0], …, u[ℓ-1], y[0], …, y[ℓ-1])`.
    pub fn stack(traj: &Trajectory) -> DVector<f64> {
        let u = traj.inputs();
        let y = traj.outputs();
        DVector::from_iterator(u.len() + y.len(), u.as_slice().iter().chain(y.as_slice()).copied())
    }

    pub fn log_density(&self, traj: &Trajectory) -> Result<f64> {
        if traj.len() != self.len || traj.m() != self.m || traj.p() != self.p {
            return Err(LdsError::DimensionMismatch {
                matrix: "trajectory",
                expected: format!("length {}, m={}, p={}", self.len, self.m, self.p),
                found: format!("length {}, m={}, p={}", traj.len(), traj.m(), traj.p()),
            });
        }
        let v = Self::stack(traj);
        let whitened = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&v)
            .expect("Cholesky factor has a positive diagonal");
        let d = v.len() as f64;
        Ok(-0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det + whitened.norm_squared()))
    }
}

/// Exact log-density of a trajectory under one system with unit noise.
pub fn component_log_likelihood(params: &LdsParams, traj: &Trajectory) -> Result<f64> {
    GaussianTrajectoryModel::new(params, traj.len())?.log_density(traj)
}

/// Posterior over components for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorReport {
    pub probabilities: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
}

impl PosteriorReport {
    fn from_log_likelihoods(weights: &[f64], log_likelihoods: Vec<f64>) -> Self {
        let scores: Vec<f64> = weights.iter().zip(&log_likelihoods).map(|(w, l)| w.ln() + l).collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let total: f64 = exps.iter().sum();
        PosteriorReport {
            probabilities: exps.iter().map(|e| e / total).collect(),
            log_likelihoods,
        }
    }

    /// Most probable component (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }

    /// Total variation distance to another posterior.
    pub fn tv_distance(&self, other: &PosteriorReport) -> f64 {
        0.5 * self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// `p_i ∝ w_i · exp(log-likelihood_i)`, normalized with log-sum-exp.
pub fn cluster_posterior(weights: &[f64], components: &[LdsParams], traj: &Trajectory) -> Result<PosteriorReport> {
    ClusterModel::new(weights, components)?.posterior(traj)
}

/// Mixture posterior with per-length likelihood models cached.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    weights: Vec<f64>,
    components: Vec<LdsParams>,
    cache: BTreeMap<usize, Vec<GaussianTrajectoryModel>>,
}

impl ClusterModel {
    pub fn new(weights: &[f64], components: &[LdsParams]) -> Result<Self> {
        if weights.len() != components.len() || components.is_empty() {
            return Err(LdsError::InvalidArgument(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(LdsError::InvalidArgument("weights must be positive".into()));
        }
        Ok(ClusterModel {
            weights: weights.to_vec(),
            components: components.to_vec(),
            cache: BTreeMap::new(),
        })
    }

    /// Builds likelihood models for every length in `lengths`.
    pub fn prepare(&mut self, lengths: impl IntoIterator<Item = usize>) -> Result<()> {
        for len in lengths {
            if self.cache.contains_key(&len) {
                continue;
            }
            let models = self
                .components
                .iter()
                .map(|c| GaussianTrajectoryModel::new(c, len))
                .collect::<Result<Vec<_>>>()?;
            self.cache.insert(len, models);
        }
        Ok(())
    }

    fn posterior_prepared(&self, traj: &Trajectory) -> Result<PosteriorReport> {
        let models = self
            .cache
            .get(&traj.len())
            .expect("likelihood models prepared for every length");
        let lls = models.iter().map(|m| m.log_density(traj)).collect::<Result<Vec<_>>>()?;
        Ok(PosteriorReport::from_log_likelihoods(&self.weights, lls))
    }

    pub fn posterior(&mut self, traj: &Trajectory) -> Result<PosteriorReport> {
        self.prepare([traj.len()])?;
        self.posterior_prepared(traj)
    }

    /// Posteriors for every trajectory, in dataset order.
    pub fn posteriors(&mut self, dataset: &[Trajectory]) -> Result<Vec<PosteriorReport>> {
        self.prepare(dataset.iter().map(|t| t.len()))?;
        let this = &*self;
        dataset.par_iter().map(|t| this.posterior_prepared(t)).collect()
    }

    /// Posterior with every log-likelihood shifted by `offset`.
    pub fn posterior_with_offset(&mut self, traj: &Trajectory, offset: f64) -> Result<PosteriorReport> {
        let base = self.posterior(traj)?;
        let shifted = base.log_likelihoods.iter().map(|l| l + offset).collect();
        Ok(PosteriorReport::from_log_likelihoods(&self.weights, shifted))
    }
}

pub fn cluster_dataset(weights: &[f64], components: &[LdsParams], dataset: &[Trajectory]) -> Result<Vec<PosteriorReport>> {
    ClusterModel::new(weights, components)?.posteriors(dataset)
}

/// Rewrites a realization with square invertible `C` in the basis where `C = I`.
pub fn canonicalize_fully_observed(params: &LdsParams) -> Result<LdsParams> {
    if params.m() != params.n() {
        return Err(LdsError::InvalidArgument(format!(
            "fully observed form needs m = n, got m={} n={}",
            params.m(),
            params.n()
        )));
    }
    params.transformed(params.c())
}
