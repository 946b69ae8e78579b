//! Matching learned components to ground truth and measuring parameter
//! error up to a change of state basis.

use nalgebra::DMatrix;

use crate::error::{LdsError, Result};
use crate::lds::{LdsParams, MixtureSpec};
use crate::linalg::{self, min_cost_assignment};

/// Condition number above which a similarity transform is flagged.
const SINGULAR_COND: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentAlignment {
    /// Index of the matched true component.
    pub truth_index: usize,
    /// `U` with `A ≈ U⁻¹ Â U`, `B ≈ U⁻¹ B̂`, `C ≈ Ĉ U`.
    pub similarity: DMatrix<f64>,
    pub condition: f64,
    pub singular: bool,
    pub err_a: f64,
    pub err_b: f64,
    pub err_c: f64,
    pub err_d: f64,
    pub err_w: f64,
    /// `‖G_{2s} − Ĝ_{2s}‖_F`, the similarity-invariant matching cost.
    pub markov_distance: f64,
}

impl ComponentAlignment {
    /// Largest of the four parameter errors (weights excluded).
    pub fn max_param_error(&self) -> f64 {
        self.err_a.max(self.err_b).max(self.err_c).max(self.err_d)
    }
}

/// Learned-to-truth alignment. `components[j]` describes learned component `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    /// `permutation[j]` is the true component matched to learned component `j`.
    pub permutation: Vec<usize>,
    pub components: Vec<ComponentAlignment>,
    /// Largest parameter error over all components.
    pub max_param_error: f64,
    /// Largest weight error over all components.
    pub max_weight_error: f64,
    /// Largest of every reported error.
    pub max_error: f64,
}

fn align_pair(truth: &LdsParams, est: &LdsParams, s: usize) -> Result<(DMatrix<f64>, f64, bool, [f64; 4])> {
    if truth.dims() != est.dims() {
        return Err(LdsError::InvalidArgument(format!(
            "dimension mismatch between truth {:?} and estimate {:?}",
            truth.dims(),
            est.dims()
        )));
    }
    let o_true = truth.observability_matrix(s);
    let o_est = est.observability_matrix(s);
    let u = linalg::pinv(&o_est) * &o_true;
    let condition = linalg::condition_number(&u);
    let u_inv = match u.clone().try_inverse() {
        Some(inv) if condition.is_finite() => inv,
        _ => linalg::pinv(&u),
    };
    let singular = !(condition <= SINGULAR_COND);
    let err_a = (truth.a() - &u_inv * est.a() * &u).norm();
    let err_b = (truth.b() - &u_inv * est.b()).norm();
    let err_c = (truth.c() - est.c() * &u).norm();
    let err_d = (truth.d() - est.d()).norm();
    Ok((u, condition, singular, [err_a, err_b, err_c, err_d]))
}

/// Matches learned components to truth by minimum total Markov-matrix
/// distance, then aligns each matched pair through `U = Ô_s† O_s`.
pub fn align_similarity(
    truth: &MixtureSpec,
    est_weights: &[f64],
    est_params: &[LdsParams],
    s: usize,
) -> Result<AlignmentReport> {
    let k = truth.k();
    if est_params.len() != k || est_weights.len() != k {
        return Err(LdsError::InvalidArgument(format!(
            "truth has {k} components, estimate has {} (with {} weights)",
            est_params.len(),
            est_weights.len()
        )));
    }
    let horizon = 2 * s;
    let true_g: Vec<DMatrix<f64>> = truth.components().iter().map(|c| c.markov_matrix(horizon)).collect();
    let est_g: Vec<DMatrix<f64>> = est_params.iter().map(|c| c.markov_matrix(horizon)).collect();
    if true_g[0].shape() != est_g[0].shape() {
        return Err(LdsError::InvalidArgument("truth and estimate have different (m, p)".into()));
    }
    let cost = DMatrix::from_fn(k, k, |j, i| (&true_g[i] - &est_g[j]).norm());
    let permutation = min_cost_assignment(&cost);

    let mut components = Vec::with_capacity(k);
    for (j, &i) in permutation.iter().enumerate() {
        let (similarity, condition, singular, [err_a, err_b, err_c, err_d]) =
            align_pair(&truth.components()[i], &est_params[j], s)?;
        components.push(ComponentAlignment {
            truth_index: i,
            similarity,
            condition,
            singular,
            err_a,
            err_b,
            err_c,
            err_d,
            err_w: (truth.weights()[i] - est_weights[j]).abs(),
            markov_distance: cost[(j, i)],
        });
    }
    let max_param_error = components.iter().map(|c| c.max_param_error()).fold(0.0, f64::max);
    let max_weight_error = components.iter().map(|c| c.err_w).fold(0.0, f64::max);
    Ok(AlignmentReport {
        permutation,
        components,
        max_param_error,
        max_weight_error,
        max_error: max_param_error.max(max_weight_error),
    })
}
