//! Per-component Markov matrices (scaled by `w^{1/3}`) from the flattened
//! moment tensor, and the mixing-weight regression that removes the scale.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{LdsError, Result};
use crate::linalg::{SortedSvd, PINV_RTOL};
use crate::moments::{unflatten_markov, CrossCovarianceStack, FlatTensor3};
use crate::tensor::{jennrich_decompose, reconstruct, JennrichOptions, RankOneComponent, Tensor3};

/// Floor applied to negative regression weights.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Output of [`learn_markov_components`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovEstimates {
    /// `G̃_i ≈ w_i^{1/3} G_i`, each `m × (2s+1)p`.
    pub gtilde: Vec<DMatrix<f64>>,
    /// `‖Π̂ − Σ T̂_i‖_F / ‖Π̂‖_F`.
    pub tensor_residual: f64,
}

/// Signed factor `v` of a term `≈ w v ⊗ v ⊗ v` with `w > 0`, scaled so
/// that the result approximates `w^{1/3} v`.
///
/// Magnitudes are the Frobenius norms of the mode-1 slices. Signs come from
/// the mode-1 fiber through the largest entry; the overall sign is then
/// chosen so that the implied weight is positive, which pins it down because
/// the term has odd order.
pub(crate) fn signed_cube_root_factor(term: &Tensor3, index: usize) -> Result<DVector<f64>> {
    let magnitude = term.mode1_slice_norms();
    let norm = magnitude.norm();
    if !(norm > 0.0) {
        return Err(LdsError::ZeroNormComponent(index));
    }
    let (i, j, l) = term.argmax_abs();
    let fiber = term.mode1_fiber(j, l);
    let mut v = DVector::from_fn(magnitude.len(), |r, _| {
        if fiber[r] < 0.0 {
            -magnitude[r]
        } else {
            magnitude[r]
        }
    });
    let implied = v[i] * v[j] * v[l];
    if implied * term[(i, j, l)] < 0.0 {
        v.neg_mut();
    }
    Ok(v / norm.powf(2.0 / 3.0))
}

/// Symmetric estimate `w^{1/3} d` of a term `f1 ⊗ f2 ⊗ f3 ≈ w d ⊗ d ⊗ d`.
///
/// The three unit directions are sign-aligned to `f1` and averaged; `w` is
/// the term projected onto `d ⊗ d ⊗ d`, and a negative `w` flips `d`.
pub(crate) fn symmetric_cube_root_factor(term: &RankOneComponent, index: usize) -> Result<DVector<f64>> {
    let norms = [term.f1.norm(), term.f2.norm(), term.f3.norm()];
    if norms.iter().any(|n| !(*n > 0.0)) {
        return Err(LdsError::ZeroNormComponent(index));
    }
    let d1 = &term.f1 / norms[0];
    let mut dir = d1.clone();
    for (f, n) in [(&term.f2, norms[1]), (&term.f3, norms[2])] {
        let unit = f / n;
        if unit.dot(&d1) < 0.0 {
            dir -= unit;
        } else {
            dir += unit;
        }
    }
    let len = dir.norm();
    if !(len > 0.0) {
        return Err(LdsError::ZeroNormComponent(index));
    }
    let mut dir = dir / len;
    let mut weight = term.f1.dot(&dir) * term.f2.dot(&dir) * term.f3.dot(&dir);
    if weight < 0.0 {
        dir.neg_mut();
        weight = -weight;
    }
    Ok(dir * weight.cbrt())
}

/// Decomposes the flattened tensor into `k` terms and converts each into a
/// scaled Markov matrix estimate.
///
/// With `symmetric` set the tensor is first averaged over mode permutations
/// (the population tensor is symmetric) and each term is reduced to one
/// direction by [`symmetric_cube_root_factor`]; otherwise each term goes
/// through [`signed_cube_root_factor`] as decomposed.
pub fn learn_markov_components<R: Rng + ?Sized>(
    flat: &FlatTensor3,
    k: usize,
    symmetric: bool,
    rng: &mut R,
    opts: &JennrichOptions,
) -> Result<MarkovEstimates> {
    let sym;
    let tensor = if symmetric {
        sym = flat.tensor.symmetrized();
        &sym
    } else {
        &flat.tensor
    };
    let components: Vec<RankOneComponent> = jennrich_decompose(tensor, k, rng, opts)?;
    let total = flat.tensor.norm();
    let residual = flat.tensor.sub(&reconstruct(&components, flat.q())).norm();
    let gtilde = components
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let v = if symmetric {
                symmetric_cube_root_factor(c, idx)?
            } else {
                signed_cube_root_factor(&c.tensor(), idx)?
            };
            unflatten_markov(&v, flat.m, flat.p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarkovEstimates {
        gtilde,
        tensor_residual: if total > 0.0 { residual / total } else { residual },
    })
}

/// Output of [`recover_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFit {
    /// Unconstrained least-squares coefficients.
    pub raw: Vec<f64>,
    /// Coefficients after flooring negatives at [`WEIGHT_FLOOR`].
    pub wtilde: Vec<f64>,
    /// Which coefficients were floored.
    pub clamped: Vec<bool>,
    /// `‖Σ w̃_i G̃_i − R̂‖_F` at the unconstrained minimizer.
    pub residual: f64,
}

/// Minimizes `‖Σ_i w̃_i G̃_i − R̂‖_F` over `w̃`.
pub fn recover_weights(gtilde: &[DMatrix<f64>], rhat: &CrossCovarianceStack) -> Result<WeightFit> {
    let target = rhat.assembled();
    if gtilde.is_empty() {
        return Err(LdsError::InvalidArgument("no Markov estimates".into()));
    }
    if let Some(bad) = gtilde.iter().find(|g| g.shape() != target.shape()) {
        return Err(LdsError::DimensionMismatch {
            matrix: "G̃",
            expected: format!("{}x{}", target.nrows(), target.ncols()),
            found: format!("{}x{}", bad.nrows(), bad.ncols()),
        });
    }
    let cols: Vec<DVector<f64>> = gtilde
        .iter()
        .map(|g| DVector::from_column_slice(g.as_slice()))
        .collect();
    let design = DMatrix::from_columns(&cols);
    let rhs = DVector::from_column_slice(target.as_slice());
    let svd = SortedSvd::new(&design);
    let smin = svd.s.iter().copied().fold(f64::INFINITY, f64::min);
    if gtilde.len() > design.nrows() || smin <= 1e-10 * svd.sigma_max() {
        return Err(LdsError::CollinearComponents(if gtilde.len() > design.nrows() { 0.0 } else { smin }));
    }
    let raw = svd.pinv(PINV_RTOL) * &rhs;
    let residual = (&design * &raw - &rhs).norm();
    let raw: Vec<f64> = raw.iter().copied().collect();
    let clamped: Vec<bool> = raw.iter().map(|&w| w < WEIGHT_FLOOR).collect();
    let wtilde = raw.iter().map(|&w| w.max(WEIGHT_FLOOR)).collect();
    Ok(WeightFit {
        raw,
        wtilde,
        clamped,
        residual,
    })
}

/// Output of [`finalize_components`].
#[derive(Debug, Clone, PartialEq)]
pub struct FinalComponents {
    /// `ŵ_i` renormalized to sum to one.
    pub weights: Vec<f64>,
    /// `w̃_i^{3/2}` before renormalization.
    pub raw_weights: Vec<f64>,
    /// `Ĝ_i = G̃_i / √w̃_i`.
    pub ghat: Vec<DMatrix<f64>>,
}

pub fn finalize_components(gtilde: &[DMatrix<f64>], wtilde: &[f64]) -> Result<FinalComponents> {
    if gtilde.len() != wtilde.len() {
        return Err(LdsError::InvalidArgument(format!(
            "{} Markov estimates but {} weights",
            gtilde.len(),
            wtilde.len()
        )));
    }
    if wtilde.iter().any(|&w| !(w > 0.0)) {
        return Err(LdsError::InvalidArgument("weights must be positive".into()));
    }
    let ghat = gtilde.iter().zip(wtilde).map(|(g, &w)| g / w.sqrt()).collect();
    let raw_weights: Vec<f64> = wtilde.iter().map(|&w| w.powf(1.5)).collect();
    let total: f64 = raw_weights.iter().sum();
    Ok(FinalComponents {
        weights: raw_weights.iter().map(|w| w / total).collect(),
        raw_weights,
        ghat,
    })
}
