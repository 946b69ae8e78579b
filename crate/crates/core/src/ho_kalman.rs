//! Realization of `(A, B, C, D)` from Markov parameters via the stable
//! Ho-Kalman procedure.

use nalgebra::DMatrix;

use crate::error::{LdsError, Result};
use crate::lds::LdsParams;
use crate::linalg::{SortedSvd, PINV_RTOL, RANK_RTOL};

/// Block Hankel matrix with row-block `i`, column-block `j` equal to
/// `X_{i+j+1}`, for `i < s` and `j ≤ s`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    pub s: usize,
    pub m: usize,
    pub p: usize,
    pub matrix: DMatrix<f64>,
}

impl HankelMatrix {
    /// First `ps` columns, `H⁻`.
    pub fn past(&self) -> DMatrix<f64> {
        self.matrix.columns(0, self.p * self.s).into_owned()
    }

    /// Last `ps` columns, `H⁺` (shifted by one block).
    pub fn future(&self) -> DMatrix<f64> {
        self.matrix.columns(self.p, self.p * self.s).into_owned()
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.matrix.view((i * self.m, j * self.p), (self.m, self.p)).into_owned()
    }
}

fn check_width(g: &DMatrix<f64>, p: usize, s: usize) -> Result<()> {
    let want = (2 * s + 1) * p;
    if g.ncols() != want {
        return Err(LdsError::DimensionMismatch {
            matrix: "Markov matrix",
            expected: format!("{}x{}", g.nrows(), want),
            found: format!("{}x{}", g.nrows(), g.ncols()),
        });
    }
    Ok(())
}

/// Builds the `ms × p(s+1)` Hankel matrix from `[X_0 … X_{2s}]`.
pub fn build_hankel(g: &DMatrix<f64>, p: usize, s: usize) -> Result<HankelMatrix> {
    if s == 0 || p == 0 {
        return Err(LdsError::InvalidArgument("Hankel matrix needs s ≥ 1 and p ≥ 1".into()));
    }
    check_width(g, p, s)?;
    let m = g.nrows();
    let mut h = DMatrix::zeros(m * s, p * (s + 1));
    for i in 0..s {
        for j in 0..=s {
            let k = i + j + 1;
            h.view_mut((i * m, j * p), (m, p))
                .copy_from(&g.columns(k * p, p));
        }
    }
    Ok(HankelMatrix { s, m, p, matrix: h })
}

/// Output of [`ho_kalman`].
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub params: LdsParams,
    /// Numerical rank of `H⁻` at the `1e-10` relative threshold.
    pub hankel_rank: usize,
    /// Singular values of `H⁻`, descending.
    pub hankel_singular_values: Vec<f64>,
    /// Set when the requested order exceeds `hankel_rank`.
    pub rank_warning: bool,
}

/// Realizes an order-`n` system from `g = [X_0 … X_{2s}]` (`m × (2s+1)p`).
///
/// `D = X_0`; the rank-`n` truncated SVD `U Σ Vᵀ` of `H⁻` gives
/// `O = U Σ^{1/2}` and `Q = Σ^{1/2} Vᵀ`; `C` and `B` are the first block row
/// of `O` and the first block column of `Q`; `A = O† H⁺ Q†`.
pub fn ho_kalman(g: &DMatrix<f64>, p: usize, s: usize, n: usize) -> Result<Realization> {
    let hankel = build_hankel(g, p, s)?;
    let m = g.nrows();
    if n == 0 || n > (m * s).min(p * s) {
        return Err(LdsError::InvalidArgument(format!(
            "state dimension {n} must be in 1..={}",
            (m * s).min(p * s)
        )));
    }
    let past = SortedSvd::new(&hankel.past());
    let hankel_rank = past.rank(RANK_RTOL);
    let (u, sigma, v) = past.truncate(n);
    let root = DMatrix::from_diagonal(&sigma.map(f64::sqrt));
    let obs = &u * &root;
    let ctrl = &root * v.transpose();
    let c = obs.rows(0, m).into_owned();
    let b = ctrl.columns(0, p).into_owned();
    let a = SortedSvd::new(&obs).pinv(PINV_RTOL) * hankel.future() * SortedSvd::new(&ctrl).pinv(PINV_RTOL);
    let d = g.columns(0, p).into_owned();
    Ok(Realization {
        params: LdsParams::new(a, b, c, d)?,
        hankel_rank,
        hankel_singular_values: past.s.iter().copied().collect(),
        rank_warning: n > hankel_rank,
    })
}

/// Numerical rank of `H⁻`, usable as the state dimension when it is unknown.
pub fn estimate_order(g: &DMatrix<f64>, p: usize, s: usize, rtol: f64) -> Result<usize> {
    let hankel = build_hankel(g, p, s)?;
    Ok(SortedSvd::new(&hankel.past()).rank(rtol))
}

/// `‖g − G_{2s}(params)‖_F`.
pub fn realization_residual(g: &DMatrix<f64>, params: &LdsParams, s: usize) -> Result<f64> {
    check_width(g, params.p(), s)?;
    if g.nrows() != params.m() {
        return Err(LdsError::DimensionMismatch {
            matrix: "Markov matrix",
            expected: format!("{} rows", params.m()),
            found: format!("{} rows", g.nrows()),
        });
    }
    Ok((g - params.markov_matrix(2 * s)).norm())
}
