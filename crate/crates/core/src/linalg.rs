//! Small dense linear-algebra helpers on `nalgebra` matrices, with SVD and
//! eigenvalues computed by `faer`.
//!
//! All decompositions here return singular values in non-increasing order
//! with a deterministic sign convention, so downstream realizations do not
//! depend on the ordering or sign choices of the underlying SVD routine.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{LdsError, Result};

/// Relative threshold below which singular values count as zero in rank checks.
pub const RANK_RTOL: f64 = 1e-10;

/// Relative threshold used for pseudoinverses.
pub const PINV_RTOL: f64 = 1e-12;

/// Thin SVD `M = U diag(s) Vᵀ` with `s` sorted descending.
///
/// Each singular pair is signed so that the largest-magnitude entry of the
/// left vector is positive.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SortedSvd {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let r = rows.min(cols);
        if r == 0 {
            return SortedSvd {
                u: DMatrix::zeros(rows, 0),
                s: DVector::zeros(0),
                v: DMatrix::zeros(cols, 0),
            };
        }
        let svd = to_faer(m)
            .thin_svd()
            .expect("SVD of a finite matrix converges");
        let s_raw = DVector::from_fn(r, |i, _| svd.S()[i]);
        let u_raw = from_faer(svd.U());
        let v_raw = from_faer(svd.V());

        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]).then(a.cmp(&b)));

        let mut u = DMatrix::zeros(rows, r);
        let mut v = DMatrix::zeros(cols, r);
        let mut s = DVector::zeros(r);
        for (dst, &src) in order.iter().enumerate() {
            let mut ucol = u_raw.column(src).into_owned();
            let mut vcol = v_raw.column(src).into_owned();
            let pivot = ucol
                .iter()
                .copied()
                .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                ucol.neg_mut();
                vcol.neg_mut();
            }
            u.set_column(dst, &ucol);
            v.set_column(dst, &vcol);
            s[dst] = s_raw[src];
        }
        SortedSvd { u, s, v }
    }

    pub fn sigma_max(&self) -> f64 {
        if self.s.is_empty() {
            0.0
        } else {
            self.s[0]
        }
    }

    /// Number of singular values above `rtol * sigma_max`.
    pub fn rank(&self, rtol: f64) -> usize {
        let cut = rtol * self.sigma_max();
        self.s.iter().filter(|&&x| x > cut && x > 0.0).count()
    }

    /// Best rank-`r` approximation factors `(U_r, s_r, V_r)`.
    pub fn truncate(&self, r: usize) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let r = r.min(self.s.len());
        (
            self.u.columns(0, r).into_owned(),
            self.s.rows(0, r).into_owned(),
            self.v.columns(0, r).into_owned(),
        )
    }

    pub fn reconstruct_rank(&self, r: usize) -> DMatrix<f64> {
        let (u, s, v) = self.truncate(r);
        &u * DMatrix::from_diagonal(&s) * v.transpose()
    }

    /// Moore-Penrose pseudoinverse with the given relative cutoff.
    pub fn pinv(&self, rtol: f64) -> DMatrix<f64> {
        let cut = rtol * self.sigma_max();
        let (rows, cols) = (self.u.nrows(), self.v.nrows());
        let mut out = DMatrix::zeros(cols, rows);
        for i in 0..self.s.len() {
            let si = self.s[i];
            if si > cut && si > 0.0 {
                out += self.v.column(i) * self.u.column(i).transpose() / si;
            }
        }
        out
    }
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    SortedSvd::new(m).pinv(PINV_RTOL)
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SortedSvd::new(m).sigma_max()
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let svd = SortedSvd::new(m);
    svd.s.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn numerical_rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    SortedSvd::new(m).rank(rtol)
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let svd = SortedSvd::new(m);
    let smin = svd.s.iter().copied().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        svd.sigma_max() / smin
    }
}

pub fn matrix_power(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// Eigenvalues of a square real matrix, possibly complex.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m)
        .eigenvalues()
        .expect("eigenvalues of a finite matrix converge")
        .into_iter()
        .map(|z| Complex::new(z.re, z.im))
        .collect()
}

/// Real eigendecomposition of a small non-symmetric matrix.
///
/// Fails when any eigenvalue has an imaginary part larger than
/// `imag_rtol` times the spectral radius. Eigenvectors are unit-norm and
/// computed as the right singular vector of `M - λI` with the smallest
/// singular value.
pub fn real_eigen(m: &DMatrix<f64>, imag_rtol: f64) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let n = m.nrows();
    let ev = eigenvalues(m);
    let radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let worst_imag = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_imag > imag_rtol * radius.max(f64::MIN_POSITIVE) {
        return Err(LdsError::ComplexEigenvalues {
            imag: worst_imag,
            radius,
        });
    }
    let mut values: Vec<f64> = ev.iter().map(|z| z.re).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let vectors = values
        .iter()
        .map(|&lambda| {
            let shifted = m - DMatrix::identity(n, n) * lambda;
            let svd = SortedSvd::new(&shifted);
            let mut v = svd.v.column(n - 1).into_owned();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                v.neg_mut();
            }
            v
        })
        .collect();
    Ok((values, vectors))
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
///
/// Returns `assignment[row] = col`.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    if n == 0 {
        return Vec::new();
    }
    // potentials and matching are 1-indexed; index 0 is the virtual column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
