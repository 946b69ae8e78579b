//! Dense order-3 tensors and Jennrich's simultaneous-diagonalization
//! decomposition.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LdsError, Result};
use crate::linalg::{self, SortedSvd, PINV_RTOL};

/// Dense `q × q × q` tensor, row-major: entry `(i, j, k)` lives at
/// `(i·q + j)·q + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    q: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(q: usize) -> Self {
        Tensor3 {
            q,
            data: vec![0.0; q * q * q],
        }
    }

    pub fn from_vec(q: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != q * q * q {
            return Err(LdsError::DimensionMismatch {
                matrix: "tensor",
                expected: (q * q * q).to_string(),
                found: data.len().to_string(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LdsError::NonFinite("tensor"));
        }
        Ok(Tensor3 { q, data })
    }

    /// `x ⊗ y ⊗ z`.
    pub fn outer(x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Self {
        let mut t = Tensor3::zeros(x.len());
        t.add_outer(1.0, x, y, z);
        t
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn add_outer(&mut self, scale: f64, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) {
        let q = self.q;
        assert!(x.len() == q && y.len() == q && z.len() == q, "factor length must equal tensor side");
        for i in 0..q {
            for j in 0..q {
                let xy = scale * x[i] * y[j];
                let base = (i * q + j) * q;
                for k in 0..q {
                    self.data[base + k] += xy * z[k];
                }
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        assert_eq!(self.q, other.q);
        Tensor3 {
            q: self.q,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        assert_eq!(self.q, other.q);
        Tensor3 {
            q: self.q,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Tensor3 {
        Tensor3 {
            q: self.q,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Average over all six permutations of the three modes.
    pub fn symmetrized(&self) -> Tensor3 {
        let q = self.q;
        let mut out = Tensor3::zeros(q);
        for i in 0..q {
            for j in 0..q {
                for k in 0..q {
                    out[(i, j, k)] = (self[(i, j, k)]
                        + self[(i, k, j)]
                        + self[(j, i, k)]
                        + self[(j, k, i)]
                        + self[(k, i, j)]
                        + self[(k, j, i)])
                        / 6.0;
                }
            }
        }
        out
    }

    /// Mode-1 unfolding: `q × q²`, row `i` holds every entry `(i, ·, ·)`.
    pub fn unfold_mode1(&self) -> DMatrix<f64> {
        let q = self.q;
        DMatrix::from_row_slice(q, q * q, &self.data)
    }

    /// Mode-3 unfolding: `q² × q`, row `i·q + j` holds the fiber `(i, j, ·)`.
    pub fn unfold_mode3(&self) -> DMatrix<f64> {
        let q = self.q;
        DMatrix::from_row_slice(q * q, q, &self.data)
    }

    /// Frobenius norm of each mode-1 slice `(i, ·, ·)`.
    pub fn mode1_slice_norms(&self) -> DVector<f64> {
        let q2 = self.q * self.q;
        DVector::from_iterator(
            self.q,
            self.data.chunks(q2).map(|s| s.iter().map(|x| x * x).sum::<f64>().sqrt()),
        )
    }

    /// Fiber `(·, j, k)`.
    pub fn mode1_fiber(&self, j: usize, k: usize) -> DVector<f64> {
        let q = self.q;
        DVector::from_fn(q, |i, _| self[(i, j, k)])
    }

    /// Index of the entry of largest magnitude (first on ties).
    pub fn argmax_abs(&self) -> (usize, usize, usize) {
        let q = self.q;
        let mut best = 0;
        for (pos, x) in self.data.iter().enumerate() {
            if x.abs() > self.data[best].abs() {
                best = pos;
            }
        }
        (best / (q * q), (best / q) % q, best % q)
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[(i * self.q + j) * self.q + k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(i * self.q + j) * self.q + k]
    }
}

/// One rank-one term `f1 ⊗ f2 ⊗ f3`. Only the outer product is meaningful;
/// the split of scale between factors is arbitrary.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneComponent {
    pub f1: DVector<f64>,
    pub f2: DVector<f64>,
    pub f3: DVector<f64>,
}

impl RankOneComponent {
    pub fn tensor(&self) -> Tensor3 {
        Tensor3::outer(&self.f1, &self.f2, &self.f3)
    }
}

/// `Σ_i f1_i ⊗ f2_i ⊗ f3_i`; the zero tensor of side `q` for an empty list.
pub fn reconstruct(components: &[RankOneComponent], q: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(q);
    for c in components {
        t.add_outer(1.0, &c.f1, &c.f2, &c.f3);
    }
    t
}

/// `M_ij = Σ_z T_ijz a_z`.
pub fn contract_mode3(t: &Tensor3, a: &DVector<f64>) -> Result<DMatrix<f64>> {
    let q = t.q();
    if a.len() != q {
        return Err(LdsError::DimensionMismatch {
            matrix: "contraction vector",
            expected: q.to_string(),
            found: a.len().to_string(),
        });
    }
    let v = t.unfold_mode3() * a;
    Ok(DMatrix::from_row_slice(q, q, v.as_slice()))
}

/// Tolerances for [`jennrich_decompose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JennrichOptions {
    /// Largest accepted `|λμ − 1|` for a matched eigenvalue pair.
    pub pairing_tol: f64,
    /// Largest accepted imaginary part relative to the spectral radius.
    pub imag_rtol: f64,
    /// Number of random contraction pairs to try before giving up.
    pub attempts: usize,
}

impl Default for JennrichOptions {
    fn default() -> Self {
        JennrichOptions {
            pairing_tol: 0.1,
            imag_rtol: 1e-6,
            attempts: 3,
        }
    }
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R, q: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Greedy matching of eigenvalues `λ` to `μ` by increasing `|λμ − 1|`.
///
/// Returns `pairs[i] = j` for `λ_i ↔ μ_j`.
fn pair_reciprocals(lambda: &[f64], mu: &[f64], tol: f64) -> Result<Vec<usize>> {
    let r = lambda.len();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(r * r);
    for (i, &l) in lambda.iter().enumerate() {
        for (j, &m) in mu.iter().enumerate() {
            candidates.push(((l * m - 1.0).abs(), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pairs = vec![usize::MAX; r];
    let mut used = vec![false; r];
    for (gap, i, j) in candidates {
        if pairs[i] != usize::MAX || used[j] {
            continue;
        }
        if gap > tol {
            break;
        }
        pairs[i] = j;
        used[j] = true;
    }
    if pairs.contains(&usize::MAX) {
        let unmatched = lambda
            .iter()
            .zip(&pairs)
            .filter(|(_, &p)| p == usize::MAX)
            .map(|(&l, _)| l)
            .collect();
        return Err(LdsError::PairingFailure { unmatched });
    }
    Ok(pairs)
}

fn jennrich_attempt<R: Rng + ?Sized>(
    t: &Tensor3,
    r: usize,
    mode3_basis: &DMatrix<f64>,
    rng: &mut R,
    opts: &JennrichOptions,
) -> Result<Vec<RankOneComponent>> {
    let q = t.q();
    // Contraction vectors drawn inside the leading mode-3 subspace: the exact
    // third factors live there, so nothing is lost, and noise outside it is
    // not mixed into the contractions.
    let a = mode3_basis * random_unit(rng, r);
    let b = mode3_basis * random_unit(rng, r);
    let ta = SortedSvd::new(&contract_mode3(t, &a)?);
    let tb = SortedSvd::new(&contract_mode3(t, &b)?);
    let ta_r = ta.reconstruct_rank(r);
    let tb_r = tb.reconstruct_rank(r);
    let u_mat = &ta_r * SortedSvd::new(&tb_r).pinv(PINV_RTOL);
    let v_mat = (SortedSvd::new(&ta_r).pinv(PINV_RTOL) * &tb_r).transpose();

    // Nonzero eigenvectors of U lie in the column space of T_r^(a), and those
    // of V in the row space of T_r^(b); restrict both to r × r problems there.
    let basis_u = ta.u.columns(0, r).into_owned();
    let basis_v = tb.v.columns(0, r).into_owned();
    let small_u = basis_u.transpose() * &u_mat * &basis_u;
    let small_v = basis_v.transpose() * &v_mat * &basis_v;
    let (lambda, zu) = linalg::real_eigen(&small_u, opts.imag_rtol)?;
    let (mu, zv) = linalg::real_eigen(&small_v, opts.imag_rtol)?;
    let pairs = pair_reciprocals(&lambda, &mu, opts.pairing_tol)?;

    let us: Vec<DVector<f64>> = zu.iter().map(|z| &basis_u * z).collect();
    let vs: Vec<DVector<f64>> = pairs.iter().map(|&j| &basis_v * &zv[j]).collect();

    // Least squares for the third factors on the mode-3 unfolding:
    // T[(i,j), :] = Σ_l u_l[i] v_l[j] w_l.
    let mut design = DMatrix::zeros(q * q, r);
    for l in 0..r {
        for i in 0..q {
            for j in 0..q {
                design[(i * q + j, l)] = us[l][i] * vs[l][j];
            }
        }
    }
    let svd = SortedSvd::new(&design);
    let rank = svd.rank(1e-10);
    if rank < r {
        return Err(LdsError::RankDeficient(format!(
            "third-factor design matrix has rank {rank} < {r}"
        )));
    }
    let w = svd.pinv(PINV_RTOL) * t.unfold_mode3();
    Ok((0..r)
        .map(|l| RankOneComponent {
            f1: us[l].clone(),
            f2: vs[l].clone(),
            f3: w.row(l).transpose(),
        })
        .collect())
}

/// Decomposes `t` into `r` rank-one terms.
///
/// Contracts the third mode with two random unit vectors from the leading
/// rank-`r` subspace of the mode-3 unfolding, truncates both
/// contractions to rank `r`, diagonalizes `T_r^(a) (T_r^(b))†` and
/// `((T_r^(a))† T_r^(b))ᵀ`, pairs eigenvectors whose eigenvalues are
/// reciprocal within `opts.pairing_tol`, and solves for the third factors by
/// least squares. A failed attempt is retried with fresh contraction vectors
/// up to `opts.attempts` times; the last error is returned.
pub fn jennrich_decompose<R: Rng + ?Sized>(
    t: &Tensor3,
    r: usize,
    rng: &mut R,
    opts: &JennrichOptions,
) -> Result<Vec<RankOneComponent>> {
    let q = t.q();
    if r == 0 {
        return Err(LdsError::InvalidArgument("target rank must be positive".into()));
    }
    if r > q {
        return Err(LdsError::RankTooLarge { rank: r, capacity: q });
    }
    let mode3 = SortedSvd::new(&t.unfold_mode3());
    let mode3_basis = mode3.v.columns(0, r).into_owned();
    let mut last = None;
    for _ in 0..opts.attempts.max(1) {
        match jennrich_attempt(t, r, &mode3_basis, rng, opts) {
            Ok(c) => return Ok(c),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}
