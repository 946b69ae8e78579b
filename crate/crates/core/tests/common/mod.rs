//! Reference implementations used only by tests. Each one recomputes a
//! quantity along a different route than the library does.
#![allow(dead_code)]

use std::f64::consts::PI;

use ldslab::lds::{LdsParams, Trajectory};
use nalgebra::{DMatrix, DVector};

fn gaussian_log_density(e: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().expect("covariance is positive definite");
    let l = chol.l();
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let white = l.solve_lower_triangular(e).unwrap();
    -0.5 * (e.len() as f64 * (2.0 * PI).ln() + log_det + white.norm_squared())
}

/// `log p(u) + log p(y | u)` with the second term from a Kalman filter's
/// prediction errors. Unit noise, `x0 ~ N(0, I)`.
pub fn kalman_log_likelihood(params: &LdsParams, traj: &Trajectory) -> f64 {
    let (a, b, c, d) = (params.a(), params.b(), params.c(), params.d());
    let n = params.n();
    let m = params.m();
    let mut x = DVector::zeros(n);
    let mut cov = DMatrix::identity(n, n);
    let mut total = 0.0;
    for t in 0..traj.len() {
        let u = traj.u(t);
        total += gaussian_log_density(&u, &DMatrix::identity(u.len(), u.len()));
        let innovation = traj.y(t) - c * &x - d * &u;
        let s = c * &cov * c.transpose() + DMatrix::identity(m, m);
        total += gaussian_log_density(&innovation, &s);
        let gain = &cov * c.transpose() * s.try_inverse().unwrap();
        x += &gain * innovation;
        cov = &cov - &gain * c * &cov;
        x = a * x + b * &u;
        cov = a * cov * a.transpose() + DMatrix::identity(n, n);
    }
    total
}

/// Covariance of `(u[0..ℓ], y[0..ℓ])` assembled block by block from impulse
/// responses, then the multivariate normal density.
pub fn brute_force_log_likelihood(params: &LdsParams, traj: &Trajectory) -> f64 {
    let (a, b, c, d) = (params.a(), params.b(), params.c(), params.d());
    let (m, n, p) = (params.m(), params.n(), params.p());
    let len = traj.len();
    let pow = |k: usize| {
        let mut out = DMatrix::identity(n, n);
        for _ in 0..k {
            out = a * out;
        }
        out
    };
    // Response of y[t] to u[j].
    let input_gain = |t: usize, j: usize| -> DMatrix<f64> {
        if j > t {
            DMatrix::zeros(m, p)
        } else if j == t {
            d.clone()
        } else {
            c * pow(t - 1 - j) * b
        }
    };
    let dim = len * (p + m);
    let mut cov = DMatrix::zeros(dim, dim);
    for t in 0..len {
        let row = t * p;
        cov.view_mut((row, row), (p, p)).copy_from(&DMatrix::identity(p, p));
    }
    for t in 0..len {
        let yt = len * p + t * m;
        for j in 0..len {
            let g = input_gain(t, j);
            cov.view_mut((yt, j * p), (m, p)).copy_from(&g);
            cov.view_mut((j * p, yt), (p, m)).copy_from(&g.transpose());
        }
        for s in 0..len {
            let ys = len * p + s * m;
            let mut block = c * pow(t) * pow(s).transpose() * c.transpose();
            for j in 0..len {
                block += input_gain(t, j) * input_gain(s, j).transpose();
            }
            for j in 0..t.min(s) {
                block += c * pow(t - 1 - j) * pow(s - 1 - j).transpose() * c.transpose();
            }
            if s == t {
                block += DMatrix::identity(m, m);
            }
            cov.view_mut((yt, ys), (m, m)).copy_from(&block);
        }
    }
    let mut v = DVector::zeros(dim);
    for t in 0..len {
        v.rows_mut(t * p, p).copy_from(&traj.u(t));
        v.rows_mut(len * p + t * m, m).copy_from(&traj.y(t));
    }
    gaussian_log_density(&v, &cov)
}

/// Per-entry sample mean and standard error of the lag-`(k1, k2, k3)` sixth
/// moment, entries in the library's `(i3, j3, i2, j2, i1, j1)` row-major order.
pub fn sixth_moment_mean_and_se(dataset: &[Trajectory], k1: usize, k2: usize, k3: usize) -> (Vec<f64>, Vec<f64>) {
    let m = dataset[0].m();
    let p = dataset[0].p();
    let len = (m * p).pow(3);
    let mut sum = vec![0.0; len];
    let mut sum_sq = vec![0.0; len];
    for traj in dataset {
        let y3 = traj.y(k1 + k2 + k3 + 2);
        let u3 = traj.u(k1 + k2 + 2);
        let y2 = traj.y(k1 + k2 + 1);
        let u2 = traj.u(k1 + 1);
        let y1 = traj.y(k1);
        let u1 = traj.u(0);
        let mut idx = 0;
        for i3 in 0..m {
            for j3 in 0..p {
                for i2 in 0..m {
                    for j2 in 0..p {
                        for i1 in 0..m {
                            for j1 in 0..p {
                                let v = y3[i3] * u3[j3] * y2[i2] * u2[j2] * y1[i1] * u1[j1];
                                sum[idx] += v;
                                sum_sq[idx] += v * v;
                                idx += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let count = dataset.len() as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
    let se = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, mu)| ((sq / count - mu * mu).max(0.0) * count / (count - 1.0) / count).sqrt())
        .collect();
    (mean, se)
}
