//! Singular value decomposition by one-sided Jacobi rotations.
//!
//! The matrices in this crate stay small (a few thousand rows at most), so
//! the Jacobi method's robustness and simplicity win over asymptotically
//! faster bidiagonalization schemes.

use super::matrix::{dot, norm2, Matrix};
use super::LinalgError;

/// Off-diagonal convergence threshold, relative to the column norms.
const JACOBI_TOL: f64 = 1e-12;

/// Columns whose norm falls below `sigma_max * RANK_TOL` get a synthetic
/// orthonormal direction in `U` instead of a normalized work column.
const RANK_TOL: f64 = 1e-13;

/// Thin SVD `A == U * diag(sigma) * V^T` with `r = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left singular vectors, `rows x r`, orthonormal columns.
    pub u: Matrix,
    /// Singular values, non-negative and non-increasing, length `r`.
    pub sigma: Vec<f64>,
    /// Right singular vectors, `cols x r`, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    /// `U * diag(sigma) * V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let m = self.u.rows();
        let n = self.v.rows();
        let r = self.sigma.len();
        Matrix::from_fn(m, n, |i, j| {
            (0..r)
                .map(|k| self.u.get(i, k) * self.sigma[k] * self.v.get(j, k))
                .sum()
        })
    }

    /// Reconstruction with singular values past index `k` (exclusive) dropped.
    pub fn truncated(&self, k: usize) -> Matrix {
        let m = self.u.rows();
        let n = self.v.rows();
        let r = k.min(self.sigma.len());
        Matrix::from_fn(m, n, |i, j| {
            (0..r)
                .map(|l| self.u.get(i, l) * self.sigma[l] * self.v.get(j, l))
                .sum()
        })
    }
}

/// Thin SVD of a dense matrix.
///
/// Fails with [`LinalgError::NonFinite`] on NaN/Inf input and with
/// [`LinalgError::SvdNonConvergence`] if the sweep cap is exhausted.
pub fn svd(a: &Matrix) -> Result<SvdResult, LinalgError> {
    if !a.is_finite() {
        let pos = a.data().iter().position(|x| !x.is_finite()).unwrap();
        return Err(LinalgError::NonFinite {
            row: pos / a.cols(),
            col: pos % a.cols(),
        });
    }
    if a.rows() < a.cols() {
        // Work on the transpose and swap the factors back.
        let t = svd(&a.transpose())?;
        return Ok(SvdResult {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }

    let m = a.rows();
    let n = a.cols();
    // Column-major copies: Jacobi rotates pairs of columns in place.
    let mut work: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let max_sweeps = 100 * n.max(1);
    let mut converged = n < 2;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(&work[p], &work[p]);
                let beta = dot(&work[q], &work[q]);
                let gamma = dot(&work[p], &work[q]);
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut work, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::SvdNonConvergence {
            rows: m,
            cols: n,
            sweeps: max_sweeps,
        });
    }

    // Order by decreasing column norm.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = work.iter().map(|col| norm2(col)).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deferred = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[slot] > sigma_max * RANK_TOL && sigma[slot] > 0.0 {
            u_cols.push(work[j].iter().map(|x| x / sigma[slot]).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            deferred.push(slot);
        }
    }
    for slot in deferred {
        let filler = orthonormal_complement(&u_cols, slot, m);
        u_cols[slot] = filler;
    }

    let u = Matrix::from_fn(m, n, |i, j| u_cols[j][i]);
    let v = Matrix::from_fn(n, n, |i, j| v[order[j]][i]);
    Ok(SvdResult { u, sigma, v })
}

/// Decreasingly ordered singular values of `a`.
pub fn singular_value_curve(a: &Matrix) -> Result<Vec<f64>, LinalgError> {
    Ok(svd(a)?.sigma)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = c * *x - s * *y;
        let yq = s * *x + c * *y;
        *x = xp;
        *y = yq;
    }
}

/// Deterministic unit vector orthogonal to every established column except
/// the one at `skip` (which is being replaced). Picks the standard basis
/// vector with the largest residual after projection, then re-orthogonalizes.
fn orthonormal_complement(cols: &[Vec<f64>], skip: usize, m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..m {
        let mut cand = vec![0.0; m];
        cand[i] = 1.0;
        project_out(&mut cand, cols, skip);
        let norm = norm2(&cand);
        if best.as_ref().is_none_or(|(b, _)| norm > *b) {
            best = Some((norm, cand));
        }
    }
    let (_, mut cand) = best.expect("m >= 1");
    // Second projection pass tightens orthogonality before normalizing.
    project_out(&mut cand, cols, skip);
    let norm = norm2(&cand);
    cand.iter_mut().for_each(|x| *x /= norm);
    cand
}

fn project_out(cand: &mut [f64], cols: &[Vec<f64>], skip: usize) {
    for (j, col) in cols.iter().enumerate() {
        if j == skip || norm2(col) == 0.0 {
            continue;
        }
        let proj = dot(cand, col);
        for (c, u) in cand.iter_mut().zip(col) {
            *c -= proj * u;
        }
    }
}
