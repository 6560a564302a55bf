//! Small dense real kernels: Householder thin QR and one-sided Jacobi SVD.
//!
//! These back the data generators, the minimum-norm reference solution and
//! the spectral constants in [`crate::theory`]. They favour accuracy over
//! speed and are meant for desk-scale problems (min(m, n) up to a few
//! thousand).

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

const MAX_SWEEPS: usize = 80;

/// Thin QR factorization `A = Q R` of an `m x n` row-major matrix, `m >= n`.
///
/// Returns `Q` (`m x n`, row-major, orthonormal columns) and `R` (`n x n`,
/// row-major, upper triangular).
pub fn householder_thin_qr(m: usize, n: usize, a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if n > m {
        return Err(Error::invalid(format!("thin QR needs m >= n, got {m}x{n}")));
    }
    if a.len() != m * n {
        return Err(Error::DimensionMismatch {
            what: "QR input",
            expected: m * n,
            got: a.len(),
        });
    }
    // Column-major working copy; reflectors overwrite it below the diagonal.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i * n + j]).collect()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = vec![0.0; n * n];

    for k in 0..n {
        let x = &w[k][k..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = x.to_vec();
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|t| t * t).sum();
        if vnorm_sq > 0.0 {
            for col in w.iter_mut().skip(k) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm_sq;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
        }
        for j in k..n {
            r[k * n + j] = w[j][k];
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for k in (0..n).rev() {
        let v = &reflectors[k];
        let vnorm_sq: f64 = v.iter().map(|t| t * t).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        for col in q.iter_mut() {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm_sq;
            for (c, vi) in col[k..].iter_mut().zip(v) {
                *c -= f * vi;
            }
        }
    }
    let mut q_rm = vec![0.0; m * n];
    for (j, col) in q.iter().enumerate() {
        for (i, &val) in col.iter().enumerate() {
            q_rm[i * n + j] = val;
        }
    }
    Ok((q_rm, r))
}

/// Thin singular value decomposition `A = U diag(s) V^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub m: usize,
    pub n: usize,
    /// `m x k` row-major, `k = min(m, n)`.
    pub u: Vec<f64>,
    /// Descending.
    pub s: Vec<f64>,
    /// `n x k` row-major.
    pub v: Vec<f64>,
}

impl Svd {
    pub fn k(&self) -> usize {
        self.s.len()
    }

    /// Numerical rank: singular values above `rel_tol * s[0]`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.s.first().copied().unwrap_or(0.0);
        self.s.iter().take_while(|&&s| s > cut).count()
    }

    /// Pseudoinverse applied to `b`, truncating at `rel_tol * s[0]`.
    pub fn pinv_apply(&self, b: &[f64], rel_tol: f64) -> Vec<f64> {
        let k = self.k();
        let rank = self.rank(rel_tol);
        let mut x = vec![0.0; self.n];
        for j in 0..rank {
            let mut c = 0.0;
            for i in 0..self.m {
                c += self.u[i * k + j] * b[i];
            }
            c /= self.s[j];
            for (l, xl) in x.iter_mut().enumerate() {
                *xl += self.v[l * k + j] * c;
            }
        }
        x
    }
}

/// One-sided (Hestenes) Jacobi SVD of a dense row-major matrix.
///
/// Orthogonalizes the columns of `A` when `m >= n` and of `A^T` otherwise,
/// so the rotations always act on the smaller Gram side.
pub fn jacobi_svd(m: usize, n: usize, a: &[f64]) -> Result<Svd> {
    if a.len() != m * n {
        return Err(Error::DimensionMismatch {
            what: "SVD input",
            expected: m * n,
            got: a.len(),
        });
    }
    let tall = m >= n;
    let (p, q) = if tall { (m, n) } else { (n, m) };
    // Columns of W = A (tall) or A^T (wide), each of length p.
    let mut w: Vec<Vec<f64>> = if tall {
        (0..n).map(|j| (0..m).map(|i| a[i * n + j]).collect()).collect()
    } else {
        (0..m).map(|i| a[i * n..(i + 1) * n].to_vec()).collect()
    };
    let mut v: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            let mut e = vec![0.0; q];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let (alpha, beta, gamma) = {
                    let (wi, wj) = (&w[i], &w[j]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for t in 0..p {
                        al += wi[t] * wi[t];
                        be += wj[t] * wj[t];
                        ga += wi[t] * wj[t];
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = w
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let k = q;
    let s: Vec<f64> = order.iter().map(|&(sv, _)| sv).collect();
    // Left vectors of W: columns of W scaled by 1/s (zero for null directions).
    let mut wl = vec![0.0; p * k];
    let mut wr = vec![0.0; q * k];
    for (newj, &(sv, oldj)) in order.iter().enumerate() {
        if sv > 0.0 {
            for t in 0..p {
                wl[t * k + newj] = w[oldj][t] / sv;
            }
        }
        for t in 0..q {
            wr[t * k + newj] = v[oldj][t];
        }
    }
    let (u, vv) = if tall { (wl, wr) } else { (wr, wl) };
    Ok(Svd { m, n, u, s, v: vv })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

pub fn svd(a: &RowMatrix<f64>) -> Result<Svd> {
    jacobi_svd(a.nrows(), a.ncols(), &a.to_dense())
}

/// `max(m, n) * eps`, relative to the largest singular value.
pub fn default_rank_tol(m: usize, n: usize) -> f64 {
    m.max(n) as f64 * f64::EPSILON
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SvdExtremes {
    pub sigma_max: f64,
    pub sigma_min_nonzero: f64,
    pub rank: usize,
}

/// Largest and smallest nonzero singular values and the numerical rank.
///
/// `rank_tol` is relative to `sigma_max`; `None` uses [`default_rank_tol`].
pub fn svd_extremes(a: &RowMatrix<f64>, rank_tol: Option<f64>) -> Result<SvdExtremes> {
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(a.nrows(), a.ncols()));
    let d = svd(a)?;
    let rank = d.rank(tol);
    if rank == 0 {
        return Err(Error::invalid("matrix is numerically zero"));
    }
    Ok(SvdExtremes {
        sigma_max: d.s[0],
        sigma_min_nonzero: d.s[rank - 1],
        rank,
    })
}

/// `A^+ b`: the least-squares solution of minimum Euclidean norm.
pub fn min_norm_solution(a: &RowMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            what: "right-hand side",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let d = svd(a)?;
    Ok(d.pinv_apply(b, default_rank_tol(a.nrows(), a.ncols())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn gram_err(m: usize, k: usize, q: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                let dot: f64 = (0..m).map(|i| q[i * k + a] * q[i * k + b]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn qr_reconstructs() {
        let mut rng = RngState::new(3);
        let (m, n) = (9, 4);
        let a = rng.normals(m * n);
        let (q, r) = householder_thin_qr(m, n, &a).unwrap();
        assert!(gram_err(m, n, &q) < 1e-13);
        for i in 0..m {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| q[i * n + k] * r[k * n + j]).sum();
                assert!((v - a[i * n + j]).abs() < 1e-12);
            }
        }
        for i in 1..n {
            for j in 0..i {
                assert_eq!(r[i * n + j], 0.0);
            }
        }
        assert!(householder_thin_qr(2, 3, &[0.0; 6]).is_err());
    }

    #[test]
    fn svd_reconstructs_both_shapes() {
        let mut rng = RngState::new(5);
        for &(m, n) in &[(7, 3), (3, 7), (5, 5)] {
            let a = rng.normals(m * n);
            let d = jacobi_svd(m, n, &a).unwrap();
            let k = m.min(n);
            assert!(gram_err(m, k, &d.u) < 1e-12);
            assert!(gram_err(n, k, &d.v) < 1e-12);
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            for i in 0..m {
                for j in 0..n {
                    let v: f64 = (0..k).map(|l| d.u[i * k + l] * d.s[l] * d.v[j * k + l]).sum();
                    assert!((v - a[i * n + j]).abs() < 1e-12, "{m}x{n}");
                }
            }
        }
    }

    #[test]
    fn extremes_examples() {
        let id = RowMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = svd_extremes(&id, None).unwrap();
        assert_eq!((e.sigma_max, e.sigma_min_nonzero, e.rank), (1.0, 1.0, 2));

        let d = RowMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = svd_extremes(&d, None).unwrap();
        assert_eq!((e.sigma_max, e.sigma_min_nonzero, e.rank), (3.0, 1.0, 2));

        // A^T A = [[2,2],[2,2]] has eigenvalues 4 and 0.
        let ones = RowMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let e = svd_extremes(&ones, None).unwrap();
        assert!((e.sigma_max - 2.0).abs() < 1e-15);
        assert!((e.sigma_min_nonzero - 2.0).abs() < 1e-15);
        assert_eq!(e.rank, 1);
    }

    #[test]
    fn min_norm_examples() {
        let a = RowMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(min_norm_solution(&a, &[2.0]).unwrap(), vec![2.0, 0.0]);
        let a = RowMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let x = min_norm_solution(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-15);
        let a = RowMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let x = min_norm_solution(&a, &[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }
}
