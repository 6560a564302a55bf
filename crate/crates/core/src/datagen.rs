//! Seeded synthetic test matrices and consistent right-hand sides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{householder_thin_qr, min_norm_solution};
use crate::matrix::RowMatrix;
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Gaussian,
    Udv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: MatrixKind,
    pub m: usize,
    pub n: usize,
    /// Rank of the `U D V^T` product; ignored for Gaussian matrices.
    pub r: usize,
    /// Upper end of the singular value range `(1, kappa)`; ignored for
    /// Gaussian matrices.
    pub kappa: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Self {
        SyntheticSpec {
            kind: MatrixKind::Gaussian,
            m,
            n,
            r: m.min(n),
            kappa: 1.0,
            seed,
        }
    }

    pub fn udv(m: usize, n: usize, r: usize, kappa: f64, seed: u64) -> Self {
        SyntheticSpec {
            kind: MatrixKind::Udv,
            m,
            n,
            r,
            kappa,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if self.kind == MatrixKind::Udv {
            if self.r == 0 || self.r > self.m.min(self.n) {
                return Err(Error::invalid(format!(
                    "rank {} must lie in 1..=min(m, n) = {}",
                    self.r,
                    self.m.min(self.n)
                )));
            }
            if !(self.kappa > 1.0) {
                return Err(Error::invalid(format!("kappa must exceed 1, got {}", self.kappa)));
            }
        }
        Ok(())
    }

    /// Draws the matrix from a fresh stream seeded with `self.seed`.
    pub fn generate(&self) -> Result<RowMatrix<f64>> {
        self.validate()?;
        let mut rng = RngState::new(self.seed);
        match self.kind {
            MatrixKind::Gaussian => gaussian_matrix(self.m, self.n, &mut rng),
            MatrixKind::Udv => udv_matrix(self, &mut rng),
        }
    }
}

/// I.i.d. standard normal entries.
pub fn gaussian_matrix(m: usize, n: usize, rng: &mut RngState) -> Result<RowMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("matrix dimensions must be positive"));
    }
    let mut entries = Vec::with_capacity(m * n);
    for _ in 0..m {
        loop {
            let row = rng.normals(n);
            if row.iter().any(|&v| v != 0.0) {
                entries.extend(row);
                break;
            }
        }
    }
    RowMatrix::from_row_major(m, n, entries)
}

/// Row-major `m x r` block with orthonormal columns: the Q factor of a
/// Gaussian matrix.
pub fn orthonormal_columns_dense(m: usize, r: usize, rng: &mut RngState) -> Result<Vec<f64>> {
    if r == 0 || r > m {
        return Err(Error::invalid(format!(
            "need 1 <= r <= m for orthonormal columns, got m={m}, r={r}"
        )));
    }
    let g = rng.normals(m * r);
    let (q, _) = householder_thin_qr(m, r, &g)?;
    Ok(q)
}

pub fn orthonormal_columns(m: usize, r: usize, rng: &mut RngState) -> Result<RowMatrix<f64>> {
    RowMatrix::from_row_major(m, r, orthonormal_columns_dense(m, r, rng)?)
}

/// `A = U D V^T` with orthonormal `U` (`m x r`), `V` (`n x r`) and diagonal
/// `D` uniform in `(1, kappa)`.
pub fn udv_matrix(spec: &SyntheticSpec, rng: &mut RngState) -> Result<RowMatrix<f64>> {
    if spec.kind != MatrixKind::Udv {
        return Err(Error::invalid("udv_matrix needs a UDV spec"));
    }
    spec.validate()?;
    let (m, n, r) = (spec.m, spec.n, spec.r);
    let u = orthonormal_columns_dense(m, r, rng)?;
    let v = orthonormal_columns_dense(n, r, rng)?;
    let d: Vec<f64> = (0..r)
        .map(|_| 1.0 + (spec.kappa - 1.0) * rng.uniform())
        .collect();
    let mut entries = vec![0.0; m * n];
    for i in 0..m {
        let ud: Vec<f64> = (0..r).map(|l| u[i * r + l] * d[l]).collect();
        let row = &mut entries[i * n..(i + 1) * n];
        for (j, a) in row.iter_mut().enumerate() {
            let vj = &v[j * r..(j + 1) * r];
            *a = ud.iter().zip(vj).map(|(x, y)| x * y).sum();
        }
    }
    RowMatrix::from_row_major(m, n, entries)
}

/// Consistent test system: `x* = A^+ 1` and `b = A x*`.
pub fn consistent_system(a: &RowMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let ones = vec![1.0; a.nrows()];
    let x_star = min_norm_solution(a, &ones)?;
    let b = a.matvec(&x_star)?;
    Ok((b, x_star))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{svd, svd_extremes};

    fn gram_err(rows: usize, cols: usize, q: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..cols {
            for b in 0..cols {
                let dot: f64 = (0..rows).map(|i| q[i * cols + a] * q[i * cols + b]).sum();
                worst = worst.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    #[test]
    fn gaussian_shape_and_determinism() {
        let a = gaussian_matrix(1, 1, &mut RngState::new(0)).unwrap();
        assert_eq!((a.nrows(), a.ncols()), (1, 1));
        let x = gaussian_matrix(30, 7, &mut RngState::new(11)).unwrap();
        let y = gaussian_matrix(30, 7, &mut RngState::new(11)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn gaussian_moments() {
        let a = gaussian_matrix(1000, 50, &mut RngState::new(2024)).unwrap();
        let e = a.to_dense();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / e.len() as f64;
        assert!(mean.abs() <= 0.05, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.1, "var {var}");
    }

    #[test]
    fn orthonormal_examples() {
        let mut rng = RngState::new(4);
        let q = orthonormal_columns_dense(5, 5, &mut rng).unwrap();
        assert!(gram_err(5, 5, &q) <= 1e-12);
        let q = orthonormal_columns_dense(50, 5, &mut rng).unwrap();
        for j in 0..5 {
            let nrm: f64 = (0..50).map(|i| q[i * 5 + j] * q[i * 5 + j]).sum::<f64>().sqrt();
            assert!((nrm - 1.0).abs() <= 1e-12);
        }
        let q = orthonormal_columns_dense(20, 10, &mut RngState::new(8)).unwrap();
        assert!(gram_err(20, 10, &q) <= 1e-12);
        assert!(orthonormal_columns_dense(3, 4, &mut rng).is_err());
    }

    #[test]
    fn udv_spectrum() {
        for &(m, n) in &[(20, 10), (10, 20)] {
            let spec = SyntheticSpec::udv(m, n, 5, 2.0, 17);
            let a = spec.generate().unwrap();
            let d = svd(&a).unwrap();
            let tol = crate::linalg::default_rank_tol(m, n) * d.s[0];
            let above: Vec<f64> = d.s.iter().copied().filter(|&s| s > tol).collect();
            assert_eq!(above.len(), 5, "{m}x{n}: {:?}", d.s);
            assert!(above.iter().all(|&s| s > 1.0 && s < 2.0), "{above:?}");
        }
    }

    #[test]
    fn udv_near_identity_spectrum() {
        let spec = SyntheticSpec::udv(6, 6, 6, 1.0 + 1e-9, 1);
        let e = svd_extremes(&spec.generate().unwrap(), None).unwrap();
        assert_eq!(e.rank, 6);
        assert!((e.sigma_max - 1.0).abs() < 1e-8 && (e.sigma_min_nonzero - 1.0).abs() < 1e-8);
    }

    #[test]
    fn udv_rejects_bad_specs() {
        assert!(SyntheticSpec::udv(5, 4, 5, 2.0, 0).generate().is_err());
        assert!(SyntheticSpec::udv(5, 4, 2, 1.0, 0).generate().is_err());
        assert!(SyntheticSpec::udv(5, 4, 0, 2.0, 0).generate().is_err());
    }

    #[test]
    fn consistent_system_is_consistent() {
        let a = SyntheticSpec::udv(30, 12, 4, 5.0, 3).generate().unwrap();
        let (b, x) = consistent_system(&a).unwrap();
        let r = crate::matrix::residual(&a, &b, &x).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }
}
