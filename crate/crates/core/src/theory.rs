//! Contraction constants for the greedy methods and their momentum variants.
//!
//! All norms in the error recurrences are squared Euclidean norms: with
//! `e_k = ||x_k - x*||^2` the momentum methods satisfy
//!
//! ```text
//! e_{k+1} <= gamma1 * e_k + gamma2 * e_{k-1}
//! gamma1   = (1 + 3 beta + beta^2) + (alpha^2 - 2 alpha - alpha beta) rho
//! gamma2   = 2 beta^2 + (1 + alpha) beta
//! ```
//!
//! where `rho` is the per-step rate constant of the underlying greedy rule.
//! `gamma1 + gamma2 = 1 + 3 beta^2 + tau1 beta - tau2`, so the pair is a
//! contraction exactly when `beta` is below the positive root of
//! `3 beta^2 + tau1 beta - tau2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::greedy::{IndexSet, LossVector};
use crate::linalg::{svd, svd_extremes, SvdExtremes};
use crate::matrix::RowMatrix;

/// Largest `min(m, n)` for which the spectral checks run.
pub const DESK_SCALE_LIMIT: usize = 2000;

/// Slack used by [`verify_two_term_recurrence`], relative to `e_k`.
pub const RECURRENCE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumCoeffs {
    pub gamma1: f64,
    pub gamma2: f64,
    pub rho: f64,
}

impl MomentumCoeffs {
    pub fn sum(&self) -> f64 {
        self.gamma1 + self.gamma2
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")))
    }
}

pub fn momentum_coeffs(alpha: f64, beta: f64, rho: f64) -> Result<MomentumCoeffs> {
    check_alpha(alpha)?;
    check_rho(rho)?;
    if !(beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    Ok(MomentumCoeffs {
        gamma1: (1.0 + 3.0 * beta + beta * beta) + (alpha * alpha - 2.0 * alpha - alpha * beta) * rho,
        gamma2: 2.0 * beta * beta + (1.0 + alpha) * beta,
        rho,
    })
}

/// Positive root of `3 beta^2 + tau1 beta - tau2` with `tau1 = 4 + alpha - alpha rho`
/// and `tau2 = alpha (2 - alpha) rho`. Any `beta` strictly below it makes
/// `gamma1 + gamma2 < 1`.
pub fn beta_upper_bound(alpha: f64, rho: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_rho(rho)?;
    let tau1 = 4.0 + alpha - alpha * rho;
    let tau2 = alpha * (2.0 - alpha) * rho;
    // (sqrt(tau1^2 + 12 tau2) - tau1) / 6 without the cancellation.
    Ok(2.0 * tau2 / ((tau1 * tau1 + 12.0 * tau2).sqrt() + tau1))
}

/// Roots of `t^2 - a1 t - a2`: `p = (sqrt(a1^2 + 4 a2) - a1) / 2` and
/// `q = (sqrt(a1^2 + 4 a2) + a1) / 2`. A sequence with
/// `e_{k+1} <= a1 e_k + a2 e_{k-1}` then satisfies
/// `e_{k+1} + p e_k <= q (e_k + p e_{k-1})`, and `q < 1` iff `a1 + a2 < 1`.
pub fn lemma_pq(a1: f64, a2: f64) -> Result<(f64, f64)> {
    if !(a1 >= 0.0 && a2 >= 0.0 && a1 + a2 < 1.0) {
        return Err(Error::invalid(format!(
            "need a1 >= 0, a2 >= 0 and a1 + a2 < 1, got a1 = {a1}, a2 = {a2}"
        )));
    }
    let disc = (a1 * a1 + 4.0 * a2).sqrt();
    Ok(((disc - a1) / 2.0, (disc + a1) / 2.0))
}

/// `max psi / (2 ||r||^2) + 1 / (2 ||A||_F^2)`.
pub fn epsilon_k<T: crate::scalar::Scalar>(
    a: &RowMatrix<T>,
    loss: &LossVector,
    r: &[T],
) -> Result<f64> {
    if r.len() != a.nrows() || loss.psi.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            what: "residual",
            expected: a.nrows(),
            got: r.len(),
        });
    }
    let rr = crate::scalar::norm_sq(r);
    if rr == 0.0 {
        return Err(Error::ZeroLoss);
    }
    Ok(loss.max_val / (2.0 * rr) + 1.0 / (2.0 * a.frob_sq()))
}

fn check_set(a: &RowMatrix<f64>, set: &IndexSet, name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid(format!("{name} must be nonempty")));
    }
    let last = *set.as_slice().last().expect("nonempty");
    if last >= a.nrows() {
        return Err(Error::IndexOutOfRange {
            index: last,
            len: a.nrows(),
        });
    }
    Ok(())
}

/// Spectral data of `A` computed once and shared by the per-step constants.
#[derive(Debug, Clone)]
pub struct Spectral<'a> {
    a: &'a RowMatrix<f64>,
    pub extremes: SvdExtremes,
}

impl<'a> Spectral<'a> {
    pub fn new(a: &'a RowMatrix<f64>) -> Result<Self> {
        let small = a.nrows().min(a.ncols());
        if small > DESK_SCALE_LIMIT {
            return Err(Error::TooLarge(small));
        }
        Ok(Spectral {
            a,
            extremes: svd_extremes(a, None)?,
        })
    }

    /// `sigma_r^2(A)`, the smallest nonzero singular value squared.
    pub fn sigma_r_sq(&self) -> f64 {
        self.extremes.sigma_min_nonzero.powi(2)
    }

    /// `sigma_1^2(A_U)`.
    pub fn sigma1_sq_rows(&self, set: &IndexSet) -> Result<f64> {
        check_set(self.a, set, "row set")?;
        let sub = self.a.select_rows(set.as_slice())?;
        let d = svd(&sub)?;
        Ok(d.s[0] * d.s[0])
    }

    /// `sigma_r^2(A) / ||A_Uhat||_F^2`.
    pub fn rho_mwrk(&self, u_hat: &IndexSet) -> Result<f64> {
        check_set(self.a, u_hat, "U_hat")?;
        Ok(self.sigma_r_sq() / self.a.frob_sq_rows(u_hat.as_slice()))
    }

    /// `(F / (2 F_Uhat) + 1/2) * (F_U / F) * (sigma_r^2(A) / sigma_1^2(A_U))`
    /// with `F_S = ||A_S||_F^2`.
    pub fn rho_mfdbk(&self, u: &IndexSet, u_hat: &IndexSet) -> Result<f64> {
        check_set(self.a, u, "U")?;
        check_set(self.a, u_hat, "U_hat")?;
        if !u.is_subset_of(u_hat) {
            return Err(Error::invalid("U must be a subset of U_hat"));
        }
        let f = self.a.frob_sq();
        let f_hat = self.a.frob_sq_rows(u_hat.as_slice());
        let f_u = self.a.frob_sq_rows(u.as_slice());
        Ok((0.5 * f / f_hat + 0.5) * (f_u / f) * (self.sigma_r_sq() / self.sigma1_sq_rows(u)?))
    }

    /// `(gamma_tilde, 1 - sigma_r^2 / gamma_tilde)` with
    /// `gamma_tilde = max_i sum_{j != i} ||A_j||^2`.
    ///
    /// A single-row system has `gamma_tilde = 0` and is solved by one
    /// projection; its factor is 0. Rounding can push the factor slightly
    /// below zero for orthogonal rows, so it is clamped.
    pub fn mwrk_factor(&self) -> (f64, f64) {
        let min_row = self
            .a
            .row_sq_norms()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let gamma_tilde = if self.a.nrows() == 1 {
            0.0
        } else {
            self.a.frob_sq() - min_row
        };
        if gamma_tilde <= 0.0 {
            return (0.0, 0.0);
        }
        (gamma_tilde, (1.0 - self.sigma_r_sq() / gamma_tilde).max(0.0))
    }

    /// `1 - gamma_hat * (F_Uhat / sigma_1^2(A_Uhat)) * (sigma_r^2 / F)` with
    /// `gamma_hat = (F / (q_hat F_Uhat + (1 - q_hat) F_U) + 1) / 2`.
    pub fn fdbk_factor(&self, u: &IndexSet, u_hat: &IndexSet, q_hat: f64) -> Result<f64> {
        check_set(self.a, u, "U")?;
        check_set(self.a, u_hat, "U_hat")?;
        if !(q_hat > 0.0 && q_hat <= 1.0) {
            return Err(Error::invalid(format!("q_hat must lie in (0, 1], got {q_hat}")));
        }
        let f = self.a.frob_sq();
        let f_hat = self.a.frob_sq_rows(u_hat.as_slice());
        let f_u = self.a.frob_sq_rows(u.as_slice());
        let gamma_hat = 0.5 * (f / (q_hat * f_hat + (1.0 - q_hat) * f_u) + 1.0);
        Ok(1.0 - gamma_hat * (f_hat / self.sigma1_sq_rows(u_hat)?) * (self.sigma_r_sq() / f))
    }
}

pub fn rho_mwrk(a: &RowMatrix<f64>, u_hat: &IndexSet) -> Result<f64> {
    Spectral::new(a)?.rho_mwrk(u_hat)
}

pub fn rho_mfdbk(a: &RowMatrix<f64>, u: &IndexSet, u_hat: &IndexSet) -> Result<f64> {
    Spectral::new(a)?.rho_mfdbk(u, u_hat)
}

pub fn mwrk_factor(a: &RowMatrix<f64>) -> Result<(f64, f64)> {
    Ok(Spectral::new(a)?.mwrk_factor())
}

pub fn fdbk_factor(a: &RowMatrix<f64>, u: &IndexSet, u_hat: &IndexSet, q_hat: f64) -> Result<f64> {
    Spectral::new(a)?.fdbk_factor(u, u_hat, q_hat)
}

/// Checks `e_{k+1} <= gamma1_k e_k + gamma2_k e_{k-1} + slack * e_k` for every
/// step.
///
/// `errors[k]` is the squared error of iterate `k` and `coeffs[k]` the
/// coefficients of the step from `k` to `k + 1`, so
/// `errors.len() == coeffs.len() + 1`. The iteration starts with
/// `x_prev = x_0`, hence `e_{-1} = e_0`.
pub fn verify_two_term_recurrence(errors: &[f64], coeffs: &[MomentumCoeffs]) -> Result<Vec<bool>> {
    if errors.len() < 3 {
        return Err(Error::invalid("need at least three errors"));
    }
    if coeffs.len() + 1 != errors.len() {
        return Err(Error::DimensionMismatch {
            what: "coefficient history",
            expected: errors.len() - 1,
            got: coeffs.len(),
        });
    }
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let before = if k == 0 { errors[0] } else { errors[k - 1] };
            errors[k + 1] <= c.gamma1 * errors[k] + c.gamma2 * before + RECURRENCE_SLACK * errors[k]
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub beta_max: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `gamma1 + gamma2 < 1`.
    pub contraction: bool,
    /// `(p, q)` when the coefficients form a contraction.
    pub pq: Option<(f64, f64)>,
    pub sigma_max: Option<f64>,
    pub sigma_min_nonzero: Option<f64>,
    pub rank: Option<usize>,
    pub gamma_tilde: Option<f64>,
    /// `1 - sigma_r^2 / gamma_tilde`.
    pub mwrk_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_step_factors: Option<Vec<f64>>,
}

/// Bounds for `(alpha, beta)`, optionally for a concrete matrix.
///
/// Without an explicit `rho` the matrix supplies `sigma_r^2 / ||A||_F^2`, the
/// rate constant of the full row set and the smallest per-step value.
pub fn bound_report(
    a: Option<&RowMatrix<f64>>,
    alpha: f64,
    beta: f64,
    rho: Option<f64>,
) -> Result<BoundReport> {
    let spectral = a.map(Spectral::new).transpose()?;
    let rho = match (rho, &spectral) {
        (Some(r), _) => r,
        (None, Some(s)) => s.sigma_r_sq() / s.a.frob_sq(),
        (None, None) => return Err(Error::invalid("need rho or a matrix")),
    };
    let coeffs = momentum_coeffs(alpha, beta, rho)?;
    let contraction = coeffs.sum() < 1.0;
    let pq = if contraction {
        let pq = lemma_pq(coeffs.gamma1, coeffs.gamma2)?;
        assert!(pq.1 < 1.0, "q = {} with gamma1 + gamma2 = {}", pq.1, coeffs.sum());
        Some(pq)
    } else {
        None
    };
    let factor = spectral.as_ref().map(|s| s.mwrk_factor());
    Ok(BoundReport {
        alpha,
        beta,
        rho,
        beta_max: beta_upper_bound(alpha, rho)?,
        gamma1: coeffs.gamma1,
        gamma2: coeffs.gamma2,
        contraction,
        pq,
        sigma_max: spectral.as_ref().map(|s| s.extremes.sigma_max),
        sigma_min_nonzero: spectral.as_ref().map(|s| s.extremes.sigma_min_nonzero),
        rank: spectral.as_ref().map(|s| s.extremes.rank),
        gamma_tilde: factor.map(|f| f.0),
        mwrk_factor: factor.map(|f| f.1),
        per_step_factors: None,
    })
}
