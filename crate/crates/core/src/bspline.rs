//! Cubic B-spline collocation and 3-D curve fitting with the row-action solvers.
//!
//! Fitting `m` points with `n` control points solves `A p = q` once per
//! coordinate, where `A` is the `m x n` collocation matrix. The three systems
//! run in lockstep and stop together on the combined error
//! `E_k = ||P_k - P*||_F^2` relative to `E_0`, with `P* = A^+ Q`.
//!
//! With more points than control points `A p = q` is inconsistent, and the
//! greedy methods then stall at the least-squares residual instead of reaching
//! `P*`. [`FitRhs::Projected`] (the default) therefore hands the solvers
//! `A P*`, the projection of the data onto the range of `A`. The projected
//! system is consistent and its minimum-norm solution is exactly `P*`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{default_rank_tol, svd};
use crate::matrix::RowMatrix;
use crate::mmio::fmt_f64;
use crate::solver::{
    HistoryEntry, RowActionSolver, SolveReport, SolverConfig, StepOutcome, StopCriterion, StopReason,
};

pub const ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
}

impl KnotVector {
    /// Validates a clamped cubic knot vector.
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 * ORDER {
            return Err(Error::invalid(format!(
                "a clamped cubic knot vector needs at least {} knots, got {}",
                2 * ORDER,
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("knots must be finite and nondecreasing"));
        }
        let (lo, hi) = (knots[0], knots[knots.len() - 1]);
        if lo >= hi {
            return Err(Error::invalid("knot range is empty"));
        }
        let clamped = knots[..ORDER].iter().all(|&k| k == lo)
            && knots[knots.len() - ORDER..].iter().all(|&k| k == hi);
        let interior = &knots[ORDER..knots.len() - ORDER];
        if !clamped || interior.iter().any(|&k| k <= lo || k >= hi) {
            return Err(Error::invalid(
                "knot vector must be clamped with interior knots strictly inside the range",
            ));
        }
        Ok(KnotVector { knots })
    }

    /// `(0,0,0,0,1,1,1,1)`.
    pub fn bezier() -> Self {
        KnotVector {
            knots: vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
        }
    }

    pub fn order(&self) -> usize {
        ORDER
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, i.e. control points.
    pub fn n_basis(&self) -> usize {
        self.knots.len() - ORDER
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[ORDER - 1], self.knots[self.n_basis()])
    }

    /// Index `s` with `knots[s] <= t < knots[s + 1]`; the right end maps to
    /// the last nonempty span.
    fn span(&self, t: f64) -> usize {
        let n = self.n_basis();
        if t >= self.knots[n] {
            return n - 1;
        }
        // Last index in [ORDER - 1, n - 1] whose knot is <= t.
        let upper = self.knots[ORDER..n].partition_point(|&k| k <= t);
        ORDER - 1 + upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSequence {
    nu: Vec<f64>,
}

impl ParamSequence {
    pub fn new(nu: Vec<f64>) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::invalid("parameter sequence is empty"));
        }
        if nu.iter().any(|v| !v.is_finite()) || nu.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("parameters must be finite and strictly increasing"));
        }
        Ok(ParamSequence { nu })
    }

    pub fn values(&self) -> &[f64] {
        &self.nu
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }
}

/// Ordered points in 3-D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud3 {
    points: Vec<[f64; 3]>,
}

impl PointCloud3 {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a point cloud needs at least two points"));
        }
        Ok(PointCloud3 { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinate `c` of every point.
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[c]).collect()
    }

    pub fn to_csv(&self) -> String {
        points_csv(&self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlNet3 {
    pub points: Vec<[f64; 3]>,
}

impl ControlNet3 {
    pub fn from_coordinates(x: &[f64], y: &[f64], z: &[f64]) -> Self {
        ControlNet3 {
            points: x.iter().zip(y).zip(z).map(|((&a, &b), &c)| [a, b, c]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `||self - other||_F^2`.
    pub fn dist_sq(&self, other: &ControlNet3) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>())
            .sum()
    }

    pub fn frob_sq(&self) -> f64 {
        self.points.iter().flatten().map(|v| v * v).sum()
    }

    pub fn to_csv(&self) -> String {
        points_csv(&self.points)
    }
}

fn points_csv(points: &[[f64; 3]]) -> String {
    let mut out = String::from("index,x,y,z\n");
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
    }
    out
}

fn curve_point(curve_id: u8, t: f64) -> [f64; 3] {
    if curve_id == 1 {
        [
            30.0 * (t * PI / 3.0).cos(),
            30.0 * (t * PI / 3.0).sin(),
            3.0 * t * PI,
        ]
    } else {
        [
            -22.0 * t.cos() - 128.0 * t.sin() - 44.0 * (3.0 * t).cos() - 78.0 * (3.0 * t).sin(),
            -10.0 * (2.0 * t).cos() - 27.0 * (2.0 * t).sin() + 38.0 * (4.0 * t).cos()
                + 46.0 * (4.0 * t).sin(),
            70.0 * (3.0 * t).cos() - 40.0 * (3.0 * t).sin(),
        ]
    }
}

/// `m` points at uniformly spaced `t`: the helix (curve 1, `t` in
/// `[0, 10 pi]`) or the knot-shaped trigonometric curve (curve 2, `t` in
/// `[0, 2 pi]`). Returns the points and their `t` values.
pub fn sample_curve(curve_id: u8, m: usize) -> Result<(PointCloud3, ParamSequence)> {
    let t_end = match curve_id {
        1 => 10.0 * PI,
        2 => 2.0 * PI,
        _ => return Err(Error::invalid(format!("unknown curve {curve_id}; expected 1 or 2"))),
    };
    if m < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let ts: Vec<f64> = (0..m)
        .map(|i| t_end * i as f64 / (m - 1) as f64)
        .collect();
    let points = ts.iter().map(|&t| curve_point(curve_id, t)).collect();
    Ok((PointCloud3::new(points)?, ParamSequence::new(ts)?))
}

/// Cumulative chord length normalized to `[0, 1]`.
pub fn chord_params(points: &PointCloud3) -> Result<ParamSequence> {
    let p = points.points();
    let mut nu = Vec::with_capacity(p.len());
    nu.push(0.0);
    let mut acc = 0.0;
    for w in p.windows(2) {
        let d = (0..3).map(|c| (w[1][c] - w[0][c]).powi(2)).sum::<f64>().sqrt();
        acc += d;
        nu.push(acc);
    }
    if acc == 0.0 {
        return Err(Error::invalid("all points coincide; chord length is zero"));
    }
    for v in &mut nu {
        *v /= acc;
    }
    // Guard against 0.999.. from the division.
    *nu.last_mut().expect("nonempty") = 1.0;
    ParamSequence::new(nu).map_err(|_| Error::invalid("consecutive points coincide"))
}

/// Clamped cubic knots for `n_ctrl` control points by de Boor averaging.
///
/// `nu` is first resampled to `n_ctrl` values by linear interpolation over its
/// index; interior knot `j` is the mean of resampled values `j..j+3`.
pub fn averaged_knots(nu: &ParamSequence, n_ctrl: usize) -> Result<KnotVector> {
    let m = nu.len();
    if n_ctrl < ORDER || n_ctrl > m {
        return Err(Error::invalid(format!(
            "need {ORDER} <= n_ctrl <= m = {m}, got {n_ctrl}"
        )));
    }
    let v = nu.values();
    let resampled: Vec<f64> = (0..n_ctrl)
        .map(|j| {
            let pos = j as f64 * (m - 1) as f64 / (n_ctrl - 1) as f64;
            let lo = (pos.floor() as usize).min(m - 1);
            let hi = (lo + 1).min(m - 1);
            let frac = pos - lo as f64;
            v[lo] + frac * (v[hi] - v[lo])
        })
        .collect();
    let (lo, hi) = (v[0], v[m - 1]);
    let mut knots = vec![lo; ORDER];
    for j in 1..=n_ctrl - ORDER {
        knots.push((resampled[j] + resampled[j + 1] + resampled[j + 2]) / 3.0);
    }
    knots.extend([hi; ORDER]);
    KnotVector::new(knots)
}

/// Nonzero cubic basis values at `t`: `(first, [N_first, .., N_first+3])`.
pub fn basis_row(knots: &KnotVector, t: f64) -> Result<(usize, [f64; 4])> {
    let (lo, hi) = knots.range();
    if !(t >= lo && t <= hi) {
        return Err(Error::invalid(format!("t = {t} outside the knot range [{lo}, {hi}]")));
    }
    let u = knots.knots();
    let s = knots.span(t);
    // Cox-de Boor triangle for the order-4 functions supported on span s.
    let mut n = [0.0; ORDER];
    let mut left = [0.0; ORDER];
    let mut right = [0.0; ORDER];
    n[0] = 1.0;
    for j in 1..ORDER {
        left[j] = t - u[s + 1 - j];
        right[j] = u[s + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    Ok((s + 1 - ORDER, n))
}

/// Sparse `m x n_ctrl` matrix of basis values at each parameter.
pub fn collocation_matrix(knots: &KnotVector, nu: &ParamSequence) -> Result<RowMatrix<f64>> {
    let n = knots.n_basis();
    let mut indptr = Vec::with_capacity(nu.len() + 1);
    let mut indices = Vec::with_capacity(ORDER * nu.len());
    let mut values = Vec::with_capacity(ORDER * nu.len());
    indptr.push(0);
    for &t in nu.values() {
        let (first, vals) = basis_row(knots, t)?;
        for (k, &v) in vals.iter().enumerate() {
            if v != 0.0 {
                indices.push(first + k);
                values.push(v);
            }
        }
        indptr.push(indices.len());
    }
    RowMatrix::from_csr(nu.len(), n, indptr, indices, values)
}

/// Curve point at `t`.
pub fn evaluate(knots: &KnotVector, control: &ControlNet3, t: f64) -> Result<[f64; 3]> {
    if control.len() != knots.n_basis() {
        return Err(Error::DimensionMismatch {
            what: "control net",
            expected: knots.n_basis(),
            got: control.len(),
        });
    }
    let (first, vals) = basis_row(knots, t)?;
    let mut out = [0.0; 3];
    for (k, &v) in vals.iter().enumerate() {
        for c in 0..3 {
            out[c] += v * control.points[first + k][c];
        }
    }
    Ok(out)
}

/// Right-hand side handed to the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitRhs {
    /// `A P*`: consistent, converges to `P*`.
    #[default]
    Projected,
    /// The data itself; only consistent when the points lie on the spline space.
    Raw,
}

#[derive(Debug, Clone)]
pub struct CurveFit {
    pub knots: KnotVector,
    pub params: ParamSequence,
    pub control: ControlNet3,
    /// Least-squares control net `A^+ Q`.
    pub lsq: ControlNet3,
    pub report: SolveReport,
}

/// Fits `points` with `n_ctrl` control points using chord-length parameters
/// and averaged knots.
pub fn fit_curve(points: &PointCloud3, n_ctrl: usize, config: &SolverConfig) -> Result<CurveFit> {
    fit_curve_with(points, n_ctrl, config, FitRhs::Projected)
}

pub fn fit_curve_with(
    points: &PointCloud3,
    n_ctrl: usize,
    config: &SolverConfig,
    rhs: FitRhs,
) -> Result<CurveFit> {
    let params = chord_params(points)?;
    let knots = averaged_knots(&params, n_ctrl)?;
    let a = collocation_matrix(&knots, &params)?;
    let (control, lsq, report) = fit_system(&a, points, config, rhs)?;
    Ok(CurveFit {
        knots,
        params,
        control,
        lsq,
        report,
    })
}

/// Lockstep solve of the three coordinate systems of a given collocation matrix.
pub fn fit_system(
    a: &RowMatrix<f64>,
    points: &PointCloud3,
    config: &SolverConfig,
    rhs: FitRhs,
) -> Result<(ControlNet3, ControlNet3, SolveReport)> {
    config.validate()?;
    if points.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            what: "point cloud",
            expected: a.nrows(),
            got: points.len(),
        });
    }
    let started = Instant::now();
    let d = svd(a)?;
    let tol = default_rank_tol(a.nrows(), a.ncols());
    let q: Vec<Vec<f64>> = (0..3).map(|c| points.coordinate(c)).collect();
    let p_star: Vec<Vec<f64>> = q.iter().map(|qc| d.pinv_apply(qc, tol)).collect();
    let b: Vec<Vec<f64>> = match rhs {
        FitRhs::Projected => p_star.iter().map(|p| a.matvec(p)).collect::<Result<_>>()?,
        FitRhs::Raw => q,
    };
    let lsq = ControlNet3::from_coordinates(&p_star[0], &p_star[1], &p_star[2]);

    let mut solvers = b
        .iter()
        .map(|bc| RowActionSolver::new(a, bc, config.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut active = [true; 3];
    let e0 = lsq.frob_sq();
    let denom = if e0 > 0.0 { e0 } else { 1.0 };
    let measure = |solvers: &[RowActionSolver<'_, f64>]| -> f64 {
        solvers
            .iter()
            .zip(&p_star)
            .map(|(s, p)| crate::scalar::dist_sq(s.x(), p))
            .sum::<f64>()
            / denom
    };

    let mut history = config.record_history.then(Vec::new);
    let mut rse = measure(&solvers);
    let mut k = 0;
    if let Some(h) = history.as_mut() {
        h.push(HistoryEntry { k, rse, set_size: 0 });
    }
    let stop_reason = loop {
        if rse <= config.rse_tol {
            break StopReason::Converged;
        }
        if k >= config.max_iters {
            break StopReason::MaxIterations;
        }
        let mut set_size = 0;
        for (s, live) in solvers.iter_mut().zip(active.iter_mut()) {
            if !*live {
                continue;
            }
            match s.step()? {
                StepOutcome::Stepped(rec) => set_size += rec.selected.len(),
                StepOutcome::ZeroResidual | StepOutcome::Stalled => *live = false,
            }
        }
        if active.iter().all(|&l| !l) {
            rse = measure(&solvers);
            break if rse <= config.rse_tol {
                StopReason::Converged
            } else {
                StopReason::ZeroResidual
            };
        }
        k += 1;
        rse = measure(&solvers);
        if let Some(h) = history.as_mut() {
            h.push(HistoryEntry { k, rse, set_size });
        }
        if !rse.is_finite() {
            break StopReason::Diverged;
        }
    };

    let xs: Vec<&[f64]> = solvers.iter().map(|s| s.x()).collect();
    let control = ControlNet3::from_coordinates(xs[0], xs[1], xs[2]);
    let report = SolveReport {
        method: config.method,
        alpha: config.alpha,
        beta: config.beta,
        iterations: k,
        converged: rse <= config.rse_tol,
        final_rse: rse,
        rse_tol: config.rse_tol,
        criterion: StopCriterion::SolutionError,
        stop_reason,
        history,
        wall_time: started.elapsed(),
        warnings: Vec::new(),
    };
    Ok((control, lsq, report))
}
