//! Benchmark and sweep drivers behind the `rowact` command line.
//!
//! Cells run concurrently on rayon's pool against shared matrices. Results
//! are collected in cell order, so the output does not depend on scheduling.
//! Wall-clock columns are opt-in because they are the only nondeterministic
//! field.

pub mod cli;

use rayon::prelude::*;
use rowact_core::datagen::{consistent_system, SyntheticSpec};
use rowact_core::mmio::fmt_f64;
use rowact_core::{solve, SolveReport, SolverConfig, SolverMethod};
use serde::Serialize;

pub use rowact_core::datagen::MatrixKind;

/// One method and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodParams {
    pub method: SolverMethod,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
}

impl MethodParams {
    pub fn defaults(method: SolverMethod) -> Self {
        let (alpha, beta) = method.default_alpha_beta();
        MethodParams {
            method,
            alpha,
            beta,
            theta: 0.5,
        }
    }

    fn config(&self, rse_tol: f64, max_iters: usize, seed: u64) -> SolverConfig {
        SolverConfig {
            theta: self.theta,
            rse_tol,
            max_iters,
            seed,
            ..SolverConfig::new(self.method).with_alpha_beta(self.alpha, self.beta)
        }
    }
}

/// A matrix family; the seed is supplied per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixShape {
    pub kind: MatrixKind,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub kappa: f64,
}

impl MatrixShape {
    pub fn with_seed(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            kind: self.kind,
            m: self.m,
            n: self.n,
            r: self.r,
            kappa: self.kappa,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub matrices: Vec<MatrixShape>,
    pub methods: Vec<MethodParams>,
    pub seeds: Vec<u64>,
    pub rse_tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub params: MethodParams,
    pub shape: MatrixShape,
    /// `None` marks the median row.
    pub seed: Option<u64>,
    pub iters: f64,
    pub converged: bool,
    pub final_rse: f64,
    pub wall_ms: f64,
    /// Median iterations of the momentum-free baseline over this method's,
    /// on median rows whose baseline is part of the run.
    pub speedup: Option<f64>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn validate_grid(name: &str, values: &[f64], ok: impl Fn(f64) -> bool) -> rowact_core::Result<()> {
    if values.is_empty() {
        return Err(rowact_core::Error::InvalidArgument(format!("{name} must be nonempty")));
    }
    if let Some(bad) = values.iter().find(|&&v| !ok(v)) {
        return Err(rowact_core::Error::InvalidArgument(format!("{name} value {bad} out of range")));
    }
    Ok(())
}

impl BenchSpec {
    pub fn validate(&self) -> rowact_core::Result<()> {
        if self.seeds.is_empty() || self.methods.is_empty() || self.matrices.is_empty() {
            return Err(rowact_core::Error::InvalidArgument(
                "bench needs at least one matrix, method and seed".into(),
            ));
        }
        for shape in &self.matrices {
            shape.with_seed(0).validate()?;
        }
        for p in &self.methods {
            p.config(self.rse_tol, self.max_iters, 0).validate()?;
        }
        Ok(())
    }
}

/// Runs every (matrix, seed, method) cell and appends a median row per
/// (matrix, method).
pub fn cmd_bench(spec: &BenchSpec) -> rowact_core::Result<Vec<BenchRow>> {
    spec.validate()?;
    let systems: Vec<(usize, u64)> = (0..spec.matrices.len())
        .flat_map(|mi| spec.seeds.iter().map(move |&s| (mi, s)))
        .collect();
    let reports: Vec<Vec<SolveReport>> = systems
        .par_iter()
        .map(|&(mi, seed)| {
            let a = spec.matrices[mi].with_seed(seed).generate()?;
            let (b, xs) = consistent_system(&a)?;
            spec.methods
                .par_iter()
                .map(|p| {
                    let cfg = p.config(spec.rse_tol, spec.max_iters, seed);
                    solve(&a, &b, Some(&xs), &cfg).map(|o| o.report)
                })
                .collect()
        })
        .collect::<rowact_core::Result<_>>()?;

    let mut rows = Vec::new();
    for (mi, shape) in spec.matrices.iter().enumerate() {
        let cells: Vec<(u64, &Vec<SolveReport>)> = systems
            .iter()
            .zip(&reports)
            .filter(|((m, _), _)| *m == mi)
            .map(|((_, s), r)| (*s, r))
            .collect();
        let mut medians = Vec::new();
        for (pi, params) in spec.methods.iter().enumerate() {
            for (seed, reps) in &cells {
                let r = &reps[pi];
                rows.push(BenchRow {
                    params: *params,
                    shape: *shape,
                    seed: Some(*seed),
                    iters: r.iterations as f64,
                    converged: r.converged,
                    final_rse: r.final_rse,
                    wall_ms: r.wall_time.as_secs_f64() * 1e3,
                    speedup: None,
                });
            }
            let mut its: Vec<f64> = cells.iter().map(|(_, r)| r[pi].iterations as f64).collect();
            let mut rses: Vec<f64> = cells.iter().map(|(_, r)| r[pi].final_rse).collect();
            let mut walls: Vec<f64> = cells.iter().map(|(_, r)| r[pi].wall_time.as_secs_f64() * 1e3).collect();
            medians.push(BenchRow {
                params: *params,
                shape: *shape,
                seed: None,
                iters: median(&mut its),
                converged: cells.iter().all(|(_, r)| r[pi].converged),
                final_rse: median(&mut rses),
                wall_ms: median(&mut walls),
                speedup: None,
            });
        }
        let baseline_iters = |m: SolverMethod| {
            medians
                .iter()
                .find(|r| r.params.method == m.baseline() && r.params.beta == 0.0)
                .map(|r| r.iters)
        };
        let speedups: Vec<Option<f64>> = medians
            .iter()
            .map(|r| baseline_iters(r.params.method).map(|b| b / r.iters))
            .collect();
        for (row, su) in medians.iter_mut().zip(speedups) {
            row.speedup = su;
        }
        rows.extend(medians);
    }
    Ok(rows)
}

/// Median speed-up of `method` in a bench result, if present.
pub fn speedup_of(rows: &[BenchRow], method: SolverMethod, shape: &MatrixShape) -> Option<f64> {
    rows.iter()
        .find(|r| r.seed.is_none() && r.params.method == method && r.shape == *shape)
        .and_then(|r| r.speedup)
}

pub fn bench_csv(rows: &[BenchRow], timing: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "method", "alpha", "beta", "theta", "m", "n", "r", "kappa", "seed", "iters", "converged", "final_rse",
    ];
    if timing {
        header.push("wall_ms");
    }
    header.push("speedup");
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        let mut rec = vec![
            row.params.method.to_string(),
            fmt_f64(row.params.alpha),
            fmt_f64(row.params.beta),
            fmt_f64(row.params.theta),
            row.shape.m.to_string(),
            row.shape.n.to_string(),
            row.shape.r.to_string(),
            fmt_f64(row.shape.kappa),
            row.seed.map_or_else(|| "MEDIAN".to_string(), |s| s.to_string()),
            match row.seed {
                Some(_) => (row.iters as u64).to_string(),
                None => fmt_f64(row.iters),
            },
            row.converged.to_string(),
            fmt_f64(row.final_rse),
        ];
        if timing {
            rec.push(fmt_f64(row.wall_ms));
        }
        rec.push(row.speedup.map(fmt_f64).unwrap_or_default());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub matrix: SyntheticSpec,
    pub method: SolverMethod,
    pub theta: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub rse_tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub converged: bool,
    pub final_rse: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> rowact_core::Result<()> {
        self.matrix.validate()?;
        validate_grid("alpha grid", &self.alphas, |a| a > 0.0 && a < 2.0)?;
        validate_grid("beta grid", &self.betas, |b| b >= 0.0 && b.is_finite())?;
        if !self.method.has_momentum() && self.betas.iter().any(|&b| b != 0.0) {
            return Err(rowact_core::Error::InvalidArgument(format!(
                "{} has no momentum term; sweep mmwrk or mfdbk instead",
                self.method
            )));
        }
        Ok(())
    }
}

/// Evaluates the full `(alpha, beta)` grid, alpha-major.
pub fn cmd_sweep(spec: &SweepSpec) -> rowact_core::Result<Vec<SweepRow>> {
    spec.validate()?;
    let a = spec.matrix.generate()?;
    let (b, xs) = consistent_system(&a)?;
    let grid: Vec<(f64, f64)> = spec
        .alphas
        .iter()
        .flat_map(|&al| spec.betas.iter().map(move |&be| (al, be)))
        .collect();
    grid.par_iter()
        .map(|&(alpha, beta)| {
            let cfg = SolverConfig {
                theta: spec.theta,
                rse_tol: spec.rse_tol,
                max_iters: spec.max_iters,
                seed: spec.matrix.seed,
                ..SolverConfig::new(spec.method).with_alpha_beta(alpha, beta)
            };
            let r = solve(&a, &b, Some(&xs), &cfg)?.report;
            Ok(SweepRow {
                alpha,
                beta,
                iters: r.iterations,
                converged: r.converged,
                final_rse: r.final_rse,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "beta", "iters", "converged", "final_rse"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            fmt_f64(r.alpha),
            fmt_f64(r.beta),
            r.iters.to_string(),
            r.converged.to_string(),
            fmt_f64(r.final_rse),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
