use proptest::prelude::*;
use rowact_core::datagen::{consistent_system, SyntheticSpec};
use rowact_core::linalg::min_norm_solution;
use rowact_core::scalar::{dist_sq, norm_sq};
use rowact_core::{
    residual, solve, solve_observed, IterateState, RowActionSolver, RowMatrix, SolverConfig,
    SolverMethod, StepOutcome,
};

fn system(kind: u8, m: usize, n: usize, seed: u64) -> (RowMatrix<f64>, Vec<f64>, Vec<f64>) {
    let spec = if kind == 0 {
        SyntheticSpec::gaussian(m, n, seed)
    } else {
        SyntheticSpec::udv(m, n, (m.min(n) / 2).max(1), 4.0, seed)
    };
    let a = spec.generate().unwrap();
    let (b, x) = consistent_system(&a).unwrap();
    (a, b, x)
}

fn fidelity_bound(a: &RowMatrix<f64>, b: &[f64], s: &IterateState<f64>) -> f64 {
    let fresh = residual(a, b, &s.x).unwrap();
    let drift = dist_sq(&fresh, &s.r).sqrt();
    drift / (norm_sq(b).sqrt() + a.frob_sq().sqrt() * norm_sq(&s.x).sqrt())
}

#[test]
fn pythagorean_identity_for_exact_projections() {
    let (a, b, xs) = system(0, 60, 15, 21);
    for method in [SolverMethod::Kaczmarz, SolverMethod::Mwrk] {
        let mut solver = RowActionSolver::new(&a, &b, SolverConfig::new(method)).unwrap();
        let mut e = dist_sq(solver.x(), &xs);
        let floor = 1e-8 * e;
        // Below the floor the rounding of x itself (about eps * ||x||) is no
        // longer small against ||x - x*||.
        while e > floor {
            let StepOutcome::Stepped(rec) = solver.step().unwrap() else {
                break;
            };
            let i = rec.selected.as_slice()[0];
            let after = dist_sq(solver.x(), &xs);
            let predicted = e - rec.loss.psi[i];
            assert!(
                (after - predicted).abs() <= 1e-10 * e.max(f64::MIN_POSITIVE) + 1e-28,
                "{method} step {}: {after} vs {predicted}",
                rec.k
            );
            e = after;
        }
    }
}

#[test]
fn refresh_matches_never_drifting_oracle() {
    let (a, b, xs) = system(1, 120, 30, 5);
    let short = SolverConfig {
        refresh_period: 25,
        record_history: true,
        ..SolverConfig::new(SolverMethod::Mmwrk)
    };
    let oracle = SolverConfig {
        refresh_period: 1,
        ..short.clone()
    };
    let h1 = solve(&a, &b, Some(&xs), &short).unwrap().report.history.unwrap();
    let h2 = solve(&a, &b, Some(&xs), &oracle).unwrap().report.history.unwrap();
    assert!(h1.len() > 75);
    // Both stop at the tolerance; the last step may differ by one.
    assert!(h1.len().abs_diff(h2.len()) <= 1);
    for (u, v) in h1.iter().zip(&h2) {
        assert!((u.rse - v.rse).abs() <= 1e-8 * v.rse.max(1e-300), "k = {}: {} vs {}", u.k, u.rse, v.rse);
    }
}

#[test]
fn rank_deficient_runs_reach_min_norm() {
    let a = SyntheticSpec::udv(80, 40, 8, 3.0, 13).generate().unwrap();
    let (b, _) = consistent_system(&a).unwrap();
    let x_mn = min_norm_solution(&a, &b).unwrap();
    for method in [SolverMethod::Mwrk, SolverMethod::Mmwrk, SolverMethod::Fdbk, SolverMethod::Mfdbk] {
        let out = solve(&a, &b, Some(&x_mn), &SolverConfig::new(method)).unwrap();
        assert!(out.report.converged, "{method}");
        assert!(dist_sq(&out.x, &x_mn).sqrt() <= 1e-5 * norm_sq(&x_mn).sqrt());
    }
}

#[test]
fn concurrent_solves_share_a_matrix() {
    let (a, b, xs) = system(0, 100, 20, 8);
    let serial: Vec<usize> = SolverMethod::ALL
        .iter()
        .map(|&m| solve(&a, &b, Some(&xs), &SolverConfig::new(m)).unwrap().report.iterations)
        .collect();
    let parallel: Vec<usize> = std::thread::scope(|scope| {
        let handles: Vec<_> = SolverMethod::ALL
            .iter()
            .map(|&m| {
                let (a, b, xs) = (&a, &b, &xs);
                scope.spawn(move || solve(a, b, Some(xs), &SolverConfig::new(m)).unwrap().report.iterations)
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(serial, parallel);
}

fn small_case() -> impl Strategy<Value = (u8, usize, usize, u64, usize)> {
    (0u8..2, 4usize..24, 2usize..10, any::<u64>(), 0usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn error_never_increases_without_momentum(
        (kind, m, n, seed, pick) in small_case(),
        alpha in 0.2f64..1.8,
    ) {
        let (a, b, xs) = system(kind, m, n, seed);
        let method = [SolverMethod::Kaczmarz, SolverMethod::Mwrk, SolverMethod::Fdbk, SolverMethod::Eta][pick];
        let cfg = SolverConfig { max_iters: 300, ..SolverConfig::new(method).with_alpha_beta(alpha, 0.0) };
        let mut prev = norm_sq(&xs);
        let mut worst = 0.0f64;
        solve_observed(&a, &b, Some(&xs), &cfg, |s, _| {
            let e = dist_sq(&s.x, &xs);
            worst = worst.max(e - prev * (1.0 + 1e-10) - 1e-26);
            prev = e;
        }).unwrap();
        prop_assert!(worst <= 0.0, "error grew by {}", worst);
    }

    #[test]
    fn maintained_residual_tracks_fresh_residual(
        (kind, m, n, seed, pick) in small_case(),
    ) {
        let (a, b, xs) = system(kind, m, n, seed);
        let method = [SolverMethod::Mwrk, SolverMethod::Mmwrk, SolverMethod::Fdbk, SolverMethod::Mfdbk][pick];
        let cfg = SolverConfig { max_iters: 500, refresh_period: 1_000_000, ..SolverConfig::new(method) };
        let mut worst = 0.0f64;
        solve_observed(&a, &b, Some(&xs), &cfg, |s, _| {
            worst = worst.max(fidelity_bound(&a, &b, s));
        }).unwrap();
        prop_assert!(worst <= 1e-8, "drift ratio {}", worst);
    }

    #[test]
    fn lag_invariant_holds(
        (kind, m, n, seed, pick) in small_case(),
    ) {
        let (a, b, _) = system(kind, m, n, seed);
        let method = [SolverMethod::Mmwrk, SolverMethod::Mfdbk, SolverMethod::Mwrk, SolverMethod::Fdbk][pick];
        let mut solver = RowActionSolver::new(&a, &b, SolverConfig::new(method)).unwrap();
        for _ in 0..20 {
            let before = solver.state().clone();
            if !matches!(solver.step().unwrap(), StepOutcome::Stepped(_)) {
                break;
            }
            prop_assert_eq!(&solver.state().x_prev, &before.x);
            prop_assert_eq!(&solver.state().r_prev, &before.r);
            prop_assert_eq!(solver.state().k, before.k + 1);
        }
    }

    #[test]
    fn unit_momentum_reduces_bitwise(
        (kind, m, n, seed, _) in small_case(),
        theta in 0.0f64..=1.0,
    ) {
        let (a, b, _) = system(kind, m, n, seed);
        for (plain, heavy) in [(SolverMethod::Mwrk, SolverMethod::Mmwrk), (SolverMethod::Fdbk, SolverMethod::Mfdbk)] {
            let p = SolverConfig { theta, ..SolverConfig::new(plain) };
            let h = SolverConfig { theta, ..SolverConfig::new(heavy).with_alpha_beta(1.0, 0.0) };
            let mut s1 = RowActionSolver::new(&a, &b, p).unwrap();
            let mut s2 = RowActionSolver::new(&a, &b, h).unwrap();
            for _ in 0..30 {
                let o1 = s1.step().unwrap();
                let o2 = s2.step().unwrap();
                prop_assert_eq!(&o1, &o2);
                prop_assert_eq!(s1.state(), s2.state());
            }
        }
    }

    #[test]
    fn solve_is_deterministic((kind, m, n, seed, pick) in small_case()) {
        let (a, b, xs) = system(kind, m, n, seed);
        let method = SolverMethod::ALL[pick + 2];
        let cfg = SolverConfig { max_iters: 200, ..SolverConfig::new(method) };
        let o1 = solve(&a, &b, Some(&xs), &cfg).unwrap();
        let o2 = solve(&a, &b, Some(&xs), &cfg).unwrap();
        prop_assert_eq!(o1.x, o2.x);
        prop_assert_eq!(o1.report.iterations, o2.report.iterations);
        prop_assert_eq!(o1.report.converged, o1.report.final_rse <= cfg.rse_tol);
    }
}
