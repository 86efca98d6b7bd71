//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use permimpact::estimation::{self, fit_instantaneous, fit_permanent, generate_dataset, DatasetDesign};
use permimpact::model::{self, linear_schedule_covariance};
use permimpact::{
    expected_round_trip_pnl, rng, run_ensemble, search_arbitrage, verify_covariance, Block, GridConfig, ImpactRegime,
    InstantaneousImpact, ModelParams, Observable, PermanentImpact, PermanentRegime, RoundTripStrategy, Schedule,
    SearchBounds, SearchConfig, Trajectory, VelocityImpact,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome { pass: ok, detail }
}

fn run(id: usize, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "{} criterion {id}: {title}: {} [{:.1}s of {}s]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

/// `int h v dt` for piecewise-constant rates, written out directly.
fn block_cost(blocks: &[Block], eta: f64, beta: f64) -> f64 {
    blocks
        .iter()
        .map(|b| eta * b.rate.abs().powf(1.0 + beta) * b.duration)
        .sum()
}

fn random_round_trip<R: Rng>(r: &mut R) -> RoundTripStrategy {
    let n = r.random_range(2..=6);
    let durations: Vec<f64> = (0..n).map(|_| r.random_range(0.05..2.0)).collect();
    let rates: Vec<f64> = (0..n - 1).map(|_| r.random_range(-5.0..5.0)).collect();
    RoundTripStrategy::closing_last(&rates, &durations).unwrap()
}

fn no_dynamic_arbitrage() -> Outcome {
    let mut r = rng::stream(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = PermanentImpact::new(
            r.random_range(0.1..3.0),
            r.random_range(0.05..1.0),
            r.random_range(0.0..2.0),
        )
        .unwrap();
        let (eta, beta) = (r.random_range(0.01..1.0), r.random_range(0.1..1.0));
        let s = random_round_trip(&mut r);
        let regime = ImpactRegime {
            permanent: PermanentRegime::CumulativeVolume(p),
            instantaneous: InstantaneousImpact::new(eta, beta).unwrap(),
        };
        let pnl = expected_round_trip_pnl(&regime, &s).unwrap();
        let expected = -block_cost(s.blocks(), eta, beta);
        worst = worst.max((pnl - expected).abs() / expected.abs().max(1.0));
    }
    let closed_ok = worst <= 1e-10;

    // Monte Carlo of one asymmetric round trip
    let s = RoundTripStrategy::new(vec![
        Block {
            duration: 0.4,
            rate: 2.0,
        },
        Block {
            duration: 0.3,
            rate: -1.0,
        },
        Block {
            duration: 0.5,
            rate: -1.0,
        },
    ])
    .unwrap();
    let (eta, beta) = (0.1, 0.7);
    let m = ModelParams::new(
        1.0,
        100.0,
        0.0,
        PermanentImpact::power_law(1.0, 0.5).unwrap(),
        InstantaneousImpact::new(eta, beta).unwrap(),
    )
    .unwrap();
    let traj = s.to_trajectory(0.0).unwrap();
    let grid = GridConfig::new(1200, 0.0).unwrap();
    let ens = run_ensemble(&m, &traj, &grid, 100_000, 2024, &[Observable::CashChange]).unwrap();
    let cash = ens.get(Observable::CashChange).unwrap();
    let target = -block_cost(s.blocks(), eta, beta);
    let z = (cash.mean - target) / cash.stderr;
    check(
        closed_ok && z.abs() <= 3.0,
        format!(
            "max |PnL + int hv| = {worst:.2e} (tol 1e-10); MC mean {:.5} vs {target:.5}, {z:+.2} stderr",
            cash.mean
        ),
    )
}

fn nonlinear_permanent() -> Outcome {
    let m = ModelParams::new(
        1.0,
        100.0,
        0.0,
        PermanentImpact::power_law(1.0, 0.5).unwrap(),
        InstantaneousImpact::zero(),
    )
    .unwrap();
    let grid = GridConfig::new(50, 0.0).unwrap();
    let sizes = [1.0f64, 2.0, 4.0, 8.0];
    let mut worst_z = 0.0f64;
    let mut logs = Vec::new();
    for (i, &q0) in sizes.iter().enumerate() {
        let traj = Trajectory::linear(q0, 1.0).unwrap();
        let ens = run_ensemble(
            &m,
            &traj,
            &grid,
            100_000,
            rng::split(77, i as u64),
            &[Observable::PriceShift],
        )
        .unwrap();
        let s = ens.get(Observable::PriceShift).unwrap();
        worst_z = worst_z.max(((s.mean + q0.sqrt()) / s.stderr).abs());
        logs.push((q0.ln(), s.mean.abs().ln()));
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / 4.0;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    check(
        worst_z <= 3.0 && (slope - 0.5).abs() <= 0.02,
        format!("max |z| = {worst_z:.2} (tol 3); log-log slope {slope:.4} (0.5 +- 0.02)"),
    )
}

fn concave_impact_arbitrage() -> Outcome {
    let bounds = SearchBounds {
        rate: (0.1, 10.0),
        duration: (0.05, 2.0),
    };
    let concave = ImpactRegime {
        permanent: PermanentRegime::AlmgrenChriss(VelocityImpact::new(1.0, 0.5).unwrap()),
        instantaneous: InstantaneousImpact::zero(),
    };
    let found = search_arbitrage(
        &concave,
        &SearchConfig {
            n_blocks: 2,
            bounds,
            max_evals: 500,
            n_starts: 5,
            seed: 1,
        },
    )
    .unwrap();
    let linear = ImpactRegime {
        permanent: PermanentRegime::AlmgrenChriss(VelocityImpact::linear(1.0).unwrap()),
        instantaneous: InstantaneousImpact::zero(),
    };
    let flat = search_arbitrage(
        &linear,
        &SearchConfig {
            n_blocks: 2,
            bounds,
            max_evals: 50 * 400,
            n_starts: 50,
            seed: 2,
        },
    )
    .unwrap();
    check(
        found.best_pnl >= 0.2 && found.evals <= 500 && flat.best_pnl <= 1e-9,
        format!(
            "concave best {:.4} in {} evals (>= 0.2 within 500); linear best {:.2e} over {} starts (<= 1e-9)",
            found.best_pnl,
            found.evals,
            flat.best_pnl,
            flat.starts.len()
        ),
    )
}

fn covariance_check() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (case, (alpha, delta)) in [(1.0, 0.0), (0.5, 0.5)].into_iter().enumerate() {
        let m = ModelParams::new(
            1.0,
            100.0,
            0.0,
            PermanentImpact::power_law(1.0, alpha).unwrap(),
            InstantaneousImpact::new(0.1, 0.7).unwrap(),
        )
        .unwrap();
        let traj = Trajectory::linear(1.0, 1.0).unwrap();
        let grid = GridConfig::new(200, delta).unwrap();
        let rep = verify_covariance(&m, &traj, &grid, 100_000, rng::split(99, case as u64)).unwrap();
        let (e, t) = (rep.empirical, rep.theoretical);
        if case == 0 {
            let exact = [[1.0, 0.0], [0.0, 1.0 / 12.0]];
            ok &= (t.var1 - exact[0][0]).abs() < 1e-12 && t.cov.abs() < 1e-12 && (t.var2 - exact[1][1]).abs() < 1e-12;
        }
        let r1 = (e.var1 / t.var1 - 1.0).abs();
        let r2 = (e.var2 / t.var2 - 1.0).abs();
        let dc = (e.cov - t.cov).abs();
        ok &= r1 <= 0.05 && r2 <= 0.05 && dc <= 0.01;
        parts.push(format!(
            "alpha={alpha} delta={delta}: var1 {:.4}/{:.4}, cov {:+.4}/{:+.4}, var2 {:.4}/{:.4}",
            e.var1, t.var1, e.cov, t.cov, e.var2, t.var2
        ));
    }
    check(ok, parts.join("; "))
}

fn estimator_recovery() -> Outcome {
    let truth = ModelParams::new(
        0.2,
        100.0,
        0.0,
        PermanentImpact::power_law(1.0, 0.5).unwrap(),
        InstantaneousImpact::new(0.1, 0.7).unwrap(),
    )
    .unwrap();
    let design = DatasetDesign {
        n_orders: 10_000,
        q0_range: (0.5, 8.0),
        horizon_range: (0.5, 2.0),
        delta_range: (0.1, 0.1),
        n_steps: 200,
    };
    let recs = generate_dataset(&truth, &design, 20_240).unwrap();
    let perm = fit_permanent(&recs).unwrap();
    let inst = fit_instantaneous(&recs, perm.exponent).unwrap();
    let forced = fit_instantaneous(&recs, 1.0).unwrap();
    let bias_z = (forced.scale - 0.1) / forced.scale_stderr;
    let ok = (perm.exponent - 0.5).abs() <= 0.05
        && (perm.scale - 1.0).abs() <= 0.05
        && (inst.exponent - 0.7).abs() <= 0.1
        && (inst.scale / 0.1 - 1.0).abs() <= 0.1
        && bias_z.abs() > 3.0;
    check(
        ok,
        format!(
            "alpha {:.4}, k {:.4}, beta {:.4}, eta {:.5}; alpha=1 pipeline eta {:.5} ({bias_z:+.1} stderr)",
            perm.exponent, perm.scale, inst.exponent, inst.scale, forced.scale
        ),
    )
}

/// Linear-permanent-impact forms, written independently of the library.
fn reduction_regression() -> Outcome {
    let mut worst = 0.0f64;
    let mut note = |a: f64, b: f64| worst = worst.max((a - b).abs() / b.abs().max(1.0));
    for &k in &[0.1, 1.0, 3.0] {
        for &q0 in &[-5.0, -0.3, 0.7, 4.0] {
            for &horizon in &[0.25, 1.0, 3.0] {
                for &(eta, beta) in &[(0.0, 1.0), (0.2, 0.6), (1.5, 1.0)] {
                    let h = InstantaneousImpact::new(eta, beta).unwrap();
                    let m = ModelParams::new(0.3, 50.0, 10.0, PermanentImpact::power_law(k, 1.0).unwrap(), h).unwrap();
                    let traj = Trajectory::linear(q0, horizon).unwrap();
                    let cost = eta * (q0 / horizon).abs().powf(1.0 + beta) * horizon;
                    let linear_cash = m.x0 + q0 * m.s0 - 0.5 * k * q0 * q0 - cost;
                    note(
                        model::expected_liquidation_cash_powerlaw(&m, q0, &traj).unwrap(),
                        linear_cash,
                    );
                    note(model::expected_terminal_cash(&m, &traj).unwrap(), linear_cash);
                    let knots =
                        Trajectory::from_knots(vec![(0.0, q0), (0.3 * horizon, 0.9 * q0), (horizon, 0.0)]).unwrap();
                    let knot_cost = model::cumulative_cost(&h, &knots);
                    note(
                        model::expected_liquidation_cash_powerlaw(&m, q0, &knots).unwrap(),
                        m.x0 + q0 * m.s0 - 0.5 * k * q0 * q0 - knot_cost,
                    );

                    for &s_tprime in &[48.0, 50.0, 53.5] {
                        let cash = 0.9 * q0 * m.s0;
                        let r = estimation::MetaorderRecord {
                            id: 0,
                            q0,
                            horizon,
                            delta: 0.1,
                            s0: m.s0,
                            s_tprime,
                            cash_change: cash,
                            sigma: 0.3,
                            schedule: Schedule::Linear,
                        };
                        note(
                            estimation::observable_y2(&r, 1.0).unwrap(),
                            (s_tprime + m.s0) / 2.0 - cash / q0,
                        );
                    }
                }
                for &sigma in &[0.2, 1.0] {
                    for &delta in &[0.0, 0.5, 2.0] {
                        let s2 = sigma * sigma;
                        let c = linear_schedule_covariance(1.0, sigma, horizon, delta);
                        note(c.var1, s2 * (horizon + delta));
                        note(c.cov, s2 * delta / 2.0);
                        note(c.var2, s2 * (delta / 4.0 + horizon / 12.0));
                        let traj = Trajectory::linear(q0, horizon).unwrap();
                        let integral = model::error_covariance_by_integral(&traj, 1.0, sigma, delta).unwrap();
                        note(integral.cov, s2 * delta / 2.0);
                        note(integral.var2, s2 * (delta / 4.0 + horizon / 12.0));
                    }
                }
            }
        }
    }
    check(
        worst <= 1e-12,
        format!("max relative deviation {worst:.2e} (tol 1e-12)"),
    )
}

fn main() {
    let results = [
        run(
            1,
            "no dynamic arbitrage",
            Duration::from_secs(120),
            no_dynamic_arbitrage,
        ),
        run(
            2,
            "nonlinear permanent impact",
            Duration::from_secs(60),
            nonlinear_permanent,
        ),
        run(
            3,
            "concave-impact arbitrage exhibit",
            Duration::from_secs(30),
            concave_impact_arbitrage,
        ),
        run(4, "residual covariance", Duration::from_secs(120), covariance_check),
        run(
            5,
            "estimator recovery and bias",
            Duration::from_secs(300),
            estimator_recovery,
        ),
        run(
            6,
            "linear-impact reduction",
            Duration::from_secs(60),
            reduction_regression,
        ),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
