use permimpact::estimation::{fit_two_stage, record_variances};
use permimpact::io::{read_metaorders, write_metaorders};
use permimpact::{
    fit_instantaneous, fit_permanent, generate_dataset, observable_y1, observable_y2, residual_diagnostics,
    DatasetDesign, FitResult, InstantaneousImpact, MetaorderRecord, ModelParams, PermanentImpact,
};

fn truth() -> ModelParams {
    ModelParams::new(
        0.2,
        100.0,
        0.0,
        PermanentImpact::power_law(1.0, 0.5).unwrap(),
        InstantaneousImpact::new(0.1, 0.7).unwrap(),
    )
    .unwrap()
}

fn design(n: usize) -> DatasetDesign {
    DatasetDesign {
        n_orders: n,
        q0_range: (0.5, 8.0),
        horizon_range: (0.5, 2.0),
        delta_range: (0.1, 0.1),
        n_steps: 100,
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

fn same_fit(a: &FitResult, b: &FitResult, scale_factor: f64) {
    assert!(close(a.scale * scale_factor, b.scale, 1e-7), "{a:?} {b:?}");
    assert!(close(a.exponent, b.exponent, 1e-7), "{a:?} {b:?}");
}

#[test]
fn prices_scale_estimates() {
    let recs = generate_dataset(&truth(), &design(500), 8).unwrap();
    let c = 3.5;
    let scaled: Vec<MetaorderRecord> = recs
        .iter()
        .map(|r| MetaorderRecord {
            s0: r.s0 * c,
            s_tprime: r.s_tprime * c,
            cash_change: r.cash_change * c,
            sigma: r.sigma * c,
            ..r.clone()
        })
        .collect();
    let (p, i, _) = fit_two_stage(&recs, None).unwrap();
    let (ps, is, _) = fit_two_stage(&scaled, None).unwrap();
    same_fit(&p, &ps, c);
    same_fit(&i, &is, c);
}

/// Reflects each order through its pre-trade mark so a sell becomes the
/// mirror-image buy.
fn mirror(r: &MetaorderRecord) -> MetaorderRecord {
    MetaorderRecord {
        q0: -r.q0,
        s_tprime: 2.0 * r.s0 - r.s_tprime,
        cash_change: r.cash_change - 2.0 * r.q0 * r.s0,
        ..r.clone()
    }
}

#[test]
fn buy_sell_mirror_leaves_estimates_unchanged() {
    let recs = generate_dataset(&truth(), &design(500), 4).unwrap();
    let mirrored: Vec<_> = recs.iter().map(mirror).collect();
    for (a, b) in recs.iter().zip(&mirrored) {
        assert!(close(observable_y1(b), -observable_y1(a), 1e-9));
        let (ya, yb) = (observable_y2(a, 0.5).unwrap(), observable_y2(b, 0.5).unwrap());
        assert!((ya + yb).abs() < 1e-9, "{ya} {yb}");
    }
    let (p, i, _) = fit_two_stage(&recs, None).unwrap();
    let (pm, im, _) = fit_two_stage(&mirrored, None).unwrap();
    same_fit(&p, &pm, 1.0);
    same_fit(&i, &im, 1.0);
}

#[test]
fn error_shrinks_with_sample_size() {
    let all = generate_dataset(&truth(), &design(10_000), 31).unwrap();
    let errors: Vec<f64> = [100, 1_000, 10_000]
        .iter()
        .map(|&n| {
            let (p, i, _) = fit_two_stage(&all[..n], None).unwrap();
            (p.exponent - 0.5).abs() / 0.05
                + (p.scale - 1.0).abs() / 0.05
                + (i.exponent - 0.7).abs() / 0.1
                + (i.scale / 0.1 - 1.0).abs() / 0.1
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn residuals_are_standardized_under_the_true_model() {
    let recs = generate_dataset(&truth(), &design(10_000), 12).unwrap();
    let (p, i, alpha) = fit_two_stage(&recs, None).unwrap();
    let rep = residual_diagnostics(&recs, &p, &i, alpha).unwrap();
    assert!((0.95..=1.05).contains(&rep.var_z1), "{}", rep.var_z1);
    assert!((0.95..=1.05).contains(&rep.var_z2), "{}", rep.var_z2);
    assert!((rep.empirical_correlation - rep.theoretical_correlation).abs() < rep.band);
    assert!(!rep.misspecified(), "{}", rep.misspecification_correlation);

    let forced = fit_instantaneous(&recs, 1.0).unwrap();
    let bad = residual_diagnostics(&recs, &p, &forced, 1.0).unwrap();
    assert!(
        bad.misspecified(),
        "{} vs {}",
        bad.misspecification_correlation,
        bad.band
    );
}

#[test]
fn forced_linear_permanent_biases_instantaneous_scale() {
    let recs = generate_dataset(&truth(), &design(2_000), 6).unwrap();
    let forced = fit_instantaneous(&recs, 1.0).unwrap();
    assert!((forced.scale - 0.1) / forced.scale_stderr > 3.0, "{forced:?}");
}

#[test]
fn variances_follow_the_record_design() {
    let recs = generate_dataset(&truth(), &design(3), 0).unwrap();
    for (r, c) in recs.iter().zip(record_variances(&recs, 0.5)) {
        assert!(close(c.var1, 0.04 * (r.horizon + 0.1), 1e-12));
    }
}

#[test]
fn dataset_survives_csv_round_trip() {
    let recs = generate_dataset(&truth(), &design(50), 2).unwrap();
    let mut buf = Vec::new();
    write_metaorders(&mut buf, &recs).unwrap();
    assert_eq!(read_metaorders(buf.as_slice()).unwrap(), recs);
    let fit = fit_permanent(&recs).unwrap();
    assert!(fit.converged && fit.n == 50);
}
