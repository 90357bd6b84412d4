use modsel::harness::config::{
    AkaikeParams, AkaikeSetting, CalibrateParams, HoldoutAdaptParams, SegmentParams,
};
use modsel::harness::{
    self, Experiment, ExperimentConfig, ExperimentKind, HarnessError, RunRecord,
};
use modsel::holdout::SplitPolicy;

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn csv(r: &RunRecord) -> Vec<u8> {
    r.replicates.to_csv_bytes().unwrap()
}

#[test]
fn verify_tail_smoke() {
    let c = ExperimentConfig::new(ExperimentKind::VerifyTail, 5, 10);
    let r = harness::run(&c).unwrap();
    assert_eq!(r.replicates.len(), 10);
    let f = r.aggregate("violation_frequency").unwrap();
    assert!((0.0..=1.0).contains(&f));
    assert_eq!(r.config, c);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    for kind in [
        ExperimentKind::VerifyTail,
        ExperimentKind::HoldoutAdapt,
        ExperimentKind::Calibrate,
        ExperimentKind::AkaikeCheck,
        ExperimentKind::Segment,
    ] {
        let c = ExperimentConfig::new(kind, 11, 24);
        let one = with_pool(1, || harness::run(&c).unwrap());
        let four = with_pool(4, || harness::run(&c).unwrap());
        assert_eq!(csv(&one), csv(&four), "{kind}");
        assert_eq!(one.curves, four.curves, "{kind}");
        assert_eq!(one.aggregates, four.aggregates, "{kind}");
    }
}

#[test]
fn seeds_change_results() {
    let a = harness::run(&ExperimentConfig::new(ExperimentKind::Segment, 1, 8)).unwrap();
    let b = harness::run(&ExperimentConfig::new(ExperimentKind::Segment, 2, 8)).unwrap();
    assert_ne!(a.curves["segmentation"], b.curves["segmentation"]);
}

#[test]
fn holdout_sweep_emits_aggregates_and_slope() {
    let mut c = ExperimentConfig::new(ExperimentKind::HoldoutAdapt, 3, 40);
    if let Experiment::HoldoutAdapt(p) = &mut c.experiment {
        p.split_policy = SplitPolicy::SeededShuffle;
        p.expected_slope.max = Some(0.0);
    }
    let r = harness::run(&c).unwrap();
    assert_eq!(r.replicates.len(), 5 * 40);
    let curve = &r.curves["excess_vs_n"];
    assert_eq!(curve.len(), 5);

    // slope recomputed from the emitted aggregate rows
    let n = curve.column("n").unwrap();
    let y = curve.column("mean_selected_excess").unwrap();
    let (lx, ly): (Vec<f64>, Vec<f64>) = n.iter().zip(&y).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / 5.0;
    let my = ly.iter().sum::<f64>() / 5.0;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = r.aggregate("slope").unwrap();
    assert!((slope - sxy / sxx).abs() < 1e-12);
    assert!(curve.column("slope").unwrap().iter().all(|s| *s == slope));
    assert!(r.check("slope-max").unwrap().passed);
    assert!(r.check("oracle-inequality").unwrap().passed);
}

#[test]
fn unequal_split_sizes() {
    let c = ExperimentConfig {
        seed: 9,
        replicates: 5,
        out_dir: None,
        experiment: Experiment::HoldoutAdapt(HoldoutAdaptParams {
            sizes: vec![100, 200],
            train_ratio: 2.0,
            ..Default::default()
        }),
    };
    let r = harness::run(&c).unwrap();
    let train = r.replicates.column("train_size").unwrap();
    assert_eq!(train[0], 200.0);
    assert_eq!(train[5], 400.0);
}

#[test]
fn calibrate_curves() {
    let c = ExperimentConfig {
        seed: 4,
        replicates: 50,
        out_dir: None,
        experiment: Experiment::Calibrate(CalibrateParams::default()),
    };
    let r = harness::run(&c).unwrap();
    let path = &r.curves["path"];
    assert_eq!(path.len(), 60);
    let dims = path.column("selected_dim").unwrap();
    assert!(dims.windows(2).all(|w| w[1] <= w[0]));
    let risk = &r.curves["risk_vs_alpha"];
    let ex = risk.column("mean_excess").unwrap();
    let best = ex.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(r.aggregate("min_mean_excess").unwrap(), best);
    assert!(
        r.aggregate("mean_calibrated_excess").unwrap()
            >= r.aggregate("mean_oracle_excess").unwrap()
    );
}

#[test]
fn akaike_on_classification_reports_ratio_only() {
    let c = ExperimentConfig {
        seed: 2,
        replicates: 200,
        out_dir: None,
        experiment: Experiment::AkaikeCheck(AkaikeParams {
            setting: AkaikeSetting::Histogram {
                n: 300,
                margin_h: 0.4,
                design_size: 32,
                mass_decay: 0.8,
                block: 4,
            },
            dims: vec![2, 4, 8, 16],
            ..Default::default()
        }),
    };
    let r = harness::run(&c).unwrap();
    assert!(r
        .checks
        .iter()
        .all(|c| !c.name.contains("theory") && !c.name.contains("agreement")));
    assert!(r.check("v-hat-nonnegative-d16").unwrap().passed);
    let ratio = r.aggregate("ratio_d16").unwrap();
    assert!(ratio.is_finite() && ratio > 0.0);
}

#[test]
fn noiseless_segmentation_is_exact() {
    let c = ExperimentConfig {
        seed: 1,
        replicates: 4,
        out_dir: None,
        experiment: Experiment::Segment(SegmentParams {
            n: 60,
            levels: vec![1.0, -2.0, 4.0],
            sigma: 0.0,
            d_max: 6,
            ..Default::default()
        }),
    };
    let r = harness::run(&c).unwrap();
    let seg = &r.curves["segmentation"];
    assert_eq!(seg.column("fitted"), seg.column("truth"));
}

#[test]
fn invalid_config_lists_all_fields() {
    let mut c = ExperimentConfig::new(ExperimentKind::Segment, 1, 0);
    if let Experiment::Segment(p) = &mut c.experiment {
        p.d_max = 1;
        p.min_recovery = 2.0;
    }
    match harness::run(&c) {
        Err(HarnessError::Validation(v)) => assert_eq!(v.len(), 3, "{v:?}"),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn modulus_hypothesis_is_enforced() {
    let text = r#"{"seed": 1, "replicates": 10, "experiment":
        {"kind": "verify-tail", "modulus": {"c": 5.0, "p": 2.0}}}"#;
    let c = ExperimentConfig::from_json(text).unwrap();
    assert!(matches!(harness::run(&c), Err(HarnessError::Model(_))));
}
