use secure_slp::harness::*;
use secure_slp::precoders::PrecoderKind;
use secure_slp::Error;

fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.schemes = vec![PrecoderKind::Zf, PrecoderKind::Icss, PrecoderKind::AnNoCsi];
    c.gamma_e_db = vec![-20.0, 0.0];
    c.p0_db = vec![20.0];
    c.train_trials = 120;
    c.test_trials = 120;
    c.ser_trials = 60;
    c.seed = 21;
    c
}

#[test]
fn csv_round_trip_on_real_records() {
    let records = run_sweep_gamma_e(&small_config()).unwrap();
    assert_eq!(records.len(), 6);
    let parsed = parse_csv(&to_csv(&records)).unwrap();
    assert_eq!(parsed.len(), records.len());
    for (a, b) in records.iter().zip(&parsed) {
        assert_eq!(a.scheme, b.scheme);
        assert_eq!(a.p0_db, b.p0_db);
        assert_eq!((a.trials, a.seed, a.antennas, a.users, a.order), (b.trials, b.seed, b.antennas, b.users, b.order));
        for (x, y) in [
            (a.avg_power_db, b.avg_power_db),
            (a.p_det_eve, b.p_det_eve),
            (a.ser_avg, b.ser_avg),
            (a.gamma_e_db, b.gamma_e_db),
        ] {
            assert!((x - y).abs() <= 5e-6 * x.abs().max(1e-300), "{x} vs {y}");
        }
    }
}

#[test]
fn metrics_are_in_range() {
    for r in run_sweep_gamma_e(&small_config()).unwrap() {
        assert!((0.0..=1.0).contains(&r.p_det_eve));
        assert!((0.0..=1.0).contains(&r.ser_avg) && (0.0..=1.0).contains(&r.ser_user1));
        assert!((0.0..=1.0).contains(&r.infeasible_rate));
        assert!(r.avg_power_db.is_finite());
        assert_eq!(r.trials, 300);
    }
}

#[test]
fn csv_bytes_do_not_depend_on_threads() {
    let mut c = small_config();
    c.threads = Some(1);
    let one = to_csv(&run_sweep_gamma_e(&c).unwrap());
    c.threads = Some(4);
    let four = to_csv(&run_sweep_gamma_e(&c).unwrap());
    assert_eq!(one, four);
}

#[test]
fn files_round_trip_and_errors_name_the_path() {
    let dir = std::env::temp_dir().join(format!("secure-slp-harness-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("exp.cfg");
    std::fs::write(&cfg_path, "schemes = zf\ntrials = 50\ngamma_e_db = -30\nseed = 4\n").unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.ser_trials, 50);
    let records = run_all(&cfg).unwrap();
    let out = dir.join("m.csv");
    emit_csv(&records, &out).unwrap();
    assert_eq!(parse_csv(&std::fs::read_to_string(&out).unwrap()).unwrap().len(), 1);

    let missing = dir.join("no/such/dir/m.csv");
    match emit_csv(&records, &missing) {
        Err(Error::Io { path, .. }) => assert_eq!(path, missing),
        other => panic!("expected I/O error, got {other:?}"),
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn table_runs_both_columns() {
    let mut c = ExperimentConfig::default();
    c.train_trials = 40;
    c.test_trials = 40;
    c.ser_trials = 40;
    let t = table1(&c).unwrap();
    let keys: Vec<_> = t.iter().map(|r| (r.scheme, r.antennas)).collect();
    assert_eq!(
        keys,
        vec![(PrecoderKind::Icss, 6), (PrecoderKind::Zf, 6), (PrecoderKind::Icss, 4), (PrecoderKind::Zf, 4)]
    );
}

#[test]
fn point_exposes_the_trained_pdf() {
    let c = small_config();
    let p = Point { scheme: PrecoderKind::Icss, rho: 0.3, gamma_e_db: -20.0, p0_db: None };
    let r = run_point(&c, &p).unwrap();
    let pdf = r.pdf.unwrap();
    assert_eq!((pdf.order(), pdf.bins()), (4, 360));
    for m in 0..4 {
        let mass: f64 = (0..360).map(|b| pdf.density(m, b) * pdf.bin_width()).sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }
    assert_eq!(r.trials.len(), 300);
}
