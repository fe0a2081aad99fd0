use gauss_rough::experiments::records::{from_csv_str, to_csv_string};
use gauss_rough::experiments::{
    emit, run, Command, ConvergenceMode, ExperimentConfig, KernelSpec, Output, OutputFormat, ResultRecord,
    CSV_HEADER,
};
use serde_json::Value;

fn records(command: Command, cfg: &ExperimentConfig) -> Vec<ResultRecord> {
    match run(command, cfg).unwrap() {
        Output::Records(r) => r,
        _ => panic!("expected records"),
    }
}

fn fixture() -> Value {
    serde_json::from_str(include_str!("fixtures/convergence_factors.json")).unwrap()
}

fn values(recs: &[ResultRecord], statistic: &str) -> Vec<(usize, f64)> {
    recs.iter()
        .filter(|r| r.statistic == statistic)
        .map(|r| (r.m.unwrap(), r.value))
        .collect()
}

#[test]
fn dyadic_gaps_shrink_within_committed_factor() {
    let fx = fixture();
    let dy = &fx["dyadic"];
    let factor = dy["factors"]["pvar_dyadic_gap"].as_f64().unwrap();
    let mut cfg = ExperimentConfig::new("kl-converge", KernelSpec::brownian(), dy["n"].as_u64().unwrap() as usize);
    cfg.mode = ConvergenceMode::Dyadic;
    cfg.p = dy["p"].as_f64();
    cfg.m = dy["levels"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    cfg.samples = 80;
    cfg.seed = 31;
    let recs = records(Command::KlConverge, &cfg);
    let gaps = values(&recs, "pvar_dyadic_gap");
    assert_eq!(gaps.iter().map(|g| g.0).collect::<Vec<_>>(), cfg.m);
    for w in gaps.windows(2) {
        assert!(w[1].1 < w[0].1, "{gaps:?}");
        assert!(w[1].1 / w[0].1 <= factor, "{gaps:?}");
    }
    assert_eq!(values(&recs, "holder_dyadic_gap").len(), gaps.len());
}

#[test]
fn kl_distances_vanish_at_full_rank() {
    let mut cfg = ExperimentConfig::new("kl-converge", KernelSpec::fbm(0.4), 16);
    cfg.p = Some(2.6);
    cfg.m = vec![2, 4, 8, 16];
    cfg.samples = 6;
    cfg.seed = 5;
    let recs = records(Command::KlConverge, &cfg);
    let dist = values(&recs, "pvar_dist");
    assert_eq!(dist.last().unwrap(), &(16, 0.0));
    assert!(dist.windows(2).all(|w| w[1].1 <= w[0].1), "{dist:?}");
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = ExperimentConfig::new("translate-check", KernelSpec::fbm(0.4), 16);
    cfg.p = Some(2.6);
    cfg.samples = 4;
    cfg.seed = 17;
    let a = records(Command::TranslateCheck, &cfg);
    let b = records(Command::TranslateCheck, &cfg);
    assert_eq!(to_csv_string(&a).unwrap(), to_csv_string(&b).unwrap());
    cfg.seed = 18;
    assert_ne!(a, records(Command::TranslateCheck, &cfg));
}

#[test]
fn csv_round_trip_keeps_every_bit() {
    let mut cfg = ExperimentConfig::new("pvar", KernelSpec::fbm(0.37), 8);
    cfg.p = Some(2.9);
    cfg.samples = 5;
    cfg.seed = 2;
    let recs = records(Command::Pvar, &cfg);
    let text = to_csv_string(&recs).unwrap();
    let back = from_csv_str(&text).unwrap();
    assert_eq!(back.len(), recs.len());
    for (x, y) in recs.iter().zip(&back) {
        assert_eq!(x.value.to_bits(), y.value.to_bits());
        assert_eq!(x.stderr.map(f64::to_bits), y.stderr.map(f64::to_bits));
        assert_eq!(x, y);
    }
}

#[test]
fn emit_writes_csv_and_json() {
    let dir = tempfile::TempDir::new().unwrap();
    let mut cfg = ExperimentConfig::new("twovar-bound", KernelSpec::fbm(0.3), 8);
    cfg.subsets = Some(3);
    let recs = records(Command::TwovarBound, &cfg);
    let csv_path = dir.path().join("nested/out.csv");
    std::fs::create_dir_all(csv_path.parent().unwrap()).unwrap();
    emit(&recs, OutputFormat::Csv, &csv_path).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), recs.len() + 1);

    let json_path = dir.path().join("out.json");
    emit(&recs, OutputFormat::Json, &json_path).unwrap();
    let parsed: Vec<ResultRecord> = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(parsed, recs);
    assert!(recs.iter().all(|r| r.value <= 1e-9), "{recs:?}");
}
