//! CSV outputs of a small scenario covering every experiment.

use std::fs;
use std::path::Path;

use drloop_core::scenario::{run_scenario, Experiment, Scenario, RAW_HEADER};

const SMALL: &str = r#"
experiments = ["HARQ_VS_L1ARQ", "RESIDUAL_SWEEP", "DELAY_SWEEP", "DEGRADATION_GRID", "SINGLE_RUN"]
seeds = 2
sim_seconds = 5.0
warmup_seconds = 1.0

[traffic]
file_bytes = 2000000
lambda_per_s = 2.0

[residual_sweep]
targets = [1e-5, 1e-3]
variants = ["cubic"]

[delay_sweep]
delays_ms = [0.0, 30.0]

[degradation_grid]
lo = 1e-4
hi = 1e-1
n = 2
"#;

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn every_experiment_writes_its_files() {
    let sc = Scenario::from_toml_str(SMALL, &[]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let results = run_scenario(&sc, dir.path(), None).unwrap();
    assert_eq!(results.len(), 5);

    let resolved = read(dir.path(), "resolved_config.txt");
    assert_eq!(Scenario::from_toml_str(&resolved, &[]).unwrap(), sc);

    for res in &results {
        let stem = res.experiment.file_stem();
        let raw = read(dir.path(), &format!("{stem}_raw.csv"));
        assert_eq!(raw.lines().next().unwrap(), RAW_HEADER.join(","));
        let raw_rows = rows(&raw);
        // two seed rows and one aggregate row per point
        assert_eq!(raw_rows.len(), 3 * res.points.len(), "{stem}");
        for chunk in raw_rows.chunks(3) {
            assert_eq!(chunk[0][4], "0");
            assert_eq!(chunk[1][4], "0");
            assert_eq!(chunk[2][4], "1");
            assert_eq!(chunk[0][3], "0");
            assert_eq!(chunk[1][3], "1");
            assert_eq!(chunk[2][3], "");
            // analytic residual error sits next to the measured one
            assert!(chunk[2][13].parse::<f64>().unwrap() >= 0.0);
        }
        let agg_rows = rows(&read(dir.path(), &format!("{stem}_agg.csv")));
        assert_eq!(agg_rows.len(), res.points.len());
        assert!(agg_rows.iter().all(|r| r[4] == "1"));
    }

    let cdf = rows(&read(dir.path(), "harq_vs_l1arq_cdf.csv"));
    assert!(!cdf.is_empty());
    for w in cdf.windows(2) {
        if w[0][..3] == w[1][..3] {
            let (a, b): (f64, f64) = (w[0][4].parse().unwrap(), w[1][4].parse().unwrap());
            assert!(b >= a);
        }
    }

    let matrix = rows(&read(dir.path(), "degradation_grid_matrix.csv"));
    assert_eq!(matrix.len(), 2);
    assert!(matrix.iter().all(|r| r.len() == 3));
    let boundary = rows(&read(dir.path(), "degradation_grid_boundary.csv"));
    assert_eq!(boundary.len(), 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let sc = Scenario::from_toml_str(SMALL, &["experiments=[\"RESIDUAL_SWEEP\"]".into()]).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_scenario(&sc, a.path(), None).unwrap();
    // a different pool size must not change anything
    rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| run_scenario(&sc, b.path(), None).unwrap());
    for name in [
        "residual_sweep_raw.csv",
        "residual_sweep_agg.csv",
        "resolved_config.txt",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn only_flag_runs_one_experiment() {
    let sc = Scenario::from_toml_str(SMALL, &[]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let res = run_scenario(&sc, dir.path(), Some(Experiment::SingleRun)).unwrap();
    assert_eq!(res.len(), 1);
    assert!(!dir.path().join("residual_sweep_raw.csv").exists());
}
