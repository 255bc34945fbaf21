//! Every experiment written to disk: the CSV header matches the declared
//! columns, the JSON document has the documented shape, and reruns agree.

use std::path::Path;

use boundary_lab::config::RunConfig;
use boundary_lab::experiments::{run_and_write, Experiment};
use boundary_lab::Exec;
use serde_json::Value;

fn small() -> RunConfig {
    RunConfig {
        conformal_trials: 200,
        density_nodes: 100,
        poincare_levels: 6.0,
        shadow_r_max: 5.0,
        generalized_r_max: 4.0,
        ahlfors_samples: 50,
        growth_radii: vec![2.0, 3.0, 4.0, 5.0],
        cone_radius: 4.0,
        cone_s: vec![1.0, 2.0],
        cone_samples: 5,
        cover_radius: 4.0,
        cover_samples: 20,
        decay_annuli: vec![2.0, 3.0, 4.0],
        decay_depth: 6,
        p1_r_max: 4.0,
        sr_radii: vec![3.0, 4.0],
        mc_samples: 1,
        mc_depth: 3,
        projection_k_max: 4,
        projection_tests: 2,
        cocycle_trials: 200,
        bms_trials: 100,
        gap_samples: 100,
        tube_lengths: vec![10.0, 20.0],
        tube_pairs: 2,
        properness_r_max: 5.0,
        ergodic_pairs: 4,
        t_grid: vec![10.0, 20.0],
        classify_r_max: 6,
        classify_depth: 5,
        holder_samples: 30,
        ..RunConfig::default()
    }
}

fn read_json(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap())
        .unwrap()
}

#[test]
fn every_experiment_writes_schema_conformant_files() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    for e in Experiment::ALL {
        let outputs = run_and_write(e, &cfg, dir.path(), Exec::Parallel)
            .unwrap_or_else(|err| panic!("{e}: {err}"));
        assert_eq!(outputs[0].stem, e.name());
        for o in &outputs {
            let j = read_json(dir.path(), &o.stem);
            for key in ["header", "columns", "row_count", "summary", "checks", "passed"] {
                assert!(j.get(key).is_some(), "{}: missing {key}", o.stem);
            }
            let h = &j["header"];
            assert_eq!(h["subcommand"], e.name());
            assert_eq!(h["experiment"], o.report.name.as_str());
            assert!(h["version"].is_string());
            assert!(h["wall_time_s"].is_number());
            assert_eq!(h["config"]["seed"], cfg.seed);
            assert!(h["params"].is_object());

            let mut rd = csv::Reader::from_path(dir.path().join(format!("{}.csv", o.stem))).unwrap();
            let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
            let declared: Vec<String> = j["columns"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| c.as_str().unwrap().to_string())
                .collect();
            assert_eq!(header, declared, "{}", o.stem);
            let rows = rd.records().collect::<Result<Vec<_>, _>>().unwrap().len();
            assert_eq!(rows as u64, j["row_count"].as_u64().unwrap(), "{}", o.stem);
            assert_eq!(j["passed"], o.report.passed());
        }
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let cfg = small();
    for e in [Experiment::Shadow, Experiment::Bms, Experiment::SrNorm, Experiment::Ergodic] {
        let a = boundary_lab::experiments::run(e, &cfg, Exec::Sequential).unwrap();
        let b = boundary_lab::experiments::run(e, &cfg, Exec::Parallel).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.report.csv_string().unwrap(), y.report.csv_string().unwrap(), "{e}");
            assert_eq!(x.report.summary, y.report.summary, "{e}");
        }
    }
}

#[test]
fn seed_changes_sampled_rows() {
    let cfg = small();
    let other = RunConfig { seed: cfg.seed + 1, ..small() };
    let a = boundary_lab::experiments::run(Experiment::Ahlfors, &cfg, Exec::Sequential).unwrap();
    let b = boundary_lab::experiments::run(Experiment::Ahlfors, &other, Exec::Sequential).unwrap();
    assert_ne!(a[0].report.csv_string().unwrap(), b[0].report.csv_string().unwrap());
}
