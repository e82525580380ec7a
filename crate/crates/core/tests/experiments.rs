use std::fs;
use std::path::Path;
use std::process::Command;

use gia_core::experiments::{run, DensityCase, ExperimentConfig, ExperimentKind, Manifest, Strategy, SCHEMA_VERSION};
use gia_core::GiaError;

fn tiny(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { kind, seeds: vec![3, 4], topologies: 2, channel_draws: 2, ..ExperimentConfig::default() };
    match kind {
        ExperimentKind::SecrecySweep => {
            cfg.observation_radius = 4.0;
            cfg.snr_db = vec![20.0, 40.0];
            cfg.compare_cutoff = true;
        }
        ExperimentKind::TransitorySweep => {
            cfg.density_cases = vec![DensityCase { lambda: 0.04, m: 4, n_e: 6, n_l: vec![1, 4, 8] }];
        }
        ExperimentKind::TradeoffSweep => {
            cfg.lambda_grid = vec![0.03, 0.06];
            cfg.tradeoff_candidates = 2;
            cfg.params.m_l = 6;
            cfg.params.n_l = 4;
            cfg.params.m_j = 6;
            cfg.params.n_e = 8;
        }
        ExperimentKind::RegionMap => {
            cfg.region_d_j_max = Some(4);
            cfg.region_d_l_max = Some(3);
        }
        ExperimentKind::CaseStudy => {}
    }
    cfg
}

const KINDS: [ExperimentKind; 5] = [
    ExperimentKind::CaseStudy,
    ExperimentKind::SecrecySweep,
    ExperimentKind::TransitorySweep,
    ExperimentKind::TradeoffSweep,
    ExperimentKind::RegionMap,
];

fn read_manifest(dir: &Path) -> Manifest {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    for kind in KINDS {
        let cfg = tiny(kind);
        let one = tempfile::tempdir().unwrap();
        let two = tempfile::tempdir().unwrap();
        let a = run(&cfg, one.path(), 1).unwrap();
        let b = run(&cfg, two.path(), 3).unwrap();
        assert_eq!(a, b);
        for name in a.outputs.iter().chain(std::iter::once(&"manifest.json".to_string())) {
            assert_eq!(fs::read(one.path().join(name)).unwrap(), fs::read(two.path().join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn headers_and_manifest() {
    let expected = [
        (ExperimentKind::CaseStudy, "case_study.csv", "strategy,link,r_l,r_e,secrecy_rate,sdof"),
        (ExperimentKind::SecrecySweep, "secrecy.csv", "strategy,snr_db,mean_secrecy_rate,cutoff,topologies,skipped"),
        (ExperimentKind::TransitorySweep, "transitory.csv", "lambda,n_l,R,mean_sdof"),
        (
            ExperimentKind::TradeoffSweep,
            "tradeoff.csv",
            "lambda_l,lambda_j,d_j,d_l,predicted,sdof_per_node,sdof_per_area",
        ),
        (
            ExperimentKind::RegionMap,
            "region.csv",
            "d_j,d_l,R_e,R_l,R,f1,f2,f3,f4,feasible_exact,feasible_highdensity",
        ),
    ];
    for (kind, file, header) in expected {
        let cfg = tiny(kind);
        let dir = tempfile::tempdir().unwrap();
        run(&cfg, dir.path(), 1).unwrap();
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header, "{file}");
        assert!(text.lines().count() > 1, "{file} has no rows");
        let manifest = read_manifest(dir.path());
        assert_eq!(manifest.experiment, kind.label());
        assert_eq!(manifest.schema_version, SCHEMA_VERSION);
        assert_eq!(manifest.config_sha256, cfg.digest().unwrap());
        assert_eq!(manifest.seeds, cfg.seeds);
        assert!(manifest.skipped <= manifest.requested);
        assert_eq!(manifest.flagged, manifest.skipped * 20 > manifest.requested);
    }
}

#[test]
fn secrecy_rows_account_for_every_topology() {
    let cfg = tiny(ExperimentKind::SecrecySweep);
    let dir = tempfile::tempdir().unwrap();
    let manifest = run(&cfg, dir.path(), 1).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("secrecy.csv")).unwrap();
    let requested = cfg.seeds.len() * cfg.topologies;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let used: usize = record[4].parse().unwrap();
        let skipped: usize = record[5].parse().unwrap();
        assert_eq!(used + skipped, requested);
        rows += 1;
    }
    assert_eq!(rows, cfg.strategies.len() * cfg.snr_db.len() * 2);
    assert_eq!(manifest.requested, requested * cfg.strategies.len() * 2);
}

#[test]
fn region_curves_are_written() {
    let cfg = tiny(ExperimentKind::RegionMap);
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, dir.path(), 1).unwrap();
    let curves: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("region_curves.json")).unwrap()).unwrap();
    for key in ["jamming_slope", "jamming_intercept", "aligning_height", "aligning_curve", "trapezoid"] {
        assert!(curves.get(key).is_some(), "{key}");
    }
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = tiny(ExperimentKind::TradeoffSweep);
    cfg.strategies = vec![Strategy::Gia, Strategy::Cj];
    let text = cfg.to_toml().unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
}

#[test]
fn partial_config_takes_defaults() {
    let cfg = ExperimentConfig::from_toml("kind = \"region_map\"\nn_l = 12\nlambda_j = 0.05\nseeds = [9]\n").unwrap();
    assert_eq!(cfg.kind, ExperimentKind::RegionMap);
    assert_eq!(cfg.params.n_l, 12);
    assert_eq!(cfg.params.lambda_j, 0.05);
    assert_eq!(cfg.params.m_l, ExperimentConfig::default().params.m_l);
    assert_eq!(cfg.seeds, vec![9]);
}

#[test]
fn invalid_configs_are_rejected() {
    for text in ["seeds = []", "topologies = 0", "alpha = 5.0", "kind = \"secrecy_sweep\"\nsnr_db = []", "d_l = 0"] {
        match ExperimentConfig::from_toml(text) {
            Err(GiaError::InvalidConfiguration(_) | GiaError::InvalidParameter(_)) => {}
            other => panic!("{text:?} gave {other:?}"),
        }
    }
}

#[test]
fn cli_writes_outputs_with_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "region_d_j_max = 3\nregion_d_l_max = 2\nseeds = [1, 2]\n").unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_gia"))
        .args(["region-map", "--config"])
        .arg(&config)
        .args(["--seed", "42", "--workers", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = read_manifest(&out);
    assert_eq!(manifest.experiment, "region_map");
    assert_eq!(manifest.seeds, vec![42]);
    assert!(out.join("region.csv").exists());

    let missing = Command::new(env!("CARGO_BIN_EXE_gia"))
        .args(["case-study", "--config"])
        .arg(dir.path().join("absent.toml"))
        .output()
        .unwrap();
    assert!(!missing.status.success());
}
