//! Config-driven numerical studies with CSV/JSON output and a run manifest.

mod case_study;
mod counting;
mod region;
mod secrecy;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GiaError, Result};
use crate::geometry::StochasticParams;

pub use case_study::{run_case_study, CaseStudyRow, CaseStudyTable};
pub use counting::{
    mean_counted_sdof, run_transitory_sweep, run_tradeoff_sweep, transitory_width, DensityCase, TradeoffRow,
    TradeoffSweep, TransitoryPoint, TransitorySweep,
};
pub use region::run_region_map;
pub use secrecy::{run_secrecy_sweep, SecrecyRow, SecrecySweep, Strategy};

/// Version of the CSV layouts, recorded in every manifest.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CaseStudy,
    SecrecySweep,
    TransitorySweep,
    TradeoffSweep,
    RegionMap,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::CaseStudy => "case_study",
            ExperimentKind::SecrecySweep => "secrecy_sweep",
            ExperimentKind::TransitorySweep => "transitory_sweep",
            ExperimentKind::TradeoffSweep => "tradeoff_sweep",
            ExperimentKind::RegionMap => "region_map",
        }
    }
}

/// One TOML document per run. Network parameters sit at the top level next
/// to the experiment keys; anything omitted takes its default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(flatten)]
    pub params: StochasticParams,
    pub seeds: Vec<u64>,
    /// Topologies per seed.
    pub topologies: usize,
    /// Channel draws per topology.
    pub channel_draws: usize,
    pub snr_db: Vec<f64>,
    pub strategies: Vec<Strategy>,
    /// Also run every strategy on channels without the pathloss cutoff.
    pub compare_cutoff: bool,
    /// Truncation radius of the no-cutoff channel model.
    pub no_cutoff_radius: f64,
    pub observation_radius: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub density_cases: Vec<DensityCase>,
    pub lambda_grid: Vec<f64>,
    /// `lambda_l + lambda_j` held fixed in the tradeoff sweep.
    pub lambda_total: f64,
    /// Predicted-best stream pairs simulated per density in the tradeoff sweep.
    pub tradeoff_candidates: usize,
    pub region_d_j_max: Option<usize>,
    pub region_d_l_max: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::SecrecySweep,
            params: StochasticParams::default(),
            seeds: vec![1],
            topologies: 50,
            channel_draws: 20,
            snr_db: (0..=12).map(|i| 5.0 * i as f64).collect(),
            strategies: vec![Strategy::Gia, Strategy::Ia, Strategy::Ian, Strategy::Cj],
            compare_cutoff: false,
            no_cutoff_radius: 40.0,
            observation_radius: 30.0,
            solver_tol: 1e-8,
            solver_max_iter: 5000,
            density_cases: DensityCase::defaults(),
            lambda_grid: (1..=9).map(|i| i as f64 * 1e-2).collect(),
            lambda_total: 0.13,
            tradeoff_candidates: 4,
            region_d_j_max: None,
            region_d_l_max: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GiaError::InvalidConfiguration(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GiaError::InvalidConfiguration(m.to_string()));
        self.params.validate()?;
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        if self.topologies == 0 || self.channel_draws == 0 {
            return bad("topology and channel draw counts must be at least 1");
        }
        match self.kind {
            ExperimentKind::SecrecySweep => {
                if self.snr_db.is_empty() || self.strategies.is_empty() {
                    return bad("secrecy sweep needs SNR points and strategies");
                }
                if !(self.observation_radius > 0.0) {
                    return bad("observation radius must be positive");
                }
            }
            ExperimentKind::TransitorySweep => {
                if self.density_cases.is_empty() || self.density_cases.iter().any(|c| c.n_l.is_empty()) {
                    return bad("transitory sweep needs density cases with N_l grids");
                }
            }
            ExperimentKind::TradeoffSweep => {
                if self.lambda_grid.is_empty() || self.tradeoff_candidates == 0 {
                    return bad("tradeoff sweep needs a density grid and at least one candidate");
                }
                if self.lambda_grid.iter().any(|&l| !(l > 0.0 && l <= self.lambda_total)) {
                    return bad("tradeoff densities must lie in (0, lambda_total]");
                }
            }
            ExperimentKind::CaseStudy | ExperimentKind::RegionMap => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub crate_version: String,
    pub schema_version: u32,
    pub outputs: Vec<String>,
    /// Topologies dropped because a solver did not converge, out of `requested`.
    pub skipped: usize,
    pub requested: usize,
    /// Set when more than 5% of the requested topologies were dropped.
    pub flagged: bool,
}

/// Runs the configured experiment, writing its data files and `manifest.json`
/// into `out_dir`. `workers = 0` uses rayon's default pool size.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GiaError::InvalidConfiguration(e.to_string()))?;
    let mut outputs = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        fs::write(out_dir.join(name), bytes)?;
        outputs.push(name.to_string());
        Ok(())
    };
    let (mut skipped, mut requested) = (0, 0);
    pool.install(|| -> Result<()> {
        match cfg.kind {
            ExperimentKind::CaseStudy => {
                let table = run_case_study(cfg.seeds[0], cfg.channel_draws)?;
                let mut buf = Vec::new();
                table.write_csv(&mut buf)?;
                emit("case_study.csv", buf)
            }
            ExperimentKind::SecrecySweep => {
                let sweep = run_secrecy_sweep(cfg)?;
                skipped = sweep.skipped();
                requested = sweep.requested();
                let mut buf = Vec::new();
                sweep.write_csv(&mut buf)?;
                emit("secrecy.csv", buf)
            }
            ExperimentKind::TransitorySweep => {
                let sweep = run_transitory_sweep(cfg)?;
                let mut buf = Vec::new();
                sweep.write_csv(&mut buf)?;
                emit("transitory.csv", buf)
            }
            ExperimentKind::TradeoffSweep => {
                let sweep = run_tradeoff_sweep(cfg)?;
                let mut buf = Vec::new();
                sweep.write_csv(&mut buf)?;
                emit("tradeoff.csv", buf)
            }
            ExperimentKind::RegionMap => {
                let region = run_region_map(cfg)?;
                let mut buf = Vec::new();
                region.write_csv(&mut buf)?;
                emit("region.csv", buf)?;
                emit("region_curves.json", serde_json::to_vec_pretty(&region.curves)?)
            }
        }
    })?;
    let manifest = Manifest {
        experiment: cfg.kind.label().to_string(),
        config_sha256: cfg.digest()?,
        seeds: cfg.seeds.clone(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: SCHEMA_VERSION,
        outputs,
        skipped,
        requested,
        flagged: requested > 0 && skipped as f64 > 0.05 * requested as f64,
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Averages `values` in order, so the result does not depend on how the work
/// was scheduled.
pub(crate) fn ordered_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
