use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::alignment::build_alignment_set;
use crate::channel::{sample_channels_with, ChannelOptions, NetworkConfig, PathlossModel};
use crate::error::{GiaError, Result};
use crate::geometry::{sample_topology, ObservationWindow};
use crate::metrics::mean_secrecy_by_power;
use crate::rng::derive;
use crate::transceiver::{design_baseline_with, with_artificial_noise, Baseline, GiaSolver, TransceiverSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Strategy {
    Gia,
    Cj,
    Ia,
    Ian,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Gia => "GIA",
            Strategy::Cj => "CJ",
            Strategy::Ia => "IA",
            Strategy::Ian => "IAN",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecrecyRow {
    pub strategy: Strategy,
    pub snr_db: f64,
    pub cutoff: bool,
    /// Per-node secrecy rate averaged over observed links, draws and topologies.
    pub mean_secrecy_rate: f64,
    pub topologies: usize,
    /// Topologies without a converged design or without an observed link.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecrecySweep {
    pub rows: Vec<SecrecyRow>,
}

impl SecrecySweep {
    pub fn rate(&self, strategy: Strategy, snr_db: f64, cutoff: bool) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.cutoff == cutoff && r.snr_db == snr_db)
            .map(|r| r.mean_secrecy_rate)
    }

    /// Rate increase per doubling of power between two SNR points.
    pub fn slope(&self, strategy: Strategy, cutoff: bool, from_db: f64, to_db: f64) -> Option<f64> {
        let lo = self.rate(strategy, from_db, cutoff)?;
        let hi = self.rate(strategy, to_db, cutoff)?;
        Some((hi - lo) / ((to_db - from_db) / 10.0 * 10f64.log2()))
    }

    /// Topologies dropped, summed over strategy and cutoff settings.
    pub fn skipped(&self) -> usize {
        self.first_per_series().map(|r| r.skipped).sum()
    }

    pub fn requested(&self) -> usize {
        self.first_per_series().map(|r| r.skipped + r.topologies).sum()
    }

    fn first_per_series(&self) -> impl Iterator<Item = &SecrecyRow> {
        let mut seen = std::collections::BTreeSet::new();
        self.rows.iter().filter(move |r| seen.insert((r.strategy, r.cutoff)))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["strategy", "snr_db", "mean_secrecy_rate", "cutoff", "topologies", "skipped"])?;
        for r in &self.rows {
            w.write_record(&[
                r.strategy.label().to_string(),
                r.snr_db.to_string(),
                r.mean_secrecy_rate.to_string(),
                r.cutoff.to_string(),
                r.topologies.to_string(),
                r.skipped.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

type SeriesKey = (Strategy, bool);

/// Per-SNR mean secrecy of one topology for each series, `None` when a solver
/// failed to converge on any of its draws.
type TopologyOutcome = BTreeMap<SeriesKey, Option<Vec<f64>>>;

/// Mean per-node secrecy rate vs. SNR for each strategy, averaged over
/// topologies and channel draws.
pub fn run_secrecy_sweep(cfg: &ExperimentConfig) -> Result<SecrecySweep> {
    let cutoffs: Vec<bool> = if cfg.compare_cutoff { vec![true, false] } else { vec![true] };
    let tasks: Vec<(u64, usize)> =
        cfg.seeds.iter().flat_map(|&s| (0..cfg.topologies).map(move |t| (s, t))).collect();
    let outcomes: Vec<Option<TopologyOutcome>> =
        tasks.into_par_iter().map(|(seed, t)| run_topology(cfg, &cutoffs, derive(seed, &[t as u64]))).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &strategy in &cfg.strategies {
        for &cutoff in &cutoffs {
            let key = (strategy, cutoff);
            let mut used: Vec<&Vec<f64>> = Vec::new();
            let mut skipped = 0;
            for outcome in &outcomes {
                match outcome.as_ref().and_then(|o| o[&key].as_ref()) {
                    Some(rates) => used.push(rates),
                    None => skipped += 1,
                }
            }
            for (i, &snr_db) in cfg.snr_db.iter().enumerate() {
                let values: Vec<f64> = used.iter().map(|r| r[i]).collect();
                rows.push(SecrecyRow {
                    strategy,
                    snr_db,
                    cutoff,
                    mean_secrecy_rate: super::ordered_mean(&values),
                    topologies: used.len(),
                    skipped,
                });
            }
        }
    }
    Ok(SecrecySweep { rows })
}

fn run_topology(cfg: &ExperimentConfig, cutoffs: &[bool], seed: u64) -> Result<Option<TopologyOutcome>> {
    let params = &cfg.params;
    let window = ObservationWindow::for_alignment(cfg.observation_radius, params);
    let topology = sample_topology(params, window, seed)?;
    let observed = topology.observed_links();
    if observed.is_empty() {
        return Ok(None);
    }
    let config = NetworkConfig::for_topology(&topology, params, 1.0);
    let aset = if cfg.strategies.contains(&Strategy::Gia) {
        Some(build_alignment_set(&topology, params, &config)?)
    } else {
        None
    };

    let powers: Vec<f64> = cfg.snr_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let mut sums: BTreeMap<SeriesKey, Option<Vec<f64>>> = BTreeMap::new();
    for &s in &cfg.strategies {
        for &c in cutoffs {
            sums.insert((s, c), Some(vec![0.0; cfg.snr_db.len()]));
        }
    }
    for draw in 0..cfg.channel_draws {
        let draw_seed = derive(seed, &[draw as u64]);
        let solver = GiaSolver { tol: cfg.solver_tol, max_iter: cfg.solver_max_iter, seed: draw_seed, ..GiaSolver::default() };
        for &cutoff in cutoffs {
            let model = if cutoff { PathlossModel::Cutoff } else { PathlossModel::NoCutoff { radius: cfg.no_cutoff_radius } };
            let options = ChannelOptions { model, eavesdroppers: Some(observed.clone()) };
            let channels = sample_channels_with(&topology, &config, params, draw_seed, &options)?;
            // IA and IAN share one solve; the inner `None` marks a failed one.
            let mut ia: Option<Option<TransceiverSet>> = None;
            for &strategy in &cfg.strategies {
                let key = (strategy, cutoff);
                if sums[&key].is_none() {
                    continue;
                }
                let design = match strategy {
                    Strategy::Gia => solver.solve(&channels, aset.as_ref().expect("built above"), &config).map(|(t, _)| t),
                    Strategy::Cj => design_baseline_with(Baseline::Cj, &channels, &topology, params, &config, &solver),
                    Strategy::Ia | Strategy::Ian => {
                        if ia.is_none() {
                            ia = Some(converged(design_baseline_with(Baseline::Ia, &channels, &topology, params, &config, &solver))?);
                        }
                        match (ia.as_ref().expect("set above"), strategy) {
                            (None, _) => Err(GiaError::NonConvergence { max_residual: f64::NAN, iterations: 0 }),
                            (Some(t), Strategy::Ian) => with_artificial_noise(t, &channels, &config, solver.seed),
                            (Some(t), _) => Ok(t.clone()),
                        }
                    }
                };
                match converged(design)? {
                    Some(tset) => {
                        let rates = mean_secrecy_by_power(&tset, &channels, &observed, &powers)?;
                        let acc = sums.get_mut(&key).and_then(Option::as_mut).expect("checked above");
                        for (a, r) in acc.iter_mut().zip(rates) {
                            *a += r / cfg.channel_draws as f64;
                        }
                    }
                    None => {
                        sums.insert(key, None);
                    }
                }
            }
        }
    }
    Ok(Some(sums))
}

/// Separates solver non-convergence (a skip) from real errors.
fn converged(design: Result<TransceiverSet>) -> Result<Option<TransceiverSet>> {
    match design {
        Ok(t) => Ok(Some(t)),
        Err(GiaError::NonConvergence { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}
