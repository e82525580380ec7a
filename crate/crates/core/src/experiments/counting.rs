use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::alignment::{receiver_choice, transmitter_choice, AlignmentSet, NearestFirst, Pair, SelectionContext};
use crate::analytics::{indicator_r, StreamGrid};
use crate::channel::NetworkConfig;
use crate::error::Result;
use crate::geometry::{connection_density, sample_typical_link, ObservationWindow, StochasticParams};
use crate::metrics::{count_link, count_local, link_view};
use crate::rng::derive;

/// One density of the transitory sweep: `lambda_l = lambda_j = lambda`, both
/// transmitter types with `m` antennas, and the LR antenna grid to sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCase {
    pub lambda: f64,
    pub m: usize,
    pub n_e: usize,
    pub n_l: Vec<usize>,
}

impl DensityCase {
    /// Densities 0.02, 0.08 and 0.32 with antennas scaled to the connection
    /// density of the default geometry, and N_l spanning R up to where the eavesdropper side binds.
    pub fn defaults() -> Vec<Self> {
        [0.02, 0.08, 0.32]
            .into_iter()
            .map(|lambda| {
                let (rho, _) = connection_density(&StochasticParams { lambda_l: lambda, ..StochasticParams::default() });
                let m = (rho / 4.0).round() as usize + 1;
                let n_e = (rho / 2.0).round().max(1.0) as usize;
                let n_max = (3.0 * rho).ceil() as usize + 2;
                DensityCase { lambda, m, n_e, n_l: (1..=n_max).collect() }
            })
            .collect()
    }

    pub fn params(&self, base: &StochasticParams) -> StochasticParams {
        StochasticParams {
            lambda_l: self.lambda,
            lambda_j: self.lambda,
            m_l: self.m,
            m_j: self.m,
            n_e: self.n_e,
            ..base.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitoryPoint {
    pub lambda: f64,
    pub n_l: usize,
    pub r: f64,
    pub mean_sdof: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitorySweep {
    pub d_l: usize,
    pub points: Vec<TransitoryPoint>,
}

impl TransitorySweep {
    pub fn curve(&self, lambda: f64) -> Vec<TransitoryPoint> {
        let mut pts: Vec<TransitoryPoint> = self.points.iter().copied().filter(|p| p.lambda == lambda).collect();
        pts.sort_by(|a, b| a.r.total_cmp(&b.r));
        pts
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "n_l", "R", "mean_sdof"])?;
        for p in &self.points {
            w.write_record(&[p.lambda.to_string(), p.n_l.to_string(), p.r.to_string(), p.mean_sdof.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Width of the R interval over which the normalized sDoF climbs from 0.1 to
/// 0.9, by linear interpolation along a curve sorted by R.
pub fn transitory_width(curve: &[TransitoryPoint], d_l: usize) -> Option<f64> {
    let crossing = |level: f64| -> Option<f64> {
        curve.windows(2).find_map(|w| {
            let (a, b) = (w[0].mean_sdof / d_l as f64, w[1].mean_sdof / d_l as f64);
            (a < level && b >= level).then(|| w[0].r + (level - a) / (b - a) * (w[1].r - w[0].r))
        })
    };
    Some(crossing(0.9)? - crossing(0.1)?)
}

fn guard(params: &StochasticParams) -> f64 {
    ObservationWindow::for_alignment(0.0, params).guard_width
}

fn topology_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    cfg.seeds.iter().flat_map(|&s| (0..cfg.topologies).map(move |t| derive(s, &[t as u64]))).collect()
}

/// Counted sDoF of the typical link for each LR antenna count in `n_l`.
fn typical_sdof_by_n_l(params: &StochasticParams, n_l: &[usize], seed: u64) -> Result<Vec<usize>> {
    let topology = sample_typical_link(params, guard(params), seed)?;
    let mut config = NetworkConfig::for_topology(&topology, params, 1.0);
    let ctx = SelectionContext::new(&topology, params);
    let base = link_view(&topology, params, &config, &ctx.transmitters, 0);
    // transmitter choices do not involve LR antennas
    let tx: BTreeMap<usize, BTreeSet<Pair>> = base
        .lr_interferers
        .iter()
        .map(|&(j, _)| (j, transmitter_choice(&ctx, &config, &NearestFirst, j)))
        .filter(|(_, s)| !s.is_empty())
        .collect();
    let covered: BTreeSet<Pair> = tx.values().flatten().copied().collect();
    n_l.iter()
        .map(|&n| {
            config.lr_antennas.iter_mut().for_each(|a| *a = n);
            config.validate()?;
            let rx = BTreeMap::from([(0, receiver_choice(&ctx, &config, &covered, &NearestFirst, 0))]);
            let view = crate::metrics::LinkView { lr_antennas: n, ..base.clone() };
            Ok(count_link(&view, &AlignmentSet::from_subsets(rx, tx.clone())).sdof)
        })
        .collect()
}

/// Counted sDoF vs. the indicator R, sweeping N_l at each density.
pub fn run_transitory_sweep(cfg: &ExperimentConfig) -> Result<TransitorySweep> {
    let seeds = topology_seeds(cfg);
    let mut points = Vec::new();
    for case in &cfg.density_cases {
        let params = case.params(&cfg.params);
        let per_topology: Vec<Vec<usize>> =
            seeds.par_iter().map(|&s| typical_sdof_by_n_l(&params, &case.n_l, s)).collect::<Result<_>>()?;
        for (i, &n) in case.n_l.iter().enumerate() {
            let at = StochasticParams { n_l: n, ..params.clone() };
            let report = indicator_r(&at, params.d_l, params.d_j)?;
            let sdof: Vec<f64> = per_topology.iter().map(|v| v[i] as f64).collect();
            points.push(TransitoryPoint { lambda: case.lambda, n_l: n, r: report.r, mean_sdof: super::ordered_mean(&sdof) });
        }
    }
    Ok(TransitorySweep { d_l: cfg.params.d_l, points })
}

/// Mean counted sDoF of the typical link over `seeds`, with the streams in
/// `params`.
pub fn mean_counted_sdof(params: &StochasticParams, seeds: &[u64]) -> Result<f64> {
    let values: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let topology = sample_typical_link(params, guard(params), s)?;
            let config = NetworkConfig::for_topology(&topology, params, 1.0);
            let ctx = SelectionContext::new(&topology, params);
            Ok(count_local(&ctx, &config, &NearestFirst, 0).sdof as f64)
        })
        .collect::<Result<_>>()?;
    Ok(super::ordered_mean(&values))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub lambda_l: f64,
    pub lambda_j: f64,
    pub d_j: usize,
    pub d_l: usize,
    /// Prediction of the chosen pair from the indicator.
    pub predicted: f64,
    pub sdof_per_node: f64,
    pub sdof_per_area: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffSweep {
    pub rows: Vec<TradeoffRow>,
}

impl TradeoffSweep {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda_l", "lambda_j", "d_j", "d_l", "predicted", "sdof_per_node", "sdof_per_area"])?;
        for r in &self.rows {
            w.write_record(&[
                r.lambda_l.to_string(),
                r.lambda_j.to_string(),
                r.d_j.to_string(),
                r.d_l.to_string(),
                r.predicted.to_string(),
                r.sdof_per_node.to_string(),
                r.sdof_per_area.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// For each LT density (jammers take the rest of `lambda_total`), ranks every
/// stream pair by its predicted sDoF, simulates the best few and keeps the
/// best simulated one.
pub fn run_tradeoff_sweep(cfg: &ExperimentConfig) -> Result<TradeoffSweep> {
    let seeds = topology_seeds(cfg);
    let mut rows = Vec::new();
    for &lambda_l in &cfg.lambda_grid {
        let params = StochasticParams { lambda_l, lambda_j: (cfg.lambda_total - lambda_l).max(0.0), ..cfg.params.clone() };
        let grid = StreamGrid::full(&params);
        let mut ranked = Vec::new();
        for &d_j in &grid.d_j {
            for &d_l in &grid.d_l {
                let report = indicator_r(&params, d_l, d_j)?;
                let predicted = if report.feasible { d_l as f64 } else { 0.0 };
                ranked.push((predicted, report.r, d_j, d_l));
            }
        }
        // best prediction first, then the larger margin; ties keep grid order
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let mut best: Option<TradeoffRow> = None;
        for &(predicted, _, d_j, d_l) in ranked.iter().take(cfg.tradeoff_candidates) {
            let streams = StochasticParams { d_l, d_j, ..params.clone() };
            let sdof = mean_counted_sdof(&streams, &seeds)?;
            if best.is_none_or(|b| sdof > b.sdof_per_node) {
                best = Some(TradeoffRow {
                    lambda_l,
                    lambda_j: params.lambda_j,
                    d_j,
                    d_l,
                    predicted,
                    sdof_per_node: sdof,
                    sdof_per_area: sdof * lambda_l,
                });
            }
        }
        rows.extend(best);
    }
    Ok(TradeoffSweep { rows })
}
