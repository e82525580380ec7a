use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, NetworkConfig};
use crate::error::Result;
use crate::metrics::{network_link_rates, sdof_counts_from_design, secrecy_rate};
use crate::rng::derive;
use crate::transceiver::{design_case_study, effective_alignment, CaseStrategy};

/// Transmit power of every node in the four-node example (20 dB).
const EXAMPLE_POWER: f64 = 100.0;
/// Leakage, relative to pathloss, below which a cross link counts as aligned.
const ALIGNED_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    pub strategy: CaseStrategy,
    pub link: usize,
    pub r_l: f64,
    pub r_e: f64,
    pub secrecy_rate: f64,
    pub sdof: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyTable {
    pub draws: usize,
    pub rows: Vec<CaseStudyRow>,
}

impl CaseStudyTable {
    /// Secrecy rate averaged over the three links.
    pub fn mean_secrecy(&self, strategy: CaseStrategy) -> f64 {
        let rows: Vec<f64> = self.rows.iter().filter(|r| r.strategy == strategy).map(|r| r.secrecy_rate).collect();
        super::ordered_mean(&rows)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["strategy", "link", "r_l", "r_e", "secrecy_rate", "sdof"])?;
        for r in &self.rows {
            w.write_record(&[
                r.strategy.label().to_string(),
                r.link.to_string(),
                r.r_l.to_string(),
                r.r_e.to_string(),
                r.secrecy_rate.to_string(),
                r.sdof.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-link rates and counted sDoF of strategies A-D on the four-node example,
/// averaged over `draws` fully connected channel draws.
pub fn run_case_study(seed: u64, draws: usize) -> Result<CaseStudyTable> {
    let config = NetworkConfig::four_node_example(EXAMPLE_POWER);
    let per_draw: Vec<Vec<[f64; 4]>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let draw_seed = derive(seed, &[i as u64]);
            let channels = ChannelSet::fully_connected(&config, draw_seed)?;
            CaseStrategy::ALL
                .iter()
                .map(|&s| {
                    let tset = design_case_study(s, &channels, &config, draw_seed)?;
                    let aligned = effective_alignment(&tset, &channels, ALIGNED_TOL);
                    let counts = sdof_counts_from_design(&channels, &tset, &aligned, &config);
                    (0..config.num_links)
                        .map(|k| {
                            let (r_l, r_e) = network_link_rates(&tset, &channels, &config, k)?;
                            Ok([r_l, r_e, secrecy_rate(r_l, r_e), counts[k].sdof as f64])
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
                .map(|v| v.into_iter().flatten().collect())
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (si, &strategy) in CaseStrategy::ALL.iter().enumerate() {
        for link in 0..config.num_links {
            let idx = si * config.num_links + link;
            let mut sum = [0.0; 4];
            for d in &per_draw {
                for (acc, v) in sum.iter_mut().zip(d[idx]) {
                    *acc += v;
                }
            }
            let n = draws.max(1) as f64;
            rows.push(CaseStudyRow {
                strategy,
                link,
                r_l: sum[0] / n,
                r_e: sum[1] / n,
                secrecy_rate: sum[2] / n,
                sdof: sum[3] / n,
            });
        }
    }
    Ok(CaseStudyTable { draws, rows })
}
