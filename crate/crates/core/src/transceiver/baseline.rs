use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mmse_decoders, GiaSolver, TransceiverSet};
use crate::alignment::{build_alignment_set, transmitter_phase, NearestFirst, SelectionContext};
use crate::channel::{ChannelSet, NetworkConfig, Side};
use crate::error::Result;
use crate::geometry::{NetworkTopology, StochasticParams};
use crate::linalg::{min_right_singular, random_orthonormal, zeros, CMat};
use crate::rng::{streams, substream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Baseline {
    /// Random link transceivers; jammers zero-force their nearest LRs.
    Cj,
    /// Alignment among LTs only; jammers idle.
    Ia,
    /// Alignment among LTs plus jammers sending random artificial noise.
    Ian,
}

/// Baseline transceivers with the default solver settings.
pub fn design_baseline(
    kind: Baseline,
    channels: &ChannelSet,
    topology: &NetworkTopology,
    params: &StochasticParams,
    config: &NetworkConfig,
) -> Result<TransceiverSet> {
    design_baseline_with(kind, channels, topology, params, config, &GiaSolver::default())
}

pub fn design_baseline_with(
    kind: Baseline,
    channels: &ChannelSet,
    topology: &NetworkTopology,
    params: &StochasticParams,
    config: &NetworkConfig,
    solver: &GiaSolver,
) -> Result<TransceiverSet> {
    crate::alignment::check_inputs(topology, params, config)?;
    let mut rng = substream(solver.seed, streams::BASELINE);
    let k = config.num_links;
    let mut precoders: BTreeMap<usize, CMat>;
    let lr_decoders: BTreeMap<usize, CMat>;
    match kind {
        Baseline::Ia | Baseline::Ian => {
            let aset = build_alignment_set(&topology.without_jammers(), params, &config.without_jammers())?;
            let (tset, _) = solver.solve(channels, &aset, config)?;
            precoders = tset.precoders;
            lr_decoders = tset.lr_decoders;
            for j in k..config.num_transmitters() {
                let v = if kind == Baseline::Ia {
                    zeros(config.tx_antennas[j], config.tx_streams[j])
                } else {
                    random_orthonormal(config.tx_antennas[j], config.tx_streams[j], &mut rng)
                };
                precoders.insert(j, v);
            }
        }
        Baseline::Cj => {
            precoders = (0..k).map(|j| (j, random_orthonormal(config.tx_antennas[j], config.tx_streams[j], &mut rng))).collect();
            lr_decoders =
                (0..k).map(|r| (r, random_orthonormal(config.lr_antennas[r], config.tx_streams[r], &mut rng))).collect();
            let ctx = SelectionContext::new(topology, params);
            let targets = transmitter_phase(&ctx, config, &NearestFirst);
            for j in k..config.num_transmitters() {
                let d = config.tx_streams[j];
                let v = match targets.get(&j) {
                    Some(subset) => {
                        let rows: Vec<CMat> = subset
                            .iter()
                            .map(|&(r, _)| lr_decoders[&r].adjoint() * channels.matrix(Side::Legitimate, r, j))
                            .collect();
                        let mut x = zeros(rows.iter().map(|m| m.nrows()).sum(), config.tx_antennas[j]);
                        let mut at = 0;
                        for m in rows {
                            x.view_mut((at, 0), m.shape()).copy_from(&m);
                            at += m.nrows();
                        }
                        min_right_singular(&x, d).0
                    }
                    None => random_orthonormal(config.tx_antennas[j], d, &mut rng),
                };
                precoders.insert(j, v);
            }
        }
    }
    let er_decoders = mmse_decoders(channels, &precoders, config, 0..k)?;
    Ok(TransceiverSet { precoders, lr_decoders, er_decoders })
}

/// Turns an IA design into its artificial-noise variant: jammers get the same
/// random precoders [`design_baseline_with`] would draw for `seed`.
pub fn with_artificial_noise(
    ia: &TransceiverSet,
    channels: &ChannelSet,
    config: &NetworkConfig,
    seed: u64,
) -> Result<TransceiverSet> {
    let mut rng = substream(seed, streams::BASELINE);
    let mut precoders = ia.precoders.clone();
    for j in config.num_links..config.num_transmitters() {
        precoders.insert(j, random_orthonormal(config.tx_antennas[j], config.tx_streams[j], &mut rng));
    }
    let er_decoders = mmse_decoders(channels, &precoders, config, ia.er_decoders.keys().copied())?;
    Ok(TransceiverSet { precoders, lr_decoders: ia.lr_decoders.clone(), er_decoders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_channels;
    use crate::geometry::{sample_topology, ObservationWindow};

    fn small() -> (NetworkTopology, StochasticParams, NetworkConfig, ChannelSet) {
        let p = StochasticParams { lambda_l: 0.01, lambda_j: 0.02, ..Default::default() };
        let t = sample_topology(&p, ObservationWindow::new(10.0, &p), 2).unwrap();
        let cfg = NetworkConfig::for_topology(&t, &p, 100.0);
        let ch = sample_channels(&t, &cfg, &p, 5).unwrap();
        (t, p, cfg, ch)
    }

    #[test]
    fn ia_silences_jammers_and_ian_does_not() {
        let (t, p, cfg, ch) = small();
        assert!(t.num_jammers() > 0);
        let ia = design_baseline(Baseline::Ia, &ch, &t, &p, &cfg).unwrap();
        let ian = design_baseline(Baseline::Ian, &ch, &t, &p, &cfg).unwrap();
        for j in t.num_links()..t.num_transmitters() {
            assert_eq!(ia.precoders[&j].norm(), 0.0);
            assert!(ian.precoders[&j].norm() > 0.5);
        }
        for j in 0..t.num_links() {
            assert_eq!(ia.precoders[&j], ian.precoders[&j]);
        }
        assert_eq!(with_artificial_noise(&ia, &ch, &cfg, 0).unwrap(), ian);
    }

    #[test]
    fn cj_jammers_null_their_targets() {
        let (t, p, cfg, ch) = small();
        let cj = design_baseline(Baseline::Cj, &ch, &t, &p, &cfg).unwrap();
        let ctx = SelectionContext::new(&t, &p);
        let targets = transmitter_phase(&ctx, &cfg, &NearestFirst);
        let mut checked = 0;
        for (&j, subset) in targets.range(t.num_links()..) {
            for &(r, _) in subset {
                let res = (cj.lr_decoders[&r].adjoint() * ch.matrix(Side::Legitimate, r, j) * &cj.precoders[&j]).norm();
                assert!(res <= 1e-10, "jammer {j} leaks {res} into LR {r}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
