//! Link rates, secrecy rates and secure-DoF dimension counting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::alignment::{receiver_choice, transmitter_choice, AlignmentSet, Pair, SelectionContext, SelectionCriterion};
use crate::channel::{ChannelSet, NetworkConfig, Side};
use crate::error::{GiaError, Result};
use crate::geometry::{in_range_interferers_indexed, NetworkTopology, Receiver, SpatialIndex, StochasticParams};
use crate::linalg::{is_finite, log2_det_hpd, orthonormalize, real, CMat};
use crate::transceiver::TransceiverSet;

/// A transmitter as seen from one receiver.
#[derive(Clone, Copy, Debug)]
pub struct Signal<'a> {
    pub channel: &'a CMat,
    pub precoder: &'a CMat,
    /// Total transmit power, split evenly over the precoder's columns.
    pub power: f64,
}

impl Signal<'_> {
    /// `sqrt(P/d) Q^H H V`: the signal as seen through orthonormal columns `q`.
    fn projected(&self, q: &CMat) -> CMat {
        let d = self.precoder.ncols();
        if d == 0 {
            return CMat::zeros(q.ncols(), 0);
        }
        q.adjoint() * self.channel * self.precoder * real((self.power / d as f64).sqrt())
    }
}

/// `log2 det(I + (U^H C U)^-1 U^H S U)` with `S` the desired covariance and
/// `C = I + sum of interference covariances`. The decoder only matters through
/// its column span.
pub fn link_rate(decoder: &CMat, desired: Signal<'_>, interferers: &[Signal<'_>]) -> Result<f64> {
    for s in std::iter::once(&desired).chain(interferers) {
        if !is_finite(s.channel) || !is_finite(s.precoder) || !s.power.is_finite() {
            return Err(GiaError::NonFinite("link rate inputs"));
        }
        if s.channel.nrows() != decoder.nrows() || s.channel.ncols() != s.precoder.nrows() {
            return Err(GiaError::DimensionMismatch("decoder, channel and precoder shapes disagree".into()));
        }
    }
    let q = orthonormalize(decoder);
    if q.ncols() == 0 {
        return Ok(0.0);
    }
    // with orthonormal columns the projected noise stays white
    let r = q.ncols();
    let mut b = CMat::identity(r, r);
    for s in interferers {
        let g = s.projected(&q);
        b += &g * g.adjoint();
    }
    let g = desired.projected(&q);
    let a = &g * g.adjoint();
    let rate = log2_det_hpd(&(&a + &b))? - log2_det_hpd(&b)?;
    Ok(rate.max(0.0))
}

pub fn secrecy_rate(r_l: f64, r_e: f64) -> f64 {
    (r_l - r_e).max(0.0)
}

/// Average secrecy rate over `n_draws` fading draws; `draw` maps a per-draw seed
/// to `(r_l, r_e)`.
pub fn monte_carlo_secrecy<F>(n_draws: usize, seed: u64, mut draw: F) -> Result<f64>
where
    F: FnMut(u64) -> Result<(f64, f64)>,
{
    if n_draws == 0 {
        return Err(GiaError::InvalidParameter("at least one draw is required".into()));
    }
    let mut total = 0.0;
    for i in 0..n_draws {
        let (r_l, r_e) = draw(crate::rng::derive(seed, &[i as u64]))?;
        total += secrecy_rate(r_l, r_e);
    }
    Ok(total / n_draws as f64)
}

/// Legitimate and eavesdropping rates of link `k` under a transceiver design.
pub fn network_link_rates(
    tset: &TransceiverSet,
    channels: &ChannelSet,
    config: &NetworkConfig,
    k: usize,
) -> Result<(f64, f64)> {
    let rate_at = |side: Side, decoder: &CMat| -> Result<f64> {
        let own = match (channels.link(side, k, k), tset.precoders.get(&k)) {
            (Some(l), Some(v)) => (l, v),
            _ => return Ok(0.0),
        };
        let desired = Signal { channel: &own.0.matrix, precoder: own.1, power: config.tx_power[k] };
        let interferers: Vec<Signal<'_>> = channels
            .links(side, k)
            .filter(|(j, _)| *j != k)
            .filter_map(|(j, l)| {
                tset.precoders.get(&j).map(|v| Signal { channel: &l.matrix, precoder: v, power: config.tx_power[j] })
            })
            .collect();
        link_rate(decoder, desired, &interferers)
    };
    let r_l = match tset.lr_decoders.get(&k) {
        Some(u) => rate_at(Side::Legitimate, u)?,
        None => 0.0,
    };
    let r_e = match tset.er_decoders.get(&k) {
        Some(u) => rate_at(Side::Eavesdropping, u)?,
        None => 0.0,
    };
    Ok((r_l, r_e))
}

/// Stacks `H_j V_j / sqrt(d_j)` of every interferer at a receiver.
fn stacked_interference(channels: &ChannelSet, tset: &TransceiverSet, side: Side, rx: usize, own: usize) -> CMat {
    let blocks: Vec<CMat> = channels
        .links(side, rx)
        .filter(|(j, _)| *j != own)
        .filter_map(|(j, l)| {
            let v = tset.precoders.get(&j)?;
            (v.ncols() > 0).then(|| &l.matrix * v * real(1.0 / (v.ncols() as f64).sqrt()))
        })
        .collect();
    let n = channels.rx_antennas(side, rx);
    let mut out = CMat::zeros(n, blocks.iter().map(|b| b.ncols()).sum());
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(&b);
        at += b.ncols();
    }
    out
}

/// `log2 det(B + A) - log2 det(B)` with `B = I + p W` and `A = (p/d) g g^H`.
fn projected_rate(gram: &CMat, desired: &CMat, power: f64) -> Result<f64> {
    let r = gram.nrows();
    let d = desired.ncols().max(1) as f64;
    let b = CMat::identity(r, r) + gram * real(power);
    let a = desired * desired.adjoint() * real(power / d);
    Ok((log2_det_hpd(&(&a + &b))? - log2_det_hpd(&b)?).max(0.0))
}

/// Mean secrecy rate over `links` when every node transmits with the same
/// power, for each power in `powers`. LR decoders stay fixed; ERs re-optimize
/// their MMSE decoders at each power. Matches [`network_link_rates`] with
/// eavesdropper decoders from [`crate::transceiver::mmse_decoders`].
pub fn mean_secrecy_by_power(
    tset: &TransceiverSet,
    channels: &ChannelSet,
    links: &[usize],
    powers: &[f64],
) -> Result<Vec<f64>> {
    let mut totals = vec![0.0; powers.len()];
    for &k in links {
        let own = tset.precoders.get(&k);
        let r_l: Vec<f64> = match (tset.lr_decoders.get(&k), own, channels.link(Side::Legitimate, k, k)) {
            (Some(u), Some(v), Some(l)) if orthonormalize(u).ncols() > 0 => {
                let q = orthonormalize(u);
                let x = q.adjoint() * stacked_interference(channels, tset, Side::Legitimate, k, k);
                let gram = &x * x.adjoint();
                let g = q.adjoint() * &l.matrix * v;
                powers.iter().map(|&p| projected_rate(&gram, &g, p)).collect::<Result<_>>()?
            }
            _ => vec![0.0; powers.len()],
        };
        let r_e: Vec<f64> = match (own, channels.link(Side::Eavesdropping, k, k)) {
            (Some(v), Some(l)) if v.ncols() > 0 => {
                let stack = stacked_interference(channels, tset, Side::Eavesdropping, k, k);
                let cov_shape = &stack * stack.adjoint();
                let h = &l.matrix * v;
                let n = h.nrows();
                powers
                    .iter()
                    .map(|&p| {
                        let d = v.ncols() as f64;
                        // receive covariance including the ER's own LT
                        let cov = CMat::identity(n, n) + &cov_shape * real(p) + &h * h.adjoint() * real(p / d);
                        let chol = nalgebra::Cholesky::new(cov).ok_or(GiaError::NonFinite("eavesdropper covariance"))?;
                        let q = orthonormalize(&chol.solve(&h));
                        if q.ncols() == 0 {
                            return Ok(0.0);
                        }
                        let x = q.adjoint() * &stack;
                        projected_rate(&(&x * x.adjoint()), &(q.adjoint() * &h), p)
                    })
                    .collect::<Result<_>>()?
            }
            _ => vec![0.0; powers.len()],
        };
        for (t, (l, e)) in totals.iter_mut().zip(r_l.into_iter().zip(r_e)) {
            *t += secrecy_rate(l, e);
        }
    }
    let n = links.len().max(1) as f64;
    Ok(totals.into_iter().map(|t| t / n).collect())
}

/// Dimension counts of one link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionCount {
    pub link: usize,
    /// Interference-free dimensions at the LR.
    pub s_l: usize,
    /// Interference-free dimensions at the ER.
    pub s_e: usize,
    pub sdof: usize,
    /// In-range streams at the LR not nulled by their transmitter.
    pub i_l: usize,
    /// All in-range interfering streams at the ER.
    pub i_e: usize,
    /// Spare LR dimensions left by the receiver phase.
    pub epsilon: usize,
    /// The receiver phase ran out of candidates before reaching its target.
    pub shortfall: bool,
}

/// What one link sees: antennas, streams and in-range interferers with their
/// stream counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkView {
    pub link: usize,
    pub streams: usize,
    pub lr_antennas: usize,
    pub er_antennas: usize,
    pub lr_interferers: Vec<(usize, usize)>,
    pub er_interferers: Vec<(usize, usize)>,
    /// Largest stream count in the network, which sets the receiver-phase target.
    pub max_streams: usize,
}

/// Counts the secure dimensions of one link.
///
/// `S_l` is computed directly from the unaligned in-range streams and again from
/// the split into `I_l` and the receiver slack `epsilon`; the two must agree
/// for any set the builder can produce.
pub fn count_link(view: &LinkView, aset: &AlignmentSet) -> DimensionCount {
    let k = view.link;
    let d = view.streams;
    let spare = view.lr_antennas.saturating_sub(d);
    let target = (spare + 1).saturating_sub(view.max_streams);

    let mut unaligned = 0;
    let mut i_l = 0;
    for &(j, w) in &view.lr_interferers {
        if !aset.contains(k, j) {
            unaligned += w;
        }
        let nulled_by_tx = aset.tx_subset(j).is_some_and(|s| s.contains(&(k, j)));
        if !nulled_by_tx {
            i_l += w;
        }
    }
    let in_range = |j: usize| view.lr_interferers.iter().find(|x| x.0 == j).map(|x| x.1);
    let rx_load: usize = aset.rx_subset(k).map_or(0, |s| s.iter().filter_map(|p| in_range(p.1)).sum());
    let s_l = d.saturating_sub(unaligned);
    let epsilon = spare.saturating_sub(rx_load.max(target));
    // A short receiver phase must have exhausted its candidates for the split to hold.
    if rx_load <= spare && (rx_load >= target || unaligned == 0) {
        let decomposed = (view.lr_antennas as i64 - i_l as i64 - epsilon as i64).clamp(0, d as i64) as usize;
        assert_eq!(s_l, decomposed, "dimension split disagrees with the direct count on link {k}");
    }
    let i_e: usize = view.er_interferers.iter().map(|x| x.1).sum();
    let s_e = view.er_antennas.saturating_sub(i_e).min(d);
    DimensionCount { link: k, s_l, s_e, sdof: s_l.saturating_sub(s_e), i_l, i_e, epsilon, shortfall: rx_load < target }
}

/// Interference view of link `k` from geometry; `index` holds the transmitter
/// positions.
pub fn link_view(
    topology: &NetworkTopology,
    params: &StochasticParams,
    config: &NetworkConfig,
    index: &SpatialIndex,
    k: usize,
) -> LinkView {
    let weigh = |ids: Vec<usize>| ids.into_iter().map(|j| (j, config.tx_streams[j])).collect();
    LinkView {
        link: k,
        streams: config.tx_streams[k],
        lr_antennas: config.lr_antennas[k],
        er_antennas: config.er_antennas[k],
        lr_interferers: weigh(in_range_interferers_indexed(topology, params, index, Receiver::Legitimate(k))),
        er_interferers: weigh(in_range_interferers_indexed(topology, params, index, Receiver::Eavesdropper(k))),
        max_streams: config.tx_streams.iter().copied().max().unwrap_or(0),
    }
}

/// Counts link `k` running only the alignment decisions that involve it: the
/// choices of its in-range transmitters and of its own LR.
pub fn count_local(ctx: &SelectionContext<'_>, config: &NetworkConfig, criterion: &dyn SelectionCriterion, k: usize) -> DimensionCount {
    let view = link_view(ctx.topology, ctx.params, config, &ctx.transmitters, k);
    let tx: BTreeMap<usize, BTreeSet<Pair>> = view
        .lr_interferers
        .iter()
        .map(|&(j, _)| (j, transmitter_choice(ctx, config, criterion, j)))
        .filter(|(_, s)| !s.is_empty())
        .collect();
    let covered: BTreeSet<Pair> = tx.values().flatten().copied().collect();
    let rx = BTreeMap::from([(k, receiver_choice(ctx, config, &covered, criterion, k))]);
    count_link(&view, &AlignmentSet::from_subsets(rx, tx))
}

/// Dimension counts for every link of a topology.
pub fn sdof_counts(
    topology: &NetworkTopology,
    aset: &AlignmentSet,
    params: &StochasticParams,
    config: &NetworkConfig,
) -> Result<Vec<DimensionCount>> {
    crate::alignment::check_inputs(topology, params, config)?;
    let index = topology.transmitter_index(params);
    Ok((0..topology.num_links()).map(|k| count_link(&link_view(topology, params, config, &index, k), aset)).collect())
}

/// Counts from a channel set and a design: interferers are the stored links,
/// weighted by the rank of their precoders (silent nodes count zero).
pub fn sdof_counts_from_design(
    channels: &ChannelSet,
    tset: &TransceiverSet,
    aset: &AlignmentSet,
    config: &NetworkConfig,
) -> Vec<DimensionCount> {
    let streams = |j: usize| {
        tset.precoders
            .get(&j)
            .map_or(0, |v| crate::transceiver::numerical_rank(v, crate::transceiver::RANK_TOL))
    };
    let max_streams = (0..config.num_transmitters()).map(streams).max().unwrap_or(0);
    (0..config.num_links)
        .map(|k| {
            let collect = |side: Side| -> Vec<(usize, usize)> {
                channels
                    .links(side, k)
                    .filter(|(j, l)| *j != k && l.pathloss > 0.0)
                    .map(|(j, _)| (j, streams(j)))
                    .collect()
            };
            let view = LinkView {
                link: k,
                streams: streams(k),
                lr_antennas: config.lr_antennas[k],
                er_antennas: config.er_antennas[k],
                lr_interferers: collect(Side::Legitimate),
                er_interferers: collect(Side::Eavesdropping),
                max_streams,
            };
            count_link(&view, aset)
        })
        .collect()
}

/// Rates plus dimension counts for one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub r_l: f64,
    pub r_e: f64,
    pub secrecy_rate: f64,
    pub counts: DimensionCount,
}

/// Writes `link,S_l,S_e,sdof,I_l,I_e,epsilon` rows.
pub fn write_counts_csv<W: Write>(counts: &[DimensionCount], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["link", "S_l", "S_e", "sdof", "I_l", "I_e", "epsilon"])?;
    for c in counts {
        w.write_record([c.link, c.s_l, c.s_e, c.sdof, c.i_l, c.i_e, c.epsilon].iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
