//! Alignment sets: which cross links get nulled, split into per-node subsets.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkConfig;
use crate::error::{GiaError, Result};
use crate::geometry::{NetworkTopology, SpatialIndex, StochasticParams};

/// `(LR id, transmitter id)`.
pub type Pair = (usize, usize);

/// A set of cross links to null, with the node that chose each link.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlignmentSet {
    pub pairs: BTreeSet<Pair>,
    /// Pairs chosen by each LR (every pair has that LR as receiver).
    pub rx_subsets: BTreeMap<usize, BTreeSet<Pair>>,
    /// Pairs chosen by each transmitter (every pair has it as transmitter).
    pub tx_subsets: BTreeMap<usize, BTreeSet<Pair>>,
}

#[derive(Serialize, Deserialize)]
struct Edge {
    receiver: usize,
    transmitter: usize,
    chosen_by: String,
}

impl AlignmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the set from its subsets; `pairs` is their union.
    pub fn from_subsets(rx_subsets: BTreeMap<usize, BTreeSet<Pair>>, tx_subsets: BTreeMap<usize, BTreeSet<Pair>>) -> Self {
        let pairs = rx_subsets.values().chain(tx_subsets.values()).flatten().copied().collect();
        Self { pairs, rx_subsets, tx_subsets }
    }

    /// Every pair is attributed to its receiver.
    pub fn from_pairs<I: IntoIterator<Item = Pair>>(pairs: I) -> Self {
        let mut rx: BTreeMap<usize, BTreeSet<Pair>> = BTreeMap::new();
        for p in pairs {
            rx.entry(p.0).or_default().insert(p);
        }
        Self::from_subsets(rx, BTreeMap::new())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, receiver: usize, transmitter: usize) -> bool {
        self.pairs.contains(&(receiver, transmitter))
    }

    pub fn rx_subset(&self, receiver: usize) -> Option<&BTreeSet<Pair>> {
        self.rx_subsets.get(&receiver)
    }

    pub fn tx_subset(&self, transmitter: usize) -> Option<&BTreeSet<Pair>> {
        self.tx_subsets.get(&transmitter)
    }

    /// Transmitters aligned at a receiver.
    pub fn aligned_at(&self, receiver: usize) -> impl Iterator<Item = usize> + '_ {
        self.pairs.range((receiver, 0)..(receiver + 1, 0)).map(|p| p.1)
    }

    /// JSON edge list `[{receiver, transmitter, chosen_by}]`.
    pub fn to_json(&self) -> Result<String> {
        let mut edges = Vec::with_capacity(self.pairs.len());
        for (&j, subset) in &self.tx_subsets {
            for p in subset {
                edges.push(Edge { receiver: p.0, transmitter: j, chosen_by: "transmitter".into() });
            }
        }
        for (&k, subset) in &self.rx_subsets {
            for p in subset {
                edges.push(Edge { receiver: k, transmitter: p.1, chosen_by: "receiver".into() });
            }
        }
        edges.sort_by_key(|e| (e.receiver, e.transmitter));
        Ok(serde_json::to_string_pretty(&edges)?)
    }
}

/// Whether an LR subset fits the receiver's spare dimensions.
pub fn is_proper_rx(receiver: usize, subset: &BTreeSet<Pair>, config: &NetworkConfig) -> Result<bool> {
    let mut load = 0usize;
    for &(k, j) in subset {
        if k != receiver {
            return Err(GiaError::ForeignPair { receiver: k, transmitter: j });
        }
        load += stream_count(config, j)?;
    }
    let n = *config
        .lr_antennas
        .get(receiver)
        .ok_or_else(|| GiaError::DimensionMismatch(format!("LR {receiver} does not exist")))?;
    Ok(load + config.tx_streams[receiver] <= n)
}

/// Whether a transmitter subset fits the transmitter's spare dimensions.
pub fn is_proper_tx(transmitter: usize, subset: &BTreeSet<Pair>, config: &NetworkConfig) -> Result<bool> {
    let mut load = 0usize;
    for &(k, j) in subset {
        if j != transmitter {
            return Err(GiaError::ForeignPair { receiver: k, transmitter: j });
        }
        if k >= config.num_links {
            return Err(GiaError::DimensionMismatch(format!("LR {k} does not exist")));
        }
        load += config.tx_streams[k];
    }
    let m = *config
        .tx_antennas
        .get(transmitter)
        .ok_or_else(|| GiaError::DimensionMismatch(format!("transmitter {transmitter} does not exist")))?;
    Ok(load + config.tx_streams[transmitter] <= m)
}

fn stream_count(config: &NetworkConfig, tx: usize) -> Result<usize> {
    config
        .tx_streams
        .get(tx)
        .copied()
        .ok_or_else(|| GiaError::DimensionMismatch(format!("transmitter {tx} does not exist")))
}

/// Number of LRs a transmitter can null with its spare antennas.
pub fn max_tx_selections(m_x: usize, d_x: usize, d_l: usize) -> usize {
    assert!(d_l >= 1, "LR stream count must be positive");
    m_x.saturating_sub(d_x) / d_l
}

/// Neighbourhood data shared by selection rules.
pub struct SelectionContext<'a> {
    pub topology: &'a NetworkTopology,
    pub params: &'a StochasticParams,
    pub transmitters: SpatialIndex,
    pub receivers: SpatialIndex,
}

impl<'a> SelectionContext<'a> {
    pub fn new(topology: &'a NetworkTopology, params: &'a StochasticParams) -> Self {
        let cell = params.cutoff_radius();
        Self {
            topology,
            params,
            transmitters: SpatialIndex::new(topology.transmitter_positions().collect(), cell),
            receivers: SpatialIndex::new(topology.lr_positions.clone(), cell),
        }
    }
}

/// Orders candidates for both phases. Candidates must be in range and foreign;
/// implementations only choose the order.
pub trait SelectionCriterion: Sync {
    /// In-range foreign LRs for transmitter `tx`, most preferred first.
    fn rank_receivers(&self, ctx: &SelectionContext<'_>, tx: usize) -> Vec<usize>;
    /// In-range foreign transmitters for LR `lr`, most preferred first.
    fn rank_transmitters(&self, ctx: &SelectionContext<'_>, lr: usize) -> Vec<usize>;
}

/// Nearest first, ties to the smaller id.
#[derive(Clone, Copy, Debug, Default)]
pub struct NearestFirst;

impl SelectionCriterion for NearestFirst {
    fn rank_receivers(&self, ctx: &SelectionContext<'_>, tx: usize) -> Vec<usize> {
        let at = ctx.topology.transmitter_position(tx);
        ctx.receivers
            .within(at, ctx.params.cutoff_radius())
            .into_iter()
            .map(|(k, _)| k)
            .filter(|&k| k != tx)
            .collect()
    }

    fn rank_transmitters(&self, ctx: &SelectionContext<'_>, lr: usize) -> Vec<usize> {
        let at = ctx.topology.lr_positions[lr];
        ctx.transmitters
            .within(at, ctx.params.cutoff_radius())
            .into_iter()
            .map(|(j, _)| j)
            .filter(|&j| j != lr)
            .collect()
    }
}

/// LRs that transmitter `tx` nulls: its preferred ones while its spare
/// antennas allow.
pub fn transmitter_choice(
    ctx: &SelectionContext<'_>,
    config: &NetworkConfig,
    criterion: &dyn SelectionCriterion,
    tx: usize,
) -> BTreeSet<Pair> {
    let mut subset = BTreeSet::new();
    if config.tx_streams[tx] == 0 {
        return subset;
    }
    let budget = config.tx_antennas[tx] - config.tx_streams[tx];
    let mut load = 0;
    for k in criterion.rank_receivers(ctx, tx) {
        let w = config.tx_streams[k];
        if load + w > budget {
            break;
        }
        load += w;
        subset.insert((k, tx));
    }
    subset
}

/// Transmitters that LR `lr` aligns: preferred ones not already nulling it,
/// until its weighted count reaches `N - d - max_d + 1`.
pub fn receiver_choice(
    ctx: &SelectionContext<'_>,
    config: &NetworkConfig,
    covered: &BTreeSet<Pair>,
    criterion: &dyn SelectionCriterion,
    lr: usize,
) -> BTreeSet<Pair> {
    let max_d = config.tx_streams.iter().copied().max().unwrap_or(0);
    let upper = config.lr_antennas[lr] - config.tx_streams[lr];
    let target = (upper + 1).saturating_sub(max_d);
    let mut load = 0;
    let mut subset = BTreeSet::new();
    for j in criterion.rank_transmitters(ctx, lr) {
        if load >= target {
            break;
        }
        let w = config.tx_streams[j];
        if w == 0 || covered.contains(&(lr, j)) || load + w > upper {
            continue;
        }
        load += w;
        subset.insert((lr, j));
    }
    subset
}

/// Transmitter phase over every streaming transmitter.
pub fn transmitter_phase(
    ctx: &SelectionContext<'_>,
    config: &NetworkConfig,
    criterion: &dyn SelectionCriterion,
) -> BTreeMap<usize, BTreeSet<Pair>> {
    (0..config.num_transmitters())
        .into_par_iter()
        .map(|j| (j, transmitter_choice(ctx, config, criterion, j)))
        .filter(|(_, s)| !s.is_empty())
        .collect()
}

/// Receiver phase over every LR, given the transmitter phase's choices.
pub fn receiver_phase(
    ctx: &SelectionContext<'_>,
    config: &NetworkConfig,
    tx_subsets: &BTreeMap<usize, BTreeSet<Pair>>,
    criterion: &dyn SelectionCriterion,
) -> BTreeMap<usize, BTreeSet<Pair>> {
    let covered: BTreeSet<Pair> = tx_subsets.values().flatten().copied().collect();
    (0..config.num_links)
        .into_par_iter()
        .map(|k| (k, receiver_choice(ctx, config, &covered, criterion, k)))
        .filter(|(_, s)| !s.is_empty())
        .collect()
}

/// Two-phase alignment set with the nearest-first rule.
pub fn build_alignment_set(
    topology: &NetworkTopology,
    params: &StochasticParams,
    config: &NetworkConfig,
) -> Result<AlignmentSet> {
    build_alignment_set_with(topology, params, config, &NearestFirst)
}

pub fn build_alignment_set_with(
    topology: &NetworkTopology,
    params: &StochasticParams,
    config: &NetworkConfig,
    criterion: &dyn SelectionCriterion,
) -> Result<AlignmentSet> {
    check_inputs(topology, params, config)?;
    let ctx = SelectionContext::new(topology, params);
    let tx = transmitter_phase(&ctx, config, criterion);
    let rx = receiver_phase(&ctx, config, &tx, criterion);
    Ok(AlignmentSet::from_subsets(rx, tx))
}

pub(crate) fn check_inputs(topology: &NetworkTopology, params: &StochasticParams, config: &NetworkConfig) -> Result<()> {
    if params.d_l == 0 || params.d_l > params.m_l.min(params.n_l) {
        return Err(GiaError::InvalidConfiguration(format!(
            "d_l = {} exceeds min(M_l, N_l) = {}",
            params.d_l,
            params.m_l.min(params.n_l)
        )));
    }
    config.validate()?;
    if config.num_links != topology.num_links() || config.num_transmitters() != topology.num_transmitters() {
        return Err(GiaError::DimensionMismatch("config does not match topology".into()));
    }
    Ok(())
}

/// Every subset proper, subsets pairwise disjoint, union equal to `pairs`.
pub fn verify_coverage(aset: &AlignmentSet, config: &NetworkConfig) -> bool {
    let mut union: BTreeSet<Pair> = BTreeSet::new();
    let mut total = 0usize;
    for (&k, subset) in &aset.rx_subsets {
        if !matches!(is_proper_rx(k, subset, config), Ok(true)) {
            return false;
        }
        total += subset.len();
        union.extend(subset.iter().copied());
    }
    for (&j, subset) in &aset.tx_subsets {
        if !matches!(is_proper_tx(j, subset, config), Ok(true)) {
            return false;
        }
        total += subset.len();
        union.extend(subset.iter().copied());
    }
    let own_link = union.iter().any(|&(k, j)| k == j);
    total == union.len() && union == aset.pairs && !own_link
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ObservationWindow, Point};

    fn single_stream_config(lr_antennas: usize, tx_antennas: usize, links: usize, jammers: usize) -> NetworkConfig {
        let p = StochasticParams { m_l: tx_antennas, n_l: lr_antennas, m_j: tx_antennas, ..Default::default() };
        NetworkConfig::homogeneous(links, jammers, &p, 1.0)
    }

    fn rx_subset(k: usize, txs: std::ops::Range<usize>) -> BTreeSet<Pair> {
        txs.map(|j| (k, j)).collect()
    }

    #[test]
    fn receiver_properness_boundary() {
        let cfg = single_stream_config(8, 16, 1, 8);
        assert!(is_proper_rx(0, &BTreeSet::new(), &cfg).unwrap());
        assert!(is_proper_rx(0, &rx_subset(0, 1..8), &cfg).unwrap());
        assert!(!is_proper_rx(0, &rx_subset(0, 1..9), &cfg).unwrap());
        assert!(matches!(is_proper_rx(0, &rx_subset(1, 1..2), &cfg), Err(GiaError::ForeignPair { .. })));
    }

    #[test]
    fn transmitter_properness_boundary() {
        let cfg = single_stream_config(8, 16, 17, 0);
        assert!(is_proper_tx(0, &BTreeSet::new(), &cfg).unwrap());
        let fifteen: BTreeSet<Pair> = (1..16).map(|k| (k, 0)).collect();
        assert!(is_proper_tx(0, &fifteen, &cfg).unwrap());
        let sixteen: BTreeSet<Pair> = (1..17).map(|k| (k, 0)).collect();
        assert!(!is_proper_tx(0, &sixteen, &cfg).unwrap());
    }

    #[test]
    fn selection_budget() {
        assert_eq!(max_tx_selections(16, 1, 1), 15);
        assert_eq!(max_tx_selections(4, 1, 2), 1);
        assert_eq!(max_tx_selections(3, 3, 1), 0);
    }

    #[test]
    fn lone_pair_has_empty_set() {
        let p = StochasticParams::default();
        let w = ObservationWindow::new(5.0, &p);
        let t = NetworkTopology::new(vec![Point::new(0.0, 0.0)], vec![Point::new(1.0, 0.0)], vec![], vec![Point::new(0.0, 1.5)], w, 0)
            .unwrap();
        let cfg = NetworkConfig::for_topology(&t, &p, 1.0);
        let a = build_alignment_set(&t, &p, &cfg).unwrap();
        assert!(a.is_empty());
        assert!(verify_coverage(&a, &cfg));
    }

    #[test]
    fn transmitter_selects_all_when_few_in_range() {
        // LT 0 with budget 15 and three foreign LRs in range, one out of range.
        let p = StochasticParams { lambda_j: 0.0, ..Default::default() };
        let w = ObservationWindow::new(30.0, &p);
        let lts = vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 6.0), Point::new(-7.0, 0.0), Point::new(30.0, 0.0)];
        let lrs = vec![Point::new(0.0, 1.0), Point::new(3.0, 0.0), Point::new(0.0, 5.0), Point::new(-8.0, 0.0), Point::new(29.0, 0.0)];
        let ers = lts.iter().map(|&b| b + Point::new(1.5, 0.0)).collect();
        let t = NetworkTopology::new(lts, lrs, vec![], ers, w, 0).unwrap();
        let cfg = NetworkConfig::for_topology(&t, &p, 1.0);
        let a = build_alignment_set(&t, &p, &cfg).unwrap();
        let chosen: Vec<usize> = a.tx_subset(0).unwrap().iter().map(|p| p.0).collect();
        assert_eq!(chosen, vec![1, 2, 3]);
        assert!(verify_coverage(&a, &cfg));
    }

    #[test]
    fn coverage_detects_violations() {
        let cfg = single_stream_config(2, 2, 4, 0);
        assert!(verify_coverage(&AlignmentSet::new(), &cfg));
        let bad = AlignmentSet::from_pairs([(0, 1), (0, 2)]);
        assert!(!verify_coverage(&bad, &cfg));
        let good = AlignmentSet::from_pairs([(0, 1)]);
        assert!(verify_coverage(&good, &cfg));
        let mut broken = good.clone();
        broken.pairs.insert((2, 3));
        assert!(!verify_coverage(&broken, &cfg));
        let mut rx = BTreeMap::new();
        rx.insert(0, [(0usize, 1usize)].into_iter().collect::<BTreeSet<_>>());
        let mut tx = BTreeMap::new();
        tx.insert(1, [(0usize, 1usize)].into_iter().collect::<BTreeSet<_>>());
        assert!(!verify_coverage(&AlignmentSet::from_subsets(rx, tx), &cfg));
    }

    #[test]
    fn json_edge_list() {
        let a = AlignmentSet::from_pairs([(0, 1), (2, 0)]);
        let v: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert_eq!(v[0]["transmitter"], 1);
    }
}
