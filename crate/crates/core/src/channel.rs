//! Cutoff pathloss and random MIMO channels.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{GiaError, Result};
use crate::geometry::{NetworkTopology, Point, StochasticParams};
use crate::linalg::{complex_gaussian, zeros, CMat};
use crate::rng::keyed;

/// Amplitude pathloss `d^(-alpha/2)` with the hard cutoff at `theta`.
pub fn pathloss(a: Point, b: Point, alpha: f64, theta: f64) -> Result<f64> {
    let d = a.distance(b);
    if d == 0.0 {
        return Err(GiaError::CoincidentPoints);
    }
    let radius = theta.powf(-2.0 / alpha);
    if d <= radius * (1.0 + 1e-12) {
        Ok(d.powf(-alpha / 2.0))
    } else {
        Ok(0.0)
    }
}

/// Antenna counts, stream counts and powers for every node.
///
/// Transmitter ids are LTs `0..num_links` followed by LJs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_links: usize,
    pub tx_antennas: Vec<usize>,
    pub tx_streams: Vec<usize>,
    pub tx_power: Vec<f64>,
    pub lr_antennas: Vec<usize>,
    pub er_antennas: Vec<usize>,
}

impl NetworkConfig {
    /// Homogeneous configuration: every LT/LR/LJ/ER gets the class values of `params`.
    pub fn homogeneous(num_links: usize, num_jammers: usize, params: &StochasticParams, power: f64) -> Self {
        let mut tx_antennas = vec![params.m_l; num_links];
        tx_antennas.extend(std::iter::repeat_n(params.m_j, num_jammers));
        let mut tx_streams = vec![params.d_l; num_links];
        tx_streams.extend(std::iter::repeat_n(params.d_j, num_jammers));
        Self {
            num_links,
            tx_antennas,
            tx_streams,
            tx_power: vec![power; num_links + num_jammers],
            lr_antennas: vec![params.n_l; num_links],
            er_antennas: vec![params.n_e; num_links],
        }
    }

    pub fn for_topology(topology: &NetworkTopology, params: &StochasticParams, power: f64) -> Self {
        Self::homogeneous(topology.num_links(), topology.num_jammers(), params, power)
    }

    /// Three single-stream 2x2 links plus one 4-antenna single-stream jammer,
    /// eavesdroppers with 3, 2 and 2 antennas.
    pub fn four_node_example(power: f64) -> Self {
        Self {
            num_links: 3,
            tx_antennas: vec![2, 2, 2, 4],
            tx_streams: vec![1, 1, 1, 1],
            tx_power: vec![power; 4],
            lr_antennas: vec![2, 2, 2],
            er_antennas: vec![3, 2, 2],
        }
    }

    pub fn num_transmitters(&self) -> usize {
        self.tx_antennas.len()
    }

    pub fn num_jammers(&self) -> usize {
        self.num_transmitters() - self.num_links
    }

    pub fn is_jammer(&self, tx: usize) -> bool {
        tx >= self.num_links
    }

    pub fn with_power(&self, power: f64) -> Self {
        Self { tx_power: vec![power; self.num_transmitters()], ..self.clone() }
    }

    /// Drops every jammer.
    pub fn without_jammers(&self) -> Self {
        let k = self.num_links;
        Self {
            tx_antennas: self.tx_antennas[..k].to_vec(),
            tx_streams: self.tx_streams[..k].to_vec(),
            tx_power: self.tx_power[..k].to_vec(),
            ..self.clone()
        }
    }

    /// Ratio range of transmit powers to their maximum, `(min/max, 1)`.
    pub fn power_ratio_range(&self) -> (f64, f64) {
        let max = self.tx_power.iter().cloned().fold(0.0, f64::max);
        let min = self.tx_power.iter().cloned().fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            (min / max, 1.0)
        } else {
            (1.0, 1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_transmitters();
        if self.tx_streams.len() != n || self.tx_power.len() != n || self.num_links > n {
            return Err(GiaError::DimensionMismatch("transmitter arrays differ in length".into()));
        }
        if self.lr_antennas.len() != self.num_links || self.er_antennas.len() != self.num_links {
            return Err(GiaError::DimensionMismatch("receiver arrays must have one entry per link".into()));
        }
        for j in 0..n {
            if self.tx_antennas[j] == 0 {
                return Err(GiaError::InvalidConfiguration(format!("transmitter {j} has no antennas")));
            }
            if self.tx_streams[j] > self.tx_antennas[j] {
                return Err(GiaError::InvalidConfiguration(format!("transmitter {j} sends more streams than antennas")));
            }
            if !(self.tx_power[j] >= 0.0 && self.tx_power[j].is_finite()) {
                return Err(GiaError::InvalidConfiguration(format!("transmitter {j} has invalid power")));
            }
        }
        for k in 0..self.num_links {
            let d = self.tx_streams[k];
            if d == 0 || d > self.lr_antennas[k] || self.er_antennas[k] == 0 {
                return Err(GiaError::InvalidConfiguration(format!("link {k} has inconsistent streams/antennas")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Legitimate,
    Eavesdropping,
}

impl Side {
    fn code(self) -> u8 {
        match self {
            Side::Legitimate => 0,
            Side::Eavesdropping => 1,
        }
    }
}

/// Channel matrix `pathloss * H~` with its pathloss.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub pathloss: f64,
    pub matrix: CMat,
}

/// Which large-scale model generates the links.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathlossModel {
    /// Hard cutoff: links beyond the cutoff radius are exactly zero.
    Cutoff,
    /// Plain `d^(-alpha/2)` decay, truncated at `radius` to keep storage finite.
    NoCutoff { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelOptions {
    pub model: PathlossModel,
    /// Restrict eavesdropping channels to these links (all when `None`).
    pub eavesdroppers: Option<Vec<usize>>,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self { model: PathlossModel::Cutoff, eavesdroppers: None }
    }
}

/// Sparse per-receiver channel store; absent links are exact zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    legit: Vec<BTreeMap<usize, Link>>,
    eaves: Vec<BTreeMap<usize, Link>>,
    tx_antennas: Vec<usize>,
    lr_antennas: Vec<usize>,
    er_antennas: Vec<usize>,
}

impl ChannelSet {
    pub fn empty(config: &NetworkConfig) -> Self {
        Self {
            legit: vec![BTreeMap::new(); config.num_links],
            eaves: vec![BTreeMap::new(); config.num_links],
            tx_antennas: config.tx_antennas.clone(),
            lr_antennas: config.lr_antennas.clone(),
            er_antennas: config.er_antennas.clone(),
        }
    }

    /// Every receiver hears every transmitter with unit pathloss.
    pub fn fully_connected(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut set = Self::empty(config);
        for side in [Side::Legitimate, Side::Eavesdropping] {
            for rx in 0..config.num_links {
                for tx in 0..config.num_transmitters() {
                    let matrix = draw(seed, side, rx, tx, set.rx_antennas(side, rx), config.tx_antennas[tx], 1.0);
                    set.insert(side, rx, tx, Link { pathloss: 1.0, matrix })?;
                }
            }
        }
        Ok(set)
    }

    pub fn num_links(&self) -> usize {
        self.legit.len()
    }

    pub fn num_transmitters(&self) -> usize {
        self.tx_antennas.len()
    }

    pub fn rx_antennas(&self, side: Side, rx: usize) -> usize {
        match side {
            Side::Legitimate => self.lr_antennas[rx],
            Side::Eavesdropping => self.er_antennas[rx],
        }
    }

    pub fn tx_antennas(&self, tx: usize) -> usize {
        self.tx_antennas[tx]
    }

    fn store(&self, side: Side) -> &Vec<BTreeMap<usize, Link>> {
        match side {
            Side::Legitimate => &self.legit,
            Side::Eavesdropping => &self.eaves,
        }
    }

    pub fn insert(&mut self, side: Side, rx: usize, tx: usize, link: Link) -> Result<()> {
        if rx >= self.num_links() || tx >= self.num_transmitters() {
            return Err(GiaError::DimensionMismatch(format!("link ({rx}, {tx}) outside the network")));
        }
        let shape = (self.rx_antennas(side, rx), self.tx_antennas[tx]);
        if link.matrix.shape() != shape {
            return Err(GiaError::DimensionMismatch(format!(
                "link ({rx}, {tx}) has shape {:?}, expected {shape:?}",
                link.matrix.shape()
            )));
        }
        let store = match side {
            Side::Legitimate => &mut self.legit,
            Side::Eavesdropping => &mut self.eaves,
        };
        store[rx].insert(tx, link);
        Ok(())
    }

    pub fn link(&self, side: Side, rx: usize, tx: usize) -> Option<&Link> {
        self.store(side).get(rx).and_then(|m| m.get(&tx))
    }

    /// Channel matrix, zeros when the link is absent.
    pub fn matrix(&self, side: Side, rx: usize, tx: usize) -> CMat {
        self.link(side, rx, tx)
            .map(|l| l.matrix.clone())
            .unwrap_or_else(|| zeros(self.rx_antennas(side, rx), self.tx_antennas[tx]))
    }

    pub fn pathloss(&self, side: Side, rx: usize, tx: usize) -> f64 {
        self.link(side, rx, tx).map_or(0.0, |l| l.pathloss)
    }

    /// Stored links at one receiver, ordered by transmitter id.
    pub fn links(&self, side: Side, rx: usize) -> impl Iterator<Item = (usize, &Link)> {
        self.store(side)[rx].iter().map(|(&tx, l)| (tx, l))
    }

    pub fn link_count(&self) -> usize {
        self.legit.iter().chain(self.eaves.iter()).map(|m| m.len()).sum()
    }

    /// Writes the little-endian dump described in [`dump`].
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(dump::CHANNEL_MAGIC)?;
        dump::write_counts(&mut w, &self.tx_antennas)?;
        dump::write_counts(&mut w, &self.lr_antennas)?;
        dump::write_counts(&mut w, &self.er_antennas)?;
        dump::write_u64(&mut w, self.link_count() as u64)?;
        for side in [Side::Legitimate, Side::Eavesdropping] {
            for (rx, map) in self.store(side).iter().enumerate() {
                for (&tx, link) in map {
                    w.write_all(&[side.code()])?;
                    dump::write_u64(&mut w, rx as u64)?;
                    dump::write_u64(&mut w, tx as u64)?;
                    w.write_all(&link.pathloss.to_le_bytes())?;
                    dump::write_matrix(&mut w, &link.matrix)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != dump::CHANNEL_MAGIC {
            return Err(GiaError::MalformedDump("bad magic".into()));
        }
        let tx_antennas = dump::read_counts(&mut r)?;
        let lr_antennas = dump::read_counts(&mut r)?;
        let er_antennas = dump::read_counts(&mut r)?;
        if lr_antennas.len() != er_antennas.len() {
            return Err(GiaError::MalformedDump("receiver counts disagree".into()));
        }
        let mut set = Self {
            legit: vec![BTreeMap::new(); lr_antennas.len()],
            eaves: vec![BTreeMap::new(); lr_antennas.len()],
            tx_antennas,
            lr_antennas,
            er_antennas,
        };
        let count = dump::read_u64(&mut r)?;
        for _ in 0..count {
            let mut code = [0u8; 1];
            r.read_exact(&mut code)?;
            let side = match code[0] {
                0 => Side::Legitimate,
                1 => Side::Eavesdropping,
                c => return Err(GiaError::MalformedDump(format!("unknown side tag {c}"))),
            };
            let rx = dump::read_u64(&mut r)? as usize;
            let tx = dump::read_u64(&mut r)? as usize;
            let pathloss = dump::read_f64(&mut r)?;
            let matrix = dump::read_matrix(&mut r)?;
            set.insert(side, rx, tx, Link { pathloss, matrix })
                .map_err(|e| GiaError::MalformedDump(e.to_string()))?;
        }
        Ok(set)
    }
}

fn draw(seed: u64, side: Side, rx: usize, tx: usize, rows: usize, cols: usize, pathloss: f64) -> CMat {
    let mut rng = keyed(seed, &[side.code() as u64, rx as u64, tx as u64]);
    complex_gaussian(rows, cols, &mut rng) * crate::linalg::real(pathloss)
}

/// Samples every in-range channel of the topology with the cutoff model.
pub fn sample_channels(
    topology: &NetworkTopology,
    config: &NetworkConfig,
    params: &StochasticParams,
    seed: u64,
) -> Result<ChannelSet> {
    sample_channels_with(topology, config, params, seed, &ChannelOptions::default())
}

/// Samples channels with an explicit pathloss model and eavesdropper subset.
///
/// Each matrix is drawn from its own stream keyed by (side, receiver,
/// transmitter), so restricting the eavesdropper set or the model radius does
/// not change the draws of the links that remain.
pub fn sample_channels_with(
    topology: &NetworkTopology,
    config: &NetworkConfig,
    params: &StochasticParams,
    seed: u64,
    options: &ChannelOptions,
) -> Result<ChannelSet> {
    config.validate()?;
    if config.num_links != topology.num_links() || config.num_transmitters() != topology.num_transmitters() {
        return Err(GiaError::DimensionMismatch(format!(
            "topology has {} links / {} transmitters, config {} / {}",
            topology.num_links(),
            topology.num_transmitters(),
            config.num_links,
            config.num_transmitters()
        )));
    }
    let reach = match options.model {
        PathlossModel::Cutoff => params.cutoff_radius(),
        PathlossModel::NoCutoff { radius } => radius.max(params.cutoff_radius()),
    };
    let index = crate::geometry::SpatialIndex::new(topology.transmitter_positions().collect(), reach);
    let gain = |d: f64| -> f64 {
        match options.model {
            PathlossModel::Cutoff => {
                if params.in_range(d) {
                    d.powf(-params.alpha / 2.0)
                } else {
                    0.0
                }
            }
            PathlossModel::NoCutoff { .. } => d.powf(-params.alpha / 2.0),
        }
    };

    let mut set = ChannelSet::empty(config);
    let fill = |side: Side, rx: usize, at: Point, set: &mut ChannelSet| -> Result<()> {
        for (tx, d) in index.within(at, reach) {
            if d == 0.0 {
                return Err(GiaError::CoincidentPoints);
            }
            let l = gain(d);
            if l > 0.0 {
                let matrix = draw(seed, side, rx, tx, set.rx_antennas(side, rx), config.tx_antennas[tx], l);
                set.insert(side, rx, tx, Link { pathloss: l, matrix })?;
            }
        }
        Ok(())
    };
    for k in 0..topology.num_links() {
        fill(Side::Legitimate, k, topology.lr_positions[k], &mut set)?;
    }
    let ers: Vec<usize> = match &options.eavesdroppers {
        Some(list) => list.clone(),
        None => (0..topology.num_links()).collect(),
    };
    for k in ers {
        if k >= topology.num_links() {
            return Err(GiaError::DimensionMismatch(format!("eavesdropper {k} does not exist")));
        }
        fill(Side::Eavesdropping, k, topology.er_positions[k], &mut set)?;
    }
    Ok(set)
}

/// Little-endian binary layout shared by channel and transceiver dumps.
///
/// A count list is a `u64` length followed by `u64` entries. A matrix is `u64`
/// rows, `u64` cols, then `rows * cols` pairs of `f64` (real, imaginary) in
/// column-major order. A channel dump is the magic `GIACHAN1`, the count lists
/// for transmitter, LR and ER antennas, a `u64` link count, then per link a
/// side byte (0 legitimate, 1 eavesdropping), `u64` receiver, `u64`
/// transmitter, `f64` pathloss and the matrix.
pub mod dump {
    use super::*;

    pub const CHANNEL_MAGIC: &[u8; 8] = b"GIACHAN1";
    pub const TRANSCEIVER_MAGIC: &[u8; 8] = b"GIATRX01";

    pub fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
        w.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn write_counts<W: Write>(w: &mut W, v: &[usize]) -> Result<()> {
        write_u64(w, v.len() as u64)?;
        for &x in v {
            write_u64(w, x as u64)?;
        }
        Ok(())
    }

    pub fn read_counts<R: Read>(r: &mut R) -> Result<Vec<usize>> {
        let n = read_u64(r)?;
        if n > 1 << 32 {
            return Err(GiaError::MalformedDump(format!("implausible count {n}")));
        }
        (0..n).map(|_| read_u64(r).map(|x| x as usize)).collect()
    }

    pub fn write_matrix<W: Write>(w: &mut W, m: &CMat) -> Result<()> {
        write_u64(w, m.nrows() as u64)?;
        write_u64(w, m.ncols() as u64)?;
        for z in m.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_matrix<R: Read>(r: &mut R) -> Result<CMat> {
        let rows = read_u64(r)? as usize;
        let cols = read_u64(r)? as usize;
        if rows.saturating_mul(cols) > 1 << 28 {
            return Err(GiaError::MalformedDump(format!("implausible shape {rows}x{cols}")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let re = read_f64(r)?;
            let im = read_f64(r)?;
            data.push(num_complex::Complex64::new(re, im));
        }
        Ok(CMat::from_vec(rows, cols, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_topology, ObservationWindow};

    #[test]
    fn pathloss_examples() {
        let o = Point::new(0.0, 0.0);
        assert!((pathloss(o, Point::new(2.0, 0.0), 4.0, 1e-2).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(pathloss(o, Point::new(20.0, 0.0), 4.0, 1e-2).unwrap(), 0.0);
        assert!((pathloss(o, Point::new(10.0, 0.0), 4.0, 1e-2).unwrap() - 0.01).abs() < 1e-15);
        assert!(matches!(pathloss(o, o, 4.0, 1e-2), Err(GiaError::CoincidentPoints)));
    }

    #[test]
    fn support_and_shape_match_pathloss() {
        let p = StochasticParams::default();
        let t = sample_topology(&p, ObservationWindow::new(15.0, &p), 4).unwrap();
        let cfg = NetworkConfig::for_topology(&t, &p, 100.0);
        let ch = sample_channels(&t, &cfg, &p, 8).unwrap();
        for k in 0..t.num_links().min(20) {
            for j in 0..t.num_transmitters() {
                let l = pathloss(t.lr_positions[k], t.transmitter_position(j), p.alpha, p.theta).unwrap();
                let m = ch.matrix(Side::Legitimate, k, j);
                assert_eq!(m.shape(), (p.n_l, cfg.tx_antennas[j]));
                assert_eq!(l > 0.0, m.norm() > 0.0);
                assert!((ch.pathloss(Side::Legitimate, k, j) - l).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn subset_sampling_keeps_draws() {
        let p = StochasticParams::default();
        let t = sample_topology(&p, ObservationWindow::new(15.0, &p), 4).unwrap();
        let cfg = NetworkConfig::for_topology(&t, &p, 1.0);
        let all = sample_channels(&t, &cfg, &p, 3).unwrap();
        let opts = ChannelOptions { eavesdroppers: Some(vec![0]), ..Default::default() };
        let some = sample_channels_with(&t, &cfg, &p, 3, &opts).unwrap();
        for j in 0..t.num_transmitters() {
            assert_eq!(all.matrix(Side::Eavesdropping, 0, j), some.matrix(Side::Eavesdropping, 0, j));
            assert_eq!(all.matrix(Side::Legitimate, 1, j), some.matrix(Side::Legitimate, 1, j));
        }
        if t.num_links() > 1 {
            assert_eq!(some.links(Side::Eavesdropping, 1).count(), 0);
        }
    }

    #[test]
    fn no_cutoff_extends_support() {
        let p = StochasticParams::default();
        let t = sample_topology(&p, ObservationWindow::new(15.0, &p), 4).unwrap();
        let cfg = NetworkConfig::for_topology(&t, &p, 1.0);
        let cut = sample_channels(&t, &cfg, &p, 3).unwrap();
        let opts = ChannelOptions { model: PathlossModel::NoCutoff { radius: 20.0 }, eavesdroppers: None };
        let full = sample_channels_with(&t, &cfg, &p, 3, &opts).unwrap();
        assert!(full.link_count() > cut.link_count());
        for (tx, link) in cut.links(Side::Legitimate, 0) {
            assert_eq!(full.link(Side::Legitimate, 0, tx), Some(link));
        }
    }

    #[test]
    fn binary_roundtrip() {
        let cfg = NetworkConfig::four_node_example(100.0);
        let ch = ChannelSet::fully_connected(&cfg, 1).unwrap();
        let mut buf = Vec::new();
        ch.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"GIACHAN1");
        let back = ChannelSet::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, ch);
        assert!(ChannelSet::read_binary(&buf[..20]).is_err());
    }

    #[test]
    fn rejects_mismatched_config() {
        let p = StochasticParams::default();
        let t = sample_topology(&p, ObservationWindow::new(15.0, &p), 4).unwrap();
        let cfg = NetworkConfig::homogeneous(t.num_links() + 1, t.num_jammers(), &p, 1.0);
        assert!(matches!(sample_channels(&t, &cfg, &p, 0), Err(GiaError::DimensionMismatch(_))));
    }
}
