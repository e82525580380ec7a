//! Precoders and decoders: closed-form four-node strategies, the leakage
//! solver, baselines, MMSE eavesdropper decoders and constraint checks.

mod baseline;
mod case_study;
mod mmse;
mod newton;
mod solver;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::alignment::{AlignmentSet, Pair};
use crate::channel::{dump, ChannelSet, Side};
use crate::error::{GiaError, Result};
use crate::linalg::CMat;


pub use baseline::{design_baseline, design_baseline_with, with_artificial_noise, Baseline};
pub use case_study::{design_case_study, targeted_pairs, CaseStrategy};
pub use mmse::{mmse_decoder, mmse_decoders};
pub use solver::{design_gia, GiaSolver, SolveReport};

/// Relative singular-value threshold for rank checks.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransceiverSet {
    /// `M_j x d_j`, orthonormal columns (all-zero for a silent node).
    pub precoders: BTreeMap<usize, CMat>,
    /// `N_k x d_k`.
    pub lr_decoders: BTreeMap<usize, CMat>,
    /// `N^e_k x d_k`.
    pub er_decoders: BTreeMap<usize, CMat>,
}

impl TransceiverSet {
    pub fn precoder(&self, tx: usize) -> Option<&CMat> {
        self.precoders.get(&tx)
    }

    /// Whether a transmitter actually radiates.
    pub fn is_active(&self, tx: usize) -> bool {
        self.precoders.get(&tx).is_some_and(|v| v.ncols() > 0 && v.norm() > 0.0)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(dump::TRANSCEIVER_MAGIC)?;
        for map in [&self.precoders, &self.lr_decoders, &self.er_decoders] {
            dump::write_u64(&mut w, map.len() as u64)?;
            for (&id, m) in map {
                dump::write_u64(&mut w, id as u64)?;
                dump::write_matrix(&mut w, m)?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != dump::TRANSCEIVER_MAGIC {
            return Err(GiaError::MalformedDump("bad magic".into()));
        }
        let mut maps: Vec<BTreeMap<usize, CMat>> = Vec::with_capacity(3);
        for _ in 0..3 {
            let n = dump::read_u64(&mut r)?;
            let mut map = BTreeMap::new();
            for _ in 0..n {
                let id = dump::read_u64(&mut r)? as usize;
                map.insert(id, dump::read_matrix(&mut r)?);
            }
            maps.push(map);
        }
        let er_decoders = maps.pop().unwrap_or_default();
        let lr_decoders = maps.pop().unwrap_or_default();
        let precoders = maps.pop().unwrap_or_default();
        Ok(Self { precoders, lr_decoders, er_decoders })
    }
}

/// Residual leakage and rank checks for a transceiver design.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintReport {
    /// `||U_k^H H_kj V_j||_F` for each aligned pair.
    pub residuals: BTreeMap<Pair, f64>,
    /// `rank(U_k^H H_kk V_k) = d_k` per LR.
    pub direct_rank_ok: BTreeMap<usize, bool>,
    /// `rank(V_j) = d_j` per jammer.
    pub jammer_rank_ok: BTreeMap<usize, bool>,
    pub max_leakage: f64,
}

impl ConstraintReport {
    pub fn ranks_ok(&self) -> bool {
        self.direct_rank_ok.values().chain(self.jammer_rank_ok.values()).all(|&ok| ok)
    }

    pub fn satisfied(&self, tol: f64) -> bool {
        self.max_leakage <= tol && self.ranks_ok()
    }
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn numerical_rank(m: &CMat, rank_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().singular_values();
    let largest = s.iter().cloned().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rank_tol * largest).count()
}

fn leakage(tset: &TransceiverSet, channels: &ChannelSet, k: usize, j: usize) -> f64 {
    match (tset.lr_decoders.get(&k), tset.precoders.get(&j), channels.link(Side::Legitimate, k, j)) {
        (Some(u), Some(v), Some(link)) => (u.adjoint() * &link.matrix * v).norm(),
        _ => 0.0,
    }
}

/// Evaluates every alignment residual and rank condition. Jammers are the
/// transmitters without a paired LR (`id >= channels.num_links()`).
pub fn verify_gia_constraints(
    tset: &TransceiverSet,
    channels: &ChannelSet,
    aset: &AlignmentSet,
    rank_tol: f64,
) -> ConstraintReport {
    let mut report = ConstraintReport::default();
    for &(k, j) in &aset.pairs {
        let r = leakage(tset, channels, k, j);
        report.max_leakage = report.max_leakage.max(r);
        report.residuals.insert((k, j), r);
    }
    for k in 0..channels.num_links() {
        let ok = match (tset.lr_decoders.get(&k), tset.precoders.get(&k)) {
            (Some(u), Some(v)) => {
                let eff = u.adjoint() * channels.matrix(Side::Legitimate, k, k) * v;
                numerical_rank(&eff, rank_tol) == v.ncols() && v.ncols() > 0
            }
            _ => false,
        };
        report.direct_rank_ok.insert(k, ok);
    }
    for j in channels.num_links()..channels.num_transmitters() {
        let ok = tset.precoders.get(&j).is_some_and(|v| numerical_rank(v, rank_tol) == v.ncols());
        report.jammer_rank_ok.insert(j, ok);
    }
    report
}

/// Cross links whose leakage is below `tol` relative to their pathloss: the
/// alignment the design actually achieves, including incidental nulls.
pub fn effective_alignment(tset: &TransceiverSet, channels: &ChannelSet, tol: f64) -> AlignmentSet {
    let mut pairs = Vec::new();
    for k in 0..channels.num_links() {
        for (j, link) in channels.links(Side::Legitimate, k) {
            if j == k || link.pathloss == 0.0 || !tset.is_active(j) {
                continue;
            }
            if leakage(tset, channels, k, j) <= tol * link.pathloss {
                pairs.push((k, j));
            }
        }
    }
    AlignmentSet::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NetworkConfig;
    use crate::linalg::zeros;

    #[test]
    fn zero_precoder_fails_direct_rank() {
        let cfg = NetworkConfig::four_node_example(100.0);
        let ch = ChannelSet::fully_connected(&cfg, 3).unwrap();
        let tset = design_case_study(CaseStrategy::D, &ch, &cfg, 1).unwrap();
        let mut broken = tset.clone();
        broken.precoders.insert(0, zeros(2, 1));
        let report = verify_gia_constraints(&broken, &ch, &AlignmentSet::new(), RANK_TOL);
        assert!(!report.direct_rank_ok[&0]);
        assert!(report.direct_rank_ok[&1]);
    }

    #[test]
    fn transceiver_dump_roundtrip() {
        let cfg = NetworkConfig::four_node_example(100.0);
        let ch = ChannelSet::fully_connected(&cfg, 3).unwrap();
        let tset = design_case_study(CaseStrategy::C, &ch, &cfg, 1).unwrap();
        let mut buf = Vec::new();
        tset.write_binary(&mut buf).unwrap();
        assert_eq!(TransceiverSet::read_binary(buf.as_slice()).unwrap(), tset);
    }
}
