use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mmse_decoders, TransceiverSet};
use crate::channel::{ChannelSet, NetworkConfig, Side};
use crate::error::{GiaError, Result};
use crate::linalg::{dominant_eigenvector, null_space, random_orthonormal, real, zeros, CMat};
use crate::rng::{streams, substream};

/// Closed-form designs for the four-transmitter example network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseStrategy {
    /// Zero forcing between LTs 1 and 2; LT 3 and the jammer stay silent.
    A,
    /// Cyclic zero forcing among three LTs; jammer silent.
    B,
    /// Interference alignment among three LTs; jammer silent.
    C,
    /// Alignment plus a jammer precoder invisible at every LR.
    D,
}

impl CaseStrategy {
    pub const ALL: [CaseStrategy; 4] = [CaseStrategy::A, CaseStrategy::B, CaseStrategy::C, CaseStrategy::D];

    pub fn label(self) -> &'static str {
        match self {
            CaseStrategy::A => "A",
            CaseStrategy::B => "B",
            CaseStrategy::C => "C",
            CaseStrategy::D => "D",
        }
    }
}

fn check_example(config: &NetworkConfig) -> Result<()> {
    let ok = config.num_links == 3
        && config.tx_antennas == [2, 2, 2, 4]
        && config.tx_streams == [1, 1, 1, 1]
        && config.lr_antennas == [2, 2, 2]
        && config.er_antennas.len() == 3;
    if ok {
        Ok(())
    } else {
        Err(GiaError::InvalidConfiguration("closed forms need three 2x2 single-stream links and one 4-antenna jammer".into()))
    }
}

/// Unit decoder on two antennas orthogonal to `g`: `Z conj(g)` with `Z = [[0, -1], [1, 0]]`.
fn zf_decoder(g: &CMat) -> CMat {
    let u = CMat::from_column_slice(2, 1, &[-g[(1, 0)].conj(), g[(0, 0)].conj()]);
    let n = u.norm();
    if n > 0.0 {
        u / real(n)
    } else {
        u
    }
}

fn unit(v: CMat) -> CMat {
    let n = v.norm();
    v / real(n)
}

fn inverse(m: &CMat) -> Result<CMat> {
    m.clone().try_inverse().ok_or(GiaError::NonFinite("singular 2x2 channel"))
}

/// Transceivers of one strategy. `seed` drives the random precoders of A and B;
/// eavesdropper decoders are MMSE at the configured powers.
pub fn design_case_study(
    strategy: CaseStrategy,
    channels: &ChannelSet,
    config: &NetworkConfig,
    seed: u64,
) -> Result<TransceiverSet> {
    check_example(config)?;
    let h = |k: usize, j: usize| channels.matrix(Side::Legitimate, k, j);
    let mut rng = substream(seed, streams::CASE_STUDY);
    let mut v: Vec<CMat> = vec![zeros(2, 1), zeros(2, 1), zeros(2, 1), zeros(4, 1)];
    let mut u: Vec<CMat> = vec![zeros(2, 1), zeros(2, 1), zeros(2, 1)];

    match strategy {
        CaseStrategy::A => {
            v[0] = random_orthonormal(2, 1, &mut rng);
            v[1] = random_orthonormal(2, 1, &mut rng);
            u[0] = zf_decoder(&(h(0, 1) * &v[1]));
            u[1] = zf_decoder(&(h(1, 0) * &v[0]));
        }
        CaseStrategy::B => {
            for vk in v.iter_mut().take(3) {
                *vk = random_orthonormal(2, 1, &mut rng);
            }
            u[0] = zf_decoder(&(h(0, 1) * &v[1]));
            u[1] = zf_decoder(&(h(1, 2) * &v[2]));
            u[2] = zf_decoder(&(h(2, 0) * &v[0]));
        }
        CaseStrategy::C | CaseStrategy::D => {
            let chain = inverse(&h(2, 0))? * h(2, 1) * inverse(&h(0, 1))? * h(0, 2) * inverse(&h(1, 2))? * h(1, 0);
            v[0] = unit(dominant_eigenvector(&chain)?);
            v[1] = unit(inverse(&h(2, 1))? * h(2, 0) * &v[0]);
            v[2] = unit(inverse(&h(1, 2))? * h(1, 0) * &v[0]);
            u[0] = zf_decoder(&(h(0, 1) * &v[1]));
            u[1] = zf_decoder(&(h(1, 2) * &v[2]));
            u[2] = zf_decoder(&(h(2, 0) * &v[0]));
            if strategy == CaseStrategy::D {
                let rows = CMat::from_fn(3, 4, |k, c| (u[k].adjoint() * h(k, 3))[(0, c)]);
                let null = null_space(&rows, 1e-12);
                if null.ncols() == 0 {
                    return Err(GiaError::NonFinite("jammer null space"));
                }
                v[3] = null.columns(0, 1).into_owned();
            }
        }
    }

    let precoders: BTreeMap<usize, CMat> = v.into_iter().enumerate().collect();
    let lr_decoders: BTreeMap<usize, CMat> = u.into_iter().enumerate().collect();
    let er_decoders = mmse_decoders(channels, &precoders, config, 0..3)?;
    Ok(TransceiverSet { precoders, lr_decoders, er_decoders })
}

/// Cross links each strategy nulls at the LRs, as `(LR, transmitter)` pairs.
pub fn targeted_pairs(strategy: CaseStrategy) -> Vec<(usize, usize)> {
    match strategy {
        CaseStrategy::A => vec![(0, 1), (1, 0)],
        CaseStrategy::B => vec![(0, 1), (1, 2), (2, 0)],
        CaseStrategy::C => vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)],
        CaseStrategy::D => vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1), (0, 3), (1, 3), (2, 3)],
    }
}
