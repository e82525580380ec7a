use std::collections::BTreeMap;

use crate::channel::{ChannelSet, NetworkConfig, Side};
use crate::error::{GiaError, Result};
use crate::linalg::{is_finite, real, CMat};

/// Receive covariance `I + sum_j (P_j/d_j) H_j V_j V_j^H H_j^H` over every
/// stored link at a receiver.
pub(crate) fn receive_covariance(
    channels: &ChannelSet,
    precoders: &BTreeMap<usize, CMat>,
    config: &NetworkConfig,
    side: Side,
    rx: usize,
) -> CMat {
    let n = channels.rx_antennas(side, rx);
    let mut columns: Vec<CMat> = Vec::new();
    for (j, link) in channels.links(side, rx) {
        if let Some(v) = precoders.get(&j) {
            if v.ncols() == 0 {
                continue;
            }
            let scale = (config.tx_power[j] / v.ncols() as f64).sqrt();
            columns.push(&link.matrix * v * real(scale));
        }
    }
    let width = columns.iter().map(|c| c.ncols()).sum();
    let mut stacked = CMat::zeros(n, width);
    let mut at = 0;
    for c in columns {
        stacked.columns_mut(at, c.ncols()).copy_from(&c);
        at += c.ncols();
    }
    CMat::identity(n, n) + &stacked * stacked.adjoint()
}

/// Linear MMSE decoder of ER `er` for its own LT's streams, columns normalized.
pub fn mmse_decoder(
    channels: &ChannelSet,
    precoders: &BTreeMap<usize, CMat>,
    config: &NetworkConfig,
    er: usize,
) -> Result<CMat> {
    if er >= config.num_links {
        return Err(GiaError::DimensionMismatch(format!("ER {er} has no associated LT")));
    }
    let n = channels.rx_antennas(Side::Eavesdropping, er);
    let d = config.tx_streams[er];
    let own = match precoders.get(&er) {
        Some(v) => v,
        None => return Ok(CMat::zeros(n, d)),
    };
    let cov = receive_covariance(channels, precoders, config, Side::Eavesdropping, er);
    if !is_finite(&cov) {
        return Err(GiaError::NonFinite("eavesdropper covariance"));
    }
    let desired = channels.matrix(Side::Eavesdropping, er, er) * own;
    let chol = nalgebra::Cholesky::new(cov).ok_or(GiaError::NonFinite("eavesdropper covariance"))?;
    let mut u = chol.solve(&desired);
    for mut col in u.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= real(norm);
        }
    }
    Ok(u)
}

pub fn mmse_decoders<I: IntoIterator<Item = usize>>(
    channels: &ChannelSet,
    precoders: &BTreeMap<usize, CMat>,
    config: &NetworkConfig,
    ers: I,
) -> Result<BTreeMap<usize, CMat>> {
    ers.into_iter()
        .map(|k| mmse_decoder(channels, precoders, config, k).map(|u| (k, u)))
        .collect()
}
