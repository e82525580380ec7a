//! Poisson topologies for wiretap networks and geometric summaries.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{GiaError, Result};
use crate::rng::{streams, substream};

/// Relative slack on the cutoff radius so that a node placed exactly on the
/// cutoff circle stays in range despite rounding in `powf`.
const RANGE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

/// Distribution of the displacement between a transmitter and its receiver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OffsetDistribution {
    /// Uniform direction, constant length.
    FixedNorm { norm: f64 },
    /// Uniform over a disc.
    UniformDisc { radius: f64 },
}

impl OffsetDistribution {
    pub fn max_norm(&self) -> f64 {
        match *self {
            OffsetDistribution::FixedNorm { norm } => norm,
            OffsetDistribution::UniformDisc { radius } => radius,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let angle = 2.0 * PI * rng.gen::<f64>();
        let radius = match *self {
            OffsetDistribution::FixedNorm { norm } => norm,
            OffsetDistribution::UniformDisc { radius } => radius * rng.gen::<f64>().sqrt(),
        };
        Point::polar(radius, angle)
    }
}

/// Parameters of the stochastic network model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StochasticParams {
    pub alpha: f64,
    pub theta: f64,
    pub lambda_l: f64,
    pub lambda_j: f64,
    pub lr_offset: OffsetDistribution,
    pub er_offset: OffsetDistribution,
    pub m_l: usize,
    pub n_l: usize,
    pub m_j: usize,
    pub n_e: usize,
    pub d_l: usize,
    pub d_j: usize,
}

impl Default for StochasticParams {
    /// Dense jamming scenario: 16-antenna transmitters and jammers, 8-antenna
    /// receivers, 32-antenna eavesdroppers, one stream each.
    fn default() -> Self {
        Self {
            alpha: 4.0,
            theta: 1e-2,
            lambda_l: 4e-2,
            lambda_j: 9e-2,
            lr_offset: OffsetDistribution::FixedNorm { norm: 1.0 },
            er_offset: OffsetDistribution::FixedNorm { norm: 1.5 },
            m_l: 16,
            n_l: 8,
            m_j: 16,
            n_e: 32,
            d_l: 1,
            d_j: 1,
        }
    }
}

impl StochasticParams {
    /// Largest distance at which a link survives the pathloss cutoff.
    pub fn cutoff_radius(&self) -> f64 {
        self.theta.powf(-2.0 / self.alpha)
    }

    /// Whether a link of the given length is inside the cutoff (boundary included).
    pub fn in_range(&self, distance: f64) -> bool {
        distance <= self.cutoff_radius() * (1.0 + RANGE_SLACK)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GiaError::InvalidParameter(m.to_string()));
        if !(2.0..=4.0).contains(&self.alpha) {
            return bad("alpha must lie in [2, 4]");
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return bad("theta must be positive");
        }
        if !(self.lambda_l >= 0.0 && self.lambda_j >= 0.0) || !self.lambda_l.is_finite() || !self.lambda_j.is_finite() {
            return bad("densities must be non-negative and finite");
        }
        if self.m_l == 0 || self.n_l == 0 || self.m_j == 0 || self.n_e == 0 {
            return bad("antenna counts must be positive");
        }
        if self.d_l == 0 || self.d_l > self.m_l.min(self.n_l) {
            return bad("d_l must satisfy 1 <= d_l <= min(M_l, N_l)");
        }
        if self.d_j > self.m_j {
            return bad("d_j must not exceed M_j");
        }
        let bound = self.cutoff_radius();
        for dist in [self.lr_offset, self.er_offset] {
            if !self.in_range(dist.max_norm()) || dist.max_norm() < 0.0 {
                return Err(GiaError::OffsetOutOfRange { norm: dist.max_norm(), bound });
            }
        }
        Ok(())
    }

    /// Transmitter-phase budgets (LT, LJ).
    pub fn max_tx_selections(&self) -> (usize, usize) {
        (
            crate::alignment::max_tx_selections(self.m_l, self.d_l, self.d_l),
            crate::alignment::max_tx_selections(self.m_j, self.d_j, self.d_l),
        )
    }
}

/// Expected number of LTs and LJs inside the interference footprint of a receiver.
pub fn connection_density(params: &StochasticParams) -> (f64, f64) {
    let area = PI * params.theta.powf(-4.0 / params.alpha);
    (area * params.lambda_l, area * params.lambda_j)
}

/// Finite proxy for the infinite plane: statistics come from receivers in the
/// inner disc, nodes are sampled in the padded disc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub observation_radius: f64,
    pub guard_width: f64,
}

impl ObservationWindow {
    /// Window with the minimal guard of one cutoff radius.
    pub fn new(observation_radius: f64, params: &StochasticParams) -> Self {
        Self { observation_radius, guard_width: params.cutoff_radius() }
    }

    /// Guard wide enough that alignment decisions (which look two footprints
    /// away) near the inner disc are unaffected by the boundary.
    pub fn for_alignment(observation_radius: f64, params: &StochasticParams) -> Self {
        let offsets = params.lr_offset.max_norm().max(params.er_offset.max_norm());
        Self { observation_radius, guard_width: 2.0 * params.cutoff_radius() + 2.0 * offsets }
    }

    pub fn padded_radius(&self) -> f64 {
        self.observation_radius + self.guard_width
    }

    pub fn padded_area(&self) -> f64 {
        PI * self.padded_radius().powi(2)
    }

    pub fn observes(&self, p: Point) -> bool {
        p.norm() <= self.observation_radius
    }

    fn validate(&self, params: &StochasticParams) -> Result<()> {
        if !(self.observation_radius > 0.0) || !self.observation_radius.is_finite() {
            return Err(GiaError::InvalidParameter("observation radius must be positive".into()));
        }
        if !(self.guard_width >= params.cutoff_radius() * (1.0 - RANGE_SLACK)) {
            return Err(GiaError::InvalidParameter(format!(
                "guard width {} is narrower than the cutoff radius {}",
                self.guard_width,
                params.cutoff_radius()
            )));
        }
        Ok(())
    }
}

/// Identifies a receiver: LR `k` or ER `k`, both paired with LT `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Receiver {
    Legitimate(usize),
    Eavesdropper(usize),
}

impl Receiver {
    pub fn link(self) -> usize {
        match self {
            Receiver::Legitimate(k) | Receiver::Eavesdropper(k) => k,
        }
    }
}

/// Node positions. Transmitter ids run over LTs first (`0..K`) and then LJs
/// (`K..K+J`); LR `k` and ER `k` belong to LT `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub lt_positions: Vec<Point>,
    pub lr_positions: Vec<Point>,
    pub lj_positions: Vec<Point>,
    pub er_positions: Vec<Point>,
    pub window: ObservationWindow,
    pub seed: u64,
}

impl NetworkTopology {
    pub fn new(
        lt_positions: Vec<Point>,
        lr_positions: Vec<Point>,
        lj_positions: Vec<Point>,
        er_positions: Vec<Point>,
        window: ObservationWindow,
        seed: u64,
    ) -> Result<Self> {
        if lr_positions.len() != lt_positions.len() || er_positions.len() != lt_positions.len() {
            return Err(GiaError::DimensionMismatch(format!(
                "{} LTs but {} LRs and {} ERs",
                lt_positions.len(),
                lr_positions.len(),
                er_positions.len()
            )));
        }
        Ok(Self { lt_positions, lr_positions, lj_positions, er_positions, window, seed })
    }

    pub fn num_links(&self) -> usize {
        self.lt_positions.len()
    }

    pub fn num_jammers(&self) -> usize {
        self.lj_positions.len()
    }

    pub fn num_transmitters(&self) -> usize {
        self.num_links() + self.num_jammers()
    }

    pub fn is_jammer(&self, tx: usize) -> bool {
        tx >= self.num_links()
    }

    pub fn transmitter_position(&self, tx: usize) -> Point {
        let k = self.num_links();
        if tx < k {
            self.lt_positions[tx]
        } else {
            self.lj_positions[tx - k]
        }
    }

    pub fn receiver_position(&self, rx: Receiver) -> Point {
        match rx {
            Receiver::Legitimate(k) => self.lr_positions[k],
            Receiver::Eavesdropper(k) => self.er_positions[k],
        }
    }

    pub fn transmitter_positions(&self) -> impl Iterator<Item = Point> + '_ {
        self.lt_positions.iter().chain(self.lj_positions.iter()).copied()
    }

    /// Links whose LR and ER both sit inside the observation disc.
    pub fn observed_links(&self) -> Vec<usize> {
        (0..self.num_links())
            .filter(|&k| self.window.observes(self.lr_positions[k]) && self.window.observes(self.er_positions[k]))
            .collect()
    }

    /// Same topology with every jammer removed; LT ids are unchanged.
    pub fn without_jammers(&self) -> Self {
        Self { lj_positions: Vec::new(), ..self.clone() }
    }

    pub fn transmitter_index(&self, params: &StochasticParams) -> SpatialIndex {
        SpatialIndex::new(self.transmitter_positions().collect(), params.cutoff_radius())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Samples a topology in the padded window.
pub fn sample_topology(params: &StochasticParams, window: ObservationWindow, seed: u64) -> Result<NetworkTopology> {
    params.validate()?;
    window.validate(params)?;
    let radius = window.padded_radius();
    let area = window.padded_area();

    let mut lt_rng = substream(seed, streams::LT_PROCESS);
    let lt_positions = sample_ppp(params.lambda_l * area, radius, &mut lt_rng)?;
    let mut lj_rng = substream(seed, streams::LJ_PROCESS);
    let lj_positions = sample_ppp(params.lambda_j * area, radius, &mut lj_rng)?;

    let mut lr_rng = substream(seed, streams::LR_OFFSETS);
    let lr_positions = lt_positions.iter().map(|&b| b + params.lr_offset.sample(&mut lr_rng)).collect();
    let mut er_rng = substream(seed, streams::ER_OFFSETS);
    let er_positions = lt_positions.iter().map(|&b| b + params.er_offset.sample(&mut er_rng)).collect();

    NetworkTopology::new(lt_positions, lr_positions, lj_positions, er_positions, window, seed)
}

/// Samples a topology conditioned on an LT at the origin (link 0), whose LR and
/// ER are the typical receivers. The other nodes form the usual processes on a
/// disc of radius `max offset + guard_width`; a guard of one cutoff radius
/// covers both footprints, quantities that depend on alignment decisions need
/// the wider guard of [`ObservationWindow::for_alignment`].
pub fn sample_typical_link(params: &StochasticParams, guard_width: f64, seed: u64) -> Result<NetworkTopology> {
    params.validate()?;
    let offsets = params.lr_offset.max_norm().max(params.er_offset.max_norm());
    let window = ObservationWindow { observation_radius: offsets.max(f64::MIN_POSITIVE), guard_width };
    let mut topo = sample_topology(params, window, seed)?;
    let mut lr_rng = substream(seed, streams::LR_OFFSETS | 0x100);
    let mut er_rng = substream(seed, streams::ER_OFFSETS | 0x100);
    topo.lt_positions.insert(0, Point::default());
    topo.lr_positions.insert(0, params.lr_offset.sample(&mut lr_rng));
    topo.er_positions.insert(0, params.er_offset.sample(&mut er_rng));
    Ok(topo)
}

fn sample_ppp<R: Rng + ?Sized>(mean: f64, radius: f64, rng: &mut R) -> Result<Vec<Point>> {
    if mean <= 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| GiaError::InvalidParameter(format!("Poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    Ok((0..count)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            let phi = 2.0 * PI * rng.gen::<f64>();
            Point::polar(r, phi)
        })
        .collect())
}

/// Uniform grid bucketing points for radius queries.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    points: Vec<Point>,
    cell: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialIndex {
    pub fn new(points: Vec<Point>, cell: f64) -> Self {
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(*p, cell)).or_default().push(i);
        }
        Self { points, cell, buckets }
    }

    fn key(p: Point, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices within `radius` of `center` (with the cutoff slack), sorted by
    /// distance and then index.
    pub fn within(&self, center: Point, radius: f64) -> Vec<(usize, f64)> {
        let reach = radius * (1.0 + RANGE_SLACK);
        let span = (reach / self.cell).ceil() as i64;
        let (cx, cy) = Self::key(center, self.cell);
        let mut out = Vec::new();
        for gx in cx - span..=cx + span {
            for gy in cy - span..=cy + span {
                if let Some(ids) = self.buckets.get(&(gx, gy)) {
                    for &i in ids {
                        let d = self.points[i].distance(center);
                        if d <= reach {
                            out.push((i, d));
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }
}

/// Transmitters (LT or LJ) in range of `receiver`, excluding its own LT,
/// ordered by distance then id.
pub fn in_range_interferers(topology: &NetworkTopology, params: &StochasticParams, receiver: Receiver) -> Vec<usize> {
    let index = topology.transmitter_index(params);
    in_range_interferers_indexed(topology, params, &index, receiver)
}

/// As [`in_range_interferers`], reusing a prebuilt transmitter index.
pub fn in_range_interferers_indexed(
    topology: &NetworkTopology,
    params: &StochasticParams,
    index: &SpatialIndex,
    receiver: Receiver,
) -> Vec<usize> {
    let own = receiver.link();
    index
        .within(topology.receiver_position(receiver), params.cutoff_radius())
        .into_iter()
        .map(|(i, _)| i)
        .filter(|&i| i != own)
        .collect()
}
