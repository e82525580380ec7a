//! Closed-form predictions for the stochastic network: interference moments,
//! the feasibility indicator, operation modes and the dense-network region.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::max_tx_selections;
use crate::error::{GiaError, Result};
use crate::geometry::{connection_density, StochasticParams};

/// Moments of the residual interference at an LR (`I_l`, bounded) and of the
/// interference at an ER (`I_e`, exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    pub e_il_low: f64,
    pub e_il_high: f64,
    /// Upper bound on the standard deviation of `I_l`. Infinite when a node
    /// type cannot null anyone.
    pub s_il_high: f64,
    pub e_ie: f64,
    pub v_ie: f64,
}

struct NodeClass {
    rho: f64,
    lambda_ratio: f64,
    streams: f64,
    selections: f64,
}

fn classes(params: &StochasticParams, d_l: usize, d_j: usize) -> [NodeClass; 2] {
    let (rho_l, rho_j) = connection_density(params);
    [
        NodeClass { rho: rho_l, lambda_ratio: 1.0, streams: d_l as f64, selections: max_tx_selections(params.m_l, d_l, d_l) as f64 },
        NodeClass {
            rho: rho_j,
            lambda_ratio: params.lambda_j / params.lambda_l,
            streams: d_j as f64,
            selections: max_tx_selections(params.m_j, d_j, d_l) as f64,
        },
    ]
}

pub fn interference_moments(params: &StochasticParams, d_l: usize, d_j: usize) -> Result<MomentBounds> {
    let (rho_l, _) = connection_density(params);
    if !(rho_l > 0.0) || d_l == 0 {
        return Err(GiaError::InvalidParameter("need a positive LT density and at least one LR stream".into()));
    }
    let mut bounds = MomentBounds { e_il_low: 0.0, e_il_high: 0.0, s_il_high: 0.0, e_ie: 0.0, v_ie: 0.0 };
    for c in classes(params, d_l, d_j) {
        if c.lambda_ratio == 0.0 || c.streams == 0.0 {
            continue;
        }
        let excess = (c.rho * c.streams - c.lambda_ratio * c.selections * c.streams).max(0.0);
        bounds.e_il_low += excess;
        bounds.e_il_high += excess + c.streams * c.lambda_ratio * rho_l.sqrt() / (2.0 * PI).sqrt();
        let cap = c.selections.min(rho_l);
        bounds.s_il_high += if cap > 0.0 {
            4.0 * c.lambda_ratio * (PI * cap).sqrt() * (1.0 + 1.0 / (6.0 * cap))
        } else {
            f64::INFINITY
        };
        bounds.e_ie += c.rho * c.streams;
        bounds.v_ie += c.rho * c.streams * c.streams;
    }
    Ok(bounds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperationMode {
    PureIA,
    ModerateJamming,
    IntensiveJamming,
}

pub fn classify_mode(n_e: usize, n_l: usize, m_l: usize, m_j: usize) -> OperationMode {
    let aligned = n_l + m_l;
    if n_e <= aligned {
        OperationMode::PureIA
    } else if n_e <= m_j.max(aligned) {
        OperationMode::ModerateJamming
    } else {
        OperationMode::IntensiveJamming
    }
}

/// The dense-network inequalities; feasibility needs `f1 > 0` and the rest `< 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionInequalities {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl RegionInequalities {
    pub fn aligned(&self) -> bool {
        self.f2 < 0.0 && self.f3 < 0.0 && self.f4 < 0.0
    }

    pub fn feasible(&self) -> bool {
        self.f1 > 0.0 && self.aligned()
    }
}

/// Evaluates the four inequalities at a real-valued stream pair.
pub fn region_inequalities(params: &StochasticParams, d_j: f64, d_l: f64) -> RegionInequalities {
    let (rho_l, rho_j) = connection_density(params);
    let (n_l, m_l, m_j, n_e) = (params.n_l as f64, params.m_l as f64, params.m_j as f64, params.n_e as f64);
    RegionInequalities {
        f1: rho_l * d_l + rho_j * d_j - n_e,
        f2: rho_l * d_l - n_l - m_l,
        f3: rho_l * rho_l * d_l * d_l + rho_l * rho_j * d_l * d_j + rho_j * d_j * d_j
            - (m_l + n_l) * rho_l * d_l
            - m_j * rho_j * d_j,
        f4: rho_l * rho_j * d_l * d_j + rho_j * d_j * d_j - n_l * rho_l * d_l - m_j * rho_j * d_j,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub r_e: f64,
    pub r_l: f64,
    pub r: f64,
    /// Floor-free approximation of `r_l`, off by at most `2 / rho_l`.
    pub r_l_tilde: f64,
    pub feasible: bool,
    pub transitory: bool,
    pub mode: OperationMode,
    pub inequalities: RegionInequalities,
}

/// Half-width of the band around `R = 0` where the step prediction is unreliable.
pub fn transitory_threshold(params: &StochasticParams, d_l: usize, d_j: usize) -> f64 {
    let (rho_l, rho_j) = connection_density(params);
    (d_l.max(d_j) as f64 * rho_l.max(rho_j) / (rho_l * rho_l * d_l as f64)).sqrt()
}

pub fn indicator_r(params: &StochasticParams, d_l: usize, d_j: usize) -> Result<RegionReport> {
    let (rho_l, rho_j) = connection_density(params);
    if !(rho_l > 0.0) || d_l == 0 {
        return Err(GiaError::InvalidParameter("need a positive LT density and at least one LR stream".into()));
    }
    let (dl, dj) = (d_l as f64, d_j as f64);
    let load = rho_l * dl + rho_j * dj;
    let sel_l = max_tx_selections(params.m_l, d_l, d_l) as f64;
    let sel_j = max_tx_selections(params.m_j, d_j, d_l) as f64;
    let r_e = 1.0 - params.n_e as f64 / load;
    let n_spare = params.n_l as f64 - dl;
    let r_l = (n_spare + (sel_l * dl).min(rho_l * dl) + (rho_j / rho_l * sel_j * dj).min(rho_j * dj)) / load - 1.0;
    let jam_share = rho_j * (params.m_j as f64 - dj) / (rho_l * dl) * dj;
    let r_l_tilde = (params.n_l as f64 + (params.m_l as f64).min(rho_l * dl) + jam_share.min(rho_j * dj)) / load - 1.0;
    let r = r_e.min(r_l);
    Ok(RegionReport {
        r_e,
        r_l,
        r,
        r_l_tilde,
        feasible: r > 0.0,
        transitory: r.abs() <= transitory_threshold(params, d_l, d_j),
        mode: classify_mode(params.n_e, params.n_l, params.m_l, params.m_j),
        inequalities: region_inequalities(params, dj, dl),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdofPrediction {
    /// `d_l` when the indicator is positive, zero otherwise.
    pub point: f64,
    pub transitory: bool,
}

pub fn predict_sdof(params: &StochasticParams, d_l: usize, d_j: usize) -> Result<SdofPrediction> {
    let (rho_l, _) = connection_density(params);
    if rho_l < 1.0 {
        return Err(GiaError::InvalidParameter(format!("prediction needs rho_l >= 1, got {rho_l}")));
    }
    let report = indicator_r(params, d_l, d_j)?;
    Ok(SdofPrediction { point: if report.feasible { d_l as f64 } else { 0.0 }, transitory: report.transitory })
}

/// Stream pairs to evaluate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamGrid {
    pub d_j: Vec<usize>,
    pub d_l: Vec<usize>,
}

impl StreamGrid {
    /// `{0..M_j} x {1..min(N_l, M_l)}`.
    pub fn full(params: &StochasticParams) -> Self {
        StreamGrid { d_j: (0..=params.m_j).collect(), d_l: (1..=params.n_l.min(params.m_l)).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub d_j: usize,
    pub d_l: usize,
    pub report: RegionReport,
    pub feasible_exact: bool,
    pub feasible_dense: bool,
}

/// Boundary descriptors of the dense-network region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionCurves {
    pub jamming_slope: f64,
    pub jamming_intercept: f64,
    /// Height of the flat part of the aligning curve.
    pub aligning_height: f64,
    /// `(d_j, d_l)` samples of the aligning curve.
    pub aligning_curve: Vec<(f64, f64)>,
    /// Present when `M_j >= M_l + N_l`.
    pub trapezoid: Option<[(f64, f64); 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub points: Vec<RegionPoint>,
    pub curves: RegionCurves,
}

impl FeasibleRegion {
    /// Fraction of grid points where the exact and dense verdicts agree.
    pub fn agreement(&self) -> f64 {
        if self.points.is_empty() {
            return 1.0;
        }
        let same = self.points.iter().filter(|p| p.feasible_exact == p.feasible_dense).count();
        same as f64 / self.points.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "d_j", "d_l", "R_e", "R_l", "R", "f1", "f2", "f3", "f4", "feasible_exact", "feasible_highdensity",
        ])?;
        for p in &self.points {
            let r = &p.report;
            let f = &r.inequalities;
            w.write_record(&[
                p.d_j.to_string(),
                p.d_l.to_string(),
                r.r_e.to_string(),
                r.r_l.to_string(),
                r.r.to_string(),
                f.f1.to_string(),
                f.f2.to_string(),
                f.f3.to_string(),
                f.f4.to_string(),
                p.feasible_exact.to_string(),
                p.feasible_dense.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest `d_l` keeping `f2, f3, f4 <= 0` at a given `d_j`.
pub fn aligning_height(params: &StochasticParams, d_j: f64) -> f64 {
    let (rho_l, rho_j) = connection_density(params);
    let (n_l, m_l, m_j) = (params.n_l as f64, params.m_l as f64, params.m_j as f64);
    let flat = (n_l + m_l) / rho_l;
    // f3 as a quadratic in d_l
    let a = rho_l * rho_l;
    let b = rho_l * rho_j * d_j - (m_l + n_l) * rho_l;
    let c = rho_j * d_j * d_j - m_j * rho_j * d_j;
    let disc = b * b - 4.0 * a * c;
    let quad = if disc < 0.0 { 0.0 } else { (-b + disc.sqrt()) / (2.0 * a) };
    // f4 is linear in d_l
    let slope = rho_l * (rho_j * d_j - n_l);
    let linear = if slope > 0.0 { rho_j * d_j * (m_j - d_j) / slope } else { f64::INFINITY };
    flat.min(quad).min(linear).max(0.0)
}

pub fn region_curves(params: &StochasticParams, samples: usize) -> RegionCurves {
    let (rho_l, rho_j) = connection_density(params);
    let m_j = params.m_j as f64;
    let flat = (params.n_l + params.m_l) as f64 / rho_l;
    let steps = samples.max(2);
    let aligning_curve = (0..steps)
        .map(|i| {
            let d_j = m_j * i as f64 / (steps - 1) as f64;
            (d_j, aligning_height(params, d_j))
        })
        .collect();
    let trapezoid = (params.m_j >= params.m_l + params.n_l)
        .then(|| [(0.0, 0.0), (0.0, flat), ((params.m_j - params.m_l - params.n_l) as f64, flat), (m_j, 0.0)]);
    RegionCurves {
        jamming_slope: -rho_j / rho_l,
        jamming_intercept: params.n_e as f64 / rho_l,
        aligning_height: flat,
        aligning_curve,
        trapezoid,
    }
}

pub fn feasible_region(params: &StochasticParams, grid: &StreamGrid) -> Result<FeasibleRegion> {
    let cells: Vec<(usize, usize)> = grid.d_j.iter().flat_map(|&j| grid.d_l.iter().map(move |&l| (j, l))).collect();
    let points = cells
        .into_par_iter()
        .map(|(d_j, d_l)| {
            let report = indicator_r(params, d_l, d_j)?;
            Ok(RegionPoint {
                d_j,
                d_l,
                feasible_exact: report.feasible,
                feasible_dense: report.inequalities.feasible(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeasibleRegion { points, curves: region_curves(params, 101) })
}

/// Samples points strictly inside the trapezoid and checks `f2, f3, f4 < 0`.
pub fn trapezoid_check<R: Rng + ?Sized>(params: &StochasticParams, sample_count: usize, rng: &mut R) -> Result<bool> {
    let curves = region_curves(params, 2);
    let Some(vertices) = curves.trapezoid else {
        return Err(GiaError::InvalidParameter("trapezoid needs M_j >= M_l + N_l".into()));
    };
    let height = vertices[1].1;
    let top = vertices[2].0;
    let base = vertices[3].0;
    let mut done = 0;
    while done < sample_count {
        let d_l = rng.gen::<f64>() * height;
        let right = base - (base - top) * d_l / height;
        let d_j = rng.gen::<f64>() * right;
        if d_l <= 0.0 || d_l >= height || d_j <= 0.0 || d_j >= right {
            continue;
        }
        done += 1;
        if !region_inequalities(params, d_j, d_l).aligned() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn dense_jamming() -> StochasticParams {
        StochasticParams::default()
    }

    #[test]
    fn dense_jamming_indicator() {
        let p = dense_jamming();
        let report = indicator_r(&p, 1, 1).unwrap();
        // hand evaluation: load 13 pi, LR side 7 + 4 pi + 9 pi
        let load = 13.0 * PI;
        assert!((report.r_e - (1.0 - 32.0 / load)).abs() < 1e-12);
        assert!((report.r_l - ((7.0 + 13.0 * PI) / load - 1.0)).abs() < 1e-12);
        assert!((report.r_e - 0.2165).abs() < 1e-4);
        assert!((report.r_l - 0.1714).abs() < 1e-4);
        assert_eq!(report.r, report.r_l);
        assert!(report.feasible);
        assert_eq!(report.mode, OperationMode::IntensiveJamming);
        let threshold = (9.0 * PI / (16.0 * PI * PI)).sqrt();
        assert!((transitory_threshold(&p, 1, 1) - threshold).abs() < 1e-12);
        assert!(report.transitory);
        let pred = predict_sdof(&p, 1, 1).unwrap();
        assert_eq!(pred.point, 1.0);
    }

    #[test]
    fn jamming_line_boundary() {
        let area = PI * 100.0;
        let p = StochasticParams { lambda_l: 8.0 / area, lambda_j: 0.0, n_e: 8, ..dense_jamming() };
        assert!(indicator_r(&p, 1, 0).unwrap().r_e.abs() < 1e-12);
        let q = StochasticParams { n_e: 9, ..p };
        let r = indicator_r(&q, 1, 0).unwrap();
        assert!(r.r_e < 0.0 && !r.feasible);
    }

    #[test]
    fn moments() {
        let p = dense_jamming();
        let m = interference_moments(&p, 1, 1).unwrap();
        assert!((m.e_ie - 13.0 * PI).abs() < 1e-12);
        assert!((m.v_ie - 13.0 * PI).abs() < 1e-12);
        assert!(m.e_il_low <= m.e_il_high);
        let mut q = dense_jamming();
        q.lambda_j = 0.0;
        q.m_l = 40;
        let m = interference_moments(&q, 1, 0).unwrap();
        assert_eq!(m.e_il_low, 0.0);
        q.lambda_l = 0.0;
        assert!(interference_moments(&q, 1, 0).is_err());
    }

    #[test]
    fn modes() {
        assert_eq!(classify_mode(20, 8, 16, 16), OperationMode::PureIA);
        assert_eq!(classify_mode(32, 8, 16, 16), OperationMode::IntensiveJamming);
        assert_eq!(classify_mode(25, 8, 16, 30), OperationMode::ModerateJamming);
    }

    #[test]
    fn low_density_rejected() {
        let mut p = dense_jamming();
        p.lambda_l = 1e-4;
        assert!(predict_sdof(&p, 1, 1).is_err());
    }

    #[test]
    fn pass_through_points() {
        let p = StochasticParams { m_j: 40, m_l: 8, n_l: 8, ..dense_jamming() };
        let f = region_inequalities(&p, 40.0, 0.0);
        assert_eq!((f.f3, f.f4), (0.0, 0.0));
        let (rho_l, _) = connection_density(&p);
        let g = region_inequalities(&p, 24.0, 16.0 / rho_l);
        assert!(g.f3.abs() < 1e-9);
        let below = region_inequalities(&p, 0.0, 1.0);
        assert!(p.n_e as f64 >= rho_l);
        assert!(below.f1 <= 0.0);
    }

    #[test]
    fn trapezoid_interior() {
        let p = StochasticParams { m_j: 40, m_l: 8, n_l: 8, ..dense_jamming() };
        let mut rng = substream(1, 0);
        assert!(trapezoid_check(&p, 10_000, &mut rng).unwrap());
        let v = region_curves(&p, 2).trapezoid.unwrap();
        let cx = v.iter().map(|x| x.0).sum::<f64>() / 4.0;
        let cy = v.iter().map(|x| x.1).sum::<f64>() / 4.0;
        let f = region_inequalities(&p, cx, cy);
        assert!(f.f2 < 0.0 && f.f3 < 0.0 && f.f4 < 0.0);
        let bad = StochasticParams { m_j: 10, ..p };
        assert!(trapezoid_check(&bad, 10, &mut rng).is_err());
    }

    #[test]
    fn aligning_height_is_on_boundary() {
        let p = StochasticParams { m_j: 40, m_l: 8, n_l: 8, ..dense_jamming() };
        for d_j in [0.0, 5.0, 20.0, 35.0] {
            let h = aligning_height(&p, d_j);
            let f = region_inequalities(&p, d_j, h * 0.999);
            assert!(f.aligned(), "{d_j}");
            let g = region_inequalities(&p, d_j, h * 1.001 + 1e-9);
            assert!(!g.aligned(), "{d_j}");
        }
    }
}
