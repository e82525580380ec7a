use super::ExperimentConfig;
use crate::analytics::{feasible_region, FeasibleRegion, StreamGrid};
use crate::error::Result;

/// Exact and dense-network verdicts over the stream grid, optionally capped by
/// `region_d_j_max` / `region_d_l_max`.
pub fn run_region_map(cfg: &ExperimentConfig) -> Result<FeasibleRegion> {
    let full = StreamGrid::full(&cfg.params);
    let cap = |v: Vec<usize>, max: Option<usize>| v.into_iter().filter(|&x| max.is_none_or(|m| x <= m)).collect();
    let grid = StreamGrid { d_j: cap(full.d_j, cfg.region_d_j_max), d_l: cap(full.d_l, cfg.region_d_l_max) };
    feasible_region(&cfg.params, &grid)
}
