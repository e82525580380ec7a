use std::collections::BTreeMap;

use super::{mmse_decoders, TransceiverSet};
use crate::alignment::{verify_coverage, AlignmentSet};
use crate::channel::{ChannelSet, NetworkConfig, Side};
use crate::error::{GiaError, Result};
use super::newton::{Block, Linearization};
use crate::linalg::{min_right_singular, orthonormalize, random_orthonormal, real, CMat};
use crate::rng::{streams, substream};

/// Alternating leakage minimization over orthonormal precoders and decoders.
///
/// Each sweep first recomputes every LR decoder as the least-leaking subspace
/// given the precoders, then every precoder given the decoders, so the total
/// leakage never increases. Channels are divided by their pathloss so the
/// tolerance applies to the small-scale fading part only.
#[derive(Clone, Debug, PartialEq)]
pub struct GiaSolver {
    /// Target for the largest per-pair residual `||U^H H V||_F / L`.
    pub tol: f64,
    /// Sweep budget per attempt.
    pub max_iter: usize,
    /// Fresh random restarts allowed after a stall.
    pub max_restarts: usize,
    /// A stall is declared when the objective shrinks by less than
    /// `1 - stall_ratio` over `stall_window` sweeps.
    pub stall_window: usize,
    pub stall_ratio: f64,
    /// Switch a component from alternating sweeps to damped Gauss-Newton steps
    /// after this many sweeps (`None` keeps alternating).
    pub newton_after: Option<usize>,
    pub seed: u64,
}

impl Default for GiaSolver {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 5000, max_restarts: 3, stall_window: 100, stall_ratio: 0.99, newton_after: Some(5), seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    /// Sweeps of the last component solved.
    pub iterations: usize,
    /// Sweeps over all attempts.
    pub total_iterations: usize,
    pub restarts: usize,
    pub max_residual: f64,
    /// Leakage of the last component solved, after each sweep.
    pub objective: Vec<f64>,
    /// `(variables, sweeps)` for every component that needed more than one sweep.
    pub cyclic_components: Vec<(usize, usize)>,
}

struct Term {
    rx: usize,
    tx: usize,
    normalized: CMat,
}

/// A precoder or decoder being designed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    Decoder(usize),
    Precoder(usize),
}

/// Leakage terms plus the order in which variables are solved.
///
/// When the alignment set is split into proper per-node subsets, each term is
/// owned by the node whose subset contains it, and an owner depends on the
/// other endpoint. Strongly connected components of that dependency graph are
/// solved in dependency order: acyclic components close in one exact sweep,
/// cyclic ones alternate until their own terms vanish. Without a proper split
/// the whole network is one component over every term.
struct Problem {
    terms: Vec<Term>,
    components: Vec<Component>,
}

struct Component {
    vars: Vec<Var>,
    /// Terms minimized while solving this component.
    terms: Vec<usize>,
}

impl Problem {
    fn new(channels: &ChannelSet, aset: &AlignmentSet, config: &NetworkConfig) -> Result<Self> {
        let mut terms = Vec::new();
        let mut owner: Vec<Var> = Vec::new();
        let partitioned = verify_coverage(aset, config);
        let rx_owned: std::collections::BTreeSet<(usize, usize)> =
            aset.rx_subsets.values().flatten().copied().collect();
        for &(k, j) in &aset.pairs {
            if k >= config.num_links || j >= config.num_transmitters() {
                return Err(GiaError::DimensionMismatch(format!("pair ({k}, {j}) outside the network")));
            }
            if config.tx_streams[j] == 0 {
                continue;
            }
            let link = match channels.link(Side::Legitimate, k, j) {
                Some(l) if l.pathloss > 0.0 => l,
                _ => continue,
            };
            terms.push(Term { rx: k, tx: j, normalized: &link.matrix / real(link.pathloss) });
            owner.push(if rx_owned.contains(&(k, j)) { Var::Decoder(k) } else { Var::Precoder(j) });
        }
        if terms.is_empty() {
            return Ok(Self { terms, components: Vec::new() });
        }
        if !partitioned {
            let mut vars: Vec<Var> = terms.iter().flat_map(|t| [Var::Decoder(t.rx), Var::Precoder(t.tx)]).collect();
            vars.sort();
            vars.dedup();
            let all = (0..terms.len()).collect();
            return Ok(Self { terms, components: vec![Component { vars, terms: all }] });
        }

        let mut vars: Vec<Var> = terms.iter().flat_map(|t| [Var::Decoder(t.rx), Var::Precoder(t.tx)]).collect();
        vars.sort();
        vars.dedup();
        let id = |v: Var| vars.binary_search(&v).expect("registered variable");
        let mut deps = vec![Vec::new(); vars.len()];
        let mut owned = vec![Vec::new(); vars.len()];
        for (t, term) in terms.iter().enumerate() {
            let o = id(owner[t]);
            let other = match owner[t] {
                Var::Decoder(_) => id(Var::Precoder(term.tx)),
                Var::Precoder(_) => id(Var::Decoder(term.rx)),
            };
            deps[o].push(other);
            owned[o].push(t);
        }
        let mut components = Vec::new();
        for members in strongly_connected(&deps) {
            let mut comp_terms: Vec<usize> = members.iter().flat_map(|&m| owned[m].iter().copied()).collect();
            if comp_terms.is_empty() {
                continue;
            }
            comp_terms.sort_unstable();
            let vars = members.iter().map(|&m| vars[m]).collect();
            components.push(Component { vars, terms: comp_terms });
        }
        Ok(Self { terms, components })
    }
}

/// Strongly connected components with every component listed after the
/// components it depends on (Kosaraju, iterative).
fn strongly_connected(deps: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = deps.len();
    let mut finished = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((v, i)) = stack.pop() {
            if i < deps[v].len() {
                stack.push((v, i + 1));
                let w = deps[v][i];
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                finished.push(v);
            }
        }
    }
    let mut reverse = vec![Vec::new(); n];
    for (v, ws) in deps.iter().enumerate() {
        for &w in ws {
            reverse[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &s in finished.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let c = out.len();
        comp[s] = c;
        let mut members = Vec::new();
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            members.push(v);
            for &w in &reverse[v] {
                if comp[w] == usize::MAX {
                    comp[w] = c;
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    // Discovery order lists dependents first.
    out.reverse();
    out
}

impl GiaSolver {
    pub fn with_tolerance(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter, ..Self::default() }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Runs the solver; decoders of LRs without aligned pairs are matched to the
    /// direct link, eavesdropper decoders are MMSE at the configured powers.
    pub fn solve(
        &self,
        channels: &ChannelSet,
        aset: &AlignmentSet,
        config: &NetworkConfig,
    ) -> Result<(TransceiverSet, SolveReport)> {
        config.validate()?;
        if channels.num_links() != config.num_links || channels.num_transmitters() != config.num_transmitters() {
            return Err(GiaError::DimensionMismatch("channels do not match config".into()));
        }
        let problem = Problem::new(channels, aset, config)?;
        let mut rng = substream(self.seed, streams::TRANSCEIVER_INIT);
        let mut state = State {
            v: (0..config.num_transmitters())
                .map(|j| (j, random_orthonormal(config.tx_antennas[j], config.tx_streams[j], &mut rng)))
                .collect(),
            u: BTreeMap::new(),
        };
        for t in &problem.terms {
            state.u.entry(t.rx).or_insert_with(|| random_orthonormal(config.lr_antennas[t.rx], config.tx_streams[t.rx], &mut rng));
        }

        let mut report = SolveReport::default();
        for (c, comp) in problem.components.iter().enumerate() {
            let mut restarts = 0;
            loop {
                let outcome = self.solve_component(&problem, comp, config, &mut state, &mut report);
                match outcome {
                    Attempt::Converged => {
                        if report.iterations > 1 {
                            report.cyclic_components.push((comp.vars.len(), report.iterations));
                        }
                        break;
                    }
                    Attempt::Stalled if restarts < self.max_restarts => {
                        restarts += 1;
                        report.restarts += 1;
                        let mut rng = substream(self.seed ^ rng_key(c, restarts), streams::TRANSCEIVER_INIT);
                        state.reinit(comp, config, &mut rng);
                    }
                    Attempt::Stalled | Attempt::Exhausted => {
                        return Err(GiaError::NonConvergence {
                            max_residual: report.max_residual,
                            iterations: report.total_iterations,
                        })
                    }
                }
            }
        }
        report.max_residual = final_residual(&problem, &state);

        let State { v: precoders, u: decoders } = state;
        let mut lr_decoders = BTreeMap::new();
        for k in 0..config.num_links {
            let u = match decoders.get(&k) {
                Some(u) => u.clone(),
                None => matched_decoder(channels, &precoders[&k], k, config.tx_streams[k]),
            };
            lr_decoders.insert(k, u);
        }
        let er_decoders = mmse_decoders(channels, &precoders, config, 0..config.num_links)?;
        Ok((TransceiverSet { precoders, lr_decoders, er_decoders }, report))
    }

    fn solve_component(
        &self,
        problem: &Problem,
        comp: &Component,
        config: &NetworkConfig,
        state: &mut State,
        report: &mut SolveReport,
    ) -> Attempt {
        let mut rx_rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut tx_rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &t in &comp.terms {
            let term = &problem.terms[t];
            if comp.vars.binary_search(&Var::Decoder(term.rx)).is_ok() {
                rx_rows.entry(term.rx).or_default().push(t);
            }
            if comp.vars.binary_search(&Var::Precoder(term.tx)).is_ok() {
                tx_rows.entry(term.tx).or_default().push(t);
            }
        }
        report.objective.clear();
        report.iterations = 0;
        let newton_from = self.newton_after.unwrap_or(usize::MAX);
        let mut mu = 1e-3;
        for it in 0..self.max_iter {
            let (objective, max_residual) = if it < newton_from {
                self.alternate(problem, comp, &rx_rows, &tx_rows, config, state)
            } else {
                let before = *report.objective.last().expect("warm start precedes refinement");
                match newton_step(problem, comp, state, mu) {
                    Some((obj, res)) if obj < before => {
                        mu = (mu * 0.1).max(1e-15);
                        (obj, res)
                    }
                    _ => {
                        mu = (mu * 10.0).min(1e12);
                        (before, report.max_residual)
                    }
                }
            };
            if let Some(&prev) = report.objective.last() {
                assert!(
                    objective <= prev * (1.0 + 1e-9) + 1e-28,
                    "leakage increased from {prev:e} to {objective:e} at sweep {it}"
                );
            }
            report.objective.push(objective);
            report.iterations = it + 1;
            report.total_iterations += 1;
            report.max_residual = max_residual;
            if max_residual <= self.tol {
                return Attempt::Converged;
            }
            if it >= self.stall_window {
                let before = report.objective[it - self.stall_window];
                if objective > self.stall_ratio * before {
                    return Attempt::Stalled;
                }
            }
        }
        Attempt::Exhausted
    }

    /// One block-coordinate sweep: decoders, then precoders.
    fn alternate(
        &self,
        problem: &Problem,
        comp: &Component,
        rx_rows: &BTreeMap<usize, Vec<usize>>,
        tx_rows: &BTreeMap<usize, Vec<usize>>,
        config: &NetworkConfig,
        state: &mut State,
    ) -> (f64, f64) {
        for (&k, idx) in rx_rows {
            let x = stack(
                idx.iter().map(|&t| {
                    let term = &problem.terms[t];
                    (&term.normalized * &state.v[&term.tx]).adjoint()
                }),
                config.lr_antennas[k],
            );
            state.u.insert(k, min_right_singular(&x, config.tx_streams[k]).0);
        }
        for (&j, idx) in tx_rows {
            let x = stack(
                idx.iter().map(|&t| {
                    let term = &problem.terms[t];
                    state.u[&term.rx].adjoint() * &term.normalized
                }),
                config.tx_antennas[j],
            );
            state.v.insert(j, min_right_singular(&x, config.tx_streams[j]).0);
        }
        component_leakage(problem, comp, state)
    }
}

/// Total squared leakage and largest residual over a component's terms.
fn component_leakage(problem: &Problem, comp: &Component, state: &State) -> (f64, f64) {
    let mut objective = 0.0;
    let mut max_residual: f64 = 0.0;
    for &t in &comp.terms {
        let term = &problem.terms[t];
        let r = (state.u[&term.rx].adjoint() * &term.normalized * &state.v[&term.tx]).norm();
        objective += r * r;
        max_residual = max_residual.max(r);
    }
    (objective, max_residual)
}

/// Tries one damped Gauss-Newton step on the component's variables. The state
/// is updated and the new leakage returned only when the leakage drops.
fn newton_step(problem: &Problem, comp: &Component, state: &mut State, mu: f64) -> Option<(f64, f64)> {
    let mut offsets: BTreeMap<Var, usize> = BTreeMap::new();
    let mut len = 0;
    for &var in &comp.vars {
        offsets.insert(var, len);
        len += match var {
            Var::Decoder(k) => state.u[&k].len(),
            Var::Precoder(j) => state.v[&j].len(),
        };
    }
    let blocks: Vec<Block<'_>> = comp
        .terms
        .iter()
        .map(|&t| {
            let term = &problem.terms[t];
            Block {
                u: &state.u[&term.rx],
                g: &term.normalized,
                v: &state.v[&term.tx],
                u_offset: offsets.get(&Var::Decoder(term.rx)).copied(),
                v_offset: offsets.get(&Var::Precoder(term.tx)).copied(),
            }
        })
        .collect();
    let before = component_leakage(problem, comp, state).0;
    let lin = Linearization::new(&blocks, len);
    let dx = lin.step(mu, 400);

    let mut candidate: Vec<(Var, CMat)> = Vec::with_capacity(comp.vars.len());
    for (&var, &off) in &offsets {
        let (current, conjugate) = match var {
            Var::Decoder(k) => (&state.u[&k], true),
            Var::Precoder(j) => (&state.v[&j], false),
        };
        let (r, c) = current.shape();
        let moved = CMat::from_fn(r, c, |i, p| {
            let d = dx[off + p * r + i];
            current[(i, p)] + if conjugate { d.conj() } else { d }
        });
        let q = orthonormalize(&moved);
        if q.ncols() != c || !crate::linalg::is_finite(&q) {
            return None;
        }
        candidate.push((var, q));
    }
    let mut saved = Vec::with_capacity(candidate.len());
    for (var, q) in candidate {
        let old = match var {
            Var::Decoder(k) => state.u.insert(k, q),
            Var::Precoder(j) => state.v.insert(j, q),
        };
        saved.push((var, old.expect("variable initialized")));
    }
    let (objective, max_residual) = component_leakage(problem, comp, state);
    if objective < before {
        Some((objective, max_residual))
    } else {
        for (var, old) in saved {
            match var {
                Var::Decoder(k) => state.u.insert(k, old),
                Var::Precoder(j) => state.v.insert(j, old),
            };
        }
        None
    }
}

fn rng_key(component: usize, restart: usize) -> u64 {
    crate::rng::derive(component as u64, &[restart as u64])
}

fn stack<I: Iterator<Item = CMat>>(blocks: I, cols: usize) -> CMat {
    let blocks: Vec<CMat> = blocks.collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut x = CMat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        x.view_mut((r, 0), b.shape()).copy_from(&b);
        r += b.nrows();
    }
    x
}

fn final_residual(problem: &Problem, state: &State) -> f64 {
    problem
        .terms
        .iter()
        .map(|t| (state.u[&t.rx].adjoint() * &t.normalized * &state.v[&t.tx]).norm())
        .fold(0.0, f64::max)
}

struct State {
    v: BTreeMap<usize, CMat>,
    u: BTreeMap<usize, CMat>,
}

impl State {
    fn reinit<R: rand::Rng>(&mut self, comp: &Component, config: &NetworkConfig, rng: &mut R) {
        for var in &comp.vars {
            match *var {
                Var::Decoder(k) => {
                    self.u.insert(k, random_orthonormal(config.lr_antennas[k], config.tx_streams[k], rng));
                }
                Var::Precoder(j) => {
                    self.v.insert(j, random_orthonormal(config.tx_antennas[j], config.tx_streams[j], rng));
                }
            }
        }
    }
}

enum Attempt {
    Converged,
    Stalled,
    Exhausted,
}

/// Leading left singular vectors of the effective direct channel.
fn matched_decoder(channels: &ChannelSet, precoder: &CMat, k: usize, d: usize) -> CMat {
    let eff = channels.matrix(Side::Legitimate, k, k) * precoder;
    let n = eff.nrows();
    if eff.norm() == 0.0 {
        return CMat::identity(n, d);
    }
    let svd = nalgebra::SVD::new(eff, true, false);
    let u = svd.u.expect("left vectors requested");
    u.columns(0, d.min(u.ncols())).into_owned()
}

/// Leakage-minimizing transceivers with the default restart policy.
pub fn design_gia(
    channels: &ChannelSet,
    aset: &AlignmentSet,
    config: &NetworkConfig,
    tol: f64,
    max_iter: usize,
) -> Result<TransceiverSet> {
    GiaSolver::with_tolerance(tol, max_iter).solve(channels, aset, config).map(|(t, _)| t)
}
