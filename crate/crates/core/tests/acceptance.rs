//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
//! the measured values; the process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gia_core::alignment::{build_alignment_set, verify_coverage, AlignmentSet, NearestFirst, SelectionContext};
use gia_core::analytics::{feasible_region, interference_moments, region_inequalities, trapezoid_check, StreamGrid};
use gia_core::channel::{ChannelSet, NetworkConfig, Side};
use gia_core::experiments::{
    run_case_study, run_secrecy_sweep, run_transitory_sweep, transitory_width, ExperimentConfig, ExperimentKind, Strategy,
};
use gia_core::geometry::{
    in_range_interferers, sample_topology, sample_typical_link, ObservationWindow, Receiver, StochasticParams,
};
use gia_core::metrics::{count_local, sdof_counts_from_design};
use gia_core::rng::{derive, keyed};
use gia_core::transceiver::{design_case_study, effective_alignment, targeted_pairs, CaseStrategy, GiaSolver};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Check = fn() -> Outcome;

fn with_density(rho_l: f64, rho_j: f64, base: StochasticParams) -> StochasticParams {
    let area = PI * base.cutoff_radius().powi(2);
    StochasticParams { lambda_l: rho_l / area, lambda_j: rho_j / area, ..base }
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, var, m4)
}

fn case_study() -> Outcome {
    let draws = 1000;
    let seed = 11;
    let config = NetworkConfig::four_node_example(100.0);
    let mut worst: f64 = 0.0;
    for i in 0..draws {
        let draw_seed = derive(seed, &[i as u64]);
        let channels = ChannelSet::fully_connected(&config, draw_seed).expect("channels");
        for strategy in [CaseStrategy::A, CaseStrategy::C, CaseStrategy::D] {
            let t = design_case_study(strategy, &channels, &config, draw_seed).expect("design");
            for (k, j) in targeted_pairs(strategy) {
                let r = (t.lr_decoders[&k].adjoint() * channels.matrix(Side::Legitimate, k, j) * &t.precoders[&j]).norm();
                worst = worst.max(r);
            }
        }
    }
    let table = run_case_study(seed, draws).expect("case study");
    let d_sdof_ok = table.rows.iter().filter(|r| r.strategy == CaseStrategy::D).all(|r| r.sdof == 1.0);
    let [a, b, c, d] = CaseStrategy::ALL.map(|s| table.mean_secrecy(s));
    let ordered = d >= c && c > a.max(b) && d > a.max(b);
    outcome(
        worst <= 1e-10 && d_sdof_ok && ordered,
        format!("max residual {worst:.2e}, D sDoF 1 on every link: {d_sdof_ok}, mean secrecy A {a:.3} B {b:.3} C {c:.3} D {d:.3}"),
    )
}

fn alignment_coverage() -> Outcome {
    let runs = 1000;
    let mut failures = 0;
    for t in 0..runs {
        let mut rng = keyed(2, &[t]);
        let d_l = rng.gen_range(1..=2);
        let d_j = rng.gen_range(0..=3);
        let base = StochasticParams {
            m_l: rng.gen_range(d_l..=12),
            n_l: rng.gen_range(d_l..=12),
            m_j: rng.gen_range(d_j.max(1)..=16),
            n_e: rng.gen_range(1..=32),
            d_l,
            d_j,
            ..StochasticParams::default()
        };
        let rho_l = rng.gen_range(5.0..=100.0);
        let rho_j = rng.gen_range(0.0..=rho_l);
        let params = with_density(rho_l, rho_j, base);
        let window = ObservationWindow { observation_radius: 5.0, guard_width: params.cutoff_radius() };
        let topology = sample_topology(&params, window, derive(2, &[t])).expect("topology");
        let config = NetworkConfig::for_topology(&topology, &params, 1.0);
        let aset = build_alignment_set(&topology, &params, &config).expect("alignment set");
        if !verify_coverage(&aset, &config) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} of {runs} topologies violate coverage"))
}

fn solver_matches_closed_form() -> Outcome {
    let runs = 100;
    let four = NetworkConfig::four_node_example(100.0);
    let three = four.without_jammers();
    let aset = AlignmentSet::from_pairs(targeted_pairs(CaseStrategy::C));
    let mut good = 0;
    for seed in 0..runs {
        let channels = ChannelSet::fully_connected(&four, seed).expect("channels");
        let oracle = design_case_study(CaseStrategy::C, &channels, &four, seed).expect("closed form");
        let oracle_counts = sdof_counts_from_design(&channels, &oracle, &effective_alignment(&oracle, &channels, 1e-8), &four);

        let mut sub = ChannelSet::empty(&three);
        for side in [Side::Legitimate, Side::Eavesdropping] {
            for rx in 0..3 {
                for tx in 0..3 {
                    let link = channels.link(side, rx, tx).expect("fully connected").clone();
                    sub.insert(side, rx, tx, link).expect("insert");
                }
            }
        }
        let Ok((design, report)) = GiaSolver::default().with_seed(seed).solve(&sub, &aset, &three) else {
            continue;
        };
        let counts = sdof_counts_from_design(&sub, &design, &effective_alignment(&design, &sub, 1e-8), &three);
        let same = counts.iter().zip(&oracle_counts).all(|(a, b)| a.sdof == b.sdof);
        if report.max_residual <= 1e-8 && same {
            good += 1;
        }
    }
    outcome(good * 100 >= 95 * runs, format!("{good} of {runs} seeded runs reach 1e-8 with matching sDoF"))
}

fn eavesdropper_moments() -> Outcome {
    let topologies = 10_000;
    // (rho_l, rho_j, d_l, d_j)
    let sets = [(6.0, 15.0, 1, 1), (12.5, 28.0, 2, 1), (30.0, 9.0, 1, 3)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, &(rho_l, rho_j, d_l, d_j)) in sets.iter().enumerate() {
        let params = with_density(rho_l, rho_j, StochasticParams { m_j: 16, d_l, d_j, ..StochasticParams::default() });
        let samples: Vec<f64> = (0..topologies)
            .map(|t| {
                let topo = sample_typical_link(&params, params.cutoff_radius(), derive(4 + i as u64, &[t])).expect("topology");
                in_range_interferers(&topo, &params, Receiver::Eavesdropper(0))
                    .into_iter()
                    .map(|j| if topo.is_jammer(j) { d_j } else { d_l } as f64)
                    .sum()
            })
            .collect();
        let (mean, var, m4) = mean_and_variance(&samples);
        let n = topologies as f64;
        let expected_mean = rho_l * d_l as f64 + rho_j * d_j as f64;
        let expected_var = rho_l * (d_l * d_l) as f64 + rho_j * (d_j * d_j) as f64;
        let z_mean = (mean - expected_mean) / (var / n).sqrt();
        let z_var = (var - expected_var) / ((m4 - var * var) / n).sqrt();
        ok &= z_mean.abs() <= 3.0 && z_var.abs() <= 3.0;
        parts.push(format!("set {i}: z_mean {z_mean:+.2}, z_var {z_var:+.2}"));
    }
    outcome(ok, parts.join("; "))
}

fn residual_interference_bounds() -> Outcome {
    let topologies = 2000;
    // (rho_l, rho_j, M_l, d_l, M_j, d_j): m_l and m_j on both sides of rho_l
    let sets = [
        (6.0, 6.0, 4, 1, 4, 1),
        (6.0, 6.0, 16, 1, 16, 1),
        (15.0, 10.0, 8, 1, 24, 2),
        (30.0, 20.0, 10, 2, 10, 2),
        (3.0, 15.0, 8, 1, 3, 1),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, &(rho_l, rho_j, m_l, d_l, m_j, d_j)) in sets.iter().enumerate() {
        let base = StochasticParams { m_l, n_l: m_l.max(d_l), m_j, d_l, d_j, ..StochasticParams::default() };
        let params = with_density(rho_l, rho_j, base);
        let guard = ObservationWindow::for_alignment(0.0, &params).guard_width;
        let samples: Vec<f64> = (0..topologies)
            .map(|t| {
                let topo = sample_typical_link(&params, guard, derive(5 + i as u64, &[t])).expect("topology");
                let config = NetworkConfig::for_topology(&topo, &params, 1.0);
                let ctx = SelectionContext::new(&topo, &params);
                count_local(&ctx, &config, &NearestFirst, 0).i_l as f64
            })
            .collect();
        let (mean, var, _) = mean_and_variance(&samples);
        let bounds = interference_moments(&params, d_l, d_j).expect("moments");
        let inside = bounds.e_il_low <= mean && mean <= bounds.e_il_high && var.sqrt() <= bounds.s_il_high;
        ok &= inside;
        parts.push(format!(
            "set {i}: E {mean:.2} in [{:.2}, {:.2}], S {:.2} <= {:.2}",
            bounds.e_il_low,
            bounds.e_il_high,
            var.sqrt(),
            bounds.s_il_high
        ));
    }
    outcome(ok, parts.join("; "))
}

fn secrecy_sweep() -> Outcome {
    let cfg = ExperimentConfig {
        kind: ExperimentKind::SecrecySweep,
        topologies: 50,
        channel_draws: 20,
        observation_radius: 30.0,
        ..ExperimentConfig::default()
    };
    let sweep = run_secrecy_sweep(&cfg).expect("secrecy sweep");
    let mut ordered = true;
    let mut worst = String::new();
    for &snr in cfg.snr_db.iter().filter(|&&s| s >= 20.0) {
        let rate = |s| sweep.rate(s, snr, true).unwrap_or(f64::NAN);
        let (gia, ia, cj, ian) = (rate(Strategy::Gia), rate(Strategy::Ia), rate(Strategy::Cj), rate(Strategy::Ian));
        if !(gia > ia && ia > cj.max(ian)) {
            ordered = false;
            worst = format!(" (violated at {snr} dB: GIA {gia:.4} IA {ia:.4} CJ {cj:.4} IAN {ian:.4})");
        }
    }
    let slope = sweep.slope(Strategy::Gia, true, 30.0, 60.0).unwrap_or(f64::NAN);
    let upper = sweep.slope(Strategy::Gia, true, 50.0, 60.0).unwrap_or(f64::NAN);
    let slope_ok = (0.75..=1.05).contains(&slope);
    outcome(
        ordered && slope_ok,
        format!(
            "ordering GIA > IA > max(CJ, IAN) from 20 dB: {ordered}{worst}; GIA slope 30-60 dB {slope:.3} (50-60 dB {upper:.3}); skipped {} of {}",
            sweep.skipped(),
            sweep.requested()
        ),
    )
}

fn transitory_region() -> Outcome {
    let cfg = ExperimentConfig { kind: ExperimentKind::TransitorySweep, topologies: 200, ..ExperimentConfig::default() };
    let sweep = run_transitory_sweep(&cfg).expect("transitory sweep");
    let d_l = sweep.d_l as f64;
    let dense = sweep.curve(0.32);
    let low = dense.iter().filter(|p| p.r < -0.2).map(|p| p.mean_sdof).fold(0.0, f64::max);
    let high = dense.iter().filter(|p| p.r > 0.2).map(|p| p.mean_sdof).fold(f64::INFINITY, f64::min);
    let sparse_width = transitory_width(&sweep.curve(0.02), sweep.d_l);
    let dense_width = transitory_width(&dense, sweep.d_l);
    let ratio = match (sparse_width, dense_width) {
        (Some(s), Some(d)) if d > 0.0 => s / d,
        _ => f64::NAN,
    };
    let shape_ok = low <= 0.1 * d_l && high >= 0.9 * d_l;
    outcome(
        shape_ok && (2.0..=8.0).contains(&ratio),
        format!("at lambda 0.32: max sDoF for R < -0.2 is {low:.3}, min for R > 0.2 is {high:.3}; width ratio {ratio:.2}"),
    )
}

fn trapezoid() -> Outcome {
    let samples = 10_000;
    // (rho_l, rho_j, M_l, N_l, M_j)
    let sets = [(50.0, 113.0, 16, 8, 32), (20.0, 20.0, 8, 8, 16), (100.0, 40.0, 12, 20, 40), (8.0, 30.0, 4, 4, 9)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, &(rho_l, rho_j, m_l, n_l, m_j)) in sets.iter().enumerate() {
        let params = with_density(rho_l, rho_j, StochasticParams { m_l, n_l, m_j, ..StochasticParams::default() });
        let mut rng = keyed(8, &[i as u64]);
        let inside = trapezoid_check(&params, samples, &mut rng).expect("trapezoid");
        let corner = region_inequalities(&params, m_j as f64, 0.0);
        let vanish = corner.f3 == 0.0 && corner.f4 == 0.0;
        ok &= inside && vanish;
        parts.push(format!("set {i}: interior {inside}, f3 {:e} f4 {:e}", corner.f3, corner.f4));
    }
    outcome(ok, parts.join("; "))
}

fn dense_consistency() -> Outcome {
    // (rho_l, rho_j, M_l, N_l, M_j, N_e)
    let sets = [(50.0, 50.0, 300, 300, 600, 1000), (60.0, 40.0, 400, 400, 900, 1200)];
    let grid = StreamGrid { d_j: (0..30).collect(), d_l: (1..=30).collect() };
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, &(rho_l, rho_j, m_l, n_l, m_j, n_e)) in sets.iter().enumerate() {
        let params = with_density(rho_l, rho_j, StochasticParams { m_l, n_l, m_j, n_e, ..StochasticParams::default() });
        let agreement = feasible_region(&params, &grid).expect("region").agreement();
        ok &= agreement > 0.95;
        parts.push(format!("set {i}: agreement {:.1}%", 100.0 * agreement));
    }
    outcome(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, Duration); 9] = [
        ("1 case study closed forms", case_study, Duration::from_secs(30)),
        ("2 alignment set coverage", alignment_coverage, Duration::from_secs(60)),
        ("3 solver against closed form", solver_matches_closed_form, Duration::from_secs(60)),
        ("4 eavesdropper interference moments", eavesdropper_moments, Duration::from_secs(120)),
        ("5 residual interference bounds", residual_interference_bounds, Duration::from_secs(300)),
        ("6 secrecy rate sweep", secrecy_sweep, Duration::from_secs(1800)),
        ("7 transitory region", transitory_region, Duration::from_secs(600)),
        ("8 trapezoid inner bound", trapezoid, Duration::from_secs(10)),
        ("9 dense-network consistency", dense_consistency, Duration::from_secs(10)),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check, budget) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let passed = result.passed && elapsed <= budget;
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s of {}s]",
            if passed { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
