//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero when any fails.

use std::time::{Duration, Instant};

use jacobi_transport::dynamics::{
    check_ballistic_limit, check_derivative_identity, corollary_probe, default_time_grid, geometric_times,
    localization_diagnostic, moment_trajectory, transport_exponents,
};
use jacobi_transport::floquet::{apply_q, band_structure, q_norm};
use jacobi_transport::limitperiodic::{dt_criterion, generic_builder, lest2_probe, thouless_check, PsiBattery};
use jacobi_transport::linalg::C64;
use jacobi_transport::xychain::{
    build_m, build_spin_hamiltonian, lr_velocity_bound, verify_free_fermion, verify_lower_bound,
    verify_upper_bound, Local, XYChainSpec,
};
use jacobi_transport::{BlockJacobiOperator, BlockSpec, Result, WavePacket};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn schrodinger(v: &[f64]) -> BlockJacobiOperator {
    BlockJacobiOperator::new(BlockSpec::schrodinger(v).unwrap()).unwrap()
}

fn free() -> BlockJacobiOperator {
    BlockJacobiOperator::free_laplacian()
}

fn c01_free_speed() -> Result<Outcome> {
    let qn = q_norm(&free()).q_norm;
    let rep = BlockJacobiOperator::new(BlockSpec::free_laplacian().repeated(2))?;
    let q2 = q_norm(&rep).q_norm;
    outcome(
        (qn - 2.0).abs() < 1e-9 && (q2 - qn).abs() < 1e-8,
        format!("||Q|| = {qn:.12}, period-2 form {q2:.12}"),
    )
}

fn c02_hellmann_feynman() -> Result<Outcome> {
    let specs: Vec<(&str, BlockJacobiOperator)> = vec![
        ("free", free()),
        ("period-2 v=0.5", schrodinger(&[0.5, -0.5])),
        ("period-2 v=1", schrodinger(&[1.0, -1.0])),
        ("XY isotropic", build_m(&XYChainSpec::constant(1.0, 0.0, 0.5)?)?),
        ("XY anisotropic", build_m(&XYChainSpec::constant(1.0, 0.5, 1.0)?)?),
    ];
    let mut worst = 0.0_f64;
    let mut skipped = 0;
    for (_, op) in &specs {
        let bs = band_structure(op, 1024)?;
        let g = bs.grid();
        let q = bs.q as f64;
        for k in 0..g {
            if (-2..=2).any(|o: i64| bs.degenerate[(k as i64 + o).rem_euclid(g as i64) as usize]) {
                skipped += 1;
                continue;
            }
            for j in 0..bs.num_bands() {
                let err = (bs.fd_velocity(j, k) - bs.velocities[j][k]).abs() / q;
                worst = worst.max(err);
            }
        }
    }
    outcome(
        worst < 1e-6,
        format!("max |FD - HF| slope = {worst:.2e} over 5 specs x 1024 points ({skipped} stencils skipped)"),
    )
}

fn c03_derivative_identity() -> Result<Outcome> {
    let psi = WavePacket::delta(1, 0);
    let r_free = check_derivative_identity(&free(), &psi, 1.0, 256)?;
    let p2 = schrodinger(&[1.0, -1.0]);
    let r_p2 = check_derivative_identity(&p2, &psi, 1.0, 256)?;
    let errs: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&s| check_derivative_identity(&p2, &psi, 1.0, s))
        .collect::<Result<_>>()?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let fourth = orders.iter().all(|&o| o > 3.5);
    outcome(
        r_free < 1e-6 && r_p2 < 1e-6 && fourth,
        format!("residual free {r_free:.2e}, period-2 {r_p2:.2e}; observed orders {orders:.2?}"),
    )
}

fn c04_ballistic_limit() -> Result<Outcome> {
    let psi = WavePacket::delta(1, 0);
    let q0 = apply_q(&free(), &psi, 64)?;
    let exact = WavePacket::from_scalars(1, &[(-1, C64::new(0.0, 1.0)), (1, C64::new(0.0, -1.0))]);
    let q_err = q0.result.sub(&exact).norm();
    let f = check_ballistic_limit(&free(), &psi, &[100.0], 64, None)?;
    let free_err = f.rows[0].error;
    let p2 = check_ballistic_limit(&schrodinger(&[1.0, -1.0]), &psi, &[25.0, 50.0, 100.0, 200.0], 512, Some(1024))?;
    let errs: Vec<f64> = p2.rows.iter().map(|r| r.error).collect();
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        q_err < 1e-10 && free_err < 0.05 && monotone,
        format!("|Q delta_0 - exact| = {q_err:.1e}; free error at t=100 {free_err:.4}; period-2 errors {errs:.4?}"),
    )
}

fn c05_exponents() -> Result<Outcome> {
    let psi = WavePacket::delta(1, 0);
    let times = geometric_times(10.0, 200.0, 8);
    let (traj, free_est) = transport_exponents(&free(), &psi, 2.0, &times)?;
    let worst_rel = traj
        .times
        .iter()
        .zip(&traj.values)
        .map(|(t, m)| (m - 2.0 * t * t).abs() / (2.0 * t * t))
        .fold(0.0_f64, f64::max);
    let (_, p2_est) = transport_exponents(&schrodinger(&[1.0, -1.0]), &psi, 2.0, &times)?;
    let inside = |e: &jacobi_transport::dynamics::ExponentEstimate| {
        (0.9..=1.1).contains(&e.beta_plus_hat) && (0.9..=1.1).contains(&e.beta_minus_hat)
    };
    outcome(
        inside(&free_est) && inside(&p2_est) && worst_rel < 1e-6 && traj.times.len() == times.len(),
        format!(
            "free beta = ({:.4}, {:.4}), period-2 beta = ({:.4}, {:.4}); free 2t^2 rel. error {worst_rel:.1e}",
            free_est.beta_minus_hat, free_est.beta_plus_hat, p2_est.beta_minus_hat, p2_est.beta_plus_hat
        ),
    )
}

fn c06_corollary() -> Result<Outcome> {
    let times: Vec<f64> = (1..=10).map(|k| 20.0 * k as f64).collect();
    let rep = corollary_probe(&free(), 0.2, &times, 0)?;
    let worst = rep
        .records
        .iter()
        .map(|r| r.mass * 2.0 * r.t / rep.c_tilde)
        .fold(f64::INFINITY, f64::min);
    outcome(
        rep.c_tilde > 0.0 && rep.all_ok(),
        format!("C~ = {:.4}, min mass / (C~/2T) = {worst:.3}", rep.c_tilde),
    )
}

fn xy_specs() -> Result<Vec<XYChainSpec>> {
    Ok(vec![
        XYChainSpec::constant(1.0, 0.0, 0.0)?,
        XYChainSpec::constant(1.0, 0.5, 1.0)?,
        XYChainSpec::constant(1.0, -0.5, 2.0)?,
    ])
}

fn c07_free_fermion() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for spec in xy_specs()? {
        for sites in [4i64, 6] {
            let chain = build_spin_hamiltonian(&spec, 1, sites)?;
            for t in [0.5, 1.0, 2.0] {
                for j in 1..=sites {
                    worst = worst.max(verify_free_fermion(&chain, &spec, j, t)?);
                    count += 1;
                }
            }
        }
    }
    outcome(worst < 1e-8, format!("max residual {worst:.2e} over {count} instances"))
}

const LR_PAIRS: [(i64, i64); 2] = [(2, 4), (1, 5)];
const LR_TIMES: [f64; 3] = [0.5, 1.0, 2.0];

fn c08_lower_bound() -> Result<Outcome> {
    let spec = XYChainSpec::constant(1.0, 0.5, 1.0)?;
    let chain = build_spin_hamiltonian(&spec, 1, 6)?;
    let (mut ok, mut count, mut margin) = (true, 0, f64::INFINITY);
    for (l, r) in LR_PAIRS {
        for t in LR_TIMES {
            for case in 1..=4 {
                let c = verify_lower_bound(&chain, &spec, l, r, t, case)?;
                ok &= c.ok;
                margin = margin.min(c.lhs - c.rhs);
                count += 1;
            }
        }
    }
    outcome(ok, format!("{count} instances, min P_t - |entry| = {margin:.3e}"))
}

fn c09_upper_bound() -> Result<Outcome> {
    let spec = XYChainSpec::constant(1.0, 0.5, 1.0)?;
    let chain = build_spin_hamiltonian(&spec, 1, 6)?;
    let (mut ok, mut count, mut ratio) = (true, 0, 0.0_f64);
    for (l, r) in LR_PAIRS {
        for b in [Local::Raise, Local::Lower, Local::X, Local::Z] {
            let bop = chain.local(r, b);
            for t in LR_TIMES {
                let c = verify_upper_bound(&chain, &spec, l, r, &bop, t)?;
                ok &= c.ok;
                ratio = ratio.max(c.lhs / c.rhs);
                count += 1;
            }
        }
    }
    outcome(ok, format!("{count} instances, max lhs/rhs = {ratio:.3e}"))
}

fn c10_xy_velocity() -> Result<Outcome> {
    let v0 = lr_velocity_bound(&XYChainSpec::constant(0.5, 0.0, 0.0)?)?;
    let s = XYChainSpec::new(vec![1.0, 0.6], vec![0.3, -0.2], vec![0.5, -1.0, 0.25])?;
    let base = lr_velocity_bound(&s)?;
    let mut worst = 0.0_f64;
    for c in [0.5, 2.0, 3.0] {
        worst = worst.max((lr_velocity_bound(&s.scaled(c))? - c * base).abs());
    }
    outcome(
        (v0 - 2.0).abs() < 1e-6 && worst < 1e-8,
        format!("v0(mu=1/2) = {v0:.10}; scaling defect {worst:.1e}"),
    )
}

fn c11_localization() -> Result<Outcome> {
    let mut periodic_ok = true;
    let mut verdicts = Vec::new();
    for op in [free(), schrodinger(&[1.0, -1.0]), build_m(&XYChainSpec::constant(1.0, 0.0, 0.0)?)?] {
        let trunc = op.truncate(150)?;
        let pairs: Vec<(i64, i64)> = (1..=20).map(|d| (0, 2 * d)).collect();
        let rep = localization_diagnostic(&trunc, &pairs, &default_time_grid(trunc.norm(), 40.0))?;
        periodic_ok &= !rep.localized;
        verdicts.push(format!("{:.3}", rep.slope));
    }
    let n = 200i64;
    let mut hits = 0;
    let mut slopes = Vec::new();
    for sample in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + sample);
        let nu: Vec<f64> = (0..2 * n + 1).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let spec = XYChainSpec::new(vec![1.0], vec![0.0], nu)?;
        let trunc = build_m(&spec)?.truncate_window(0, 2 * n)?;
        // c_l against c_r, centred in the window
        let pairs: Vec<(i64, i64)> = (1..=25).map(|d| (2 * n, 2 * n + 2 * d)).collect();
        let rep = localization_diagnostic(&trunc, &pairs, &default_time_grid(trunc.norm(), 50.0))?;
        if rep.slope < -0.1 && rep.r_squared > 0.9 {
            hits += 1;
        }
        slopes.push(rep.slope);
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    outcome(
        periodic_ok && hits >= 16,
        format!("periodic slopes {verdicts:?} (not localized: {periodic_ok}); disorder {hits}/20 localized, mean slope {mean:.3}"),
    )
}

fn c12_thouless() -> Result<Outcome> {
    let a = thouless_check(C64::new(0.0, 3.0), &[0.0], 2048)?;
    let b = thouless_check(C64::new(0.5, 0.2), &[1.0, -1.0], 2048)?;
    outcome(a.gap < 1e-3 && b.gap < 1e-3, format!("gaps {:.2e} and {:.2e}", a.gap, b.gap))
}

fn c13_dt_criterion() -> Result<Outcome> {
    let f = dt_criterion(&[0.0], 1.0, 2.0, 100.0, 1.0)?;
    let gapped = schrodinger(&[3.0, -3.0]);
    let ranges = band_structure(&gapped, 256)?.band_ranges();
    let in_gap = ranges.iter().all(|&(lo, hi)| hi < -2.0 || lo > 2.0);
    let g = dt_criterion(&[3.0, -3.0], 1.0, 2.0, 100.0, 1.0)?;
    outcome(
        f.integral >= 0.1 && g.integral < 1e-3 && in_gap,
        format!(
            "free integral {:.4}; w=(3,-3) on [-2,2] {:.2e} (bands {ranges:.3?})",
            f.integral, g.integral
        ),
    )
}

fn c14_lest2_generic() -> Result<Outcome> {
    let c = lest2_probe(&[0.0], 2.0, 1, PsiBattery::Delta)?;
    let exact = moment_trajectory(&free(), &WavePacket::delta(1, 0), 2.0, &[c.t])?.values[0];
    let exact_ok = (exact - 2.0 * c.t * c.t).abs() < 1e-8 * exact && (c.moment_w - exact).abs() < 1e-8 * exact;
    let rep = generic_builder(3, 2.0, 1, PsiBattery::Delta)?;
    let deltas: Vec<f64> = rep.stages.iter().map(|s| s.delta).collect();
    let decreasing = deltas.windows(2).all(|w| w[1] < w[0]);
    outcome(
        c.t == 4.0 && c.delta > 0.0 && exact_ok && decreasing && rep.verification.len() == 3 && rep.all_ok(),
        format!(
            "T = {}, delta = {:.4}, moment {:.6} vs 2T^2 = {}; generic deltas {deltas:.4?}, checks {}/3",
            c.t,
            c.delta,
            c.moment_w,
            2.0 * c.t * c.t,
            rep.verification.iter().filter(|r| r.ok).count()
        ),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "free ballistic speed", Duration::from_secs(1), c01_free_speed),
        (2, "Hellmann-Feynman band slopes", Duration::from_secs(10), c02_hellmann_feynman),
        (3, "derivative identity", Duration::from_secs(5), c03_derivative_identity),
        (4, "ballistic limit", Duration::from_secs(60), c04_ballistic_limit),
        (5, "transport exponents", Duration::from_secs(60), c05_exponents),
        (6, "light-cone corollary probe", Duration::from_secs(30), c06_corollary),
        (7, "free-fermion exactness", Duration::from_secs(60), c07_free_fermion),
        (8, "propagator lower bound", Duration::from_secs(120), c08_lower_bound),
        (9, "commutator upper bound", Duration::from_secs(60), c09_upper_bound),
        (10, "XY velocity", Duration::from_secs(5), c10_xy_velocity),
        (11, "localization dichotomy", Duration::from_secs(300), c11_localization),
        (12, "Thouless formula", Duration::from_secs(10), c12_thouless),
        (13, "DT criterion contrast", Duration::from_secs(30), c13_dt_criterion),
        (14, "certificates and generic builder", Duration::from_secs(300), c14_lest2_generic),
    ];
    let mut failures = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        let timing = if elapsed <= budget { "" } else { " [over time budget]" };
        println!(
            "{} criterion {id:>2} ({name}): {detail} [{:.1} s / {} s]{timing}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of 14 criteria passed", 14 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
