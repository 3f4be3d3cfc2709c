use jacobi_transport::dynamics::{
    check_ballistic_limit, check_derivative_identity, corollary_probe, default_time_grid, evolve,
    localization_diagnostic, trajectory_half_width, transport_exponents, geometric_times,
};
use jacobi_transport::floquet::{band_structure, q_norm_with_grid};
use jacobi_transport::limitperiodic::{
    dt_criterion, finite_lyapunov, generic_builder, perturbation_stability, periodic_window, thouless_check,
};
use jacobi_transport::linalg::C64;
use jacobi_transport::xychain::{
    build_m, build_spin_hamiltonian, lr_velocity_bound, verify_free_fermion, verify_lower_bound,
    verify_upper_bound, Local, XYChainSpec, BoundCheck,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{self, *};
use crate::output::{json as json_artifact, Artifact, Csv};
use crate::{CliError, Command};

/// Files produced by a command, plus a failure message when a tolerance
/// check inside it did not pass.
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub failure: Option<String>,
}

impl From<Vec<Artifact>> for Outcome {
    fn from(artifacts: Vec<Artifact>) -> Self {
        Self { artifacts, failure: None }
    }
}

pub fn run(command: Command, text: &str) -> Result<Outcome, CliError> {
    let name = command.name();
    match command {
        Command::Bands => bands(config::parse(name, text)?),
        Command::Qnorm => qnorm(config::parse(name, text)?),
        Command::Evolve => evolve_cmd(config::parse(name, text)?),
        Command::Exponents => exponents(config::parse(name, text)?),
        Command::BallisticCheck => ballistic(config::parse(name, text)?),
        Command::DerivativeCheck => derivative(config::parse(name, text)?),
        Command::CorollaryProbe => corollary(config::parse(name, text)?),
        Command::Localization => localization(config::parse(name, text)?),
        Command::XyVelocity => xy_velocity(config::parse(name, text)?),
        Command::XyVerify => xy_verify(config::parse(name, text)?),
        Command::Lyapunov => lyapunov(config::parse(name, text)?),
        Command::Thouless => thouless(config::parse(name, text)?),
        Command::DtCriterion => dt(config::parse(name, text)?),
        Command::Stability => stability(config::parse(name, text)?),
        Command::Generic => generic(config::parse(name, text)?),
    }
}

fn bands(c: BandsConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("bands", &c);
    let op = config::operator(&c.operator, &c.xy)?;
    let bs = band_structure(&op, c.grid)?;
    let mut csv = Csv::new(&cfg, &["theta", "band_index", "lambda", "velocity", "degenerate_flag"]);
    for (k, theta) in bs.theta.iter().enumerate() {
        for j in 0..bs.num_bands() {
            let flag = u8::from(bs.degenerate[k]);
            csv.row(&[theta, &j, &bs.bands[j][k], &bs.velocities[j][k], &flag]);
        }
    }
    Ok(vec![csv.finish("bands.csv")].into())
}

fn qnorm(c: QNormConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("qnorm", &c);
    let op = config::operator(&c.operator, &c.xy)?;
    let q = q_norm_with_grid(&op, c.grid);
    Ok(vec![json_artifact("qnorm.json", &cfg, &q)].into())
}

fn evolve_cmd(c: EvolveConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("evolve", &c);
    let op = config::operator(&c.operator, &c.xy)?;
    let psi = c.psi.build(op.m())?;
    let t_max = c.times.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let n = trajectory_half_width(&op, t_max, psi.radius());
    let trunc = op.truncate(n as usize)?;
    let mut csv = Csv::new(&cfg, &["t", "site", "component", "re", "im"]).note("half_width", n);
    for &t in &c.times {
        let (out, _) = evolve(&trunc, &psi, t)?.thresholded(c.threshold);
        for (site, comp, z) in out.entries() {
            if z.norm() > c.threshold {
                csv.row(&[&t, &site, &comp, &z.re, &z.im]);
            }
        }
    }
    Ok(vec![csv.finish("evolve.csv")].into())
}

fn exponents(c: ExponentsConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("exponents", &c);
    let op = config::operator(&c.operator, &c.xy)?;
    let psi = c.psi.build(op.m())?;
    let times = geometric_times(c.t0, c.t1, c.samples);
    let (traj, est) = transport_exponents(&op, &psi, c.p, &times)?;
    let mut csv = Csv::new(&cfg, &["t", "moment", "running_slope"]).note("half_width", traj.half_width);
    for (i, (t, m)) in traj.times.iter().zip(&traj.values).enumerate() {
        let slope = i.checked_sub(1).and_then(|k| est.running_slopes.get(k));
        match slope {
            Some(s) => csv.row(&[t, m, s]),
            None => csv.row(&[t, m, &""]),
        }
    }
    let summary = json!({
        "beta_plus_hat": est.beta_plus_hat,
        "beta_minus_hat": est.beta_minus_hat,
        "residual": est.residual,
        "fit_window": est.fit_window,
        "rejected_times": traj.rejected,
    });
    Ok(vec![csv.finish("exponents.csv"), json_artifact("exponents.json", &cfg, &summary)].into())
}

fn ballistic(c: BallisticConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("ballistic-check", &c);
    let op = config::operator(&c.operator, &c.xy)?;
    let psi = c.psi.build(op.m())?;
    let rep = check_ballistic_limit(&op, &psi, &c.times, c.q_grid, c.half_width)?;
    let mut csv = Csv::new(&cfg, &["t", "error"])
        .note("half_width", rep.half_width)
        .note("q_error_estimate", rep.q_error_estimate)
        .note("decreasing_after_transient", rep.decreasing_after_transient());
    for r in &rep.rows {
        csv.row(&[&r.t, &r.error]);
    }
    Ok(vec![csv.finish("ballistic-check.csv")].into())
}

fn derivative(c: DerivativeConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("derivative-check", &c);
    let op = config::operator(&c.operator, &c.xy)?;
    let psi = c.psi.build(op.m())?;
    let mut csv = Csv::new(&cfg, &["steps", "residual", "observed_order"]);
    let mut prev: Option<(usize, f64)> = None;
    for &s in &c.steps {
        let r = check_derivative_identity(&op, &psi, c.t_final, s)?;
        match prev {
            Some((ps, pr)) if r > 0.0 && pr > 0.0 => {
                csv.row(&[&s, &r, &((pr / r).ln() / (s as f64 / ps as f64).ln())])
            }
            _ => csv.row(&[&s, &r, &""]),
        }
        prev = Some((s, r));
    }
    Ok(vec![csv.finish("derivative-check.csv")].into())
}

fn corollary(c: CorollaryConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("corollary-probe", &c);
    let op = config::operator(&c.operator, &c.xy)?;
    let rep = corollary_probe(&op, c.epsilon, &c.times, c.k_max)?;
    let mut csv = Csv::new(&cfg, &["t", "n_star", "k_star", "mass", "threshold_ok"])
        .note("q_norm", rep.q_norm)
        .note("c_tilde", rep.c_tilde)
        .note("all_ok", rep.all_ok());
    for r in &rep.records {
        csv.row(&[&r.t, &r.n_star, &r.k_star, &r.mass, &r.threshold_ok]);
    }
    Ok(vec![csv.finish("corollary-probe.csv")].into())
}

fn localization(c: LocalizationConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("localization", &c);
    let [lo, hi] = c.window;
    if lo >= hi {
        return Err(CliError::Config(format!("window [{lo}, {hi}] is empty")));
    }
    let pairs = |m: i64| -> Vec<(i64, i64)> {
        match &c.pairs {
            Some(p) => p.iter().map(|&[l, r]| (l, r)).collect(),
            None => {
                let centre = (lo + hi).div_euclid(2);
                (1..=c.max_distance).map(|d| (m * centre, m * (centre + d))).collect()
            }
        }
    };
    let Some(dis) = &c.disorder else {
        let op = config::operator(&c.operator, &c.xy)?;
        let trunc = op.truncate_window(lo, hi)?;
        let grid = default_time_grid(trunc.norm(), c.t_max);
        let rep = localization_diagnostic(&trunc, &pairs(op.m() as i64), &grid)?;
        let verdict = if rep.localized { "localized" } else { "not localized" };
        let mut csv = Csv::new(&cfg, &["l", "r", "distance", "sup"])
            .note("slope", rep.slope)
            .note("intercept", rep.intercept)
            .note("r_squared", rep.r_squared)
            .note("verdict", verdict);
        for r in &rep.rows {
            csv.row(&[&r.l, &r.r, &r.distance, &r.sup]);
        }
        return Ok(vec![csv.finish("localization.csv")].into());
    };
    if c.operator.is_some() || c.xy.is_some() {
        return Err(CliError::Config("\"disorder\" builds its own chain; drop \"operator\"/\"xy\"".into()));
    }
    if !(dis.amplitude >= 0.0) {
        return Err(CliError::Config(format!("disorder amplitude must be >= 0, got {}", dis.amplitude)));
    }
    let sites = (hi - lo + 1) as usize;
    let mut csv = Csv::new(&cfg, &["sample", "seed", "slope", "intercept", "r_squared", "localized"]);
    let mut hits = 0;
    for s in 0..dis.samples {
        let seed = dis.seed + s as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nu = vec![0.0; sites];
        // nu is indexed by site mod period, so fill in site order starting at lo
        for site in lo..=hi {
            nu[site.rem_euclid(sites as i64) as usize] = rng.random_range(-dis.amplitude..=dis.amplitude);
        }
        let spec = XYChainSpec::new(vec![dis.mu], vec![dis.gamma], nu)?;
        let trunc = build_m(&spec)?.truncate_window(lo, hi)?;
        let grid = default_time_grid(trunc.norm(), c.t_max);
        let rep = localization_diagnostic(&trunc, &pairs(2), &grid)?;
        hits += usize::from(rep.localized);
        csv.row(&[&s, &seed, &rep.slope, &rep.intercept, &rep.r_squared, &rep.localized]);
    }
    let csv = csv.note("localized_samples", format!("{hits}/{}", dis.samples));
    Ok(vec![csv.finish("localization.csv")].into())
}

fn xy_velocity(spec: XYChainSpec) -> Result<Outcome, CliError> {
    let cfg = config::resolved("xy-velocity", &spec);
    let v0 = lr_velocity_bound(&spec)?;
    Ok(vec![json_artifact("xy-velocity.json", &cfg, &json!({ "v0": v0 }))].into())
}

fn xy_verify(c: XyVerifyConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("xy-verify", &c);
    let spec = XYChainSpec::new(c.mu.clone(), c.gamma.clone(), c.nu.clone())?;
    let chain = build_spin_hamiltonian(&spec, c.lo, c.hi)?;
    let mut csv = Csv::new(&cfg, &["check_name", "l", "r", "t", "lhs", "rhs", "ok"]);
    let mut failed = 0;
    let mut push = |csv: &mut Csv, name: &str, l: i64, r: i64, t: f64, b: BoundCheck| {
        failed += usize::from(!b.ok);
        csv.row(&[&name, &l, &r, &t, &b.lhs, &b.rhs, &b.ok]);
    };
    for &t in &c.times {
        for j in c.lo..=c.hi {
            let res = verify_free_fermion(&chain, &spec, j, t)?;
            let b = BoundCheck { lhs: res, rhs: FREE_FERMION_TOL, ok: res < FREE_FERMION_TOL };
            push(&mut csv, "free_fermion", j, j, t, b);
        }
    }
    for &[l, r] in &c.pairs {
        for &t in &c.times {
            for case in 1..=4u8 {
                let b = verify_lower_bound(&chain, &spec, l, r, t, case)?;
                push(&mut csv, &format!("lower_case{case}"), l, r, t, b);
            }
            for (name, op) in [("upper_raise", Local::Raise), ("upper_lower", Local::Lower), ("upper_x", Local::X)] {
                let b = verify_upper_bound(&chain, &spec, l, r, &chain.local(r, op), t)?;
                push(&mut csv, name, l, r, t, b);
            }
        }
    }
    let failure = (failed > 0).then(|| format!("{failed} xy-verify checks failed"));
    Ok(Outcome { artifacts: vec![csv.finish("xy-verify.csv")], failure })
}

const FREE_FERMION_TOL: f64 = 1e-8;

fn lyapunov(c: LyapunovConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("lyapunov", &c);
    let mut csv = Csv::new(&cfg, &["E_re", "E_im", "n", "L"]);
    for &[re, im] in &c.energies {
        for &n in &c.steps {
            let l = finite_lyapunov(n, C64::new(re, im), &periodic_window(&c.w, n))?;
            csv.row(&[&re, &im, &n, &l]);
        }
    }
    Ok(vec![csv.finish("lyapunov.csv")].into())
}

fn thouless(c: ThoulessConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("thouless", &c);
    let mut csv = Csv::new(&cfg, &["z_re", "z_im", "lhs", "rhs", "gap"]);
    for &[re, im] in &c.z {
        let r = thouless_check(C64::new(re, im), &c.w, c.grid)?;
        csv.row(&[&re, &im, &r.lhs, &r.rhs, &r.gap]);
    }
    Ok(vec![csv.finish("thouless.csv")].into())
}

fn dt(c: DtConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("dt-criterion", &c);
    let r = dt_criterion(&c.w, c.lambda, c.k, c.t, c.alpha)?;
    let out = json!({
        "integral": r.integral,
        "K": r.k,
        "T": r.t,
        "alpha": r.alpha,
        "lambda": r.lambda,
        "n_max": r.n_max,
    });
    Ok(vec![json_artifact("dt-criterion.json", &cfg, &out)].into())
}

fn stability(c: StabilityConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("stability", &c);
    let psi = c.psi.build(1)?;
    let r = perturbation_stability(&c.w, &c.v, &psi, c.t, c.p, c.m_env)?;
    Ok(vec![json_artifact("stability.json", &cfg, &r)].into())
}

fn generic(c: GenericConfig) -> Result<Outcome, CliError> {
    let cfg = config::resolved("generic", &c);
    let rep = generic_builder(c.stages, c.p, c.m_env, c.battery)?;
    let mut lines = String::new();
    for s in &rep.stages {
        lines.push_str(&json_artifact("", &cfg, s).body);
    }
    let mut csv = Csv::new(&cfg, &["stage", "t", "moment", "threshold", "distance", "delta", "ok"])
        .note("final_period", rep.final_potential.len())
        .note("final_potential", Value::from(rep.final_potential.clone()));
    for r in &rep.verification {
        csv.row(&[&r.stage, &r.t, &r.moment, &r.threshold, &r.distance, &r.delta, &r.ok]);
    }
    let failure = (!rep.all_ok()).then(|| "generic verification table has failing rows".to_string());
    let artifacts = vec![
        Artifact { name: "generic-stages.jsonl".into(), body: lines },
        csv.finish("generic-verification.csv"),
    ];
    Ok(Outcome { artifacts, failure })
}
