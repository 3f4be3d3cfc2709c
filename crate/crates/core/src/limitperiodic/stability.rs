use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blockjacobi::{BlockJacobiOperator, BlockSpec, WavePacket};
use crate::dynamics::{evolve, moment, WINDOW_MARGIN};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Dyadic search for `T` stops after this value.
pub const MAX_CERT_TIME: f64 = 256.0;
/// Number of random `l^inf` directions sampled in the `delta`-ball.
pub const BALL_SAMPLES: usize = 8;
/// Halvings of the `delta` bracket.
pub const DELTA_BISECTIONS: usize = 12;
pub const BALL_SEED: u64 = 0x1e572;
pub const MAX_STAGES: usize = 5;

/// Schrodinger operator `Delta + w` for a periodic potential given as one
/// period.
pub fn schrodinger_operator(period: &[f64]) -> Result<BlockJacobiOperator> {
    if period.is_empty() {
        return Err(Error::InvalidSpec("empty potential".into()));
    }
    if period.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSpec("non-finite potential value".into()));
    }
    BlockJacobiOperator::new(BlockSpec::schrodinger(period)?)
}

/// `sup_n |v(n) - w(n)|` for two periodic potentials.
pub fn sup_distance(v: &[f64], w: &[f64]) -> f64 {
    let l = lcm(v.len(), w.len());
    (0..l).map(|n| (v[n % v.len()] - w[n % w.len()]).abs()).fold(0.0, f64::max)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Checks `|psi(n)| <= m exp(-|n| / m)` for every `n`.
pub fn check_envelope(psi: &WavePacket, m_env: u32) -> Result<()> {
    if m_env == 0 {
        return Err(Error::InvalidSpec("envelope parameter m must be >= 1".into()));
    }
    let m = m_env as f64;
    match psi
        .scalar_entries()
        .find(|(n, z)| z.norm() > m * (-(n.unsigned_abs() as f64) / m).exp() * (1.0 + 1e-12))
    {
        Some((n, _)) => Err(Error::PsiEnvelopeViolated { site: n, m: m_env }),
        None => Ok(()),
    }
}

/// Half-width for times up to `t` under a norm bound `bound`.
fn half_width(bound: f64, t: f64, radius: i64) -> i64 {
    let rule = (bound * t).ceil() as i64 + radius + WINDOW_MARGIN;
    rule.max((1.1 * bound * t).ceil() as i64 + radius + 2 * WINDOW_MARGIN)
}

fn moment_on(op: &BlockJacobiOperator, n: i64, psi: &WavePacket, t: f64, p: f64) -> Result<f64> {
    let trunc = op.truncate(n as usize)?;
    Ok(moment(&evolve(&trunc, psi, t)?, p))
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub moment_w: f64,
    pub moment_v: f64,
    pub difference: f64,
    pub half_width: i64,
}

/// `|<psi, |X(t)|^p psi>_V - <psi, |X(t)|^p psi>_W|` on a common window.
pub fn perturbation_stability(
    w: &[f64],
    v: &[f64],
    psi: &WavePacket,
    t: f64,
    p: f64,
    m_env: u32,
) -> Result<StabilityReport> {
    if !(p > 0.0) {
        return Err(Error::InvalidSpec(format!("moment order must be positive, got {p}")));
    }
    check_envelope(psi, m_env)?;
    let (ow, ov) = (schrodinger_operator(w)?, schrodinger_operator(v)?);
    let n = half_width(ow.norm_bound().max(ov.norm_bound()), t, psi.radius());
    let moment_w = moment_on(&ow, n, psi, t, p)?;
    let moment_v = moment_on(&ov, n, psi, t, p)?;
    Ok(StabilityReport {
        moment_w,
        moment_v,
        difference: (moment_v - moment_w).abs(),
        half_width: n,
    })
}

/// Initial states tried by the certificate search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiBattery {
    /// `delta_0` only.
    Delta,
    /// `delta_0` and the normalized profiles `+-(-1)^n exp(-|n| / m)`.
    Envelope,
}

impl PsiBattery {
    pub fn packets(self, m_env: u32) -> Vec<(String, WavePacket)> {
        let mut out = vec![("delta_0".to_string(), WavePacket::delta(1, 0))];
        if self == PsiBattery::Envelope {
            let m = m_env.max(1) as f64;
            let r = (23.0 * m).ceil() as i64;
            for (name, alt) in [("exp_symmetric", false), ("exp_alternating", true)] {
                let raw: Vec<(i64, C64)> = (-r..=r)
                    .map(|n| {
                        let sign = if alt && n.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
                        (n, C64::new(sign * (-(n.abs() as f64) / m).exp(), 0.0))
                    })
                    .collect();
                let norm = raw.iter().map(|(_, z)| z.norm_sqr()).sum::<f64>().sqrt();
                let entries: Vec<(i64, C64)> = raw.into_iter().map(|(n, z)| (n, z / norm)).collect();
                out.push((name.to_string(), WavePacket::from_scalars(1, &entries)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Lest2Certificate {
    /// Certified time `T`.
    pub t: f64,
    /// Certified `l^inf` radius.
    pub delta: f64,
    pub p: f64,
    pub m_env: u32,
    pub battery: PsiBattery,
    /// Smallest moment over the battery at `T` under `W`.
    pub moment_w: f64,
    /// `2 T^p / log T`.
    pub threshold_w: f64,
    /// Smallest moment over battery and sampled `V` at radius `delta`.
    pub moment_ball: f64,
    /// `T^p / log T`.
    pub threshold_ball: f64,
    pub samples: usize,
}

fn min_moment(op: &BlockJacobiOperator, n: i64, packets: &[(String, WavePacket)], t: f64, p: f64) -> Result<f64> {
    packets
        .iter()
        .map(|(_, psi)| moment_on(op, n, psi, t, p))
        .try_fold(f64::INFINITY, |a, m| m.map(|m| a.min(m)))
}

/// Smallest dyadic `T >= m_env` (and `T >= 2`) at which every battery state
/// has `<psi, |X(T)|^p psi> > 2 T^p / log T` under `W`, then the largest
/// `delta <= 1` found by bisection for which every sampled `V = W + delta u`
/// (`u` uniform in `[-1, 1]` on the window) keeps the moment above
/// `T^p / log T`.
pub fn lest2_probe(w: &[f64], p: f64, m_env: u32, battery: PsiBattery) -> Result<Lest2Certificate> {
    if !(p > 0.0) {
        return Err(Error::InvalidSpec(format!("moment order must be positive, got {p}")));
    }
    let ow = schrodinger_operator(w)?;
    let packets = battery.packets(m_env);
    for (_, psi) in &packets {
        check_envelope(psi, m_env)?;
    }
    let radius = packets.iter().map(|(_, psi)| psi.radius()).max().unwrap_or(0);
    let bound = ow.norm_bound();

    let mut t = (m_env.max(2) as f64).log2().ceil().exp2();
    let (t, moment_w) = loop {
        if t > MAX_CERT_TIME {
            return Err(Error::NoCertificateFound(format!(
                "no dyadic T <= {MAX_CERT_TIME} with moment > 2 T^p / log T (p = {p}, m = {m_env})"
            )));
        }
        let mw = min_moment(&ow, half_width(bound, t, radius), &packets, t, p)?;
        if mw > 2.0 * t.powf(p) / t.ln() {
            break (t, mw);
        }
        t *= 2.0;
    };

    // ball samples: potentials with period covering the whole window
    let n = half_width(bound + 1.0, t, radius);
    let len = w.len() * ((2 * n + 1) as usize).div_ceil(w.len());
    let mut rng = ChaCha8Rng::seed_from_u64(BALL_SEED);
    let directions: Vec<Vec<f64>> = (0..BALL_SAMPLES)
        .map(|_| (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let threshold_ball = t.powf(p) / t.ln();
    let ball_min = |delta: f64| -> Result<f64> {
        directions
            .iter()
            .map(|u| {
                let v: Vec<f64> = (0..len).map(|i| w[i % w.len()] + delta * u[i]).collect();
                min_moment(&schrodinger_operator(&v)?, n, &packets, t, p)
            })
            .try_fold(f64::INFINITY, |a, m| m.map(|m| a.min(m)))
    };
    let (delta, moment_ball) = {
        let at_one = ball_min(1.0)?;
        if at_one > threshold_ball {
            (1.0, at_one)
        } else {
            let (mut lo, mut hi, mut best) = (0.0, 1.0, f64::NAN);
            for _ in 0..DELTA_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let m = ball_min(mid)?;
                if m > threshold_ball {
                    lo = mid;
                    best = m;
                } else {
                    hi = mid;
                }
            }
            if lo == 0.0 {
                return Err(Error::NoCertificateFound(format!(
                    "no delta >= 2^-{DELTA_BISECTIONS} keeps the sampled moments above T^p / log T at T = {t}"
                )));
            }
            (lo, best)
        }
    };
    Ok(Lest2Certificate {
        t,
        delta,
        p,
        m_env,
        battery,
        moment_w,
        threshold_w: 2.0 * t.powf(p) / t.ln(),
        moment_ball,
        threshold_ball,
        samples: BALL_SAMPLES,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Period `p_k` of the approximant.
    pub period: usize,
    /// `W_k` over one period.
    pub potential: Vec<f64>,
    /// Amplitude of the perturbation added at this stage.
    pub epsilon: f64,
    pub delta: f64,
    pub t: f64,
    pub p: f64,
    pub m_env: u32,
    pub battery: PsiBattery,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationRow {
    pub stage: usize,
    pub t: f64,
    /// Smallest moment over the battery under the final `V` at `T_k`.
    pub moment: f64,
    /// `T_k^p / log T_k`.
    pub threshold: f64,
    /// `||V - W_k||_inf`.
    pub distance: f64,
    pub delta: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericReport {
    pub stages: Vec<StageRecord>,
    pub verification: Vec<VerificationRow>,
    pub final_potential: Vec<f64>,
}

impl GenericReport {
    pub fn all_ok(&self) -> bool {
        self.verification.iter().all(|r| r.ok)
    }
}

/// `+1` on the first half of the period and `-1` on the second.
fn stage_pattern(period: usize) -> Vec<f64> {
    (0..period).map(|i| if i < period / 2 { 1.0 } else { -1.0 }).collect()
}

/// Finite-stage limit-periodic construction: `W_1 = 0`, and for `k >= 2`
/// `W_k = W_{k-1} + eps_k * pattern` at period `p_k = 2 p_{k-1}` with
/// `eps_k = delta_{k-1} / 4`. Each stage is certified by [`lest2_probe`]
/// and `delta_k` is capped at `0.45 delta_{k-1}`. The final potential is
/// re-checked at every certified time.
pub fn generic_builder(stages: usize, p: f64, m_env: u32, battery: PsiBattery) -> Result<GenericReport> {
    if stages == 0 || stages > MAX_STAGES {
        return Err(Error::InvalidSpec(format!(
            "generic builder runs 1..={MAX_STAGES} stages, got {stages}"
        )));
    }
    let mut records: Vec<StageRecord> = Vec::with_capacity(stages);
    let mut w = vec![0.0];
    for k in 1..=stages {
        let mut epsilon = 0.0;
        if let Some(prev) = records.last() {
            let period = 2 * prev.period;
            epsilon = prev.delta / 4.0;
            let pattern = stage_pattern(period);
            w = (0..period).map(|i| prev.potential[i % prev.period] + epsilon * pattern[i]).collect();
        }
        let cert = lest2_probe(&w, p, m_env, battery)
            .map_err(|e| match e {
                Error::NoCertificateFound(msg) => Error::NoCertificateFound(format!("stage {k}: {msg}")),
                other => other,
            })?;
        let delta = match records.last() {
            Some(prev) => cert.delta.min(0.45 * prev.delta),
            None => cert.delta,
        };
        records.push(StageRecord {
            stage: k,
            period: w.len(),
            potential: w.clone(),
            epsilon,
            delta,
            t: cert.t,
            p,
            m_env,
            battery,
        });
    }
    let v = w;
    let ov = schrodinger_operator(&v)?;
    let packets = battery.packets(m_env);
    let radius = packets.iter().map(|(_, psi)| psi.radius()).max().unwrap_or(0);
    let verification = records
        .iter()
        .map(|r| {
            let n = half_width(ov.norm_bound(), r.t, radius);
            let moment = min_moment(&ov, n, &packets, r.t, p)?;
            let threshold = r.t.powf(p) / r.t.ln();
            let distance = sup_distance(&v, &r.potential);
            Ok(VerificationRow {
                stage: r.stage,
                t: r.t,
                moment,
                threshold,
                distance,
                delta: r.delta,
                ok: moment > threshold && distance < r.delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GenericReport {
        stages: records,
        verification,
        final_potential: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn envelope() {
        assert!(check_envelope(&WavePacket::delta(1, 0), 1).is_ok());
        let far = WavePacket::from_scalars(1, &[(5, C64::new(0.5, 0.0))]);
        assert!(matches!(check_envelope(&far, 1), Err(Error::PsiEnvelopeViolated { site: 5, m: 1 })));
        assert!(check_envelope(&far, 4).is_ok());
        for m in [1, 3] {
            for (_, psi) in PsiBattery::Envelope.packets(m) {
                assert!(check_envelope(&psi, m).is_ok());
                assert!((psi.norm() - 1.0).abs() < 1e-12);
            }
        }
        let r = perturbation_stability(&[0.0], &[0.1], &far, 1.0, 2.0, 1);
        assert!(matches!(r, Err(Error::PsiEnvelopeViolated { .. })));
    }

    #[test]
    fn stability_shrinks_with_delta() {
        let psi = WavePacket::delta(1, 0);
        let same = perturbation_stability(&[0.3, -0.2], &[0.3, -0.2], &psi, 5.0, 2.0, 1).unwrap();
        assert_eq!(same.difference, 0.0);
        let diff = |d: f64| perturbation_stability(&[0.0], &[d, -d], &psi, 5.0, 2.0, 1).unwrap();
        for d in [0.1, 0.05, 0.025] {
            let (full, half) = (diff(d), diff(d / 2.0));
            assert!(half.difference <= 0.7 * full.difference, "{d}: {full:?} {half:?}");
            let ceiling = 2.0 * ((2 * full.half_width + 1) as f64).powi(2);
            assert!(full.difference <= ceiling);
        }
    }

    #[test]
    fn free_certificate_is_four() {
        let c = lest2_probe(&[0.0], 2.0, 1, PsiBattery::Delta).unwrap();
        assert_eq!(c.t, 4.0);
        assert!(c.delta > 0.0 && c.delta <= 1.0);
        // exact free moment 2 T^2
        assert!((c.moment_w - 32.0).abs() < 1e-8);
        assert!(c.moment_w > c.threshold_w && c.moment_ball > c.threshold_ball);
    }

    #[test]
    fn period_two_certificate() {
        let c = lest2_probe(&[1.0, -1.0], 1.0, 1, PsiBattery::Delta).unwrap();
        assert!(c.t <= 64.0, "{c:?}");
        assert!(c.delta > 0.0);
    }

    #[test]
    fn generic_stages() {
        let one = generic_builder(1, 2.0, 1, PsiBattery::Delta).unwrap();
        assert_eq!(one.final_potential, vec![0.0]);
        assert_eq!(one.stages[0].t, 4.0);
        let rep = generic_builder(3, 2.0, 1, PsiBattery::Delta).unwrap();
        assert_eq!(rep.stages.len(), 3);
        for pair in rep.stages.windows(2) {
            assert!(pair[1].delta < pair[0].delta / 2.0);
            assert_eq!(pair[1].period % pair[0].period, 0);
        }
        for row in &rep.verification {
            assert!(row.distance < row.delta, "{row:?}");
        }
        assert!(rep.all_ok(), "{:?}", rep.verification);
        assert!(generic_builder(6, 2.0, 1, PsiBattery::Delta).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn stability_vanishes_for_equal_potentials(
            w in proptest::collection::vec(-1.0f64..1.0, 1..4),
            t in 0.5f64..4.0,
        ) {
            let r = perturbation_stability(&w, &w, &WavePacket::delta(1, 0), t, 1.5, 1).unwrap();
            prop_assert_eq!(r.difference, 0.0);
        }

        #[test]
        fn sup_distance_is_a_metric(
            a in proptest::collection::vec(-1.0f64..1.0, 1..5),
            b in proptest::collection::vec(-1.0f64..1.0, 1..5),
            c in proptest::collection::vec(-1.0f64..1.0, 1..5),
        ) {
            prop_assert_eq!(sup_distance(&a, &a), 0.0);
            prop_assert_eq!(sup_distance(&a, &b), sup_distance(&b, &a));
            prop_assert!(sup_distance(&a, &c) <= sup_distance(&a, &b) + sup_distance(&b, &c) + 1e-15);
        }
    }
}
