//! Mixing constants and dependence diagnostics.
//!
//! A constant `c` is certified for a law when `alpha(k) <= exp(-2 c k)` for
//! every lag `k >= 1`:
//!
//! * m-dependent, `m >= 1`: `alpha(k) <= 1/4` always and `alpha(k) = 0` for
//!   `k > m`, so `c = ln(4) / (2m)`;
//! * Gaussian AR(1): `alpha(k) <= rho_max(k) / 4 = |rho|^k / 4` (the maximal
//!   correlation of a Gaussian pair equals its linear correlation), so
//!   `c = -ln|rho| / 2`;
//! * finite Markov chains started at stationarity: `alpha(k) <= beta(k)`
//!   with `beta(k) = sum_i pi_i TV(P^k(i, .), pi)`. We scan
//!   `-ln(min(1/4, beta(k))) / (2k)` over the lags where `beta(k)` is still
//!   resolvable in double precision, and cap it with the asymptotic rate
//!   `-ln(rho_2) / 2` minus the largest observed `ln(beta(k) / rho_2^k)`
//!   spread over the scanned horizon;
//! * lags with `alpha(k) = 0` for all `k >= 1` (iid, 0-dependent, rho = 0,
//!   one-step chains) report the spec's `default_c`.
//!
//! Measurable functions of each coordinate (the normal cdf, emissions, iid
//! noise for `Z`) cannot increase mixing coefficients, so the constant of the
//! latent sequence applies to the `(X_i, Z_i)` pairs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Generator, ProcessKind, ProcessSpec};
use crate::error::{Error, Result};
use crate::rng::base_stream;

const MARKOV_SCAN: usize = 2000;
const UNIT_ROOT_TOL: f64 = 1e-10;
/// Below this, `beta(k)` is dominated by rounding in `P^k - pi`.
const BETA_FLOOR: f64 = 1e-13;

fn to_matrix(p: &[Vec<f64>]) -> DMatrix<f64> {
    let s = p.len();
    DMatrix::from_fn(s, s, |i, j| p[i][j])
}

/// Stationary law `pi` with `pi P = pi`.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let s = transition.len();
    let p = to_matrix(transition);
    let mut a = p.transpose() - DMatrix::identity(s, s);
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(s);
    b[s - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NoValidMixing("transition matrix has no unique stationary law".into()))?;
    if pi.iter().any(|&x| x < -1e-12 || !x.is_finite()) {
        return Err(Error::NoValidMixing("stationary law is not a probability vector".into()));
    }
    Ok(pi.iter().map(|&x| x.max(0.0)).collect())
}

/// Second largest eigenvalue modulus of the transition matrix.
pub fn second_eigen_modulus(transition: &[Vec<f64>]) -> f64 {
    if transition.len() < 2 {
        return 0.0;
    }
    let mut moduli: Vec<f64> = to_matrix(transition)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli[1]
}

/// `beta(k) = sum_i pi_i * 1/2 sum_j |P^k(i, j) - pi_j|` for `k = 1..=lags`.
pub fn markov_beta(transition: &[Vec<f64>], lags: usize) -> Result<Vec<f64>> {
    let pi = stationary_distribution(transition)?;
    let p = to_matrix(transition);
    let s = pi.len();
    let mut pk = p.clone();
    let mut out = Vec::with_capacity(lags);
    for _ in 0..lags {
        let beta = (0..s)
            .map(|i| pi[i] * 0.5 * (0..s).map(|j| (pk[(i, j)] - pi[j]).abs()).sum::<f64>())
            .sum();
        out.push(beta);
        pk = &pk * &p;
    }
    Ok(out)
}

/// `|P(S_0 in a, S_k in b) - P(S_0 in a) P(S_k in b)|` for the stationary
/// chain, a lower bound on `alpha(k)`.
pub fn markov_event_alpha(transition: &[Vec<f64>], k: usize, a: &[usize], b: &[usize]) -> Result<f64> {
    let pi = stationary_distribution(transition)?;
    let p = to_matrix(transition);
    let pk = p.pow(k as u32);
    let pi_b: f64 = b.iter().map(|&j| pi[j]).sum();
    let joint_minus: f64 = a
        .iter()
        .map(|&i| pi[i] * (b.iter().map(|&j| pk[(i, j)]).sum::<f64>() - pi_b))
        .sum();
    Ok(joint_minus.abs())
}

/// `|P(W_0 <= 0, W_k <= 0) - 1/4| = arcsin(rho^k) / (2 pi)` for a stationary
/// Gaussian AR(1), a lower bound on `alpha(k)`.
pub fn ar1_orthant_alpha(rho: f64, k: usize) -> f64 {
    (rho.powi(k as i32)).asin().abs() / (2.0 * std::f64::consts::PI)
}

fn markov_c(transition: &[Vec<f64>], default_c: f64) -> Result<f64> {
    let rho2 = second_eigen_modulus(transition);
    if rho2 >= 1.0 - UNIT_ROOT_TOL {
        return Err(Error::NoValidMixing(format!(
            "second eigenvalue modulus {rho2} = 1: the chain is periodic or reducible"
        )));
    }
    let betas = markov_beta(transition, MARKOV_SCAN)?;
    let mut c = f64::INFINITY;
    let mut log_prefactor: f64 = 0.0;
    let mut horizon = 1.0;
    for (idx, &beta) in betas.iter().enumerate() {
        if beta < BETA_FLOOR {
            break;
        }
        let k = (idx + 1) as f64;
        c = c.min(-beta.min(0.25).ln() / (2.0 * k));
        if rho2 > 0.0 {
            log_prefactor = log_prefactor.max(beta.ln() - k * rho2.ln());
        }
        horizon = k;
    }
    if rho2 > 0.0 {
        c = c.min((-rho2.ln() - log_prefactor / horizon) / 2.0);
    }
    if c.is_infinite() {
        // beta vanishes at every scanned lag.
        return Ok(default_c);
    }
    if !(c > 0.0) {
        return Err(Error::NoValidMixing(format!("scan produced c = {c}")));
    }
    Ok(c)
}

/// Largest constant `c` we can certify for `alpha(k) <= exp(-2 c k)`.
pub fn certified_mixing_c(spec: &ProcessSpec) -> Result<f64> {
    match &spec.kind {
        ProcessKind::Iid | ProcessKind::MDependent { m: 0 } => Ok(spec.default_c),
        ProcessKind::MDependent { m } => Ok(4f64.ln() / (2.0 * *m as f64)),
        ProcessKind::GaussianAr1 { rho } => {
            if *rho == 0.0 {
                Ok(spec.default_c)
            } else if rho.abs() < 1.0 {
                Ok(-rho.abs().ln() / 2.0)
            } else {
                Err(Error::NoValidMixing(format!("|rho| = {} >= 1", rho.abs())))
            }
        }
        ProcessKind::FiniteMarkov { transition, .. } => markov_c(transition, spec.default_c),
    }
}

/// `X_{t + offset} in [lo, hi)` (future events) or `X_{t - offset}` (past).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalEvent {
    pub offset: usize,
    pub lo: f64,
    pub hi: f64,
}

impl IntervalEvent {
    pub fn at(lo: f64, hi: f64) -> Self {
        Self { offset: 0, lo, hi }
    }

    fn holds(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }
}

/// A past cylinder `A` (coordinates `t - offset`) and a future cylinder `B`
/// (coordinates `t + k + offset`), each an intersection of interval events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderPair {
    pub past: Vec<IntervalEvent>,
    pub future: Vec<IntervalEvent>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaEstimate {
    /// `max |P(A B) - P(A) P(B)|` over the family, clamped to `[0, 1/4]`.
    pub value: f64,
    pub std_error: f64,
    /// Index of the maximizing pair.
    pub pair: usize,
    pub replications: usize,
}

/// Monte Carlo lower bound on `alpha(k)` restricted to a finite family of
/// cylinder events. Each replication draws an independent stationary path
/// just long enough to cover the events, so the indicator pairs are iid
/// across replications and the covariance estimate has a plain standard
/// error.
pub fn empirical_alpha_lower(
    spec: &ProcessSpec,
    k: usize,
    events: &[CylinderPair],
    replications: usize,
) -> Result<AlphaEstimate> {
    if events.is_empty() {
        return Err(Error::validation("events", "event family is empty"));
    }
    if k == 0 {
        return Err(Error::validation("k", "lag must be >= 1"));
    }
    if replications < 2 {
        return Err(Error::validation("replications", "need at least 2"));
    }
    let span_past = events
        .iter()
        .flat_map(|e| e.past.iter().map(|x| x.offset))
        .max()
        .unwrap_or(0);
    let span_future = events
        .iter()
        .flat_map(|e| e.future.iter().map(|x| x.offset))
        .max()
        .unwrap_or(0);
    let t = span_past;
    let len = (t + k + span_future + 1).max(2);
    let mut probe = spec.clone();
    probe.n = len;
    let gen = Generator::new(&probe)?;
    let mut rng = base_stream(spec.seed);
    // Running counts of A, B and A and B per pair.
    let mut hits = vec![(0.0f64, 0.0f64, 0.0f64); events.len()];
    let mut samples: Vec<Vec<(bool, bool)>> = vec![Vec::with_capacity(replications); events.len()];
    for _ in 0..replications {
        let path = gen.sample(len, &mut rng);
        for (e, ev) in events.iter().enumerate() {
            let a = ev.past.iter().all(|x| x.holds(path.xs[t - x.offset]));
            let b = ev.future.iter().all(|x| x.holds(path.xs[t + k + x.offset]));
            let h = &mut hits[e];
            h.0 += a as u8 as f64;
            h.1 += b as u8 as f64;
            h.2 += (a && b) as u8 as f64;
            samples[e].push((a, b));
        }
    }
    let r = replications as f64;
    let mut best = (0usize, -1.0f64, 0.0f64);
    for (e, &(sa, sb, sab)) in hits.iter().enumerate() {
        let (pa, pb, pab) = (sa / r, sb / r, sab / r);
        let cov = pab - pa * pb;
        let var = samples[e]
            .iter()
            .map(|&(a, b)| {
                let d = (a as u8 as f64 - pa) * (b as u8 as f64 - pb) - cov;
                d * d
            })
            .sum::<f64>()
            / (r - 1.0);
        let se = (var / r).sqrt();
        if cov.abs() > best.1 {
            best = (e, cov.abs(), se);
        }
    }
    Ok(AlphaEstimate {
        value: best.1.clamp(0.0, 0.25),
        std_error: best.2,
        pair: best.0,
        replications,
    })
}
