//! Young functions `psi_p(x) = exp(x^p) - 1` and Monte Carlo estimates of the
//! Luxemburg norm `inf{C > 0 : E psi_p(|Z| / C) <= 1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest samples accepted by [`orlicz_norm`].
pub const MIN_SAMPLES: usize = 100;
const MAX_ITER: usize = 400;

pub fn psi_p(x: f64, p: f64) -> f64 {
    x.powf(p).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrliczEstimate {
    pub p: f64,
    pub norm_estimate: f64,
    pub sample_count: usize,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    /// `|mean psi_p(|z| / C) - 1|` at the estimate.
    pub criterion_residual: f64,
}

/// Solves `mean psi_p(|z_i| / C) = 1` for `C` by bisection, stopping once the
/// bracket's relative width and the criterion residual are both within `tol`.
pub fn orlicz_norm(samples: &[f64], p: f64, tol: f64) -> Result<OrliczEstimate> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::validation("p", format!("must be >= 1, got {p}")));
    }
    if !(tol > 0.0) {
        return Err(Error::validation("tol", format!("must be positive, got {tol}")));
    }
    if samples.iter().any(|z| !z.is_finite()) {
        return Err(Error::validation("samples", "contain non-finite values"));
    }
    let abs: Vec<f64> = samples.iter().map(|z| z.abs()).collect();
    let max = abs.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(OrliczEstimate {
            p,
            norm_estimate: 0.0,
            sample_count: abs.len(),
            bracket: (0.0, 0.0),
            criterion_residual: 0.0,
        });
    }

    let crit = |c: f64| abs.iter().map(|&z| psi_p(z / c, p)).sum::<f64>() / abs.len() as f64;
    let (mut lo, mut hi) = (max / 50.0, max * 50.0);
    while crit(lo) <= 1.0 {
        lo /= 2.0;
    }
    while crit(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut mid = 0.5 * (lo + hi);
    let mut residual = (crit(mid) - 1.0).abs();
    for _ in 0..MAX_ITER {
        if (hi - lo) <= tol * hi && residual <= tol {
            break;
        }
        if crit(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        residual = (crit(mid) - 1.0).abs();
    }
    Ok(OrliczEstimate {
        p,
        norm_estimate: mid,
        sample_count: abs.len(),
        bracket: (lo, hi),
        criterion_residual: residual,
    })
}
