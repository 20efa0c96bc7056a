//! Closed-form bound objects: the chaining variance proxy `v_l^2`, the
//! Bernstein tail, the Orlicz maximal bound, `psi_l(delta)` with its infimum,
//! the uniform-in-bandwidth right-hand side, and the polynomial-entropy
//! specialisation with its rates.
//!
//! `log` is the natural logarithm except in the level indices, which use
//! `log2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::function_family::EntropyModel;
use crate::local_process::ceil_log2;

/// Points of the logarithmic grid used by [`inf_psi_l`].
pub const INF_GRID_POINTS: usize = 512;
/// The grid covers `[2^-INF_GRID_OCTAVES, 1]`.
pub const INF_GRID_OCTAVES: f64 = 60.0;

/// Reading of the mixing term `l log2 / (c2)` in `v_l^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VlReading {
    /// `c2 = 2c`.
    #[default]
    TwoC,
    /// `c2 = c^2`.
    CSquared,
}

/// Rounding of the lowest level `-log2(g_sup b_n)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerIndex {
    #[default]
    Ceil,
    Floor,
}

/// Normalisation of `psi_l`: the sum form, used in the bound, is `sqrt(n)`
/// times the per-root-n form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    Sum,
    PerRootN,
}

fn default_one() -> f64 {
    1.0
}

fn default_q() -> f64 {
    2.0
}

/// Inputs of the uniform-in-bandwidth right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    /// `q` in `(1, inf]`.
    #[serde(default = "default_q")]
    pub q: f64,
    pub c: f64,
    pub kappa_sup: f64,
    pub g_sup: f64,
    pub a_n: f64,
    pub b_n: f64,
    #[serde(default = "default_one")]
    pub c_abs: f64,
    #[serde(default = "default_one")]
    pub d_c: f64,
    #[serde(default)]
    pub lower: LowerIndex,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::validation("n", "must be >= 2"));
        }
        if !(self.q > 1.0) {
            return Err(Error::validation("q", format!("must exceed 1, got {}", self.q)));
        }
        if !(self.kappa_sup.is_finite() && self.kappa_sup >= 0.0) {
            return Err(Error::validation("kappa_sup", format!("must be non-negative, got {}", self.kappa_sup)));
        }
        for (name, v) in [
            ("c", self.c),
            ("g_sup", self.g_sup),
            ("c_abs", self.c_abs),
            ("d_c", self.d_c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        crate::local_process::BandwidthRange::new(self.a_n, self.b_n)?
            .validate_for(self.n, self.g_sup)
    }

    /// `(lowest, highest)` level of the sum.
    pub fn level_range(&self) -> Result<(u32, u32)> {
        let t = -(self.g_sup * self.b_n).log2();
        let lo = match self.lower {
            LowerIndex::Ceil => t.ceil(),
            LowerIndex::Floor => t.floor(),
        }
        .max(0.0) as u32;
        let hi = ceil_log2(self.n);
        if lo > hi {
            return Err(Error::validation(
                "b_n",
                format!(
                    "level range is empty ({lo} > {hi}); need 1/(g_sup n) <= b_n < 1/g_sup"
                ),
            ));
        }
        Ok((lo, hi))
    }
}

/// Parameters of the polynomial entropy model `omega_n(delta) <= C_n delta^-v_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub c_n: f64,
    pub v_n: f64,
    #[serde(default = "default_one")]
    pub phi: f64,
    #[serde(default = "default_one")]
    pub g_const: f64,
}

impl RateInputs {
    pub fn new(c_n: f64, v_n: f64) -> Self {
        Self {
            c_n,
            v_n,
            phi: 1.0,
            g_const: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_n", self.c_n),
            ("v_n", self.v_n),
            ("phi", self.phi),
            ("g_const", self.g_const),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `v_l^2 = 4 (l log2 / (2c) 2^-l + 2^-(l-1) / (1 - e^-2c))`.
pub fn v_l_squared(l: u32, c: f64) -> f64 {
    v_l_squared_with(l, c, VlReading::TwoC)
}

pub fn v_l_squared_with(l: u32, c: f64, reading: VlReading) -> f64 {
    let lf = l as f64;
    let denom = match reading {
        VlReading::TwoC => 2.0 * c,
        VlReading::CSquared => c * c,
    };
    4.0 * (lf * std::f64::consts::LN_2 / denom * (-lf).exp2()
        + (1.0 - lf).exp2() / (1.0 - (-2.0 * c).exp()))
}

/// A constant `M` with `v_l^2 <= M l / 2^l` for every `l >= 1`.
pub fn v_l_constant(c: f64) -> f64 {
    4.0 * (std::f64::consts::LN_2 / (2.0 * c) + 2.0 / (1.0 - (-2.0 * c).exp()))
}

/// `v_l^2` with the level-0 term read at `l = 1`.
fn v_l_squared_floor(l: u32, c: f64) -> f64 {
    v_l_squared(l.max(1), c)
}

/// `exp(-C x^2 / (v_l^2 k^2 + k^2/n + x k log(n)^2 / sqrt(n)))`.
pub fn bernstein_tail(x: f64, l: u32, n: usize, kappa_sup: f64, c: f64, c_bern: f64) -> Result<f64> {
    Ok(bernstein_log_tail(x, l, n, kappa_sup, c, c_bern)?.exp())
}

/// Logarithm of [`bernstein_tail`], free of underflow.
pub fn bernstein_log_tail(x: f64, l: u32, n: usize, kappa_sup: f64, c: f64, c_bern: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be non-negative, got {x}")));
    }
    if n < 2 {
        return Err(Error::Domain("n must be >= 2".into()));
    }
    let nf = n as f64;
    let k2 = kappa_sup * kappa_sup;
    let denom = v_l_squared_floor(l, c) * k2 + k2 / nf + x * kappa_sup * nf.ln().powi(2) / nf.sqrt();
    Ok(-c_bern * x * x / denom)
}

/// `K k (n^-1/2 log(n)^2 L + sqrt(v_l^2 + 1/n) sqrt(L))` with
/// `L = log(1 + 2^l omega^2)`.
pub fn orlicz_max_bound(l: u32, n: usize, omega_val: f64, c: f64, kappa_sup: f64, k_const: f64) -> Result<f64> {
    if !(omega_val >= 1.0) {
        return Err(Error::Domain(format!("omega must be >= 1, got {omega_val}")));
    }
    let nf = n as f64;
    let big_l = (1.0 + (l as f64).exp2() * omega_val * omega_val).ln();
    Ok(k_const
        * kappa_sup
        * (nf.ln().powi(2) * big_l / nf.sqrt() + (v_l_squared_floor(l, c) + 1.0 / nf).sqrt() * big_l.sqrt()))
}

/// `(q - 1) / q`, equal to 1 at `q = inf`.
fn holder_exponent(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        (q - 1.0) / q
    }
}

/// `psi_l(delta)`. At `delta = 0` the entropy is read as its limit, which is
/// infinite for the polynomial model.
pub fn psi_l(l: u32, delta: f64, n: usize, q: f64, entropy: &EntropyModel, scaling: Scaling) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be non-negative, got {delta}")));
    }
    Ok(psi_l_raw(l, delta, n, q, entropy, scaling))
}

fn psi_l_raw(l: u32, delta: f64, n: usize, q: f64, entropy: &EntropyModel, scaling: Scaling) -> f64 {
    let nf = n as f64;
    let lf = l as f64;
    let ln_n = nf.ln();
    let level = (lf + 1.0).max(entropy.log_omega(delta));
    let e = holder_exponent(q);
    let inner = ln_n * ln_n * (lf + 1.0) / nf
        + (lf / (lf.exp2() * nf)).max(1.0 / (nf * nf)).sqrt() * (lf + 1.0).sqrt();
    let bracket = inner.powf(e) + (-e * (lf + 1.0)).exp2();
    let linear = if delta == 0.0 { 0.0 } else { delta * bracket };
    match scaling {
        Scaling::Sum => {
            ln_n * ln_n * level + (lf * nf / lf.exp2()).max(1.0).sqrt() * level.sqrt() + nf * linear
        }
        Scaling::PerRootN => {
            ln_n * ln_n * level / nf.sqrt()
                + (lf / lf.exp2()).max(1.0 / nf).sqrt() * level.sqrt()
                + nf.sqrt() * linear
        }
    }
}

/// Minimiser and minimum of `psi_l` over `delta >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiMin {
    pub delta: f64,
    pub value: f64,
}

/// `inf_{delta >= 0} psi_l(delta)`.
///
/// Constant entropy makes `psi_l` nondecreasing, so the minimiser is 0. For
/// the polynomial model the search runs over a logarithmic grid on
/// `[2^-60, 1]`, the kink where `log omega = l + 1`, and the point just
/// above 1 where `omega` drops to 1, then refines the best grid bracket by
/// golden-section search in `log delta`.
pub fn inf_psi_l(l: u32, n: usize, q: f64, entropy: &EntropyModel, scaling: Scaling) -> PsiMin {
    let psi = |d: f64| psi_l_raw(l, d, n, q, entropy, scaling);
    let (c_n, v_n) = match *entropy {
        EntropyModel::ExactFinite { .. } => {
            return PsiMin {
                delta: 0.0,
                value: psi(0.0),
            }
        }
        EntropyModel::Polynomial { c_n, v_n } => (c_n, v_n),
    };

    let grid: Vec<f64> = (0..INF_GRID_POINTS)
        .map(|i| (-INF_GRID_OCTAVES * (1.0 - i as f64 / (INF_GRID_POINTS - 1) as f64)).exp2())
        .collect();
    let mut best = PsiMin {
        delta: grid[0],
        value: psi(grid[0]),
    };
    let mut best_i = 0;
    for (i, &d) in grid.iter().enumerate() {
        let v = psi(d);
        if v < best.value {
            best = PsiMin { delta: d, value: v };
            best_i = i;
        }
    }

    let lo = grid[best_i.saturating_sub(1)].ln();
    let hi = grid[(best_i + 1).min(grid.len() - 1)].ln();
    let refined = golden_min(|t| psi(t.exp()), lo, hi);
    let mut candidates = vec![refined.exp(), next_up(1.0)];
    let kink = ((c_n.ln() - (l as f64 + 1.0)) / v_n).exp();
    if kink > 0.0 && kink <= 1.0 {
        candidates.push(kink);
    }
    for d in candidates {
        let v = psi(d);
        if v < best.value {
            best = PsiMin { delta: d, value: v };
        }
    }
    best
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

/// Golden-section search for a minimiser of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// One row of the bound table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub l: u32,
    pub delta_star: f64,
    pub psi_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub rows: Vec<BoundRow>,
    pub rhs: f64,
}

/// Per-level infima and the total
/// `C k / sqrt(n a_n) + D k / sqrt(n a_n) sum_l inf psi_l`.
pub fn bound_table(inputs: &BoundInputs, entropy: &EntropyModel) -> Result<BoundTable> {
    inputs.validate()?;
    entropy.validate()?;
    let (lo, hi) = inputs.level_range()?;
    let rows: Vec<BoundRow> = (lo..=hi)
        .map(|l| {
            let m = inf_psi_l(l, inputs.n, inputs.q, entropy, Scaling::Sum);
            BoundRow {
                l,
                delta_star: m.delta,
                psi_value: m.value,
            }
        })
        .collect();
    let pre = inputs.kappa_sup / (inputs.n as f64 * inputs.a_n).sqrt();
    let sum: f64 = rows.iter().map(|r| r.psi_value).sum();
    Ok(BoundTable {
        rhs: inputs.c_abs * pre + inputs.d_c * pre * sum,
        rows,
    })
}

/// Writes the rows as `l,delta_star,psi_l_value` followed by a `total` row
/// carrying the right-hand side in the last column.
pub fn write_bound_table_csv<W: std::io::Write>(table: &BoundTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["l", "delta_star", "psi_l_value"])?;
    for r in &table.rows {
        w.write_record([r.l.to_string(), fmt_f64(r.delta_star), fmt_f64(r.psi_value)])?;
    }
    w.write_record(["total".to_string(), String::new(), fmt_f64(table.rhs)])?;
    w.flush()?;
    Ok(())
}

pub fn theorem1_rhs(inputs: &BoundInputs, entropy: &EntropyModel) -> Result<f64> {
    Ok(bound_table(inputs, entropy)?.rhs)
}

/// `G log(n)^2 E + G sqrt(l n / 2^l) sqrt(E) + G n delta log(n)^{3/2} / 2^{(l+1)/2}`
/// with `E = log C_n - v_n log delta`, valid for
/// `delta < exp((log C_n - (l+1)) / v_n)`.
pub fn poly_psi_upper(l: u32, delta: f64, n: usize, rate: &RateInputs) -> Result<f64> {
    rate.validate()?;
    let lf = l as f64;
    let bound = ((rate.c_n.ln() - (lf + 1.0)) / rate.v_n).exp();
    if !(delta > 0.0 && delta < bound) {
        return Err(Error::Domain(format!(
            "delta must lie in (0, {bound}) at level {l}, got {delta}"
        )));
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let ent = rate.c_n.ln() - rate.v_n * delta.ln();
    let g = rate.g_const;
    Ok(g * ln_n * ln_n * ent
        + g * (lf * nf / lf.exp2()).sqrt() * ent.sqrt()
        + g * nf * delta * ln_n.powf(1.5) / (0.5 * (lf + 1.0)).exp2())
}

/// `delta_l = C_n^{1/v_n} / (2^{(l+1)/v_n} sqrt(n) (g b_n)^{1/v_n} log(n)^{3/2})`.
pub fn poly_delta_l(l: u32, n: f64, rate: &RateInputs, g_b: f64) -> Result<f64> {
    rate.validate()?;
    if !(n >= 3.0) {
        return Err(Error::Domain(format!("n must be at least 3, got {n}")));
    }
    if !(g_b > 0.0 && g_b < 1.0) {
        return Err(Error::Domain(format!("g_sup * b_n must lie in (0, 1), got {g_b}")));
    }
    let iv = 1.0 / rate.v_n;
    Ok(rate.c_n.powf(iv)
        / ((l as f64 + 1.0) * iv).exp2()
        / n.sqrt()
        / g_b.powf(iv)
        / n.ln().powf(1.5))
}

/// `sqrt(b_n / a_n) max(C_n^{1/v_n}, sqrt(-log(g b_n) v_n log n), -log(g b_n))`.
pub fn poly_rate(n: f64, a_n: f64, b_n: f64, rate: &RateInputs, g_sup: f64) -> Result<f64> {
    rate.validate()?;
    let gb = g_sup * b_n;
    if !(gb < 1.0) {
        return Err(Error::Domain(format!("g_sup * b_n must be below 1, got {gb}")));
    }
    if !(a_n > 0.0 && b_n >= a_n) {
        return Err(Error::Domain("need 0 < a_n <= b_n".into()));
    }
    let lg = -gb.ln();
    let terms = [
        rate.c_n.powf(1.0 / rate.v_n),
        (lg * rate.v_n * n.ln()).sqrt(),
        lg,
    ];
    Ok((b_n / a_n).sqrt() * terms.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn check_rate_domain(n: f64, a_n: f64) -> Result<()> {
    if !(a_n > 0.0 && a_n < 1.0) {
        return Err(Error::Domain(format!("a_n must lie in (0, 1), got {a_n}")));
    }
    if !(n > 1.0) {
        return Err(Error::Domain(format!("n must exceed 1, got {n}")));
    }
    Ok(())
}

/// `sqrt(-log a_n) sqrt(log n max -log a_n)`.
pub fn kde_rate(n: f64, a_n: f64) -> Result<f64> {
    check_rate_domain(n, a_n)?;
    let la = -a_n.ln();
    Ok(la.sqrt() * n.ln().max(la).sqrt())
}

/// `sqrt(log log n max -log a_n)`.
pub fn einmahl_mason_rate(n: f64, a_n: f64) -> Result<f64> {
    check_rate_domain(n, a_n)?;
    Ok(n.ln().ln().max(-a_n.ln()).sqrt())
}

/// `log(n)^3 log log n / sqrt(n a_n)`.
pub fn schedule_predicate(n: f64, a_n: f64) -> f64 {
    let ln_n = n.ln();
    ln_n.powi(3) * ln_n.ln() / (n * a_n).sqrt()
}
