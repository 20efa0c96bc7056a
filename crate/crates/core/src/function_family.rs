//! Finite dictionaries of bounded functions, their envelopes and uniform
//! covering numbers.
//!
//! Covers are internal: ball centres are members of the family. Distances are
//! empirical `L_q(P)` distances for a finitely supported probability `P`, and
//! a ball of relative size `eps` has radius `2 * eps * envelope_sup`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest family accepted by [`covering_number_exact`].
pub const EXACT_COVER_MAX: usize = 12;

/// An evaluable bounded function on the real line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Func {
    Constant { value: f64 },
    /// `z^power / scale`, with `scale > 0`.
    Monomial { power: u32, scale: f64 },
    /// `1{z <= threshold}`.
    Indicator { threshold: f64 },
    /// `inner(z) + shift`.
    Shifted { inner: Box<Func>, shift: f64 },
    /// `factor * inner(z)`.
    Scaled { inner: Box<Func>, factor: f64 },
}

impl Func {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Func::Constant { value } => *value,
            Func::Monomial { power, scale } => z.powi(*power as i32) / scale,
            Func::Indicator { threshold } => {
                if z <= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Func::Shifted { inner, shift } => inner.eval(z) + shift,
            Func::Scaled { inner, factor } => factor * inner.eval(z),
        }
    }

    /// Exact `(min, max)` of the function over `[lo, hi]`.
    pub fn range_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            Func::Constant { value } => (*value, *value),
            Func::Monomial { power, scale } => {
                let p = *power as i32;
                let (a, b) = (lo.powi(p) / scale, hi.powi(p) / scale);
                if p == 0 || p % 2 == 1 {
                    (a.min(b), a.max(b))
                } else if lo <= 0.0 && hi >= 0.0 {
                    (0.0, a.max(b))
                } else {
                    (a.min(b), a.max(b))
                }
            }
            Func::Indicator { threshold } => {
                let min = if hi > *threshold { 0.0 } else { 1.0 };
                let max = if lo <= *threshold { 1.0 } else { 0.0 };
                (min, max)
            }
            Func::Shifted { inner, shift } => {
                let (a, b) = inner.range_on(lo, hi);
                (a + shift, b + shift)
            }
            Func::Scaled { inner, factor } => {
                let (a, b) = inner.range_on(lo, hi);
                if *factor >= 0.0 {
                    (factor * a, factor * b)
                } else {
                    (factor * b, factor * a)
                }
            }
        }
    }

    /// Exact mean of the function under the uniform law on `[lo, hi]`.
    pub fn mean_uniform(&self, lo: f64, hi: f64) -> f64 {
        let width = hi - lo;
        match self {
            Func::Constant { value } => *value,
            Func::Monomial { power, scale } => {
                let k = (*power + 1) as i32;
                (hi.powi(k) - lo.powi(k)) / (k as f64 * width * scale)
            }
            Func::Indicator { threshold } => ((threshold - lo) / width).clamp(0.0, 1.0),
            Func::Shifted { inner, shift } => inner.mean_uniform(lo, hi) + shift,
            Func::Scaled { inner, factor } => factor * inner.mean_uniform(lo, hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: String,
    pub func: Func,
}

impl Member {
    pub fn new(id: impl Into<String>, func: Func) -> Self {
        Self {
            id: id.into(),
            func,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.func.eval(z)
    }
}

/// A finite family of bounded functions on the domain `[domain.0, domain.1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionFamily {
    pub name: String,
    pub members: Vec<Member>,
    pub envelope_sup: f64,
    pub nonnegative: bool,
    pub domain: (f64, f64),
}

impl FunctionFamily {
    /// Builds a family, computing the envelope and sign flag exactly from the
    /// member ranges on `domain`.
    pub fn new(name: impl Into<String>, members: Vec<Member>, domain: (f64, f64)) -> Result<Self> {
        let env = members
            .iter()
            .map(|m| {
                let (a, b) = m.func.range_on(domain.0, domain.1);
                a.abs().max(b.abs())
            })
            .fold(0.0_f64, f64::max);
        Self::with_envelope(name, members, domain, env)
    }

    /// Builds a family with an explicit envelope, which must dominate every
    /// member on the domain.
    pub fn with_envelope(
        name: impl Into<String>,
        members: Vec<Member>,
        domain: (f64, f64),
        envelope_sup: f64,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::validation("members", "family must be non-empty"));
        }
        if !(domain.0 <= domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(Error::validation("domain", "need a finite interval lo <= hi"));
        }
        if !(envelope_sup >= 0.0) || !envelope_sup.is_finite() {
            return Err(Error::validation("envelope_sup", "must be finite and >= 0"));
        }
        let mut nonnegative = true;
        for m in &members {
            let (a, b) = m.func.range_on(domain.0, domain.1);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Evaluation(format!("member {} is unbounded on the domain", m.id)));
            }
            if a.abs().max(b.abs()) > envelope_sup * (1.0 + 1e-12) {
                return Err(Error::validation(
                    "envelope_sup",
                    format!("member {} exceeds the envelope {envelope_sup}", m.id),
                ));
            }
            nonnegative &= a >= 0.0;
        }
        Ok(Self {
            name: name.into(),
            members,
            envelope_sup,
            nonnegative,
            domain,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Checks `|f(z)| <= envelope_sup` at the given points for every member.
    pub fn check_envelope_at(&self, zs: &[f64]) -> Result<()> {
        let limit = self.envelope_sup * (1.0 + 1e-12) + 1e-300;
        for m in &self.members {
            for &z in zs {
                let v = m.eval(z);
                if !v.is_finite() {
                    return Err(Error::Evaluation(format!("member {} is not finite at z = {z}", m.id)));
                }
                if v.abs() > limit {
                    return Err(Error::Evaluation(format!(
                        "member {} exceeds the envelope at z = {z}: |{v}| > {}",
                        m.id, self.envelope_sup
                    )));
                }
            }
        }
        Ok(())
    }

    /// Multiplies every member and the envelope by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Domain(format!("scale factor must be positive, got {factor}")));
        }
        let members = self
            .members
            .iter()
            .map(|m| {
                Member::new(
                    m.id.clone(),
                    Func::Scaled {
                        inner: Box::new(m.func.clone()),
                        factor,
                    },
                )
            })
            .collect();
        Self::with_envelope(
            format!("{}*{factor}", self.name),
            members,
            self.domain,
            self.envelope_sup * factor,
        )
    }
}

/// Upper model for the uniform covering numbers `omega(delta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntropyModel {
    /// A finite family of the given cardinality.
    ExactFinite { cardinality: usize },
    /// `omega(delta) <= c_n * delta^(-v_n)` on `(0, 1]`.
    Polynomial { c_n: f64, v_n: f64 },
}

impl EntropyModel {
    pub fn for_family(family: &FunctionFamily) -> Self {
        EntropyModel::ExactFinite {
            cardinality: family.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EntropyModel::ExactFinite { cardinality: 0 } => {
                Err(Error::validation("entropy.cardinality", "must be >= 1"))
            }
            EntropyModel::Polynomial { c_n, v_n } if !(c_n > 0.0) || !(v_n > 0.0) => {
                Err(Error::validation("entropy", "c_n and v_n must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// `omega(delta)` for `delta > 0`.
    pub fn omega(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("omega needs delta > 0, got {delta}")));
        }
        Ok(self.omega_unchecked(delta))
    }

    pub(crate) fn omega_unchecked(&self, delta: f64) -> f64 {
        match *self {
            EntropyModel::ExactFinite { cardinality } => (cardinality as f64).max(1.0),
            EntropyModel::Polynomial { c_n, v_n } => {
                if delta > 1.0 {
                    1.0
                } else {
                    (c_n * delta.powf(-v_n)).max(1.0)
                }
            }
        }
    }

    /// `log omega(delta)`, with `delta = 0` read as the limit `delta -> 0`.
    pub(crate) fn log_omega(&self, delta: f64) -> f64 {
        match *self {
            EntropyModel::ExactFinite { cardinality } => (cardinality as f64).max(1.0).ln(),
            EntropyModel::Polynomial { c_n, v_n } => {
                if delta == 0.0 {
                    f64::INFINITY
                } else if delta > 1.0 {
                    0.0
                } else {
                    (c_n.ln() - v_n * delta.ln()).max(0.0)
                }
            }
        }
    }
}

/// Exponent `q` of the `L_q(P)` distance; `f64::INFINITY` selects the sup
/// distance over the support of `P`.
pub fn lq_distance(a: &[f64], b: &[f64], weights: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        a.iter()
            .zip(b)
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|((x, y), _)| (x - y).abs())
            .fold(0.0, f64::max)
    } else {
        let s: f64 = a
            .iter()
            .zip(b)
            .zip(weights)
            .map(|((x, y), w)| w * (x - y).abs().powf(q))
            .sum();
        s.powf(1.0 / q)
    }
}

/// A finitely supported measure; weights are normalized on use.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::validation("measure", "points and weights differ in length"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::validation("measure.weights", "weights must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::validation("measure.weights", "total mass must be positive"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { points, weights })
    }

    /// Empirical measure of the sample.
    pub fn empirical(points: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; points.len()];
        Self::new(points, w)
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("q must lie in (1, inf], got {q}")))
    }
}

fn member_values(family: &FunctionFamily, measure: &DiscreteMeasure) -> Result<Vec<Vec<f64>>> {
    family
        .members
        .iter()
        .map(|m| {
            measure
                .points
                .iter()
                .map(|&z| {
                    let v = m.eval(z);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Evaluation(format!("member {} is not finite at z = {z}", m.id)))
                    }
                })
                .collect()
        })
        .collect()
}

fn cover_radius(family: &FunctionFamily, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    Ok(2.0 * eps * family.envelope_sup)
}

/// `adj[i]` holds every `j` with `d(i, j) <= radius`.
fn ball_sets(values: &[Vec<f64>], weights: &[f64], q: f64, radius: f64) -> Vec<Vec<bool>> {
    let m = values.len();
    let mut adj = vec![vec![false; m]; m];
    for i in 0..m {
        adj[i][i] = true;
        for j in (i + 1)..m {
            let close = lq_distance(&values[i], &values[j], weights, q) <= radius;
            adj[i][j] = close;
            adj[j][i] = close;
        }
    }
    adj
}

/// Greedy internal cover on precomputed member values: repeatedly take the
/// member whose ball holds the most uncovered members (lowest index on ties).
pub fn greedy_cover_size(values: &[Vec<f64>], weights: &[f64], q: f64, radius: f64) -> usize {
    let adj = ball_sets(values, weights, q, radius);
    let m = values.len();
    let mut covered = vec![false; m];
    let mut remaining = m;
    let mut picks = 0;
    while remaining > 0 {
        let (best, _) = (0..m)
            .map(|i| (i, (0..m).filter(|&j| adj[i][j] && !covered[j]).count()))
            .fold((0, 0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        for j in 0..m {
            if adj[best][j] && !covered[j] {
                covered[j] = true;
                remaining -= 1;
            }
        }
        picks += 1;
    }
    picks
}

/// Minimum internal cover on precomputed member values, by enumerating all
/// centre subsets as bit masks.
pub fn exact_cover_size(values: &[Vec<f64>], weights: &[f64], q: f64, radius: f64) -> Result<usize> {
    let m = values.len();
    if m > EXACT_COVER_MAX {
        return Err(Error::Size(format!(
            "{m} members exceed {EXACT_COVER_MAX}; use the greedy cover"
        )));
    }
    if m == 0 {
        return Ok(0);
    }
    let adj = ball_sets(values, weights, q, radius);
    let masks: Vec<u32> = adj
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &b)| b).fold(0u32, |acc, (j, _)| acc | (1 << j)))
        .collect();
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let mut best = m;
    for subset in 1u32..=full {
        let size = subset.count_ones() as usize;
        if size >= best {
            continue;
        }
        let mut union = 0u32;
        let mut bits = subset;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            union |= masks[i];
            bits &= bits - 1;
        }
        if union == full {
            best = size;
        }
    }
    Ok(best)
}

/// Size of a greedy internal `2 eps ||kappa||`-cover of `family` in `L_q(P)`.
pub fn covering_number_greedy(
    family: &FunctionFamily,
    eps: f64,
    q: f64,
    measure: &DiscreteMeasure,
) -> Result<usize> {
    check_q(q)?;
    let radius = cover_radius(family, eps)?;
    let values = member_values(family, measure)?;
    Ok(greedy_cover_size(&values, &measure.weights, q, radius))
}

/// Minimum internal `2 eps ||kappa||`-cover of `family` in `L_q(P)`; at most
/// [`EXACT_COVER_MAX`] members.
pub fn covering_number_exact(
    family: &FunctionFamily,
    eps: f64,
    q: f64,
    measure: &DiscreteMeasure,
) -> Result<usize> {
    check_q(q)?;
    if family.len() > EXACT_COVER_MAX {
        return Err(Error::Size(format!(
            "{} members exceed {EXACT_COVER_MAX}; use the greedy cover",
            family.len()
        )));
    }
    let radius = cover_radius(family, eps)?;
    let values = member_values(family, measure)?;
    exact_cover_size(&values, &measure.weights, q, radius)
}

/// Named family constructors, selectable from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `{f = 1}`, the kernel density estimation family.
    Kde,
    /// `{f = 0}`.
    Zero,
    /// `{z^j / max(1, B^j) : j = 0..=degree}` on `[-bound, bound]`.
    Monomials { degree: u32, bound: f64 },
    /// `{1{z <= t_k}}` over `count` evenly spaced thresholds in `[lo, hi]`.
    Indicators { count: usize, lo: f64, hi: f64 },
}

impl FamilySpec {
    pub fn build(&self) -> Result<FunctionFamily> {
        match *self {
            FamilySpec::Kde => kde_family(),
            FamilySpec::Zero => zero_family(),
            FamilySpec::Monomials { degree, bound } => monomial_family(degree, bound),
            FamilySpec::Indicators { count, lo, hi } => indicator_family(count, lo, hi),
        }
    }
}

/// Default domain of the `Z` coordinate produced by the generators.
pub const Z_DOMAIN: (f64, f64) = (-1.0, 1.0);

pub fn kde_family() -> Result<FunctionFamily> {
    FunctionFamily::new("kde", vec![Member::new("one", Func::Constant { value: 1.0 })], Z_DOMAIN)
}

pub fn zero_family() -> Result<FunctionFamily> {
    FunctionFamily::new("zero", vec![Member::new("zero", Func::Constant { value: 0.0 })], Z_DOMAIN)
}

pub fn monomial_family(degree: u32, bound: f64) -> Result<FunctionFamily> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::validation("bound", "must be finite and positive"));
    }
    let members = (0..=degree)
        .map(|j| {
            Member::new(
                format!("z^{j}"),
                Func::Monomial {
                    power: j,
                    scale: bound.powi(j as i32).max(1.0),
                },
            )
        })
        .collect();
    FunctionFamily::new(format!("monomials_{degree}"), members, (-bound, bound))
}

pub fn indicator_family(count: usize, lo: f64, hi: f64) -> Result<FunctionFamily> {
    if count == 0 {
        return Err(Error::validation("count", "must be >= 1"));
    }
    if !(lo <= hi) {
        return Err(Error::validation("thresholds", "need lo <= hi"));
    }
    let members = (0..count)
        .map(|k| {
            let t = if count == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * k as f64 / (count - 1) as f64
            };
            Member::new(format!("1{{z<={t}}}"), Func::Indicator { threshold: t })
        })
        .collect();
    FunctionFamily::new(format!("indicators_{count}"), members, Z_DOMAIN)
}

/// The built-in catalogue with default parameters.
pub fn builtin_families() -> Vec<FunctionFamily> {
    [
        FamilySpec::Kde,
        FamilySpec::Zero,
        FamilySpec::Monomials { degree: 3, bound: 1.0 },
        FamilySpec::Indicators {
            count: 8,
            lo: -0.875,
            hi: 0.875,
        },
    ]
    .iter()
    .map(|s| s.build().expect("built-in families are valid"))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uniform_measure(k: usize) -> DiscreteMeasure {
        let pts = (0..k).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / k as f64).collect();
        DiscreteMeasure::empirical(pts).unwrap()
    }

    #[test]
    fn omega_examples() {
        let exact = EntropyModel::ExactFinite { cardinality: 5 };
        assert_eq!(exact.omega(0.01).unwrap(), 5.0);
        let poly = EntropyModel::Polynomial { c_n: 2.0, v_n: 3.0 };
        assert_abs_diff_eq!(poly.omega(0.5).unwrap(), 16.0, epsilon = 1e-12);
        assert_eq!(poly.omega(2.0).unwrap(), 1.0);
        assert_eq!(exact.omega(2.0).unwrap(), 5.0);
        assert!(matches!(poly.omega(0.0), Err(Error::Domain(_))));
        assert!(matches!(poly.omega(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn builtin_catalogue() {
        let kde = kde_family().unwrap();
        assert_eq!(kde.len(), 1);
        assert_eq!(kde.envelope_sup, 1.0);
        assert!(kde.nonnegative);

        let ind = indicator_family(8, -0.875, 0.875).unwrap();
        assert_eq!(ind.len(), 8);
        assert_eq!(ind.envelope_sup, 1.0);
        assert!(ind.nonnegative);

        let mono = monomial_family(3, 1.0).unwrap();
        assert_eq!(mono.len(), 4);
        assert_eq!(mono.envelope_sup, 1.0);
        assert!(!mono.nonnegative);

        // Normalization keeps the envelope at 1 for wider domains too.
        let wide = monomial_family(3, 2.0).unwrap();
        assert_abs_diff_eq!(wide.envelope_sup, 1.0, epsilon = 1e-15);

        assert!(builtin_families().len() >= 4);
    }

    #[test]
    fn envelope_is_enforced() {
        let members = vec![Member::new("two", Func::Constant { value: 2.0 })];
        assert!(FunctionFamily::with_envelope("bad", members, Z_DOMAIN, 1.0).is_err());
        assert!(FunctionFamily::new("empty", vec![], Z_DOMAIN).is_err());
        let kde = kde_family().unwrap();
        assert!(kde.check_envelope_at(&[0.0, 0.5]).is_ok());
        let mono = monomial_family(2, 1.0).unwrap();
        assert!(mono.check_envelope_at(&[3.0]).is_err());
    }

    #[test]
    fn range_and_mean_of_funcs() {
        let f = Func::Monomial { power: 2, scale: 1.0 };
        assert_eq!(f.range_on(-1.0, 1.0), (0.0, 1.0));
        assert_abs_diff_eq!(f.mean_uniform(-1.0, 1.0), 1.0 / 3.0, epsilon = 1e-15);
        let g = Func::Monomial { power: 3, scale: 1.0 };
        assert_eq!(g.range_on(-1.0, 1.0), (-1.0, 1.0));
        assert_abs_diff_eq!(g.mean_uniform(-1.0, 1.0), 0.0, epsilon = 1e-15);
        let ind = Func::Indicator { threshold: 0.5 };
        assert_abs_diff_eq!(ind.mean_uniform(-1.0, 1.0), 0.75, epsilon = 1e-15);
        let s = Func::Scaled {
            inner: Box::new(Func::Shifted {
                inner: Box::new(ind),
                shift: -1.0,
            }),
            factor: -2.0,
        };
        assert_eq!(s.range_on(-1.0, 1.0), (0.0, 2.0));
        assert_abs_diff_eq!(s.mean_uniform(-1.0, 1.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn single_member_cover() {
        let fam = kde_family().unwrap();
        let mu = uniform_measure(5);
        assert_eq!(covering_number_greedy(&fam, 1e-6, 2.0, &mu).unwrap(), 1);
        assert_eq!(covering_number_exact(&fam, 1e-6, 2.0, &mu).unwrap(), 1);
    }

    #[test]
    fn two_members_at_known_distance() {
        // Constants 0 and 1 are at L_q distance exactly 1 under any P.
        let members = vec![
            Member::new("a", Func::Constant { value: 0.0 }),
            Member::new("b", Func::Constant { value: 1.0 }),
        ];
        let fam = FunctionFamily::new("pair", members, Z_DOMAIN).unwrap();
        let mu = uniform_measure(4);
        for q in [2.0, f64::INFINITY] {
            // radius = 2 * eps * 1
            assert_eq!(covering_number_greedy(&fam, 0.5, q, &mu).unwrap(), 1);
            assert_eq!(covering_number_greedy(&fam, 0.49, q, &mu).unwrap(), 2);
            assert_eq!(covering_number_exact(&fam, 0.5, q, &mu).unwrap(), 1);
            assert_eq!(covering_number_exact(&fam, 0.49, q, &mu).unwrap(), 2);
        }
    }

    #[test]
    fn distant_members_need_one_ball_each() {
        let members = (0..3)
            .map(|k| Member::new(format!("c{k}"), Func::Constant { value: k as f64 / 2.0 }))
            .collect();
        let fam = FunctionFamily::new("three", members, Z_DOMAIN).unwrap();
        let mu = uniform_measure(3);
        assert_eq!(covering_number_exact(&fam, 0.1, 2.0, &mu).unwrap(), 3);
    }

    #[test]
    fn exact_rejects_large_families() {
        let fam = indicator_family(13, -1.0, 1.0).unwrap();
        let mu = uniform_measure(5);
        assert!(matches!(covering_number_exact(&fam, 0.1, 2.0, &mu), Err(Error::Size(_))));
        assert!(covering_number_greedy(&fam, 0.1, 2.0, &mu).is_ok());
    }

    #[test]
    fn bad_arguments() {
        let fam = kde_family().unwrap();
        let mu = uniform_measure(3);
        assert!(covering_number_greedy(&fam, 0.0, 2.0, &mu).is_err());
        assert!(covering_number_greedy(&fam, 0.1, 1.0, &mu).is_err());
        assert!(DiscreteMeasure::new(vec![0.0], vec![0.0]).is_err());
        let bad = FunctionFamily::with_envelope(
            "nan",
            vec![Member::new("nan", Func::Monomial { power: 1, scale: 1.0 })],
            Z_DOMAIN,
            1.0,
        )
        .unwrap();
        let mu_nan = DiscreteMeasure::new(vec![f64::NAN], vec![1.0]).unwrap();
        assert!(matches!(covering_number_greedy(&bad, 0.1, 2.0, &mu_nan), Err(Error::Evaluation(_))));
    }

    #[test]
    fn polynomial_model_dominates_indicator_covers() {
        let m = 8;
        let fam = indicator_family(m, -0.875, 0.875).unwrap();
        let model = EntropyModel::Polynomial { c_n: m as f64, v_n: 1e-3 };
        let mu = uniform_measure(40);
        for k in 1..40 {
            let delta = k as f64 / 40.0;
            let exact = covering_number_exact(&fam, delta, 2.0, &mu).unwrap();
            assert!(model.omega(delta).unwrap() >= exact as f64);
        }
    }

    fn random_family() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (1usize..=8, 1usize..=12).prop_flat_map(|(m, k)| {
            (
                proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, k), m),
                proptest::collection::vec(0.01f64..1.0, k),
            )
        })
    }

    proptest! {
        #[test]
        fn exact_is_monotone_in_radius((vals, w) in random_family(), r in 0.0f64..1.5, dr in 0.0f64..0.5) {
            let a = exact_cover_size(&vals, &w, 2.0, r).unwrap();
            let b = exact_cover_size(&vals, &w, 2.0, r + dr).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn exact_never_exceeds_greedy((vals, w) in random_family(), r in 0.0f64..1.5) {
            for q in [2.0, 3.0, f64::INFINITY] {
                let e = exact_cover_size(&vals, &w, q, r).unwrap();
                let g = greedy_cover_size(&vals, &w, q, r);
                prop_assert!(1 <= e && e <= g);
            }
        }

        #[test]
        fn scaling_preserves_relative_covers(seed in 0u64..1000, eps in 0.01f64..0.6, lambda in 0.1f64..10.0) {
            let fam = if seed % 2 == 0 { monomial_family(4, 1.0).unwrap() } else { indicator_family(6, -0.8, 0.8).unwrap() };
            let pts: Vec<f64> = (0..15).map(|i| ((i as f64 * 0.37 + seed as f64 * 0.11) % 2.0) - 1.0).collect();
            let mu = DiscreteMeasure::empirical(pts).unwrap();
            let scaled = fam.scaled(lambda).unwrap();
            for q in [2.0, f64::INFINITY] {
                prop_assert_eq!(
                    covering_number_exact(&fam, eps, q, &mu).unwrap(),
                    covering_number_exact(&scaled, eps, q, &mu).unwrap()
                );
                prop_assert_eq!(
                    covering_number_greedy(&fam, eps, q, &mu).unwrap(),
                    covering_number_greedy(&scaled, eps, q, &mu).unwrap()
                );
            }
        }
    }

    #[test]
    fn internal_covers_can_shrink_when_the_family_grows() {
        // Two members 2r apart need two internal balls; adding their midpoint
        // lets a single ball cover all three.
        let w = vec![1.0];
        let pair = vec![vec![0.0], vec![2.0]];
        let triple = vec![vec![0.0], vec![2.0], vec![1.0]];
        assert_eq!(exact_cover_size(&pair, &w, 2.0, 1.0).unwrap(), 2);
        assert_eq!(exact_cover_size(&triple, &w, 2.0, 1.0).unwrap(), 1);
    }
}
