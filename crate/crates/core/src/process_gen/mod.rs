//! Stationary strongly mixing sequences `(X_i, Z_i)` with a certified
//! exponential decay constant for their alpha-mixing coefficients.
//!
//! Four kinds are supported:
//!
//! * `iid`: `X_i = T(W_i)` with `W_i` iid standard normal;
//! * `m_dependent`: `W_i = (e_i + ... + e_{i+m}) / sqrt(m + 1)`, a moving sum
//!   of iid normals, so `W_i` is again standard normal and `X_i`, `X_j` are
//!   independent once `|i - j| > m`;
//! * `gaussian_ar1`: `W_i = rho W_{i-1} + sqrt(1 - rho^2) e_i`, started from
//!   its stationary law;
//! * `finite_markov`: a finite-state chain started from its stationary law,
//!   emitting `X_i` uniformly on a per-state interval.
//!
//! `T` is the standard normal cdf for the uniform marginal and the identity
//! for the Gaussian marginal. `Z_i` is built from `X_i` and an independent iid
//! noise sequence according to the [`ZLink`]. All latent draws for `X` are
//! taken before any noise draw, so `iid` and `m_dependent` with `m = 0`
//! consume the stream identically.

mod law;
mod mixing;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use law::{
    std_normal_cdf, std_normal_quantile, LawMeta, Marginal, MixtureComponent, ZLink, QUAD_TOL,
};
pub use mixing::{
    ar1_orthant_alpha, certified_mixing_c, empirical_alpha_lower, markov_beta, markov_event_alpha,
    second_eigen_modulus, stationary_distribution, AlphaEstimate, CylinderPair, IntervalEvent,
};

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::rng::{base_stream, StreamRng};

/// Row sums of a transition matrix must match 1 to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XMarginal {
    #[default]
    Uniform,
    Gaussian,
}

/// Uniform emission law `U[lo, hi)` of one Markov state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    Iid,
    MDependent { m: usize },
    FiniteMarkov {
        transition: Vec<Vec<f64>>,
        emissions: Vec<Emission>,
    },
    GaussianAr1 { rho: f64 },
}

fn default_n() -> usize {
    1000
}

fn default_c() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    #[serde(flatten)]
    pub kind: ProcessKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x_marginal: XMarginal,
    #[serde(default)]
    pub z_link: ZLink,
    /// Constant reported for kinds whose mixing coefficients vanish at every
    /// positive lag, where any `c > 0` is valid.
    #[serde(default = "default_c")]
    pub default_c: f64,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            seed,
            x_marginal: XMarginal::Uniform,
            z_link: ZLink::Independent,
            default_c: default_c(),
        }
    }

    pub fn iid(n: usize, seed: u64) -> Self {
        Self::new(ProcessKind::Iid, n, seed)
    }

    pub fn m_dependent(m: usize, n: usize, seed: u64) -> Self {
        Self::new(ProcessKind::MDependent { m }, n, seed)
    }

    pub fn gaussian_ar1(rho: f64, n: usize, seed: u64) -> Self {
        Self::new(ProcessKind::GaussianAr1 { rho }, n, seed)
    }

    /// Symmetric two-state chain with switching probability `p`; state 0
    /// emits on `[0, 1/2)` and state 1 on `[1/2, 1)`, so `X_i` is uniform.
    pub fn two_state(p: f64, n: usize, seed: u64) -> Self {
        Self::new(
            ProcessKind::FiniteMarkov {
                transition: vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
                emissions: vec![Emission { lo: 0.0, hi: 0.5 }, Emission { lo: 0.5, hi: 1.0 }],
            },
            n,
            seed,
        )
    }

    pub fn with_marginal(mut self, x_marginal: XMarginal) -> Self {
        self.x_marginal = x_marginal;
        self
    }

    pub fn with_link(mut self, z_link: ZLink) -> Self {
        self.z_link = z_link;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::validation("n", format!("need n >= 2, got {}", self.n)));
        }
        if !(self.default_c > 0.0) || !self.default_c.is_finite() {
            return Err(Error::validation("default_c", "must be finite and positive"));
        }
        match &self.kind {
            ProcessKind::Iid | ProcessKind::MDependent { .. } => Ok(()),
            ProcessKind::GaussianAr1 { rho } => {
                if rho.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::validation("rho", format!("need |rho| < 1, got {rho}")))
                }
            }
            ProcessKind::FiniteMarkov {
                transition,
                emissions,
            } => {
                let s = transition.len();
                if s == 0 {
                    return Err(Error::validation("transition", "need at least one state"));
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != s {
                        return Err(Error::validation("transition", format!("row {i} is not of length {s}")));
                    }
                    if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                        return Err(Error::validation("transition", format!("row {i} has a negative entry")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        return Err(Error::validation("transition", format!("row {i} sums to {sum}")));
                    }
                }
                if emissions.len() != s {
                    return Err(Error::validation("emissions", format!("need one emission per state ({s})")));
                }
                if emissions.iter().any(|e| !(e.lo < e.hi) || !e.lo.is_finite() || !e.hi.is_finite()) {
                    return Err(Error::validation("emissions", "each emission needs finite lo < hi"));
                }
                if self.x_marginal != XMarginal::Uniform {
                    return Err(Error::validation(
                        "x_marginal",
                        "finite_markov emits its own interval mixture; leave x_marginal = uniform",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// A realized path together with the law that generated it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
    pub law: LawMeta,
}

impl SamplePath {
    pub fn new(xs: Vec<f64>, zs: Vec<f64>, law: LawMeta) -> Result<Self> {
        if xs.len() != zs.len() {
            return Err(Error::validation("path", "xs and zs differ in length"));
        }
        Ok(Self { xs, zs, law })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Writes the path as CSV with columns `i, x, z` (1-based `i`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "x", "z"])?;
        for (i, (x, z)) in self.xs.iter().zip(&self.zs).enumerate() {
            w.write_record([(i + 1).to_string(), fmt_f64(*x), fmt_f64(*z)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A validated spec with its law precomputed, ready to draw paths.
#[derive(Clone, Debug)]
pub struct Generator {
    spec: ProcessSpec,
    law: LawMeta,
    markov: Option<MarkovTables>,
}

#[derive(Clone, Debug)]
struct MarkovTables {
    initial_cum: Vec<f64>,
    rows_cum: Vec<Vec<f64>>,
    emissions: Vec<Emission>,
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

impl Generator {
    pub fn new(spec: &ProcessSpec) -> Result<Self> {
        spec.validate()?;
        let c = certified_mixing_c(spec)?;
        let (marginal, markov) = match &spec.kind {
            ProcessKind::FiniteMarkov {
                transition,
                emissions,
            } => {
                let pi = stationary_distribution(transition)?;
                let components = pi
                    .iter()
                    .zip(emissions)
                    .map(|(&w, e)| MixtureComponent {
                        weight: w,
                        lo: e.lo,
                        hi: e.hi,
                    })
                    .collect();
                let tables = MarkovTables {
                    initial_cum: cumulative(&pi),
                    rows_cum: transition.iter().map(|r| cumulative(r)).collect(),
                    emissions: emissions.clone(),
                };
                (Marginal::UniformMixture { components }, Some(tables))
            }
            _ => match spec.x_marginal {
                XMarginal::Uniform => (Marginal::Uniform01, None),
                XMarginal::Gaussian => (Marginal::StdGaussian, None),
            },
        };
        Ok(Self {
            spec: spec.clone(),
            law: LawMeta::new(marginal, c, spec.z_link),
            markov,
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn law(&self) -> &LawMeta {
        &self.law
    }

    fn latent_to_x(&self, w: f64) -> f64 {
        match self.spec.x_marginal {
            XMarginal::Uniform => std_normal_cdf(w),
            XMarginal::Gaussian => w,
        }
    }

    /// Draws a path of length `n` from `rng`.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> SamplePath {
        let xs: Vec<f64> = match (&self.spec.kind, &self.markov) {
            (ProcessKind::FiniteMarkov { .. }, Some(t)) => {
                let mut state = pick(&t.initial_cum, rng.random());
                let mut xs = Vec::with_capacity(n);
                for i in 0..n {
                    if i > 0 {
                        state = pick(&t.rows_cum[state], rng.random());
                    }
                    let e = t.emissions[state];
                    let u: f64 = rng.random();
                    xs.push(e.lo + (e.hi - e.lo) * u);
                }
                xs
            }
            (ProcessKind::Iid, _) => (0..n)
                .map(|_| self.latent_to_x(rng.sample(StandardNormal)))
                .collect(),
            (ProcessKind::MDependent { m }, _) => {
                let e: Vec<f64> = (0..n + m).map(|_| rng.sample(StandardNormal)).collect();
                let norm = ((m + 1) as f64).sqrt();
                e.windows(m + 1)
                    .map(|w| self.latent_to_x(w.iter().sum::<f64>() / norm))
                    .collect()
            }
            (ProcessKind::GaussianAr1 { rho }, _) => {
                let innov = (1.0 - rho * rho).sqrt();
                let mut w: f64 = rng.sample(StandardNormal);
                let mut xs = Vec::with_capacity(n);
                for i in 0..n {
                    if i > 0 {
                        let e: f64 = rng.sample(StandardNormal);
                        w = rho * w + innov * e;
                    }
                    xs.push(self.latent_to_x(w));
                }
                xs
            }
            (ProcessKind::FiniteMarkov { .. }, None) => unreachable!("tables are built in new()"),
        };
        let zs = xs
            .iter()
            .map(|&x| {
                let u: f64 = rng.random();
                let eps = match self.spec.z_link {
                    ZLink::Independent => 2.0 * u - 1.0,
                    ZLink::TanhRademacher => {
                        if u < 0.5 {
                            -1.0
                        } else {
                            1.0
                        }
                    }
                };
                self.spec.z_link.apply(x, eps)
            })
            .collect();
        SamplePath {
            xs,
            zs,
            law: self.law.clone(),
        }
    }
}

/// Draws the path described by `spec`, seeded from `spec.seed`.
pub fn generate(spec: &ProcessSpec) -> Result<SamplePath> {
    let g = Generator::new(spec)?;
    Ok(g.sample(spec.n, &mut base_stream(spec.seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_uniform_small_path() {
        let spec = ProcessSpec::iid(3, 7);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.xs.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(a.zs.iter().all(|z| (-1.0..=1.0).contains(z)));
        assert_eq!(a, b);
    }

    #[test]
    fn m_zero_matches_iid_bit_for_bit() {
        for seed in [1, 2, 99] {
            let iid = generate(&ProcessSpec::iid(50, seed)).unwrap();
            let m0 = generate(&ProcessSpec::m_dependent(0, 50, seed)).unwrap();
            assert_eq!(iid.xs, m0.xs);
            assert_eq!(iid.zs, m0.zs);
        }
    }

    #[test]
    fn ar1_latent_lag_one_correlation() {
        let spec = ProcessSpec::gaussian_ar1(0.5, 10_000, 3).with_marginal(XMarginal::Gaussian);
        let p = generate(&spec).unwrap();
        let n = p.xs.len() as f64;
        let mean = p.xs.iter().sum::<f64>() / n;
        let var = p.xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let cov = p.xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0);
        let r = cov / var;
        assert!((r - 0.5).abs() < 0.03, "lag-1 correlation {r}");
    }

    #[test]
    fn validation_names_the_field() {
        let bad = |spec: ProcessSpec, field: &str| match spec.validate() {
            Err(Error::Validation { field: f, .. }) => assert_eq!(f, field),
            other => panic!("expected validation error on {field}, got {other:?}"),
        };
        bad(ProcessSpec::iid(1, 0), "n");
        bad(ProcessSpec::gaussian_ar1(1.0, 10, 0), "rho");
        let mut s = ProcessSpec::two_state(0.3, 10, 0);
        if let ProcessKind::FiniteMarkov { transition, .. } = &mut s.kind {
            transition[0][0] = 0.8;
        }
        bad(s, "transition");
        let mut s = ProcessSpec::two_state(0.3, 10, 0);
        if let ProcessKind::FiniteMarkov { emissions, .. } = &mut s.kind {
            emissions.pop();
        }
        bad(s, "emissions");
        bad(ProcessSpec::two_state(0.3, 10, 0).with_marginal(XMarginal::Gaussian), "x_marginal");
    }

    #[test]
    fn two_state_chain_is_uniform_marginal() {
        let g = Generator::new(&ProcessSpec::two_state(0.3, 10, 0)).unwrap();
        assert_eq!(g.law().density_sup, 1.0);
        for x in [0.1, 0.25, 0.5, 0.9] {
            assert!((g.law().cdf(x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let p = generate(&ProcessSpec::iid(4, 1)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,x,z");
        assert_eq!(lines.len(), 5);
        let x: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(x, p.xs[0]);
    }

    #[test]
    fn spec_reads_from_toml() {
        let spec: ProcessSpec = toml::from_str(
            r#"
            kind = "finite_markov"
            n = 64
            seed = 5
            transition = [[0.7, 0.3], [0.3, 0.7]]
            emissions = [{ lo = 0.0, hi = 0.5 }, { lo = 0.5, hi = 1.0 }]
            "#,
        )
        .unwrap();
        assert_eq!(spec, ProcessSpec::two_state(0.3, 64, 5));
        let ar: ProcessSpec = toml::from_str("kind = \"gaussian_ar1\"\nrho = 0.5\nz_link = \"tanh_rademacher\"").unwrap();
        assert_eq!(ar.kind, ProcessKind::GaussianAr1 { rho: 0.5 });
        assert_eq!(ar.z_link, ZLink::TanhRademacher);
    }
}
