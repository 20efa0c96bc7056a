//! Marginal laws of the `X` coordinate and the centering oracle.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::function_family::Func;
use crate::quad;

/// Absolute tolerance of every quadrature-based mean.
pub const QUAD_TOL: f64 = 1e-10;

/// Beyond this many standard deviations the Gaussian tail is below `1e-300`
/// and is treated as empty.
const GAUSS_CUT: f64 = 37.5;
const GAUSS_PANEL: f64 = 0.5;

pub fn std_normal_cdf(w: f64) -> f64 {
    0.5 * erfc(-w / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // One Newton step on the cdf sharpens the inverse to full precision.
    let dens = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if dens > 0.0 {
        x - (std_normal_cdf(x) - p) / dens
    } else {
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Law of a single `X_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform01,
    StdGaussian,
    /// Finite mixture of uniform laws on `[lo, hi)`.
    UniformMixture { components: Vec<MixtureComponent> },
}

impl Marginal {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Uniform01 => x.clamp(0.0, 1.0),
            Marginal::StdGaussian => std_normal_cdf(x),
            Marginal::UniformMixture { components } => components
                .iter()
                .map(|c| c.weight * ((x - c.lo) / (c.hi - c.lo)).clamp(0.0, 1.0))
                .sum::<f64>()
                .min(1.0),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Marginal::Uniform01 => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Marginal::StdGaussian => (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Marginal::UniformMixture { components } => components
                .iter()
                .filter(|c| x >= c.lo && x < c.hi)
                .map(|c| c.weight / (c.hi - c.lo))
                .sum(),
        }
    }

    /// `||g||_inf`, exact for every supported marginal.
    pub fn density_sup(&self) -> f64 {
        match self {
            Marginal::Uniform01 => 1.0,
            Marginal::StdGaussian => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            Marginal::UniformMixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| self.density(c.lo))
                .fold(0.0, f64::max),
        }
    }

    /// Interval outside of which the law puts no mass (numerically, for the
    /// Gaussian).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Marginal::Uniform01 => (0.0, 1.0),
            Marginal::StdGaussian => (-GAUSS_CUT, GAUSS_CUT),
            Marginal::UniformMixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c.lo), b.max(c.hi))),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            Marginal::Uniform01 => p,
            Marginal::StdGaussian => std_normal_quantile(p),
            Marginal::UniformMixture { .. } => {
                // The cdf is continuous and piecewise linear; bisect it.
                let (mut lo, mut hi) = self.support();
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Breakpoints of the density's smooth pieces (mixture endpoints).
    fn density_breaks(&self) -> Vec<f64> {
        match self {
            Marginal::Uniform01 => vec![0.0, 1.0],
            Marginal::StdGaussian => vec![],
            Marginal::UniformMixture { components } => {
                let mut v: Vec<f64> = components
                    .iter()
                    .filter(|c| c.weight > 0.0)
                    .flat_map(|c| [c.lo, c.hi])
                    .collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        }
    }

    /// Points that split the line into pieces on which the window mass
    /// `x -> G(x + h) - G(x - h)` is monotone.
    pub fn window_mass_critical_points(&self, h: f64) -> Vec<f64> {
        match self {
            // Unimodal, peak at the origin.
            Marginal::StdGaussian => vec![0.0],
            _ => {
                let mut v: Vec<f64> = self
                    .density_breaks()
                    .into_iter()
                    .flat_map(|e| [e - h, e + h])
                    .collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            }
        }
    }

    /// `integral_{lo}^{hi} g(t) phi(t) dt`, split at the density breaks.
    fn integrate_against<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, phi: F) -> f64 {
        let (slo, shi) = self.support();
        let (lo, hi) = (lo.max(slo), hi.min(shi));
        if lo >= hi {
            return 0.0;
        }
        let mut cuts = vec![lo];
        cuts.extend(self.density_breaks().into_iter().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        cuts.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                match self {
                    Marginal::StdGaussian => {
                        // Short panels so the adaptive rule cannot step over the bulk.
                        let pieces = ((w[1] - w[0]) / GAUSS_PANEL).ceil().max(1.0) as usize;
                        let width = (w[1] - w[0]) / pieces as f64;
                        let tol = QUAD_TOL / pieces as f64;
                        (0..pieces)
                            .map(|k| {
                                let a = w[0] + k as f64 * width;
                                let b = if k + 1 == pieces { w[1] } else { a + width };
                                quad::integrate(|t| self.density(t) * phi(t), a, b, tol)
                            })
                            .sum::<f64>()
                    }
                    // Constant density on each piece.
                    _ => self.density(mid) * quad::integrate(&phi, w[0], w[1], QUAD_TOL),
                }
            })
            .sum()
    }
}

/// How `Z_i` is produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZLink {
    /// `Z_i = eps_i` with `eps_i` iid uniform on `[-1, 1]`, independent of `X`.
    #[default]
    Independent,
    /// `Z_i = (tanh(X_i) + eps_i) / 2` with `eps_i` iid Rademacher.
    TanhRademacher,
}

impl ZLink {
    pub fn apply(self, x: f64, eps: f64) -> f64 {
        match self {
            ZLink::Independent => eps,
            ZLink::TanhRademacher => 0.5 * (x.tanh() + eps),
        }
    }
}

/// Metadata of the law that generated a path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawMeta {
    /// Law of the `X` coordinate as stored in the path.
    pub marginal: Marginal,
    pub density_sup: f64,
    pub mixing_c: f64,
    pub z_link: ZLink,
    /// Set after a probability integral transform: the original marginal, in
    /// whose coordinates the `Z` link was applied.
    pub link_source: Option<Marginal>,
}

impl LawMeta {
    pub fn new(marginal: Marginal, mixing_c: f64, z_link: ZLink) -> Self {
        Self {
            density_sup: marginal.density_sup(),
            marginal,
            mixing_c,
            z_link,
            link_source: None,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.marginal.cdf(x)
    }

    /// `E f(Z) given X = t`, written in path coordinates.
    fn conditional_mean(&self, f: &Func, t: f64) -> f64 {
        let s = match &self.link_source {
            Some(src) => src.quantile(t),
            None => t,
        };
        match self.z_link {
            ZLink::Independent => f.mean_uniform(-1.0, 1.0),
            ZLink::TanhRademacher => {
                let th = s.tanh();
                0.5 * (f.eval(0.5 * (th + 1.0)) + f.eval(0.5 * (th - 1.0)))
            }
        }
    }

    /// `E[1{x - h <= X <= x + h} f(Z)]`.
    pub fn window_mean(&self, x: f64, h: f64, f: &Func) -> f64 {
        match self.z_link {
            ZLink::Independent => {
                (self.marginal.cdf(x + h) - self.marginal.cdf(x - h)) * f.mean_uniform(-1.0, 1.0)
            }
            ZLink::TanhRademacher => self
                .marginal
                .integrate_against(x - h, x + h, |t| self.conditional_mean(f, t)),
        }
    }

    /// `E[1{X <= x} f(Z)]`.
    pub fn lower_mean(&self, x: f64, f: &Func) -> f64 {
        match self.z_link {
            ZLink::Independent => self.marginal.cdf(x) * f.mean_uniform(-1.0, 1.0),
            ZLink::TanhRademacher => {
                let (lo, _) = self.marginal.support();
                self.marginal
                    .integrate_against(lo, x, |t| self.conditional_mean(f, t))
            }
        }
    }

    /// `E f(Z)` when the centering factorizes, `None` otherwise.
    pub fn factorized_mean(&self, f: &Func) -> Option<f64> {
        match self.z_link {
            ZLink::Independent => Some(f.mean_uniform(-1.0, 1.0)),
            ZLink::TanhRademacher => None,
        }
    }

    /// Points between which `x -> window_mean(x, h, f)` is monotone, when
    /// such a finite set is known for this law.
    pub fn centering_critical_points(&self, h: f64) -> Option<Vec<f64>> {
        match self.z_link {
            ZLink::Independent => Some(self.marginal.window_mass_critical_points(h)),
            ZLink::TanhRademacher => None,
        }
    }

    /// Law of `U_i = G(X_i)`.
    pub fn uniformized(&self) -> LawMeta {
        match self.marginal {
            Marginal::Uniform01 => self.clone(),
            ref m => LawMeta {
                marginal: Marginal::Uniform01,
                density_sup: 1.0,
                mixing_c: self.mixing_c,
                z_link: self.z_link,
                link_source: Some(m.clone()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_piece() -> Marginal {
        Marginal::UniformMixture {
            components: vec![
                MixtureComponent { weight: 0.25, lo: 0.0, hi: 0.5 },
                MixtureComponent { weight: 0.75, lo: 0.5, hi: 2.0 },
            ],
        }
    }

    #[test]
    fn cdf_limits_and_monotonicity() {
        for m in [Marginal::Uniform01, Marginal::StdGaussian, two_piece()] {
            assert_abs_diff_eq!(m.cdf(-1e3), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(m.cdf(1e3), 1.0, epsilon = 1e-15);
            let mut prev = 0.0;
            for i in 0..=400 {
                let x = -5.0 + i as f64 * 0.025;
                let c = m.cdf(x);
                assert!(c >= prev);
                prev = c;
            }
        }
    }

    #[test]
    fn density_sup_values() {
        assert_eq!(Marginal::Uniform01.density_sup(), 1.0);
        assert_abs_diff_eq!(Marginal::StdGaussian.density_sup(), 0.398_942_280_401_432_7, epsilon = 1e-15);
        // 0.25 / 0.5 = 0.5 versus 0.75 / 1.5 = 0.5
        assert_abs_diff_eq!(two_piece().density_sup(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for m in [Marginal::Uniform01, Marginal::StdGaussian, two_piece()] {
            for p in [0.01, 0.2, 0.5, 0.77, 0.99] {
                assert_abs_diff_eq!(m.cdf(m.quantile(p)), p, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn independent_window_mean_closed_form() {
        let law = LawMeta::new(Marginal::Uniform01, 1.0, ZLink::Independent);
        let one = Func::Constant { value: 1.0 };
        assert_abs_diff_eq!(law.window_mean(0.5, 0.1, &one), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(law.window_mean(0.05, 0.1, &one), 0.15, epsilon = 1e-15);
        let odd = Func::Monomial { power: 1, scale: 1.0 };
        assert_eq!(law.window_mean(0.5, 0.1, &odd), 0.0);
    }

    #[test]
    fn tanh_link_quadrature_matches_constant_case() {
        // For f = 1 the link is irrelevant: the window mean is the window mass.
        let one = Func::Constant { value: 1.0 };
        for m in [Marginal::Uniform01, Marginal::StdGaussian, two_piece()] {
            let law = LawMeta::new(m.clone(), 1.0, ZLink::TanhRademacher);
            let expect = m.cdf(0.7) - m.cdf(0.1);
            assert_abs_diff_eq!(law.window_mean(0.4, 0.3, &one), expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn tanh_link_identity_against_hand_integral() {
        // f(z) = z: E[f(Z) | X = t] = tanh(t) / 2 and on U[0, 1]
        // integral_0^1 tanh(t) / 2 dt = ln(cosh 1) / 2.
        let law = LawMeta::new(Marginal::Uniform01, 1.0, ZLink::TanhRademacher);
        let f = Func::Monomial { power: 1, scale: 1.0 };
        let expect = 0.5 * 1f64.cosh().ln();
        assert_abs_diff_eq!(law.window_mean(0.5, 0.5, &f), expect, epsilon = 1e-9);
        assert_abs_diff_eq!(law.lower_mean(1.0, &f), expect, epsilon = 1e-9);
    }

    #[test]
    fn uniformized_law_keeps_link_coordinates() {
        let law = LawMeta::new(Marginal::StdGaussian, 1.0, ZLink::TanhRademacher);
        let u = law.uniformized();
        let f = Func::Monomial { power: 1, scale: 1.0 };
        // E[1{X <= 0} f(Z)] is the same event as E[1{U <= 1/2} f(Z)].
        assert_abs_diff_eq!(u.lower_mean(0.5, &f), law.lower_mean(0.0, &f), epsilon = 1e-8);
        assert_eq!(u.uniformized(), u);
    }
}
