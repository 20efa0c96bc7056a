//! The local empirical process `S_n(x, f; h)`, its centering and uniform
//! sup-deviation, and the chaining diagnostics on the uniform scale.
//!
//! Windows are closed on both sides: `1{x - h <= X_i <= x + h}`. The chaining
//! diagnostics use half-open dyadic cells: `[a, e)` for the floor projection
//! and `((k-1)/2^l, k/2^l]` for the increments `Delta_l`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_family::{Func, FunctionFamily, Member};
use crate::process_gen::{LawMeta, Marginal, SamplePath};

/// Default tolerance for the per-interval centering slack of the grid method.
pub const DEFAULT_X_TOL: f64 = 1e-3;
/// Default cap on interior evaluation points per breakpoint interval.
pub const DEFAULT_MAX_REFINE: usize = 64;
/// Slack allowed when checking the pathwise chaining inequality.
pub const CHAINING_SLACK: f64 = 1e-9;

/// Bandwidth interval `[a_n, b_n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRange {
    pub a_n: f64,
    pub b_n: f64,
}

impl BandwidthRange {
    pub fn new(a_n: f64, b_n: f64) -> Result<Self> {
        if !(a_n.is_finite() && a_n > 0.0) {
            return Err(Error::validation("a_n", format!("must be positive, got {a_n}")));
        }
        if !(b_n.is_finite() && b_n >= a_n) {
            return Err(Error::validation("b_n", format!("must satisfy a_n <= b_n, got {b_n}")));
        }
        Ok(Self { a_n, b_n })
    }

    /// Checks `1/(g_sup n) <= b_n < 1/g_sup`.
    pub fn validate_for(&self, n: usize, g_sup: f64) -> Result<()> {
        let lo = 1.0 / (g_sup * n as f64);
        let hi = 1.0 / g_sup;
        if self.b_n < lo || self.b_n >= hi {
            return Err(Error::validation(
                "b_n",
                format!("must lie in [{lo}, {hi}) for n = {n}, got {}", self.b_n),
            ));
        }
        Ok(())
    }

    /// Geometric grid `{a_n 2^(j / resolution)} ∩ [a_n, b_n)`.
    pub fn grid(&self, resolution: u32) -> Result<Vec<f64>> {
        if resolution == 0 {
            return Err(Error::validation("resolution", "must be at least 1"));
        }
        let mut out = Vec::new();
        for j in 0.. {
            let h = self.a_n * (j as f64 / resolution as f64).exp2();
            if h >= self.b_n {
                break;
            }
            out.push(h);
        }
        if out.is_empty() {
            return Err(Error::validation("bandwidth", "grid over [a_n, b_n) is empty"));
        }
        Ok(out)
    }

    /// Right neighbours of each grid point, ending with `b_n`.
    fn grid_steps(grid: &[f64], b_n: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        grid.iter()
            .enumerate()
            .map(move |(j, &h)| (h, grid.get(j + 1).copied().unwrap_or(b_n)))
    }
}

/// `(nh)^{-1/2} sum_i 1{x - h <= X_i <= x + h} f(Z_i)`.
pub fn s_n(path: &SamplePath, x: f64, h: f64, f: &Func) -> Result<f64> {
    check_h(h)?;
    let n = path.len() as f64;
    let sum: f64 = path
        .xs
        .iter()
        .zip(&path.zs)
        .filter(|(xi, _)| x - h <= **xi && **xi <= x + h)
        .map(|(_, z)| f.eval(*z))
        .sum();
    Ok(sum / (n * h).sqrt())
}

/// `E S_n(x, f; h) = sqrt(n / h) E[1{x - h <= X <= x + h} f(Z)]`.
pub fn expected_s_n(law: &LawMeta, x: f64, h: f64, f: &Func, n: usize) -> Result<f64> {
    check_h(h)?;
    Ok(centering(law, x, h, f, n))
}

fn centering(law: &LawMeta, x: f64, h: f64, f: &Func, n: usize) -> f64 {
    (n as f64 / h).sqrt() * law.window_mean(x, h, f)
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupMethod {
    /// Centering monotone between known critical points: the scan is exact.
    ExactBreakpoint,
    /// Centering refined between breakpoints with a Lipschitz slack.
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    pub x: f64,
    pub h: f64,
    pub member: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupDeviationResult {
    pub sup_value: f64,
    pub argmax: Argmax,
    /// Number of centering evaluations.
    pub eval_count: usize,
    pub method: SupMethod,
    /// Bound on the error in `x` of the reported sup. Zero for the exact method.
    pub grid_slack: f64,
    /// Bound on the centering drift between consecutive bandwidth grid points.
    pub bandwidth_slack: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupOptions {
    /// Bandwidths per doubling of `h`.
    pub resolution: u32,
    /// Target per-interval centering slack for the grid method.
    pub x_tol: f64,
    /// Cap on interior points per breakpoint interval for the grid method.
    pub max_refine: usize,
}

impl SupOptions {
    pub fn new(resolution: u32) -> Self {
        Self {
            resolution,
            x_tol: DEFAULT_X_TOL,
            max_refine: DEFAULT_MAX_REFINE,
        }
    }
}

/// Result of scanning `x -> |S_n - E S_n|` at a fixed `(f, h)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellScan {
    pub value: f64,
    pub x: f64,
    pub evals: usize,
    pub slack: f64,
    pub exact: bool,
}

/// Sorted design: `xs` ascending with `fvals[i] = f(Z)` of the same point.
struct SortedCell<'a> {
    xs: &'a [f64],
    fvals: &'a [f64],
}

/// `sup_x |S_n(x, f; h) - E S_n(x, f; h)|` for one path, one member and one
/// bandwidth.
pub fn sup_over_x(
    path: &SamplePath,
    law: &LawMeta,
    h: f64,
    f: &Func,
    envelope_sup: f64,
    opts: &SupOptions,
) -> Result<CellScan> {
    check_h(h)?;
    let order = sort_order(&path.xs);
    let xs: Vec<f64> = order.iter().map(|&i| path.xs[i]).collect();
    let fvals: Vec<f64> = order.iter().map(|&i| f.eval(path.zs[i])).collect();
    Ok(scan_cell(
        &SortedCell { xs: &xs, fvals: &fvals },
        law,
        h,
        f,
        envelope_sup,
        opts,
    ))
}

fn sort_order(xs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    order
}

fn scan_cell(
    cell: &SortedCell<'_>,
    law: &LawMeta,
    h: f64,
    f: &Func,
    envelope_sup: f64,
    opts: &SupOptions,
) -> CellScan {
    let n = cell.xs.len();
    let norm = 1.0 / (n as f64 * h).sqrt();
    let enters: Vec<f64> = cell.xs.iter().map(|x| x - h).collect();
    let leaves: Vec<f64> = cell.xs.iter().map(|x| x + h).collect();

    let critical = law.centering_critical_points(h);
    let exact = critical.is_some();
    let mut extra = match critical {
        Some(c) => c,
        None => {
            let (lo, hi) = law.marginal.support();
            vec![lo - h, hi + h]
        }
    };
    extra.sort_by(f64::total_cmp);

    let mut positions: Vec<f64> = Vec::with_capacity(2 * n + extra.len());
    positions.extend_from_slice(&enters);
    positions.extend_from_slice(&leaves);
    positions.extend_from_slice(&extra);
    positions.sort_by(f64::total_cmp);
    positions.dedup();

    let lipschitz = 2.0 * (n as f64 / h).sqrt() * law.density_sup * envelope_sup;
    let mean_scale = (n as f64 / h).sqrt();

    let mut best = CellScan {
        value: f64::NEG_INFINITY,
        x: f64::NAN,
        evals: 0,
        slack: 0.0,
        exact,
    };
    let mut consider = |v: f64, x: f64, best: &mut CellScan| {
        if v > best.value {
            best.value = v;
            best.x = x;
        }
    };

    let (mut ie, mut il) = (0usize, 0usize);
    let mut open = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &p in &positions {
        let c = mean_scale * law.window_mean(p, h, f);
        best.evals += 1;

        if let Some((q, right_prev)) = prev {
            if !exact {
                refine_interval(
                    q, p, right_prev, law, h, f, envelope_sup, mean_scale, lipschitz, opts, &mut best,
                    &mut consider,
                );
            }
        }

        let left = open;
        while ie < n && enters[ie] <= p {
            open += cell.fvals[ie];
            ie += 1;
        }
        let at = open;
        while il < n && leaves[il] <= p {
            open -= cell.fvals[il];
            il += 1;
        }
        let right = open;
        for v in [left, at, right] {
            consider((v * norm - c).abs(), p, &mut best);
        }
        prev = Some((p, right));
    }
    if best.value == f64::NEG_INFINITY {
        best.value = 0.0;
        best.x = 0.0;
    }
    best
}

/// Evaluates interior points of `(q, p)` where the open-window sum is
/// `open`, and records the resulting slack.
#[allow(clippy::too_many_arguments)]
fn refine_interval(
    q: f64,
    p: f64,
    open: f64,
    law: &LawMeta,
    h: f64,
    f: &Func,
    envelope_sup: f64,
    mean_scale: f64,
    lipschitz: f64,
    opts: &SupOptions,
    best: &mut CellScan,
    consider: &mut impl FnMut(f64, f64, &mut CellScan),
) {
    let len = p - q;
    if len <= 0.0 {
        return;
    }
    // (nh)^{-1/2} = sqrt(n/h) / n, and n = mean_scale^2 h.
    let emp = open / (mean_scale * h);
    let mass_bound = mean_scale * envelope_sup * (law.cdf(p + h) - law.cdf(q - h));
    let mut k = 1usize;
    let lip_bound = lipschitz * len / 2.0;
    if lip_bound > opts.x_tol && mass_bound > opts.x_tol {
        k = ((lip_bound / opts.x_tol).ceil() as usize).min(opts.max_refine.max(1));
        for i in 1..k {
            let x = q + len * i as f64 / k as f64;
            let c = mean_scale * law.window_mean(x, h, f);
            best.evals += 1;
            consider((emp - c).abs(), x, best);
        }
    }
    let slack = (lip_bound / k as f64).min(mass_bound);
    if slack > best.slack {
        best.slack = slack;
    }
}

/// `sup |S_n - E S_n|` over `x`, the bandwidth grid of `range` and the members
/// of `family`.
pub fn sup_deviation(
    path: &SamplePath,
    law: &LawMeta,
    range: &BandwidthRange,
    family: &FunctionFamily,
    resolution: u32,
) -> Result<SupDeviationResult> {
    sup_deviation_with(path, law, range, family, &SupOptions::new(resolution))
}

pub fn sup_deviation_with(
    path: &SamplePath,
    law: &LawMeta,
    range: &BandwidthRange,
    family: &FunctionFamily,
    opts: &SupOptions,
) -> Result<SupDeviationResult> {
    let n = path.len();
    if n == 0 {
        return Err(Error::validation("path", "must be non-empty"));
    }
    range.validate_for(n, law.density_sup)?;
    family.check_envelope_at(&path.zs)?;
    let grid = range.grid(opts.resolution)?;

    let order = sort_order(&path.xs);
    let xs: Vec<f64> = order.iter().map(|&i| path.xs[i]).collect();
    let fvals: Vec<Vec<f64>> = family
        .members
        .iter()
        .map(|m| order.iter().map(|&i| m.eval(path.zs[i])).collect())
        .collect();

    let cells: Vec<(usize, usize)> = (0..family.len())
        .flat_map(|fi| (0..grid.len()).map(move |hi| (fi, hi)))
        .collect();
    let scans: Vec<CellScan> = cells
        .par_iter()
        .map(|&(fi, hi)| {
            scan_cell(
                &SortedCell { xs: &xs, fvals: &fvals[fi] },
                law,
                grid[hi],
                &family.members[fi].func,
                family.envelope_sup,
                opts,
            )
        })
        .collect();

    let mut best: Option<(f64, &Member, f64, f64)> = None;
    let mut eval_count = 0;
    let mut grid_slack: f64 = 0.0;
    let mut all_exact = true;
    for (&(fi, hi), scan) in cells.iter().zip(&scans) {
        eval_count += scan.evals;
        grid_slack = grid_slack.max(scan.slack);
        all_exact &= scan.exact;
        let member = &family.members[fi];
        let cand = (scan.value, member, grid[hi], scan.x);
        best = Some(match best {
            None => cand,
            Some(b) => {
                if cand_before(&cand, &b) {
                    cand
                } else {
                    b
                }
            }
        });
    }
    let (sup_value, member, h, x) = best.expect("family and grid are non-empty");

    let bandwidth_slack = BandwidthRange::grid_steps(&grid, range.b_n)
        .map(|(h0, h1)| {
            3.0 * (n as f64).sqrt() * law.density_sup * family.envelope_sup * (h1 - h0) / h0.sqrt()
        })
        .fold(0.0, f64::max);

    Ok(SupDeviationResult {
        sup_value,
        argmax: Argmax {
            x,
            h,
            member: member.id.clone(),
        },
        eval_count,
        method: if all_exact {
            SupMethod::ExactBreakpoint
        } else {
            SupMethod::Grid
        },
        grid_slack: if all_exact { 0.0 } else { grid_slack },
        bandwidth_slack,
    })
}

/// Larger value first, then lexicographically smaller `(f-id, h, x)`.
fn cand_before(a: &(f64, &Member, f64, f64), b: &(f64, &Member, f64, f64)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => {
            (a.1.id.as_str(), a.2, a.3).partial_cmp(&(b.1.id.as_str(), b.2, b.3))
                == Some(Ordering::Less)
        }
    }
}

/// Probability integral transform `U_i = G(X_i)`.
pub fn to_uniform(path: &SamplePath) -> SamplePath {
    SamplePath {
        xs: path.xs.iter().map(|&x| path.law.cdf(x)).collect(),
        zs: path.zs.clone(),
        law: path.law.uniformized(),
    }
}

fn check_uniform(path: &SamplePath) -> Result<()> {
    if path.law.marginal != Marginal::Uniform01 {
        return Err(Error::Precondition(
            "path is not on the uniform scale; apply to_uniform first".into(),
        ));
    }
    Ok(())
}

/// `n^{-1/2} (sum_i 1{U_i <= u} f(Z_i) - n E[1{U <= u} f(Z)])`.
pub fn z_n(uniform_path: &SamplePath, u: f64, f: &Func) -> Result<f64> {
    check_uniform(uniform_path)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("u must lie in [0, 1], got {u}")));
    }
    let n = uniform_path.len() as f64;
    let sum: f64 = uniform_path
        .xs
        .iter()
        .zip(&uniform_path.zs)
        .filter(|(ui, _)| **ui <= u)
        .map(|(_, z)| f.eval(*z))
        .sum();
    Ok((sum - n * uniform_path.law.lower_mean(u, f)) / n.sqrt())
}

/// `floor(2^K u) / 2^K`.
pub fn dyadic_project(u: f64, k: i32) -> Result<f64> {
    if k < 0 {
        return Err(Error::Domain(format!("level must be non-negative, got {k}")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("u must lie in [0, 1], got {u}")));
    }
    let scale = (k as f64).exp2();
    Ok((u * scale).floor() / scale)
}

/// Smallest `L` with `2^L >= n`.
pub fn ceil_log2(n: usize) -> u32 {
    n.max(1).next_power_of_two().trailing_zeros()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainingReport {
    pub k: u32,
    pub top_level: u32,
    /// `(l, Delta_l)` for `l = K+1..=L`.
    pub deltas: Vec<(u32, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Pathwise chaining check at level `k` for one nonnegative member:
/// `sup_u |Z_n(u) - Z_n(Pi_K u)| <= 2 sum_{l=K+1}^{L} Delta_l + kappa / sqrt(n)`
/// with `L = ceil(log2 n)`.
pub fn chaining_decomposition(
    uniform_path: &SamplePath,
    f: &Func,
    kappa_sup: f64,
    k: u32,
) -> Result<ChainingReport> {
    check_uniform(uniform_path)?;
    let n = uniform_path.len();
    if n == 0 {
        return Err(Error::validation("path", "must be non-empty"));
    }
    let mu = uniform_path.law.factorized_mean(f).ok_or_else(|| {
        Error::OracleMissing("chaining diagnostics need a centering linear in u".into())
    })?;
    let fvals: Vec<f64> = uniform_path.zs.iter().map(|&z| f.eval(z)).collect();
    if fvals.iter().any(|v| *v < 0.0) || f.range_on(-1.0, 1.0).0 < 0.0 {
        return Err(Error::Precondition(
            "member takes negative values; shift the family first".into(),
        ));
    }
    let top = ceil_log2(n);
    if k > top {
        return Err(Error::Domain(format!("level {k} exceeds ceil(log2 n) = {top}")));
    }
    let rn = (n as f64).sqrt();
    let nf = n as f64;

    let mut pts: Vec<(f64, f64)> = uniform_path
        .xs
        .iter()
        .copied()
        .zip(fvals.iter().copied())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Pi_K is a floor projection, so each cell is [a, e) and Z_n(Pi_K u) is
    // the value at the left end a.
    let cells = 1u64 << k;
    let width = 1.0 / cells as f64;
    let mut lhs: f64 = 0.0;
    let mut idx = 0usize;
    for cell in 0..cells {
        let a = cell as f64 * width;
        let e = (cell + 1) as f64 * width;
        while idx < pts.len() && pts[idx].0 <= a {
            idx += 1;
        }
        let mut acc = 0.0;
        while idx < pts.len() && pts[idx].0 < e {
            let u = pts[idx].0;
            let drift = nf * mu * (u - a);
            lhs = lhs.max((acc - drift).abs() / rn);
            while idx < pts.len() && pts[idx].0 == u {
                acc += pts[idx].1;
                idx += 1;
            }
            lhs = lhs.max((acc - drift).abs() / rn);
        }
        lhs = lhs.max((acc - nf * mu * (e - a)).abs() / rn);
    }

    let deltas: Vec<(u32, f64)> = (k + 1..=top)
        .map(|l| (l, delta_level(&pts, l, mu, nf)))
        .collect();
    let rhs = 2.0 * deltas.iter().map(|d| d.1).sum::<f64>() + kappa_sup / rn;
    Ok(ChainingReport {
        k,
        top_level: top,
        holds: lhs <= rhs + CHAINING_SLACK,
        deltas,
        lhs,
        rhs,
    })
}

/// `max_k |Z_n((k-1)/2^l) - Z_n(k/2^l)|` for `k = 1..2^l`.
fn delta_level(sorted: &[(f64, f64)], l: u32, mu: f64, nf: f64) -> f64 {
    let cells = 1usize << l;
    let width = 1.0 / cells as f64;
    let mut sums = vec![0.0; cells];
    for &(u, v) in sorted {
        // u in ((k-1)/2^l, k/2^l] belongs to cell k-1.
        let c = (u * cells as f64).ceil() as usize;
        if c >= 1 && c <= cells {
            sums[c - 1] += v;
        }
    }
    sums.iter()
        .map(|s| (s - nf * mu * width).abs() / nf.sqrt())
        .fold(0.0, f64::max)
}

/// A signed family split as `F = (F - f_low) + {f_low}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedFamily {
    /// Members `f + kappa`, nonnegative with envelope `2 kappa`.
    pub shifted: FunctionFamily,
    /// The constant `-kappa`.
    pub floor: FunctionFamily,
}

pub fn shift_family(family: &FunctionFamily) -> Result<ShiftedFamily> {
    let kappa = family.envelope_sup;
    let members = family
        .members
        .iter()
        .map(|m| {
            Member::new(
                m.id.clone(),
                Func::Shifted {
                    inner: Box::new(m.func.clone()),
                    shift: kappa,
                },
            )
        })
        .collect();
    let shifted = FunctionFamily::with_envelope(
        format!("{}_shifted", family.name),
        members,
        family.domain,
        2.0 * kappa,
    )?;
    let floor = FunctionFamily::with_envelope(
        format!("{}_floor", family.name),
        vec![Member::new("floor", Func::Constant { value: -kappa })],
        family.domain,
        kappa,
    )?;
    Ok(ShiftedFamily { shifted, floor })
}

/// Terms of the split of a window at its centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSplit {
    /// `|S_n - E S_n|`.
    pub total: f64,
    /// Centred sum over `[x, x + h]`.
    pub right: f64,
    /// Centred sum over `[x - h, x]`.
    pub left: f64,
    /// `(nh)^{-1/2} |sum_i 1{X_i = x} f(Z_i)|`, the doubly counted point mass.
    pub atom: f64,
}

impl WindowSplit {
    pub fn holds(&self) -> bool {
        self.total <= self.right + self.left + self.atom + 1e-12 * (1.0 + self.total)
    }
}

pub fn window_split(path: &SamplePath, law: &LawMeta, x: f64, h: f64, f: &Func) -> Result<WindowSplit> {
    check_h(h)?;
    let n = path.len();
    let norm = 1.0 / (n as f64 * h).sqrt();
    let centred = |lo: f64, hi: f64| {
        let sum: f64 = path
            .xs
            .iter()
            .zip(&path.zs)
            .filter(|(xi, _)| lo <= **xi && **xi <= hi)
            .map(|(_, z)| f.eval(*z))
            .sum();
        let mean = n as f64 * law.window_mean(0.5 * (lo + hi), 0.5 * (hi - lo), f);
        (sum - mean) * norm
    };
    let atom_sum: f64 = path
        .xs
        .iter()
        .zip(&path.zs)
        .filter(|(xi, _)| **xi == x)
        .map(|(_, z)| f.eval(*z))
        .sum();
    Ok(WindowSplit {
        total: (s_n(path, x, h, f)? - centering(law, x, h, f, n)).abs(),
        right: centred(x, x + h).abs(),
        left: centred(x - h, x).abs(),
        atom: (atom_sum * norm).abs(),
    })
}
