//! Config-driven Monte Carlo studies: replicated sup-deviations, their
//! empirical Orlicz norms against the closed-form envelope, rate regressions
//! and a pathwise chaining audit.
//!
//! Replication `r` at the `j`-th sample size draws from
//! `derived_stream(seed, j, r)`, so results do not depend on execution order.
//! The `n` and `seed` fields of the process template are overridden.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, LowerIndex, RateInputs};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::function_family::{EntropyModel, FamilySpec, FunctionFamily};
use crate::local_process::{
    ceil_log2, chaining_decomposition, shift_family, sup_deviation_with, to_uniform, BandwidthRange,
    SupDeviationResult, SupOptions,
};
use crate::orlicz::{orlicz_norm, MIN_SAMPLES};
use crate::process_gen::{Generator, ProcessSpec};
use crate::rng::derived_stream;

/// Bandwidth schedule as a function of `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `a_n = a_const n^-alpha`, `b_n = b_factor a_n`.
    Polynomial {
        #[serde(default = "one")]
        a_const: f64,
        alpha: f64,
        #[serde(default = "two")]
        b_factor: f64,
    },
    Fixed { a_n: f64, b_n: f64 },
}

impl BandwidthRule {
    pub fn at(&self, n: usize) -> Result<BandwidthRange> {
        match *self {
            BandwidthRule::Polynomial {
                a_const,
                alpha,
                b_factor,
            } => {
                let a = a_const * (n as f64).powf(-alpha);
                BandwidthRange::new(a, b_factor * a)
            }
            BandwidthRule::Fixed { a_n, b_n } => BandwidthRange::new(a_n, b_n),
        }
    }
}

/// Constants of the closed-form envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default = "one")]
    pub c_abs: f64,
    #[serde(default = "one")]
    pub d_c: f64,
    #[serde(default)]
    pub lower: LowerIndex,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            q: 2.0,
            c_abs: 1.0,
            d_c: 1.0,
            lower: LowerIndex::Ceil,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn default_replications() -> usize {
    200
}

fn default_resolution() -> u32 {
    2
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_orlicz_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub n_grid: Vec<usize>,
    pub bandwidth: BandwidthRule,
    pub family: FamilySpec,
    /// Defaults to the exact cardinality of the family.
    #[serde(default)]
    pub entropy: Option<EntropyModel>,
    /// Polynomial-entropy parameters for `poly_rate`. Defaults to the entropy
    /// model's `(C_n, v_n)`, or `(cardinality, 1)` for a finite family.
    #[serde(default)]
    pub rates: Option<RateInputs>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bound: BoundConstants,
    #[serde(default = "default_resolution")]
    pub resolution: u32,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_orlicz_tol")]
    pub orlicz_tol: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses a config after applying `key=value` overrides, where `key` is a
    /// dotted path such as `process.m` and `value` is a TOML literal (bare
    /// words are read as strings).
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        Self::from_toml_with_overrides(&fs::read_to_string(path)?, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::validation("n_grid", "must be non-empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("n_grid", "must be strictly ascending"));
        }
        if self.replications < 2 {
            return Err(Error::validation("replications", "must be >= 2"));
        }
        if let Some(e) = &self.entropy {
            e.validate()?;
        }
        if let Some(r) = &self.rates {
            r.validate()?;
        }
        let generator = Generator::new(&self.spec_at(self.n_grid[0]))?;
        for &n in &self.n_grid {
            let range = self.bandwidth.at(n)?;
            self.spec_at(n).validate()?;
            range
                .validate_for(n, generator.law().density_sup)
                .map_err(|e| Error::validation("bandwidth", format!("at n = {n}: {e}")))?;
            range.grid(self.resolution)?;
        }
        Ok(())
    }

    /// The process template at sample size `n` with the base seed.
    pub fn spec_at(&self, n: usize) -> ProcessSpec {
        ProcessSpec {
            n,
            seed: self.seed,
            ..self.process.clone()
        }
    }

    /// Inputs of the closed-form envelope at sample size `n`.
    pub fn bound_inputs(&self, n: usize) -> Result<(BoundInputs, EntropyModel)> {
        let family = self.family.build()?;
        let law = Generator::new(&self.spec_at(n))?.law().clone();
        let range = self.bandwidth.at(n)?;
        let inputs = BoundInputs {
            n,
            q: self.bound.q,
            c: law.mixing_c,
            kappa_sup: family.envelope_sup,
            g_sup: law.density_sup,
            a_n: range.a_n,
            b_n: range.b_n,
            c_abs: self.bound.c_abs,
            d_c: self.bound.d_c,
            lower: self.bound.lower,
        };
        Ok((inputs, self.entropy_for(&family)))
    }

    /// Closed-form rates at every `n` of the grid.
    pub fn rate_rows(&self) -> Result<Vec<RateRow>> {
        self.validate()?;
        let family = self.family.build()?;
        let rates = self.rates_for(&family);
        self.n_grid
            .iter()
            .map(|&n| {
                let g = Generator::new(&self.spec_at(n))?.law().density_sup;
                let range = self.bandwidth.at(n)?;
                let nf = n as f64;
                Ok(RateRow {
                    n,
                    a_n: range.a_n,
                    b_n: range.b_n,
                    poly_rate: bounds::poly_rate(nf, range.a_n, range.b_n, &rates, g)?,
                    kde_rate: bounds::kde_rate(nf, range.a_n)?,
                    em_rate: bounds::einmahl_mason_rate(nf, range.a_n)?,
                    schedule_pred: bounds::schedule_predicate(nf, range.a_n),
                })
            })
            .collect()
    }

    fn entropy_for(&self, family: &FunctionFamily) -> EntropyModel {
        self.entropy
            .clone()
            .unwrap_or_else(|| EntropyModel::for_family(family))
    }

    fn rates_for(&self, family: &FunctionFamily) -> RateInputs {
        if let Some(r) = self.rates {
            return r;
        }
        match self.entropy_for(family) {
            EntropyModel::Polynomial { c_n, v_n } => RateInputs::new(c_n, v_n),
            EntropyModel::ExactFinite { cardinality } => RateInputs::new(cardinality as f64, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub a_n: f64,
    pub b_n: f64,
    pub poly_rate: f64,
    pub kde_rate: f64,
    pub em_rate: f64,
    pub schedule_pred: f64,
}

pub fn write_rates_csv<W: std::io::Write>(rows: &[RateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "a_n", "b_n", "poly_rate", "kde_rate", "em_rate", "schedule_pred"])?;
    for r in rows {
        let mut rec = vec![r.n.to_string()];
        rec.extend([r.a_n, r.b_n, r.poly_rate, r.kde_rate, r.em_rate, r.schedule_pred].map(fmt_f64));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Sets `key` (dotted) in `table` from a `key=value` string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value = parse_literal(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` in `{key}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub a_n: f64,
    pub b_n: f64,
    pub family: String,
    pub sup_value: f64,
    pub argmax_x: f64,
    pub argmax_h: f64,
    pub argmax_f: String,
    pub grid_slack: f64,
    pub bandwidth_slack: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub a_n: f64,
    pub b_n: f64,
    pub emp_orlicz: f64,
    pub thm1_rhs: f64,
    pub ratio: f64,
    pub poly_rate: f64,
    pub kde_rate: f64,
    pub em_rate: f64,
    pub mean_sup: f64,
    pub sd_sup: f64,
    pub mean_slack: f64,
    pub schedule_pred: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

pub const RUNS_HEADER: [&str; 13] = [
    "n",
    "replication",
    "seed",
    "a_n",
    "b_n",
    "family",
    "sup_value",
    "argmax_x",
    "argmax_h",
    "argmax_f",
    "grid_slack",
    "bandwidth_slack",
    "wall_time",
];

pub const SUMMARY_HEADER: [&str; 13] = [
    "n",
    "a_n",
    "b_n",
    "emp_orlicz",
    "thm1_rhs",
    "ratio",
    "poly_rate",
    "kde_rate",
    "em_rate",
    "mean_sup",
    "sd_sup",
    "mean_slack",
    "schedule_pred",
];

impl RunRecord {
    pub fn from_result(
        n: usize,
        replication: usize,
        seed: u64,
        range: &BandwidthRange,
        family: &str,
        res: &SupDeviationResult,
        wall_time: f64,
    ) -> Self {
        Self {
            n,
            replication,
            seed,
            a_n: range.a_n,
            b_n: range.b_n,
            family: family.to_string(),
            sup_value: res.sup_value,
            argmax_x: res.argmax.x,
            argmax_h: res.argmax.h,
            argmax_f: res.argmax.member.clone(),
            grid_slack: res.grid_slack,
            bandwidth_slack: res.bandwidth_slack,
            wall_time,
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.replication.to_string(),
            self.seed.to_string(),
            fmt_f64(self.a_n),
            fmt_f64(self.b_n),
            self.family.clone(),
            fmt_f64(self.sup_value),
            fmt_f64(self.argmax_x),
            fmt_f64(self.argmax_h),
            self.argmax_f.clone(),
            fmt_f64(self.grid_slack),
            fmt_f64(self.bandwidth_slack),
            fmt_f64(self.wall_time),
        ]
    }
}

impl SummaryRow {
    fn record(&self) -> Vec<String> {
        let mut out = vec![self.n.to_string()];
        out.extend(
            [
                self.a_n,
                self.b_n,
                self.emp_orlicz,
                self.thm1_rhs,
                self.ratio,
                self.poly_rate,
                self.kde_rate,
                self.em_rate,
                self.mean_sup,
                self.sd_sup,
                self.mean_slack,
                self.schedule_pred,
            ]
            .map(fmt_f64),
        );
        out
    }
}

pub fn write_runs_csv<W: std::io::Write>(runs: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUNS_HEADER)?;
    for r in runs {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every replication at every sample size without writing files.
pub fn simulate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let family = cfg.family.build()?;
    let entropy = cfg.entropy_for(&family);
    let rates = cfg.rates_for(&family);
    let opts = SupOptions::new(cfg.resolution);

    let mut runs = Vec::new();
    let mut summary = Vec::new();
    for (level, &n) in cfg.n_grid.iter().enumerate() {
        let spec = cfg.spec_at(n);
        let generator = Generator::new(&spec)?;
        let law = generator.law().clone();
        let range = cfg.bandwidth.at(n)?;

        let records: Vec<RunRecord> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let start = Instant::now();
                let mut rng = derived_stream(cfg.seed, level, r);
                let path = generator.sample(n, &mut rng);
                let res = sup_deviation_with(&path, &law, &range, &family, &opts)?;
                Ok(RunRecord::from_result(
                    n,
                    r,
                    cfg.seed,
                    &range,
                    &family.name,
                    &res,
                    start.elapsed().as_secs_f64(),
                ))
            })
            .collect::<Result<_>>()?;

        let sups: Vec<f64> = records.iter().map(|r| r.sup_value).collect();
        let emp_orlicz = if sups.len() >= MIN_SAMPLES {
            orlicz_norm(&sups, 1.0, cfg.orlicz_tol)?.norm_estimate
        } else {
            f64::NAN
        };
        let (inputs, _) = cfg.bound_inputs(n)?;
        let thm1_rhs = bounds::theorem1_rhs(&inputs, &entropy)?;
        let nf = n as f64;
        let (mean_sup, sd_sup) = mean_sd(&sups);
        summary.push(SummaryRow {
            n,
            a_n: range.a_n,
            b_n: range.b_n,
            emp_orlicz,
            thm1_rhs,
            ratio: emp_orlicz / thm1_rhs,
            poly_rate: bounds::poly_rate(nf, range.a_n, range.b_n, &rates, law.density_sup)?,
            kde_rate: bounds::kde_rate(nf, range.a_n)?,
            em_rate: bounds::einmahl_mason_rate(nf, range.a_n)?,
            mean_sup,
            sd_sup,
            mean_slack: mean_sd(&records.iter().map(|r| r.grid_slack).collect::<Vec<_>>()).0,
            schedule_pred: bounds::schedule_predicate(nf, range.a_n),
        });
        runs.extend(records);
    }
    Ok(RunOutput { runs, summary })
}

/// Runs the experiment and writes `runs.csv` and `summary.csv` under
/// `cfg.output`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let out = simulate(cfg)?;
    fs::create_dir_all(&cfg.output)?;
    write_runs_csv(&out.runs, fs::File::create(cfg.output.join("runs.csv"))?)?;
    write_summary_csv(&out.summary, fs::File::create(cfg.output.join("summary.csv"))?)?;
    Ok(out)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XTransform {
    LogN,
    LogLogN,
}

impl XTransform {
    pub fn apply(self, n: f64) -> f64 {
        match self {
            XTransform::LogN => n.ln(),
            XTransform::LogLogN => n.ln().ln(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r2: f64,
}

pub fn write_regression_csv<W: std::io::Write>(r: &Regression, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slope", "intercept", "stderr", "r2"])?;
    w.write_record([r.slope, r.intercept, r.stderr, r.r2].map(fmt_f64))?;
    w.flush()?;
    Ok(())
}

/// Ordinary least squares of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<Regression> {
    if xs.len() != ys.len() {
        return Err(Error::validation("regression", "x and y differ in length"));
    }
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "regression needs at least 4 rows, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("regression input is not finite".into()));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Evaluation("regressor is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ssr / syy };
    Ok(Regression {
        slope,
        intercept,
        stderr: (ssr / (m - 2.0) / sxx).sqrt(),
        r2,
    })
}

/// Regresses column `y_column` of a summary CSV (optionally logged) on the
/// transformed `n` column.
pub fn rate_regression(summary_csv: &Path, y_column: &str, x: XTransform, log_y: bool) -> Result<Regression> {
    let mut rdr = csv::Reader::from_path(summary_csv)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation("y_column", format!("no column `{name}`")))
    };
    let (ni, yi) = (col("n")?, col(y_column)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::Evaluation(format!("column {i}: {e}")))
        };
        xs.push(x.apply(parse(ni)?));
        let y = parse(yi)?;
        ys.push(if log_y { y.ln() } else { y });
    }
    ols(&xs, &ys)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub n: usize,
    pub replication: usize,
    pub member: String,
    pub k: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditOutput {
    pub rows: Vec<AuditRow>,
    pub pass_rate: f64,
}

/// Pathwise chaining check for every replication, member and level
/// `K = 1..=min(4, ceil(log2 n))`. Signed families are shifted first.
pub fn chaining_audit_rows(cfg: &ExperimentConfig) -> Result<AuditOutput> {
    cfg.validate()?;
    let family = cfg.family.build()?;
    let family = if family.nonnegative {
        family
    } else {
        shift_family(&family)?.shifted
    };
    let mut rows = Vec::new();
    for (level, &n) in cfg.n_grid.iter().enumerate() {
        let generator = Generator::new(&cfg.spec_at(n))?;
        let top = ceil_log2(n).min(4);
        let chunk: Vec<Vec<AuditRow>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = derived_stream(cfg.seed, level, r);
                let path = to_uniform(&generator.sample(n, &mut rng));
                let mut out = Vec::new();
                for m in &family.members {
                    for k in 1..=top {
                        let rep = chaining_decomposition(&path, &m.func, family.envelope_sup, k)?;
                        out.push(AuditRow {
                            n,
                            replication: r,
                            member: m.id.clone(),
                            k,
                            lhs: rep.lhs,
                            rhs: rep.rhs,
                            holds: rep.holds,
                        });
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        rows.extend(chunk.into_iter().flatten());
    }
    let pass = rows.iter().filter(|r| r.holds).count();
    let pass_rate = if rows.is_empty() {
        1.0
    } else {
        pass as f64 / rows.len() as f64
    };
    Ok(AuditOutput { rows, pass_rate })
}

pub fn write_audit_csv<W: std::io::Write>(rows: &[AuditRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "replication", "member", "k", "lhs", "rhs", "holds"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.replication.to_string(),
            r.member.clone(),
            r.k.to_string(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            r.holds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the audit and writes `audit.csv` under `cfg.output`.
pub fn chaining_audit(cfg: &ExperimentConfig) -> Result<AuditOutput> {
    let out = chaining_audit_rows(cfg)?;
    fs::create_dir_all(&cfg.output)?;
    write_audit_csv(&out.rows, fs::File::create(cfg.output.join("audit.csv"))?)?;
    Ok(out)
}
