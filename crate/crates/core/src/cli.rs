//! Command-line front end: CSV ingestion, block and ψ specification, dispatch
//! to the estimators, tests, studies and oracles, and JSON/CSV reporting.
//!
//! Column ranges are 0-based and inclusive, blocks separated by `;`
//! (`"0-2;3;4-5"`). A single ψ spec is used for every block.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::Rng;
use serde::Serialize;

use crate::centering::center_blocks;
use crate::cndf::{CndfKind, CndfSpec};
use crate::error::{input, Error, Result};
use crate::experiments::{
    bernstein_comparison, power_sweep, write_power_csv, Generator, PowerStudyConfig, StudyTest,
};
use crate::inference::{
    montecarlo_test, permutation_test, test_multivariance_conservative, test_total_conservative, Marginal,
    MarginalSampler, TestReport, DEFAULT_RESAMPLES,
};
use crate::multivariance::{estimate, estimates, sample_multivariance, sample_total_multivariance, StatisticKind};
use crate::oracle::{
    bernstein_law, gaussian_multivariance_mc, population_multivariance_exact, population_summary,
    sample_multivariance_bruteforce, total_via_subset_enumeration, FiniteDistribution, MAX_ENUMERATED_BLOCKS,
};
use crate::rng;
use crate::sample::BlockSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Compute,
    Test,
    Power,
    Bernstein,
    OracleCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestMethod {
    Conservative,
    Permutation,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    M,
    Total,
    Normalized,
    NormalizedTotal,
}

impl From<StatisticArg> for StatisticKind {
    fn from(s: StatisticArg) -> Self {
        match s {
            StatisticArg::M => StatisticKind::M,
            StatisticArg::Total => StatisticKind::TotalM,
            StatisticArg::Normalized => StatisticKind::NormalizedM,
            StatisticArg::NormalizedTotal => StatisticKind::NormalizedTotalM,
        }
    }
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_path: Option<PathBuf>,
    /// Column ranges; `None` makes every column its own block.
    pub block_spec: Option<String>,
    /// One spec per block, or one spec for all blocks. Empty means Euclidean.
    pub psi_specs: Vec<String>,
    pub command: Command,
    pub method: TestMethod,
    pub statistic: StatisticKind,
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Power studies: data generator, e.g. `sinusoidal:l=2`.
    pub generator: Option<String>,
    /// Power studies: sample sizes; `bernstein`: the first entry is the sample size.
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub test: StudyTest,
    /// Monte-Carlo test: one marginal law per block, or one for all blocks.
    pub marginals: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_path: None,
            block_spec: None,
            psi_specs: Vec::new(),
            command: Command::Compute,
            method: TestMethod::Conservative,
            statistic: StatisticKind::NormalizedTotalM,
            alpha: 0.05,
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
            output: None,
            format: OutputFormat::Json,
            generator: None,
            sizes: Vec::new(),
            replications: 1000,
            test: StudyTest::Test2,
            marginals: Vec::new(),
        }
    }
}

/// Command-line arguments of the `multivariance` binary.
#[derive(Debug, Parser)]
#[command(name = "multivariance", version, about = "Distance multivariance and independence tests")]
pub struct Args {
    /// CSV file with one observation per row
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Column ranges per block, 0-based inclusive, e.g. "0-2;3;4-5" (default: one block per column)
    #[arg(long)]
    pub blocks: Option<String>,
    /// Distance per block, ';'-separated, or one for all: euclid, stable:alpha=A, minkowski:p=P, boundedexp:gamma=G
    #[arg(long)]
    pub psi: Option<String>,
    #[arg(long, value_enum, default_value = "compute")]
    pub command: Command,
    #[arg(long, value_enum, default_value = "conservative")]
    pub method: TestMethod,
    #[arg(long, value_enum, default_value = "normalized-total")]
    pub statistic: StatisticArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report destination (default: stdout)
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
    /// Power study generator: bernstein, sinusoidal:l=L, independent-uniform[:blocks=K]
    #[arg(long)]
    pub generator: Option<String>,
    /// Sample sizes, comma-separated (power); sample size (bernstein)
    #[arg(long = "n")]
    pub sizes: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub replications: usize,
    /// Power study test: test1, test2, permutation
    #[arg(long, default_value = "test2")]
    pub test: String,
    /// Marginals for the Monte-Carlo test, ';'-separated: bernoulli:p=P, uniform:low=L,high=H, normal:mean=M,sd=S
    #[arg(long)]
    pub marginals: Option<String>,
}

fn split_list(s: &Option<String>) -> Vec<String> {
    s.as_deref()
        .map(|v| v.split(';').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect())
        .unwrap_or_default()
}

impl Args {
    pub fn into_config(self) -> Result<RunConfig> {
        let sizes = match &self.sizes {
            None => Vec::new(),
            Some(s) => s
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|_| input(format!("invalid sample size {v:?}"))))
                .collect::<Result<_>>()?,
        };
        Ok(RunConfig {
            psi_specs: split_list(&self.psi),
            marginals: split_list(&self.marginals),
            input_path: self.input,
            block_spec: self.blocks,
            command: self.command,
            method: self.method,
            statistic: self.statistic.into(),
            alpha: self.alpha,
            resamples: self.resamples,
            seed: self.seed,
            output: self.output,
            format: self.format,
            generator: self.generator,
            sizes,
            replications: self.replications,
            test: self.test.parse()?,
        })
    }
}

/// Parses `"0-2;3;4-5"` into inclusive column ranges, checking bounds and overlap.
pub fn parse_block_spec(spec: &str, columns: usize) -> Result<Vec<(usize, usize)>> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for part in spec.split(';') {
        let part = part.trim();
        if part.is_empty() {
            return Err(input(format!("empty block in block spec {spec:?}")));
        }
        let (lo, hi) = part.split_once('-').unwrap_or((part, part));
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| input(format!("invalid column index {v:?} in block spec {spec:?}")))
        };
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if lo > hi {
            return Err(input(format!("block {part:?} has its end before its start")));
        }
        if hi >= columns {
            return Err(input(format!("block {part:?} refers to column {hi} but the data has {columns} columns")));
        }
        if let Some(&(a, b)) = out.iter().find(|&&(a, b)| lo <= b && a <= hi) {
            return Err(input(format!("block {part:?} overlaps block {a}-{b}")));
        }
        out.push((lo, hi));
    }
    Ok(out)
}

/// Reads a rectangular numeric CSV. A first row with any non-numeric cell is
/// a header. Errors name the 1-based line and 0-based column.
pub fn read_csv_table<R: Read>(reader: R) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| input(format!("CSV parse error: {e}")))?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if idx == 0 && parsed.iter().any(|p| p.is_err()) {
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(input(format!("line {line}: expected {w} columns, found {}", rec.len())));
        }
        let mut row = Vec::with_capacity(w);
        for (c, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(_) => return Err(input(format!("non-finite value at line {line}, column {c}"))),
                Err(_) => return Err(input(format!("non-numeric value {:?} at line {line}, column {c}", &rec[c]))),
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(input("the CSV input contains no data rows"));
    }
    let w = rows[0].len();
    Ok((rows, w))
}

/// Builds a sample from CSV rows; blocks are gathered in the order given.
pub fn sample_from_table(rows: &[Vec<f64>], columns: usize, block_spec: Option<&str>) -> Result<BlockSample> {
    let ranges = match block_spec {
        Some(s) => parse_block_spec(s, columns)?,
        None => (0..columns).map(|c| (c, c)).collect(),
    };
    let order: Vec<usize> = ranges.iter().flat_map(|&(a, b)| a..=b).collect();
    let dims: Vec<usize> = ranges.iter().map(|&(a, b)| b - a + 1).collect();
    let mut data = Vec::with_capacity(rows.len() * order.len());
    for r in rows {
        data.extend(order.iter().map(|&c| r[c]));
    }
    BlockSample::from_dims(data, rows.len(), &dims)
}

/// Reads `path` and splits its columns into blocks.
pub fn ingest_csv(path: &Path, block_spec: Option<&str>) -> Result<BlockSample> {
    let file = File::open(path).map_err(|e| input(format!("cannot open {}: {e}", path.display())))?;
    let (rows, columns) = read_csv_table(io::BufReader::new(file))?;
    sample_from_table(&rows, columns, block_spec)
}

/// Resolves ψ strings against the block dimensions of a sample.
pub fn resolve_specs(psi: &[String], dims: &[usize]) -> Result<Vec<CndfSpec>> {
    let kinds: Vec<CndfKind> = match psi.len() {
        0 => vec![CndfKind::EUCLIDEAN; dims.len()],
        1 => vec![psi[0].parse()?; dims.len()],
        k if k == dims.len() => psi.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        k => return Err(input(format!("{k} distance specs given for {} blocks", dims.len()))),
    };
    kinds.into_iter().zip(dims).map(|(k, &d)| k.with_dimension(d)).collect()
}

fn resolve_marginals(specs: &[String], dims: &[usize]) -> Result<Vec<Box<dyn MarginalSampler>>> {
    let laws: Vec<Marginal> = match specs.len() {
        0 => return Err(input("the Monte-Carlo test needs --marginals")),
        1 => vec![specs[0].parse()?; dims.len()],
        k if k == dims.len() => specs.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        k => return Err(input(format!("{k} marginals given for {} blocks", dims.len()))),
    };
    laws.into_iter()
        .zip(dims)
        .map(|(m, &d)| Ok(Box::new(m.iid(d)?) as Box<dyn MarginalSampler>))
        .collect()
}

/// JSON formatter writing every float with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes `value` as one line of JSON with full-precision floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Input(format!("serializing report: {e}")))?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

#[derive(Debug, Serialize)]
struct ComputeReport {
    #[serde(flatten)]
    estimates: crate::MultivarianceEstimates,
    m: f64,
    total_m: f64,
    normalized_m: f64,
    normalized_total_m: f64,
    multicorrelation: f64,
    psi: Vec<String>,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct CheckResult {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Debug, Serialize)]
struct OracleCheckReport {
    passed: bool,
    checks: Vec<CheckResult>,
}

#[derive(Debug, Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

fn load_sample(config: &RunConfig) -> Result<BlockSample> {
    let path = config
        .input_path
        .as_deref()
        .ok_or_else(|| input(format!("--input is required for {:?}", config.command)))?;
    ingest_csv(path, config.block_spec.as_deref())
}

fn csv_lines(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn compute(config: &RunConfig) -> Result<String> {
    let sample = load_sample(config)?;
    let specs = resolve_specs(&config.psi_specs, &sample.block_dims())?;
    let est = estimate(&sample, &specs)?;
    let mut warnings = Vec::new();
    if est.blocks == 1 {
        warnings.push("a single block was given; multivariance of one variable is 0 by definition".to_string());
    }
    let roots = [est.m(), est.total_m(), est.normalized_m(), est.normalized_total_m(), est.multicorrelation()];
    if roots.iter().any(|r| r.clamped) {
        warnings.push("a negative rounding residue was clamped to 0 before taking a square root".to_string());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let report = ComputeReport {
        m: roots[0].value,
        total_m: roots[1].value,
        normalized_m: roots[2].value,
        normalized_total_m: roots[3].value,
        multicorrelation: roots[4].value,
        psi: specs.iter().map(|s| s.kind().to_string()).collect(),
        warnings,
        estimates: est,
    };
    match config.format {
        OutputFormat::Json => to_json(&report),
        OutputFormat::Csv => {
            let e = &report.estimates;
            Ok(csv_lines(
                &["N", "n", "m2", "total_m2", "normalized_m2", "normalized_total_m2", "multicorrelation2"],
                &[vec![
                    e.sample_size.to_string(),
                    e.blocks.to_string(),
                    num(e.m2),
                    num(e.total_m2),
                    num(e.normalized_m2),
                    num(e.normalized_total_m2),
                    num(e.multicorrelation2),
                ]],
            ))
        }
    }
}

fn test(config: &RunConfig) -> Result<String> {
    let sample = load_sample(config)?;
    let specs = resolve_specs(&config.psi_specs, &sample.block_dims())?;
    let report: TestReport = match config.method {
        TestMethod::Conservative => match config.statistic {
            StatisticKind::NormalizedM => test_multivariance_conservative(&sample, &specs, config.alpha)?,
            StatisticKind::NormalizedTotalM => test_total_conservative(&sample, &specs, config.alpha)?,
            other => {
                return Err(Error::Parameter(format!(
                    "the conservative test needs a normalized statistic, not {other:?}"
                )))
            }
        },
        TestMethod::Permutation => {
            permutation_test(&sample, &specs, config.statistic, config.resamples, config.alpha, config.seed)?
        }
        TestMethod::Montecarlo => {
            let boxed = resolve_marginals(&config.marginals, &sample.block_dims())?;
            let samplers: Vec<&dyn MarginalSampler> = boxed.iter().map(|b| b.as_ref()).collect();
            montecarlo_test(&sample, &specs, &samplers, config.statistic, config.resamples, config.alpha, config.seed)?
        }
    };
    match config.format {
        OutputFormat::Json => to_json(&report),
        OutputFormat::Csv => Ok(csv_lines(
            &["statistic", "method", "alpha", "critical_value", "p_value", "reject", "resamples", "seed"],
            &[vec![
                num(report.statistic),
                format!("{:?}", report.method),
                num(report.alpha),
                report.critical_value.map(num).unwrap_or_default(),
                report.p_value.map(num).unwrap_or_default(),
                report.reject.to_string(),
                report.resamples.to_string(),
                report.seed.to_string(),
            ]],
        )),
    }
}

fn power(config: &RunConfig) -> Result<String> {
    let generator: Generator = config
        .generator
        .as_deref()
        .ok_or_else(|| Error::Config("power studies need --generator".into()))?
        .parse()?;
    let dims = vec![1; generator.block_count()];
    let study = PowerStudyConfig {
        generator,
        sample_size: 3,
        replications: config.replications,
        alpha: config.alpha,
        test: config.test,
        specs: resolve_specs(&config.psi_specs, &dims)?,
        resamples: config.resamples,
        seed: config.seed,
    };
    let sizes = if config.sizes.is_empty() { vec![10, 20, 30] } else { config.sizes.clone() };
    let rows = power_sweep(&study, &sizes)?;
    match config.format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_power_csv(&rows, &mut buf)?;
            Ok(String::from_utf8(buf).expect("CSV is UTF-8"))
        }
        OutputFormat::Json => to_json(&rows),
    }
}

fn bernstein(config: &RunConfig) -> Result<String> {
    let size = config.sizes.first().copied().unwrap_or(10_000);
    let report = bernstein_comparison(size, config.seed)?;
    match config.format {
        OutputFormat::Json => to_json(&report),
        OutputFormat::Csv => {
            let (a, o, s) = (&report.analytic, &report.oracle, &report.sample);
            let row = |name: &str, x: f64, y: f64, z: f64| vec![name.to_string(), num(x), num(y), num(z)];
            Ok(csv_lines(
                &["quantity", "analytic", "oracle", "sample"],
                &[
                    row("m2", a.m2, o.m2, s.m2),
                    row("total_m2", a.total_m2, o.total_m2, s.total_m2),
                    row("normalized_m2", a.normalized_m * a.normalized_m, o.normalized_m2, s.normalized_m2),
                    row(
                        "normalized_total_m2",
                        a.normalized_total_m * a.normalized_total_m,
                        o.normalized_total_m2,
                        s.normalized_total_m2,
                    ),
                    row("multicorrelation2", a.multicorrelation, o.multicorrelation2, s.multicorrelation2),
                ],
            ))
        }
    }
}

fn relative_gap(x: f64, y: f64, scale: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(scale).max(f64::MIN_POSITIVE)
}

fn oracle_checks(config: &RunConfig) -> Result<Vec<CheckResult>> {
    let mut checks = Vec::new();
    let euclid = CndfSpec::euclidean(1)?;

    // random small instances across all distance families
    let mut rng = rng::stream(config.seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let size = rng.random_range(2..=8);
        let dims: Vec<usize> = (0..rng.random_range(1..=4)).map(|_| rng.random_range(1..=3)).collect();
        let width: usize = dims.iter().sum();
        let data = (0..size * width).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sample = BlockSample::from_dims(data, size, &dims)?;
        let specs: Vec<CndfSpec> = dims
            .iter()
            .map(|&d| match rng.random_range(0..3) {
                0 => CndfSpec::stable(rng.random_range(0.2..1.99), d),
                1 => CndfSpec::minkowski(rng.random_range(1.01..2.0), d),
                _ => CndfSpec::bounded_exp(rng.random_range(0.2..3.0), d),
            })
            .collect::<Result<_>>()?;
        let mats = center_blocks(&sample, &specs)?;
        let scale: f64 = mats.iter().map(|m| m.a.max_abs()).product();
        let fast = sample_multivariance(&mats)?;
        let brute = sample_multivariance_bruteforce(&sample, &specs)?;
        let exact = population_multivariance_exact(&FiniteDistribution::empirical(&sample)?, &specs)?;
        worst = worst.max(relative_gap(fast, brute, scale)).max(relative_gap(fast, exact, scale));
    }
    checks.push(CheckResult {
        name: "matrix-vs-bruteforce-vs-exact".into(),
        passed: worst <= 1e-10,
        detail: format!("worst relative gap {worst:.3e} over 100 instances"),
    });

    let law = bernstein_law();
    let s = population_summary(&law, &[euclid; 3])?;
    let gaps = [
        s.m2 - 0.125,
        s.total_m2 - 0.125,
        s.normalized_m2 - 1.0,
        s.multicorrelation2 - 1.0,
        s.normalized_total_m2 - 0.25,
    ];
    let worst = gaps.iter().chain(s.a.iter().chain(&s.b).map(|v| v - 0.5).collect::<Vec<_>>().iter()).fold(0.0f64, |m, g| m.max(g.abs()));
    checks.push(CheckResult {
        name: "bernstein-population".into(),
        passed: worst <= 1e-12,
        detail: format!("largest deviation from the closed-form values {worst:.3e}"),
    });

    let g = gaussian_multivariance_mc(&law, &[euclid; 3], 20_000, config.seed)?;
    checks.push(CheckResult {
        name: "gaussian-multivariance".into(),
        passed: (g.estimate - 0.125).abs() <= 3.0 * g.std_error,
        detail: format!("estimate {:.6} ± {:.6}, target 0.125", g.estimate, g.std_error),
    });

    if config.input_path.is_some() {
        let sample = load_sample(config)?;
        let specs = resolve_specs(&config.psi_specs, &sample.block_dims())?;
        let mats = center_blocks(&sample, &specs)?;
        let est = estimates(&mats)?;
        let scale: f64 = mats.iter().map(|m| m.a.max_abs()).product();
        if sample.len() <= 60 {
            let brute = sample_multivariance_bruteforce(&sample, &specs)?;
            let gap = relative_gap(est.m2, brute, scale);
            checks.push(CheckResult {
                name: "input-bruteforce".into(),
                passed: gap <= 1e-10,
                detail: format!("relative gap {gap:.3e}"),
            });
        }
        if (2..=MAX_ENUMERATED_BLOCKS).contains(&sample.block_count()) {
            let gap = relative_gap(sample_total_multivariance(&mats)?, total_via_subset_enumeration(&mats)?, 0.0);
            checks.push(CheckResult {
                name: "input-subset-sum".into(),
                passed: gap <= 1e-10,
                detail: format!("relative gap {gap:.3e}"),
            });
        }
    }
    Ok(checks)
}

fn oracle_check(config: &RunConfig) -> Result<(String, bool)> {
    let checks = oracle_checks(config)?;
    let passed = checks.iter().all(|c| c.passed);
    let text = match config.format {
        OutputFormat::Json => to_json(&OracleCheckReport { passed, checks })?,
        OutputFormat::Csv => csv_lines(
            &["check", "passed", "detail"],
            &checks
                .iter()
                .map(|c| vec![c.name.clone(), c.passed.to_string(), format!("\"{}\"", c.detail)])
                .collect::<Vec<_>>(),
        ),
    };
    Ok((text, passed))
}

fn execute(config: &RunConfig) -> Result<(String, i32)> {
    let (mut text, code) = match config.command {
        Command::Compute => (compute(config)?, 0),
        Command::Test => (test(config)?, 0),
        Command::Power => (power(config)?, 0),
        Command::Bernstein => (bernstein(config)?, 0),
        Command::OracleCheck => {
            let (t, passed) = oracle_check(config)?;
            (t, if passed { 0 } else { 3 })
        }
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    Ok((text, code))
}

/// Runs one command. The report goes to `config.output` or, without one, to
/// `stdout`; errors are written to `stdout` as `{"error": {"code", "message"}}`.
/// Returns the process exit code: 0 on success, 2 on input errors, 3 on
/// numerical failures.
pub fn run<W: Write>(config: &RunConfig, stdout: &mut W) -> i32 {
    let outcome = execute(config).and_then(|(text, code)| {
        match &config.output {
            Some(path) => {
                let file = File::create(path).map_err(|e| input(format!("cannot create {}: {e}", path.display())))?;
                let mut w = BufWriter::new(file);
                w.write_all(text.as_bytes())
                    .and_then(|_| w.flush())
                    .map_err(|e| input(format!("writing {}: {e}", path.display())))?;
            }
            None => stdout
                .write_all(text.as_bytes())
                .map_err(|e| input(format!("writing report: {e}")))?,
        }
        Ok(code)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            let report = ErrorReport {
                error: ErrorBody {
                    code: e.code(),
                    message: e.to_string(),
                },
            };
            let line = to_json(&report).unwrap_or_else(|_| format!("{{\"error\":{{\"code\":\"{}\"}}}}", e.code()));
            let _ = writeln!(stdout, "{line}");
            e.exit_code()
        }
    }
}
