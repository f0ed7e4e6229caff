//! Data generators and Monte-Carlo study harnesses.
//!
//! Bernstein's coins: two fair coins, `A` = coin I shows heads, `B` = coin II
//! shows tails, `C` = both coins show the same side. The three events are
//! pairwise independent but not independent.
//!
//! Sinusoidal dependence: `(X, Y)` on `[−π, π]²` with density
//! `(1 + sin(lx) sin(ly)) / (4π²)`, uniform marginals.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cndf::CndfSpec;
use crate::error::{Error, Result};
use crate::inference::{permutation_test, test_multivariance_conservative, test_total_conservative};
use crate::multivariance::{estimate, MultivarianceEstimates, StatisticKind};
use crate::oracle::{bernstein_law, population_summary, PopulationSummary};
use crate::rng;
use crate::sample::BlockSample;

fn bernstein_from<R: Rng + ?Sized>(rng: &mut R, size: usize) -> BlockSample {
    let mut data = Vec::with_capacity(3 * size);
    for _ in 0..size {
        let first: bool = rng.random(); // heads
        let second: bool = rng.random();
        data.push(first as u8 as f64);
        data.push(!second as u8 as f64);
        data.push((first == second) as u8 as f64);
    }
    BlockSample::from_dims(data, size, &[1, 1, 1]).expect("finite 0/1 data")
}

/// `size` observations of `(A, B, C)` as 0/1 indicators in three 1-d blocks.
pub fn bernstein_sample(size: usize, seed: u64) -> BlockSample {
    bernstein_from(&mut rng::stream(seed, 0), size)
}

/// Closed-form population values for Bernstein's coins with Euclidean ψ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernsteinTargets {
    pub m2: f64,
    pub total_m2: f64,
    pub a: f64,
    pub b: f64,
    pub multicorrelation: f64,
    pub normalized_m: f64,
    pub normalized_total_m: f64,
    pub pairwise_m2: f64,
}

impl BernsteinTargets {
    pub fn m(&self) -> f64 {
        self.m2.sqrt()
    }
}

/// `M² = M̄² = 1/8`, `a = b = 1/2`, `𝓡 = 𝓜 = 1`, `𝓜̄ = 1/2`, pairwise `M² = 0`.
pub fn bernstein_population() -> BernsteinTargets {
    BernsteinTargets {
        m2: 0.125,
        total_m2: 0.125,
        a: 0.5,
        b: 0.5,
        multicorrelation: 1.0,
        normalized_m: 1.0,
        normalized_total_m: 0.5,
        pairwise_m2: 0.0,
    }
}

/// Analytic targets next to the exact finite-law oracle and a simulated sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinComparison {
    pub analytic: BernsteinTargets,
    pub oracle: PopulationSummary,
    pub sample: MultivarianceEstimates,
    /// `M̂²` of the pairs `(A,B)`, `(A,C)`, `(B,C)`.
    pub sample_pairwise_m2: [f64; 3],
    pub seed: u64,
}

pub fn bernstein_comparison(size: usize, seed: u64) -> Result<BernsteinComparison> {
    let euclid = CndfSpec::euclidean(1)?;
    let sample = bernstein_sample(size, seed);
    let est = estimate(&sample, &[euclid; 3])?;
    let mut pairs = [0.0; 3];
    for (slot, pair) in pairs.iter_mut().zip([[0, 1], [0, 2], [1, 2]]) {
        *slot = estimate(&sample.select_blocks(&pair), &[euclid; 2])?.m2;
    }
    Ok(BernsteinComparison {
        analytic: bernstein_population(),
        oracle: population_summary(&bernstein_law(), &[euclid; 3])?,
        sample: est,
        sample_pairwise_m2: pairs,
        seed,
    })
}

fn sinusoidal_from<R: Rng + ?Sized>(rng: &mut R, size: usize, l: u32) -> BlockSample {
    let freq = l as f64;
    let mut data = Vec::with_capacity(2 * size);
    while data.len() < 2 * size {
        let x = rng.random_range(-PI..PI);
        let y = rng.random_range(-PI..PI);
        let u: f64 = rng.random();
        if 2.0 * u < 1.0 + (freq * x).sin() * (freq * y).sin() {
            data.push(x);
            data.push(y);
        }
    }
    BlockSample::from_dims(data, size, &[1, 1]).expect("finite data")
}

/// `size` draws from the sinusoidal density with frequency `l ≥ 1`, by rejection
/// from the uniform law on the square (acceptance rate 1/2).
pub fn sinusoidal_sample(size: usize, l: u32, seed: u64) -> Result<BlockSample> {
    if l == 0 {
        return Err(Error::Parameter("the frequency l must be at least 1".into()));
    }
    Ok(sinusoidal_from(&mut rng::stream(seed, 0), size, l))
}

fn independent_uniform_from<R: Rng + ?Sized>(rng: &mut R, size: usize, blocks: usize) -> BlockSample {
    let data = (0..size * blocks).map(|_| rng.random::<f64>()).collect();
    BlockSample::from_dims(data, size, &vec![1; blocks]).expect("finite data")
}

/// Data source of a power study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    Bernstein,
    Sinusoidal { l: u32 },
    /// `blocks` independent Uniform(0,1) columns.
    IndependentUniform { blocks: usize },
}

impl Generator {
    pub fn block_count(&self) -> usize {
        match self {
            Generator::Bernstein => 3,
            Generator::Sinusoidal { .. } => 2,
            Generator::IndependentUniform { blocks } => *blocks,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Generator::Bernstein => "bernstein",
            Generator::Sinusoidal { .. } => "sinusoidal",
            Generator::IndependentUniform { .. } => "independent-uniform",
        }
    }

    fn param(&self) -> Option<f64> {
        match self {
            Generator::Bernstein => None,
            Generator::Sinusoidal { l } => Some(*l as f64),
            Generator::IndependentUniform { blocks } => Some(*blocks as f64),
        }
    }

    /// One draw of `size` observations; deterministic in `(seed, replication)`.
    pub fn generate(&self, size: usize, seed: u64, replication: u64) -> BlockSample {
        let mut rng = rng::stream(seed, replication);
        match *self {
            Generator::Bernstein => bernstein_from(&mut rng, size),
            Generator::Sinusoidal { l } => sinusoidal_from(&mut rng, size, l),
            Generator::IndependentUniform { blocks } => independent_uniform_from(&mut rng, size, blocks),
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    /// `bernstein`, `sinusoidal:l=<l>`, `independent-uniform[:blocks=<n>]` (default 3 blocks).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let value = |key: &str| -> Result<Option<usize>> {
            if arg.is_empty() {
                return Ok(None);
            }
            let v = arg
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| Error::Config(format!("expected `{key}=<value>` in generator `{s}`")))?;
            v.trim()
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid {key} in generator `{s}`")))
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "bernstein" if arg.is_empty() => Ok(Generator::Bernstein),
            "sinusoidal" => {
                let l = value("l")?.ok_or_else(|| Error::Config("sinusoidal generator needs `l=<l>`".into()))?;
                Ok(Generator::Sinusoidal { l: l as u32 })
            }
            "independent-uniform" | "uniform" => Ok(Generator::IndependentUniform {
                blocks: value("blocks")?.unwrap_or(3),
            }),
            _ => Err(Error::Config(format!("unknown generator `{s}`"))),
        }
    }
}

/// Test applied in each replication of a power study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyTest {
    /// Conservative test on normalized multivariance.
    Test1,
    /// Conservative test on normalized total multivariance.
    Test2,
    /// Permutation test on normalized total multivariance.
    Permutation,
}

impl fmt::Display for StudyTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyTest::Test1 => "test1",
            StudyTest::Test2 => "test2",
            StudyTest::Permutation => "permutation",
        })
    }
}

impl FromStr for StudyTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "test1" | "1" => Ok(StudyTest::Test1),
            "test2" | "2" => Ok(StudyTest::Test2),
            "permutation" => Ok(StudyTest::Permutation),
            _ => Err(Error::Config(format!("unknown test `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerStudyConfig {
    pub generator: Generator,
    pub sample_size: usize,
    pub replications: usize,
    pub alpha: f64,
    pub test: StudyTest,
    /// One spec per block, or a single spec for all blocks. Empty means Euclidean.
    pub specs: Vec<CndfSpec>,
    /// Permutation resamples per replication.
    pub resamples: usize,
    pub seed: u64,
}

impl PowerStudyConfig {
    pub fn new(generator: Generator, sample_size: usize, test: StudyTest) -> Self {
        PowerStudyConfig {
            generator,
            sample_size,
            replications: 1000,
            alpha: 0.05,
            test,
            specs: Vec::new(),
            resamples: 200,
            seed: 0,
        }
    }

    fn resolved_specs(&self) -> Result<Vec<CndfSpec>> {
        let n = self.generator.block_count();
        let specs = match self.specs.len() {
            0 => vec![CndfSpec::euclidean(1)?; n],
            1 => vec![self.specs[0]; n],
            k if k == n => self.specs.clone(),
            k => return Err(Error::Config(format!("{k} distance specs for {n} blocks"))),
        };
        if specs.iter().any(|s| s.dimension() != 1) {
            return Err(Error::Config("generated blocks are one-dimensional".into()));
        }
        Ok(specs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.sample_size < 3 {
            return Err(Error::Config("sample size must be at least 3".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        match self.generator {
            Generator::Sinusoidal { l: 0 } => return Err(Error::Config("sinusoidal frequency must be ≥ 1".into())),
            Generator::IndependentUniform { blocks } if blocks < 2 => {
                return Err(Error::Config("an independence study needs at least two blocks".into()))
            }
            _ => {}
        }
        if self.test == StudyTest::Permutation && self.resamples == 0 {
            return Err(Error::Config("permutation studies need at least one resample".into()));
        }
        self.resolved_specs().map(|_| ())
    }

    fn psi_label(&self, specs: &[CndfSpec]) -> String {
        if specs.windows(2).all(|w| w[0] == w[1]) {
            specs[0].kind().to_string()
        } else {
            specs.iter().map(|s| s.kind().to_string()).collect::<Vec<_>>().join(";")
        }
    }
}

/// One line of a power table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub generator: String,
    pub param: Option<f64>,
    #[serde(rename = "N")]
    pub sample_size: usize,
    pub test: String,
    pub psi: String,
    /// Fraction of replications that rejected.
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub se: f64,
    pub replications: usize,
    pub seed: u64,
}

/// Rejection rate of the configured test; deterministic given the seed.
pub fn power_study(config: &PowerStudyConfig) -> Result<PowerRow> {
    config.validate()?;
    let specs = config.resolved_specs()?;
    let rejections: usize = (0..config.replications)
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let sample = config.generator.generate(config.sample_size, config.seed, r as u64);
            let report = match config.test {
                StudyTest::Test1 => test_multivariance_conservative(&sample, &specs, config.alpha)?,
                StudyTest::Test2 => test_total_conservative(&sample, &specs, config.alpha)?,
                StudyTest::Permutation => permutation_test(
                    &sample,
                    &specs,
                    StatisticKind::NormalizedTotalM,
                    config.resamples,
                    config.alpha,
                    rng::child_seed(config.seed, r as u64),
                )?,
            };
            Ok(report.reject as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let reps = config.replications as f64;
    let rate = rejections as f64 / reps;
    Ok(PowerRow {
        generator: config.generator.name().to_string(),
        param: config.generator.param(),
        sample_size: config.sample_size,
        test: config.test.to_string(),
        psi: config.psi_label(&specs),
        rate,
        se: (rate * (1.0 - rate) / reps).sqrt(),
        replications: config.replications,
        seed: config.seed,
    })
}

/// Runs `config` once per sample size.
pub fn power_sweep(config: &PowerStudyConfig, sizes: &[usize]) -> Result<Vec<PowerRow>> {
    sizes
        .iter()
        .map(|&n| {
            power_study(&PowerStudyConfig {
                sample_size: n,
                ..config.clone()
            })
        })
        .collect()
}

pub fn write_power_csv<W: Write>(rows: &[PowerRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(|e| Error::Input(format!("writing CSV: {e}")))?;
    }
    out.flush().map_err(|e| Error::Input(format!("writing CSV: {e}")))
}

/// Medians over replications of `N·M̂²` for Bernstein samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRow {
    #[serde(rename = "N")]
    pub sample_size: usize,
    /// Pairs `(A,B)`, `(A,C)`, `(B,C)`.
    pub pairwise_median: [f64; 3],
    pub triple_median: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Scaled pairwise statistics stay bounded as `N` grows; the scaled triple
/// statistic grows linearly.
pub fn bernstein_divergence(sizes: &[usize], replications: usize, seed: u64) -> Result<Vec<DivergenceRow>> {
    if replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    let euclid = CndfSpec::euclidean(1)?;
    sizes
        .iter()
        .enumerate()
        .map(|(k, &size)| {
            let draws: Vec<[f64; 4]> = (0..replications)
                .into_par_iter()
                .map(|r| -> Result<[f64; 4]> {
                    let s = Generator::Bernstein.generate(size, rng::child_seed(seed, k as u64), r as u64);
                    let nf = size as f64;
                    let mut out = [0.0; 4];
                    for (slot, pair) in out.iter_mut().zip([[0, 1], [0, 2], [1, 2]]) {
                        *slot = nf * estimate(&s.select_blocks(&pair), &[euclid; 2])?.m2;
                    }
                    out[3] = nf * estimate(&s, &[euclid; 3])?.m2;
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            let col = |c: usize| median(draws.iter().map(|d| d[c]).collect());
            Ok(DivergenceRow {
                sample_size: size,
                pairwise_median: [col(0), col(1), col(2)],
                triple_median: col(3),
            })
        })
        .collect()
}
