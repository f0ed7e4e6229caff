//! Independence tests built on (normalized) distance multivariance.
//!
//! * Conservative χ² tests: reject when `N·𝓜̂² ≥ χ²_{1−α}(1)` (multivariance,
//!   valid under (n−1)-independence) or `N·𝓜̄̂² ≥ χ²_{1−α}(1)` (total
//!   multivariance, no a-priori assumption). The bound behind the critical
//!   value holds for `α ≤ 0.215`; larger levels are accepted with a warning.
//! * Permutation test: blocks `2..n` are permuted independently while block 1
//!   stays fixed, and the statistic is recomputed from the same centered
//!   matrices through index maps.
//! * Monte-Carlo test: the null distribution is simulated from known marginals.
//!
//! Resampling p-values use the add-one rule `(1 + #{T* ≥ T}) / (1 + R)`.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Bernoulli, Normal, Uniform};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::{erf, erfc, erfc_inv, erf_inv};

use crate::centering::center_blocks;
use crate::cndf::CndfSpec;
use crate::error::{input, parameter, Error, Result};
use crate::multivariance::{estimate, estimates, PermutationKernel, StatisticKind};
use crate::rng;
use crate::sample::BlockSample;

/// Resamples used when the caller does not choose.
pub const DEFAULT_RESAMPLES: usize = 999;

/// Largest level for which the χ² critical value is proven conservative.
pub const MAX_CONSERVATIVE_ALPHA: f64 = 0.215;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ConservativeChi2,
    Permutation,
    MonteCarlo,
}

/// Outcome of an independence test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    /// `N` times the squared statistic.
    pub statistic: f64,
    pub method: Method,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub reject: bool,
    pub resamples: usize,
    pub seed: u64,
}

/// `q`-quantile of the χ² distribution with one degree of freedom.
///
/// Starts from the inverse error function and polishes with Newton steps on
/// whichever of `P(χ² ≤ x) = erf(√(x/2))` or its complement is better conditioned.
pub fn chi2_quantile_1df(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(parameter(format!("quantile level must lie in (0,1), got {q}")));
    }
    let upper = q > 0.5;
    let mut x = if upper {
        2.0 * erfc_inv(1.0 - q).powi(2)
    } else {
        2.0 * erf_inv(q).powi(2)
    };
    for _ in 0..3 {
        if x <= 0.0 || !x.is_finite() {
            break;
        }
        let density = (-x / 2.0).exp() / (2.0 * std::f64::consts::PI * x).sqrt();
        let residual = if upper {
            (1.0 - q) - erfc((x / 2.0).sqrt())
        } else {
            erf((x / 2.0).sqrt()) - q
        };
        let step = if upper { -residual / density } else { residual / density };
        let next = x - step;
        if !(next > 0.0) {
            break;
        }
        x = next;
    }
    Ok(x)
}

fn check_level(alpha: f64, conservative: bool) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(parameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if conservative && alpha > MAX_CONSERVATIVE_ALPHA {
        log::warn!("alpha = {alpha} exceeds 0.215; the chi-square critical value is not proven conservative there");
    }
    Ok(())
}

/// Critical value `χ²_{1−α}(1)` and the closed decision rule `statistic ≥ critical`.
pub fn conservative_decision(statistic: f64, alpha: f64) -> Result<(f64, bool)> {
    let critical = chi2_quantile_1df(1.0 - alpha)?;
    Ok((critical, statistic >= critical))
}

fn conservative(sample: &BlockSample, specs: &[CndfSpec], alpha: f64, kind: StatisticKind) -> Result<TestReport> {
    check_level(alpha, true)?;
    if sample.len() < 2 {
        return Err(input("independence tests need at least two observations"));
    }
    if sample.block_count() < 2 {
        return Err(input("independence tests need at least two blocks"));
    }
    let est = estimate(sample, specs)?;
    let statistic = sample.len() as f64 * kind.select(&est);
    let (critical, reject) = conservative_decision(statistic, alpha)?;
    Ok(TestReport {
        statistic,
        method: Method::ConservativeChi2,
        alpha,
        critical_value: Some(critical),
        p_value: None,
        reject,
        resamples: 0,
        seed: 0,
    })
}

/// Conservative test based on normalized multivariance; assumes (n−1)-independence.
pub fn test_multivariance_conservative(sample: &BlockSample, specs: &[CndfSpec], alpha: f64) -> Result<TestReport> {
    conservative(sample, specs, alpha, StatisticKind::NormalizedM)
}

/// Conservative test based on normalized total multivariance.
pub fn test_total_conservative(sample: &BlockSample, specs: &[CndfSpec], alpha: f64) -> Result<TestReport> {
    conservative(sample, specs, alpha, StatisticKind::NormalizedTotalM)
}

/// Add-one p-value. Resampled values that tie with the observed value up to
/// rounding count as exceedances.
pub fn add_one_p_value(observed: f64, resampled: &[f64]) -> f64 {
    let slack = 1e-12 * observed.abs().max(1e-300);
    let exceed = resampled.iter().filter(|&&t| t >= observed - slack).count();
    (1 + exceed) as f64 / (1 + resampled.len()) as f64
}

fn check_resampling(sample: &BlockSample, resamples: usize, alpha: f64) -> Result<()> {
    check_level(alpha, false)?;
    if resamples == 0 {
        return Err(parameter("at least one resample is required"));
    }
    if sample.len() < 3 {
        return Err(input("resampling tests need at least three observations"));
    }
    if sample.block_count() < 2 {
        return Err(input("independence tests need at least two blocks"));
    }
    Ok(())
}

/// Permutation test; deterministic given `seed`.
pub fn permutation_test(
    sample: &BlockSample,
    specs: &[CndfSpec],
    kind: StatisticKind,
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    check_resampling(sample, resamples, alpha)?;
    let mats = center_blocks(sample, specs)?;
    let a: Vec<_> = mats.iter().map(|m| &m.a).collect();
    let b_hat: Vec<f64> = mats.iter().map(|m| m.grand_mean_b).collect();
    let size = sample.len();
    let n = mats.len();
    let kernel = PermutationKernel::new(&a, &b_hat, kind);
    let scale = size as f64;
    let identity: Vec<usize> = (0..size).collect();
    let observed = scale * kernel.evaluate(&vec![identity.as_slice(); n - 1]);
    let resampled: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r as u64);
            let perms: Vec<Vec<usize>> = (1..n)
                .map(|_| {
                    let mut p = identity.clone();
                    p.shuffle(&mut rng);
                    p
                })
                .collect();
            let maps: Vec<&[usize]> = perms.iter().map(Vec::as_slice).collect();
            scale * kernel.evaluate(&maps)
        })
        .collect();
    let p_value = add_one_p_value(observed, &resampled);
    Ok(TestReport {
        statistic: observed,
        method: Method::Permutation,
        alpha,
        critical_value: None,
        p_value: Some(p_value),
        reject: p_value <= alpha,
        resamples,
        seed,
    })
}

/// A known marginal law that can produce draws of a fixed dimension.
pub trait MarginalSampler: Send + Sync {
    fn dimension(&self) -> usize;
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]);
}

/// Common one-dimensional laws, drawn independently per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Bernoulli { p: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Marginal {
    pub fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            Marginal::Bernoulli { p } => {
                if rng.random_bool(p) {
                    1.0
                } else {
                    0.0
                }
            }
            Marginal::Uniform { low, high } => rng.random_range(low..high),
            Marginal::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(rand_distr::StandardNormal),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Bernoulli { p } => Bernoulli::new(p).is_ok(),
            Marginal::Uniform { low, high } => Uniform::new(low, high).is_ok(),
            Marginal::Normal { mean, sd } => sd > 0.0 && Normal::new(mean, sd).is_ok(),
        };
        if ok {
            Ok(())
        } else {
            Err(parameter(format!("invalid marginal {self:?}")))
        }
    }

    /// Binds the law to a block of dimension `d` with iid coordinates.
    pub fn iid(self, dimension: usize) -> Result<IidMarginal> {
        self.validate()?;
        if dimension == 0 {
            return Err(parameter("marginal dimension must be at least 1"));
        }
        Ok(IidMarginal { law: self, dimension })
    }
}

impl FromStr for Marginal {
    type Err = Error;

    /// `bernoulli:p=0.5`, `uniform:low=-1,high=1`, `normal:mean=0,sd=1`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut params = std::collections::HashMap::new();
        for kv in args.split(',').filter(|kv| !kv.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| input(format!("expected key=value in marginal {s:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| input(format!("non-numeric parameter in marginal {s:?}")))?;
            params.insert(k.trim().to_string(), v);
        }
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        let m = match name.to_ascii_lowercase().as_str() {
            "bernoulli" => Marginal::Bernoulli { p: get("p", 0.5) },
            "uniform" => Marginal::Uniform {
                low: get("low", 0.0),
                high: get("high", 1.0),
            },
            "normal" => Marginal::Normal {
                mean: get("mean", 0.0),
                sd: get("sd", 1.0),
            },
            other => return Err(input(format!("unknown marginal {other:?}"))),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IidMarginal {
    law: Marginal,
    dimension: usize,
}

impl MarginalSampler for IidMarginal {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        for v in out {
            *v = self.law.draw(rng);
        }
    }
}

/// Draws `size` observations from the product of the given marginals.
pub fn sample_product<S: MarginalSampler + ?Sized>(
    samplers: &[&S],
    size: usize,
    rng: &mut dyn RngCore,
) -> Result<BlockSample> {
    let dims: Vec<usize> = samplers.iter().map(|s| s.dimension()).collect();
    let width: usize = dims.iter().sum();
    let mut data = vec![0.0; size * width];
    for row in data.chunks_mut(width.max(1)) {
        let mut start = 0;
        for (s, d) in samplers.iter().zip(&dims) {
            s.sample_into(rng, &mut row[start..start + d]);
            start += d;
        }
    }
    BlockSample::from_dims(data, size, &dims)
}

/// Monte-Carlo test against known marginals; deterministic given `seed`.
pub fn montecarlo_test(
    sample: &BlockSample,
    specs: &[CndfSpec],
    samplers: &[&dyn MarginalSampler],
    kind: StatisticKind,
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    check_resampling(sample, resamples, alpha)?;
    if samplers.len() != sample.block_count() {
        return Err(input(format!(
            "{} samplers given for {} blocks",
            samplers.len(),
            sample.block_count()
        )));
    }
    for (i, (s, d)) in samplers.iter().zip(sample.block_dims()).enumerate() {
        if s.dimension() != d {
            return Err(input(format!(
                "sampler {i} draws dimension {} but block {i} has dimension {d}",
                s.dimension()
            )));
        }
    }
    let size = sample.len();
    let scale = size as f64;
    let observed = scale * kind.select(&estimates(&center_blocks(sample, specs)?)?);
    let resampled: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = rng::stream(seed, r as u64);
            let fresh = sample_product(samplers, size, &mut rng)?;
            Ok(scale * kind.select(&estimates(&center_blocks(&fresh, specs)?)?))
        })
        .collect::<Result<_>>()?;
    let p_value = add_one_p_value(observed, &resampled);
    Ok(TestReport {
        statistic: observed,
        method: Method::MonteCarlo,
        alpha,
        critical_value: None,
        p_value: Some(p_value),
        reject: p_value <= alpha,
        resamples,
        seed,
    })
}

/// Finite-sample factor `C_N = ((N−1)ⁿ + (−1)ⁿ(N−1)) / Nⁿ`.
pub fn bias_constant(sample_size: usize, blocks: usize) -> f64 {
    let nf = sample_size as f64;
    let sign = if blocks % 2 == 0 { 1.0 } else { -1.0 };
    (1.0 - 1.0 / nf).powi(blocks as i32) + sign * (nf - 1.0) / nf.powi(blocks as i32)
}

/// Mean of `N·M̂²` under independence: `C_N · Π b_i` with `b_i = E ψ_i(X_i − X_i′)`.
pub fn expected_scaled_statistic_under_independence(b: &[f64], sample_size: usize) -> f64 {
    bias_constant(sample_size, b.len()) * b.iter().product::<f64>()
}
