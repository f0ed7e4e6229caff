//! Sample distance multivariance and its relatives.
//!
//! With `A_i` the doubly centered distance matrices of the blocks,
//!
//! ```text
//! M̂²   = (1/N²) Σ_jk Π_i (A_i)_jk
//! M̄̂²   = (1/N²) Σ_jk Π_i (1 + (A_i)_jk) − 1
//! 𝓜̂²   = (1/N²) Σ_jk Π_i (A_i)_jk / b̂_i
//! 𝓜̄̂²   = [(1/N²) Σ_jk Π_i (1 + (A_i)_jk / b̂_i) − 1] / (2ⁿ − 1 − n)
//! R̂²   = (1/N²) Σ_jk Π_i (A_i)_jk / â_i,   â_i = ((1/N²) Σ_jk |(A_i)_jk|ⁿ)^{1/n}
//! ```
//!
//! Scale factors that vanish (constant blocks) follow `0/0 := 0`: the
//! corresponding ratio matrix is zero. Every statistic costs O(nN²).

use std::borrow::Borrow;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::centering::{center_blocks, check_specs, CenteredDistanceMatrix, SquareMatrix};
use crate::cndf::CndfSpec;
use crate::error::{input, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::sample::BlockSample;

/// Above this sample size [`estimate`] switches to the matrix-free kernel.
pub const DENSE_THRESHOLD: usize = 2048;

/// Every sample statistic for one data set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultivarianceEstimates {
    pub m2: f64,
    pub total_m2: f64,
    pub normalized_m2: f64,
    pub normalized_total_m2: f64,
    pub multicorrelation2: f64,
    pub a_hat: Vec<f64>,
    pub b_hat: Vec<f64>,
    #[serde(rename = "N")]
    pub sample_size: usize,
    #[serde(rename = "n")]
    pub blocks: usize,
}

/// Square root of a squared statistic; negative rounding residue is clamped to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: f64,
    pub clamped: bool,
}

impl Root {
    pub fn of(squared: f64) -> Root {
        if squared < 0.0 {
            Root {
                value: 0.0,
                clamped: true,
            }
        } else {
            Root {
                value: squared.sqrt(),
                clamped: false,
            }
        }
    }
}

impl MultivarianceEstimates {
    pub fn m(&self) -> Root {
        Root::of(self.m2)
    }

    pub fn total_m(&self) -> Root {
        Root::of(self.total_m2)
    }

    pub fn normalized_m(&self) -> Root {
        Root::of(self.normalized_m2)
    }

    pub fn normalized_total_m(&self) -> Root {
        Root::of(self.normalized_total_m2)
    }

    pub fn multicorrelation(&self) -> Root {
        Root::of(self.multicorrelation2)
    }
}

/// Which statistic a test or resampling scheme works with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    M,
    TotalM,
    NormalizedM,
    NormalizedTotalM,
}

impl std::str::FromStr for StatisticKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(StatisticKind::M),
            "total" => Ok(StatisticKind::TotalM),
            "normalized" => Ok(StatisticKind::NormalizedM),
            "normalized-total" => Ok(StatisticKind::NormalizedTotalM),
            other => Err(input(format!("unknown statistic {other:?}"))),
        }
    }
}

impl StatisticKind {
    pub fn select(&self, e: &MultivarianceEstimates) -> f64 {
        match self {
            StatisticKind::M => e.m2,
            StatisticKind::TotalM => e.total_m2,
            StatisticKind::NormalizedM => e.normalized_m2,
            StatisticKind::NormalizedTotalM => e.normalized_total_m2,
        }
    }
}

/// `2ⁿ − 1 − n`, the number of subsets with at least two members.
pub fn subset_count(n: usize) -> f64 {
    2f64.powi(n as i32) - 1.0 - n as f64
}

fn check_same_n<M: Borrow<CenteredDistanceMatrix>>(mats: &[M]) -> Result<usize> {
    let first = mats
        .first()
        .ok_or_else(|| input("at least one block is required"))?
        .borrow()
        .len();
    if let Some(bad) = mats.iter().find(|m| Borrow::<CenteredDistanceMatrix>::borrow(*m).len() != first) {
        return Err(input(format!(
            "matrices of different sizes: {} and {}",
            first,
            bad.borrow().len()
        )));
    }
    Ok(first)
}

/// `(1/N²) Σ_jk Π_i f(i, (A_i)_jk)`. Rows are summed plainly and combined
/// with compensated summation.
fn hadamard_mean(mats: &[&SquareMatrix], f: impl Fn(usize, f64) -> f64 + Sync) -> f64 {
    let n = mats[0].dim();
    if n == 0 {
        return 0.0;
    }
    let row_sum = |j: usize| -> f64 {
        let rows: Vec<&[f64]> = mats.iter().map(|m| m.row(j)).collect();
        let mut acc = 0.0;
        for k in 0..n {
            let mut p = 1.0;
            for (i, r) in rows.iter().enumerate() {
                p *= f(i, r[k]);
            }
            acc += p;
        }
        acc
    };
    let rows: Vec<f64> = if n >= 256 {
        (0..n).into_par_iter().map(row_sum).collect()
    } else {
        (0..n).map(row_sum).collect()
    };
    compensated_sum(rows) / (n * n) as f64
}

fn a_refs<M: Borrow<CenteredDistanceMatrix>>(mats: &[M]) -> Vec<&SquareMatrix> {
    mats.iter().map(|m| &m.borrow().a).collect()
}

/// Sample distance multivariance `M̂²`.
pub fn sample_multivariance<M: Borrow<CenteredDistanceMatrix>>(mats: &[M]) -> Result<f64> {
    check_same_n(mats)?;
    Ok(hadamard_mean(&a_refs(mats), |_, a| a))
}

/// Sample total distance multivariance `M̄̂²`; needs at least two blocks.
pub fn sample_total_multivariance<M: Borrow<CenteredDistanceMatrix>>(mats: &[M]) -> Result<f64> {
    check_same_n(mats)?;
    if mats.len() < 2 {
        return Err(input("total multivariance needs at least two blocks"));
    }
    Ok(hadamard_mean(&a_refs(mats), |_, a| 1.0 + a) - 1.0)
}

/// `M̂²` of the blocks listed in `subset` (0-based, distinct).
pub fn subset_multivariance<M: Borrow<CenteredDistanceMatrix>>(mats: &[M], subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(input("subset must not be empty"));
    }
    let mut seen = vec![false; mats.len()];
    for &i in subset {
        if i >= mats.len() {
            return Err(input(format!("subset index {i} out of range for {} blocks", mats.len())));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(input(format!("subset index {i} repeated")));
        }
    }
    let chosen: Vec<&CenteredDistanceMatrix> = subset.iter().map(|&i| mats[i].borrow()).collect();
    sample_multivariance(&chosen)
}

fn inverse_scales(b_hat: &[f64]) -> Vec<f64> {
    b_hat.iter().map(|&b| if b == 0.0 { 0.0 } else { 1.0 / b }).collect()
}

fn check_scales<M>(mats: &[M], b_hat: &[f64]) -> Result<()> {
    if b_hat.len() != mats.len() {
        return Err(input(format!(
            "{} scale factors given for {} blocks",
            b_hat.len(),
            mats.len()
        )));
    }
    Ok(())
}

/// Normalized multivariance `𝓜̂²` with the given scale factors `b̂_i`.
pub fn normalized_multivariance<M: Borrow<CenteredDistanceMatrix>>(mats: &[M], b_hat: &[f64]) -> Result<f64> {
    check_same_n(mats)?;
    check_scales(mats, b_hat)?;
    let inv = inverse_scales(b_hat);
    Ok(hadamard_mean(&a_refs(mats), |i, a| a * inv[i]))
}

/// Normalized total multivariance `𝓜̄̂²`; needs at least two blocks.
pub fn normalized_total_multivariance<M: Borrow<CenteredDistanceMatrix>>(
    mats: &[M],
    b_hat: &[f64],
) -> Result<f64> {
    check_same_n(mats)?;
    check_scales(mats, b_hat)?;
    if mats.len() < 2 {
        return Err(input("normalized total multivariance needs at least two blocks"));
    }
    let inv = inverse_scales(b_hat);
    let raw = hadamard_mean(&a_refs(mats), |i, a| 1.0 + a * inv[i]);
    Ok((raw - 1.0) / subset_count(mats.len()))
}

/// `â_i = ((1/N²) Σ |(A_i)_jk|ⁿ)^{1/n}` for `n` blocks.
pub fn a_hat(a: &SquareMatrix, n: usize) -> f64 {
    let m = a.dim();
    if m == 0 {
        return 0.0;
    }
    let mean = compensated_sum(a.as_slice().iter().map(|v| v.abs().powi(n as i32))) / (m * m) as f64;
    mean.powf(1.0 / n as f64)
}

/// Squared distance multicorrelation `R̂²`; needs at least two blocks.
pub fn multicorrelation<M: Borrow<CenteredDistanceMatrix>>(mats: &[M]) -> Result<f64> {
    check_same_n(mats)?;
    if mats.len() < 2 {
        return Err(input("multicorrelation needs at least two blocks"));
    }
    let a: Vec<f64> = mats.iter().map(|m| a_hat(&m.borrow().a, mats.len())).collect();
    let inv = inverse_scales(&a);
    Ok(hadamard_mean(&a_refs(mats), |i, v| v * inv[i]))
}

/// Evaluates one statistic under re-indexings of blocks `2..n`, for
/// resampling. The per-entry transform of each `A_i` (e.g. `1 + A_i/b̂_i`) is
/// applied once up front; each evaluation is then a gathered Hadamard product.
pub(crate) struct PermutationKernel {
    factors: Vec<SquareMatrix>,
    offset: f64,
    divisor: f64,
}

impl PermutationKernel {
    pub(crate) fn new(mats: &[&SquareMatrix], b_hat: &[f64], kind: StatisticKind) -> Self {
        let inv = inverse_scales(b_hat);
        let transform = |i: usize, a: f64| match kind {
            StatisticKind::M => a,
            StatisticKind::TotalM => 1.0 + a,
            StatisticKind::NormalizedM => a * inv[i],
            StatisticKind::NormalizedTotalM => 1.0 + a * inv[i],
        };
        let factors = mats
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let data = m.as_slice().iter().map(|&a| transform(i, a)).collect();
                SquareMatrix::from_row_major(m.dim(), data).expect("same shape")
            })
            .collect();
        let (offset, divisor) = match kind {
            StatisticKind::M | StatisticKind::NormalizedM => (0.0, 1.0),
            StatisticKind::TotalM => (1.0, 1.0),
            StatisticKind::NormalizedTotalM => (1.0, subset_count(mats.len())),
        };
        PermutationKernel { factors, offset, divisor }
    }

    /// The statistic with block `i + 1` re-indexed by `perms[i]`; block 1 stays fixed.
    pub(crate) fn evaluate(&self, perms: &[&[usize]]) -> f64 {
        let n = self.factors[0].dim();
        let first = &self.factors[0];
        let rest = &self.factors[1..];
        let row_sum = |j: usize| -> f64 {
            let r0 = first.row(j);
            let mut acc = 0.0;
            if let ([m], [p]) = (rest, perms) {
                let r1 = m.row(p[j]);
                for k in 0..n {
                    acc += r0[k] * r1[p[k]];
                }
            } else {
                let rows: Vec<&[f64]> = rest.iter().zip(perms).map(|(m, p)| m.row(p[j])).collect();
                for k in 0..n {
                    let mut prod = r0[k];
                    for (r, p) in rows.iter().zip(perms) {
                        prod *= r[p[k]];
                    }
                    acc += prod;
                }
            }
            acc
        };
        let sum = if n >= 512 {
            compensated_sum((0..n).into_par_iter().map(row_sum).collect::<Vec<_>>())
        } else {
            compensated_sum((0..n).map(row_sum))
        };
        (sum / (n * n) as f64 - self.offset) / self.divisor
    }
}

#[derive(Debug, Clone, Default)]
struct Accumulators {
    prod: CompensatedSum,
    prod_total: CompensatedSum,
    prod_norm_total: CompensatedSum,
    abs_pow: Vec<CompensatedSum>,
}

impl Accumulators {
    fn new(n: usize) -> Self {
        Accumulators {
            abs_pow: vec![CompensatedSum::default(); n],
            ..Default::default()
        }
    }

    #[inline]
    fn push(&mut self, row: &RowSums) {
        self.prod.add(row.prod);
        self.prod_total.add(row.prod_total);
        self.prod_norm_total.add(row.prod_norm_total);
        for (acc, v) in self.abs_pow.iter_mut().zip(&row.abs_pow) {
            acc.add(*v);
        }
    }
}

#[derive(Debug, Clone)]
struct RowSums {
    prod: f64,
    prod_total: f64,
    prod_norm_total: f64,
    abs_pow: Vec<f64>,
}

impl RowSums {
    fn new(n: usize) -> Self {
        RowSums {
            prod: 0.0,
            prod_total: 0.0,
            prod_norm_total: 0.0,
            abs_pow: vec![0.0; n],
        }
    }

    #[inline]
    fn push_entry(&mut self, values: &[f64], inv_b: &[f64]) {
        self.push_weighted(values, inv_b, 1.0);
    }

    #[inline]
    fn push_weighted(&mut self, values: &[f64], inv_b: &[f64], w: f64) {
        let n = values.len();
        let (mut p, mut pt, mut pn) = (1.0, 1.0, 1.0);
        for (i, &a) in values.iter().enumerate() {
            p *= a;
            pt *= 1.0 + a;
            pn *= 1.0 + a * inv_b[i];
            self.abs_pow[i] += w * a.abs().powi(n as i32);
        }
        self.prod += w * p;
        self.prod_total += w * pt;
        self.prod_norm_total += w * pn;
    }
}

fn finish(acc: Accumulators, b_hat: Vec<f64>, size: usize) -> MultivarianceEstimates {
    let n = b_hat.len();
    let nn = (size * size) as f64;
    // a single centered matrix sums to zero; report the exact value, not the rounding residue
    let m2 = if n == 1 { 0.0 } else { acc.prod.value() / nn };
    let a_hat: Vec<f64> = acc
        .abs_pow
        .iter()
        .map(|s| (s.value() / nn).powf(1.0 / n as f64))
        .collect();
    let ratio = |scales: &[f64]| {
        if scales.iter().any(|&s| s == 0.0) {
            0.0
        } else {
            m2 / scales.iter().product::<f64>()
        }
    };
    let (total_m2, normalized_total_m2) = if n >= 2 {
        (
            acc.prod_total.value() / nn - 1.0,
            (acc.prod_norm_total.value() / nn - 1.0) / subset_count(n),
        )
    } else {
        (0.0, 0.0)
    };
    MultivarianceEstimates {
        m2,
        total_m2,
        normalized_m2: ratio(&b_hat),
        normalized_total_m2,
        multicorrelation2: if n >= 2 { ratio(&a_hat) } else { 0.0 },
        a_hat,
        b_hat,
        sample_size: size,
        blocks: n,
    }
}

/// All statistics from precomputed centered matrices in one pass over the entries.
///
/// With a single block every statistic is reported as exactly 0: `M̂²` of one
/// variable vanishes, and the total statistics sum over subsets of at least two blocks.
pub fn estimates<M: Borrow<CenteredDistanceMatrix>>(mats: &[M]) -> Result<MultivarianceEstimates> {
    let size = check_same_n(mats)?;
    let n = mats.len();
    let b_hat: Vec<f64> = mats.iter().map(|m| m.borrow().grand_mean_b).collect();
    let inv_b = inverse_scales(&b_hat);
    let a = a_refs(mats);
    let row = |j: usize| {
        let mut sums = RowSums::new(n);
        let rows: Vec<&[f64]> = a.iter().map(|m| m.row(j)).collect();
        let mut values = vec![0.0; n];
        for k in 0..size {
            for (v, r) in values.iter_mut().zip(&rows) {
                *v = r[k];
            }
            sums.push_entry(&values, &inv_b);
        }
        sums
    };
    let rows: Vec<RowSums> = (0..size).into_par_iter().map(row).collect();
    let mut acc = Accumulators::new(n);
    for r in &rows {
        acc.push(r);
    }
    Ok(finish(acc, b_hat, size))
}

/// All statistics straight from a sample. Uses the dense kernel for
/// `N ≤ DENSE_THRESHOLD`; above it, the grouped kernel when at most
/// `DENSE_THRESHOLD` distinct rows occur and the matrix-free kernel otherwise.
pub fn estimate(sample: &BlockSample, specs: &[CndfSpec]) -> Result<MultivarianceEstimates> {
    if sample.len() <= DENSE_THRESHOLD {
        return estimates(&center_blocks(sample, specs)?);
    }
    match distinct_rows(sample, DENSE_THRESHOLD) {
        Some(groups) => estimate_grouped(sample, specs, &groups),
        None => estimate_matrix_free(sample, specs),
    }
}

/// Representative row and multiplicity of each distinct row, or `None` once
/// more than `limit` distinct rows are seen.
fn distinct_rows(sample: &BlockSample, limit: usize) -> Option<Vec<(usize, usize)>> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for j in 0..sample.len() {
        // -0.0 and 0.0 are the same value
        let key: Vec<u64> = sample.row(j).iter().map(|v| (v + 0.0).to_bits()).collect();
        match index.get(&key) {
            Some(&g) => groups[g].1 += 1,
            None => {
                if groups.len() == limit {
                    return None;
                }
                index.insert(key, groups.len());
                groups.push((j, 1));
            }
        }
    }
    Some(groups)
}

/// All statistics for a sample with repeated rows: each pair of distinct rows
/// enters once, weighted by the product of their multiplicities.
pub fn estimate_with_ties(sample: &BlockSample, specs: &[CndfSpec]) -> Result<MultivarianceEstimates> {
    check_specs(sample, specs)?;
    let groups = distinct_rows(sample, usize::MAX).unwrap_or_default();
    estimate_grouped(sample, specs, &groups)
}

fn estimate_grouped(sample: &BlockSample, specs: &[CndfSpec], groups: &[(usize, usize)]) -> Result<MultivarianceEstimates> {
    check_specs(sample, specs)?;
    let size = sample.len();
    let n = sample.block_count();
    let m = groups.len();
    let nf = size as f64;
    let psi = |i: usize, j: usize, k: usize| specs[i].distance(sample.block_row(groups[j].0, i), sample.block_row(groups[k].0, i));
    let row_means: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| compensated_sum((0..m).map(|k| groups[k].1 as f64 * psi(i, j, k))) / nf)
                .collect()
        })
        .collect();
    let grand: Vec<f64> = row_means
        .iter()
        .map(|r| compensated_sum(r.iter().zip(groups).map(|(v, g)| v * g.1 as f64)) / nf)
        .collect();
    let inv_b = inverse_scales(&grand);
    let rows: Vec<RowSums> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut sums = RowSums::new(n);
            let mut values = vec![0.0; n];
            for k in 0..m {
                for (i, v) in values.iter_mut().enumerate() {
                    let b = if j == k { 0.0 } else { psi(i, j, k) };
                    *v = -(b - row_means[i][j] - row_means[i][k] + grand[i]);
                }
                sums.push_weighted(&values, &inv_b, (groups[j].1 * groups[k].1) as f64);
            }
            sums
        })
        .collect();
    let mut acc = Accumulators::new(n);
    for r in &rows {
        acc.push(r);
    }
    Ok(finish(acc, grand, size))
}

/// All statistics without materializing any `N×N` matrix: memory O(nN),
/// two distance evaluations per pair and block.
pub fn estimate_matrix_free(sample: &BlockSample, specs: &[CndfSpec]) -> Result<MultivarianceEstimates> {
    check_specs(sample, specs)?;
    let size = sample.len();
    let n = sample.block_count();
    let nf = size as f64;
    let row_means: Vec<Vec<f64>> = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            (0..size)
                .into_par_iter()
                .map(|j| {
                    let xj = sample.block_row(j, i);
                    compensated_sum((0..size).map(|k| spec.distance(xj, sample.block_row(k, i)))) / nf
                })
                .collect()
        })
        .collect();
    let grand: Vec<f64> = row_means.iter().map(|r| compensated_sum(r.iter().copied()) / nf).collect();
    let inv_b = inverse_scales(&grand);
    let rows: Vec<RowSums> = (0..size)
        .into_par_iter()
        .map(|j| {
            let mut sums = RowSums::new(n);
            let mut values = vec![0.0; n];
            for k in 0..size {
                for (i, v) in values.iter_mut().enumerate() {
                    let b = if j == k {
                        0.0
                    } else {
                        specs[i].distance(sample.block_row(j, i), sample.block_row(k, i))
                    };
                    *v = -(b - row_means[i][j] - row_means[i][k] + grand[i]);
                }
                sums.push_entry(&values, &inv_b);
            }
            sums
        })
        .collect();
    let mut acc = Accumulators::new(n);
    for r in &rows {
        acc.push(r);
    }
    Ok(finish(acc, grand, size))
}
