//! Reference computations that do not share code paths with the estimators.
//!
//! * Exact population quantities for laws with finite support, evaluated
//!   through the product representation
//!   `M² = E Π_i [−ψ_i(X_i − X_i′) + E(·|X_i) + E(·|X_i′) − Eψ_i(X_i − X_i′)]`
//!   with every expectation an exact weighted sum over the support.
//! * The sample formula evaluated entry by entry, without centered matrices.
//! * Total multivariance as an explicit sum over subsets.
//! * Gaussian multivariance by Monte Carlo over Gaussian fields whose
//!   covariance is `ψ(ξ) + ψ(η) − ψ(ξ − η)`.

use std::borrow::Borrow;
use std::io::Read;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centering::CenteredDistanceMatrix;
use crate::cndf::CndfSpec;
use crate::error::{input, Error, Result};
use crate::multivariance::{sample_multivariance, subset_count};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::rng;
use crate::sample::BlockSample;

/// Largest block count for which subsets are enumerated.
pub const MAX_ENUMERATED_BLOCKS: usize = 12;

/// A joint law with finitely many support points.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    points: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
    dims: Vec<usize>,
}

fn key(point: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same support point
    point.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl FiniteDistribution {
    /// Builds a law from support points (each of width `Σ dims`) and their
    /// probabilities. Repeated points are merged.
    pub fn new(points: Vec<Vec<f64>>, probabilities: Vec<f64>, dims: &[usize]) -> Result<Self> {
        if points.is_empty() {
            return Err(input("a finite distribution needs at least one support point"));
        }
        if points.len() != probabilities.len() {
            return Err(input(format!(
                "{} support points but {} probabilities",
                points.len(),
                probabilities.len()
            )));
        }
        if dims.is_empty() || dims.contains(&0) {
            return Err(input("block dimensions must be positive"));
        }
        let width: usize = dims.iter().sum();
        if let Some(j) = points.iter().position(|p| p.len() != width) {
            return Err(input(format!("support point {j} does not have width {width}")));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(input("support points must be finite"));
        }
        if probabilities.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(input("probabilities must be nonnegative"));
        }
        let total = compensated_sum(probabilities.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(input(format!("probabilities sum to {total}, not 1")));
        }
        let mut merged: Vec<(Vec<u64>, Vec<f64>, f64)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (pt, p) in points.into_iter().zip(probabilities) {
            let k = key(&pt);
            match index.get(&k) {
                Some(&at) => {
                    let entry: &mut (Vec<u64>, Vec<f64>, f64) = &mut merged[at];
                    entry.2 += p;
                }
                None => {
                    index.insert(k.clone(), merged.len());
                    merged.push((k, pt, p));
                }
            }
        }
        Ok(FiniteDistribution {
            points: merged.iter().map(|m| m.1.clone()).collect(),
            probabilities: merged.iter().map(|m| m.2).collect(),
            dims: dims.to_vec(),
        })
    }

    /// The empirical law of a sample (weight `1/N` per observation).
    pub fn empirical(sample: &BlockSample) -> Result<Self> {
        let n = sample.len();
        let points = (0..n).map(|j| sample.row(j).to_vec()).collect();
        let mut probs = vec![1.0 / n as f64; n];
        // keep the total exactly representable as 1
        let rest = 1.0 - compensated_sum(probs[1..].iter().copied());
        probs[0] = rest;
        Self::new(points, probs, &sample.block_dims())
    }

    /// Uniform law on the given points.
    pub fn uniform(points: Vec<Vec<f64>>, dims: &[usize]) -> Result<Self> {
        let m = points.len();
        Self::new(points, vec![1.0 / m as f64; m], dims)
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn block_count(&self) -> usize {
        self.dims.len()
    }

    fn block_value<'a>(&self, point: &'a [f64], i: usize) -> &'a [f64] {
        let start: usize = self.dims[..i].iter().sum();
        &point[start..start + self.dims[i]]
    }

    /// Joint law of the blocks in `which`, in that order.
    pub fn marginal(&self, which: &[usize]) -> Result<Self> {
        if which.is_empty() || which.iter().any(|&i| i >= self.dims.len()) {
            return Err(input("invalid block selection for a marginal"));
        }
        let dims: Vec<usize> = which.iter().map(|&i| self.dims[i]).collect();
        let points = self
            .points
            .iter()
            .map(|p| which.iter().flat_map(|&i| self.block_value(p, i).to_vec()).collect())
            .collect();
        Self::new(points, self.probabilities.clone(), &dims)
    }

    /// The law of `(X, Y)` with `X ~ self` and `Y ~ other` independent.
    pub fn independent_product(&self, other: &FiniteDistribution) -> Result<Self> {
        let mut points = Vec::with_capacity(self.points.len() * other.points.len());
        let mut probs = Vec::with_capacity(points.capacity());
        for (x, p) in self.points.iter().zip(&self.probabilities) {
            for (y, q) in other.points.iter().zip(&other.probabilities) {
                let mut z = x.clone();
                z.extend_from_slice(y);
                points.push(z);
                probs.push(p * q);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let total = compensated_sum(probs.iter().copied());
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(points, probs, &dims)
    }

    /// The product of this law's marginals.
    pub fn product_of_marginals(&self) -> Result<Self> {
        let mut out = self.marginal(&[0])?;
        for i in 1..self.block_count() {
            out = out.independent_product(&self.marginal(&[i])?)?;
        }
        Ok(out)
    }

    /// Reads `{"block_dims": [...], "rows": [[x..., p], ...]}`.
    pub fn from_json_reader<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            block_dims: Vec<usize>,
            rows: Vec<Vec<f64>>,
        }
        let doc: Doc = serde_json::from_reader(reader).map_err(|e| input(format!("invalid distribution JSON: {e}")))?;
        Self::from_rows(doc.rows, &doc.block_dims)
    }

    /// Reads CSV rows `x..., p`; a non-numeric first line is taken as a header.
    pub fn from_csv_reader<R: Read>(reader: R, dims: &[usize]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| input(format!("line {}: {e}", line + 1)))?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if line == 0 => continue,
                Err(_) => return Err(input(format!("line {}: non-numeric cell", line + 1))),
            }
        }
        Self::from_rows(rows, dims)
    }

    fn from_rows(rows: Vec<Vec<f64>>, dims: &[usize]) -> Result<Self> {
        let width: usize = dims.iter().sum();
        let mut points = Vec::with_capacity(rows.len());
        let mut probs = Vec::with_capacity(rows.len());
        for (j, mut r) in rows.into_iter().enumerate() {
            if r.len() != width + 1 {
                return Err(input(format!("row {j} has {} values, expected {}", r.len(), width + 1)));
            }
            probs.push(r.pop().unwrap_or_default());
            points.push(r);
        }
        Self::new(points, probs, dims)
    }

    /// Writes the JSON form read by [`FiniteDistribution::from_json_reader`].
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = self
            .points
            .iter()
            .zip(&self.probabilities)
            .map(|(x, &p)| {
                let mut r = x.clone();
                r.push(p);
                r
            })
            .collect();
        serde_json::json!({ "block_dims": self.dims, "rows": rows })
    }

    fn check_specs(&self, specs: &[CndfSpec]) -> Result<()> {
        if specs.len() != self.dims.len() {
            return Err(input(format!(
                "{} distance specs given for {} blocks",
                specs.len(),
                self.dims.len()
            )));
        }
        for (i, (s, &d)) in specs.iter().zip(&self.dims).enumerate() {
            if s.dimension() != d {
                return Err(input(format!("block {i} has dimension {d}, its distance {}", s.dimension())));
            }
        }
        Ok(())
    }

    /// `−ψ(x_j − x_k) + E[ψ | X = x_j] + E[ψ | X′ = x_k] − Eψ` for block `i`,
    /// over pairs of support points, plus `Eψ(X_i − X_i′)`.
    fn centered_kernel(&self, i: usize, spec: &CndfSpec) -> (Vec<f64>, f64) {
        let m = self.points.len();
        let psi = |j: usize, k: usize| spec.distance(self.block_value(&self.points[j], i), self.block_value(&self.points[k], i));
        let cond: Vec<f64> = (0..m)
            .map(|j| compensated_sum((0..m).map(|l| self.probabilities[l] * psi(j, l))))
            .collect();
        let mean = compensated_sum((0..m).map(|j| self.probabilities[j] * cond[j]));
        let mut h = vec![0.0; m * m];
        for j in 0..m {
            for k in 0..m {
                h[j * m + k] = -psi(j, k) + cond[j] + cond[k] - mean;
            }
        }
        (h, mean)
    }

    fn weighted_pair_sum(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let m = self.points.len();
        let mut acc = CompensatedSum::default();
        for j in 0..m {
            for k in 0..m {
                acc.add(self.probabilities[j] * self.probabilities[k] * f(j, k));
            }
        }
        acc.value()
    }
}

/// Exact `M²` of a finite law.
pub fn population_multivariance_exact(dist: &FiniteDistribution, specs: &[CndfSpec]) -> Result<f64> {
    dist.check_specs(specs)?;
    let m = dist.points.len();
    let kernels: Vec<Vec<f64>> = specs.iter().enumerate().map(|(i, s)| dist.centered_kernel(i, s).0).collect();
    Ok(dist.weighted_pair_sum(|j, k| kernels.iter().map(|h| h[j * m + k]).product()))
}

fn nonempty_subsets(n: usize, min_size: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1u32 << n))
        .map(move |mask| (0..n).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>())
        .filter(move |s| s.len() >= min_size)
}

fn check_enumerable(n: usize) -> Result<()> {
    if n < 2 {
        return Err(input("total multivariance needs at least two blocks"));
    }
    if n > MAX_ENUMERATED_BLOCKS {
        return Err(Error::Guard(format!(
            "subset enumeration over {n} blocks exceeds the limit of {MAX_ENUMERATED_BLOCKS}"
        )));
    }
    Ok(())
}

/// Exact `M̄²`: the sum of `M²` over the marginal laws of all subsets of size ≥ 2.
pub fn population_total_exact(dist: &FiniteDistribution, specs: &[CndfSpec]) -> Result<f64> {
    dist.check_specs(specs)?;
    check_enumerable(dist.block_count())?;
    let mut acc = CompensatedSum::default();
    for s in nonempty_subsets(dist.block_count(), 2) {
        let sub_specs: Vec<CndfSpec> = s.iter().map(|&i| specs[i]).collect();
        acc.add(population_multivariance_exact(&dist.marginal(&s)?, &sub_specs)?);
    }
    Ok(acc.value())
}

/// Exact scale factors: `a_i = ‖centered ψ_i‖_{Lⁿ}` and `b_i = E ψ_i(X_i − X_i′)`.
pub fn population_scale_factors(dist: &FiniteDistribution, specs: &[CndfSpec]) -> Result<(Vec<f64>, Vec<f64>)> {
    dist.check_specs(specs)?;
    let n = specs.len();
    let m = dist.points.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for (i, s) in specs.iter().enumerate() {
        let (h, mean) = dist.centered_kernel(i, s);
        let norm = dist.weighted_pair_sum(|j, k| h[j * m + k].abs().powi(n as i32));
        a.push(norm.max(0.0).powf(1.0 / n as f64));
        b.push(mean);
    }
    Ok((a, b))
}

/// Every population statistic of a finite law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSummary {
    pub m2: f64,
    pub total_m2: f64,
    pub normalized_m2: f64,
    pub normalized_total_m2: f64,
    pub multicorrelation2: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

fn ratio(value: f64, scales: &[f64]) -> f64 {
    if scales.iter().any(|&s| s == 0.0) {
        0.0
    } else {
        value / scales.iter().product::<f64>()
    }
}

/// Exact population statistics, with `0/0 := 0` for degenerate marginals.
pub fn population_summary(dist: &FiniteDistribution, specs: &[CndfSpec]) -> Result<PopulationSummary> {
    let n = dist.block_count();
    check_enumerable(n)?;
    let m2 = population_multivariance_exact(dist, specs)?;
    let (a, b) = population_scale_factors(dist, specs)?;
    let mut total = CompensatedSum::default();
    let mut normalized_total = CompensatedSum::default();
    for s in nonempty_subsets(n, 2) {
        let sub_specs: Vec<CndfSpec> = s.iter().map(|&i| specs[i]).collect();
        let ms = population_multivariance_exact(&dist.marginal(&s)?, &sub_specs)?;
        let bs: Vec<f64> = s.iter().map(|&i| b[i]).collect();
        total.add(ms);
        normalized_total.add(ratio(ms, &bs));
    }
    Ok(PopulationSummary {
        m2,
        total_m2: total.value(),
        normalized_m2: ratio(m2, &b),
        normalized_total_m2: normalized_total.value() / subset_count(n),
        multicorrelation2: ratio(m2, &a),
        a,
        b,
    })
}

/// The sample formula evaluated literally: for every pair `(j, k)` the
/// product over blocks of `−ψ_jk + mean_l ψ_jl + mean_m ψ_mk − mean_lm ψ_lm`,
/// recomputing every mean from `ψ` directly.
pub fn sample_multivariance_bruteforce(sample: &BlockSample, specs: &[CndfSpec]) -> Result<f64> {
    crate::centering::check_specs(sample, specs)?;
    let size = sample.len();
    let nf = size as f64;
    let psi = |i: usize, j: usize, k: usize| specs[i].distance(sample.block_row(j, i), sample.block_row(k, i));
    let mut total = CompensatedSum::default();
    for j in 0..size {
        for k in 0..size {
            let mut prod = 1.0;
            for i in 0..specs.len() {
                let given_first: f64 = (0..size).map(|l| psi(i, j, l)).sum::<f64>() / nf;
                let given_second: f64 = (0..size).map(|m| psi(i, m, k)).sum::<f64>() / nf;
                let overall: f64 = (0..size).flat_map(|l| (0..size).map(move |m| (l, m))).map(|(l, m)| psi(i, l, m)).sum::<f64>()
                    / (nf * nf);
                prod *= -psi(i, j, k) + given_first + given_second - overall;
            }
            total.add(prod);
        }
    }
    Ok(total.value() / (nf * nf))
}

/// `M̄̂²` as the explicit sum of `M̂²` over every subset of at least two blocks.
pub fn total_via_subset_enumeration<M: Borrow<CenteredDistanceMatrix>>(mats: &[M]) -> Result<f64> {
    check_enumerable(mats.len())?;
    let mut acc = CompensatedSum::default();
    for s in nonempty_subsets(mats.len(), 2) {
        let chosen: Vec<&CenteredDistanceMatrix> = s.iter().map(|&i| mats[i].borrow()).collect();
        acc.add(sample_multivariance(&chosen)?);
    }
    Ok(acc.value())
}

/// `𝓜̄̂²` as `(2ⁿ − 1 − n)^{-1} Σ_S M̂²_S / b̂_S`, with `0/0 := 0`.
pub fn normalized_total_via_subset_enumeration<M: Borrow<CenteredDistanceMatrix>>(
    mats: &[M],
    b_hat: &[f64],
) -> Result<f64> {
    check_enumerable(mats.len())?;
    let mut acc = CompensatedSum::default();
    for s in nonempty_subsets(mats.len(), 2) {
        let chosen: Vec<&CenteredDistanceMatrix> = s.iter().map(|&i| mats[i].borrow()).collect();
        let bs: Vec<f64> = s.iter().map(|&i| b_hat[i]).collect();
        acc.add(ratio(sample_multivariance(&chosen)?, &bs));
    }
    Ok(acc.value() / subset_count(mats.len()))
}

/// Result of [`gaussian_multivariance_mc`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianEstimate {
    /// Monte-Carlo estimate of the squared Gaussian multivariance.
    pub estimate: f64,
    pub std_error: f64,
    /// Whether `1e-10` had to be added to some covariance diagonal.
    pub regularized: bool,
}

/// Diagonal shift applied to field covariances that are not numerically PSD.
pub const FIELD_REGULARIZATION: f64 = 1e-10;

const FIELD_CHUNK: usize = 1024;

struct BlockField {
    /// support point -> index of its block value
    index: Vec<usize>,
    /// marginal probability of each distinct block value
    weights: Vec<f64>,
    /// `V diag(√λ)` for the covariance of the field at the distinct values
    root: DMatrix<f64>,
}

fn block_field(dist: &FiniteDistribution, i: usize, spec: &CndfSpec) -> Result<(BlockField, bool)> {
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut keys: Vec<Vec<u64>> = Vec::new();
    let mut weights = Vec::new();
    let mut index = Vec::with_capacity(dist.points.len());
    for (p, &w) in dist.points.iter().zip(&dist.probabilities) {
        let v = dist.block_value(p, i);
        let k = key(v);
        let at = match keys.iter().position(|x| *x == k) {
            Some(at) => at,
            None => {
                keys.push(k);
                values.push(v.to_vec());
                weights.push(0.0);
                values.len() - 1
            }
        };
        weights[at] += w;
        index.push(at);
    }
    let m = values.len();
    let zero = vec![0.0; spec.dimension()];
    let psi0: Vec<f64> = values.iter().map(|v| spec.distance(v, &zero)).collect();
    let mut cov = DMatrix::from_fn(m, m, |a, b| psi0[a] + psi0[b] - spec.distance(&values[a], &values[b]));
    let scale = cov.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut eig = SymmetricEigen::new(cov.clone());
    let mut regularized = false;
    if eig.eigenvalues.min() < 0.0 {
        for a in 0..m {
            cov[(a, a)] += FIELD_REGULARIZATION;
        }
        eig = SymmetricEigen::new(cov);
        regularized = true;
        if eig.eigenvalues.min() < -1e-8 * scale {
            return Err(Error::Numerical(format!(
                "field covariance of block {i} is not positive semidefinite (eigenvalue {})",
                eig.eigenvalues.min()
            )));
        }
    }
    let sqrt_l = DVector::from_iterator(m, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_l);
    Ok((BlockField { index, weights, root }, regularized))
}

/// Monte-Carlo estimate of the squared Gaussian multivariance
/// `E Π_i X_i^{G_i} X_i′^{G_i}` of a finite law.
///
/// Each field `G_i` is drawn at the distinct values of block `i`; for a fixed
/// draw the expectation over `(X, X′)` is exact, equal to
/// `(Σ_j p_j Π_i [G_i(x_i^j) − E(G_i(X_i) | G_i)])²`.
pub fn gaussian_multivariance_mc(
    dist: &FiniteDistribution,
    specs: &[CndfSpec],
    field_samples: usize,
    seed: u64,
) -> Result<GaussianEstimate> {
    dist.check_specs(specs)?;
    if field_samples < 2 {
        return Err(input("at least two field samples are required"));
    }
    let mut fields = Vec::with_capacity(specs.len());
    let mut regularized = false;
    for (i, s) in specs.iter().enumerate() {
        let (f, r) = block_field(dist, i, s)?;
        regularized |= r;
        fields.push(f);
    }
    let chunks = field_samples.div_ceil(FIELD_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, c as u64);
            let count = FIELD_CHUNK.min(field_samples - c * FIELD_CHUNK);
            let (mut s1, mut s2) = (CompensatedSum::default(), CompensatedSum::default());
            let mut centered: Vec<DVector<f64>> = Vec::with_capacity(fields.len());
            for _ in 0..count {
                centered.clear();
                for f in &fields {
                    let z = DVector::from_iterator(f.root.ncols(), (0..f.root.ncols()).map(|_| StandardNormal.sample(&mut rng)));
                    let g = &f.root * z;
                    let mean: f64 = g.iter().zip(&f.weights).map(|(v, w)| v * w).sum();
                    centered.push(g.map(|v| v - mean));
                }
                let v: f64 = dist
                    .probabilities
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * fields.iter().zip(&centered).map(|(f, c)| c[f.index[j]]).product::<f64>())
                    .sum();
                let inner = v * v;
                s1.add(inner);
                s2.add(inner * inner);
            }
            (s1.value(), s2.value())
        })
        .collect();
    let n = field_samples as f64;
    let sum = compensated_sum(partial.iter().map(|p| p.0));
    let sum_sq = compensated_sum(partial.iter().map(|p| p.1));
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(GaussianEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
        regularized,
    })
}

/// Law of Bernstein's coins: `A` = coin I heads, `B` = coin II tails,
/// `C` = both coins agree, as 0/1 indicators.
pub fn bernstein_law() -> FiniteDistribution {
    let points = vec![
        vec![1.0, 0.0, 1.0], // HH
        vec![1.0, 1.0, 0.0], // HT
        vec![0.0, 0.0, 0.0], // TH
        vec![0.0, 1.0, 1.0], // TT
    ];
    FiniteDistribution::uniform(points, &[1, 1, 1]).expect("static law is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centering::center_blocks;
    use crate::multivariance::{normalized_total_multivariance, sample_total_multivariance};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn euclid(n: usize) -> Vec<CndfSpec> {
        vec![CndfSpec::euclidean(1).unwrap(); n]
    }

    fn random_law(rng: &mut ChaCha8Rng, n: usize, m: usize) -> FiniteDistribution {
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(0..3) as f64).collect())
            .collect();
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let rest = 1.0 - probs[1..].iter().sum::<f64>();
        probs[0] = rest;
        FiniteDistribution::new(points, probs, &vec![1; n]).unwrap()
    }

    #[test]
    fn bernstein_values() {
        let law = bernstein_law();
        let s = population_summary(&law, &euclid(3)).unwrap();
        assert_relative_eq!(s.m2, 0.125, epsilon = 1e-12);
        assert_relative_eq!(s.total_m2, 0.125, epsilon = 1e-12);
        for v in s.a.iter().chain(&s.b) {
            assert_relative_eq!(*v, 0.5, epsilon = 1e-12);
        }
        assert_relative_eq!(s.normalized_m2, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.multicorrelation2, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.normalized_total_m2, 0.25, epsilon = 1e-12);
        for pair in [[0, 1], [1, 2], [0, 2]] {
            let m = population_multivariance_exact(&law.marginal(&pair).unwrap(), &euclid(2)).unwrap();
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn product_laws_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..5 {
            let law = random_law(&mut rng, n, 6).product_of_marginals().unwrap();
            assert!(population_multivariance_exact(&law, &euclid(n)).unwrap().abs() < 1e-12);
            assert!(population_total_exact(&law, &euclid(n)).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn scale_factor_examples() {
        let t = 2.5;
        let law = FiniteDistribution::uniform(vec![vec![0.0, 1.0], vec![t, 1.0]], &[1, 1]).unwrap();
        let (a, b) = population_scale_factors(&law, &euclid(2)).unwrap();
        assert_relative_eq!(b[0], t / 2.0, max_relative = 1e-14);
        assert_eq!(a[1], 0.0);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn duplicates_are_merged() {
        let law = FiniteDistribution::new(
            vec![vec![1.0], vec![-0.0], vec![1.0], vec![0.0]],
            vec![0.25; 4],
            &[1],
        )
        .unwrap();
        assert_eq!(law.support().len(), 2);
        assert_eq!(law.probabilities(), &[0.5, 0.5]);
        assert!(FiniteDistribution::new(vec![vec![1.0]], vec![0.9], &[1]).is_err());
        assert!(FiniteDistribution::new(vec![vec![1.0, 2.0]], vec![1.0], &[1]).is_err());
    }

    #[test]
    fn empirical_law_matches_sample_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let size = rng.random_range(2..9);
            let n = rng.random_range(1..4);
            let data: Vec<f64> = (0..size * n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = BlockSample::from_dims(data, size, &vec![1; n]).unwrap();
            let specs = euclid(n);
            let mats = center_blocks(&s, &specs).unwrap();
            let want = sample_multivariance(&mats).unwrap();
            let exact = population_multivariance_exact(&FiniteDistribution::empirical(&s).unwrap(), &specs).unwrap();
            let brute = sample_multivariance_bruteforce(&s, &specs).unwrap();
            let scale: f64 = mats.iter().map(|m| m.a.max_abs()).product();
            assert!((exact - want).abs() <= 1e-10 * want.abs().max(scale));
            assert!((brute - want).abs() <= 1e-10 * want.abs().max(scale));
        }
    }

    #[test]
    fn bruteforce_small_fixtures() {
        let s = BlockSample::from_columns(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_relative_eq!(sample_multivariance_bruteforce(&s, &euclid(2)).unwrap(), 0.25, max_relative = 1e-15);
        let c = BlockSample::from_columns(&[vec![3.0; 4], vec![1.0; 4]]).unwrap();
        assert_eq!(sample_multivariance_bruteforce(&c, &euclid(2)).unwrap(), 0.0);
    }

    #[test]
    fn subset_enumeration_matches_product_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=5 {
            let size = 7;
            let data: Vec<f64> = (0..size * n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = BlockSample::from_dims(data, size, &vec![1; n]).unwrap();
            let mats = center_blocks(&s, &euclid(n)).unwrap();
            assert_relative_eq!(
                total_via_subset_enumeration(&mats).unwrap(),
                sample_total_multivariance(&mats).unwrap(),
                max_relative = 1e-10
            );
            let b: Vec<f64> = mats.iter().map(|m| m.grand_mean_b).collect();
            assert_relative_eq!(
                normalized_total_via_subset_enumeration(&mats, &b).unwrap(),
                normalized_total_multivariance(&mats, &b).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn enumeration_guards() {
        let s = BlockSample::from_dims(vec![0.0; 26], 2, &[1; 13]).unwrap();
        let mats = center_blocks(&s, &euclid(13)).unwrap();
        assert!(matches!(total_via_subset_enumeration(&mats), Err(Error::Guard(_))));
        assert!(total_via_subset_enumeration(&mats[..1]).is_err());
    }

    #[test]
    fn factorization_over_independent_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let left = random_law(&mut rng, 2, 4);
        let right = random_law(&mut rng, 3, 5);
        let joint = left.independent_product(&right).unwrap();
        let m = population_multivariance_exact(&joint, &euclid(5)).unwrap();
        let ml = population_multivariance_exact(&left, &euclid(2)).unwrap();
        let mr = population_multivariance_exact(&right, &euclid(3)).unwrap();
        assert!((m - ml * mr).abs() < 1e-12, "{m} vs {}", ml * mr);
    }

    #[test]
    fn json_and_csv_round_trip() {
        let law = bernstein_law();
        let text = law.to_json().to_string();
        let back = FiniteDistribution::from_json_reader(text.as_bytes()).unwrap();
        assert_eq!(back, law);
        let csv = "a,b,c,p\n1,0,1,0.25\n1,1,0,0.25\n0,0,0,0.25\n0,1,1,0.25\n";
        assert_eq!(FiniteDistribution::from_csv_reader(csv.as_bytes(), &[1, 1, 1]).unwrap(), law);
    }

    #[test]
    fn gaussian_mc_on_product_law_vanishes() {
        // each draw factorizes into centered means, which are zero
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let law = random_law(&mut rng, 3, 5).product_of_marginals().unwrap();
        let g = gaussian_multivariance_mc(&law, &euclid(3), 2_000, 1).unwrap();
        assert!(g.estimate.abs() < 1e-25, "{g:?}");
    }

    #[test]
    fn gaussian_mc_matches_exact_on_dependent_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let law = random_law(&mut rng, 2, 6);
        let exact = population_multivariance_exact(&law, &euclid(2)).unwrap();
        let g = gaussian_multivariance_mc(&law, &euclid(2), 40_000, 2).unwrap();
        assert!((g.estimate - exact).abs() <= 4.0 * g.std_error, "{g:?} vs {exact}");
    }

    #[test]
    fn gaussian_mc_is_deterministic() {
        let law = bernstein_law();
        let a = gaussian_multivariance_mc(&law, &euclid(3), 3000, 9).unwrap();
        let b = gaussian_multivariance_mc(&law, &euclid(3), 3000, 9).unwrap();
        assert_eq!(a, b);
    }
}
