//! Per-block distance matrices `B_i` and their double centerings `A_i = −C B_i C`.
//!
//! Centering goes through row, column and grand means, so it costs O(N²)
//! rather than the O(N³) of multiplying by `C = I − 𝟙/N`.

use std::io::Write;

use rayon::prelude::*;

use crate::cndf::CndfSpec;
use crate::error::{input, Error, Result};
use crate::numeric::compensated_sum;
use crate::sample::BlockSample;

/// Largest `N` for which dense `N×N` matrices are built by default.
pub const DEFAULT_MAX_N: usize = 50_000;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(input(format!(
                "{} values cannot form a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((j, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(input(format!(
                "matrix is not square: row {j} has {} entries, expected {n}",
                r.len()
            )));
        }
        Ok(SquareMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.n + k]
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row-major CSV dump preceded by a `N,<n>` header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N,{}", self.n)?;
        for j in 0..self.n {
            let line: Vec<String> = self.row(j).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// `B_i`, its double centering `A_i` and the means used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredDistanceMatrix {
    pub b: SquareMatrix,
    pub a: SquareMatrix,
    pub row_mean_b: Vec<f64>,
    /// `(1/N²) Σ B_jk`, the sample scale factor `b̂_i`.
    pub grand_mean_b: f64,
}

impl CenteredDistanceMatrix {
    pub fn len(&self) -> usize {
        self.a.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.a.dim() == 0
    }

    /// Whether the block is constant, i.e. `B` (and hence `A`) vanishes.
    pub fn is_degenerate(&self) -> bool {
        self.grand_mean_b == 0.0
    }
}

/// `B_i = (ψ_i(x_i^{(j)} − x_i^{(k)}))_{j,k}` for the block at 0-based `block_index`.
pub fn distance_matrix(sample: &BlockSample, block_index: usize, spec: &CndfSpec) -> Result<SquareMatrix> {
    distance_matrix_with_limit(sample, block_index, spec, DEFAULT_MAX_N)
}

pub fn distance_matrix_with_limit(
    sample: &BlockSample,
    block_index: usize,
    spec: &CndfSpec,
    max_n: usize,
) -> Result<SquareMatrix> {
    if block_index >= sample.block_count() {
        return Err(input(format!(
            "block index {block_index} out of range for {} blocks",
            sample.block_count()
        )));
    }
    let d = sample.blocks()[block_index].len();
    if spec.dimension() != d {
        return Err(input(format!(
            "block {block_index} has dimension {d} but its distance has dimension {}",
            spec.dimension()
        )));
    }
    let n = sample.len();
    if n > max_n {
        return Err(Error::Guard(format!(
            "N = {n} exceeds the dense matrix limit of {max_n}"
        )));
    }
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n.max(1)).enumerate().for_each(|(j, row)| {
        let xj = sample.block_row(j, block_index);
        for (k, v) in row.iter_mut().enumerate() {
            if k != j {
                *v = spec.distance(xj, sample.block_row(k, block_index));
            }
        }
    });
    Ok(SquareMatrix { n, data })
}

/// `A = −C B C`, entrywise `A_jk = −(B_jk − r_j − c_k + g)`.
pub fn double_center(b: SquareMatrix) -> CenteredDistanceMatrix {
    let n = b.dim();
    if n == 0 {
        return CenteredDistanceMatrix {
            a: b.clone(),
            b,
            row_mean_b: Vec::new(),
            grand_mean_b: 0.0,
        };
    }
    let nf = n as f64;
    let row_mean: Vec<f64> = (0..n)
        .map(|j| compensated_sum(b.row(j).iter().copied()) / nf)
        .collect();
    let col_mean: Vec<f64> = (0..n)
        .map(|k| compensated_sum((0..n).map(|j| b.get(j, k))) / nf)
        .collect();
    let grand = compensated_sum(row_mean.iter().copied()) / nf;
    let mut a = vec![0.0; n * n];
    a.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        let brow = b.row(j);
        for k in 0..n {
            row[k] = -(brow[k] - row_mean[j] - col_mean[k] + grand);
        }
    });
    CenteredDistanceMatrix {
        a: SquareMatrix { n, data: a },
        b,
        row_mean_b: row_mean,
        grand_mean_b: grand,
    }
}

/// Distance matrices and centerings for every block, `specs[i]` belonging to block `i`.
pub fn center_blocks(sample: &BlockSample, specs: &[CndfSpec]) -> Result<Vec<CenteredDistanceMatrix>> {
    check_specs(sample, specs)?;
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| Ok(double_center(distance_matrix(sample, i, spec)?)))
        .collect()
}

pub(crate) fn check_specs(sample: &BlockSample, specs: &[CndfSpec]) -> Result<()> {
    if specs.len() != sample.block_count() {
        return Err(input(format!(
            "{} distance specs given for {} blocks",
            specs.len(),
            sample.block_count()
        )));
    }
    for (i, (spec, d)) in specs.iter().zip(sample.block_dims()).enumerate() {
        if spec.dimension() != d {
            return Err(input(format!(
                "block {i} has dimension {d} but its distance has dimension {}",
                spec.dimension()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    fn euclid() -> CndfSpec {
        CndfSpec::euclidean(1).unwrap()
    }

    #[test]
    fn distance_matrix_examples() {
        let s = BlockSample::from_columns(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(distance_matrix(&s, 0, &euclid()).unwrap().as_slice(), &[0.0, 1.0, 1.0, 0.0]);

        let s = BlockSample::from_columns(&[vec![2.5; 4]]).unwrap();
        assert!(distance_matrix(&s, 0, &euclid()).unwrap().as_slice().iter().all(|&v| v == 0.0));

        let s = BlockSample::from_columns(&[vec![0.0, 1.0, 3.0]]).unwrap();
        assert_eq!(
            distance_matrix(&s, 0, &euclid()).unwrap().as_slice(),
            &[0.0, 1.0, 3.0, 1.0, 0.0, 2.0, 3.0, 2.0, 0.0]
        );
    }

    #[test]
    fn distance_matrix_errors() {
        let s = BlockSample::from_columns(&[vec![0.0, 1.0]]).unwrap();
        let d2 = CndfSpec::euclidean(2).unwrap();
        assert!(matches!(distance_matrix(&s, 0, &d2), Err(Error::Input(_))));
        assert!(matches!(distance_matrix(&s, 1, &euclid()), Err(Error::Input(_))));
        assert!(matches!(
            distance_matrix_with_limit(&s, 0, &euclid(), 1),
            Err(Error::Guard(_))
        ));
    }

    #[test]
    fn double_center_two_points() {
        let b = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let c = double_center(b);
        assert_eq!(c.a.as_slice(), &[0.5, -0.5, -0.5, 0.5]);
        assert_eq!(c.grand_mean_b, 0.5);
    }

    #[test]
    fn double_center_zero_matrix() {
        let c = double_center(SquareMatrix::zeros(4));
        assert!(c.a.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(c.grand_mean_b, 0.0);
        assert!(c.is_degenerate());
    }

    #[test]
    fn non_square_rejected() {
        assert!(SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(SquareMatrix::from_row_major(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn csv_dump_has_header() {
        let b = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mut out = Vec::new();
        b.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("N,2"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 1.0]);
    }

    fn random_sample() -> impl Strategy<Value = (Vec<f64>, usize, usize)> {
        (2usize..12, 1usize..4).prop_flat_map(|(n, d)| {
            (prop::collection::vec(-10.0f64..10.0, n * d), Just(n), Just(d))
        })
    }

    fn specs(d: usize) -> Vec<CndfSpec> {
        vec![
            CndfSpec::stable(1.0, d).unwrap(),
            CndfSpec::stable(0.7, d).unwrap(),
            CndfSpec::minkowski(1.5, d).unwrap(),
            CndfSpec::bounded_exp(0.8, d).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn centered_rows_and_columns_vanish((data, n, d) in random_sample()) {
            let s = BlockSample::from_dims(data, n, &[d]).unwrap();
            for spec in specs(d) {
                let c = double_center(distance_matrix(&s, 0, &spec).unwrap());
                let tol = 1e-12 * c.b.max_abs().max(f64::MIN_POSITIVE);
                for j in 0..n {
                    let row: f64 = c.a.row(j).iter().sum();
                    let col: f64 = (0..n).map(|k| c.a.get(k, j)).sum();
                    prop_assert!(row.abs() <= tol * n as f64 && col.abs() <= tol * n as f64);
                    prop_assert_eq!(c.b.get(j, j), 0.0);
                    for k in 0..n {
                        prop_assert_eq!(c.b.get(j, k), c.b.get(k, j));
                        prop_assert!(c.b.get(j, k) >= 0.0);
                    }
                }
                let total: f64 = c.a.as_slice().iter().sum();
                prop_assert!(total.abs() <= 1e-10 * c.b.max_abs().max(1e-300));
                let m = DMatrix::from_row_slice(n, n, c.a.as_slice());
                let min = SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert!(min >= -1e-9 * c.b.max_abs());
            }
        }

        #[test]
        fn translation_sign_and_scale((data, n, d) in random_sample(), shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
            let s = BlockSample::from_dims(data, n, &[d]).unwrap();
            let spec = CndfSpec::stable(0.7, d).unwrap();
            let base = double_center(distance_matrix(&s, 0, &spec).unwrap());
            let shifted = double_center(distance_matrix(&s.map_block(0, |v| v + shift), 0, &spec).unwrap());
            let negated = double_center(distance_matrix(&s.map_block(0, |v| -v), 0, &spec).unwrap());
            let scaled = double_center(distance_matrix(&s.map_block(0, |v| v * scale), 0, &spec).unwrap());
            let tol = 1e-9 * base.b.max_abs().max(1e-300);
            let factor = scale.powf(0.7);
            for idx in 0..n * n {
                prop_assert!((shifted.a.as_slice()[idx] - base.a.as_slice()[idx]).abs() <= tol);
                prop_assert_eq!(negated.b.as_slice()[idx], base.b.as_slice()[idx]);
                prop_assert!((scaled.a.as_slice()[idx] - factor * base.a.as_slice()[idx]).abs() <= tol * factor);
            }
        }

        #[test]
        fn permutation_equivariance((data, n, d) in random_sample(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let s = BlockSample::from_dims(data, n, &[d]).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let spec = CndfSpec::euclidean(d).unwrap();
            let base = double_center(distance_matrix(&s, 0, &spec).unwrap());
            let moved = double_center(distance_matrix(&s.permute_rows(&perm), 0, &spec).unwrap());
            for j in 0..n {
                for k in 0..n {
                    let want = base.a.get(perm[j], perm[k]);
                    prop_assert!((moved.a.get(j, k) - want).abs() <= 1e-12 * base.b.max_abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn large_sample_row_sums_stay_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let col: Vec<f64> = (0..3000).map(|_| rng.random::<f64>() * 1e3).collect();
        let s = BlockSample::from_columns(&[col]).unwrap();
        let c = double_center(distance_matrix(&s, 0, &euclid()).unwrap());
        let scale = c.b.max_abs();
        for j in (0..3000).step_by(97) {
            let row = compensated_sum(c.a.row(j).iter().copied());
            assert!(row.abs() < 1e-9 * scale, "row {j}: {row}");
        }
        assert_relative_eq!(c.grand_mean_b, compensated_sum(c.b.as_slice().iter().copied()) / 9e6, max_relative = 1e-12);
    }
}
