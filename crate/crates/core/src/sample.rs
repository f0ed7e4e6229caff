use std::ops::Range;

use crate::error::{input, Result};

/// `N` observations of `n` blocks stored row-major; block `i` occupies the
/// contiguous column range `blocks[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSample {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    blocks: Vec<Range<usize>>,
}

impl BlockSample {
    /// Builds a sample from row-major data. The block ranges must be
    /// non-empty, disjoint and cover every column in order.
    pub fn new(data: Vec<f64>, rows: usize, blocks: Vec<Range<usize>>) -> Result<Self> {
        if rows == 0 {
            return Err(input("a sample needs at least one observation"));
        }
        if blocks.is_empty() {
            return Err(input("a sample needs at least one block"));
        }
        let mut next = 0;
        for (i, b) in blocks.iter().enumerate() {
            if b.start != next || b.end <= b.start {
                return Err(input(format!(
                    "block {i} ({}..{}) must be non-empty and start at column {next}",
                    b.start, b.end
                )));
            }
            next = b.end;
        }
        let cols = next;
        if data.len() != rows * cols {
            return Err(input(format!(
                "data has {} values, expected {rows} rows x {cols} columns",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(input(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(BlockSample {
            data,
            rows,
            cols,
            blocks,
        })
    }

    /// Builds a sample from block widths `d_1..d_n`.
    pub fn from_dims(data: Vec<f64>, rows: usize, dims: &[usize]) -> Result<Self> {
        Self::new(data, rows, ranges_from_dims(dims))
    }

    /// Builds a sample of one-dimensional blocks from column vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(input("columns have different lengths"));
        }
        let n = columns.len();
        let mut data = Vec::with_capacity(rows * n);
        for j in 0..rows {
            data.extend(columns.iter().map(|c| c[j]));
        }
        Self::from_dims(data, rows, &vec![1; n])
    }

    /// Number of observations `N`.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Number of blocks `n`.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dimension(&self) -> usize {
        self.cols
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    /// Observation `j` of block `i`.
    #[inline]
    pub fn block_row(&self, j: usize, i: usize) -> &[f64] {
        let r = &self.blocks[i];
        &self.data[j * self.cols + r.start..j * self.cols + r.end]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Copies block `i` into a new single-block sample.
    pub fn block(&self, i: usize) -> BlockSample {
        self.select_blocks(&[i])
    }

    /// Restricts the sample to the given blocks, in the given order.
    pub fn select_blocks(&self, which: &[usize]) -> BlockSample {
        let dims: Vec<usize> = which.iter().map(|&i| self.blocks[i].len()).collect();
        let mut data = Vec::with_capacity(self.rows * dims.iter().sum::<usize>());
        for j in 0..self.rows {
            for &i in which {
                data.extend_from_slice(self.block_row(j, i));
            }
        }
        BlockSample {
            data,
            rows: self.rows,
            cols: dims.iter().sum(),
            blocks: ranges_from_dims(&dims),
        }
    }

    /// Appends the blocks of `other` (same `N`) after the blocks of `self`.
    pub fn concat(&self, other: &BlockSample) -> Result<BlockSample> {
        if other.rows != self.rows {
            return Err(input("cannot concatenate samples of different sizes"));
        }
        let mut dims = self.block_dims();
        dims.extend(other.block_dims());
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        for j in 0..self.rows {
            data.extend_from_slice(self.row(j));
            data.extend_from_slice(other.row(j));
        }
        Self::from_dims(data, self.rows, &dims)
    }

    /// Applies `f` to every value of block `i`.
    pub fn map_block(&self, i: usize, f: impl Fn(f64) -> f64) -> BlockSample {
        let mut out = self.clone();
        let r = self.blocks[i].clone();
        for j in 0..self.rows {
            for c in r.clone() {
                let v = &mut out.data[j * self.cols + c];
                *v = f(*v);
            }
        }
        out
    }

    /// Reorders observations: row `j` of the result is row `perm[j]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> BlockSample {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        BlockSample {
            data,
            ..self.clone()
        }
    }
}

pub(crate) fn ranges_from_dims(dims: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    dims.iter()
        .map(|&d| {
            let r = start..start + d;
            start += d;
            r
        })
        .collect()
}
