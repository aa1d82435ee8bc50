use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::matrix::Matrix;

/// Sparse weighted adjacency; entry `(row, col)` carries the message
/// from node `col` into node `row`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Adjacency {
    pub fn new(n: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, w) in &entries {
            if r >= n || c >= n {
                return Err(Error::Contract(format!("adjacency entry ({r}, {c}) outside {n} nodes")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Contract(format!("adjacency weight {w} at ({r}, {c})")));
            }
        }
        Ok(Self { n, entries })
    }

    /// Unit-weight adjacency from directed `(src, dst)` edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let entries = edges.into_iter().map(|(s, d)| (d, s, 1.0)).collect();
        Self::new(n, entries).expect("edge endpoints must be node indices")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Summed weight at `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .iter()
            .filter(|&&(r, c, _)| r == row && c == col)
            .map(|e| e.2)
            .sum()
    }
}

/// `D^-1/2 Ã D^-1/2` in compressed sparse row form, where `Ã` is the
/// adjacency (plus identity when self-loops are on) and `D` its row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    degrees: Vec<f64>,
}

/// Symmetrically normalizes `a`. Nodes of degree zero contribute zero
/// rows and columns instead of dividing by zero.
pub fn normalize_adjacency(a: &Adjacency, self_loops: bool) -> NormalizedAdjacency {
    let n = a.n();
    let mut summed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(r, c, w) in a.entries() {
        *summed.entry((r, c)).or_insert(0.0) += w;
    }
    if self_loops {
        for i in 0..n {
            *summed.entry((i, i)).or_insert(0.0) += 1.0;
        }
    }
    let mut degrees = vec![0.0; n];
    for (&(r, _), &w) in &summed {
        degrees[r] += w;
    }
    let inv_sqrt: Vec<f64> = degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();

    let mut row_ptr = vec![0; n + 1];
    let mut col_idx = Vec::with_capacity(summed.len());
    let mut values = Vec::with_capacity(summed.len());
    for (&(r, c), &w) in &summed {
        let v = w * inv_sqrt[r] * inv_sqrt[c];
        if v == 0.0 {
            continue;
        }
        col_idx.push(c);
        values.push(v);
        row_ptr[r + 1] += 1;
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    NormalizedAdjacency {
        n,
        row_ptr,
        col_idx,
        values,
        degrees,
    }
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row sums of the (self-looped) adjacency used for normalization.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[span.clone()]
            .iter()
            .position(|&c| c == col)
            .map_or(0.0, |k| self.values[span.start + k])
    }

    /// Non-zero `(row, col, value)` triples in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for (r, c, v) in self.entries() {
            m.set(r, c, v);
        }
        m
    }

    /// `Â · x`
    pub fn mul(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.n, "adjacency/feature row mismatch");
        let mut out = Matrix::zeros(self.n, x.cols());
        for r in 0..self.n {
            let out_row = out.row_mut(r);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                for (o, &b) in out_row.iter_mut().zip(x.row(self.col_idx[k])) {
                    *o += v * b;
                }
            }
        }
        out
    }

    /// `Âᵀ · x`
    pub fn t_mul(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.n, "adjacency/feature row mismatch");
        let mut out = Matrix::zeros(self.n, x.cols());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                let c = self.col_idx[k];
                for (o, &b) in out.row_mut(c).iter_mut().zip(x.row(r)) {
                    *o += v * b;
                }
            }
        }
        out
    }

    /// Block-diagonal union of independent graphs.
    pub fn block_diagonal(parts: &[&NormalizedAdjacency]) -> NormalizedAdjacency {
        let n = parts.iter().map(|p| p.n).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut degrees = Vec::with_capacity(n);
        let mut offset = 0;
        for p in parts {
            for r in 0..p.n {
                for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                    col_idx.push(p.col_idx[k] + offset);
                    values.push(p.values[k]);
                }
                row_ptr.push(col_idx.len());
            }
            degrees.extend_from_slice(&p.degrees);
            offset += p.n;
        }
        NormalizedAdjacency {
            n,
            row_ptr,
            col_idx,
            values,
            degrees,
        }
    }
}
