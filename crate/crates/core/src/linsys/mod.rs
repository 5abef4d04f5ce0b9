//! Block-sparse linear systems: row-segmented assembly storage, block CSR,
//! block-ILU(0) and distributed FGMRES.

pub mod dense;
mod fgmres;
mod ilu;

use thiserror::Error;

pub use fgmres::{solve, SolveOptions};
pub use ilu::BlockIlu;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinsysError {
    #[error("block has {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// The ILU factorization hit a zero pivot on some worker and block-Jacobi
    /// was used there instead.
    pub fallback: bool,
}

/// Local rows of a block-sparse matrix. Each row keeps its own growable
/// column and value lists; columns index the worker's local cell space
/// (interior cells first, then ghosts).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockMatrix {
    pub nb: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub cols: Vec<Vec<usize>>,
    pub vals: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
}

impl BlockMatrix {
    pub fn new(n_rows: usize, n_cols: usize, nb: usize) -> BlockMatrix {
        let mut m = BlockMatrix::default();
        m.begin(n_rows, n_cols, nb);
        m
    }

    /// Resets structure and vectors, keeping row capacity.
    pub fn begin(&mut self, n_rows: usize, n_cols: usize, nb: usize) {
        self.nb = nb;
        self.n_rows = n_rows;
        self.n_cols = n_cols;
        self.cols.resize_with(n_rows.max(self.cols.len()), Vec::new);
        self.vals.resize_with(n_rows.max(self.vals.len()), Vec::new);
        self.cols.truncate(n_rows);
        self.vals.truncate(n_rows);
        for r in 0..n_rows {
            self.cols[r].clear();
            self.vals[r].clear();
        }
        self.b.clear();
        self.b.resize(n_rows * nb, 0.0);
        self.u.clear();
        self.u.resize(n_rows * nb, 0.0);
    }

    fn slot(&mut self, row: usize, col: usize) -> usize {
        let nb2 = self.nb * self.nb;
        match self.cols[row].iter().position(|&c| c == col) {
            Some(k) => k * nb2,
            None => {
                self.cols[row].push(col);
                let at = self.vals[row].len();
                self.vals[row].resize(at + nb2, 0.0);
                at
            }
        }
    }

    /// Accumulates an `nb×nb` row-major block into `(row, col)`.
    pub fn add_block(&mut self, row: usize, col: usize, block: &[f64]) -> Result<(), LinsysError> {
        let nb2 = self.nb * self.nb;
        if block.len() != nb2 {
            return Err(LinsysError::Shape {
                expected: nb2,
                got: block.len(),
            });
        }
        let at = self.slot(row, col);
        for (v, x) in self.vals[row][at..at + nb2].iter_mut().zip(block) {
            *v += x;
        }
        Ok(())
    }

    /// Accumulates a single entry of block `(row, col)`.
    pub fn add_entry(&mut self, row: usize, col: usize, i: usize, j: usize, v: f64) {
        let at = self.slot(row, col);
        self.vals[row][at + i * self.nb + j] += v;
    }

    pub fn add_rhs(&mut self, row: usize, v: &[f64]) -> Result<(), LinsysError> {
        if v.len() != self.nb {
            return Err(LinsysError::Shape {
                expected: self.nb,
                got: v.len(),
            });
        }
        for (d, x) in self.b[row * self.nb..(row + 1) * self.nb].iter_mut().zip(v) {
            *d += x;
        }
        Ok(())
    }

    pub fn row_len(&self, row: usize) -> usize {
        self.cols[row].len()
    }

    pub fn to_csr(&self) -> Csr {
        let nb2 = self.nb * self.nb;
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..self.n_rows {
            let mut order: Vec<usize> = (0..self.cols[r].len()).collect();
            order.sort_by_key(|&k| self.cols[r][k]);
            for k in order {
                col_idx.push(self.cols[r][k]);
                vals.extend_from_slice(&self.vals[r][k * nb2..(k + 1) * nb2]);
            }
            row_ptr.push(col_idx.len());
        }
        Csr {
            nb: self.nb,
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// Dense `(n_rows·nb) × (n_cols·nb)` reconstruction.
    pub fn to_dense(&self) -> Vec<f64> {
        let nb = self.nb;
        let w = self.n_cols * nb;
        let mut d = vec![0.0; self.n_rows * nb * w];
        for r in 0..self.n_rows {
            for (k, &c) in self.cols[r].iter().enumerate() {
                for i in 0..nb {
                    for j in 0..nb {
                        d[(r * nb + i) * w + c * nb + j] = self.vals[r][k * nb * nb + i * nb + j];
                    }
                }
            }
        }
        d
    }
}

/// Flat block-CSR with column-sorted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nb: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn block(&self, k: usize) -> &[f64] {
        let nb2 = self.nb * self.nb;
        &self.vals[k * nb2..(k + 1) * nb2]
    }

    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let s = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        s.binary_search(&col).ok().map(|k| self.row_ptr[row] + k)
    }

    /// `y = A x` with `x` over all local columns.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let nb = self.nb;
        y[..self.n_rows * nb].fill(0.0);
        for r in 0..self.n_rows {
            let yr = &mut y[r * nb..(r + 1) * nb];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                dense::gemv_add(yr, self.block(k), &x[c * nb..(c + 1) * nb], nb);
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let nb = self.nb;
        let w = self.n_cols * nb;
        let mut d = vec![0.0; self.n_rows * nb * w];
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let blk = self.block(k);
                for i in 0..nb {
                    for j in 0..nb {
                        d[(r * nb + i) * w + c * nb + j] = blk[i * nb + j];
                    }
                }
            }
        }
        d
    }
}

/// Communication for a distributed solve over the members of one group.
/// Parts are indexed in rank order.
pub trait Comm {
    fn n_parts(&self) -> usize;

    /// Fills the ghost entries (`x[p][n_rows·nb..]`) of every part from the
    /// owning parts. Ghosts owned outside the group are left untouched.
    fn exchange(&self, x: &mut [Vec<f64>], nb: usize);

    /// Group-wide sum, accumulated in part order.
    fn sum(&self, partials: &[f64]) -> f64 {
        partials.iter().fold(0.0, |a, b| a + b)
    }
}

/// A single part with no ghost columns.
pub struct SerialComm;

impl Comm for SerialComm {
    fn n_parts(&self) -> usize {
        1
    }

    fn exchange(&self, _x: &mut [Vec<f64>], _nb: usize) {}
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulation_cancels() {
        let mut m = BlockMatrix::new(2, 2, 2);
        let b = [1.0, 2.0, 3.0, 4.0];
        let nb: Vec<f64> = b.iter().map(|v| -v).collect();
        m.add_block(0, 1, &b).unwrap();
        assert_eq!(m.row_len(0), 1);
        m.add_block(0, 1, &nb).unwrap();
        assert_eq!(m.row_len(0), 1);
        assert!(m.vals[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_error() {
        let mut m = BlockMatrix::new(1, 1, 3);
        assert_eq!(
            m.add_block(0, 0, &[1.0; 4]),
            Err(LinsysError::Shape { expected: 9, got: 4 })
        );
    }

    #[test]
    fn reuse_with_new_block_size() {
        let mut m = BlockMatrix::new(4, 4, 4);
        m.add_block(3, 2, &[1.0; 16]).unwrap();
        m.begin(4, 4, 1);
        assert!(m.cols.iter().all(|c| c.is_empty()));
        assert_eq!(m.b.len(), 4);
        m.add_block(3, 2, &[5.0]).unwrap();
        assert_eq!(m.vals[3], vec![5.0]);
    }

    #[test]
    fn csr_of_block_diagonal() {
        let mut m = BlockMatrix::new(2, 2, 1);
        m.add_block(1, 1, &[2.0]).unwrap();
        m.add_block(0, 0, &[1.0]).unwrap();
        let c = m.to_csr();
        assert_eq!(c.row_ptr, vec![0, 1, 2]);
        let e = BlockMatrix::new(3, 3, 1).to_csr();
        assert_eq!(e.row_ptr, vec![0, 0, 0, 0]);
    }

    #[test]
    fn csr_sorts_columns() {
        let mut m = BlockMatrix::new(1, 3, 1);
        m.add_block(0, 2, &[3.0]).unwrap();
        m.add_block(0, 0, &[1.0]).unwrap();
        m.add_block(0, 1, &[2.0]).unwrap();
        let c = m.to_csr();
        assert_eq!(c.col_idx, vec![0, 1, 2]);
        assert_eq!(c.vals, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.to_dense(), m.to_dense());
    }
}
