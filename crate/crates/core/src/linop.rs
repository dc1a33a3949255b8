//! Linear operators used by the shipped couplings.

use crate::error::{Error, Result};

pub trait LinearOperator: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn adjoint(&self, y: &[f64]) -> Vec<f64>;
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidParameter("matrix must be nonempty".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LayoutMismatch {
                expected: vec![cols],
                found: vec![bad.len()],
            });
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

impl LinearOperator for DenseMatrix {
    fn in_dim(&self) -> usize {
        self.cols
    }

    fn out_dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).fold(0.0, |acc, (a, b)| acc + a * b))
            .collect()
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, yi) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }
}

/// Forward-difference gradient of an `n1 × n2` image stored row-major
/// (pixel (i, j) at `i * n2 + j`), with Neumann boundary. The output holds
/// the vertical differences in its first `n1 n2` entries and the horizontal
/// ones in the second half.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gradient2D {
    pub n1: usize,
    pub n2: usize,
}

impl Gradient2D {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "image must be nonempty, got {n1}x{n2}"
            )));
        }
        Ok(Self { n1, n2 })
    }

    pub fn pixels(&self) -> usize {
        self.n1 * self.n2
    }
}

impl LinearOperator for Gradient2D {
    fn in_dim(&self) -> usize {
        self.pixels()
    }

    fn out_dim(&self) -> usize {
        2 * self.pixels()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (n1, n2, n) = (self.n1, self.n2, self.pixels());
        let mut g = vec![0.0; 2 * n];
        for i in 0..n1 {
            for j in 0..n2 {
                let p = i * n2 + j;
                if i + 1 < n1 {
                    g[p] = x[p + n2] - x[p];
                }
                if j + 1 < n2 {
                    g[n + p] = x[p + 1] - x[p];
                }
            }
        }
        g
    }

    /// Negative divergence.
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let (n1, n2, n) = (self.n1, self.n2, self.pixels());
        let mut out = vec![0.0; n];
        for i in 0..n1 {
            for j in 0..n2 {
                let p = i * n2 + j;
                let mut v = 0.0;
                if i + 1 < n1 {
                    v -= y[p];
                }
                if i > 0 {
                    v += y[p - n2];
                }
                if j + 1 < n2 {
                    v -= y[n + p];
                }
                if j > 0 {
                    v += y[n + p - 1];
                }
                out[p] = v;
            }
        }
        out
    }
}
