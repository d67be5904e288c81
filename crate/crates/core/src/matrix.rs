use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};

/// A symmetric `n x n` integer matrix, stored dense row-major.
///
/// Construction validates symmetry, and the zero-diagonal requirement when
/// requested; after that the matrix is immutable and safe to share.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<i64>,
}

impl SymMatrix {
    /// Validating constructor from a flat row-major buffer.
    pub fn new(n: usize, entries: Vec<i64>, zero_diagonal: bool) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::CountMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if a != b {
                    return Err(Error::Asymmetric {
                        row: i + 1,
                        col: j + 1,
                        a,
                        b,
                    });
                }
            }
            if zero_diagonal && entries[i * n + i] != 0 {
                return Err(Error::NonzeroDiagonal {
                    index: i + 1,
                    value: entries[i * n + i],
                });
            }
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0; n * n],
        }
    }

    /// Build from a symmetric function of the index pair. The function is
    /// only consulted for `i <= j`; the transpose entry is mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut entries = vec![0i64; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[i64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == 0)
    }

    /// Sum of an entire row (includes the diagonal).
    pub fn row_sum(&self, i: usize) -> i64 {
        self.row(i).iter().sum()
    }

    /// Sum over all entries.
    pub fn total_sum(&self) -> i64 {
        self.entries.iter().sum()
    }

    pub fn max_abs(&self) -> i64 {
        self.entries.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.entries
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// The quadratic form `x^T M x` for 0/1 `x` given by `support`
    /// (both orderings of every pair are counted, as in a full double sum).
    pub fn quad_form_support(&self, support: &[usize]) -> i64 {
        let mut acc = 0i64;
        for &i in support {
            let row = self.row(i);
            for &j in support {
                acc += row[j];
            }
        }
        acc
    }

    /// Apply a relabeling: `out[p(i)][p(j)] = in[i][j]`.
    pub fn relabel(&self, p: &[usize]) -> Self {
        assert_eq!(p.len(), self.n);
        let mut entries = vec![0i64; self.n * self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                entries[p[i] * self.n + p[j]] = self.get(i, j);
            }
        }
        Self { n: self.n, entries }
    }
}
