//! Square sparse matrices in sorted coordinate form.
//!
//! Entries are kept in canonical `(row, col)` order with a row index on top,
//! so two matrices with the same entries compare equal and iterate
//! identically. Products accumulate in a fixed order and are therefore
//! reproducible bit for bit.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets in any order.
    /// Repeated coordinates are an error.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &t {
            if r >= n || c >= n {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {c}) outside a {n}x{n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("matrix entry ({r}, {c})")));
            }
        }
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(w) = t.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Validation(format!(
                "repeated matrix entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_offsets = vec![0usize; n + 1];
        for &(r, _, _) in &t {
            row_offsets[r + 1] += 1;
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(SparseMatrix {
            n,
            row_offsets,
            cols: t.iter().map(|x| x.1).collect(),
            vals: t.iter().map(|x| x.2).collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_offsets: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        SparseMatrix {
            n,
            row_offsets: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored columns and values of row `r`, columns ascending.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if r >= self.n {
            return 0.0;
        }
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        r < self.n && self.row(r).0.binary_search(&c).is_ok()
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).1.iter().sum()
    }

    /// All stored entries in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n != rhs.n {
            return Err(Error::Dimension(format!(
                "cannot multiply {0}x{0} by {1}x{1}",
                self.n, rhs.n
            )));
        }
        let n = self.n;
        let mut acc = vec![0.0f64; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..n {
            touched.clear();
            let (a_cols, a_vals) = self.row(r);
            for (&k, &a) in a_cols.iter().zip(a_vals) {
                let (b_cols, b_vals) = rhs.row(k);
                for (&c, &b) in b_cols.iter().zip(b_vals) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                cols.push(c);
                vals.push(acc[c]);
            }
            row_offsets.push(cols.len());
        }
        Ok(SparseMatrix {
            n,
            row_offsets,
            cols,
            vals,
        })
    }

    /// Entry-wise mean of matrices of equal dimension. Entries absent from a
    /// matrix count as zero.
    pub fn mean(mats: &[SparseMatrix]) -> Result<SparseMatrix> {
        let first = mats
            .first()
            .ok_or_else(|| Error::Dimension("mean of zero matrices".into()))?;
        let n = first.n;
        if mats.iter().any(|m| m.n != n) {
            return Err(Error::Dimension("matrices differ in dimension".into()));
        }
        if mats.len() == 1 {
            return Ok(first.clone());
        }
        let scale = 1.0 / mats.len() as f64;
        let mut acc = vec![0.0f64; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched = Vec::new();
        let mut row_offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..n {
            touched.clear();
            for m in mats {
                let (mc, mv) = m.row(r);
                for (&c, &v) in mc.iter().zip(mv) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += v;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                cols.push(c);
                vals.push(acc[c] * scale);
            }
            row_offsets.push(cols.len());
        }
        Ok(SparseMatrix {
            n,
            row_offsets,
            cols,
            vals,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, c, v) in self.entries() {
            d[r][c] = v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    #[test]
    fn triplet_order_does_not_matter() {
        let a = SparseMatrix::from_triplets(3, [(2, 0, 1.0), (0, 1, 2.0), (0, 0, 3.0)]).unwrap();
        let b = SparseMatrix::from_triplets(3, [(0, 0, 3.0), (2, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.row_sum(0), 5.0);
    }

    #[test]
    fn rejects_bad_triplets() {
        assert!(SparseMatrix::from_triplets(2, [(0, 2, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, [(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, [(0, 1, f64::NAN)]).is_err());
    }

    #[test]
    fn product_matches_dense() {
        let a = SparseMatrix::from_triplets(
            3,
            [(0, 0, 0.5), (0, 2, 0.5), (1, 1, 1.0), (2, 0, 0.25), (2, 1, 0.75)],
        )
        .unwrap();
        let b = SparseMatrix::from_triplets(3, [(0, 1, 1.0), (1, 0, 0.3), (1, 2, 0.7), (2, 2, 1.0)])
            .unwrap();
        let p = a.matmul(&b).unwrap();
        let expected = dense_mul(&a.to_dense(), &b.to_dense());
        for (r, row) in expected.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert!((p.get(r, c) - v).abs() < 1e-15);
            }
        }
        assert_eq!(SparseMatrix::identity(3).matmul(&a).unwrap(), a);
    }

    #[test]
    fn mean_of_heads() {
        let a = SparseMatrix::from_triplets(2, [(0, 0, 1.0), (1, 0, 0.5)]).unwrap();
        let b = SparseMatrix::from_triplets(2, [(0, 0, 0.0), (1, 1, 0.5)]).unwrap();
        let m = SparseMatrix::mean(&[a.clone(), b]).unwrap();
        assert_eq!(m.get(0, 0), 0.5);
        assert_eq!(m.get(1, 0), 0.25);
        assert_eq!(m.get(1, 1), 0.25);
        assert_eq!(SparseMatrix::mean(std::slice::from_ref(&a)).unwrap(), a);
    }
}
