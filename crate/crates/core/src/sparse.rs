//! Coordinate-format accumulation and compressed sparse rows.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row count above which matrix-vector products split rows across threads.
const PAR_ROWS: usize = 4096;

#[derive(Debug, Clone, Default)]
pub struct CooMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> CooMatrix<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: T) {
        debug_assert!(r < self.rows && c < self.cols, "({r},{c}) outside {}x{}", self.rows, self.cols);
        self.entries.push((r, c, v));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Duplicates are summed in insertion order, so the result depends only
    /// on the sequence of pushes.
    pub fn to_csr(&self) -> CsrMatrix<T> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by_key(|&k| (self.entries[k].0, self.entries[k].1));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(order.len());
        let mut data: Vec<T> = Vec::with_capacity(order.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = self.entries[k];
            if last == Some((r, c)) {
                *data.last_mut().expect("nonempty") += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let s = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[s.clone()], &self.data[s])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (idx, val) = self.row(r);
        match idx.binary_search(&c) {
            Ok(k) => val[k],
            Err(_) => T::zero(),
        }
    }

    fn row_dot(&self, r: usize, x: &[T]) -> T {
        let (idx, val) = self.row(r);
        let mut s = T::zero();
        for (c, v) in idx.iter().zip(val) {
            s += *v * x[*c];
        }
        s
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        if y.len() != self.rows {
            return Err(Error::ShapeMismatch {
                expected: self.rows,
                found: y.len(),
            });
        }
        if self.rows >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, yr)| *yr = self.row_dot(r, x));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = self.row_dot(r, x);
            }
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `y += A^T x`, accumulated row by row in order.
    pub fn matvec_transpose_add(&self, x: &[T], y: &mut [T]) -> Result<()> {
        if x.len() != self.rows || y.len() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: self.rows,
                found: x.len(),
            });
        }
        for (r, xr) in x.iter().enumerate() {
            if *xr == T::zero() {
                continue;
            }
            let (idx, val) = self.row(r);
            for (c, v) in idx.iter().zip(val) {
                y[*c] += *v * *xr;
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut coo = CooMatrix::new(self.cols, self.rows);
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            for (c, v) in idx.iter().zip(val) {
                coo.push(*c, r, *v);
            }
        }
        coo.to_csr()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|r| self.get(r, r)).collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (idx, val) = self.row(r);
            idx.iter().zip(val).map(move |(c, v)| (r, *c, *v))
        })
    }

    pub fn to_dense(&self) -> crate::dense::DenseMatrix<T> {
        let mut d = crate::dense::DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    /// Largest `|A_rc - A_cr|`; zero for a bit-symmetric matrix.
    pub fn max_asymmetry(&self) -> T {
        if self.rows != self.cols {
            return T::infinity();
        }
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(T::zero(), T::max)
    }

    /// Matrix Market coordinate export (1-based, general real).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v.to_f64_lossy())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_summed() {
        let mut c = CooMatrix::new(2, 3);
        c.push(1, 2, 1.0);
        c.push(0, 0, 2.0);
        c.push(1, 2, 0.5);
        c.push(0, 1, -1.0);
        let m = c.to_csr();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 2.0]).unwrap(), vec![1.0, 3.0]);
        let mut y = vec![0.0; 3];
        m.matvec_transpose_add(&[1.0, 2.0], &mut y).unwrap();
        assert_eq!(y, vec![2.0, -1.0, 3.0]);
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn shape_errors() {
        let m = CsrMatrix::<f64>::zeros(2, 2);
        assert!(m.matvec(&[1.0]).is_err());
    }

    #[test]
    fn parallel_matches_serial() {
        let n = PAR_ROWS + 17;
        let mut c = CooMatrix::new(n, n);
        for r in 0..n {
            c.push(r, r, 2.0 + r as f64 * 1e-3);
            c.push(r, (r * 7 + 3) % n, -0.5);
        }
        let m = c.to_csr();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let y = m.matvec(&x).unwrap();
        for r in 0..n {
            assert_eq!(y[r], m.row_dot(r, &x));
        }
    }

    #[test]
    fn matrix_market_header() {
        let mut c = CooMatrix::new(2, 2);
        c.push(0, 0, 1.0);
        let mut buf = Vec::new();
        c.to_csr().write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines.next().unwrap(), "2 2 1");
    }
}
