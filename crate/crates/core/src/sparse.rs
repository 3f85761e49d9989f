//! Compressed sparse row storage for complex Hermitian operators.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<C64>,
}

/// Row-wise accumulator; entries with equal column are summed.
#[derive(Debug, Clone)]
pub struct CsrBuilder {
    rows: Vec<Vec<(usize, C64)>>,
}

impl CsrBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            rows: vec![Vec::new(); dim],
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: C64) {
        let r = &mut self.rows[row];
        match r.iter_mut().find(|e| e.0 == col) {
            Some(e) => e.1 += v,
            None => r.push((col, v)),
        }
    }

    pub fn build(self) -> CsrMatrix {
        let dim = self.rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut r in self.rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![C64::new(1.0, 0.0); dim],
        }
    }

    pub fn from_dense(a: &[Vec<C64>]) -> Self {
        let mut b = CsrBuilder::new(a.len());
        for (i, row) in a.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != C64::new(0.0, 0.0) {
                    b.add(i, j, *v);
                }
            }
        }
        b.build()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i)
            .find(|e| e.0 == j)
            .map(|e| e.1)
            .unwrap_or_default()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// `x* A x` (real part; exact for Hermitian `A` up to rounding).
    pub fn quadratic_form(&self, x: &[C64]) -> f64 {
        let y = self.mul_vec(x);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `max |A_ij − conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Half bandwidth `max |i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// `A − σ diag(m)`
    pub fn shifted(&self, sigma: f64, m: &[f64]) -> Result<Self> {
        if m.len() != self.dim {
            return Err(Error::Domain("shift weights length mismatch".into()));
        }
        let mut b = CsrBuilder::new(self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                b.add(i, j, v);
            }
            b.add(i, i, C64::new(-sigma * m[i], 0.0));
        }
        Ok(b.build())
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut out = vec![vec![C64::new(0.0, 0.0); self.dim]; self.dim];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}
