//! Banded `L D Lᴴ` factorisation without pivoting.
//!
//! The strip operators are banded with half bandwidth `n_u`, so the factor of
//! `K − σM` costs `O(n · n_u²)` and its pivots give the inertia (Sylvester's
//! law), i.e. the exact number of pencil eigenvalues below `σ`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i][i − bw .. i]` left-padded with zeros.
    l: Vec<C64>,
    d: Vec<f64>,
}

impl BandedLdl {
    /// Factor `A − σ diag(mass)`.
    pub fn factor(a: &CsrMatrix, shift: f64, mass: &[f64]) -> Result<Self> {
        let n = a.dim;
        if mass.len() != n {
            return Err(Error::Domain("mass length mismatch".into()));
        }
        let bw = a.bandwidth().max(1);
        let mut l = vec![C64::new(0.0, 0.0); n * bw];
        let mut d = vec![0.0; n];
        let mut scale = 0.0f64;
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j < i {
                    l[i * bw + (j + bw - i)] = v;
                } else if j == i {
                    d[i] = v.re - shift * mass[i];
                }
                scale = scale.max(v.norm());
            }
        }
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * 1e-3;
        // `u` holds L[i][k] d[k] for the current row
        let mut u = vec![C64::new(0.0, 0.0); bw];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * bw + (j + bw - i)];
                let ri = &u[(k0 + bw - i)..(j + bw - i)];
                let rj = &l[j * bw + (k0 + bw - j)..j * bw + bw];
                for (a, b) in ri.iter().zip(rj) {
                    s -= a * b.conj();
                }
                u[j + bw - i] = s;
                l[i * bw + (j + bw - i)] = s / d[j];
            }
            let mut di = d[i];
            for j in j0..i {
                let t = j + bw - i;
                di -= (u[t] * l[i * bw + t].conj()).re;
            }
            if di.abs() <= tiny || !di.is_finite() {
                return Err(Error::Numeric(format!(
                    "zero pivot at row {i} for shift {shift}"
                )));
            }
            d[i] = di;
            u.fill(C64::new(0.0, 0.0));
        }
        Ok(Self { n, bw, l, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(negative, positive)` pivot counts.
    pub fn inertia(&self) -> (usize, usize) {
        let neg = self.d.iter().filter(|v| **v < 0.0).count();
        (neg, self.n - neg)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.inertia().0 == 0
    }

    /// Solve `(L D Lᴴ) x = b` in place.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let row = &self.l[i * bw + (j0 + bw - i)..i * bw + bw];
            let mut s = x[i];
            for (lij, xj) in row.iter().zip(&x[j0..i]) {
                s -= lij * xj;
            }
            x[i] = s;
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= *di;
        }
        for i in (0..n).rev() {
            let j0 = i.saturating_sub(bw);
            let xi = x[i];
            let row = &self.l[i * bw + (j0 + bw - i)..i * bw + bw];
            for (lij, xj) in row.iter().zip(&mut x[j0..i]) {
                *xj -= lij.conj() * xi;
            }
        }
    }
}

/// Number of eigenvalues of `(K, M)` strictly below `sigma`.
pub fn inertia_count(k: &CsrMatrix, mass: &[f64], sigma: f64) -> Result<usize> {
    Ok(BandedLdl::factor(k, sigma, mass)?.inertia().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrBuilder;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut b = CsrBuilder::new(n);
        for i in 0..n {
            b.add(i, i, C64::new(2.0, 0.0));
            if i + 1 < n {
                b.add(i, i + 1, C64::new(-1.0, 0.5));
                b.add(i + 1, i, C64::new(-1.0, -0.5));
            }
        }
        b.build()
    }

    #[test]
    fn solve_matches_matvec() {
        let a = tridiag(12);
        let f = BandedLdl::factor(&a, 0.0, &[1.0; 12]).unwrap();
        let x: Vec<C64> = (0..12)
            .map(|k| C64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.05))
            .collect();
        let mut y = a.mul_vec(&x);
        f.solve_in_place(&mut y);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn inertia_counts_eigenvalues() {
        // eigenvalues of the real tridiagonal 2, −1 scaled by |−1 + 0.5i|
        let n = 10;
        let a = tridiag(n);
        let r = (1.25f64).sqrt();
        let eig: Vec<f64> = (1..=n)
            .map(|j| 2.0 - 2.0 * r * (std::f64::consts::PI * j as f64 / (n + 1) as f64).cos())
            .collect();
        for sigma in [0.1, 1.0, 2.05, 3.3, 4.2] {
            let want = eig.iter().filter(|e| **e < sigma).count();
            assert_eq!(
                inertia_count(&a, &vec![1.0; n], sigma).unwrap(),
                want,
                "sigma {sigma}"
            );
        }
    }
}
