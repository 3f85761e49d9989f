//! Lowest eigenpairs of Hermitian pencils `K x = λ M x` with diagonal `M`.
//!
//! Small pencils go to a dense solver. Larger ones use block LOBPCG in the
//! `M` inner product (block size `k + 3`, every basis re-orthonormalised each
//! iteration, seeded start). The default preconditioner is an exact banded
//! solve with `K − σM` for a shift `σ` just below `λ₁`, chosen with the
//! inertia of the banded factor; a Jacobi preconditioner is also available.

mod banded;

use std::sync::Once;

use faer::{Mat, Par, Side};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use banded::{inertia_count, BandedLdl};

use crate::assembly::{OperatorPair, WeightOperator};
use crate::error::{Error, Result};

/// Interior dimension up to which the dense solver is used.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    /// `diag(K)⁻¹`
    Diagonal,
    /// `(K − σM)⁻¹` by banded factorisation, `σ` below the spectrum.
    ShiftInvert,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub preconditioner: Preconditioner,
    /// Use the dense solver when the dimension is at most [`DENSE_LIMIT`].
    pub dense_fallback: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            seed: 42,
            preconditioner: Preconditioner::ShiftInvert,
            dense_fallback: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPath {
    Dense,
    Lobpcg,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// `M`-orthonormal eigenvectors.
    pub vectors: Vec<Vec<C64>>,
    /// `‖Kx − λMx‖ / ‖Mx‖`
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: usize,
    pub path: SolverPath,
    pub shift: Option<f64>,
}

impl EigenResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }
}

fn sequential() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(Par::Seq));
}

#[inline]
fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn m_dot(m: &[f64], x: &[C64], y: &[C64]) -> C64 {
    let mut acc = zero();
    for ((a, b), w) in x.iter().zip(y).zip(m) {
        acc += a.conj() * b * *w;
    }
    acc
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    let mut acc = zero();
    for (a, b) in x.iter().zip(y) {
        acc += a.conj() * b;
    }
    acc
}

fn m_norm(m: &[f64], x: &[C64]) -> f64 {
    x.iter()
        .zip(m)
        .map(|(a, w)| a.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}

fn residual_norm(pair: &OperatorPair, x: &[C64], kx: &[C64], lambda: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        let mx = x[i] * pair.mass[i];
        num += (kx[i] - mx * lambda).norm_sqr();
        den += mx.norm_sqr();
    }
    (num / den).sqrt()
}

/// Lowest eigenvalues of a small Hermitian matrix, ascending, with eigenvectors.
fn small_eigen(g: &[Vec<C64>]) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    sequential();
    let p = g.len();
    let a = Mat::<C64>::from_fn(p, p, |i, j| if i >= j { g[i][j] } else { g[j][i].conj() });
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("dense eigensolver: {e:?}")))?;
    let s = e.S().column_vector();
    let u = e.U();
    let vals = (0..p).map(|i| s[i].re).collect();
    let vecs = (0..p)
        .map(|j| (0..p).map(|i| u[(i, j)]).collect())
        .collect();
    Ok((vals, vecs))
}

fn dense_eigenpairs(pair: &OperatorPair, k: usize) -> Result<EigenResult> {
    let n = pair.dim();
    let isq: Vec<f64> = pair.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut g = vec![vec![zero(); n]; n];
    for i in 0..n {
        for (j, v) in pair.k.row(i) {
            g[i][j] = v * (isq[i] * isq[j]);
        }
    }
    let (vals, vecs) = small_eigen(&g)?;
    let mut out = EigenResult {
        values: Vec::with_capacity(k),
        vectors: Vec::with_capacity(k),
        residuals: Vec::with_capacity(k),
        converged: Vec::with_capacity(k),
        iterations: 0,
        path: SolverPath::Dense,
        shift: None,
    };
    for j in 0..k.min(n) {
        let x: Vec<C64> = vecs[j].iter().zip(&isq).map(|(y, s)| y * *s).collect();
        let kx = pair.k.mul_vec(&x);
        out.residuals.push(residual_norm(pair, &x, &kx, vals[j]));
        out.converged.push(true);
        out.values.push(vals[j]);
        out.vectors.push(x);
    }
    Ok(out)
}

/// Smooth positive trial vector on the strip grid, or all ones.
fn trial_vector(pair: &OperatorPair) -> Vec<C64> {
    match pair.meta.grid {
        Some(g) if g.dim() == pair.dim() => (0..g.dim())
            .map(|k| {
                let (i, j) = (k / g.n_u, k % g.n_u);
                let a = std::f64::consts::PI * (i + 1) as f64 / (g.n_s + 1) as f64;
                let b = std::f64::consts::PI * (j + 1) as f64 / (g.n_u + 1) as f64;
                C64::new(a.sin() * b.sin(), 0.0)
            })
            .collect(),
        _ => vec![C64::new(1.0, 0.0); pair.dim()],
    }
}

/// Gershgorin lower bound for the pencil spectrum.
fn gershgorin_lower(pair: &OperatorPair) -> f64 {
    (0..pair.dim())
        .map(|i| {
            let mut d = 0.0;
            let mut off = 0.0;
            for (j, v) in pair.k.row(i) {
                if j == i {
                    d = v.re;
                } else {
                    off += v.norm();
                }
            }
            (d - off) / pair.mass[i]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Shift `σ < λ₁` with `K − σM` positive definite, as close to `λ₁` as the
/// geometric search allows, together with its factor.
pub fn lower_shift(pair: &OperatorPair) -> Result<(f64, BandedLdl)> {
    let r = pair.rayleigh(&trial_vector(pair));
    let floor = gershgorin_lower(pair);
    let mut delta = 1e-4 * r.abs().max(1e-2);
    let mut above: Option<f64> = None;
    for _ in 0..40 {
        let sigma = r - delta;
        if sigma <= floor {
            break;
        }
        match BandedLdl::factor(&pair.k, sigma, &pair.mass) {
            Ok(f) if f.is_positive_definite() => {
                let Some(mut hi) = above else {
                    return Ok((sigma, f));
                };
                // the geometric step can overshoot by a lot; bisect back towards λ₁
                let (mut lo, mut best) = (sigma, f);
                for _ in 0..8 {
                    if hi - lo <= 1e-3 * lo.abs().max(1.0) {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    match BandedLdl::factor(&pair.k, mid, &pair.mass) {
                        Ok(g) if g.is_positive_definite() => {
                            lo = mid;
                            best = g;
                        }
                        _ => hi = mid,
                    }
                }
                return Ok((lo, best));
            }
            _ => {
                above = Some(sigma);
                delta *= 8.0;
            }
        }
    }
    let sigma = floor - 1e-8 * floor.abs().max(1.0);
    let f = BandedLdl::factor(&pair.k, sigma, &pair.mass)?;
    if !f.is_positive_definite() {
        return Err(Error::Numeric(
            "no positive definite shift found below the spectrum".into(),
        ));
    }
    Ok((sigma, f))
}

enum Precond {
    Diagonal(Vec<f64>),
    Banded(BandedLdl),
}

impl Precond {
    fn apply(&self, r: &[C64]) -> Vec<C64> {
        match self {
            Precond::Diagonal(d) => r.iter().zip(d).map(|(v, w)| v * *w).collect(),
            Precond::Banded(f) => {
                let mut x = r.to_vec();
                f.solve_in_place(&mut x);
                x
            }
        }
    }
}

/// Append `M`-orthonormalised copies of `cands` to `basis` (classical
/// Gram–Schmidt applied twice); near-dependent candidates are dropped.
fn extend_orthonormal(m: &[f64], basis: &mut Vec<Vec<C64>>, cands: Vec<Vec<C64>>) {
    for mut v in cands {
        let before = m_norm(m, &v);
        if !(before > 0.0 && before.is_finite()) {
            continue;
        }
        for _ in 0..2 {
            let coeffs: Vec<C64> = basis.iter().map(|q| m_dot(m, q, &v)).collect();
            for (q, c) in basis.iter().zip(coeffs) {
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= qi * c;
                }
            }
        }
        let after = m_norm(m, &v);
        if after > 1e-10 * before {
            let inv = 1.0 / after;
            v.iter_mut().for_each(|x| *x *= inv);
            basis.push(v);
        }
    }
}

fn lobpcg(pair: &OperatorPair, k: usize, opts: &SolverOptions) -> Result<EigenResult> {
    let n = pair.dim();
    let m = (k + 3).min(n);
    let mass = &pair.mass;
    let (precond, shift) = match opts.preconditioner {
        Preconditioner::Diagonal => {
            let d = pair
                .k
                .diagonal()
                .iter()
                .map(|v| if v.re > 0.0 { 1.0 / v.re } else { 1.0 })
                .collect();
            (Precond::Diagonal(d), None)
        }
        Preconditioner::ShiftInvert => {
            let (sigma, f) = lower_shift(pair)?;
            (Precond::Banded(f), Some(sigma))
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let trial = trial_vector(pair);
    let mut start = vec![trial];
    for _ in 1..m {
        start.push(
            (0..n)
                .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect(),
        );
    }
    let mut x: Vec<Vec<C64>> = Vec::with_capacity(m);
    extend_orthonormal(mass, &mut x, start);
    if x.len() < m {
        return Err(Error::Numeric("degenerate starting block".into()));
    }

    let mut p: Vec<Vec<C64>> = Vec::new();
    let mut values = vec![0.0; m];
    let mut residuals = vec![f64::INFINITY; m];
    let mut iterations = 0;
    // initial Rayleigh–Ritz on X alone
    let mut basis = x.clone();
    loop {
        let kb: Vec<Vec<C64>> = basis.iter().map(|q| pair.k.mul_vec(q)).collect();
        let q = basis.len();
        let mut g = vec![vec![zero(); q]; q];
        for i in 0..q {
            for j in 0..=i {
                g[i][j] = dot(&basis[i], &kb[j]);
            }
        }
        let (vals, vecs) = small_eigen(&g)?;
        let combine = |src: &[Vec<C64>], c: &[C64]| -> Vec<C64> {
            let mut out = vec![zero(); n];
            for (s, w) in src.iter().zip(c) {
                if *w != zero() {
                    for (o, v) in out.iter_mut().zip(s) {
                        *o += v * w;
                    }
                }
            }
            out
        };
        let new_x: Vec<Vec<C64>> = (0..m).map(|j| combine(&basis, &vecs[j])).collect();
        let kx: Vec<Vec<C64>> = (0..m).map(|j| combine(&kb, &vecs[j])).collect();
        values.copy_from_slice(&vals[..m]);
        if iterations > 0 {
            // P = X_new − X (X* M X_new)
            p = new_x
                .iter()
                .map(|xn| {
                    let mut d = xn.clone();
                    for xo in &x {
                        let c = m_dot(mass, xo, xn);
                        for (di, xi) in d.iter_mut().zip(xo) {
                            *di -= xi * c;
                        }
                    }
                    d
                })
                .collect();
        }
        x = new_x;

        let mut active = Vec::new();
        let mut res_vecs = Vec::new();
        for j in 0..m {
            let r: Vec<C64> = (0..n)
                .map(|i| kx[j][i] - x[j][i] * (mass[i] * values[j]))
                .collect();
            residuals[j] = residual_norm(pair, &x[j], &kx[j], values[j]);
            if residuals[j] > opts.tol {
                active.push(j);
                res_vecs.push(r);
            }
        }
        if active.iter().all(|j| *j >= k) || iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let w: Vec<Vec<C64>> = res_vecs.iter().map(|r| precond.apply(r)).collect();
        basis = x.clone();
        extend_orthonormal(mass, &mut basis, w);
        let pa: Vec<Vec<C64>> = active
            .iter()
            .map(|j| p.get(*j).cloned().unwrap_or_default())
            .filter(|v| !v.is_empty())
            .collect();
        extend_orthonormal(mass, &mut basis, pa);
        if basis.len() == m {
            break;
        }
    }

    let k = k.min(m);
    Ok(EigenResult {
        values: values[..k].to_vec(),
        vectors: x[..k].to_vec(),
        residuals: residuals[..k].to_vec(),
        converged: residuals[..k].iter().map(|r| *r <= opts.tol).collect(),
        iterations,
        path: SolverPath::Lobpcg,
        shift,
    })
}

/// The `k` smallest eigenpairs of the pencil.
pub fn lowest_eigenpairs(
    pair: &OperatorPair,
    k: usize,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    let n = pair.dim();
    if n == 0 {
        return Err(Error::Domain("pencil has dimension 0".into()));
    }
    if k == 0 {
        return Err(Error::Domain(
            "requested eigenpair count must be at least 1".into(),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let k = k.min(n);
    if (opts.dense_fallback && n <= DENSE_LIMIT) || k + 3 > n {
        return dense_eigenpairs(pair, k);
    }
    lobpcg(pair, k, opts)
}

#[derive(Debug, Clone)]
pub struct CountReport {
    pub count: usize,
    /// Doubling reached the full dimension before passing the threshold.
    pub exhausted: bool,
    /// Eigenvalues computed in the last round.
    pub eigenvalues: Vec<f64>,
    pub converged: bool,
    /// Eigenvalues below `threshold − tol` from the inertia of the banded factor.
    pub inertia_count: Option<usize>,
}

/// Number of eigenvalues below `threshold − tol`, by doubling `k = 4, 8, …`
/// until the largest computed eigenvalue exceeds `threshold + tol`.
pub fn count_below(
    pair: &OperatorPair,
    threshold: f64,
    tol: f64,
    opts: &SolverOptions,
) -> Result<CountReport> {
    if !threshold.is_finite() {
        return Err(Error::Domain("threshold must be finite".into()));
    }
    let n = pair.dim();
    let mut k = 4usize.min(n);
    loop {
        let res = lowest_eigenpairs(pair, k, opts)?;
        let top = *res.values.last().unwrap_or(&f64::NEG_INFINITY);
        let done = top > threshold + tol;
        if done || k >= n {
            let count = res
                .values
                .iter()
                .zip(&res.converged)
                .filter(|(v, c)| **c && **v < threshold - tol)
                .count();
            let inertia = inertia_count(&pair.k, &pair.mass, threshold - tol).ok();
            return Ok(CountReport {
                count,
                exhausted: !done,
                converged: res.all_converged(),
                eigenvalues: res.values,
                inertia_count: inertia,
            });
        }
        k = (2 * k).min(n);
    }
}

#[derive(Debug, Clone)]
pub struct HardyResult {
    /// Smallest eigenvalue of `(K − ΛM, W)`.
    pub constant: f64,
    pub shift: f64,
    /// Smallest Rayleigh quotient of `K − ΛM` over the spot-check vectors.
    pub spot_check_min: f64,
    pub eigen: EigenResult,
}

/// Smallest eigenvalue of `(K − ΛM, W)` after checking `K − ΛM ≥ 0`.
pub fn hardy_pencil_min(
    pair: &OperatorPair,
    weight: &WeightOperator,
    shift: f64,
    opts: &SolverOptions,
) -> Result<HardyResult> {
    let n = pair.dim();
    let shifted = pair.hardy_shifted(shift, weight)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut spot = f64::INFINITY;
    for _ in 0..100 {
        let x: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        spot = spot.min(shifted.k.quadratic_form(&x) / m_norm(&pair.mass, &x).powi(2));
    }
    if spot < -1e-12 {
        return Err(Error::Precondition(format!(
            "K − {shift}·M has Rayleigh quotient {spot} < 0"
        )));
    }
    let negative = inertia_count(&pair.k, &pair.mass, shift)?;
    if negative > 0 {
        return Err(Error::Precondition(format!(
            "K − {shift}·M is indefinite: {negative} pencil eigenvalue(s) below the shift"
        )));
    }
    let eigen = lowest_eigenpairs(&shifted, 1, opts)?;
    Ok(HardyResult {
        constant: eigen.values[0],
        shift,
        spot_check_min: spot,
        eigen,
    })
}

/// `max |x_i* M x_j − δ_ij|` over the computed eigenvectors.
pub fn orthonormality_defect(pair: &OperatorPair, res: &EigenResult) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in res.vectors.iter().enumerate() {
        for (j, b) in res.vectors.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m_dot(&pair.mass, a, b) - want).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_straight_magnetic, StripGrid};
    use crate::magnetic::VectorPotential;
    use crate::sparse::CsrMatrix;
    use std::f64::consts::PI;

    #[test]
    fn identity_pencil() {
        let pair = OperatorPair::new(CsrMatrix::identity(5), vec![1.0; 5]).unwrap();
        let r = lowest_eigenpairs(&pair, 1, &SolverOptions::default()).unwrap();
        assert_eq!(r.values, vec![1.0]);
        assert!(r.residuals[0] < 1e-15);
    }

    #[test]
    fn three_by_three_discrete_sine_spectrum() {
        let grid = StripGrid::new(0.5, 1.0, 0.25, 0.25).unwrap();
        assert_eq!((grid.n_s, grid.n_u), (3, 3));
        let (pair, _) = assemble_straight_magnetic(&grid, &VectorPotential::zero()).unwrap();
        let r = lowest_eigenpairs(&pair, 9, &SolverOptions::default()).unwrap();
        let h = 0.25;
        let one = |p: usize| 4.0 / (h * h) * (p as f64 * PI * h / 2.0).sin().powi(2);
        let mut want: Vec<f64> = (1..=3)
            .flat_map(|p| (1..=3).map(move |q| one(p) + one(q)))
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in r.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn iterative_matches_dense_on_small_strip() {
        let grid = StripGrid::uniform(2.0, 1.0, 1.0 / 8.0).unwrap();
        let (pair, _) = assemble_straight_magnetic(&grid, &VectorPotential::zero()).unwrap();
        let dense = lowest_eigenpairs(&pair, 4, &SolverOptions::default()).unwrap();
        for pc in [Preconditioner::ShiftInvert, Preconditioner::Diagonal] {
            let opts = SolverOptions {
                dense_fallback: false,
                preconditioner: pc,
                ..Default::default()
            };
            let it = lowest_eigenpairs(&pair, 4, &opts).unwrap();
            assert_eq!(it.path, SolverPath::Lobpcg);
            assert!(
                it.all_converged(),
                "{pc:?} {:?} {} {:?}",
                it.residuals,
                it.iterations,
                it.shift
            );
            for (a, b) in it.values.iter().zip(&dense.values) {
                assert!((a - b).abs() <= 1e-8 * b.abs(), "{pc:?}: {a} vs {b}");
            }
            assert!(orthonormality_defect(&pair, &it) < 1e-10);
        }
    }

    #[test]
    fn count_below_negative_threshold_is_zero() {
        let grid = StripGrid::uniform(2.0, 1.0, 0.25).unwrap();
        let (pair, _) = assemble_straight_magnetic(&grid, &VectorPotential::zero()).unwrap();
        let c = count_below(&pair, -1.0, 0.0, &SolverOptions::default()).unwrap();
        assert_eq!(c.count, 0);
        assert_eq!(c.inertia_count, Some(0));
    }
}
