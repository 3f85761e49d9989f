use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::forms::integrate;
use crate::assembly::effective_potential;
use crate::error::{Error, Result};
use crate::geometry::WaveguideGeometry;
use crate::magnetic::{pullback, Potential};
use crate::quadrature::simpson;

/// `N · exp(−1/((t − 1)(2 − t)))` on `(1, 2)`, normalised in `L²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub norm: f64,
}

impl BumpProfile {
    pub fn new() -> Self {
        let raw = Self { norm: 1.0 };
        let mass = simpson(|t| raw.eval(t).0.powi(2), 1.0, 2.0, 20_000);
        Self {
            norm: 1.0 / mass.sqrt(),
        }
    }

    /// `(f, f', f'')`
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if t <= 1.0 || t >= 2.0 {
            return (0.0, 0.0, 0.0);
        }
        let p = (t - 1.0) * (2.0 - t);
        let p1 = 3.0 - 2.0 * t;
        let e = self.norm * (-1.0 / p).exp();
        let p2 = p * p;
        let d1 = e * p1 / p2;
        let d2 = e * (p1 * p1 / (p2 * p2) - 2.0 / p2 - 2.0 * p1 * p1 / (p2 * p));
        (e, d1, d2)
    }

    /// `(∫f², ∫f'², ∫f''²)`
    pub fn moments(&self) -> [f64; 3] {
        let m = |k: usize| {
            simpson(
                |t| {
                    let v = self.eval(t);
                    [v.0, v.1, v.2][k].powi(2)
                },
                1.0,
                2.0,
                20_000,
            )
        };
        [m(0), m(1), m(2)]
    }
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylSequenceSpec {
    pub bump: BumpProfile,
    pub momentum: f64,
    pub ns: Vec<f64>,
    pub width: f64,
}

impl WeylSequenceSpec {
    pub fn new(width: f64, momentum: f64, ns: Vec<f64>) -> Self {
        Self {
            bump: BumpProfile::new(),
            momentum,
            ns,
            width,
        }
    }

    /// `π²/d² + k²`
    pub fn mu(&self) -> f64 {
        (PI / self.width).powi(2) + self.momentum * self.momentum
    }

    /// `(ψ_n, ∂_s ψ_n, ∂_s² ψ_n)` without the transverse factor `sin(πu/d)`.
    fn longitudinal(&self, n: f64, s: f64) -> (C64, C64, C64) {
        let (f, f1, f2) = self.bump.eval(s / n);
        let c = (2.0 / (self.width * n)).sqrt();
        let k = self.momentum;
        let e = C64::from_polar(c, k * s);
        let ik = C64::new(0.0, k);
        let phi = e * f;
        let phi1 = e * (f1 / n + ik * f);
        let phi2 = e * (f2 / (n * n) + 2.0 * ik * f1 / n - k * k * f);
        (phi, phi1, phi2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylStudy {
    pub ns: Vec<f64>,
    /// `‖(H₀ − μ)ψ_n‖²`
    pub values: Vec<f64>,
    /// `‖ψ_n‖²`
    pub norms: Vec<f64>,
    /// Least-squares slope of `log value` against `log n`.
    pub slope: f64,
    pub mu: f64,
}

impl WeylStudy {
    pub fn decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }
}

fn check_range(geom: &WaveguideGeometry, ns: &[f64]) -> Result<()> {
    if ns.is_empty() || ns.iter().any(|n| !(*n > 0.0)) {
        return Err(Error::Domain("Weyl indices must be positive".into()));
    }
    let top = ns.iter().cloned().fold(0.0, f64::max);
    if 2.0 * top > geom.half_length {
        return Err(Error::Precondition(format!(
            "window (n, 2n) for n = {top} leaves the strip of half-length {}",
            geom.half_length
        )));
    }
    Ok(())
}

/// `log y = slope · log x + c` by least squares.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `‖(H₀ − μ)ψ_n‖²` with `H₀ = −∂_s J⁻²∂_s − ∂_u² + W`, by quadrature of the explicit integrand.
pub fn weyl_decay_study(
    geom: &WaveguideGeometry,
    spec: &WeylSequenceSpec,
    step: f64,
) -> Result<WeylStudy> {
    check_range(geom, &spec.ns)?;
    if (geom.width - spec.width).abs() > 1e-12 * geom.width {
        return Err(Error::Config(
            "Weyl width differs from the geometry width".into(),
        ));
    }
    let d = spec.width;
    let k = spec.momentum;
    let mut values = Vec::with_capacity(spec.ns.len());
    let mut norms = Vec::with_capacity(spec.ns.len());
    for &n in &spec.ns {
        let [v, m] = integrate::<2, _>(
            (n, 2.0 * n),
            (0.0, d),
            step,
            |s| (geom.frame(s), spec.longitudinal(n, s)),
            |(f, (phi, phi1, phi2)), _s, u| {
                let j = 1.0 + u * f.gamma;
                let w = effective_potential(f, u);
                let r =
                    -phi2 / (j * j) + 2.0 * u * f.gamma_dot / j.powi(3) * phi1 + (w - k * k) * phi;
                let sn = (PI * u / d).sin().powi(2);
                [r.norm_sqr() * sn, phi.norm_sqr() * sn]
            },
        )?;
        values.push(v);
        norms.push(m);
    }
    let slope = loglog_slope(&spec.ns, &values);
    Ok(WeylStudy {
        ns: spec.ns.clone(),
        values,
        norms,
        slope,
        mu: spec.mu(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticWindowRow {
    pub n: f64,
    /// `∫_{ω_n} ã₁² |∂φ_n/∂x|² J`
    pub windowed: f64,
    /// `‖ã₁‖∞` over the window.
    pub sup_a1: f64,
    /// `windowed / sup_a1²` (0 when the potential vanishes on the window).
    pub ratio: f64,
    /// `∫_{ω_n} |∂φ_n/∂x|² J`
    pub gradient: f64,
}

/// Windowed magnetic terms of the Weyl sequence `φ_n = ψ_n/√J` in Cartesian form.
pub fn magnetic_window_study(
    geom: &WaveguideGeometry,
    pot: &dyn Potential,
    spec: &WeylSequenceSpec,
    step: f64,
) -> Result<Vec<MagneticWindowRow>> {
    check_range(geom, &spec.ns)?;
    let pb = pullback(pot, geom)?;
    let d = spec.width;
    let q = PI / d;
    let mut rows = Vec::with_capacity(spec.ns.len());
    for &n in &spec.ns {
        let [windowed, gradient] = integrate::<2, _>(
            (n, 2.0 * n),
            (0.0, d),
            step,
            |s| (geom.frame(s), spec.longitudinal(n, s)),
            |(f, (phi, phi1, _)), _s, u| {
                let j = 1.0 + u * f.gamma;
                let (sn, cs) = (q * u).sin_cos();
                let rj = j.sqrt();
                let p = phi * sn;
                let ps = phi1 * sn;
                let pu = phi * q * cs;
                let vs = (ps - u * f.gamma_dot / (2.0 * j) * p) / rj;
                let vu = (pu - f.gamma / (2.0 * j) * p) / rj;
                let dx = vs * (f.a_dot / j) - vu * f.b_dot;
                let a1 = pb.components_at(f, u).cartesian[0];
                let g = dx.norm_sqr() * j;
                [a1 * a1 * g, g]
            },
        )?;
        let sup_a1 = pb.window_sup_norms(n, step)[0];
        let ratio = if sup_a1 > 0.0 {
            windowed / (sup_a1 * sup_a1)
        } else {
            0.0
        };
        rows.push(MagneticWindowRow {
            n,
            windowed,
            sup_a1,
            ratio,
            gradient,
        });
    }
    Ok(rows)
}
