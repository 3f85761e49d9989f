use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::hardy_constant_curved;
use crate::assembly::StripGrid;
use crate::eigen::SolverOptions;
use crate::error::{Error, Result};
use crate::geometry::{CurvatureProfile, WaveguideGeometry, DEFAULT_CURVE_STEP};
use crate::magnetic::{pullback, Potential};

/// Width of the smoothed absolute value `√(x² + ε²)`.
pub const SMOOTHING_EPS: f64 = 1e-8;

/// Safety factor applied to the numerical Hardy constant.
pub const HARDY_SAFETY: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsBundle {
    pub width: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `‖γ‖∞` of the profile on the whole line.
    pub sup_gamma: f64,
    pub sup_a1: f64,
    pub sup_a2: f64,
    /// `C_Ã`
    pub hardy_constant: f64,
    pub s: Vec<f64>,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    /// Piecewise derivatives, one-sided suprema at sign changes.
    pub rho1_dot: Vec<f64>,
    pub rho1_ddot: Vec<f64>,
    /// Same quantities for the surrogate `√(x² + ε²)` in place of `|x|`.
    pub rho1_smooth: Vec<f64>,
    pub rho1_dot_smooth: Vec<f64>,
    pub rho1_ddot_smooth: Vec<f64>,
    pub sup_rho1: f64,
}

impl ConstantsBundle {
    pub fn certification_possible(&self) -> bool {
        self.sup_rho1 < 1.0
    }
}

fn alphas(d: f64, g: f64, a: f64) -> (f64, f64) {
    let q = 1.0 - d * g;
    let first = d * (2.0 + d * g) / q + d * a + d / (2.0 * q.powi(3));
    let second = d * a + (2.0 * d * a + 1.0) / (2.0 * q);
    let alpha2 = 2.0 * d * a
        + (2.0 * d * a + 1.0) / (2.0 * q)
        + d / (2.0 * q.powi(3))
        + d * d / (4.0 * q.powi(4))
        + 1.0 / (4.0 * q * q);
    (first.max(second), alpha2)
}

fn sign_options(prev: f64, x: f64, next: f64) -> &'static [f64] {
    let crossing = x == 0.0 || prev * x < 0.0 || x * next < 0.0;
    if crossing {
        &[1.0, -1.0]
    } else if x > 0.0 {
        &[1.0]
    } else {
        &[-1.0]
    }
}

/// `α₁, α₂` and the sampled `ρ` functions on `s ∈ [−S, S]`, `S = max(L, extent)`.
///
/// Beyond the truncated strip `|s| > L` the factor `sup_u(ã₁² + ã₂²)` keeps its value at `s = ±L`.
pub fn constants_bundle(
    geom: &WaveguideGeometry,
    pot: &dyn Potential,
    hardy_constant: f64,
    step: f64,
    extent: f64,
) -> Result<ConstantsBundle> {
    let d = geom.width;
    if !(d > 0.0) {
        return Err(Error::Domain("width must be positive".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Domain("sampling step must be positive".into()));
    }
    let g = geom.profile.sup_abs();
    if d * g >= 1.0 {
        return Err(Error::Precondition(format!("d‖γ‖∞ = {} ≥ 1", d * g)));
    }
    let pb = pullback(pot, geom)?;
    let l = geom.half_length;
    let nu = ((d / step).ceil() as usize).max(1);
    let a_sq_at = |s: f64| -> (f64, [f64; 2]) {
        let f = geom.frame(s.clamp(-l, l));
        let mut best = 0.0f64;
        let mut sup = [0.0f64; 2];
        for j in 0..=nu {
            let c = pb.components_at(&f, d * j as f64 / nu as f64).cartesian;
            best = best.max(c[0] * c[0] + c[1] * c[1]);
            sup[0] = sup[0].max(c[0].abs());
            sup[1] = sup[1].max(c[1].abs());
        }
        (best, sup)
    };

    let big = l.max(extent);
    let n = ((2.0 * big / step).round() as usize).max(2);
    let s: Vec<f64> = (0..=n)
        .map(|i| -big + 2.0 * big * i as f64 / n as f64)
        .collect();
    let mut a_sq = Vec::with_capacity(s.len());
    let mut sup_a = [0.0f64; 2];
    let end_lo = a_sq_at(-l);
    let end_hi = a_sq_at(l);
    for &si in &s {
        let (v, sup) = if si < -l {
            end_lo
        } else if si > l {
            end_hi
        } else {
            a_sq_at(si)
        };
        sup_a[0] = sup_a[0].max(sup[0]);
        sup_a[1] = sup_a[1].max(sup[1]);
        a_sq.push(v);
    }
    let a_norm = sup_a[0].hypot(sup_a[1]);
    let (alpha1, alpha2) = alphas(d, g, a_norm);

    let p = &geom.profile;
    let jets: Vec<[f64; 4]> = s
        .iter()
        .map(|&x| {
            let [g0, g1, g2] = p.jet(x);
            [g0, g1, g2, p.derivative(x, 3)]
        })
        .collect();
    let m = s.len();
    let mut out = ConstantsBundle {
        width: d,
        alpha1,
        alpha2,
        sup_gamma: g,
        sup_a1: sup_a[0],
        sup_a2: sup_a[1],
        hardy_constant,
        s: s.clone(),
        rho1: Vec::with_capacity(m),
        rho2: Vec::with_capacity(m),
        rho1_dot: Vec::with_capacity(m),
        rho1_ddot: Vec::with_capacity(m),
        rho1_smooth: Vec::with_capacity(m),
        rho1_dot_smooth: Vec::with_capacity(m),
        rho1_ddot_smooth: Vec::with_capacity(m),
        sup_rho1: 0.0,
    };
    let e2 = SMOOTHING_EPS * SMOOTHING_EPS;
    for i in 0..m {
        let [g0, g1, g2, g3] = jets[i];
        let prev = jets[i.saturating_sub(1)];
        let next = jets[(i + 1).min(m - 1)];
        let w = g0.abs() + g1.abs();
        let rho1 = 2.0 * alpha1 * w;
        let rho2 = 2.0 * alpha1 * a_sq[i] * w + alpha2 * (g0.abs() + g0 * g0 + g1.abs() + g1 * g1);
        let mut dot = 0.0f64;
        let mut ddot = f64::NEG_INFINITY;
        for &sg in sign_options(prev[0], g0, next[0]) {
            for &sd in sign_options(prev[1], g1, next[1]) {
                dot = dot.max((2.0 * alpha1 * (sg * g1 + sd * g2)).abs());
                ddot = ddot.max(2.0 * alpha1 * (sg * g2 + sd * g3));
            }
        }
        let r0 = (g0 * g0 + e2).sqrt();
        let r1 = (g1 * g1 + e2).sqrt();
        let rho1_s = 2.0 * alpha1 * (r0 + r1);
        let dot_s = 2.0 * alpha1 * (g0 * g1 / r0 + g1 * g2 / r1);
        let ddot_s = 2.0
            * alpha1
            * (g1 * g1 * e2 / r0.powi(3) + g0 * g2 / r0 + g2 * g2 * e2 / r1.powi(3) + g1 * g3 / r1);
        out.sup_rho1 = out.sup_rho1.max(rho1);
        out.rho1.push(rho1);
        out.rho2.push(rho2);
        out.rho1_dot.push(dot);
        out.rho1_ddot.push(ddot);
        out.rho1_smooth.push(rho1_s);
        out.rho1_dot_smooth.push(dot_s);
        out.rho1_ddot_smooth.push(ddot_s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    /// `sup ρ₁ < 1`; when false every margin is `−∞` and nothing passes.
    pub possible: bool,
    pub pass: bool,
    /// `min_s` of `C/(1+s²) −` left side, piecewise `ρ̇₁, ρ̈₁`.
    pub margin: f64,
    pub worst_s: f64,
    pub pass_smoothed: bool,
    pub margin_smoothed: f64,
    /// Same check with the curvature term divided by `(1 − ρ₁)` instead of `(1 − ρ₁)^{3/2}`.
    pub pass_corrected: bool,
    pub margin_corrected: f64,
}

impl Certification {
    pub fn impossible() -> Self {
        Self {
            possible: false,
            pass: false,
            margin: f64::NEG_INFINITY,
            worst_s: f64::NAN,
            pass_smoothed: false,
            margin_smoothed: f64::NEG_INFINITY,
            pass_corrected: false,
            margin_corrected: f64::NEG_INFINITY,
        }
    }
}

fn slack(c: f64, s: f64, d: f64, rho1: f64, dot: f64, ddot: f64, rho2: f64, power: f64) -> f64 {
    let w = 1.0 / (1.0 + s * s);
    let q = 1.0 - rho1;
    let lhs = c * rho1 * w
        + 0.25 * (2.0 * q * ddot + dot * dot) / q.powf(power)
        + PI * PI * rho1 / (d * d)
        + rho2;
    c * w - lhs
}

/// Pointwise check of the `β₀` inequality on the bundle's sample grid.
pub fn certify_beta0(bundle: &ConstantsBundle, d: f64) -> Certification {
    if !bundle.certification_possible() || !bundle.rho1_smooth.iter().all(|r| *r < 1.0) {
        return Certification::impossible();
    }
    let c = bundle.hardy_constant;
    let mut margin = f64::INFINITY;
    let mut worst_s = f64::NAN;
    let mut smooth = f64::INFINITY;
    let mut corrected = f64::INFINITY;
    for i in 0..bundle.s.len() {
        let s = bundle.s[i];
        let (r1, r2) = (bundle.rho1[i], bundle.rho2[i]);
        let v = slack(
            c,
            s,
            d,
            r1,
            bundle.rho1_dot[i],
            bundle.rho1_ddot[i],
            r2,
            1.5,
        );
        if v < margin {
            margin = v;
            worst_s = s;
        }
        let vs = slack(
            c,
            s,
            d,
            bundle.rho1_smooth[i],
            bundle.rho1_dot_smooth[i],
            bundle.rho1_ddot_smooth[i],
            r2,
            1.5,
        );
        smooth = smooth.min(vs);
        corrected = corrected.min(slack(
            c,
            s,
            d,
            r1,
            bundle.rho1_dot[i],
            bundle.rho1_ddot[i],
            r2,
            1.0,
        ));
    }
    Certification {
        possible: true,
        pass: margin > 0.0,
        margin,
        worst_s,
        pass_smoothed: smooth > 0.0,
        margin_smoothed: smooth,
        pass_corrected: corrected > 0.0,
        margin_corrected: corrected,
    }
}

/// Where `C_Ã` comes from during a search over curvature amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HardySource {
    Fixed(f64),
    /// `0.8 · c̃` from the Hardy pencil of each candidate geometry.
    Computed {
        grid: StripGrid,
        opts: SolverOptions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSearch {
    /// Largest amplitude found to certify.
    pub beta_star: f64,
    /// Smallest amplitude found not to certify (`None` when the upper bracket certifies).
    pub upper: Option<f64>,
    /// `(amplitude, C, pass)` for every evaluation, in order.
    pub trials: Vec<(f64, f64, bool)>,
}

/// Bisection over the amplitude of `profile` for the certification boundary.
#[allow(clippy::too_many_arguments)]
pub fn beta_star(
    profile: &CurvatureProfile,
    pot: &dyn Potential,
    width: f64,
    half_length: f64,
    source: &HardySource,
    step: f64,
    extent: f64,
    rel_tol: f64,
) -> Result<BetaSearch> {
    let top = profile.amplitude.abs();
    if top == 0.0 {
        return Err(Error::Domain("amplitude bracket is empty".into()));
    }
    let mut trials = Vec::new();
    let mut check = |amp: f64| -> Result<bool> {
        let prof = profile.scaled(amp / top);
        let geom = match WaveguideGeometry::new(prof, width, half_length, DEFAULT_CURVE_STEP) {
            Ok(g) if g.ensure_valid().is_ok() => g,
            Ok(_) => {
                trials.push((amp, f64::NAN, false));
                return Ok(false);
            }
            Err(e) => return Err(e),
        };
        if width * prof.sup_abs() >= 1.0 {
            trials.push((amp, f64::NAN, false));
            return Ok(false);
        }
        let c = match source {
            HardySource::Fixed(c) => *c,
            HardySource::Computed { grid, opts } => {
                HARDY_SAFETY * hardy_constant_curved(&geom, pot, grid, opts)?.constant
            }
        };
        let bundle = constants_bundle(&geom, pot, c, step, extent)?;
        let pass = certify_beta0(&bundle, width).pass;
        trials.push((amp, c, pass));
        Ok(pass)
    };
    if check(top)? {
        return Ok(BetaSearch {
            beta_star: top,
            upper: None,
            trials,
        });
    }
    let (mut lo, mut hi) = (0.0, top);
    // walk down geometrically first so the bisection starts from a tight bracket
    while hi > top * 1e-12 {
        let mid = hi / 16.0;
        if check(mid)? {
            lo = mid;
            break;
        }
        hi = mid;
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if check(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BetaSearch {
        beta_star: lo,
        upper: Some(hi),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetic::VectorPotential;

    #[test]
    fn flat_constants() {
        let geom = WaveguideGeometry::straight(1.0, 5.0).unwrap();
        let b = constants_bundle(&geom, &VectorPotential::zero(), 0.3, 0.05, 10.0).unwrap();
        assert_eq!(b.alpha1, 2.5);
        assert_eq!(b.alpha2, 1.5);
        assert!(b.rho1.iter().chain(&b.rho2).all(|v| *v == 0.0));
        let c = certify_beta0(&b, 1.0);
        assert!(c.pass && c.possible);
        assert!((c.margin - 0.3 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn rho1_is_linear_in_amplitude() {
        let pot = VectorPotential::zero();
        let g1 = WaveguideGeometry::new(CurvatureProfile::gaussian(0.1, 0.0, 2.0), 1.0, 8.0, 1e-2)
            .unwrap();
        let g2 = WaveguideGeometry::new(CurvatureProfile::gaussian(0.2, 0.0, 2.0), 1.0, 8.0, 1e-2)
            .unwrap();
        let b1 = constants_bundle(&g1, &pot, 0.1, 0.05, 8.0).unwrap();
        let b2 = constants_bundle(&g2, &pot, 0.1, 0.05, 8.0).unwrap();
        // α₁ moves with ‖γ‖∞; divide it out
        for (r1, r2) in b1.rho1.iter().zip(&b2.rho1) {
            assert!((r2 / b2.alpha1 - 2.0 * r1 / b1.alpha1).abs() < 1e-14);
        }
    }

    #[test]
    fn large_curvature_is_uncertifiable() {
        let geom =
            WaveguideGeometry::new(CurvatureProfile::gaussian(0.5, 0.0, 1.0), 1.0, 6.0, 1e-2)
                .unwrap();
        let b = constants_bundle(&geom, &VectorPotential::zero(), 0.1, 0.05, 6.0).unwrap();
        assert!(!b.certification_possible());
        let c = certify_beta0(&b, 1.0);
        assert!(!c.possible && !c.pass);
    }
}
