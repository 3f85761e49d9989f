//! Arclength-parametrised reference curves reconstructed from curvature.

use crate::error::{Error, Result};

use super::curvature::CurvatureProfile;

/// Single Simpson panel of `γ` over `[s0, s1]`.
#[inline]
fn simpson_panel<F: Fn(f64) -> f64>(f: F, s0: f64, s1: f64) -> f64 {
    (s1 - s0) / 6.0 * (f(s0) + 4.0 * f(0.5 * (s0 + s1)) + f(s1))
}

/// Sampled reference curve `s ↦ (a(s), b(s))` on a uniform grid over `[-L, L]`.
///
/// `a_dot`/`b_dot` are the unit tangent, `a_ddot`/`b_ddot` are central
/// differences of the tangent samples, and `gamma` holds the profile values
/// the curve was reconstructed from.
#[derive(Debug, Clone)]
pub struct ParametricCurve {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub a_dot: Vec<f64>,
    pub b_dot: Vec<f64>,
    pub a_ddot: Vec<f64>,
    pub b_ddot: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Tangent angle; `(a_dot, b_dot) = (cos θ, sin θ)`.
    pub theta: Vec<f64>,
    pub step: f64,
}

/// Maximum absolute residuals of the unit-speed identity, its derivative,
/// and `γ² = ä² + b̈²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResiduals {
    pub r_ab: f64,
    pub r_adot: f64,
    pub r_id: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        self.r_ab.max(self.r_adot).max(self.r_id)
    }
}

impl ParametricCurve {
    /// Build from explicit samples; second derivatives are taken as given.
    #[allow(clippy::too_many_arguments)]
    pub fn from_samples(
        s: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        a_dot: Vec<f64>,
        b_dot: Vec<f64>,
        a_ddot: Vec<f64>,
        b_ddot: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let n = s.len();
        if n < 2
            || [&a, &b, &a_dot, &b_dot, &a_ddot, &b_ddot, &gamma]
                .iter()
                .any(|v| v.len() != n)
        {
            return Err(Error::Domain(
                "curve sample arrays must have equal length >= 2".into(),
            ));
        }
        let theta = a_dot.iter().zip(&b_dot).map(|(c, s)| s.atan2(*c)).collect();
        let step = s[1] - s[0];
        Ok(Self {
            s,
            a,
            b,
            a_dot,
            b_dot,
            a_ddot,
            b_ddot,
            gamma,
            theta,
            step,
        })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Curvature recomputed from the samples as `ḃä − ȧb̈`.
    pub fn curvature_from_samples(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.b_dot[i] * self.a_ddot[i] - self.a_dot[i] * self.b_ddot[i])
            .collect()
    }

    pub fn index_of_origin(&self) -> usize {
        self.s
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Reconstruct the unit-speed curve with curvature `profile` on `[-L, L]`.
///
/// The tangent angle is `θ(s) = −∫₀ˢ γ`, so that `ḃä − ȧb̈ = γ`. The curve is
/// anchored at `(a, b)(0) = (0, 0)` with tangent `(1, 0)`. Angles and
/// positions are integrated panel by panel with Simpson's rule using the
/// closed-form `γ` at panel midpoints, which gives fourth-order accuracy at
/// every node. The step is shrunk so that `L / h` is an integer.
pub fn curve_from_curvature(
    profile: &CurvatureProfile,
    half_length: f64,
    h: f64,
) -> Result<ParametricCurve> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!(
            "curve step must be positive, got {h}"
        )));
    }
    if !(half_length > 0.0 && half_length.is_finite()) {
        return Err(Error::Domain(format!(
            "half length must be positive, got {half_length}"
        )));
    }
    profile.check()?;
    let half = (half_length / h).ceil().max(1.0) as usize;
    let step = half_length / half as f64;
    let n = 2 * half + 1;
    let s: Vec<f64> = (0..n).map(|i| (i as f64 - half as f64) * step).collect();
    let gamma: Vec<f64> = s.iter().map(|&x| profile.gamma(x)).collect();
    if let Some(bad) = gamma.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite curvature at s = {}",
            s[bad]
        )));
    }

    let g = |x: f64| profile.gamma(x);
    let mut theta = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    // outward from the anchor, forward then backward
    for i in half..n - 1 {
        let (s0, s1) = (s[i], s[i + 1]);
        let mid = 0.5 * (s0 + s1);
        let th_mid = theta[i] - simpson_panel(g, s0, mid);
        theta[i + 1] = theta[i] - simpson_panel(g, s0, s1);
        a[i + 1] =
            a[i] + (s1 - s0) / 6.0 * (theta[i].cos() + 4.0 * th_mid.cos() + theta[i + 1].cos());
        b[i + 1] =
            b[i] + (s1 - s0) / 6.0 * (theta[i].sin() + 4.0 * th_mid.sin() + theta[i + 1].sin());
    }
    for i in (1..=half).rev() {
        let (s0, s1) = (s[i - 1], s[i]);
        let mid = 0.5 * (s0 + s1);
        let th_mid = theta[i] + simpson_panel(g, mid, s1);
        theta[i - 1] = theta[i] + simpson_panel(g, s0, s1);
        a[i - 1] =
            a[i] - (s1 - s0) / 6.0 * (theta[i - 1].cos() + 4.0 * th_mid.cos() + theta[i].cos());
        b[i - 1] =
            b[i] - (s1 - s0) / 6.0 * (theta[i - 1].sin() + 4.0 * th_mid.sin() + theta[i].sin());
    }

    let a_dot: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let b_dot: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let a_ddot = differentiate(&a_dot, step);
    let b_ddot = differentiate(&b_dot, step);

    Ok(ParametricCurve {
        s,
        a,
        b,
        a_dot,
        b_dot,
        a_ddot,
        b_ddot,
        gamma,
        theta,
        step,
    })
}

/// Second-order finite differences (central inside, one-sided at the ends).
fn differentiate(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let d = (v[1] - v[0]) / h;
            out.fill(d);
        }
        return out;
    }
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    out
}

/// Maximum residuals of `ȧ² + ḃ² = 1`, `ȧä + ḃb̈ = 0` and `γ² = ä² + b̈²` over all samples.
pub fn frame_residuals(curve: &ParametricCurve) -> FrameResiduals {
    let mut r = FrameResiduals {
        r_ab: 0.0,
        r_adot: 0.0,
        r_id: 0.0,
    };
    for i in 0..curve.len() {
        let (ad, bd, add, bdd) = (
            curve.a_dot[i],
            curve.b_dot[i],
            curve.a_ddot[i],
            curve.b_ddot[i],
        );
        let g = curve.gamma[i];
        r.r_ab = r.r_ab.max((ad * ad + bd * bd - 1.0).abs());
        r.r_adot = r.r_adot.max((ad * add + bd * bdd).abs());
        r.r_id = r.r_id.max((g * g - (add * add + bdd * bdd)).abs());
    }
    r
}
