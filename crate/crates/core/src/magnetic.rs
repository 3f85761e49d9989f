//! Magnetic fields with bounded support, vector potentials and their pullback
//! to strip coordinates.
//!
//! The potential is built in the transverse gauge `a₁ = −∫₀ʸ B(x, t) dt`,
//! `a₂ = 0`, which vanishes identically for `x` outside the support box.
//! Gauge shifts `A ↦ A + ∇χ` are kept symbolically so that their line
//! integrals along grid links are exact differences `χ(end) − χ(start)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frame, WaveguideGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl SupportBox {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn check(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("magnetic support box must be bounded".into()));
        }
        if !(self.x0 < self.x1 && self.y0 < self.y1) {
            return Err(Error::Config(format!(
                "degenerate magnetic support box {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    #[inline]
    fn contains_x(&self, x: f64) -> bool {
        x > self.x0 && x < self.x1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFamily {
    Zero,
    /// Piecewise constant; only its flux enters through Peierls phases.
    ConstantOnBox,
    /// `amplitude · p(ξ) p(η)` with `p(t) = (1 − t²)³` on the box mapped to `[−1, 1]²` (C²).
    SmoothBump,
}

impl FieldFamily {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::ConstantOnBox => "constant-on-box",
            Self::SmoothBump => "smooth-bump",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "zero" => Ok(Self::Zero),
            "constant-on-box" => Ok(Self::ConstantOnBox),
            "smooth-bump" => Ok(Self::SmoothBump),
            other => Err(Error::Config(format!("unknown field family `{other}`"))),
        }
    }
}

#[inline]
fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - t * t).powi(3)
    }
}

#[inline]
fn bump_prime(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        -6.0 * t * (1.0 - t * t).powi(2)
    }
}

/// Antiderivative of [`bump`], clamped to `[−1, 1]`.
#[inline]
fn bump_integral(t: f64) -> f64 {
    let t = t.clamp(-1.0, 1.0);
    let t2 = t * t;
    t * (1.0 - t2 + 0.6 * t2 * t2 - t2 * t2 * t2 / 7.0)
}

/// Scalar magnetic field `B(x, y)` supported in a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticField {
    pub family: FieldFamily,
    pub amplitude: f64,
    pub support: SupportBox,
}

impl MagneticField {
    pub fn new(family: FieldFamily, amplitude: f64, support: SupportBox) -> Result<Self> {
        support.check()?;
        if !amplitude.is_finite() {
            return Err(Error::Config("field amplitude must be finite".into()));
        }
        Ok(Self {
            family,
            amplitude,
            support,
        })
    }

    pub fn zero() -> Self {
        Self {
            family: FieldFamily::Zero,
            amplitude: 0.0,
            support: SupportBox::new(0.0, 1.0, 0.0, 1.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.family == FieldFamily::Zero || self.amplitude == 0.0
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.family == FieldFamily::ConstantOnBox
    }

    /// Same field with amplitude multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            amplitude: self.amplitude * t,
            ..*self
        }
    }

    #[inline]
    fn xi(&self, x: f64) -> f64 {
        let b = &self.support;
        (2.0 * x - b.x0 - b.x1) / (b.x1 - b.x0)
    }

    #[inline]
    fn eta(&self, y: f64) -> f64 {
        let b = &self.support;
        (2.0 * y - b.y0 - b.y1) / (b.y1 - b.y0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.family {
            FieldFamily::Zero => 0.0,
            FieldFamily::ConstantOnBox => {
                if self.support.contains(x, y) {
                    self.amplitude
                } else {
                    0.0
                }
            }
            FieldFamily::SmoothBump => self.amplitude * bump(self.xi(x)) * bump(self.eta(y)),
        }
    }

    /// `∫₀ʸ B(x, t) dt` and its `x`-derivative.
    fn column_integral(&self, x: f64, y: f64) -> (f64, f64) {
        let b = &self.support;
        match self.family {
            FieldFamily::Zero => (0.0, 0.0),
            FieldFamily::ConstantOnBox => {
                if !(x >= b.x0 && x <= b.x1) {
                    return (0.0, 0.0);
                }
                let clip = |t: f64| t.clamp(b.y0, b.y1);
                (self.amplitude * (clip(y) - clip(0.0)), 0.0)
            }
            FieldFamily::SmoothBump => {
                if !b.contains_x(x) {
                    return (0.0, 0.0);
                }
                let half = 0.5 * (b.y1 - b.y0);
                let col = half * (bump_integral(self.eta(y)) - bump_integral(self.eta(0.0)));
                let dxi = 2.0 / (b.x1 - b.x0);
                (
                    self.amplitude * bump(self.xi(x)) * col,
                    self.amplitude * bump_prime(self.xi(x)) * dxi * col,
                )
            }
        }
    }
}

/// Compactly supported scalar `χ(x, y) = amplitude · (1 − ρ²)⁴` for `ρ < 1`,
/// `ρ² = ((x − cx)/rx)² + ((y − cy)/ry)²`. C³, so `∇χ` is C².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction {
    pub amplitude: f64,
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl GaugeFunction {
    pub fn new(amplitude: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> Result<Self> {
        let g = Self {
            amplitude,
            cx,
            cy,
            rx,
            ry,
        };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<()> {
        let ok = [self.amplitude, self.cx, self.cy, self.rx, self.ry]
            .iter()
            .all(|v| v.is_finite())
            && self.rx > 0.0
            && self.ry > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "gauge function needs finite centre and positive finite radii".into(),
            ))
        }
    }

    /// Parse `bump:amplitude,cx,cy,rx,ry`.
    pub fn parse(spec: &str) -> Result<Self> {
        let body = spec
            .strip_prefix("bump:")
            .ok_or_else(|| Error::Config(format!("gauge spec `{spec}` must start with `bump:`")))?;
        let vals: Vec<f64> = body
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("gauge spec `{spec}`: {e}")))?;
        match vals[..] {
            [a, cx, cy, rx, ry] => Self::new(a, cx, cy, rx, ry),
            _ => Err(Error::Config(format!(
                "gauge spec `{spec}` needs 5 numbers"
            ))),
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            amplitude: -self.amplitude,
            ..*self
        }
    }

    #[inline]
    fn local(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (px, py) = ((x - self.cx) / self.rx, (y - self.cy) / self.ry);
        (px, py, 1.0 - px * px - py * py)
    }

    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (_, _, q) = self.local(x, y);
        if q <= 0.0 {
            0.0
        } else {
            self.amplitude * q.powi(4)
        }
    }

    #[inline]
    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let (px, py, q) = self.local(x, y);
        if q <= 0.0 {
            return [0.0, 0.0];
        }
        let c = self.amplitude * 4.0 * q.powi(3);
        [c * (-2.0 * px / self.rx), c * (-2.0 * py / self.ry)]
    }

    /// Hessian `[[χ_xx, χ_xy], [χ_xy, χ_yy]]`.
    pub fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let (px, py, q) = self.local(x, y);
        if q <= 0.0 {
            return [[0.0; 2]; 2];
        }
        let (qx, qy) = (-2.0 * px / self.rx, -2.0 * py / self.ry);
        let (qxx, qyy) = (-2.0 / (self.rx * self.rx), -2.0 / (self.ry * self.ry));
        let a = self.amplitude;
        let xx = a * (12.0 * q * q * qx * qx + 4.0 * q.powi(3) * qxx);
        let yy = a * (12.0 * q * q * qy * qy + 4.0 * q.powi(3) * qyy);
        let xy = a * 12.0 * q * q * qx * qy;
        [[xx, xy], [xy, yy]]
    }
}

/// A vector potential in Cartesian components as seen by the discretisation.
///
/// `smooth_components` is integrated along grid links with the midpoint rule;
/// `gauge_value` is the scalar whose gradient is the rest of the potential and
/// is integrated exactly.
pub trait Potential: Sync {
    fn smooth_components(&self, x: f64, y: f64) -> [f64; 2];

    fn gauge_value(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }

    fn gauge_gradient(&self, _x: f64, _y: f64) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn components(&self, x: f64, y: f64) -> [f64; 2] {
        let s = self.smooth_components(x, y);
        let g = self.gauge_gradient(x, y);
        [s[0] + g[0], s[1] + g[1]]
    }

    /// True when the potential is identically zero (lets assembly skip phases).
    fn is_zero(&self) -> bool {
        false
    }
}

/// `A = A_transverse(B) + Σ ∇χ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPotential {
    pub field: MagneticField,
    pub gauges: Vec<GaugeFunction>,
}

impl VectorPotential {
    pub fn zero() -> Self {
        Self {
            field: MagneticField::zero(),
            gauges: Vec::new(),
        }
    }

    /// `[[∂a₁/∂x, ∂a₁/∂y], [∂a₂/∂x, ∂a₂/∂y]]`.
    pub fn partials(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let (_, dcol) = self.field.column_integral(x, y);
        let mut out = [[-dcol, -self.field.eval(x, y)], [0.0, 0.0]];
        for g in &self.gauges {
            let h = g.hessian(x, y);
            out[0][0] += h[0][0];
            out[0][1] += h[0][1];
            out[1][0] += h[1][0];
            out[1][1] += h[1][1];
        }
        out
    }

    /// `∂a₂/∂x − ∂a₁/∂y` from the analytic partials.
    pub fn curl(&self, x: f64, y: f64) -> f64 {
        let p = self.partials(x, y);
        p[1][0] - p[0][1]
    }

    /// x-interval outside which `a_j` and all their first partials vanish.
    pub fn x_support(&self) -> (f64, f64) {
        let mut lo = self.field.support.x0;
        let mut hi = self.field.support.x1;
        if self.field.is_zero() {
            lo = f64::INFINITY;
            hi = f64::NEG_INFINITY;
        }
        for g in &self.gauges {
            lo = lo.min(g.cx - g.rx);
            hi = hi.max(g.cx + g.rx);
        }
        (lo, hi)
    }
}

impl Potential for VectorPotential {
    fn smooth_components(&self, x: f64, y: f64) -> [f64; 2] {
        let (col, _) = self.field.column_integral(x, y);
        [-col, 0.0]
    }

    fn gauge_value(&self, x: f64, y: f64) -> f64 {
        self.gauges.iter().map(|g| g.value(x, y)).sum()
    }

    fn gauge_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        self.gauges.iter().fold([0.0, 0.0], |acc, g| {
            let d = g.gradient(x, y);
            [acc[0] + d[0], acc[1] + d[1]]
        })
    }

    fn is_zero(&self) -> bool {
        self.field.is_zero() && self.gauges.iter().all(|g| g.amplitude == 0.0)
    }
}

/// Transverse-gauge potential of `field`.
pub fn gauge_from_field(field: &MagneticField) -> Result<VectorPotential> {
    field.support.check()?;
    Ok(VectorPotential {
        field: *field,
        gauges: Vec::new(),
    })
}

/// `A + ∇χ`.
pub fn gauge_shift(potential: &VectorPotential, chi: &GaugeFunction) -> Result<VectorPotential> {
    chi.check()?;
    let mut out = potential.clone();
    out.gauges.push(*chi);
    Ok(out)
}

/// The frame components `(A∥, A⊥)` of a pulled-back potential, read as a
/// potential on the straight strip with `(x, y) = (s, u)`. This is the
/// potential of the flat comparison form `q̃`; on a straight strip it is `A`.
pub struct StraightenedPotential<'a> {
    pub inner: &'a dyn Potential,
    pub geom: &'a WaveguideGeometry,
}

impl Potential for StraightenedPotential<'_> {
    fn smooth_components(&self, s: f64, u: f64) -> [f64; 2] {
        let s = s.clamp(-self.geom.half_length, self.geom.half_length);
        let f = self.geom.frame(s);
        let (x, y) = f.point(u);
        let [a1, a2] = self.inner.components(x, y);
        [f.a_dot * a1 + f.b_dot * a2, -f.b_dot * a1 + f.a_dot * a2]
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

/// Components of `Ã` at one point of the strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulledBackComponents {
    /// `(ã₁, ã₂)`
    pub cartesian: [f64; 2],
    /// `A∥ = ȧã₁ + ḃã₂`
    pub parallel: f64,
    /// `A⊥ = −ḃã₁ + ȧã₂`
    pub normal: f64,
    /// `A_s = (1 + uγ) A∥`
    pub metric_s: f64,
    /// `A_u = A⊥`
    pub metric_u: f64,
}

/// `Ã(s, u) = A(x(s, u), y(s, u))` together with its frame and metric components.
pub struct PulledBackPotential<'a> {
    pub geom: &'a WaveguideGeometry,
    pub potential: &'a dyn Potential,
}

impl<'a> PulledBackPotential<'a> {
    pub fn components_at(&self, frame: &Frame, u: f64) -> PulledBackComponents {
        let (x, y) = frame.point(u);
        let [a1, a2] = self.potential.components(x, y);
        let parallel = frame.a_dot * a1 + frame.b_dot * a2;
        let normal = -frame.b_dot * a1 + frame.a_dot * a2;
        PulledBackComponents {
            cartesian: [a1, a2],
            parallel,
            normal,
            metric_s: frame.jacobian(u) * parallel,
            metric_u: normal,
        }
    }

    pub fn eval(&self, s: f64, u: f64) -> Result<PulledBackComponents> {
        self.geom.map_point(s, u)?;
        Ok(self.components_at(&self.geom.frame(s), u))
    }

    /// Sup norms `(‖ã₁‖∞, ‖ã₂‖∞)` over `s ∈ [s0, s1]`, `u ∈ [0, d]` on a sample grid.
    pub fn sup_norms_on(&self, s0: f64, s1: f64, step: f64) -> [f64; 2] {
        let ns = (((s1 - s0) / step).ceil() as usize).max(1);
        let nu = ((self.geom.width / step).ceil() as usize).max(1);
        let mut sup = [0.0f64; 2];
        for i in 0..=ns {
            let s = s0 + (s1 - s0) * i as f64 / ns as f64;
            let f = self.geom.frame(s);
            for j in 0..=nu {
                let u = self.geom.width * j as f64 / nu as f64;
                let c = self.components_at(&f, u);
                sup[0] = sup[0].max(c.cartesian[0].abs());
                sup[1] = sup[1].max(c.cartesian[1].abs());
            }
        }
        sup
    }

    /// Sup norms over the whole truncated strip.
    pub fn sup_norms(&self, step: f64) -> [f64; 2] {
        let l = self.geom.half_length;
        self.sup_norms_on(-l, l, step)
    }

    /// Sup norms over the window `ω_n = {s ∈ (n, 2n)}`.
    pub fn window_sup_norms(&self, n: f64, step: f64) -> [f64; 2] {
        self.sup_norms_on(n, 2.0 * n, step)
    }

    /// Whether `Ã` vanishes on the two truncation ends `s = ±L`.
    pub fn vanishes_at_ends(&self, step: f64) -> bool {
        let l = self.geom.half_length;
        let ends = [
            self.sup_norms_on(-l, -l, step),
            self.sup_norms_on(l, l, step),
        ];
        ends.iter().all(|s| s[0] == 0.0 && s[1] == 0.0)
    }

    /// `∫ A·dl` along the straight link from `(s0, u0)` to `(s1, u1)` of the
    /// parameter plane (one coordinate fixed): midpoint rule for the smooth
    /// part, exact difference for the gauge part.
    pub fn link_integral(&self, from: (&Frame, f64), to: (&Frame, f64), mid: (&Frame, f64)) -> f64 {
        let (fa, ua) = from;
        let (fb, ub) = to;
        let (fm, um) = mid;
        let (xm, ym) = fm.point(um);
        let a = self.potential.smooth_components(xm, ym);
        // tangent of the image of the link at its midpoint times its parameter length
        let ds = fb.s - fa.s;
        let du = ub - ua;
        let jm = fm.jacobian(um);
        let dx = fm.a_dot * jm * ds - fm.b_dot * du;
        let dy = fm.b_dot * jm * ds + fm.a_dot * du;
        let mut v = a[0] * dx + a[1] * dy;
        let (x0, y0) = fa.point(ua);
        let (x1, y1) = fb.point(ub);
        v += self.potential.gauge_value(x1, y1) - self.potential.gauge_value(x0, y0);
        v
    }
}

/// Pull `potential` back to the strip coordinates of `geom`.
pub fn pullback<'a>(
    potential: &'a dyn Potential,
    geom: &'a WaveguideGeometry,
) -> Result<PulledBackPotential<'a>> {
    geom.ensure_valid()?;
    Ok(PulledBackPotential { geom, potential })
}

/// Whether the field is non-zero somewhere on the mapped strip (sampled).
pub fn field_meets_strip(field: &MagneticField, geom: &WaveguideGeometry, step: f64) -> bool {
    if field.is_zero() {
        return false;
    }
    let l = geom.half_length;
    let ns = ((2.0 * l / step).ceil() as usize).max(1);
    let nu = ((geom.width / step).ceil() as usize).max(2);
    (0..=ns).any(|i| {
        let f = geom.frame(-l + 2.0 * l * i as f64 / ns as f64);
        (1..nu).any(|j| {
            let (x, y) = f.point(geom.width * j as f64 / nu as f64);
            field.eval(x, y) != 0.0
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurvatureProfile;

    fn fd_curl(a: &dyn Potential, x: f64, y: f64) -> f64 {
        let h = 1e-5;
        let da2dx = (a.components(x + h, y)[1] - a.components(x - h, y)[1]) / (2.0 * h);
        let da1dy = (a.components(x, y + h)[0] - a.components(x, y - h)[0]) / (2.0 * h);
        da2dx - da1dy
    }

    #[test]
    fn zero_field_zero_potential() {
        let a = gauge_from_field(&MagneticField::zero()).unwrap();
        assert_eq!(a.components(0.3, 0.7), [0.0, 0.0]);
        assert!(a.is_zero());
    }

    #[test]
    fn constant_box_transverse_gauge() {
        let f = MagneticField::new(
            FieldFamily::ConstantOnBox,
            1.0,
            SupportBox::new(0.0, 1.0, 0.0, 1.0),
        )
        .unwrap();
        let a = gauge_from_field(&f).unwrap();
        let c = a.components(0.5, 0.5);
        assert!((c[0] + 0.5).abs() < 1e-15 && c[1] == 0.0);
        assert_eq!(a.components(1.5, 0.5), [0.0, 0.0]);
        assert!(f.is_piecewise_constant());
    }

    #[test]
    fn smooth_bump_curl_on_grid() {
        let f = MagneticField::new(
            FieldFamily::SmoothBump,
            1.7,
            SupportBox::new(-1.0, 2.0, -0.5, 1.5),
        )
        .unwrap();
        let a = gauge_from_field(&f).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let x = -2.0 + 5.0 * i as f64 / 49.0;
                let y = -1.5 + 4.0 * j as f64 / 49.0;
                assert!((a.curl(x, y) - f.eval(x, y)).abs() < 1e-12);
                assert!(
                    (fd_curl(&a, x, y) - f.eval(x, y)).abs() < 1e-8,
                    "({x}, {y})"
                );
            }
        }
    }

    #[test]
    fn analytic_partials_match_differences() {
        let f = MagneticField::new(
            FieldFamily::SmoothBump,
            0.8,
            SupportBox::new(-1.0, 1.0, 0.0, 1.0),
        )
        .unwrap();
        let chi = GaugeFunction::new(0.3, 0.2, 0.4, 1.0, 0.7).unwrap();
        let a = gauge_shift(&gauge_from_field(&f).unwrap(), &chi).unwrap();
        let h = 1e-5;
        for (x, y) in [(0.1, 0.3), (-0.4, 0.9), (0.7, -0.2), (0.25, 0.55)] {
            let p = a.partials(x, y);
            for k in 0..2 {
                let dx = (a.components(x + h, y)[k] - a.components(x - h, y)[k]) / (2.0 * h);
                let dy = (a.components(x, y + h)[k] - a.components(x, y - h)[k]) / (2.0 * h);
                assert!((p[k][0] - dx).abs() < 1e-7 && (p[k][1] - dy).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn condition_b_exact_outside_support() {
        let f = MagneticField::new(
            FieldFamily::SmoothBump,
            2.0,
            SupportBox::new(-1.0, 1.0, 0.0, 1.0),
        )
        .unwrap();
        let chi = GaugeFunction::new(0.5, 0.0, 0.5, 2.0, 1.0).unwrap();
        let a = gauge_shift(&gauge_from_field(&f).unwrap(), &chi).unwrap();
        let (lo, hi) = a.x_support();
        for x in [lo - 0.01, hi + 0.01, 10.0, -50.0] {
            for y in [-3.0, 0.0, 0.5, 4.0] {
                assert_eq!(a.components(x, y), [0.0, 0.0]);
                assert_eq!(a.partials(x, y), [[0.0; 2]; 2]);
            }
        }
    }

    #[test]
    fn gauge_shift_keeps_curl() {
        let chi = GaugeFunction::new(0.9, 0.3, 0.1, 1.2, 0.8).unwrap();
        let a = gauge_shift(&VectorPotential::zero(), &chi).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let (x, y) = (-1.5 + 3.0 * i as f64 / 49.0, -1.0 + 2.0 * j as f64 / 49.0);
                assert!(fd_curl(&a, x, y).abs() < 1e-8);
                let g = chi.gradient(x, y);
                assert_eq!(a.components(x, y), g);
            }
        }
    }

    #[test]
    fn double_shift_restores_components() {
        let f = MagneticField::new(
            FieldFamily::SmoothBump,
            1.0,
            SupportBox::new(-1.0, 1.0, 0.0, 1.0),
        )
        .unwrap();
        let a = gauge_from_field(&f).unwrap();
        let chi = GaugeFunction::new(0.7, 0.0, 0.3, 1.0, 1.0).unwrap();
        let back = gauge_shift(&gauge_shift(&a, &chi).unwrap(), &chi.negated()).unwrap();
        for (x, y) in [(0.1, 0.2), (-0.3, 0.8), (0.5, 0.5)] {
            let (p, q) = (a.components(x, y), back.components(x, y));
            assert!((p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14);
        }
        let unchanged =
            gauge_shift(&a, &GaugeFunction::new(0.0, 0.0, 0.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(unchanged.components(0.2, 0.4), a.components(0.2, 0.4));
    }

    #[test]
    fn unbounded_support_rejected() {
        let bad = SupportBox::new(0.0, f64::INFINITY, 0.0, 1.0);
        assert!(MagneticField::new(FieldFamily::SmoothBump, 1.0, bad).is_err());
        assert!(GaugeFunction::new(1.0, 0.0, 0.0, f64::INFINITY, 1.0).is_err());
        assert!(GaugeFunction::parse("bump:1,0,0,1").is_err());
        assert_eq!(GaugeFunction::parse("bump:1,0,0.5,2,1").unwrap().ry, 1.0);
    }

    #[test]
    fn straight_pullback_is_identity() {
        let g = WaveguideGeometry::straight(1.0, 4.0).unwrap();
        let f = MagneticField::new(
            FieldFamily::SmoothBump,
            1.0,
            SupportBox::new(-1.0, 1.0, 0.0, 1.0),
        )
        .unwrap();
        let a = gauge_from_field(&f).unwrap();
        let pb = pullback(&a, &g).unwrap();
        for (s, u) in [(0.2, 0.3), (-0.7, 0.9), (1.5, 0.1)] {
            let c = pb.eval(s, u).unwrap();
            let direct = a.components(s, u);
            assert!((c.parallel - direct[0]).abs() < 1e-12);
            assert!((c.normal - direct[1]).abs() < 1e-12);
            assert!((c.metric_s - direct[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_potential_pulls_back_to_zero() {
        let g =
            WaveguideGeometry::with_defaults(CurvatureProfile::gaussian(0.3, 0.0, 1.0), 1.0, 5.0)
                .unwrap();
        let a = VectorPotential::zero();
        let pb = pullback(&a, &g).unwrap();
        let c = pb.eval(0.4, 0.6).unwrap();
        assert_eq!(
            (c.parallel, c.normal, c.metric_s, c.metric_u),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn rotation_preserves_length_on_curved_strip() {
        let g =
            WaveguideGeometry::with_defaults(CurvatureProfile::gaussian(0.3, 0.0, 1.0), 1.0, 5.0)
                .unwrap();
        let f = MagneticField::new(
            FieldFamily::ConstantOnBox,
            2.0,
            SupportBox::new(-1.0, 1.5, -0.5, 1.0),
        )
        .unwrap();
        let a = gauge_from_field(&f).unwrap();
        let pb = pullback(&a, &g).unwrap();
        for i in 0..=200 {
            let s = -5.0 + 0.05 * i as f64;
            let fr = g.frame(s);
            for j in 0..=16 {
                let c = pb.components_at(&fr, j as f64 / 16.0);
                let lhs = c.cartesian[0].powi(2) + c.cartesian[1].powi(2);
                let rhs = c.parallel.powi(2) + c.normal.powi(2);
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn field_on_strip_detection() {
        let g = WaveguideGeometry::straight(1.0, 5.0).unwrap();
        let inside = MagneticField::new(
            FieldFamily::SmoothBump,
            1.0,
            SupportBox::new(-1.0, 1.0, 0.0, 1.0),
        )
        .unwrap();
        let outside = MagneticField::new(
            FieldFamily::SmoothBump,
            1.0,
            SupportBox::new(-1.0, 1.0, 3.0, 4.0),
        )
        .unwrap();
        assert!(field_meets_strip(&inside, &g, 0.05));
        assert!(!field_meets_strip(&outside, &g, 0.05));
    }
}
