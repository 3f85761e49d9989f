//! Closed-form curvature families.
//!
//! Every family is `amplitude * shape((s - center) / scale)`, so the k-th
//! derivative is `amplitude * shape^(k)(t) / scale^k`. Derivatives come from
//! the registry below, never from numerical differentiation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureFamily {
    /// `exp(-t^2)`
    GaussianBump,
    /// `1 / (1 + t^2)`
    RationalDecay,
    /// `(1 - t^2)^4` on `|t| < 1`, zero outside (C^3).
    CompactBump,
    /// Identically zero: the straight strip.
    Zero,
    /// Constant curvature (circular arcs). Reference geometry only; it is
    /// not asymptotically straight.
    Constant,
}

impl CurvatureFamily {
    pub fn tag(self) -> &'static str {
        match self {
            Self::GaussianBump => "gaussian-bump",
            Self::RationalDecay => "rational-decay",
            Self::CompactBump => "compact-bump",
            Self::Zero => "zero",
            Self::Constant => "constant",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "gaussian-bump" => Ok(Self::GaussianBump),
            "rational-decay" => Ok(Self::RationalDecay),
            "compact-bump" => Ok(Self::CompactBump),
            "zero" => Ok(Self::Zero),
            "constant" => Ok(Self::Constant),
            other => Err(Error::Config(format!("unknown curvature family `{other}`"))),
        }
    }

    /// Families that decay at infinity (the ones condition (a) can hold for).
    pub fn is_asymptotically_straight(self) -> bool {
        !matches!(self, Self::Constant)
    }

    /// `shape^(order)(t)` for the unit-amplitude, unit-scale profile.
    fn shape(self, t: f64, order: u8) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::GaussianBump => {
                let g = (-t * t).exp();
                match order {
                    0 => g,
                    1 => -2.0 * t * g,
                    2 => (4.0 * t * t - 2.0) * g,
                    _ => (12.0 * t - 8.0 * t * t * t) * g,
                }
            }
            Self::RationalDecay => {
                let q = 1.0 + t * t;
                match order {
                    0 => 1.0 / q,
                    1 => -2.0 * t / (q * q),
                    2 => (6.0 * t * t - 2.0) / (q * q * q),
                    _ => 24.0 * t * (1.0 - t * t) / (q * q * q * q),
                }
            }
            Self::CompactBump => {
                if t.abs() >= 1.0 {
                    return 0.0;
                }
                let w = 1.0 - t * t;
                match order {
                    0 => w.powi(4),
                    1 => -8.0 * t * w.powi(3),
                    2 => w * w * (56.0 * t * t - 8.0),
                    _ => 48.0 * t * w * (3.0 - 7.0 * t * t),
                }
            }
        }
    }
}

/// Signed curvature profile `γ(s)` with closed-form derivatives up to third order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub family: CurvatureFamily,
    pub amplitude: f64,
    pub center: f64,
    pub scale: f64,
}

impl CurvatureProfile {
    pub fn new(family: CurvatureFamily, amplitude: f64, center: f64, scale: f64) -> Result<Self> {
        let p = Self {
            family,
            amplitude,
            center,
            scale,
        };
        p.check()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        Self {
            family: CurvatureFamily::Zero,
            amplitude: 0.0,
            center: 0.0,
            scale: 1.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            family: CurvatureFamily::Constant,
            amplitude: value,
            center: 0.0,
            scale: 1.0,
        }
    }

    pub fn gaussian(amplitude: f64, center: f64, scale: f64) -> Self {
        Self {
            family: CurvatureFamily::GaussianBump,
            amplitude,
            center,
            scale,
        }
    }

    pub fn rational(amplitude: f64, center: f64, scale: f64) -> Self {
        Self {
            family: CurvatureFamily::RationalDecay,
            amplitude,
            center,
            scale,
        }
    }

    pub fn compact(amplitude: f64, center: f64, scale: f64) -> Self {
        Self {
            family: CurvatureFamily::CompactBump,
            amplitude,
            center,
            scale,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !self.amplitude.is_finite() || !self.center.is_finite() {
            return Err(Error::Config(
                "curvature amplitude and center must be finite".into(),
            ));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config(format!(
                "curvature scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// Same profile with the amplitude multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            amplitude: self.amplitude * t,
            ..*self
        }
    }

    /// `γ^(order)(s)`; orders above 3 are a configuration error.
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if order > 3 {
            return Err(Error::Config(format!(
                "curvature derivative order {order} not in 0..=3"
            )));
        }
        Ok(self.derivative(s, order))
    }

    /// Unchecked variant of [`eval`](Self::eval) for `order <= 3`.
    #[inline]
    pub fn derivative(&self, s: f64, order: u8) -> f64 {
        debug_assert!(order <= 3);
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let t = (s - self.center) / self.scale;
        self.amplitude * self.family.shape(t, order) / self.scale.powi(order as i32)
    }

    #[inline]
    pub fn gamma(&self, s: f64) -> f64 {
        self.derivative(s, 0)
    }

    /// `(γ, γ̇, γ̈)` at `s`.
    #[inline]
    pub fn jet(&self, s: f64) -> [f64; 3] {
        [
            self.derivative(s, 0),
            self.derivative(s, 1),
            self.derivative(s, 2),
        ]
    }

    /// Closed-form sup of `|γ|` over the real line.
    pub fn sup_abs(&self) -> f64 {
        match self.family {
            CurvatureFamily::Zero => 0.0,
            _ => self.amplitude.abs(),
        }
    }
}

/// Evaluate `γ^(order)(s)` for a profile.
pub fn curvature_eval(profile: &CurvatureProfile, s: f64, order: u8) -> Result<f64> {
    profile.eval(s, order)
}
