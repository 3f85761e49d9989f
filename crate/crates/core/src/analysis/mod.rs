//! Threshold, bound-state reports, Hardy constants and the explicit
//! quantities behind the absence of discrete spectrum.

mod constants;
mod forms;
mod scan;
mod weyl;

pub use constants::{
    beta_star, certify_beta0, constants_bundle, BetaSearch, Certification, ConstantsBundle,
    HardySource, HARDY_SAFETY, SMOOTHING_EPS,
};
pub use forms::{
    verify_lemma1_identity, verify_perturbation_bound, LemmaCheck, Mode, PerturbationCheck,
    SmoothWeight, TestFunction,
};
pub use scan::{parameter_scan, ScanPoint, ScanRow};
pub use weyl::{
    magnetic_window_study, weyl_decay_study, BumpProfile, MagneticWindowRow, WeylSequenceSpec,
    WeylStudy,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_curved_magnetic, assemble_straight_magnetic, OperatorPair, StripGrid, WeightOperator,
};
use crate::eigen::{count_below, hardy_pencil_min, lowest_eigenpairs, HardyResult, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::WaveguideGeometry;
use crate::magnetic::{pullback, Potential, StraightenedPotential};

/// Bottom of the essential spectrum of the straight strip, `π²/d²`.
pub fn threshold(d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("width must be positive, got {d}")));
    }
    Ok(PI * PI / (d * d))
}

/// Transverse ground energy of the five-point stencil, `(4/h_u²) sin²(π h_u / 2d)`.
///
/// This is where the discrete essential spectrum starts; it tends to `π²/d²` as `h_u → 0`.
pub fn grid_threshold(grid: &StripGrid) -> f64 {
    let x = PI * grid.h_u / (2.0 * grid.width);
    4.0 / (grid.h_u * grid.h_u) * x.sin().powi(2)
}

/// One eigenvalue below the discrete threshold that survives the truncation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub index: usize,
    pub eigenvalue: f64,
    /// Same eigenvalue on the doubled strip.
    pub eigenvalue_doubled: f64,
    /// `Λ_h − λ`
    pub gap: f64,
    /// `|λ(L) − λ(2L)| + (π/2L)²`
    pub eps_trunc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub half_length: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// `π²/d²`
    pub threshold: f64,
    /// `Λ_h`
    pub grid_threshold: f64,
    pub lambda1: f64,
    /// `Λ_h − λ₁` (negative when λ₁ is above the threshold).
    pub gap1: f64,
    /// Truncation tolerance of the lowest eigenvalue.
    pub eps_trunc: f64,
    pub bound_states: Vec<BoundState>,
    /// Eigenvalues below `Λ_h` before the truncation test.
    pub candidates: usize,
    /// Eigenvalues below `π²/d² − ε_trunc` (literal threshold).
    pub count_literal: usize,
    /// Eigenvalues below `Λ_h` from the inertia of `K − Λ_h M`.
    pub inertia_count: Option<usize>,
    pub stability: Vec<StabilityRow>,
    /// `λ_j(L) ≥ λ_j(2L)` for every compared pair.
    pub monotone: bool,
    pub converged: bool,
}

impl SpectralReport {
    pub fn count(&self) -> usize {
        self.bound_states.len()
    }
}

/// Curved magnetic pencil on `grid`.
pub fn assemble(
    geom: &WaveguideGeometry,
    pot: &dyn Potential,
    grid: &StripGrid,
) -> Result<OperatorPair> {
    let pb = pullback(pot, geom)?;
    assemble_curved_magnetic(geom, &pb, grid)
}

/// Eigenvalues below the discrete threshold, filtered by the `L → 2L` truncation test.
///
/// The stability table lists at least `k` eigenvalues on both strips.
pub fn find_bound_states(
    geom: &WaveguideGeometry,
    pot: &dyn Potential,
    grid: &StripGrid,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectralReport> {
    geom.ensure_valid()?;
    let l = grid.half_length;
    let lambda_h = grid_threshold(grid);
    let thr = threshold(grid.width)?;
    let pair = assemble(geom, pot, grid)?;
    let below = count_below(&pair, lambda_h, 0.0, opts)?;
    let candidates = below.count;
    let k = candidates.max(k).max(1).min(pair.dim());
    let values = if below.eigenvalues.len() >= k {
        below.eigenvalues.clone()
    } else {
        lowest_eigenpairs(&pair, k, opts)?.values
    };

    let geom2 = geom.with_half_length(2.0 * l)?;
    let grid2 = grid.with_half_length(2.0 * l)?;
    let pair2 = assemble(&geom2, pot, &grid2)?;
    let res2 = lowest_eigenpairs(&pair2, k, opts)?;
    let tail = (PI / (2.0 * l)).powi(2);

    let mut bound_states = Vec::new();
    let mut monotone = true;
    for j in 0..k.min(values.len()).min(res2.values.len()) {
        let (a, b) = (values[j], res2.values[j]);
        monotone &= a >= b - opts.tol.max(1e-10) * a.abs().max(1.0);
        let eps = (a - b).abs() + tail;
        if j < candidates && lambda_h - a > eps {
            bound_states.push(BoundState {
                index: j,
                eigenvalue: a,
                eigenvalue_doubled: b,
                gap: lambda_h - a,
                eps_trunc: eps,
            });
        }
    }
    let eps1 = (values[0] - res2.values[0]).abs() + tail;
    let cut = thr - eps1;
    let count_literal = if cut <= lambda_h {
        values.iter().filter(|v| **v < cut).count()
    } else {
        count_below(&pair, thr, eps1, opts)?.count
    };
    Ok(SpectralReport {
        threshold: thr,
        grid_threshold: lambda_h,
        lambda1: values[0],
        gap1: lambda_h - values[0],
        eps_trunc: eps1,
        bound_states,
        candidates,
        count_literal,
        inertia_count: below.inertia_count,
        stability: vec![
            StabilityRow {
                half_length: l,
                eigenvalues: values[..k.min(values.len())].to_vec(),
            },
            StabilityRow {
                half_length: 2.0 * l,
                eigenvalues: res2.values.clone(),
            },
        ],
        monotone,
        converged: below.converged && res2.all_converged(),
    })
}

/// `M / (c + s²)` on the straight grid.
pub fn hardy_weights(pair: &OperatorPair, grid: &StripGrid, c: f64) -> WeightOperator {
    let weights = (0..grid.dim())
        .map(|k| {
            let (s, _) = grid.coords(k);
            pair.mass[k] / (c + s * s)
        })
        .collect();
    WeightOperator { weights }
}

/// Hardy pencil `(K − Λ_h M, M/(1 + s²))` on the straight strip of `grid` with potential `pot`.
pub fn hardy_constant(
    grid: &StripGrid,
    pot: &dyn Potential,
    opts: &SolverOptions,
) -> Result<HardyResult> {
    let (pair, weight) = assemble_straight_magnetic(grid, pot)?;
    hardy_pencil_min(&pair, &weight, grid_threshold(grid), opts)
}

/// Hardy constant of the flat comparison form of a curved strip: the frame
/// components of the pulled-back potential read on the straight strip.
pub fn hardy_constant_curved(
    geom: &WaveguideGeometry,
    pot: &dyn Potential,
    grid: &StripGrid,
    opts: &SolverOptions,
) -> Result<HardyResult> {
    geom.ensure_valid()?;
    let flat = StraightenedPotential { inner: pot, geom };
    hardy_constant(grid, &flat, opts)
}

/// `A'(x, y) = f A(f x, f y)` with `f = d/π`: the potential of the rescaled
/// field `f² B(f x, f y)` on the width-π strip.
pub struct ScaledPotential<'a> {
    pub inner: &'a dyn Potential,
    pub factor: f64,
}

impl Potential for ScaledPotential<'_> {
    fn smooth_components(&self, x: f64, y: f64) -> [f64; 2] {
        let f = self.factor;
        let [a, b] = self.inner.smooth_components(f * x, f * y);
        [f * a, f * b]
    }

    fn gauge_value(&self, x: f64, y: f64) -> f64 {
        self.inner.gauge_value(self.factor * x, self.factor * y)
    }

    fn gauge_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let f = self.factor;
        let [a, b] = self.inner.gauge_gradient(f * x, f * y);
        [f * a, f * b]
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

/// Hardy constants on width `d` and on the rescaled width-π strip at matched resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyScaling {
    pub width: f64,
    /// `c̃_B` on the width-`d` strip.
    pub constant_d: f64,
    /// Width-π strip, rescaled field, weight `1/(1 + s²)`.
    pub constant_pi_literal: f64,
    /// Width-π strip, rescaled field, weight `1/((π/d)² + s²)`.
    pub constant_pi_exact: f64,
    pub rel_literal: f64,
    pub rel_exact: f64,
}

/// Compare `c̃_B` on a width-`d` strip with the constant of the rescaled problem.
///
/// The change of variables `(s, u) ↦ (π/d)(s, u)` maps the width-`d` form onto the
/// width-π form exactly, but turns the weight `1/(1 + s²)` into `1/((π/d)² + s'²)`;
/// both weights are evaluated on the rescaled grid.
pub fn hardy_scaling(
    grid: &StripGrid,
    pot: &dyn Potential,
    opts: &SolverOptions,
) -> Result<HardyScaling> {
    let d = grid.width;
    let base = hardy_constant(grid, pot, opts)?.constant;
    let r = PI / d;
    let grid_pi = StripGrid::new(grid.half_length * r, PI, grid.h_s * r, grid.h_u * r)?;
    if grid_pi.n_s != grid.n_s || grid_pi.n_u != grid.n_u {
        return Err(Error::Numeric(
            "rescaled grid does not match the original node counts".into(),
        ));
    }
    let scaled = ScaledPotential {
        inner: pot,
        factor: d / PI,
    };
    let (pair, literal_w) = assemble_straight_magnetic(&grid_pi, &scaled)?;
    let shift = grid_threshold(&grid_pi);
    let literal = hardy_pencil_min(&pair, &literal_w, shift, opts)?.constant;
    let exact_w = hardy_weights(&pair, &grid_pi, r * r);
    let exact = hardy_pencil_min(&pair, &exact_w, shift, opts)?.constant;
    let rel = |c: f64| (c - base).abs() / base.abs().max(f64::MIN_POSITIVE);
    Ok(HardyScaling {
        width: d,
        constant_d: base,
        constant_pi_literal: literal,
        constant_pi_exact: exact,
        rel_literal: rel(literal),
        rel_exact: rel(exact),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetic::{
        gauge_from_field, FieldFamily, MagneticField, SupportBox, VectorPotential,
    };

    #[test]
    fn threshold_values() {
        assert_eq!(threshold(PI).unwrap(), 1.0);
        assert!((threshold(1.0).unwrap() - 9.8696044).abs() < 1e-7);
        assert!((threshold(2.0).unwrap() - PI * PI / 4.0).abs() < 1e-15);
        assert!(threshold(0.0).is_err());
        assert!(threshold(-1.0).is_err());
        // doubling the width quarters the threshold
        assert!((threshold(3.0).unwrap() / threshold(6.0).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn grid_threshold_approaches_threshold() {
        let g32 = StripGrid::uniform(4.0, 1.0, 1.0 / 32.0).unwrap();
        let g64 = StripGrid::uniform(4.0, 1.0, 1.0 / 64.0).unwrap();
        let e32 = PI * PI - grid_threshold(&g32);
        let e64 = PI * PI - grid_threshold(&g64);
        assert!(e32 > 0.0 && e64 > 0.0);
        assert!((e32 / e64 - 4.0).abs() < 0.01);
    }

    #[test]
    fn straight_strip_has_no_bound_states() {
        let geom = WaveguideGeometry::straight(1.0, 5.0).unwrap();
        let grid = StripGrid::uniform(5.0, 1.0, 1.0 / 8.0).unwrap();
        let r = find_bound_states(
            &geom,
            &VectorPotential::zero(),
            &grid,
            1,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(r.bound_states.is_empty());
        assert_eq!(r.count_literal, 0);
        assert!(r.monotone);
        assert!(r.lambda1 > r.grid_threshold);
    }

    #[test]
    fn straight_spectrum_scales_with_width() {
        let opts = SolverOptions::default();
        let zero = VectorPotential::zero();
        let g1 = StripGrid::uniform(3.0, 1.0, 1.0 / 8.0).unwrap();
        let g2 = StripGrid::uniform(6.0, 2.0, 2.0 / 8.0).unwrap();
        let p1 = assemble(&WaveguideGeometry::straight(1.0, 3.0).unwrap(), &zero, &g1).unwrap();
        let p2 = assemble(&WaveguideGeometry::straight(2.0, 6.0).unwrap(), &zero, &g2).unwrap();
        let e1 = lowest_eigenpairs(&p1, 3, &opts).unwrap();
        let e2 = lowest_eigenpairs(&p2, 3, &opts).unwrap();
        for (a, b) in e1.values.iter().zip(&e2.values) {
            assert!((a / b - 4.0).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn exact_hardy_scaling_is_grid_exact() {
        let field = MagneticField::new(
            FieldFamily::SmoothBump,
            4.0,
            SupportBox::new(-0.5, 0.5, 0.0, 0.8),
        )
        .unwrap();
        let pot = gauge_from_field(&field).unwrap();
        let grid = StripGrid::uniform(3.0, 0.8, 0.8 / 8.0).unwrap();
        let r = hardy_scaling(&grid, &pot, &SolverOptions::default()).unwrap();
        assert!(r.constant_d > 0.0);
        assert!(r.rel_exact < 1e-8, "{r:?}");
    }
}
