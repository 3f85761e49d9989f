use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::HARDY_SAFETY;
use super::{
    certify_beta0, constants_bundle, find_bound_states, hardy_constant_curved, Certification,
};
use crate::assembly::StripGrid;
use crate::eigen::SolverOptions;
use crate::error::Result;
use crate::geometry::{CurvatureProfile, WaveguideGeometry, DEFAULT_CURVE_STEP};
use crate::magnetic::{gauge_from_field, MagneticField};

/// One configuration of a parameter scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub profile: CurvatureProfile,
    pub field: MagneticField,
    pub width: f64,
    pub half_length: f64,
    pub step: f64,
    /// Run the Hardy pencil and the pointwise certification as well.
    pub certify: bool,
    /// Extent of the certification `s`-grid.
    pub certify_extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub index: usize,
    pub point: ScanPoint,
    pub lambda1: Option<f64>,
    pub gap: Option<f64>,
    pub eps_trunc: Option<f64>,
    pub candidates: Option<usize>,
    pub count: Option<usize>,
    pub count_literal: Option<usize>,
    pub hardy: Option<f64>,
    pub certified: Option<bool>,
    pub margin: Option<f64>,
    pub error: Option<String>,
}

fn run_point(index: usize, p: &ScanPoint, opts: &SolverOptions) -> Result<ScanRow> {
    let geom = WaveguideGeometry::new(p.profile, p.width, p.half_length, DEFAULT_CURVE_STEP)?;
    geom.ensure_valid()?;
    let pot = gauge_from_field(&p.field)?;
    let grid = StripGrid::uniform(p.half_length, p.width, p.step)?;
    let report = find_bound_states(&geom, &pot, &grid, 1, opts)?;
    let mut row = ScanRow {
        index,
        point: *p,
        lambda1: Some(report.lambda1),
        gap: Some(report.gap1),
        eps_trunc: Some(report.eps_trunc),
        candidates: Some(report.candidates),
        count: Some(report.count()),
        count_literal: Some(report.count_literal),
        hardy: None,
        certified: None,
        margin: None,
        error: None,
    };
    if p.certify {
        let c = hardy_constant_curved(&geom, &pot, &grid, opts)?.constant;
        let bundle = constants_bundle(
            &geom,
            &pot,
            HARDY_SAFETY * c,
            0.5 * p.step,
            p.certify_extent,
        );
        let cert = match bundle {
            Ok(b) => certify_beta0(&b, p.width),
            // d‖γ‖∞ ≥ 1: not certifiable
            Err(_) => Certification::impossible(),
        };
        row.hardy = Some(c);
        row.certified = Some(cert.pass);
        row.margin = Some(cert.margin);
    }
    Ok(row)
}

/// Evaluate every point concurrently; rows come back in input order and a
/// failing point only fills its own `error` field.
pub fn parameter_scan(points: &[ScanPoint], opts: &SolverOptions) -> Vec<ScanRow> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            run_point(i, p, opts).unwrap_or_else(|e| ScanRow {
                index: i,
                point: *p,
                lambda1: None,
                gap: None,
                eps_trunc: None,
                candidates: None,
                count: None,
                count_literal: None,
                hardy: None,
                certified: None,
                margin: None,
                error: Some(e.to_string()),
            })
        })
        .collect()
}
