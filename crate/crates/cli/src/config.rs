//! Run configuration: TOML with documented defaults, unknown keys rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use waveguide_core::assembly::StripGrid;
use waveguide_core::eigen::{Preconditioner, SolverOptions};
use waveguide_core::geometry::{CurvatureFamily, CurvatureProfile};
use waveguide_core::magnetic::{
    gauge_from_field, FieldFamily, GaugeFunction, MagneticField, SupportBox, VectorPotential,
};

/// A configuration problem located by key path and, when known, source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {}): {}", self.path, l, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub scan: ScanConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub scale: f64,
    /// Strip width.
    #[serde(default = "one")]
    pub d: f64,
    /// Truncation half-length; defaults to `30 d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    /// Sampling step of the reference curve.
    #[serde(default = "default_curve_step")]
    pub curve_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default = "default_field_family")]
    pub family: String,
    #[serde(default)]
    pub amplitude: f64,
    /// `[x0, x1, y0, y1]`
    #[serde(default = "default_support")]
    pub support: [f64; 4],
    /// Gauge bumps `"bump:a,cx,cy,rx,ry"` added to the transverse-gauge potential.
    #[serde(default)]
    pub gauge: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults to `d/32`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_s: Option<f64>,
    /// Defaults to `d/32`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_preconditioner")]
    pub preconditioner: Preconditioner,
    #[serde(default = "yes")]
    pub dense_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Defaults to `min(h_s, h_u)/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_step: Option<f64>,
    /// Half-width of the certification `s`-grid (at least `L`).
    #[serde(default = "default_extent")]
    pub certify_extent: f64,
    /// Bisect for the certification boundary `β*` in `certify`.
    #[serde(default)]
    pub beta_search: bool,
    #[serde(default = "default_beta_tol")]
    pub beta_tol: f64,
    /// Also compare with the rescaled width-π problem in `hardy`.
    #[serde(default)]
    pub hardy_scaling: bool,
    #[serde(default = "one")]
    pub weyl_momentum: f64,
    #[serde(default = "default_weyl_ns")]
    pub weyl_ns: Vec<f64>,
    /// Randomised trials in `identity`.
    #[serde(default = "default_trials")]
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Empty lists fall back to the single value of the base configuration.
    #[serde(default)]
    pub curvature_amplitudes: Vec<f64>,
    #[serde(default)]
    pub field_amplitudes: Vec<f64>,
    #[serde(default)]
    pub widths: Vec<f64>,
    #[serde(default)]
    pub half_lengths: Vec<f64>,
    #[serde(default)]
    pub steps: Vec<f64>,
    #[serde(default = "yes")]
    pub certify: bool,
}

fn default_output_dir() -> String {
    "out".into()
}
fn default_family() -> String {
    "zero".into()
}
fn default_field_family() -> String {
    "zero".into()
}
fn default_support() -> [f64; 4] {
    [-1.0, 1.0, -0.5, 1.5]
}
fn default_curve_step() -> f64 {
    1e-3
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_k() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    5000
}
fn default_seed() -> u64 {
    42
}
fn default_preconditioner() -> Preconditioner {
    Preconditioner::ShiftInvert
}
fn default_extent() -> f64 {
    200.0
}
fn default_beta_tol() -> f64 {
    0.05
}
fn default_weyl_ns() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}
fn default_trials() -> usize {
    20
}

macro_rules! default_from_serde {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                toml::from_str("").expect("empty table deserialises")
            }
        }
    )*};
}
default_from_serde!(
    GeometryConfig,
    FieldConfig,
    GridConfig,
    SolverConfig,
    AnalysisConfig,
    ScanConfig,
    RunConfig
);

impl RunConfig {
    pub fn half_length(&self) -> f64 {
        self.geometry.half_length.unwrap_or(30.0 * self.geometry.d)
    }

    pub fn h_s(&self) -> f64 {
        self.grid.h_s.unwrap_or(self.geometry.d / 32.0)
    }

    pub fn h_u(&self) -> f64 {
        self.grid.h_u.unwrap_or(self.geometry.d / 32.0)
    }

    pub fn quadrature_step(&self) -> f64 {
        self.analysis
            .quadrature_step
            .unwrap_or(0.5 * self.h_s().min(self.h_u()))
    }

    /// Fill every derived default so the serialised form is complete.
    pub fn resolve(mut self) -> Self {
        self.geometry.half_length = Some(self.half_length());
        self.grid.h_s = Some(self.h_s());
        self.grid.h_u = Some(self.h_u());
        self.analysis.quadrature_step = Some(self.quadrature_step());
        self
    }

    pub fn profile(&self) -> CurvatureProfile {
        let fam = CurvatureFamily::from_tag(&self.geometry.family).unwrap_or(CurvatureFamily::Zero);
        CurvatureProfile {
            family: fam,
            amplitude: self.geometry.amplitude,
            center: self.geometry.center,
            scale: self.geometry.scale,
        }
    }

    pub fn field(&self) -> MagneticField {
        let fam = FieldFamily::from_tag(&self.field.family).unwrap_or(FieldFamily::Zero);
        let [x0, x1, y0, y1] = self.field.support;
        MagneticField {
            family: fam,
            amplitude: self.field.amplitude,
            support: SupportBox::new(x0, x1, y0, y1),
        }
    }

    pub fn gauges(&self) -> Vec<GaugeFunction> {
        self.field
            .gauge
            .iter()
            .filter_map(|g| GaugeFunction::parse(g).ok())
            .collect()
    }

    pub fn potential(&self) -> VectorPotential {
        let mut pot = gauge_from_field(&self.field()).unwrap_or_else(|_| VectorPotential::zero());
        pot.gauges = self.gauges();
        pot
    }

    pub fn grid(&self) -> StripGrid {
        StripGrid::new(self.half_length(), self.geometry.d, self.h_s(), self.h_u())
            .expect("validated grid")
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            seed: self.solver.seed,
            preconditioner: self.solver.preconditioner,
            dense_fallback: self.solver.dense_fallback,
        }
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// SHA-256 of the canonical TOML with `output_dir` cleared, hex encoded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir.clear();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    /// Check every constraint; `source` is used to attach line numbers.
    pub fn validate(&self, source: &str) -> Result<(), Diagnostic> {
        let err = |path: &str, message: String| Diagnostic {
            path: path.into(),
            line: locate(source, path),
            message,
        };
        let g = &self.geometry;
        if CurvatureFamily::from_tag(&g.family).is_err() {
            return Err(err(
                "geometry.family",
                format!("unknown curvature family `{}`", g.family),
            ));
        }
        if !(g.d > 0.0) || !g.d.is_finite() {
            return Err(err(
                "geometry.d",
                format!("width must be positive and finite, got {}", g.d),
            ));
        }
        if !g.amplitude.is_finite() || !g.center.is_finite() {
            return Err(err(
                "geometry.amplitude",
                "amplitude and center must be finite".into(),
            ));
        }
        if !(g.scale > 0.0) || !g.scale.is_finite() {
            return Err(err(
                "geometry.scale",
                format!("scale must be positive, got {}", g.scale),
            ));
        }
        let l = self.half_length();
        if !(l > 0.0) || !l.is_finite() {
            return Err(err(
                "geometry.half_length",
                format!("half-length must be positive, got {l}"),
            ));
        }
        if !(g.curve_step > 0.0 && g.curve_step <= 0.1) {
            return Err(err(
                "geometry.curve_step",
                format!("curve step must lie in (0, 0.1], got {}", g.curve_step),
            ));
        }
        let dg = g.d * self.profile().sup_abs();
        if dg >= 1.0 {
            return Err(err(
                "geometry.amplitude",
                format!("d·‖γ‖∞ = {dg} ≥ 1: the tubular chart is not valid"),
            ));
        }

        let f = &self.field;
        if FieldFamily::from_tag(&f.family).is_err() {
            return Err(err(
                "field.family",
                format!("unknown field family `{}`", f.family),
            ));
        }
        if !f.amplitude.is_finite() {
            return Err(err("field.amplitude", "amplitude must be finite".into()));
        }
        if let Err(e) = self.field().support.check() {
            return Err(err("field.support", bare(e)));
        }
        for (i, spec) in f.gauge.iter().enumerate() {
            if let Err(e) = GaugeFunction::parse(spec) {
                return Err(err(&format!("field.gauge[{i}]"), bare(e)));
            }
        }

        for (path, h) in [("grid.h_s", self.h_s()), ("grid.h_u", self.h_u())] {
            if !(h > 0.0) || !h.is_finite() {
                return Err(err(path, format!("step must be positive, got {h}")));
            }
        }
        if let Err(e) = StripGrid::new(l, g.d, self.h_s(), self.h_u()) {
            return Err(err("grid.h_s", bare(e)));
        }

        let s = &self.solver;
        if s.k == 0 {
            return Err(err("solver.k", "k must be at least 1".into()));
        }
        if !(s.tol > 0.0) {
            return Err(err(
                "solver.tol",
                format!("tolerance must be positive, got {}", s.tol),
            ));
        }
        if s.max_iter == 0 {
            return Err(err("solver.max_iter", "max_iter must be at least 1".into()));
        }

        let a = &self.analysis;
        if !(self.quadrature_step() > 0.0) {
            return Err(err(
                "analysis.quadrature_step",
                "quadrature step must be positive".into(),
            ));
        }
        if !(a.certify_extent >= 0.0) || !a.certify_extent.is_finite() {
            return Err(err(
                "analysis.certify_extent",
                "extent must be finite and non-negative".into(),
            ));
        }
        if !(a.beta_tol > 0.0 && a.beta_tol < 1.0) {
            return Err(err(
                "analysis.beta_tol",
                format!("relative tolerance must lie in (0, 1), got {}", a.beta_tol),
            ));
        }
        if !(a.weyl_momentum >= 0.0) || !a.weyl_momentum.is_finite() {
            return Err(err(
                "analysis.weyl_momentum",
                "momentum must be finite and non-negative".into(),
            ));
        }
        if a.weyl_ns.len() < 2 || a.weyl_ns.iter().any(|n| !(*n > 0.0)) {
            return Err(err(
                "analysis.weyl_ns",
                "need at least two positive indices".into(),
            ));
        }

        let sc = &self.scan;
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !sc
            .curvature_amplitudes
            .iter()
            .chain(&sc.field_amplitudes)
            .all(|x| x.is_finite())
        {
            return Err(err(
                "scan.curvature_amplitudes",
                "amplitudes must be finite".into(),
            ));
        }
        for (path, v) in [
            ("scan.widths", &sc.widths),
            ("scan.half_lengths", &sc.half_lengths),
            ("scan.steps", &sc.steps),
        ] {
            if !positive(v) {
                return Err(err(path, "values must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Message of a core error without its category prefix.
fn bare(e: waveguide_core::Error) -> String {
    use waveguide_core::Error::*;
    match e {
        Config(m) | Domain(m) | InvalidGeometry(m) | Numeric(m) | Precondition(m) => m,
    }
}

/// Line (1-based) of `path` in TOML `source`: the key inside its table, else the table header.
pub fn locate(source: &str, path: &str) -> Option<usize> {
    let path = path.split('[').next().unwrap_or(path);
    let (table, key) = match path.rsplit_once('.') {
        Some((t, k)) => (Some(t), k),
        None => (None, path),
    };
    let mut current: Option<String> = None;
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line
                .trim_start_matches('[')
                .trim_end_matches(']')
                .trim()
                .to_string();
            if Some(name.as_str()) == table {
                header_line = Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        if current.as_deref() == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Parse, apply defaults and validate a configuration text.
pub fn parse_config_str(source: &str) -> Result<RunConfig, Diagnostic> {
    let de = toml::Deserializer::parse(source).map_err(|e| Diagnostic {
        path: String::new(),
        line: e.span().map(|s| line_of(source, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let line = inner
            .span()
            .map(|s| line_of(source, s.start))
            .or_else(|| locate(source, &path));
        Diagnostic {
            path,
            line,
            message: inner.message().trim().to_string(),
        }
    })?;
    let cfg = cfg.resolve();
    cfg.validate(source)?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, Diagnostic> {
    let text = std::fs::read_to_string(path).map_err(|e| Diagnostic {
        path: path.display().to_string(),
        line: None,
        message: format!("cannot read configuration: {e}"),
    })?;
    parse_config_str(&text)
}
