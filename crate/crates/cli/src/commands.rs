//! Subcommand bodies. Each one fills CSV tables through a [`Run`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveguide_core::analysis::{
    assemble, beta_star, certify_beta0, constants_bundle, find_bound_states, hardy_constant_curved,
    hardy_scaling, magnetic_window_study, parameter_scan, verify_lemma1_identity,
    verify_perturbation_bound, weyl_decay_study, HardySource, ScanPoint, SmoothWeight,
    TestFunction, WeylSequenceSpec, HARDY_SAFETY,
};
use waveguide_core::assembly::write_pencil;
use waveguide_core::geometry::WaveguideGeometry;
use waveguide_core::magnetic::MagneticField;
use waveguide_core::Error;

use crate::config::{locate, Diagnostic, RunConfig};
use crate::persist::{Cell, Run, Table};

pub const GEOMETRY_HEADER: &[&str] = &["s", "a", "b", "gamma", "jac_min_over_u"];
pub const SPECTRUM_HEADER: &[&str] = &[
    "threshold",
    "grid_threshold",
    "lambda1",
    "gap",
    "eps_trunc",
    "candidates",
    "count",
    "count_literal",
    "inertia_count",
    "monotone",
    "converged",
];
pub const EIGENVALUES_HEADER: &[&str] = &["half_length", "index", "eigenvalue", "below_threshold"];
pub const BOUND_STATES_HEADER: &[&str] = &[
    "index",
    "eigenvalue",
    "eigenvalue_doubled",
    "gap",
    "eps_trunc",
];
pub const CERTIFY_HEADER: &[&str] = &[
    "width",
    "amplitude",
    "alpha1",
    "alpha2",
    "sup_gamma",
    "sup_a1",
    "sup_a2",
    "sup_rho1",
    "hardy_estimate",
    "hardy_constant",
    "possible",
    "pass",
    "margin",
    "worst_s",
    "pass_smoothed",
    "margin_smoothed",
    "pass_corrected",
    "margin_corrected",
    "beta_star",
    "beta_upper",
];
pub const RHO_HEADER: &[&str] = &[
    "s",
    "rho1",
    "rho2",
    "rho1_dot",
    "rho1_ddot",
    "rho1_smooth",
    "rho1_dot_smooth",
    "rho1_ddot_smooth",
];
pub const BETA_HEADER: &[&str] = &["amplitude", "hardy_constant", "pass"];
pub const HARDY_HEADER: &[&str] = &["width", "constant", "shift", "spot_check_min", "iterations"];
pub const SCALING_HEADER: &[&str] = &[
    "width",
    "constant_d",
    "constant_pi_literal",
    "constant_pi_exact",
    "rel_literal",
    "rel_exact",
];
pub const WEYL_HEADER: &[&str] = &[
    "n", "value", "norm", "slope", "mu", "windowed", "sup_a1", "ratio", "gradient",
];
pub const LEMMA_HEADER: &[&str] = &[
    "trial",
    "center",
    "scale",
    "exponent",
    "lhs",
    "weighted",
    "int_fpp",
    "int_ffpp",
    "residual_literal",
    "residual",
];
pub const PERTURBATION_HEADER: &[&str] = &[
    "trial",
    "i_value",
    "i_printed",
    "q_tilde",
    "q_form",
    "cross_check",
    "bound",
    "satisfied",
    "satisfied_printed",
];
pub const SCAN_HEADER: &[&str] = &[
    "index",
    "curvature_family",
    "curvature_amplitude",
    "field_family",
    "field_amplitude",
    "width",
    "half_length",
    "step",
    "lambda1",
    "gap",
    "eps_trunc",
    "candidates",
    "count",
    "count_literal",
    "hardy",
    "certified",
    "margin",
    "error",
];

/// Failure of a subcommand, mapped to an exit status.
#[derive(Debug)]
pub enum CmdError {
    Config(Diagnostic),
    Core(Error),
    Io(std::io::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Core(Error::Numeric(_) | Error::Precondition(_)) => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CmdError::Config(_) => "config",
            CmdError::Core(Error::Config(_)) => "config",
            CmdError::Core(Error::Domain(_)) => "domain",
            CmdError::Core(Error::InvalidGeometry(_)) => "invalid-geometry",
            CmdError::Core(Error::Numeric(_)) => "numeric",
            CmdError::Core(Error::Precondition(_)) => "precondition",
            CmdError::Io(_) => "io",
        }
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(d) => write!(f, "configuration error: {d}"),
            CmdError::Core(e) => write!(f, "{e}"),
            CmdError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        CmdError::Core(e)
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

/// Extra inputs beyond the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Context {
    /// Configuration source, for line numbers in late diagnostics.
    pub source: String,
    /// Write the assembled pencil next to the spectrum tables.
    pub dump: bool,
}

fn geometry_of(cfg: &RunConfig) -> Result<WaveguideGeometry, CmdError> {
    let geom = WaveguideGeometry::new(
        cfg.profile(),
        cfg.geometry.d,
        cfg.half_length(),
        cfg.geometry.curve_step,
    )?;
    geom.ensure_valid()?;
    Ok(geom)
}

pub fn geometry(run: &mut Run, _ctx: &Context) -> Result<Option<String>, CmdError> {
    let geom = geometry_of(&run.config)?;
    run.stage("curve");
    let c = &geom.curve;
    let jac = geom.jacobian_min_over_u();
    let mut t = Table::new(GEOMETRY_HEADER);
    for i in 0..c.s.len() {
        t.push(vec![
            c.s[i].cell(),
            c.a[i].cell(),
            c.b[i].cell(),
            c.gamma[i].cell(),
            jac[i].cell(),
        ]);
    }
    run.emit_table(".csv", &t)?;
    run.stage("write");
    Ok(Some(format!(
        "samples={} sup_d_gamma={:?}",
        c.s.len(),
        geom.sup_d_gamma()
    )))
}

pub fn spectrum(run: &mut Run, ctx: &Context) -> Result<Option<String>, CmdError> {
    let cfg = run.config.clone();
    let geom = geometry_of(&cfg)?;
    let pot = cfg.potential();
    let grid = cfg.grid();
    let opts = cfg.solver();
    run.stage("setup");
    let rep = find_bound_states(&geom, &pot, &grid, cfg.solver.k, &opts)?;
    run.stage("solve");

    let mut t = Table::new(SPECTRUM_HEADER);
    t.push(vec![
        rep.threshold.cell(),
        rep.grid_threshold.cell(),
        rep.lambda1.cell(),
        rep.gap1.cell(),
        rep.eps_trunc.cell(),
        rep.candidates.cell(),
        rep.count().cell(),
        rep.count_literal.cell(),
        rep.inertia_count.cell(),
        rep.monotone.cell(),
        rep.converged.cell(),
    ]);
    run.emit_table(".csv", &t)?;

    let mut ev = Table::new(EIGENVALUES_HEADER);
    for row in &rep.stability {
        for (i, v) in row.eigenvalues.iter().enumerate() {
            ev.push(vec![
                row.half_length.cell(),
                (i + 1).cell(),
                v.cell(),
                (*v < rep.grid_threshold).cell(),
            ]);
        }
    }
    run.emit_table(".eigenvalues.csv", &ev)?;

    let mut bs = Table::new(BOUND_STATES_HEADER);
    for b in &rep.bound_states {
        bs.push(vec![
            b.index.cell(),
            b.eigenvalue.cell(),
            b.eigenvalue_doubled.cell(),
            b.gap.cell(),
            b.eps_trunc.cell(),
        ]);
    }
    run.emit_table(".bound_states.csv", &bs)?;

    if ctx.dump {
        let pair = assemble(&geom, &pot, &grid)?;
        let mut bytes = Vec::new();
        write_pencil(&pair, &mut bytes)?;
        run.emit(".pencil.bin", &bytes)?;
    }
    run.stage("write");
    Ok(Some(format!(
        "lambda1={:?} gap={:?} count={}",
        rep.lambda1,
        rep.gap1,
        rep.count()
    )))
}

pub fn certify(run: &mut Run, _ctx: &Context) -> Result<Option<String>, CmdError> {
    let cfg = run.config.clone();
    let geom = geometry_of(&cfg)?;
    let pot = cfg.potential();
    let grid = cfg.grid();
    let opts = cfg.solver();
    let step = cfg.quadrature_step();
    let extent = cfg.analysis.certify_extent;
    run.stage("setup");
    let hardy = hardy_constant_curved(&geom, &pot, &grid, &opts)?;
    run.stage("hardy");
    let c = HARDY_SAFETY * hardy.constant;
    let bundle = constants_bundle(&geom, &pot, c, step, extent)?;
    let cert = certify_beta0(&bundle, geom.width);
    run.stage("certify");

    let search = if cfg.analysis.beta_search && cfg.geometry.amplitude != 0.0 {
        let source = HardySource::Computed { grid, opts };
        let s = beta_star(
            &geom.profile,
            &pot,
            geom.width,
            geom.half_length,
            &source,
            step,
            extent,
            cfg.analysis.beta_tol,
        )?;
        run.stage("beta-search");
        Some(s)
    } else {
        None
    };

    let mut t = Table::new(CERTIFY_HEADER);
    t.push(vec![
        bundle.width.cell(),
        cfg.geometry.amplitude.cell(),
        bundle.alpha1.cell(),
        bundle.alpha2.cell(),
        bundle.sup_gamma.cell(),
        bundle.sup_a1.cell(),
        bundle.sup_a2.cell(),
        bundle.sup_rho1.cell(),
        hardy.constant.cell(),
        bundle.hardy_constant.cell(),
        cert.possible.cell(),
        cert.pass.cell(),
        cert.margin.cell(),
        cert.worst_s.cell(),
        cert.pass_smoothed.cell(),
        cert.margin_smoothed.cell(),
        cert.pass_corrected.cell(),
        cert.margin_corrected.cell(),
        search.as_ref().map(|s| s.beta_star).cell(),
        search.as_ref().and_then(|s| s.upper).cell(),
    ]);
    run.emit_table(".csv", &t)?;

    let mut rho = Table::new(RHO_HEADER);
    for i in 0..bundle.s.len() {
        rho.push(vec![
            bundle.s[i].cell(),
            bundle.rho1[i].cell(),
            bundle.rho2[i].cell(),
            bundle.rho1_dot[i].cell(),
            bundle.rho1_ddot[i].cell(),
            bundle.rho1_smooth[i].cell(),
            bundle.rho1_dot_smooth[i].cell(),
            bundle.rho1_ddot_smooth[i].cell(),
        ]);
    }
    run.emit_table(".rho.csv", &rho)?;

    if let Some(s) = &search {
        let mut bt = Table::new(BETA_HEADER);
        for (a, c, p) in &s.trials {
            bt.push(vec![a.cell(), c.cell(), p.cell()]);
        }
        run.emit_table(".beta.csv", &bt)?;
    }
    run.stage("write");
    Ok(Some(format!(
        "pass={} margin={:?} hardy={:?}",
        cert.pass, cert.margin, hardy.constant
    )))
}

pub fn hardy(run: &mut Run, _ctx: &Context) -> Result<Option<String>, CmdError> {
    let cfg = run.config.clone();
    let geom = geometry_of(&cfg)?;
    let pot = cfg.potential();
    let grid = cfg.grid();
    let opts = cfg.solver();
    run.stage("setup");
    let h = hardy_constant_curved(&geom, &pot, &grid, &opts)?;
    run.stage("hardy");
    let mut t = Table::new(HARDY_HEADER);
    t.push(vec![
        geom.width.cell(),
        h.constant.cell(),
        h.shift.cell(),
        h.spot_check_min.cell(),
        h.eigen.iterations.cell(),
    ]);
    run.emit_table(".csv", &t)?;
    if cfg.analysis.hardy_scaling {
        let sc = hardy_scaling(&grid, &pot, &opts)?;
        run.stage("scaling");
        let mut st = Table::new(SCALING_HEADER);
        st.push(vec![
            sc.width.cell(),
            sc.constant_d.cell(),
            sc.constant_pi_literal.cell(),
            sc.constant_pi_exact.cell(),
            sc.rel_literal.cell(),
            sc.rel_exact.cell(),
        ]);
        run.emit_table(".scaling.csv", &st)?;
    }
    run.stage("write");
    Ok(Some(format!("hardy={:?}", h.constant)))
}

pub fn weyl(run: &mut Run, ctx: &Context) -> Result<Option<String>, CmdError> {
    let cfg = run.config.clone();
    let ns = cfg.analysis.weyl_ns.clone();
    let top = ns.iter().cloned().fold(0.0, f64::max);
    if 2.0 * top > cfg.half_length() {
        return Err(CmdError::Config(Diagnostic {
            path: "analysis.weyl_ns".into(),
            line: locate(&ctx.source, "analysis.weyl_ns"),
            message: format!(
                "window (n, 2n) for n = {top} leaves the strip of half-length {}",
                cfg.half_length()
            ),
        }));
    }
    let geom = geometry_of(&cfg)?;
    let pot = cfg.potential();
    let step = cfg.quadrature_step();
    let spec = WeylSequenceSpec::new(geom.width, cfg.analysis.weyl_momentum, ns);
    run.stage("setup");
    let study = weyl_decay_study(&geom, &spec, step)?;
    run.stage("decay");
    let window = magnetic_window_study(&geom, &pot, &spec, step)?;
    run.stage("magnetic");
    let mut t = Table::new(WEYL_HEADER);
    for (i, w) in window.iter().enumerate() {
        t.push(vec![
            study.ns[i].cell(),
            study.values[i].cell(),
            study.norms[i].cell(),
            study.slope.cell(),
            study.mu.cell(),
            w.windowed.cell(),
            w.sup_a1.cell(),
            w.ratio.cell(),
            w.gradient.cell(),
        ]);
    }
    run.emit_table(".csv", &t)?;
    run.stage("write");
    Ok(Some(format!(
        "slope={:?} decreasing={}",
        study.slope,
        study.decreasing()
    )))
}

pub fn identity(run: &mut Run, _ctx: &Context) -> Result<Option<String>, CmdError> {
    use rand::Rng;
    let cfg = run.config.clone();
    let geom = geometry_of(&cfg)?;
    let pot = cfg.potential();
    let step = cfg.quadrature_step();
    let d = geom.width;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
    run.stage("setup");

    let mut lemma = Table::new(LEMMA_HEADER);
    let mut worst_lemma = 0.0f64;
    for trial in 0..cfg.analysis.trials {
        let (center, scale, exponent) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.1..1.0),
        );
        let f = SmoothWeight::Power {
            center,
            scale,
            exponent,
        };
        let g = TestFunction::random(&mut rng, d, (-2.0, 2.0));
        let r = verify_lemma1_identity(&f, &g, &pot, step)?;
        worst_lemma = worst_lemma.max(r.residual);
        lemma.push(vec![
            trial.cell(),
            center.cell(),
            scale.cell(),
            exponent.cell(),
            r.lhs.cell(),
            r.weighted.cell(),
            r.int_fpp.cell(),
            r.int_ffpp.cell(),
            r.residual_literal.cell(),
            r.residual.cell(),
        ]);
    }
    run.stage("lemma");

    // the bound's constants do not involve the Hardy constant
    let bundle = constants_bundle(&geom, &pot, 0.0, step, 0.0)?;
    let reach = (geom.half_length - 14.0).max(0.0);
    let mut pert = Table::new(PERTURBATION_HEADER);
    let mut all = true;
    for trial in 0..cfg.analysis.trials {
        let psi = TestFunction::random(&mut rng, d, (-reach, reach));
        let r = verify_perturbation_bound(&geom, &pot, &psi, &bundle, step)?;
        all &= r.satisfied;
        pert.push(vec![
            trial.cell(),
            r.i_value.cell(),
            r.i_printed.cell(),
            r.q_tilde.cell(),
            r.q_form.cell(),
            r.cross_check.cell(),
            r.bound.cell(),
            r.satisfied.cell(),
            r.satisfied_printed.cell(),
        ]);
    }
    run.stage("perturbation");
    run.emit_table(".lemma.csv", &lemma)?;
    run.emit_table(".perturbation.csv", &pert)?;
    run.stage("write");
    Ok(Some(format!(
        "lemma_residual={worst_lemma:?} perturbation_satisfied={all}"
    )))
}

/// Cartesian product of the scan lists, empty lists replaced by the base value.
pub fn scan_points(cfg: &RunConfig) -> Vec<ScanPoint> {
    let or = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let sc = &cfg.scan;
    let mut out = Vec::new();
    for &amp in &or(&sc.curvature_amplitudes, cfg.geometry.amplitude) {
        for &b in &or(&sc.field_amplitudes, cfg.field.amplitude) {
            for &d in &or(&sc.widths, cfg.geometry.d) {
                for &l in &or(&sc.half_lengths, cfg.half_length()) {
                    for &h in &or(&sc.steps, cfg.h_s()) {
                        let mut profile = cfg.profile();
                        profile.amplitude = amp;
                        let base = cfg.field();
                        let field = MagneticField {
                            amplitude: b,
                            ..base
                        };
                        out.push(ScanPoint {
                            profile,
                            field,
                            width: d,
                            half_length: l,
                            step: h,
                            certify: sc.certify,
                            certify_extent: cfg.analysis.certify_extent,
                        });
                    }
                }
            }
        }
    }
    out
}

pub fn scan(run: &mut Run, _ctx: &Context) -> Result<Option<String>, CmdError> {
    let cfg = run.config.clone();
    let points = scan_points(&cfg);
    run.stage("setup");
    let rows = parameter_scan(&points, &cfg.solver());
    run.stage("scan");
    let mut t = Table::new(SCAN_HEADER);
    let mut failed = 0;
    for r in &rows {
        let p = &r.point;
        failed += r.error.is_some() as usize;
        t.push(vec![
            r.index.cell(),
            p.profile.family.tag().cell(),
            p.profile.amplitude.cell(),
            p.field.family.tag().cell(),
            p.field.amplitude.cell(),
            p.width.cell(),
            p.half_length.cell(),
            p.step.cell(),
            r.lambda1.cell(),
            r.gap.cell(),
            r.eps_trunc.cell(),
            r.candidates.cell(),
            r.count.cell(),
            r.count_literal.cell(),
            r.hardy.cell(),
            r.certified.cell(),
            r.margin.cell(),
            r.error.clone().cell(),
        ]);
    }
    run.emit_table(".csv", &t)?;
    run.stage("write");
    Ok(Some(format!("points={} failed={}", rows.len(), failed)))
}
