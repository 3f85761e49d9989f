//! Finite-difference pencils `(K, M)` on the truncated strip `(−L, L) × (0, d)`.
//!
//! Nodes are numbered with `u` fastest, so every operator has half bandwidth
//! `n_u`. Magnetic terms enter through Peierls link phases: an edge from
//! node `t` to node `h` with line integral `θ = ∫ A·dl` contributes
//! `w |e^{−iθ} φ_h − φ_t|²` to `x* K x`.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frame, WaveguideGeometry};
use crate::magnetic::{Potential, PulledBackPotential};
use crate::sparse::{CsrBuilder, CsrMatrix};

/// Interior nodes of a uniform grid on `(−L, L) × (0, d)` with Dirichlet
/// conditions on all four sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    pub half_length: f64,
    pub width: f64,
    pub n_s: usize,
    pub n_u: usize,
    pub h_s: f64,
    pub h_u: f64,
}

impl StripGrid {
    /// Grid with spacings as close as possible to `(h_s, h_u)` that divide the strip exactly.
    pub fn new(half_length: f64, width: f64, h_s: f64, h_u: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(half_length) && positive(width) && positive(h_s) && positive(h_u)) {
            return Err(Error::Domain("grid needs positive L, d, h_s, h_u".into()));
        }
        let cells_s = (2.0 * half_length / h_s).round() as usize;
        let cells_u = (width / h_u).round() as usize;
        if cells_s < 4 || cells_u < 4 {
            return Err(Error::Domain(format!(
                "grid too coarse: {} x {} interior nodes (need at least 3 x 3)",
                cells_s.saturating_sub(1),
                cells_u.saturating_sub(1)
            )));
        }
        Ok(Self {
            half_length,
            width,
            n_s: cells_s - 1,
            n_u: cells_u - 1,
            h_s: 2.0 * half_length / cells_s as f64,
            h_u: width / cells_u as f64,
        })
    }

    pub fn uniform(half_length: f64, width: f64, h: f64) -> Result<Self> {
        Self::new(half_length, width, h, h)
    }

    pub fn dim(&self) -> usize {
        self.n_s * self.n_u
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_u + j
    }

    #[inline]
    pub fn s(&self, i: usize) -> f64 {
        -self.half_length + (i + 1) as f64 * self.h_s
    }

    #[inline]
    pub fn u(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.h_u
    }

    /// Node coordinates `(s, u)` of a flat index.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        (self.s(k / self.n_u), self.u(k % self.n_u))
    }

    /// Same strip with half-length `L'` and identical spacings.
    pub fn with_half_length(&self, half_length: f64) -> Result<Self> {
        Self::new(half_length, self.width, self.h_s, self.h_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormTag {
    CurvedMagnetic,
    H0Schrodinger,
    StraightMagnetic,
    /// Hardy pencil `(K − Λ M, W)`.
    HardyShifted,
    Custom,
}

impl FormTag {
    pub fn tag(self) -> &'static str {
        match self {
            Self::CurvedMagnetic => "curved-magnetic",
            Self::H0Schrodinger => "h0-schrodinger",
            Self::StraightMagnetic => "straight-magnetic",
            Self::HardyShifted => "hardy-shifted",
            Self::Custom => "custom",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        [
            Self::CurvedMagnetic,
            Self::H0Schrodinger,
            Self::StraightMagnetic,
            Self::HardyShifted,
            Self::Custom,
        ]
        .into_iter()
        .find(|t| t.tag() == tag)
        .ok_or_else(|| Error::Domain(format!("unknown form tag `{tag}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyMeta {
    pub form: FormTag,
    pub geometry_hash: u64,
    pub field_hash: u64,
    pub grid: Option<StripGrid>,
}

/// Hermitian stiffness `K` with diagonal mass `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPair {
    pub k: CsrMatrix,
    pub mass: Vec<f64>,
    pub meta: AssemblyMeta,
}

impl OperatorPair {
    pub fn new(k: CsrMatrix, mass: Vec<f64>) -> Result<Self> {
        if k.dim != mass.len() {
            return Err(Error::Domain("stiffness and mass dimensions differ".into()));
        }
        if let Some(m) = mass.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Domain(format!(
                "mass weights must be positive, found {m}"
            )));
        }
        let meta = AssemblyMeta {
            form: FormTag::Custom,
            geometry_hash: 0,
            field_hash: 0,
            grid: None,
        };
        Ok(Self { k, mass, meta })
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Rayleigh quotient `x* K x / x* M x`.
    pub fn rayleigh(&self, x: &[C64]) -> f64 {
        let den: f64 = x
            .iter()
            .zip(&self.mass)
            .map(|(v, m)| v.norm_sqr() * m)
            .sum();
        self.k.quadratic_form(x) / den
    }

    /// `(K − σ M, W)` for the Hardy pencil.
    pub fn hardy_shifted(&self, shift: f64, weight: &WeightOperator) -> Result<Self> {
        let k = self.k.shifted(shift, &self.mass)?;
        let mut out = Self::new(k, weight.weights.clone())?;
        out.meta = AssemblyMeta {
            form: FormTag::HardyShifted,
            ..self.meta.clone()
        };
        Ok(out)
    }
}

/// Diagonal Hardy weights `M / (1 + s²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightOperator {
    pub weights: Vec<f64>,
}

/// FNV-1a over a sequence of floats; used to tag assemblies.
pub fn hash_floats(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn geometry_hash(geom: &WaveguideGeometry) -> u64 {
    let p = &geom.profile;
    let fam = p.family as u8 as f64;
    hash_floats(&[
        fam,
        p.amplitude,
        p.center,
        p.scale,
        geom.width,
        geom.half_length,
        geom.curve.step,
    ])
}

/// Sampled hash of a potential on the grid nodes.
fn potential_hash(pot: &dyn Potential, grid: &StripGrid) -> u64 {
    if pot.is_zero() {
        return 0;
    }
    let mut v = Vec::new();
    for i in (0..grid.n_s).step_by(7) {
        for j in (0..grid.n_u).step_by(3) {
            let c = pot.components(grid.s(i), grid.u(j));
            v.extend_from_slice(&c);
            v.push(pot.gauge_value(grid.s(i), grid.u(j)));
        }
    }
    hash_floats(&v)
}

struct EdgeSink<'a> {
    b: &'a mut CsrBuilder,
}

impl EdgeSink<'_> {
    /// Edge between `tail` and `head` (either may be a boundary node).
    #[inline]
    fn edge(&mut self, tail: Option<usize>, head: Option<usize>, w: f64, theta: f64) {
        if let Some(t) = tail {
            self.b.add(t, t, C64::new(w, 0.0));
        }
        if let Some(h) = head {
            self.b.add(h, h, C64::new(w, 0.0));
        }
        if let (Some(t), Some(h)) = (tail, head) {
            let link = if theta == 0.0 {
                C64::new(-w, 0.0)
            } else {
                C64::from_polar(w, -theta).scale(-1.0)
            };
            self.b.add(t, h, link);
            self.b.add(h, t, link.conj());
        }
    }
}

fn check_cover(geom: &WaveguideGeometry, grid: &StripGrid) -> Result<()> {
    if (geom.width - grid.width).abs() > 1e-12 * geom.width.max(1.0) {
        return Err(Error::Domain(format!(
            "grid width {} differs from strip width {}",
            grid.width, geom.width
        )));
    }
    if grid.half_length > geom.half_length * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "grid half-length {} exceeds sampled curve half-length {}",
            grid.half_length, geom.half_length
        )));
    }
    Ok(())
}

/// Frames at the `n_s + 2` node columns (boundary included) and `n_s + 1` midpoints.
fn frames(geom: &WaveguideGeometry, grid: &StripGrid) -> (Vec<Frame>, Vec<Frame>) {
    let l = grid.half_length;
    let col = |i: usize| -l + i as f64 * grid.h_s;
    let nodes: Vec<Frame> = (0..grid.n_s + 2)
        .map(|i| geom.frame(col(i).clamp(-l, l)))
        .collect();
    let mids: Vec<Frame> = (0..grid.n_s + 1)
        .map(|i| geom.frame(col(i) + 0.5 * grid.h_s))
        .collect();
    (nodes, mids)
}

/// Peierls discretisation of `∫ J⁻¹|(i∂_s + A_s)φ|² + J|(i∂_u + A_u)φ|²` with mass `J`.
pub fn assemble_curved_magnetic(
    geom: &WaveguideGeometry,
    pot: &PulledBackPotential<'_>,
    grid: &StripGrid,
) -> Result<OperatorPair> {
    geom.ensure_valid()?;
    check_cover(geom, grid)?;
    let (nodes, mids) = frames(geom, grid);
    let (ns, nu) = (grid.n_s, grid.n_u);
    let (hs, hu) = (grid.h_s, grid.h_u);
    let magnetic = !pot.potential.is_zero();
    let mut b = CsrBuilder::new(grid.dim());
    let mut mass = vec![0.0; grid.dim()];
    // column c of `nodes` is interior column c − 1
    let node = |c: usize, r: usize| -> Option<usize> {
        (c >= 1 && c <= ns && r >= 1 && r <= nu).then(|| grid.index(c - 1, r - 1))
    };
    let uval = |r: usize| r as f64 * hu;

    for c in 1..=ns {
        for r in 1..=nu {
            let jac = nodes[c].jacobian(uval(r));
            if !(jac > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "Jacobian {jac} <= 0 at s = {}",
                    nodes[c].s
                )));
            }
            mass[grid.index(c - 1, r - 1)] = jac * hs * hu;
        }
    }

    let mut sink = EdgeSink { b: &mut b };
    // s-links: column c → c + 1 at row r
    for c in 0..=ns {
        let fm = &mids[c];
        for r in 1..=nu {
            let u = uval(r);
            let jac = fm.jacobian(u);
            if !(jac > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "Jacobian {jac} <= 0 at s = {}",
                    fm.s
                )));
            }
            let w = hu / (hs * jac);
            let (t, h) = (node(c, r), node(c + 1, r));
            let theta = if magnetic && t.is_some() && h.is_some() {
                pot.link_integral((&nodes[c], u), (&nodes[c + 1], u), (fm, u))
            } else {
                0.0
            };
            sink.edge(t, h, w, theta);
        }
    }
    // u-links: row r → r + 1 at column c
    for (c, f) in nodes.iter().enumerate().take(ns + 1).skip(1) {
        for r in 0..=nu {
            let um = (r as f64 + 0.5) * hu;
            let w = f.jacobian(um) * hs / hu;
            let (t, h) = (node(c, r), node(c, r + 1));
            let theta = if magnetic && t.is_some() && h.is_some() {
                pot.link_integral((f, uval(r)), (f, uval(r + 1)), (f, um))
            } else {
                0.0
            };
            sink.edge(t, h, w, theta);
        }
    }

    let k = b.build();
    Ok(OperatorPair {
        k,
        mass,
        meta: AssemblyMeta {
            form: FormTag::CurvedMagnetic,
            geometry_hash: geometry_hash(geom),
            field_hash: potential_hash(pot.potential, grid),
            grid: Some(*grid),
        },
    })
}

/// `W(s, u) = −γ²/(4J²) + uγ̈/(2J³) − 5u²γ̇²/(4J⁴)`, `J = 1 + uγ`.
#[inline]
pub fn effective_potential(frame: &Frame, u: f64) -> f64 {
    let j = frame.jacobian(u);
    let (g, gd, gdd) = (frame.gamma, frame.gamma_dot, frame.gamma_ddot);
    -g * g / (4.0 * j * j) + u * gdd / (2.0 * j * j * j) - 1.25 * u * u * gd * gd / (j * j * j * j)
}

/// Flux-form discretisation of `−∂_s(J⁻²∂_s) − ∂_u² + W` with `M = h_s h_u I`.
pub fn assemble_h0_schrodinger(geom: &WaveguideGeometry, grid: &StripGrid) -> Result<OperatorPair> {
    geom.ensure_valid()?;
    check_cover(geom, grid)?;
    let (nodes, mids) = frames(geom, grid);
    let (ns, nu) = (grid.n_s, grid.n_u);
    let (hs, hu) = (grid.h_s, grid.h_u);
    let mut b = CsrBuilder::new(grid.dim());
    let node = |c: usize, r: usize| -> Option<usize> {
        (c >= 1 && c <= ns && r >= 1 && r <= nu).then(|| grid.index(c - 1, r - 1))
    };
    let mut sink = EdgeSink { b: &mut b };
    for c in 0..=ns {
        for r in 1..=nu {
            let jac = mids[c].jacobian(r as f64 * hu);
            if !(jac > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "Jacobian {jac} <= 0 at s = {}",
                    mids[c].s
                )));
            }
            sink.edge(node(c, r), node(c + 1, r), hu / (hs * jac * jac), 0.0);
        }
    }
    for c in 1..=ns {
        for r in 0..=nu {
            sink.edge(node(c, r), node(c, r + 1), hs / hu, 0.0);
        }
    }
    for c in 1..=ns {
        for r in 1..=nu {
            let k = grid.index(c - 1, r - 1);
            b.add(
                k,
                k,
                C64::new(effective_potential(&nodes[c], r as f64 * hu) * hs * hu, 0.0),
            );
        }
    }
    Ok(OperatorPair {
        k: b.build(),
        mass: vec![hs * hu; grid.dim()],
        meta: AssemblyMeta {
            form: FormTag::H0Schrodinger,
            geometry_hash: geometry_hash(geom),
            field_hash: 0,
            grid: Some(*grid),
        },
    })
}

/// Magnetic pencil on the straight strip with `(x, y) = (s, u)` and the Hardy weights `M/(1 + s²)`.
pub fn assemble_straight_magnetic(
    grid: &StripGrid,
    pot: &dyn Potential,
) -> Result<(OperatorPair, WeightOperator)> {
    let geom = WaveguideGeometry::straight(grid.width, grid.half_length)?;
    let pb = PulledBackPotential {
        geom: &geom,
        potential: pot,
    };
    let mut pair = assemble_curved_magnetic(&geom, &pb, grid)?;
    pair.meta.form = FormTag::StraightMagnetic;
    let weights = (0..grid.dim())
        .map(|k| {
            let (s, _) = grid.coords(k);
            pair.mass[k] / (1.0 + s * s)
        })
        .collect();
    Ok((pair, WeightOperator { weights }))
}

const DUMP_MAGIC: &[u8; 4] = b"WGKM";
const DUMP_VERSION: u32 = 1;

/// Binary triplet dump of `(K, M)`, little-endian:
///
/// ```text
/// magic "WGKM" | u32 version | u64 dim | u64 nnz | u32 tag_len | tag bytes
/// nnz × (u64 row | u64 col | f64 re | f64 im)
/// dim × f64 mass
/// ```
pub fn write_pencil<W: Write>(pair: &OperatorPair, mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Numeric(format!("pencil dump: {e}"));
    let tag = pair.meta.form.tag().as_bytes();
    w.write_all(DUMP_MAGIC).map_err(io)?;
    w.write_all(&DUMP_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(pair.dim() as u64).to_le_bytes())
        .map_err(io)?;
    w.write_all(&(pair.k.nnz() as u64).to_le_bytes())
        .map_err(io)?;
    w.write_all(&(tag.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(tag).map_err(io)?;
    for i in 0..pair.dim() {
        for (j, v) in pair.k.row(i) {
            let mut rec = [0u8; 32];
            rec[..8].copy_from_slice(&(i as u64).to_le_bytes());
            rec[8..16].copy_from_slice(&(j as u64).to_le_bytes());
            rec[16..24].copy_from_slice(&v.re.to_le_bytes());
            rec[24..].copy_from_slice(&v.im.to_le_bytes());
            w.write_all(&rec).map_err(io)?;
        }
    }
    for m in &pair.mass {
        w.write_all(&m.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_pencil<R: Read>(mut r: R) -> Result<OperatorPair> {
    let io = |e: std::io::Error| Error::Numeric(format!("pencil dump: {e}"));
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io)?;
    if &b4 != DUMP_MAGIC {
        return Err(Error::Numeric("not a pencil dump".into()));
    }
    r.read_exact(&mut b4).map_err(io)?;
    if u32::from_le_bytes(b4) != DUMP_VERSION {
        return Err(Error::Numeric("unsupported pencil dump version".into()));
    }
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8).map_err(io)?;
        Ok(u64::from_le_bytes(b8))
    };
    let dim = next_u64(&mut r)? as usize;
    let nnz = next_u64(&mut r)? as usize;
    r.read_exact(&mut b4).map_err(io)?;
    let mut tag = vec![0u8; u32::from_le_bytes(b4) as usize];
    r.read_exact(&mut tag).map_err(io)?;
    let tag =
        String::from_utf8(tag).map_err(|e| Error::Numeric(format!("pencil dump tag: {e}")))?;
    let mut b = CsrBuilder::new(dim);
    for _ in 0..nnz {
        let mut rec = [0u8; 32];
        r.read_exact(&mut rec).map_err(io)?;
        let f = |a: usize| u64::from_le_bytes(rec[a..a + 8].try_into().unwrap());
        let (i, j) = (f(0) as usize, f(8) as usize);
        if i >= dim || j >= dim {
            return Err(Error::Numeric("pencil dump index out of range".into()));
        }
        b.add(i, j, C64::new(f64::from_bits(f(16)), f64::from_bits(f(24))));
    }
    let mut mass = Vec::with_capacity(dim);
    for _ in 0..dim {
        r.read_exact(&mut b8).map_err(io)?;
        mass.push(f64::from_le_bytes(b8));
    }
    let mut pair = OperatorPair::new(b.build(), mass)?;
    pair.meta.form = FormTag::from_tag(&tag).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(pair)
}
