//! The five cone-point surgeries and their inverses.
//!
//! S1, S2 and S4 all excise a kite `p, b, c, a` (counterclockwise, apex `p`,
//! opposite vertex `c`) and glue its sides `a p` to `b p` and `c a` to `c b`.
//! For S1 the vertex `c` is the cone point being split and the sides `c a`,
//! `c b` coincide; for S2 the kite straddles the cone point; for S4 it sits in
//! a regular torus. S3 cuts two cones along closed geodesic loops and glues
//! the loops; S5 slits a saddle connection and inserts a cylinder.
//!
//! Positions `z₀` are read in the cone of the target point: distance `|z₀|`,
//! direction `arg z₀` measured counterclockwise from the lexicographically
//! first Delaunay edge leaving the target.

use std::f64::consts::{PI, TAU};

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::angles::{leaf_label, AngleDatum, LeafLabel, RationalAngle, ReductionWitness};
use crate::delaunay::{delaunay, edge_lengths, max_circumradius};
use crate::metrics::{saddle_connections, SaddleConnection};
use crate::surface::{tau_torus, End, FlatSurface, Handle, Patch, C64};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurgeryKind {
    S1,
    S2,
    S3,
    S4,
    S5,
}

/// One cone point, or several, by index into [`FlatSurface::cone_angles`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    One(usize),
    Many(Vec<usize>),
}

impl Default for Target {
    fn default() -> Self {
        Target::One(0)
    }
}

impl Target {
    fn indices(&self) -> Vec<usize> {
        match self {
            Target::One(i) => vec![*i],
            Target::Many(v) => v.clone(),
        }
    }
}

/// A surgery request as read from JSON.
///
/// `split` holds `(θ′, θ″)` for S1/S2/S3 and `(θ₁, θ₂, θ₃)` for S4; S1/S2
/// accept `θ′` alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgerySpec {
    pub kind: SurgeryKind,
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub split: Vec<RationalAngle>,
    pub z0: [f64; 2],
    #[serde(default)]
    pub branch: u32,
}

impl SurgerySpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(format!("surgery spec: {e}")))
    }
}

#[derive(Clone, Debug)]
pub struct SurgeryResult {
    pub kind: SurgeryKind,
    pub surface: FlatSurface,
    /// Width at area one.
    pub width: f64,
    /// `area(before) − area(after)`; negative for S5.
    pub defect: f64,
    /// `defect / |z₀|²`.
    pub mu: f64,
    pub z0: C64,
    /// Labels of the cone points created by the surgery.
    pub new_labels: Vec<u32>,
    pub witness: Option<ReductionWitness>,
}

/// Outcome of an attempted reverse surgery.
#[derive(Clone, Debug)]
pub enum Reversal {
    Reversed(Box<SurgeryResult>),
    /// A cone point lies on the extension; `kite` when it sits exactly at its end.
    Blocked { kite: bool },
}

const ANG_TOL: f64 = 1e-7;

fn target_label(s: &FlatSurface, index: usize) -> Result<(u32, f64)> {
    let c = s.cone_angles();
    let x = c.get(index).ok_or_else(|| Error::Input(format!("no cone point with index {index}")))?;
    Ok((x.label, x.angle))
}

/// The lexicographically first edge leaving the labelled vertex.
fn anchor(s: &FlatSurface, label: u32) -> Result<Handle> {
    let (t, i) = s.corner_of_label(label).ok_or_else(|| Error::Input(format!("no point labelled {label}")))?;
    let ids = s.corner_vertex_ids();
    let v = ids[3 * t + i];
    let c = (0..ids.len()).find(|&c| ids[c] == v && !s.tris[c / 3].dead).unwrap();
    Ok(Handle { hid: s.tris[c / 3].hid[c % 3], angle: 0.0 })
}

fn at(s: &FlatSurface, h: Handle, angle: f64) -> Result<Handle> {
    let total = s.handle_vertex_angle(h.hid)?;
    Ok(Handle { hid: h.hid, angle: (h.angle + angle).rem_euclid(total) })
}

fn partners_rev(s: &FlatSurface, path: &[u32]) -> Result<Vec<u32>> {
    path.iter()
        .rev()
        .map(|&h| s.partner_hid(h).ok_or_else(|| Error::Degenerate("path edge has no partner".into())))
        .collect()
}

fn label_vertex_of(s: &mut FlatSurface, hid: u32, label: Option<u32>) -> Result<()> {
    let (t, e) = s.find_hid(hid).ok_or_else(|| Error::Degenerate("lost track of a vertex".into()))?;
    s.set_vertex_label(t, e, label);
    Ok(())
}

/// Quadrilateral `p, b, c, a` with `p = 0`, `c = d` and mirror symmetry in
/// the real axis; `int_*` are interior angles.
#[derive(Clone, Copy, Debug)]
pub struct Kite {
    pub int_p: f64,
    pub int_a: f64,
    pub int_c: f64,
    pub a: C64,
    pub c: C64,
}

impl Kite {
    pub fn new(int_p: f64, int_a: f64, d: f64) -> Result<Kite> {
        let int_c = TAU - int_p - 2.0 * int_a;
        let ok = |x: f64, hi: f64| x > ANG_TOL && x < hi - ANG_TOL;
        if !(ok(int_p, TAU) && ok(int_c, TAU) && ok(int_a, PI)) || !(d > 0.0) {
            return Err(Error::Precondition(format!(
                "no kite with interior angles {int_p}, {int_a}, {int_c}"
            )));
        }
        let l = d * (int_c / 2.0).sin() / int_a.sin();
        Ok(Kite { int_p, int_a, int_c, a: C64::from_polar(l, int_p / 2.0), c: C64::new(d, 0.0) })
    }

    /// Side at the apex, `|p a|`.
    pub fn side_p(&self) -> f64 {
        self.a.norm()
    }

    /// Side at `c`, `|c a|`.
    pub fn side_c(&self) -> f64 {
        (self.a - self.c).norm()
    }

    pub fn area(&self) -> f64 {
        self.c.re * self.side_p() * (self.int_p / 2.0).sin()
    }

    pub fn polygon(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0), self.a.conj(), self.c, self.a]
    }

    fn scaled_to_side_p(&self, l: f64) -> Result<Kite> {
        Kite::new(self.int_p, self.int_a, self.c.re * l / self.side_p())
    }
}

/// Hids starting at the apex, at `a` (= `b`) and at `c` after an excision.
struct Excised {
    apex: u32,
    side: u32,
    centre: Option<u32>,
}

/// Remove `kite` with `c` at the labelled vertex and the apex in direction
/// `phi`; `single` when `c` is the whole cone (S1).
fn excise_kite(w: &mut FlatSurface, label: u32, phi: f64, kite: &Kite, single: bool) -> Result<Excised> {
    let h0 = anchor(w, label)?;
    let (ca, l) = (kite.side_c(), kite.side_p());
    let (ra, rb) = if single {
        let r = w.trace(at(w, h0, phi + kite.int_c / 2.0)?, ca, End::New)?;
        (r, None)
    } else {
        let ra = w.trace(at(w, h0, phi - kite.int_c / 2.0)?, ca, End::New)?;
        let rb = w.trace(at(w, h0, phi + kite.int_c / 2.0)?, ca, End::New)?;
        (ra, Some(rb))
    };
    let back_b = rb.as_ref().map_or(ra.back, |r| r.back);
    let pa = w.trace(w.rotate(ra.back, -kite.int_a)?, l, End::New)?;
    let pb = w.trace(w.rotate(back_b, kite.int_a)?, l, End::Snap(pa.back.hid))?;

    let mut right: Vec<u32> = pb.path.clone();
    let mut left: Vec<u32> = pa.path.clone();
    if let Some(rb) = &rb {
        right.extend(&rb.path);
        left.extend(&ra.path);
    }
    let region = w.region(&right, &left)?;
    let mut paths = right.clone();
    paths.extend(&left);
    let inside = w.interior_labels(&region, &paths);
    if inside.iter().any(|&x| x != label) || (!single && !inside.is_empty()) {
        return Err(Error::Precondition("the excised piece contains another cone point".into()));
    }
    let xa = partners_rev(w, &pa.path)?;
    let xra = match &rb {
        Some(_) => Some(partners_rev(w, &ra.path)?),
        None => None,
    };
    w.delete(&region);
    w.glue_chains(xa.clone(), pb.path.clone())?;
    if let (Some(x), Some(rb)) = (xra, &rb) {
        w.glue_chains(x, rb.path.clone())?;
    }
    Ok(Excised { apex: xa[0], side: pb.path[0], centre: rb.map(|r| r.path[0]) })
}

fn recognise(x: f64) -> Option<RationalAngle> {
    let t = x / TAU;
    (1..=2520i64).find_map(|den| {
        let num = (t * den as f64).round();
        ((t - num / den as f64).abs() < 1e-9).then(|| RationalAngle::new(num as i64, den).ok()).flatten()
    })
}

fn leaf_of(s: &FlatSurface) -> Option<LeafLabel> {
    let angles: Option<Vec<RationalAngle>> =
        s.singular_angles(ANG_TOL).iter().map(|c| recognise(c.angle)).collect();
    let angles = angles.filter(|a| !a.is_empty());
    leaf_label(AngleDatum::new(s.genus().ok()?, angles?), 1).ok()
}

fn finish(
    kind: SurgeryKind,
    before: &FlatSurface,
    mut surface: FlatSurface,
    width: f64,
    defect: f64,
    z0: C64,
    new_labels: Vec<u32>,
) -> Result<SurgeryResult> {
    surface.remove_unmarked()?;
    surface.check(1e-7)?;
    let area = surface.area();
    let residual = (before.area() - area - defect).abs();
    if residual > 1e-7 * (1.0 + area) {
        return Err(Error::Degenerate(format!("area bookkeeping is off by {residual}")));
    }
    let witness = match (leaf_of(&surface), leaf_of(before)) {
        (Some(p), Some(c)) => ReductionWitness::new(p, c, kind).ok(),
        _ => None,
    };
    let mu = defect / z0.norm_sqr();
    Ok(SurgeryResult { kind, width: width / area.sqrt(), defect, mu, z0, new_labels, witness, surface })
}

fn working_copy(s: &FlatSurface) -> Result<FlatSurface> {
    let mut w = delaunay(s)?;
    w.remove_unmarked()?;
    delaunay(&w)
}

/// Thurston's surgery at a point of angle `θ₁ < 2π`: the new points have
/// angles `θ′` (at `z₀`) and `θ″ = θ₁ + 2π − θ′`.
pub fn s1(s: &FlatSurface, target: usize, theta_p: f64, z0: C64) -> Result<SurgeryResult> {
    let (label, th1) = target_label(s, target)?;
    let th2 = th1 + TAU - theta_p;
    if !(th1 < TAU - ANG_TOL) || !(theta_p < TAU && th2 < TAU && theta_p > 0.0 && th2 > 0.0) {
        return Err(Error::Precondition("S1 needs θ₁, θ′, θ″ below 2π".into()));
    }
    let kite = Kite::new(TAU - theta_p, (TAU - th2) / 2.0, z0.norm())?;
    let mut w = working_copy(s)?;
    let ex = excise_kite(&mut w, label, z0.arg(), &kite, true)?;
    let fresh = w.fresh_label();
    label_vertex_of(&mut w, ex.apex, Some(label))?;
    label_vertex_of(&mut w, ex.side, Some(fresh))?;
    finish(SurgeryKind::S1, s, w, kite.side_p(), kite.area(), z0, vec![label, fresh])
}

/// Thurston's surgery at a point of angle `θ₁ ∈ (2π, 4π)`: new points of
/// angles `θ′ > 2π` and `θ″ = θ₁ + 2π − θ′ < 2π` (at `z₀`).
pub fn s2(s: &FlatSurface, target: usize, theta_p: f64, z0: C64) -> Result<SurgeryResult> {
    let (label, th1) = target_label(s, target)?;
    let th2 = th1 + TAU - theta_p;
    if !(th1 > TAU + ANG_TOL && th1 < 2.0 * TAU) || !(theta_p > TAU && th2 > 0.0 && th2 < TAU) {
        return Err(Error::Precondition("S2 needs 2π < θ₁ < 4π, θ′ > 2π and θ″ < 2π".into()));
    }
    let kite = Kite::new(TAU - th2, TAU - theta_p / 2.0, z0.norm())?;
    let mut w = working_copy(s)?;
    let ex = excise_kite(&mut w, label, z0.arg(), &kite, false)?;
    let fresh = w.fresh_label();
    label_vertex_of(&mut w, ex.centre.unwrap(), None)?;
    label_vertex_of(&mut w, ex.side, Some(label))?;
    label_vertex_of(&mut w, ex.apex, Some(fresh))?;
    finish(SurgeryKind::S2, s, w, kite.side_p(), kite.area(), z0, vec![label, fresh])
}

/// Kite surgery on a marked regular point: creates points of angles
/// `θ₁ ∈ (2π, 4π)` (the two side vertices), `θ₂` (the target) and `θ₃` (at `z₀`).
pub fn s4_kite_on(s: &FlatSurface, target: usize, z0: C64, theta: [f64; 3]) -> Result<SurgeryResult> {
    let (label, th) = target_label(s, target)?;
    if (th - TAU).abs() > ANG_TOL {
        return Err(Error::Precondition("the kite surgery starts from a regular point".into()));
    }
    let [t1, t2, t3] = theta;
    if (3.0 * TAU - t1 - t2 - t3).abs() > ANG_TOL || !(t1 > TAU && t1 < 2.0 * TAU) {
        return Err(Error::Precondition("kite angles need θ₁+θ₂+θ₃ = 6π and 2π < θ₁ < 4π".into()));
    }
    let kite = Kite::new(TAU - t3, TAU - t1 / 2.0, z0.norm())?;
    let mut w = working_copy(s)?;
    let ex = excise_kite(&mut w, label, z0.arg(), &kite, false)?;
    let f1 = w.fresh_label();
    label_vertex_of(&mut w, ex.side, Some(f1))?;
    let f3 = w.fresh_label();
    label_vertex_of(&mut w, ex.apex, Some(f3))?;
    finish(SurgeryKind::S4, s, w, z0.norm(), kite.area(), z0, vec![f1, label, f3])
}

/// Kite surgery on the torus `ℂ/(ℤ + τℤ)` with its marked point at the kite's
/// `θ₂` vertex.
pub fn s4_kite(tau: C64, z0: C64, theta: [f64; 3]) -> Result<SurgeryResult> {
    if !(tau.im > 0.0) {
        return Err(Error::Input("τ must lie in the upper half-plane".into()));
    }
    s4_kite_on(&tau_torus(tau), 0, z0, theta)
}

/// Slit along `path1` (and `path2` continuing it), insert `kite` with its apex
/// at the start of `path1`, and return the hid at the kite's `c` vertex.
fn insert_kite(w: &mut FlatSurface, path1: &[u32], path2: Option<&[u32]>, kite: &Kite) -> Result<u32> {
    let r1 = partners_rev(w, path1)?;
    let r2 = match path2 {
        Some(p) => Some(partners_rev(w, p)?),
        None => None,
    };
    w.unglue(path1)?;
    if let Some(p) = path2 {
        w.unglue(p)?;
    }
    let self_glue = if path2.is_none() { vec![(1, 2)] } else { vec![] };
    let sides = w.insert_patch(&Patch { poly: kite.polygon(), labels: vec![None; 4], self_glue })?;
    w.glue_chains(path1.to_vec(), vec![sides[3]])?;
    w.glue_chains(r1, vec![sides[0]])?;
    if let (Some(p), Some(r2)) = (path2, r2) {
        w.glue_chains(p.to_vec(), vec![sides[2]])?;
        w.glue_chains(r2, vec![sides[1]])?;
    }
    Ok(sides[2])
}

fn reversed(c: &SaddleConnection) -> SaddleConnection {
    let mut r = c.clone();
    std::mem::swap(&mut r.from, &mut r.to);
    std::mem::swap(&mut r.from_label, &mut r.to_label);
    std::mem::swap(&mut r.start, &mut r.end);
    std::mem::swap(&mut r.start_corner, &mut r.end_corner);
    r.crossings.clear();
    r
}

/// Reverse Thurston's surgery along a saddle connection between a point of
/// angle below 2π and a second cone point: S1 when both are below 2π, S2
/// when the second exceeds 2π. The connection may be given in either
/// direction when only one endpoint is below 2π.
pub fn reverse_thurston(s: &FlatSurface, sc: &SaddleConnection) -> Result<Reversal> {
    let angle_of = |l: Option<u32>| -> Result<f64> {
        let l = l.ok_or_else(|| Error::Precondition("saddle connection ends at an unmarked point".into()))?;
        let (t, i) = s.corner_of_label(l).ok_or_else(|| Error::Input(format!("no point labelled {l}")))?;
        Ok(s.vertex_angle(t, i))
    };
    let mut sc = sc.clone();
    if angle_of(sc.from_label)? > TAU && angle_of(sc.to_label)? < TAU {
        sc = reversed(&sc);
    }
    let (tx, ty) = (angle_of(sc.from_label)?, angle_of(sc.to_label)?);
    if sc.from_label == sc.to_label || !(tx < TAU - ANG_TOL) || (ty - TAU).abs() < ANG_TOL {
        return Err(Error::Precondition("reverse surgery needs two distinct singular points, one below 2π".into()));
    }
    let l = sc.length;
    let s2 = ty > TAU;
    let (kind, kite) = if s2 {
        (SurgeryKind::S2, Kite::new(TAU - tx, TAU - ty / 2.0, 1.0)?.scaled_to_side_p(l)?)
    } else {
        (SurgeryKind::S1, Kite::new(TAU - tx, (TAU - ty) / 2.0, 1.0)?.scaled_to_side_p(l)?)
    };
    let big_l = l * (tx / 2.0).sin() / ((tx + ty) / 2.0).sin();
    if s2 {
        // anything met by the bisecting extension blocks the reversal
        let (_, pos_end) = s.dir_position(sc.end.hid, sc.end.angle).ok_or_else(|| Error::Degenerate("stale handle".into()))?;
        let dir = (pos_end + ty / 2.0).rem_euclid(ty);
        let tol = 1e-7 * (1.0 + big_l);
        let y = sc.to;
        for c in saddle_connections(s, big_l + 2.0 * tol) {
            if c.from != y {
                continue;
            }
            let (_, p) = s.dir_position(c.start.hid, c.start.angle).unwrap_or((0, f64::NAN));
            let d = (p - dir).rem_euclid(ty);
            if d.min(ty - d) < 1e-9 * ty {
                return Ok(Reversal::Blocked { kite: (c.length - big_l).abs() <= tol });
            }
        }
    }
    let mut w = s.clone();
    let keep = sc.from_label.min(sc.to_label);
    let p1 = w.trace(sc.start, l, End::Snap(sc.end.hid))?;
    let p2 = if s2 { Some(w.trace(w.rotate(p1.back, ty / 2.0)?, big_l, End::New)?) } else { None };
    let c_hid = insert_kite(&mut w, &p1.path, p2.as_ref().map(|p| p.path.as_slice()), &kite)?;
    // the endpoints and both copies of the middle point become regular
    clear_labels(&mut w, &[sc.from_label, sc.to_label]);
    label_vertex_of(&mut w, c_hid, keep)?;
    let out = finish(kind, s, w, l, -kite.area(), C64::new(kite.c.re, 0.0), keep.into_iter().collect())?;
    Ok(Reversal::Reversed(Box::new(out)))
}

fn clear_labels(w: &mut FlatSurface, labels: &[Option<u32>]) {
    for v in w.vertices() {
        if v.label.is_some() && labels.contains(&v.label) {
            let (t, i) = v.corners[0];
            w.set_vertex_label(t, i, None);
        }
    }
}

/// Reverse S2 along a saddle connection `p″ → p′`.
pub fn reverse_s2(s: &FlatSurface, sc: &SaddleConnection) -> Result<Option<SurgeryResult>> {
    Ok(match reverse_thurston(s, sc)? {
        Reversal::Reversed(r) => Some(*r),
        Reversal::Blocked { .. } => None,
    })
}

/// Reverse the kite surgery on a torus with one point of angle above 2π and
/// two below: finds a pair of saddle connections `x → y → z` bisecting the
/// angle at `y` with the kite's side ratio, and glues the kite back in.
pub fn reverse_s4(s: &FlatSurface) -> Result<Option<SurgeryResult>> {
    let w = working_copy(s)?;
    if w.genus()? != 1 {
        return Err(Error::Precondition("the kite surgery is reversed on tori".into()));
    }
    let cones = w.singular_angles(ANG_TOL);
    if cones.len() != 3 || !(cones[0].angle > TAU) || !(cones[1].angle < TAU) {
        return Err(Error::Precondition("reverse kite surgery needs angles θ₁ > 2π > θ₂, θ₃".into()));
    }
    let ty = cones[0].angle;
    let angle_of = |l: Option<u32>| cones.iter().find(|c| Some(c.label) == l).map(|c| c.angle);
    let reach = 3.0 * edge_lengths(&w).last().copied().unwrap_or(1.0) + 4.0 * max_circumradius(&w);
    let scs = saddle_connections(&w, reach);
    let tol = 1e-7;
    let mut best: Option<(f64, SaddleConnection, SaddleConnection)> = None;
    for into in scs.iter().filter(|c| c.to_label == Some(cones[0].label)) {
        let Some(tx) = angle_of(into.from_label).filter(|&a| a < TAU) else { continue };
        let Some((_, pe)) = w.dir_position(into.end.hid, into.end.angle) else { continue };
        let want = (pe + ty / 2.0).rem_euclid(ty);
        for out in scs.iter().filter(|c| c.from_label == Some(cones[0].label)) {
            let Some(tz) = angle_of(out.to_label).filter(|&a| a < TAU) else { continue };
            if out.to_label == into.from_label {
                continue;
            }
            let Some((_, ps)) = w.dir_position(out.start.hid, out.start.angle) else { continue };
            let d = (ps - want).rem_euclid(ty);
            let ratio = (tx / 2.0).sin() / (tz / 2.0).sin();
            if d.min(ty - d) < 1e-7 * ty && (out.length - ratio * into.length).abs() < tol * (1.0 + out.length) {
                let total = into.length + out.length;
                if best.as_ref().map_or(true, |b| total < b.0 - tol) {
                    best = Some((total, into.clone(), out.clone()));
                }
            }
        }
    }
    let Some((_, into, out)) = best else { return Ok(None) };
    let (tx, tz) = (angle_of(into.from_label).unwrap(), angle_of(out.to_label).unwrap());
    let kite = Kite::new(TAU - tx, TAU - ty / 2.0, 1.0)?.scaled_to_side_p(into.length)?;
    let mut w = w;
    let p1 = w.trace(into.start, into.length, End::Snap(into.end.hid))?;
    let p2 = w.trace(w.rotate(p1.back, ty / 2.0)?, out.length, End::Snap(out.end.hid))?;
    let c_hid = insert_kite(&mut w, &p1.path, Some(&p2.path), &kite)?;
    clear_labels(&mut w, &[into.from_label, into.to_label]);
    label_vertex_of(&mut w, c_hid, out.to_label)?;
    debug_assert!((TAU - tz - kite.int_c).abs() < 1e-6);
    let d = kite.c.re;
    Ok(Some(finish(SurgeryKind::S4, s, w, d, -kite.area(), C64::new(d, 0.0), vec![])?))
}

/// A ray from the cone point to `q` at distance `r`, then either the loop
/// around the cone (θ < π, the tip is removed) or a slit filled by an
/// isosceles triangle of apex angle `2π − θ` (θ > π, the tip becomes
/// regular). Returns the boundary chain from `q` back to `q`, body on its left.
fn open_cone(w: &mut FlatSurface, label: u32, phi: f64, r: f64) -> Result<(Vec<u32>, f64)> {
    let h0 = anchor(w, label)?;
    let theta = w.handle_vertex_angle(h0.hid)?;
    let ray = w.trace(at(w, h0, phi)?, r, End::New)?;
    if (theta - PI).abs() < ANG_TOL {
        return Err(Error::Precondition("the cone loop degenerates for an angle of π".into()));
    }
    if theta < PI {
        let ell = 2.0 * r * (theta / 2.0).sin();
        let lp = w.trace(w.rotate(ray.back, -(PI - theta) / 2.0)?, ell, End::Snap(ray.back.hid))?;
        let region = w.region(&[], &lp.path)?;
        if w.interior_labels(&region, &lp.path).iter().any(|&x| x != label) {
            return Err(Error::Precondition("the truncated cone contains another cone point".into()));
        }
        let chain = partners_rev(w, &lp.path)?;
        w.delete(&region);
        return Ok((chain, 0.5 * r * r * theta.sin()));
    }
    let beta = (TAU - theta) / 2.0;
    let o = C64::new(0.0, 0.0);
    let poly = vec![o, C64::from_polar(r, -beta), C64::from_polar(r, beta)];
    let back = partners_rev(w, &ray.path)?;
    w.unglue(&ray.path)?;
    let sides = w.insert_patch(&Patch { poly, labels: vec![None; 3], self_glue: vec![] })?;
    w.glue_chains(ray.path.clone(), vec![sides[2]])?;
    w.glue_chains(back, vec![sides[0]])?;
    label_vertex_of(w, ray.path[0], None)?;
    Ok((vec![sides[1]], 0.5 * r * r * theta.sin()))
}

/// Rational angle in turns, if the float is one with a small denominator.
fn turns_of(x: f64) -> Result<Ratio<i64>> {
    recognise(x)
        .map(|a| a.turns())
        .ok_or_else(|| Error::Precondition(format!("angle {x} is not a rational multiple of 2π")))
}

/// Number of essentially different Devil's surgeries for two angles whose
/// holonomy has order dividing `order`, and the angular step between
/// consecutive branches.
pub fn devil_branches(theta1: f64, theta2: f64, order: u64) -> Result<(u64, f64)> {
    let (a, b) = (turns_of(theta1)?, turns_of(theta2)?);
    let den = order as i64;
    if den <= 0 || den % a.denom() != 0 || den % b.denom() != 0 {
        return Err(Error::Precondition(format!("holonomy order {order} does not fit the angles")));
    }
    let (r1, r2) = (a.numer() * (den / a.denom()), b.numer() * (den / b.denom()));
    Ok((r1.gcd(&r2) as u64, TAU / den as f64))
}

/// The Devil's surgery joining cone points `targets` (both below 2π, neither
/// equal to π) by a handle. `q′` sits at `z₀` in the first cone; `branch`
/// rotates `q″` by multiples of the branch step.
pub fn s3_devil(s: &FlatSurface, targets: [usize; 2], z0: C64, branch: u32) -> Result<SurgeryResult> {
    let (l1, t1) = target_label(s, targets[0])?;
    let (l2, t2) = target_label(s, targets[1])?;
    if l1 == l2 || !(t1 < TAU - ANG_TOL && t2 < TAU - ANG_TOL) {
        return Err(Error::Precondition("the Devil's surgery needs two distinct points below 2π".into()));
    }
    let order = s
        .singular_angles(ANG_TOL)
        .iter()
        .map(|c| turns_of(c.angle).map(|t| *t.denom()))
        .collect::<Result<Vec<i64>>>()?
        .into_iter()
        .fold(1i64, |m, d| m.lcm(&d));
    let (count, step) = devil_branches(t1, t2, order as u64)?;
    if branch as u64 >= count {
        return Err(Error::Precondition(format!("branch {branch} out of range 0..{count}")));
    }
    let r1 = z0.norm();
    let r2 = r1 * (t1 / 2.0).sin() / (t2 / 2.0).sin();
    let mut w = working_copy(s)?;
    let (c1, d1) = open_cone(&mut w, l1, z0.arg(), r1)?;
    let (c2, d2) = open_cone(&mut w, l2, z0.arg() + branch as f64 * step, r2)?;
    let q = c1[0];
    w.glue_chains(c1, c2)?;
    clear_labels(&mut w, &[Some(l2)]);
    label_vertex_of(&mut w, q, Some(l1))?;
    let width = 2.0 * r1 * (t1 / 2.0).sin();
    finish(SurgeryKind::S3, s, w, width, d1 + d2, z0, vec![l1])
}

/// Shortest saddle connection between two labelled points.
pub fn shortest_connection(s: &FlatSurface, from: u32, to: u32) -> Result<SaddleConnection> {
    let mut reach = 2.0 * edge_lengths(s).last().copied().unwrap_or(1.0);
    for _ in 0..6 {
        let hit = saddle_connections(s, reach)
            .into_iter()
            .find(|c| c.from_label == Some(from) && c.to_label == Some(to));
        if let Some(c) = hit {
            return Ok(c);
        }
        reach *= 2.0;
    }
    Err(Error::Precondition(format!("no saddle connection from {from} to {to}")))
}

/// Slit the shortest saddle connection between `targets` and glue in a
/// cylinder of base `z₁` (the connection) and height `z₀z₁`.
pub fn s5_cylinder(s: &FlatSurface, targets: [usize; 2], z0: C64) -> Result<SurgeryResult> {
    if !(z0.im > 0.0) {
        return Err(Error::Precondition("the cylinder modulus needs Im z₀ > 0".into()));
    }
    let (l1, _) = target_label(s, targets[0])?;
    let (l2, _) = target_label(s, targets[1])?;
    if l1 == l2 {
        return Err(Error::Precondition("S5 joins two distinct points".into()));
    }
    let mut w = working_copy(s)?;
    let sc = shortest_connection(&w, l1, l2)?;
    let p = w.trace(sc.start, sc.length, End::Snap(sc.end.hid))?;
    let q = partners_rev(&w, &p.path)?;
    w.unglue(&p.path)?;
    let base = C64::new(sc.length, 0.0);
    let h = base * z0;
    let poly = vec![C64::new(0.0, 0.0), base, base + h, h];
    let sides = w.insert_patch(&Patch { poly, labels: vec![None; 4], self_glue: vec![(1, 3)] })?;
    w.glue_chains(q, vec![sides[0]])?;
    w.glue_chains(p.path.clone(), vec![sides[2]])?;
    clear_labels(&mut w, &[Some(l2)]);
    label_vertex_of(&mut w, p.path[0], Some(l1))?;
    let defect = -sc.length * sc.length * z0.im;
    finish(SurgeryKind::S5, s, w, sc.length, defect, z0, vec![l1])
}

/// Cone angle around the codimension-1 stratum reached by a surgery.
///
/// S1/S2 take `[θ₁]`, the angle of the point blown up. S3 takes the two
/// angles `2πm′/M, 2πm″/M`, giving `2π·lcm(m′, m″)/M`.
pub fn stratum_cone_angle(kind: SurgeryKind, angles: &[RationalAngle]) -> Result<RationalAngle> {
    match kind {
        SurgeryKind::S1 | SurgeryKind::S2 => {
            angles.first().copied().ok_or_else(|| Error::Input("S1/S2 need the blown-up angle".into()))
        }
        SurgeryKind::S3 => {
            let [a, b] = angles else {
                return Err(Error::Input("S3 needs two angles".into()));
            };
            let big_m = a.den().lcm(&b.den());
            let (m1, m2) = (a.num() * (big_m / a.den()), b.num() * (big_m / b.den()));
            RationalAngle::new(m1.lcm(&m2), big_m)
        }
        SurgeryKind::S4 => RationalAngle::new(1, 2),
        SurgeryKind::S5 => Err(Error::Precondition("S5 does not bound a codimension-1 stratum".into())),
    }
}

fn check_split(want: f64, got: Option<&RationalAngle>) -> Result<()> {
    match got {
        Some(a) if (a.radians() - want).abs() > ANG_TOL => {
            Err(Error::Precondition(format!("split angle {a} does not match the surface ({want})")))
        }
        _ => Ok(()),
    }
}

/// Run a surgery described by a spec.
pub fn apply(s: &FlatSurface, spec: &SurgerySpec) -> Result<SurgeryResult> {
    let z0 = C64::new(spec.z0[0], spec.z0[1]);
    if !(z0.norm() > 0.0) || !z0.re.is_finite() || !z0.im.is_finite() {
        return Err(Error::Input("z0 must be a finite non-zero complex number".into()));
    }
    let idx = spec.target.indices();
    let one = || -> Result<usize> {
        match idx.as_slice() {
            [i] => Ok(*i),
            _ => Err(Error::Input("this surgery takes one target".into())),
        }
    };
    let two = || -> Result<[usize; 2]> {
        match idx.as_slice() {
            [i, j] => Ok([*i, *j]),
            _ => Err(Error::Input("this surgery takes two targets".into())),
        }
    };
    match spec.kind {
        SurgeryKind::S1 | SurgeryKind::S2 => {
            let i = one()?;
            let (_, th1) = target_label(s, i)?;
            let tp = spec.split.first().ok_or_else(|| Error::Input("split angle θ′ missing".into()))?.radians();
            check_split(th1 + TAU - tp, spec.split.get(1))?;
            if spec.kind == SurgeryKind::S1 {
                s1(s, i, tp, z0)
            } else {
                s2(s, i, tp, z0)
            }
        }
        SurgeryKind::S3 => {
            let t = two()?;
            for k in 0..2 {
                check_split(target_label(s, t[k])?.1, spec.split.get(k))?;
            }
            s3_devil(s, t, z0, spec.branch)
        }
        SurgeryKind::S4 => {
            let [a, b, c] = spec.split.as_slice() else {
                return Err(Error::Input("S4 needs three split angles".into()));
            };
            let curv = [a, b, c].iter().map(|x| Ratio::from_integer(1) - x.turns()).sum::<Ratio<i64>>();
            if curv != Ratio::from_integer(0) {
                return Err(Error::Input("kite angles must satisfy Σ(2π − θᵢ) = 0".into()));
            }
            s4_kite_on(s, one()?, z0, [a.radians(), b.radians(), c.radians()])
        }
        SurgeryKind::S5 => s5_cylinder(s, two()?, z0),
    }
}
