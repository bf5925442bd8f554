//! Flat surfaces stored as Euclidean triangles glued along edges.
//!
//! Every triangle lives in its own chart. Edge `e` of a triangle runs from
//! `p[e]` to `p[e+1]`. A gluing of `(t,e)` to `(t',e')` carries a unit
//! complex number `rot` with `rot · vec(t',e') = −vec(t,e)`; a point `x'` of
//! the partner chart lands at `p[e+1] + rot·(x' − p'[e'])`.
//!
//! Vertices are not stored. They are classes of corners under the
//! identifications induced by gluings. A vertex is *marked* when its corners
//! carry a label; every cone point is marked.

mod build;
pub(crate) mod edit;
mod io;

pub use build::*;
pub use edit::{End, Handle, Patch, TraceOut};
pub use io::{GluingJson, PolygonFile, SurfaceFile};

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type C64 = Complex64;

/// Default geometric tolerance on lengths and angles.
pub const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adj {
    pub t: usize,
    pub e: usize,
    pub rot: C64,
}

#[derive(Clone, Debug)]
pub struct Tri {
    pub p: [C64; 3],
    pub adj: [Option<Adj>; 3],
    pub label: [Option<u32>; 3],
    /// Half-edge ids; stable under local edits that keep the edge's start.
    pub hid: [u32; 3],
    pub dead: bool,
}

impl Tri {
    pub fn vec(&self, e: usize) -> C64 {
        self.p[(e + 1) % 3] - self.p[e]
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * cross(self.vec(0), self.p[2] - self.p[0])
    }

    /// Interior angle at corner `i`.
    pub fn angle(&self, i: usize) -> f64 {
        let a = self.p[(i + 1) % 3] - self.p[i];
        let b = self.p[(i + 2) % 3] - self.p[i];
        (b / a).arg().abs()
    }
}

#[derive(Clone, Debug, Default)]
pub struct FlatSurface {
    pub tris: Vec<Tri>,
    next_hid: u32,
    next_label: u32,
}

/// A vertex with its corner classes and total angle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub label: Option<u32>,
    pub angle: f64,
    pub corners: Vec<(usize, usize)>,
    pub boundary: bool,
}

/// Cone angle reported per marked point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeAngle {
    pub label: u32,
    pub angle: f64,
}

pub fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

pub fn dot(a: C64, b: C64) -> f64 {
    a.re * b.re + a.im * b.im
}

pub(crate) struct UnionFind(Vec<usize>);

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    pub fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    pub fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

impl FlatSurface {
    pub fn new() -> Self {
        FlatSurface::default()
    }

    /// Adds a triangle with unglued edges and returns its index.
    pub fn push_triangle(&mut self, p: [C64; 3], label: [Option<u32>; 3]) -> usize {
        let hid = [self.fresh_hid(), self.fresh_hid(), self.fresh_hid()];
        self.tris.push(Tri { p, adj: [None; 3], label, hid, dead: false });
        self.bump_labels();
        self.tris.len() - 1
    }

    pub(crate) fn fresh_hid(&mut self) -> u32 {
        self.next_hid += 1;
        self.next_hid - 1
    }

    pub fn fresh_label(&mut self) -> u32 {
        self.bump_labels();
        self.next_label += 1;
        self.next_label - 1
    }

    fn bump_labels(&mut self) {
        for t in &self.tris {
            for l in t.label.iter().flatten() {
                self.next_label = self.next_label.max(l + 1);
            }
        }
    }

    /// Glue `(t,e)` to `(t2,e2)` with `rot·vec(t2,e2) = −vec(t,e)`.
    pub fn glue(&mut self, t: usize, e: usize, t2: usize, e2: usize, rot: C64) {
        self.tris[t].adj[e] = Some(Adj { t: t2, e: e2, rot });
        self.tris[t2].adj[e2] = Some(Adj { t, e, rot: rot.conj() });
    }

    /// Glue two edges, computing the rotation from the edge vectors.
    pub fn glue_auto(&mut self, t: usize, e: usize, t2: usize, e2: usize) -> Result<()> {
        let a = self.tris[t].vec(e);
        let b = self.tris[t2].vec(e2);
        if (a.norm() - b.norm()).abs() > 1e-7 * (1.0 + a.norm()) {
            return Err(Error::Precondition(format!(
                "glued edges differ in length: {} vs {}",
                a.norm(),
                b.norm()
            )));
        }
        let r = -a / b;
        self.glue(t, e, t2, e2, r / r.norm());
        Ok(())
    }

    pub fn live(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tris.len()).filter(|&t| !self.tris[t].dead)
    }

    pub fn triangle_count(&self) -> usize {
        self.live().count()
    }

    /// Union-find over corners; returns the class root for each corner index `3t+i`.
    pub(crate) fn corner_classes(&self) -> Vec<usize> {
        let n = self.tris.len() * 3;
        let mut uf = UnionFind::new(n);
        for t in self.live() {
            for e in 0..3 {
                if let Some(a) = self.tris[t].adj[e] {
                    uf.union(3 * t + e, 3 * a.t + (a.e + 1) % 3);
                    uf.union(3 * t + (e + 1) % 3, 3 * a.t + a.e);
                }
            }
        }
        (0..n).map(|c| uf.find(c)).collect()
    }

    /// Vertices numbered in order of first corner occurrence.
    pub fn vertices(&self) -> Vec<Vertex> {
        let cls = self.corner_classes();
        let mut index: BTreeMap<usize, usize> = BTreeMap::new();
        let mut out: Vec<Vertex> = Vec::new();
        for t in self.live() {
            for i in 0..3 {
                let root = cls[3 * t + i];
                let id = *index.entry(root).or_insert_with(|| {
                    out.push(Vertex { id: out.len(), label: None, angle: 0.0, corners: Vec::new(), boundary: false });
                    out.len() - 1
                });
                let v = &mut out[id];
                v.corners.push((t, i));
                v.angle += self.tris[t].angle(i);
                if v.label.is_none() {
                    v.label = self.tris[t].label[i];
                }
                if self.tris[t].adj[i].is_none() || self.tris[t].adj[(i + 2) % 3].is_none() {
                    v.boundary = true;
                }
            }
        }
        out
    }

    /// Vertex id of every corner, indexed `3t+i` (dead triangles map to `usize::MAX`).
    pub fn corner_vertex_ids(&self) -> Vec<usize> {
        let mut ids = vec![usize::MAX; self.tris.len() * 3];
        for v in self.vertices() {
            for (t, i) in v.corners {
                ids[3 * t + i] = v.id;
            }
        }
        ids
    }

    pub fn edge_count(&self) -> usize {
        let mut n = 0;
        for t in self.live() {
            for e in 0..3 {
                match self.tris[t].adj[e] {
                    None => n += 2,
                    Some(a) if (a.t, a.e) > (t, e) => n += 2,
                    Some(a) if (a.t, a.e) == (t, e) => n += 2,
                    _ => {}
                }
            }
        }
        n / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices().len() as i64 - self.edge_count() as i64 + self.triangle_count() as i64
    }

    pub fn genus(&self) -> Result<u32> {
        let chi = self.euler_characteristic();
        if chi > 2 || chi % 2 != 0 {
            return Err(Error::Precondition(format!("Euler characteristic {chi} is not that of a closed surface")));
        }
        Ok(((2 - chi) / 2) as u32)
    }

    pub fn area(&self) -> f64 {
        self.live().map(|t| self.tris[t].signed_area()).sum()
    }

    /// Angles at marked points, sorted by decreasing angle then label.
    pub fn cone_angles(&self) -> Vec<ConeAngle> {
        let mut v: Vec<ConeAngle> = self
            .vertices()
            .into_iter()
            .filter_map(|v| v.label.map(|l| ConeAngle { label: l, angle: v.angle }))
            .collect();
        v.sort_by(|a, b| b.angle.partial_cmp(&a.angle).unwrap().then(a.label.cmp(&b.label)));
        v
    }

    /// Marked points whose angle differs from 2π.
    pub fn singular_angles(&self, tol: f64) -> Vec<ConeAngle> {
        self.cone_angles().into_iter().filter(|c| (c.angle - TAU).abs() > tol).collect()
    }

    pub fn marked_count(&self) -> usize {
        self.vertices().iter().filter(|v| v.label.is_some()).count()
    }

    /// Σ(2π − θ_p) − 2π·χ over all vertices, in radians.
    pub fn gauss_bonnet_residual(&self) -> f64 {
        let vs = self.vertices();
        let s: f64 = vs.iter().map(|v| TAU - v.angle).sum();
        s - TAU * self.euler_characteristic() as f64
    }

    /// Structural and metric validation of a closed surface.
    pub fn check(&self, tol: f64) -> Result<()> {
        for t in self.live() {
            let tri = &self.tris[t];
            let scale = tri.vec(0).norm().max(tri.vec(1).norm()).max(1e-300);
            if tri.signed_area() <= tol * scale * scale {
                return Err(Error::Degenerate(format!("triangle {t} is degenerate or clockwise")));
            }
            for e in 0..3 {
                let a = tri.adj[e].ok_or_else(|| Error::Precondition(format!("edge ({t},{e}) is not glued")))?;
                if a.t >= self.tris.len() || self.tris[a.t].dead || a.e > 2 {
                    return Err(Error::Input(format!("edge ({t},{e}) glued to a missing edge")));
                }
                let b = self.tris[a.t].adj[a.e]
                    .ok_or_else(|| Error::Input(format!("gluing of ({t},{e}) is one-sided")))?;
                if (b.t, b.e) != (t, e) {
                    return Err(Error::Input(format!("gluing of ({t},{e}) is not symmetric")));
                }
                if (a.rot.norm() - 1.0).abs() > tol * 1e3 {
                    return Err(Error::Precondition(format!("rotation on ({t},{e}) is not unitary")));
                }
                let v = tri.vec(e);
                let w = self.tris[a.t].vec(a.e);
                if (a.rot * w + v).norm() > 1e3 * tol * (1.0 + v.norm()) {
                    return Err(Error::Precondition(format!(
                        "edge ({t},{e}) does not match its partner: lengths {} and {}",
                        v.norm(),
                        w.norm()
                    )));
                }
            }
        }
        for v in self.vertices() {
            if v.label.is_none() && (v.angle - TAU).abs() > 1e-6 {
                return Err(Error::Precondition(format!(
                    "unmarked vertex {} has angle {} ≠ 2π",
                    v.id, v.angle
                )));
            }
            for &(t, i) in &v.corners {
                if self.tris[t].label[i] != v.label {
                    return Err(Error::Input(format!("vertex {} has inconsistent labels", v.id)));
                }
            }
        }
        self.genus()?;
        Ok(())
    }

    /// Product of gluing rotations along a closed dual path.
    ///
    /// The path is a list of `(triangle, edge)` crossings; each crossing must
    /// leave the triangle reached by the previous one, and the last must
    /// return to the first triangle.
    pub fn holonomy_along(&self, path: &[(usize, usize)]) -> Result<C64> {
        if path.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        let mut h = C64::new(1.0, 0.0);
        let mut cur = path[0].0;
        for &(t, e) in path {
            if t != cur {
                return Err(Error::Input(format!("path is broken at triangle {t}")));
            }
            let a = self.tris[t].adj[e].ok_or_else(|| Error::Input("path crosses a boundary edge".into()))?;
            h *= a.rot;
            cur = a.t;
        }
        if cur != path[0].0 {
            return Err(Error::Input("path is not closed".into()));
        }
        Ok(h)
    }

    /// The dual loop turning counterclockwise once around the vertex at corner `(t,i)`.
    pub fn loop_around(&self, t: usize, i: usize) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        let (mut ct, mut ci) = (t, i);
        loop {
            let e = (ci + 2) % 3;
            let a = self.tris[ct].adj[e].ok_or_else(|| Error::Precondition("vertex on the boundary".into()))?;
            out.push((ct, e));
            ct = a.t;
            ci = a.e;
            if (ct, ci) == (t, i) {
                return Ok(out);
            }
            if out.len() > 3 * self.tris.len() + 3 {
                return Err(Error::Degenerate("corner walk does not close".into()));
            }
        }
    }

    /// Multiply all coordinates by `s`.
    pub fn scaled(&self, s: f64) -> FlatSurface {
        let mut out = self.clone();
        for t in &mut out.tris {
            for p in &mut t.p {
                *p *= s;
            }
        }
        out
    }

    /// Rescale to unit area.
    pub fn normalized(&self) -> FlatSurface {
        self.scaled(1.0 / self.area().sqrt())
    }

    /// Corner `(t,e)` at which half-edge `h` starts.
    pub fn find_hid(&self, h: u32) -> Option<(usize, usize)> {
        for t in self.live() {
            for e in 0..3 {
                if self.tris[t].hid[e] == h {
                    return Some((t, e));
                }
            }
        }
        None
    }

    /// Map a point from the chart of `(t,e)`'s partner to the chart of `t`.
    pub fn transfer(&self, t: usize, e: usize, x: C64) -> Option<C64> {
        let a = self.tris[t].adj[e]?;
        Some(self.tris[t].p[(e + 1) % 3] + a.rot * (x - self.tris[a.t].p[a.e]))
    }

    /// Set the label of the vertex containing corner `(t,i)` on all its corners.
    pub fn set_vertex_label(&mut self, t: usize, i: usize, label: Option<u32>) {
        let cls = self.corner_classes();
        let root = cls[3 * t + i];
        for tt in 0..self.tris.len() {
            for j in 0..3 {
                if cls[3 * tt + j] == root {
                    self.tris[tt].label[j] = label;
                }
            }
        }
        self.bump_labels();
    }

    /// Corner of the vertex carrying `label`.
    pub fn corner_of_label(&self, label: u32) -> Option<(usize, usize)> {
        for t in self.live() {
            for i in 0..3 {
                if self.tris[t].label[i] == Some(label) {
                    return Some((t, i));
                }
            }
        }
        None
    }

    pub fn labels(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.vertices().iter().filter_map(|v| v.label).collect();
        v.sort();
        v
    }

    /// Total angle at the vertex of corner `(t,i)`.
    pub fn vertex_angle(&self, t: usize, i: usize) -> f64 {
        let cls = self.corner_classes();
        let root = cls[3 * t + i];
        let mut s = 0.0;
        for tt in self.live() {
            for j in 0..3 {
                if cls[3 * tt + j] == root {
                    s += self.tris[tt].angle(j);
                }
            }
        }
        s
    }

    /// Position of a direction around its vertex, in `[0, θ)`, measured from
    /// the vertex's lowest-indexed corner.
    pub fn dir_position(&self, hid: u32, angle: f64) -> Option<(usize, f64)> {
        let (t, i) = self.find_hid(hid)?;
        let cls = self.corner_classes();
        let root = cls[3 * t + i];
        let first = (0..self.tris.len() * 3).find(|&c| cls[c] == root && !self.tris[c / 3].dead)?;
        let (mut ct, mut ci) = (first / 3, first % 3);
        let mut acc = 0.0;
        for _ in 0..3 * self.tris.len() + 3 {
            if (ct, ci) == (t, i) {
                let total = self.vertex_angle(t, i);
                return Some((root, (acc + angle).rem_euclid(total)));
            }
            acc += self.tris[ct].angle(ci);
            let a = self.tris[ct].adj[(ci + 2) % 3]?;
            ct = a.t;
            ci = a.e;
        }
        None
    }

    /// Follow the straight segment `from → from + v` starting in triangle `t`;
    /// returns the triangle and chart position of the end point.
    pub fn walk(&self, mut t: usize, from: C64, v: C64) -> Result<(usize, C64)> {
        let mut p = from;
        let mut w = v;
        for _ in 0..10_000 {
            let tri = &self.tris[t];
            let q = p + w;
            let scale = 1e-12 * (1.0 + w.norm());
            if (0..3).all(|e| cross(tri.vec(e), q - tri.p[e]) >= -scale * tri.vec(e).norm()) {
                return Ok((t, q));
            }
            // first edge the segment leaves through
            let mut best: Option<(usize, f64)> = None;
            for e in 0..3 {
                let d = cross(tri.vec(e), w);
                if d < 0.0 {
                    let s = cross(tri.vec(e), tri.p[e] - p) / d;
                    if best.map_or(true, |(_, b)| s < b) {
                        best = Some((e, s));
                    }
                }
            }
            let (e, s) = best.ok_or_else(|| Error::Degenerate("walk is stuck".into()))?;
            let s = s.clamp(0.0, 1.0);
            let a = tri.adj[e].ok_or_else(|| Error::Precondition("walk leaves through the boundary".into()))?;
            let back = self.tris[a.t].adj[a.e].unwrap();
            let hit = p + w * s;
            p = self.transfer(a.t, a.e, hit).unwrap();
            w = back.rot * w * (1.0 - s);
            t = a.t;
        }
        Err(Error::Degenerate("walk did not terminate".into()))
    }

    pub(crate) fn same_vertex(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        let cls = self.corner_classes();
        cls[3 * a.0 + a.1] == cls[3 * b.0 + b.1]
    }
}

/// Normalise an angle into `[0, 2π)`.
pub fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Angle of `b` measured counterclockwise from `a`, in `[0, 2π)`.
pub fn ccw_angle(a: C64, b: C64) -> f64 {
    wrap((b / a).arg())
}
