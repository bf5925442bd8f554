use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::edit::ear_clip;
use super::io::PolygonFile;
use super::{FlatSurface, C64};
use crate::{Error, Result};

/// A polygon with paired sides.
///
/// `sides[i]` is the i-th boundary vector of the polygon traversed
/// counterclockwise. Side `i` is glued to side `pairing[i]` by the rotation
/// `rho[i]`, meaning `sides[i] + rho[i]·sides[pairing[i]] = 0`: a translation
/// gluing has `rho = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonalModel {
    pub sides: Vec<C64>,
    pub pairing: Vec<usize>,
    pub rho: Vec<C64>,
    /// Triangulation by polygon vertex indices; required for immersed polygons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangles: Option<Vec<[usize; 3]>>,
}

impl PolygonalModel {
    /// Model with rotations read off from the side vectors.
    pub fn new(sides: Vec<C64>, pairing: Vec<usize>) -> Result<Self> {
        if pairing.len() != sides.len() {
            return Err(Error::Input("pairing and sides differ in length".into()));
        }
        let rho = (0..sides.len())
            .map(|i| {
                let j = *pairing.get(i).unwrap();
                if j >= sides.len() || sides[j].norm() == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    -sides[i] / sides[j]
                }
            })
            .collect();
        let m = PolygonalModel { sides, pairing, rho, triangles: None };
        m.validate(1e-9)?;
        Ok(m)
    }

    pub fn from_vertices(vertices: &[C64], pairing: Vec<usize>) -> Result<Self> {
        let n = vertices.len();
        Self::new((0..n).map(|i| vertices[(i + 1) % n] - vertices[i]).collect(), pairing)
    }

    pub fn vertices(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0)];
        for z in &self.sides[..self.sides.len() - 1] {
            v.push(v[v.len() - 1] + z);
        }
        v
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.sides.len();
        if n < 2 || n % 2 != 0 {
            return Err(Error::Input("a polygonal model needs an even number of sides".into()));
        }
        if self.pairing.len() != n || self.rho.len() != n {
            return Err(Error::Input("pairing/rotation arrays have the wrong length".into()));
        }
        let scale: f64 = self.sides.iter().map(|z| z.norm()).sum();
        let close: C64 = self.sides.iter().sum();
        if close.norm() > tol * (1.0 + scale) {
            return Err(Error::Precondition(format!("boundary does not close (Σz = {close})")));
        }
        for i in 0..n {
            let j = self.pairing[i];
            if j >= n || j == i || self.pairing[j] != i {
                return Err(Error::Input(format!("side {i} is not paired with a distinct side")));
            }
            if (self.sides[i].norm() - self.sides[j].norm()).abs() > 1e3 * tol * (1.0 + self.sides[i].norm()) {
                return Err(Error::Precondition(format!("sides {i} and {j} differ in length")));
            }
            if (self.sides[i] + self.rho[i] * self.sides[j]).norm() > 1e3 * tol * (1.0 + scale) {
                return Err(Error::Precondition(format!("rotation of side {i} does not match")));
            }
        }
        Ok(())
    }

    /// Number `k` of side pairs.
    pub fn k(&self) -> usize {
        self.sides.len() / 2
    }

    pub fn from_file(f: &PolygonFile) -> Result<Self> {
        let sides: Vec<C64> = f.sides.iter().map(|&[x, y]| C64::new(x, y)).collect();
        let mut m = PolygonalModel::new(sides, f.pairing.clone())?;
        if let Some(r) = &f.rotations {
            if r.len() != m.sides.len() {
                return Err(Error::Input("rotations have the wrong length".into()));
            }
            m.rho = r.iter().map(|&[x, y]| C64::new(x, y)).collect();
        }
        m.triangles = f.triangles.clone();
        m.validate(1e-9)?;
        Ok(m)
    }

    pub fn to_file(&self) -> PolygonFile {
        PolygonFile {
            sides: self.sides.iter().map(|z| [z.re, z.im]).collect(),
            pairing: self.pairing.clone(),
            rotations: Some(self.rho.iter().map(|z| [z.re, z.im]).collect()),
            triangles: self.triangles.clone(),
        }
    }
}

/// Triangulate and glue a polygonal model. Every vertex class is marked.
pub fn build_from_polygon(model: &PolygonalModel) -> Result<FlatSurface> {
    model.validate(1e-9)?;
    let verts = model.vertices();
    let n = verts.len();
    let tris = match &model.triangles {
        Some(t) => t.clone(),
        None => ear_clip(&verts)?,
    };
    if tris.len() != n - 2 {
        return Err(Error::Input("triangulation does not cover the polygon".into()));
    }
    let mut s = FlatSurface::new();
    // (u,v) directed polygon chord or side -> (triangle, edge)
    let mut edges: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for tr in &tris {
        if tr.iter().any(|&i| i >= n) {
            return Err(Error::Input("triangle refers to a missing polygon vertex".into()));
        }
        let t = s.push_triangle([verts[tr[0]], verts[tr[1]], verts[tr[2]]], [None; 3]);
        let ar = s.tris[t].signed_area();
        let sc = s.tris[t].vec(0).norm_sqr().max(s.tris[t].vec(1).norm_sqr());
        if ar <= 1e-12 * sc {
            return Err(Error::Degenerate("degenerate triangle in polygon triangulation".into()));
        }
        for e in 0..3 {
            if edges.insert((tr[e], tr[(e + 1) % 3]), (t, e)).is_some() {
                return Err(Error::Input("triangulation repeats an edge".into()));
            }
        }
    }
    for (&(u, v), &(t, e)) in &edges {
        if (u + 1) % n == v {
            continue;
        }
        if u < v {
            let &(t2, e2) = edges
                .get(&(v, u))
                .ok_or_else(|| Error::Input("triangulation chord has one side only".into()))?;
            s.glue(t, e, t2, e2, C64::new(1.0, 0.0));
        }
    }
    for i in 0..n {
        let j = model.pairing[i];
        if i < j {
            let &(t, e) = edges.get(&(i, (i + 1) % n)).ok_or_else(|| Error::Input(format!("side {i} missing")))?;
            let &(t2, e2) = edges.get(&(j, (j + 1) % n)).ok_or_else(|| Error::Input(format!("side {j} missing")))?;
            let r = model.rho[i];
            s.glue(t, e, t2, e2, r / r.norm());
        }
    }
    for (l, v) in s.vertices().into_iter().enumerate() {
        let (t, i) = v.corners[0];
        s.set_vertex_label(t, i, Some(l as u32));
    }
    s.check(1e-9)?;
    Ok(s)
}

/// Cut a closed surface open along the complement of a spanning tree of the
/// dual graph rooted at `base`, and lay the result out in the plane.
///
/// Every vertex lands on the boundary, so the returned polygon carries the
/// triangulation by its own vertex indices.
pub fn develop(s: &FlatSurface, base: usize) -> Result<PolygonalModel> {
    let mut s = s.clone();
    s.compact();
    let nt = s.tris.len();
    if base >= nt {
        return Err(Error::Input("base triangle does not exist".into()));
    }
    s.check(1e-7)?;
    // BFS dual tree and developed coordinates
    let mut pos: Vec<Option<[C64; 3]>> = vec![None; nt];
    let mut tree = vec![[false; 3]; nt];
    pos[base] = Some(s.tris[base].p);
    let mut q = VecDeque::from([base]);
    while let Some(t) = q.pop_front() {
        let pt = pos[t].unwrap();
        for e in 0..3 {
            let a = s.tris[t].adj[e].unwrap();
            if pos[a.t].is_some() {
                continue;
            }
            // map partner chart so its edge a.e lands on the reverse of edge e
            let src = &s.tris[a.t];
            let (x0, y0) = (src.p[a.e], src.p[(a.e + 1) % 3]);
            let (x1, y1) = (pt[(e + 1) % 3], pt[e]);
            let lin = (y1 - x1) / (y0 - x0);
            let lin = lin / lin.norm();
            pos[a.t] = Some(src.p.map(|z| x1 + lin * (z - x0)));
            tree[t][e] = true;
            tree[a.t][a.e] = true;
            q.push_back(a.t);
        }
    }
    // walk the boundary of the disk
    let start = (0..nt)
        .flat_map(|t| (0..3).map(move |e| (t, e)))
        .find(|&(t, e)| !tree[t][e])
        .ok_or_else(|| Error::Precondition("surface has no cut edges".into()))?;
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut corner_poly = vec![usize::MAX; 3 * nt];
    let (mut t, mut e) = start;
    loop {
        order.push((t, e));
        // start vertex of the next side
        let idx = order.len();
        let (mut ct, mut ci) = (t, (e + 1) % 3);
        loop {
            corner_poly[3 * ct + ci] = idx;
            if !tree[ct][ci] {
                break;
            }
            let a = s.tris[ct].adj[ci].unwrap();
            ct = a.t;
            ci = (a.e + 1) % 3;
        }
        t = ct;
        e = ci;
        if (t, e) == start {
            break;
        }
        if order.len() > 3 * nt {
            return Err(Error::Degenerate("boundary walk does not close".into()));
        }
    }
    let m = order.len();
    for c in corner_poly.iter_mut() {
        if *c == m {
            *c = 0;
        }
    }
    if corner_poly.iter().any(|&c| c == usize::MAX) {
        return Err(Error::Precondition("cut graph complement is not a disk".into()));
    }
    let sides: Vec<C64> = order.iter().map(|&(t, e)| {
        let p = pos[t].unwrap();
        p[(e + 1) % 3] - p[e]
    }).collect();
    let side_of: BTreeMap<(usize, usize), usize> = order.iter().enumerate().map(|(i, &te)| (te, i)).collect();
    let pairing: Vec<usize> = order
        .iter()
        .map(|&(t, e)| {
            let a = s.tris[t].adj[e].unwrap();
            side_of[&(a.t, a.e)]
        })
        .collect();
    let rho = (0..m).map(|i| {
        let r = -sides[i] / sides[pairing[i]];
        r / r.norm()
    }).collect();
    let triangles = (0..nt).map(|t| [corner_poly[3 * t], corner_poly[3 * t + 1], corner_poly[3 * t + 2]]).collect();
    let model = PolygonalModel { sides, pairing, rho, triangles: Some(triangles) };
    model.validate(1e-7)?;
    Ok(model)
}

/// Square torus of side 1 with one marked point.
pub fn square_torus() -> FlatSurface {
    lattice_torus(C64::new(1.0, 0.0), C64::new(0.0, 1.0))
}

/// Torus ℂ/(aℤ + bℤ) with one marked point; `b/a` must lie in the upper half-plane.
pub fn lattice_torus(a: C64, b: C64) -> FlatSurface {
    let o = C64::new(0.0, 0.0);
    let mut s = FlatSurface::new();
    let t0 = s.push_triangle([o, a, a + b], [Some(0); 3]);
    let t1 = s.push_triangle([o, a + b, b], [Some(0); 3]);
    let one = C64::new(1.0, 0.0);
    s.glue(t0, 2, t1, 0, one);
    s.glue(t0, 0, t1, 1, one);
    s.glue(t0, 1, t1, 2, one);
    s
}

/// Torus ℂ/(ℤ + τℤ) with one marked point.
pub fn tau_torus(tau: C64) -> FlatSurface {
    lattice_torus(C64::new(1.0, 0.0), tau)
}

/// Sphere obtained by doubling a triangle; marks its three vertices 0, 1, 2.
pub fn double_triangle(a: C64, b: C64, c: C64) -> Result<FlatSurface> {
    let mut s = FlatSurface::new();
    let t = s.push_triangle([a, b, c], [Some(0), Some(1), Some(2)]);
    if s.tris[t].signed_area() <= 0.0 {
        return Err(Error::Input("triangle must be counterclockwise and non-degenerate".into()));
    }
    let u = s.push_triangle([a.conj(), c.conj(), b.conj()], [Some(0), Some(2), Some(1)]);
    s.glue_auto(t, 0, u, 2)?;
    s.glue_auto(t, 1, u, 1)?;
    s.glue_auto(t, 2, u, 0)?;
    Ok(s)
}

/// Flat sphere with three cone points of angles `θ` (radians, each in
/// `(0, 2π)`, summing to 2π), normalized to area 1.
pub fn sphere3(theta: [f64; 3]) -> Result<FlatSurface> {
    let sum: f64 = theta.iter().sum();
    if theta.iter().any(|&t| !(t > 0.0 && t < 2.0 * PI)) || (sum - 2.0 * PI).abs() > 1e-9 {
        return Err(Error::Precondition("three-point sphere needs angles in (0,2π) summing to 2π".into()));
    }
    let [al, be, ga] = theta.map(|t| t / 2.0);
    let c = C64::from_polar(be.sin() / ga.sin(), al);
    double_triangle(C64::new(0.0, 0.0), C64::new(1.0, 0.0), c).map(|s| s.normalized())
}

/// The three ways of gluing a hexagon into a torus with two vertex classes.
pub const HEXAGON_PATTERNS: [[(usize, usize); 3]; 3] =
    [[(0, 2), (1, 4), (3, 5)], [(0, 3), (1, 4), (2, 5)], [(0, 1), (2, 4), (3, 5)]];

/// Hexagon (vertices counterclockwise) glued by pattern 1, 2 or 3.
pub fn hexagon_torus(pattern: usize, vertices: [C64; 6]) -> Result<FlatSurface> {
    let pairs = HEXAGON_PATTERNS
        .get(pattern.wrapping_sub(1))
        .ok_or_else(|| Error::Input(format!("unknown hexagon pattern {pattern}")))?;
    let mut pairing = vec![0; 6];
    for &(i, j) in pairs {
        pairing[i] = j;
        pairing[j] = i;
    }
    let model = PolygonalModel::from_vertices(&vertices, pairing)?;
    let s = build_from_polygon(&model)?;
    if s.genus()? != 1 {
        return Err(Error::Precondition("hexagon gluing is not a torus".into()));
    }
    let nv = s.vertices().len();
    if nv != 2 {
        return Err(Error::Precondition(format!("hexagon gluing has {nv} vertex classes, expected 2")));
    }
    Ok(s)
}

/// Regular hexagon of unit side centred at the origin.
pub fn regular_hexagon() -> [C64; 6] {
    std::array::from_fn(|k| C64::from_polar(1.0, PI / 3.0 * k as f64 - PI / 2.0 - PI / 6.0))
}
