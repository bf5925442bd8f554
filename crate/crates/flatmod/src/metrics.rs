//! Metric invariants of flat surfaces: saddle connections, systole, relative
//! systole, diameter bounds, relative diameter and flat cylinders.
//!
//! Distances are found by unfolding: triangles are laid out in the plane
//! along the edges a straight segment crosses, keeping track of the cone of
//! directions that is still visible from the source. Marked points block
//! visibility, so geodesics through them are recovered by a shortest-path
//! pass over the saddle-connection graph.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delaunay::{delaunay, max_circumradius};
use crate::surface::{cross, ccw_angle, FlatSurface, Handle, C64};
use crate::{Error, Result};

/// A straight segment between two vertices with no vertex in its interior.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SaddleConnection {
    pub from: usize,
    pub to: usize,
    pub from_label: Option<u32>,
    pub to_label: Option<u32>,
    /// Developed vector in the chart of the starting triangle.
    pub vector: C64,
    pub length: f64,
    /// Outgoing direction at the start.
    pub start: Handle,
    /// Direction at the end pointing back along the connection.
    pub end: Handle,
    pub start_corner: (usize, usize),
    pub end_corner: (usize, usize),
    /// Edges crossed, as `(triangle, edge)` left through.
    pub crossings: Vec<(usize, usize)>,
}

/// Affine chart map `z ↦ a·z + b`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Map {
    a: C64,
    b: C64,
}

impl Map {
    fn id() -> Map {
        Map { a: C64::new(1.0, 0.0), b: C64::new(0.0, 0.0) }
    }
    fn apply(&self, z: C64) -> C64 {
        self.a * z + self.b
    }
}

struct Item {
    t: usize,
    e: usize,
    map: Map,
    r: C64,
    l: C64,
    crossings: Vec<(usize, usize)>,
}

/// A vertex seen from the unfolding source.
pub(crate) struct Hit<'a> {
    pub corner: (usize, usize),
    pub dev: C64,
    pub back: Handle,
    pub crossings: &'a [(usize, usize)],
}

enum Side {
    Right,
    Inside,
    Left,
}

/// Where `u` lies relative to the cone from `r` counterclockwise to `l`;
/// directions on a boundary ray count as outside.
fn classify(r: C64, l: C64, u: C64) -> Side {
    let eps = 1e-12 * u.norm();
    if cross(r, u) <= eps * r.norm() {
        Side::Right
    } else if cross(u, l) <= eps * l.norm() {
        Side::Left
    } else {
        Side::Inside
    }
}

fn seg_dist(o: C64, x: C64, y: C64) -> f64 {
    let d = y - x;
    let t = if d.norm_sqr() > 0.0 { ((o - x).re * d.re + (o - x).im * d.im) / d.norm_sqr() } else { 0.0 };
    (x + d * t.clamp(0.0, 1.0) - o).norm()
}

/// Unfold from `o` through the initial items, up to distance `radius`.
fn unfold(
    s: &FlatSurface,
    o: C64,
    init: Vec<Item>,
    radius: f64,
    on_tri: &mut dyn FnMut(usize, Map, C64, C64),
    on_vertex: &mut dyn FnMut(Hit),
) {
    let mut stack = init;
    let mut budget = 5_000_000usize;
    while let Some(it) = stack.pop() {
        budget = budget.saturating_sub(1);
        if budget == 0 {
            log::warn!("unfolding budget exhausted");
            return;
        }
        // cross edge (it.t, it.e) into its neighbour
        let Some(adj) = s.tris[it.t].adj[it.e] else { continue };
        let src = &s.tris[it.t];
        let off = src.p[(it.e + 1) % 3] - adj.rot * s.tris[adj.t].p[adj.e];
        let map = Map { a: it.map.a * adj.rot, b: it.map.apply(off) };
        let t = adj.t;
        let e = adj.e;
        let tri = &s.tris[t];
        let x = map.apply(tri.p[e]);
        let y = map.apply(tri.p[(e + 1) % 3]);
        let z = map.apply(tri.p[(e + 2) % 3]);
        if seg_dist(o, x, y) > radius {
            continue;
        }
        let mut crossings = it.crossings;
        crossings.push((it.t, it.e));
        on_tri(t, map, it.r, it.l);
        let u = z - o;
        let j = (e + 2) % 3;
        match classify(it.r, it.l, u) {
            Side::Inside => {
                if u.norm() <= radius {
                    let back = Handle { hid: tri.hid[j], angle: ccw_angle(x - z, o - z) };
                    on_vertex(Hit { corner: (t, j), dev: z, back, crossings: &crossings });
                }
                stack.push(Item { t, e: (e + 1) % 3, map, r: it.r, l: u, crossings: crossings.clone() });
                stack.push(Item { t, e: j, map, r: u, l: it.l, crossings });
            }
            Side::Right => stack.push(Item { t, e: j, map, r: it.r, l: it.l, crossings }),
            Side::Left => stack.push(Item { t, e: (e + 1) % 3, map, r: it.r, l: it.l, crossings }),
        }
    }
}

/// Unfold from the vertex at corner `(t,i)` over its wedge `[0, α)`.
pub(crate) fn unfold_from_corner(
    s: &FlatSurface,
    t: usize,
    i: usize,
    radius: f64,
    on_tri: &mut dyn FnMut(usize, Map, C64, C64),
    on_vertex: &mut dyn FnMut(Hit),
) {
    let tri = &s.tris[t];
    let o = tri.p[i];
    let b = tri.p[(i + 1) % 3];
    let c = tri.p[(i + 2) % 3];
    let j = (i + 1) % 3;
    if (b - o).norm() <= radius {
        let back = Handle { hid: tri.hid[j], angle: tri.angle(j) };
        on_vertex(Hit { corner: (t, j), dev: b, back, crossings: &[] });
    }
    let init = vec![Item { t, e: j, map: Map::id(), r: b - o, l: c - o, crossings: vec![] }];
    unfold(s, o, init, radius, on_tri, on_vertex);
}

/// Unfold from an interior point `x` of triangle `t`.
fn unfold_from_point(
    s: &FlatSurface,
    t: usize,
    x: C64,
    radius: f64,
    on_tri: &mut dyn FnMut(usize, Map, C64, C64),
    on_vertex: &mut dyn FnMut(Hit),
) {
    let tri = &s.tris[t];
    let mut init = Vec::new();
    for f in 0..3 {
        let v = tri.p[f];
        if (v - x).norm() <= radius {
            let back = Handle { hid: tri.hid[f], angle: ccw_angle(tri.vec(f), x - v) };
            on_vertex(Hit { corner: (t, f), dev: v, back, crossings: &[] });
        }
        init.push(Item { t, e: f, map: Map::id(), r: tri.p[f] - x, l: tri.p[(f + 1) % 3] - x, crossings: vec![] });
    }
    unfold(s, x, init, radius, on_tri, on_vertex);
}

/// All saddle connections of length at most `max_len`, from every vertex.
pub fn saddle_connections(s: &FlatSurface, max_len: f64) -> Vec<SaddleConnection> {
    let ids = s.corner_vertex_ids();
    let mut out = Vec::new();
    for t in s.live() {
        for i in 0..3 {
            let tri = &s.tris[t];
            let o = tri.p[i];
            let b = tri.p[(i + 1) % 3];
            let from = ids[3 * t + i];
            let from_label = tri.label[i];
            let hid = tri.hid[i];
            let mut hits: Vec<SaddleConnection> = Vec::new();
            unfold_from_corner(s, t, i, max_len, &mut |_, _, _, _| {}, &mut |h: Hit| {
                let v = h.dev - o;
                hits.push(SaddleConnection {
                    from,
                    to: ids[3 * h.corner.0 + h.corner.1],
                    from_label,
                    to_label: s.tris[h.corner.0].label[h.corner.1],
                    vector: v,
                    length: v.norm(),
                    start: Handle { hid, angle: ccw_angle(b - o, v).min(tri.angle(i)) },
                    end: h.back,
                    start_corner: (t, i),
                    end_corner: h.corner,
                    crossings: h.crossings.to_vec(),
                });
            });
            out.extend(hits);
        }
    }
    out.sort_by(|a, b| a.length.total_cmp(&b.length));
    out
}

/// Length of the shortest Delaunay edge joining two distinct vertices.
pub fn relative_systole(s: &FlatSurface) -> Result<(f64, SaddleConnection)> {
    if s.marked_count() < 2 {
        return Err(Error::Precondition("relative systole needs two distinct cone points".into()));
    }
    let d = delaunay(s)?;
    let ids = d.corner_vertex_ids();
    let mut best: Option<(f64, usize, usize)> = None;
    for t in d.live() {
        for e in 0..3 {
            let (a, b) = (ids[3 * t + e], ids[3 * t + (e + 1) % 3]);
            let l = d.tris[t].vec(e).norm();
            if a != b && best.map_or(true, |(x, _, _)| l < x - 1e-15) {
                best = Some((l, t, e));
            }
        }
    }
    let (l, t, e) = best.ok_or_else(|| Error::Precondition("no edge joins distinct vertices".into()))?;
    let tri = &d.tris[t];
    let j = (e + 1) % 3;
    let sc = SaddleConnection {
        from: ids[3 * t + e],
        to: ids[3 * t + j],
        from_label: tri.label[e],
        to_label: tri.label[j],
        vector: tri.vec(e),
        length: l,
        start: Handle { hid: tri.hid[e], angle: 0.0 },
        end: Handle { hid: tri.hid[j], angle: tri.angle(j) },
        start_corner: (t, e),
        end_corner: (t, j),
        crossings: vec![],
    };
    Ok((l, sc))
}

/// Exact test of membership in the span of the vertex loops, over ℚ.
pub(crate) struct Homology {
    edge_id: BTreeMap<(usize, usize), (usize, i64)>,
    basis: Vec<(usize, Vec<Ratio<i128>>)>,
}

impl Homology {
    pub fn new(s: &FlatSurface) -> Result<Homology> {
        let mut edge_id = BTreeMap::new();
        let mut n = 0;
        for t in s.live() {
            for e in 0..3 {
                if let Some(a) = s.tris[t].adj[e] {
                    if (t, e) <= (a.t, a.e) {
                        edge_id.insert((t, e), (n, 1));
                        edge_id.insert((a.t, a.e), (n, -1));
                        n += 1;
                    }
                }
            }
        }
        let mut h = Homology { edge_id, basis: Vec::new() };
        for v in s.vertices() {
            let (t, i) = v.corners[0];
            let lp = s.loop_around(t, i)?;
            let vec = h.vector(&lp, n);
            h.insert(vec);
        }
        Ok(h)
    }

    fn dim(&self) -> usize {
        self.edge_id.len() / 2
    }

    fn vector(&self, path: &[(usize, usize)], n: usize) -> Vec<Ratio<i128>> {
        let mut v = vec![Ratio::from_integer(0); n];
        for c in path {
            let (k, sg) = self.edge_id[c];
            v[k] += Ratio::from_integer(sg as i128);
        }
        v
    }

    fn reduce(&self, mut v: Vec<Ratio<i128>>) -> Vec<Ratio<i128>> {
        for (p, row) in &self.basis {
            if v[*p] != Ratio::from_integer(0) {
                let f = v[*p];
                for k in 0..v.len() {
                    v[k] -= f * row[k];
                }
            }
        }
        v
    }

    fn insert(&mut self, v: Vec<Ratio<i128>>) {
        let v = self.reduce(v);
        if let Some(p) = v.iter().position(|x| *x != Ratio::from_integer(0)) {
            let f = v[p];
            let row: Vec<Ratio<i128>> = v.iter().map(|x| x / f).collect();
            for (_, r) in self.basis.iter_mut() {
                if r[p] != Ratio::from_integer(0) {
                    let g = r[p];
                    for k in 0..r.len() {
                        r[k] -= g * row[k];
                    }
                }
            }
            self.basis.push((p, row));
        }
    }

    /// Whether the closed dual path is homologically nontrivial.
    pub fn nontrivial(&self, path: &[(usize, usize)]) -> bool {
        let v = self.vector(path, self.dim());
        self.reduce(v).iter().any(|x| *x != Ratio::from_integer(0))
    }
}

/// Dual crossings turning counterclockwise around a vertex from corner `a` to corner `b`.
fn turn(s: &FlatSurface, a: (usize, usize), b: (usize, usize)) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let (mut t, mut i) = a;
    while (t, i) != b {
        let e = (i + 2) % 3;
        let adj = s.tris[t].adj[e].ok_or_else(|| Error::Precondition("vertex on the boundary".into()))?;
        out.push((t, e));
        t = adj.t;
        i = adj.e;
        if out.len() > 3 * s.tris.len() {
            return Err(Error::Degenerate("corners lie at different vertices".into()));
        }
    }
    Ok(out)
}

/// Closed dual path following a chain of saddle connections.
pub(crate) fn chain_dual_path(s: &FlatSurface, chain: &[SaddleConnection]) -> Result<Vec<(usize, usize)>> {
    let mut path = Vec::new();
    for (k, sc) in chain.iter().enumerate() {
        path.extend_from_slice(&sc.crossings);
        let next = &chain[(k + 1) % chain.len()];
        path.extend(turn(s, sc.end_corner, next.start_corner)?);
    }
    Ok(path)
}

/// A closed chain of saddle connections.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Loop {
    pub length: f64,
    pub segments: Vec<SaddleConnection>,
    /// At each joint (end of segment k): angle on the left and on the right.
    pub joint_angles: Vec<(f64, f64)>,
}

fn joint_angles(s: &FlatSurface, chain: &[SaddleConnection]) -> Vec<(f64, f64)> {
    (0..chain.len())
        .map(|k| {
            let inc = &chain[k];
            let out = &chain[(k + 1) % chain.len()];
            let (_, pin) = s.dir_position(inc.end.hid, inc.end.angle).unwrap();
            let (_, pout) = s.dir_position(out.start.hid, out.start.angle).unwrap();
            let total = s.vertex_angle(inc.end_corner.0, inc.end_corner.1);
            let left = (pin - pout).rem_euclid(total);
            (left, total - left)
        })
        .collect()
}

/// Shortest homologically nontrivial closed chain of at most four saddle
/// connections. Errors when nothing is found below `length_cap`.
pub fn systole(s: &FlatSurface, length_cap: f64) -> Result<Loop> {
    if s.genus()? == 0 {
        return Err(Error::Precondition("the sphere has no essential closed curve".into()));
    }
    let hom = Homology::new(s)?;
    let mut l = 2.0 * crate::delaunay::edge_lengths(s).last().copied().unwrap_or(1.0);
    loop {
        let l_eff = l.min(length_cap);
        let scs = saddle_connections(s, l_eff);
        if let Some(best) = best_chain(s, &hom, &scs, l_eff)? {
            return Ok(best);
        }
        if l >= length_cap {
            return Err(Error::Precondition(format!("no essential loop shorter than the cap {length_cap}")));
        }
        l *= 2.0;
    }
}

fn best_chain(s: &FlatSurface, hom: &Homology, scs: &[SaddleConnection], cap: f64) -> Result<Option<Loop>> {
    let mut by_from: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, sc) in scs.iter().enumerate() {
        by_from.entry(sc.from).or_default().push(k);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for depth in 1..=4 {
        for (&v0, _) in &by_from {
            let mut chain = Vec::new();
            search(s, hom, scs, &by_from, v0, v0, depth, 0.0, cap, &mut chain, &mut best)?;
        }
    }
    Ok(best.map(|(len, idx)| {
        let segments: Vec<SaddleConnection> = idx.iter().map(|&k| scs[k].clone()).collect();
        let joint_angles = joint_angles(s, &segments);
        Loop { length: len, segments, joint_angles }
    }))
}

#[allow(clippy::too_many_arguments)]
fn search(
    s: &FlatSurface,
    hom: &Homology,
    scs: &[SaddleConnection],
    by_from: &BTreeMap<usize, Vec<usize>>,
    v0: usize,
    cur: usize,
    depth: usize,
    len: f64,
    cap: f64,
    chain: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
) -> Result<()> {
    let Some(out) = by_from.get(&cur) else { return Ok(()) };
    for &k in out {
        let total = len + scs[k].length;
        let bound = best.as_ref().map_or(cap + 1e-12, |b| b.0 - 1e-12);
        if total > bound {
            break;
        }
        chain.push(k);
        if depth == 1 {
            if scs[k].to == v0 {
                let segs: Vec<SaddleConnection> = chain.iter().map(|&c| scs[c].clone()).collect();
                if hom.nontrivial(&chain_dual_path(s, &segs)?) {
                    *best = Some((total, chain.clone()));
                }
            }
        } else {
            search(s, hom, scs, by_from, v0, scs[k].to, depth - 1, total, cap, chain, best)?;
        }
        chain.pop();
    }
    Ok(())
}

/// Maximal flat cylinder around a systolic loop whose joints all have angle π
/// on one side.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cylinder {
    /// Circumference.
    pub width: f64,
    /// Height, i.e. distance between the boundary components.
    pub length: f64,
    pub core: Loop,
}

/// The cylinder bounded by the systole, when the systole is a closed
/// geodesic: every joint has angle π on one side. The height is the distance
/// from the core to the nearest cone point on that side.
pub fn find_cylinder(s: &FlatSurface) -> Result<Option<Cylinder>> {
    if s.genus()? != 1 {
        return Err(Error::Precondition("cylinder search expects a torus".into()));
    }
    let d = delaunay(s)?;
    let cap = 4.0 * diameter_upper(&d) + 1.0;
    let sys = systole(&d, cap)?;
    let tol = 1e-7;
    let left = sys.joint_angles.iter().all(|&(l, _)| (l - PI).abs() < tol);
    let right = sys.joint_angles.iter().all(|&(_, r)| (r - PI).abs() < tol);
    if !left && !right {
        return Ok(None);
    }
    let seg = &sys.segments[0];
    let (t0, i0) = seg.start_corner;
    let ids = d.corner_vertex_ids();
    let v0 = ids[3 * t0 + i0];
    let (_, p_out) = d.dir_position(seg.start.hid, seg.start.angle).unwrap();
    let total = d.vertex_angle(t0, i0);
    let w = sys.length;
    let mut radius = 2.0 * w;
    for _ in 0..30 {
        // in the universal cover of the cylinder, the cone points nearest to
        // the core are all visible from its start
        let mut h = f64::INFINITY;
        for t in d.live() {
            for i in 0..3 {
                if ids[3 * t + i] != v0 {
                    continue;
                }
                let tri = &d.tris[t];
                let (_, pc) = d.dir_position(tri.hid[i], 0.0).unwrap();
                let (o, e0) = (tri.p[i], tri.vec(i));
                unfold_from_corner(&d, t, i, radius, &mut |_, _, _, _| {}, &mut |hit: Hit| {
                    let v = hit.dev - o;
                    let pos = pc + ccw_angle(e0, v);
                    let rel = if left { (pos - p_out).rem_euclid(total) } else { (p_out - pos).rem_euclid(total) };
                    if rel < PI {
                        let y = v.norm() * rel.sin();
                        if y > tol * w {
                            h = h.min(y);
                        }
                    }
                });
            }
        }
        if h.is_finite() && w.hypot(h) <= radius {
            return Ok(Some(Cylinder { width: w, length: h, core: sys }));
        }
        radius *= 2.0;
    }
    Err(Error::Degenerate("cylinder height search did not converge".into()))
}

/// Upper diameter bound `2n·s` with `s` the largest Delaunay circumradius.
pub fn diameter_upper(s: &FlatSurface) -> f64 {
    2.0 * s.marked_count() as f64 * max_circumradius(s)
}

/// Lower and upper bounds on the diameter.
///
/// The lower bound is the largest exact distance between sample points: the
/// vertices, the circumcentres of the Delaunay triangles and the nodes of a
/// `depth`-fold midpoint subdivision.
pub fn diameter_bounds(s: &FlatSurface, depth: u32) -> Result<(f64, f64)> {
    let d = delaunay(s)?;
    let upper = diameter_upper(&d);
    let samples = sample_points(&d, depth)?;
    let mut radius = 2.0 * max_circumradius(&d);
    loop {
        let lower = max_sampled_distance(&d, &samples, radius);
        if lower <= radius || radius > 4.0 * upper {
            return Ok((lower.min(upper), upper));
        }
        radius *= 2.0;
    }
}

fn sample_points(s: &FlatSurface, depth: u32) -> Result<Vec<(usize, C64)>> {
    let n = 1usize << depth;
    let mut out = Vec::new();
    for t in s.live() {
        let p = s.tris[t].p;
        let g = (p[0] + p[1] + p[2]) / 3.0;
        for i in 0..=n {
            for j in 0..=n - i {
                let k = n - i - j;
                if [i, j, k].iter().filter(|&&x| x == 0).count() >= 2 {
                    continue;
                }
                let x = (p[0] * i as f64 + p[1] * j as f64 + p[2] * k as f64) / n as f64;
                // nudge off the edges so every sample is interior
                out.push((t, x + (g - x) * 1e-9));
            }
        }
        let cc = circumcenter(p[0], p[1], p[2]);
        let (tc, xc) = s.walk(t, g, cc - g)?;
        let q = s.tris[tc].p;
        let gc = (q[0] + q[1] + q[2]) / 3.0;
        out.push((tc, xc + (gc - xc) * 1e-9));
    }
    Ok(out)
}

pub(crate) fn circumcenter(a: C64, b: C64, c: C64) -> C64 {
    let (b, c) = (b - a, c - a);
    let d = 2.0 * cross(b, c);
    let ux = (c.im * b.norm_sqr() - b.im * c.norm_sqr()) / d;
    let uy = (b.re * c.norm_sqr() - c.re * b.norm_sqr()) / d;
    a + C64::new(ux, uy)
}

fn max_sampled_distance(s: &FlatSurface, samples: &[(usize, C64)], radius: f64) -> f64 {
    let ids = s.corner_vertex_ids();
    let nv = s.vertices().len();
    let mut by_tri: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, (t, _)) in samples.iter().enumerate() {
        by_tri.entry(*t).or_default().push(k);
    }
    let ns = samples.len();
    // visibility from each vertex to samples and vertices
    let mut vis_v = vec![vec![f64::INFINITY; ns]; nv];
    let mut dvv = vec![vec![f64::INFINITY; nv]; nv];
    for v in 0..nv {
        dvv[v][v] = 0.0;
    }
    for t in s.live() {
        for i in 0..3 {
            let v = ids[3 * t + i];
            let o = s.tris[t].p[i];
            let mut row = vec![f64::INFINITY; ns];
            let mut vrow = vec![f64::INFINITY; nv];
            // the corner's own triangle
            if let Some(list) = by_tri.get(&t) {
                for &k in list {
                    row[k] = row[k].min((samples[k].1 - o).norm());
                }
            }
            let mut on_tri = |tt: usize, m: Map, r: C64, l: C64| {
                if let Some(list) = by_tri.get(&tt) {
                    for &k in list {
                        let u = m.apply(samples[k].1) - o;
                        if cross(r, u) >= 0.0 && cross(u, l) >= 0.0 {
                            row[k] = row[k].min(u.norm());
                        }
                    }
                }
            };
            unfold_from_corner(s, t, i, radius, &mut on_tri, &mut |h: Hit| {
                let w = ids[3 * h.corner.0 + h.corner.1];
                vrow[w] = vrow[w].min((h.dev - o).norm());
            });
            for k in 0..ns {
                vis_v[v][k] = vis_v[v][k].min(row[k]);
            }
            for w in 0..nv {
                dvv[v][w] = dvv[v][w].min(vrow[w]);
            }
        }
    }
    for k in 0..nv {
        for i in 0..nv {
            for j in 0..nv {
                let x = dvv[i][k] + dvv[k][j];
                if x < dvv[i][j] {
                    dvv[i][j] = x;
                }
            }
        }
    }
    let vv_max = dvv.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let per_sample: Vec<f64> = (0..ns)
        .into_par_iter()
        .map(|x| {
            let (t0, p0) = samples[x];
            let mut vis = vec![f64::INFINITY; ns];
            let mut to_v = vec![f64::INFINITY; nv];
            if let Some(list) = by_tri.get(&t0) {
                for &k in list {
                    vis[k] = (samples[k].1 - p0).norm();
                }
            }
            let mut on_tri = |tt: usize, m: Map, r: C64, l: C64| {
                if let Some(list) = by_tri.get(&tt) {
                    for &k in list {
                        let u = m.apply(samples[k].1) - p0;
                        if cross(r, u) >= 0.0 && cross(u, l) >= 0.0 && u.norm() <= radius {
                            vis[k] = vis[k].min(u.norm());
                        }
                    }
                }
            };
            unfold_from_point(s, t0, p0, radius, &mut on_tri, &mut |h: Hit| {
                let w = ids[3 * h.corner.0 + h.corner.1];
                to_v[w] = to_v[w].min((h.dev - p0).norm());
            });
            let dv: Vec<f64> = (0..nv)
                .map(|v| (0..nv).map(|u| to_v[u] + dvv[u][v]).fold(f64::INFINITY, f64::min))
                .collect();
            let mut m = dv.iter().copied().fold(0.0, f64::max);
            for y in 0..ns {
                let via = (0..nv).map(|v| dv[v] + vis_v[v][y]).fold(f64::INFINITY, f64::min);
                m = m.max(vis[y].min(via));
            }
            m
        })
        .collect();
    per_sample.into_iter().fold(vv_max, f64::max)
}

/// Invariants of a surface normalized to unit area.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    pub systole: Option<f64>,
    pub relative_systole: Option<f64>,
    /// Sampled lower bound on the diameter.
    pub diameter: f64,
    pub diameter_upper: f64,
    pub relative_diameter: f64,
    pub marked_points: usize,
    pub genus: u32,
    pub tolerance: f64,
    pub systole_witness: Option<Loop>,
    pub relative_systole_witness: Option<SaddleConnection>,
}

pub fn metric_report(s: &FlatSurface, depth: u32, tol: f64) -> Result<MetricReport> {
    let n = s.normalized();
    let d = delaunay(&n)?;
    let genus = d.genus()?;
    let (lower, upper) = diameter_bounds(&d, depth)?;
    let (systole, witness) = if genus >= 1 {
        let l = systole(&d, 2.0 * upper + 1e-9)?;
        (Some(l.length), Some(l))
    } else {
        (None, None)
    };
    let (rs, rsw) = match relative_systole(&d) {
        Ok((l, sc)) => (Some(l), Some(sc)),
        Err(_) => (None, None),
    };
    Ok(MetricReport {
        systole,
        relative_systole: rs,
        diameter: lower,
        diameter_upper: upper,
        relative_diameter: max_circumradius(&d),
        marked_points: d.marked_count(),
        genus,
        tolerance: tol,
        systole_witness: witness,
        relative_systole_witness: rsw,
    })
}

/// Closed geodesic around a cone point of angle `θ < π` at distance `r`:
/// its length and the interior angle at its corner.
pub fn cone_closed_geodesic(theta: f64, r: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0 && theta < PI) || !(r > 0.0) {
        return Err(Error::Precondition("needs 0 < θ < π and r > 0".into()));
    }
    Ok((2.0 * (theta / 2.0).sin() * r, PI - theta))
}

/// The diameter constants `K₁ = (2n/√π)·max(2, 1 + cot(π/q))` and `K₂ = √3/(2n)`.
pub fn diameter_constants(n: u32, q: u64) -> Result<(f64, f64)> {
    if n < 1 || q < 3 {
        return Err(Error::Precondition("needs n ≥ 1 and q ≥ 3".into()));
    }
    let n = n as f64;
    let cot = 1.0 / (PI / q as f64).tan();
    Ok((2.0 * n / PI.sqrt() * f64::max(2.0, 1.0 + cot), 3f64.sqrt() / (2.0 * n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{lattice_torus, sphere3, square_torus};

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    /// Square torus with a second marked point at the centre of the square.
    fn square_with_centre() -> FlatSurface {
        let mut s = square_torus();
        // the midpoint of the diagonal is the square's centre
        let e = (0..3).find(|&e| s.tris[0].vec(e).norm() > 1.2).unwrap();
        s.split_edge(0, e, 0.5).unwrap();
        let v = s.vertices().into_iter().find(|v| v.label.is_none()).unwrap();
        let (t, i) = v.corners[0];
        s.set_vertex_label(t, i, Some(7));
        s
    }

    #[test]
    fn square_torus_saddle_connections() {
        let s = square_torus();
        let scs = saddle_connections(&s, 1.5);
        let lens: Vec<f64> = scs.iter().map(|c| c.length).collect();
        // ±1, ±i then the four diagonals
        assert_eq!(lens.len(), 8, "{lens:?}");
        for l in &lens[..4] {
            close(*l, 1.0, 1e-12);
        }
        for l in &lens[4..] {
            close(*l, 2f64.sqrt(), 1e-12);
        }
        // √5 connections exist, √(2)·2 are blocked
        let more = saddle_connections(&s, 2.9);
        assert!(more.iter().all(|c| (c.length - 8f64.sqrt()).abs() > 1e-9));
        assert_eq!(more.iter().filter(|c| (c.length - 5f64.sqrt()).abs() < 1e-9).count(), 8);
    }

    #[test]
    fn systole_of_tori() {
        let s = square_torus();
        let l = systole(&s, 10.0).unwrap();
        close(l.length, 1.0, 1e-12);
        assert_eq!(l.segments.len(), 1);
        close(l.joint_angles[0].0, PI, 1e-9);
        let skew = lattice_torus(C64::new(1.0, 0.0), C64::new(3.0, 0.5));
        close(systole(&skew, 10.0).unwrap().length, 0.5, 1e-9);
        let hex = lattice_torus(C64::new(1.0, 0.0), C64::from_polar(1.0, PI / 3.0)).normalized();
        close(systole(&hex, 10.0).unwrap().length, (2.0 / 3f64.sqrt()).sqrt(), 1e-9);
        assert!(systole(&s, 0.5).is_err());
    }

    #[test]
    fn two_marked_points() {
        let s = square_with_centre();
        let (rs, sc) = relative_systole(&s).unwrap();
        close(rs, 0.5f64.sqrt(), 1e-12);
        assert_ne!(sc.from, sc.to);
        // loops through the centre are longer than the horizontal one
        close(systole(&s, 10.0).unwrap().length, 1.0, 1e-12);
        let d = delaunay(&s).unwrap();
        close(max_circumradius(&d), 0.5, 1e-12);
        assert!(relative_systole(&square_torus()).is_err());
    }

    #[test]
    fn sphere_has_no_systole() {
        let s = sphere3([PI, PI / 2.0, PI / 2.0]).unwrap();
        assert!(systole(&s, 10.0).is_err());
        assert!(relative_systole(&s).is_ok());
    }

    #[test]
    fn diameter_of_square_torus() {
        let (lo, hi) = diameter_bounds(&square_torus(), 2).unwrap();
        close(lo, 0.5f64.sqrt(), 1e-9);
        close(hi, 2f64.sqrt(), 1e-12);
    }

    #[test]
    fn diameter_of_hexagonal_torus() {
        let s = lattice_torus(C64::new(1.0, 0.0), C64::from_polar(1.0, PI / 3.0));
        let (lo, hi) = diameter_bounds(&s, 2).unwrap();
        // the deep holes are the centres of the equilateral triangles
        close(lo, 1.0 / 3f64.sqrt(), 1e-9);
        assert!(hi >= lo);
    }

    #[test]
    fn cylinders() {
        let c = find_cylinder(&square_torus()).unwrap().unwrap();
        close(c.width, 1.0, 1e-12);
        close(c.length, 1.0, 1e-9);
        let skew = lattice_torus(C64::new(1.0, 0.0), C64::new(3.0, 0.5));
        let c = find_cylinder(&skew).unwrap().unwrap();
        close(c.width, 0.5, 1e-9);
        close(c.length, 1.0, 1e-9);
        // with the centre marked, the systole runs along a boundary of a
        // cylinder of height ½
        let c = find_cylinder(&square_with_centre()).unwrap().unwrap();
        close(c.length, 0.5, 1e-9);
    }

    #[test]
    fn report_is_scale_invariant() {
        let a = metric_report(&square_with_centre(), 2, 1e-9).unwrap();
        let b = metric_report(&square_with_centre().scaled(3.7), 2, 1e-9).unwrap();
        close(a.systole.unwrap(), b.systole.unwrap(), 1e-9);
        close(a.relative_systole.unwrap(), b.relative_systole.unwrap(), 1e-9);
        close(a.diameter, b.diameter, 1e-9);
        close(a.relative_diameter, 0.5, 1e-9);
        close(a.diameter, 0.5f64.sqrt(), 1e-9);
    }

    #[test]
    fn closed_form_helpers() {
        let (l, a) = cone_closed_geodesic(PI / 2.0, 1.0).unwrap();
        close(l, 2f64.sqrt(), 1e-12);
        close(a, PI / 2.0, 1e-12);
        assert!(cone_closed_geodesic(PI, 1.0).is_err());
        let (k1, k2) = diameter_constants(1, 4).unwrap();
        close(k1, 4.0 / PI.sqrt(), 1e-12);
        close(k2, 3f64.sqrt() / 2.0, 1e-12);
        let (k1, _) = diameter_constants(2, 3).unwrap();
        close(k1, 8.0 / PI.sqrt(), 1e-12);
        let (k1, _) = diameter_constants(2, 6).unwrap();
        close(k1, 4.0 / PI.sqrt() * (1.0 + 3f64.sqrt()), 1e-12);
    }
}
