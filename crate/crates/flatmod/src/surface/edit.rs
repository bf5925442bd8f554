//! Local editing of triangulated surfaces: splits, flips, vertex removal,
//! geodesic tracing, cutting and regluing.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::f64::consts::{PI, TAU};

use super::{cross, Adj, FlatSurface, Tri, Vertex, C64};
use crate::{Error, Result};

/// Edge spec for a rebuilt triangle.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Side {
    /// Inherit edge `(t,e)` of an old triangle; `lin` is the linear part of
    /// the map from the old chart to the new one.
    Old(usize, usize, C64),
    /// Glued to the other side carrying the same key; optional hid to keep.
    Inner(u32, Option<u32>),
    /// Unglued.
    Fresh(Option<u32>),
}

#[derive(Clone, Debug)]
pub(crate) struct NewTri {
    pub p: [C64; 3],
    pub label: [Option<u32>; 3],
    pub side: [Side; 3],
}

/// Half-edges produced by splitting `a→b` at `m`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SplitOut {
    /// `a→m`, keeps the id of the split half-edge.
    pub first: u32,
    /// `m→b`.
    pub second: u32,
    /// `c→m` where `c` is the corner opposite the split edge.
    pub cm: u32,
    /// `m→c`.
    pub mc: u32,
}

/// A direction at a vertex: `angle` radians counterclockwise from the
/// half-edge `hid`, which starts at that vertex.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Handle {
    pub hid: u32,
    pub angle: f64,
}

/// How a traced geodesic ends.
#[derive(Clone, Copy, Debug)]
pub enum End {
    /// Create a new (unlabelled) vertex at the end point.
    New,
    /// The end point must be the vertex at which this half-edge starts.
    Snap(u32),
}

#[derive(Clone, Debug)]
pub struct TraceOut {
    /// Half-edges along the path, each with the path running along it.
    pub path: Vec<u32>,
    /// Direction at the end vertex pointing back along the path.
    pub back: Handle,
}

/// A planar polygon to be inserted, counterclockwise.
#[derive(Clone, Debug)]
pub struct Patch {
    pub poly: Vec<C64>,
    pub labels: Vec<Option<u32>>,
    /// Pairs of polygon sides glued to each other.
    pub self_glue: Vec<(usize, usize)>,
}

impl FlatSurface {
    /// Replace the triangles `old` by `new`, keeping gluings of inherited edges.
    pub(crate) fn rewrite(&mut self, old: &[usize], new: Vec<NewTri>) -> Vec<usize> {
        let snap: Vec<Tri> = old.iter().map(|&t| self.tris[t].clone()).collect();
        let old_pos = |t: usize| old.iter().position(|&o| o == t);
        let mut idx = Vec::with_capacity(new.len());
        for k in 0..new.len() {
            if k < old.len() {
                idx.push(old[k]);
            } else {
                let zero = C64::new(0.0, 0.0);
                self.tris.push(Tri { p: [zero; 3], adj: [None; 3], label: [None; 3], hid: [0; 3], dead: false });
                idx.push(self.tris.len() - 1);
            }
        }
        for &t in old.iter().skip(new.len()) {
            self.tris[t].dead = true;
            self.tris[t].adj = [None; 3];
        }
        let mut map: HashMap<(usize, usize), (usize, usize, C64)> = HashMap::new();
        for (k, nt) in new.iter().enumerate() {
            for e in 0..3 {
                if let Side::Old(ot, oe, lin) = nt.side[e] {
                    map.insert((ot, oe), (idx[k], e, lin));
                }
            }
        }
        let mut inner: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
        let mut external: Vec<(usize, usize, Adj)> = Vec::new();
        let mut built: Vec<Tri> = Vec::with_capacity(new.len());
        for (k, nt) in new.iter().enumerate() {
            let mut tri = Tri { p: nt.p, adj: [None; 3], label: nt.label, hid: [0; 3], dead: false };
            for e in 0..3 {
                match nt.side[e] {
                    Side::Old(ot, oe, lin) => {
                        let s = &snap[old_pos(ot).expect("inherited edge from a triangle not being rewritten")];
                        tri.hid[e] = s.hid[oe];
                        if let Some(a) = s.adj[oe] {
                            if let Some(&(nt2, ne2, lin2)) = map.get(&(a.t, a.e)) {
                                tri.adj[e] = Some(Adj { t: nt2, e: ne2, rot: lin * a.rot / lin2 });
                            } else {
                                debug_assert!(old_pos(a.t).is_none(), "partner edge dropped by rewrite");
                                let rot = lin * a.rot;
                                tri.adj[e] = Some(Adj { t: a.t, e: a.e, rot });
                                external.push((a.t, a.e, Adj { t: idx[k], e, rot: rot.conj() }));
                            }
                        }
                    }
                    Side::Inner(key, h) => {
                        tri.hid[e] = h.unwrap_or_else(|| self.fresh_hid());
                        inner.entry(key).or_default().push((k, e));
                    }
                    Side::Fresh(h) => {
                        tri.hid[e] = h.unwrap_or_else(|| self.fresh_hid());
                    }
                }
            }
            built.push(tri);
        }
        for (k, tri) in built.into_iter().enumerate() {
            self.tris[idx[k]] = tri;
        }
        for (t, e, a) in external {
            self.tris[t].adj[e] = Some(a);
        }
        for (_, v) in inner {
            debug_assert_eq!(v.len(), 2);
            let (k1, e1) = v[0];
            let (k2, e2) = v[1];
            let a = self.tris[idx[k1]].vec(e1);
            let b = self.tris[idx[k2]].vec(e2);
            let r = -a / b;
            self.glue(idx[k1], e1, idx[k2], e2, r / r.norm());
        }
        self.bump_labels();
        idx
    }

    /// Split edge `(t,e)` at parameter `s ∈ (0,1)` from its start.
    pub(crate) fn split_edge(&mut self, t: usize, e: usize, s: f64) -> Result<SplitOut> {
        let tri = self.tris[t].clone();
        let (e1, e2) = ((e + 1) % 3, (e + 2) % 3);
        let (a, b, c) = (tri.p[e], tri.p[e1], tri.p[e2]);
        let m = a + (b - a) * s;
        let one = C64::new(1.0, 0.0);
        let second = self.fresh_hid();
        let mut new = vec![
            NewTri {
                p: [a, m, c],
                label: [tri.label[e], None, tri.label[e2]],
                side: [Side::Inner(1, Some(tri.hid[e])), Side::Inner(2, None), Side::Old(t, e2, one)],
            },
            NewTri {
                p: [m, b, c],
                label: [None, tri.label[e1], tri.label[e2]],
                side: [Side::Inner(3, Some(second)), Side::Old(t, e1, one), Side::Inner(2, None)],
            },
        ];
        let old: Vec<usize> = match tri.adj[e] {
            Some(adj) => {
                let t2 = adj.t;
                if t2 == t {
                    // Cone the triangle off its centroid so the two sides land in different triangles.
                    let hid = tri.hid[e];
                    self.split_triangle(t, (a + b + c) / 3.0);
                    let (nt, ne) = self.find_hid(hid).expect("split keeps edge ids");
                    return self.split_edge(nt, ne, s);
                }
                let q = self.tris[t2].clone();
                let f = adj.e;
                let (f1, f2) = ((f + 1) % 3, (f + 2) % 3);
                let (b2, a2, c2) = (q.p[f], q.p[f1], q.p[f2]);
                let m2 = b2 + (a2 - b2) * (1.0 - s);
                new.push(NewTri {
                    p: [b2, m2, c2],
                    label: [q.label[f], None, q.label[f2]],
                    side: [Side::Inner(3, Some(q.hid[f])), Side::Inner(4, None), Side::Old(t2, f2, one)],
                });
                new.push(NewTri {
                    p: [m2, a2, c2],
                    label: [None, q.label[f1], q.label[f2]],
                    side: [Side::Inner(1, None), Side::Old(t2, f1, one), Side::Inner(4, None)],
                });
                vec![t, t2]
            }
            None => {
                new[0].side[0] = Side::Fresh(Some(tri.hid[e]));
                new[1].side[0] = Side::Fresh(Some(second));
                vec![t]
            }
        };
        let idx = self.rewrite(&old, new);
        Ok(SplitOut { first: tri.hid[e], second, cm: self.tris[idx[1]].hid[2], mc: self.tris[idx[0]].hid[1] })
    }

    /// Insert a vertex at `x` strictly inside triangle `t`.
    ///
    /// Returns, per old corner `i`, the half-edges `p_i → x` and `x → p_i`.
    pub(crate) fn split_triangle(&mut self, t: usize, x: C64) -> ([u32; 3], [u32; 3]) {
        let tri = self.tris[t].clone();
        debug_assert!((0..3).all(|e| cross(tri.vec(e), x - tri.p[e]) > 0.0), "point outside triangle");
        let [a, b, c] = tri.p;
        let [la, lb, lc] = tri.label;
        let one = C64::new(1.0, 0.0);
        let new = vec![
            NewTri { p: [a, b, x], label: [la, lb, None], side: [Side::Old(t, 0, one), Side::Inner(1, None), Side::Inner(2, None)] },
            NewTri { p: [b, c, x], label: [lb, lc, None], side: [Side::Old(t, 1, one), Side::Inner(3, None), Side::Inner(1, None)] },
            NewTri { p: [c, a, x], label: [lc, la, None], side: [Side::Old(t, 2, one), Side::Inner(2, None), Side::Inner(3, None)] },
        ];
        let idx = self.rewrite(&[t], new);
        let h = |k: usize, e: usize| self.tris[idx[k]].hid[e];
        ([h(2, 1), h(0, 1), h(1, 1)], [h(0, 2), h(1, 2), h(2, 2)])
    }

    /// Point of the partner triangle opposite to edge `(t,e)`, in the chart of `t`.
    pub(crate) fn opposite_point(&self, t: usize, e: usize) -> Option<C64> {
        let a = self.tris[t].adj[e]?;
        self.transfer(t, e, self.tris[a.t].p[(a.e + 2) % 3])
    }

    /// Flip the diagonal `(t,e)`; returns false when the quadrilateral is not
    /// strictly convex or the edge is glued to its own triangle.
    pub(crate) fn flip(&mut self, t: usize, e: usize) -> bool {
        let Some(adj) = self.tris[t].adj[e] else { return false };
        let t2 = adj.t;
        if t2 == t {
            return false;
        }
        let tri = self.tris[t].clone();
        let q = self.tris[t2].clone();
        let (e1, e2) = ((e + 1) % 3, (e + 2) % 3);
        let f = adj.e;
        let (f1, f2) = ((f + 1) % 3, (f + 2) % 3);
        let (a, b, c) = (tri.p[e], tri.p[e1], tri.p[e2]);
        let d = match self.opposite_point(t, e) {
            Some(d) => d,
            None => return false,
        };
        let scale = (b - a).norm_sqr().max((d - c).norm_sqr());
        let eps = 1e-12 * scale;
        if cross(a - c, d - c) <= eps || cross(d - c, b - c) <= eps {
            return false;
        }
        let one = C64::new(1.0, 0.0);
        let r = adj.rot;
        let new = vec![
            NewTri {
                p: [c, a, d],
                label: [tri.label[e2], tri.label[e], q.label[f2]],
                side: [Side::Old(t, e2, one), Side::Old(t2, f1, r), Side::Inner(1, None)],
            },
            NewTri {
                p: [d, b, c],
                label: [q.label[f2], tri.label[e1], tri.label[e2]],
                side: [Side::Old(t2, f2, r), Side::Old(t, e1, one), Side::Inner(1, None)],
            },
        ];
        self.rewrite(&[t, t2], new);
        true
    }

    /// Corners around the vertex at `(t,i)`, counterclockwise.
    pub(crate) fn star(&self, t: usize, i: usize) -> Result<Vec<(usize, usize)>> {
        let mut out = vec![(t, i)];
        let (mut ct, mut ci) = (t, i);
        loop {
            let a = self.tris[ct].adj[(ci + 2) % 3]
                .ok_or_else(|| Error::Precondition("vertex lies on the boundary".into()))?;
            ct = a.t;
            ci = a.e;
            if (ct, ci) == (t, i) {
                return Ok(out);
            }
            out.push((ct, ci));
            if out.len() > 3 * self.tris.len() {
                return Err(Error::Degenerate("corner walk does not close".into()));
            }
        }
    }

    /// Remove a regular unmarked vertex by re-triangulating its link polygon.
    pub(crate) fn remove_vertex(&mut self, t: usize, i: usize) -> Result<()> {
        let mut anchor = self.tris[t].hid[i];
        for _ in 0..4 * self.tris.len() + 4 {
            let (t, i) = self.find_hid(anchor).ok_or_else(|| Error::Degenerate("lost vertex handle".into()))?;
            let star = self.star(t, i)?;
            if star.len() < 3 {
                return Err(Error::Degenerate("vertex of degree below three".into()));
            }
            let distinct: BTreeSet<usize> = star.iter().map(|c| c.0).collect();
            if distinct.len() == star.len() && self.remove_star(&star).is_ok() {
                return Ok(());
            }
            // the star wraps onto itself: lower the degree by a flip first
            let mut flipped = false;
            let at_v: BTreeSet<(usize, usize)> = star.iter().copied().collect();
            for (k, &(ct, ci)) in star.iter().enumerate() {
                // only flips whose new diagonal avoids v lower the degree
                let Some(adj) = self.tris[ct].adj[ci] else { continue };
                if at_v.contains(&(ct, (ci + 2) % 3)) || at_v.contains(&(adj.t, (adj.e + 2) % 3)) {
                    continue;
                }
                let h = self.tris[ct].hid[ci];
                let other = star[(k + 1) % star.len()];
                let other = self.tris[other.0].hid[other.1];
                if self.flip(ct, ci) {
                    if h == anchor {
                        anchor = other;
                    }
                    flipped = true;
                    break;
                }
            }
            if !flipped {
                // no degree-lowering flip: flip an edge joining v to itself to unwrap the star
                'outer: for &(ct, _) in &star {
                    for e in 0..3 {
                        let ends = [(ct, e), (ct, (e + 1) % 3)];
                        if ends.iter().all(|c| at_v.contains(c)) && self.flip(ct, e) {
                            flipped = true;
                            break 'outer;
                        }
                    }
                }
            }
            if !flipped {
                // Every loop flip is blocked, typically because v sits on the straight
                // segment the new diagonal would follow. Splitting a loop breaks the
                // wrap; the midpoint is regular and is removed later.
                let lp = star.iter().find_map(|&(ct, _)| {
                    (0..3).find(|&e| at_v.contains(&(ct, e)) && at_v.contains(&(ct, (e + 1) % 3))).map(|e| (ct, e))
                });
                let Some((ct, e)) = lp else {
                    return Err(Error::Degenerate("cannot remove regular vertex".into()));
                };
                self.split_edge(ct, e, 0.5)?;
            }
        }
        Err(Error::Degenerate("vertex removal did not terminate".into()))
    }

    fn remove_star(&mut self, star: &[(usize, usize)]) -> Result<()> {
        let d = star.len();
        // affine maps z ↦ a·z + b from each star chart into the first one
        let mut maps = vec![(C64::new(1.0, 0.0), C64::new(0.0, 0.0))];
        for k in 1..d {
            let (pt, pi) = star[k - 1];
            let e = (pi + 2) % 3;
            let adj = self.tris[pt].adj[e].unwrap();
            let (a0, b0) = maps[k - 1];
            let off = self.tris[pt].p[(e + 1) % 3] - adj.rot * self.tris[adj.t].p[adj.e];
            maps.push((a0 * adj.rot, a0 * off + b0));
        }
        let poly: Vec<C64> = (0..d)
            .map(|k| {
                let (t, i) = star[k];
                let (a, b) = maps[k];
                a * self.tris[t].p[(i + 1) % 3] + b
            })
            .collect();
        let tris = ear_clip(&poly)?;
        let mut new = Vec::new();
        let mut diag: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for tr in &tris {
            let mut side = [Side::Fresh(None); 3];
            for e in 0..3 {
                let (u, v) = (tr[e], tr[(e + 1) % 3]);
                if (u + 1) % d == v {
                    let (t, i) = star[u];
                    side[e] = Side::Old(t, (i + 1) % 3, maps[u].0);
                } else {
                    let key = (u.min(v), u.max(v));
                    let next = diag.len() as u32 + 1;
                    side[e] = Side::Inner(*diag.entry(key).or_insert(next), None);
                }
            }
            let lab = |u: usize| {
                let (t, i) = star[u];
                self.tris[t].label[(i + 1) % 3]
            };
            new.push(NewTri { p: [poly[tr[0]], poly[tr[1]], poly[tr[2]]], label: [lab(tr[0]), lab(tr[1]), lab(tr[2])], side });
        }
        let old: Vec<usize> = star.iter().map(|c| c.0).collect();
        self.rewrite(&old, new);
        Ok(())
    }

    /// Corner and offset of a direction handle, walking counterclockwise.
    pub(crate) fn locate_dir(&self, h: Handle, ang_eps: f64) -> Result<(usize, usize, f64)> {
        let (mut t, mut i) = self.find_hid(h.hid).ok_or_else(|| Error::Degenerate("stale handle".into()))?;
        let mut phi = h.angle;
        if phi < 0.0 {
            return Err(Error::Input("negative handle angle".into()));
        }
        for _ in 0..3 * self.tris.len() + 3 {
            let alpha = self.tris[t].angle(i);
            let next = self.tris[t].adj[(i + 2) % 3];
            if phi < alpha - ang_eps || (phi <= alpha + ang_eps && next.is_none()) {
                return Ok((t, i, phi.max(0.0)));
            }
            let a = next.ok_or_else(|| Error::Precondition("direction leaves through the boundary".into()))?;
            phi = (phi - alpha).max(0.0);
            t = a.t;
            i = a.e;
        }
        Err(Error::Precondition("direction exceeds the angle at the vertex".into()))
    }

    /// Direction handle at the end of half-edge `(t,e)` pointing back to its start.
    pub(crate) fn back_handle(&self, t: usize, e: usize) -> Handle {
        let j = (e + 1) % 3;
        Handle { hid: self.tris[t].hid[j], angle: self.tris[t].angle(j) }
    }

    /// Total angle at the start vertex of half-edge `hid`.
    pub fn handle_vertex_angle(&self, hid: u32) -> Result<f64> {
        let (t, i) = self.find_hid(hid).ok_or_else(|| Error::Degenerate("stale handle".into()))?;
        Ok(self.vertex_angle(t, i))
    }

    /// Rotate a handle counterclockwise by `delta` (may be negative).
    pub fn rotate(&self, h: Handle, delta: f64) -> Result<Handle> {
        let mut a = h.angle + delta;
        if a < 0.0 {
            let total = self.handle_vertex_angle(h.hid)?;
            while a < 0.0 {
                a += total;
            }
        }
        Ok(Handle { hid: h.hid, angle: a })
    }

    /// Trace a geodesic of length `len` from a vertex direction, inserting
    /// vertices where it crosses edges.
    pub fn trace(&mut self, from: Handle, len: f64, end: End) -> Result<TraceOut> {
        let tol = 1e-9 * (1.0 + len);
        let mut h = from;
        let mut rem = len;
        let mut path = Vec::new();
        for _ in 0..100_000 {
            let ang_eps = tol / rem.max(tol);
            let (t, i, phi) = self.locate_dir(h, ang_eps)?;
            let tri = self.tris[t].clone();
            let a = tri.p[i];
            let ea = tri.vec(i);
            let len_a = ea.norm();
            if phi * rem.min(len_a) < tol {
                if len_a <= rem + tol {
                    path.push(tri.hid[i]);
                    rem -= len_a;
                    let back = self.back_handle(t, i);
                    let j = (i + 1) % 3;
                    if rem <= tol {
                        self.check_end(end, (t, j))?;
                        return Ok(TraceOut { path, back });
                    }
                    if tri.label[j].is_some() || (self.vertex_angle(t, j) - TAU).abs() > 1e-7 {
                        return Err(Error::Precondition("geodesic runs into a vertex".into()));
                    }
                    h = self.rotate(back, PI)?;
                    continue;
                }
                let so = self.split_edge(t, i, rem / len_a)?;
                if let End::Snap(_) = end {
                    return Err(Error::Precondition("geodesic does not reach its target".into()));
                }
                path.push(so.first);
                let (nt, ne) = self.find_hid(so.first).unwrap();
                return Ok(TraceOut { path, back: self.back_handle(nt, ne) });
            }
            let u = ea / len_a * C64::from_polar(1.0, phi);
            let b = tri.p[(i + 1) % 3];
            let c = tri.p[(i + 2) % 3];
            let w = c - b;
            let den = cross(u, w);
            if den.abs() < 1e-300 {
                return Err(Error::Degenerate("ray parallel to opposite edge".into()));
            }
            let s = cross(b - a, w) / den;
            let tau = cross(b - a, u) / den;
            let wl = w.norm();
            if rem < s - tol {
                if let End::Snap(_) = end {
                    return Err(Error::Precondition("geodesic does not reach its target".into()));
                }
                let (to_x, from_x) = self.split_triangle(t, a + u * rem);
                path.push(to_x[i]);
                return Ok(TraceOut { path, back: Handle { hid: from_x[i], angle: 0.0 } });
            }
            if tau * wl < tol || (1.0 - tau) * wl < tol {
                return Err(Error::Precondition("geodesic passes through a vertex".into()));
            }
            if tri.adj[(i + 1) % 3].is_none() && rem > s + tol {
                return Err(Error::Precondition("geodesic leaves through the boundary".into()));
            }
            let so = self.split_edge(t, (i + 1) % 3, tau)?;
            path.push(so.cm);
            if (rem - s).abs() <= tol {
                if let End::Snap(_) = end {
                    return Err(Error::Precondition("geodesic does not reach its target".into()));
                }
                return Ok(TraceOut { path, back: Handle { hid: so.mc, angle: 0.0 } });
            }
            rem -= s;
            h = Handle { hid: so.mc, angle: PI };
        }
        Err(Error::Degenerate("trace did not terminate".into()))
    }

    fn check_end(&self, end: End, corner: (usize, usize)) -> Result<()> {
        match end {
            End::New => {
                if self.tris[corner.0].label[corner.1].is_some() {
                    return Err(Error::Precondition("geodesic ends on a marked point".into()));
                }
                Ok(())
            }
            End::Snap(target) => {
                let tc = self.find_hid(target).ok_or_else(|| Error::Degenerate("stale snap target".into()))?;
                if self.same_vertex(tc, corner) {
                    Ok(())
                } else {
                    Err(Error::Precondition("geodesic ends at the wrong vertex".into()))
                }
            }
        }
    }

    /// Partner half-edge id of `hid`.
    pub fn partner_hid(&self, hid: u32) -> Option<u32> {
        let (t, e) = self.find_hid(hid)?;
        let a = self.tris[t].adj[e]?;
        Some(self.tris[a.t].hid[a.e])
    }

    /// Triangles bounded by paths, reached from the right of `right_of` and the
    /// left of `left_of` without crossing any path edge.
    pub(crate) fn region(&self, right_of: &[u32], left_of: &[u32]) -> Result<BTreeSet<usize>> {
        let mut barrier: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut seeds = Vec::new();
        let mut outside = BTreeSet::new();
        for &h in right_of.iter().chain(left_of) {
            let (t, e) = self.find_hid(h).ok_or_else(|| Error::Degenerate("stale path".into()))?;
            barrier.insert((t, e));
            if let Some(a) = self.tris[t].adj[e] {
                barrier.insert((a.t, a.e));
            }
        }
        for &h in right_of {
            let (t, e) = self.find_hid(h).unwrap();
            let a = self.tris[t].adj[e].ok_or_else(|| Error::Precondition("path on the boundary".into()))?;
            seeds.push(a.t);
            outside.insert(t);
        }
        for &h in left_of {
            let (t, _) = self.find_hid(h).unwrap();
            seeds.push(t);
            if let Some(a) = self.tris[self.find_hid(h).unwrap().0].adj[self.find_hid(h).unwrap().1] {
                outside.insert(a.t);
            }
        }
        let mut seen = BTreeSet::new();
        let mut q: VecDeque<usize> = seeds.into_iter().collect();
        while let Some(t) = q.pop_front() {
            if !seen.insert(t) {
                continue;
            }
            for e in 0..3 {
                if barrier.contains(&(t, e)) {
                    continue;
                }
                if let Some(a) = self.tris[t].adj[e] {
                    if !seen.contains(&a.t) {
                        q.push_back(a.t);
                    }
                }
            }
        }
        if seen.iter().any(|t| outside.contains(t)) {
            return Err(Error::Precondition("paths do not bound a disk".into()));
        }
        Ok(seen)
    }

    /// Labels on vertices of `region` that do not lie on the given paths.
    pub(crate) fn interior_labels(&self, region: &BTreeSet<usize>, paths: &[u32]) -> Vec<u32> {
        let ids = self.corner_vertex_ids();
        let mut on_path = BTreeSet::new();
        for &h in paths {
            if let Some((t, e)) = self.find_hid(h) {
                on_path.insert(ids[3 * t + e]);
                on_path.insert(ids[3 * t + (e + 1) % 3]);
            }
        }
        let mut out = BTreeSet::new();
        for &t in region {
            for i in 0..3 {
                if !on_path.contains(&ids[3 * t + i]) {
                    if let Some(l) = self.tris[t].label[i] {
                        out.insert(l);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Remove triangles, leaving their neighbours with boundary edges.
    pub(crate) fn delete(&mut self, region: &BTreeSet<usize>) {
        for &t in region {
            for e in 0..3 {
                if let Some(a) = self.tris[t].adj[e] {
                    if !region.contains(&a.t) {
                        self.tris[a.t].adj[a.e] = None;
                    }
                }
            }
        }
        for &t in region {
            self.tris[t].dead = true;
            self.tris[t].adj = [None; 3];
        }
    }

    /// Cut the surface open along the given half-edges.
    pub(crate) fn unglue(&mut self, hids: &[u32]) -> Result<()> {
        for &h in hids {
            let (t, e) = self.find_hid(h).ok_or_else(|| Error::Degenerate("stale path".into()))?;
            if let Some(a) = self.tris[t].adj[e] {
                self.tris[a.t].adj[a.e] = None;
                self.tris[t].adj[e] = None;
            }
        }
        Ok(())
    }

    fn hid_len(&self, h: u32) -> f64 {
        let (t, e) = self.find_hid(h).unwrap();
        self.tris[t].vec(e).norm()
    }

    /// Glue boundary chain `x` to boundary chain `y` so that arclength `s`
    /// on `x` meets arclength `ℓ − s` on `y`.
    pub(crate) fn glue_chains(&mut self, mut x: Vec<u32>, mut y: Vec<u32>) -> Result<()> {
        let lx: f64 = x.iter().map(|&h| self.hid_len(h)).sum();
        let ly: f64 = y.iter().map(|&h| self.hid_len(h)).sum();
        let tol = 1e-8 * (1.0 + lx);
        if (lx - ly).abs() > 1e3 * tol {
            return Err(Error::Precondition(format!("chains differ in length: {lx} vs {ly}")));
        }
        let cuts = |s: &FlatSurface, c: &[u32]| -> Vec<f64> {
            let mut acc = 0.0;
            let mut v = Vec::new();
            for &h in &c[..c.len() - 1] {
                acc += s.hid_len(h);
                v.push(acc);
            }
            v
        };
        let bx = cuts(self, &x);
        let by: Vec<f64> = cuts(self, &y).into_iter().map(|b| lx - b).collect();
        for &s in &by {
            if !bx.iter().any(|&b| (b - s).abs() < tol) {
                self.split_chain_at(&mut x, s)?;
            }
        }
        let by_y = cuts(self, &y);
        for &s in &bx {
            let s2 = lx - s;
            if !by_y.iter().any(|&b| (b - s2).abs() < tol) {
                self.split_chain_at(&mut y, s2)?;
            }
        }
        if x.len() != y.len() {
            return Err(Error::Degenerate("chain subdivision mismatch".into()));
        }
        let n = x.len();
        for k in 0..n {
            let (t1, e1) = self.find_hid(x[k]).unwrap();
            let (t2, e2) = self.find_hid(y[n - 1 - k]).unwrap();
            if self.tris[t1].adj[e1].is_some() || self.tris[t2].adj[e2].is_some() {
                return Err(Error::Degenerate("gluing onto an edge that is not on the boundary".into()));
            }
            self.glue_auto(t1, e1, t2, e2)?;
        }
        Ok(())
    }

    fn split_chain_at(&mut self, c: &mut Vec<u32>, s: f64) -> Result<()> {
        let mut acc = 0.0;
        for k in 0..c.len() {
            let l = self.hid_len(c[k]);
            if s < acc + l {
                let (t, e) = self.find_hid(c[k]).unwrap();
                let so = self.split_edge(t, e, (s - acc) / l)?;
                c.insert(k + 1, so.second);
                return Ok(());
            }
            acc += l;
        }
        Err(Error::Degenerate("split point beyond chain".into()))
    }

    /// Add a planar polygon as new triangles; returns the boundary half-edge of
    /// each polygon side (glued sides included).
    pub fn insert_patch(&mut self, patch: &Patch) -> Result<Vec<u32>> {
        let n = patch.poly.len();
        let tris = ear_clip(&patch.poly)?;
        let side_hids: Vec<u32> = (0..n).map(|_| self.fresh_hid()).collect();
        let mut diag: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        let mut new = Vec::new();
        for tr in &tris {
            let mut side = [Side::Fresh(None); 3];
            for e in 0..3 {
                let (u, v) = (tr[e], tr[(e + 1) % 3]);
                if (u + 1) % n == v {
                    side[e] = Side::Fresh(Some(side_hids[u]));
                } else {
                    let key = (u.min(v), u.max(v));
                    let next = diag.len() as u32 + 1;
                    let k = *diag.entry(key).or_insert(next);
                    side[e] = Side::Inner(k, None);
                }
            }
            new.push(NewTri {
                p: [patch.poly[tr[0]], patch.poly[tr[1]], patch.poly[tr[2]]],
                label: [patch.labels[tr[0]], patch.labels[tr[1]], patch.labels[tr[2]]],
                side,
            });
        }
        self.rewrite(&[], new);
        for &(i, j) in &patch.self_glue {
            let (t1, e1) = self.find_hid(side_hids[i]).unwrap();
            let (t2, e2) = self.find_hid(side_hids[j]).unwrap();
            self.glue_auto(t1, e1, t2, e2)?;
        }
        Ok(side_hids)
    }

    /// Drop dead triangles and renumber.
    pub fn compact(&mut self) {
        let mut map = vec![usize::MAX; self.tris.len()];
        let mut k = 0;
        for (t, tri) in self.tris.iter().enumerate() {
            if !tri.dead {
                map[t] = k;
                k += 1;
            }
        }
        let old = std::mem::take(&mut self.tris);
        for tri in old.into_iter().filter(|t| !t.dead) {
            let mut tri = tri;
            for a in tri.adj.iter_mut().flatten() {
                a.t = map[a.t];
            }
            self.tris.push(tri);
        }
    }

    /// Remove every unmarked vertex (they must be regular) and compact.
    pub fn remove_unmarked(&mut self) -> Result<()> {
        self.compact();
        // loop splits add vertices, so bound the total work
        let budget = 8 * self.vertices().len() + 16;
        for _ in 0..budget {
            let unmarked: Vec<Vertex> = self.vertices().into_iter().filter(|v| v.label.is_none()).collect();
            if unmarked.is_empty() {
                return Ok(());
            }
            for v in &unmarked {
                if v.boundary {
                    return Err(Error::Degenerate("unmarked vertex on the boundary".into()));
                }
                if (v.angle - TAU).abs() > 1e-6 {
                    return Err(Error::Degenerate(format!("unmarked vertex of angle {} is not regular", v.angle)));
                }
            }
            self.make_delaunay()?;
            // a star can wrap onto itself; another vertex may still come out
            let corners: Vec<(usize, usize)> =
                self.vertices().into_iter().filter(|v| v.label.is_none()).map(|v| v.corners[0]).collect();
            let mut last = None;
            let mut removed = false;
            for (t, i) in corners {
                let mut trial = self.clone();
                match trial.remove_vertex(t, i) {
                    Ok(()) => {
                        *self = trial;
                        self.compact();
                        removed = true;
                        break;
                    }
                    Err(e) => last = Some(e),
                }
            }
            if !removed {
                return Err(last.unwrap_or_else(|| Error::Degenerate("lost an unmarked vertex".into())));
            }
        }
        Err(Error::Degenerate("removing unmarked vertices did not terminate".into()))
    }
}

/// Ear-clipping triangulation of a simple counterclockwise polygon.
pub fn ear_clip(poly: &[C64]) -> Result<Vec<[usize; 3]>> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::Input("polygon needs at least three vertices".into()));
    }
    let area: f64 = (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum::<f64>() / 2.0;
    if area <= 0.0 {
        return Err(Error::Input("polygon is not counterclockwise".into()));
    }
    let scale = poly.iter().map(|p| (p - poly[0]).norm()).fold(0.0, f64::max);
    let eps = 1e-12 * scale * scale;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            let (i0, i1, i2) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[i0], poly[i1], poly[i2]);
            if cross(b - a, c - a) <= eps {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != i0 && j != i1 && j != i2 && {
                    let p = poly[j];
                    cross(b - a, p - a) >= -eps && cross(c - b, p - b) >= -eps && cross(a - c, p - c) >= -eps
                }
            });
            if blocked {
                continue;
            }
            // prefer well-shaped ears
            let q = quality(a, b, c);
            if best.map_or(true, |(_, bq)| q > bq) {
                best = Some((k, q));
            }
        }
        let (k, _) = best.ok_or_else(|| Error::Degenerate("polygon has no ear".into()))?;
        out.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
        idx.remove(k);
    }
    let (a, b, c) = (poly[idx[0]], poly[idx[1]], poly[idx[2]]);
    if cross(b - a, c - a) <= eps {
        return Err(Error::Degenerate("degenerate last ear".into()));
    }
    out.push([idx[0], idx[1], idx[2]]);
    Ok(out)
}

fn quality(a: C64, b: C64, c: C64) -> f64 {
    let ar = cross(b - a, c - a);
    let s = (b - a).norm_sqr() + (c - b).norm_sqr() + (a - c).norm_sqr();
    ar / s
}
