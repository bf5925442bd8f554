//! Intrinsic Delaunay triangulations by edge flips.
//!
//! An edge is flipped when the two angles opposite to it sum to more than π.
//! Cocircular quadrilaterals are left alone, so the output is deterministic
//! but not unique when ties occur.

use std::f64::consts::PI;

use crate::surface::FlatSurface;
use crate::{Error, Result};

/// Slack on the opposite-angle criterion.
pub const ANGLE_EPS: f64 = 1e-10;

fn opposite_angle_sum(s: &FlatSurface, t: usize, e: usize) -> Option<f64> {
    let a = s.tris[t].adj[e]?;
    if a.t == t {
        return None;
    }
    Some(s.tris[t].angle((e + 2) % 3) + s.tris[a.t].angle((a.e + 2) % 3))
}

/// Whether edge `(t,e)` violates the empty-circumdisk condition.
pub fn is_illegal(s: &FlatSurface, t: usize, e: usize) -> bool {
    opposite_angle_sum(s, t, e).is_some_and(|x| x > PI + ANGLE_EPS)
}

/// Largest excess of opposite angles over π; non-positive iff Delaunay.
pub fn max_violation(s: &FlatSurface) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for t in s.live() {
        for e in 0..3 {
            if let Some(x) = opposite_angle_sum(s, t, e) {
                m = m.max(x - PI);
            }
        }
    }
    m
}

pub fn is_delaunay(s: &FlatSurface) -> bool {
    max_violation(s) <= ANGLE_EPS
}

/// Flip to a Delaunay triangulation with vertices at the marked points.
pub fn delaunay(s: &FlatSurface) -> Result<FlatSurface> {
    if s.marked_count() == 0 {
        return Err(Error::Precondition("Delaunay triangulation needs a marked point".into()));
    }
    let mut s = s.clone();
    s.compact();
    s.make_delaunay()?;
    Ok(s)
}

impl FlatSurface {
    /// Flip illegal edges in place until none is left.
    pub(crate) fn make_delaunay(&mut self) -> Result<()> {
        let cap = 50 * self.edge_count().max(1);
        let mut flips = 0;
        loop {
            let mut changed = false;
            for t in 0..self.tris.len() {
                for e in 0..3 {
                    if !self.tris[t].dead && is_illegal(self, t, e) && self.flip(t, e) {
                        flips += 1;
                        changed = true;
                        if flips > cap {
                            return Err(Error::Degenerate(format!("Delaunay flips exceeded {cap}")));
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        log::debug!("delaunay: {flips} flips");
        Ok(())
    }
}

/// Circumradius of triangle `t`.
pub fn circumradius(s: &FlatSurface, t: usize) -> f64 {
    let tri = &s.tris[t];
    let (a, b, c) = (tri.vec(0).norm(), tri.vec(1).norm(), tri.vec(2).norm());
    a * b * c / (4.0 * tri.signed_area())
}

/// Largest circumradius over all triangles.
pub fn max_circumradius(s: &FlatSurface) -> f64 {
    s.live().map(|t| circumradius(s, t)).fold(0.0, f64::max)
}

/// Lengths of all edges, each edge once.
pub fn edge_lengths(s: &FlatSurface) -> Vec<f64> {
    let mut v = Vec::new();
    for t in s.live() {
        for e in 0..3 {
            let keep = match s.tris[t].adj[e] {
                Some(a) => (t, e) <= (a.t, a.e),
                None => true,
            };
            if keep {
                v.push(s.tris[t].vec(e).norm());
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v
}
