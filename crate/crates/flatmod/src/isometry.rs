//! Numerical isometry test for marked flat surfaces.
//!
//! Two surfaces are compared through their saddle connections: the multiset of
//! (length, start angle, end angle) triples up to a cutoff, and the cyclically
//! ordered fan of connections leaving one vertex, matched up to rotation. The
//! cutoff covers every Delaunay edge, and the Delaunay edges out of a vertex
//! determine the surface, so agreement is strong evidence of an isometry.

use crate::delaunay::{delaunay, edge_lengths};
use crate::metrics::{saddle_connections, SaddleConnection};
use crate::surface::FlatSurface;
use crate::Result;

#[derive(Clone, Copy, Debug)]
struct Ray {
    pos: f64,
    len: f64,
    to_angle: f64,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn fan(s: &FlatSurface, scs: &[SaddleConnection], v: usize, angles: &[f64]) -> Vec<Ray> {
    let mut out: Vec<Ray> = scs
        .iter()
        .filter(|c| c.from == v)
        .filter_map(|c| {
            let (_, pos) = s.dir_position(c.start.hid, c.start.angle)?;
            Some(Ray { pos, len: c.length, to_angle: angles[c.to] })
        })
        .collect();
    out.sort_by(|a, b| a.pos.total_cmp(&b.pos));
    out
}

/// Whether fans agree after rotating `b` by `shift`.
fn fans_match(a: &[Ray], b: &[Ray], shift: f64, theta: f64, tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    for x in a {
        let hit = b.iter().enumerate().position(|(k, y)| {
            if used[k] || !close(x.len, y.len, tol) || !close(x.to_angle, y.to_angle, tol) {
                return false;
            }
            let d = (y.pos - shift - x.pos).rem_euclid(theta);
            d.min(theta - d) <= tol * theta
        });
        match hit {
            Some(k) => used[k] = true,
            None => return false,
        }
    }
    true
}

fn vertex_angles(s: &FlatSurface) -> Vec<f64> {
    let vs = s.vertices();
    let n = vs.iter().map(|v| v.id + 1).max().unwrap_or(0);
    let mut a = vec![0.0; n];
    for v in vs {
        a[v.id] = v.angle;
    }
    a
}

/// Test whether the marked surfaces `a` and `b` are isometric, with relative
/// tolerance `tol` on lengths and angles. Labels are ignored.
pub fn isometric(a: &FlatSurface, b: &FlatSurface, tol: f64) -> Result<bool> {
    let mut a = a.clone();
    let mut b = b.clone();
    a.remove_unmarked()?;
    b.remove_unmarked()?;
    if !close(a.area(), b.area(), tol) || a.genus()? != b.genus()? {
        return Ok(false);
    }
    let mut ca: Vec<f64> = a.cone_angles().iter().map(|c| c.angle).collect();
    let mut cb: Vec<f64> = b.cone_angles().iter().map(|c| c.angle).collect();
    if ca.len() != cb.len() {
        return Ok(false);
    }
    ca.sort_by(f64::total_cmp);
    cb.sort_by(f64::total_cmp);
    if ca.iter().zip(&cb).any(|(x, y)| !close(*x, *y, tol)) {
        return Ok(false);
    }
    let (a, b) = (delaunay(&a)?, delaunay(&b)?);
    let longest = |s: &FlatSurface| edge_lengths(s).last().copied().unwrap_or(0.0);
    let (la, lb) = (longest(&a), longest(&b));
    if !close(la, lb, tol) {
        return Ok(false);
    }
    // put the cutoff in a gap of the spectrum so rounding cannot move a
    // connection across it
    let reach = 1.5 * la.max(lb) + 1e-6;
    let sa = saddle_connections(&a, reach * 1.5);
    let mut cut = reach;
    let gap = 1e-5 * (1.0 + reach);
    while sa.iter().any(|c| (c.length - cut).abs() < gap) {
        cut += 2.0 * gap;
    }
    let sa: Vec<SaddleConnection> = sa.into_iter().filter(|c| c.length <= cut).collect();
    let sb: Vec<SaddleConnection> = saddle_connections(&b, cut).into_iter().collect();
    if sa.len() != sb.len() {
        return Ok(false);
    }
    let (va, vb) = (vertex_angles(&a), vertex_angles(&b));
    let key = |c: &SaddleConnection, v: &[f64]| (c.length, v[c.from], v[c.to]);
    let kb: Vec<_> = sb.iter().map(|c| key(c, &vb)).collect();
    let loose = tol * 10.0;
    // greedy matching; sorting alone would let rounding reorder equal lengths
    let mut used = vec![false; kb.len()];
    for c in &sa {
        let x = key(c, &va);
        let hit = kb.iter().enumerate().position(|(k, y)| {
            !used[k] && close(x.0, y.0, tol) && close(x.1, y.1, loose) && close(x.2, y.2, loose)
        });
        match hit {
            Some(k) => used[k] = true,
            None => return Ok(false),
        }
    }

    // anchor: the vertex of largest angle, its shortest connection
    let v0 = a.vertices().into_iter().max_by(|x, y| x.angle.total_cmp(&y.angle)).unwrap();
    let fa = fan(&a, &sa, v0.id, &va);
    let Some(first) = fa.iter().min_by(|x, y| x.len.total_cmp(&y.len)).copied() else {
        return Ok(false);
    };
    for w in b.vertices() {
        if !close(w.angle, v0.angle, tol) {
            continue;
        }
        let fb = fan(&b, &sb, w.id, &vb);
        for y in &fb {
            if close(y.len, first.len, tol)
                && close(y.to_angle, first.to_angle, tol)
                && fans_match(&fa, &fb, y.pos - first.pos, v0.angle, loose)
            {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{hexagon_torus, lattice_torus, regular_hexagon, sphere3, C64};
    use std::f64::consts::PI;

    #[test]
    fn lattice_bases_and_rotations() {
        let a = lattice_torus(C64::new(1.0, 0.0), C64::new(0.3, 1.1));
        let b = lattice_torus(C64::new(1.0, 0.0), C64::new(1.3, 1.1));
        assert!(isometric(&a, &b, 1e-7).unwrap());
        let r = C64::from_polar(1.0, 0.7);
        let c = lattice_torus(r, C64::new(0.3, 1.1) * r);
        assert!(isometric(&a, &c, 1e-7).unwrap());
        let d = lattice_torus(C64::new(1.0, 0.0), C64::new(0.31, 1.1));
        assert!(!isometric(&a, &d, 1e-7).unwrap());
    }

    #[test]
    fn mirror_images_differ() {
        let a = lattice_torus(C64::new(1.0, 0.0), C64::new(0.3, 1.1));
        let b = lattice_torus(C64::new(1.0, 0.0), C64::new(-0.3, 1.1));
        // only orientation-preserving isometries count
        assert!(!isometric(&a, &b, 1e-7).unwrap());
        // three-point spheres are determined by their angles
        let s = sphere3([PI / 2.0, PI / 3.0, 7.0 * PI / 6.0]).unwrap();
        let t = sphere3([PI / 3.0, 7.0 * PI / 6.0, PI / 2.0]).unwrap();
        assert!(isometric(&s, &t, 1e-7).unwrap());
    }

    #[test]
    fn hexagon_patterns_are_distinct_surfaces() {
        let h = regular_hexagon();
        let a = hexagon_torus(2, h).unwrap();
        let sq = lattice_torus(C64::new(1.0, 0.0), C64::new(0.0, 1.0)).scaled(a.area().sqrt());
        assert!(!isometric(&a, &sq, 1e-7).unwrap());
        assert!(isometric(&a, &a.clone(), 1e-7).unwrap());
    }
}
