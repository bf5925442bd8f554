use serde::{Deserialize, Serialize};

use super::{FlatSurface, C64};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluingJson {
    pub a: [usize; 2],
    pub b: [usize; 2],
    /// Rotation taking edge `b` onto the reverse of edge `a`; computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rot: Option<[f64; 2]>,
}

/// On-disk form of a triangulated surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub triangles: Vec<[[f64; 2]; 3]>,
    pub gluings: Vec<GluingJson>,
    /// Vertex ids (order of first corner occurrence) carrying a marked point.
    #[serde(default)]
    pub marked: Vec<usize>,
}

impl SurfaceFile {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(format!("surface file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surface file serializes")
    }

    /// Build the surface. Vertices listed in `marked` and every vertex whose
    /// angle differs from 2π get labels; if none do, vertex 0 is marked.
    pub fn to_surface(&self, tol: f64) -> Result<FlatSurface> {
        let mut s = FlatSurface::new();
        for (k, t) in self.triangles.iter().enumerate() {
            let p = t.map(|[x, y]| C64::new(x, y));
            let tri = s.push_triangle(p, [None; 3]);
            let area = s.tris[tri].signed_area();
            let scale = s.tris[tri].vec(0).norm_sqr().max(s.tris[tri].vec(1).norm_sqr());
            if !(area > tol * scale) {
                return Err(Error::Input(format!("triangle {k} is degenerate or clockwise")));
            }
        }
        let n = self.triangles.len();
        for g in &self.gluings {
            let ([t1, e1], [t2, e2]) = (g.a, g.b);
            if t1 >= n || t2 >= n || e1 > 2 || e2 > 2 {
                return Err(Error::Input(format!("gluing {:?}–{:?} refers to a missing edge", g.a, g.b)));
            }
            if (t1, e1) == (t2, e2) {
                return Err(Error::Input(format!("edge {:?} glued to itself", g.a)));
            }
            if s.tris[t1].adj[e1].is_some() || s.tris[t2].adj[e2].is_some() {
                return Err(Error::Input(format!("edge in gluing {:?}–{:?} glued twice", g.a, g.b)));
            }
            match g.rot {
                Some([re, im]) => s.glue(t1, e1, t2, e2, C64::new(re, im)),
                None => s.glue_auto(t1, e1, t2, e2)?,
            }
        }
        for t in 0..n {
            for e in 0..3 {
                if s.tris[t].adj[e].is_none() {
                    return Err(Error::Input(format!("edge [{t},{e}] is not glued")));
                }
            }
        }
        let verts = s.vertices();
        let mut label = 0u32;
        for &m in &self.marked {
            let v = verts.get(m).ok_or_else(|| Error::Input(format!("marked vertex {m} does not exist")))?;
            let (t, i) = v.corners[0];
            s.set_vertex_label(t, i, Some(label));
            label += 1;
        }
        for v in &verts {
            if (v.angle - std::f64::consts::TAU).abs() > 1e-6 && !self.marked.contains(&v.id) {
                let (t, i) = v.corners[0];
                s.set_vertex_label(t, i, Some(label));
                label += 1;
            }
        }
        if label == 0 {
            s.set_vertex_label(0, 0, Some(0));
        }
        s.check(tol)?;
        Ok(s)
    }

    pub fn from_surface(s: &FlatSurface) -> SurfaceFile {
        let mut s = s.clone();
        s.compact();
        let triangles = s.tris.iter().map(|t| t.p.map(|z| [z.re, z.im])).collect();
        let mut gluings = Vec::new();
        for (t, tri) in s.tris.iter().enumerate() {
            for e in 0..3 {
                if let Some(a) = tri.adj[e] {
                    if (t, e) < (a.t, a.e) {
                        gluings.push(GluingJson { a: [t, e], b: [a.t, a.e], rot: Some([a.rot.re, a.rot.im]) });
                    }
                }
            }
        }
        let mut marked: Vec<(u32, usize)> =
            s.vertices().into_iter().filter_map(|v| v.label.map(|l| (l, v.id))).collect();
        marked.sort();
        SurfaceFile { triangles, gluings, marked: marked.into_iter().map(|(_, id)| id).collect() }
    }
}

/// On-disk form of a polygonal model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonFile {
    pub sides: Vec<[f64; 2]>,
    pub pairing: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotations: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangles: Option<Vec<[usize; 3]>>,
}
