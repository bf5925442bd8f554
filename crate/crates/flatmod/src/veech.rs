//! Veech's area form.
//!
//! A polygonal model with `2k` sides is cut down to its free side parameters
//! by the pairing relations `zᵢ + ρᵢ z_{σ(i)} = 0` and closure `Σ zᵢ = 0`.
//! Area is a Hermitian form in those parameters.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::surface::edit::ear_clip;
use crate::surface::{build_from_polygon, develop, PolygonalModel, C64};
use crate::{Error, Result};

/// A linear parametrisation: every side is `sides = expr · v` for the free
/// parameters `v`, which are themselves sides.
#[derive(Clone, Debug)]
pub struct LinearParametrisation {
    pub model: PolygonalModel,
    /// Indices of the free sides, increasing.
    pub free: Vec<usize>,
    /// `2k × d` expression matrix.
    pub expr: DMatrix<C64>,
}

impl LinearParametrisation {
    pub fn new(model: &PolygonalModel) -> Result<Self> {
        model.validate(1e-9)?;
        let n = model.sides.len();
        let k = model.k();
        let mut c = DMatrix::<C64>::zeros(k + 1, n);
        let mut row = 0;
        for i in 0..n {
            let j = model.pairing[i];
            if i < j {
                c[(row, i)] = C64::new(1.0, 0.0);
                c[(row, j)] += model.rho[i];
                row += 1;
            }
        }
        for i in 0..n {
            c[(k, i)] = C64::new(1.0, 0.0);
        }
        let (free, expr) = null_space(c, 1e-10);
        if free.is_empty() {
            return Err(Error::Precondition("the parametrisation has no free sides".into()));
        }
        let p = LinearParametrisation { model: model.clone(), free, expr };
        let err = (p.sides(&p.base()) - DMatrix::from_column_slice(n, 1, &model.sides)).norm();
        let scale: f64 = model.sides.iter().map(|z| z.norm()).sum();
        if err > 1e-9 * (1.0 + scale) {
            return Err(Error::Degenerate(format!("parametrisation misses the base point by {err}")));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Free parameters of the model itself.
    pub fn base(&self) -> DMatrix<C64> {
        DMatrix::from_iterator(self.dim(), 1, self.free.iter().map(|&i| self.model.sides[i]))
    }

    pub fn sides(&self, v: &DMatrix<C64>) -> DMatrix<C64> {
        &self.expr * v
    }

    /// The model with its sides moved to the parameters `v`.
    pub fn model_at(&self, v: &DMatrix<C64>) -> PolygonalModel {
        let mut m = self.model.clone();
        m.sides = self.sides(v).iter().copied().collect();
        m
    }

    /// Polygon vertices as linear functions of `v`: row `i` gives vertex `i`.
    fn vertex_rows(&self) -> DMatrix<C64> {
        let n = self.model.sides.len();
        let mut out = DMatrix::<C64>::zeros(n, self.dim());
        for i in 1..n {
            let prev = out.row(i - 1) + self.expr.row(i - 1);
            out.set_row(i, &prev);
        }
        out
    }
}

/// Null space of `c` by row reduction. Columns are eliminated from the last
/// one down, so the free columns are the earliest possible.
fn null_space(mut c: DMatrix<C64>, tol: f64) -> (Vec<usize>, DMatrix<C64>) {
    let (m, n) = c.shape();
    let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut pivot_row = vec![None; n];
    let mut r = 0;
    for j in (0..n).rev() {
        if r == m {
            break;
        }
        let (best, size) = (r..m).map(|i| (i, c[(i, j)].norm())).fold((r, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if size <= tol * scale {
            continue;
        }
        c.swap_rows(r, best);
        let p = c[(r, j)];
        for x in 0..n {
            c[(r, x)] /= p;
        }
        for i in 0..m {
            if i != r {
                let f = c[(i, j)];
                if f.norm() > 0.0 {
                    for x in 0..n {
                        let v = c[(r, x)];
                        c[(i, x)] -= f * v;
                    }
                }
            }
        }
        pivot_row[j] = Some(r);
        r += 1;
    }
    let free: Vec<usize> = (0..n).filter(|&j| pivot_row[j].is_none()).collect();
    let mut e = DMatrix::<C64>::zeros(n, free.len());
    for (k, &f) in free.iter().enumerate() {
        e[(f, k)] = C64::new(1.0, 0.0);
        for j in 0..n {
            if let Some(r) = pivot_row[j] {
                e[(j, k)] = -c[(r, f)];
            }
        }
    }
    (free, e)
}

/// A Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianForm {
    pub matrix: DMatrix<C64>,
}

/// Eigenvalue sign counts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
    pub zero: usize,
    pub eigenvalues: Vec<f64>,
}

impl Signature {
    /// True when some eigenvalue is within the zero threshold.
    pub fn degenerate(&self) -> bool {
        self.zero > 0
    }
}

/// Zero threshold for eigenvalues, relative to the spectral radius.
pub const EIGEN_REL_TOL: f64 = 1e-9;

impl HermitianForm {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Input("a Hermitian form needs a square matrix".into()));
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if (&matrix - matrix.adjoint()).iter().any(|z| z.norm() > 1e-12 * scale) {
            return Err(Error::Input("matrix is not Hermitian".into()));
        }
        Ok(HermitianForm { matrix })
    }

    pub fn identity(d: usize) -> Self {
        HermitianForm { matrix: DMatrix::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `vᴴ H v`.
    pub fn eval(&self, v: &DMatrix<C64>) -> f64 {
        (v.adjoint() * &self.matrix * v)[(0, 0)].re
    }

    /// The form in new coordinates `v = g w`: `gᴴ H g`.
    pub fn pullback(&self, g: &DMatrix<C64>) -> HermitianForm {
        let m = g.adjoint() * &self.matrix * g;
        HermitianForm { matrix: (&m + m.adjoint()) * C64::new(0.5, 0.0) }
    }

    /// Append a coordinate carrying `−μ|z₀|²`.
    pub fn extend_with_defect(&self, mu: f64) -> HermitianForm {
        let d = self.dim();
        let mut m = DMatrix::<C64>::zeros(d + 1, d + 1);
        m.view_mut((0, 0), (d, d)).copy_from(&self.matrix);
        m[(d, d)] = C64::new(-mu, 0.0);
        HermitianForm { matrix: m }
    }

    pub fn signature(&self) -> Signature {
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let radius = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let thr = EIGEN_REL_TOL * radius;
        Signature {
            p: ev.iter().filter(|&&x| x > thr).count(),
            q: ev.iter().filter(|&&x| x < -thr).count(),
            zero: ev.iter().filter(|&&x| x.abs() <= thr).count(),
            eigenvalues: ev,
        }
    }
}

/// Signature of a form; errors when an eigenvalue is within the threshold.
pub fn signature(h: &HermitianForm) -> Result<(usize, usize)> {
    let s = h.signature();
    if s.degenerate() {
        return Err(Error::Degenerate(format!("form has {} near-zero eigenvalues", s.zero)));
    }
    Ok((s.p, s.q))
}

/// Area as a Hermitian form in the free parameters: the sum over triangles
/// `(a, b, c)` of `½ Im(conj(b − a)(c − a))`.
pub fn area_form(param: &LinearParametrisation) -> Result<HermitianForm> {
    let rows = param.vertex_rows();
    let tris = match &param.model.triangles {
        Some(t) => t.clone(),
        None => ear_clip(&param.model.vertices())?,
    };
    let d = param.dim();
    let mut h = DMatrix::<C64>::zeros(d, d);
    for [a, b, c] in tris {
        let u = rows.row(b) - rows.row(a);
        let w = rows.row(c) - rows.row(a);
        // conj(u v)(w v) = vᴴ (uᴴ w) v, and Im x = (x − x̄)/2i
        let m = u.adjoint() * &w;
        h += (&m - m.adjoint()) * C64::new(0.0, -0.25);
    }
    HermitianForm::new(h)
}

/// Area form of a surface, developed from triangle `base`.
pub fn surface_area_form(s: &crate::FlatSurface, base: usize) -> Result<(LinearParametrisation, HermitianForm)> {
    let p = LinearParametrisation::new(&develop(s, base)?)?;
    let h = area_form(&p)?;
    Ok((p, h))
}

/// A second polygonation of the surface of a parametrisation: flip the listed
/// edges of the model's triangulation, then develop from `base`.
#[derive(Clone, Debug, Default)]
pub struct Recut {
    pub flips: Vec<(usize, usize)>,
    pub base: usize,
}

fn recut_model(a: &LinearParametrisation, v: &DMatrix<C64>, recut: &Recut) -> Result<PolygonalModel> {
    let mut s = build_from_polygon(&a.model_at(v))?;
    for &(t, e) in &recut.flips {
        if t >= s.tris.len() || e > 2 || !s.flip(t, e) {
            return Err(Error::Precondition(format!("edge ({t},{e}) cannot be flipped")));
        }
    }
    develop(&s, recut.base)
}

/// Matrix `g` taking the free parameters of `a` to those of the recut
/// parametrisation `b`, together with `b`; area invariance reads
/// `gᴴ H_b g = H_a`.
pub fn transition_map(a: &LinearParametrisation, recut: &Recut) -> Result<(DMatrix<C64>, LinearParametrisation)> {
    let v0 = a.base();
    let b = LinearParametrisation::new(&recut_model(a, &v0, recut)?)?;
    if b.dim() != a.dim() {
        return Err(Error::Precondition("parametrisations of different dimension".into()));
    }
    let coords = |m: &PolygonalModel| -> Result<DMatrix<C64>> {
        if m.sides.len() != b.model.sides.len() || m.pairing != b.model.pairing {
            return Err(Error::Degenerate("the recut changed combinatorics under perturbation".into()));
        }
        Ok(DMatrix::from_iterator(b.dim(), 1, b.free.iter().map(|&i| m.sides[i])))
    };
    let w0 = coords(&b.model)?;
    let scale = v0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let h = 1e-4 * scale;
    let d = a.dim();
    let mut g = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        let mut v = v0.clone();
        v[(j, 0)] += C64::new(h, 0.0);
        let col = (coords(&recut_model(a, &v, recut)?)? - &w0) / C64::new(h, 0.0);
        // the map is complex linear: check with an imaginary step
        let mut vi = v0.clone();
        vi[(j, 0)] += C64::new(0.0, h);
        let coli = (coords(&recut_model(a, &vi, recut)?)? - &w0) / C64::new(0.0, h);
        if (&col - &coli).norm() > 1e-6 * (1.0 + col.norm()) {
            return Err(Error::Degenerate("transition map is not complex linear".into()));
        }
        g.set_column(j, &col.column(0));
    }
    Ok((g, b))
}

/// Whether `x = m + n·ζ` with integers `m, n` and `ζ = e^{2πi/q}`, for the
/// orders `q ∈ {1, 2, 3, 4, 6}` whose cyclotomic integers form a lattice.
pub fn in_cyclotomic_integers(x: C64, q: u64, tol: f64) -> Result<bool> {
    let zeta = C64::from_polar(1.0, std::f64::consts::TAU / q as f64);
    match q {
        1 | 2 => Ok(x.im.abs() <= tol && (x.re - x.re.round()).abs() <= tol),
        3 | 4 | 6 => {
            let n = x.im / zeta.im;
            let m = x.re - n * zeta.re;
            Ok((n - n.round()).abs() <= tol && (m - m.round()).abs() <= tol)
        }
        _ => Err(Error::Input(format!("cyclotomic lattice test needs q in 1,2,3,4,6, got {q}"))),
    }
}
