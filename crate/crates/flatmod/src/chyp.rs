//! Complex hyperbolic numerics for a Hermitian form of signature `(1, n)`.
//!
//! Points are positive lines. The pairing is `⟨z, w⟩ = wᴴ H z`, linear in the
//! first slot, and the distance satisfies
//! `cosh²(α/2) = ⟨z,w⟩⟨w,z⟩ / (⟨z,z⟩⟨w,w⟩)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::surface::C64;
use crate::surgery::SurgeryResult;
use crate::veech::HermitianForm;
use crate::{Error, Result};

/// Slack allowed when the distance cross-ratio dips below one.
pub const CROSS_RATIO_SLACK: f64 = 1e-12;

/// A Hermitian form with exactly one positive eigenvalue and no kernel.
#[derive(Clone, Debug)]
pub struct SignatureOneNForm {
    pub form: HermitianForm,
}

impl SignatureOneNForm {
    pub fn new(form: HermitianForm) -> Result<Self> {
        let s = form.signature();
        if s.p != 1 || s.zero != 0 {
            return Err(Error::Precondition(format!(
                "form has signature ({}, {}) with {} null directions, expected (1, n)",
                s.p, s.q, s.zero
            )));
        }
        Ok(SignatureOneNForm { form })
    }

    /// `diag(1, −1, …, −1)` on `ℂ^{n+1}`.
    pub fn standard(n: usize) -> Self {
        let m = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => C64::new(1.0, 0.0),
            _ if i == j => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        SignatureOneNForm { form: HermitianForm { matrix: m } }
    }

    /// Complex dimension of the hyperbolic space.
    pub fn n(&self) -> usize {
        self.form.dim() - 1
    }

    pub fn pair(&self, z: &DVector<C64>, w: &DVector<C64>) -> C64 {
        (w.adjoint() * &self.form.matrix * z)[(0, 0)]
    }

    pub fn norm2(&self, z: &DVector<C64>) -> f64 {
        self.pair(z, z).re
    }
}

/// A positive line, stored through a representative.
#[derive(Clone, Debug)]
pub struct ProjectivePoint {
    pub v: DVector<C64>,
}

impl ProjectivePoint {
    pub fn new(v: DVector<C64>, form: &SignatureOneNForm) -> Result<Self> {
        if v.len() != form.form.dim() {
            return Err(Error::Input(format!("vector has {} entries, form has {}", v.len(), form.form.dim())));
        }
        if !(form.norm2(&v) > 0.0) {
            return Err(Error::Precondition("point is not in the positive cone".into()));
        }
        Ok(ProjectivePoint { v })
    }

    /// Representative with `⟨v, v⟩ = 1`.
    pub fn normalized(&self, form: &SignatureOneNForm) -> DVector<C64> {
        &self.v / C64::new(form.norm2(&self.v).sqrt(), 0.0)
    }
}

/// Distance between two positive lines.
///
/// Computed through the component `d` of `y` orthogonal to `x`, which is
/// negative: `sinh²(α/2) = −⟨d, d⟩ / ⟨y, y⟩`. This equals the cross-ratio
/// minus one without cancellation at short range.
pub fn chd_distance(x: &ProjectivePoint, y: &ProjectivePoint, form: &SignatureOneNForm) -> Result<f64> {
    let (xx, yy) = (form.norm2(&x.v), form.norm2(&y.v));
    if !(xx > 0.0 && yy > 0.0) {
        return Err(Error::Precondition("distance needs positive points".into()));
    }
    let d = &y.v - &x.v * (form.pair(&y.v, &x.v) / xx);
    let excess = -form.norm2(&d) / yy;
    if excess < -CROSS_RATIO_SLACK {
        return Err(Error::Precondition(format!("cross-ratio is {} below one", -excess)));
    }
    Ok(2.0 * excess.max(0.0).sqrt().asinh())
}

/// The point at parameter `t` on the geodesic from `x` to `y`, at constant
/// speed. The representatives are normalised to `⟨x,x⟩ = ⟨y,y⟩ = 1` with
/// `⟨x,y⟩` real positive; the geodesic is the projectivised segment between
/// them.
pub fn geodesic_point(x: &ProjectivePoint, y: &ProjectivePoint, t: f64, form: &SignatureOneNForm) -> Result<ProjectivePoint> {
    let alpha = chd_distance(x, y, form)?;
    let xn = x.normalized(form);
    let mut yn = y.normalized(form);
    let p = form.pair(&xn, &yn);
    if p.norm() > 0.0 {
        yn *= p / p.norm();
    }
    // ⟨x, y⟩ = cosh(α/2)
    let b = alpha / 2.0;
    let v = if b < 1e-12 {
        &xn * C64::new(1.0 - t, 0.0) + &yn * C64::new(t, 0.0)
    } else {
        let s = b.sinh();
        &xn * C64::new(((1.0 - t) * b).sinh() / s, 0.0) + &yn * C64::new((t * b).sinh() / s, 0.0)
    };
    assert!(form.norm2(&v) > 0.0, "geodesic left the positive cone");
    Ok(ProjectivePoint { v })
}

/// The two points compared in the surgery distance bound.
#[derive(Clone, Debug)]
pub struct SurgeryPair {
    pub form: SignatureOneNForm,
    /// The surgered surface `(ẑ, z₀)` at area one.
    pub x: ProjectivePoint,
    /// Its projection `(ẑ, 0)`.
    pub y: ProjectivePoint,
    /// Width `ε = |z₀|` at area one.
    pub eps: f64,
    /// Removed area per `ε²`, so the form is `A′ − μ|z₀|²`.
    pub mu: f64,
}

impl SurgeryPair {
    /// `area` is the area form of the surface before surgery and `base` its
    /// parameters there. The surgery coordinate is scaled to have modulus
    /// the width, so `μ` here is the defect over the squared width.
    pub fn new(area: &HermitianForm, base: &DMatrix<C64>, res: &SurgeryResult) -> Result<Self> {
        let after = res.surface.area();
        let eps = res.width;
        let mu = res.defect / after / (eps * eps);
        if !(mu > 0.0) {
            return Err(Error::Precondition("surgery removes no area".into()));
        }
        let v = base / C64::new(after.sqrt(), 0.0);
        // at area one, the old surface has area 1 + με²
        let expect = 1.0 + mu * eps * eps;
        let got = area.eval(&v);
        if (got - expect).abs() > 1e-9 * expect {
            return Err(Error::Degenerate(format!("old area {got} is not 1 + με² = {expect}")));
        }
        let form = SignatureOneNForm::new(area.extend_with_defect(mu))?;
        let d = v.nrows();
        let mut x = DVector::<C64>::zeros(d + 1);
        x.rows_mut(0, d).copy_from(&v.column(0));
        let y = x.clone();
        x[d] = C64::from_polar(eps, res.z0.arg());
        let x = ProjectivePoint::new(x, &form)?;
        let y = ProjectivePoint::new(y, &form)?;
        Ok(SurgeryPair { form, x, y, eps, mu })
    }

    pub fn distance(&self) -> Result<f64> {
        chd_distance(&self.x, &self.y, &self.form)
    }
}

/// Pseudo-horospherical coordinates. The form is
/// `⟨ξ, η⟩ = (i/2)(ξ₀η̄ₙ − ξₙη̄₀) + a(ξ̂, η̂)` with `ξ̂ = (ξ₀, …, ξₙ₋₁)`, and
/// points are normalised to `ξ₀ = 1`, so `⟨ξ, ξ⟩ = Im ξₙ + a(ξ̂, ξ̂)`.
#[derive(Clone, Debug)]
pub struct PhChart {
    /// The `n × n` matrix of `a`, signature `(1, n − 1)`.
    pub a: DMatrix<C64>,
}

impl PhChart {
    pub fn new(a: DMatrix<C64>) -> Result<Self> {
        let a = HermitianForm::new(a)?;
        let n = a.dim();
        if n == 0 {
            return Err(Error::Input("chart needs n ≥ 1".into()));
        }
        let s = a.signature();
        if s.p != 1 || s.q != n - 1 {
            return Err(Error::Precondition(format!("a has signature ({}, {}), expected (1, {})", s.p, s.q, n - 1)));
        }
        let chart = PhChart { a: a.matrix };
        SignatureOneNForm::new(chart.form().form)?;
        Ok(chart)
    }

    /// `a = diag(1, −1, …, −1)`.
    pub fn standard(n: usize) -> Self {
        PhChart { a: SignatureOneNForm::standard(n - 1).form.matrix }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// The form on `ℂ^{n+1}` in the coordinates `ξ`.
    pub fn form(&self) -> SignatureOneNForm {
        let n = self.n();
        let mut m = DMatrix::<C64>::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        // ⟨ξ, η⟩ = η̄ᴴ M ξ: the (n, 0) entry multiplies ξ₀η̄ₙ
        m[(n, 0)] += C64::new(0.0, 0.5);
        m[(0, n)] += C64::new(0.0, -0.5);
        SignatureOneNForm { form: HermitianForm { matrix: m } }
    }

    /// `(1, ξ₁, …, ξₙ)`.
    pub fn lift(&self, xi: &[C64]) -> DVector<C64> {
        DVector::from_iterator(xi.len() + 1, std::iter::once(C64::new(1.0, 0.0)).chain(xi.iter().copied()))
    }

    fn hat(&self, xi: &[C64]) -> DVector<C64> {
        self.lift(&xi[..self.n() - 1])
    }

    fn a_pair(&self, z: &DVector<C64>, w: &DVector<C64>) -> C64 {
        (w.adjoint() * &self.a * z)[(0, 0)]
    }

    pub fn u(&self, xi: &[C64]) -> f64 {
        xi[self.n() - 1].im + self.a_pair(&self.hat(xi), &self.hat(xi)).re
    }

    pub fn s(&self, xi: &[C64]) -> f64 {
        xi[self.n() - 1].re
    }

    /// The point with coordinates `(s, u, ξ₁, …, ξₙ₋₁)`.
    pub fn point(&self, s: f64, u: f64, rest: &[C64]) -> Vec<C64> {
        let hat = self.lift(rest);
        let im = u - self.a_pair(&hat, &hat).re;
        rest.iter().copied().chain(std::iter::once(C64::new(s, im))).collect()
    }

    /// The tangent `dξ` for a coordinate tangent `(ds, du, dξ₁, …, dξₙ₋₁)`.
    pub fn tangent(&self, xi: &[C64], ds: f64, du: f64, drest: &[C64]) -> Vec<C64> {
        let omega = self.omega(xi, drest);
        let dim = du - 2.0 * omega.re;
        drest.iter().copied().chain(std::iter::once(C64::new(ds, dim))).collect()
    }

    fn dhat(&self, d: &[C64]) -> DVector<C64> {
        DVector::from_iterator(d.len() + 1, std::iter::once(C64::new(0.0, 0.0)).chain(d.iter().copied()))
    }

    fn omega(&self, xi: &[C64], drest: &[C64]) -> C64 {
        self.a_pair(&self.hat(xi), &self.dhat(drest))
    }

    /// Squared length of the tangent `dξ` at `ξ`:
    /// `g = (4/u²)(du²/4 + (ds/2 + Im ω)² − u Ω)` with `ω = a(ξ̂, dξ̂)` and
    /// `Ω = a(dξ̂, dξ̂)`.
    pub fn metric(&self, xi: &[C64], dxi: &[C64]) -> Result<f64> {
        let n = self.n();
        if xi.len() != n || dxi.len() != n {
            return Err(Error::Input(format!("chart points have {n} coordinates")));
        }
        let u = self.u(xi);
        if !(u > 0.0) {
            return Err(Error::Precondition(format!("u = {u} is not positive")));
        }
        let dh = self.dhat(&dxi[..n - 1]);
        let omega = self.a_pair(&self.hat(xi), &dh);
        let big = self.a_pair(&dh, &dh).re;
        let du = dxi[n - 1].im + 2.0 * omega.re;
        let ds = dxi[n - 1].re;
        Ok(4.0 / (u * u) * (du * du / 4.0 + (ds / 2.0 + omega.im).powi(2) - u * big))
    }

    /// Eigenvalues of `Ω` on `(dξ₁, …, dξₙ₋₁)`; the metric is positive for
    /// large `u` only when they are all negative.
    pub fn omega_eigenvalues(&self) -> Vec<f64> {
        let n = self.n();
        if n == 1 {
            return vec![];
        }
        let block = self.a.view((1, 1), (n - 1, n - 1)).into_owned();
        HermitianForm { matrix: block }.signature().eigenvalues
    }

    /// Gram matrix of `g` in the real coordinates
    /// `(s, u, Re ξ₁, Im ξ₁, …, Re ξₙ₋₁, Im ξₙ₋₁)`.
    pub fn gram(&self, xi: &[C64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let m = 2 * n;
        let basis = |v: &[f64]| -> Vec<C64> {
            let rest: Vec<C64> = (0..n - 1).map(|i| C64::new(v[2 + 2 * i], v[3 + 2 * i])).collect();
            self.tangent(xi, v[0], v[1], &rest)
        };
        let e = |j: usize| -> Vec<f64> { (0..m).map(|k| if k == j { 1.0 } else { 0.0 }).collect() };
        let diag: Vec<f64> = (0..m).map(|j| self.metric(xi, &basis(&e(j)))).collect::<Result<_>>()?;
        let mut g = DMatrix::<f64>::from_diagonal(&DVector::from_vec(diag.clone()));
        for j in 0..m {
            for k in j + 1..m {
                let v: Vec<f64> = (0..m).map(|x| if x == j || x == k { 1.0 } else { 0.0 }).collect();
                let x = (self.metric(xi, &basis(&v))? - diag[j] - diag[k]) / 2.0;
                g[(j, k)] = x;
                g[(k, j)] = x;
            }
        }
        Ok(g)
    }

    /// The volume density `√det g` in the coordinates of [`PhChart::gram`].
    pub fn sqrt_det(&self, xi: &[C64]) -> Result<f64> {
        let d = self.gram(xi)?.determinant();
        if !(d > 0.0) {
            return Err(Error::Degenerate(format!("metric determinant {d} is not positive")));
        }
        Ok(d.sqrt())
    }

    /// Length of a polygonal path by the trapezoid rule on `√g`.
    pub fn path_length(&self, path: &[Vec<C64>]) -> Result<f64> {
        let mut len = 0.0;
        for w in path.windows(2) {
            let d: Vec<C64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            len += 0.5 * (self.metric(&w[0], &d)?.max(0.0).sqrt() + self.metric(&w[1], &d)?.max(0.0).sqrt());
        }
        Ok(len)
    }

    /// Volume of `U_{K,λ} ∩ {u ≤ u_max}` where
    /// `U_{K,λ} = {|ξ₁|, …, |ξₙ₋₁|, |Re ξₙ| < K, Im ξₙ > λ}`.
    ///
    /// The metric does not depend on `s`, which contributes `2K`. The disks
    /// `|ξᵢ| < K` use polar midpoint grids and `u` an exponential trapezoid
    /// grid from `λ + a(ξ̂, ξ̂)`. The grid is doubled until two successive
    /// values agree to `rel_tol`.
    pub fn region_volume(&self, k: f64, lambda: f64, u_max: f64, rel_tol: f64) -> Result<Volume> {
        if !(k > 0.0 && lambda > 0.0) {
            return Err(Error::Input("K and λ must be positive".into()));
        }
        let n = self.n();
        let mut prev: Option<f64> = None;
        let mut level = 8usize;
        loop {
            let v = self.volume_on_grid(k, lambda, u_max, level)?;
            if let Some(p) = prev {
                let err = (v - p).abs();
                if err <= rel_tol * v.abs().max(f64::MIN_POSITIVE) {
                    return Ok(Volume { value: v, error: err, grid: level });
                }
            }
            prev = Some(v);
            level *= 2;
            if level.pow((2 * n - 1) as u32) > 1 << 24 {
                return Err(Error::Degenerate(format!(
                    "volume grid too coarse: successive values {} and {v} differ beyond {rel_tol}",
                    prev.unwrap_or(0.0)
                )));
            }
        }
    }

    fn volume_on_grid(&self, k: f64, lambda: f64, u_max: f64, level: usize) -> Result<f64> {
        let n = self.n();
        let disks = n - 1;
        // polar midpoint nodes for one disk: (ξ, weight)
        let mut disk = Vec::with_capacity(level * level);
        let (dr, dphi) = (k / level as f64, std::f64::consts::TAU / level as f64);
        for i in 0..level {
            let r = (i as f64 + 0.5) * dr;
            for j in 0..level {
                disk.push((C64::from_polar(r, j as f64 * dphi), r * dr * dphi));
            }
        }
        let total = disk.len().pow(disks as u32);
        let values: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|mut idx| -> Result<f64> {
                let mut rest = Vec::with_capacity(disks);
                let mut w = 1.0;
                for _ in 0..disks {
                    let (z, wt) = disk[idx % disk.len()];
                    idx /= disk.len();
                    rest.push(z);
                    w *= wt;
                }
                let hat = self.lift(&rest);
                let lo = lambda + self.a_pair(&hat, &hat).re;
                if !(lo > 0.0) {
                    return Err(Error::Precondition("the region reaches u = 0; shrink K or raise λ".into()));
                }
                if lo >= u_max {
                    return Ok(0.0);
                }
                // u = e^t, du = u dt
                let (t0, t1) = (lo.ln(), u_max.ln());
                let h = (t1 - t0) / level as f64;
                let mut f = Vec::with_capacity(level + 1);
                for i in 0..=level {
                    let u = (t0 + h * i as f64).exp();
                    f.push(self.sqrt_det(&self.point(0.0, u, &rest))? * u);
                }
                let trap = h * (pairwise_sum(&f) - 0.5 * (f[0] + f[level]));
                Ok(w * trap)
            })
            .collect::<Result<_>>()?;
        Ok(2.0 * k * pairwise_sum(&values))
    }

    /// `√det g(2u) / √det g(u)` at `(s, u, ξ₁, …)`.
    pub fn density_ratio(&self, u: f64, rest: &[C64]) -> Result<f64> {
        Ok(self.sqrt_det(&self.point(0.0, 2.0 * u, rest))? / self.sqrt_det(&self.point(0.0, u, rest))?)
    }
}

/// Pairwise summation, so the result does not depend on thread scheduling.
fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let (a, b) = x.split_at(x.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// A truncated volume with the difference to the previous grid as its error.
#[derive(Clone, Debug, Serialize)]
pub struct Volume {
    pub value: f64,
    pub error: f64,
    pub grid: usize,
}
