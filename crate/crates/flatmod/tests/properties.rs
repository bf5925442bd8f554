//! Randomised checks of the structural invariants.

mod common;

use std::f64::consts::{PI, TAU};

use common::*;
use flatmod::angles::{
    gauss_bonnet_residual, leaf_label, minimal_group_order, parse_angle_list, AngleDatum, RationalAngle,
};
use flatmod::chyp::{chd_distance, ProjectivePoint, SignatureOneNForm};
use flatmod::delaunay::{delaunay, edge_lengths, max_violation};
use flatmod::strata::{all_c_strata, k_strata, p_strata};
use flatmod::surface::{build_from_polygon, develop, lattice_torus, sphere3};
use flatmod::surgery::{s1, s4_kite, Kite};
use flatmod::veech::{signature, surface_area_form};
use flatmod::{FlatSurface, C64};
use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// A rational turn strictly between 0 and 1.
fn fraction() -> impl Strategy<Value = Ratio<i64>> {
    (2i64..13).prop_flat_map(|d| (1..d).prop_map(move |n| Ratio::new(n, d)))
}

/// Genus-zero datum: all angles below 2π with Σ(1 − tᵢ) = 2.
fn sphere_datum() -> impl Strategy<Value = AngleDatum> {
    prop::collection::vec(fraction(), 2..5).prop_filter_map("last angle out of range", |ts| {
        let curv: Ratio<i64> = ts.iter().map(|t| Ratio::from_integer(1) - t).sum();
        let last = curv - Ratio::from_integer(1);
        (last > Ratio::from_integer(0) && last < Ratio::from_integer(1)).then(|| {
            let mut angles: Vec<RationalAngle> = ts.into_iter().map(RationalAngle::from_turns).collect();
            angles.push(RationalAngle::from_turns(last));
            AngleDatum::new(0, angles)
        })
    })
}

/// Genus-one datum: θ₁ ∈ (2π, 4π), the rest below 2π, none a full turn.
fn torus_datum() -> impl Strategy<Value = AngleDatum> {
    prop::collection::vec(fraction(), 1..4).prop_filter_map("θ₁ out of range", |ts| {
        let excess: Ratio<i64> = ts.iter().map(|t| Ratio::from_integer(1) - t).sum();
        let t1 = Ratio::from_integer(1) + excess;
        (t1 < Ratio::from_integer(2)).then(|| {
            let mut angles = vec![RationalAngle::from_turns(t1)];
            angles.extend(ts.into_iter().map(RationalAngle::from_turns));
            AngleDatum::new(1, angles)
        })
    })
}

fn sorted_singular(s: &FlatSurface) -> Vec<f64> {
    let mut v: Vec<f64> = s.singular_angles(1e-9).iter().map(|c| c.angle).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn random_sphere() -> impl Strategy<Value = FlatSurface> {
    (0.05f64..0.9, 0.05f64..0.9)
        .prop_filter("third angle too small", |(a, b)| 1.0 - a - b > 0.05)
        .prop_map(|(a, b)| sphere3([a * TAU, b * TAU, (1.0 - a - b) * TAU]).unwrap())
}

fn random_torus() -> impl Strategy<Value = FlatSurface> {
    (-0.5f64..0.5, 0.6f64..3.0).prop_map(|(x, y)| lattice_torus(c(1.0, 0.0), c(x, y)))
}

fn any_surface() -> impl Strategy<Value = FlatSurface> {
    prop_oneof![random_sphere(), random_torus()]
}

fn reversed(s: &FlatSurface, path: &[(usize, usize)]) -> Vec<(usize, usize)> {
    path.iter()
        .rev()
        .map(|&(t, e)| {
            let a = s.tris[t].adj[e].unwrap();
            (a.t, a.e)
        })
        .collect()
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn gauss_bonnet_is_exact(d in prop_oneof![sphere_datum(), torus_datum()]) {
        prop_assert!(gauss_bonnet_residual(&d).is_zero());
        d.check_admissible().unwrap();
    }

    #[test]
    fn group_order_ignores_angle_order(d in sphere_datum(), big_m in 1u64..7) {
        let q = minimal_group_order(&d).unwrap();
        let mut rev = d.clone();
        rev.angles.reverse();
        prop_assert_eq!(minimal_group_order(&rev).unwrap(), q);
        prop_assert_eq!(leaf_label(d, big_m).unwrap().q, q * big_m);
    }

    #[test]
    fn angle_lists_round_trip(ts in prop::collection::vec((1i64..40, 1i64..40), 1..6)) {
        let text: Vec<String> = ts.iter().map(|(n, d)| format!("{n}/{d}")).collect();
        let parsed = parse_angle_list(&text.join(",")).unwrap();
        for (a, &(n, d)) in parsed.iter().zip(&ts) {
            prop_assert_eq!(*a, RationalAngle::new(n, d).unwrap());
            let back = RationalAngle::parse(&format!("{}/{}", a.num(), a.den())).unwrap();
            prop_assert_eq!(back, *a);
        }
    }

    #[test]
    fn torus_strata_reduce_consistently(d in torus_datum(), big_m in 1u64..6) {
        let label = leaf_label(d, big_m).unwrap();
        let p = p_strata(&label).unwrap();
        prop_assert_eq!(p.len() as u64, label.p.unwrap() * big_m / 2);
        for r in p.iter().chain(&all_c_strata(&label).unwrap()).chain(&k_strata(&label).unwrap()) {
            prop_assert!(gauss_bonnet_residual(&r.datum).is_zero(), "{:?}", r);
            prop_assert!(r.angle.turns() > Ratio::from_integer(0));
        }
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn surfaces_satisfy_euler_and_gauss_bonnet(s in any_surface()) {
        let g = s.genus().unwrap() as i64;
        prop_assert_eq!(s.euler_characteristic(), 2 - 2 * g);
        let total: f64 = s.vertices().iter().map(|v| TAU - v.angle).sum();
        prop_assert!((total - TAU * (2 - 2 * g) as f64).abs() < 1e-9);
        prop_assert!(s.gauss_bonnet_residual().abs() < 1e-9);
    }

    #[test]
    fn develop_then_build_is_faithful(s in any_surface()) {
        let back = build_from_polygon(&develop(&s, 0).unwrap()).unwrap();
        prop_assert!((back.area() - s.area()).abs() < 1e-9);
        let (a, b) = (sorted_singular(&s), sorted_singular(&back));
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn holonomy_composes(s in random_sphere()) {
        for v in s.vertices() {
            let (t, i) = v.corners[0];
            let path = s.loop_around(t, i).unwrap();
            let h = s.holonomy_along(&path).unwrap();
            prop_assert!((h - C64::from_polar(1.0, v.angle)).norm() < 1e-9);
            let twice: Vec<_> = path.iter().chain(&path).copied().collect();
            prop_assert!((s.holonomy_along(&twice).unwrap() - h * h).norm() < 1e-9);
            let inv = s.holonomy_along(&reversed(&s, &path)).unwrap();
            prop_assert!((inv * h - 1.0).norm() < 1e-9);
        }
    }

    #[test]
    fn delaunay_is_idempotent(s in any_surface()) {
        let d = delaunay(&s).unwrap();
        prop_assert!(max_violation(&d) <= 1e-9);
        let mut a = edge_lengths(&d);
        let mut b = edge_lengths(&delaunay(&d).unwrap());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn kite_tori_have_signature_one_two(
        tx in -0.4f64..0.4,
        ty in 0.8f64..1.6,
        r in 0.05f64..0.2,
        arg in 0.0f64..PI,
        t1 in 2.2 * PI..3.8 * PI,
        share in 0.25f64..0.75,
    ) {
        let rest = 6.0 * PI - t1;
        let (t2, t3) = (rest * share, rest * (1.0 - share));
        prop_assume!(t2 < 1.9 * PI && t3 < 1.9 * PI);
        let res = s4_kite(c(tx, ty), C64::from_polar(r, arg), [t1, t2, t3]);
        prop_assume!(res.is_ok());
        let s = res.unwrap().surface;
        let (p, form) = surface_area_form(&s, 0).unwrap();
        prop_assert_eq!(signature(&form).unwrap(), (1, 2));
        prop_assert!((form.eval(&p.base()) - s.area()).abs() < 1e-9 * s.area());
    }

    #[test]
    fn small_s1_keeps_the_books(
        a in 0.05f64..0.4,
        tp_frac in 0.2f64..0.8,
        r in 0.01f64..0.05,
        arg in 0.0f64..PI,
    ) {
        // angles (1 − 2a, a, a) turns; S1 at the largest
        let big = (1.0 - 2.0 * a) * TAU;
        let s = sphere3([big, a * TAU, a * TAU]).unwrap();
        let lo = big.max(0.5 * PI) + 0.3;
        let tp = lo + tp_frac * (1.9 * PI - lo);
        prop_assume!(lo < 1.9 * PI);
        let kite = Kite::new(TAU - tp, (tp - big) / 2.0, r).unwrap();
        prop_assume!(kite.side_c().max(kite.side_p()) < 0.2);
        let target = s.cone_angles().iter().position(|x| (x.angle - big).abs() < 1e-9).unwrap();
        let res = s1(&s, target, tp, C64::from_polar(r, arg)).unwrap();
        prop_assert!(res.surface.gauss_bonnet_residual().abs() < 1e-9);
        prop_assert!((s.area() - res.surface.area() - res.defect).abs() < 1e-9);
        let mut want = vec![a * TAU, a * TAU, tp, big + TAU - tp];
        want.sort_by(f64::total_cmp);
        let got = sorted_singular(&res.surface);
        prop_assert_eq!(got.len(), 4);
        for (x, y) in got.iter().zip(&want) {
            prop_assert!((x - y).abs() < 1e-7);
        }
        if let Some(w) = &res.witness {
            prop_assert_eq!(w.parent.q % w.child.q, 0);
        }
    }

    #[test]
    fn distance_is_invariant_and_metric(
        xs in prop::collection::vec((-0.6f64..0.6, -0.6f64..0.6), 6),
        angle in 0.0f64..TAU,
        rapidity in -1.5f64..1.5,
    ) {
        let f = SignatureOneNForm::standard(2);
        let pt = |k: usize| {
            let v = DVector::from_vec(vec![c(1.0, 0.0), c(xs[2 * k].0, xs[2 * k].1), c(xs[2 * k + 1].0, xs[2 * k + 1].1)]);
            ProjectivePoint::new(v, &f)
        };
        let (Ok(x), Ok(y), Ok(z)) = (pt(0), pt(1), pt(2)) else { return Err(TestCaseError::reject("outside the ball")) };
        let d = |a: &ProjectivePoint, b: &ProjectivePoint| chd_distance(a, b, &f).unwrap();
        let (dxy, dyz, dxz) = (d(&x, &y), d(&y, &z), d(&x, &z));
        prop_assert!(dxz <= dxy + dyz + 1e-9);
        prop_assert!((dxy - d(&y, &x)).abs() < 1e-12);
        prop_assert!(d(&x, &x).abs() < 1e-6);

        // a boost in the (0,1) plane composed with a phase on the last coordinate
        let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
        let mut g = DMatrix::<C64>::identity(3, 3);
        g[(0, 0)] = c(ch, 0.0);
        g[(0, 1)] = c(sh, 0.0);
        g[(1, 0)] = c(sh, 0.0);
        g[(1, 1)] = c(ch, 0.0);
        g[(2, 2)] = C64::from_polar(1.0, angle);
        let gx = ProjectivePoint::new(&g * &x.v, &f).unwrap();
        let gy = ProjectivePoint::new(&g * &y.v, &f).unwrap();
        prop_assert!((d(&gx, &gy) - dxy).abs() < 1e-9 * (1.0 + dxy));
    }
}
