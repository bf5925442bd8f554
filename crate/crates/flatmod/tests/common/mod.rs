//! Shared fixtures: a regression corpus of surfaces built by every
//! construction the library offers.

#![allow(dead_code)]

use std::f64::consts::PI;

use flatmod::surface::{hexagon_torus, lattice_torus, regular_hexagon, sphere3, square_torus, tau_torus};
use flatmod::surgery::{s1, s3_devil, s4_kite, s5_cylinder};
use flatmod::{FlatSurface, C64};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn skew_hexagon() -> [C64; 6] {
    [c(0.0, 0.0), c(2.0, 0.0), c(3.0, 1.0), c(3.0, 2.5), c(1.0, 2.5), c(0.0, 1.5)]
}

pub fn quarter_sphere() -> FlatSurface {
    sphere3([PI, PI / 2.0, PI / 2.0]).unwrap()
}

/// Genus-one surface with `n` cone points, built by surgeries.
pub fn torus_with(n: usize) -> FlatSurface {
    match n {
        2 => s3_devil(&quarter_sphere(), [1, 2], C64::from_polar(0.2, 0.4), 0).unwrap().surface,
        3 => s4_kite(c(0.0, 1.0), C64::from_polar(0.15, 0.3), [3.0 * PI, 1.5 * PI, 1.5 * PI]).unwrap().surface,
        4 => {
            let t = torus_with(3);
            s1(&t, 1, 1.75 * PI, C64::from_polar(0.05, 0.7)).unwrap().surface
        }
        _ => panic!("no fixture for n = {n}"),
    }
}

/// Genus-zero surface with `n` cone points, built by surgeries.
pub fn sphere_with(n: usize) -> FlatSurface {
    match n {
        3 => quarter_sphere(),
        4 => s1(&quarter_sphere(), 0, 1.5 * PI, C64::from_polar(0.1, 0.3)).unwrap().surface,
        5 => {
            let s = sphere_with(4);
            s1(&s, 0, 1.8 * PI, C64::from_polar(0.04, 1.1)).unwrap().surface
        }
        _ => panic!("no fixture for n = {n}"),
    }
}

pub fn corpus() -> Vec<(String, FlatSurface)> {
    let mut v: Vec<(String, FlatSurface)> = vec![
        ("square torus".into(), square_torus()),
        ("skew lattice torus".into(), lattice_torus(c(1.0, 0.0), c(0.3, 1.1))),
        ("long torus".into(), tau_torus(c(0.45, 3.2))),
        ("hexagonal torus".into(), tau_torus(C64::from_polar(1.0, PI / 3.0))),
        ("sphere (π/2, π/3, 7π/6)".into(), sphere3([PI / 2.0, PI / 3.0, 7.0 * PI / 6.0]).unwrap()),
        ("sphere (π, π/2, π/2)".into(), quarter_sphere()),
        ("sphere (2π/3 ×3)".into(), sphere3([2.0 * PI / 3.0; 3]).unwrap()),
    ];
    for p in 1..=3 {
        v.push((format!("regular hexagon, pattern {p}"), hexagon_torus(p, regular_hexagon()).unwrap()));
    }
    v.push(("skew hexagon, pattern 2".into(), hexagon_torus(2, skew_hexagon()).unwrap()));
    for n in 2..=4 {
        v.push((format!("surgery torus, n = {n}"), torus_with(n)));
    }
    for n in 4..=5 {
        v.push((format!("surgery sphere, n = {n}"), sphere_with(n)));
    }
    let four = sphere_with(4);
    let idx: Vec<usize> = (0..4).filter(|&i| (four.cone_angles()[i].angle - PI / 2.0).abs() < 1e-9).collect();
    v.push(("cylinder torus".into(), s5_cylinder(&four, [idx[0], idx[1]], c(0.3, 0.8)).unwrap().surface));
    v
}
