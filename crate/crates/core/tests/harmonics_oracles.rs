use std::f64::consts::PI;

use hlcone_core::harmonics::*;
use hlcone_core::lattice::enumerate_modes;
use hlcone_core::poly::AxialPoly;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cylinder Laplacian by central differences: flat in `x`, cone in `(r, theta)`
/// with `G^{-1} = m I - 1 1^T`. Returns `(laplacian, sum of absolute terms)`.
fn fd_laplacian(f: &HarmonicExpansion, x: &[f64], r: f64, th: &[f64]) -> (f64, f64) {
    let h = 1e-3;
    let m = f.m();
    let ev = |x: &[f64], r: f64, th: &[f64]| f.evaluate(x, r, th).unwrap();
    let f0 = ev(x, r, th);
    let mut terms = Vec::new();
    for i in 0..x.len() {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[i] += h;
        xm[i] -= h;
        terms.push((ev(&xp, r, th) - 2.0 * f0 + ev(&xm, r, th)) / (h * h));
    }
    let (fp, fm) = (ev(x, r + h, th), ev(x, r - h, th));
    terms.push((fp - 2.0 * f0 + fm) / (h * h));
    terms.push((m as f64 - 1.0) / r * (fp - fm) / (2.0 * h));
    let d = m - 1;
    for a in 0..d {
        for b in 0..d {
            let g = if a == b { m as f64 - 1.0 } else { -1.0 };
            let val = |da: f64, db: f64| {
                let mut t = th.to_vec();
                t[a] += da;
                t[b] += db;
                ev(x, r, &t)
            };
            let hess = (val(h, h) - val(h, -h) - val(-h, h) + val(-h, -h)) / (4.0 * h * h);
            terms.push(g * hess / (r * r));
        }
    }
    (terms.iter().sum(), terms.iter().map(|t| t.abs()).sum())
}

fn random_poly(rng: &mut ChaCha8Rng, k: usize, deg: u32) -> AxialPoly {
    let mut p = AxialPoly::zero(k);
    for _ in 0..3 {
        let a = rng.random_range(0..=deg);
        let e = if k == 1 { vec![deg] } else { vec![a, deg - a] };
        p.add_term(e, rng.random_range(-1.0..1.0));
    }
    p
}

#[test]
fn extended_modes_are_harmonic() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (k, m) in [(1, 3), (2, 3), (2, 4), (1, 5)] {
        let modes: Vec<_> = (0..=4 * m as u64).flat_map(|l| enumerate_modes(m, l).unwrap()).collect();
        for _ in 0..25 {
            let mut f = HarmonicExpansion::new(k, m).unwrap();
            let deg = rng.random_range(0..=4);
            let nu = modes[rng.random_range(0..modes.len())].nu.clone();
            let parity = if nu.iter().any(|&v| v != 0) && rng.random_bool(0.5) { Parity::Sin } else { Parity::Cos };
            f.push_harmonic(random_poly(&mut rng, k, deg), nu, parity, 1.0).unwrap();
            for _ in 0..4 {
                let x: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = rng.random_range(0.5..1.5);
                let th: Vec<f64> = (0..m - 1).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                let (lap, scale) = fd_laplacian(&f, &x, r, &th);
                assert!(lap.abs() <= 1e-4 * scale.max(1.0), "k={k} m={m} lap={lap} scale={scale}");
                assert!(f.is_harmonic(1e-12));
            }
        }
    }
}

#[test]
fn non_harmonic_axial_parts_are_detected() {
    let mut f = HarmonicExpansion::new(1, 3).unwrap();
    f.push(CylinderMode { nu: vec![1, -1], parity: Parity::Cos, h: AxialPoly::monomial(vec![2], 1.0), p: 0, coeff: 1.0 })
        .unwrap();
    assert!(!f.is_harmonic(1e-6));
    let (lap, _) = fd_laplacian(&f, &[0.3], 0.8, &[0.2, 1.0]);
    assert!(lap.abs() > 1e-2);
}

fn single(k: usize, m: usize, h: AxialPoly, nu: Vec<i64>, parity: Parity) -> HarmonicExpansion {
    let mut f = HarmonicExpansion::new(k, m).unwrap();
    f.push_harmonic(h, nu, parity, 0.37).unwrap();
    f
}

/// Homogeneous test modes of each degree on `R^2 x C^3_HL`.
fn graded_modes() -> Vec<(f64, HarmonicExpansion)> {
    let x = |e: Vec<u32>| AxialPoly::monomial(e, 1.0);
    let one = AxialPoly::constant(2, 1.0);
    vec![
        (0.0, single(2, 3, one.clone(), vec![0, 0], Parity::Cos)),
        (1.0, single(2, 3, x(vec![1, 0]), vec![0, 0], Parity::Cos)),
        (1.0, single(2, 3, one.clone(), vec![1, 0], Parity::Sin)),
        (2.0, single(2, 3, one, vec![1, -1], Parity::Cos)),
        (2.0, single(2, 3, x(vec![0, 1]), vec![1, 1], Parity::Cos)),
        (2.0, single(2, 3, x(vec![1, 1]), vec![0, 0], Parity::Cos)),
        (3.0, single(2, 3, x(vec![1, 0]), vec![2, 1], Parity::Sin)),
        (3.0, single(2, 3, x(vec![2, 0]), vec![0, 1], Parity::Cos)),
        (3.0, single(2, 3, x(vec![3, 0]), vec![0, 0], Parity::Cos)),
    ]
}

#[test]
fn beta_law_is_coefficient_exact() {
    for (d, f) in graded_modes() {
        assert!(f.mode_degrees().iter().all(|&e| (e - d).abs() < 1e-12));
        let beta = f.beta_of().canonical_terms();
        let want = f.scaled(-(d - 2.0) / 2.0).canonical_terms();
        if d == 2.0 {
            assert!(beta.is_empty(), "degree 2 must be annihilated");
        } else {
            assert_eq!(beta, want, "d={d}");
        }
    }
}

#[test]
fn degree_split_recomposes() {
    let mut f = HarmonicExpansion::new(2, 3).unwrap();
    for (_, g) in graded_modes() {
        f = f.add(&g);
    }
    let split = f.degree_split();
    assert_eq!(split.recompose().canonical_terms(), f.canonical_terms());
}

#[test]
fn norm_homogeneity() {
    for (d, f) in graded_modes().into_iter().filter(|(d, _)| *d > 0.0) {
        let a = scale_norm(&f, 0.5, 0.2).unwrap();
        let b = scale_norm(&f, 1.0, 0.2).unwrap();
        assert!((b / a / 2f64.powf(2.0 * d - 4.0) - 1.0).abs() < 1e-8, "d={d}");
    }
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = g(a) + g(b);
    for i in 1..n {
        s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn quadratic_cone_mode_norm_matches_radial_integral() {
    // f = r^2 cos(nu.theta) on R x C^m: the torus factor is (2 pi)^{m-1}/2 and
    // the (x, r) integral is a 1-D integral after r = rho sin t.
    for m in [3usize, 4] {
        let nu = enumerate_modes(m, 2 * m as u64).unwrap()[0].nu.clone();
        let f = single(1, m, AxialPoly::constant(1, 1.0), nu, Parity::Cos).scaled(1.0 / 0.37);
        let (rho, tau): (f64, f64) = (1.3, 0.25);
        let n = (1 + m) as i32;
        let sqrt_det = (m as f64).powf((2.0 - m as f64) / 2.0);
        let radial = simpson(
            |t| (rho * t.sin()).powi(m as i32 + 3) * 2.0 * rho * t.cos() * rho * t.cos(),
            tau.asin(),
            PI / 2.0,
            4000,
        );
        let want = radial * (2.0 * PI).powi(m as i32 - 1) / 2.0 * sqrt_det * rho.powi(-n - 4);
        let got = scale_norm(&f, rho, tau).unwrap();
        assert!((got / want - 1.0).abs() < 1e-6, "m={m} got={got} want={want}");
    }
}

#[test]
fn linear_growth_catalog_dimension() {
    for (k, m) in [(0, 3), (1, 3), (2, 4), (3, 5)] {
        let basis = linear_growth_basis(k, m).unwrap();
        assert_eq!(basis.len(), k + 2 * m);
        assert!(basis.iter().all(|b| b.mode_degrees().iter().all(|&d| (d - 1.0).abs() < 1e-12)));
    }
}

#[test]
fn quoted_growth_exponents() {
    for m in 3..=13 {
        assert_eq!(growth_exponent((m - 1) as f64, m).unwrap().gamma, 1.0);
        assert_eq!(growth_exponent((2 * m) as f64, m).unwrap().gamma, 2.0);
    }
    assert_eq!(growth_exponent(0.0, 5).unwrap().gamma, 0.0);
}

proptest! {
    #[test]
    fn growth_exponent_solves_quadratic(lambda in 0.0f64..500.0, n in 3usize..20) {
        let g = growth_exponent(lambda, n).unwrap().gamma;
        prop_assert!(g >= 0.0);
        prop_assert!((g * (g + n as f64 - 2.0) - lambda).abs() <= 1e-12 * lambda.max(1.0));
    }

    #[test]
    fn evaluation_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, r in 0.1f64..2.0, t0 in 0.0f64..6.3, t1 in 0.0f64..6.3) {
        let modes = graded_modes();
        let (f, g) = (&modes[6].1, &modes[4].1);
        let lhs = f.scaled(a).add(&g.scaled(b)).evaluate(&[0.3, -0.2], r, &[t0, t1]).unwrap();
        let rhs = a * f.evaluate(&[0.3, -0.2], r, &[t0, t1]).unwrap() + b * g.evaluate(&[0.3, -0.2], r, &[t0, t1]).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}

#[test]
fn json_schema_round_trip() {
    let mut f = HarmonicExpansion::new(2, 3).unwrap();
    for (_, g) in graded_modes() {
        f = f.add(&g);
    }
    let text = serde_json::to_string(&f).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["axial_dim"], 2);
    assert_eq!(v["m"], 3);
    assert!(v["modes"][0]["nu"].is_array());
    let back: HarmonicExpansion = serde_json::from_str(&text).unwrap();
    assert_eq!(back, f);
}
