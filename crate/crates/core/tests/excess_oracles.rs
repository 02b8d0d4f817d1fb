use std::f64::consts::PI;

use hlcone_core::excess::*;
use hlcone_core::geometry::*;
use hlcone_core::harmonics::{link_volume, HarmonicExpansion, Parity};
use hlcone_core::poly::AxialPoly;
use hlcone_core::quadrature::QuadratureGrid;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

const SMALL: QuadratureGrid = QuadratureGrid { n_theta: 10, n_radial: 12, n_polar: 12, n_sphere: 8 };

fn opts(grid: QuadratureGrid) -> ExcessOptions {
    ExcessOptions { grid, error_estimate: false, ..Default::default() }
}

/// A smooth degree-3 potential on `R x C^3`: `x` times two quadratic-growth modes.
fn cubic(eps: f64) -> HarmonicExpansion {
    let mut f = HarmonicExpansion::new(1, 3).unwrap();
    f.push_harmonic(AxialPoly::monomial(vec![1], 1.0), vec![1, -1], Parity::Cos, eps).unwrap();
    f.push_harmonic(AxialPoly::monomial(vec![1], 1.0), vec![2, 1], Parity::Sin, 0.7 * eps).unwrap();
    f
}

fn random_su(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> RotationGenerator {
    let mut a = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        for l in j + 1..n {
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            a[(j, l)] = c;
            a[(l, j)] = -c.conj();
        }
        a[(j, j)] = C64::new(0.0, rng.random_range(-1.0..1.0));
    }
    let tr = a.trace() / n as f64;
    for j in 0..n {
        a[(j, j)] -= tr;
    }
    RotationGenerator::new(a.map(|c| c * scale)).unwrap()
}

#[test]
fn cone_ball_volume_matches_beta_function() {
    for (k, m) in [(0, 3), (1, 3), (2, 3), (1, 4), (3, 3)] {
        let n = k + m;
        let sphere = if k == 0 { 0.0 } else { 2.0 * PI.powf(k as f64 / 2.0) / gamma(k as f64 / 2.0) };
        let oracle = if k == 0 {
            link_volume(m) / m as f64
        } else {
            link_volume(m) * sphere / n as f64 * beta(k as f64 / 2.0, m as f64 / 2.0) / 2.0
        };
        let model = CylinderModel::new(k, m).unwrap();
        let zero = HarmonicExpansion::new(k, m).unwrap();
        let quad = graph_ball_integral(&model, &zero, 1.3, &vec![0.0; k], &SMALL, |_| 1.0).unwrap();
        let closed = cone_ball_volume(k, m, 1.3);
        let scaled = oracle * 1.3f64.powi(n as i32);
        assert!((closed - scaled).abs() < 1e-12 * scaled, "k={k} m={m}: {closed} vs {scaled}");
        assert!((quad - scaled).abs() < 1e-10 * scaled, "k={k} m={m}: {quad} vs {scaled}");
    }
}

#[test]
fn unit_ball_volume_oracle() {
    for n in 1..8 {
        let oracle = PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0);
        assert!((unit_ball_volume(n) - oracle).abs() < 1e-13);
    }
}

#[test]
fn rotated_models_have_no_excess() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (k, m) in [(0, 3), (1, 3), (2, 3)] {
        let a = random_su(k + m, &mut rng, 0.4);
        let model = CylinderModel::new(k, m).unwrap().with_rotation(a.exp(1.0)).unwrap();
        let zero = HarmonicExpansion::new(k, m).unwrap();
        for r in [0.5, 1.0, 2.0] {
            let rep = volume_excess_with(&model, &zero, r, &[], &opts(SMALL)).unwrap();
            assert!(rep.density_form.abs() <= 1e-10, "{rep:?}");
            assert!(rep.monotone_form.abs() <= 1e-10, "{rep:?}");
        }
    }
}

#[test]
fn shifted_center_of_a_model_has_no_excess() {
    let model = CylinderModel::new(1, 3).unwrap();
    let zero = HarmonicExpansion::new(1, 3).unwrap();
    let rep = volume_excess_with(&model, &zero, 1.0, &[0.4], &opts(SMALL)).unwrap();
    assert!(rep.density_form.abs() < 1e-12 && rep.monotone_form.abs() < 1e-12);
}

#[test]
fn density_and_monotone_forms_agree_on_near_minimal_graphs() {
    let model = CylinderModel::new(1, 3).unwrap();
    let f = cubic(5e-3);
    let rep = volume_excess_with(&model, &f, 1.0, &[], &opts(SMALL)).unwrap();
    assert!(rep.monotone_form > 0.0);
    assert!(rep.discrepancy.abs() < 1e-3 * rep.monotone_form, "{rep:?}");
    // Both forms are quadratic in the amplitude to leading order.
    let half = volume_excess_with(&model, &cubic(2.5e-3), 1.0, &[], &opts(SMALL)).unwrap();
    let ratio = rep.monotone_form / half.monotone_form;
    assert!((ratio - 4.0).abs() < 1e-2, "{ratio}");
}

#[test]
fn monotone_form_is_nondecreasing() {
    let model = CylinderModel::new(1, 3).unwrap();
    let f = cubic(1e-2);
    let mut prev = 0.0;
    for r in [0.25, 0.5, 0.75, 1.0] {
        let rep = volume_excess_with(&model, &f, r, &[], &opts(SMALL)).unwrap();
        assert!(rep.monotone_form >= prev - 1e-8, "r={r}: {} < {prev}", rep.monotone_form);
        prev = rep.monotone_form;
    }
}

#[test]
fn regime_violation_is_reported() {
    let model = CylinderModel::new(1, 3).unwrap();
    let err = volume_excess_with(&model, &cubic(0.2), 1.0, &[], &opts(SMALL)).unwrap_err();
    assert!(matches!(err, hlcone_core::Error::Regime { .. }), "{err:?}");
}

#[test]
fn excess_csv_layout() {
    let rep = ExcessReport {
        r: 1.0,
        density_form: 0.5,
        monotone_form: 0.25,
        discrepancy: 0.25,
        density_error: 0.0,
        monotone_error: 0.0,
    };
    let csv = excess_csv(&[rep]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "r,density_form,monotone_form,discrepancy");
    let vals: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(vals, vec![1.0, 0.5, 0.25, 0.25]);
}

#[test]
fn gradient_identity_defect_is_quadratic() {
    let model = CylinderModel::new(1, 3).unwrap();
    let d1 = gradient_identity_defect(&model, &cubic(1e-2), 20, 3).unwrap();
    let d2 = gradient_identity_defect(&model, &cubic(5e-3), 20, 3).unwrap();
    let slope = (d1 / d2).log2();
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    assert!(d1 < 1e-3);
    let zero = HarmonicExpansion::new(1, 3).unwrap();
    assert!(gradient_identity_defect(&model, &zero, 10, 3).unwrap() < 1e-14);
}

#[test]
fn beta_and_y_norms_scale_with_homogeneity() {
    // For a degree-d potential, beta and y are degree d and d - 1, so both
    // scale-invariant norms pick up rho^{d-2}.
    let model = CylinderModel::new(1, 3).unwrap();
    let f = cubic(1e-3);
    let eo = opts(SMALL);
    let a = scale_invariant_norms_with(&model, &f, 1.0, 0.1, 0.0, &eo).unwrap();
    let b = scale_invariant_norms_with(&model, &f, 0.5, 0.1, 0.0, &eo).unwrap();
    for (u, v) in [(a.beta_norm, b.beta_norm), (a.y_norm, b.y_norm), (a.f_norm, b.f_norm)] {
        assert!((v / u - 0.5).abs() < 1e-3, "{u} {v}");
    }
    assert!(a.beta_norm > 0.0 && a.y_norm > 0.0);
}

#[test]
fn beta_average_of_constant_offset() {
    let model = CylinderModel::new(1, 3).unwrap();
    let mut f = HarmonicExpansion::new(1, 3).unwrap();
    // Degree 0: beta = f, constant.
    f.push_constant(0.3);
    let (av, vol) = beta_average(&model, &f, 1.0, &SMALL).unwrap();
    assert!((av - 0.3).abs() < 1e-12);
    assert!((vol - cone_ball_volume(1, 3, 1.0)).abs() < 1e-9);
}

#[test]
fn linear_potential_is_a_normal_translation() {
    // f = c x_1 has W = c e_1, so the graph is the model shifted by -i c e_1,
    // which is orthogonal to the whole model.
    let model = CylinderModel::new(1, 3).unwrap();
    let mut f = HarmonicExpansion::new(1, 3).unwrap();
    let c = 0.02;
    f.push_harmonic(AxialPoly::monomial(vec![1], 1.0), vec![0, 0], Parity::Cos, c).unwrap();
    let region = RegionSpec::ball(1.0).unwrap();
    let d = graph_model_distance(&model, &f, &region, &SampleSpec::default()).unwrap();
    assert!((d - c).abs() < 1e-9, "{d}");
}

#[test]
fn point_cloud_hausdorff_brute_force() {
    let model = CylinderModel::new(0, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts = |rng: &mut ChaCha8Rng| -> Vec<Vec<C64>> {
        (0..30)
            .map(|_| (0..3).map(|_| C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))).collect())
            .collect()
    };
    let a = PointCloud { points: pts(&mut rng) };
    let b = PointCloud { points: pts(&mut rng) };
    let region = RegionSpec::ball(10.0).unwrap();
    let d = hausdorff_distance(&a, &b, &region, &model, &SampleSpec::default()).unwrap();
    let dist = |p: &Vec<C64>, q: &Vec<C64>| p.iter().zip(q).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let one = a.points.iter().map(|p| b.points.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    let two = b.points.iter().map(|p| a.points.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    assert!((d - one.max(two)).abs() < 1e-15);
}

#[test]
fn graph_distance_tracks_displacement() {
    let model = CylinderModel::new(1, 3).unwrap();
    let f = cubic(1e-2);
    let region = RegionSpec::ball(1.0).unwrap();
    let spec = SampleSpec::default();
    let d = graph_model_distance(&model, &f, &region, &spec).unwrap();
    // Largest |W| over the sampled parameters bounds the graph-to-model side.
    let mut wmax: f64 = 0.0;
    for i in 1..=8 {
        for j in 0..12 {
            for s in [-1.0, 1.0] {
                let big = i as f64 / 8.0;
                let psi = (j as f64 + 0.5) / 12.0 * PI / 2.0;
                for t in 0..10 {
                    let th = [t as f64 * 0.6, t as f64 * 1.1];
                    let jet = f.jet(&[s * big * psi.cos()], big * psi.sin(), &th).unwrap();
                    wmax = wmax.max(gradient_norm(&jet, 1, 3, big * psi.sin()));
                }
            }
        }
    }
    assert!(d > 0.3 * wmax && d < 1.5 * wmax, "{d} vs {wmax}");
    let half = graph_model_distance(&model, &cubic(5e-3), &region, &spec).unwrap();
    assert!((d / half - 2.0).abs() < 0.05, "{}", d / half);
}

#[test]
fn hausdorff_bound_reports_hypothesis_failures() {
    let model = CylinderModel::new(1, 3).unwrap();
    let f = cubic(1e-2);
    let p = BoundParams { rho: 1.0, tau: 0.2, epsilon: 1e-6, delta: 1.0, constant: 10.0 };
    let out = hausdorff_bound_check(&model, &f, &p, &opts(SMALL), &SampleSpec::default()).unwrap();
    assert!(matches!(out, HausdorffBound::HypothesisFailure { ref hypothesis, .. } if hypothesis == "distance"), "{out:?}");
    let p = BoundParams { delta: 1e-12, epsilon: 1.0, ..p };
    let out = hausdorff_bound_check(&model, &f, &p, &opts(SMALL), &SampleSpec::default()).unwrap();
    assert!(matches!(out, HausdorffBound::HypothesisFailure { ref hypothesis, .. } if hypothesis == "area"), "{out:?}");
}

#[test]
fn squares_are_subharmonic_on_graphs() {
    let model = CylinderModel::new(1, 3).unwrap();
    let f = cubic(1e-2);
    for which in [SquaredQuantity::Beta, SquaredQuantity::Y(0), SquaredQuantity::X(0)] {
        let rep = subharmonicity_check(&model, &f, which, 12, 4, 1e-4).unwrap();
        assert!(rep.pass, "{which:?}: {rep:?}");
    }
    // On the model itself x^2 has Laplacian exactly 2.
    let zero = HarmonicExpansion::new(1, 3).unwrap();
    let rep = subharmonicity_check(&model, &zero, SquaredQuantity::X(0), 6, 1, 1e-4).unwrap();
    assert!((rep.min_laplacian - 2.0).abs() < 1e-5, "{rep:?}");
    assert!(subharmonicity_check(&model, &f, SquaredQuantity::Y(1), 2, 1, 1e-4).is_err());
}

#[test]
fn hessian_norm_matches_numerical_christoffels() {
    // Covariant Hessian from finite differences of the embedded metric.
    let f = cubic(1.0);
    let model = CylinderModel::new(1, 3).unwrap();
    let base = [0.3, 0.8, 0.4, 1.3];
    let n = 4;
    let metric = |p: &[f64]| model.frame(&p[..1], p[1], &p[2..]).unwrap().gram();
    let val = |p: &[f64]| f.evaluate(&p[..1], p[1], &p[2..]).unwrap();
    let h = 1e-4;
    let shift = |i: usize, s: f64| -> Vec<f64> {
        let mut p = base.to_vec();
        p[i] += s;
        p
    };
    let dg: Vec<DMatrix<f64>> = (0..n).map(|l| (metric(&shift(l, h)) - metric(&shift(l, -h))) / (2.0 * h)).collect();
    let g = metric(&base);
    let ginv = g.clone().try_inverse().unwrap();
    let grad: Vec<f64> = (0..n).map(|i| (val(&shift(i, h)) - val(&shift(i, -h))) / (2.0 * h)).collect();
    let hh = 1e-3;
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let at = |si: f64, sj: f64| {
                let mut p = base.to_vec();
                p[i] += si;
                p[j] += sj;
                val(&p)
            };
            let second = (at(hh, hh) - at(hh, -hh) - at(-hh, hh) + at(-hh, -hh)) / (4.0 * hh * hh);
            let mut christ = 0.0;
            for k in 0..n {
                let mut gamma_k = 0.0;
                for l in 0..n {
                    gamma_k += 0.5 * ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                christ += gamma_k * grad[k];
            }
            hess[(i, j)] = second - christ;
        }
    }
    let t = &ginv * &hess;
    let oracle = (&t * &t).trace().sqrt();
    let hn = hessian_norm(&f, &base[..1], base[1], &base[2..]).unwrap();
    assert!((hn - oracle).abs() < 1e-5 * oracle, "{hn} vs {oracle}");
}

#[test]
fn small_graph_and_harmonic_properties() {
    let model = CylinderModel::new(1, 3).unwrap();
    let f = cubic(1e-3);
    let p1 = small_graph_property(&f, 1.0, 0.1, 0.1, 0.1, &SMALL).unwrap();
    assert!(p1.holds, "{p1:?}");
    let strict = small_graph_property(&f, 1.0, 1e-6, 0.1, 0.1, &SMALL).unwrap();
    assert!(!strict.holds);
    let (v, ok) = harmonic_property(&model, &f, 0.25, 1.0, &SMALL).unwrap();
    assert!(ok && v > 0.0);
    let zero = HarmonicExpansion::new(1, 3).unwrap();
    let (v0, _) = harmonic_property(&model, &zero, 0.25, 1.0, &SMALL).unwrap();
    assert_eq!(v0, 0.0);
}

#[test]
fn volume_property_on_the_model() {
    let model = CylinderModel::new(1, 3).unwrap();
    let zero = HarmonicExpansion::new(1, 3).unwrap();
    let p2 = volume_property(&model, &zero, 0.5, 0.5, 0.5, &opts(SMALL)).unwrap();
    assert!(p2.holds, "{p2:?}");
    assert_eq!(p2.centers, 7);
    assert!(p2.max_excess.abs() < 1e-12);
    assert!(volume_property(&model, &zero, 0.5, 0.05, 0.5, &opts(SMALL)).is_err());
}
