use camtomo_core::conditions::halton;
use camtomo_core::digest::canonical_hash;
use camtomo_core::geometry::{affine_pushforward, phi, phi_prime, AffineMap, Cam, Hypersurface, MetricTransport, StereographicPatch};
use camtomo_core::inversion::{neville_at_zero, InversionOptions, Reconstructor};
use camtomo_core::linalg::Mat;
use camtomo_core::slicing::SampledSurface;
use camtomo_core::sphere::{gauss_legendre, CamGrid};
use camtomo_core::transform::{forward, project, ScalarField, Sinogram, Smoothness};
use proptest::prelude::*;
use serde_json::json;

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn direction() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 0.05).prop_map(|v| unit(&v))
}

fn spd() -> impl Strategy<Value = Mat<f64>> {
    (prop::collection::vec(-0.5f64..0.5, 9), prop::collection::vec(2.0f64..8.0, 3)).prop_map(|(m, d)| {
        let l = Mat::from_row_major(3, 3, m);
        let mut a = l.transpose().matmul(&l);
        for i in 0..3 {
            a[(i, i)] += d[i];
        }
        a
    })
}

fn bump(center: [f64; 2], width: f64) -> ScalarField<f64> {
    ScalarField::new(
        move |u: &[f64]| {
            let t = ((u[0] - center[0]).powi(2) + (u[1] - center[1]).powi(2)) / (width * width);
            if t < 1.0 {
                (1.0 - 1.0 / (1.0 - t)).exp()
            } else {
                0.0
            }
        },
        vec![camtomo_core::geometry::ParamBox::new(
            vec![center[0] - width, center[1] - width],
            vec![center[0] + width, center[1] + width],
        )],
        Smoothness::Infinite,
        json!({ "bump": [center[0], center[1], width] }),
    )
}

fn cap() -> Hypersurface<f64> {
    Hypersurface::new(StereographicPatch::spherical_cap(2, 1.0, 0.4).unwrap())
}

proptest! {
    #[test]
    fn phi_equals_linearized_phi(a in spd(), w in direction(), x in prop::collection::vec(-3.0f64..3.0, 3)) {
        let cam = Cam::ellipsoid(vec![0.1, -0.2, 0.05], a).unwrap();
        let p = cam.point_at(&w);
        let (f, g) = (phi(&x, &cam, &p), phi_prime(&x, &cam, &p).unwrap());
        prop_assert!((f - g).abs() <= 1e-12 * (1.0 + f.abs()), "{f} vs {g}");
    }

    #[test]
    fn cam_points_satisfy_the_quadric(a in spd(), w in direction()) {
        let cam = Cam::ellipsoid(vec![0.3, 0.0, -0.1], a).unwrap();
        let sigma = cam.sigma(&w);
        prop_assert!((cam.q(&sigma) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn omega_through_lies_on_the_latitude_sphere(a in spd(), x in prop::collection::vec(-3.0f64..3.0, 3), t in 0.0f64..6.3) {
        let cam = Cam::ellipsoid(vec![0.0; 3], a).unwrap();
        prop_assume!(cam.q(&x) > 1.05);
        let w = cam.omega_through(&x, t).unwrap();
        let len: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((len - 1.0).abs() < 1e-12);
        prop_assert!(phi_prime(&x, &cam, &cam.point_at(&w)).unwrap().abs() < 1e-10);
    }

    #[test]
    fn phi_is_affine_invariant(
        m in prop::collection::vec(-0.4f64..0.4, 9),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        w in direction(),
        u in prop::collection::vec(-0.3f64..0.3, 2),
    ) {
        let mut l = Mat::from_row_major(3, 3, m);
        for i in 0..3 {
            l[(i, i)] += 1.0;
        }
        let map = AffineMap::new(l, b).unwrap();
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        let surface = cap();
        let (cam2, surface2) = affine_pushforward(&cam, &surface, &map, MetricTransport::Pullback).unwrap();
        let before = phi(&surface.point(&u), &cam, &cam.point_at(&w));
        let after = phi(&surface2.point(&u), &cam2, &cam2.point_at(&w));
        prop_assert!((before - after).abs() < 1e-10 * (1.0 + before.abs()), "{before} vs {after}");
    }

    #[test]
    fn neville_recovers_cubics(c in prop::collection::vec(-2.0f64..2.0, 4), h in 0.01f64..1.0) {
        let xs: Vec<f64> = [5.0, 4.0, 3.0, 2.0].iter().map(|k| k * h).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c[0] + x * (c[1] + x * (c[2] + x * c[3]))).collect();
        prop_assert!((neville_at_zero(&xs, &ys) - c[0]).abs() < 1e-9);
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1(n in 1usize..12, k in 0usize..23) {
        prop_assume!(k < 2 * n);
        let (x, w) = gauss_legendre::<f64>(n);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
        let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
        prop_assert!((q - exact).abs() < 1e-12);
    }

    #[test]
    fn halton_stays_in_the_unit_cube(i in 1u64..100_000, d in 1usize..6) {
        let p = halton(i, d);
        prop_assert_eq!(p.len(), d);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn canonical_hash_ignores_key_order(a in any::<i32>(), b in -1e6f64..1e6, s in "[a-z]{0,8}") {
        let x = json!({ "a": a, "b": b, "nested": { "s": s, "v": [1, 2] } });
        let y = json!({ "nested": { "v": [1, 2], "s": s }, "b": b, "a": a });
        prop_assert_eq!(canonical_hash(&x), canonical_hash(&y));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn forward_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, w in direction()) {
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        let sampled = SampledSurface::new(cap(), &[64, 64]).unwrap();
        let (f, g) = (bump([0.1, 0.0], 0.25), bump([-0.1, 0.1], 0.2));
        let sum = ScalarField::combine(a, &f, b, &g);
        let p = cam.point_at(&w);
        let lhs = forward(&sum, &p, &cam, &sampled).unwrap();
        let rhs = a * forward(&f, &p, &cam, &sampled).unwrap() + b * forward(&g, &p, &cam, &sampled).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn reconstruction_is_linear_in_the_sinogram(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
        let cam = Cam::sphere(vec![0.0; 3], 0.3).unwrap();
        let surface = cap();
        let sampled = SampledSurface::new(surface.clone(), &[48, 48]).unwrap();
        let grid = CamGrid::product(2, &[16, 32]).unwrap();
        let s1 = project(&bump([0.1, 0.05], 0.3), &cam, &sampled, &grid).unwrap();
        let noise: Vec<f64> = (0..s1.len()).map(|k| (((k as u64 + 1) * (seed + 7)) % 97) as f64 / 97.0).collect();
        let s2 = s1.with_values(noise).unwrap();
        let mixed: Vec<f64> = s1.values().iter().zip(s2.values()).map(|(x, y)| a * x + b * y).collect();
        let s3: Sinogram<f64> = s1.with_values(mixed).unwrap();
        let opts = InversionOptions::for_dim(2);
        let u = [0.05, 0.02];
        let at = |s: &Sinogram<f64>| Reconstructor::new(s, &cam, &surface, None, opts.clone()).unwrap().point(&u).unwrap().value;
        let (r1, r2, r3) = (at(&s1), at(&s2), at(&s3));
        prop_assert!((r3 - (a * r1 + b * r2)).abs() <= 1e-10 * (1.0 + r3.abs()), "{r3} vs {}", a * r1 + b * r2);
    }
}
