use std::f64::consts::PI;

use lact_core::phantom::analytic_sinogram_on;
use lact_core::{back_project, forward_project, rasterize, AngularRange, EllipsePhantom, Geometry, Image, Sinogram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Normalized inner-product mismatch with quadrature-weighted inner
/// products on both sides. `f` and `g` are uniform on [0, 1).
fn adjoint_mismatch(seed: u64) -> f64 {
    let n = 64;
    let g = Geometry::for_image(n, 90).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Image::from_vec(n, (0..n * n).map(|_| rng.random::<f64>()).collect()).unwrap();
    let gs: Vec<f64> = (0..g.n_angles() * g.n_det()).map(|_| rng.random::<f64>()).collect();
    let gsino = Sinogram::from_parts(g.clone(), gs).unwrap();
    let rf = forward_project(&f, &g, f.pixel_size() / 2.0).unwrap();
    let rtg = back_project(&gsino, n, &AngularRange::full()).unwrap();
    let w_sino = g.angle_step() * g.det_pitch();
    let w_img = f.pixel_size() * f.pixel_size();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let lhs = dot(rf.values(), gsino.values()) * w_sino;
    let rhs = dot(f.values(), rtg.values()) * w_img;
    let norm = (dot(rf.values(), rf.values()) * w_sino).sqrt() * (dot(gsino.values(), gsino.values()) * w_sino).sqrt();
    (lhs - rhs).abs() / norm
}

#[test]
fn backprojection_is_the_adjoint() {
    for seed in 0..20 {
        let m = adjoint_mismatch(seed);
        assert!(m <= 1e-3, "seed {seed}: mismatch {m:.3e}");
    }
}

#[test]
fn zero_in_zero_out() {
    let g = Geometry::for_image(16, 8).unwrap();
    let zero = Image::zeros(16).unwrap();
    assert!(forward_project(&zero, &g, zero.pixel_size() / 2.0).unwrap().values().iter().all(|&v| v == 0.0));
    let img = back_project(&Sinogram::zeros(g), 16, &AngularRange::full()).unwrap();
    assert!(img.values().iter().all(|&v| v == 0.0));
}

#[test]
fn single_row_smears_to_the_angle_step() {
    let n = 32;
    let g = Geometry::for_image(n, 12).unwrap();
    let mut sino = Sinogram::zeros(g.clone());
    sino.row_mut(5).iter_mut().for_each(|v| *v = 1.0);
    let img = back_project(&sino, n, &AngularRange::full()).unwrap();
    for v in img.values() {
        assert!((v - g.angle_step()).abs() < 1e-15);
    }
}

#[test]
fn disk_center_ray() {
    let n = 256;
    let img = rasterize(&EllipsePhantom::disk(), n).unwrap();
    let g = Geometry::from_samples((0..8).map(|j| j as f64 * PI / 8.0).collect(), vec![-0.5, 0.0, 0.5]).unwrap();
    let sino = forward_project(&img, &g, img.pixel_size() / 2.0).unwrap();
    for j in 0..8 {
        assert!((sino.get(j, 1) - 1.0).abs() <= 0.01, "angle {j}: {}", sino.get(j, 1));
    }
}

#[test]
fn projection_tracks_the_closed_form() {
    let n = 256;
    let sl = EllipsePhantom::shepp_logan();
    let g = Geometry::for_image(n, 180).unwrap();
    let img = rasterize(&sl, n).unwrap();
    let ray = forward_project(&img, &g, img.pixel_size() / 2.0).unwrap();
    let exact = analytic_sinogram_on(&sl, &g);
    let diff: f64 = ray.values().iter().zip(exact.values()).map(|(a, b)| (a - b).powi(2)).sum();
    let norm: f64 = exact.values().iter().map(|b| b * b).sum();
    assert!((diff / norm).sqrt() <= 0.02);
}

#[test]
fn angle_subsets_add_up() {
    let n = 48;
    let g = Geometry::for_image(n, 90).unwrap();
    let sino = analytic_sinogram_on(&EllipsePhantom::shepp_logan(), &g);
    let (a, b, c) = (10f64.to_radians(), 70f64.to_radians(), 150f64.to_radians());
    let first = back_project(&sino, n, &AngularRange::new(a, b).unwrap()).unwrap();
    let second = back_project(&sino, n, &AngularRange::left_open(b, c).unwrap()).unwrap();
    let whole = back_project(&sino, n, &AngularRange::new(a, c).unwrap()).unwrap();
    let sum = first.add(&second).unwrap();
    let scale = whole.max_abs();
    for (x, y) in sum.values().iter().zip(whole.values()) {
        assert!((x - y).abs() <= 1e-12 * scale);
    }
}

#[test]
fn linearity() {
    let n = 32;
    let g = Geometry::for_image(n, 20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = Image::from_vec(n, (0..n * n).map(|_| rng.random::<f64>()).collect()).unwrap();
    let b = Image::from_vec(n, (0..n * n).map(|_| rng.random::<f64>()).collect()).unwrap();
    let h = a.pixel_size() / 2.0;
    let lhs = forward_project(&a.add(&b.scale(2.5)).unwrap(), &g, h).unwrap();
    let ra = forward_project(&a, &g, h).unwrap();
    let rb = forward_project(&b, &g, h).unwrap();
    for ((l, x), y) in lhs.values().iter().zip(ra.values()).zip(rb.values()) {
        assert!((l - (x + 2.5 * y)).abs() < 1e-12);
    }
}

#[test]
fn empty_selection_is_a_range_error() {
    let g = Geometry::from_samples(vec![0.0, 0.1, 0.2], (0..5).map(|k| k as f64 - 2.0).collect()).unwrap();
    let sino = Sinogram::zeros(g);
    let r = AngularRange::from_degrees(90.0, 120.0).unwrap();
    assert!(matches!(back_project(&sino, 8, &r), Err(lact_core::Error::Range(_))));
}

#[test]
fn rejects_bad_steps() {
    let g = Geometry::for_image(8, 4).unwrap();
    let img = Image::zeros(8).unwrap();
    assert!(forward_project(&img, &g, 0.0).is_err());
    assert!(forward_project(&img, &g, -1.0).is_err());
    assert!(forward_project(&img, &g, 1.0).is_err());
}

#[test]
fn default_geometry_covers_the_diagonal() {
    for n in [8, 63, 64, 256] {
        let g = Geometry::for_image(n, 10).unwrap();
        assert!(-g.det_origin() >= 2f64.sqrt() - 1e-12);
        assert_eq!(g.n_det() % 2, 1);
    }
}
