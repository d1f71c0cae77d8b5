use std::f64::consts::PI;

use lact_core::visibility::{
    classify_singularity, default_threshold, ellipse_boundary_samples,
    predicted_artifact_lines, weight_map, Line, VisibilityLabel,
};
use lact_core::{rasterize, AngularRange, Ellipse, EllipsePhantom};
use proptest::prelude::*;

fn deg(a: f64, b: f64) -> AngularRange {
    AngularRange::from_degrees(a, b).unwrap()
}

fn implicit_gradient(e: &Ellipse, x: f64, y: f64) -> (f64, f64) {
    let h = 1e-6;
    (
        (e.implicit(x + h, y) - e.implicit(x - h, y)) / (2.0 * h),
        (e.implicit(x, y + h) - e.implicit(x, y - h)) / (2.0 * h),
    )
}

#[test]
fn normals_match_finite_differences() {
    let e = Ellipse::new((0.15, -0.1), (0.45, 0.2), 37f64.to_radians(), 1.0).unwrap();
    for s in ellipse_boundary_samples(&e, 97).unwrap() {
        let (gx, gy) = implicit_gradient(&e, s.point.0, s.point.1);
        let norm = gx.hypot(gy);
        let (mut nx, mut ny) = (gx / norm, gy / norm);
        if nx * s.normal.0 + ny * s.normal.1 < 0.0 {
            nx = -nx;
            ny = -ny;
        }
        assert!((nx - s.normal.0).abs() < 1e-6 && (ny - s.normal.1).abs() < 1e-6);
        assert!((s.normal.0.hypot(s.normal.1) - 1.0).abs() < 1e-14);
        assert!(e.implicit(s.point.0, s.point.1).abs() < 1e-12);
    }
}

/// Signed distance from the line to the ellipse boundary point at parameter t.
fn boundary_distance(e: &Ellipse, line: &Line, t: f64) -> f64 {
    let (a, b) = e.semi_axes;
    let (st, ct) = e.tilt.sin_cos();
    let (u, v) = (a * t.cos(), b * t.sin());
    line.signed_distance(e.center.0 + u * ct - v * st, e.center.1 + u * st + v * ct)
}

/// Minimum |distance| over the boundary: coarse scan, then golden-section
/// refinement around the best sample.
fn min_distance(e: &Ellipse, line: &Line) -> (f64, f64, f64) {
    let m = 3600;
    let samples: Vec<f64> = (0..m).map(|k| boundary_distance(e, line, 2.0 * PI * k as f64 / m as f64)).collect();
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &d| (l.min(d), h.max(d)));
    let best = (0..m).min_by(|&i, &j| samples[i].abs().total_cmp(&samples[j].abs())).unwrap();
    let dt = 2.0 * PI / m as f64;
    let (mut a, mut b) = (best as f64 * dt - dt, best as f64 * dt + dt);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if boundary_distance(e, line, c).abs() < boundary_distance(e, line, d).abs() {
            b = d;
        } else {
            a = c;
        }
    }
    (boundary_distance(e, line, (a + b) / 2.0).abs(), lo, hi)
}

#[test]
fn artifact_lines_are_tangent() {
    let sl = EllipsePhantom::shepp_logan();
    for range in [deg(0.0, 60.0), deg(25.0, 115.0), deg(10.0, 170.0)] {
        let lines = predicted_artifact_lines(&sl, &range).unwrap();
        assert_eq!(lines.len(), 4 * sl.ellipses.len());
        for (k, line) in lines.iter().enumerate() {
            let e = &sl.ellipses[k / 4];
            let (touch, lo, hi) = min_distance(e, line);
            assert!(touch < 1e-9, "line {k} misses by {touch}");
            // the whole boundary lies on one side
            assert!(lo > -1e-9 || hi < 1e-9, "line {k} crosses the interior");
            assert!(!e.contains(e.center.0, e.center.1) || line.signed_distance(e.center.0, e.center.1).abs() > 1e-6);
        }
    }
}

#[test]
fn disk_lines_at_zero_are_vertical() {
    let lines = predicted_artifact_lines(&EllipsePhantom::disk(), &deg(0.0, 60.0)).unwrap();
    let vertical: Vec<f64> = lines.iter().filter(|l| l.theta == 0.0).map(|l| l.s).collect();
    assert_eq!(vertical, vec![-0.5, 0.5]);
}

#[test]
fn endpoints_are_visible() {
    let r = deg(20.0, 75.0);
    for psi in [20.0f64, 75.0] {
        let a = psi.to_radians();
        assert_eq!(classify_singularity((a.cos(), a.sin()), &r).unwrap(), VisibilityLabel::Visible);
    }
    let a = 120f64.to_radians();
    assert_eq!(classify_singularity((a.cos(), a.sin()), &deg(0.0, 60.0)).unwrap(), VisibilityLabel::Invisible);
}

fn rotation_check(phantom: &EllipsePhantom, n: usize, range: AngularRange) {
    let reference = rasterize(phantom, n).unwrap();
    let tau = default_threshold(&reference);
    let w = weight_map(&reference, &range, tau).unwrap();
    let rotated = reference.rotate90();
    let w_rot = weight_map(&rotated, &range.shifted(PI / 2.0).unwrap(), tau).unwrap();
    assert_eq!(w_rot.to_image(), w.to_image().rotate90());
}

#[test]
fn weight_map_rotates_with_the_range() {
    rotation_check(&EllipsePhantom::disk(), 128, deg(0.0, 60.0));
    rotation_check(&EllipsePhantom::shepp_logan(), 128, deg(0.0, 60.0));
    rotation_check(&EllipsePhantom::shepp_logan(), 96, deg(15.0, 80.0));
}

#[test]
fn weight_map_is_reproducible_and_binary() {
    let img = rasterize(&EllipsePhantom::shepp_logan(), 96).unwrap();
    let r = deg(0.0, 90.0);
    let a = weight_map(&img, &r, default_threshold(&img)).unwrap();
    let b = weight_map(&img, &r, default_threshold(&img)).unwrap();
    assert_eq!(a, b);
    assert!(a.values().iter().all(|&v| v == 1.0 || v == 2.0));
    assert!(a.invisible_count() > 0);
}

/// Samples `m` boundary points of the disk, maps each to the image pixel just
/// inside it and compares the weight there with the analytic label of the
/// sample's normal. Samples whose normal lies within `guard_deg` of a range
/// endpoint (modulo π) are skipped. Returns (checked, mismatched).
fn disk_label_agreement(n: usize, range: &AngularRange, m: usize, guard_deg: f64) -> (usize, usize) {
    let phantom = EllipsePhantom::disk();
    let disk = rasterize(&phantom, n).unwrap();
    let w = weight_map(&disk, range, default_threshold(&disk)).unwrap();
    let gap = |psi: f64, end: f64| {
        let d = (psi - end).rem_euclid(PI);
        d.min(PI - d)
    };
    let (mut checked, mut wrong) = (0, 0);
    for s in ellipse_boundary_samples(&phantom.ellipses[0], m).unwrap() {
        let psi = s.normal_angle();
        if gap(psi, range.start()).min(gap(psi, range.end())) < guard_deg.to_radians() {
            continue;
        }
        let (r, c) = disk.nearest_pixel(s.point.0 * 0.999, s.point.1 * 0.999).unwrap();
        checked += 1;
        let expected = match classify_singularity(s.normal, range).unwrap() {
            VisibilityLabel::Invisible => 2.0,
            VisibilityLabel::Visible => 1.0,
        };
        if w.get(r, c) != expected {
            wrong += 1;
        }
    }
    (checked, wrong)
}

#[test]
fn disk_boundary_labels_follow_radial_normals() {
    let (checked, wrong) = disk_label_agreement(256, &deg(0.0, 60.0), 720, 25.0);
    assert!(checked > 300);
    assert_eq!(wrong, 0);
    // without the guard band, staircase pixels near the endpoints disagree
    let (_, near_endpoints) = disk_label_agreement(256, &deg(0.0, 60.0), 720, 0.0);
    assert!(near_endpoints > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_sign_does_not_matter(angle in 0.0f64..(2.0 * PI), start in 0.0f64..170.0, width in 1.0f64..180.0) {
        let r = deg(start, (start + width).min(180.0));
        let v = (angle.cos(), angle.sin());
        prop_assert_eq!(
            classify_singularity(v, &r).unwrap(),
            classify_singularity((-v.0, -v.1), &r).unwrap()
        );
    }

    #[test]
    fn tilted_normals_are_unit_gradients(
        x in -0.3f64..0.3, y in -0.3f64..0.3, a in 0.05f64..0.6, b in 0.05f64..0.6, tilt in 0.0f64..PI,
    ) {
        let e = Ellipse::new((x, y), (a, b), tilt, 1.0).unwrap();
        for s in ellipse_boundary_samples(&e, 16).unwrap() {
            let (gx, gy) = implicit_gradient(&e, s.point.0, s.point.1);
            let cross = gx * s.normal.1 - gy * s.normal.0;
            prop_assert!(cross.abs() < 1e-6 * gx.hypot(gy));
        }
    }
}
