//! Visible/invisible singularity classification for an angular range, ellipse
//! boundary sampling, endpoint streak-line prediction and the anisotropic
//! weight map.
//!
//! A boundary point with unit normal ξ is visible when some measured line
//! `x cosφ + y sinφ = s` has normal parallel to ξ, i.e. when the direction of
//! ξ (taken modulo π) lies in the scanned range.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbp::AngularRange;
use crate::image::Image;
use crate::kernels::sobel;
use crate::phantom::{Ellipse, EllipsePhantom};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VisibilityLabel {
    Visible,
    Invisible,
}

/// A point on a boundary together with its unit normal. The normal is an
/// undirected direction, stored with angle in [0, π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: (f64, f64),
    pub normal: (f64, f64),
}

impl BoundarySample {
    /// Direction angle of the normal in [0, π).
    pub fn normal_angle(&self) -> f64 {
        direction_angle(self.normal)
    }
}

/// Angle of a direction modulo π, in [0, π).
pub fn direction_angle(v: (f64, f64)) -> f64 {
    let a = v.1.atan2(v.0).rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

/// Visible iff the direction of `normal` modulo π lies in `range`
/// (endpoints inclusive).
pub fn classify_singularity(normal: (f64, f64), range: &AngularRange) -> Result<VisibilityLabel> {
    if !(normal.0.is_finite() && normal.1.is_finite()) || (normal.0 == 0.0 && normal.1 == 0.0) {
        return Err(Error::invalid("normal must be a finite non-zero vector"));
    }
    Ok(classify_direction(direction_angle(normal), range))
}

#[inline]
fn classify_direction(psi: f64, range: &AngularRange) -> VisibilityLabel {
    if range.contains_direction(psi) {
        VisibilityLabel::Visible
    } else {
        VisibilityLabel::Invisible
    }
}

/// `m` boundary points equally spaced in the ellipse parameter `t`, each with
/// the normalized gradient of the implicit quadratic as its normal.
pub fn ellipse_boundary_samples(e: &Ellipse, m: usize) -> Result<Vec<BoundarySample>> {
    if m < 4 {
        return Err(Error::invalid(format!("need at least 4 boundary samples, got {m}")));
    }
    let (a, b) = e.semi_axes;
    let (st, ct) = e.tilt.sin_cos();
    Ok((0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            let (u, v) = (a * t.cos(), b * t.sin());
            let point = (e.center.0 + u * ct - v * st, e.center.1 + u * st + v * ct);
            // gradient of (u/a)² + (v/b)² in the local frame, rotated back
            let (gu, gv) = (u / (a * a), v / (b * b));
            let (gx, gy) = (gu * ct - gv * st, gu * st + gv * ct);
            let norm = gx.hypot(gy);
            let (mut nx, mut ny) = (gx / norm, gy / norm);
            if ny < 0.0 || (ny == 0.0 && nx < 0.0) {
                nx = -nx;
                ny = -ny;
            }
            BoundarySample {
                point,
                normal: (nx + 0.0, ny + 0.0),
            }
        })
        .collect())
}

/// A line `x cosθ + y sinθ = s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub theta: f64,
    pub s: f64,
}

impl Line {
    /// Signed distance of a point from the line.
    #[inline]
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        x * self.theta.cos() + y * self.theta.sin() - self.s
    }
}

/// Tangent lines with normal angle at either endpoint of a limited range:
/// two per endpoint per ellipse, so `4k` lines for `k` ellipses.
pub fn predicted_artifact_lines(phantom: &EllipsePhantom, range: &AngularRange) -> Result<Vec<Line>> {
    if !range.is_limited() {
        return Err(Error::Range("artifact lines are only defined for a limited range".into()));
    }
    let mut lines = Vec::with_capacity(4 * phantom.ellipses.len());
    for e in &phantom.ellipses {
        for phi in [range.start(), range.end()] {
            let offset = e.center.0 * phi.cos() + e.center.1 * phi.sin();
            let h = e.support(phi);
            lines.push(Line { theta: phi, s: offset - h });
            lines.push(Line { theta: phi, s: offset + h });
        }
    }
    Ok(lines)
}

/// Pixelwise loss weights: 2 on invisible-singularity pixels, 1 elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    n: usize,
    values: Vec<f64>,
}

impl WeightMap {
    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            values: vec![1.0; n * n],
        }
    }

    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::shape(format!("{} weights", n * n), values.len()));
        }
        if values.iter().any(|&w| w != 1.0 && w != 2.0) {
            return Err(Error::invalid("weights must be 1 or 2"));
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    pub fn invisible_count(&self) -> usize {
        self.values.iter().filter(|&&w| w == 2.0).count()
    }

    pub fn to_image(&self) -> Image {
        Image::from_vec(self.n, self.values.clone()).expect("weights are finite")
    }
}

/// Sobel gradient magnitude of an image, per pixel.
pub fn gradient_magnitude(img: &Image) -> Vec<f64> {
    let n = img.n();
    let (gx, gy) = sobel(img.values(), n, n);
    gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect()
}

/// Default gate: 10% of the largest Sobel gradient magnitude of `reference`.
pub fn default_threshold(reference: &Image) -> f64 {
    let max = gradient_magnitude(reference).into_iter().fold(0.0, f64::max);
    0.1 * max
}

/// Weight map from the reference image's Sobel gradient orientation. Pixels
/// with `|∇| < tau` are smooth and get 1; the rest get 2 when their gradient
/// direction is invisible under `range`.
pub fn weight_map(reference: &Image, range: &AngularRange, tau: f64) -> Result<WeightMap> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("gradient threshold must be positive, got {tau}")));
    }
    let n = reference.n();
    let (gx, gy) = sobel(reference.values(), n, n);
    let values = gx
        .iter()
        .zip(&gy)
        .map(|(&x, &y)| {
            if x.hypot(y) < tau {
                1.0
            } else {
                match classify_direction(direction_angle((x, y)), range) {
                    VisibilityLabel::Visible => 1.0,
                    VisibilityLabel::Invisible => 2.0,
                }
            }
        })
        .collect();
    Ok(WeightMap { n, values })
}

/// Mean reconstruction gradient over visible and invisible boundary samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryGradientReport {
    pub visible_mean: f64,
    pub invisible_mean: f64,
    pub visible_samples: usize,
    pub invisible_samples: usize,
}

impl BoundaryGradientReport {
    pub fn ratio(&self) -> f64 {
        self.visible_mean / self.invisible_mean
    }
}

/// Samples the Sobel gradient magnitude of `recon` (bilinear) at `m` boundary
/// points of every ellipse and averages it separately over visible and
/// invisible samples.
pub fn boundary_gradient_report(
    recon: &Image,
    phantom: &EllipsePhantom,
    range: &AngularRange,
    m: usize,
) -> Result<BoundaryGradientReport> {
    let grad = Image::from_vec(recon.n(), gradient_magnitude(recon))?;
    let (mut vis, mut inv) = ((0.0, 0usize), (0.0, 0usize));
    for e in &phantom.ellipses {
        for sample in ellipse_boundary_samples(e, m)? {
            let g = grad.sample_bilinear(sample.point.0, sample.point.1);
            let slot = match classify_singularity(sample.normal, range)? {
                VisibilityLabel::Visible => &mut vis,
                VisibilityLabel::Invisible => &mut inv,
            };
            slot.0 += g;
            slot.1 += 1;
        }
    }
    Ok(BoundaryGradientReport {
        visible_mean: vis.0 / vis.1.max(1) as f64,
        invisible_mean: inv.0 / inv.1.max(1) as f64,
        visible_samples: vis.1,
        invisible_samples: inv.1,
    })
}

/// Residual energy density on and off the predicted streak lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StreakReport {
    pub on_line_energy: f64,
    pub off_line_energy: f64,
    pub on_line_pixels: usize,
    pub off_line_pixels: usize,
}

impl StreakReport {
    pub fn ratio(&self) -> f64 {
        self.on_line_energy / self.off_line_energy
    }
}

/// Compares the mean squared residual `recon − truth` on pixels within one
/// pixel of a predicted line against pixels more than three pixels from every
/// line. Only pixels clear of the object (outside every ellipse grown by three
/// pixels) are counted, so the comparison isolates streaks from the in-object
/// intensity loss.
pub fn streak_report(recon: &Image, truth: &Image, phantom: &EllipsePhantom, lines: &[Line]) -> Result<StreakReport> {
    recon.check_same(truth)?;
    let n = recon.n();
    let px = recon.pixel_size();
    let margin = 3.0 * px;
    let (mut on, mut off) = ((0.0, 0usize), (0.0, 0usize));
    for i in 0..n {
        for j in 0..n {
            let (x, y) = recon.world(i, j);
            let clear = phantom.ellipses.iter().all(|e| {
                let (u, v) = e.to_local(x, y);
                let (a, b) = (e.semi_axes.0 + margin, e.semi_axes.1 + margin);
                (u / a) * (u / a) + (v / b) * (v / b) > 1.0
            });
            if !clear {
                continue;
            }
            let d = lines
                .iter()
                .map(|l| l.signed_distance(x, y).abs())
                .fold(f64::INFINITY, f64::min);
            let r = recon.get(i, j) - truth.get(i, j);
            if d <= px {
                on.0 += r * r;
                on.1 += 1;
            } else if d > margin {
                off.0 += r * r;
                off.1 += 1;
            }
        }
    }
    Ok(StreakReport {
        on_line_energy: on.0 / on.1.max(1) as f64,
        off_line_energy: off.0 / off.1.max(1) as f64,
        on_line_pixels: on.1,
        off_line_pixels: off.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::rasterize;

    fn deg(a: f64, b: f64) -> AngularRange {
        AngularRange::from_degrees(a, b).unwrap()
    }

    fn unit(angle_deg: f64) -> (f64, f64) {
        let a = angle_deg.to_radians();
        (a.cos(), a.sin())
    }

    #[test]
    fn classification_examples() {
        let r = deg(20.0, 60.0);
        assert_eq!(classify_singularity(unit(20.0), &r).unwrap(), VisibilityLabel::Visible);
        assert_eq!(classify_singularity(unit(60.0), &r).unwrap(), VisibilityLabel::Visible);
        assert_eq!(classify_singularity(unit(120.0), &deg(0.0, 60.0)).unwrap(), VisibilityLabel::Invisible);
        let full = deg(0.0, 180.0);
        for k in 0..360 {
            assert_eq!(classify_singularity(unit(k as f64), &full).unwrap(), VisibilityLabel::Visible);
        }
        assert!(classify_singularity((0.0, 0.0), &r).is_err());
    }

    #[test]
    fn classification_ignores_normal_sign() {
        let r = deg(10.0, 70.0);
        for k in 0..72 {
            let (x, y) = unit(k as f64 * 5.0 + 0.3);
            assert_eq!(
                classify_singularity((x, y), &r).unwrap(),
                classify_singularity((-x, -y), &r).unwrap()
            );
        }
    }

    #[test]
    fn circle_and_ellipse_normals() {
        let c = Ellipse::disk(0.5, 1.0).unwrap();
        let s = ellipse_boundary_samples(&c, 8).unwrap();
        assert!((s[0].point.0 - 0.5).abs() < 1e-15 && s[0].point.1.abs() < 1e-15);
        assert_eq!(s[0].normal, (1.0, 0.0));

        let e = Ellipse::new((0.0, 0.0), (0.4, 0.2), 0.0, 1.0).unwrap();
        let s = ellipse_boundary_samples(&e, 4).unwrap();
        assert!(s[1].point.0.abs() < 1e-15 && (s[1].point.1 - 0.2).abs() < 1e-15);
        assert!(s[1].normal.0.abs() < 1e-15 && (s[1].normal.1 - 1.0).abs() < 1e-15);
        assert!(ellipse_boundary_samples(&e, 3).is_err());
    }

    #[test]
    fn disk_tangent_lines() {
        let lines = predicted_artifact_lines(&EllipsePhantom::disk(), &deg(0.0, 60.0)).unwrap();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], Line { theta: 0.0, s: -0.5 });
        assert_eq!(lines[1], Line { theta: 0.0, s: 0.5 });
        assert_eq!(lines.len(), 4);
        let sl = EllipsePhantom::shepp_logan();
        assert_eq!(predicted_artifact_lines(&sl, &deg(0.0, 90.0)).unwrap().len(), 40);
        assert!(predicted_artifact_lines(&sl, &AngularRange::full()).is_err());
    }

    #[test]
    fn full_range_and_constant_reference_give_unit_weights() {
        let disk = rasterize(&EllipsePhantom::disk(), 64).unwrap();
        let w = weight_map(&disk, &AngularRange::full(), default_threshold(&disk)).unwrap();
        assert_eq!(w.invisible_count(), 0);
        let flat = Image::filled(64, 0.7).unwrap();
        let w = weight_map(&flat, &deg(0.0, 60.0), 1e-6).unwrap();
        assert_eq!(w.invisible_count(), 0);
        assert!(weight_map(&flat, &deg(0.0, 60.0), 0.0).is_err());
    }

    #[test]
    fn disk_weights_follow_radial_normals() {
        let n = 128;
        let disk = rasterize(&EllipsePhantom::disk(), n).unwrap();
        let w = weight_map(&disk, &deg(0.0, 60.0), default_threshold(&disk)).unwrap();
        let at = |polar_deg: f64| {
            let (c, s) = unit(polar_deg);
            let (r, col) = disk.nearest_pixel(0.5 * c - 1e-3 * c, 0.5 * s - 1e-3 * s).unwrap();
            w.get(r, col)
        };
        assert_eq!(at(30.0), 1.0);
        assert_eq!(at(90.0), 2.0);
        assert_eq!(at(210.0), 1.0);
        assert_eq!(at(270.0), 2.0);
    }
}
