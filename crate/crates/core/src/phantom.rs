//! Piecewise-constant ellipse phantoms, their rasterization and their exact
//! parallel-beam line integrals.


use crate::error::{Error, Result};
use crate::image::Image;
use crate::projector::{Geometry, Sinogram};

/// One ellipse with constant additive attenuation inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    /// Rotation of the first semi-axis from the +x axis, radians in [0, π).
    pub tilt: f64,
    pub intensity: f64,
}

impl Ellipse {
    pub fn new(center: (f64, f64), semi_axes: (f64, f64), tilt: f64, intensity: f64) -> Result<Self> {
        let (a, b) = semi_axes;
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!("semi-axes must be positive, got ({a}, {b})")));
        }
        if !center.0.is_finite() || !center.1.is_finite() || !tilt.is_finite() || !intensity.is_finite() {
            return Err(Error::invalid("ellipse parameters must be finite"));
        }
        let tilt = tilt.rem_euclid(std::f64::consts::PI);
        let e = Self { center, semi_axes, tilt, intensity };
        let (hx, hy) = e.half_extents();
        let eps = 1e-12;
        if center.0 - hx < -1.0 - eps
            || center.0 + hx > 1.0 + eps
            || center.1 - hy < -1.0 - eps
            || center.1 + hy > 1.0 + eps
        {
            return Err(Error::invalid(format!(
                "ellipse at ({}, {}) with axes ({a}, {b}) leaves the unit square",
                center.0, center.1
            )));
        }
        Ok(e)
    }

    /// Disk of radius `r` centered at the origin.
    pub fn disk(r: f64, intensity: f64) -> Result<Self> {
        Self::new((0.0, 0.0), (r, r), 0.0, intensity)
    }

    /// Half-widths of the axis-aligned bounding box.
    pub fn half_extents(&self) -> (f64, f64) {
        let (a, b) = self.semi_axes;
        let (s, c) = self.tilt.sin_cos();
        (
            (a * a * c * c + b * b * s * s).sqrt(),
            (a * a * s * s + b * b * c * c).sqrt(),
        )
    }

    /// Coordinates of a world point in the ellipse's own frame.
    #[inline]
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.tilt.sin_cos();
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        (dx * c + dy * s, -dx * s + dy * c)
    }

    /// Implicit quadratic `(u/a)² + (v/b)² − 1`; non-positive inside.
    #[inline]
    pub fn implicit(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.to_local(x, y);
        let (a, b) = self.semi_axes;
        (u / a) * (u / a) + (v / b) * (v / b) - 1.0
    }

    /// Inclusive point membership.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.implicit(x, y) <= 0.0
    }

    /// Support function: distance from the center to the tangent line whose
    /// normal points along angle `phi`.
    pub fn support(&self, phi: f64) -> f64 {
        let (a, b) = self.semi_axes;
        let (s, c) = (phi - self.tilt).sin_cos();
        (a * a * c * c + b * b * s * s).sqrt()
    }

    /// Exact integral of this ellipse along `x cosθ + y sinθ = s`.
    pub fn line_integral(&self, theta: f64, s: f64) -> f64 {
        let (a, b) = self.semi_axes;
        let (sin_t, cos_t) = theta.sin_cos();
        let offset = s - (self.center.0 * cos_t + self.center.1 * sin_t);
        let h = self.support(theta);
        let h2 = h * h;
        let gap = h2 - offset * offset;
        if gap <= 0.0 {
            return 0.0;
        }
        2.0 * self.intensity * a * b * gap.sqrt() / h2
    }
}

/// Ordered list of ellipses whose intensities add pointwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EllipsePhantom {
    pub ellipses: Vec<Ellipse>,
}

impl EllipsePhantom {
    pub fn new(ellipses: Vec<Ellipse>) -> Self {
        Self { ellipses }
    }

    /// Centered disk of radius 0.5 and unit intensity.
    pub fn disk() -> Self {
        Self::new(vec![Ellipse::disk(0.5, 1.0).expect("valid disk")])
    }

    /// Modified Shepp-Logan head phantom (Toft's higher-contrast intensities).
    pub fn shepp_logan() -> Self {
        // (x0, y0, a, b, tilt_deg, intensity)
        const TABLE: [(f64, f64, f64, f64, f64, f64); 10] = [
            (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
            (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
            (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
            (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
            (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
            (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
            (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
            (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
            (0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
            (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
        ];
        Self::new(
            TABLE
                .iter()
                .map(|&(x, y, a, b, t, rho)| {
                    Ellipse::new((x, y), (a, b), t.to_radians(), rho).expect("valid table entry")
                })
                .collect(),
        )
    }

    /// Built-in phantom by name (`"shepp-logan"` or `"disk"`).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "shepp-logan" | "shepp_logan" => Some(Self::shepp_logan()),
            "disk" => Some(Self::disk()),
            _ => None,
        }
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum()
    }

    pub fn line_integral(&self, theta: f64, s: f64) -> f64 {
        self.ellipses.iter().map(|e| e.line_integral(theta, s)).sum()
    }

    /// Rigid rotation of every ellipse about the origin by `delta` radians.
    pub fn rotated(&self, delta: f64) -> Self {
        let (s, c) = delta.sin_cos();
        Self::new(
            self.ellipses
                .iter()
                .map(|e| Ellipse {
                    center: (c * e.center.0 - s * e.center.1, s * e.center.0 + c * e.center.1),
                    semi_axes: e.semi_axes,
                    tilt: (e.tilt + delta).rem_euclid(std::f64::consts::PI),
                    intensity: e.intensity,
                })
                .collect(),
        )
    }
}

/// Pixel-center rasterization: each pixel is the sum of intensities of the
/// ellipses containing its center.
pub fn rasterize(phantom: &EllipsePhantom, n: usize) -> Result<Image> {
    Image::from_fn(n, |x, y| phantom.value_at(x, y))
}

/// Closed-form sinogram of `phantom` sampled at the given angles and detector
/// offsets.
pub fn analytic_sinogram(phantom: &EllipsePhantom, angles: &[f64], detectors: &[f64]) -> Result<Sinogram> {
    let geometry = Geometry::from_samples(angles.to_vec(), detectors.to_vec())?;
    Ok(analytic_sinogram_on(phantom, &geometry))
}

/// Closed-form sinogram on an existing geometry.
pub fn analytic_sinogram_on(phantom: &EllipsePhantom, geometry: &Geometry) -> Sinogram {
    let n_det = geometry.n_det();
    let values = crate::par::map_indices(geometry.n_angles() * n_det, |k| {
        let theta = geometry.angles()[k / n_det];
        let s = geometry.detector_position(k % n_det);
        phantom.line_integral(theta, s)
    });
    Sinogram::from_parts(geometry.clone(), values).expect("shape matches geometry")
}
