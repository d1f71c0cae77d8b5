//! Parallel-beam ray-driven forward projection and its backprojection.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbp::AngularRange;
use crate::image::{pixel_center, Image};

/// Parallel-beam acquisition geometry: projection angles plus a uniform
/// detector grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    angles: Vec<f64>,
    /// Position of detector bin 0.
    det_origin: f64,
    det_pitch: f64,
    n_det: usize,
}

impl Geometry {
    /// `n_angles` equally spaced angles `jπ/n_angles` and `n_det` bins of
    /// width `pitch` centered on `s = 0`. The detector must span the unit
    /// square's diagonal so that no ray through the image is truncated.
    pub fn parallel(n_angles: usize, n_det: usize, pitch: f64) -> Result<Self> {
        if n_angles == 0 || n_det < 2 {
            return Err(Error::invalid(format!(
                "need at least one angle and two detector bins, got {n_angles} x {n_det}"
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::invalid(format!("detector pitch must be positive, got {pitch}")));
        }
        let half_extent = (n_det - 1) as f64 * pitch / 2.0;
        if half_extent + 1e-12 < SQRT_2 {
            return Err(Error::invalid(format!(
                "detector half-extent {half_extent:.4} does not cover the unit square diagonal"
            )));
        }
        let angles = (0..n_angles).map(|j| j as f64 * PI / n_angles as f64).collect();
        Ok(Self {
            angles,
            det_origin: -half_extent,
            det_pitch: pitch,
            n_det,
        })
    }

    /// Default geometry for an `n × n` image: detector pitch equal to the
    /// pixel width and the smallest odd bin count covering the diagonal.
    pub fn for_image(n: usize, n_angles: usize) -> Result<Self> {
        let pitch = 2.0 / n as f64;
        let mut n_det = (2.0 * SQRT_2 / pitch).ceil() as usize + 1;
        if n_det.is_multiple_of(2) {
            n_det += 1;
        }
        Self::parallel(n_angles, n_det, pitch)
    }

    /// Geometry from explicit angle and detector samples. Detector positions
    /// must be increasing and equally spaced.
    pub fn from_samples(angles: Vec<f64>, detectors: Vec<f64>) -> Result<Self> {
        validate_angles(&angles)?;
        if detectors.is_empty() {
            return Err(Error::invalid("no detector positions"));
        }
        if detectors.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("detector positions must be finite"));
        }
        let pitch = if detectors.len() > 1 {
            let pitch = (detectors[detectors.len() - 1] - detectors[0]) / (detectors.len() - 1) as f64;
            if pitch.is_nan() || pitch <= 0.0 {
                return Err(Error::invalid("detector positions must be increasing"));
            }
            for (k, s) in detectors.iter().enumerate() {
                let expected = detectors[0] + k as f64 * pitch;
                if (s - expected).abs() > 1e-9 * pitch.max(1.0) {
                    return Err(Error::invalid("detector positions must be equally spaced"));
                }
            }
            pitch
        } else {
            1.0
        };
        Ok(Self {
            angles,
            det_origin: detectors[0],
            det_pitch: pitch,
            n_det: detectors.len(),
        })
    }

    /// Same detector grid, different angle list.
    pub fn with_angles(&self, angles: Vec<f64>) -> Result<Self> {
        validate_angles(&angles)?;
        Ok(Self { angles, ..self.clone() })
    }

    /// Checks a geometry that did not come from a constructor, such as one
    /// read from a file.
    pub fn validate(&self) -> Result<()> {
        validate_angles(&self.angles)?;
        if self.n_det == 0 || !self.det_origin.is_finite() || !(self.det_pitch.is_finite() && self.det_pitch > 0.0) {
            return Err(Error::invalid("detector grid needs bins, a finite origin and a positive pitch"));
        }
        Ok(())
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn n_det(&self) -> usize {
        self.n_det
    }

    pub fn det_pitch(&self) -> f64 {
        self.det_pitch
    }

    pub fn det_origin(&self) -> f64 {
        self.det_origin
    }

    #[inline]
    pub fn detector_position(&self, k: usize) -> f64 {
        self.det_origin + k as f64 * self.det_pitch
    }

    pub fn detector_positions(&self) -> Vec<f64> {
        (0..self.n_det).map(|k| self.detector_position(k)).collect()
    }

    /// Angular quadrature weight Δθ. Uniform grids give `π / n_angles`.
    pub fn angle_step(&self) -> f64 {
        let n = self.angles.len();
        if n < 2 {
            PI
        } else {
            (self.angles[n - 1] - self.angles[0]) / (n - 1) as f64
        }
    }
}

fn validate_angles(angles: &[f64]) -> Result<()> {
    if angles.is_empty() {
        return Err(Error::invalid("no projection angles"));
    }
    if angles.iter().any(|a| !a.is_finite() || *a < 0.0 || *a >= PI) {
        return Err(Error::invalid("projection angles must lie in [0, pi)"));
    }
    if angles.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("projection angles must be strictly increasing"));
    }
    Ok(())
}

/// Documentation-only record of the fan-beam simulation setup used for the
/// clinical data this toolkit is modelled on. Only parallel-beam projection is
/// implemented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanBeamReference {
    pub source_to_detector_cm: f64,
    pub source_to_origin_cm: f64,
    pub detector_units: usize,
    pub detector_width_cm: f64,
}

pub const AAPM_FAN_BEAM: FanBeamReference = FanBeamReference {
    source_to_detector_cm: 60.0,
    source_to_origin_cm: 40.0,
    detector_units: 720,
    detector_width_cm: 41.3,
};

/// Line-integral samples over an angle × detector grid. Row-major, one row
/// per angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geometry: Geometry,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(geometry: Geometry) -> Self {
        let len = geometry.n_angles() * geometry.n_det();
        Self {
            geometry,
            values: vec![0.0; len],
        }
    }

    pub fn from_parts(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        let expected = geometry.n_angles() * geometry.n_det();
        if values.len() != expected {
            return Err(Error::shape(
                format!("{} x {}", geometry.n_angles(), geometry.n_det()),
                format!("{} values", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sinogram values must be finite"));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, angle_index: usize) -> &[f64] {
        let n = self.geometry.n_det();
        &self.values[angle_index * n..(angle_index + 1) * n]
    }

    pub fn row_mut(&mut self, angle_index: usize) -> &mut [f64] {
        let n = self.geometry.n_det();
        &mut self.values[angle_index * n..(angle_index + 1) * n]
    }

    #[inline]
    pub fn get(&self, angle_index: usize, det: usize) -> f64 {
        self.values[angle_index * self.geometry.n_det() + det]
    }

    /// Linear interpolation along the detector of row `angle_index` at offset
    /// `s`; zero outside the detector.
    #[inline]
    pub fn interpolate(&self, angle_index: usize, s: f64) -> f64 {
        let g = &self.geometry;
        let pos = (s - g.det_origin) / g.det_pitch;
        let k0 = pos.floor();
        if k0 < -1.0 || k0 >= g.n_det as f64 {
            return 0.0;
        }
        let t = pos - k0;
        let k0 = k0 as isize;
        let row = self.row(angle_index);
        let at = |k: isize| -> f64 {
            if k < 0 || k as usize >= row.len() {
                0.0
            } else {
                row[k as usize]
            }
        };
        at(k0) * (1.0 - t) + at(k0 + 1) * t
    }
}

/// Ray-driven forward projection. Each ray `x cosθ + y sinθ = s` is sampled
/// at spacing `step` with bilinear interpolation, and the samples are summed
/// and scaled by `step`.
pub fn forward_project(image: &Image, geometry: &Geometry, step: f64) -> Result<Sinogram> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("sampling step must be positive, got {step}")));
    }
    if step > image.pixel_size() * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "sampling step {step} exceeds the pixel width {}",
            image.pixel_size()
        )));
    }
    // Rays are sampled over |t| <= reach, which covers the image plus the
    // half-pixel band that bilinear interpolation can still see.
    let reach = SQRT_2 + image.pixel_size();
    let samples = (2.0 * reach / step).ceil() as usize;
    let t0 = -(samples as f64) * step / 2.0;
    let n_det = geometry.n_det();
    let mut values = vec![0.0; geometry.n_angles() * n_det];
    crate::par::for_each_chunk_mut(&mut values, n_det, |j, row| {
        let (sin_t, cos_t) = geometry.angles()[j].sin_cos();
        for (k, out) in row.iter_mut().enumerate() {
            let s = geometry.detector_position(k);
            let (px, py) = (s * cos_t, s * sin_t);
            let mut acc = 0.0;
            for m in 0..samples {
                let t = t0 + (m as f64 + 0.5) * step;
                let x = px - t * sin_t;
                let y = py + t * cos_t;
                if x.abs() < 1.0 + image.pixel_size() && y.abs() < 1.0 + image.pixel_size() {
                    acc += image.sample_bilinear(x, y);
                }
            }
            *out = acc * step;
        }
    });
    Sinogram::from_parts(geometry.clone(), values)
}

/// Backprojection restricted to the angles inside `range`:
/// pixel `x` receives `Δθ · Σ_j p(θ_j, x·(cosθ_j, sinθ_j))` with linear
/// interpolation along the detector.
pub fn back_project(sino: &Sinogram, n: usize, range: &AngularRange) -> Result<Image> {
    let selected: Vec<usize> = sino
        .geometry()
        .angles()
        .iter()
        .enumerate()
        .filter(|(_, &a)| range.contains(a))
        .map(|(j, _)| j)
        .collect();
    if selected.is_empty() {
        return Err(Error::Range(format!(
            "range [{:.3}°, {:.3}°] selects no projection angles",
            range.start().to_degrees(),
            range.end().to_degrees()
        )));
    }
    let mut img = Image::zeros(n)?;
    let trig: Vec<(usize, f64, f64)> = selected
        .iter()
        .map(|&j| {
            let (s, c) = sino.geometry().angles()[j].sin_cos();
            (j, c, s)
        })
        .collect();
    let d_theta = sino.geometry().angle_step();
    crate::par::for_each_chunk_mut(img.values_mut(), n, |row, out| {
        let y = pixel_center(n, row);
        for &(j, c, s) in &trig {
            let ys = y * s;
            for (col, acc) in out.iter_mut().enumerate() {
                let x = pixel_center(n, col);
                *acc += sino.interpolate(j, x * c + ys);
            }
        }
        for acc in out.iter_mut() {
            *acc *= d_theta;
        }
    });
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{rasterize, EllipsePhantom};

    #[test]
    fn default_geometry_covers_diagonal() {
        let g = Geometry::for_image(256, 180).unwrap();
        assert_eq!(g.n_det() % 2, 1);
        assert!(g.detector_position(g.n_det() - 1) >= SQRT_2);
        assert!(g.detector_position((g.n_det() - 1) / 2).abs() < 1e-15);
        assert!((g.angle_step() - PI / 180.0).abs() < 1e-15);
    }

    #[test]
    fn truncating_detector_is_rejected() {
        assert!(Geometry::parallel(10, 11, 0.1).is_err());
        assert!(Geometry::from_samples(vec![0.0, 0.0], vec![0.0]).is_err());
        assert!(Geometry::from_samples(vec![0.0, PI], vec![0.0]).is_err());
        assert!(Geometry::from_samples(vec![0.0], vec![0.0, 0.1, 0.3]).is_err());
    }

    #[test]
    fn zero_image_projects_to_zero() {
        let img = Image::zeros(16).unwrap();
        let g = Geometry::for_image(16, 8).unwrap();
        let sino = forward_project(&img, &g, 1.0 / 16.0).unwrap();
        assert!(sino.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_is_validated() {
        let img = Image::zeros(16).unwrap();
        let g = Geometry::for_image(16, 8).unwrap();
        assert!(forward_project(&img, &g, 0.0).is_err());
        assert!(forward_project(&img, &g, -0.1).is_err());
        assert!(forward_project(&img, &g, 0.5).is_err());
    }

    #[test]
    fn disk_chord_from_raster() {
        let n = 256;
        let img = rasterize(&EllipsePhantom::disk(), n).unwrap();
        let g = Geometry::for_image(n, 16).unwrap();
        let sino = forward_project(&img, &g, 1.0 / n as f64).unwrap();
        let mid = (g.n_det() - 1) / 2;
        for j in 0..g.n_angles() {
            assert!((sino.get(j, mid) - 1.0).abs() <= 0.01, "angle {j}: {}", sino.get(j, mid));
        }
    }

    #[test]
    fn single_row_smears_to_constant() {
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
    fn empty_range_is_an_error() {
        let g = Geometry::for_image(16, 4).unwrap();
        let sino = Sinogram::zeros(g);
        // angles are 0, 45, 90, 135 degrees
        let r = AngularRange::from_degrees(10.0, 40.0).unwrap();
        assert!(matches!(back_project(&sino, 16, &r), Err(Error::Range(_))));
    }
}
