//! Ram-Lak filtering and (limited-angle) filtered backprojection.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::projector::{back_project, Sinogram};

/// Tolerance used when testing an angle against range endpoints, so that
/// grid angles computed as `jπ/N` match endpoints given in degrees.
const ANGLE_EPS: f64 = 1e-9;

/// Global FBP scale absorbing the discretization bias of the sampled ramp.
/// Fixed once so that the 720-angle full-scan reconstruction of the
/// unit-intensity radius-0.5 disk at n = 256 has center value 1.0.
pub const FBP_SCALE: f64 = 1.006172;

/// Scanned angular interval `[θ₁, θ₂]` with `0 ≤ θ₁ < θ₂ ≤ π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularRange {
    start: f64,
    end: f64,
    include_start: bool,
}

impl AngularRange {
    /// Closed interval `[start, end]` in radians.
    pub fn new(start: f64, end: f64) -> Result<Self> {
        Self::build(start, end, true)
    }

    /// Half-open interval `(start, end]`, used to split a range into
    /// disjoint pieces.
    pub fn left_open(start: f64, end: f64) -> Result<Self> {
        Self::build(start, end, false)
    }

    /// Closed interval given in degrees.
    pub fn from_degrees(start_deg: f64, end_deg: f64) -> Result<Self> {
        Self::new(start_deg.to_radians(), end_deg.to_radians())
    }

    /// `[0, π]`, which holds every projection angle.
    pub fn full() -> Self {
        Self {
            start: 0.0,
            end: PI,
            include_start: true,
        }
    }

    fn build(start: f64, end: f64, include_start: bool) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::Range("range endpoints must be finite".into()));
        }
        if start < -ANGLE_EPS || end > PI + ANGLE_EPS || start >= end {
            return Err(Error::Range(format!(
                "need 0 <= start < end <= 180 degrees, got [{}, {}]",
                start.to_degrees(),
                end.to_degrees()
            )));
        }
        Ok(Self {
            start: start.max(0.0),
            end: end.min(PI),
            include_start,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    /// True when the range misses part of the half circle.
    pub fn is_limited(&self) -> bool {
        self.width() < PI - ANGLE_EPS
    }

    /// Membership of a projection angle (not reduced modulo π).
    #[inline]
    pub fn contains(&self, angle: f64) -> bool {
        let above = if self.include_start {
            angle >= self.start - ANGLE_EPS
        } else {
            angle > self.start + ANGLE_EPS
        };
        above && angle <= self.end + ANGLE_EPS
    }

    /// Membership of an undirected line direction, i.e. an angle taken
    /// modulo π. The endpoints count as inside.
    pub fn contains_direction(&self, psi: f64) -> bool {
        let psi = psi.rem_euclid(PI);
        [psi - PI, psi, psi + PI]
            .iter()
            .any(|&a| a >= self.start - ANGLE_EPS && a <= self.end + ANGLE_EPS)
    }

    /// The range shifted by `delta` radians, if it stays inside `[0, π]`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::build(self.start + delta, self.end + delta, self.include_start)
    }
}

/// Ramp-filtered projections `p̂(θ, s)` on the original detector grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSinogram(pub Sinogram);

impl FilteredSinogram {
    pub fn sinogram(&self) -> &Sinogram {
        &self.0
    }

    pub fn into_inner(self) -> Sinogram {
        self.0
    }
}

/// Length of the FFT buffer for a detector row: next power of two that is at
/// least twice the row length.
pub fn padded_len(n_det: usize) -> usize {
    (2 * n_det).next_power_of_two()
}

/// Copies `row` into `buf` and fills the tail by repeating the edge samples:
/// the first half of the tail with the last sample, the second half with the
/// first sample. Viewed circularly the padded signal is continuous.
pub fn pad_row(row: &[f64], buf: &mut [Complex64]) {
    let n = row.len();
    let len = buf.len();
    for (b, &v) in buf.iter_mut().zip(row) {
        *b = Complex64::new(v, 0.0);
    }
    let tail = len - n;
    let right = tail - tail / 2;
    for (i, b) in buf[n..].iter_mut().enumerate() {
        let v = if i < right { row[n - 1] } else { row[0] };
        *b = Complex64::new(v, 0.0);
    }
}

/// Ramp response `|ω|` in cycles per unit length for each FFT bin, with a hard
/// cutoff at the Nyquist bin.
pub fn ramp_response(len: usize, pitch: f64) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let m = k.min(len - k);
            m as f64 / (len as f64 * pitch)
        })
        .collect()
}

/// Ram-Lak filter applied row by row in the frequency domain.
pub fn ramlak_filter(sino: &Sinogram) -> Result<FilteredSinogram> {
    let g = sino.geometry();
    let n_det = g.n_det();
    if n_det < 2 {
        return Err(Error::invalid("ramp filtering needs at least two detector bins"));
    }
    let len = padded_len(n_det);
    let mut planner = FftPlanner::<f64>::new();
    let forward: Arc<dyn Fft<f64>> = planner.plan_fft_forward(len);
    let inverse: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(len);
    let ramp = ramp_response(len, g.det_pitch());
    let norm = 1.0 / len as f64;

    let mut out = sino.clone();
    crate::par::for_each_chunk_mut(out.values_mut(), n_det, |j, row_out| {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        pad_row(sino.row(j), &mut buf);
        forward.process(&mut buf);
        for (b, w) in buf.iter_mut().zip(&ramp) {
            *b *= *w;
        }
        inverse.process(&mut buf);
        for (o, b) in row_out.iter_mut().zip(&buf) {
            *o = b.re * norm;
        }
    });
    Ok(FilteredSinogram(out))
}

/// Full-angle filtered backprojection onto an `n × n` image.
pub fn fbp_reconstruct(sino: &Sinogram, n: usize) -> Result<Image> {
    limited_fbp(sino, n, &AngularRange::full())
}

/// Filtered backprojection with the backprojection restricted to `range`.
/// No renormalization for the missing angles is applied.
pub fn limited_fbp(sino: &Sinogram, n: usize, range: &AngularRange) -> Result<Image> {
    let filtered = ramlak_filter(sino)?;
    backproject_filtered(&filtered, n, range)
}

/// Backprojection step of FBP for an already filtered sinogram.
pub fn backproject_filtered(filtered: &FilteredSinogram, n: usize, range: &AngularRange) -> Result<Image> {
    let mut img = back_project(filtered.sinogram(), n, range)?;
    img.values_mut().iter_mut().for_each(|v| *v *= FBP_SCALE);
    Ok(img)
}
