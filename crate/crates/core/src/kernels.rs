//! Small 2D kernels and same-size correlation with replicate padding.
//!
//! "Convolution" throughout the crate follows the neural-network convention:
//! the kernel is not flipped.

use crate::error::{Error, Result};

/// Square kernel with odd side length, row-major (row offset = y offset).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel2d {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel side must be odd, got {size}")));
        }
        if taps.len() != size * size {
            return Err(Error::shape(format!("{} taps", size * size), taps.len()));
        }
        Ok(Self { size, taps })
    }

    /// Kernel whose correlation is the identity map.
    pub fn delta(size: usize) -> Result<Self> {
        let mut taps = vec![0.0; size * size];
        if size % 2 == 1 {
            taps[size * size / 2] = 1.0;
        }
        Self::new(size, taps)
    }

    pub fn zeros(size: usize) -> Result<Self> {
        Self::new(size, vec![0.0; size * size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sobel_x() -> Self {
        Self {
            size: 3,
            taps: SOBEL_X.to_vec(),
        }
    }

    pub fn sobel_y() -> Self {
        Self {
            size: 3,
            taps: SOBEL_Y.to_vec(),
        }
    }
}

/// Sobel derivative along +x (columns).
pub const SOBEL_X: [f64; 9] = [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
/// Sobel derivative along +y (rows).
pub const SOBEL_Y: [f64; 9] = [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];

#[inline]
fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// `out[i][j] = Σ_{u,v} k[u][v] · src[clamp(i+u-r)][clamp(j+v-r)]`.
pub fn correlate_replicate(src: &[f64], h: usize, w: usize, kernel: &Kernel2d) -> Vec<f64> {
    debug_assert_eq!(src.len(), h * w);
    let k = kernel.size;
    let r = (k / 2) as isize;
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for u in 0..k {
                let row = clamp(i as isize + u as isize - r, h) * w;
                for v in 0..k {
                    let tap = kernel.taps[u * k + v];
                    if tap != 0.0 {
                        acc += tap * src[row + clamp(j as isize + v as isize - r, w)];
                    }
                }
            }
            out[i * w + j] = acc;
        }
    }
    out
}

/// Adjoint of [`correlate_replicate`] with respect to the plain dot product.
pub fn correlate_replicate_adjoint(grad: &[f64], h: usize, w: usize, kernel: &Kernel2d) -> Vec<f64> {
    debug_assert_eq!(grad.len(), h * w);
    let k = kernel.size;
    let r = (k / 2) as isize;
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let g = grad[i * w + j];
            if g == 0.0 {
                continue;
            }
            for u in 0..k {
                let row = clamp(i as isize + u as isize - r, h) * w;
                for v in 0..k {
                    out[row + clamp(j as isize + v as isize - r, w)] += kernel.taps[u * k + v] * g;
                }
            }
        }
    }
    out
}

/// Sobel gradient pair `(gx, gy)` with replicate padding.
pub fn sobel(src: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    (
        correlate_replicate(src, h, w, &Kernel2d::sobel_x()),
        correlate_replicate(src, h, w, &Kernel2d::sobel_y()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_must_be_odd() {
        assert!(Kernel2d::new(2, vec![0.0; 4]).is_err());
        assert!(Kernel2d::new(3, vec![0.0; 8]).is_err());
        assert!(Kernel2d::delta(4).is_err());
    }

    #[test]
    fn delta_is_identity() {
        let src: Vec<f64> = (0..20).map(|v| v as f64 * 0.7 - 3.0).collect();
        for size in [1, 3, 5] {
            let out = correlate_replicate(&src, 4, 5, &Kernel2d::delta(size).unwrap());
            assert_eq!(out, src);
        }
    }

    #[test]
    fn sobel_of_ramp() {
        // f = 2x + 3y in pixel units
        let (h, w) = (6, 7);
        let src: Vec<f64> = (0..h * w).map(|k| 2.0 * (k % w) as f64 + 3.0 * (k / w) as f64).collect();
        let (gx, gy) = sobel(&src, h, w);
        // interior: Sobel of a unit ramp is 8 per unit slope
        assert_eq!(gx[2 * w + 3], 16.0);
        assert_eq!(gy[2 * w + 3], 24.0);
    }

    #[test]
    fn adjoint_identity() {
        let (h, w) = (5, 6);
        let x: Vec<f64> = (0..h * w).map(|k| ((k * 37 % 11) as f64) - 5.0).collect();
        let y: Vec<f64> = (0..h * w).map(|k| ((k * 13 % 7) as f64) * 0.5).collect();
        let kern = Kernel2d::new(3, vec![0.3, -1.0, 2.0, 0.5, 0.0, 1.5, -0.7, 0.2, 0.9]).unwrap();
        let ax = correlate_replicate(&x, h, w, &kern);
        let aty = correlate_replicate_adjoint(&y, h, w, &kern);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
