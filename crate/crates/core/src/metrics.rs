//! Image quality metrics: PSNR and windowed SSIM.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::Image;

/// PSNR reported when the two images are identical.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Default SSIM window side.
pub const SSIM_WINDOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Psnr {
    /// `10·log₁₀(L²/MSE)`, or [`PSNR_CAP_DB`] when `capped`.
    pub db: f64,
    /// Set when MSE is zero and the true value is infinite.
    pub capped: bool,
}

pub fn mse(x: &Image, y: &Image) -> Result<f64> {
    x.check_same(y)?;
    let sum: f64 = x.values().iter().zip(y.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.values().len() as f64)
}

pub fn psnr(x: &Image, y: &Image, data_range: f64) -> Result<Psnr> {
    check_range(data_range)?;
    let m = mse(x, y)?;
    if m == 0.0 {
        return Ok(Psnr {
            db: PSNR_CAP_DB,
            capped: true,
        });
    }
    Ok(Psnr {
        db: 10.0 * (data_range * data_range / m).log10(),
        capped: false,
    })
}

fn check_range(data_range: f64) -> Result<()> {
    if !(data_range.is_finite() && data_range > 0.0) {
        return Err(Error::invalid(format!("data range must be positive, got {data_range}")));
    }
    Ok(())
}

/// Mean SSIM over all `window × window` windows (stride 1, valid region),
/// with uniform weights, population statistics and
/// `C₁ = (0.01 L)²`, `C₂ = (0.03 L)²`.
pub fn ssim(x: &Image, y: &Image, window: usize, data_range: f64) -> Result<f64> {
    x.check_same(y)?;
    check_range(data_range)?;
    let n = x.n();
    if window == 0 || window > n {
        return Err(Error::invalid(format!("SSIM window {window} does not fit a {n}x{n} image")));
    }
    let c1 = (0.01 * data_range).powi(2);
    let c2 = (0.03 * data_range).powi(2);
    let span = n - window + 1;
    let count = (window * window) as f64;
    let per_row = crate::par::map_indices(span, |i| {
        let mut acc = 0.0;
        for j in 0..span {
            let (mut sx, mut sy) = (0.0, 0.0);
            for u in 0..window {
                for v in 0..window {
                    sx += x.get(i + u, j + v);
                    sy += y.get(i + u, j + v);
                }
            }
            let (mx, my) = (sx / count, sy / count);
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for u in 0..window {
                for v in 0..window {
                    let dx = x.get(i + u, j + v) - mx;
                    let dy = y.get(i + u, j + v) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cxy += dx * dy;
                }
            }
            let (vx, vy, cxy) = (vx / count, vy / count, cxy / count);
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
        acc
    });
    Ok(per_row.iter().sum::<f64>() / (span * span) as f64)
}
