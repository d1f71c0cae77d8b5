//! Single-level orthonormal 2D Haar transform.
//!
//! For a 2×2 block `[a b; c d]` (rows top to bottom):
//! `LL = (a+b+c+d)/2`, `LH = (a−b+c−d)/2`, `HL = (a+b−c−d)/2`,
//! `HH = (a−b−c+d)/2`. LH carries horizontal (column-wise) detail, HL
//! vertical (row-wise) detail.

use super::FeatureTensor;
use crate::error::{Error, Result};

/// The four subbands of one decomposition level, each `(C, H/2, W/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub ll: FeatureTensor,
    pub lh: FeatureTensor,
    pub hl: FeatureTensor,
    pub hh: FeatureTensor,
}

impl Subbands {
    pub fn energy(&self) -> f64 {
        self.ll.energy() + self.lh.energy() + self.hl.energy() + self.hh.energy()
    }

    fn check(&self) -> Result<()> {
        for band in [&self.lh, &self.hl, &self.hh] {
            self.ll.same_shape(band)?;
        }
        Ok(())
    }
}

pub fn dwt2(x: &FeatureTensor) -> Result<Subbands> {
    let (c, h, w) = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!("wavelet transform needs even dims, got {h}x{w}")));
    }
    let (h2, w2) = (h / 2, w / 2);
    let mut ll = FeatureTensor::zeros(c, h2, w2);
    let mut lh = ll.clone();
    let mut hl = ll.clone();
    let mut hh = ll.clone();
    for ch in 0..c {
        for i in 0..h2 {
            for j in 0..w2 {
                let a = x.get(ch, 2 * i, 2 * j);
                let b = x.get(ch, 2 * i, 2 * j + 1);
                let cc = x.get(ch, 2 * i + 1, 2 * j);
                let d = x.get(ch, 2 * i + 1, 2 * j + 1);
                ll.set(ch, i, j, 0.5 * (a + b + cc + d));
                lh.set(ch, i, j, 0.5 * (a - b + cc - d));
                hl.set(ch, i, j, 0.5 * (a + b - cc - d));
                hh.set(ch, i, j, 0.5 * (a - b - cc + d));
            }
        }
    }
    Ok(Subbands { ll, lh, hl, hh })
}

pub fn idwt2(bands: &Subbands) -> Result<FeatureTensor> {
    bands.check()?;
    let (c, h2, w2) = bands.ll.shape();
    let mut out = FeatureTensor::zeros(c, 2 * h2, 2 * w2);
    for ch in 0..c {
        for i in 0..h2 {
            for j in 0..w2 {
                let ll = bands.ll.get(ch, i, j);
                let lh = bands.lh.get(ch, i, j);
                let hl = bands.hl.get(ch, i, j);
                let hh = bands.hh.get(ch, i, j);
                out.set(ch, 2 * i, 2 * j, 0.5 * (ll + lh + hl + hh));
                out.set(ch, 2 * i, 2 * j + 1, 0.5 * (ll - lh + hl - hh));
                out.set(ch, 2 * i + 1, 2 * j, 0.5 * (ll + lh - hl - hh));
                out.set(ch, 2 * i + 1, 2 * j + 1, 0.5 * (ll - lh - hl + hh));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_goes_to_ll() {
        let x = FeatureTensor::from_vec(2, 4, 6, vec![1.5; 48]).unwrap();
        let b = dwt2(&x).unwrap();
        assert!(b.ll.data().iter().all(|&v| v == 3.0));
        for band in [&b.lh, &b.hl, &b.hh] {
            assert!(band.data().iter().all(|&v| v == 0.0));
        }
        assert_eq!(idwt2(&b).unwrap(), x);
    }

    #[test]
    fn impulse_splits_evenly() {
        let x = FeatureTensor::from_vec(1, 2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = dwt2(&x).unwrap();
        for band in [&b.ll, &b.lh, &b.hl, &b.hh] {
            assert_eq!(band.data(), &[0.5]);
        }
    }

    #[test]
    fn odd_dims_and_mismatched_bands_rejected() {
        assert!(dwt2(&FeatureTensor::zeros(1, 3, 4)).is_err());
        let b = Subbands {
            ll: FeatureTensor::zeros(1, 2, 2),
            lh: FeatureTensor::zeros(1, 2, 2),
            hl: FeatureTensor::zeros(1, 2, 3),
            hh: FeatureTensor::zeros(1, 2, 2),
        };
        assert!(idwt2(&b).is_err());
    }

    #[test]
    fn zero_bands_invert_to_zero() {
        let z = FeatureTensor::zeros(3, 4, 4);
        let b = Subbands {
            ll: z.clone(),
            lh: z.clone(),
            hl: z.clone(),
            hh: z,
        };
        assert!(idwt2(&b).unwrap().data().iter().all(|&v| v == 0.0));
    }
}
