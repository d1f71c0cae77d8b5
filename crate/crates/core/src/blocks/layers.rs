//! Convolution layers and the seeded parameter initializer shared by the
//! network blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FeatureTensor;
use crate::error::{Error, Result};
use crate::kernels::Kernel2d;

/// Deterministic parameter source: uniform in `[−1/√fan_in, 1/√fan_in]`.
#[derive(Debug, Clone)]
pub struct ParamInit {
    rng: ChaCha8Rng,
}

impl ParamInit {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, len: usize, fan_in: usize) -> Vec<f64> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        (0..len).map(|_| self.rng.random_range(-bound..=bound)).collect()
    }

    pub fn kernel(&mut self, size: usize) -> Kernel2d {
        Kernel2d::new(size, self.uniform(size * size, size * size)).expect("odd size")
    }
}

/// How a convolution treats the border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output keeps the input size (before striding); out-of-range reads clamp
    /// to the nearest edge pixel.
    Replicate,
    /// No padding; output shrinks by `kernel − 1`.
    Valid,
}

/// Dense 2D convolution `(C_in, H, W) → (C_out, H', W')`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
    /// Layout `[out][in][ky][kx]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        init: &mut ParamInit,
    ) -> Self {
        assert!(kernel % 2 == 1 && stride >= 1);
        let fan_in = in_channels * kernel * kernel;
        let weights = init.uniform(out_channels * fan_in, fan_in);
        let bias = init.uniform(out_channels, fan_in);
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weights,
            bias,
        }
    }

    pub fn zero_out(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = 0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match self.padding {
            Padding::Replicate => Ok((h.div_ceil(self.stride), w.div_ceil(self.stride))),
            Padding::Valid => {
                if h < self.kernel || w < self.kernel {
                    return Err(Error::invalid(format!(
                        "{}x{} input is smaller than the {} kernel",
                        h, w, self.kernel
                    )));
                }
                Ok((
                    (h - self.kernel) / self.stride + 1,
                    (w - self.kernel) / self.stride + 1,
                ))
            }
        }
    }

    pub fn forward(&self, x: &FeatureTensor) -> Result<FeatureTensor> {
        let (c, h, w) = x.shape();
        if c != self.in_channels {
            return Err(Error::shape(format!("{} channels", self.in_channels), c));
        }
        let (ho, wo) = self.output_dims(h, w)?;
        let k = self.kernel;
        let r = (k / 2) as isize;
        let stride = self.stride;
        let (row_off, col_off): (isize, isize) = match self.padding {
            Padding::Replicate => (-r, -r),
            Padding::Valid => (0, 0),
        };
        // column gather maps, one per kernel column
        let col_maps: Vec<Vec<usize>> = (0..k)
            .map(|v| {
                (0..wo)
                    .map(|j| (j as isize * stride as isize + v as isize + col_off).clamp(0, w as isize - 1) as usize)
                    .collect()
            })
            .collect();
        let contiguous = stride == 1 && self.padding == Padding::Valid;
        let mut out = FeatureTensor::zeros(self.out_channels, ho, wo);
        let plane = ho * wo;
        crate::par::for_each_chunk_mut(out.data_mut(), plane, |o, dst| {
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
            for ci in 0..c {
                let src = x.channel(ci);
                let wbase = (o * c + ci) * k * k;
                for i in 0..ho {
                    let drow = &mut dst[i * wo..(i + 1) * wo];
                    for u in 0..k {
                        let si = (i as isize * stride as isize + u as isize + row_off).clamp(0, h as isize - 1) as usize;
                        let srow = &src[si * w..(si + 1) * w];
                        for v in 0..k {
                            let tap = self.weights[wbase + u * k + v];
                            if tap == 0.0 {
                                continue;
                            }
                            if contiguous {
                                for (d, s) in drow.iter_mut().zip(&srow[v..v + wo]) {
                                    *d += tap * s;
                                }
                            } else {
                                for (d, &sj) in drow.iter_mut().zip(&col_maps[v]) {
                                    *d += tap * srow[sj];
                                }
                            }
                        }
                    }
                }
            }
        });
        Ok(out)
    }
}

/// 3D convolution over a `(D, C, H, W)` stack, applied here to depth-1
/// inputs. With zero padding along depth only the central depth slice of the
/// kernel touches the data, so the layer acts as a 2D convolution built from
/// that slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d {
    pub depth: usize,
    /// One 2D convolution per depth slice of the kernel.
    pub slices: Vec<Conv2d>,
}

impl Conv3d {
    pub fn new(channels: usize, depth: usize, kernel: usize, init: &mut ParamInit) -> Self {
        assert!(depth % 2 == 1);
        let fan_in = depth * channels * kernel * kernel;
        let slices = (0..depth)
            .map(|_| {
                let mut conv = Conv2d::new(channels, channels, kernel, 1, Padding::Replicate, init);
                conv.weights = init.uniform(conv.weights.len(), fan_in);
                conv
            })
            .collect::<Vec<_>>();
        let mut layer = Self { depth, slices };
        // a single bias per output channel lives on the central slice
        for (d, s) in layer.slices.iter_mut().enumerate() {
            if d != depth / 2 {
                s.bias.iter_mut().for_each(|b| *b = 0.0);
            }
        }
        layer
    }

    pub fn zero_out(&mut self) {
        self.slices.iter_mut().for_each(Conv2d::zero_out);
    }

    /// Forward pass on a depth-1 stack.
    pub fn forward(&self, x: &FeatureTensor) -> Result<FeatureTensor> {
        self.slices[self.depth / 2].forward(x)
    }
}
