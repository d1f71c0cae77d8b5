use super::edge::sobel_edge_fuse;
use super::layers::{Conv2d, Padding, ParamInit};
use super::wtconv::WtConvLayer;
use super::{BlockConfig, FeatureTensor, ENCODER_DEPTH};
use crate::error::{Error, Result};
use crate::image::Image;

const WT_KERNEL: usize = 3;
const CONV_KERNEL: usize = 3;

/// Encoding unit: wavelet convolution, then a stride-2 convolution that
/// doubles the channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderUnit {
    pub wt: WtConvLayer,
    pub conv: Conv2d,
}

impl EncoderUnit {
    fn new(channels: usize, init: &mut ParamInit) -> Self {
        Self {
            wt: WtConvLayer::new(channels, WT_KERNEL, init),
            conv: Conv2d::new(channels, 2 * channels, CONV_KERNEL, 2, Padding::Replicate, init),
        }
    }

    pub fn forward(&self, x: &FeatureTensor) -> Result<FeatureTensor> {
        Ok(self.conv.forward(&self.wt.forward(x)?)?.relu())
    }
}

/// Edge fusion followed by a three-level wavelet encoder and a decoder with
/// skip concatenations.
#[derive(Debug, Clone, PartialEq)]
pub struct Vswd {
    pub channels: usize,
    pub stem_wt: WtConvLayer,
    pub stem_conv: Conv2d,
    pub encoders: Vec<EncoderUnit>,
    /// Decoders for `d₃, d₂, d₁`, in that order.
    pub decoders: Vec<Conv2d>,
}

impl Vswd {
    pub fn new(cfg: &BlockConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        let mut init = ParamInit::new(cfg.seed);
        let stem_wt = WtConvLayer::new(1, WT_KERNEL, &mut init);
        let stem_conv = Conv2d::new(1, c, CONV_KERNEL, 1, Padding::Replicate, &mut init);
        let encoders = (0..ENCODER_DEPTH)
            .map(|level| EncoderUnit::new(c << level, &mut init))
            .collect();
        // d_i = Conv(Cat(up(d_{i+1}), x_i)): (2w + w) → w with w = c·2^(i-1)
        let decoders = (0..ENCODER_DEPTH)
            .rev()
            .map(|level| {
                let w = c << level;
                Conv2d::new(3 * w, w, CONV_KERNEL, 1, Padding::Replicate, &mut init)
            })
            .collect();
        Ok(Self {
            channels: c,
            stem_wt,
            stem_conv,
            encoders,
            decoders,
        })
    }

    /// Returns `d₁` with shape `(c, H, W)`.
    pub fn forward(&self, image: &Image) -> Result<FeatureTensor> {
        let n = image.n();
        let step = 1usize << ENCODER_DEPTH;
        if !n.is_multiple_of(step) {
            return Err(Error::invalid(format!("image side {n} is not divisible by {step}")));
        }
        let fused = sobel_edge_fuse(&FeatureTensor::from_image(image));
        let x1 = self.stem_conv.forward(&self.stem_wt.forward(&fused)?)?.relu();
        let mut skips = vec![x1];
        for enc in &self.encoders {
            let next = enc.forward(skips.last().expect("non-empty"))?;
            skips.push(next);
        }
        let mut d = skips.pop().expect("x4");
        for (k, dec) in self.decoders.iter().enumerate() {
            let skip = skips.pop().expect("matching skip");
            let out = dec.forward(&d.upsample2().concat(&skip)?)?;
            d = if k + 1 < self.decoders.len() { out.relu() } else { out };
        }
        Ok(d)
    }
}

/// Builds the extractor from `cfg` and runs it on `image`.
pub fn vswd_forward(image: &Image, cfg: &BlockConfig) -> Result<FeatureTensor> {
    Vswd::new(cfg)?.forward(image)
}
