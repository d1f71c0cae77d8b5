use super::layers::{Conv2d, Padding, ParamInit};
use super::mca::{mca_forward, AttentionParams};
use super::{BlockConfig, FeatureTensor};
use crate::error::{Error, Result};
use crate::image::Image;

/// U-shaped refinement: two stride-2 downsampling convolutions, the attention
/// composite at the bottleneck, two upsampling stages with skip
/// concatenations, and a 1×1 projection to a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Umca {
    pub channels: usize,
    pub down: [Conv2d; 2],
    pub bottleneck: AttentionParams,
    pub up: [Conv2d; 2],
    pub head: Conv2d,
}

impl Umca {
    pub fn new(cfg: &BlockConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        let mut init = ParamInit::new(cfg.umca_seed());
        let down = [
            Conv2d::new(c, 2 * c, 3, 2, Padding::Replicate, &mut init),
            Conv2d::new(2 * c, 4 * c, 3, 2, Padding::Replicate, &mut init),
        ];
        let bottleneck = AttentionParams::new(4 * c, cfg, &mut init)?;
        let up = [
            Conv2d::new(4 * c + 2 * c, 2 * c, 3, 1, Padding::Replicate, &mut init),
            Conv2d::new(2 * c + c, c, 3, 1, Padding::Replicate, &mut init),
        ];
        let head = Conv2d::new(c, 1, 1, 1, Padding::Replicate, &mut init);
        Ok(Self {
            channels: c,
            down,
            bottleneck,
            up,
            head,
        })
    }

    pub fn forward(&self, d1: &FeatureTensor, cfg: &BlockConfig) -> Result<Image> {
        let (c, h, w) = d1.shape();
        if c != self.channels || h != w {
            return Err(Error::shape(
                format!("({}, n, n)", self.channels),
                format!("({c}, {h}, {w})"),
            ));
        }
        cfg.check_dims(h, w)?;
        let e1 = self.down[0].forward(d1)?.relu();
        let e2 = self.down[1].forward(&e1)?.relu();
        let b = mca_forward(&e2, &self.bottleneck, cfg)?;
        let u2 = self.up[0].forward(&b.upsample2().concat(&e1)?)?.relu();
        let u1 = self.up[1].forward(&u2.upsample2().concat(d1)?)?.relu();
        self.head.forward(&u1)?.to_image()
    }
}

/// Builds the refinement stage from `cfg` and maps `d₁` to an image.
pub fn umca_forward(d1: &FeatureTensor, cfg: &BlockConfig) -> Result<Image> {
    Umca::new(cfg)?.forward(d1, cfg)
}
