use super::layers::ParamInit;
use super::wavelet::{dwt2, idwt2, Subbands};
use super::FeatureTensor;
use crate::error::{Error, Result};
use crate::kernels::{correlate_replicate, Kernel2d};

/// Kernels `K₀…K₄` of a wavelet convolution: `K₀` for the spatial branch and
/// `K₁…K₄` for the LL, LH, HL and HH subbands.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub kernels: [Kernel2d; 5],
}

impl KernelSet {
    pub fn new(kernels: [Kernel2d; 5]) -> Self {
        Self { kernels }
    }

    /// Five identity kernels of the given odd size.
    pub fn delta(size: usize) -> Result<Self> {
        let d = Kernel2d::delta(size)?;
        Ok(Self::new([d.clone(), d.clone(), d.clone(), d.clone(), d]))
    }

    pub fn random(size: usize, init: &mut ParamInit) -> Self {
        Self::new([
            init.kernel(size),
            init.kernel(size),
            init.kernel(size),
            init.kernel(size),
            init.kernel(size),
        ])
    }
}

fn conv_each_channel(x: &FeatureTensor, k: &Kernel2d) -> FeatureTensor {
    let (c, h, w) = x.shape();
    let mut out = FeatureTensor::zeros(c, h, w);
    for ch in 0..c {
        out.channel_mut(ch)
            .copy_from_slice(&correlate_replicate(x.channel(ch), h, w, k));
    }
    out
}

/// `F_o = Conv(x, K₀) + IWT(Conv(LL, K₁) + Conv(LH, K₂) + Conv(HL, K₃) + Conv(HH, K₄))`
/// with the same kernels applied to every channel.
///
/// The subband sum is read as an assignment of each convolved subband back to
/// its own slot before the inverse transform.
pub fn wtconv(x: &FeatureTensor, kernels: &KernelSet) -> Result<FeatureTensor> {
    if !x.height().is_multiple_of(2) || !x.width().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "wavelet convolution needs even dims, got {}x{}",
            x.height(),
            x.width()
        )));
    }
    let [k0, k1, k2, k3, k4] = &kernels.kernels;
    let bands = dwt2(x)?;
    let filtered = Subbands {
        ll: conv_each_channel(&bands.ll, k1),
        lh: conv_each_channel(&bands.lh, k2),
        hl: conv_each_channel(&bands.hl, k3),
        hh: conv_each_channel(&bands.hh, k4),
    };
    conv_each_channel(x, k0).add(&idwt2(&filtered)?)
}

/// Depthwise wavelet convolution with its own kernel set per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WtConvLayer {
    pub per_channel: Vec<KernelSet>,
}

impl WtConvLayer {
    pub fn new(channels: usize, kernel: usize, init: &mut ParamInit) -> Self {
        Self {
            per_channel: (0..channels).map(|_| KernelSet::random(kernel, init)).collect(),
        }
    }

    pub fn forward(&self, x: &FeatureTensor) -> Result<FeatureTensor> {
        let (c, h, w) = x.shape();
        if c != self.per_channel.len() {
            return Err(Error::shape(format!("{} channels", self.per_channel.len()), c));
        }
        let planes = crate::par::map_indices(c, |ch| {
            let single = FeatureTensor::from_vec(1, h, w, x.channel(ch).to_vec())?;
            wtconv(&single, &self.per_channel[ch]).map(FeatureTensor::into_data)
        });
        let mut data = Vec::with_capacity(c * h * w);
        for p in planes {
            data.extend(p?);
        }
        FeatureTensor::from_vec(c, h, w, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureTensor {
        FeatureTensor::from_vec(2, 6, 8, (0..96).map(|v| ((v * 7919) % 97) as f64 / 97.0 - 0.5).collect()).unwrap()
    }

    #[test]
    fn delta_kernels_double_the_input() {
        let x = sample();
        let out = wtconv(&x, &KernelSet::delta(3).unwrap()).unwrap();
        for (o, v) in out.data().iter().zip(x.data()) {
            assert!((o - 2.0 * v).abs() <= 1e-12 * x.max_abs());
        }
    }

    #[test]
    fn dead_wavelet_branch_leaves_spatial_conv() {
        let x = sample();
        let mut init = ParamInit::new(5);
        let k0 = init.kernel(3);
        let z = Kernel2d::zeros(3).unwrap();
        let set = KernelSet::new([k0.clone(), z.clone(), z.clone(), z.clone(), z]);
        let out = wtconv(&x, &set).unwrap();
        assert_eq!(out, conv_each_channel(&x, &k0));
    }

    #[test]
    fn odd_dims_rejected() {
        let x = FeatureTensor::zeros(1, 5, 4);
        assert!(wtconv(&x, &KernelSet::delta(3).unwrap()).is_err());
    }

    #[test]
    fn layer_checks_channels() {
        let layer = WtConvLayer::new(3, 3, &mut ParamInit::new(1));
        assert!(layer.forward(&sample()).is_err());
        let layer = WtConvLayer::new(2, 3, &mut ParamInit::new(1));
        assert_eq!(layer.forward(&sample()).unwrap().shape(), (2, 6, 8));
    }
}
