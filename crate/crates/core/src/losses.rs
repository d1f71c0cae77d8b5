//! Perceptual, anisotropic-weighted, SSIM and edge-gradient losses and their
//! weighted total.

use serde::{Deserialize, Serialize};

use crate::blocks::layers::{Conv2d, Padding, ParamInit};
use crate::blocks::FeatureTensor;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::kernels::{correlate_replicate, correlate_replicate_adjoint, Kernel2d};
use crate::metrics::{ssim, SSIM_WINDOW};
use crate::visibility::WeightMap;

/// Relative loss weights. `mu` is carried for completeness of the
/// configuration but does not enter the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_p: f64,
    pub alpha_s: f64,
    pub beta_e: f64,
    pub gamma_a: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

fn default_mu() -> f64 {
    0.3
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_p: 0.5,
            alpha_s: 1.0,
            beta_e: 0.1,
            gamma_a: 0.3,
            mu: default_mu(),
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_p, self.alpha_s, self.beta_e, self.gamma_a, self.mu];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        Ok(())
    }

    /// `λ_p·L_p + α_s·L_s + β_e·L_e + γ_a·L_a`, summed with compensation so
    /// that the result is the correctly rounded sum of the four products.
    pub fn combine(&self, c: &LossComponents) -> f64 {
        compensated_sum(&[
            self.lambda_p * c.l_p,
            self.alpha_s * c.l_s,
            self.beta_e * c.l_e,
            self.gamma_a * c.l_a,
        ])
    }
}

/// Neumaier summation.
fn compensated_sum(terms: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// The four loss terms of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub l_p: f64,
    pub l_s: f64,
    pub l_e: f64,
    pub l_a: f64,
}

/// A loss value together with its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWithGradient {
    pub value: f64,
    pub gradient: Image,
}

/// Fixed convolutional feature extractor standing in for a pretrained
/// denoiser encoder. Each stage is a valid (unpadded) convolution, optionally
/// followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    pub stages: Vec<Conv2d>,
    pub relu: bool,
}

impl FeatureExtractor {
    pub fn new(stages: Vec<Conv2d>, relu: bool) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::invalid("feature extractor needs at least one stage"));
        }
        if stages[0].in_channels != 1 {
            return Err(Error::invalid("the first stage must take a single channel"));
        }
        for pair in stages.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::shape(
                    format!("{} input channels", pair[0].out_channels),
                    pair[1].in_channels,
                ));
            }
        }
        Ok(Self { stages, relu })
    }

    /// Five 5×5 stages of `width` channels with seeded weights, following the
    /// encoder shape of RED-CNN (which uses 96 channels).
    pub fn red_cnn(width: usize, seed: u64) -> Self {
        let mut init = ParamInit::new(seed);
        let stages = (0..5)
            .map(|i| {
                let cin = if i == 0 { 1 } else { width };
                Conv2d::new(cin, width, 5, 1, Padding::Valid, &mut init)
            })
            .collect();
        Self { stages, relu: true }
    }

    /// Stage outputs paired with the `(width, height)` of each stage's input.
    pub fn features(&self, img: &Image) -> Result<Vec<(FeatureTensor, (usize, usize))>> {
        let mut x = FeatureTensor::from_image(img);
        let mut out = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let dims = (x.width(), x.height());
            let mut y = stage.forward(&x)?;
            if self.relu {
                y = y.relu();
            }
            out.push((y.clone(), dims));
            x = y;
        }
        Ok(out)
    }
}

/// `Σ_i ‖RC_i(pred) − RC_i(truth)‖² / (w_i h_i)`.
pub fn perceptual_loss(pred: &Image, truth: &Image, fx: &FeatureExtractor) -> Result<f64> {
    pred.check_same(truth)?;
    let a = fx.features(pred)?;
    let b = fx.features(truth)?;
    Ok(a.iter()
        .zip(&b)
        .map(|((fa, (w, h)), (fb, _))| {
            let sq: f64 = fa.data().iter().zip(fb.data()).map(|(p, q)| (p - q) * (p - q)).sum();
            sq / (w * h) as f64
        })
        .sum())
}

/// `‖W ⊙ (pred − truth)‖²` and its gradient `2 W² (pred − truth)`.
pub fn anisotropic_loss(pred: &Image, truth: &Image, weights: &WeightMap) -> Result<LossWithGradient> {
    pred.check_same(truth)?;
    if weights.n() != pred.n() {
        return Err(Error::shape(format!("{0}x{0} weights", pred.n()), weights.n()));
    }
    let mut value = 0.0;
    let grad: Vec<f64> = pred
        .values()
        .iter()
        .zip(truth.values())
        .zip(weights.values())
        .map(|((p, t), w)| {
            let r = w * (p - t);
            value += r * r;
            2.0 * w * r
        })
        .collect();
    Ok(LossWithGradient {
        value,
        gradient: Image::from_vec(pred.n(), grad)?,
    })
}

/// `1 − SSIM(pred, truth)`.
pub fn ssim_loss(pred: &Image, truth: &Image, window: usize, data_range: f64) -> Result<f64> {
    Ok(1.0 - ssim(pred, truth, window, data_range)?)
}

/// `‖Grad(pred) − Grad(truth)‖²` with the Sobel pair as `Grad`, and its
/// gradient `2 Σ_d G_dᵀ (G_d pred − G_d truth)`.
pub fn edge_gradient_loss(pred: &Image, truth: &Image) -> Result<LossWithGradient> {
    pred.check_same(truth)?;
    let n = pred.n();
    let mut value = 0.0;
    let mut grad = vec![0.0; n * n];
    for kernel in [Kernel2d::sobel_x(), Kernel2d::sobel_y()] {
        let gp = correlate_replicate(pred.values(), n, n, &kernel);
        let gt = correlate_replicate(truth.values(), n, n, &kernel);
        let resid: Vec<f64> = gp.iter().zip(&gt).map(|(a, b)| a - b).collect();
        value += resid.iter().map(|r| r * r).sum::<f64>();
        for (g, a) in grad.iter_mut().zip(correlate_replicate_adjoint(&resid, n, n, &kernel)) {
            *g += 2.0 * a;
        }
    }
    Ok(LossWithGradient {
        value,
        gradient: Image::from_vec(n, grad)?,
    })
}

/// All four components for one prediction.
pub fn loss_components(
    pred: &Image,
    truth: &Image,
    weights: &WeightMap,
    fx: &FeatureExtractor,
    data_range: f64,
) -> Result<LossComponents> {
    Ok(LossComponents {
        l_p: perceptual_loss(pred, truth, fx)?,
        l_s: ssim_loss(pred, truth, SSIM_WINDOW.min(pred.n()), data_range)?,
        l_e: edge_gradient_loss(pred, truth)?.value,
        l_a: anisotropic_loss(pred, truth, weights)?.value,
    })
}

/// Weighted total loss.
pub fn total_loss(
    pred: &Image,
    truth: &Image,
    weights: &WeightMap,
    fx: &FeatureExtractor,
    loss_weights: &LossWeights,
    data_range: f64,
) -> Result<f64> {
    loss_weights.validate()?;
    Ok(loss_weights.combine(&loss_components(pred, truth, weights, fx, data_range)?))
}
