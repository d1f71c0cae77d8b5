//! Multi-scale top-k sparse attention fused with a channel-shuffled
//! convolution branch.

use super::attention::{sparse_attention, Matrix};
use super::layers::{Conv2d, Conv3d, Padding, ParamInit};
use super::shuffle::channel_shuffle;
use super::{BlockConfig, FeatureTensor};
use crate::error::{Error, Result};

/// Upper bound on the query/key projection width.
const MAX_QK_WIDTH: usize = 64;

/// Sparsity levels `{⌊N/2⌋, ⌊2N/3⌋, ⌊3N/4⌋, ⌊4N/5⌋}`, each at least 1.
pub fn k_set(tokens: usize) -> [usize; 4] {
    [(1, 2), (2, 3), (3, 4), (4, 5)].map(|(num, den)| (num * tokens / den).max(1))
}

/// Parameters of one attention block over `channels`-wide feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub channels: usize,
    pub temperature: f64,
    pub alpha_logits: [f64; 4],
    /// Token projections, `D × d_qk` for queries/keys and `D × D` for values,
    /// with token width `D = channels · p²`.
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
    pub conv2: Conv2d,
    pub conv3: Conv3d,
    pub shuffle_groups: usize,
}

impl AttentionParams {
    pub fn new(channels: usize, cfg: &BlockConfig, init: &mut ParamInit) -> Result<Self> {
        let token_width = channels * cfg.patch * cfg.patch;
        let qk = token_width.min(MAX_QK_WIDTH);
        let temperature = cfg.temperature.unwrap_or((qk as f64).sqrt());
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
        }
        let groups = if channels.is_multiple_of(cfg.shuffle_groups) {
            cfg.shuffle_groups
        } else {
            1
        };
        let query = Matrix::from_vec(token_width, qk, init.uniform(token_width * qk, token_width))?;
        let key = Matrix::from_vec(token_width, qk, init.uniform(token_width * qk, token_width))?;
        let value = Matrix::from_vec(
            token_width,
            token_width,
            init.uniform(token_width * token_width, token_width),
        )?;
        let conv2 = Conv2d::new(channels, channels, 3, 1, Padding::Replicate, init);
        let conv3 = Conv3d::new(channels, 3, 3, init);
        let params = Self {
            channels,
            temperature,
            alpha_logits: cfg.alpha_logits,
            query,
            key,
            value,
            conv2,
            conv3,
            shuffle_groups: groups,
        };
        params.fusion_weights()?;
        Ok(params)
    }

    /// Normalized fusion weights `α_k = exp(ℓ_k) / Σ exp(ℓ_j)`.
    pub fn fusion_weights(&self) -> Result<[f64; 4]> {
        normalize_logits(&self.alpha_logits)
    }

    /// Sets the logits so that the normalized weights equal `alpha`
    /// (zero weights become `−∞` logits).
    pub fn set_fusion_weights(&mut self, alpha: [f64; 4]) -> Result<()> {
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) || alpha.iter().all(|a| *a == 0.0) {
            return Err(Error::invalid("fusion weights must be non-negative with a positive sum"));
        }
        self.alpha_logits = alpha.map(f64::ln);
        Ok(())
    }

    pub fn zero_conv_branch(&mut self) {
        self.conv2.zero_out();
        self.conv3.zero_out();
    }

    pub fn zero_value_projection(&mut self) {
        self.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Softmax normalization of four logits.
pub fn normalize_logits(logits: &[f64; 4]) -> Result<[f64; 4]> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() || logits.iter().any(|l| l.is_nan()) {
        return Err(Error::invalid("fusion logits need at least one finite entry and no NaN"));
    }
    let e = logits.map(|l| (l - max).exp());
    let total: f64 = e.iter().sum();
    Ok(e.map(|v| v / total))
}

/// Splits a `(C, H, W)` map into non-overlapping `p × p` patches, one token
/// per patch in row-major patch order, features ordered `(c, u, v)`.
pub fn tokenize(x: &FeatureTensor, patch: usize) -> Result<Matrix> {
    let (c, h, w) = x.shape();
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::invalid(format!("{h}x{w} is not divisible into {patch}x{patch} patches")));
    }
    let (ph, pw) = (h / patch, w / patch);
    let width = c * patch * patch;
    let mut data = Vec::with_capacity(ph * pw * width);
    for ti in 0..ph {
        for tj in 0..pw {
            for ch in 0..c {
                for u in 0..patch {
                    for v in 0..patch {
                        data.push(x.get(ch, ti * patch + u, tj * patch + v));
                    }
                }
            }
        }
    }
    Matrix::from_vec(ph * pw, width, data)
}

/// Inverse of [`tokenize`].
pub fn detokenize(tokens: &Matrix, channels: usize, height: usize, width: usize, patch: usize) -> Result<FeatureTensor> {
    let (ph, pw) = (height / patch, width / patch);
    if tokens.rows() != ph * pw || tokens.cols() != channels * patch * patch {
        return Err(Error::shape(
            format!("{}x{}", ph * pw, channels * patch * patch),
            format!("{}x{}", tokens.rows(), tokens.cols()),
        ));
    }
    let mut out = FeatureTensor::zeros(channels, height, width);
    for ti in 0..ph {
        for tj in 0..pw {
            let row = tokens.row(ti * pw + tj);
            let mut f = 0;
            for ch in 0..channels {
                for u in 0..patch {
                    for v in 0..patch {
                        out.set(ch, ti * patch + u, tj * patch + v, row[f]);
                        f += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The four fused sparse attentions, before de-tokenization.
pub fn fused_attention(x: &FeatureTensor, params: &AttentionParams, cfg: &BlockConfig) -> Result<Matrix> {
    let tokens = tokenize(x, cfg.patch)?;
    if tokens.cols() != params.query.rows() {
        return Err(Error::shape(
            format!("token width {}", params.query.rows()),
            tokens.cols(),
        ));
    }
    let q = tokens.matmul(&params.query)?;
    let k = tokens.matmul(&params.key)?;
    let v = tokens.matmul(&params.value)?;
    let alpha = params.fusion_weights()?;
    let mut fused = Matrix::zeros(v.rows(), v.cols());
    for (level, weight) in k_set(tokens.rows()).into_iter().zip(alpha) {
        let attn = sparse_attention(&q, &k, &v, level, params.temperature)?;
        for (f, a) in fused.data_mut().iter_mut().zip(attn.data()) {
            *f += weight * a;
        }
    }
    Ok(fused)
}

/// `Σ_k α_k Softmax(M_k ⊙ QKᵀ/λ) V`, de-tokenized, plus
/// `Conv₃(CS(Conv₂(X)))`. Output shape equals input shape.
pub fn mca_forward(x: &FeatureTensor, params: &AttentionParams, cfg: &BlockConfig) -> Result<FeatureTensor> {
    let (c, h, w) = x.shape();
    if c != params.channels {
        return Err(Error::shape(format!("{} channels", params.channels), c));
    }
    let fused = fused_attention(x, params, cfg)?;
    let global = detokenize(&fused, c, h, w, cfg.patch)?;
    let local = params
        .conv3
        .forward(&channel_shuffle(&params.conv2.forward(x)?, params.shuffle_groups)?)?;
    global.add(&local)
}
