//! Forward-only reference implementations of the VSGC network blocks:
//! Sobel edge fusion, the Haar wavelet pair, wavelet convolution, the
//! encoder/decoder feature extractor, channel shuffle, top-k sparse attention
//! and the attention/convolution composite, plus the U-shaped refinement
//! stage built on it.
//!
//! Every parameter comes from a seeded initializer, so each forward pass is a
//! deterministic function of its input, seed and configuration.

pub mod attention;
pub mod edge;
pub mod layers;
pub mod mca;
pub mod shuffle;
pub mod tensor;
pub mod umca;
pub mod vswd;
pub mod wavelet;
pub mod wtconv;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use attention::{dense_attention, sparse_attention, topk_mask, Matrix};
pub use edge::sobel_edge_fuse;
pub use mca::{mca_forward, AttentionParams};
pub use shuffle::channel_shuffle;
pub use tensor::FeatureTensor;
pub use umca::{umca_forward, Umca};
pub use vswd::{vswd_forward, Vswd};
pub use wavelet::{dwt2, idwt2, Subbands};
pub use wtconv::{wtconv, KernelSet};

/// Number of encoding units in the feature extractor.
pub const ENCODER_DEPTH: usize = 3;

fn default_channels() -> usize {
    8
}

fn default_patch() -> usize {
    8
}

fn default_groups() -> usize {
    2
}

fn default_seed() -> u64 {
    2024
}

/// Shape and seed configuration shared by the network blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    /// Base channel width `c`; the encoder widens to `2c, 4c, 8c`.
    #[serde(default = "default_channels")]
    pub channels: usize,
    /// Side of the square patches that become attention tokens.
    #[serde(default = "default_patch")]
    pub patch: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Attention temperature λ; defaults to `√d_qk`.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub alpha_logits: [f64; 4],
    #[serde(default = "default_groups")]
    pub shuffle_groups: usize,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            channels: default_channels(),
            patch: default_patch(),
            seed: default_seed(),
            temperature: None,
            alpha_logits: [0.0; 4],
            shuffle_groups: default_groups(),
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::invalid("channel width must be at least 1"));
        }
        if self.patch == 0 {
            return Err(Error::invalid("patch size must be at least 1"));
        }
        if self.shuffle_groups == 0 {
            return Err(Error::invalid("shuffle groups must be at least 1"));
        }
        if let Some(t) = self.temperature {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid(format!("temperature must be positive, got {t}")));
            }
        }
        mca::normalize_logits(&self.alpha_logits)?;
        Ok(())
    }

    /// Image sides accepted by the full feature-extraction plus refinement
    /// pipeline: divisible by `2³` and, at the attention bottleneck (a
    /// quarter of the input side), by the patch size.
    pub fn check_dims(&self, h: usize, w: usize) -> Result<()> {
        let step = 1usize << ENCODER_DEPTH;
        if !h.is_multiple_of(step) || !w.is_multiple_of(step) {
            return Err(Error::invalid(format!("{h}x{w} is not divisible by {step}")));
        }
        if !(h / 4).is_multiple_of(self.patch) || !(w / 4).is_multiple_of(self.patch) {
            return Err(Error::invalid(format!(
                "{h}x{w} bottleneck ({}x{}) is not divisible by patch {}",
                h / 4,
                w / 4,
                self.patch
            )));
        }
        Ok(())
    }

    /// Seed for the refinement stage, distinct from the extractor's.
    pub(crate) fn umca_seed(&self) -> u64 {
        self.seed ^ 0x9E37_79B9_7F4A_7C15
    }
}
