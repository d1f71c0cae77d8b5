//! Run configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blocks::BlockConfig;
use crate::error::{Error, Result};
use crate::fbp::AngularRange;
use crate::io;
use crate::losses::{FeatureExtractor, LossWeights};
use crate::phantom::EllipsePhantom;
use crate::projector::Geometry;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LACT_OUT_DIR";
/// Output directory used when neither the command line, the config nor the
/// environment names one.
pub const DEFAULT_OUT_DIR: &str = "lact-out";

/// How `project` produces the sinogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectorMode {
    /// Exact ellipse line integrals.
    #[default]
    Analytic,
    /// Ray-driven projection of the rasterized phantom.
    Ray,
}

/// Feature extractor used by the perceptual loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptualConfig {
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_perceptual_seed")]
    pub seed: u64,
    /// Weight file replacing the seeded stages.
    #[serde(default)]
    pub weights: Option<PathBuf>,
}

fn default_width() -> usize {
    96
}

fn default_perceptual_seed() -> u64 {
    2024
}

impl Default for PerceptualConfig {
    fn default() -> Self {
        Self {
            width: default_width(),
            seed: default_perceptual_seed(),
            weights: None,
        }
    }
}

impl PerceptualConfig {
    pub fn extractor(&self) -> Result<FeatureExtractor> {
        match &self.weights {
            Some(path) => io::read_extractor(path),
            None => Ok(FeatureExtractor::red_cnn(self.width, self.seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in phantom name (`disk`, `shepp-logan`) or a phantom file.
    #[serde(default = "default_phantom")]
    pub phantom: String,
    /// Image side length.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_angles")]
    pub n_angles: usize,
    /// Detector bins; defaults to the smallest odd count covering the
    /// diagonal at one bin per pixel width.
    #[serde(default)]
    pub n_det: Option<usize>,
    /// Detector bin width in world units; defaults to the pixel width.
    #[serde(default)]
    pub det_pitch: Option<f64>,
    /// Scanned range in degrees.
    #[serde(default = "default_range")]
    pub range_deg: [f64; 2],
    #[serde(default)]
    pub projector: ProjectorMode,
    #[serde(default)]
    pub blocks: BlockConfig,
    #[serde(default)]
    pub loss_weights: LossWeights,
    #[serde(default)]
    pub perceptual: PerceptualConfig,
    /// Intensity range `L` used by PSNR and SSIM.
    #[serde(default = "default_data_range")]
    pub data_range: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_phantom() -> String {
    "disk".into()
}

fn default_n() -> usize {
    128
}

fn default_angles() -> usize {
    360
}

fn default_range() -> [f64; 2] {
    [0.0, 60.0]
}

fn default_data_range() -> f64 {
    1.0
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            phantom: default_phantom(),
            n: default_n(),
            n_angles: default_angles(),
            n_det: None,
            det_pitch: None,
            range_deg: default_range(),
            projector: ProjectorMode::default(),
            blocks: BlockConfig::default(),
            loss_weights: LossWeights::default(),
            perceptual: PerceptualConfig::default(),
            data_range: default_data_range(),
            out_dir: None,
        }
    }
}

impl RunConfig {
    /// Reads and validates a config file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if EllipsePhantom::builtin(&cfg.phantom).is_none() {
            cfg.phantom = base.join(&cfg.phantom).to_string_lossy().into_owned();
        }
        if let Some(w) = cfg.perceptual.weights.take() {
            cfg.perceptual.weights = Some(base.join(w));
        }
        if let Some(out) = cfg.out_dir.take() {
            cfg.out_dir = Some(base.join(out));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses `seed` for both the network blocks and the perceptual extractor.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.blocks.seed = seed;
        self.perceptual.seed = seed;
        self
    }

    pub fn with_range_deg(mut self, start: f64, end: f64) -> Result<Self> {
        AngularRange::from_degrees(start, end)?;
        self.range_deg = [start, end];
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::invalid(format!("image size must be at least 8, got {}", self.n)));
        }
        if !(self.data_range.is_finite() && self.data_range > 0.0) {
            return Err(Error::invalid("data_range must be positive"));
        }
        self.range()?;
        self.geometry()?;
        self.blocks.validate()?;
        self.loss_weights.validate()?;
        if self.perceptual.width == 0 {
            return Err(Error::invalid("perceptual width must be positive"));
        }
        for path in self.perceptual.weights.iter().map(PathBuf::as_path).chain(self.phantom_path()) {
            if !path.is_file() {
                return Err(Error::MissingInput { path: path.into() });
            }
        }
        Ok(())
    }

    fn phantom_path(&self) -> Option<&Path> {
        EllipsePhantom::builtin(&self.phantom).is_none().then(|| Path::new(&self.phantom))
    }

    pub fn range(&self) -> Result<AngularRange> {
        AngularRange::from_degrees(self.range_deg[0], self.range_deg[1])
    }

    pub fn phantom(&self) -> Result<EllipsePhantom> {
        match EllipsePhantom::builtin(&self.phantom) {
            Some(p) => Ok(p),
            None => io::read_phantom(Path::new(&self.phantom)),
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        match (self.n_det, self.det_pitch) {
            (None, None) => Geometry::for_image(self.n, self.n_angles),
            (n_det, pitch) => {
                let pitch = pitch.unwrap_or(2.0 / self.n as f64);
                let n_det = n_det.unwrap_or_else(|| {
                    let k = (2.0 * std::f64::consts::SQRT_2 / pitch).ceil() as usize + 1;
                    k | 1
                });
                Geometry::parallel(self.n_angles, n_det, pitch)
            }
        }
    }

    /// Output directory: `explicit`, else the config's, else the environment
    /// variable, else [`DEFAULT_OUT_DIR`].
    pub fn out_dir(&self, explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
