//! The pipeline steps behind the command-line verbs. Each step reads its
//! inputs from the output directory, writes its artifacts there and returns
//! the paths it wrote.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blocks::{umca_forward, vswd_forward};
use crate::config::{ProjectorMode, RunConfig};
use crate::error::Result;
use crate::fbp::{fbp_reconstruct, limited_fbp, ramlak_filter};
use crate::io;
use crate::losses::{loss_components, LossComponents, LossWeights};
use crate::metrics::{psnr, ssim, SSIM_WINDOW};
use crate::phantom::{analytic_sinogram_on, rasterize};
use crate::projector::forward_project;
use crate::visibility::{
    boundary_gradient_report, classify_singularity, default_threshold, ellipse_boundary_samples,
    predicted_artifact_lines, weight_map, BoundaryGradientReport, VisibilityLabel,
};

pub const PHANTOM: &str = "phantom";
pub const ELLIPSES: &str = "phantom_ellipses.json";
pub const SINOGRAM: &str = "sinogram";
pub const SINOGRAM_CSV: &str = "sinogram.csv";
pub const FILTERED: &str = "filtered";
pub const RECON: &str = "recon";
pub const RECON_FULL: &str = "recon_full";
pub const LINES: &str = "artifact_lines.json";
pub const VISIBILITY: &str = "visibility.json";
pub const WEIGHTS: &str = "weights";
pub const FEATURES: &str = "vswd_features";
pub const NETWORK_OUT: &str = "network_out";
pub const LOSS: &str = "loss.json";
pub const METRICS: &str = "metrics.json";

/// Boundary samples checked per ellipse by `visibility`.
pub const BOUNDARY_SAMPLES: usize = 360;

/// Configuration plus the directory all artifacts live in.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, out: impl Into<PathBuf>) -> Self {
        Self {
            config,
            out: out.into(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn raw(&self, stem: &str, written: &mut Vec<PathBuf>) -> PathBuf {
        let p = self.path(stem);
        let (raw, meta) = io::raw_paths(&p);
        written.push(raw);
        written.push(meta);
        p
    }
}

fn with_preview(stem: &Path, written: &mut Vec<PathBuf>) {
    written.push(stem.with_extension("pgm"));
}

/// Rasterizes the phantom.
pub fn cmd_phantom(ctx: &Context) -> Result<Vec<PathBuf>> {
    let phantom = ctx.config.phantom()?;
    let img = rasterize(&phantom, ctx.config.n)?;
    let mut written = Vec::new();
    let stem = ctx.raw(PHANTOM, &mut written);
    io::write_image(&stem, &img)?;
    with_preview(&stem, &mut written);
    let ellipses = ctx.path(ELLIPSES);
    io::write_phantom(&ellipses, &phantom)?;
    written.push(ellipses);
    Ok(written)
}

/// Simulates the full-scan sinogram.
pub fn cmd_project(ctx: &Context) -> Result<Vec<PathBuf>> {
    let geometry = ctx.config.geometry()?;
    let sino = match ctx.config.projector {
        ProjectorMode::Analytic => analytic_sinogram_on(&ctx.config.phantom()?, &geometry),
        ProjectorMode::Ray => {
            let img = io::read_image(&ctx.path(PHANTOM))?;
            let step = img.pixel_size() / 2.0;
            forward_project(&img, &geometry, step)?
        }
    };
    let mut written = Vec::new();
    io::write_sinogram(&ctx.raw(SINOGRAM, &mut written), &sino)?;
    let csv = ctx.path(SINOGRAM_CSV);
    io::write_sinogram_csv(&csv, &sino)?;
    written.push(csv);
    Ok(written)
}

/// Ramp-filters the sinogram.
pub fn cmd_filter(ctx: &Context) -> Result<Vec<PathBuf>> {
    let sino = io::read_sinogram(&ctx.path(SINOGRAM))?;
    let filtered = ramlak_filter(&sino)?;
    let mut written = Vec::new();
    io::write_sinogram(&ctx.raw(FILTERED, &mut written), filtered.sinogram())?;
    Ok(written)
}

/// Reconstructs over the configured range and over the full scan.
pub fn cmd_recon(ctx: &Context) -> Result<Vec<PathBuf>> {
    let sino = io::read_sinogram(&ctx.path(SINOGRAM))?;
    let range = ctx.config.range()?;
    let n = ctx.config.n;
    let mut written = Vec::new();
    let stem = ctx.raw(RECON, &mut written);
    io::write_image(&stem, &limited_fbp(&sino, n, &range)?)?;
    with_preview(&stem, &mut written);
    let stem = ctx.raw(RECON_FULL, &mut written);
    io::write_image(&stem, &fbp_reconstruct(&sino, n)?)?;
    with_preview(&stem, &mut written);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub ellipse: usize,
    pub point: [f64; 2],
    pub normal_deg: f64,
    pub label: VisibilityLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityReport {
    pub range_deg: [f64; 2],
    pub visible: usize,
    pub invisible: usize,
    pub gradient: Option<BoundaryGradientReport>,
    pub gradient_ratio: Option<f64>,
    pub samples: Vec<SampleRecord>,
}

/// Labels boundary samples, predicts streak lines and measures edge
/// sharpness of the limited reconstruction on both classes.
pub fn cmd_visibility(ctx: &Context) -> Result<Vec<PathBuf>> {
    let phantom = ctx.config.phantom()?;
    let range = ctx.config.range()?;
    let mut samples = Vec::new();
    for (k, e) in phantom.ellipses.iter().enumerate() {
        for s in ellipse_boundary_samples(e, BOUNDARY_SAMPLES)? {
            samples.push(SampleRecord {
                ellipse: k,
                point: [s.point.0, s.point.1],
                normal_deg: s.normal_angle().to_degrees(),
                label: classify_singularity(s.normal, &range)?,
            });
        }
    }
    let lines = if range.is_limited() {
        predicted_artifact_lines(&phantom, &range)?
    } else {
        Vec::new()
    };
    let recon = io::read_image(&ctx.path(RECON))?;
    let gradient = match phantom.ellipses.len() {
        0 => None,
        _ => Some(boundary_gradient_report(&recon, &phantom, &range, BOUNDARY_SAMPLES)?),
    };
    let count = |l| samples.iter().filter(|s| s.label == l).count();
    let report = VisibilityReport {
        range_deg: ctx.config.range_deg,
        visible: count(VisibilityLabel::Visible),
        invisible: count(VisibilityLabel::Invisible),
        gradient_ratio: gradient.as_ref().map(|g| g.ratio()).filter(|r| r.is_finite()),
        gradient,
        samples,
    };
    let lines_path = ctx.path(LINES);
    io::write_lines(&lines_path, &lines)?;
    let report_path = ctx.path(VISIBILITY);
    io::write_json(&report_path, &report)?;
    Ok(vec![lines_path, report_path])
}

/// Anisotropic loss weights from the rasterized phantom.
pub fn cmd_weights(ctx: &Context) -> Result<Vec<PathBuf>> {
    let reference = io::read_image(&ctx.path(PHANTOM))?;
    let w = weight_map(&reference, &ctx.config.range()?, default_threshold(&reference))?;
    let mut written = Vec::new();
    let stem = ctx.raw(WEIGHTS, &mut written);
    io::write_weights(&stem, &w)?;
    with_preview(&stem, &mut written);
    Ok(written)
}

/// Runs the limited reconstruction through the encoder/decoder and the
/// attention refinement stage.
pub fn cmd_block_demo(ctx: &Context) -> Result<Vec<PathBuf>> {
    let recon = io::read_image(&ctx.path(RECON))?;
    let cfg = &ctx.config.blocks;
    let d1 = vswd_forward(&recon, cfg)?;
    let out = umca_forward(&d1, cfg)?;
    let mut written = Vec::new();
    io::write_tensor(&ctx.raw(FEATURES, &mut written), &d1)?;
    let stem = ctx.raw(NETWORK_OUT, &mut written);
    io::write_image(&stem, &out)?;
    with_preview(&stem, &mut written);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_p: f64,
    pub l_a: f64,
    pub l_s: f64,
    pub l_e: f64,
    pub total: f64,
    pub weights: LossWeights,
}

/// Loss terms of the limited reconstruction against the phantom.
pub fn cmd_loss(ctx: &Context) -> Result<Vec<PathBuf>> {
    let truth = io::read_image(&ctx.path(PHANTOM))?;
    let pred = io::read_image(&ctx.path(RECON))?;
    let w = io::read_weights(&ctx.path(WEIGHTS))?;
    let fx = ctx.config.perceptual.extractor()?;
    let c: LossComponents = loss_components(&pred, &truth, &w, &fx, ctx.config.data_range)?;
    let weights = ctx.config.loss_weights;
    let report = LossReport {
        l_p: c.l_p,
        l_a: c.l_a,
        l_s: c.l_s,
        l_e: c.l_e,
        total: weights.combine(&c),
        weights,
    };
    let path = ctx.path(LOSS);
    io::write_json(&path, &report)?;
    Ok(vec![path])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub range_deg: [f64; 2],
    pub psnr_db: f64,
    pub psnr_capped: bool,
    pub ssim: f64,
    pub full_psnr_db: f64,
    pub full_psnr_capped: bool,
    pub full_ssim: f64,
    pub l_p: f64,
    pub l_a: f64,
    pub l_s: f64,
    pub l_e: f64,
    pub total: f64,
}

/// PSNR and SSIM of the limited and full reconstructions, merged with the
/// loss report.
pub fn cmd_metrics(ctx: &Context) -> Result<Vec<PathBuf>> {
    let truth = io::read_image(&ctx.path(PHANTOM))?;
    let limited = io::read_image(&ctx.path(RECON))?;
    let full = io::read_image(&ctx.path(RECON_FULL))?;
    let loss: LossReport = io::read_json(&ctx.path(LOSS))?;
    let l = ctx.config.data_range;
    let window = SSIM_WINDOW.min(truth.n());
    let p = psnr(&limited, &truth, l)?;
    let pf = psnr(&full, &truth, l)?;
    let report = MetricsReport {
        range_deg: ctx.config.range_deg,
        psnr_db: p.db,
        psnr_capped: p.capped,
        ssim: ssim(&limited, &truth, window, l)?,
        full_psnr_db: pf.db,
        full_psnr_capped: pf.capped,
        full_ssim: ssim(&full, &truth, window, l)?,
        l_p: loss.l_p,
        l_a: loss.l_a,
        l_s: loss.l_s,
        l_e: loss.l_e,
        total: loss.total,
    };
    let path = ctx.path(METRICS);
    io::write_json(&path, &report)?;
    Ok(vec![path])
}

type Step = fn(&Context) -> Result<Vec<PathBuf>>;

/// Every step in dependency order.
pub fn cmd_pipeline(ctx: &Context) -> Result<Vec<PathBuf>> {
    let steps: [Step; 9] = [
        cmd_phantom,
        cmd_project,
        cmd_filter,
        cmd_recon,
        cmd_visibility,
        cmd_weights,
        cmd_block_demo,
        cmd_loss,
        cmd_metrics,
    ];
    let mut written = Vec::new();
    for step in steps {
        written.extend(step(ctx)?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn small() -> RunConfig {
        let mut cfg = RunConfig {
            n: 32,
            n_angles: 60,
            ..RunConfig::default()
        };
        cfg.perceptual.width = 4;
        cfg.blocks.channels = 2;
        cfg.blocks.patch = 4;
        cfg
    }

    #[test]
    fn pipeline_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context::new(small(), dir.path());
        let written = cmd_pipeline(&ctx).unwrap();
        for p in &written {
            assert!(p.is_file(), "{} missing", p.display());
        }
        let m: MetricsReport = io::read_json(&ctx.path(METRICS)).unwrap();
        assert!(m.full_psnr_db > m.psnr_db);
    }

    #[test]
    fn missing_upstream_input() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context::new(small(), dir.path());
        assert!(matches!(cmd_recon(&ctx), Err(Error::MissingInput { .. })));
    }
}
