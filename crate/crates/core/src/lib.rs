//! Limited-angle CT toolkit: ellipse phantoms with exact sinograms, a
//! ray-driven projector, Ram-Lak filtered backprojection over full and
//! limited angular ranges, singularity visibility analysis, reference forward
//! passes of the VSGC network blocks, and the anisotropic loss suite.

pub mod blocks;
pub mod commands;
pub mod config;
pub mod error;
pub mod fbp;
pub mod image;
pub mod io;
pub mod kernels;
pub mod losses;
pub mod metrics;
pub mod par;
pub mod phantom;
pub mod projector;
pub mod visibility;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use fbp::{fbp_reconstruct, limited_fbp, ramlak_filter, AngularRange, FilteredSinogram};
pub use image::Image;
pub use losses::{total_loss, FeatureExtractor, LossComponents, LossWeights};
pub use metrics::{psnr, ssim, Psnr};
pub use phantom::{analytic_sinogram, rasterize, Ellipse, EllipsePhantom};
pub use projector::{back_project, forward_project, Geometry, Sinogram};
