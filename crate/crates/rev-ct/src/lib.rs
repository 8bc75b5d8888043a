//! Sparse-view fan-beam CT reconstruction with equivariance-based
//! regularization.
//!
//! The crate simulates Beer-Lambert Poisson transmission measurements for a
//! fan-beam geometry and reconstructs with FISTA variants: plain projected
//! FISTA, FISTA-RED (regularization by denoising), FISTA-REV (the denoiser
//! conjugated by random image rotations), and the denoiser-free Simplified
//! FISTA-REV whose regularizing signal comes entirely from the
//! non-invertibility of interpolated rotations.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `revct` binary for the experiment CLI.

pub mod denoise;
pub mod error;
pub mod harness;
pub mod image;
pub mod io;
pub mod optimizer;
pub mod projector;
pub mod regularizers;
pub mod sim;
pub mod transforms;

pub use error::{Result, RevError};
pub use image::{dot, project_box, rmsd, shepp_logan, BoxConstraint, Image};
pub use projector::{back_project, forward_project, FanBeamGeometry, Sinogram};
