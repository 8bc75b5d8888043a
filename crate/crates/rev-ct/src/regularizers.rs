//! Gradient estimators for the RED, REV, and simplified-REV regularizers.
//!
//! All estimators are dimension-preserving and apply the denoiser exactly
//! as given. Denoisers that assume a valid intensity range should be
//! wrapped in [`crate::denoise::ClampedDenoiser`], since solver iterates
//! can transiently exit the box between projection steps.

use serde::{Deserialize, Serialize};

use crate::denoise::Denoiser;
use crate::error::{Result, RevError};
use crate::image::Image;
use crate::transforms::{adjoint_rotate, rotate, AngleSampler, GroupSample, InterpMode};

/// REV regularizer configuration: weight, samples averaged per iteration,
/// and the rotation interpolation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevConfig {
    pub lambda: f64,
    pub num_samples: usize,
    pub mode: InterpMode,
}

impl RevConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(RevError::InvalidArgument(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.num_samples < 1 {
            return Err(RevError::InvalidArgument(
                "num_samples must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// RED gradient surrogate x - D(x).
pub fn red_gradient(x: &Image, denoiser: &dyn Denoiser) -> Result<Image> {
    let dx = denoiser.denoise(x)?;
    if !dx.same_shape(x) {
        return Err(RevError::shape(
            format!("{}x{}", x.width(), x.height()),
            format!("{}x{}", dx.width(), dx.height()),
        ));
    }
    if !dx.is_finite() {
        return Err(RevError::InvalidArgument(
            "denoiser produced non-finite output".into(),
        ));
    }
    x.axpby(1.0, &dx, -1.0)
}

/// Single-sample REV gradient surrogate x - T_g^* D(T_g x).
pub fn rev_gradient(x: &Image, denoiser: &dyn Denoiser, g: GroupSample) -> Result<Image> {
    let rotated = rotate(x, g.angle_deg, g.mode)?;
    let denoised = denoiser.denoise(&rotated)?;
    if !denoised.same_shape(x) {
        return Err(RevError::shape(
            format!("{}x{}", x.width(), x.height()),
            format!("{}x{}", denoised.width(), denoised.height()),
        ));
    }
    if !denoised.is_finite() {
        return Err(RevError::InvalidArgument(
            "denoiser produced non-finite output".into(),
        ));
    }
    let back = adjoint_rotate(&denoised, g.angle_deg, g.mode)?;
    x.axpby(1.0, &back, -1.0)
}

/// Average of `cfg.num_samples` single-sample REV gradients; advances the
/// sampler by exactly that many draws.
pub fn rev_gradient_averaged(
    x: &Image,
    denoiser: &dyn Denoiser,
    cfg: &RevConfig,
    sampler: &mut AngleSampler,
) -> Result<Image> {
    cfg.validate()?;
    let mut acc = Image::zeros(x.width(), x.height());
    for _ in 0..cfg.num_samples {
        let g = GroupSample {
            angle_deg: sampler.sample_angle(),
            mode: cfg.mode,
        };
        let grad = rev_gradient(x, denoiser, g)?;
        acc = acc.axpby(1.0, &grad, 1.0)?;
    }
    Ok(acc.scaled(1.0 / cfg.num_samples as f64))
}

/// Denoiser-free simplified-REV gradient x - T_g^* T_g x, nonzero only
/// because interpolated rotations are not exactly invertible.
pub fn simplified_rev_gradient(x: &Image, g: GroupSample) -> Result<Image> {
    let round_trip = adjoint_rotate(&rotate(x, g.angle_deg, g.mode)?, g.angle_deg, g.mode)?;
    x.axpby(1.0, &round_trip, -1.0)
}
