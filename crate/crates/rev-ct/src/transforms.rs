//! Group actions: image rotations with interpolation, their approximate
//! adjoints (rotation by the negated angle), and the deterministic angle
//! sampler driving the solver.
//!
//! Rotation is counterclockwise about the pixel-coordinate center
//! ((n-1)/2, (n-1)/2) with crop semantics: output dimensions equal input
//! dimensions and out-of-support reads are zero.

use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RevError};
use crate::image::Image;

/// Resampling kernel used by `rotate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpMode {
    Nearest,
    Bilinear,
    Bicubic,
}

impl FromStr for InterpMode {
    type Err = RevError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(InterpMode::Nearest),
            "bilinear" => Ok(InterpMode::Bilinear),
            "bicubic" => Ok(InterpMode::Bicubic),
            other => Err(RevError::InvalidArgument(format!(
                "unknown interpolation mode '{other}'"
            ))),
        }
    }
}

/// One sampled group element: a rotation angle plus its interpolation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSample {
    pub angle_deg: f64,
    pub mode: InterpMode,
}

/// Deterministic uniform sampler over rotation angles in the open
/// interval (0, 360). Single-owner: one sampler per solver run.
#[derive(Debug, Clone)]
pub struct AngleSampler {
    rng: ChaCha8Rng,
    seed: u64,
    forced: Option<(Vec<f64>, usize)>,
}

impl AngleSampler {
    pub fn new(seed: u64) -> Self {
        AngleSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            forced: None,
        }
    }

    /// Sampler that cycles through a fixed angle list instead of drawing
    /// randomly. Used by diagnostics and tests that need controlled angles.
    pub fn fixed(angles: Vec<f64>) -> Self {
        assert!(!angles.is_empty(), "fixed sampler needs at least one angle");
        AngleSampler {
            rng: ChaCha8Rng::seed_from_u64(0),
            seed: 0,
            forced: Some((angles, 0)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw strictly inside (0, 360), or the next forced angle.
    pub fn sample_angle(&mut self) -> f64 {
        if let Some((angles, pos)) = &mut self.forced {
            let a = angles[*pos % angles.len()];
            *pos += 1;
            return a;
        }
        loop {
            let a: f64 = self.rng.gen_range(0.0..360.0);
            if a > 0.0 {
                return a;
            }
        }
    }
}

static ROTATE_CALLS: AtomicU64 = AtomicU64::new(0);

/// Total number of `rotate`/`adjoint_rotate` invocations since process start.
/// Used by tests to assert that angle-free solver paths never touch this
/// module.
pub fn rotation_call_count() -> u64 {
    ROTATE_CALLS.load(Ordering::Relaxed)
}

#[inline]
fn sample_nearest(x: &Image, rr: f64, cc: f64) -> f64 {
    let n = x.width() as isize;
    let r = rr.round() as isize;
    let c = cc.round() as isize;
    if r >= 0 && r < n && c >= 0 && c < n {
        x.get(r as usize, c as usize)
    } else {
        0.0
    }
}

#[inline]
fn pixel_or_zero(x: &Image, r: isize, c: isize) -> f64 {
    let n = x.width() as isize;
    if r >= 0 && r < n && c >= 0 && c < n {
        x.get(r as usize, c as usize)
    } else {
        0.0
    }
}

#[inline]
fn sample_bilinear(x: &Image, rr: f64, cc: f64) -> f64 {
    let r0 = rr.floor();
    let c0 = cc.floor();
    let fr = rr - r0;
    let fc = cc - c0;
    let (r0, c0) = (r0 as isize, c0 as isize);
    let v00 = pixel_or_zero(x, r0, c0);
    let v01 = pixel_or_zero(x, r0, c0 + 1);
    let v10 = pixel_or_zero(x, r0 + 1, c0);
    let v11 = pixel_or_zero(x, r0 + 1, c0 + 1);
    (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) + fr * ((1.0 - fc) * v10 + fc * v11)
}

// Keys cubic convolution kernel with a = -0.5.
#[inline]
fn keys_kernel(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t < 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

#[inline]
fn sample_bicubic(x: &Image, rr: f64, cc: f64) -> f64 {
    let r0 = rr.floor() as isize;
    let c0 = cc.floor() as isize;
    let mut acc = 0.0;
    for dr in -1..=2 {
        let wr = keys_kernel(rr - (r0 + dr) as f64);
        if wr == 0.0 {
            continue;
        }
        for dc in -1..=2 {
            let wc = keys_kernel(cc - (c0 + dc) as f64);
            if wc != 0.0 {
                acc += wr * wc * pixel_or_zero(x, r0 + dr, c0 + dc);
            }
        }
    }
    acc
}

/// Rotate counterclockwise by `angle_deg` about the image center,
/// resampling with the given kernel. Output has the input's dimensions.
pub fn rotate(x: &Image, angle_deg: f64, mode: InterpMode) -> Result<Image> {
    if !x.is_square() {
        return Err(RevError::InvalidArgument(format!(
            "rotate requires a square image, got {}x{}",
            x.width(),
            x.height()
        )));
    }
    if !angle_deg.is_finite() {
        return Err(RevError::InvalidArgument("non-finite angle".into()));
    }
    ROTATE_CALLS.fetch_add(1, Ordering::Relaxed);

    let n = x.width();
    // exact grid permutations for multiples of 90 degrees, independent of
    // the kernel, so round trips at these angles are the identity
    let quarter = angle_deg.rem_euclid(360.0);
    if quarter == 0.0 {
        return Ok(x.clone());
    }
    if quarter == 90.0 || quarter == 180.0 || quarter == 270.0 {
        let mut out = Image::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                // CCW mapping in (col, row-up) coordinates
                let (sr, sc) = match quarter as u32 {
                    90 => (c, n - 1 - r),
                    180 => (n - 1 - r, n - 1 - c),
                    _ => (n - 1 - c, r),
                };
                out.set(r, c, x.get(sr, sc));
            }
        }
        return Ok(out);
    }

    let cen = (n as f64 - 1.0) / 2.0;
    let theta = angle_deg.to_radians();
    let (s, c) = theta.sin_cos();
    let sampler: fn(&Image, f64, f64) -> f64 = match mode {
        InterpMode::Nearest => sample_nearest,
        InterpMode::Bilinear => sample_bilinear,
        InterpMode::Bicubic => sample_bicubic,
    };

    let mut out = Image::zeros(n, n);
    out.data_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(row, chunk)| {
            let yo = cen - row as f64;
            for (col, v) in chunk.iter_mut().enumerate() {
                let xo = col as f64 - cen;
                // inverse rotation of the output coordinate
                let xi = c * xo + s * yo;
                let yi = -s * xo + c * yo;
                let rr = cen - yi;
                let cc = xi + cen;
                *v = sampler(x, rr, cc);
            }
        });
    Ok(out)
}

/// Approximate adjoint of `rotate`: rotation by the negated angle with the
/// same kernel.
pub fn adjoint_rotate(x: &Image, angle_deg: f64, mode: InterpMode) -> Result<Image> {
    rotate(x, -angle_deg, mode)
}
