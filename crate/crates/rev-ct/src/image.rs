//! Square image container, vector algebra, metrics, box projection and the
//! Shepp-Logan phantom.
//!
//! Pixel data is stored row-major in `f64`; every operation here keeps values
//! finite. Row-major vectorization order is the contract shared with the
//! dense-matrix oracle and the denoiser plugin protocol.

use crate::error::{Result, RevError};

/// Real-valued pixel grid holding attenuation values.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(RevError::InvalidArgument(
                "image dimensions must be positive".into(),
            ));
        }
        if data.len() != width * height {
            return Err(RevError::shape(
                format!("{} pixels", width * height),
                format!("{} pixels", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(RevError::InvalidArgument(
                "image contains non-finite pixels".into(),
            ));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Image {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn check_shape(&self, other: &Image) -> Result<()> {
        if !self.same_shape(other) {
            return Err(RevError::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    /// Elementwise a*self + b*other.
    pub fn axpby(&self, a: f64, other: &Image, b: f64) -> Result<Image> {
        self.check_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Image {
            width: self.width,
            height: self.height,
            data,
        })
    }

    pub fn scaled(&self, a: f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Pixel-value box constraint [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxConstraint {
    pub lo: f64,
    pub hi: f64,
}

impl BoxConstraint {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(RevError::InvalidArgument(format!(
                "invalid box constraint [{lo}, {hi}]"
            )));
        }
        Ok(BoxConstraint { lo, hi })
    }

    pub fn unit() -> Self {
        BoxConstraint { lo: 0.0, hi: 1.0 }
    }
}

/// Inner product sum_i x_i y_i.
pub fn dot(x: &Image, y: &Image) -> Result<f64> {
    x.check_shape(y)?;
    Ok(x.data.iter().zip(&y.data).map(|(a, b)| a * b).sum())
}

/// Root mean square distance ||x - ref||_2 / sqrt(d).
pub fn rmsd(x: &Image, reference: &Image) -> Result<f64> {
    x.check_shape(reference)?;
    let d = x.data.len() as f64;
    let ss: f64 = x
        .data
        .iter()
        .zip(&reference.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / d).sqrt())
}

/// Clamp every pixel into the box.
pub fn project_box(x: &Image, b: BoxConstraint) -> Image {
    Image {
        width: x.width,
        height: x.height,
        data: x.data.iter().map(|v| v.clamp(b.lo, b.hi)).collect(),
    }
}

// Standard 10-ellipse Shepp-Logan parameters:
// (x-center, y-center, half-axis a, half-axis b, rotation degrees, intensity)
// in the [-1, 1]^2 unit square, y pointing up.
const SHEPP_LOGAN_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.01),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
];

/// Rasterize the standard 10-ellipse Shepp-Logan phantom at n x n by
/// pixel-center ellipse membership, rescaled so values span [0, 1].
pub fn shepp_logan(n: usize) -> Result<Image> {
    if n < 8 {
        return Err(RevError::InvalidArgument(format!(
            "phantom size {n} too small (minimum 8)"
        )));
    }
    let mut data = vec![0.0; n * n];
    let scale = 2.0 / n as f64;
    for row in 0..n {
        // pixel centers mapped into [-1, 1]^2, y up
        let y = 1.0 - (row as f64 + 0.5) * scale;
        for col in 0..n {
            let x = (col as f64 + 0.5) * scale - 1.0;
            let mut v = 0.0;
            for &(cx, cy, a, b, theta_deg, intensity) in &SHEPP_LOGAN_ELLIPSES {
                let theta = theta_deg.to_radians();
                let (s, c) = theta.sin_cos();
                let dx = x - cx;
                let dy = y - cy;
                let xr = c * dx + s * dy;
                let yr = -s * dx + c * dy;
                if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
                    v += intensity;
                }
            }
            data[row * n + col] = v;
        }
    }
    let max = data.iter().cloned().fold(f64::MIN, f64::max);
    let min = data.iter().cloned().fold(f64::MAX, f64::min).min(0.0);
    let span = max - min;
    if span > 0.0 {
        for v in &mut data {
            *v = (*v - min) / span;
        }
    }
    Image::new(n, n, data)
}
