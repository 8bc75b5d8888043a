//! Fan-beam forward projector (Joseph's method), its matched adjoint, a
//! dense-matrix oracle for small geometries, and a power-method estimate of
//! the operator norm.
//!
//! Coordinates: the image is centered at the origin, x to the right, y up.
//! Pixel (row r, col c) has center ((c - (n-1)/2) * px, ((n-1)/2 - r) * px).
//! The source at view angle beta sits at radius `source_to_center`; the flat
//! detector line is perpendicular to the source-origin axis at distance
//! `center_to_detector` on the far side.

use rayon::prelude::*;

use crate::error::{Result, RevError};
use crate::image::Image;

/// Full parameterization of the fan-beam forward operator.
#[derive(Debug, Clone, PartialEq)]
pub struct FanBeamGeometry {
    pub image_size: usize,
    pub pixel_size: f64,
    pub num_views: usize,
    pub num_detectors: usize,
    pub source_to_center: f64,
    pub center_to_detector: f64,
    pub detector_spacing: f64,
    pub view_angles: Vec<f64>,
}

impl FanBeamGeometry {
    pub fn new(
        image_size: usize,
        pixel_size: f64,
        num_views: usize,
        num_detectors: usize,
        source_to_center: f64,
        center_to_detector: f64,
        detector_spacing: f64,
    ) -> Result<Self> {
        if image_size == 0 || num_views == 0 || num_detectors == 0 {
            return Err(RevError::InvalidArgument(
                "geometry dimensions must be positive".into(),
            ));
        }
        if source_to_center <= image_size as f64 * pixel_size / std::f64::consts::SQRT_2 {
            return Err(RevError::InvalidArgument(
                "source_to_center must place the source outside the image disk".into(),
            ));
        }
        if pixel_size <= 0.0 || detector_spacing <= 0.0 || center_to_detector < 0.0 {
            return Err(RevError::InvalidArgument(
                "geometry lengths must be positive".into(),
            ));
        }
        let view_angles = (0..num_views)
            .map(|v| 2.0 * std::f64::consts::PI * v as f64 / num_views as f64)
            .collect();
        Ok(FanBeamGeometry {
            image_size,
            pixel_size,
            num_views,
            num_detectors,
            source_to_center,
            center_to_detector,
            detector_spacing,
            view_angles,
        })
    }

    /// Default geometry: source 600, detector 600 (at 256 px), spacing sized
    /// so the fan covers the image diagonal with the given detector count.
    pub fn with_fan_covering_image(
        image_size: usize,
        pixel_size: f64,
        num_views: usize,
        num_detectors: usize,
    ) -> Result<Self> {
        let source_to_center = 600.0 * pixel_size * image_size as f64 / 256.0;
        let center_to_detector = source_to_center;
        let radius = image_size as f64 * pixel_size * std::f64::consts::SQRT_2 / 2.0;
        let gamma = (radius / source_to_center).asin();
        let half_width = (source_to_center + center_to_detector) * gamma.tan();
        let detector_spacing = 2.0 * half_width / num_detectors as f64;
        Self::new(
            image_size,
            pixel_size,
            num_views,
            num_detectors,
            source_to_center,
            center_to_detector,
            detector_spacing,
        )
    }

    /// Row count n of the implied matrix A.
    pub fn num_rays(&self) -> usize {
        self.num_views * self.num_detectors
    }

    /// Pixel count d.
    pub fn num_pixels(&self) -> usize {
        self.image_size * self.image_size
    }

    /// Source position and detector-cell position for one ray, in pixel
    /// units relative to the image center.
    fn ray_endpoints(&self, view: usize, det: usize) -> ([f64; 2], [f64; 2]) {
        let beta = self.view_angles[view];
        let (sb, cb) = beta.sin_cos();
        let rs = self.source_to_center / self.pixel_size;
        let rd = self.center_to_detector / self.pixel_size;
        let source = [rs * cb, rs * sb];
        // detector center is opposite the source; cells run along the
        // tangent direction (-sin beta, cos beta)
        let u = (det as f64 - (self.num_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
            / self.pixel_size;
        let det_pos = [-rd * cb - u * sb, -rd * sb + u * cb];
        (source, det_pos)
    }
}

/// Stack of projection measurements, view-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    num_views: usize,
    num_detectors: usize,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(num_views: usize, num_detectors: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_views * num_detectors {
            return Err(RevError::shape(
                format!("{} bins", num_views * num_detectors),
                format!("{} bins", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(RevError::InvalidArgument(
                "sinogram contains non-finite bins".into(),
            ));
        }
        Ok(Sinogram {
            num_views,
            num_detectors,
            data,
        })
    }

    pub fn zeros(num_views: usize, num_detectors: usize) -> Self {
        Sinogram {
            num_views,
            num_detectors,
            data: vec![0.0; num_views * num_detectors],
        }
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    pub fn num_detectors(&self) -> usize {
        self.num_detectors
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, view: usize, det: usize) -> f64 {
        self.data[view * self.num_detectors + det]
    }

    pub fn same_shape(&self, other: &Sinogram) -> bool {
        self.num_views == other.num_views && self.num_detectors == other.num_detectors
    }

    pub fn axpby(&self, a: f64, other: &Sinogram, b: f64) -> Result<Sinogram> {
        if !self.same_shape(other) {
            return Err(RevError::shape(
                format!("{}x{}", self.num_views, self.num_detectors),
                format!("{}x{}", other.num_views, other.num_detectors),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Sinogram {
            num_views: self.num_views,
            num_detectors: self.num_detectors,
            data,
        })
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Sinogram) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(RevError::shape(
                format!("{}x{}", self.num_views, self.num_detectors),
                format!("{}x{}", other.num_views, other.num_detectors),
            ));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }
}

fn check_image_shape(geom: &FanBeamGeometry, x: &Image) -> Result<()> {
    if x.width() != geom.image_size || x.height() != geom.image_size {
        return Err(RevError::shape(
            format!("{0}x{0}", geom.image_size),
            format!("{}x{}", x.width(), x.height()),
        ));
    }
    Ok(())
}

fn check_sino_shape(geom: &FanBeamGeometry, s: &Sinogram) -> Result<()> {
    if s.num_views != geom.num_views || s.num_detectors != geom.num_detectors {
        return Err(RevError::shape(
            format!("{}x{}", geom.num_views, geom.num_detectors),
            format!("{}x{}", s.num_views, s.num_detectors),
        ));
    }
    Ok(())
}

/// Joseph traversal of one ray. Calls `visit(pixel_index, weight)` for every
/// (pixel, interpolation weight * step length) pair; weights are nonnegative
/// and already carry the `pixel_size` length scale.
fn trace_ray(geom: &FanBeamGeometry, view: usize, det: usize, mut visit: impl FnMut(usize, f64)) {
    let n = geom.image_size;
    let cen = (n as f64 - 1.0) / 2.0;
    let (src, dst) = geom.ray_endpoints(view, det);
    let dx = dst[0] - src[0];
    let dy = dst[1] - src[1];
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return;
    }

    if dx.abs() >= dy.abs() {
        // x-driven: step over columns, interpolate across rows
        let step = geom.pixel_size * len / dx.abs();
        for col in 0..n {
            let xc = col as f64 - cen;
            let t = (xc - src[0]) / dx;
            let y = src[1] + t * dy;
            let rr = cen - y; // continuous row coordinate
            let r0 = rr.floor();
            let w1 = rr - r0;
            let w0 = 1.0 - w1;
            let r0i = r0 as isize;
            if r0i >= 0 && (r0i as usize) < n && w0 > 0.0 {
                visit(r0i as usize * n + col, step * w0);
            }
            let r1i = r0i + 1;
            if r1i >= 0 && (r1i as usize) < n && w1 > 0.0 {
                visit(r1i as usize * n + col, step * w1);
            }
        }
    } else {
        // y-driven: step over rows, interpolate across columns
        let step = geom.pixel_size * len / dy.abs();
        for row in 0..n {
            let yr = cen - row as f64;
            let t = (yr - src[1]) / dy;
            let x = src[0] + t * dx;
            let cc = x + cen; // continuous column coordinate
            let c0 = cc.floor();
            let w1 = cc - c0;
            let w0 = 1.0 - w1;
            let c0i = c0 as isize;
            if c0i >= 0 && (c0i as usize) < n && w0 > 0.0 {
                visit(row * n + c0i as usize, step * w0);
            }
            let c1i = c0i + 1;
            if c1i >= 0 && (c1i as usize) < n && w1 > 0.0 {
                visit(row * n + c1i as usize, step * w1);
            }
        }
    }
}

/// Apply A: ray integrals of `x` by Joseph's method, parallel over rays.
pub fn forward_project(geom: &FanBeamGeometry, x: &Image) -> Result<Sinogram> {
    check_image_shape(geom, x)?;
    let nd = geom.num_detectors;
    let pix = x.data();
    let data: Vec<f64> = (0..geom.num_rays())
        .into_par_iter()
        .map(|ray| {
            let (view, det) = (ray / nd, ray % nd);
            let mut acc = 0.0;
            trace_ray(geom, view, det, |idx, w| acc += w * pix[idx]);
            acc
        })
        .collect();
    Sinogram::new(geom.num_views, geom.num_detectors, data)
}

/// Apply A^T: exact transpose of `forward_project` (same Joseph weights,
/// scattered). Per-view partial images are summed in view order so the
/// result is bit-identical across thread counts.
pub fn back_project(geom: &FanBeamGeometry, s: &Sinogram) -> Result<Image> {
    check_sino_shape(geom, s)?;
    let n = geom.image_size;
    let partials: Vec<Vec<f64>> = (0..geom.num_views)
        .into_par_iter()
        .map(|view| {
            let mut img = vec![0.0; n * n];
            for det in 0..geom.num_detectors {
                let val = s.get(view, det);
                if val != 0.0 {
                    trace_ray(geom, view, det, |idx, w| img[idx] += w * val);
                }
            }
            img
        })
        .collect();
    let mut out = vec![0.0; n * n];
    for img in &partials {
        for (o, v) in out.iter_mut().zip(img) {
            *o += v;
        }
    }
    Image::new(n, n, out)
}

/// Materialize A (n x d) column by column from basis images. Test oracle
/// only; guarded against accidentally huge allocations.
pub fn dense_matrix(geom: &FanBeamGeometry) -> Result<Vec<Vec<f64>>> {
    let n = geom.num_rays();
    let d = geom.num_pixels();
    if n * d > 1 << 24 {
        return Err(RevError::InvalidArgument(format!(
            "dense matrix {n}x{d} exceeds the 2^24 entry guard"
        )));
    }
    let mut rows = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut basis = Image::zeros(geom.image_size, geom.image_size);
        basis.data_mut()[j] = 1.0;
        let col = forward_project(geom, &basis)?;
        for (i, v) in col.data().iter().enumerate() {
            rows[i][j] = *v;
        }
    }
    Ok(rows)
}

/// Power-method estimate of lambda_max(A^T A), deterministic given the seed.
/// Returns the Rayleigh quotient after `iters` iterations.
pub fn operator_norm_sq(geom: &FanBeamGeometry, iters: usize, seed: u64) -> Result<f64> {
    if iters < 10 {
        return Err(RevError::InvalidArgument(
            "power method needs at least 10 iterations".into(),
        ));
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = geom.image_size;
    let mut v = Image::new(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let mut estimate = 0.0;
    for _ in 0..iters {
        let norm = v.norm2();
        if norm == 0.0 {
            return Err(RevError::InvalidArgument(
                "power method start vector annihilated by A".into(),
            ));
        }
        v = v.scaled(1.0 / norm);
        let av = forward_project(geom, &v)?;
        // Rayleigh quotient ||Av||^2 / ||v||^2 with ||v|| = 1
        estimate = av.dot(&av)?;
        v = back_project(geom, &av)?;
    }
    Ok(estimate)
}
