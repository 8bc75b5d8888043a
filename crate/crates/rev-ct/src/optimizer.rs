//! FISTA driver with pluggable regularizer gradient: plain FISTA, FISTA-RED,
//! FISTA-REV, and Simplified FISTA-REV are configurations of one loop.
//!
//! Per iteration:
//!   x_{k+1} = P[y_k - eta (grad f(y_k) + lambda * reg_grad(y_k))]
//!   a_{k+1} = (1 + sqrt(1 + 4 a_k^2)) / 2
//!   y_{k+1} = x_{k+1} + ((a_k - 1) / a_{k+1}) (x_{k+1} - x_k)

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::denoise::Denoiser;
use crate::error::{Result, RevError};
use crate::image::{dot, project_box, rmsd, BoxConstraint, Image};
use crate::projector::{back_project, forward_project, FanBeamGeometry, Sinogram};
use crate::regularizers::{rev_gradient, simplified_rev_gradient, red_gradient, RevConfig};
use crate::transforms::{AngleSampler, GroupSample};

/// Which regularizer gradient the loop applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    None,
    Red,
    Rev,
    SimplifiedRev,
}

/// Starting point for the iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitKind {
    #[default]
    Zero,
    /// A^T b scaled so its peak hits the top of the box, then clamped.
    ScaledBackProjection,
    Custom(Image),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step_size: f64,
    pub lambda: f64,
    pub max_iters: usize,
    pub box_constraint: BoxConstraint,
    pub reg_kind: RegKind,
    pub rev: RevConfig,
    pub seed: u64,
    pub init: InitKind,
    /// When set, the angle sampler cycles through these angles instead of
    /// drawing from the seeded generator. Diagnostics/tests only.
    pub forced_angles: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(RevError::InvalidArgument(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(RevError::InvalidArgument(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.max_iters < 1 {
            return Err(RevError::InvalidArgument(
                "max_iters must be at least 1".into(),
            ));
        }
        if matches!(self.reg_kind, RegKind::Rev | RegKind::SimplifiedRev) {
            self.rev.validate()?;
        }
        Ok(())
    }
}

/// Per-iteration record: the state of x_k before the k-th update.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// RMSD to ground truth, present only when a ground truth was supplied.
    pub rmsd: Option<f64>,
    /// Data-consistency value f(A x_k, b) = ||A x_k - b||^2 / (2n).
    pub data_fit: f64,
    /// Monte-Carlo REV diagnostic: mean over the iteration's samples of
    /// dot(y_k, gradient term). Zero for angle-free runs.
    pub rev_value: f64,
    pub time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
    pub final_image: Image,
}

/// Gradient of the least-squares data fit: (1/n) A^T (A x - b).
pub fn data_fit_gradient(geom: &FanBeamGeometry, x: &Image, b: &Sinogram) -> Result<Image> {
    let residual = forward_project(geom, x)?.axpby(1.0, b, -1.0)?;
    let grad = back_project(geom, &residual)?;
    Ok(grad.scaled(1.0 / geom.num_rays() as f64))
}

/// Data-consistency value f(Ax, b) = ||Ax - b||^2 / (2n).
pub fn data_fit_value(geom: &FanBeamGeometry, x: &Image, b: &Sinogram) -> Result<f64> {
    let residual = forward_project(geom, x)?.axpby(1.0, b, -1.0)?;
    let norm = residual.norm2();
    Ok(norm * norm / (2.0 * geom.num_rays() as f64))
}

/// Nesterov momentum update a_{k+1} = (1 + sqrt(1 + 4 a_k^2)) / 2.
pub fn momentum_next(a_k: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * a_k * a_k).sqrt()) / 2.0
}

const DIVERGENCE_GUARD: f64 = 1e6;

fn initial_image(geom: &FanBeamGeometry, b: &Sinogram, cfg: &SolverConfig) -> Result<Image> {
    match &cfg.init {
        InitKind::Zero => Ok(Image::zeros(geom.image_size, geom.image_size)),
        InitKind::ScaledBackProjection => {
            let bp = back_project(geom, b)?;
            let peak = bp.max_abs();
            let scaled = if peak > 0.0 {
                bp.scaled(cfg.box_constraint.hi / peak)
            } else {
                bp
            };
            Ok(project_box(&scaled, cfg.box_constraint))
        }
        InitKind::Custom(img) => {
            if img.width() != geom.image_size || img.height() != geom.image_size {
                return Err(RevError::shape(
                    format!("{0}x{0}", geom.image_size),
                    format!("{}x{}", img.width(), img.height()),
                ));
            }
            Ok(img.clone())
        }
    }
}

/// Run the configured FISTA variant for `cfg.max_iters` iterations.
/// Deterministic given (cfg, inputs, seed) and independent of thread count.
pub fn run(
    geom: &FanBeamGeometry,
    b: &Sinogram,
    cfg: &SolverConfig,
    denoiser: Option<&dyn Denoiser>,
    ground_truth: Option<&Image>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    match cfg.reg_kind {
        RegKind::Red | RegKind::Rev if denoiser.is_none() => {
            return Err(RevError::InvalidArgument(format!(
                "reg_kind {:?} requires a denoiser",
                cfg.reg_kind
            )));
        }
        RegKind::SimplifiedRev if denoiser.is_some() => {
            return Err(RevError::InvalidArgument(
                "simplified_rev does not take a denoiser".into(),
            ));
        }
        _ => {}
    }
    if let Some(gt) = ground_truth {
        if gt.width() != geom.image_size || gt.height() != geom.image_size {
            return Err(RevError::shape(
                format!("{0}x{0}", geom.image_size),
                format!("{}x{}", gt.width(), gt.height()),
            ));
        }
    }

    let mut sampler = match &cfg.forced_angles {
        Some(angles) => AngleSampler::fixed(angles.clone()),
        None => AngleSampler::new(cfg.seed),
    };
    let mut x = initial_image(geom, b, cfg)?;
    let mut y = x.clone();
    let mut a_k = 1.0f64;
    let mut rows = Vec::with_capacity(cfg.max_iters);

    for k in 0..cfg.max_iters {
        let started = Instant::now();
        let iter_rmsd = match ground_truth {
            Some(gt) => Some(rmsd(&x, gt)?),
            None => None,
        };
        let fit = data_fit_value(geom, &x, b)?;

        let grad_f = data_fit_gradient(geom, &y, b)?;
        let mut rev_value = 0.0;
        let reg_grad = match cfg.reg_kind {
            RegKind::None => None,
            RegKind::Red => {
                let g = red_gradient(&y, denoiser.unwrap())?;
                rev_value = dot(&y, &g)?;
                Some(g)
            }
            RegKind::Rev => {
                let m = cfg.rev.num_samples;
                let mut acc = Image::zeros(geom.image_size, geom.image_size);
                let mut diag = 0.0;
                for _ in 0..m {
                    let g = GroupSample {
                        angle_deg: sampler.sample_angle(),
                        mode: cfg.rev.mode,
                    };
                    let grad = rev_gradient(&y, denoiser.unwrap(), g)?;
                    diag += dot(&y, &grad)?;
                    acc = acc.axpby(1.0, &grad, 1.0)?;
                }
                rev_value = diag / m as f64;
                Some(acc.scaled(1.0 / m as f64))
            }
            RegKind::SimplifiedRev => {
                let m = cfg.rev.num_samples;
                let mut acc = Image::zeros(geom.image_size, geom.image_size);
                let mut diag = 0.0;
                for _ in 0..m {
                    let g = GroupSample {
                        angle_deg: sampler.sample_angle(),
                        mode: cfg.rev.mode,
                    };
                    let grad = simplified_rev_gradient(&y, g)?;
                    diag += dot(&y, &grad)?;
                    acc = acc.axpby(1.0, &grad, 1.0)?;
                }
                rev_value = diag / m as f64;
                Some(acc.scaled(1.0 / m as f64))
            }
        };

        let mut step = y.axpby(1.0, &grad_f, -cfg.step_size)?;
        if let Some(reg) = reg_grad {
            step = step.axpby(1.0, &reg, -cfg.step_size * cfg.lambda)?;
        }
        if !step.is_finite() || step.max_abs() > DIVERGENCE_GUARD {
            return Err(RevError::Divergence {
                iteration: k,
                guard: DIVERGENCE_GUARD,
            });
        }
        let x_next = project_box(&step, cfg.box_constraint);

        let a_next = momentum_next(a_k);
        let beta = (a_k - 1.0) / a_next;
        let diff = x_next.axpby(1.0, &x, -1.0)?;
        y = x_next.axpby(1.0, &diff, beta)?;
        x = x_next;
        a_k = a_next;

        rows.push(TraceRow {
            iteration: k,
            rmsd: iter_rmsd,
            data_fit: fit,
            rev_value,
            time_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(SolverTrace {
        rows,
        final_image: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::IdentityDenoiser;
    use crate::image::dot;
    use crate::projector::dense_matrix;
    use crate::transforms::InterpMode;
    use rand::{Rng, SeedableRng};

    fn small_geom(n: usize, views: usize, dets: usize) -> FanBeamGeometry {
        FanBeamGeometry::with_fan_covering_image(n, 1.0, views, dets).unwrap()
    }

    fn rand_image(n: usize, seed: u64) -> Image {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Image::new(n, n, (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    fn base_config(step: f64, iters: usize) -> SolverConfig {
        SolverConfig {
            step_size: step,
            lambda: 0.0,
            max_iters: iters,
            box_constraint: BoxConstraint::new(-10.0, 10.0).unwrap(),
            reg_kind: RegKind::None,
            rev: RevConfig {
                lambda: 0.0,
                num_samples: 1,
                mode: InterpMode::Bilinear,
            },
            seed: 0,
            init: InitKind::Zero,
            forced_angles: None,
        }
    }

    #[test]
    fn momentum_first_step_is_golden_ratio() {
        let a1 = momentum_next(1.0);
        assert!((a1 - (1.0 + 5.0f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn momentum_algebraic_identity_chain() {
        let mut a = 1.0;
        for _ in 0..1000 {
            let next = momentum_next(a);
            assert!((next * next - next - a * a).abs() < 1e-12 * (a * a).max(1.0));
            a = next;
        }
    }

    #[test]
    fn momentum_after_100_steps_matches_frozen_value() {
        let mut a = 1.0f64;
        for _ in 0..100 {
            a = momentum_next(a);
        }
        // frozen from an independent 50-digit evaluation of the recurrence
        let expected = 51.98425845355497;
        assert!((a - expected).abs() < 1e-10, "a_100 = {a:.15}");
    }

    #[test]
    fn momentum_growth_lower_bound() {
        let mut a = 1.0;
        for k in 0..500 {
            a = momentum_next(a);
            assert!(a >= (k as f64 + 3.0) / 2.0 - 1e-12, "a_{} = {a}", k + 1);
        }
    }

    #[test]
    fn data_fit_gradient_zero_at_solution() {
        let geom = small_geom(8, 16, 16);
        let x = rand_image(8, 1);
        let b = forward_project(&geom, &x).unwrap();
        let g = data_fit_gradient(&geom, &x, &b).unwrap();
        assert!(g.max_abs() < 1e-12);
    }

    #[test]
    fn data_fit_gradient_matches_dense_normal_matrix() {
        let geom = small_geom(16, 8, 16);
        let a = dense_matrix(&geom).unwrap();
        let x = rand_image(16, 2);
        let b = Sinogram::zeros(8, 16);
        let g = data_fit_gradient(&geom, &x, &b).unwrap();
        let n = geom.num_rays() as f64;
        let ax: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(x.data()).map(|(p, q)| p * q).sum())
            .collect();
        for j in 0..geom.num_pixels() {
            let expected: f64 = a.iter().zip(&ax).map(|(row, v)| row[j] * v).sum::<f64>() / n;
            assert!(
                (g.data()[j] - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "pixel {j}"
            );
        }
    }

    #[test]
    fn data_fit_gradient_matches_finite_differences() {
        let geom = small_geom(32, 10, 24);
        let x = rand_image(32, 3);
        let b = forward_project(&geom, &rand_image(32, 4)).unwrap();
        let g = data_fit_gradient(&geom, &x, &b).unwrap();
        let eps = 1e-5;
        for dir_seed in 0..5u64 {
            let dir = {
                let raw = rand_image(32, 100 + dir_seed);
                raw.scaled(1.0 / raw.norm2())
            };
            let xp = x.axpby(1.0, &dir, eps).unwrap();
            let xm = x.axpby(1.0, &dir, -eps).unwrap();
            let fd = (data_fit_value(&geom, &xp, &b).unwrap()
                - data_fit_value(&geom, &xm, &b).unwrap())
                / (2.0 * eps);
            let analytic = dot(&g, &dir).unwrap();
            assert!(
                (fd - analytic).abs() <= 1e-5 * analytic.abs().max(1e-8),
                "dir {dir_seed}: fd {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn plain_fista_reaches_least_squares_solution() {
        // tiny overdetermined noiseless system
        let geom = small_geom(8, 16, 16);
        let truth = rand_image(8, 5).scaled(0.5);
        let b = forward_project(&geom, &truth).unwrap();
        let lam_max = crate::projector::operator_norm_sq(&geom, 100, 1).unwrap();
        let n = geom.num_rays() as f64;
        let mut cfg = base_config(n / lam_max, 3000);
        cfg.box_constraint = BoxConstraint::new(-10.0, 10.0).unwrap();
        let trace = run(&geom, &b, &cfg, None, Some(&truth)).unwrap();

        // dense least-squares oracle via normal equations (Gauss elimination)
        let a = dense_matrix(&geom).unwrap();
        let d = geom.num_pixels();
        let mut normal = vec![vec![0.0; d + 1]; d];
        for (row, &bv) in a.iter().zip(b.data()) {
            for i in 0..d {
                if row[i] != 0.0 {
                    for j in 0..d {
                        normal[i][j] += row[i] * row[j];
                    }
                    normal[i][d] += row[i] * bv;
                }
            }
        }
        for i in 0..d {
            let mut piv = i;
            for r in i + 1..d {
                if normal[r][i].abs() > normal[piv][i].abs() {
                    piv = r;
                }
            }
            normal.swap(i, piv);
            let p = normal[i][i];
            assert!(p.abs() > 1e-10, "normal matrix singular at {i}");
            for r in 0..d {
                if r != i {
                    let f = normal[r][i] / p;
                    for c in i..=d {
                        normal[r][c] -= f * normal[i][c];
                    }
                }
            }
        }
        let ls: Vec<f64> = (0..d).map(|i| normal[i][d] / normal[i][i]).collect();
        let ls_img = Image::new(8, 8, ls).unwrap();
        let err = rmsd(&trace.final_image, &ls_img).unwrap();
        assert!(err < 1e-4, "distance to least-squares solution: {err}");
    }

    #[test]
    fn single_step_matches_hand_composition() {
        let geom = small_geom(8, 4, 8);
        let b = forward_project(&geom, &rand_image(8, 6)).unwrap();
        let mut cfg = base_config(0.5, 1);
        cfg.box_constraint = BoxConstraint::unit();
        let trace = run(&geom, &b, &cfg, None, None).unwrap();
        let x0 = Image::zeros(8, 8);
        let g = data_fit_gradient(&geom, &x0, &b).unwrap();
        let expected = project_box(&g.scaled(-0.5), cfg.box_constraint);
        assert_eq!(trace.final_image, expected);
    }

    #[test]
    fn rev_with_identity_denoiser_grid_aligned_matches_plain() {
        // identity denoiser + grid-aligned angles make the REV term vanish
        // identically, so the trajectory must match reg_kind None bit-exactly
        let geom = small_geom(8, 4, 8);
        let b = forward_project(&geom, &rand_image(8, 7)).unwrap();
        let mut plain = base_config(0.5, 20);
        plain.box_constraint = BoxConstraint::unit();
        let mut rev = plain.clone();
        rev.reg_kind = RegKind::Rev;
        rev.lambda = 0.8;
        rev.rev = RevConfig {
            lambda: 0.8,
            num_samples: 1,
            mode: InterpMode::Bilinear,
        };
        rev.forced_angles = Some(vec![90.0, 180.0, 270.0]);
        let t1 = run(&geom, &b, &plain, None, None).unwrap();
        let t2 = run(&geom, &b, &rev, Some(&IdentityDenoiser), None).unwrap();
        assert_eq!(t1.final_image, t2.final_image);
        for (a, b) in t1.rows.iter().zip(&t2.rows) {
            assert_eq!(a.data_fit, b.data_fit);
        }
    }

    #[test]
    fn iterates_stay_in_box() {
        let geom = small_geom(8, 4, 8);
        let truth = rand_image(8, 8);
        let b = forward_project(&geom, &truth).unwrap();
        let mut cfg = base_config(2.0, 50);
        cfg.box_constraint = BoxConstraint::unit();
        let trace = run(&geom, &b, &cfg, None, Some(&truth)).unwrap();
        assert_eq!(trace.rows.len(), 50);
        for &v in trace.final_image.data() {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn determinism_across_runs() {
        let geom = small_geom(8, 4, 8);
        let b = forward_project(&geom, &rand_image(8, 9)).unwrap();
        let mut cfg = base_config(0.5, 30);
        cfg.reg_kind = RegKind::SimplifiedRev;
        cfg.lambda = 0.5;
        cfg.box_constraint = BoxConstraint::unit();
        cfg.rev = RevConfig {
            lambda: 0.5,
            num_samples: 2,
            mode: InterpMode::Bicubic,
        };
        cfg.seed = 77;
        let t1 = run(&geom, &b, &cfg, None, None).unwrap();
        let t2 = run(&geom, &b, &cfg, None, None).unwrap();
        assert_eq!(t1.final_image, t2.final_image);
        for (a, b) in t1.rows.iter().zip(&t2.rows) {
            assert_eq!(a.data_fit, b.data_fit);
            assert_eq!(a.rev_value, b.rev_value);
        }
    }

    #[test]
    fn red_path_never_touches_transforms() {
        let geom = small_geom(8, 4, 8);
        let b = forward_project(&geom, &rand_image(8, 10)).unwrap();
        let mut cfg = base_config(0.5, 10);
        cfg.reg_kind = RegKind::Red;
        cfg.lambda = 0.1;
        cfg.box_constraint = BoxConstraint::unit();
        let before = crate::transforms::rotation_call_count();
        run(&geom, &b, &cfg, Some(&IdentityDenoiser), None).unwrap();
        assert_eq!(crate::transforms::rotation_call_count(), before);
    }

    #[test]
    fn data_fit_decreases_from_start() {
        let geom = small_geom(16, 8, 16);
        let truth = rand_image(16, 11).scaled(0.8);
        let b = forward_project(&geom, &truth).unwrap();
        let lam_max = crate::projector::operator_norm_sq(&geom, 100, 2).unwrap();
        let n = geom.num_rays() as f64;
        let mut cfg = base_config(n / lam_max, 200);
        cfg.box_constraint = BoxConstraint::unit();
        let trace = run(&geom, &b, &cfg, None, None).unwrap();
        assert!(trace.rows[199].data_fit < trace.rows[0].data_fit);
    }

    #[test]
    fn divergence_reported_with_iteration() {
        let geom = small_geom(8, 4, 8);
        let b = forward_project(&geom, &rand_image(8, 12).scaled(10.0)).unwrap();
        let mut cfg = base_config(1e9, 100);
        cfg.box_constraint = BoxConstraint::new(-1e9, 1e9).unwrap();
        match run(&geom, &b, &cfg, None, None) {
            Err(RevError::Divergence { iteration, .. }) => assert!(iteration < 100),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_consistency_enforced() {
        let geom = small_geom(8, 4, 8);
        let b = Sinogram::zeros(4, 8);
        let mut cfg = base_config(0.5, 5);
        cfg.reg_kind = RegKind::Red;
        assert!(run(&geom, &b, &cfg, None, None).is_err());
        cfg.reg_kind = RegKind::SimplifiedRev;
        assert!(run(&geom, &b, &cfg, Some(&IdentityDenoiser), None).is_err());
    }
}
