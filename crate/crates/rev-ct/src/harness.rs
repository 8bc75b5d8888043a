//! Experiment harness: config parsing, measurement simulation, single-run
//! reconstruction, and multi-run comparison with CSV metrics output.
//!
//! Every output directory receives a manifest.toml holding the fully
//! resolved configuration, sufficient to re-run the experiment with no
//! external state.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::denoise::{ClampedDenoiser, Denoiser, ExternalDenoiser, GaussianDenoiser, NlmDenoiser};
use crate::error::{Result, RevError};
use crate::image::{shepp_logan, BoxConstraint, Image};
use crate::io;
use crate::optimizer::{run, InitKind, RegKind, SolverConfig, SolverTrace};
use crate::projector::{forward_project, operator_norm_sq, FanBeamGeometry, Sinogram};
use crate::regularizers::RevConfig;
use crate::sim::{log_linearize, simulate_counts, DoseModel};
use crate::transforms::InterpMode;

fn default_pixel_size() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub image_size: usize,
    #[serde(default = "default_pixel_size")]
    pub pixel_size_mm: f64,
    pub num_views: usize,
    pub num_detectors: usize,
    /// Absent distances default to the fan-covering geometry.
    pub source_to_center_mm: Option<f64>,
    pub center_to_detector_mm: Option<f64>,
    pub detector_spacing_mm: Option<f64>,
}

impl GeometryConfig {
    pub fn build(&self) -> Result<FanBeamGeometry> {
        match (
            self.source_to_center_mm,
            self.center_to_detector_mm,
            self.detector_spacing_mm,
        ) {
            (Some(s), Some(c), Some(d)) => FanBeamGeometry::new(
                self.image_size,
                self.pixel_size_mm,
                self.num_views,
                self.num_detectors,
                s,
                c,
                d,
            ),
            (None, None, None) => FanBeamGeometry::with_fan_covering_image(
                self.image_size,
                self.pixel_size_mm,
                self.num_views,
                self.num_detectors,
            ),
            _ => Err(RevError::Config(
                "geometry distances must be either all present or all absent".into(),
            )),
        }
    }

    /// Same geometry with all defaults made explicit, for the manifest.
    pub fn resolved(&self) -> Result<GeometryConfig> {
        let geom = self.build()?;
        Ok(GeometryConfig {
            image_size: geom.image_size,
            pixel_size_mm: geom.pixel_size,
            num_views: geom.num_views,
            num_detectors: geom.num_detectors,
            source_to_center_mm: Some(geom.source_to_center),
            center_to_detector_mm: Some(geom.center_to_detector),
            detector_spacing_mm: Some(geom.detector_spacing),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomConfig {
    SheppLogan { size: usize },
    Raw { path: PathBuf },
}

impl PhantomConfig {
    pub fn load(&self) -> Result<Image> {
        match self {
            PhantomConfig::SheppLogan { size } => shepp_logan(*size),
            PhantomConfig::Raw { path } => io::read_image_raw(path),
        }
    }
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserSpec {
    Gaussian {
        sigma: f64,
    },
    Nlm {
        patch: usize,
        window: usize,
        h: f64,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

impl DenoiserSpec {
    pub fn build(&self) -> Result<Box<dyn Denoiser>> {
        Ok(match self {
            DenoiserSpec::Gaussian { sigma } => {
                Box::new(ClampedDenoiser::new(GaussianDenoiser::new(*sigma)?))
            }
            DenoiserSpec::Nlm { patch, window, h } => {
                Box::new(ClampedDenoiser::new(NlmDenoiser::new(*patch, *window, *h)?))
            }
            DenoiserSpec::External {
                command,
                timeout_secs,
            } => Box::new(ClampedDenoiser::new(ExternalDenoiser::new(
                command.clone(),
                Duration::from_secs(*timeout_secs),
            )?)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    #[default]
    Zero,
    ScaledBackProjection,
}

fn default_num_samples() -> usize {
    1
}

fn default_interp() -> InterpMode {
    InterpMode::Bicubic
}

fn default_box_hi() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub label: String,
    pub reg_kind: RegKind,
    #[serde(default)]
    pub lambda: f64,
    pub max_iters: usize,
    /// Absent = n / (lambda_max(A^T A) + lambda) from a seeded power method.
    pub step_size: Option<f64>,
    #[serde(default)]
    pub box_lo: f64,
    #[serde(default = "default_box_hi")]
    pub box_hi: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    #[serde(default = "default_interp")]
    pub interp: InterpMode,
    #[serde(default)]
    pub init: InitConfig,
    pub denoiser: Option<DenoiserSpec>,
}

impl RunConfig {
    pub fn solver_config(&self, geom: &FanBeamGeometry) -> Result<SolverConfig> {
        let step_size = match self.step_size {
            Some(s) => s,
            None => default_step_size(geom, self.lambda)?,
        };
        Ok(SolverConfig {
            step_size,
            lambda: self.lambda,
            max_iters: self.max_iters,
            box_constraint: BoxConstraint::new(self.box_lo, self.box_hi)?,
            reg_kind: self.reg_kind,
            rev: RevConfig {
                lambda: self.lambda,
                num_samples: self.num_samples,
                mode: self.interp,
            },
            seed: self.seed,
            init: match self.init {
                InitConfig::Zero => InitKind::Zero,
                InitConfig::ScaledBackProjection => InitKind::ScaledBackProjection,
            },
            forced_angles: None,
        })
    }
}

/// Default step size n / (lambda_max(A^T A) + lambda).
pub fn default_step_size(geom: &FanBeamGeometry, lambda: f64) -> Result<f64> {
    let lam_max = operator_norm_sq(geom, 100, 0)?;
    Ok(geom.num_rays() as f64 / (lam_max + lambda))
}

fn default_count_floor() -> f64 {
    1.0
}

/// Everything needed to rerun an experiment bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// RMSD threshold for iterations-to-threshold; absent = 1.5x the best
    /// final RMSD across runs.
    pub rmsd_threshold: Option<f64>,
    /// Pre-log zero-count correction, flagged here so it is auditable.
    #[serde(default = "default_count_floor")]
    pub pre_log_count_floor: f64,
    pub geometry: GeometryConfig,
    pub phantom: PhantomConfig,
    pub dose: DoseModel,
    pub runs: Vec<RunConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| RevError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut labels = HashSet::new();
        for run in &self.runs {
            if !labels.insert(&run.label) {
                return Err(RevError::Config(format!(
                    "duplicate run label '{}'",
                    run.label
                )));
            }
        }
        if let PhantomConfig::Raw { path } = &self.phantom {
            if !path.exists() {
                return Err(RevError::Config(format!(
                    "phantom file {} does not exist",
                    path.display()
                )));
            }
        }
        self.geometry.build()?;
        DoseModel::new(
            self.dose.i0_mantissa,
            self.dose.i0_exponent,
            self.dose.seed,
            self.dose.noiseless,
        )?;
        Ok(())
    }

    /// Config with all defaults made explicit; this is what the manifest
    /// stores and it round-trips through the parser to an equal value.
    pub fn resolved(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.clone();
        cfg.geometry = self.geometry.resolved()?;
        let geom = cfg.geometry.build()?;
        for run in &mut cfg.runs {
            if run.step_size.is_none() {
                run.step_size = Some(default_step_size(&geom, run.lambda)?);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| RevError::Config(e.to_string()))
    }

    /// Override every seed in the config (dose and all runs).
    pub fn override_seed(&mut self, seed: u64) {
        self.dose.seed = seed;
        for run in &mut self.runs {
            run.seed = seed;
        }
    }
}

fn write_manifest(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let resolved = cfg.resolved()?;
    fs::write(dir.join("manifest.toml"), resolved.to_toml()?)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.17e}"),
        None => String::new(),
    }
}

/// Write one run's per-iteration metrics CSV.
pub fn write_metrics_csv(path: &Path, trace: &SolverTrace, zero_time: bool) -> Result<()> {
    let mut out = String::from("iter,rmsd,data_fit,rev_value,time_ms\n");
    for row in &trace.rows {
        let time = if zero_time { 0.0 } else { row.time_ms };
        out.push_str(&format!(
            "{},{},{:.17e},{:.17e},{:.3}\n",
            row.iteration,
            fmt_opt(row.rmsd),
            row.data_fit,
            row.rev_value,
            time
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub struct SimulatedInputs {
    pub geom: FanBeamGeometry,
    pub phantom: Image,
    pub clean: Sinogram,
    pub counts: Sinogram,
    pub measurements: Sinogram,
}

/// Simulate measurements in memory: phantom -> clean sinogram -> counts ->
/// linearized measurements.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulatedInputs> {
    let geom = cfg.geometry.build()?;
    let phantom = cfg.phantom.load()?;
    if phantom.width() != geom.image_size || phantom.height() != geom.image_size {
        return Err(RevError::Config(format!(
            "phantom is {}x{} but geometry expects {}",
            phantom.width(),
            phantom.height(),
            geom.image_size
        )));
    }
    let clean = forward_project(&geom, &phantom)?;
    let counts = simulate_counts(&geom, &phantom, &cfg.dose)?;
    let measurements = log_linearize(&counts, &cfg.dose)?;
    Ok(SimulatedInputs {
        geom,
        phantom,
        clean,
        counts,
        measurements,
    })
}

/// `simulate` subcommand: write phantom, clean sinogram, noisy counts,
/// linearized measurements, and the manifest.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    let sim = simulate(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    io::write_image_raw(dir.join("phantom.revi"), &sim.phantom)?;
    io::write_image_png(dir.join("phantom.png"), &sim.phantom, 0.0, 1.0)?;
    io::write_sinogram_raw(dir.join("sinogram_clean.revs"), &sim.clean)?;
    io::write_sinogram_raw(dir.join("counts.revs"), &sim.counts)?;
    io::write_sinogram_raw(dir.join("measurements.revs"), &sim.measurements)?;
    write_manifest(cfg, dir)?;
    Ok(())
}

fn run_one(
    cfg: &ExperimentConfig,
    geom: &FanBeamGeometry,
    measurements: &Sinogram,
    phantom: &Image,
    run_cfg: &RunConfig,
) -> Result<SolverTrace> {
    let solver_cfg = run_cfg.solver_config(geom)?;
    let denoiser = match &run_cfg.denoiser {
        Some(spec) => Some(spec.build()?),
        None => None,
    };
    let _ = cfg;
    run(
        geom,
        measurements,
        &solver_cfg,
        denoiser.as_deref(),
        Some(phantom),
    )
}

fn write_run_outputs(
    dir: &Path,
    label: &str,
    trace: &SolverTrace,
    box_lo: f64,
    box_hi: f64,
    zero_time: bool,
) -> Result<()> {
    let run_dir = dir.join(label);
    fs::create_dir_all(&run_dir)?;
    io::write_image_raw(run_dir.join("final.revi"), &trace.final_image)?;
    io::write_image_png(run_dir.join("final.png"), &trace.final_image, box_lo, box_hi)?;
    write_metrics_csv(&run_dir.join("metrics.csv"), trace, zero_time)?;
    Ok(())
}

/// `reconstruct` subcommand: run one labelled configuration against inputs
/// previously written by `simulate`.
pub fn cmd_reconstruct(cfg: &ExperimentConfig, label: &str, zero_time: bool) -> Result<()> {
    let run_cfg = cfg
        .runs
        .iter()
        .find(|r| r.label == label)
        .ok_or_else(|| RevError::Config(format!("no run labelled '{label}'")))?;
    let dir = &cfg.output_dir;
    let phantom = io::read_image_raw(dir.join("phantom.revi"))?;
    let measurements = io::read_sinogram_raw(dir.join("measurements.revs"))?;
    let geom = cfg.geometry.build()?;
    let trace = run_one(cfg, &geom, &measurements, &phantom, run_cfg)?;
    write_run_outputs(
        dir,
        label,
        &trace,
        run_cfg.box_lo,
        run_cfg.box_hi,
        zero_time,
    )?;
    Ok(())
}

pub struct RunSummary {
    pub label: String,
    pub final_rmsd: f64,
    pub iters_to_threshold: Option<usize>,
}

pub struct CompareOutcome {
    pub threshold: f64,
    pub summaries: Vec<RunSummary>,
    pub traces: Vec<(String, SolverTrace)>,
}

/// Execute all configured runs against one shared simulated measurement set.
/// Failed runs are reported and skipped; the first failure is returned
/// alongside the partial outcome so callers can keep partial results.
pub fn compare_partial(cfg: &ExperimentConfig) -> Result<(CompareOutcome, Option<RevError>)> {
    if cfg.runs.len() < 2 {
        return Err(RevError::Config(
            "compare needs at least two configured runs".into(),
        ));
    }
    let sim = simulate(cfg)?;
    let mut traces = Vec::new();
    let mut first_error: Option<RevError> = None;
    for run_cfg in &cfg.runs {
        match run_one(cfg, &sim.geom, &sim.measurements, &sim.phantom, run_cfg) {
            Ok(trace) => traces.push((run_cfg.label.clone(), trace)),
            Err(e) => {
                eprintln!("run '{}' failed: {e}", run_cfg.label);
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    if traces.is_empty() {
        return Err(first_error.expect("at least one run must have executed"));
    }

    let finals: Vec<f64> = traces
        .iter()
        .map(|(_, t)| t.rows.last().and_then(|r| r.rmsd).unwrap_or(f64::NAN))
        .collect();
    let best = finals.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = cfg.rmsd_threshold.unwrap_or(1.5 * best);
    let summaries = traces
        .iter()
        .zip(&finals)
        .map(|((label, trace), &final_rmsd)| RunSummary {
            label: label.clone(),
            final_rmsd,
            iters_to_threshold: iterations_to_threshold(trace, threshold),
        })
        .collect();
    let outcome = CompareOutcome {
        threshold,
        summaries,
        traces,
    };
    Ok((outcome, first_error))
}

/// As `compare_partial`, but any per-run failure is an error.
pub fn compare(cfg: &ExperimentConfig) -> Result<CompareOutcome> {
    let (outcome, err) = compare_partial(cfg)?;
    match err {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

/// First iteration whose recorded RMSD is at or below the threshold.
pub fn iterations_to_threshold(trace: &SolverTrace, threshold: f64) -> Option<usize> {
    trace
        .rows
        .iter()
        .find(|r| r.rmsd.is_some_and(|v| v <= threshold))
        .map(|r| r.iteration)
}

/// `compare` subcommand: run everything, write per-run outputs plus a
/// combined long-format CSV and a summary table.
pub fn cmd_compare(cfg: &ExperimentConfig, zero_time: bool) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)?;
    // keep the simulation inputs on disk alongside the comparison
    cmd_simulate(cfg)?;
    let (outcome, err) = compare_partial(cfg)?;
    write_compare_outputs(cfg, &outcome, zero_time)?;
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn write_compare_outputs(
    cfg: &ExperimentConfig,
    outcome: &CompareOutcome,
    zero_time: bool,
) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut combined = String::from("label,iter,rmsd,data_fit,rev_value,time_ms\n");
    for (label, trace) in &outcome.traces {
        let run_cfg = cfg.runs.iter().find(|r| &r.label == label).unwrap();
        write_run_outputs(dir, label, trace, run_cfg.box_lo, run_cfg.box_hi, zero_time)?;
        for row in &trace.rows {
            let time = if zero_time { 0.0 } else { row.time_ms };
            combined.push_str(&format!(
                "{},{},{},{:.17e},{:.17e},{:.3}\n",
                label,
                row.iteration,
                fmt_opt(row.rmsd),
                row.data_fit,
                row.rev_value,
                time
            ));
        }
    }
    fs::write(dir.join("combined.csv"), combined)?;

    let mut summary = String::from("label,final_rmsd,iters_to_threshold,threshold\n");
    for s in &outcome.summaries {
        summary.push_str(&format!(
            "{},{:.17e},{},{:.17e}\n",
            s.label,
            s.final_rmsd,
            s.iters_to_threshold
                .map(|v| v.to_string())
                .unwrap_or_default(),
            outcome.threshold
        ));
    }
    fs::write(dir.join("summary.csv"), summary)?;
    Ok(())
}
