//! FISTA-REV versus FISTA-RED with a shared non-local-means denoiser at low
//! dose. The only difference between the two runs is the random rotation
//! wrapped around the denoiser.

use rev_ct::denoise::{ClampedDenoiser, NlmDenoiser};
use rev_ct::harness::default_step_size;
use rev_ct::optimizer::{run, InitKind, RegKind, SolverConfig};
use rev_ct::regularizers::RevConfig;
use rev_ct::sim::{log_linearize, simulate_counts, DoseModel};
use rev_ct::transforms::InterpMode;
use rev_ct::{shepp_logan, BoxConstraint, FanBeamGeometry};

fn main() -> rev_ct::Result<()> {
    let n = 64;
    let phantom = shepp_logan(n)?;
    let geom = FanBeamGeometry::with_fan_covering_image(n, 1.0, 20, 64)?;
    let dose = DoseModel::new(2.0, 3.5, 3, false)?;
    let b = log_linearize(&simulate_counts(&geom, &phantom, &dose)?, &dose)?;

    let lambda = 0.3;
    let base = SolverConfig {
        step_size: default_step_size(&geom, lambda)?,
        lambda,
        max_iters: 200,
        box_constraint: BoxConstraint::unit(),
        reg_kind: RegKind::Red,
        rev: RevConfig {
            lambda,
            num_samples: 1,
            mode: InterpMode::Bicubic,
        },
        seed: 5,
        init: InitKind::Zero,
        forced_angles: None,
    };

    let denoiser = ClampedDenoiser::new(NlmDenoiser::new(3, 9, 0.6)?);
    let red = run(&geom, &b, &base, Some(&denoiser), Some(&phantom))?;

    let mut rev_cfg = base.clone();
    rev_cfg.reg_kind = RegKind::Rev;
    let rev = run(&geom, &b, &rev_cfg, Some(&denoiser), Some(&phantom))?;

    println!("iter    RED rmsd    REV rmsd");
    for k in (0..200).step_by(40) {
        println!(
            "{k:>4}    {:.5}     {:.5}",
            red.rows[k].rmsd.unwrap(),
            rev.rows[k].rmsd.unwrap()
        );
    }
    println!(
        "final   {:.5}     {:.5}",
        red.rows.last().unwrap().rmsd.unwrap(),
        rev.rows.last().unwrap().rmsd.unwrap()
    );
    Ok(())
}
