//! Plain projected FISTA on a sparse-view problem: reconstruct a 64x64
//! phantom from 20 noisy views and print the RMSD trajectory.

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
    let dose = DoseModel::new(2.0, 7.5, 1, false)?;
    let b = log_linearize(&simulate_counts(&geom, &phantom, &dose)?, &dose)?;

    let cfg = SolverConfig {
        step_size: default_step_size(&geom, 0.0)?,
        lambda: 0.0,
        max_iters: 300,
        box_constraint: BoxConstraint::unit(),
        reg_kind: RegKind::None,
        rev: RevConfig {
            lambda: 0.0,
            num_samples: 1,
            mode: InterpMode::Bicubic,
        },
        seed: 1,
        init: InitKind::Zero,
        forced_angles: None,
    };
    let trace = run(&geom, &b, &cfg, None, Some(&phantom))?;
    for row in trace.rows.iter().step_by(50) {
        println!(
            "iter {:>4}: rmsd {:.5}, data fit {:.3e}",
            row.iteration,
            row.rmsd.unwrap(),
            row.data_fit
        );
    }
    let last = trace.rows.last().unwrap();
    println!("final: rmsd {:.5}", last.rmsd.unwrap());
    Ok(())
}
