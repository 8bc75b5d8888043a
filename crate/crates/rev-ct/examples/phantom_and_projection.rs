//! Generate a Shepp-Logan phantom, forward-project it through a sparse-view
//! fan-beam geometry, and write both to disk.

use rev_ct::{forward_project, io, shepp_logan, FanBeamGeometry};

fn main() -> rev_ct::Result<()> {
    let out = std::path::Path::new("examples_out/phantom_and_projection");
    std::fs::create_dir_all(out)?;

    let phantom = shepp_logan(256)?;
    let geom = FanBeamGeometry::with_fan_covering_image(256, 1.0, 60, 228)?;
    let sinogram = forward_project(&geom, &phantom)?;

    io::write_image_raw(out.join("phantom.revi"), &phantom)?;
    io::write_image_png(out.join("phantom.png"), &phantom, 0.0, 1.0)?;
    io::write_sinogram_raw(out.join("sinogram.revs"), &sinogram)?;

    let peak = sinogram.data().iter().cloned().fold(0.0f64, f64::max);
    println!(
        "projected {} views x {} detectors, peak line integral {peak:.3}",
        sinogram.num_views(),
        sinogram.num_detectors()
    );
    println!("outputs in {}", out.display());
    Ok(())
}
