//! Drive an external denoiser over the REVD subprocess protocol. `cat` is a
//! valid identity plugin because the protocol is one frame in, one frame
//! out over the standard streams.

use rev_ct::denoise::{Denoiser, ExternalDenoiser};
use rev_ct::shepp_logan;

fn main() -> rev_ct::Result<()> {
    let plugin = ExternalDenoiser::with_default_timeout(vec!["cat".into()])?;
    let x = shepp_logan(64)?;
    let y = plugin.denoise(&x)?;
    assert_eq!(x, y);
    println!(
        "identity plugin round-tripped a {}x{} image bit-exactly",
        x.width(),
        x.height()
    );
    Ok(())
}
