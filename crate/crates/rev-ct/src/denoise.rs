//! Denoiser abstraction plus the built-in Gaussian and non-local-means
//! denoisers and the external subprocess plugin.
//!
//! Plugin wire protocol (both directions): magic "REVD", u32-LE width,
//! u32-LE height, f64-LE pixels row-major. One request frame and one
//! response frame per call over the subprocess's standard streams.

use std::io::{Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;

use crate::error::{Result, RevError};
use crate::image::Image;

/// An opaque Image -> Image mapping with a descriptive name.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, x: &Image) -> Result<Image>;

    fn name(&self) -> &str;

    /// Human-readable parameter record for manifests and logs.
    fn params(&self) -> String {
        String::new()
    }
}

/// Wrapper clamping the input into [0, 1] before the inner denoiser runs.
/// Real denoisers assume a valid intensity range, while solver iterates can
/// transiently exit the box between projection steps.
pub struct ClampedDenoiser<D> {
    inner: D,
    name: String,
}

impl<D: Denoiser> ClampedDenoiser<D> {
    pub fn new(inner: D) -> Self {
        let name = format!("clamped-{}", inner.name());
        ClampedDenoiser { inner, name }
    }
}

impl<D: Denoiser> Denoiser for ClampedDenoiser<D> {
    fn denoise(&self, x: &Image) -> Result<Image> {
        let clamped = crate::image::project_box(x, crate::image::BoxConstraint::unit());
        self.inner.denoise(&clamped)
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn params(&self) -> String {
        self.inner.params()
    }
}

/// Pass-through denoiser, mostly for tests and null-case checks.
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&self, x: &Image) -> Result<Image> {
        Ok(x.clone())
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// Convolution with a normalized Gaussian truncated at +-4 sigma,
/// zero-padded at the borders.
pub struct GaussianDenoiser {
    pub sigma: f64,
}

impl GaussianDenoiser {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(RevError::InvalidArgument(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(GaussianDenoiser { sigma })
    }

    pub fn kernel(&self) -> Vec<f64> {
        let radius = (4.0 * self.sigma).ceil() as usize;
        let mut k: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let t = i as f64 - radius as f64;
                (-t * t / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = k.iter().sum();
        for v in &mut k {
            *v /= sum;
        }
        k
    }
}

impl Denoiser for GaussianDenoiser {
    fn denoise(&self, x: &Image) -> Result<Image> {
        let k = self.kernel();
        let radius = (k.len() - 1) / 2;
        let (w, h) = (x.width(), x.height());
        // separable: rows then columns, zero padding
        let mut mid = vec![0.0; w * h];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    let cc = c as isize + i as isize - radius as isize;
                    if cc >= 0 && (cc as usize) < w {
                        acc += kv * x.get(r, cc as usize);
                    }
                }
                mid[r * w + c] = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    let rr = r as isize + i as isize - radius as isize;
                    if rr >= 0 && (rr as usize) < h {
                        acc += kv * mid[rr as usize * w + c];
                    }
                }
                out[r * w + c] = acc;
            }
        }
        Image::new(w, h, out)
    }

    fn name(&self) -> &str {
        "gaussian"
    }

    fn params(&self) -> String {
        format!("sigma={}", self.sigma)
    }
}

/// Standard non-local means: each pixel becomes the similarity-weighted
/// average of pixels in its search window, with weights
/// exp(-||patch_p - patch_q||^2 / h^2).
pub struct NlmDenoiser {
    pub patch: usize,
    pub window: usize,
    pub h: f64,
}

impl NlmDenoiser {
    pub fn new(patch: usize, window: usize, h: f64) -> Result<Self> {
        if patch % 2 == 0 || window % 2 == 0 {
            return Err(RevError::InvalidArgument(
                "nlm patch and window sizes must be odd".into(),
            ));
        }
        if patch >= window {
            return Err(RevError::InvalidArgument(format!(
                "nlm patch {patch} must be smaller than window {window}"
            )));
        }
        if !(h > 0.0) {
            return Err(RevError::InvalidArgument(format!(
                "nlm filtering parameter must be positive, got {h}"
            )));
        }
        Ok(NlmDenoiser { patch, window, h })
    }
}

impl Denoiser for NlmDenoiser {
    fn denoise(&self, x: &Image) -> Result<Image> {
        let n = x.width();
        let h = x.height();
        let pr = (self.patch / 2) as isize;
        let wr = (self.window / 2) as isize;
        let inv_h2 = 1.0 / (self.h * self.h);

        // patches clamped at the border (replicate), a common NLM convention
        let pix = |r: isize, c: isize| -> f64 {
            let r = r.clamp(0, h as isize - 1) as usize;
            let c = c.clamp(0, n as isize - 1) as usize;
            x.get(r, c)
        };

        let mut out = Image::zeros(n, h);
        out.data_mut()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(row, chunk)| {
                let r = row as isize;
                for (col, v) in chunk.iter_mut().enumerate() {
                    let c = col as isize;
                    let mut wsum = 0.0;
                    let mut acc = 0.0;
                    for dr in -wr..=wr {
                        for dc in -wr..=wr {
                            let (qr, qc) = (r + dr, c + dc);
                            if qr < 0 || qr >= h as isize || qc < 0 || qc >= n as isize {
                                continue;
                            }
                            let mut dist = 0.0;
                            for ur in -pr..=pr {
                                for uc in -pr..=pr {
                                    let d = pix(r + ur, c + uc) - pix(qr + ur, qc + uc);
                                    dist += d * d;
                                }
                            }
                            let w = (-dist * inv_h2).exp();
                            wsum += w;
                            acc += w * x.get(qr as usize, qc as usize);
                        }
                    }
                    *v = acc / wsum;
                }
            });
        Ok(out)
    }

    fn name(&self) -> &str {
        "nlm"
    }

    fn params(&self) -> String {
        format!("patch={} window={} h={}", self.patch, self.window, self.h)
    }
}

const PLUGIN_MAGIC: &[u8; 4] = b"REVD";

fn write_frame(w: &mut impl Write, x: &Image) -> std::io::Result<()> {
    w.write_all(PLUGIN_MAGIC)?;
    w.write_all(&(x.width() as u32).to_le_bytes())?;
    w.write_all(&(x.height() as u32).to_le_bytes())?;
    for v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn read_frame(r: &mut impl Read) -> Result<Image> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| RevError::Plugin(format!("reading response magic: {e}")))?;
    if &magic != PLUGIN_MAGIC {
        return Err(RevError::Plugin("bad response magic".into()));
    }
    let mut dim = [0u8; 4];
    r.read_exact(&mut dim)
        .map_err(|e| RevError::Plugin(format!("reading width: {e}")))?;
    let width = u32::from_le_bytes(dim) as usize;
    r.read_exact(&mut dim)
        .map_err(|e| RevError::Plugin(format!("reading height: {e}")))?;
    let height = u32::from_le_bytes(dim) as usize;
    if width == 0 || height == 0 || width * height > (1 << 28) {
        return Err(RevError::Plugin(format!(
            "implausible response dimensions {width}x{height}"
        )));
    }
    let mut buf = vec![0u8; width * height * 8];
    r.read_exact(&mut buf)
        .map_err(|e| RevError::Plugin(format!("reading pixel payload: {e}")))?;
    let data: Vec<f64> = buf
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Image::new(width, height, data)
        .map_err(|e| RevError::Plugin(format!("malformed response image: {e}")))
}

/// Denoiser backed by an external subprocess speaking the REVD frame
/// protocol on stdin/stdout. One subprocess per solver run; calls are
/// serialized through a mutex.
pub struct ExternalDenoiser {
    command: Vec<String>,
    timeout: Duration,
    child: Mutex<Option<Child>>,
}

impl ExternalDenoiser {
    pub fn new(command: Vec<String>, timeout: Duration) -> Result<Self> {
        if command.is_empty() {
            return Err(RevError::Plugin("empty plugin command".into()));
        }
        Ok(ExternalDenoiser {
            command,
            timeout,
            child: Mutex::new(None),
        })
    }

    pub fn with_default_timeout(command: Vec<String>) -> Result<Self> {
        Self::new(command, Duration::from_secs(60))
    }

    fn spawn(&self) -> Result<Child> {
        Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| RevError::Plugin(format!("spawning '{}': {e}", self.command[0])))
    }
}

impl Denoiser for ExternalDenoiser {
    fn denoise(&self, x: &Image) -> Result<Image> {
        let mut guard = self.child.lock().unwrap();
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let child = guard.as_mut().unwrap();
        let stdin = child
            .stdin
            .as_mut()
            .ok_or_else(|| RevError::Plugin("plugin stdin unavailable".into()))?;
        write_frame(stdin, x).map_err(|e| RevError::Plugin(format!("writing request: {e}")))?;

        // read the response on a helper thread so a stuck plugin hits the
        // timeout instead of hanging the solver
        let mut stdout = child
            .stdout
            .take()
            .ok_or_else(|| RevError::Plugin("plugin stdout unavailable".into()))?;
        let (tx, rx) = mpsc::channel();
        let handle = std::thread::spawn(move || {
            let res = read_frame(&mut stdout);
            let _ = tx.send(());
            (res, stdout)
        });
        match rx.recv_timeout(self.timeout) {
            Ok(()) => {}
            Err(_) => {
                let _ = child.kill();
                *guard = None;
                return Err(RevError::Plugin(format!(
                    "plugin timed out after {:?}",
                    self.timeout
                )));
            }
        }
        let (result, stdout) = handle
            .join()
            .map_err(|_| RevError::Plugin("plugin reader thread panicked".into()))?;
        child.stdout = Some(stdout);
        let out = result?;
        if !out.same_shape(x) {
            let _ = child.kill();
            *guard = None;
            return Err(RevError::Plugin(format!(
                "plugin changed dimensions: sent {}x{}, received {}x{}",
                x.width(),
                x.height(),
                out.width(),
                out.height()
            )));
        }
        Ok(out)
    }

    fn name(&self) -> &str {
        "external"
    }

    fn params(&self) -> String {
        self.command.join(" ")
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.child.lock() {
            if let Some(mut child) = guard.take() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}
