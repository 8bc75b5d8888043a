//! Black-box tests of the revct binary: subcommands, exit codes, and
//! byte-reproducibility of outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn revct(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revct"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch revct")
}

fn small_config(out_dir: &Path) -> String {
    format!(
        r#"
output_dir = "{}"

[geometry]
image_size = 24
num_views = 10
num_detectors = 24

[phantom]
kind = "shepp_logan"
size = 24

[dose]
i0_mantissa = 2.0
i0_exponent = 7.5
seed = 11

[[runs]]
label = "plain"
reg_kind = "none"
max_iters = 15

[[runs]]
label = "srev"
reg_kind = "simplified_rev"
lambda = 1.0
max_iters = 15
interp = "bicubic"
"#,
        out_dir.display()
    )
}

#[test]
fn phantom_subcommand_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = revct(
        &["--output", "ph", "phantom", "--size", "32"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("ph/phantom.revi").exists());
    assert!(dir.path().join("ph/phantom.png").exists());
}

#[test]
fn simulate_reconstruct_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("exp");
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, small_config(&out_dir)).unwrap();
    let cfg = cfg.to_str().unwrap();

    let sim = revct(&["--config", cfg, "simulate"], dir.path());
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    for f in [
        "phantom.revi",
        "sinogram_clean.revs",
        "counts.revs",
        "measurements.revs",
        "manifest.toml",
    ] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }

    let rec = revct(&["--config", cfg, "reconstruct", "plain"], dir.path());
    assert!(rec.status.success(), "{}", String::from_utf8_lossy(&rec.stderr));
    assert!(out_dir.join("plain/final.revi").exists());
    assert!(out_dir.join("plain/metrics.csv").exists());

    let cmp = revct(&["--config", cfg, "compare"], dir.path());
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
    assert!(out_dir.join("combined.csv").exists());
    assert!(out_dir.join("summary.csv").exists());
    assert!(out_dir.join("srev/final.png").exists());
}

#[test]
fn missing_config_file_is_io_error_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = revct(&["--config", "nope.toml", "simulate"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_config_is_config_error_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "this is not an experiment config").unwrap();
    let out = revct(&["--config", cfg.to_str().unwrap(), "simulate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_run_label_is_config_error_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("exp");
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, small_config(&out_dir)).unwrap();
    let cfg = cfg.to_str().unwrap();
    assert!(revct(&["--config", cfg, "simulate"], dir.path()).status.success());
    let out = revct(&["--config", cfg, "reconstruct", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reconstruct_without_simulated_inputs_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never-simulated");
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, small_config(&out_dir)).unwrap();
    let out = revct(
        &["--config", cfg.to_str().unwrap(), "reconstruct", "plain"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failing_plugin_run_keeps_partial_results_and_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("exp");
    let mut cfg_text = small_config(&out_dir);
    cfg_text.push_str(
        r#"
[[runs]]
label = "broken_plugin"
reg_kind = "red"
lambda = 0.5
max_iters = 15

[runs.denoiser]
kind = "external"
command = ["definitely-not-a-real-binary"]
"#,
    );
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, cfg_text).unwrap();
    let out = revct(&["--config", cfg.to_str().unwrap(), "compare"], dir.path());
    assert_eq!(out.status.code(), Some(5));
    // the two healthy runs still produced results
    assert!(out_dir.join("plain/metrics.csv").exists());
    assert!(out_dir.join("srev/metrics.csv").exists());
    assert!(!out_dir.join("broken_plugin/metrics.csv").exists());
}

#[test]
fn compare_outputs_are_byte_identical_across_reruns_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, small_config(&dir.path().join("unused"))).unwrap();
    let cfg = cfg.to_str().unwrap();

    let mut bytes = Vec::new();
    for (out_name, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let out_dir = dir.path().join(out_name);
        let out = revct(
            &[
                "--config",
                cfg,
                "--output",
                out_dir.to_str().unwrap(),
                "--threads",
                threads,
                "--zero-time",
                "compare",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let combined = fs::read(out_dir.join("combined.csv")).unwrap();
        let final_img = fs::read(out_dir.join("srev/final.revi")).unwrap();
        let meas = fs::read(out_dir.join("measurements.revs")).unwrap();
        bytes.push((combined, final_img, meas));
    }
    assert_eq!(bytes[0], bytes[1], "rerun changed outputs");
    assert_eq!(bytes[0], bytes[2], "thread count changed outputs");
}

#[test]
fn seed_override_changes_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, small_config(&dir.path().join("unused"))).unwrap();
    let cfg = cfg.to_str().unwrap();
    for (name, extra) in [("s1", None), ("s2", Some("99"))] {
        let out_dir = dir.path().join(name);
        let mut args = vec!["--config", cfg, "--output", out_dir.to_str().unwrap()];
        if let Some(seed) = extra {
            args.extend(["--seed", seed]);
        }
        args.push("simulate");
        assert!(revct(&args, dir.path()).status.success());
    }
    let a = fs::read(dir.path().join("s1/measurements.revs")).unwrap();
    let b = fs::read(dir.path().join("s2/measurements.revs")).unwrap();
    assert_ne!(a, b);
}
