//! Runs the command-line binary against temporary files.

use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_callshield"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn field(out: &Output, key: &str) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in output"))
}

#[test]
fn bch_encode_then_decode_with_errors() {
    let dir = tempfile::tempdir().unwrap();
    let enc = cli(&["bch", "encode", "--bits", "8", "b2"], dir.path());
    let codeword = u32::from_str_radix(&field(&enc, "codeword"), 16).unwrap();
    // Flip two of the 31 code bits (bit 31 of the hex word is padding).
    let corrupted = format!("{:08x}", codeword ^ (1 << 30) ^ (1 << 9));
    let dec = cli(&["bch", "decode", &corrupted], dir.path());
    assert!(field(&dec, "message").starts_with("b2"));
    assert_eq!(field(&dec, "corrected"), "2");
}

#[test]
fn datalink_send_distort_recv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    cli(
        &[
            "datalink",
            "send",
            "--bits",
            "32",
            "--message",
            "c0ffee42",
            "--offset-ms",
            "21",
            "tx.wav",
        ],
        p,
    );
    cli(
        &[
            "distort",
            "--kind",
            "pink_noise",
            "--coverage",
            "0.3",
            "--seed",
            "4",
            "tx.wav",
            "rx.wav",
        ],
        p,
    );
    let rx = cli(&["datalink", "recv", "--bits", "32", "rx.wav"], p);
    assert_eq!(field(&rx, "message"), "c0ffee42");
    assert_eq!(field(&rx, "start"), "168 samples");
}

#[test]
fn experiment_outputs_and_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    cli(
        &[
            "auth",
            "run",
            "--trials",
            "5",
            "--seed",
            "2",
            "--out",
            "runs/auth",
        ],
        p,
    );
    for file in ["runs/auth.csv", "runs/auth.jsonl", "runs/auth_summary.csv"] {
        assert!(p.join(file).exists(), "{file}");
    }
    let lines = std::fs::read_to_string(p.join("runs/auth.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 5);

    cli(&["timing", "--trials", "10", "--out", "runs/timing"], p);
    let plot = cli(
        &[
            "plot",
            "runs/timing_summary.csv",
            "runs/auth_summary.csv",
            "--out",
            "plots",
        ],
        p,
    );
    let listed = String::from_utf8_lossy(&plot.stdout).to_string();
    assert!(listed.contains("timing_table.dat"), "{listed}");
    assert!(p.join("plots/timing_table.dat").exists());
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("spec.json"),
        r#"{"experiment": "ablation", "trials": 7, "seed": 5}"#,
    )
    .unwrap();
    cli(&["sweep", "--config", "spec.json", "--out", "abl"], p);
    let rows = std::fs::read_to_string(p.join("abl.jsonl")).unwrap();
    assert_eq!(rows.lines().count(), 3 * 7);
    assert!(rows.lines().all(|l| l.contains("\"seed\":")));
}

#[test]
fn attack_subcommand_reports_zero_acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &["auth", "attack", "--kind", "forgery", "--trials", "20"],
        dir.path(),
    );
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let line = text.lines().find(|l| l.contains("acceptance")).unwrap();
    assert!(line.contains(" 0.0000"), "{line}");
}
