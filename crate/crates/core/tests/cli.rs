//! End-to-end exercises of the command-line surface via the built binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn fdsile() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdsile"))
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn ber_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ber.csv");
    let status = fdsile()
        .args([
            "ber",
            "--constellation",
            "qpsk",
            "--channel",
            "flat",
            "--self-iters",
            "0",
            "--mode",
            "simplified",
            "--block-len",
            "64",
            "--snr",
            "4:2:8",
            "--min-errors",
            "20",
            "--max-frames",
            "100",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "snr_db,frames,bits,bit_errors,ber,mode,constellation,s");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(",simplified,qpsk,0"));
}

#[test]
fn ber_repeated_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let status = fdsile()
            .args([
                "ber",
                "--constellation",
                "psk8",
                "--channel",
                "proakis-c",
                "--self-iters",
                "1",
                "--mode",
                "fixed",
                "--block-len",
                "64",
                "--snr",
                "12:3:18",
                "--min-errors",
                "50",
                "--max-frames",
                "150",
                "--seed",
                "9",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
}

#[test]
fn ber_config_file_with_cli_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    let out = dir.path().join("ber.csv");
    fs::write(
        &cfg,
        format!(
            "# sweep settings\nconstellation=qam16\nchannel=flat\nself-iters=0\nmode=simplified\n\
             block-len=64\nsnr=10:5:15\nmin-errors=10\nmax-frames=50\nseed=4\nout={}\n",
            out.display()
        ),
    )
    .unwrap();
    // The flag overrides the file's constellation; everything else comes
    // from the file.
    let status = fdsile()
        .args(["ber", "--config"])
        .arg(&cfg)
        .args(["--constellation", "qpsk"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    assert!(text.lines().nth(1).unwrap().contains(",qpsk,"));
}

#[test]
fn ber_rejects_bad_configuration_with_nonzero_exit() {
    let output = fdsile()
        .args([
            "ber",
            "--constellation",
            "qam64",
            "--snr",
            "0:1:5",
            "--out",
            "/tmp/unused.csv",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error:"), "stderr was: {stderr}");

    // Missing --out is a configuration error.
    let output = fdsile().args(["ber", "--snr", "0:1:2"]).output().unwrap();
    assert!(!output.status.success());

    // Unwritable output path is rejected before simulation starts.
    let output = fdsile()
        .args(["ber", "--snr", "0:1:1", "--max-frames", "1", "--out", "/nonexistent-dir/x.csv"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn vectors_are_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("demap_a.vec");
    let out_b = dir.path().join("demap_b.vec");
    for out in [&out_a, &out_b] {
        let status = fdsile()
            .args([
                "vectors",
                "--block",
                "demap",
                "--constellation",
                "psk8",
                "--count",
                "200",
                "--seed",
                "77",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let bytes_a = fs::read(&out_a).unwrap();
    assert_eq!(bytes_a, fs::read(&out_b).unwrap());

    // The emitted file replays bit-exactly through the library kernels.
    use fdsile::fx_kernels::{FxKernels, FxProfile, GoldenVectorSet};
    let parsed = GoldenVectorSet::read_from(&bytes_a[..]).unwrap();
    assert_eq!(parsed.rows.len(), 200);
    let kernels = FxKernels::new(fdsile::constellation::ConstellationKind::Psk8, FxProfile::default());
    parsed.verify(&kernels).unwrap();
}

#[test]
fn cep_table_csv_has_requested_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cep.csv");
    let status = fdsile()
        .args([
            "cep-table",
            "--constellation",
            "qpsk",
            "--grid",
            "0.01:16:10",
            "--samples",
            "2000",
            "--seed",
            "5",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = read(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "v,gamma_tilde,c_ep");
    assert_eq!(lines.len(), 17);
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[0] - 0.01).abs() < 1e-12);
}
