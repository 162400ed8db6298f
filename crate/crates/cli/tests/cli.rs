use std::path::Path;
use std::process::{Command, Output};

fn hyqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyqkd"))
        .args(args)
        .env_remove("HYQKD_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn column<'a>(csv: &'a str, name: &str) -> Vec<&'a str> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap()).collect()
}

const CLEAN: &str = "seed = 5\nrounds = 2\n[protocol]\nn_pulses = 60000\n[auth]\nreserve = 12000\nots_preimage_bits = 128\nots_digest_bits = 128\n";

#[test]
fn clean_run_succeeds_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "clean.toml", CLEAN);
    let mut reports = Vec::new();
    for out in ["a", "b"] {
        let out_dir = dir.path().join(out);
        let o = hyqkd(&["run", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap(), "--transcripts"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let report = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
        assert_eq!(column(&report, "e_x"), ["0.000000", "0.000000"]);
        assert_eq!(column(&report, "keys_equal"), ["true", "true"]);
        assert_eq!(column(&report, "auth_mode"), ["ots", "wegman-carter"]);
        assert!(out_dir.join("transcript_round2.csv").exists());
        assert!(out_dir.join("channel_round1.csv").exists());
        let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
        reports.push((report, summary));
    }
    assert_eq!(reports[0], reports[1]);

    let out_dir = dir.path().join("c");
    let o = hyqkd(&["run", "--config", &cfg, "--seed", "6", "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(std::fs::read_to_string(out_dir.join("report.csv")).unwrap(), reports[0].0);
    assert!(!out_dir.join("transcript_round1.csv").exists());
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "[protocol]\nn_pulses = 20000\n");
    let out_dir = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_hyqkd"))
        .args(["run", "--config", &cfg])
        .env("HYQKD_OUT_DIR", &out_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out_dir.join("report.csv").exists());
}

#[test]
fn interception_aborts_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "eve.toml",
        "seed = 2\n[protocol]\nn_pulses = 100000\nbasis = \"symmetric\"\n[channel]\ntransmittance = 1.0\n[eve]\nkind = \"intercept-resend\"\n",
    );
    let out = dir.path().join("o");
    let o = hyqkd(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let e: f64 = column(&report, "e_x")[0].parse().unwrap();
    assert!((e - 0.25).abs() < 0.01, "{e}");
    assert_eq!(column(&report, "decision"), ["abort"]);
}

#[test]
fn pool_exhaustion_has_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tiny.toml",
        "rounds = 3\n[protocol]\nn_pulses = 40000\n[auth]\nreserve = 64\nots_preimage_bits = 128\nots_digest_bits = 128\n",
    );
    let o = hyqkd(&["run", "--config", &cfg, "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "seed = 1\n\n[eve]\nkind = \"intercept-resend\"\nfraction = 2.0\n");
    let o = hyqkd(&["run", "--config", &cfg, "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5"), "{err}");

    let o = hyqkd(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "seed = 9\n[protocol]\nn_pulses = 40000\n[channel]\ntransmittance = 1.0\n");
    let out = dir.path().join("o");
    let o = hyqkd(&[
        "sweep", "--config", &cfg, "--param", "p_z", "--values", "0.9,0.5,0.7", "--out-dir", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep_p_z.csv")).unwrap();
    assert_eq!(column(&csv, "value"), ["0.5", "0.7", "0.9"]);
    let lens: Vec<u64> = column(&csv, "final_len").iter().map(|v| v.parse().unwrap()).collect();
    assert!(lens.windows(2).all(|w| w[0] <= w[1]), "{lens:?}");

    let o = hyqkd(&["sweep", "--config", &cfg, "--param", "gain", "--values", "1", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn topology_check_and_mosca() {
    let dir = tempfile::tempdir().unwrap();
    let topo = write(dir.path(), "t.topo", "node A user\nnode R relay\nnode B user\nlink A R qkd 10\nlink R B qkd 10\n");
    let o = hyqkd(&["topology-check", &topo]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("preshared pairs for full mesh 3"), "{text}");
    assert!(text.contains("route A B qkd A>R>B pqc none"), "{text}");

    let bad = write(dir.path(), "bad.topo", "node A user\nlink A B qkd 1\n");
    let o = hyqkd(&["topology-check", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = hyqkd(&["mosca", "--shelf-life", "5", "--migration", "5", "--threat-horizon", "10", "--key-len", "128"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("verdict safe") && text.contains("key length 256"), "{text}");
    let o = hyqkd(&["mosca", "--shelf-life", "6", "--migration", "5", "--threat-horizon", "10"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("verdict at-risk"));
    let o = hyqkd(&["mosca", "--shelf-life=-1", "--migration", "5", "--threat-horizon", "10"]);
    assert_eq!(o.status.code(), Some(2));
}
