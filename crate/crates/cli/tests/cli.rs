use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vrrw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrrw"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const RECURRENCE: &str = "kind = recurrence\nweight = power:0.3\nhorizon = 3000\ntrajectories = 8\nseed = 4\ntargets = 3,-3\n";

#[test]
fn simulate_writes_versioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.cfg", RECURRENCE);
    let out = dir.path().join("r.csv");
    let o = vrrw(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# vrrw-csv v1 recurrence"));
    assert!(lines.next().unwrap().ends_with("hit_-3,hit_3"));
    assert_eq!(lines.count(), 8);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fraction_returns_ge_10"));
}

#[test]
fn output_is_independent_of_workers_and_follows_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.cfg", RECURRENCE);
    let cfg = cfg.to_str().unwrap();
    let one = vrrw(&["simulate", "--config", cfg, "--workers", "1"]);
    let many = vrrw(&["simulate", "--config", cfg, "--workers", "16"]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, many.stdout);
    let other = vrrw(&["simulate", "--config", cfg, "--seed", "5"]);
    assert_ne!(one.stdout, other.stdout);
}

#[test]
fn verify_passes_then_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let rec_dir = dir.path().join("records");
    let cfg = write_config(
        dir.path(),
        "v.cfg",
        "kind = verify\nweight = linear\nhorizon = 500\ntrajectories = 3\nverify_v = 3\n",
    );
    let o = vrrw(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--record",
        rec_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rec = rec_dir.join("traj_000001.vrrw");
    let mut bytes = fs::read(&rec).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    let tampered = dir.path().join("tampered.vrrw");
    fs::write(&tampered, &bytes).unwrap();

    let cfg = write_config(
        dir.path(),
        "t.cfg",
        &format!(
            "kind = verify\nweight = linear\nhorizon = 10\ntrajectories = 1\nchecks = replay\nreplay_records = {}, {}\n",
            rec.display(),
            tampered.display()
        ),
    );
    let o = vrrw(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let csv = String::from_utf8(o.stdout).unwrap();
    let statuses: Vec<&str> = csv
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(statuses, ["pass", "pass", "fail"]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.cfg",
        "kind = recurrence\nweight = power:0.3\nhorizon = 0\ntrajectories = 1\n",
    );
    assert_eq!(
        code(&vrrw(&["simulate", "--config", bad.to_str().unwrap()])),
        2
    );

    let typo = write_config(dir.path(), "typo.cfg", "kind = lemma\nlemma_kk = 3\n");
    let o = vrrw(&["lemma", "--config", typo.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let wrong_kind = write_config(dir.path(), "w.cfg", RECURRENCE);
    assert_eq!(
        code(&vrrw(&["verify", "--config", wrong_kind.to_str().unwrap()])),
        2
    );

    let missing = dir.path().join("nope.cfg");
    let o = vrrw(&["simulate", "--config", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.cfg"));

    assert_eq!(code(&vrrw(&["simulate"])), 2);
}

#[test]
fn lemma_and_phase_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "l.cfg",
        "kind = lemma\nlemma_k = 0,4,8\nlemma_alpha = 0.4\nlemma_epsilon = 1\nlemma_restarts = 6\n",
    );
    let o = vrrw(&["lemma", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with(
        "# vrrw-csv v1 lemma\nk,alpha,epsilon,value,restarts,converged,max_b,argmax\n"
    ));
    let k0: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(&k0[..3], ["0", "0.4", "1"]);
    let value: f64 = k0[3].parse().unwrap();
    assert!((value - 0.4736).abs() < 1e-4, "{value}");

    let cfg = write_config(
        dir.path(),
        "p.cfg",
        "kind = phase\nphase_exponents = 0.3,1\nhorizon = 2000\ntrajectories = 4\nreturn_threshold = 2\n",
    );
    let o = vrrw(&["phase", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}

#[test]
fn localization_records_can_be_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "loc.cfg",
        "kind = localization\nweight = linear\nhorizon = 2\ntrajectories = 2\n",
    );
    let rec_dir = dir.path().join("recs");
    let o = vrrw(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--record",
        rec_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(o.stdout).unwrap();
    for line in csv.lines().skip(2) {
        let size: u64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(size >= 1);
    }
    let rec = vrrw_core::record::read(&rec_dir.join("traj_000000.vrrw")).unwrap();
    assert_eq!(rec.moves.len(), 2);
    assert_eq!(vrrw_core::walk::replay_mismatch(&rec).unwrap(), None);
}
