use std::process::Command;

fn qaux() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qaux"))
}

#[test]
fn verify_all_at_cube_root_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = qaux().args(["--suite", "verify", "--out"]).arg(dir.path()).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("status: pass"));
    for f in ["report.txt", "report.json", "checks.csv", "timing.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn reports_are_bit_identical_across_runs_and_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (d, threads) in [(&a, "1"), (&b, "4")] {
        let st = qaux().args(["--suite", "all", "--seed", "7", "--threads", threads, "--out"]).arg(d.path()).status().unwrap();
        assert_eq!(st.code(), Some(0));
    }
    for f in ["report.txt", "checks.csv", "spectra.csv", "bethe.csv", "drinfeld.csv", "trajectories.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let out = qaux().args(["--suite", "no_such_relation"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"model":{"M":3,"q":{"phase_over_pi":0.2}},"relations":["wronskain"]}"#).unwrap();
    let out = qaux().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = qaux().args(["--threads", "two"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn negative_control_flips_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("neg.json");
    let base = r#"{"model":{"M":4,"q":{"phase_over_pi":0.2},"lambda":{"re":0.6,"im":0.1}},"suite":"verify","relations":["qfusion"]"#;
    std::fs::write(&cfg, format!("{base},\"negative_control\":true}}")).unwrap();
    let out = qaux().arg("--config").arg(&cfg).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("pass: false"));
    // Same relation without the flag passes on its own terms.
    std::fs::write(&cfg, format!("{base}}}")).unwrap();
    let out = qaux().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pass: true"));
}

#[test]
fn failing_check_exits_with_one() {
    let out = qaux().args(["--suite", "tq_root", "--tolerance-scale", "1e-12"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let st = qaux().args(["--suite", "rootlimit", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let rep = qaux::cli::Report::from_json(&json).unwrap();
    assert_eq!(rep.to_text(), std::fs::read_to_string(dir.path().join("report.txt")).unwrap());
    assert_eq!(rep.to_json().unwrap(), json);
}

#[test]
fn rootlimit_five_sites_finds_the_zero_infinity_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m5.json");
    std::fs::write(&cfg, r#"{"model":{"M":5,"q":{"root_of_unity":{"N":3,"k":1}}},"suite":"rootlimit","n_b":[2]}"#).unwrap();
    let out = qaux().arg("--config").arg(&cfg).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("fates=[ToZero, ToInfinity] n0=1 n_inf=1 2s=5"), "{text}");
}

#[test]
fn rootlimit_three_site_vacuum_polynomial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m3.json");
    std::fs::write(&cfg, r#"{"model":{"M":3,"q":{"root_of_unity":{"N":3,"k":1}}},"suite":"rootlimit","n_b":[0]}"#).unwrap();
    let st = qaux().arg("--config").arg(&cfg).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let rep = qaux::cli::Report::from_json(&json).unwrap();
    let d = &rep.drinfeld[0].data;
    assert_eq!(d.ps_coeffs.len(), 2);
    // P_S(y) = 1 − y with y = z³.
    assert!((d.ps_coeffs[0] - qaux::C64::new(1.0, 0.0)).norm() < 1e-12);
    assert!((d.ps_coeffs[1] + qaux::C64::new(1.0, 0.0)).norm() < 1e-12);
    // The commensurate vacuum has nothing to track.
    assert!(rep.trajectories.iter().all(|t| t.trajectory.root_tracks.is_empty()));
}
