use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use fluctsel_cli::config::{parse_config, parse_config_str, Job, Kind};
use fluctsel_cli::manifest::{read_manifest, MANIFEST_FILE};
use fluctsel_cli::run_spec;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fluctsel"))
}

#[test]
fn shipped_configs_parse() {
    let mut kinds = Vec::new();
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let spec = parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        kinds.push(spec.kind);
    }
    for kind in Kind::ALL {
        assert!(kinds.contains(&kind), "no example config for {}", kind.name());
    }
}

#[test]
fn minimal_moran_config_is_valid() {
    let spec = parse_config_str("kind = \"moran\"\n").unwrap();
    let Job::Moran { config, .. } = &spec.runs[0].job else {
        panic!("not a moran job");
    };
    assert_eq!(config.demes, 100);
    assert_eq!(config.deme_size, 400);
    assert_eq!(config.selection, 0.1);
    assert_eq!(config.env_rate, 10.0);
    assert_eq!(config.migration, 1.0);
}

#[test]
fn nonspatial_alpha_above_a_quarter_is_rejected() {
    let err = parse_config_str(
        "kind = \"nonspatial-scaling\"\n[params]\nalpha = 0.3\nlevel = 100\nhorizon = 1\n",
    )
    .unwrap_err();
    assert!(err.to_string().contains("(0, 1/4)"), "{err}");
}

#[test]
fn rescaled_alpha_above_a_sixth_is_rejected() {
    let err = parse_config_str(
        "kind = \"slfv-rescaled\"\n[params]\ndimension = 2\ncells = 32\nalpha = 0.2\nlevel = 4\nimpact = 0.5\nradius = 0.1\ntimes = [0.1]\n",
    )
    .unwrap_err();
    assert!(err.to_string().contains("(0, 1/6)"), "{err}");
}

#[test]
fn zero_replicates_is_rejected() {
    let err = parse_config_str("kind = \"sde\"\nreplicates = 0\n[params]\nhorizon = 1\n").unwrap_err();
    assert!(err.to_string().contains("replicates: must be at least 1"), "{err}");
}

#[test]
fn out_of_range_values_are_errors_not_clamps() {
    let err = parse_config_str("kind = \"sde\"\n[params]\nhorizon = 1\np0 = 1.5\n").unwrap_err();
    assert!(err.to_string().contains("p0: must lie in [0, 1]"), "{err}");
    let err = parse_config_str(
        "kind = \"spde\"\n[params]\ndimension = 2\ncells = 128\nradius = 0.5\nimpact = 0.5\ndt = 1e-3\nhorizon = 0.1\nreaction = false\ncoloured_noise = false\n",
    )
    .unwrap_err();
    assert!(err.to_string().contains("stability"), "{err}");
}

fn duality_spec() -> &'static str {
    "kind = \"duality-nonspatial\"\nseed = 3\nreplicates = 500\n[params]\nx0 = 0.5\nn0 = 2\nimpact = 1.0\nselection = 1.0\nhorizon = 0.1\ndt = 1e-3\n"
}

#[test]
fn duality_spec_produces_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse_config_str(duality_spec()).unwrap();
    let report = run_spec(&spec, dir.path(), Some(2)).unwrap();
    let text = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(text.starts_with("lhs,lhs_se,rhs,rhs_se,z_score,pass\n"));
    assert_eq!(text.lines().count(), 2);
    let listed: Vec<_> = report.manifest.iter().map(|e| e.path.as_str()).collect();
    assert_eq!(listed, vec!["report.csv"]);
}

#[test]
fn reruns_reproduce_checksums() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let spec = parse_config_str(
        "kind = \"moran\"\nseed = 5\nreplicates = 2\n[params]\ndemes = 4\ndeme_size = 10\nhorizon = 0.5\nrecord_every = 100\nlog_events = true\nscenario = [\"anticorrelated\", \"neutral\"]\n",
    )
    .unwrap();
    run_spec(&spec, a.path(), Some(1)).unwrap();
    run_spec(&spec, b.path(), Some(3)).unwrap();
    let ma = read_manifest(&a.path().join(MANIFEST_FILE)).unwrap();
    let mb = read_manifest(&b.path().join(MANIFEST_FILE)).unwrap();
    assert!(!ma.is_empty());
    assert_eq!(ma, mb);
    // Scenarios share the event sequence.
    let ev = |s: &str| fs::read(a.path().join(format!("scenario-{s}/rep_0001/events.txt"))).unwrap();
    assert_eq!(ev("anticorrelated"), ev("neutral"));
    // Running again into the same directory replaces the previous artefacts.
    run_spec(&spec, a.path(), None).unwrap();
    assert_eq!(read_manifest(&a.path().join(MANIFEST_FILE)).unwrap(), ma);
}

#[test]
fn unwritable_output_is_reported_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let spec = parse_config_str(duality_spec()).unwrap();
    let err = run_spec(&spec, &blocker.join("out"), None).unwrap_err();
    assert!(format!("{err:#}").contains("cannot create output directory"), "{err:#}");
    // Foreign files are never removed.
    let err = run_spec(&spec, dir.path(), None).unwrap_err();
    assert!(format!("{err:#}").contains("not produced by a previous run"), "{err:#}");
    assert!(blocker.exists());
}

#[test]
fn simulate_and_verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("neutral.toml");
    fs::write(
        &config,
        "kind = \"moran\"\nseed = 11\nreplicates = 2\n[params]\ndemes = 3\ndeme_size = 8\nselection = 0.0\nhorizon = 1.0\nrecord_every = 50\nlog_events = true\nscenario = [\"anticorrelated\", \"correlated\", \"constant\", \"neutral\"]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = binary()
        .args(["simulate", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join(MANIFEST_FILE).exists());
    assert!(out.join("scenario-constant/rep_0000/origin_2.txt").exists());

    let verify = binary().args(["verify", config.to_str().unwrap()]).output().unwrap();
    let stdout = String::from_utf8_lossy(&verify.stdout);
    assert!(verify.status.success(), "{stdout}");
    assert!(stdout.contains("PASS seed 11: byte-identical event logs and records across scenarios"), "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn seed_flag_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("d.toml");
    fs::write(&config, duality_spec()).unwrap();
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let ok = binary()
            .args(["simulate", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed])
            .output()
            .unwrap()
            .status
            .success();
        assert!(ok);
        fs::read(out.join("report.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
    assert_eq!(run("1", "c"), run("1", "d"));
}

#[test]
fn config_errors_exit_with_code_two_and_name_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "kind = \"moran\"\n[params]\ndemes = 1\nfrobnicate = true\nselection = -1.0\n").unwrap();
    let output = binary().args(["simulate", config.to_str().unwrap()]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("params.frobnicate: unknown key"), "{stderr}");
    assert!(stderr.contains("demes"), "{stderr}");
    assert!(stderr.contains("selection"), "{stderr}");
}
