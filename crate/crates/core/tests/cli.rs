use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use susygate::cli::{demo_pipeline, DemoArgs};
use susygate::channel::{choi_record, realized_channel, JointSystem};
use susygate::dyson::ControlPulse;
use susygate::filter_fit::LindbladModel;
use susygate::spectrum::Spectrum;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_susygate"));
    cmd.env_remove("SUSYGATE_SEED");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn energies(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

fn write_qubit_model(dir: &Path) -> PathBuf {
    let path = dir.join("model.json");
    let mut model = LindbladModel::driven_damped_qubit(1.0, 0.7);
    model.dissipators[0].range = Some([0.05, 1.95]);
    fs::write(&path, serde_json::to_string_pretty(&model).unwrap()).unwrap();
    path
}

#[test]
fn harmonic_spectrum_table() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["spectrum", "--c1", "0", "--c2", "0", "--dim", "6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e = energies(&fs::read_to_string(tmp.path().join("energies.csv")).unwrap());
    assert_eq!(e.len(), 6);
    for (n, v) in e.iter().enumerate() {
        assert!((v - (n as f64 + 0.5)).abs() < 1e-10);
    }
    let manifest = read_json(tmp.path().join("spectrum.manifest.json"));
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.cfg"), "# quartic\nc2 = 0.05\ndim=6\n").unwrap();
    let out = run(tmp.path(), &["--config", "run.cfg", "spectrum", "--dim", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e = energies(&fs::read_to_string(tmp.path().join("energies.csv")).unwrap());
    assert_eq!(e.len(), 4);
    // the quartic term from the file still applies
    assert!(e[0] > 0.5 + 1e-3);
}

#[test]
fn synth_recovers_planted_fixture() {
    let tmp = TempDir::new().unwrap();
    let f = fixtures().join("planted_synth");
    let target = f.join("target.json");
    let spectrum = f.join("spectrum.json");
    let out = run(
        tmp.path(),
        &[
            "synth",
            "--target",
            target.to_str().unwrap(),
            "--spectrum",
            spectrum.to_str().unwrap(),
            "--T",
            "10",
            "--K",
            "6",
            "--lambda",
            "0",
            "--allow-nonunitary",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(tmp.path().join("synth_report.json"));
    assert!(report["residual"].as_f64().unwrap() <= 1e-8);
    let planted = read_json(f.join("pulse.json"));
    let got = read_json(tmp.path().join("pulse.json"));
    for (a, b) in got["coeffs"].as_array().unwrap().iter().zip(planted["coeffs"].as_array().unwrap()) {
        assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-8);
    }
    let pareto = fs::read_to_string(tmp.path().join("pareto.csv")).unwrap();
    assert_eq!(pareto.lines().count(), 11);

    let manifest = read_json(tmp.path().join("synth.manifest.json"));
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    let digest = hex::encode(Sha256::digest(fs::read(&target).unwrap()));
    assert!(inputs.iter().any(|i| i["sha256"] == digest.as_str()));
}

#[test]
fn synth_rejects_nonunitary_target_by_default() {
    let tmp = TempDir::new().unwrap();
    let f = fixtures().join("planted_synth");
    let out = run(
        tmp.path(),
        &[
            "synth",
            "--target",
            f.join("target.json").to_str().unwrap(),
            "--spectrum",
            f.join("spectrum.json").to_str().unwrap(),
            "--T",
            "10",
            "--K",
            "6",
            "--lambda",
            "0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn filter_sim_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let model = write_qubit_model(tmp.path());
    let m = model.to_str().unwrap();
    let common = ["filter-sim", "--model", m, "--T", "0.5", "--dt", "1e-3"];
    let mut a = vec!["--seed", "7", "--out-dir", "a"];
    a.extend_from_slice(&common);
    let mut b = vec!["--seed", "7", "--out-dir", "b"];
    b.extend_from_slice(&common);
    let mut c = vec!["--seed", "8", "--out-dir", "c"];
    c.extend_from_slice(&common);
    for args in [&a, &b, &c] {
        let out = run(tmp.path(), args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes = |d: &str, f: &str| fs::read(tmp.path().join(d).join(f)).unwrap();
    for f in ["trajectory.json", "record.csv", "populations.csv"] {
        assert_eq!(bytes("a", f), bytes("b", f), "{f}");
    }
    assert_ne!(bytes("a", "record.csv"), bytes("c", "record.csv"));

    // the environment supplies the seed when the flag is absent
    let mut env_args = vec!["--out-dir", "d"];
    env_args.extend_from_slice(&common);
    let out = bin().current_dir(tmp.path()).env("SUSYGATE_SEED", "7").args(&env_args).output().unwrap();
    assert!(out.status.success());
    assert_eq!(bytes("a", "record.csv"), bytes("d", "record.csv"));
    assert_eq!(read_json(tmp.path().join("d/filter-sim.manifest.json"))["seed"], 7);
}

#[test]
fn filter_fit_on_simulated_record() {
    let tmp = TempDir::new().unwrap();
    let model = write_qubit_model(tmp.path());
    let m = model.to_str().unwrap();
    let sim = run(tmp.path(), &["--seed", "3", "filter-sim", "--model", m, "--T", "3", "--dt", "1e-3", "--eta", "0.1"]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let fit = run(tmp.path(), &["filter-fit", "--model", m, "--record", "trajectory.json", "--eta", "0.1", "--grid-points", "10"]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let report = read_json(tmp.path().join("fit.json"));
    let gamma = report["theta"][0].as_f64().unwrap();
    assert!((0.05..=1.95).contains(&gamma));
    for f in ["cost_curve.csv", "comparison.csv", "comparison.svg"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }

    // fitting the stored true states recovers the truth closely
    let truth = run(tmp.path(), &["--out-dir", "t", "filter-fit", "--model", m, "--record", "trajectory.json", "--against", "truth"]);
    assert!(truth.status.success(), "{}", String::from_utf8_lossy(&truth.stderr));
    let g = read_json(tmp.path().join("t/fit.json"))["theta"][0].as_f64().unwrap();
    assert!((g - 0.7).abs() < 0.05, "{g}");
}

#[test]
fn gate_channel_susy_and_vev_commands() {
    let tmp = TempDir::new().unwrap();
    let f = fixtures().join("planted_synth");
    let spectrum = f.join("spectrum.json");
    let out = run(
        tmp.path(),
        &["gate", "--spectrum", spectrum.to_str().unwrap(), "--pulse", f.join("pulse.json").to_str().unwrap(), "--oracle", "64"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["gate.json", "gate_report.json", "oracle_gate.json"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }

    let out = run(tmp.path(), &["susy", "--superpotential", "0,0,0.5", "--dim", "32"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(tmp.path().join("susy_report.json"));
    assert_eq!(report["index"]["index"], 1);

    fs::write(tmp.path().join("d2.json"), r#"{"shape":[1,1,1],"data":[2.0]}"#).unwrap();
    let out = run(tmp.path(), &["vev", "--d2", "d2.json", "--pvev", "0.5", "--qvev", "0.25", "--dim", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("vev.json").exists());

    // a channel realized by a known small pulse is recovered through the command
    let two = tmp.path().join("two");
    let out = run(tmp.path(), &["--out-dir", "two", "spectrum", "--c1", "0.05", "--c2", "0.02", "--dim", "2"]);
    assert!(out.status.success());
    let spec: Spectrum = serde_json::from_str(&fs::read_to_string(two.join("spectrum.json")).unwrap()).unwrap();
    let joint = JointSystem::new(&spec, 2, 1.0, 0.1).unwrap();
    let planted = ControlPulse::new(2.0, vec![0.02, -0.03, 0.01]).unwrap();
    let realized = realized_channel(&joint, &planted, &joint.ancilla_ground()).unwrap();
    fs::write(two.join("choi.json"), serde_json::to_string(&choi_record(&realized.choi(), 2, 2)).unwrap()).unwrap();
    let out = run(
        tmp.path(),
        &["--out-dir", "two", "channel", "--target", "two/choi.json", "--spectrum", "two/spectrum.json", "--T", "2", "--K", "1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(two.join("channel_report.json"));
    assert!(report["choi_distance"].as_f64().unwrap() < 1e-6, "{report}");
    assert!(report["cp_defect"].as_f64().unwrap() < 1e-12);
    assert!(two.join("realized_choi.json").exists());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(tmp.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["spectrum", "--dim", "0"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["gate", "--spectrum", "missing.json", "--pulse", "missing.json"]).status.code(), Some(2));
    fs::write(tmp.path().join("bad.json"), "{not json").unwrap();
    assert_eq!(run(tmp.path(), &["filter-sim", "--model", "bad.json"]).status.code(), Some(2));
    // W = q^6 leaves the low spectrum unconverged at a tiny cutoff
    assert_eq!(run(tmp.path(), &["susy", "--superpotential", "0,0,0,0,0,0,1", "--dim", "12"]).status.code(), Some(3));
}

#[test]
fn demo_orders_fit_against_grid_extremes() {
    let args = DemoArgs::default();
    let outcome = demo_pipeline(&args, 11).unwrap();
    let [lo, hi] = outcome.extreme_gaps;
    assert!(outcome.fitted_gap < lo && outcome.fitted_gap < hi, "{} vs {lo}, {hi}", outcome.fitted_gap);
    let other = demo_pipeline(&args, 12).unwrap();
    for g in [outcome.fit.theta[0], other.fit.theta[0]] {
        assert!((g - args.gamma).abs() / args.gamma <= 0.10, "{g}");
    }
}

#[test]
fn demo_command_writes_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["--seed", "5", "demo", "--T", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["demo_report.json", "demo_comparison.csv", "demo.svg", "demo_trajectory.json", "demo.manifest.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}
