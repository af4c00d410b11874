use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spasim"))
}

fn docs(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_config(cmd: &str, config: &Path, out: &Path) -> Output {
    run(&[
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "1",
    ])
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &Value, path: &[&str]) -> f64 {
    path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap()
}

#[test]
fn simulate_adder_fock() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("simulate", &docs("adder_fock.toml"), dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = read_json(&dir.path().join("summary.json"));
    assert!((num(&s, &["steady", "mean_n"]) - 2.5).abs() < 0.005);
    for block in ["simulated", "ideal_incoherent", "ideal_coherent"] {
        for key in ["mean_n", "std_n", "std_x1", "std_x2"] {
            assert!(s["comparison"][block][key].is_f64(), "{block}.{key}");
        }
    }
    assert!((num(&s, &["comparison", "ideal_incoherent", "std_x1"]) - 1.2247).abs() < 1e-4);

    let csv = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,mean_n,std_n,std_x1,std_x2,pop_g,pop_s,pop_e"
    );
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(first.len(), 8);
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.5).abs() < 1e-12);
    assert!((first[7] - 1.0).abs() < 1e-12);

    for q in ["q_initial.csv", "q_steady.csv", "q_ideal_target.csv"] {
        let text = fs::read_to_string(dir.path().join(q)).unwrap();
        assert_eq!(text.lines().count(), 1 + 121 * 121);
    }
}

#[test]
fn simulate_subtractor_coherent() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("simulate", &docs("subtractor_coherent.toml"), dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = read_json(&dir.path().join("summary.json"));
    assert!((num(&s, &["steady", "mean_n"]) - 0.37).abs() < 0.005);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = docs("adder_fock_pulsed.toml");
    assert!(run_config("simulate", &cfg, a.path()).status.success());
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
        "--threads",
        "0",
    ]);
    assert!(out.status.success());
    for f in ["timeseries.csv", "summary.json", "q_steady.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[scenario\ndevice = adder\n").unwrap();
    let target = dir.path().join("out");
    let out = run_config("simulate", &cfg, &target);
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");

    fs::write(
        &cfg,
        "[scenario]\ndevice = \"adder\"\ncutoff = 5\n[scenario.initial]\nkind = \"fock\"\nlevels = [1, 2]\n",
    )
    .unwrap();
    // missing [grid]
    let out = run_config("optimize", &cfg, &target);
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists());
}

#[test]
fn not_converged_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(
        &cfg,
        "[scenario]\ndevice = \"adder\"\ncutoff = 5\nt_end = 1.0\n[scenario.initial]\nkind = \"fock\"\nlevels = [1, 2]\n",
    )
    .unwrap();
    let target = dir.path().join("out");
    let out = run_config("simulate", &cfg, &target);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
}

#[test]
fn optimize_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    fs::write(
        &cfg,
        "[scenario]\ndevice = \"subtractor\"\ncutoff = 5\n[scenario.initial]\nkind = \"fock\"\nlevels = [1, 2]\n\
         [grid]\nomega_min = 11.0\nomega_max = 13.0\nn_omega = 3\ntau_min = 0.17\ntau_max = 0.19\nn_tau = 3\n",
    )
    .unwrap();
    let out = run_config("optimize", &cfg, dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let o = read_json(&dir.path().join("optimum.json"));
    assert_eq!(num(&o, &["omega"]), 12.0);
    assert!((num(&o, &["tau"]) - 0.18).abs() < 1e-12);
    assert!((num(&o, &["fidelity"]) - 0.953).abs() < 0.01);
    assert!(num(&o, &["fidelity"]) >= num(&o, &["no_pulse_fidelity"]));
    let csv = fs::read_to_string(dir.path().join("fidelity_surface.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "omega,tau,fidelity");
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn channel_spa_on_coherent_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("channel", &docs("adder_coherent_channel.toml"), dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c = read_json(&dir.path().join("channel.json"));
    assert!((num(&c, &["output", "std_x1"]) - 0.614).abs() < 0.002);
    assert!((num(&c, &["output", "std_x2"]) - 0.710).abs() < 0.002);
    assert!(dir.path().join("q_output.csv").exists());
}

#[test]
fn channel_sps_on_squeezed_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        "channel",
        &docs("subtractor_squeezed_channel.toml"),
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c = read_json(&dir.path().join("channel.json"));
    assert!((num(&c, &["output", "std_x1"]) - 0.476).abs() < 0.002);
    assert!((num(&c, &["output", "std_x2"]) - 1.139).abs() < 0.002);
}

#[test]
fn channel_incoherent_adder_on_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("vac.toml");
    fs::write(
        &cfg,
        "[scenario]\ncutoff = 4\n[scenario.initial]\nkind = \"fock\"\nlevels = [0]\n[channel]\nkind = \"spa_incoherent\"\nqfunction = false\n",
    )
    .unwrap();
    let out = run_config("channel", &cfg, dir.path());
    assert!(out.status.success());
    let c = read_json(&dir.path().join("channel.json"));
    assert_eq!(num(&c, &["output", "mean_n"]), 1.0);
    assert_eq!(num(&c, &["output", "std_n"]), 0.0);
    assert!(!dir.path().join("q_output.csv").exists());
}

#[test]
fn defect_command() {
    for (alpha, expect) in [("1", 1.5), ("0", 1.0), ("0.6+0.8i", 1.5)] {
        let out = run(&["defect", "--alpha", alpha]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let numeric: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix("numeric = "))
            .unwrap()
            .parse()
            .unwrap();
        assert!((numeric - expect).abs() < 1e-6, "{alpha}: {numeric}");
    }
    let out = run(&["defect", "--alpha", "5", "--cutoff", "60"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let closed: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("closed_form = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((closed - 51.0 / 26.0).abs() < 1e-14, "{text}");

    let out = run(&["defect", "--alpha", "5", "--cutoff", "20"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["defect", "--alpha", "x"]);
    assert_eq!(out.status.code(), Some(1));
}
