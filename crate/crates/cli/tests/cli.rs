use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relcrawl::cycles::CycleResult;
use relcrawl::equilibrium::{StabilityReport, Verdict};
use relcrawl_cli::commands::{CycleReport, PerturbationReport};
use relcrawl_cli::output::{fmt, read_sweep_csv, read_table, write_sweep_csv, write_table};
use tempfile::TempDir;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("exp.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_relcrawl"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env("RELCRAWL_THREADS", "2")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn certify_exit_codes() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "", &["certify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: StabilityReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/certify.json")).unwrap()).unwrap();
    assert_eq!(r.verdict, Verdict::RobustlyStable);
    assert!(r.spectral_abscissa < 0.0);

    let o = run(d.path(), "nu_s = 0.0\nnu_ns = 0.0\nnu_db = 0.0\n", &["certify"]);
    assert_eq!(code(&o), 1);
    let r: StabilityReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/certify.json")).unwrap()).unwrap();
    assert_eq!(r.verdict, Verdict::Marginal);

    let o = run(d.path(), "rest_lengths = [1.0, 1.0, 2.0]\n", &["certify"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_configs_exit_with_2() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&run(d.path(), "kappa = 1.0\n", &["certify"])), 2);
    assert_eq!(code(&run(d.path(), "rtol = -1.0\n", &["cycle"])), 2);
    assert_eq!(code(&run(d.path(), "schedule = \"table\"\nschedule_amplitudes = [1.0]\n", &["cycle"])), 2);
    assert_eq!(code(&run(d.path(), "", &["cycle", "--epsilon", "2.5"])), 2);
    assert_eq!(code(&run(d.path(), "model = \"crawler3d\"\n", &["sweep"])), 2);
}

#[test]
fn cycle_json_round_trips() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "robustness_seeds = 2\n", &["cycle", "--epsilon", "0.25", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("out/cycle.json")).unwrap();
    let r: CycleReport<f64> = serde_json::from_str(&text).unwrap();
    assert_eq!(r.seed, 7);
    assert_eq!(r.cycle.epsilon, 0.25);
    assert!(r.cycle.converged && r.cycle.max_multiplier() < 1.0);
    assert_eq!(r.robustness_shifts.len(), 2);
    for s in &r.robustness_shifts {
        assert!((s - r.cycle.delta).abs() < 1e-6);
    }
    assert_eq!(serde_json::to_string_pretty(&r).unwrap() + "\n", text);
    let c: CycleResult<f64> = r.cycle;
    let (header, rows) = read_table(&d.path().join("out/cycle.csv")).unwrap();
    assert_eq!(header.len(), 13);
    assert_eq!(rows.len(), c.samples.len());
    assert_eq!(rows[3][1..], c.samples[3][..]);
}

#[test]
fn floats_survive_text() {
    let d = TempDir::new().unwrap();
    let vals = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0];
    for v in vals {
        assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
    }
    let p = d.path().join("t.csv");
    write_table(&p, &["a".into(), "b".into()], &[vals[..2].to_vec(), vals[2..4].to_vec()]).unwrap();
    let (h, rows) = read_table(&p).unwrap();
    assert_eq!(h, ["a", "b"]);
    assert_eq!(rows, [vals[..2].to_vec(), vals[2..4].to_vec()]);
}

#[test]
fn sweep_single_amplitude() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "epsilons = [0.125]\n", &["sweep"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_sweep_csv(&d.path().join("out/sweep.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].epsilon, 0.125);
    assert!(rows[0].delta_x.is_some() && rows[0].p.is_none());
    assert_eq!(rows[0].status, "ok");
}

#[test]
fn sweep_sorts_and_round_trips() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "epsilons = [0.0625, 0.25, 0.125]\n", &["sweep"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).to_lowercase().contains("sort"));
    let path = d.path().join("out/sweep.csv");
    let rows = read_sweep_csv(&path).unwrap();
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    assert_eq!(eps, [0.25, 0.125, 0.0625]);
    for r in &rows[..2] {
        let p = r.p.unwrap();
        assert!((p - 2.0).abs() < 0.01, "{p}");
    }
    let again = d.path().join("again.csv");
    write_sweep_csv(&again, &rows).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(&path).unwrap());
}

#[test]
fn runs_are_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = "robustness_seeds = 2\nn_periods = 3\nt_settle = 2.0\n";
    for cmd in ["cycle", "simulate"] {
        assert_eq!(code(&run(a.path(), cfg, &[cmd, "--seed", "11", "--emit-plots"])), 0);
        assert_eq!(code(&run(b.path(), cfg, &[cmd, "--seed", "11", "--emit-plots"])), 0);
    }
    let mut names: Vec<_> = fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for n in names {
        let x = fs::read(a.path().join("out").join(&n)).unwrap();
        let y = fs::read(b.path().join("out").join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}

#[test]
fn simulate_writes_plot_files() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "n_periods = 2\nt_settle = 1.0\nsample_dt = 0.05\n", &["simulate", "--emit-plots"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("out");
    let (h, rows) = read_table(&out.join("trajectory.csv")).unwrap();
    assert_eq!(h[..3], ["t", "x1", "z1"]);
    assert_eq!(h.len(), 13);
    assert_eq!(rows.len(), 61);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    let (_, shifts) = read_table(&out.join("shifts.csv")).unwrap();
    assert_eq!(shifts.len(), 2);
    let gp = fs::read_to_string(out.join("plot.gp")).unwrap();
    assert!(gp.contains("coordinates.dat") && gp.contains("path.dat"));
    let coords = fs::read_to_string(out.join("coordinates.dat")).unwrap();
    assert!(coords.starts_with("# t x1 z1"));
    assert_eq!(coords.lines().count(), 62);
}

#[test]
fn perturbation_modes() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "epsilons = [1.0]\n", &["perturbation"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let full: PerturbationReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/perturbation.json")).unwrap()).unwrap();
    assert!(full.delta_x_first_order.abs() < 1e-8);
    assert!(full.relative_difference.abs() < 0.1);

    let o = run(d.path(), "frozen_damping = true\n", &["perturbation"]);
    assert_eq!(code(&o), 0);
    let frozen: PerturbationReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/perturbation.json")).unwrap()).unwrap();
    assert!(frozen.delta_x_second_order.abs() < 1e-6 * full.delta_x_second_order);
    assert_eq!(frozen.nonlinear_ratio, full.nonlinear_ratio);
}

#[test]
fn spatial_demo_turns() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), "n_periods = 3\n", &["demo3d", "--epsilon", "1.0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: relcrawl_cli::commands::Demo3dReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/demo3d.json")).unwrap()).unwrap();
    assert!(r.cycle.max_multiplier() < 1.0);
    assert!(r.cycle.delta.phi.abs() > 1e-4);
    assert!(r.two_period_defect < 1e-5);
    assert_eq!(r.headings.len(), 3);
    assert!((r.headings[2] - 3.0 * r.cycle.delta.phi).abs() < 1e-6);
    let (h, rows) = read_table(&d.path().join("out/path.csv")).unwrap();
    assert_eq!(h.len(), 9);
    assert!(!rows.is_empty());
}
