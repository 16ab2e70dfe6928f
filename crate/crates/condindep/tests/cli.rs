//! End-to-end CLI behavior: subcommands, output formats, stable exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use condindep::{draw_sample, CsvSchema, Dataset, DgpConfig, RngStream};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_condindep"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_null_sample(path: &Path, n: usize, seed: u64) {
    let cfg = DgpConfig::new(3, 0.0, 0.0, n).unwrap();
    let mut rng = RngStream::new(seed);
    let ds = draw_sample(&cfg, &mut rng);
    ds.write_csv_path(path, &CsvSchema::default()).unwrap();
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("condindep-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn critval_prints_classical_quantiles() {
    let out = run(&["critval", "--levels", "0.90,0.95,0.99"]);
    assert!(out.status.success());
    let text = stdout(&out);
    // classical points 0.34730 / 0.46136 / 0.74346
    assert!(text.contains("0.9 -> 0.3473"), "{text}");
    assert!(text.contains("0.95 -> 0.4613"), "{text}");
    assert!(text.contains("0.99 -> 0.7434"), "{text}");
}

#[test]
fn critval_rejects_out_of_range_level() {
    let out = run(&["critval", "--levels", "1.1"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn test_command_happy_path_human_and_json() {
    let data = tmp("null.csv");
    write_null_sample(&data, 500, 11);

    let oracle = "0.5773502691896258,0.5773502691896258,0.5773502691896258";
    let out = run(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "10",
        "--direction",
        oracle,
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("T_n"), "{text}");
    assert!(text.contains("p-value"), "{text}");
    assert!(text.contains("cell counts"), "{text}");

    let out = run(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "10",
        "--direction",
        oracle,
        "--format",
        "json-lines",
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(parsed["t_n"].as_f64().unwrap() >= 0.0);
    assert!(parsed["p_value_cvm"].as_f64().unwrap() <= 1.0);
    assert_eq!(parsed["m"].as_u64().unwrap(), 10);
    assert_eq!(parsed["mode"].as_str().unwrap(), "oracle");
}

#[test]
fn test_command_estimate_mode_runs() {
    let data = tmp("null-est.csv");
    write_null_sample(&data, 400, 12);
    let out = run(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "5",
        "--direction",
        "estimate",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("direction (estimate)"));
}

#[test]
fn single_class_file_is_a_data_error() {
    let data = tmp("one-class.csv");
    let ds = Dataset::from_flat(
        (0..40).map(|i| i as f64 / 40.0).collect(),
        1,
        vec![1; 40],
        (0..40).map(|i| (i * i) as f64).collect(),
    )
    .unwrap();
    ds.write_csv_path(&data, &CsvSchema::default()).unwrap();
    let out = run(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "2",
        "--direction",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn oversized_m_exits_3_with_hint_and_auto_shrink_recovers() {
    let data = tmp("n30.csv");
    write_null_sample(&data, 30, 13);
    let oracle = "0.5773502691896258,0.5773502691896258,0.5773502691896258";

    let out = run(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "25",
        "--direction",
        oracle,
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("auto-shrink-m"), "{}", stderr(&out));

    let out = run(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "25",
        "--direction",
        oracle,
        "--auto-shrink-m",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("retrying"), "{}", stderr(&out));
}

#[test]
fn missing_column_is_a_data_error() {
    let data = tmp("badcols.csv");
    std::fs::write(&data, "x1,label,z\n1,0,2\n3,1,4\n").unwrap();
    let out = run(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "1",
        "--direction",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing column"), "{}", stderr(&out));
}

#[test]
fn simulate_runs_tiny_grid_with_checkpoint_and_pivot() {
    let cfg_path = tmp("tiny.cfg");
    std::fs::write(
        &cfg_path,
        "grid.d = 1\ngrid.sigma = 0\ngrid.theta = 0, 0.5\ngrid.m = 2\n\
         grid.mode = oracle\nn = 120\nreps = 10\nlevel = 0.05\nseed = 99\n",
    )
    .unwrap();
    let out_path = tmp("tiny-out.csv");
    let pivot_path = tmp("tiny-pivot.csv");

    let out = run(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--pivot",
        pivot_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("grid complete"));

    let table = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "d,m,sigma,theta,mode,rate,mc_se,invalid_count"
    );
    assert_eq!(lines.count(), 2);
    assert!(std::fs::read_to_string(&pivot_path)
        .unwrap()
        .starts_with("d,theta,mode,sigma,rate_m2"));
    assert!(out_path.with_extension("ckpt").exists());

    // second run resumes from the checkpoint and reproduces the same table
    let rerun = run(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(rerun.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), table);
}

#[test]
fn simulate_rejects_malformed_config_with_key() {
    let cfg_path = tmp("bad.cfg");
    std::fs::write(&cfg_path, "grid.d = 1\ngrid.sigma = banana\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        tmp("never.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("grid.sigma"), "{}", stderr(&out));
}

#[test]
fn ppplot_smoke_emits_monotone_pairs() {
    let out_path = tmp("pp.csv");
    let out = run(&[
        "ppplot",
        "--d",
        "3",
        "--m",
        "20",
        "--mode",
        "oracle",
        "--n",
        "400",
        "--reps",
        "200",
        "--seed",
        "7",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("sup-gap"));

    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "asymptotic_cdf,empirical_cdf");
    let pairs: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(pairs.len(), 200);
    for w in pairs.windows(2) {
        assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
    }
}

#[test]
fn ppplot_zero_reps_is_an_argument_error() {
    let out = run(&[
        "ppplot",
        "--d",
        "3",
        "--m",
        "20",
        "--reps",
        "0",
        "--out",
        tmp("pp0.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn bundled_configs_have_the_study_shapes() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for (name, d, modes, thetas) in [
        ("size_d3.cfg", 3usize, 2usize, 1usize),
        ("size_d5.cfg", 5, 2, 1),
        ("power_d3.cfg", 3, 1, 5),
        ("power_d5.cfg", 5, 1, 5),
    ] {
        let grid = condindep::cli::parse_grid_config(&root.join(name)).unwrap();
        assert_eq!(grid.d_values, vec![d], "{name}");
        assert_eq!(grid.sigma_values.len(), 5, "{name}");
        assert_eq!(grid.theta_values.len(), thetas, "{name}");
        assert_eq!(grid.m_values, vec![10, 15, 20], "{name}");
        assert_eq!(grid.modes.len(), modes, "{name}");
        assert_eq!(grid.n, 1000, "{name}");
        assert_eq!(grid.level, 0.05, "{name}");
    }
}
