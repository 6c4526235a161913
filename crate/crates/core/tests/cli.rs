use std::path::Path;
use std::process::{Command, Output};

use lacsim::cli::{body_of, config_from_header, parse_config};

const SPECTRUM: &str = r#"
subcommand = "spectrum"
[system]
kind = "single"
v = 0.1
[relaxation]
r1 = 0.5
r2 = 0.5
pump_j = 0.01
[drive]
omega1 = 0.1
f_mod = 1.0
[grid]
start = -0.5
stop = 0.5
points = 11
"#;

fn lacsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lacsim"))
        .args(args)
        .output()
        .unwrap()
}

fn run_config(dir: &Path, name: &str, text: &str) -> (Output, std::path::PathBuf) {
    let cfg = dir.join(format!("{name}.toml"));
    std::fs::write(&cfg, text).unwrap();
    let out = dir.join(format!("{name}.csv"));
    let output = lacsim(&[
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    (output, out)
}

#[test]
fn spectrum_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (output, path) = run_config(dir.path(), "spec", SPECTRUM);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = std::fs::read_to_string(path).unwrap();
    assert!(csv.contains("# phi_star = "));
    let body = body_of(&csv);
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("omega0,x,y,x_opt,n_used"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 11);
    for row in &rows {
        assert_eq!(row.len(), 5);
        for v in &row[..4] {
            v.parse::<f64>().unwrap();
        }
        assert!(row[4].parse::<usize>().unwrap() >= 64);
    }
    // Antisymmetric line: X at ±ω0 have opposite signs.
    let x_first: f64 = rows[0][1].parse().unwrap();
    let x_last: f64 = rows[10][1].parse().unwrap();
    assert!((x_first + x_last).abs() < 1e-6 * x_first.abs().max(1e-12));
}

#[test]
fn rerun_from_header_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (first, path) = run_config(dir.path(), "first", SPECTRUM);
    assert!(first.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    let echoed = config_from_header(&csv).unwrap();
    assert_eq!(echoed, parse_config(SPECTRUM).unwrap());
    let (second, path2) = run_config(dir.path(), "second", &echoed.to_toml());
    assert!(second.status.success());
    assert_eq!(std::fs::read_to_string(path2).unwrap(), csv);
}

#[test]
fn trace_and_levels_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = r#"
subcommand = "trace"
[system]
kind = "single"
v = 1.0
[drive]
omega0 = 0.0
omega1 = 4.0
f_mod = 0.01
n_steps = 400
[trace]
n_periods = 2
"#;
    let (output, path) = run_config(dir.path(), "trace", trace);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = std::fs::read_to_string(path).unwrap();
    let body = body_of(&csv);
    assert!(body.starts_with("t,field,population\r\n"));
    assert_eq!(body.lines().count(), 1 + 2 * 400 + 1);

    let levels = r#"
subcommand = "levels"
[system]
kind = "isotropic"
a_iso = 0.2
[grid]
values = [-1.0, 0.0, 1.0]
"#;
    let (output, path) = run_config(dir.path(), "levels", levels);
    assert!(output.status.success());
    let csv = std::fs::read_to_string(path).unwrap();
    assert!(body_of(&csv).starts_with("axis_value,e1,e2,e3,e4\r\n"));
}

#[test]
fn bad_config_exits_nonzero_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SPECTRUM.replace("r2 = 0.5", "r2 = -0.5");
    let (output, path) = run_config(dir.path(), "bad", &bad);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("relaxation.r2"));
    assert!(!path.exists());
    assert!(!path.with_extension("partial").exists());

    let typo = SPECTRUM.replace("pump_j", "pumpj");
    let (output, _) = run_config(dir.path(), "typo", &typo);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SPECTRUM).unwrap();
    let out = dir.path().join("missing_dir").join("out.csv");
    let output = lacsim(&[
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SPECTRUM).unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}.csv"));
        let o = lacsim(&[
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success());
        std::fs::read_to_string(out).unwrap()
    };
    assert_eq!(run("1"), run("8"));
}
