use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use l1euler_cli::config::{parse_config, Command as Cmd, Overrides};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l1euler")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const MINIMAL: &str = r#"
command = "simulate"
output = "out"

[initial]
kind = "rankine"
strength = 1.0
radius = 1.0
"#;

#[test]
fn minimal_simulate_config_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "run.toml", MINIMAL);
    let cfg = parse_config(Some(&p), &Overrides::default()).unwrap();
    assert_eq!(cfg.command, Cmd::Simulate);
    assert_eq!(cfg.numerics.dt, 0.01);
    assert!(!cfg.deterministic);
}

#[test]
fn zero_dt_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "run.toml", &format!("{MINIMAL}\n[numerics]\ndt = 0.0\n"));
    let e = parse_config(Some(&p), &Overrides::default()).unwrap_err();
    assert!(e.0.contains("dt"), "{e}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "run.toml", &format!("viscosity = 0.01\n{MINIMAL}"));
    let e = parse_config(Some(&p), &Overrides::default()).unwrap_err();
    assert!(e.0.contains("viscosity"), "{e}");
    let p = write(dir.path(), "nested.toml", &format!("{MINIMAL}\n[numerics]\nviscosity = 0.01\n"));
    let e = parse_config(Some(&p), &Overrides::default()).unwrap_err();
    assert!(e.0.contains("viscosity"), "{e}");
}

#[test]
fn missing_required_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "run.toml", "output = \"x\"\n");
    let e = parse_config(Some(&p), &Overrides::default()).unwrap_err();
    assert!(e.0.contains("command"), "{e}");
    let e = parse_config(None, &Overrides { command: Some(Cmd::Verify), ..Overrides::default() }).unwrap_err();
    assert!(e.0.contains("output"), "{e}");
}

#[test]
fn invalid_enum_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "run.toml", &MINIMAL.replace("simulate", "simmer"));
    assert!(parse_config(Some(&p), &Overrides::default()).is_err());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "run.toml", MINIMAL);
    let mut o = Overrides::default();
    o.set("numerics.eps", 0.02);
    o.set_raw("stability.n_levels = 5").unwrap();
    o.set_raw("threads=auto").unwrap();
    let cfg = parse_config(Some(&p), &o).unwrap();
    assert_eq!(cfg.numerics.eps, 0.02);
    assert_eq!(cfg.stability.n_levels, 5);
    let clash = Overrides { command: Some(Cmd::Probe), ..Overrides::default() };
    assert!(parse_config(Some(&p), &clash).unwrap_err().0.contains("command"));
}

#[test]
fn effective_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "run.toml", MINIMAL);
    let cfg = parse_config(Some(&p), &Overrides::default()).unwrap();
    let echoed = write(dir.path(), "echo.toml", &cfg.to_toml());
    let again = parse_config(Some(&echoed), &Overrides::default()).unwrap();
    assert_eq!(cfg.to_toml(), again.to_toml());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bin(&["simulate", "--bogus"]).status.code(), Some(2));
    let o = bin(&["simulate", "--dt", "0", "--output", "unused"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dt"));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn blow_up_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = bin(&[
        "simulate",
        "-o",
        out.to_str().unwrap(),
        "--set",
        "initial.strength=1e5",
        "--dt",
        "1",
        "--t-end",
        "1",
        "--n",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn verify_on_the_zero_field_gives_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let p = write(
        dir.path(),
        "zero.toml",
        &format!(
            "command = \"verify\"\noutput = \"{}\"\n[initial]\nkind = \"rankine\"\nstrength = 0.0\n",
            out.display()
        ),
    );
    let o = bin(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("residuals.csv")).unwrap();
    let mut lines = text.lines().skip(2);
    let rows: Vec<&str> = lines.by_ref().collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let fields: Vec<&str> = r.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.0, "{r}");
    }
}

#[test]
fn simulate_writes_versioned_files_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = bin(&[
            "simulate",
            "-o",
            out.to_str().unwrap(),
            "--deterministic",
            "--n",
            "16",
            "--t-end",
            "0.2",
            "--dt",
            "0.02",
            "--set",
            "simulate.label_spacing=0.2",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["field_initial.csv", "field_final.csv", "flow.csv", "summary.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(x.starts_with(b"# l1euler "), "{f}");
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
    }
    let field = l1euler::io::read_field(fs::File::open(a.join("field_final.csv")).unwrap()).unwrap();
    assert!(!field.is_empty());
    assert!(a.join("config.toml").is_file());
}

#[test]
fn kernel_check_with_defaults_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k");
    let o = bin(&["kernel-check", "-o", out.to_str().unwrap(), "--plots"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(out.join("slopes.csv")).unwrap().starts_with("# l1euler kernel_slopes v1"));
    assert!(out.join("slopes.svg").is_file());
}

#[test]
fn documented_stability_config_parses() {
    let dir = tempfile::tempdir().unwrap();
    let readme = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let start = readme.find("```toml\n").unwrap() + "```toml\n".len();
    let end = start + readme[start..].find("```").unwrap();
    let p = write(dir.path(), "doc.toml", &readme[start..end]);
    let cfg = parse_config(Some(&p), &Overrides::default()).unwrap();
    assert_eq!(cfg.command, Cmd::Stability);
    assert_eq!(cfg.numerics.t_end, 12.0);
}

#[test]
fn short_stability_run_writes_levels_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = bin(&[
        "stability",
        "-o",
        out.to_str().unwrap(),
        "--plots",
        "--deterministic",
        "--t-end",
        "0.2",
        "--dt",
        "0.05",
        "--set",
        "stability.n_levels=2",
        "--set",
        "stability.setup.label_spacing=0.2",
        "--set",
        "stability.setup.vorticity_spacing=0.05",
    ]);
    // Two coarse levels: the trends may or may not hold, but the run completes.
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    assert!(fs::read_to_string(out.join("levels.csv")).unwrap().starts_with("# l1euler stability_levels v1 mode=strong_l1"));
    assert!(out.join("distances.svg").is_file());
}
