//! End-to-end runs of the `lpkato` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lpkato(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpkato")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Report body without the `#` header lines.
fn body(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn classify_brownian_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lpkato(&[
        "classify", "--process", "brownian:d=3", "--measure", "lebesgue:ball(0,1)", "--p", "1", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: IN"));
    let csv = fs::read_to_string(dir.path().join("classify.csv")).unwrap();
    assert!(csv.starts_with("# lpkato "));
    assert!(csv.contains("# command = \"classify\""));
    let row = csv.lines().find(|l| l.starts_with("s_k,")).unwrap();
    assert!(row.contains("IN"), "{row}");
    assert!(dir.path().join("classify-profiles.csv").exists());
}

#[test]
fn b0_strip_is_out_and_fails_under_assert_in() {
    let o = lpkato(&["b0", "--domain", "strip:w=1,d=2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: OUT"));
    let o = lpkato(&["b0", "--domain", "strip:w=1,d=2", "--assert-in"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn inconclusive_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "command = \"b0\"\n\
         [domain]\ndim = 2\nkind = \"horn\"\nstart = 1.0\n\
         [domain.profile]\ntype = \"power\"\nscale = 1.0\nexponent = 1.0\n\
         [b0]\nradii = [10.0, 20.0, 40.0, 80.0]\n",
    )
    .unwrap();
    let o = lpkato(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("verdict: INCONCLUSIVE"));
}

#[test]
fn kernels_selftest_passes() {
    let o = lpkato(&["kernels-selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("false"));
}

#[test]
fn usage_errors_name_the_field() {
    let o = lpkato(&["classify", "--process", "brownian:d=3", "--p", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = lpkato(&["classify", "--process", "stable:d=2,alpha=3", "--measure", "lebesgue:ball(0,1)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`process`"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "command = \"fk\"\n[fk]\ndt = \"small\"\n").unwrap();
    let o = lpkato(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config error at `fk.dt`"), "{}", stderr(&o));

    fs::write(&cfg, "command = \"b0\"\ncolour = 1\n").unwrap();
    let o = lpkato(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_configs_give_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    // small path count through a config keeps the run short
    let cfg = a.path().join("fk.toml");
    fs::write(&cfg, "command = \"fk\"\n[fk]\nmode = \"exit\"\npaths = 4000\ndt = 0.01\n").unwrap();
    let run_cfg = |dir: &Path, threads: &str| {
        let o = lpkato(&[
            "--config", cfg.to_str().unwrap(), "--process", "brownian:d=1", "--domain", "interval(-1,1)",
            "--seed", "42", "--threads", threads, "--out", dir.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    run_cfg(a.path(), "1");
    run_cfg(b.path(), "2");
    assert_eq!(body(&a.path().join("fk.csv")), body(&b.path().join("fk.csv")));

    for dir in [a.path(), b.path()] {
        let o = lpkato(&[
            "classify", "--process", "stable:d=2,alpha=1", "--measure", "lebesgue:ball(0,1)", "--p", "1.5",
            "--format", "record", "--out", dir.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ra = body(&a.path().join("classify.toml"));
    assert_eq!(ra, body(&b.path().join("classify.toml")));
    let rec: toml::Value = toml::from_str(&ra).unwrap();
    assert_eq!(rec["headline"].as_str(), Some("IN"));
}

#[test]
fn printed_config_round_trips() {
    let o = lpkato(&[
        "potential", "--process", "relativistic:d=3,alpha=1,m=1", "--measure", "sphere(0,1)", "--p", "1.5",
        "--seed", "9", "--print-config",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = stdout(&o);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, &first).unwrap();
    let o = lpkato(&["--config", cfg.to_str().unwrap(), "--print-config"]);
    assert_eq!(stdout(&o), first);
}

#[test]
fn potential_and_embed_runs() {
    let o = lpkato(&[
        "potential", "--process", "brownian:d=3", "--measure", "lebesgue:ball(0,1)", "--p", "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: IN"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("e.toml");
    fs::write(&cfg, "command = \"embed\"\n[embed]\nmode = \"dirichlet\"\nspacings = [0.02, 0.01]\nk = 2\n").unwrap();
    let o = lpkato(&["--config", cfg.to_str().unwrap(), "--domain", "interval(0,1)", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = fs::read_to_string(dir.path().join("embed.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("k,")));
}
