use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn symdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symdiv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().next().expect("one line")).expect("valid JSON")
}

fn sample(dir: &Path, dist: &str, n: usize, seed: u64, name: &str) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let out = symdiv(&[
        "sample",
        "--dist",
        dist,
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        &path,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn sample_writes_files_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = sample(dir.path(), "wss1d:r=4", 100, 1, "s.csv");
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert_eq!(text.lines().next(), Some("x1"));

    let out = symdiv(&[
        "sample",
        "--dist",
        "disk:l=16",
        "--n",
        "10",
        "--seed",
        "2",
        "--out",
        "-",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.lines().next(), Some("x1,x2"));
}

#[test]
fn sample_rejects_bad_arguments() {
    assert_eq!(
        code(&symdiv(&[
            "sample",
            "--dist",
            "wss1d:r=0",
            "--n",
            "10",
            "--out",
            "-"
        ])),
        2
    );
    assert_eq!(
        code(&symdiv(&["sample", "--dist", "wss1d:r=2", "--out", "-"])),
        2
    );
    assert_eq!(code(&symdiv(&["sample", "--bogus"])), 2);
}

#[test]
fn w1_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = sample(dir.path(), "disk:l=4", 50, 3, "p.csv");
    for group in ["trivial", "rot:4"] {
        let out = symdiv(&["estimate", "w1", "--p", &p, "--q", &p, "--group", group]);
        assert_eq!(code(&out), 0);
        let v = json_line(&out);
        assert_eq!(v["divergence"], "w1");
        assert!(v["value"].as_f64().unwrap().abs() <= 1e-10);
    }
}

#[test]
fn mmd_paths_agree() {
    let dir = tempfile::tempdir().unwrap();
    let p = sample(dir.path(), "disk:l=8", 120, 4, "p.csv");
    let q = sample(dir.path(), "disk:l=8", 90, 5, "q.csv");
    let run = |path: &str| {
        let out = symdiv(&[
            "estimate",
            "mmd",
            "--p",
            &p,
            "--q",
            &q,
            "--group",
            "rot:8",
            "--kernel",
            "gaussian:s=0.3",
            "--path",
            path,
        ]);
        assert_eq!(code(&out), 0);
        json_line(&out)["value"].as_f64().unwrap()
    };
    let (a, b) = (run("orbit"), run("symk"));
    assert!(a > 0.0);
    assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
}

#[test]
fn falpha_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = sample(dir.path(), "wss1d:r=2", 40, 6, "p.csv");
    let q = sample(dir.path(), "wss1d:r=2", 40, 7, "q.csv");
    let base = ["estimate", "falpha", "--p", p.as_str(), "--q", q.as_str()];

    let ok = symdiv(&[&base[..], &["--alpha", "2", "--group", "trans1d:2"]].concat());
    assert_eq!(code(&ok), 0);
    let v = json_line(&ok);
    assert!(v["value"].as_f64().unwrap() >= -1e-6);
    assert_eq!(v["diagnostics"]["converged"], true);

    assert_eq!(code(&symdiv(&[&base[..], &["--alpha", "1"]].concat())), 2);

    let stuck = symdiv(&[&base[..], &["--alpha", "2", "--max-iters", "1"]].concat());
    assert_eq!(code(&stuck), 4);
    assert_eq!(json_line(&stuck)["diagnostics"]["converged"], false);
}

#[test]
fn missing_input_file_is_an_argument_error() {
    let out = symdiv(&[
        "estimate",
        "w1",
        "--p",
        "/nonexistent/p.csv",
        "--q",
        "/nonexistent/q.csv",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn experiment_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = symdiv(&[
            "experiment",
            "--name",
            "wss1d",
            "--replicas",
            "3",
            "--seed",
            "7",
            "--orders",
            "1,4",
            "--sizes",
            "64,128,256",
            "--jobs",
            "2",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let fits = String::from_utf8(out.stdout).unwrap();
        assert_eq!(fits.lines().count(), 2);
        ["wss1d_raw.csv", "wss1d_aggregate.csv", "wss1d_ratios.csv"]
            .map(|f| std::fs::read(out_dir.join(f)).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert_eq!(
        String::from_utf8_lossy(&a[0]).lines().count(),
        1 + 2 * 3 * 3
    );
}

#[test]
fn experiment_guard_exits_3_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = symdiv(&[
        "experiment",
        "--name",
        "wss2d",
        "--replicas",
        "1",
        "--orders",
        "4",
        "--sizes",
        "4000",
        "--method",
        "lp",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "dist = \"wss1d:r=3\"\nn = 5\nout = \"-\"\n").unwrap();
    let from_file = symdiv(&["sample", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(
        String::from_utf8_lossy(&from_file.stdout).lines().count(),
        6
    );
    let flag_wins = symdiv(&["sample", "--config", cfg.to_str().unwrap(), "--n", "2"]);
    assert_eq!(
        String::from_utf8_lossy(&flag_wins.stdout).lines().count(),
        3
    );

    std::fs::write(&cfg, "dist = \"wss1d:r=3\"\nbogus = 1\n").unwrap();
    assert_eq!(
        code(&symdiv(&["sample", "--config", cfg.to_str().unwrap()])),
        2
    );
}

#[test]
fn check_reports() {
    let trivial = symdiv(&[
        "check",
        "--group",
        "trivial",
        "--kernel",
        "gaussian:s=0.5",
        "--grid",
        "8",
    ]);
    assert_eq!(code(&trivial), 0);
    assert_eq!(json_line(&trivial)["C_sigma_k"].as_f64(), Some(1.0));

    // away from the fixed point the orbit-decay constant is tiny
    let outer = symdiv(&[
        "check",
        "--group",
        "rot:16",
        "--kernel",
        "gaussian:s=0.0654",
        "--min-radius",
        "0.99",
    ]);
    let v = json_line(&outer);
    assert!(v["c_sigma_k"].as_f64().unwrap() < 1e-6);
    assert!((v["C_sigma_k"].as_f64().unwrap() - 0.25).abs() < 1e-6);

    let origin = symdiv(&[
        "check",
        "--group",
        "rot:4",
        "--kernel",
        "gaussian:s=0.5",
        "--grid",
        "8",
        "--include-origin",
    ]);
    let v = json_line(&origin);
    assert_eq!(v["kernel_assumption_violated"], true);
    assert_eq!(v["separation_ok"], false);

    assert_eq!(code(&symdiv(&["check", "--group", "rot:0"])), 2);
    assert_eq!(
        code(&symdiv(&[
            "check",
            "--group",
            "rot:4",
            "--kernel",
            "laplace:s=1"
        ])),
        2
    );
}

#[test]
fn help_and_version() {
    for sub in [
        &["sample"][..],
        &["estimate", "w1"],
        &["estimate", "mmd"],
        &["estimate", "falpha"],
        &["experiment"],
        &["check"],
    ] {
        let out = symdiv(&[sub, &["--help"]].concat());
        assert_eq!(code(&out), 0);
    }
    let out = symdiv(&["--version"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}
