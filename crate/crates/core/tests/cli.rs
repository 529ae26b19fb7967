use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cteskf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cteskf"))
        .args(args)
        .current_dir(dir)
        .env_remove("CTESKF_FAULT")
        .output()
        .expect("binary starts")
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

const SHORT: &str = "[scenario]\nduration = 10.0\ninitial_error = [10.0, 10.0, 30.0]\n[odo]\nenabled = true\n\
                     [filter]\nvariants = [\"ekf\", \"l-inekf\", \"r-inekf\", \"ct-ekf\", \"sw-ekf\"]\n";

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_exits_cleanly() {
    let tmp = TempDir::new().unwrap();
    for args in [&["--help"][..], &["run", "--help"], &["verify", "--help"]] {
        let o = cteskf(args, tmp.path());
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        assert!(stdout(&o).contains("Usage"));
    }
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let c = config(tmp.path(), "c.toml", SHORT);
    for out in ["a", "b"] {
        let o = cteskf(&["simulate", "-c", &c, "-o", out, "--seed", "5"], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = cteskf(&["simulate", "-c", &c, "-o", "other", "--seed", "6"], tmp.path());
    assert!(o.status.success());
    for f in ["imu.csv", "gnss_vel.csv", "odo.csv", "truth.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
        if f != "truth.csv" {
            assert_ne!(a, fs::read(tmp.path().join("other").join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn malformed_configs_write_nothing() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("[scenario]\nduration = 0.0\n", "duration"),
        ("[scenario]\nduraton = 3.0\n", "duraton"),
        ("[filter]\nvariants = [\"ukf\"]\n", "ukf"),
        ("[filter]\ninjection = \"second-order\"\n", "second-order"),
        ("[sweep]\nyaw_step = -5.0\n", "yaw_step"),
        ("[scenario\n", "TOML"),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let c = config(tmp.path(), &format!("bad{k}.toml"), text);
        // the whole file is checked, whatever the command uses
        for cmd in ["run", "simulate", "sweep"] {
            let out = format!("out{k}{cmd}");
            let o = cteskf(&[cmd, "-c", &c, "-o", &out], tmp.path());
            assert_eq!(o.status.code(), Some(1), "{cmd}: {text}");
            assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
            assert!(!tmp.path().join(&out).exists(), "{text}: output written");
        }
    }
}

#[test]
fn run_writes_estimates_and_summary() {
    let tmp = TempDir::new().unwrap();
    let c = config(tmp.path(), "c.toml", SHORT);
    let o = cteskf(&["run", "-c", &c, "-o", "run"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(tmp.path().join("run/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("variant,status,att_rmse_deg"));
    for v in ["ekf", "l-inekf", "r-inekf", "ct-ekf", "sw-ekf"] {
        assert!(lines.iter().any(|l| l.starts_with(&format!("{v},ok,"))), "{v}");
        let est = fs::read_to_string(tmp.path().join(format!("run/estimates_{v}.csv"))).unwrap();
        // header plus the initial epoch plus one row per IMU sample at 200 Hz
        assert_eq!(est.lines().count(), 2 + 2000, "{v}");
    }
}

#[test]
fn replayed_dataset_reproduces_the_simulated_run() {
    let tmp = TempDir::new().unwrap();
    let c = config(tmp.path(), "c.toml", SHORT);
    assert!(cteskf(&["simulate", "-c", &c, "-o", "data"], tmp.path()).status.success());
    assert!(cteskf(&["run", "-c", &c, "-o", "live"], tmp.path()).status.success());
    let o = cteskf(&["run", "-c", &c, "-o", "replay", "--dataset", "data"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |d: &str| fs::read_to_string(tmp.path().join(d).join("summary.csv")).unwrap();
    assert_eq!(read("live"), read("replay"));
}

#[test]
fn divergence_gives_a_distinct_exit_code() {
    let tmp = TempDir::new().unwrap();
    let c = config(
        tmp.path(),
        "d.toml",
        "[scenario]\nduration = 20.0\ninitial_error = [10.0, 10.0, 150.0]\n[odo]\nenabled = true\n\
         [filter]\nvariants = [\"ct-ekf\"]\n",
    );
    let o = cteskf(&["run", "-c", &c, "-o", "d"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("diverged"));
    assert!(fs::read_to_string(tmp.path().join("d/summary.csv")).unwrap().contains("ct-ekf,diverged"));
}

#[test]
fn sweep_is_deterministic_across_job_counts() {
    let tmp = TempDir::new().unwrap();
    let c = config(
        tmp.path(),
        "s.toml",
        &format!("{SHORT}[sweep]\nyaw_start = -60.0\nyaw_stop = 60.0\nyaw_step = 60.0\nseeds = 2\n"),
    );
    for (out, jobs) in [("s1", "1"), ("s2", "2")] {
        let o = cteskf(&["sweep", "-c", &c, "-o", out, "--jobs", jobs], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read_to_string(tmp.path().join("s1/rmse.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(tmp.path().join("s2/rmse.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "yaw_deg,ekf,l-inekf,r-inekf,ct-ekf,sw-ekf");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("-60,"));

    let o = cteskf(&["sweep", "-c", &c, "-o", "s3", "--jobs", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_fast_passes_and_catches_a_sign_fault() {
    let tmp = TempDir::new().unwrap();
    let o = cteskf(&["verify", "--level", "fast", "-o", "v"], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "property,status,measured,tolerance,seconds");
    assert!(lines.len() > 10);
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 5, "{l}");
        assert_eq!(l.split(',').nth(1), Some("pass"), "{l}");
    }
    assert_eq!(fs::read_to_string(tmp.path().join("v/verify.csv")).unwrap(), text);

    let o = Command::new(env!("CARGO_BIN_EXE_cteskf"))
        .args(["verify"])
        .current_dir(tmp.path())
        .env("CTESKF_FAULT", "flip-t-ekf-r")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    let closure = text.lines().find(|l| l.starts_with("transformation-closure,")).unwrap();
    assert!(closure.contains(",fail,"), "{closure}");
    let group = text.lines().find(|l| l.starts_with("group-affine,")).unwrap();
    assert!(group.contains(",pass,"), "{group}");
}
