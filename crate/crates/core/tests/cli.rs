//! End-to-end runs of the binary.

use std::path::Path;
use std::process::{Command, Output};

fn stirring(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stirring")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_is_deterministic_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        ["simulate", "--dim", "2", "--edge", "20", "--dt", "1e-3", "--t-end", "20", "--seed", "1", "--out", out]
            .map(String::from)
    };
    for out in ["a.csv", "b.csv"] {
        let a = args(out);
        let o = stirring(&a.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,LX,LY,Bx,By,Xx,Xy,Yx,Yy,fXx,fXy,fYx,fYy");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(first.len(), 13);
    assert_eq!(&first[..3], &[0.0, 0.0, 0.0]);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["base_seed"], 1);
    assert_eq!(manifest["config"]["edge"], 20.0);
    assert_eq!(manifest["outputs"][0], "a.csv");
}

#[test]
fn replicas_get_their_own_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = stirring(
        &[
            "frozen", "--dim", "3", "--edge", "inf", "--t-end", "1", "--paths", "3", "--out", "f.json", "--format",
            "json",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    for k in 0..3 {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("f.json.{k}"))).unwrap()).unwrap();
        assert!(v.as_array().unwrap().len() > 1);
        assert_eq!(v[0]["xx"], 0.0);
    }
}

#[test]
fn oracle2d_prints_estimate_near_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = stirring(&["oracle2d", "--u", "1", "--paths", "100000", "--delta", "0.05", "--seed", "7"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let field = |name: &str| -> f64 {
        out.split_whitespace().find_map(|w| w.strip_prefix(&format!("{name}="))).unwrap().parse().unwrap()
    };
    let (est, se) = (field("estimate"), field("stderr"));
    let target = 1.0 + (-1.0f64).exp() - 1.0;
    assert!((est - target).abs() < 4.0 * se, "{out}");
}

#[test]
fn excursions_and_histograms_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    let o = stirring(&["excursions", "--dim", "2", "--edge", "10", "--t-end", "200", "--out", "e.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(e.lines().next().unwrap(), "start_x,start_y,end_x,end_y,zeta,max_radius,which_ball");

    let o = stirring(&["wos", "--b", "4", "--paths", "5000", "--out", "h.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert_eq!(h.lines().next().unwrap(), "bin_lo,bin_hi,count");
    assert_eq!(h.lines().count(), 21);
    assert!(dir.path().join("h.csv.manifest.json").exists());
}

#[test]
fn bad_flags_exit_2_runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = stirring(&["simulate", "--edge", "3", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = stirring(&["simulate", "--dt", "fast", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = stirring(&["teleport"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = stirring(&["simulate", "--dim", "7", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension 7"));
    let o = stirring(&["simulate", "--dt", "0.5", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = stirring(&["kelvin", "--dim", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    for (threads, out) in [("1", "c1.csv"), ("4", "c4.csv")] {
        let o = stirring(
            &["--threads", threads, "coupling", "--paths", "300", "--dt", "1e-3", "--seed", "5", "--out", out],
            dir.path(),
        );
        assert!(o.status.success());
    }
    let a = std::fs::read(dir.path().join("c1.csv")).unwrap();
    let b = std::fs::read(dir.path().join("c4.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn quick_verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = stirring(&["verify", "--quick", "--out", "report.json"], dir.path());
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count(), 5, "{out}");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for r in v.as_array().unwrap() {
        for key in ["test_id", "statistic", "p_value", "pass", "n", "params"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }
    assert!(o.status.success(), "{out}");
}
