use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ponsim"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).to_path_buf()
}

fn preset(name: &str) -> PathBuf {
    root().join("../core/scenarios").join(format!("{name}.toml"))
}

fn fixture(name: &str) -> PathBuf {
    root().join("tests/fixtures").join(format!("{name}.toml"))
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(root().join("tests/golden").join(name)).unwrap()
}

fn run(args: &[&std::ffi::OsStr]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8(b.to_vec()).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn run_into(file: &Path, dir: &Path, extra: &[&str]) -> Output {
    let mut c = bin();
    c.arg("run").arg(file).arg("--out").arg(dir).args(extra);
    c.output().unwrap()
}

#[test]
fn presets_validate() {
    for name in ["paper-3x3", "paper-e2e", "awgr-cell"] {
        let o = run(&["validate".as_ref(), preset(name).as_os_str()]);
        assert_eq!(code(&o), 0, "{name}: {}", text(&o.stdout));
        assert!(!text(&o.stdout).contains("FAIL"));
    }
}

#[test]
fn overlap_fails_validation() {
    let o = run(&["validate".as_ref(), fixture("overlap").as_os_str()]);
    assert_eq!(code(&o), 1);
    let out = text(&o.stdout);
    assert!(out.contains("FAIL subnet-overlap"), "{out}");
    assert!(out.contains("10.0.0.0/24, 10.0.0.128/25"), "{out}");
}

#[test]
fn malformed_document_reports_location() {
    let o = run(&["validate".as_ref(), fixture("malformed").as_os_str()]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("line 5, column 19"), "{}", text(&o.stderr));
    let missing = run(&["validate".as_ref(), "no/such/file.toml".as_ref()]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn run_refuses_invalid_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(&fixture("overlap"), dir.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("summary.txt").exists());
}

#[test]
fn preset_traceroute_has_150_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(&preset("paper-e2e"), dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let csv = read(dir.path(), "01-traceroute.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iteration,hop-index,hop-node,probe-index,rtt-us"));
    assert_eq!(lines.count(), 150);
    assert!(dir.path().join("02-stream.csv").exists());
}

#[test]
fn steady_outputs_match_golden() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_into(&fixture("steady"), dir.path(), &[])), 0);
    assert_eq!(read(dir.path(), "01-traceroute.csv"), golden("steady-traceroute.csv"));
    assert_eq!(read(dir.path(), "02-ping.csv"), golden("steady-ping.csv"));
    assert_eq!(read(dir.path(), "summary.txt"), golden("steady-summary.txt"));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(code(&run_into(&preset("paper-e2e"), d.path(), &["--seed", "5"])), 0);
    }
    assert_eq!(code(&run_into(&preset("paper-e2e"), c.path(), &["--seed", "6"])), 0);
    for f in ["summary.txt", "01-traceroute.csv", "02-stream.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    assert_ne!(read(a.path(), "01-traceroute.csv"), read(c.path(), "01-traceroute.csv"));
    assert!(read(a.path(), "summary.txt").contains("\nseed 5\n"));
}

#[test]
fn empty_experiment_list_writes_summary_only() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_into(&fixture("empty"), dir.path(), &[])), 0);
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["summary.txt"]);
    assert!(read(dir.path(), "summary.txt").contains("experiments 0"));
}

fn export(file: &Path, sel: &str) -> Output {
    bin().arg("export").arg(file).args(["--nodes", sel]).output().unwrap()
}

#[test]
fn export_gateways() {
    let o = export(&preset("paper-3x3"), "gateways");
    assert_eq!(code(&o), 0);
    let out = text(&o.stdout);
    assert_eq!(out.matches("# node ").count(), 3);
    assert_eq!(out, golden("paper-3x3-gateways.conf"));
    assert_eq!(out, text(&export(&preset("paper-3x3"), "gateways").stdout));
}

#[test]
fn export_selectors() {
    let none = export(&preset("paper-3x3"), "nothing-*");
    assert_eq!(code(&none), 0);
    assert!(none.stdout.is_empty());
    assert!(text(&none.stderr).contains("warning"));

    let bad = export(&preset("paper-3x3"), "nobody");
    assert_eq!(code(&bad), 1);
    assert!(text(&bad.stderr).contains("unknown node selector"));

    let one = export(&preset("paper-3x3"), "r2-g1-s3");
    assert_eq!(
        text(&one.stdout),
        "# node r2-g1-s3 server\niface eth0 addr 10.0.1.3/24\nroute 0.0.0.0/0 via 10.0.1.1\n"
    );
}

#[test]
fn export_all_to_directory_twice() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = bin()
            .arg("export")
            .arg(preset("paper-e2e"))
            .args(["--nodes", "all", "--out"])
            .arg(d.path())
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 13);
    for n in names {
        let n = n.to_string_lossy();
        assert_eq!(read(a.path(), &n), read(b.path(), &n));
    }
}
