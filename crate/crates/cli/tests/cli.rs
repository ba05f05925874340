use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ul")).args(args).current_dir(root()).env_remove("UL_COLOR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ul-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn check_prints_types() {
    let o = ul(&["check", "corpus/swap.ul"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "swap : (Box t * t) -o (Box t * t)"), "{out}");
    assert!(out.lines().any(|l| l == "main : bool * bool"), "{out}");
}

#[test]
fn check_reports_linear_errors() {
    let o = ul(&["check", "corpus/ill/reuse.ul"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[E001] LinearVariableReused: linear variable `h`"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn run_prints_value_and_stats() {
    let o = ul(&["run", "corpus/rev.ul", "--stats"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("fold[List(Nat)] inr"));
    assert!(lines.contains(&"new_allocs(rev_into)=0"));
    assert!(lines.iter().skip(1).all(|l| l.contains('=')));
}

#[test]
fn run_refuses_ill_typed_files() {
    let o = ul(&["run", "corpus/ill/noclose.ul"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("E002"));
}

#[test]
fn run_out_of_fuel_fails() {
    let o = ul(&["run", "corpus/rev.ul", "--fuel", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("out of fuel"));
}

#[test]
fn trace_writes_records() {
    let path = scratch("swap.jsonl");
    let o = ul(&["run", "corpus/swap.ul", "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).starts_with("step 1: "));
    let text = std::fs::read_to_string(&path).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for k in ["step", "rule", "store_size", "allocs"] {
        assert!(first.get(k).is_some(), "missing {k} in {first}");
    }
    assert_eq!(text.lines().count(), 16);
}

#[test]
fn translate_output_checks_at_the_same_type() {
    for name in ["swap", "quicksort"] {
        let o = ul(&["translate", &format!("corpus/{name}.ul")]);
        assert_eq!(o.status.code(), Some(0));
        let path = scratch(&format!("{name}.ul"));
        std::fs::write(&path, stdout(&o)).unwrap();
        let c = ul(&["check", path.to_str().unwrap()]);
        assert_eq!(c.status.code(), Some(0), "{}", stderr(&c));
        let r = ul(&["run", path.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
        assert!(!stdout(&r).trim().is_empty());
    }
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(ul(&[]).status.code(), Some(64));
    assert_eq!(ul(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(ul(&["run", "corpus/rev.ul", "--fuel", "lots"]).status.code(), Some(64));
    assert_eq!(ul(&["meta", "--props", "nonsense", "--samples", "1"]).status.code(), Some(64));
    assert_eq!(ul(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_file_is_a_failure() {
    let o = ul(&["check", "corpus/does-not-exist.ul"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn parse_errors_have_codes() {
    let path = scratch("bad.ul");
    std::fs::write(&path, "main = (fun (x : unit) -> ;").unwrap();
    let o = ul(&["check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[S001] ParseError:"), "{}", stderr(&o));
}

#[test]
fn color_is_opt_in() {
    let o = Command::new(env!("CARGO_BIN_EXE_ul"))
        .args(["check", "corpus/ill/reuse.ul"])
        .current_dir(root())
        .env("UL_COLOR", "1")
        .output()
        .unwrap();
    assert!(stderr(&o).starts_with("\x1b[31merror[E001]"));
    assert!(!stderr(&ul(&["check", "corpus/ill/reuse.ul"])).contains('\x1b'));
}

#[test]
fn meta_writes_a_summary() {
    let path = scratch("report.json");
    let o = ul(&[
        "meta",
        "--samples",
        "40",
        "--seed",
        "3",
        "--props",
        "sr,roundtrip,projection",
        "--report",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    for r in arr {
        for k in ["property", "samples", "failures", "seed", "runtime_ms"] {
            assert!(r.get(k).is_some(), "missing {k}");
        }
        assert_eq!(r["seed"], 3);
    }
}

#[test]
fn meta_fails_with_2_on_violations() {
    // the corpus property against a directory with a wrong sidecar
    let dir = scratch("badcorpus");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("p.ul"), "main = ();").unwrap();
    std::fs::write(dir.join("p.toml"), "value = \"((), ())\"\n").unwrap();
    let o = ul(&["meta", "--props", "corpus", "--corpus", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL p.ul"));
}
