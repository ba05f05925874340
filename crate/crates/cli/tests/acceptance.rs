//! Acceptance run: one line per criterion, then a single assertion so
//! every criterion is reported even when an earlier one fails.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use ul_core::corpus::{corpus_suite, Program};
use ul_core::parser::Elaborated;
use ul_core::testkit::{self, list_value, nat, nat_value};
use ul_core::*;

const SEED: u64 = 1;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn within(start: Instant, limit_s: u64) -> (bool, String) {
    let t = start.elapsed();
    (t <= Duration::from_secs(limit_s), format!("{:.1}s of {limit_s}s", t.as_secs_f64()))
}

/// 10^4 configurations, at most 50 steps each: no type changes, no stuck
/// states.
fn criterion_1() -> Verdict {
    let start = Instant::now();
    let r = testkit::check_subject_reduction(10_000, 50, SEED);
    let (fast, time) = within(start, 300);
    Verdict {
        pass: r.samples == 10_000 && r.failures == 0 && fast,
        detail: format!(
            "{} configurations, {} violations, {} with stores, {time}{}",
            r.samples,
            r.failures,
            r.counters.get("nonempty_store").copied().unwrap_or(0),
            r.counterexample.map(|c| format!("; {c}")).unwrap_or_default()
        ),
    }
}

/// Every L type up to size 8 has at most one compatible U type.
fn criterion_2() -> Verdict {
    let start = Instant::now();
    let r = testkit::check_determinism(8, 6, 5);
    let (fast, time) = within(start, 60);
    Verdict {
        pass: r.failures == 0 && r.samples > 0 && fast,
        detail: format!(
            "{} types, {} with a compatible U type, {} ambiguous or inconsistent, {time}{}",
            r.samples,
            r.counters.get("in_image").copied().unwrap_or(0),
            r.failures,
            r.counterexample.map(|c| format!("; {c}")).unwrap_or_default()
        ),
    }
}

/// 10^3 first-order round trips are exact; function types agree on 300
/// argument probes.
fn criterion_3() -> Verdict {
    let start = Instant::now();
    let r = testkit::check_roundtrip(1000, 100, 3, SEED);
    let (fast, time) = within(start, 120);
    let probes = r.counters.get("probes").copied().unwrap_or(0);
    Verdict {
        pass: r.failures == 0 && r.samples == 1100 && probes >= 100 && fast,
        detail: format!(
            "{} triples, {probes} probes, {} mismatches, {time}{}",
            r.samples,
            r.failures,
            r.counterexample.map(|c| format!("; {c}")).unwrap_or_default()
        ),
    }
}

/// Direct runs and translated runs agree on generated programs and on
/// the corpus; projection and compositionality hold.
fn criterion_4() -> Verdict {
    let start = Instant::now();
    let diff = testkit::check_differential(1000, DEFAULT_FUEL, SEED);
    let proj = testkit::check_projection(1000, SEED);
    let comp = testkit::check_compositionality_pairs(100, SEED);
    let corpus = corpus_suite(&root().join("corpus"));
    let corpus_programs = corpus.entries.iter().filter(|e| !e.name.starts_with("ill")).count();
    let (fast, time) = within(start, 600);
    let cex = [diff.counterexample, proj.counterexample, comp.counterexample].into_iter().flatten().next();
    Verdict {
        pass: diff.failures == 0
            && diff.samples == 1000
            && proj.failures == 0
            && comp.failures == 0
            && comp.samples == 100
            && corpus.passed()
            && fast,
        detail: format!(
            "differential {}/{} disagreements ({} both diverge), projection {} failures, \
             compositionality {}/{} failures, corpus {corpus_programs} programs {}, {time}{}",
            diff.failures,
            diff.samples,
            diff.counters.get("both_diverge").copied().unwrap_or(0),
            proj.failures,
            comp.failures,
            comp.samples,
            if corpus.passed() { "agree" } else { "FAIL" },
            cex.map(|c| format!("; {c}")).unwrap_or_default()
        ),
    }
}

/// rev_into allocates nothing for lists of length 1..=32, while the
/// translated program builds at least n pairs.
fn criterion_5() -> Verdict {
    let src = std::fs::read_to_string(root().join("corpus/rev.ul")).unwrap();
    let prog = Program::load(&src).unwrap();
    let rev = prog
        .items
        .iter()
        .find_map(|(n, e)| match e {
            Elaborated::U(e) if n == "rev" => Some(e.clone()),
            _ => None,
        })
        .unwrap();
    let mut bad = Vec::new();
    let mut min_pairs = u64::MAX;
    for n in 1..=32usize {
        let xs: Vec<UExpr> = (0..n).map(|i| nat_value(i % 5)).collect();
        let mut rev_xs: Vec<UExpr> = xs.clone();
        rev_xs.reverse();
        let prog_n = UExpr::app(rev.clone(), list_value(&nat(), &xs));
        let (out, m) = run(&prog_n, DEFAULT_FUEL);
        let allocs = m.phase_stats.get("rev_into").map(|s| s.new_allocs);
        let value_ok = out.value().is_some_and(|v| alpha_eq_uexpr(v, &list_value(&nat(), &rev_xs)));
        let tr = funtrans_u(&prog_n).unwrap();
        let (tout, tm) = run(&tr, 10 * DEFAULT_FUEL);
        let pairs = tm.stats.pair_constructions;
        min_pairs = min_pairs.min(pairs.saturating_sub(n as u64));
        let oracle_ok = tout.value().is_some_and(|v| alpha_eq_uexpr(v, out.value().unwrap_or(v)));
        if allocs != Some(0) || !value_ok || pairs < n as u64 || !oracle_ok {
            bad.push(format!("n={n}: new_allocs(rev_into)={allocs:?} pairs={pairs} value_ok={value_ok}"));
        }
    }
    let cli = Command::new(env!("CARGO_BIN_EXE_ul"))
        .args(["run", "corpus/rev.ul", "--stats"])
        .current_dir(root())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&cli.stdout);
    let cli_ok = cli.status.success() && stdout.lines().any(|l| l == "new_allocs(rev_into)=0");
    if !cli_ok {
        bad.push(format!("`ul run corpus/rev.ul --stats` printed:\n{stdout}"));
    }
    Verdict {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!(
                "n = 1..32: new_allocs(rev_into) = 0 and the translation builds at least n + {min_pairs} pairs; \
                 CLI prints new_allocs(rev_into)=0"
            )
        } else {
            bad.join("; ")
        },
    }
}

/// The three ill-typed programs fail with their codes and exact
/// diagnostics, through the library and through the CLI.
fn criterion_6() -> Verdict {
    let report = corpus_suite(&root().join("corpus"));
    let ill: Vec<_> = report.entries.iter().filter(|e| e.name.starts_with("ill")).collect();
    let mut bad: Vec<String> = ill.iter().filter(|e| !e.passed()).map(|e| format!("{}: {:?}", e.name, e.failures)).collect();
    for (file, code, name) in [
        ("noclose", "E002", "LinearVariableUnused"),
        ("reuse", "E001", "LinearVariableReused"),
        ("share_linear", "E003", "ShareCapturesLinear"),
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_ul"))
            .args(["check", &format!("corpus/ill/{file}.ul")])
            .current_dir(root())
            .env("UL_COLOR", "0")
            .output()
            .unwrap();
        let err = String::from_utf8_lossy(&out.stderr);
        if out.status.code() != Some(1) || !err.starts_with(&format!("error[{code}] {name}:")) {
            bad.push(format!("ul check {file}: exit {:?}, stderr {err}", out.status.code()));
        }
    }
    Verdict {
        pass: ill.len() == 3 && bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} programs rejected with E002, E001, E003 and golden diagnostics", ill.len())
        } else {
            bad.join("; ")
        },
    }
}

/// Each mutant evaluator is caught within 10^3 samples.
fn criterion_7() -> Verdict {
    let results = testkit::check_mutants(1000, DEFAULT_FUEL, SEED);
    let pass = results.len() == 4 && results.iter().all(|m| m.caught());
    let detail = results
        .iter()
        .map(|m| {
            format!(
                "{} (sr {}/{}, differential first at {})",
                m.mutant,
                m.subject_reduction_failures,
                m.samples,
                m.differential_first_failure.map_or("none".into(), |i| i.to_string())
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    Verdict { pass, detail }
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("subject reduction and progress", criterion_1),
        ("compatibility determinism", criterion_2),
        ("conversion round trip", criterion_3),
        ("direct vs translated runs", criterion_4),
        ("in-place reversal", criterion_5),
        ("typestate negative tests", criterion_6),
        ("mutation sanity", criterion_7),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        let line = format!("criterion {} {name}: {}: {}\n", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        // straight to the stream, so the lines show up even when the
        // harness captures test output
        let _ = std::io::stderr().lock().write_all(line.as_bytes());
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
