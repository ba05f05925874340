use std::path::PathBuf;

use ul_core::corpus::{corpus_files, corpus_suite, Program};
use ul_core::parser::{parse, Elaborated};
use ul_core::testkit::{list_value, nat, nat_value};
use ul_core::*;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(name: &str) -> Program {
    let src = std::fs::read_to_string(corpus_dir().join(name)).unwrap();
    Program::load(&src).unwrap()
}

fn item(p: &Program, name: &str) -> UExpr {
    p.items
        .iter()
        .find_map(|(n, e)| match e {
            Elaborated::U(e) if n == name => Some(e.clone()),
            _ => None,
        })
        .unwrap()
}

/// Reads a U natural back as a number.
fn nat_of(v: &UExpr) -> usize {
    let mut n = 0;
    let mut cur = v;
    loop {
        let UExpr::Fold(_, inner) = cur else { panic!("not a nat: {v}") };
        match &**inner {
            UExpr::Inj(Side::Left, _, _) => return n,
            UExpr::Inj(Side::Right, _, rest) => {
                n += 1;
                cur = rest;
            }
            _ => panic!("not a nat: {v}"),
        }
    }
}

fn list_of(v: &UExpr) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = v;
    loop {
        let UExpr::Fold(_, inner) = cur else { panic!("not a list: {v}") };
        match &**inner {
            UExpr::Inj(Side::Left, _, _) => return out,
            UExpr::Inj(Side::Right, _, cell) => {
                let UExpr::Pair(x, rest) = &**cell else { panic!("not a list: {v}") };
                out.push(nat_of(x));
                cur = rest;
            }
            _ => panic!("not a list: {v}"),
        }
    }
}

fn nat_list(xs: &[usize]) -> UExpr {
    list_value(&nat(), &xs.iter().map(|&n| nat_value(n)).collect::<Vec<_>>())
}

fn insertion_sort(xs: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &x in xs {
        let i = out.iter().position(|&y| y > x).unwrap_or(out.len());
        out.insert(i, x);
    }
    out
}

#[test]
fn corpus_matches_sidecars() {
    let report = corpus_suite(&corpus_dir());
    assert!(report.entries.len() >= 8, "{}", report.text());
    assert!(report.passed(), "{}", report.text());
}

#[test]
fn pretty_printed_files_parse_back_to_the_same_program() {
    for path in corpus_files(&corpus_dir()) {
        let src = std::fs::read_to_string(&path).unwrap();
        let file = parse(&src).unwrap();
        let again = parse(&file.pretty()).unwrap_or_else(|e| panic!("{}: {e}\n{}", path.display(), file.pretty()));
        let a = ul_core::parser::elaborate_items(&file).unwrap();
        let b = ul_core::parser::elaborate_items(&again).unwrap();
        assert_eq!(a.len(), b.len());
        for ((n1, e1), (n2, e2)) in a.iter().zip(&b) {
            assert_eq!(n1, n2);
            let same = match (e1, e2) {
                (Elaborated::U(x), Elaborated::U(y)) => alpha_eq_uexpr(x, y),
                (Elaborated::L(x), Elaborated::L(y)) => alpha_eq_lexpr(x, y),
                _ => false,
            };
            assert!(same, "{}: `{n1}` changed after printing", path.display());
        }
    }
}

#[test]
fn rev_agrees_with_a_reference_reverse() {
    let p = load("rev.ul");
    let rev = item(&p, "rev");
    for n in [0, 1, 2, 5, 9] {
        let xs: Vec<usize> = (0..n).map(|i| (i * 7) % 4).collect();
        let (out, m) = run(&UExpr::app(rev.clone(), nat_list(&xs)), DEFAULT_FUEL);
        let got = list_of(out.value().expect("rev terminates"));
        let mut want = xs.clone();
        want.reverse();
        assert_eq!(got, want);
        assert_eq!(m.phase_stats.get("rev_into").map_or(0, |s| s.new_allocs), 0);
    }
}

#[test]
fn quicksort_agrees_with_insertion_sort() {
    let p = load("quicksort.ul");
    let qs = item(&p, "quicksort");
    for xs in [vec![], vec![1], vec![3, 1, 2], vec![2, 0, 3, 1, 2], vec![4, 4, 1, 0, 3, 2, 0]] {
        let (out, m) = run(&UExpr::app(qs.clone(), nat_list(&xs)), DEFAULT_FUEL);
        assert_eq!(list_of(out.value().expect("quicksort terminates")), insertion_sort(&xs), "{xs:?}");
        let st = m.phase_stats.get("quicksort_aux").copied().unwrap_or_default();
        assert_eq!(st.new_allocs, st.frees, "{xs:?}");
    }
}

#[test]
fn main_values_read_back() {
    let (out, _) = run(load("rev.ul").main().unwrap(), DEFAULT_FUEL);
    assert_eq!(list_of(out.value().unwrap()), vec![2, 1, 0]);
    let (out, _) = run(load("mutset.ul").main().unwrap(), DEFAULT_FUEL);
    assert_eq!(list_of(out.value().unwrap()), vec![0, 1, 2]);
    // "1 2" and "3", each followed by the line-break token 0
    let (out, _) = run(load("file.ul").main().unwrap(), DEFAULT_FUEL);
    assert_eq!(list_of(out.value().unwrap()), vec![1, 2, 0, 3, 0]);
}

#[test]
fn translations_recheck_at_the_same_type() {
    for name in ["swap.ul", "rev.ul", "quicksort.ul", "file.ul", "mutset.ul"] {
        let p = load(name);
        let t = typecheck_u(&MixedContext::new(), p.main().unwrap()).unwrap();
        let tr = p.translate().unwrap();
        let printed = format!("main = {};", Printer::new().uexpr(&tr));
        let again = Program::load(&printed).unwrap();
        let t2 = typecheck_u(&MixedContext::new(), again.main().unwrap()).unwrap();
        assert!(alpha_eq_utype(&t, &t2), "{name}: {t} vs {t2}");
    }
}

#[test]
fn ill_typed_programs_do_not_run() {
    for (name, code) in [("ill/noclose.ul", "E002"), ("ill/reuse.ul", "E001"), ("ill/share_linear.ul", "E003")] {
        let src = std::fs::read_to_string(corpus_dir().join(name)).unwrap();
        let p = Program::load(&src).unwrap();
        let m = Machine::for_u(p.main().unwrap(), 10);
        let err = p.run(m).unwrap_err();
        assert_eq!(err.code(), code);
    }
}
