use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ul_core::parser::Elaborated;
use ul_core::testkit::{list_value, nat, nat_value};
use ul_core::{funtrans_u, run, Program, UExpr, DEFAULT_FUEL};

fn load(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    Program::load(&std::fs::read_to_string(path).unwrap()).unwrap()
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

fn nat_list(n: usize) -> UExpr {
    list_value(&nat(), &(0..n).map(|i| nat_value(i % 4)).collect::<Vec<_>>())
}

fn reversal(c: &mut Criterion) {
    let rev = item(&load("rev.ul"), "rev");
    let mut g = c.benchmark_group("rev");
    for n in [4, 16, 32] {
        let e = UExpr::app(rev.clone(), nat_list(n));
        let tr = funtrans_u(&e).unwrap();
        g.bench_with_input(BenchmarkId::new("direct", n), &e, |b, e| b.iter(|| run(black_box(e), DEFAULT_FUEL)));
        g.bench_with_input(BenchmarkId::new("translated", n), &tr, |b, e| {
            b.iter(|| run(black_box(e), 10 * DEFAULT_FUEL))
        });
    }
    g.finish();
}

fn sorting(c: &mut Criterion) {
    let qs = item(&load("quicksort.ul"), "quicksort");
    let e = UExpr::app(qs, nat_list(5));
    let mut g = c.benchmark_group("quicksort");
    g.sample_size(10);
    g.bench_function("direct/5", |b| b.iter(|| run(black_box(&e), DEFAULT_FUEL)));
    g.finish();
}

fn front_end(c: &mut Criterion) {
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus/file.ul")).unwrap();
    c.bench_function("load_and_check/file.ul", |b| {
        b.iter(|| Program::load(black_box(&src)).unwrap().check_lines().unwrap())
    });
    let main = load("quicksort.ul").main().unwrap().clone();
    c.bench_function("translate/quicksort.ul", |b| b.iter(|| funtrans_u(black_box(&main)).unwrap()));
}

criterion_group!(benches, reversal, sorting, front_end);
criterion_main!(benches);
