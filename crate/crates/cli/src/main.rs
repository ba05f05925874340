use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ul_core::corpus::stats_lines;
use ul_core::testkit::{self, Report};
use ul_core::{Diagnostic, Machine, Outcome, Printer, Program, DEFAULT_FUEL};

#[derive(Parser)]
#[command(name = "ul", version, about = "Check, run and translate UL programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, elaborate and typecheck a file; print the type of each definition.
    Check { file: PathBuf },
    /// Typecheck and evaluate `main`.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        /// Print one line per step to stderr and write JSON records to PATH.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Print `key=value` counters after the value.
        #[arg(long)]
        stats: bool,
    },
    /// Print the store-free translation of `main` as a UL file.
    Translate { file: PathBuf },
    /// Run the property suites.
    Meta {
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated: sr, differential, roundtrip, determinism,
        /// compositionality, projection, mutants, corpus.
        #[arg(long, value_delimiter = ',', default_value = "sr,differential,roundtrip,determinism,compositionality,projection")]
        props: Vec<String>,
        /// Write the JSON summary here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        /// Directory for the `corpus` property.
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
    },
}

struct Style {
    color: bool,
}

impl Style {
    fn from_env() -> Style {
        Style { color: std::env::var("UL_COLOR").is_ok_and(|v| v == "1") }
    }

    fn paint(&self, code: &str, s: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }

    fn bad(&self, s: &str) -> String {
        self.paint("31", s)
    }

    fn good(&self, s: &str) -> String {
        self.paint("32", s)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    let style = Style::from_env();
    match dispatch(cli.cmd, &style) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{} {e:#}", style.bad("error:"));
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path, style: &Style) -> anyhow::Result<Result<Program, u8>> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Program::load(&src).map_err(|d| report_diag(&d, style)))
}

fn report_diag(d: &Diagnostic, style: &Style) -> u8 {
    let text = d.to_string();
    let (head, rest) = text.split_once('\n').unwrap_or((&text, ""));
    eprintln!("{}", style.bad(head));
    if !rest.is_empty() {
        eprintln!("{rest}");
    }
    1
}

fn dispatch(cmd: Cmd, style: &Style) -> anyhow::Result<u8> {
    match cmd {
        Cmd::Check { file } => {
            let prog = match load(&file, style)? {
                Ok(p) => p,
                Err(c) => return Ok(c),
            };
            match prog.check_lines() {
                Ok(lines) => {
                    for l in lines {
                        println!("{l}");
                    }
                    Ok(0)
                }
                Err(d) => Ok(report_diag(&d, style)),
            }
        }
        Cmd::Run { file, fuel, trace, stats } => {
            let prog = match load(&file, style)? {
                Ok(p) => p,
                Err(c) => return Ok(c),
            };
            let Some(main) = prog.main() else {
                return Ok(report_diag(&Diagnostic::Elab(ul_core::ElabError::NoMain), style));
            };
            let mut m = Machine::for_u(main, fuel);
            if trace.is_some() {
                m = m.with_trace();
            }
            let (out, m) = match prog.run(m) {
                Ok(r) => r,
                Err(d) => return Ok(report_diag(&d, style)),
            };
            if let Some(path) = &trace {
                eprint!("{}", m.trace_text());
                std::fs::write(path, m.trace_jsonl()).with_context(|| format!("writing {}", path.display()))?;
            }
            let code = match &out {
                Outcome::Value(v) => {
                    println!("{}", prog.printer().uexpr(v));
                    0
                }
                Outcome::OutOfFuel => {
                    eprintln!("{}", style.bad(&format!("out of fuel after {fuel} steps")));
                    1
                }
                Outcome::Stuck(s) => {
                    eprintln!("{}", style.bad(&format!("stuck: {s}")));
                    1
                }
            };
            if stats {
                for l in stats_lines(&m) {
                    println!("{l}");
                }
            }
            Ok(code)
        }
        Cmd::Translate { file } => {
            let prog = match load(&file, style)? {
                Ok(p) => p,
                Err(c) => return Ok(c),
            };
            match prog.translate() {
                Ok(e) => {
                    println!("main = {};", Printer::new().uexpr(&e));
                    Ok(0)
                }
                Err(d) => Ok(report_diag(&d, style)),
            }
        }
        Cmd::Meta { samples, seed, props, report, corpus } => meta(samples, seed, &props, report.as_deref(), &corpus, style),
    }
}

fn meta(samples: u64, seed: u64, props: &[String], out: Option<&Path>, corpus: &Path, style: &Style) -> anyhow::Result<u8> {
    let mut reports: Vec<Report> = Vec::new();
    let mut failed = false;
    let mut rules = BTreeMap::new();
    for p in props {
        let r = match p.as_str() {
            "sr" => testkit::check_subject_reduction(samples, 50, seed),
            "differential" => testkit::check_differential(samples, DEFAULT_FUEL, seed),
            "roundtrip" => testkit::check_roundtrip(samples, samples / 10, 3, seed),
            "determinism" => testkit::check_determinism(8, 6, 5),
            "compositionality" => testkit::check_compositionality_pairs(samples / 10, seed),
            "projection" => testkit::check_projection(samples, seed),
            "mutants" => {
                for m in testkit::check_mutants(samples, DEFAULT_FUEL, seed) {
                    let verdict = if m.caught() { style.good("caught") } else { style.bad("MISSED") };
                    let df = m.differential_first_failure.map_or("none".to_string(), |i| format!("sample {i}"));
                    println!(
                        "mutant {}: {verdict} (subject reduction: {} of {} samples fail; differential: first failure at {df})",
                        m.mutant, m.subject_reduction_failures, m.samples
                    );
                    failed |= !m.caught();
                }
                continue;
            }
            "corpus" => {
                let r = ul_core::corpus_suite(corpus);
                print!("{}", r.text());
                failed |= !r.passed();
                continue;
            }
            other => {
                eprintln!("unknown property `{other}`");
                return Ok(64);
            }
        };
        let head = if r.passed() { style.good("PASS") } else { style.bad("FAIL") };
        println!("{head} {}", r.text());
        for (k, v) in &r.rule_counts {
            *rules.entry(*k).or_default() += v;
        }
        failed |= !r.passed();
        reports.push(r);
    }
    if props.iter().any(|p| p == "sr") && props.iter().any(|p| p == "differential") {
        let missing = testkit::missing_rules(&rules);
        if missing.is_empty() {
            println!("{} rule coverage: all {} rules fired", style.good("PASS"), rules.len());
        } else {
            println!("{} rule coverage: never fired: {}", style.bad("FAIL"), missing.join(", "));
            failed = true;
        }
    }
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&reports)?;
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if failed { 2 } else { 0 })
}
