//! Whole-file driver (load, check, run, translate) and the regression
//! suite over the `.ul` programs in `corpus/` and their sidecars.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ast::*;
use crate::error::TypeError;
use crate::eval::{Machine, Outcome, Stats};
use crate::funtrans::funtrans_u;
use crate::parser::{elaborate_items, parse, ElabError, Elaborated, ParseError, SourceFile};
use crate::pretty::Printer;
use crate::testkit::{differential_one, Agreement};
use crate::typecheck_l::typecheck_l_surface;
use crate::typecheck_u::typecheck_u;

/// Anything that stops a file from being run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    Parse(ParseError),
    Elab(ElabError),
    Type { item: Name, error: TypeError },
}

impl Diagnostic {
    pub fn code(&self) -> &'static str {
        match self {
            Diagnostic::Parse(_) => "S001",
            Diagnostic::Elab(_) => "S002",
            Diagnostic::Type { error, .. } => error.code(),
        }
    }

    /// `error[CODE] Name: message`, the line golden tests grep for.
    pub fn headline(&self) -> String {
        match self {
            Diagnostic::Parse(e) => format!("error[S001] ParseError: {e}"),
            Diagnostic::Elab(e) => format!("error[S002] ElaborationError: {e}"),
            Diagnostic::Type { error, .. } => error.headline(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Diagnostic::Type { item, error } => format!("{error}\n  note: while checking `{item}`"),
            other => other.headline(),
        };
        f.write_str(&crate::error::canonical_fresh_names(&text))
    }
}

/// A parsed and elaborated file.
#[derive(Clone, Debug)]
pub struct Program {
    pub file: SourceFile,
    pub items: Vec<(Name, Elaborated)>,
}

/// The type of one checked definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ItemType {
    U(UType),
    L(LType),
}

impl Program {
    pub fn load(src: &str) -> Result<Program, Diagnostic> {
        let file = parse(src).map_err(Diagnostic::Parse)?;
        let items = elaborate_items(&file).map_err(Diagnostic::Elab)?;
        Ok(Program { file, items })
    }

    pub fn load_path(path: &Path) -> std::io::Result<Result<Program, Diagnostic>> {
        Ok(Program::load(&std::fs::read_to_string(path)?))
    }

    pub fn printer(&self) -> Printer<'_> {
        Printer::with_abbrevs(&self.file.abbrevs)
    }

    pub fn main(&self) -> Option<&UExpr> {
        self.items.iter().rev().find_map(|(n, e)| match e {
            Elaborated::U(e) if n == "main" => Some(e),
            _ => None,
        })
    }

    /// Checks every definition in order; stops at the first error.
    pub fn check(&self) -> Result<Vec<(Name, ItemType)>, Diagnostic> {
        let empty = MixedContext::new();
        let mut out = Vec::new();
        for (name, body) in &self.items {
            let ty = match body {
                Elaborated::U(e) => typecheck_u(&empty, e).map(ItemType::U),
                Elaborated::L(e) => typecheck_l_surface(&empty, e).map(|(t, _)| ItemType::L(t)),
            };
            let ty = ty.map_err(|error| Diagnostic::Type { item: name.clone(), error })?;
            out.push((name.clone(), ty));
        }
        Ok(out)
    }

    /// `name : type` lines, with types folded back into abbreviations.
    pub fn check_lines(&self) -> Result<Vec<String>, Diagnostic> {
        let p = self.printer();
        Ok(self
            .check()?
            .into_iter()
            .map(|(n, t)| match t {
                ItemType::U(t) => format!("{n} : {}", p.utype(&t)),
                ItemType::L(t) => format!("{n} : {}", p.ltype(&t)),
            })
            .collect())
    }

    /// The type of `main`, printed.
    pub fn main_type(&self) -> Result<Option<String>, Diagnostic> {
        let p = self.printer();
        Ok(self.check()?.into_iter().rev().find_map(|(n, t)| match t {
            ItemType::U(t) if n == "main" => Some(p.utype(&t)),
            _ => None,
        }))
    }

    /// Checks, then runs `main`. Refuses to run ill-typed files.
    pub fn run(&self, machine: Machine) -> Result<(Outcome<UExpr>, Machine), Diagnostic> {
        self.check()?;
        let main = self.main().ok_or(Diagnostic::Elab(ElabError::NoMain))?;
        let mut m = machine;
        let out = m.run_u(main);
        Ok((out, m))
    }

    /// The functional translation of `main`.
    pub fn translate(&self) -> Result<UExpr, Diagnostic> {
        self.check()?;
        let main = self.main().ok_or(Diagnostic::Elab(ElabError::NoMain))?;
        funtrans_u(main).map_err(|error| Diagnostic::Type { item: "main".into(), error })
    }
}

/// `key=value` lines for a run: totals first, then per phase as
/// `key(phase)=value`.
pub fn stats_lines(m: &Machine) -> Vec<String> {
    let mut out = m.stats.lines();
    for (phase, st) in &m.phase_stats {
        for (k, v) in stat_pairs(st) {
            out.push(format!("{k}({phase})={v}"));
        }
    }
    out
}

fn stat_pairs(s: &Stats) -> Vec<(&'static str, u64)> {
    vec![
        ("steps", s.steps),
        ("new_allocs", s.new_allocs),
        ("frees", s.frees),
        ("copies", s.copies),
        ("boundary_crossings", s.boundary_crossings),
        ("pair_constructions", s.pair_constructions),
    ]
}

/// Expected outcome of a corpus program, read from `NAME.toml` next to
/// `NAME.ul`.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub description: Option<String>,
    /// Printed type of `main`.
    #[serde(rename = "type")]
    pub ty: Option<String>,
    /// Printed types of named definitions.
    #[serde(default)]
    pub types: BTreeMap<String, String>,
    /// Printed value of `main`.
    pub value: Option<String>,
    /// Expected error code for programs that must not typecheck.
    pub error: Option<String>,
    /// Exact rendered diagnostic.
    pub diagnostic: Option<String>,
    /// Expected totals, by stat name.
    #[serde(default)]
    pub stats: BTreeMap<String, u64>,
    /// Expected per-phase stats.
    #[serde(default)]
    pub phase_stats: BTreeMap<String, BTreeMap<String, u64>>,
}

impl Sidecar {
    pub fn load(path: &Path) -> Result<Sidecar, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusEntry {
    pub name: String,
    pub failures: Vec<String>,
}

impl CorpusEntry {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CorpusReport {
    pub entries: Vec<CorpusEntry>,
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(CorpusEntry::passed)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            if e.passed() {
                s.push_str(&format!("ok   {}\n", e.name));
            } else {
                s.push_str(&format!("FAIL {}\n", e.name));
                for f in &e.failures {
                    s.push_str(&format!("     {f}\n"));
                }
            }
        }
        s
    }
}

/// All `.ul` files under `dir`, recursively, in path order.
pub fn corpus_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(rd) = std::fs::read_dir(&d) else { continue };
        for ent in rd.flatten() {
            let p = ent.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "ul") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// Runs every corpus program against its sidecar.
pub fn corpus_suite(dir: &Path) -> CorpusReport {
    let mut report = CorpusReport::default();
    for path in corpus_files(dir) {
        let name = path.strip_prefix(dir).unwrap_or(&path).display().to_string();
        let failures = check_entry(&path);
        report.entries.push(CorpusEntry { name, failures });
    }
    report
}

fn check_entry(path: &Path) -> Vec<String> {
    let mut fail = Vec::new();
    let side = match Sidecar::load(&path.with_extension("toml")) {
        Ok(s) => s,
        Err(e) => return vec![format!("sidecar: {e}")],
    };
    let src = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => return vec![format!("read: {e}")],
    };
    let checked = Program::load(&src).and_then(|p| p.check().map(|_| p));
    let prog = match (checked, &side.error) {
        (Err(d), Some(code)) => {
            if d.code() != code {
                fail.push(format!("expected {code}, got {}", d.headline()));
            }
            if let Some(g) = &side.diagnostic {
                if d.to_string().trim_end() != g.trim_end() {
                    fail.push(format!("diagnostic differs:\n{d}"));
                }
            }
            return fail;
        }
        (Ok(_), Some(code)) => return vec![format!("expected {code}, but the file typechecks")],
        (Err(d), None) => return vec![d.to_string()],
        (Ok(p), None) => p,
    };
    let lines = prog.check_lines().unwrap_or_default();
    if let Some(t) = &side.ty {
        match prog.main_type() {
            Ok(Some(got)) if &got == t => {}
            other => fail.push(format!("main type: expected {t}, got {other:?}")),
        }
    }
    for (n, t) in &side.types {
        let want = format!("{n} : {t}");
        if !lines.contains(&want) {
            fail.push(format!("missing `{want}`"));
        }
    }
    let main = prog.main().expect("checked program has main").clone();
    let (out, m) = match prog.run(Machine::for_u(&main, crate::eval::DEFAULT_FUEL)) {
        Ok(r) => r,
        Err(d) => return vec![d.to_string()],
    };
    match (&out, &side.value) {
        (Outcome::Value(v), Some(want)) => {
            let got = prog.printer().uexpr(v);
            if &got != want {
                fail.push(format!("value: expected {want}, got {got}"));
            }
        }
        (Outcome::Value(_), None) => {}
        (other, _) => fail.push(format!("run did not finish: {other:?}")),
    }
    let totals: BTreeMap<_, _> = stat_pairs(&m.stats).into_iter().collect();
    for (k, want) in &side.stats {
        match totals.get(k.as_str()) {
            Some(got) if got == want => {}
            got => fail.push(format!("stat {k}: expected {want}, got {got:?}")),
        }
    }
    for (phase, want) in &side.phase_stats {
        let got: BTreeMap<_, _> =
            stat_pairs(&m.phase_stats.get(phase).copied().unwrap_or_default()).into_iter().collect();
        for (k, w) in want {
            if got.get(k.as_str()) != Some(w) {
                fail.push(format!("stat {k}({phase}): expected {w}, got {:?}", got.get(k.as_str())));
            }
        }
    }
    match differential_one(&main, crate::eval::DEFAULT_FUEL) {
        Agreement::Agree => {}
        other => fail.push(format!("translation disagrees: {other:?}")),
    }
    fail
}
