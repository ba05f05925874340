//! Small-step, left-to-right call-by-value evaluation of UL programs.
//!
//! U terms step on their own; L terms step as configurations `⟨σ, e⟩`
//! where `σ` is the store owned by the current layer. A `UL σ e` boundary
//! and a `share σ e` form each open a new layer.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::ast::*;
use crate::interop::{l_to_u, u_to_l};
use crate::subst::{freshen_config, locations_of, subst_l, subst_u, tysubst_uexpr, Val};

pub const DEFAULT_FUEL: u64 = 100_000;

/// Deliberately broken rule variants, used to show that the property
/// checks notice semantic bugs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Mutant {
    /// Releasing a shared function's store keeps the old location names.
    NoFreshening,
    /// Copying a shared pair hands the whole store to the left component.
    WrongCopySplit,
    /// `unlump[t] ⌊v⌋` returns the lump itself instead of converting.
    SkipBoundaryConversion,
    /// `unfold (fold v)` steps to `fold v`.
    FoldUnfoldNonCancelling,
}

impl Mutant {
    pub const ALL: [Mutant; 4] = [
        Mutant::NoFreshening,
        Mutant::WrongCopySplit,
        Mutant::SkipBoundaryConversion,
        Mutant::FoldUnfoldNonCancelling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutant::NoFreshening => "no-freshening",
            Mutant::WrongCopySplit => "wrong-copy-split",
            Mutant::SkipBoundaryConversion => "skip-boundary-conversion",
            Mutant::FoldUnfoldNonCancelling => "fold-unfold-non-cancelling",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub steps: u64,
    pub new_allocs: u64,
    pub frees: u64,
    pub copies: u64,
    pub boundary_crossings: u64,
    /// U steps after which a pair expression has become a value.
    pub pair_constructions: u64,
}

impl Stats {
    fn bump(&mut self, f: impl Fn(&mut Stats)) {
        f(self)
    }

    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("steps={}", self.steps),
            format!("new_allocs={}", self.new_allocs),
            format!("frees={}", self.frees),
            format!("copies={}", self.copies),
            format!("boundary_crossings={}", self.boundary_crossings),
            format!("pair_constructions={}", self.pair_constructions),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("stuck: {0}")]
    Stuck(String),
}

fn stuck<T>(what: impl std::fmt::Display) -> Result<T, EvalError> {
    Err(EvalError::Stuck(what.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome<V> {
    Value(V),
    OutOfFuel,
    Stuck(String),
}

impl<V> Outcome<V> {
    pub fn value(&self) -> Option<&V> {
        match self {
            Outcome::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn terminated(&self) -> bool {
        matches!(self, Outcome::Value(_))
    }
}

/// One trace record. Written as `step N: rule @ position` or as JSON.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub step: u64,
    pub rule: &'static str,
    pub position: String,
    pub store_size: usize,
    pub allocs: u64,
}

impl TraceRecord {
    pub fn line(&self) -> String {
        format!("step {}: {} @ {}", self.step, self.rule, self.position)
    }
}

/// Evaluation state shared by U and L steps.
#[derive(Debug)]
pub struct Machine {
    pub supply: LocSupply,
    pub fuel: u64,
    pub stats: Stats,
    pub phase_stats: BTreeMap<Name, Stats>,
    pub rule_counts: BTreeMap<&'static str, u64>,
    pub mutant: Option<Mutant>,
    pub trace: Option<Vec<TraceRecord>>,
    path: Vec<&'static str>,
    phases: Vec<Name>,
    last_rule: Option<&'static str>,
    last_pos: String,
    last_phases: Vec<Name>,
}

impl Machine {
    pub fn new(supply: LocSupply, fuel: u64) -> Self {
        Machine {
            supply,
            fuel,
            stats: Stats::default(),
            phase_stats: BTreeMap::new(),
            rule_counts: BTreeMap::new(),
            mutant: None,
            trace: None,
            path: Vec::new(),
            phases: Vec::new(),
            last_rule: None,
            last_pos: String::new(),
            last_phases: Vec::new(),
        }
    }

    pub fn for_u(e: &UExpr, fuel: u64) -> Self {
        Machine::new(LocSupply::above_u(e), fuel)
    }

    pub fn for_config(store: &Store, e: &LExpr, fuel: u64) -> Self {
        Machine::new(LocSupply::above_l(store, e), fuel)
    }

    pub fn with_mutant(mut self, m: Option<Mutant>) -> Self {
        self.mutant = m;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    fn mutated(&self, m: Mutant) -> bool {
        self.mutant == Some(m)
    }

    /// Records that `rule` fired and bumps counters for enclosing phases.
    fn fire(&mut self, rule: &'static str, f: impl Fn(&mut Stats)) {
        *self.rule_counts.entry(rule).or_default() += 1;
        self.stats.bump(&f);
        for p in &self.phases {
            self.phase_stats.entry(p.clone()).or_default().bump(&f);
        }
        self.last_rule = Some(rule);
        self.last_phases.clone_from(&self.phases);
        if self.trace.is_some() {
            self.last_pos = if self.path.is_empty() { "top".into() } else { self.path.join(".") };
        }
    }

    fn finish_step(&mut self, store_size: impl FnOnce() -> usize) {
        self.stats.steps += 1;
        for p in &self.last_phases {
            self.phase_stats.entry(p.clone()).or_default().steps += 1;
        }
        if self.trace.is_some() {
            let rec = TraceRecord {
                step: self.stats.steps,
                rule: self.last_rule.unwrap_or("?"),
                position: std::mem::take(&mut self.last_pos),
                store_size: store_size(),
                allocs: self.stats.new_allocs,
            };
            if let Some(t) = &mut self.trace {
                t.push(rec);
            }
        }
    }

    /// Renders the trace as human-readable lines.
    pub fn trace_text(&self) -> String {
        let mut s = String::new();
        for r in self.trace.iter().flatten() {
            let _ = writeln!(s, "{}", r.line());
        }
        s
    }

    /// Renders the trace as one JSON object per line.
    pub fn trace_jsonl(&self) -> String {
        let mut s = String::new();
        for r in self.trace.iter().flatten() {
            let _ = writeln!(s, "{}", serde_json::to_string(r).expect("serializable"));
        }
        s
    }

    // ---------------------------------------------------------------- U

    /// One step of a closed U term; `None` when `e` is a value.
    pub fn step_u(&mut self, e: &UExpr) -> Result<Option<UExpr>, EvalError> {
        self.path.clear();
        self.phases.clear();
        let r = self.u(e)?;
        if r.is_some() {
            self.finish_step(|| all_locations_u_count(e));
        }
        Ok(r)
    }

    /// Runs a closed U term until it is a value or fuel runs out.
    pub fn run_u(&mut self, e: &UExpr) -> Outcome<UExpr> {
        let mut cur = e.clone();
        loop {
            if cur.is_value() {
                return Outcome::Value(cur);
            }
            if self.fuel == 0 {
                return Outcome::OutOfFuel;
            }
            match self.step_u(&cur) {
                Ok(Some(next)) => {
                    self.fuel -= 1;
                    cur = next;
                }
                Ok(None) => return Outcome::Value(cur),
                Err(EvalError::Stuck(m)) => return Outcome::Stuck(m),
            }
        }
    }

    fn sub_u(&mut self, tag: &'static str, e: &UExpr) -> Result<Option<UExpr>, EvalError> {
        self.path.push(tag);
        let r = self.u(e);
        if r.is_ok() {
            self.path.pop();
        }
        r
    }

    fn u(&mut self, e: &UExpr) -> Result<Option<UExpr>, EvalError> {
        use UExpr as U;
        if e.is_value() {
            return Ok(None);
        }
        let b = |x: UExpr| Box::new(x);
        Ok(Some(match e {
            U::Var(x) => return stuck(format!("free variable `{x}`")),
            U::Unit | U::Lam(..) => unreachable!("values"),
            U::Pair(a, c) => {
                let out = if !a.is_value() {
                    U::Pair(b(self.sub_u("pair.0", a)?.unwrap()), c.clone())
                } else {
                    U::Pair(a.clone(), b(self.sub_u("pair.1", c)?.unwrap()))
                };
                if out.is_value() {
                    self.stats.pair_constructions += 1;
                    for p in &self.phases {
                        self.phase_stats.entry(p.clone()).or_default().pair_constructions += 1;
                    }
                }
                out
            }
            U::Fst(a) | U::Snd(a) => {
                if let Some(a2) = self.sub_u("proj", a)? {
                    return Ok(Some(if matches!(e, U::Fst(_)) { U::Fst(b(a2)) } else { U::Snd(b(a2)) }));
                }
                match &**a {
                    U::Pair(x, y) => {
                        let first = matches!(e, U::Fst(_));
                        self.fire(if first { "u-fst" } else { "u-snd" }, |_| {});
                        if first { (**x).clone() } else { (**y).clone() }
                    }
                    _ => return stuck(format!("projection of non-pair {a}")),
                }
            }
            U::LetUnit(a, body) => {
                if let Some(a2) = self.sub_u("let", a)? {
                    return Ok(Some(U::LetUnit(b(a2), body.clone())));
                }
                if **a != U::Unit {
                    return stuck(format!("let () = {a}"));
                }
                self.fire("u-let-unit", |_| {});
                (**body).clone()
            }
            U::App(f, a) => {
                if !f.is_value() {
                    return Ok(Some(U::App(b(self.sub_u("app.0", f)?.unwrap()), a.clone())));
                }
                if !a.is_value() {
                    return Ok(Some(U::App(f.clone(), b(self.sub_u("app.1", a)?.unwrap()))));
                }
                match &**f {
                    U::Lam(x, _, body) => {
                        self.fire("u-beta", |_| {});
                        subst_u(body, x, Val::U(a))
                    }
                    _ => return stuck(format!("application of non-function {f}")),
                }
            }
            U::Inj(s, t, a) => U::Inj(*s, t.clone(), b(self.sub_u("inj", a)?.unwrap())),
            U::Case(sc, x, l, y, r) => {
                if let Some(s2) = self.sub_u("case", sc)? {
                    return Ok(Some(U::Case(b(s2), x.clone(), l.clone(), y.clone(), r.clone())));
                }
                match &**sc {
                    U::Inj(Side::Left, _, v) => {
                        self.fire("u-case", |_| {});
                        subst_u(l, x, Val::U(v))
                    }
                    U::Inj(Side::Right, _, v) => {
                        self.fire("u-case", |_| {});
                        subst_u(r, y, Val::U(v))
                    }
                    _ => return stuck(format!("case on non-injection {sc}")),
                }
            }
            U::Fold(t, a) => U::Fold(t.clone(), b(self.sub_u("fold", a)?.unwrap())),
            U::Unfold(a) => {
                if let Some(a2) = self.sub_u("unfold", a)? {
                    return Ok(Some(U::Unfold(b(a2))));
                }
                match &**a {
                    U::Fold(_, v) => {
                        self.fire("u-unfold-fold", |_| {});
                        if self.mutated(Mutant::FoldUnfoldNonCancelling) {
                            (**a).clone()
                        } else {
                            (**v).clone()
                        }
                    }
                    _ => return stuck(format!("unfold of non-fold {a}")),
                }
            }
            U::TyAbs(a, body) => U::TyAbs(a.clone(), b(self.sub_u("tyabs", body)?.unwrap())),
            U::TyApp(f, t) => {
                if let Some(f2) = self.sub_u("tyapp", f)? {
                    return Ok(Some(U::TyApp(b(f2), t.clone())));
                }
                match &**f {
                    U::TyAbs(a, v) => {
                        self.fire("u-ty-beta", |_| {});
                        tysubst_uexpr(v, a, t)
                    }
                    _ => return stuck(format!("type application of {f}")),
                }
            }
            U::Boundary(st, body) => {
                if st.is_empty() {
                    if let LExpr::Share(inner, v) = &**body {
                        if inner.is_empty() {
                            if let LExpr::LumpVal(u) = &**v {
                                self.fire("ul-value", |s| s.boundary_crossings += 1);
                                return Ok(Some((**u).clone()));
                            }
                        }
                    }
                }
                let mut st2 = st.clone();
                self.path.push("UL");
                match self.l(&mut st2, body)? {
                    Some(body2) => {
                        self.path.pop();
                        U::Boundary(st2, b_l(body2))
                    }
                    None => return stuck(format!("UL boundary holding the value {body}")),
                }
            }
        }))
    }

    // ---------------------------------------------------------------- L

    /// One step of the configuration `⟨st, e⟩`; `None` when `e` is a value.
    pub fn step_l(&mut self, st: &mut Store, e: &LExpr) -> Result<Option<LExpr>, EvalError> {
        self.path.clear();
        self.phases.clear();
        let r = self.l(st, e)?;
        if r.is_some() {
            let n = st.all_locations().len();
            self.finish_step(|| n);
        }
        Ok(r)
    }

    /// Runs a configuration to a value.
    pub fn run_l(&mut self, st: &mut Store, e: &LExpr) -> Outcome<LExpr> {
        let mut cur = e.clone();
        loop {
            if cur.is_value() {
                return Outcome::Value(cur);
            }
            if self.fuel == 0 {
                return Outcome::OutOfFuel;
            }
            match self.step_l(st, &cur) {
                Ok(Some(next)) => {
                    self.fuel -= 1;
                    cur = next;
                }
                Ok(None) => return Outcome::Value(cur),
                Err(EvalError::Stuck(m)) => return Outcome::Stuck(m),
            }
        }
    }

    fn sub_l(&mut self, tag: &'static str, st: &mut Store, e: &LExpr) -> Result<Option<LExpr>, EvalError> {
        self.path.push(tag);
        let r = self.l(st, e);
        if r.is_ok() {
            self.path.pop();
        }
        r
    }

    fn l(&mut self, st: &mut Store, e: &LExpr) -> Result<Option<LExpr>, EvalError> {
        use LExpr as L;
        if e.is_value() {
            return Ok(None);
        }
        let b = |x: LExpr| Box::new(x);
        Ok(Some(match e {
            L::Var(x) => return stuck(format!("free variable `{x}`")),
            L::Unit | L::Lam(..) | L::Loc(_) | L::LumpVal(_) => unreachable!("values"),
            L::Pair(a, c) => {
                if !a.is_value() {
                    L::Pair(b(self.sub_l("pair.0", st, a)?.unwrap()), c.clone())
                } else {
                    L::Pair(a.clone(), b(self.sub_l("pair.1", st, c)?.unwrap()))
                }
            }
            L::LetPair(x, y, a, body) => {
                if let Some(a2) = self.sub_l("let", st, a)? {
                    return Ok(Some(L::LetPair(x.clone(), y.clone(), b(a2), body.clone())));
                }
                let L::Pair(v1, v2) = &**a else { return stuck(format!("pair pattern against {a}")) };
                self.fire("l-let-pair", |_| {});
                let body = subst_l(body, y, Val::L(v2));
                if x == y { body } else { subst_l(&body, x, Val::L(v1)) }
            }
            L::LetUnit(a, body) => {
                if let Some(a2) = self.sub_l("let", st, a)? {
                    return Ok(Some(L::LetUnit(b(a2), body.clone())));
                }
                if **a != L::Unit {
                    return stuck(format!("let () = {a}"));
                }
                self.fire("l-let-unit", |_| {});
                (**body).clone()
            }
            L::App(f, a) => {
                if !f.is_value() {
                    return Ok(Some(L::App(b(self.sub_l("app.0", st, f)?.unwrap()), a.clone())));
                }
                if !a.is_value() {
                    return Ok(Some(L::App(f.clone(), b(self.sub_l("app.1", st, a)?.unwrap()))));
                }
                match &**f {
                    L::Lam(x, _, body) => {
                        self.fire("l-beta", |_| {});
                        subst_l(body, x, Val::L(a))
                    }
                    _ => return stuck(format!("application of non-function {f}")),
                }
            }
            L::Inj(s, t, a) => L::Inj(*s, t.clone(), b(self.sub_l("inj", st, a)?.unwrap())),
            L::Case(sc, x, l, y, r) => {
                if let Some(s2) = self.sub_l("case", st, sc)? {
                    return Ok(Some(L::Case(b(s2), x.clone(), l.clone(), y.clone(), r.clone())));
                }
                match &**sc {
                    L::Inj(Side::Left, _, v) => {
                        self.fire("l-case", |_| {});
                        subst_l(l, x, Val::L(v))
                    }
                    L::Inj(Side::Right, _, v) => {
                        self.fire("l-case", |_| {});
                        subst_l(r, y, Val::L(v))
                    }
                    _ => return stuck(format!("case on non-injection {sc}")),
                }
            }
            L::Fold(t, a) => L::Fold(t.clone(), b(self.sub_l("fold", st, a)?.unwrap())),
            L::Unfold(a) => {
                if let Some(a2) = self.sub_l("unfold", st, a)? {
                    return Ok(Some(L::Unfold(b(a2))));
                }
                match &**a {
                    L::Fold(_, v) => {
                        self.fire("l-unfold-fold", |_| {});
                        if self.mutated(Mutant::FoldUnfoldNonCancelling) {
                            (**a).clone()
                        } else {
                            (**v).clone()
                        }
                    }
                    _ => return stuck(format!("unfold of non-fold {a}")),
                }
            }
            L::New(a) => {
                if let Some(a2) = self.sub_l("new", st, a)? {
                    return Ok(Some(L::New(b(a2))));
                }
                if **a != L::Unit {
                    return stuck(format!("new {a}"));
                }
                let l = self.supply.fresh();
                st.insert(l, Slot::Empty);
                self.fire("l-new", |s| s.new_allocs += 1);
                L::Loc(l)
            }
            L::Free(a) => {
                if let Some(a2) = self.sub_l("free", st, a)? {
                    return Ok(Some(L::Free(b(a2))));
                }
                let L::Loc(l) = &**a else { return stuck(format!("free {a}")) };
                match st.remove(*l) {
                    Some(Slot::Empty) => {}
                    other => return stuck(format!("free {l} holding {other:?}")),
                }
                self.fire("l-free", |s| s.frees += 1);
                L::Unit
            }
            L::BoxUp(a) => {
                if let Some(a2) = self.sub_l("box", st, a)? {
                    return Ok(Some(L::BoxUp(b(a2))));
                }
                let L::Pair(loc, v) = &**a else { return stuck(format!("box {a}")) };
                let L::Loc(l) = &**loc else { return stuck(format!("box {a}")) };
                if st.get(*l) != Some(&Slot::Empty) {
                    return stuck(format!("box into {l}, which is not empty"));
                }
                let owned = st.split_off(&locations_of(v));
                st.insert(*l, Slot::Full(owned, (**v).clone()));
                self.fire("l-box", |_| {});
                L::Loc(*l)
            }
            L::Unbox(a) => {
                if let Some(a2) = self.sub_l("unbox", st, a)? {
                    return Ok(Some(L::Unbox(b(a2))));
                }
                let L::Loc(l) = &**a else { return stuck(format!("unbox {a}")) };
                let Some(Slot::Full(owned, v)) = st.insert(*l, Slot::Empty) else {
                    return stuck(format!("unbox of {l}, which is not full"));
                };
                if let Err(c) = st.absorb(owned) {
                    return stuck(format!("location {c} released twice"));
                }
                self.fire("l-unbox", |_| {});
                L::pair(L::Loc(*l), v)
            }
            L::Copy(a) => {
                if let Some(a2) = self.sub_l("copy", st, a)? {
                    return Ok(Some(L::Copy(b(a2))));
                }
                let L::Share(sigma, v) = &**a else { return stuck(format!("copy of {a}")) };
                self.copy(st, sigma, v)?
            }
            L::Share(sigma, a) => {
                // Reduction under `share`, inside its own store.
                let mut inner = sigma.clone();
                let a2 = self.sub_l("share", &mut inner, a)?.expect("non-value body");
                L::Share(inner, b(a2))
            }
            L::FromU(u) => {
                if u.is_value() {
                    self.fire("lu-value", |s| s.boundary_crossings += 1);
                    return Ok(Some(L::LumpVal(u.clone())));
                }
                self.path.push("LU");
                let u2 = self.u(u)?.expect("non-value");
                self.path.pop();
                L::FromU(Box::new(u2))
            }
            L::Lump(t, a) => {
                if let Some(a2) = self.sub_l("lump", st, a)? {
                    return Ok(Some(L::Lump(t.clone(), b(a2))));
                }
                let u = l_to_u(a, t).or_else(|err| stuck(err.kind))?;
                self.fire("l-lump", |_| {});
                L::LumpVal(Box::new(u))
            }
            L::Unlump(t, a) => {
                if let Some(a2) = self.sub_l("unlump", st, a)? {
                    return Ok(Some(L::Unlump(t.clone(), b(a2))));
                }
                let L::LumpVal(u) = &**a else { return stuck(format!("unlump of {a}")) };
                self.fire("l-unlump", |_| {});
                if self.mutated(Mutant::SkipBoundaryConversion) {
                    L::share((**a).clone())
                } else {
                    u_to_l(u, t, &mut self.supply).or_else(|err| stuck(err.kind))?
                }
            }
            L::Phase(n, a) => {
                if a.is_value() {
                    self.fire("phase-exit", |_| {});
                    return Ok(Some((**a).clone()));
                }
                self.phases.push(n.clone());
                let a2 = self.sub_l("phase", st, a)?.expect("non-value");
                self.phases.pop();
                L::Phase(n.clone(), b(a2))
            }
        }))
    }

    /// `copy (share σ v)` for a value `v`, one rule per connective.
    fn copy(&mut self, st: &mut Store, sigma: &Store, v: &LExpr) -> Result<LExpr, EvalError> {
        use LExpr as L;
        let share = |s: Store, v: &LExpr| L::Copy(Box::new(L::Share(s, Box::new(v.clone()))));
        let count = |s: &mut Stats| s.copies += 1;
        Ok(match v {
            L::Unit => {
                self.fire("copy-unit", count);
                L::Unit
            }
            L::Pair(v1, v2) => {
                self.fire("copy-pair", count);
                if self.mutated(Mutant::WrongCopySplit) {
                    L::pair(share(sigma.clone(), v1), share(Store::new(), v2))
                } else {
                    let s1 = sigma.restrict(&locations_of(v1));
                    let s2 = sigma.restrict(&locations_of(v2));
                    L::pair(share(s1, v1), share(s2, v2))
                }
            }
            L::Inj(s, t, w) => {
                self.fire("copy-inj", count);
                L::Inj(*s, t.clone(), Box::new(share(sigma.clone(), w)))
            }
            L::Fold(t, w) => {
                self.fire("copy-fold", count);
                L::Fold(t.clone(), Box::new(share(sigma.clone(), w)))
            }
            L::Lam(..) => {
                self.fire("copy-fun", count);
                let (s2, f2) = if self.mutated(Mutant::NoFreshening) {
                    (sigma.clone(), v.clone())
                } else {
                    freshen_config(sigma, v, &mut self.supply)
                };
                for (l, slot) in s2.iter() {
                    if st.insert(*l, slot.clone()).is_some() && !self.mutated(Mutant::NoFreshening) {
                        return stuck(format!("location {l} released twice"));
                    }
                }
                f2
            }
            L::Share(..) => {
                self.fire("copy-share", count);
                v.clone()
            }
            L::Loc(l) => match sigma.get(*l) {
                Some(Slot::Empty) => {
                    self.fire("copy-dead", count);
                    L::new_loc(L::Unit)
                }
                Some(Slot::Full(inner, w)) => {
                    self.fire("copy-alive", count);
                    L::box_up(L::pair(L::new_loc(L::Unit), share(inner.clone(), w)))
                }
                None => return stuck(format!("copy of {l}, which is not in the captured store")),
            },
            L::LumpVal(_) => {
                self.fire("copy-lump", count);
                v.clone()
            }
            _ => return stuck(format!("copy of {v}")),
        })
    }
}

fn b_l(e: LExpr) -> Box<LExpr> {
    Box::new(e)
}

fn all_locations_u_count(e: &UExpr) -> usize {
    crate::subst::all_locations_u(e).len()
}

/// Every rule name the evaluator can fire, for coverage reports.
pub const RULES: &[&str] = &[
    "u-fst", "u-snd", "u-let-unit", "u-beta", "u-case", "u-unfold-fold", "u-ty-beta", "ul-value",
    "l-let-pair", "l-let-unit", "l-beta", "l-case", "l-unfold-fold", "l-new", "l-free", "l-box",
    "l-unbox", "copy-unit", "copy-pair", "copy-inj", "copy-fold", "copy-fun", "copy-share",
    "copy-dead", "copy-alive", "copy-lump", "lu-value", "l-lump", "l-unlump", "phase-exit",
];

/// Runs a closed U program with default settings.
pub fn run(e: &UExpr, fuel: u64) -> (Outcome<UExpr>, Machine) {
    let mut m = Machine::for_u(e, fuel);
    let out = m.run_u(e);
    (out, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_lexpr, parse_store, parse_uexpr};

    fn step_once(store: &str, e: &str) -> (Store, LExpr, Machine) {
        let mut st = parse_store(store).unwrap();
        let e = parse_lexpr(e).unwrap();
        let mut m = Machine::for_config(&st, &e, 10);
        let e2 = m.step_l(&mut st, &e).unwrap().unwrap();
        (st, e2, m)
    }

    #[test]
    fn new_allocates() {
        let (st, e, m) = step_once("[]", "new ()");
        assert_eq!(e, LExpr::Loc(Location(0)));
        assert_eq!(st.get(Location(0)), Some(&Slot::Empty));
        assert_eq!(m.stats.new_allocs, 1);
    }

    #[test]
    fn box_moves_value_into_cell() {
        let (st, e, _) = step_once("[#0 := empty]", "box (#0, share ())");
        assert_eq!(e, LExpr::Loc(Location(0)));
        assert_eq!(st.get(Location(0)), Some(&Slot::Full(Store::new(), LExpr::share(LExpr::Unit))));
    }

    #[test]
    fn copy_of_fold_pushes_copy_inside() {
        let (_, e, _) = step_once("[]", "copy (share (fold[mu a. 1 + a] (inl[1 + (mu a. 1 + a)] ())))");
        assert!(matches!(e, LExpr::Fold(_, ref w) if matches!(**w, LExpr::Copy(_))));
    }

    #[test]
    fn copy_of_function_freshens() {
        let st0 = "[]";
        let src = "copy (share [#0 := empty] (fun (x : 1) -o let () = x in free #0))";
        let (st, e, _) = step_once(st0, src);
        assert_eq!(st.len(), 1);
        assert!(!st.contains(Location(0)));
        assert!(matches!(e, LExpr::Lam(..)));
    }

    #[test]
    fn boundaries_round_trip() {
        let e = parse_uexpr("UL { share (LU { () }) }").unwrap();
        let (out, m) = run(&e, 100);
        assert_eq!(out, Outcome::Value(UExpr::Unit));
        assert_eq!(m.stats.boundary_crossings, 2);
        let beta = parse_uexpr("(fun (x : unit) -> x) ()").unwrap();
        assert_eq!(run(&beta, 5).0, Outcome::Value(UExpr::Unit));
    }

    #[test]
    fn unlump_converts() {
        let mut st = Store::new();
        let e = parse_lexpr("unlump[!1] (LU { () })").unwrap();
        let mut m = Machine::for_config(&st, &e, 10);
        assert_eq!(m.run_l(&mut st, &e), Outcome::Value(LExpr::share(LExpr::Unit)));
    }

    #[test]
    fn omega_runs_out_of_fuel() {
        let src = "(fun (w : mu a. a -> unit) -> unfold w w) (fold[mu a. a -> unit] (fun (w : mu a. a -> unit) -> unfold w w))";
        let e = parse_uexpr(src).unwrap();
        assert_eq!(run(&e, 1000).0, Outcome::OutOfFuel);
    }

    #[test]
    fn trace_lines() {
        let e = parse_uexpr("UL { share (LU { () }) }").unwrap();
        let mut m = Machine::for_u(&e, 100).with_trace();
        m.run_u(&e);
        let text = m.trace_text();
        assert!(text.starts_with("step 1: lu-value @ UL.share"), "{text}");
        assert_eq!(m.trace_jsonl().lines().count(), 2);
    }
}
