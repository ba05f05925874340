//! Free variables, capture-avoiding substitution, location renaming and
//! alpha-equivalence over the mixed syntax.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ast::*;

// ---------------------------------------------------------------------------
// Free type variables

pub fn ftv_u(t: &UType) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    ftv_u_into(t, &mut Vec::new(), &mut out);
    out
}

fn ftv_u_into(t: &UType, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match t {
        UType::Var(a) => {
            if !bound.contains(a) {
                out.insert(a.clone());
            }
        }
        UType::Unit => {}
        UType::Prod(a, b) | UType::Sum(a, b) | UType::Fun(a, b) => {
            ftv_u_into(a, bound, out);
            ftv_u_into(b, bound, out);
        }
        UType::Mu(a, b) | UType::Forall(a, b) => {
            bound.push(a.clone());
            ftv_u_into(b, bound, out);
            bound.pop();
        }
    }
}

/// Free L type variables of an L type.
pub fn ftv_l(t: &LType) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    ftv_l_into(t, &mut Vec::new(), &mut out);
    out
}

fn ftv_l_into(t: &LType, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match t {
        LType::Var(a) => {
            if !bound.contains(a) {
                out.insert(a.clone());
            }
        }
        LType::Unit | LType::EmptyBox | LType::Lump(_) => {}
        LType::Tensor(a, b) | LType::Plus(a, b) | LType::Lolli(a, b) => {
            ftv_l_into(a, bound, out);
            ftv_l_into(b, bound, out);
        }
        LType::Bang(a) | LType::Boxed(a) => ftv_l_into(a, bound, out),
        LType::Mu(a, b) => {
            bound.push(a.clone());
            ftv_l_into(b, bound, out);
            bound.pop();
        }
    }
}

/// Free U type variables occurring inside the lump payloads of an L type.
pub fn ftv_u_in_l(t: &LType) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fn go(t: &LType, out: &mut BTreeSet<Name>) {
        match t {
            LType::Lump(u) => out.extend(ftv_u(u)),
            LType::Var(_) | LType::Unit | LType::EmptyBox => {}
            LType::Tensor(a, b) | LType::Plus(a, b) | LType::Lolli(a, b) => {
                go(a, out);
                go(b, out);
            }
            LType::Bang(a) | LType::Boxed(a) | LType::Mu(_, a) => go(a, out),
        }
    }
    go(t, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Type substitution

/// `t[s/a]` on U types, renaming binders that would capture.
pub fn subst_utype(t: &UType, a: &str, s: &UType) -> UType {
    let fv = ftv_u(s);
    subst_utype_with(t, a, s, &fv)
}

fn subst_utype_with(t: &UType, a: &str, s: &UType, fv: &BTreeSet<Name>) -> UType {
    match t {
        UType::Var(b) if b == a => s.clone(),
        UType::Var(_) | UType::Unit => t.clone(),
        UType::Prod(x, y) => UType::prod(
            subst_utype_with(x, a, s, fv),
            subst_utype_with(y, a, s, fv),
        ),
        UType::Sum(x, y) => UType::sum(
            subst_utype_with(x, a, s, fv),
            subst_utype_with(y, a, s, fv),
        ),
        UType::Fun(x, y) => UType::fun(
            subst_utype_with(x, a, s, fv),
            subst_utype_with(y, a, s, fv),
        ),
        UType::Mu(b, body) | UType::Forall(b, body) => {
            let rebuild = |n: Name, bd: UType| match t {
                UType::Mu(..) => UType::mu(n, bd),
                _ => UType::forall(n, bd),
            };
            if b == a {
                t.clone()
            } else if fv.contains(b) {
                let nb = fresh_name(b);
                let renamed = subst_utype(body, b, &UType::Var(nb.clone()));
                rebuild(nb, subst_utype_with(&renamed, a, s, fv))
            } else {
                rebuild(b.clone(), subst_utype_with(body, a, s, fv))
            }
        }
    }
}

/// `t[s/a]` on L types (L type variables only).
pub fn subst_ltype(t: &LType, a: &str, s: &LType) -> LType {
    let fv = ftv_l(s);
    subst_ltype_with(t, a, s, &fv)
}

fn subst_ltype_with(t: &LType, a: &str, s: &LType, fv: &BTreeSet<Name>) -> LType {
    match t {
        LType::Var(b) if b == a => s.clone(),
        LType::Var(_) | LType::Unit | LType::EmptyBox | LType::Lump(_) => t.clone(),
        LType::Tensor(x, y) => LType::tensor(
            subst_ltype_with(x, a, s, fv),
            subst_ltype_with(y, a, s, fv),
        ),
        LType::Plus(x, y) => LType::plus(
            subst_ltype_with(x, a, s, fv),
            subst_ltype_with(y, a, s, fv),
        ),
        LType::Lolli(x, y) => LType::lolli(
            subst_ltype_with(x, a, s, fv),
            subst_ltype_with(y, a, s, fv),
        ),
        LType::Bang(x) => LType::bang(subst_ltype_with(x, a, s, fv)),
        LType::Boxed(x) => LType::boxed(subst_ltype_with(x, a, s, fv)),
        LType::Mu(b, body) => {
            if b == a {
                t.clone()
            } else if fv.contains(b) {
                let nb = fresh_name(b);
                let renamed = subst_ltype(body, b, &LType::Var(nb.clone()));
                LType::mu(nb, subst_ltype_with(&renamed, a, s, fv))
            } else {
                LType::mu(b.clone(), subst_ltype_with(body, a, s, fv))
            }
        }
    }
}

/// One-level unfolding of `mu a. body`.
pub fn unfold_ltype(a: &str, body: &LType) -> LType {
    subst_ltype(body, a, &LType::mu(a, body.clone()))
}

pub fn unfold_utype(a: &str, body: &UType) -> UType {
    subst_utype(body, a, &UType::mu(a, body.clone()))
}

/// Substitutes a U type for a U type variable inside lump payloads.
pub fn subst_utype_in_ltype(t: &LType, a: &str, s: &UType) -> LType {
    match t {
        LType::Lump(u) => LType::Lump(subst_utype(u, a, s)),
        LType::Var(_) | LType::Unit | LType::EmptyBox => t.clone(),
        LType::Tensor(x, y) => LType::tensor(
            subst_utype_in_ltype(x, a, s),
            subst_utype_in_ltype(y, a, s),
        ),
        LType::Plus(x, y) => {
            LType::plus(subst_utype_in_ltype(x, a, s), subst_utype_in_ltype(y, a, s))
        }
        LType::Lolli(x, y) => LType::lolli(
            subst_utype_in_ltype(x, a, s),
            subst_utype_in_ltype(y, a, s),
        ),
        LType::Bang(x) => LType::bang(subst_utype_in_ltype(x, a, s)),
        LType::Boxed(x) => LType::boxed(subst_utype_in_ltype(x, a, s)),
        LType::Mu(b, x) => LType::mu(b.clone(), subst_utype_in_ltype(x, a, s)),
    }
}

/// `e[s/a]` for a U type variable throughout a U expression, including
/// annotations of nested L code.
pub fn tysubst_uexpr(e: &UExpr, a: &str, s: &UType) -> UExpr {
    let fv = ftv_u(s);
    TySubst { a, s, fv: &fv }.u(e)
}

pub fn tysubst_lexpr(e: &LExpr, a: &str, s: &UType) -> LExpr {
    let fv = ftv_u(s);
    TySubst { a, s, fv: &fv }.l(e)
}

struct TySubst<'a> {
    a: &'a str,
    s: &'a UType,
    fv: &'a BTreeSet<Name>,
}

impl TySubst<'_> {
    fn ut(&self, t: &UType) -> UType {
        subst_utype_with(t, self.a, self.s, self.fv)
    }
    fn lt(&self, t: &LType) -> LType {
        subst_utype_in_ltype(t, self.a, self.s)
    }
    fn store(&self, st: &Store) -> Store {
        st.iter()
            .map(|(l, slot)| {
                let slot = match slot {
                    Slot::Empty => Slot::Empty,
                    Slot::Full(inner, v) => Slot::Full(self.store(inner), self.l(v)),
                };
                (*l, slot)
            })
            .collect()
    }
    fn u(&self, e: &UExpr) -> UExpr {
        match e {
            UExpr::Var(_) | UExpr::Unit => e.clone(),
            UExpr::Pair(a, b) => UExpr::pair(self.u(a), self.u(b)),
            UExpr::Fst(a) => UExpr::fst(self.u(a)),
            UExpr::Snd(a) => UExpr::snd(self.u(a)),
            UExpr::LetUnit(a, b) => UExpr::let_unit(self.u(a), self.u(b)),
            UExpr::Lam(x, t, b) => UExpr::lam(x.clone(), self.ut(t), self.u(b)),
            UExpr::App(a, b) => UExpr::app(self.u(a), self.u(b)),
            UExpr::Inj(s, t, a) => UExpr::inj(*s, self.ut(t), self.u(a)),
            UExpr::Case(e0, x, l, y, r) => {
                UExpr::case(self.u(e0), x.clone(), self.u(l), y.clone(), self.u(r))
            }
            UExpr::Fold(t, a) => UExpr::fold(self.ut(t), self.u(a)),
            UExpr::Unfold(a) => UExpr::unfold(self.u(a)),
            UExpr::TyAbs(b, body) => {
                if b == self.a {
                    e.clone()
                } else if self.fv.contains(b) {
                    let nb = fresh_name(b);
                    let renamed = tysubst_uexpr(body, b, &UType::Var(nb.clone()));
                    UExpr::ty_abs(nb, self.u(&renamed))
                } else {
                    UExpr::ty_abs(b.clone(), self.u(body))
                }
            }
            UExpr::TyApp(a, t) => UExpr::ty_app(self.u(a), self.ut(t)),
            UExpr::Boundary(st, body) => UExpr::Boundary(self.store(st), Box::new(self.l(body))),
        }
    }
    fn l(&self, e: &LExpr) -> LExpr {
        match e {
            LExpr::Var(_) | LExpr::Unit | LExpr::Loc(_) => e.clone(),
            LExpr::Pair(a, b) => LExpr::pair(self.l(a), self.l(b)),
            LExpr::LetPair(x, y, a, b) => LExpr::let_pair(x.clone(), y.clone(), self.l(a), self.l(b)),
            LExpr::LetUnit(a, b) => LExpr::let_unit(self.l(a), self.l(b)),
            LExpr::Lam(x, t, b) => LExpr::lam(x.clone(), self.lt(t), self.l(b)),
            LExpr::App(a, b) => LExpr::app(self.l(a), self.l(b)),
            LExpr::Inj(s, t, a) => LExpr::inj(*s, self.lt(t), self.l(a)),
            LExpr::Case(e0, x, l, y, r) => {
                LExpr::case(self.l(e0), x.clone(), self.l(l), y.clone(), self.l(r))
            }
            LExpr::Fold(t, a) => LExpr::fold(self.lt(t), self.l(a)),
            LExpr::Unfold(a) => LExpr::unfold(self.l(a)),
            LExpr::Share(st, a) => LExpr::share_with(self.store(st), self.l(a)),
            LExpr::Copy(a) => LExpr::copy(self.l(a)),
            LExpr::New(a) => LExpr::new_loc(self.l(a)),
            LExpr::Free(a) => LExpr::free(self.l(a)),
            LExpr::BoxUp(a) => LExpr::box_up(self.l(a)),
            LExpr::Unbox(a) => LExpr::unbox(self.l(a)),
            LExpr::LumpVal(u) => LExpr::lump_val(self.u(u)),
            LExpr::FromU(u) => LExpr::from_u(self.u(u)),
            LExpr::Lump(t, a) => LExpr::lump(self.lt(t), self.l(a)),
            LExpr::Unlump(t, a) => LExpr::unlump(self.lt(t), self.l(a)),
            LExpr::Phase(n, a) => LExpr::Phase(n.clone(), Box::new(self.l(a))),
        }
    }
}

// ---------------------------------------------------------------------------
// Free term variables

pub fn free_vars_u(e: &UExpr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fv_u(e, &mut Vec::new(), &mut out);
    out
}

pub fn free_vars_l(e: &LExpr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fv_l(e, &mut Vec::new(), &mut out);
    out
}

fn fv_store(st: &Store, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    for (_, slot) in st.iter() {
        if let Slot::Full(inner, v) = slot {
            fv_store(inner, bound, out);
            fv_l(v, bound, out);
        }
    }
}

fn fv_u(e: &UExpr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e {
        UExpr::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        UExpr::Unit => {}
        UExpr::Pair(a, b) | UExpr::LetUnit(a, b) | UExpr::App(a, b) => {
            fv_u(a, bound, out);
            fv_u(b, bound, out);
        }
        UExpr::Fst(a)
        | UExpr::Snd(a)
        | UExpr::Inj(_, _, a)
        | UExpr::Fold(_, a)
        | UExpr::Unfold(a)
        | UExpr::TyAbs(_, a)
        | UExpr::TyApp(a, _) => fv_u(a, bound, out),
        UExpr::Lam(x, _, b) => {
            bound.push(x.clone());
            fv_u(b, bound, out);
            bound.pop();
        }
        UExpr::Case(e0, x, l, y, r) => {
            fv_u(e0, bound, out);
            bound.push(x.clone());
            fv_u(l, bound, out);
            bound.pop();
            bound.push(y.clone());
            fv_u(r, bound, out);
            bound.pop();
        }
        UExpr::Boundary(st, b) => {
            fv_store(st, bound, out);
            fv_l(b, bound, out);
        }
    }
}

fn fv_l(e: &LExpr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e {
        LExpr::Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        LExpr::Unit | LExpr::Loc(_) => {}
        LExpr::Pair(a, b) | LExpr::LetUnit(a, b) | LExpr::App(a, b) => {
            fv_l(a, bound, out);
            fv_l(b, bound, out);
        }
        LExpr::LetPair(x, y, a, b) => {
            fv_l(a, bound, out);
            bound.push(x.clone());
            bound.push(y.clone());
            fv_l(b, bound, out);
            bound.pop();
            bound.pop();
        }
        LExpr::Lam(x, _, b) => {
            bound.push(x.clone());
            fv_l(b, bound, out);
            bound.pop();
        }
        LExpr::Case(e0, x, l, y, r) => {
            fv_l(e0, bound, out);
            bound.push(x.clone());
            fv_l(l, bound, out);
            bound.pop();
            bound.push(y.clone());
            fv_l(r, bound, out);
            bound.pop();
        }
        LExpr::Inj(_, _, a)
        | LExpr::Fold(_, a)
        | LExpr::Unfold(a)
        | LExpr::Copy(a)
        | LExpr::New(a)
        | LExpr::Free(a)
        | LExpr::BoxUp(a)
        | LExpr::Unbox(a)
        | LExpr::Lump(_, a)
        | LExpr::Unlump(_, a)
        | LExpr::Phase(_, a) => fv_l(a, bound, out),
        LExpr::Share(st, a) => {
            fv_store(st, bound, out);
            fv_l(a, bound, out);
        }
        LExpr::LumpVal(u) | LExpr::FromU(u) => fv_u(u, bound, out),
    }
}

// ---------------------------------------------------------------------------
// Free locations

/// Locations occurring free in an L term. Locations in the domain of a
/// `share` store are bound there.
pub fn locations_of(e: &LExpr) -> BTreeSet<Location> {
    let mut out = BTreeSet::new();
    locs_l(e, &mut out);
    out
}

pub fn locations_of_u(e: &UExpr) -> BTreeSet<Location> {
    let mut out = BTreeSet::new();
    locs_u(e, &mut out);
    out
}

/// Free locations of a configuration `⟨σ, e⟩`: those of `e` and of the
/// stored values, minus the domain of `σ`.
pub fn locations_of_config(st: &Store, e: &LExpr) -> BTreeSet<Location> {
    let mut inner = BTreeSet::new();
    locs_l(e, &mut inner);
    for (_, slot) in st.iter() {
        if let Slot::Full(s2, v) = slot {
            inner.extend(locations_of_config(s2, v));
        }
    }
    for l in st.locations() {
        inner.remove(&l);
    }
    inner
}

fn locs_u(e: &UExpr, out: &mut BTreeSet<Location>) {
    match e {
        UExpr::Var(_) | UExpr::Unit => {}
        UExpr::Pair(a, b) | UExpr::LetUnit(a, b) | UExpr::App(a, b) => {
            locs_u(a, out);
            locs_u(b, out);
        }
        UExpr::Fst(a)
        | UExpr::Snd(a)
        | UExpr::Inj(_, _, a)
        | UExpr::Fold(_, a)
        | UExpr::Unfold(a)
        | UExpr::TyAbs(_, a)
        | UExpr::TyApp(a, _)
        | UExpr::Lam(_, _, a) => locs_u(a, out),
        UExpr::Case(e0, _, l, _, r) => {
            locs_u(e0, out);
            locs_u(l, out);
            locs_u(r, out);
        }
        UExpr::Boundary(st, b) => out.extend(locations_of_config(st, b)),
    }
}

fn locs_l(e: &LExpr, out: &mut BTreeSet<Location>) {
    match e {
        LExpr::Loc(l) => {
            out.insert(*l);
        }
        LExpr::Var(_) | LExpr::Unit => {}
        LExpr::Pair(a, b) | LExpr::LetUnit(a, b) | LExpr::App(a, b) | LExpr::LetPair(_, _, a, b) => {
            locs_l(a, out);
            locs_l(b, out);
        }
        LExpr::Case(e0, _, l, _, r) => {
            locs_l(e0, out);
            locs_l(l, out);
            locs_l(r, out);
        }
        LExpr::Lam(_, _, a)
        | LExpr::Inj(_, _, a)
        | LExpr::Fold(_, a)
        | LExpr::Unfold(a)
        | LExpr::Copy(a)
        | LExpr::New(a)
        | LExpr::Free(a)
        | LExpr::BoxUp(a)
        | LExpr::Unbox(a)
        | LExpr::Lump(_, a)
        | LExpr::Unlump(_, a)
        | LExpr::Phase(_, a) => locs_l(a, out),
        LExpr::Share(st, a) => out.extend(locations_of_config(st, a)),
        LExpr::LumpVal(u) | LExpr::FromU(u) => locs_u(u, out),
    }
}

// ---------------------------------------------------------------------------
// Term substitution

/// The value being substituted, tagged with its language.
#[derive(Clone, Copy, Debug)]
pub enum Val<'a> {
    U(&'a UExpr),
    L(&'a LExpr),
}

/// `e[v/x]` where `e` is a U expression.
pub fn subst_u(e: &UExpr, x: &str, v: Val<'_>) -> UExpr {
    let fv = match v {
        Val::U(u) => free_vars_u(u),
        Val::L(l) => free_vars_l(l),
    };
    Subst { x, v, fv: &fv }.u(e)
}

/// `e[v/x]` where `e` is an L expression.
pub fn subst_l(e: &LExpr, x: &str, v: Val<'_>) -> LExpr {
    let fv = match v {
        Val::U(u) => free_vars_u(u),
        Val::L(l) => free_vars_l(l),
    };
    Subst { x, v, fv: &fv }.l(e)
}

/// Renames the variable `x` to `y` in a U expression.
pub fn rename_u(e: &UExpr, x: &str, y: &str) -> UExpr {
    // A variable occurrence of either sort must be renamed, so substitute
    // twice; the two substitutions touch disjoint node kinds.
    let uv = UExpr::Var(y.to_string());
    let lv = LExpr::Var(y.to_string());
    subst_u(&subst_u(e, x, Val::U(&uv)), x, Val::L(&lv))
}

pub fn rename_l(e: &LExpr, x: &str, y: &str) -> LExpr {
    let uv = UExpr::Var(y.to_string());
    let lv = LExpr::Var(y.to_string());
    subst_l(&subst_l(e, x, Val::U(&uv)), x, Val::L(&lv))
}

struct Subst<'a> {
    x: &'a str,
    v: Val<'a>,
    fv: &'a BTreeSet<Name>,
}

impl Subst<'_> {
    /// Handles a binder `b` scoping over `body`: returns the possibly
    /// renamed binder and whether substitution continues inside.
    fn binder_u(&self, b: &Name, body: &UExpr) -> (Name, Option<UExpr>) {
        if b == self.x {
            (b.clone(), None)
        } else if self.fv.contains(b) {
            let nb = fresh_name(b);
            (nb.clone(), Some(rename_u(body, b, &nb)))
        } else {
            (b.clone(), Some(body.clone()))
        }
    }

    fn binder_l(&self, b: &Name, body: &LExpr) -> (Name, Option<LExpr>) {
        if b == self.x {
            (b.clone(), None)
        } else if self.fv.contains(b) {
            let nb = fresh_name(b);
            (nb.clone(), Some(rename_l(body, b, &nb)))
        } else {
            (b.clone(), Some(body.clone()))
        }
    }

    fn under_u(&self, b: &Name, body: &UExpr) -> (Name, UExpr) {
        match self.binder_u(b, body) {
            (n, None) => (n, body.clone()),
            (n, Some(bd)) => (n, self.u(&bd)),
        }
    }

    fn under_l(&self, b: &Name, body: &LExpr) -> (Name, LExpr) {
        match self.binder_l(b, body) {
            (n, None) => (n, body.clone()),
            (n, Some(bd)) => (n, self.l(&bd)),
        }
    }

    fn store(&self, st: &Store) -> Store {
        st.iter()
            .map(|(l, slot)| {
                let slot = match slot {
                    Slot::Empty => Slot::Empty,
                    Slot::Full(inner, v) => Slot::Full(self.store(inner), self.l(v)),
                };
                (*l, slot)
            })
            .collect()
    }

    fn u(&self, e: &UExpr) -> UExpr {
        match e {
            UExpr::Var(y) => match self.v {
                Val::U(v) if y == self.x => v.clone(),
                _ => e.clone(),
            },
            UExpr::Unit => UExpr::Unit,
            UExpr::Pair(a, b) => UExpr::pair(self.u(a), self.u(b)),
            UExpr::Fst(a) => UExpr::fst(self.u(a)),
            UExpr::Snd(a) => UExpr::snd(self.u(a)),
            UExpr::LetUnit(a, b) => UExpr::let_unit(self.u(a), self.u(b)),
            UExpr::Lam(y, t, b) => {
                let (n, bd) = self.under_u(y, b);
                UExpr::lam(n, t.clone(), bd)
            }
            UExpr::App(a, b) => UExpr::app(self.u(a), self.u(b)),
            UExpr::Inj(s, t, a) => UExpr::inj(*s, t.clone(), self.u(a)),
            UExpr::Case(e0, y, l, z, r) => {
                let (n1, l1) = self.under_u(y, l);
                let (n2, r1) = self.under_u(z, r);
                UExpr::case(self.u(e0), n1, l1, n2, r1)
            }
            UExpr::Fold(t, a) => UExpr::fold(t.clone(), self.u(a)),
            UExpr::Unfold(a) => UExpr::unfold(self.u(a)),
            UExpr::TyAbs(a, b) => UExpr::ty_abs(a.clone(), self.u(b)),
            UExpr::TyApp(a, t) => UExpr::ty_app(self.u(a), t.clone()),
            UExpr::Boundary(st, b) => UExpr::Boundary(self.store(st), Box::new(self.l(b))),
        }
    }

    fn l(&self, e: &LExpr) -> LExpr {
        match e {
            LExpr::Var(y) => match self.v {
                Val::L(v) if y == self.x => v.clone(),
                _ => e.clone(),
            },
            LExpr::Unit | LExpr::Loc(_) => e.clone(),
            LExpr::Pair(a, b) => LExpr::pair(self.l(a), self.l(b)),
            LExpr::LetPair(y, z, a, b) => {
                let a1 = self.l(a);
                if y == self.x || z == self.x {
                    return LExpr::let_pair(y.clone(), z.clone(), a1, (**b).clone());
                }
                let (n1, b1) = match self.binder_l(y, b) {
                    (n, Some(bd)) => (n, bd),
                    (n, None) => (n, (**b).clone()),
                };
                let (n2, b2) = match self.binder_l(z, &b1) {
                    (n, Some(bd)) => (n, bd),
                    (n, None) => (n, b1),
                };
                LExpr::let_pair(n1, n2, a1, self.l(&b2))
            }
            LExpr::LetUnit(a, b) => LExpr::let_unit(self.l(a), self.l(b)),
            LExpr::Lam(y, t, b) => {
                let (n, bd) = self.under_l(y, b);
                LExpr::lam(n, t.clone(), bd)
            }
            LExpr::App(a, b) => LExpr::app(self.l(a), self.l(b)),
            LExpr::Inj(s, t, a) => LExpr::inj(*s, t.clone(), self.l(a)),
            LExpr::Case(e0, y, l, z, r) => {
                let (n1, l1) = self.under_l(y, l);
                let (n2, r1) = self.under_l(z, r);
                LExpr::case(self.l(e0), n1, l1, n2, r1)
            }
            LExpr::Fold(t, a) => LExpr::fold(t.clone(), self.l(a)),
            LExpr::Unfold(a) => LExpr::unfold(self.l(a)),
            LExpr::Share(st, a) => LExpr::share_with(self.store(st), self.l(a)),
            LExpr::Copy(a) => LExpr::copy(self.l(a)),
            LExpr::New(a) => LExpr::new_loc(self.l(a)),
            LExpr::Free(a) => LExpr::free(self.l(a)),
            LExpr::BoxUp(a) => LExpr::box_up(self.l(a)),
            LExpr::Unbox(a) => LExpr::unbox(self.l(a)),
            LExpr::LumpVal(u) => LExpr::lump_val(self.u(u)),
            LExpr::FromU(u) => LExpr::from_u(self.u(u)),
            LExpr::Lump(t, a) => LExpr::lump(t.clone(), self.l(a)),
            LExpr::Unlump(t, a) => LExpr::unlump(t.clone(), self.l(a)),
            LExpr::Phase(n, a) => LExpr::Phase(n.clone(), Box::new(self.l(a))),
        }
    }
}

// ---------------------------------------------------------------------------
// Location renaming

/// Applies a location renaming everywhere (binding and use sites alike).
/// Locations missing from the map are left alone.
pub fn rename_locations_l(e: &LExpr, map: &BTreeMap<Location, Location>) -> LExpr {
    LocMap { map }.l(e)
}

pub fn rename_locations_store(st: &Store, map: &BTreeMap<Location, Location>) -> Store {
    LocMap { map }.store(st)
}

/// Renames every location occurring anywhere in `⟨σ, e⟩` to a fresh one.
pub fn freshen_config(st: &Store, e: &LExpr, supply: &mut LocSupply) -> (Store, LExpr) {
    let mut all = BTreeSet::new();
    collect_all_locs_store(st, &mut all);
    collect_all_locs_l(e, &mut all);
    let map: BTreeMap<Location, Location> = all.into_iter().map(|l| (l, supply.fresh())).collect();
    (rename_locations_store(st, &map), rename_locations_l(e, &map))
}

/// Every location mentioned anywhere in a term, bound or free.
pub fn all_locations_l(e: &LExpr) -> BTreeSet<Location> {
    let mut out = BTreeSet::new();
    collect_all_locs_l(e, &mut out);
    out
}

pub fn all_locations_u(e: &UExpr) -> BTreeSet<Location> {
    let mut out = BTreeSet::new();
    e.visit(&mut |n| all_locs_node(n, &mut out));
    out
}

fn collect_all_locs_l(e: &LExpr, out: &mut BTreeSet<Location>) {
    e.visit(&mut |n| all_locs_node(n, out));
}

fn all_locs_node(n: Node<'_>, out: &mut BTreeSet<Location>) {
    match n {
        Node::U(UExpr::Boundary(st, _)) | Node::L(LExpr::Share(st, _)) => {
            out.extend(st.all_locations())
        }
        Node::L(LExpr::Loc(x)) => {
            out.insert(*x);
        }
        _ => {}
    }
}

fn collect_all_locs_store(st: &Store, out: &mut BTreeSet<Location>) {
    for (l, slot) in st.iter() {
        out.insert(*l);
        if let Slot::Full(inner, v) = slot {
            collect_all_locs_store(inner, out);
            collect_all_locs_l(v, out);
        }
    }
}

struct LocMap<'a> {
    map: &'a BTreeMap<Location, Location>,
}

impl LocMap<'_> {
    fn loc(&self, l: Location) -> Location {
        self.map.get(&l).copied().unwrap_or(l)
    }
    fn store(&self, st: &Store) -> Store {
        st.iter()
            .map(|(l, slot)| {
                let slot = match slot {
                    Slot::Empty => Slot::Empty,
                    Slot::Full(inner, v) => Slot::Full(self.store(inner), self.l(v)),
                };
                (self.loc(*l), slot)
            })
            .collect()
    }
    fn u(&self, e: &UExpr) -> UExpr {
        match e {
            UExpr::Var(_) | UExpr::Unit => e.clone(),
            UExpr::Pair(a, b) => UExpr::pair(self.u(a), self.u(b)),
            UExpr::Fst(a) => UExpr::fst(self.u(a)),
            UExpr::Snd(a) => UExpr::snd(self.u(a)),
            UExpr::LetUnit(a, b) => UExpr::let_unit(self.u(a), self.u(b)),
            UExpr::Lam(x, t, b) => UExpr::lam(x.clone(), t.clone(), self.u(b)),
            UExpr::App(a, b) => UExpr::app(self.u(a), self.u(b)),
            UExpr::Inj(s, t, a) => UExpr::inj(*s, t.clone(), self.u(a)),
            UExpr::Case(e0, x, l, y, r) => {
                UExpr::case(self.u(e0), x.clone(), self.u(l), y.clone(), self.u(r))
            }
            UExpr::Fold(t, a) => UExpr::fold(t.clone(), self.u(a)),
            UExpr::Unfold(a) => UExpr::unfold(self.u(a)),
            UExpr::TyAbs(a, b) => UExpr::ty_abs(a.clone(), self.u(b)),
            UExpr::TyApp(a, t) => UExpr::ty_app(self.u(a), t.clone()),
            UExpr::Boundary(st, b) => UExpr::Boundary(self.store(st), Box::new(self.l(b))),
        }
    }
    fn l(&self, e: &LExpr) -> LExpr {
        match e {
            LExpr::Loc(l) => LExpr::Loc(self.loc(*l)),
            LExpr::Var(_) | LExpr::Unit => e.clone(),
            LExpr::Pair(a, b) => LExpr::pair(self.l(a), self.l(b)),
            LExpr::LetPair(x, y, a, b) => LExpr::let_pair(x.clone(), y.clone(), self.l(a), self.l(b)),
            LExpr::LetUnit(a, b) => LExpr::let_unit(self.l(a), self.l(b)),
            LExpr::Lam(x, t, b) => LExpr::lam(x.clone(), t.clone(), self.l(b)),
            LExpr::App(a, b) => LExpr::app(self.l(a), self.l(b)),
            LExpr::Inj(s, t, a) => LExpr::inj(*s, t.clone(), self.l(a)),
            LExpr::Case(e0, x, l, y, r) => {
                LExpr::case(self.l(e0), x.clone(), self.l(l), y.clone(), self.l(r))
            }
            LExpr::Fold(t, a) => LExpr::fold(t.clone(), self.l(a)),
            LExpr::Unfold(a) => LExpr::unfold(self.l(a)),
            LExpr::Share(st, a) => LExpr::share_with(self.store(st), self.l(a)),
            LExpr::Copy(a) => LExpr::copy(self.l(a)),
            LExpr::New(a) => LExpr::new_loc(self.l(a)),
            LExpr::Free(a) => LExpr::free(self.l(a)),
            LExpr::BoxUp(a) => LExpr::box_up(self.l(a)),
            LExpr::Unbox(a) => LExpr::unbox(self.l(a)),
            LExpr::LumpVal(u) => LExpr::lump_val(self.u(u)),
            LExpr::FromU(u) => LExpr::from_u(self.u(u)),
            LExpr::Lump(t, a) => LExpr::lump(t.clone(), self.l(a)),
            LExpr::Unlump(t, a) => LExpr::unlump(t.clone(), self.l(a)),
            LExpr::Phase(n, a) => LExpr::Phase(n.clone(), Box::new(self.l(a))),
        }
    }
}

// ---------------------------------------------------------------------------
// Alpha-equivalence

pub fn alpha_eq_utype(a: &UType, b: &UType) -> bool {
    Alpha::default().ut(a, b)
}

pub fn alpha_eq_ltype(a: &LType, b: &LType) -> bool {
    Alpha::default().lt(a, b)
}

/// Alpha-equivalence of U expressions, also identifying terms that differ
/// only by a consistent renaming of locations.
pub fn alpha_eq_uexpr(a: &UExpr, b: &UExpr) -> bool {
    Alpha::default().u(a, b)
}

pub fn alpha_eq_lexpr(a: &LExpr, b: &LExpr) -> bool {
    Alpha::default().l(a, b)
}

pub fn alpha_eq_config(sa: &Store, a: &LExpr, sb: &Store, b: &LExpr) -> bool {
    let mut al = Alpha::default();
    al.store(sa, sb) && al.l(a, b)
}

#[derive(Default)]
struct Alpha {
    vars: Vec<(Name, Name)>,
    utv: Vec<(Name, Name)>,
    ltv: Vec<(Name, Name)>,
    locs: HashMap<Location, Location>,
    locs_rev: HashMap<Location, Location>,
}

fn lookup_pair(env: &[(Name, Name)], x: &str, y: &str) -> bool {
    for (a, b) in env.iter().rev() {
        if a == x || b == y {
            return a == x && b == y;
        }
    }
    x == y
}

impl Alpha {
    fn ut(&mut self, a: &UType, b: &UType) -> bool {
        match (a, b) {
            (UType::Var(x), UType::Var(y)) => lookup_pair(&self.utv, x, y),
            (UType::Unit, UType::Unit) => true,
            (UType::Prod(a1, a2), UType::Prod(b1, b2))
            | (UType::Sum(a1, a2), UType::Sum(b1, b2))
            | (UType::Fun(a1, a2), UType::Fun(b1, b2)) => self.ut(a1, b1) && self.ut(a2, b2),
            (UType::Mu(x, a1), UType::Mu(y, b1)) | (UType::Forall(x, a1), UType::Forall(y, b1)) => {
                self.utv.push((x.clone(), y.clone()));
                let r = self.ut(a1, b1);
                self.utv.pop();
                r
            }
            _ => false,
        }
    }

    fn lt(&mut self, a: &LType, b: &LType) -> bool {
        match (a, b) {
            (LType::Var(x), LType::Var(y)) => lookup_pair(&self.ltv, x, y),
            (LType::Unit, LType::Unit) | (LType::EmptyBox, LType::EmptyBox) => true,
            (LType::Lump(x), LType::Lump(y)) => self.ut(x, y),
            (LType::Tensor(a1, a2), LType::Tensor(b1, b2))
            | (LType::Plus(a1, a2), LType::Plus(b1, b2))
            | (LType::Lolli(a1, a2), LType::Lolli(b1, b2)) => self.lt(a1, b1) && self.lt(a2, b2),
            (LType::Bang(x), LType::Bang(y)) | (LType::Boxed(x), LType::Boxed(y)) => self.lt(x, y),
            (LType::Mu(x, a1), LType::Mu(y, b1)) => {
                self.ltv.push((x.clone(), y.clone()));
                let r = self.lt(a1, b1);
                self.ltv.pop();
                r
            }
            _ => false,
        }
    }

    fn loc(&mut self, a: Location, b: Location) -> bool {
        match (self.locs.get(&a), self.locs_rev.get(&b)) {
            (Some(x), Some(y)) => *x == b && *y == a,
            (None, None) => {
                self.locs.insert(a, b);
                self.locs_rev.insert(b, a);
                true
            }
            _ => false,
        }
    }

    fn store(&mut self, a: &Store, b: &Store) -> bool {
        if a.len() != b.len() {
            return false;
        }
        for ((la, sa), (lb, sb)) in a.iter().zip(b.iter()) {
            if !self.loc(*la, *lb) {
                return false;
            }
            let ok = match (sa, sb) {
                (Slot::Empty, Slot::Empty) => true,
                (Slot::Full(ia, va), Slot::Full(ib, vb)) => self.store(ia, ib) && self.l(va, vb),
                _ => false,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn bind<T>(&mut self, x: &Name, y: &Name, f: impl FnOnce(&mut Self) -> T) -> T {
        self.vars.push((x.clone(), y.clone()));
        let r = f(self);
        self.vars.pop();
        r
    }

    fn u(&mut self, a: &UExpr, b: &UExpr) -> bool {
        match (a, b) {
            (UExpr::Var(x), UExpr::Var(y)) => lookup_pair(&self.vars, x, y),
            (UExpr::Unit, UExpr::Unit) => true,
            (UExpr::Pair(a1, a2), UExpr::Pair(b1, b2))
            | (UExpr::LetUnit(a1, a2), UExpr::LetUnit(b1, b2))
            | (UExpr::App(a1, a2), UExpr::App(b1, b2)) => self.u(a1, b1) && self.u(a2, b2),
            (UExpr::Fst(x), UExpr::Fst(y))
            | (UExpr::Snd(x), UExpr::Snd(y))
            | (UExpr::Unfold(x), UExpr::Unfold(y)) => self.u(x, y),
            (UExpr::Lam(x, tx, bx), UExpr::Lam(y, ty, by)) => {
                self.ut(tx, ty) && self.bind(x, y, |s| s.u(bx, by))
            }
            (UExpr::Inj(s1, t1, x), UExpr::Inj(s2, t2, y)) => {
                s1 == s2 && self.ut(t1, t2) && self.u(x, y)
            }
            (UExpr::Case(e1, x1, l1, y1, r1), UExpr::Case(e2, x2, l2, y2, r2)) => {
                self.u(e1, e2)
                    && self.bind(x1, x2, |s| s.u(l1, l2))
                    && self.bind(y1, y2, |s| s.u(r1, r2))
            }
            (UExpr::Fold(t1, x), UExpr::Fold(t2, y)) => self.ut(t1, t2) && self.u(x, y),
            (UExpr::TyAbs(a1, x), UExpr::TyAbs(a2, y)) => {
                self.utv.push((a1.clone(), a2.clone()));
                let r = self.u(x, y);
                self.utv.pop();
                r
            }
            (UExpr::TyApp(x, t1), UExpr::TyApp(y, t2)) => self.u(x, y) && self.ut(t1, t2),
            (UExpr::Boundary(s1, x), UExpr::Boundary(s2, y)) => self.store(s1, s2) && self.l(x, y),
            _ => false,
        }
    }

    fn l(&mut self, a: &LExpr, b: &LExpr) -> bool {
        match (a, b) {
            (LExpr::Var(x), LExpr::Var(y)) => lookup_pair(&self.vars, x, y),
            (LExpr::Unit, LExpr::Unit) => true,
            (LExpr::Loc(x), LExpr::Loc(y)) => self.loc(*x, *y),
            (LExpr::Pair(a1, a2), LExpr::Pair(b1, b2))
            | (LExpr::LetUnit(a1, a2), LExpr::LetUnit(b1, b2))
            | (LExpr::App(a1, a2), LExpr::App(b1, b2)) => self.l(a1, b1) && self.l(a2, b2),
            (LExpr::LetPair(x1, y1, e1, b1), LExpr::LetPair(x2, y2, e2, b2)) => {
                self.l(e1, e2) && self.bind(x1, x2, |s| s.bind(y1, y2, |s| s.l(b1, b2)))
            }
            (LExpr::Lam(x, tx, bx), LExpr::Lam(y, ty, by)) => {
                self.lt(tx, ty) && self.bind(x, y, |s| s.l(bx, by))
            }
            (LExpr::Inj(s1, t1, x), LExpr::Inj(s2, t2, y)) => {
                s1 == s2 && self.lt(t1, t2) && self.l(x, y)
            }
            (LExpr::Case(e1, x1, l1, y1, r1), LExpr::Case(e2, x2, l2, y2, r2)) => {
                self.l(e1, e2)
                    && self.bind(x1, x2, |s| s.l(l1, l2))
                    && self.bind(y1, y2, |s| s.l(r1, r2))
            }
            (LExpr::Fold(t1, x), LExpr::Fold(t2, y)) => self.lt(t1, t2) && self.l(x, y),
            (LExpr::Lump(t1, x), LExpr::Lump(t2, y)) | (LExpr::Unlump(t1, x), LExpr::Unlump(t2, y)) => {
                self.lt(t1, t2) && self.l(x, y)
            }
            (LExpr::Unfold(x), LExpr::Unfold(y))
            | (LExpr::Copy(x), LExpr::Copy(y))
            | (LExpr::New(x), LExpr::New(y))
            | (LExpr::Free(x), LExpr::Free(y))
            | (LExpr::BoxUp(x), LExpr::BoxUp(y))
            | (LExpr::Unbox(x), LExpr::Unbox(y)) => self.l(x, y),
            (LExpr::Phase(n1, x), LExpr::Phase(n2, y)) => n1 == n2 && self.l(x, y),
            (LExpr::Share(s1, x), LExpr::Share(s2, y)) => self.store(s1, s2) && self.l(x, y),
            (LExpr::LumpVal(x), LExpr::LumpVal(y)) | (LExpr::FromU(x), LExpr::FromU(y)) => {
                self.u(x, y)
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_vars_respect_binders() {
        let id = LExpr::lam("x", LType::Unit, LExpr::var("x"));
        assert!(free_vars_l(&id).is_empty());
        let p = LExpr::pair(LExpr::var("x"), LExpr::var("y"));
        assert_eq!(free_vars_l(&p), ["x", "y"].iter().map(|s| s.to_string()).collect());
        let lp = LExpr::let_pair("x", "y", LExpr::var("p"), p);
        assert_eq!(free_vars_l(&lp), ["p".to_string()].into_iter().collect());
    }

    #[test]
    fn share_binds_its_locations() {
        let l = Location(3);
        assert_eq!(locations_of(&LExpr::Loc(l)), [l].into_iter().collect());
        let sh = LExpr::share_with(Store::singleton(l, Slot::Empty), LExpr::Loc(l));
        assert!(locations_of(&sh).is_empty());
        let p = LExpr::pair(LExpr::Loc(Location(1)), LExpr::Loc(Location(2)));
        assert_eq!(locations_of(&p).len(), 2);
    }

    #[test]
    fn substitution_avoids_capture() {
        // (fun (y:unit) -> x)[y/x] must not capture.
        let e = UExpr::lam("y", UType::Unit, UExpr::var("x"));
        let v = UExpr::var("y");
        let r = subst_u(&e, "x", Val::U(&v));
        match &r {
            UExpr::Lam(b, _, body) => {
                assert_ne!(b, "y");
                assert_eq!(**body, UExpr::var("y"));
            }
            _ => panic!("expected lambda"),
        }
    }

    #[test]
    fn type_substitution_avoids_capture() {
        let t = UType::forall("b", UType::fun(UType::var("a"), UType::var("b")));
        let r = subst_utype(&t, "a", &UType::var("b"));
        let expected = UType::forall("c", UType::fun(UType::var("b"), UType::var("c")));
        assert!(alpha_eq_utype(&r, &expected));
        assert!(!alpha_eq_utype(&r, &UType::forall("b", UType::fun(UType::var("b"), UType::var("b")))));
    }

    #[test]
    fn alpha_eq_on_binders_and_locations() {
        let a = LExpr::lam("x", LType::Unit, LExpr::var("x"));
        let b = LExpr::lam("z", LType::Unit, LExpr::var("z"));
        assert!(alpha_eq_lexpr(&a, &b));
        let p1 = LExpr::pair(LExpr::Loc(Location(1)), LExpr::Loc(Location(2)));
        let p2 = LExpr::pair(LExpr::Loc(Location(7)), LExpr::Loc(Location(9)));
        let p3 = LExpr::pair(LExpr::Loc(Location(7)), LExpr::Loc(Location(7)));
        assert!(alpha_eq_lexpr(&p1, &p2));
        assert!(!alpha_eq_lexpr(&p1, &p3));
    }

    #[test]
    fn freshening_renames_everything() {
        let inner = Store::singleton(Location(5), Slot::Empty);
        let st = Store::singleton(Location(1), Slot::Full(inner, LExpr::Loc(Location(5))));
        let mut supply = LocSupply::starting_at(100);
        let (st2, e2) = freshen_config(&st, &LExpr::Loc(Location(1)), &mut supply);
        assert!(st2.all_locations().iter().all(|l| l.0 >= 100));
        assert!(alpha_eq_config(&st, &LExpr::Loc(Location(1)), &st2, &e2));
    }
}
