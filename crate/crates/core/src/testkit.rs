//! Type-directed generators for U terms and L configurations, and the
//! property drivers built on them: subject reduction and progress for L,
//! differential testing against the functional translation, conversion
//! round trips, determinism of compatibility, and mutant detection.
//!
//! Every sample is seeded from `(seed, index)`, so a report is reproduced
//! exactly by rerunning with the same seed. Linear terms are built by
//! threading the set of variables the term must consume (its obligations)
//! through the generator rather than by filtering random terms.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ast::*;
use crate::eval::{Machine, Mutant, Outcome, RULES};
use crate::funtrans::{check_compositionality, funtrans_u, Hole, HOLE};
use crate::interop::{all_compatible, compat, l_to_u, recover_u, u_to_l, CompatEnv};
use crate::parser::l_fix;
use crate::subst::{alpha_eq_ltype, alpha_eq_uexpr, alpha_eq_utype, free_vars_l, free_vars_u, unfold_ltype, unfold_utype};
use crate::typecheck_l::{check_config, typecheck_l_surface};
use crate::typecheck_u::typecheck_u;

/// Linear variables still to be consumed, with their types.
type Obligations = Vec<(Name, LType)>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("no inhabitant of {0} in the given context")]
pub struct Uninhabited(pub String);

type R<T> = Result<T, Uninhabited>;

/// Knobs for the generators.
#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    /// Chance that a U position becomes a diverging call.
    pub diverge: f64,
    /// Maximum number of evaluation steps taken from a generated surface
    /// term to reach an internal configuration with a non-empty store.
    pub prestep: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { diverge: 0.0, prestep: 12 }
    }
}

/// Variables visible to a generated term, besides its linear obligations.
#[derive(Clone, Debug, Default)]
struct Env {
    u: Vec<(Name, UType)>,
    /// L variables of `!` type, usable any number of times.
    dup: Vec<(Name, LType)>,
    tyvars: Vec<Name>,
}

impl Env {
    fn from_ctx(ctx: &MixedContext) -> (Env, Vec<(Name, LType)>) {
        let mut env = Env::default();
        let mut ob = Vec::new();
        for (x, b) in ctx.iter() {
            match b {
                Binding::U(t) => env.u.push((x.clone(), t.clone())),
                Binding::TyVar => env.tyvars.push(x.clone()),
                Binding::L(t) if t.duplicable() => env.dup.push((x.clone(), t.clone())),
                Binding::L(t) => ob.push((x.clone(), t.clone())),
                Binding::Hidden(_) => {}
            }
        }
        (env, ob)
    }

    fn with_u(&self, x: &str, t: UType) -> Env {
        let mut e = self.clone();
        e.u.push((x.to_string(), t));
        e
    }

    fn with_dup(&self, x: &str, t: LType) -> Env {
        let mut e = self.clone();
        e.dup.push((x.to_string(), t));
        e
    }
}

/// A seeded, type-directed term generator.
pub struct Gen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    next: u64,
}

const PHASES: [&str; 2] = ["p0", "p1"];

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen::with_config(seed, GenConfig::default())
    }

    pub fn with_config(seed: u64, cfg: GenConfig) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), cfg, next: 0 }
    }

    fn fresh(&mut self, stem: &str) -> Name {
        self.next += 1;
        format!("{stem}{}", self.next)
    }

    fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn split_budget(&mut self, b: usize) -> (usize, usize) {
        let b = b.saturating_sub(1);
        let l = if b == 0 { 0 } else { self.rng.gen_range(0..=b) };
        (l, b - l)
    }

    fn split_ob(&mut self, ob: Obligations) -> (Obligations, Obligations) {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for o in ob {
            if self.coin(0.5) {
                a.push(o)
            } else {
                b.push(o)
            }
        }
        (a, b)
    }

    // ------------------------------------------------------------ types

    /// A closed first-order U type: no functions, no quantifiers.
    pub fn fo_utype(&mut self, depth: usize) -> UType {
        let k = if depth == 0 { 0 } else { self.below(6) };
        match k {
            0 | 1 => UType::Unit,
            2 => UType::prod(self.fo_utype(depth - 1), self.fo_utype(depth - 1)),
            3 => UType::sum(self.fo_utype(depth - 1), self.fo_utype(depth - 1)),
            4 => nat(),
            _ => list(self.fo_utype(depth - 1)),
        }
    }

    /// A closed U type, possibly higher order.
    pub fn utype(&mut self, depth: usize) -> UType {
        if depth == 0 {
            return self.fo_utype(0);
        }
        match self.below(8) {
            0 | 1 => self.fo_utype(depth),
            2 => UType::fun(self.utype(depth - 1), self.utype(depth - 1)),
            3 => UType::prod(self.utype(depth - 1), self.utype(depth - 1)),
            4 => UType::sum(self.utype(depth - 1), self.utype(depth - 1)),
            5 => UType::forall("a", UType::fun(UType::var("a"), UType::var("a"))),
            6 => list(self.utype(depth - 1)),
            _ => UType::Unit,
        }
    }

    /// A closed L type from the generator's universe.
    pub fn ltype(&mut self, depth: usize) -> LType {
        if depth == 0 {
            return match self.below(4) {
                0 | 1 => LType::Unit,
                2 => LType::Lump(UType::Unit),
                _ => LType::Lump(UType::sum(UType::Unit, UType::Unit)),
            };
        }
        match self.below(14) {
            0 | 1 => LType::Unit,
            2 => LType::EmptyBox,
            3 | 4 => LType::tensor(self.ltype(depth - 1), self.ltype(depth - 1)),
            5 | 6 => LType::plus(self.ltype(depth - 1), self.ltype(depth - 1)),
            7 => LType::lolli(self.ltype(depth - 1), self.ltype(depth - 1)),
            8 | 9 => LType::bang(self.ltype(depth - 1)),
            10 | 11 => LType::boxed(self.ltype(depth - 1)),
            12 => LType::Lump(self.fo_utype(depth - 1)),
            _ => {
                let a = self.fresh("r");
                let elem = self.ltype(depth - 1);
                LType::mu(
                    a.clone(),
                    LType::plus(LType::Unit, LType::boxed(LType::tensor(elem, LType::var(a)))),
                )
            }
        }
    }

    /// An L type `!s` in the image of compatibility; `with_fun` allows
    /// `!a -o !b` components.
    pub fn compat_ltype(&mut self, depth: usize, with_fun: bool) -> LType {
        LType::bang(self.compat_inner(depth, with_fun))
    }

    fn compat_inner(&mut self, depth: usize, with_fun: bool) -> LType {
        if depth == 0 {
            return if self.coin(0.6) { LType::Unit } else { LType::Lump(UType::Unit) };
        }
        let n = if with_fun { 11 } else { 10 };
        match self.below(n) {
            0 | 1 => LType::Unit,
            2 => LType::tensor(self.compat_inner(depth - 1, with_fun), self.compat_inner(depth - 1, with_fun)),
            3 => LType::plus(self.compat_inner(depth - 1, with_fun), self.compat_inner(depth - 1, with_fun)),
            4 => LType::Lump(self.fo_utype(depth - 1)),
            5 => LType::bang(self.compat_inner(depth - 1, with_fun)),
            6 | 7 => LType::boxed(self.compat_inner(depth - 1, with_fun)),
            8 | 9 => {
                let a = self.fresh("r");
                let elem = self.compat_inner(depth - 1, with_fun);
                let cell = if self.coin(0.5) {
                    LType::boxed(LType::tensor(elem, LType::var(a.clone())))
                } else {
                    LType::tensor(elem, LType::var(a.clone()))
                };
                LType::mu(a, LType::plus(LType::Unit, cell))
            }
            _ => LType::lolli(
                LType::bang(self.compat_inner(depth - 1, false)),
                LType::bang(self.compat_inner(depth - 1, false)),
            ),
        }
    }

    /// Some `!s` with `τ ◃▹ !s`, for a closed τ built from the
    /// generator's U universe.
    fn compat_for(&mut self, tau: &UType) -> Option<LType> {
        Some(LType::bang(self.compat_for_inner(&mut Vec::new(), tau, 3)?))
    }

    fn compat_for_inner(&mut self, env: &mut Vec<(Name, Name)>, tau: &UType, fuel: usize) -> Option<LType> {
        let closed = crate::subst::ftv_u(tau).is_empty();
        if closed && (fuel == 0 || self.coin(0.15)) {
            return Some(LType::Lump(tau.clone()));
        }
        let fuel = fuel.saturating_sub(1);
        let s = match tau {
            UType::Unit => LType::Unit,
            UType::Prod(a, b) => {
                LType::tensor(self.compat_for_inner(env, a, fuel)?, self.compat_for_inner(env, b, fuel)?)
            }
            UType::Sum(a, b) => {
                LType::plus(self.compat_for_inner(env, a, fuel)?, self.compat_for_inner(env, b, fuel)?)
            }
            UType::Fun(a, b) => LType::lolli(
                LType::bang(self.compat_for_inner(env, a, fuel)?),
                LType::bang(self.compat_for_inner(env, b, fuel)?),
            ),
            UType::Mu(a, body) => {
                let beta = self.fresh("r");
                env.push((a.clone(), beta.clone()));
                let r = self.compat_for_inner(env, body, fuel + 1);
                env.pop();
                LType::mu(beta, r?)
            }
            UType::Var(a) => {
                let (_, b) = env.iter().rev().find(|(x, _)| x == a)?;
                return Some(LType::var(b.clone()));
            }
            UType::Forall(..) => return if closed { Some(LType::Lump(tau.clone())) } else { None },
        };
        Some(match self.below(6) {
            0 => LType::boxed(s),
            1 => LType::bang(s),
            _ => s,
        })
    }

    // ------------------------------------------------------------ U terms

    fn u(&mut self, env: &Env, tau: &UType, b: usize) -> R<UExpr> {
        if b == 0 {
            return self.u_canon(env, tau, &mut Vec::new());
        }
        if self.cfg.diverge > 0.0 && self.coin(self.cfg.diverge) {
            let f = self.fresh("f");
            let x = self.fresh("x");
            let body = UExpr::app(UExpr::var(f.clone()), UExpr::var(x.clone()));
            return Ok(UExpr::app(crate::parser::u_fix(&f, &x, UType::Unit, tau.clone(), body), UExpr::Unit));
        }
        for _ in 0..4 {
            let r = match self.below(14) {
                0..=3 => self.u_intro(env, tau, b),
                4 => self.u_var(env, tau),
                5 => {
                    let s = self.utype(1);
                    let x = self.fresh("x");
                    let (b1, b2) = self.split_budget(b);
                    let arg = self.u(env, &s, b1);
                    let body = self.u(&env.with_u(&x, s.clone()), tau, b2);
                    match (arg, body) {
                        (Ok(a), Ok(body)) => Ok(UExpr::app(UExpr::lam(x, s, body), a)),
                        _ => continue,
                    }
                }
                6 => {
                    let s = self.fo_utype(1);
                    let left = self.coin(0.5);
                    let pt = if left { UType::prod(tau.clone(), s) } else { UType::prod(s, tau.clone()) };
                    self.u(env, &pt, b - 1).map(|p| if left { UExpr::fst(p) } else { UExpr::snd(p) })
                }
                7 => {
                    let (s1, s2) = (self.fo_utype(1), self.fo_utype(1));
                    let (x, y) = (self.fresh("x"), self.fresh("y"));
                    let (b1, b2) = self.split_budget(b);
                    let sc = self.u(env, &UType::sum(s1.clone(), s2.clone()), b1);
                    let l = self.u(&env.with_u(&x, s1), tau, b2 / 2);
                    let r = self.u(&env.with_u(&y, s2), tau, b2 / 2);
                    match (sc, l, r) {
                        (Ok(sc), Ok(l), Ok(r)) => Ok(UExpr::case(sc, x, l, y, r)),
                        _ => continue,
                    }
                }
                8 => {
                    let (b1, b2) = self.split_budget(b);
                    match (self.u(env, &UType::Unit, b1), self.u(env, tau, b2)) {
                        (Ok(a), Ok(c)) => Ok(UExpr::let_unit(a, c)),
                        _ => continue,
                    }
                }
                9 => {
                    let m = UType::mu(self.fresh("m"), tau.clone());
                    self.u(env, tau, b - 1).map(|e| UExpr::unfold(UExpr::fold(m, e)))
                }
                10 => {
                    let a = self.fresh("a");
                    let mut inner = env.clone();
                    inner.tyvars.push(a.clone());
                    let s = self.fo_utype(1);
                    self.u_value(&inner, tau, b - 1).map(|v| UExpr::ty_app(UExpr::ty_abs(a, v), s))
                }
                _ => self.u_boundary(env, tau, b - 1),
            };
            if let Ok(e) = r {
                return Ok(e);
            }
        }
        self.u_canon(env, tau, &mut Vec::new())
    }

    fn u_var(&mut self, env: &Env, tau: &UType) -> R<UExpr> {
        let cands: Vec<&Name> =
            env.u.iter().filter(|(_, t)| alpha_eq_utype(t, tau)).map(|(x, _)| x).collect();
        cands
            .choose(&mut self.rng)
            .map(|x| UExpr::var((*x).clone()))
            .ok_or_else(|| Uninhabited(tau.to_string()))
    }

    fn u_intro(&mut self, env: &Env, tau: &UType, b: usize) -> R<UExpr> {
        Ok(match tau {
            UType::Unit => UExpr::Unit,
            UType::Prod(x, y) => {
                let (b1, b2) = self.split_budget(b);
                UExpr::pair(self.u(env, x, b1)?, self.u(env, y, b2)?)
            }
            UType::Sum(x, y) => {
                let side = if self.coin(0.5) { Side::Left } else { Side::Right };
                let inner = if side == Side::Left { x } else { y };
                match self.u(env, inner, b - 1) {
                    Ok(e) => UExpr::inj(side, tau.clone(), e),
                    Err(_) => return self.u_canon(env, tau, &mut Vec::new()),
                }
            }
            UType::Fun(x, y) => {
                let v = self.fresh("x");
                let body = self.u(&env.with_u(&v, (**x).clone()), y, b - 1)?;
                UExpr::lam(v, (**x).clone(), body)
            }
            UType::Mu(a, body) => {
                // Shrink the budget faster under recursion so lists stay short.
                let inner = unfold_utype(a, body);
                UExpr::fold(tau.clone(), self.u(env, &inner, b / 2)?)
            }
            UType::Forall(..) => self.u_value(env, tau, b)?,
            UType::Var(_) => self.u_var(env, tau)?,
        })
    }

    /// A value of type τ (needed under type abstractions).
    fn u_value(&mut self, env: &Env, tau: &UType, b: usize) -> R<UExpr> {
        Ok(match tau {
            UType::Unit => UExpr::Unit,
            UType::Prod(x, y) => {
                let (b1, b2) = self.split_budget(b);
                UExpr::pair(self.u_value(env, x, b1)?, self.u_value(env, y, b2)?)
            }
            UType::Sum(x, y) => match self.u_value(env, x, b.saturating_sub(1)) {
                Ok(v) if self.coin(0.5) => UExpr::inj(Side::Left, tau.clone(), v),
                _ => UExpr::inj(Side::Right, tau.clone(), self.u_value(env, y, b.saturating_sub(1))?),
            },
            UType::Fun(..) => self.u_intro(env, tau, b.max(1))?,
            UType::Mu(a, body) => {
                if b == 0 {
                    return self.u_canon(env, tau, &mut Vec::new());
                }
                UExpr::fold(tau.clone(), self.u_value(env, &unfold_utype(a, body), b / 2)?)
            }
            UType::Forall(a, body) => {
                let na = self.fresh("a");
                let body = crate::subst::subst_utype(body, a, &UType::var(na.clone()));
                let mut inner = env.clone();
                inner.tyvars.push(na.clone());
                UExpr::ty_abs(na, self.u_value(&inner, &body, b)?)
            }
            UType::Var(_) => self.u_var(env, tau)?,
        })
    }

    /// Smallest-effort inhabitant. `open` lists recursive types being
    /// unfolded, so that recursion picks a non-recursive summand.
    fn u_canon(&mut self, env: &Env, tau: &UType, open: &mut Vec<UType>) -> R<UExpr> {
        let none = || Uninhabited(tau.to_string());
        Ok(match tau {
            UType::Unit => UExpr::Unit,
            UType::Prod(x, y) => UExpr::pair(self.u_canon(env, x, open)?, self.u_canon(env, y, open)?),
            UType::Sum(x, y) => match self.u_canon(env, x, open) {
                Ok(v) => UExpr::inj(Side::Left, tau.clone(), v),
                Err(_) => UExpr::inj(Side::Right, tau.clone(), self.u_canon(env, y, open)?),
            },
            UType::Fun(x, y) => {
                let v = self.fresh("x");
                let body = self.u_canon(&env.with_u(&v, (**x).clone()), y, &mut Vec::new())?;
                UExpr::lam(v, (**x).clone(), body)
            }
            UType::Mu(a, body) => {
                if open.iter().any(|o| alpha_eq_utype(o, tau)) {
                    return Err(none());
                }
                open.push(tau.clone());
                let r = self.u_canon(env, &unfold_utype(a, body), open);
                open.pop();
                UExpr::fold(tau.clone(), r?)
            }
            UType::Forall(..) => self.u_value(env, tau, 0)?,
            UType::Var(_) => self.u_var(env, tau)?,
        })
    }

    /// `UL { .. }` producing τ, through a lump or a compatible L type.
    fn u_boundary(&mut self, env: &Env, tau: &UType, b: usize) -> R<UExpr> {
        let inner_env = Env { u: env.u.clone(), dup: env.dup.clone(), tyvars: env.tyvars.clone() };
        if crate::subst::ftv_u(tau).is_empty() && self.coin(0.7) {
            if let Some(t) = self.compat_for(tau) {
                let body = self.l(&inner_env, Vec::new(), &t, b)?;
                return Ok(UExpr::ul(LExpr::share(LExpr::lump(t, body))));
            }
        }
        let t = LType::bang(LType::Lump(tau.clone()));
        Ok(UExpr::ul(self.l(&inner_env, Vec::new(), &t, b)?))
    }

    // ------------------------------------------------------------ L terms

    /// A term of type `t` that consumes every obligation in `ob` exactly
    /// once.
    fn l(&mut self, env: &Env, ob: Vec<(Name, LType)>, t: &LType, b: usize) -> R<LExpr> {
        if b == 0 {
            return self.l_canon_with(env, ob, t);
        }
        if ob.len() == 1 && alpha_eq_ltype(&ob[0].1, t) && self.coin(0.5) {
            return Ok(LExpr::var(ob[0].0.clone()));
        }
        for _ in 0..4 {
            let r = match self.below(24) {
                0..=5 => self.l_intro(env, ob.clone(), t, b),
                6 => self.l_dup_use(env, ob.clone(), t),
                7 | 8 => {
                    let (a, c) = (self.ltype(1), self.ltype(1));
                    let (x, y) = (self.fresh("x"), self.fresh("y"));
                    let (o1, o2) = self.split_ob(ob.clone());
                    let (b1, b2) = self.split_budget(b);
                    let sc = self.l(env, o1, &LType::tensor(a.clone(), c.clone()), b1);
                    let (env2, o2) = bind_l(env, o2, &x, &a);
                    let (env2, o2) = bind_l(&env2, o2, &y, &c);
                    match (sc, self.l(&env2, o2, t, b2)) {
                        (Ok(sc), Ok(body)) => Ok(LExpr::let_pair(x, y, sc, body)),
                        _ => continue,
                    }
                }
                9 => {
                    let (o1, o2) = self.split_ob(ob.clone());
                    let (b1, b2) = self.split_budget(b);
                    match (self.l(env, o1, &LType::Unit, b1), self.l(env, o2, t, b2)) {
                        (Ok(a), Ok(c)) => Ok(LExpr::let_unit(a, c)),
                        _ => continue,
                    }
                }
                10 | 11 => {
                    let a = self.ltype(1);
                    let (o1, o2) = self.split_ob(ob.clone());
                    let (b1, b2) = self.split_budget(b);
                    match (self.l(env, o1, &LType::lolli(a.clone(), t.clone()), b1), self.l(env, o2, &a, b2)) {
                        (Ok(f), Ok(x)) => Ok(LExpr::app(f, x)),
                        _ => continue,
                    }
                }
                12 => {
                    let (a, c) = (self.ltype(1), self.ltype(1));
                    let (x, y) = (self.fresh("x"), self.fresh("y"));
                    let (o1, o2) = self.split_ob(ob.clone());
                    let (b1, b2) = self.split_budget(b);
                    let sc = self.l(env, o1, &LType::plus(a.clone(), c.clone()), b1);
                    let (envl, ol) = bind_l(env, o2.clone(), &x, &a);
                    let (envr, or) = bind_l(env, o2, &y, &c);
                    let l = self.l(&envl, ol, t, b2 / 2);
                    let r = self.l(&envr, or, t, b2 / 2);
                    match (sc, l, r) {
                        (Ok(sc), Ok(l), Ok(r)) => Ok(LExpr::case(sc, x, l, y, r)),
                        _ => continue,
                    }
                }
                13 => {
                    let m = LType::mu(self.fresh("m"), t.clone());
                    self.l(env, ob.clone(), t, b - 1).map(|e| LExpr::unfold(LExpr::fold(m, e)))
                }
                14 | 15 => {
                    // let-bound linear value, often a box the body must use
                    let s = if self.coin(0.5) { LType::boxed(self.ltype(1)) } else { self.ltype(2) };
                    let x = self.fresh("x");
                    let (o1, o2) = self.split_ob(ob.clone());
                    let (b1, b2) = self.split_budget(b);
                    let e = self.l(env, o1, &s, b1);
                    let (env2, o2) = bind_l(env, o2, &x, &s);
                    match (e, self.l(&env2, o2, t, b2)) {
                        (Ok(e), Ok(body)) => Ok(LExpr::let_in(x, s, e, body)),
                        _ => continue,
                    }
                }
                16 | 17 => self.l_copy_twice(env, ob.clone(), t, b),
                18 => self.l(env, ob.clone(), &LType::bang(t.clone()), b - 1).map(LExpr::copy),
                19 if !ob.is_empty() => {
                    let mut rest = ob.clone();
                    let i = self.below(rest.len());
                    let (x, s) = rest.remove(i);
                    let d = self.drop(&x, &s)?;
                    self.l(env, rest, t, b - 1).map(|body| LExpr::let_unit(d, body))
                }
                20 => {
                    let p = PHASES[self.below(PHASES.len())];
                    self.l(env, ob.clone(), t, b - 1).map(|e| LExpr::Phase(p.to_string(), Box::new(e)))
                }
                21 => match t {
                    LType::Unit => {
                        self.l(env, ob.clone(), &LType::EmptyBox, b - 1).map(LExpr::free)
                    }
                    _ => continue,
                },
                _ => self.l_intro(env, ob.clone(), t, b),
            };
            if let Ok(e) = r {
                return Ok(e);
            }
        }
        self.l_canon_with(env, ob, t)
    }

    fn l_intro(&mut self, env: &Env, ob: Vec<(Name, LType)>, t: &LType, b: usize) -> R<LExpr> {
        Ok(match t {
            LType::Unit => self.discharge(ob, LExpr::Unit)?,
            LType::Tensor(x, y) => {
                if **x == LType::EmptyBox && self.coin(0.4) {
                    return self.l(env, ob, &LType::boxed((**y).clone()), b - 1).map(LExpr::unbox);
                }
                let (o1, o2) = self.split_ob(ob);
                let (b1, b2) = self.split_budget(b);
                LExpr::pair(self.l(env, o1, x, b1)?, self.l(env, o2, y, b2)?)
            }
            LType::Plus(x, y) => {
                let side = if self.coin(0.5) { Side::Left } else { Side::Right };
                let inner = if side == Side::Left { x } else { y };
                LExpr::inj(side, t.clone(), self.l(env, ob, inner, b - 1)?)
            }
            LType::Lolli(x, y) => {
                let v = self.fresh("x");
                let (env2, ob2) = bind_l(env, ob, &v, x);
                LExpr::lam(v, (**x).clone(), self.l(&env2, ob2, y, b - 1)?)
            }
            LType::Bang(s) => {
                if self.coin(0.3) {
                    if let Ok(tau) = recover_u(t) {
                        if crate::subst::ftv_u(&tau).is_empty() {
                            let u = self.u(env, &tau, b - 1)?;
                            return self.discharge(ob, LExpr::unlump(t.clone(), LExpr::from_u(u)));
                        }
                    }
                }
                // `share` may not capture obligations, so they are
                // discharged outside it.
                let body = self.l(env, Vec::new(), s, b - 1)?;
                self.discharge(ob, LExpr::share(body))?
            }
            LType::Boxed(s) => {
                let (o1, o2) = self.split_ob(ob);
                let (b1, b2) = self.split_budget(b);
                let cap = self.l(env, o1, &LType::EmptyBox, b1)?;
                LExpr::box_up(LExpr::pair(cap, self.l(env, o2, s, b2)?))
            }
            LType::EmptyBox => {
                if self.coin(0.5) {
                    LExpr::new_loc(self.l(env, ob, &LType::Unit, b - 1)?)
                } else {
                    // take a box apart and keep the capability
                    let s = self.ltype(1);
                    let (l, v) = (self.fresh("l"), self.fresh("v"));
                    let (o1, o2) = self.split_ob(ob);
                    let inner = self.l(env, o1, &LType::boxed(s.clone()), b - 1)?;
                    let (env2, o2) = bind_l(env, o2, &v, &s);
                    let mut o2 = o2;
                    o2.push((l.clone(), LType::EmptyBox));
                    let _ = env2;
                    let rest = self.discharge_except(o2, &l, LExpr::var(l.clone()))?;
                    LExpr::let_pair(l, v, LExpr::unbox(inner), rest)
                }
            }
            LType::Mu(a, body) => {
                let inner = unfold_ltype(a, body);
                LExpr::fold(t.clone(), self.l(env, ob, &inner, b / 2)?)
            }
            LType::Lump(tau) => {
                if self.coin(0.5) {
                    if let Some(t2) = self.compat_for(tau) {
                        return Ok(LExpr::lump(t2.clone(), self.l(env, ob, &t2, b - 1)?));
                    }
                }
                let u = self.u(env, tau, b - 1)?;
                self.discharge(ob, LExpr::from_u(u))?
            }
            LType::Var(_) => return Err(Uninhabited(t.to_string())),
        })
    }

    /// `y` or `copy y` for a duplicable variable in scope.
    fn l_dup_use(&mut self, env: &Env, ob: Vec<(Name, LType)>, t: &LType) -> R<LExpr> {
        let direct: Vec<Name> =
            env.dup.iter().filter(|(_, s)| alpha_eq_ltype(s, t)).map(|(x, _)| x.clone()).collect();
        let copied: Vec<Name> = env
            .dup
            .iter()
            .filter(|(_, s)| matches!(s, LType::Bang(i) if alpha_eq_ltype(i, t)))
            .map(|(x, _)| x.clone())
            .collect();
        let e = if !copied.is_empty() && (direct.is_empty() || self.coin(0.5)) {
            LExpr::copy(LExpr::var(copied.choose(&mut self.rng).unwrap().clone()))
        } else if let Some(x) = direct.choose(&mut self.rng) {
            LExpr::var(x.clone())
        } else {
            return Err(Uninhabited(t.to_string()));
        };
        self.discharge(ob, e)
    }

    /// `let y : !s = .. in let z1 = copy y in let z2 = copy y in ..`:
    /// two copies of one shared value, the pattern that exercises store
    /// splitting and location renaming on copy.
    fn l_copy_twice(&mut self, env: &Env, ob: Vec<(Name, LType)>, t: &LType, b: usize) -> R<LExpr> {
        let s = match self.below(4) {
            0 => LType::lolli(LType::Unit, self.ltype(1)),
            1 => LType::tensor(LType::boxed(self.ltype(0)), LType::boxed(self.ltype(0))),
            2 => LType::boxed(self.ltype(1)),
            _ => self.ltype(2),
        };
        let bs = LType::bang(s.clone());
        let (y, z1, z2) = (self.fresh("y"), self.fresh("z"), self.fresh("z"));
        let (o1, o2) = self.split_ob(ob);
        let (b1, b2) = self.split_budget(b);
        // build the shared value from a let-bound box, so that its store
        // is non-empty once evaluated
        let shared = if self.coin(0.6) {
            let c = self.fresh("c");
            let cs = LType::boxed(self.ltype(0));
            let cell = self.l(env, Vec::new(), &cs, b1 / 2)?;
            let (env2, ob2) = bind_l(env, Vec::new(), &c, &cs);
            let body = self.l(&env2, ob2, &s, b1 / 2)?;
            self.discharge(o1, LExpr::share(LExpr::let_in(c, cs, cell, body)))?
        } else {
            self.l(env, o1, &bs, b1)?
        };
        let env2 = env.with_dup(&y, bs.clone());
        let (env3, o3) = bind_l(&env2, o2, &z1, &s);
        let (env4, o4) = bind_l(&env3, o3, &z2, &s);
        let body = self.l(&env4, o4, t, b2)?;
        Ok(LExpr::let_in(
            y.clone(),
            bs,
            shared,
            LExpr::let_in(
                z1,
                s.clone(),
                LExpr::copy(LExpr::var(y.clone())),
                LExpr::let_in(z2, s, LExpr::copy(LExpr::var(y)), body),
            ),
        ))
    }

    /// Wraps `e` so that every obligation is consumed first.
    fn discharge(&mut self, mut ob: Vec<(Name, LType)>, e: LExpr) -> R<LExpr> {
        ob.shuffle(&mut self.rng);
        let mut out = e;
        for (x, s) in ob {
            out = LExpr::let_unit(self.drop(&x, &s)?, out);
        }
        Ok(out)
    }

    fn discharge_except(&mut self, ob: Vec<(Name, LType)>, keep: &str, e: LExpr) -> R<LExpr> {
        let rest = ob.into_iter().filter(|(x, _)| x != keep).collect();
        self.discharge(rest, e)
    }

    fn l_canon_with(&mut self, env: &Env, ob: Vec<(Name, LType)>, t: &LType) -> R<LExpr> {
        if let Some(i) = ob.iter().position(|(_, s)| alpha_eq_ltype(s, t)) {
            let mut rest = ob;
            let (x, _) = rest.remove(i);
            return self.discharge(rest, LExpr::var(x));
        }
        let e = self.l_canon(env, t, &mut Vec::new())?;
        self.discharge(ob, e)
    }

    fn l_canon(&mut self, env: &Env, t: &LType, open: &mut Vec<LType>) -> R<LExpr> {
        Ok(match t {
            LType::Unit => LExpr::Unit,
            LType::Tensor(x, y) => LExpr::pair(self.l_canon(env, x, open)?, self.l_canon(env, y, open)?),
            LType::Plus(x, y) => match self.l_canon(env, x, open) {
                Ok(v) => LExpr::inj(Side::Left, t.clone(), v),
                Err(_) => LExpr::inj(Side::Right, t.clone(), self.l_canon(env, y, open)?),
            },
            LType::Lolli(x, y) => {
                let v = self.fresh("x");
                let body = self.l_canon(env, y, &mut Vec::new())?;
                let body = if x.duplicable() { body } else { LExpr::let_unit(self.drop(&v, x)?, body) };
                LExpr::lam(v, (**x).clone(), body)
            }
            LType::Bang(s) => LExpr::share(self.l_canon(env, s, open)?),
            LType::Boxed(s) => LExpr::box_up(LExpr::pair(LExpr::new_loc(LExpr::Unit), self.l_canon(env, s, open)?)),
            LType::EmptyBox => LExpr::new_loc(LExpr::Unit),
            LType::Mu(a, body) => {
                if open.iter().any(|o| alpha_eq_ltype(o, t)) {
                    return Err(Uninhabited(t.to_string()));
                }
                open.push(t.clone());
                let r = self.l_canon(env, &unfold_ltype(a, body), open);
                open.pop();
                LExpr::fold(t.clone(), r?)
            }
            LType::Lump(tau) => LExpr::from_u(self.u_canon(env, tau, &mut Vec::new())?),
            LType::Var(_) => return Err(Uninhabited(t.to_string())),
        })
    }

    /// A unit-typed term consuming the variable `x : s`.
    fn drop(&mut self, x: &str, s: &LType) -> R<LExpr> {
        self.drop_rec(LExpr::var(x), s, &[])
    }

    fn drop_rec(&mut self, e: LExpr, s: &LType, rec: &[(LType, Name)]) -> R<LExpr> {
        if s.duplicable() {
            let y = self.fresh("d");
            return Ok(LExpr::let_in(y, s.clone(), e, LExpr::Unit));
        }
        if let Some((_, d)) = rec.iter().find(|(m, _)| alpha_eq_ltype(m, s)) {
            return Ok(LExpr::app(LExpr::copy(LExpr::var(d.clone())), e));
        }
        Ok(match s {
            LType::Unit => e,
            LType::Tensor(a, b) => {
                let (y, z) = (self.fresh("d"), self.fresh("d"));
                let da = self.drop_rec(LExpr::var(y.clone()), a, rec)?;
                let db = self.drop_rec(LExpr::var(z.clone()), b, rec)?;
                LExpr::let_pair(y, z, e, LExpr::let_unit(da, db))
            }
            LType::Plus(a, b) => {
                let (y, z) = (self.fresh("d"), self.fresh("d"));
                let da = self.drop_rec(LExpr::var(y.clone()), a, rec)?;
                let db = self.drop_rec(LExpr::var(z.clone()), b, rec)?;
                LExpr::case(e, y, da, z, db)
            }
            LType::Boxed(a) => {
                let (l, y) = (self.fresh("l"), self.fresh("d"));
                let da = self.drop_rec(LExpr::var(y.clone()), a, rec)?;
                LExpr::let_pair(l.clone(), y, LExpr::unbox(e), LExpr::let_unit(LExpr::free(LExpr::var(l)), da))
            }
            LType::EmptyBox => LExpr::free(e),
            LType::Lolli(a, b) => {
                let arg = self.l_canon(&Env::default(), a, &mut Vec::new())?;
                self.drop_rec(LExpr::app(e, arg), b, rec)?
            }
            LType::Lump(tau) => {
                let bt = LType::bang(LType::Lump(tau.clone()));
                LExpr::let_in(self.fresh("d"), bt.clone(), LExpr::unlump(bt, e), LExpr::Unit)
            }
            LType::Mu(a, body) => {
                let (d, y) = (self.fresh("drop"), self.fresh("d"));
                let mut rec2 = rec.to_vec();
                rec2.push((s.clone(), d.clone()));
                let inner = self.drop_rec(LExpr::unfold(LExpr::var(y.clone())), &unfold_ltype(a, body), &rec2)?;
                let f = l_fix(&d, &y, s.clone(), LType::Unit, inner);
                LExpr::app(LExpr::copy(f), e)
            }
            LType::Bang(_) | LType::Var(_) => return Err(Uninhabited(s.to_string())),
        })
    }
}

fn bind_l(env: &Env, mut ob: Vec<(Name, LType)>, x: &str, t: &LType) -> (Env, Vec<(Name, LType)>) {
    if t.duplicable() {
        (env.with_dup(x, t.clone()), ob)
    } else {
        ob.push((x.to_string(), t.clone()));
        (env.clone(), ob)
    }
}

/// `mu n. unit + n`.
pub fn nat() -> UType {
    UType::mu("n", UType::sum(UType::Unit, UType::var("n")))
}

/// `mu l. unit + elem * l`.
pub fn list(elem: UType) -> UType {
    let l = if crate::subst::ftv_u(&elem).contains("l") { "l'" } else { "l" };
    UType::mu(l, UType::sum(UType::Unit, UType::prod(elem, UType::var(l))))
}

/// The U value `n` of type `nat()`.
pub fn nat_value(n: usize) -> UExpr {
    let t = nat();
    let body = UType::sum(UType::Unit, t.clone());
    let mut v = UExpr::fold(t.clone(), UExpr::inj(Side::Left, body.clone(), UExpr::Unit));
    for _ in 0..n {
        v = UExpr::fold(t.clone(), UExpr::inj(Side::Right, body.clone(), v));
    }
    v
}

/// A U list value of the given element type.
pub fn list_value(elem: &UType, items: &[UExpr]) -> UExpr {
    let t = list(elem.clone());
    let UType::Mu(a, body) = &t else { unreachable!() };
    let unfolded = unfold_utype(a, body);
    let mut v = UExpr::fold(t.clone(), UExpr::inj(Side::Left, unfolded.clone(), UExpr::Unit));
    for x in items.iter().rev() {
        v = UExpr::fold(t.clone(), UExpr::inj(Side::Right, unfolded.clone(), UExpr::pair(x.clone(), v)));
    }
    v
}

/// Generates a term of type τ in `ctx`; at budget 0 this is a canonical
/// inhabitant.
pub fn gen_u_term(ctx: &MixedContext, tau: &UType, size_budget: usize, seed: u64) -> Result<UExpr, Uninhabited> {
    let (env, _) = Env::from_ctx(ctx);
    Gen::new(seed).u(&env, tau, size_budget)
}

/// Generates a well-typed configuration of type `t`. The L variables of
/// `ctx` are consumed (linear ones exactly once). For closed contexts the
/// surface term is run for a few steps, which yields internal
/// configurations with non-empty stores.
pub fn gen_l_config(ctx: &MixedContext, t: &LType, size_budget: usize, seed: u64) -> Result<Configuration, Uninhabited> {
    let mut g = Gen::new(seed);
    gen_l_config_with(&mut g, ctx, t, size_budget)
}

fn gen_l_config_with(g: &mut Gen, ctx: &MixedContext, t: &LType, size_budget: usize) -> Result<Configuration, Uninhabited> {
    let (env, ob) = Env::from_ctx(ctx);
    let e = g.l(&env, ob, t, size_budget)?;
    let mut st = Store::new();
    let mut cur = e;
    if ctx.is_empty() && g.cfg.prestep > 0 {
        let k = g.rng.gen_range(0..=g.cfg.prestep);
        let mut m = Machine::for_config(&st, &cur, k);
        for _ in 0..k {
            match m.step_l(&mut st, &cur) {
                Ok(Some(next)) => cur = next,
                _ => break,
            }
        }
    }
    Ok(Configuration::new(st, cur))
}

// ---------------------------------------------------------------- reports

/// Result of one property run. Serialized as the machine-readable summary.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub property: String,
    pub samples: u64,
    pub failures: u64,
    pub seed: u64,
    pub runtime_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub counters: BTreeMap<String, u64>,
    #[serde(skip)]
    pub rule_counts: BTreeMap<&'static str, u64>,
}

impl Report {
    fn new(property: &str, seed: u64) -> Report {
        Report { property: property.to_string(), seed, ..Report::default() }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "{}: {} samples, {} failures, seed {}, {} ms",
            self.property, self.samples, self.failures, self.seed, self.runtime_ms
        );
        for (k, v) in &self.counters {
            s.push_str(&format!("\n  {k} = {v}"));
        }
        if let Some(c) = &self.counterexample {
            s.push_str(&format!("\n  counterexample: {c}"));
        }
        s
    }

    fn absorb(&mut self, s: SampleResult) {
        self.samples += 1;
        for (k, v) in s.counters {
            *self.counters.entry(k.to_string()).or_default() += v;
        }
        for (k, v) in s.rules {
            *self.rule_counts.entry(k).or_default() += v;
        }
        if let Some(f) = s.failure {
            self.failures += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(crate::error::canonical_fresh_names(&f));
            }
        }
    }
}

#[derive(Default)]
struct SampleResult {
    failure: Option<String>,
    counters: Vec<(&'static str, u64)>,
    rules: BTreeMap<&'static str, u64>,
}

fn sample_seed(seed: u64, i: u64) -> u64 {
    seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `f` on samples `0..n` in parallel and folds results in index
/// order, so the report does not depend on scheduling.
fn batch(name: &str, n: u64, seed: u64, f: impl Fn(u64) -> SampleResult + Sync) -> Report {
    let start = Instant::now();
    let results: Vec<SampleResult> = (0..n).into_par_iter().map(|i| f(sample_seed(seed, i))).collect();
    let mut r = Report::new(name, seed);
    for s in results {
        r.absorb(s);
    }
    r.runtime_ms = start.elapsed().as_millis() as u64;
    r
}

// ---------------------------------------------------------------- subject reduction

/// The outcome of stepping one configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
enum SrOutcome {
    Ok { steps: u64 },
    Violation(String),
}

fn sr_run(st0: &Store, e0: &LExpr, max_steps: u64, mutant: Option<Mutant>, rules: &mut BTreeMap<&'static str, u64>) -> SrOutcome {
    let (t, _) = match check_config(st0, e0) {
        Ok(r) => r,
        Err(err) => return SrOutcome::Violation(format!("generated configuration is ill-typed: {err}")),
    };
    let mut st = st0.clone();
    let mut e = e0.clone();
    let mut m = Machine::for_config(&st, &e, max_steps).with_mutant(mutant);
    let mut steps = 0;
    let out = loop {
        if steps == max_steps || e.is_value() {
            break SrOutcome::Ok { steps };
        }
        match m.step_l(&mut st, &e) {
            Ok(Some(next)) => {
                steps += 1;
                match check_config(&st, &next) {
                    Ok((t2, _)) if alpha_eq_ltype(&t, &t2) => {}
                    Ok((t2, _)) => {
                        break SrOutcome::Violation(format!("step {steps}: type changed from {t} to {t2}"))
                    }
                    Err(err) => break SrOutcome::Violation(format!("step {steps}: ill-typed result: {}", err.headline())),
                }
                e = next;
            }
            Ok(None) => break SrOutcome::Ok { steps },
            Err(err) => break SrOutcome::Violation(format!("step {}: {err}", steps + 1)),
        }
    };
    for (k, v) in m.rule_counts {
        *rules.entry(k).or_default() += v;
    }
    out
}

/// Closed, well-typed proper subterms of `e`, smallest first.
fn closed_subterms(e: &LExpr) -> Vec<LExpr> {
    let mut out = Vec::new();
    e.visit(&mut |n| {
        if let Node::L(s) = n {
            if !std::ptr::eq(s, e) && free_vars_l(s).is_empty() {
                out.push(s.clone());
            }
        }
    });
    out.sort_by_key(LExpr::size);
    out.dedup();
    out
}

/// Steps `⟨st, e⟩` up to `max_steps` times, re-typing after each step.
/// Returns the number of steps taken, or a description of the violation.
pub fn subject_reduction_one(st: &Store, e: &LExpr, max_steps: u64, mutant: Option<Mutant>) -> Result<u64, String> {
    match sr_run(st, e, max_steps, mutant, &mut BTreeMap::new()) {
        SrOutcome::Ok { steps } => Ok(steps),
        SrOutcome::Violation(v) => Err(v),
    }
}

/// Greedy shrinking: replace the term by a closed subterm as long as the
/// property still fails. Configurations with a store are not shrunk.
pub fn shrink_sr(st: &Store, e: &LExpr, max_steps: u64, mutant: Option<Mutant>) -> LExpr {
    let mut cur = e.clone();
    if !st.is_empty() {
        return cur;
    }
    'outer: loop {
        for cand in closed_subterms(&cur) {
            if check_config(st, &cand).is_err() {
                continue;
            }
            if matches!(sr_run(st, &cand, max_steps, mutant, &mut BTreeMap::new()), SrOutcome::Violation(_)) {
                cur = cand;
                continue 'outer;
            }
        }
        return cur;
    }
}

/// Generates `n_samples` closed configurations at random L types and steps
/// each up to `max_steps` times, re-checking the type after every step.
pub fn check_subject_reduction(n_samples: u64, max_steps: u64, seed: u64) -> Report {
    check_subject_reduction_with(n_samples, max_steps, seed, None)
}

pub fn check_subject_reduction_with(n_samples: u64, max_steps: u64, seed: u64, mutant: Option<Mutant>) -> Report {
    let name = match mutant {
        None => "subject-reduction".to_string(),
        Some(m) => format!("subject-reduction[{}]", m.name()),
    };
    batch(&name, n_samples, seed, |s| {
        let mut g = Gen::new(s);
        let t = g.ltype(2);
        let size = g.rng.gen_range(4..24);
        let mut res = SampleResult::default();
        let cfg = match gen_l_config_with(&mut g, &MixedContext::new(), &t, size) {
            Ok(c) => c,
            Err(u) => {
                res.failure = Some(format!("generator: {u}"));
                return res;
            }
        };
        if !cfg.store.is_empty() {
            res.counters.push(("nonempty_store", 1));
        }
        match sr_run(&cfg.store, &cfg.expr, max_steps, mutant, &mut res.rules) {
            SrOutcome::Ok { steps } => res.counters.push(("steps", steps)),
            SrOutcome::Violation(msg) => {
                let small = shrink_sr(&cfg.store, &cfg.expr, max_steps, mutant);
                res.failure = Some(format!("{msg}; in <{}, {}>", cfg.store, small));
            }
        }
        res
    })
}

// ---------------------------------------------------------------- differential

/// How a direct run compares with the run of its translation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Agreement {
    Agree,
    BothDiverge,
    ValueMismatch { direct: String, oracle: String },
    TerminationMismatch { direct: String, oracle: String },
    Stuck(String),
    Translation(String),
}

impl Agreement {
    pub fn ok(&self) -> bool {
        matches!(self, Agreement::Agree | Agreement::BothDiverge)
    }
}

/// Oracle steps allowed per direct step.
pub const FUEL_RATIO: u64 = 10;

/// Runs `e` directly with `fuel` and its translation with
/// `FUEL_RATIO * fuel`, and compares outcomes.
pub fn differential_one(e: &UExpr, fuel: u64) -> Agreement {
    differential_with(e, fuel, None, &mut BTreeMap::new())
}

fn differential_with(e: &UExpr, fuel: u64, mutant: Option<Mutant>, rules: &mut BTreeMap<&'static str, u64>) -> Agreement {
    let tr = match funtrans_u(e) {
        Ok(t) => t,
        Err(err) => return Agreement::Translation(err.to_string()),
    };
    let mut m = Machine::for_u(e, fuel).with_mutant(mutant);
    let direct = m.run_u(e);
    for (k, v) in std::mem::take(&mut m.rule_counts) {
        *rules.entry(k).or_default() += v;
    }
    let oracle = Machine::for_u(&tr, fuel * FUEL_RATIO).run_u(&tr);
    let show = |o: &Outcome<UExpr>| match o {
        Outcome::Value(v) => v.to_string(),
        Outcome::OutOfFuel => "out of fuel".into(),
        Outcome::Stuck(s) => format!("stuck: {s}"),
    };
    match (&direct, &oracle) {
        (Outcome::Stuck(s), _) => Agreement::Stuck(format!("direct: {s}")),
        (_, Outcome::Stuck(s)) => Agreement::Stuck(format!("oracle: {s}")),
        (Outcome::Value(a), Outcome::Value(b)) => {
            if alpha_eq_uexpr(a, b) {
                Agreement::Agree
            } else {
                Agreement::ValueMismatch { direct: a.to_string(), oracle: b.to_string() }
            }
        }
        (Outcome::OutOfFuel, Outcome::OutOfFuel) => Agreement::BothDiverge,
        (Outcome::OutOfFuel, Outcome::Value(_)) => {
            // The oracle had more fuel; give the direct side the same
            // budget before calling it a disagreement.
            let again = Machine::for_u(e, fuel * FUEL_RATIO).with_mutant(mutant).run_u(e);
            match again {
                Outcome::Value(a) if alpha_eq_uexpr(&a, oracle.value().unwrap()) => Agreement::Agree,
                other => Agreement::TerminationMismatch { direct: show(&other), oracle: show(&oracle) },
            }
        }
        (Outcome::Value(_), Outcome::OutOfFuel) => {
            Agreement::TerminationMismatch { direct: show(&direct), oracle: show(&oracle) }
        }
    }
}

/// Closed UL programs of first-order type, run directly and through the
/// functional translation.
pub fn check_differential(n_samples: u64, fuel: u64, seed: u64) -> Report {
    check_differential_with(n_samples, fuel, seed, None)
}

pub fn check_differential_with(n_samples: u64, fuel: u64, seed: u64, mutant: Option<Mutant>) -> Report {
    let name = match mutant {
        None => "differential".to_string(),
        Some(m) => format!("differential[{}]", m.name()),
    };
    batch(&name, n_samples, seed, |s| differential_sample(s, fuel, mutant))
}

fn differential_sample(s: u64, fuel: u64, mutant: Option<Mutant>) -> SampleResult {
    let mut g = Gen::with_config(s, GenConfig { diverge: 0.002, prestep: 0 });
    let tau = g.fo_utype(2);
    let size = g.rng.gen_range(4..28);
    let mut res = SampleResult::default();
    let e = match g.u(&Env::default(), &tau, size) {
        Ok(e) => e,
        Err(u) => {
            res.failure = Some(format!("generator: {u}"));
            return res;
        }
    };
    if let Err(err) = typecheck_u(&MixedContext::new(), &e) {
        res.failure = Some(format!("generated program is ill-typed: {err}; {e}"));
        return res;
    }
    match differential_with(&e, fuel, mutant, &mut res.rules) {
        Agreement::Agree => res.counters.push(("agree", 1)),
        Agreement::BothDiverge => res.counters.push(("both_diverge", 1)),
        other => res.failure = Some(format!("{other:?} on {e}")),
    }
    res
}

/// Projection (pure U programs translate to themselves) on generated
/// U-only programs.
pub fn check_projection(n_samples: u64, seed: u64) -> Report {
    batch("projection", n_samples, seed, |s| {
        let mut g = Gen::new(s);
        let tau = g.utype(2);
        let mut res = SampleResult::default();
        let Ok(e) = g.u(&Env::default(), &tau, 12) else { return res };
        let mut pure = true;
        e.visit(&mut |n| pure &= !matches!(n, Node::U(UExpr::Boundary(..))));
        if !pure {
            res.counters.push(("skipped_mixed", 1));
            return res;
        }
        match funtrans_u(&e) {
            Ok(t) if t == e => res.counters.push(("identity", 1)),
            Ok(t) => res.failure = Some(format!("{e} translated to {t}")),
            Err(err) => res.failure = Some(err.to_string()),
        }
        res
    })
}

/// Compositionality on context/filler pairs obtained by cutting a closed
/// subterm out of a generated program.
pub fn check_compositionality_pairs(n_samples: u64, seed: u64) -> Report {
    batch("compositionality", n_samples, seed, |s| {
        let mut g = Gen::new(s);
        let tau = g.fo_utype(2);
        let mut res = SampleResult::default();
        let e = match g.u(&Env::default(), &tau, 16) {
            Ok(e) => e,
            Err(u) => {
                res.failure = Some(format!("generator: {u}"));
                return res;
            }
        };
        let mut holes = hole_candidates(&e);
        holes.shuffle(&mut g.rng);
        for k in holes {
            let (ctx, filler) = cut(&e, k);
            match check_compositionality(&ctx, &filler) {
                Ok(true) => {
                    res.counters.push((if matches!(filler, Hole::L(_)) { "l_holes" } else { "u_holes" }, 1));
                    return res;
                }
                Ok(false) => {
                    res.failure = Some(format!("context {ctx} with filler {filler:?}"));
                    return res;
                }
                // A linear hole inside one case branch, under `share` or
                // across a boundary is not a well-typed context; try
                // another cut.
                Err(err) if matches!(err.code(), "E003" | "E004" | "E009") && err.to_string().contains(HOLE) => {
                    res.counters.push(("untypable_cut", 1));
                }
                Err(err) => {
                    res.failure = Some(format!("{err} for context {ctx}"));
                    return res;
                }
            }
        }
        res.counters.push(("no_hole", 1));
        res
    })
}

/// Pre-order indices of closed subterms that can become holes.
fn hole_candidates(e: &UExpr) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    e.visit(&mut |n| {
        let ok = match n {
            Node::U(u) => i > 0 && free_vars_u(u).is_empty() && typecheck_u(&MixedContext::new(), u).is_ok(),
            Node::L(l) => {
                free_vars_l(l).is_empty()
                    && crate::subst::all_locations_l(l).is_empty()
                    && typecheck_l_surface(&MixedContext::new(), l).is_ok()
            }
        };
        if ok {
            out.push(i);
        }
        i += 1;
    });
    out
}

/// Splits `e` at pre-order index `k` into a context and its filler.
fn cut(e: &UExpr, k: usize) -> (UExpr, Hole) {
    let mut i = 0;
    let mut filler = None;
    let ctx = cut_u(e, k, &mut i, &mut filler);
    (ctx, filler.expect("index in range"))
}

fn cut_u(e: &UExpr, k: usize, i: &mut usize, out: &mut Option<Hole>) -> UExpr {
    use UExpr as U;
    let here = *i;
    *i += 1;
    if here == k {
        *out = Some(Hole::U(e.clone()));
        return U::var(HOLE);
    }
    match e {
        U::Var(_) | U::Unit => e.clone(),
        U::Pair(x, y) => {
            let x = cut_u(x, k, i, out);
            U::Pair(Box::new(x), Box::new(cut_u(y, k, i, out)))
        }
        U::LetUnit(x, y) => {
            let x = cut_u(x, k, i, out);
            U::LetUnit(Box::new(x), Box::new(cut_u(y, k, i, out)))
        }
        U::App(x, y) => {
            let x = cut_u(x, k, i, out);
            U::App(Box::new(x), Box::new(cut_u(y, k, i, out)))
        }
        U::Fst(x) => U::Fst(Box::new(cut_u(x, k, i, out))),
        U::Snd(x) => U::Snd(Box::new(cut_u(x, k, i, out))),
        U::Lam(v, t, x) => U::Lam(v.clone(), t.clone(), Box::new(cut_u(x, k, i, out))),
        U::Inj(s, t, x) => U::Inj(*s, t.clone(), Box::new(cut_u(x, k, i, out))),
        U::Fold(t, x) => U::Fold(t.clone(), Box::new(cut_u(x, k, i, out))),
        U::Unfold(x) => U::Unfold(Box::new(cut_u(x, k, i, out))),
        U::TyAbs(a, x) => U::TyAbs(a.clone(), Box::new(cut_u(x, k, i, out))),
        U::TyApp(x, t) => U::TyApp(Box::new(cut_u(x, k, i, out)), t.clone()),
        U::Case(s, x, l, y, r) => {
            let s = cut_u(s, k, i, out);
            let l = cut_u(l, k, i, out);
            U::Case(Box::new(s), x.clone(), Box::new(l), y.clone(), Box::new(cut_u(r, k, i, out)))
        }
        U::Boundary(st, body) => {
            // stored values are visited before the body
            st.visit_values(&mut |_| *i += 1);
            U::Boundary(st.clone(), Box::new(cut_l(body, k, i, out)))
        }
    }
}

fn cut_l(e: &LExpr, k: usize, i: &mut usize, out: &mut Option<Hole>) -> LExpr {
    use LExpr as L;
    let here = *i;
    *i += 1;
    if here == k {
        *out = Some(Hole::L(e.clone()));
        return L::var(HOLE);
    }
    match e {
        L::Var(_) | L::Unit | L::Loc(_) => e.clone(),
        L::Pair(x, y) => {
            let x = cut_l(x, k, i, out);
            L::Pair(Box::new(x), Box::new(cut_l(y, k, i, out)))
        }
        L::LetUnit(x, y) => {
            let x = cut_l(x, k, i, out);
            L::LetUnit(Box::new(x), Box::new(cut_l(y, k, i, out)))
        }
        L::App(x, y) => {
            let x = cut_l(x, k, i, out);
            L::App(Box::new(x), Box::new(cut_l(y, k, i, out)))
        }
        L::LetPair(v, w, x, y) => {
            let x = cut_l(x, k, i, out);
            L::LetPair(v.clone(), w.clone(), Box::new(x), Box::new(cut_l(y, k, i, out)))
        }
        L::Lam(v, t, x) => L::Lam(v.clone(), t.clone(), Box::new(cut_l(x, k, i, out))),
        L::Inj(s, t, x) => L::Inj(*s, t.clone(), Box::new(cut_l(x, k, i, out))),
        L::Fold(t, x) => L::Fold(t.clone(), Box::new(cut_l(x, k, i, out))),
        L::Unfold(x) => L::Unfold(Box::new(cut_l(x, k, i, out))),
        L::Copy(x) => L::Copy(Box::new(cut_l(x, k, i, out))),
        L::New(x) => L::New(Box::new(cut_l(x, k, i, out))),
        L::Free(x) => L::Free(Box::new(cut_l(x, k, i, out))),
        L::BoxUp(x) => L::BoxUp(Box::new(cut_l(x, k, i, out))),
        L::Unbox(x) => L::Unbox(Box::new(cut_l(x, k, i, out))),
        L::Lump(t, x) => L::Lump(t.clone(), Box::new(cut_l(x, k, i, out))),
        L::Unlump(t, x) => L::Unlump(t.clone(), Box::new(cut_l(x, k, i, out))),
        L::Phase(p, x) => L::Phase(p.clone(), Box::new(cut_l(x, k, i, out))),
        L::Case(s, x, l, y, r) => {
            let s = cut_l(s, k, i, out);
            let l = cut_l(l, k, i, out);
            L::Case(Box::new(s), x.clone(), Box::new(l), y.clone(), Box::new(cut_l(r, k, i, out)))
        }
        L::Share(st, x) => {
            st.visit_values(&mut |_| *i += 1);
            L::Share(st.clone(), Box::new(cut_l(x, k, i, out)))
        }
        L::LumpVal(u) => L::LumpVal(Box::new(cut_u(u, k, i, out))),
        L::FromU(u) => L::FromU(Box::new(cut_u(u, k, i, out))),
    }
}

// ---------------------------------------------------------------- round trip

/// `l_to_u(u_to_l(v, t), t) = v` on first-order compatible types, and
/// observational agreement on argument probes for function types.
pub fn check_roundtrip(n_samples: u64, n_fun_samples: u64, probes: u64, seed: u64) -> Report {
    let start = Instant::now();
    let mut first = batch("roundtrip", n_samples, seed, |s| {
        let mut g = Gen::new(s);
        let t = g.compat_ltype(3, false);
        let mut res = SampleResult::default();
        res.counters.extend(constructor_counts(&t));
        let tau = match recover_u(&t) {
            Ok(tau) => tau,
            Err(err) => {
                res.failure = Some(format!("{t}: {err}"));
                return res;
            }
        };
        let Some(v) = closed_value(&mut g, &tau) else {
            res.counters.push(("skipped_divergent", 1));
            return res;
        };
        let mut supply = LocSupply::starting_at(0);
        let back = u_to_l(&v, &t, &mut supply).and_then(|w| l_to_u(&w, &t));
        match back {
            Ok(v2) if alpha_eq_uexpr(&v, &v2) => {}
            Ok(v2) => res.failure = Some(format!("{v} at {t} came back as {v2}")),
            Err(err) => res.failure = Some(format!("{v} at {t}: {err}")),
        }
        res
    });
    let funs = batch("roundtrip-fun", n_fun_samples, seed.wrapping_add(1), |s| {
        let mut g = Gen::new(s);
        let t = LType::bang(LType::lolli(g.compat_ltype(2, false), g.compat_ltype(2, false)));
        let mut res = SampleResult::default();
        res.counters.extend(constructor_counts(&t));
        let tau = recover_u(&t).expect("compatible by construction");
        let UType::Fun(dom, _) = &tau else { unreachable!() };
        let Ok(f) = g.u_value(&Env::default(), &tau, 10) else { return res };
        let mut supply = LocSupply::above_u(&f);
        let f2 = match u_to_l(&f, &t, &mut supply).and_then(|w| l_to_u(&w, &t)) {
            Ok(f2) => f2,
            Err(err) => {
                res.failure = Some(format!("{f} at {t}: {err}"));
                return res;
            }
        };
        for _ in 0..probes {
            let Some(arg) = closed_value(&mut g, dom) else { continue };
            let direct = Machine::for_u(&f, 10_000).run_u(&UExpr::app(f.clone(), arg.clone()));
            let app2 = UExpr::app(f2.clone(), arg.clone());
            let conv = Machine::for_u(&app2, 100_000).run_u(&app2);
            res.counters.push(("probes", 1));
            let same = match (&direct, &conv) {
                (Outcome::Value(a), Outcome::Value(b)) => alpha_eq_uexpr(a, b),
                (Outcome::OutOfFuel, Outcome::OutOfFuel) => true,
                _ => false,
            };
            if !same {
                res.failure = Some(format!("{f} and its round trip differ on {arg}: {direct:?} vs {conv:?}"));
                break;
            }
        }
        res
    });
    first.samples += funs.samples;
    first.failures += funs.failures;
    if first.counterexample.is_none() {
        first.counterexample = funs.counterexample;
    }
    for (k, v) in funs.counters {
        *first.counters.entry(k).or_default() += v;
    }
    first.runtime_ms = start.elapsed().as_millis() as u64;
    first
}

/// Counts of L type constructors in `t`, reported as coverage of the
/// compatibility rules.
fn constructor_counts(t: &LType) -> Vec<(&'static str, u64)> {
    fn go(t: &LType, out: &mut Vec<(&'static str, u64)>) {
        let (k, kids): (&'static str, Vec<&LType>) = match t {
            LType::Unit => ("compat_unit", vec![]),
            LType::Tensor(a, b) => ("compat_tensor", vec![a, b]),
            LType::Plus(a, b) => ("compat_plus", vec![a, b]),
            LType::Lolli(a, b) => ("compat_fun", vec![a, b]),
            LType::Lump(_) => ("compat_lump", vec![]),
            LType::Bang(a) => ("compat_bang", vec![a]),
            LType::Boxed(a) => ("compat_box", vec![a]),
            LType::Mu(_, a) => ("compat_mu", vec![a]),
            LType::Var(_) => ("compat_var", vec![]),
            LType::EmptyBox => ("compat_box0", vec![]),
        };
        out.push((k, 1));
        for c in kids {
            go(c, out);
        }
    }
    let mut out = Vec::new();
    go(t, &mut out);
    out
}

/// A generated closed value of τ: a generated term, evaluated.
fn closed_value(g: &mut Gen, tau: &UType) -> Option<UExpr> {
    let size = g.rng.gen_range(2..12);
    let e = g.u(&Env::default(), tau, size).ok()?;
    Machine::for_u(&e, 100_000).run_u(&e).value().cloned()
}

// ---------------------------------------------------------------- determinism

/// Every L type of at most `size` nodes built from `1`, `Lump(unit)`,
/// `*`, `+`, `-o`, `!`, `Box` and `mu`, with variables bound by enclosing
/// `mu`s. Binders are named `b0, b1, ..` by depth.
pub fn enumerate_ltypes(size: usize) -> Vec<LType> {
    let mut memo: BTreeMap<(usize, usize), Vec<LType>> = BTreeMap::new();
    let mut out = Vec::new();
    for n in 1..=size {
        out.extend(exact(n, 0, &mut memo));
    }
    out
}

fn exact(n: usize, depth: usize, memo: &mut BTreeMap<(usize, usize), Vec<LType>>) -> Vec<LType> {
    if let Some(v) = memo.get(&(n, depth)) {
        return v.clone();
    }
    let mut out = Vec::new();
    if n == 1 {
        out.push(LType::Unit);
        out.push(LType::Lump(UType::Unit));
        for d in 0..depth {
            out.push(LType::var(format!("b{d}")));
        }
    } else {
        for t in exact(n - 1, depth, memo) {
            out.push(LType::bang(t.clone()));
            out.push(LType::boxed(t));
        }
        for t in exact(n - 1, depth + 1, memo) {
            out.push(LType::mu(format!("b{depth}"), t));
        }
        for k in 1..n - 1 {
            let left = exact(k, depth, memo);
            let right = exact(n - 1 - k, depth, memo);
            for a in &left {
                for b in &right {
                    out.push(LType::tensor(a.clone(), b.clone()));
                    out.push(LType::plus(a.clone(), b.clone()));
                    out.push(LType::lolli(a.clone(), b.clone()));
                }
            }
        }
    }
    memo.insert((n, depth), out.clone());
    out
}

/// Closed U types of at most `size` nodes over `unit`, `*`, `+`, `->`
/// and `mu`.
pub fn enumerate_utypes(size: usize) -> Vec<UType> {
    fn go(n: usize, depth: usize) -> Vec<UType> {
        let mut out = Vec::new();
        if n == 1 {
            out.push(UType::Unit);
            for d in 0..depth {
                out.push(UType::var(format!("a{d}")));
            }
            return out;
        }
        for t in go(n - 1, depth + 1) {
            out.push(UType::mu(format!("a{depth}"), t));
        }
        for k in 1..n - 1 {
            for a in go(k, depth) {
                for b in go(n - 1 - k, depth) {
                    out.push(UType::prod(a.clone(), b.clone()));
                    out.push(UType::sum(a.clone(), b.clone()));
                    out.push(UType::fun(a.clone(), b));
                }
            }
        }
        out
    }
    (1..=size).flat_map(|n| go(n, 0)).collect()
}

/// Enumerates all L types up to `max_size` and checks that at most one U
/// type is compatible with each (rule-by-rule search), and that
/// `recover_u` agrees with the search. For types up to `brute_size`, the
/// relation is also checked against every U type up to `brute_u_size`.
pub fn check_determinism(max_size: usize, brute_size: usize, brute_u_size: usize) -> Report {
    let start = Instant::now();
    let all = enumerate_ltypes(max_size);
    let us = enumerate_utypes(brute_u_size);
    let results: Vec<SampleResult> = all
        .par_iter()
        .map(|t| {
            let t = LType::bang(t.clone());
            let mut res = SampleResult::default();
            let found = all_compatible(&t);
            if found.len() > 1 {
                let list: Vec<String> = found.iter().map(|u| u.to_string()).collect();
                res.failure = Some(format!("{t} is compatible with {}", list.join(", ")));
                return res;
            }
            match (recover_u(&t), found.first()) {
                (Ok(a), Some(b)) if alpha_eq_utype(&a, b) => res.counters.push(("in_image", 1)),
                (Err(_), None) => res.counters.push(("not_in_image", 1)),
                (r, f) => {
                    res.failure = Some(format!("{t}: recover_u gives {r:?}, search gives {f:?}"));
                    return res;
                }
            }
            if t.size() <= brute_size + 1 {
                let hits: Vec<&UType> = us.iter().filter(|u| compat(&CompatEnv::new(), u, &t)).collect();
                res.counters.push(("brute_checked", 1));
                let expected = found.iter().filter(|f| us.iter().any(|u| alpha_eq_utype(u, f))).count();
                if hits.len() > 1 || hits.len() != expected {
                    res.failure = Some(format!("{t}: brute force finds {} compatible U types", hits.len()));
                }
            }
            res
        })
        .collect();
    let mut r = Report::new("determinism", 0);
    for s in results {
        r.absorb(s);
    }
    r.runtime_ms = start.elapsed().as_millis() as u64;
    r
}

// ---------------------------------------------------------------- coverage and mutants

/// Rules of the evaluator that never fired in `counts`.
pub fn missing_rules(counts: &BTreeMap<&'static str, u64>) -> Vec<&'static str> {
    RULES.iter().copied().filter(|r| counts.get(r).copied().unwrap_or(0) == 0).collect()
}

/// Which property suites caught a mutant.
#[derive(Clone, Debug, Serialize)]
pub struct MutantResult {
    pub mutant: &'static str,
    pub samples: u64,
    /// Violations among all `samples` subject-reduction samples.
    pub subject_reduction_failures: u64,
    /// Index (1-based) of the first differential sample that disagreed.
    pub differential_first_failure: Option<u64>,
    pub counterexample: Option<String>,
}

impl MutantResult {
    pub fn caught(&self) -> bool {
        self.subject_reduction_failures > 0 || self.differential_first_failure.is_some()
    }
}

/// Runs the subject-reduction suite (50 steps) in full against each
/// mutant evaluator, and the differential suite (`fuel`) sample by sample
/// until its first disagreement. Samples are the ones the unmutated suites
/// draw for the same seed.
pub fn check_mutants(samples: u64, fuel: u64, seed: u64) -> Vec<MutantResult> {
    Mutant::ALL
        .iter()
        .map(|&m| {
            let sr = check_subject_reduction_with(samples, 50, seed, Some(m));
            let mut first = None;
            let mut cex = sr.counterexample.clone();
            for i in 0..samples {
                if let Some(f) = differential_sample(sample_seed(seed, i), fuel, Some(m)).failure {
                    first = Some(i + 1);
                    cex = cex.or(Some(crate::error::canonical_fresh_names(&f)));
                    break;
                }
            }
            MutantResult {
                mutant: m.name(),
                samples,
                subject_reduction_failures: sr.failures,
                differential_first_failure: first,
                counterexample: cex,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_fallbacks() {
        assert_eq!(gen_u_term(&MixedContext::new(), &UType::Unit, 0, 1).unwrap(), UExpr::Unit);
        let c = gen_l_config(&MixedContext::new(), &LType::Unit, 0, 1).unwrap();
        assert!(c.store.is_empty());
        assert_eq!(c.expr, LExpr::Unit);
    }

    #[test]
    fn bare_type_variable_is_uninhabited() {
        let ctx = MixedContext::new().with("a", Binding::TyVar);
        assert!(gen_u_term(&ctx, &UType::var("a"), 3, 7).is_err());
        let ctx = ctx.with("x", Binding::U(UType::var("a")));
        assert_eq!(gen_u_term(&ctx, &UType::var("a"), 0, 7).unwrap(), UExpr::var("x"));
    }

    #[test]
    fn generated_u_terms_typecheck() {
        let t = UType::fun(UType::Unit, UType::Unit);
        for seed in 0..50 {
            let e = gen_u_term(&MixedContext::new(), &t, 3, seed).unwrap();
            assert_eq!(typecheck_u(&MixedContext::new(), &e).unwrap(), t, "{e}");
        }
    }

    #[test]
    fn open_l_configs_consume_their_context() {
        let ctx = MixedContext::new()
            .with("x", Binding::L(LType::boxed(LType::Unit)))
            .with("y", Binding::L(LType::bang(LType::Unit)));
        for seed in 0..50 {
            let c = gen_l_config(&ctx, &LType::Unit, 6, seed).unwrap();
            let (t, used) = typecheck_l_surface(&ctx, &c.expr).unwrap_or_else(|e| panic!("{e}: {}", c.expr));
            assert_eq!(t, LType::Unit);
            assert!(used.vars.contains("x"));
        }
    }

    #[test]
    fn enumeration_counts_are_stable() {
        assert_eq!(enumerate_ltypes(1).len(), 2);
        // size 2: !1, Box 1, !Lump, Box Lump, mu b0. {1, Lump, b0}
        assert_eq!(enumerate_ltypes(2).len(), 2 + 7);
    }

    #[test]
    fn zero_samples_give_an_empty_report() {
        let r = check_subject_reduction(0, 50, 3);
        assert_eq!((r.samples, r.failures), (0, 0));
    }
}
