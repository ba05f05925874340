//! The functional translation of linear state into pure U.
//!
//! Locations become variables `loc$n`, L type variables become `l$a`, and
//! a configuration is translated by substituting the translation of each
//! cell for its location variable.

use crate::ast::*;
use crate::error::TypeError;
use crate::interop::recover_u;
use crate::parser::u_fix;
use crate::subst::{alpha_eq_uexpr, alpha_eq_utype, alpha_eq_ltype, subst_u, unfold_ltype, Val};
use crate::typecheck_l::synth_l;
use crate::typecheck_u::typecheck_u;

pub fn loc_var(l: Location) -> Name {
    format!("loc${}", l.0)
}

pub fn ltyvar(a: &str) -> Name {
    format!("l${a}")
}

pub fn funtrans_type(t: &LType) -> UType {
    match t {
        LType::Var(a) => UType::Var(ltyvar(a)),
        LType::Unit | LType::EmptyBox => UType::Unit,
        LType::Tensor(a, b) => UType::prod(funtrans_type(a), funtrans_type(b)),
        LType::Plus(a, b) => UType::sum(funtrans_type(a), funtrans_type(b)),
        LType::Lolli(a, b) => UType::fun(funtrans_type(a), funtrans_type(b)),
        LType::Mu(a, b) => UType::mu(ltyvar(a), funtrans_type(b)),
        LType::Bang(a) => funtrans_type(a),
        LType::Boxed(a) => UType::prod(UType::Unit, funtrans_type(a)),
        LType::Lump(u) => u.clone(),
    }
}

/// Translates a closed U program.
pub fn funtrans_u(e: &UExpr) -> Result<UExpr, TypeError> {
    Translator { ctx: MixedContext::new() }.u(e)
}

/// Translates an L term in `ctx` with no visible locations.
pub fn funtrans_l(ctx: &MixedContext, e: &LExpr) -> Result<UExpr, TypeError> {
    Translator { ctx: ctx.clone() }.l(&Store::new(), e)
}

/// Translates a closed configuration.
pub fn funtrans_config(store: &Store, e: &LExpr) -> Result<UExpr, TypeError> {
    Translator { ctx: MixedContext::new() }.config(store, e)
}

struct Translator {
    ctx: MixedContext,
}

impl Translator {
    fn bind<T>(&mut self, x: &Name, b: Binding, f: impl FnOnce(&mut Self) -> T) -> T {
        self.ctx.push(x.clone(), b);
        let r = f(self);
        self.ctx.pop();
        r
    }

    fn u(&mut self, e: &UExpr) -> Result<UExpr, TypeError> {
        use UExpr as U;
        let b = Box::new;
        Ok(match e {
            U::Var(_) | U::Unit => e.clone(),
            U::Pair(x, y) => U::Pair(b(self.u(x)?), b(self.u(y)?)),
            U::Fst(x) => U::Fst(b(self.u(x)?)),
            U::Snd(x) => U::Snd(b(self.u(x)?)),
            U::LetUnit(x, y) => U::LetUnit(b(self.u(x)?), b(self.u(y)?)),
            U::Lam(x, t, body) => {
                let body = self.bind(x, Binding::U(t.clone()), |s| s.u(body))?;
                U::Lam(x.clone(), t.clone(), b(body))
            }
            U::App(f, a) => U::App(b(self.u(f)?), b(self.u(a)?)),
            U::Inj(s, t, x) => U::Inj(*s, t.clone(), b(self.u(x)?)),
            U::Case(sc, x, l, y, r) => {
                let (t1, t2) = match typecheck_u(&self.ctx, sc)? {
                    UType::Sum(t1, t2) => (*t1, *t2),
                    _ => unreachable!("checked program"),
                };
                let sc2 = self.u(sc)?;
                let l2 = self.bind(x, Binding::U(t1), |s| s.u(l))?;
                let r2 = self.bind(y, Binding::U(t2), |s| s.u(r))?;
                U::Case(b(sc2), x.clone(), b(l2), y.clone(), b(r2))
            }
            U::Fold(t, x) => U::Fold(t.clone(), b(self.u(x)?)),
            U::Unfold(x) => U::Unfold(b(self.u(x)?)),
            U::TyAbs(a, x) => {
                let x2 = self.bind(a, Binding::TyVar, |s| s.u(x))?;
                U::TyAbs(a.clone(), b(x2))
            }
            U::TyApp(x, t) => U::TyApp(b(self.u(x)?), t.clone()),
            U::Boundary(st, body) => self.config(st, body)?,
        })
    }

    fn config(&mut self, st: &Store, e: &LExpr) -> Result<UExpr, TypeError> {
        let mut out = self.l(st, e)?;
        for (l, slot) in st.iter() {
            let cell = match slot {
                Slot::Empty => UExpr::Unit,
                Slot::Full(inner, v) => {
                    let saved = std::mem::take(&mut self.ctx);
                    self.ctx = tyvars_of(&saved);
                    let r = self.config(inner, v);
                    self.ctx = saved;
                    UExpr::pair(UExpr::Unit, r?)
                }
            };
            out = subst_u(&out, &loc_var(*l), Val::U(&cell));
        }
        Ok(out)
    }

    /// `layer` is the store whose locations are visible, for typing only.
    fn l(&mut self, layer: &Store, e: &LExpr) -> Result<UExpr, TypeError> {
        use LExpr as L;
        let b = Box::new;
        Ok(match e {
            L::Var(x) => UExpr::Var(x.clone()),
            L::Unit => UExpr::Unit,
            L::Pair(x, y) => UExpr::pair(self.l(layer, x)?, self.l(layer, y)?),
            L::LetPair(x, y, a, body) => {
                let ta = synth_l(&self.ctx, layer, a)?;
                let LType::Tensor(t1, t2) = &ta else { unreachable!("checked program") };
                let a2 = self.l(layer, a)?;
                let body2 = self.bind(x, Binding::L((**t1).clone()), |s| {
                    s.bind(y, Binding::L((**t2).clone()), |s| s.l(layer, body))
                })?;
                // (fun (p : T1 * T2) -> (fun (x : T1) -> (fun (y : T2) -> body) (snd p)) (fst p)) a
                let p = fresh_name("p");
                let (u1, u2) = (funtrans_type(t1), funtrans_type(t2));
                let inner = UExpr::app(UExpr::lam(y.clone(), u2, body2), UExpr::snd(UExpr::var(p.clone())));
                let outer = UExpr::app(UExpr::lam(x.clone(), u1, inner), UExpr::fst(UExpr::var(p.clone())));
                UExpr::app(UExpr::lam(p, funtrans_type(&ta), outer), a2)
            }
            L::LetUnit(x, y) => UExpr::let_unit(self.l(layer, x)?, self.l(layer, y)?),
            L::Lam(x, t, body) => {
                let body2 = self.bind(x, Binding::L(t.clone()), |s| s.l(layer, body))?;
                UExpr::lam(x.clone(), funtrans_type(t), body2)
            }
            L::App(f, a) => UExpr::app(self.l(layer, f)?, self.l(layer, a)?),
            L::Inj(s, t, x) => UExpr::inj(*s, funtrans_type(t), self.l(layer, x)?),
            L::Case(sc, x, l, y, r) => {
                let ts = synth_l(&self.ctx, layer, sc)?;
                let LType::Plus(t1, t2) = &ts else { unreachable!("checked program") };
                let sc2 = self.l(layer, sc)?;
                let l2 = self.bind(x, Binding::L((**t1).clone()), |s| s.l(layer, l))?;
                let r2 = self.bind(y, Binding::L((**t2).clone()), |s| s.l(layer, r))?;
                UExpr::Case(b(sc2), x.clone(), b(l2), y.clone(), b(r2))
            }
            L::Fold(t, x) => UExpr::fold(funtrans_type(t), self.l(layer, x)?),
            L::Unfold(x) => UExpr::unfold(self.l(layer, x)?),
            L::Share(st, x) => self.config(st, x)?,
            L::Copy(x) | L::Phase(_, x) => self.l(layer, x)?,
            L::New(x) | L::Free(x) => UExpr::let_unit(self.l(layer, x)?, UExpr::Unit),
            L::BoxUp(x) | L::Unbox(x) => UExpr::pair(UExpr::Unit, UExpr::snd(self.l(layer, x)?)),
            L::Loc(l) => UExpr::Var(loc_var(*l)),
            L::LumpVal(u) | L::FromU(u) => self.u(u)?,
            L::Lump(t, x) => {
                let x2 = self.l(layer, x)?;
                let tau = recover_u(t)?;
                if alpha_eq_utype(&funtrans_type(t), &tau) {
                    x2
                } else {
                    to_tau(&mut Vec::new(), t, x2)?
                }
            }
            L::Unlump(t, x) => {
                let x2 = self.l(layer, x)?;
                let tau = recover_u(t)?;
                if alpha_eq_utype(&funtrans_type(t), &tau) {
                    x2
                } else {
                    from_tau(&mut Vec::new(), t, x2)?
                }
            }
        })
    }
}

fn tyvars_of(ctx: &MixedContext) -> MixedContext {
    let mut out = MixedContext::new();
    for (n, b) in ctx.iter() {
        if matches!(b, Binding::TyVar) {
            out.push(n.clone(), Binding::TyVar);
        }
    }
    out
}

type CoercionEnv = Vec<(LType, bool, Name)>;

/// Binds `x` once so that a coercion can project it several times.
/// Variables are bound too: the output must not depend on whether the
/// argument is a variable, or plugging a hole would change it.
fn with_bound(ty: UType, x: UExpr, f: impl FnOnce(UExpr) -> Result<UExpr, TypeError>) -> Result<UExpr, TypeError> {
    let p = fresh_name("c");
    let body = f(UExpr::var(p.clone()))?;
    Ok(UExpr::app(UExpr::lam(p, ty, body), x))
}

/// Coerces `x : ⟦s⟧` to the compatible U type of `s` (for closed `s`
/// under an outer `!`).
fn to_tau(env: &mut CoercionEnv, s: &LType, x: UExpr) -> Result<UExpr, TypeError> {
    coerce(env, s, x, true)
}

/// Coerces `x` of the compatible U type of `s` to `⟦s⟧`.
fn from_tau(env: &mut CoercionEnv, s: &LType, x: UExpr) -> Result<UExpr, TypeError> {
    coerce(env, s, x, false)
}

fn coerce(env: &mut CoercionEnv, s: &LType, x: UExpr, to: bool) -> Result<UExpr, TypeError> {
    let tau = crate::interop::recover_u_bang(s)?;
    let src = if to { funtrans_type(s) } else { tau.clone() };
    let dst = if to { tau.clone() } else { funtrans_type(s) };
    if let Some((_, _, f)) = env.iter().rev().find(|(m, d, _)| *d == to && alpha_eq_ltype(m, s)) {
        return Ok(UExpr::app(UExpr::var(f.clone()), x));
    }
    Ok(match s {
        LType::Unit | LType::Lump(_) => x,
        LType::Bang(s1) => coerce(env, s1, x, to)?,
        LType::Boxed(s1) => {
            if to {
                coerce(env, s1, UExpr::snd(x), to)?
            } else {
                UExpr::pair(UExpr::Unit, coerce(env, s1, x, to)?)
            }
        }
        LType::Tensor(a, b) => with_bound(src, x, |p| {
            Ok(UExpr::pair(
                coerce(env, a, UExpr::fst(p.clone()), to)?,
                coerce(env, b, UExpr::snd(p), to)?,
            ))
        })?,
        LType::Plus(a, b) => {
            let (y, z) = (fresh_name("c"), fresh_name("c"));
            let l = UExpr::inj(Side::Left, dst.clone(), coerce(env, a, UExpr::var(y.clone()), to)?);
            let r = UExpr::inj(Side::Right, dst, coerce(env, b, UExpr::var(z.clone()), to)?);
            UExpr::case(x, y, l, z, r)
        }
        LType::Lolli(a, b) => {
            let (LType::Bang(a), LType::Bang(b)) = (&**a, &**b) else {
                return Err(crate::error::TypeErrorKind::NotInImage(s.clone()).into());
            };
            let y = fresh_name("c");
            let arg_ty = if to { crate::interop::recover_u_bang(a)? } else { funtrans_type(a) };
            let arg = coerce(env, a, UExpr::var(y.clone()), !to)?;
            let res = coerce(env, b, UExpr::app(x, arg), to)?;
            UExpr::lam(y, arg_ty, res)
        }
        LType::Mu(beta, body) => {
            let f = fresh_name("coerce");
            let y = fresh_name("c");
            env.push((s.clone(), to, f.clone()));
            let unfolded = unfold_ltype(beta, body);
            let inner = coerce(env, &unfolded, UExpr::unfold(UExpr::var(y.clone())), to);
            env.pop();
            let fix = u_fix(&f, &y, src, dst.clone(), UExpr::fold(dst, inner?));
            UExpr::app(fix, x)
        }
        LType::Var(_) | LType::EmptyBox => {
            return Err(crate::error::TypeErrorKind::NotInImage(s.clone()).into())
        }
    })
}

/// The distinguished hole variable of a one-hole context.
pub const HOLE: &str = "hole$";

/// Replaces the hole of `c` with `filler`, allowing capture.
pub fn plug_u(c: &UExpr, filler: &Hole) -> UExpr {
    let mut out = c.clone();
    plug_u_mut(&mut out, filler);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum Hole {
    U(UExpr),
    L(LExpr),
}

fn plug_u_mut(e: &mut UExpr, filler: &Hole) {
    use UExpr as U;
    match e {
        U::Var(x) if x == HOLE => {
            if let Hole::U(f) = filler {
                *e = f.clone();
            }
        }
        U::Var(_) | U::Unit => {}
        U::Pair(a, b) | U::LetUnit(a, b) | U::App(a, b) => {
            plug_u_mut(a, filler);
            plug_u_mut(b, filler);
        }
        U::Fst(a) | U::Snd(a) | U::Lam(_, _, a) | U::Inj(_, _, a) | U::Fold(_, a) | U::Unfold(a) => {
            plug_u_mut(a, filler)
        }
        U::TyAbs(_, a) | U::TyApp(a, _) => plug_u_mut(a, filler),
        U::Case(s, _, l, _, r) => {
            plug_u_mut(s, filler);
            plug_u_mut(l, filler);
            plug_u_mut(r, filler);
        }
        U::Boundary(_, l) => plug_l_mut(l, filler),
    }
}

fn plug_l_mut(e: &mut LExpr, filler: &Hole) {
    use LExpr as L;
    match e {
        L::Var(x) if x == HOLE => {
            if let Hole::L(f) = filler {
                *e = f.clone();
            }
        }
        L::Var(_) | L::Unit | L::Loc(_) => {}
        L::Pair(a, b) | L::LetUnit(a, b) | L::App(a, b) | L::LetPair(_, _, a, b) => {
            plug_l_mut(a, filler);
            plug_l_mut(b, filler);
        }
        L::Lam(_, _, a)
        | L::Inj(_, _, a)
        | L::Fold(_, a)
        | L::Unfold(a)
        | L::Share(_, a)
        | L::Copy(a)
        | L::New(a)
        | L::Free(a)
        | L::BoxUp(a)
        | L::Unbox(a)
        | L::Lump(_, a)
        | L::Unlump(_, a)
        | L::Phase(_, a) => plug_l_mut(a, filler),
        L::Case(s, _, l, _, r) => {
            plug_l_mut(s, filler);
            plug_l_mut(l, filler);
            plug_l_mut(r, filler);
        }
        L::LumpVal(u) | L::FromU(u) => plug_u_mut(u, filler),
    }
}

/// Checks `⟦C[e]⟧ = ⟦C⟧[⟦e⟧]` up to alpha-equivalence, for a closed U
/// context `c` whose hole has the type of the closed filler `e`.
pub fn check_compositionality(c: &UExpr, e: &Hole) -> Result<bool, TypeError> {
    let whole = funtrans_u(&plug_u(c, e))?;
    let (binding, te) = match e {
        Hole::U(u) => (Binding::U(typecheck_u(&MixedContext::new(), u)?), funtrans_u(u)?),
        Hole::L(l) => (
            Binding::L(synth_l(&MixedContext::new(), &Store::new(), l)?),
            funtrans_l(&MixedContext::new(), l)?,
        ),
    };
    let mut t = Translator { ctx: MixedContext::new().with(HOLE, binding) };
    let ctx_tr = t.u(c)?;
    let parts = plug_u(&ctx_tr, &Hole::U(te));
    Ok(alpha_eq_uexpr(&whole, &parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{run, Outcome};
    use crate::parser::{parse, parse_lexpr, parse_ltype, parse_uexpr, elaborate};

    fn ft(s: &str) -> String {
        funtrans_type(&parse_ltype(s).unwrap()).to_string()
    }

    #[test]
    fn type_table() {
        assert_eq!(ft("!1"), "unit");
        assert_eq!(ft("Box !1"), "unit * unit");
        assert_eq!(ft("Lump(forall a. a -> a)"), "forall a. a -> a");
        assert_eq!(ft("mu a. 1 + Box a"), "mu l$a. unit + unit * l$a");
    }

    #[test]
    fn store_primitives() {
        let ctx = MixedContext::new();
        assert_eq!(funtrans_l(&ctx, &parse_lexpr("new ()").unwrap()).unwrap().to_string(), "let () = () in ()");
        let c = MixedContext::new().with("e", Binding::L(LType::boxed(LType::Unit)));
        let t = funtrans_l(&c, &parse_lexpr("unbox e").unwrap()).unwrap();
        assert_eq!(t, UExpr::pair(UExpr::Unit, UExpr::snd(UExpr::var("e"))));
    }

    #[test]
    fn projection_on_pure_u() {
        let e = parse_uexpr("(fun (x : unit) -> (x, inl[unit + unit] x)) ()").unwrap();
        assert_eq!(funtrans_u(&e).unwrap(), e);
    }

    #[test]
    fn compositionality_simple() {
        let c = parse_uexpr("UL { share (LU { hole$ }) }").unwrap();
        assert!(check_compositionality(&c, &Hole::U(UExpr::Unit)).unwrap());
        let id = UExpr::var(HOLE);
        assert!(check_compositionality(&id, &Hole::U(UExpr::Unit)).unwrap());
    }

    #[test]
    fn boxed_lump_coercion_preserves_results() {
        let src = "main = UL { share (lump[!(Box !1 * !Lump(unit))] (unlump[!(Box !1 * !Lump(unit))] (LU { ((), ()) }))) };";
        let e = elaborate(&parse(src).unwrap()).unwrap();
        let direct = run(&e, 1000).0;
        let tr = funtrans_u(&e).unwrap();
        assert_eq!(typecheck_u(&MixedContext::new(), &tr).unwrap(), UType::prod(UType::Unit, UType::Unit));
        let oracle = run(&tr, 10_000).0;
        assert_eq!(direct, oracle);
        assert!(matches!(direct, Outcome::Value(_)));
    }
}
