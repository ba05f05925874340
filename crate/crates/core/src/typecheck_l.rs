//! Type checking of L expressions and configurations.
//!
//! The checker is algorithmic: instead of splitting contexts up front it
//! synthesises, for every subterm, the set of linear variables and locations
//! it consumes, and rejects overlaps where the declarative rules would need
//! a disjoint split.

use std::collections::BTreeSet;

use crate::ast::*;
use crate::error::{mismatch, TypeErrorKind};
use crate::interop::recover_u;
use crate::subst::{alpha_eq_ltype, alpha_eq_utype, unfold_ltype};
use crate::typecheck_u::{self, lookup_term, wf_ltype, TResult};

/// Linear resources consumed by a term.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UsageReport {
    pub vars: BTreeSet<Name>,
    pub locs: BTreeSet<Location>,
}

impl UsageReport {
    fn disjoint_union(mut self, other: UsageReport) -> TResult<UsageReport> {
        if let Some(x) = self.vars.intersection(&other.vars).next() {
            return Err(TypeErrorKind::LinearVariableReused(x.clone()).into());
        }
        if let Some(l) = self.locs.intersection(&other.locs).next() {
            return Err(TypeErrorKind::LocationReused(*l).into());
        }
        self.vars.extend(other.vars);
        self.locs.extend(other.locs);
        Ok(self)
    }

    fn describe(&self) -> String {
        let mut parts: Vec<String> = self.vars.iter().cloned().collect();
        parts.extend(self.locs.iter().map(|l| l.to_string()));
        format!("{{{}}}", parts.join(", "))
    }
}

/// Joins two contexts. Linear variables may occur in only one of them;
/// duplicable and U bindings may be shared when they agree.
pub fn ctxjoin(g1: &MixedContext, g2: &MixedContext) -> TResult<MixedContext> {
    let mut out = g1.clone();
    for (x, b) in g2.iter() {
        match (g1.lookup(x), b) {
            (None, _) => out.push(x.clone(), b.clone()),
            (Some(Binding::L(t1)), Binding::L(t2)) if t1.duplicable() && alpha_eq_ltype(t1, t2) => {}
            (Some(Binding::L(_)), Binding::L(_)) | (Some(Binding::Hidden(_)), _) | (_, Binding::Hidden(_)) => {
                return Err(TypeErrorKind::SharedLinearVariable(x.clone()).into())
            }
            (Some(Binding::U(t1)), Binding::U(t2)) if alpha_eq_utype(t1, t2) => {}
            (Some(Binding::TyVar), Binding::TyVar) => {}
            (Some(b1), _) => return Err(mismatch(format!("{x} : {b1:?}"), format!("{x} : {b:?}"))),
        }
    }
    Ok(out)
}

/// Checks a surface term (no locations) in `ctx`.
pub fn typecheck_l_surface(ctx: &MixedContext, e: &LExpr) -> TResult<(LType, UsageReport)> {
    let mut ctx = ctx.clone();
    check(&mut ctx, &Store::new(), e)
}

/// Checks `e` against the store typing `sigma` and store `store`, which must
/// agree. Every location of `store` must be consumed exactly once.
pub fn typecheck_l_internal(
    sigma: &StoreTyping,
    ctx: &MixedContext,
    store: &Store,
    e: &LExpr,
) -> TResult<(LType, UsageReport)> {
    let inferred = infer_store_typing_in(ctx, store)?;
    compare_typings(sigma, &inferred)?;
    let mut c = ctx.clone();
    let (t, usage) = check(&mut c, store, e)?;
    require_all_consumed(store, &usage)?;
    Ok((t, usage))
}

/// Checks a closed configuration and returns its type with the inferred
/// store typing.
pub fn check_config(store: &Store, e: &LExpr) -> TResult<(LType, StoreTyping)> {
    let ctx = MixedContext::new();
    let t = check_config_in(&ctx, store, e)?;
    Ok((t, infer_store_typing_in(&ctx, store)?))
}

/// Checks `⟨store, e⟩` as it appears under `UL`: the body may consume no
/// linear variable and must consume every location of `store`.
pub fn check_config_in(ctx: &MixedContext, store: &Store, e: &LExpr) -> TResult<LType> {
    let mut c = ctx.bang();
    let (t, usage) = check(&mut c, store, e)?;
    if let Some(x) = usage.vars.iter().next() {
        return Err(TypeErrorKind::NonDuplicableLinearInScope(x.clone()).into());
    }
    require_all_consumed(store, &usage)?;
    Ok(t)
}

/// The store typing of a store whose owner has type `t`. The owner is only
/// needed for reporting; the entries depend on the store alone.
pub fn infer_store_typing(store: &Store) -> TResult<StoreTyping> {
    infer_store_typing_in(&MixedContext::new(), store)
}

fn infer_store_typing_in(ctx: &MixedContext, store: &Store) -> TResult<StoreTyping> {
    let mut out = StoreTyping::new();
    for (l, slot) in store.iter() {
        let entry = match slot {
            Slot::Empty => StoreEntry::Dead,
            Slot::Full(inner, v) => {
                let (ty, _) = check_stored(ctx, inner, v)?;
                StoreEntry::Alive { inner: infer_store_typing_in(&tyvars_only(ctx), inner)?, ty }
            }
        };
        out.insert(*l, entry);
    }
    Ok(out)
}

fn compare_typings(expected: &StoreTyping, found: &StoreTyping) -> TResult<()> {
    if expected.locations() != found.locations() {
        let fmt = |s: &BTreeSet<Location>| s.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ");
        return Err(TypeErrorKind::StoreMismatch(format!(
            "typing covers {{{}}} but store covers {{{}}}",
            fmt(&expected.locations()),
            fmt(&found.locations())
        ))
        .into());
    }
    for (l, e) in expected.iter() {
        match (e, found.get(*l).expect("same domain")) {
            (StoreEntry::Dead, StoreEntry::Dead) => {}
            (StoreEntry::Alive { inner: i1, ty: t1 }, StoreEntry::Alive { inner: i2, ty: t2 }) => {
                if !alpha_eq_ltype(t1, t2) {
                    return Err(mismatch(t1, t2).within(|| format!("store entry {l}")));
                }
                compare_typings(i1, i2)?;
            }
            (StoreEntry::Dead, _) => {
                return Err(TypeErrorKind::DeadAliveMismatch(*l, "typed dead but full".into()).into())
            }
            (_, _) => {
                return Err(TypeErrorKind::DeadAliveMismatch(*l, "typed alive but empty".into()).into())
            }
        }
    }
    Ok(())
}

fn require_all_consumed(store: &Store, usage: &UsageReport) -> TResult<()> {
    for l in store.locations() {
        if !usage.locs.contains(&l) {
            return Err(TypeErrorKind::LocationUnused(l).into());
        }
    }
    Ok(())
}

fn tyvars_only(ctx: &MixedContext) -> MixedContext {
    let mut out = MixedContext::new();
    for (n, b) in ctx.iter() {
        if matches!(b, Binding::TyVar) {
            out.push(n.clone(), Binding::TyVar);
        }
    }
    out
}

/// A stored value is a closed configuration of its own.
fn check_stored(ctx: &MixedContext, inner: &Store, v: &LExpr) -> TResult<(LType, UsageReport)> {
    let mut c = tyvars_only(ctx);
    let (t, usage) = check(&mut c, inner, v)?;
    require_all_consumed(inner, &usage)?;
    Ok((t, usage))
}

/// Type of `e` where `layer` is the store whose locations are visible.
/// Does not require the layer to be fully consumed.
pub fn synth_l(ctx: &MixedContext, layer: &Store, e: &LExpr) -> TResult<LType> {
    let mut c = ctx.clone();
    Ok(check(&mut c, layer, e)?.0)
}

fn expect_eq(expected: &LType, found: &LType) -> TResult<()> {
    if alpha_eq_ltype(expected, found) {
        Ok(())
    } else {
        Err(mismatch(expected, found))
    }
}

pub(crate) fn check(ctx: &mut MixedContext, layer: &Store, e: &LExpr) -> TResult<(LType, UsageReport)> {
    let r = check_inner(ctx, layer, e);
    match e {
        LExpr::Var(_) | LExpr::Unit | LExpr::Loc(_) => r,
        _ => r.map_err(|err| err.within(|| e.to_string())),
    }
}

/// Checks `body` under a fresh binding `x : t` and discharges it.
fn check_binder(
    ctx: &mut MixedContext,
    layer: &Store,
    x: &Name,
    t: &LType,
    body: &LExpr,
) -> TResult<(LType, UsageReport)> {
    ctx.push(x.clone(), Binding::L(t.clone()));
    let r = check(ctx, layer, body);
    ctx.pop();
    let (tb, mut usage) = r?;
    // A shadowed outer variable of the same name cannot be consumed here,
    // so the name in the report always refers to this binder.
    let used = usage.vars.remove(x);
    if !t.duplicable() && !used {
        return Err(TypeErrorKind::LinearVariableUnused(x.clone()).into());
    }
    Ok((tb, usage))
}

fn check_inner(ctx: &mut MixedContext, layer: &Store, e: &LExpr) -> TResult<(LType, UsageReport)> {
    let none = UsageReport::default;
    match e {
        LExpr::Var(x) => match lookup_term(ctx, x) {
            Some(Binding::L(t)) => {
                let mut u = none();
                if !t.duplicable() {
                    u.vars.insert(x.clone());
                }
                Ok((t.clone(), u))
            }
            Some(Binding::Hidden(_)) => Err(TypeErrorKind::NonDuplicableLinearInScope(x.clone()).into()),
            Some(Binding::U(_)) => Err(TypeErrorKind::WrongLanguage(format!(
                "U variable `{x}` used in L code; wrap it in an LU boundary"
            ))
            .into()),
            _ => Err(TypeErrorKind::UnboundVariable(x.clone()).into()),
        },
        LExpr::Unit => Ok((LType::Unit, none())),
        LExpr::Pair(a, b) => {
            let (ta, ua) = check(ctx, layer, a)?;
            let (tb, ub) = check(ctx, layer, b)?;
            Ok((LType::tensor(ta, tb), ua.disjoint_union(ub)?))
        }
        LExpr::LetPair(x, y, a, b) => {
            let (ta, ua) = check(ctx, layer, a)?;
            let LType::Tensor(t1, t2) = ta else {
                return Err(mismatch("a tensor type", ta));
            };
            ctx.push(x.clone(), Binding::L((*t1).clone()));
            let r = check_binder(ctx, layer, y, &t2, b);
            ctx.pop();
            let (tb, mut ub) = r?;
            let used = ub.vars.remove(x);
            if !t1.duplicable() && !used && x != y {
                return Err(TypeErrorKind::LinearVariableUnused(x.clone()).into());
            }
            if !t1.duplicable() && x == y {
                return Err(TypeErrorKind::LinearVariableUnused(x.clone()).into());
            }
            Ok((tb, ua.disjoint_union(ub)?))
        }
        LExpr::LetUnit(a, b) => {
            let (ta, ua) = check(ctx, layer, a)?;
            expect_eq(&LType::Unit, &ta)?;
            let (tb, ub) = check(ctx, layer, b)?;
            Ok((tb, ua.disjoint_union(ub)?))
        }
        LExpr::Lam(x, t, b) => {
            wf_ltype(ctx, t)?;
            let (tb, ub) = check_binder(ctx, layer, x, t, b)?;
            Ok((LType::lolli(t.clone(), tb), ub))
        }
        LExpr::App(f, a) => {
            let (tf, uf) = check(ctx, layer, f)?;
            let (ta, ua) = check(ctx, layer, a)?;
            let LType::Lolli(dom, cod) = tf else {
                return Err(mismatch("a function type", tf));
            };
            expect_eq(&dom, &ta)?;
            Ok((*cod, uf.disjoint_union(ua)?))
        }
        LExpr::Inj(side, t, a) => {
            wf_ltype(ctx, t)?;
            let (ta, ua) = check(ctx, layer, a)?;
            let LType::Plus(l, r) = t else {
                return Err(mismatch("a sum type annotation", t));
            };
            expect_eq(if *side == Side::Left { l } else { r }, &ta)?;
            Ok((t.clone(), ua))
        }
        LExpr::Case(s, x, l, y, r) => {
            let (ts, us) = check(ctx, layer, s)?;
            let LType::Plus(t1, t2) = ts else {
                return Err(mismatch("a sum type", ts));
            };
            let (tl, ul) = check_binder(ctx, layer, x, &t1, l)?;
            let (tr, ur) = check_binder(ctx, layer, y, &t2, r)?;
            if ul != ur {
                return Err(TypeErrorKind::BranchUsageMismatch { left: ul.describe(), right: ur.describe() }.into());
            }
            expect_eq(&tl, &tr)?;
            Ok((tl, us.disjoint_union(ul)?))
        }
        LExpr::Fold(t, a) => {
            wf_ltype(ctx, t)?;
            let LType::Mu(v, body) = t else {
                return Err(mismatch("a recursive type annotation", t));
            };
            let (ta, ua) = check(ctx, layer, a)?;
            expect_eq(&unfold_ltype(v, body), &ta)?;
            Ok((t.clone(), ua))
        }
        LExpr::Unfold(a) => {
            let (ta, ua) = check(ctx, layer, a)?;
            let LType::Mu(v, body) = ta else {
                return Err(mismatch("a recursive type", ta));
            };
            Ok((unfold_ltype(&v, &body), ua))
        }
        LExpr::Share(st, a) => {
            let (ta, ua) = check(ctx, st, a)?;
            if let Some(x) = ua.vars.iter().next() {
                return Err(TypeErrorKind::ShareCapturesLinear(x.clone()).into());
            }
            require_all_consumed(st, &ua)?;
            Ok((LType::bang(ta), none()))
        }
        LExpr::Copy(a) => {
            let (ta, ua) = check(ctx, layer, a)?;
            match ta {
                LType::Bang(t) => Ok((*t, ua)),
                other => Err(TypeErrorKind::CopyOfNonBang(other).into()),
            }
        }
        LExpr::New(a) => {
            let (ta, ua) = check(ctx, layer, a)?;
            expect_eq(&LType::Unit, &ta)?;
            Ok((LType::EmptyBox, ua))
        }
        LExpr::Free(a) => {
            let (ta, ua) = check(ctx, layer, a)?;
            expect_eq(&LType::EmptyBox, &ta)?;
            Ok((LType::Unit, ua))
        }
        LExpr::BoxUp(a) => {
            let (ta, ua) = check(ctx, layer, a)?;
            match ta {
                LType::Tensor(b, t) if *b == LType::EmptyBox => Ok((LType::boxed(*t), ua)),
                other => Err(mismatch("Box0 * t", other)),
            }
        }
        LExpr::Unbox(a) => {
            let (ta, ua) = check(ctx, layer, a)?;
            match ta {
                LType::Boxed(t) => Ok((LType::tensor(LType::EmptyBox, *t), ua)),
                other => Err(mismatch("Box t", other)),
            }
        }
        LExpr::Loc(l) => {
            let mut u = none();
            u.locs.insert(*l);
            match layer.get(*l) {
                None => Err(TypeErrorKind::UnknownLocation(*l).into()),
                Some(Slot::Empty) => Ok((LType::EmptyBox, u)),
                Some(Slot::Full(inner, v)) => {
                    let (t, _) = check_stored(ctx, inner, v).map_err(|err| err.within(|| format!("contents of {l}")))?;
                    Ok((LType::boxed(t), u))
                }
            }
        }
        LExpr::LumpVal(v) | LExpr::FromU(v) => {
            let t = typecheck_u::check(&mut ctx.bang(), v)?;
            Ok((LType::Lump(t), none()))
        }
        LExpr::Lump(t, a) => {
            wf_ltype(ctx, t)?;
            let tau = recover_u(t)?;
            let (ta, ua) = check(ctx, layer, a)?;
            expect_eq(t, &ta)?;
            Ok((LType::Lump(tau), ua))
        }
        LExpr::Unlump(t, a) => {
            wf_ltype(ctx, t)?;
            let tau = recover_u(t)?;
            let (ta, ua) = check(ctx, layer, a)?;
            expect_eq(&LType::Lump(tau), &ta)?;
            Ok((t.clone(), ua))
        }
        LExpr::Phase(_, a) => check(ctx, layer, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_lexpr, parse_store};

    fn ty(src: &str) -> TResult<LType> {
        typecheck_l_surface(&MixedContext::new(), &parse_lexpr(src).unwrap()).map(|(t, _)| t)
    }

    fn code(src: &str) -> &'static str {
        ty(src).unwrap_err().code()
    }

    #[test]
    fn linear_identity_and_swap() {
        assert_eq!(ty("fun (x : 1) -o x").unwrap().to_string(), "1 -o 1");
        let swap = "fun (p : Box0 * 1) -o let (a, b) = p in (b, a)";
        assert_eq!(ty(swap).unwrap().to_string(), "(Box0 * 1) -o (1 * Box0)");
    }

    #[test]
    fn linearity_errors() {
        assert_eq!(code("fun (x : Box0) -o (x, x)"), "E001");
        assert_eq!(code("fun (x : Box0) -o ()"), "E002");
        assert_eq!(code("fun (x : Box0) -o share (free x)"), "E003");
        assert_eq!(code("fun (x : Box0 + 1) -o case x of { inl a -> free a | inr b -> () }"), "E002");
        assert_eq!(code("copy ()"), "E005");
    }

    #[test]
    fn branch_usage_mismatch() {
        let src = "fun (y : Box0) -o fun (x : 1 + 1) -o case x of { inl a -> let () = a in free y | inr b -> b }";
        assert_eq!(code(src), "E004");
    }

    #[test]
    fn duplicable_variables_may_repeat() {
        let t = ty("fun (x : !1) -o (copy x, copy x)").unwrap();
        assert_eq!(t.to_string(), "!1 -o (1 * 1)");
    }

    #[test]
    fn boundary_hides_linear_variables() {
        assert_eq!(code("fun (x : Box0) -o LU { UL { share (free x) } }"), "E009");
        assert_eq!(code("fun (x : Box0) -o (LU { UL { x } }, x)"), "E009");
    }

    #[test]
    fn lump_roundtrip_types() {
        let t = ty("unlump[!(1 * 1)] (LU { ((), ()) })").unwrap();
        assert_eq!(t.to_string(), "!(1 * 1)");
        assert_eq!(code("lump[1] ()"), "E016");
    }

    #[test]
    fn configurations() {
        let st = parse_store("[#0 := empty, #1 := ([] ; ())]").unwrap();
        let e = parse_lexpr("(free #0, #1)").unwrap();
        let (t, sigma) = check_config(&st, &e).unwrap();
        assert_eq!(t.to_string(), "1 * Box 1");
        assert_eq!(sigma.get(Location(0)), Some(&StoreEntry::Dead));
        let unused = parse_lexpr("free #0").unwrap();
        assert_eq!(check_config(&st, &unused).unwrap_err().code(), "E012");
        let reused = parse_lexpr("(#1, #1)").unwrap();
        let st1 = parse_store("[#1 := ([] ; ())]").unwrap();
        assert_eq!(check_config(&st1, &reused).unwrap_err().code(), "E013");
        assert_eq!(check_config(&Store::new(), &parse_lexpr("#3").unwrap()).unwrap_err().code(), "E018");
    }

    #[test]
    fn explicit_store_typing_must_agree() {
        let st = parse_store("[#0 := empty]").unwrap();
        let e = parse_lexpr("free #0").unwrap();
        let ctx = MixedContext::new();
        let alive: StoreTyping =
            [(Location(0), StoreEntry::Alive { inner: StoreTyping::new(), ty: LType::Unit })].into_iter().collect();
        assert_eq!(typecheck_l_internal(&alive, &ctx, &st, &e).unwrap_err().code(), "E015");
        let wrong_dom: StoreTyping = [(Location(1), StoreEntry::Dead)].into_iter().collect();
        assert_eq!(typecheck_l_internal(&wrong_dom, &ctx, &st, &e).unwrap_err().code(), "E014");
        let ok: StoreTyping = [(Location(0), StoreEntry::Dead)].into_iter().collect();
        assert!(typecheck_l_internal(&ok, &ctx, &st, &e).is_ok());
    }

    #[test]
    fn context_join() {
        let a = MixedContext::new().with("x", Binding::L(LType::EmptyBox));
        let b = MixedContext::new().with("x", Binding::L(LType::EmptyBox));
        assert_eq!(ctxjoin(&a, &b).unwrap_err().code(), "E011");
        let d = MixedContext::new().with("y", Binding::L(LType::bang(LType::Unit)));
        assert_eq!(ctxjoin(&d, &d).unwrap().len(), 1);
    }
}
