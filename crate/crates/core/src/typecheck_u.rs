//! Type checking of U expressions in a mixed context.

use crate::ast::*;
use crate::error::{mismatch, TypeError, TypeErrorKind};
use crate::subst::{alpha_eq_utype, ftv_u, ftv_u_in_l, ftv_l, subst_utype, tysubst_uexpr};
use crate::typecheck_l;

pub type TResult<T> = Result<T, TypeError>;

/// Synthesises the type of `e`. L variables of `ctx` are never consumed by
/// U rules; nested `UL` boundaries account for them.
pub fn typecheck_u(ctx: &MixedContext, e: &UExpr) -> TResult<UType> {
    let mut ctx = ctx.clone();
    check(&mut ctx, e)
}

pub(crate) fn check(ctx: &mut MixedContext, e: &UExpr) -> TResult<UType> {
    let r = check_inner(ctx, e);
    match e {
        UExpr::Var(_) | UExpr::Unit => r,
        _ => r.map_err(|err| err.within(|| e.to_string())),
    }
}

pub(crate) fn wf_utype(ctx: &MixedContext, t: &UType) -> TResult<()> {
    for a in ftv_u(t) {
        if !ctx.has_tyvar(&a) {
            return Err(TypeErrorKind::UnboundTypeVariable(a).into());
        }
    }
    Ok(())
}

/// L types have no free L type variables (L has no polymorphism); U type
/// variables under lumps must be in scope.
pub(crate) fn wf_ltype(ctx: &MixedContext, t: &LType) -> TResult<()> {
    if let Some(a) = ftv_l(t).into_iter().next() {
        return Err(TypeErrorKind::UnboundTypeVariable(a).into());
    }
    for a in ftv_u_in_l(t) {
        if !ctx.has_tyvar(&a) {
            return Err(TypeErrorKind::UnboundTypeVariable(a).into());
        }
    }
    Ok(())
}

pub(crate) fn lookup_term<'a>(ctx: &'a MixedContext, x: &str) -> Option<&'a Binding> {
    ctx.iter()
        .rev()
        .find(|(n, b)| n == x && !matches!(b, Binding::TyVar))
        .map(|(_, b)| b)
}

fn expect_eq(expected: &UType, found: &UType) -> TResult<()> {
    if alpha_eq_utype(expected, found) {
        Ok(())
    } else {
        Err(mismatch(expected, found))
    }
}

fn check_inner(ctx: &mut MixedContext, e: &UExpr) -> TResult<UType> {
    match e {
        UExpr::Var(x) => match lookup_term(ctx, x) {
            Some(Binding::U(t)) => Ok(t.clone()),
            Some(Binding::L(_)) | Some(Binding::Hidden(_)) => Err(TypeErrorKind::WrongLanguage(format!(
                "L variable `{x}` used in U code; wrap it in a UL boundary"
            ))
            .into()),
            _ => Err(TypeErrorKind::UnboundVariable(x.clone()).into()),
        },
        UExpr::Unit => Ok(UType::Unit),
        UExpr::Pair(a, b) => Ok(UType::prod(check(ctx, a)?, check(ctx, b)?)),
        UExpr::Fst(a) | UExpr::Snd(a) => match check(ctx, a)? {
            UType::Prod(x, y) => Ok(if matches!(e, UExpr::Fst(_)) { *x } else { *y }),
            t => Err(mismatch("a product type", t)),
        },
        UExpr::LetUnit(a, b) => {
            expect_eq(&UType::Unit, &check(ctx, a)?)?;
            check(ctx, b)
        }
        UExpr::Lam(x, t, b) => {
            wf_utype(ctx, t)?;
            ctx.push(x.clone(), Binding::U(t.clone()));
            let r = check(ctx, b);
            ctx.pop();
            Ok(UType::fun(t.clone(), r?))
        }
        UExpr::App(f, a) => {
            let tf = check(ctx, f)?;
            let ta = check(ctx, a)?;
            match tf {
                UType::Fun(dom, cod) => {
                    expect_eq(&dom, &ta)?;
                    Ok(*cod)
                }
                t => Err(mismatch("a function type", t)),
            }
        }
        UExpr::Inj(side, t, a) => {
            wf_utype(ctx, t)?;
            let ta = check(ctx, a)?;
            match t {
                UType::Sum(l, r) => {
                    expect_eq(if *side == Side::Left { l } else { r }, &ta)?;
                    Ok(t.clone())
                }
                _ => Err(mismatch("a sum type annotation", t)),
            }
        }
        UExpr::Case(s, x, l, y, r) => {
            let (tl, tr) = match check(ctx, s)? {
                UType::Sum(a, b) => (*a, *b),
                t => return Err(mismatch("a sum type", t)),
            };
            ctx.push(x.clone(), Binding::U(tl));
            let t1 = check(ctx, l);
            ctx.pop();
            ctx.push(y.clone(), Binding::U(tr));
            let t2 = check(ctx, r);
            ctx.pop();
            let (t1, t2) = (t1?, t2?);
            expect_eq(&t1, &t2)?;
            Ok(t1)
        }
        UExpr::Fold(t, a) => {
            wf_utype(ctx, t)?;
            let UType::Mu(v, body) = t else {
                return Err(mismatch("a recursive type annotation", t));
            };
            let unfolded = subst_utype(body, v, t);
            expect_eq(&unfolded, &check(ctx, a)?)?;
            Ok(t.clone())
        }
        UExpr::Unfold(a) => match check(ctx, a)? {
            UType::Mu(v, body) => {
                let mu = UType::Mu(v.clone(), body.clone());
                Ok(subst_utype(&body, &v, &mu))
            }
            t => Err(mismatch("a recursive type", t)),
        },
        UExpr::TyAbs(a, v) => {
            if !v.is_value() {
                return Err(TypeErrorKind::NonValueUnderTypeAbstraction.into());
            }
            // Rename the binder when it would shadow a type variable already
            // in scope, so that types in the context are not captured.
            let (a, v) = if ctx.has_tyvar(a) {
                let na = fresh_name(a);
                let nv = tysubst_uexpr(v, a, &UType::Var(na.clone()));
                (na, nv)
            } else {
                (a.clone(), (**v).clone())
            };
            ctx.push(a.clone(), Binding::TyVar);
            let r = check(ctx, &v);
            ctx.pop();
            Ok(UType::forall(a, r?))
        }
        UExpr::TyApp(a, t) => {
            wf_utype(ctx, t)?;
            match check(ctx, a)? {
                UType::Forall(v, body) => Ok(subst_utype(&body, &v, t)),
                other => Err(mismatch("a universal type", other)),
            }
        }
        UExpr::Boundary(st, body) => delegate_boundary_ul(ctx, st, body),
    }
}

/// Types `UL σ e` by checking the configuration `⟨σ, e⟩` at `!Lump(τ)`.
pub fn delegate_boundary_ul(ctx: &MixedContext, st: &Store, body: &LExpr) -> TResult<UType> {
    let t = typecheck_l::check_config_in(ctx, st, body)?;
    match &t {
        LType::Bang(inner) => match &**inner {
            LType::Lump(u) => Ok(u.clone()),
            _ => Err(TypeErrorKind::BoundaryTypeNotLumped(t.clone()).into()),
        },
        _ => Err(TypeErrorKind::BoundaryTypeNotLumped(t.clone()).into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_uexpr;

    fn ty(src: &str) -> TResult<UType> {
        typecheck_u(&MixedContext::new(), &parse_uexpr(src).unwrap())
    }

    #[test]
    fn identity_functions() {
        assert_eq!(ty("fun (x : unit) -> x").unwrap().to_string(), "unit -> unit");
        let poly = ty("Fun a -> fun (x : a) -> x").unwrap();
        assert_eq!(poly.to_string(), "forall a. a -> a");
    }

    #[test]
    fn projection_of_unit_is_rejected() {
        let err = ty("fst ()").unwrap_err();
        assert_eq!(err.code(), "E006");
    }

    #[test]
    fn value_restriction() {
        let err = ty("Fun a -> (fun (x : unit) -> x) ()").unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::NonValueUnderTypeAbstraction);
    }

    #[test]
    fn boundaries() {
        assert_eq!(ty("UL { share (LU { () }) }").unwrap(), UType::Unit);
        let err = ty("UL { () }").unwrap_err();
        assert_eq!(err.code(), "E010");
    }

    #[test]
    fn type_application_substitutes() {
        let t = ty("(Fun a -> fun (x : a) -> x)[unit] ()").unwrap();
        assert_eq!(t, UType::Unit);
    }

    #[test]
    fn fix_sugar_types() {
        let t = ty("fix f (x : unit) : unit = f x").unwrap();
        assert_eq!(t.to_string(), "unit -> unit");
    }
}
