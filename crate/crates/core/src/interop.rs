//! The compatibility relation between U and L types and the value
//! conversions it licenses.
//!
//! `τ ◃▹ t` only holds for `!`-headed `t`; underneath the outer `!` the
//! relation is written `◃▹!` here and in the code (`rel_bang`). Both
//! directions are syntax-directed on the L type.

use crate::ast::*;
use crate::error::{TypeError, TypeErrorKind};
use crate::subst::{alpha_eq_utype, ftv_u, ftv_u_in_l, locations_of, unfold_ltype};

/// Pairings `α ◃▹ β` of a U type variable with an L type variable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompatEnv(Vec<(Name, Name)>);

impl CompatEnv {
    pub fn new() -> Self {
        CompatEnv(Vec::new())
    }

    pub fn with(mut self, alpha: impl Into<Name>, beta: impl Into<Name>) -> Self {
        self.0.push((alpha.into(), beta.into()));
        self
    }

    /// Looks up the innermost pairing for `beta` and checks that its U side
    /// is not shadowed by a later pairing.
    fn pairs(&self, alpha: &str, beta: &str) -> bool {
        for (a, b) in self.0.iter().rev() {
            if b == beta || a == alpha {
                return a == alpha && b == beta;
            }
        }
        false
    }

    fn binds_u(&self, alpha: &str) -> bool {
        self.0.iter().any(|(a, _)| a == alpha)
    }
}

/// Whether `τ ◃▹ t` is derivable under `env`.
pub fn compat(env: &CompatEnv, tau: &UType, t: &LType) -> bool {
    match t {
        LType::Bang(s) => rel_bang(&mut env.clone(), tau, s),
        _ => false,
    }
}

fn rel_bang(env: &mut CompatEnv, tau: &UType, s: &LType) -> bool {
    match (s, tau) {
        (LType::Unit, UType::Unit) => true,
        (LType::Tensor(a, b), UType::Prod(x, y))
        | (LType::Plus(a, b), UType::Sum(x, y)) => rel_bang(env, x, a) && rel_bang(env, y, b),
        (LType::Lolli(a, b), UType::Fun(x, y)) => match (&**a, &**b) {
            (LType::Bang(a), LType::Bang(b)) => rel_bang(env, x, a) && rel_bang(env, y, b),
            _ => false,
        },
        // The lumped type may not mention U variables that are tied to an
        // L recursion variable; otherwise two τ would be related to one t.
        (LType::Lump(inner), _) => {
            alpha_eq_utype(inner, tau) && ftv_u(inner).iter().all(|a| !env.binds_u(a))
        }
        (LType::Bang(s1), _) | (LType::Boxed(s1), _) => rel_bang(env, tau, s1),
        (LType::Mu(beta, body), UType::Mu(alpha, tbody)) => {
            env.0.push((alpha.clone(), beta.clone()));
            let r = rel_bang(env, tbody, body);
            env.0.pop();
            r
        }
        (LType::Var(beta), UType::Var(alpha)) => env.pairs(alpha, beta),
        _ => false,
    }
}

fn not_in_image(t: &LType) -> TypeError {
    TypeErrorKind::NotInImage(t.clone()).into()
}

/// The unique `τ` with `τ ◃▹ t`.
pub fn recover_u(t: &LType) -> Result<UType, TypeError> {
    match t {
        LType::Bang(s) => recover_bang(&mut Vec::new(), s).ok_or_else(|| not_in_image(t)),
        _ => Err(not_in_image(t)),
    }
}

/// The unique `τ` with `τ ◃▹! s`, for closed `s`.
pub fn recover_u_bang(s: &LType) -> Result<UType, TypeError> {
    recover_bang(&mut Vec::new(), s).ok_or_else(|| not_in_image(s))
}

fn recover_bang(env: &mut Vec<(Name, Name)>, s: &LType) -> Option<UType> {
    Some(match s {
        LType::Unit => UType::Unit,
        LType::Tensor(a, b) => UType::prod(recover_bang(env, a)?, recover_bang(env, b)?),
        LType::Plus(a, b) => UType::sum(recover_bang(env, a)?, recover_bang(env, b)?),
        LType::Lolli(a, b) => match (&**a, &**b) {
            (LType::Bang(a), LType::Bang(b)) => UType::fun(recover_bang(env, a)?, recover_bang(env, b)?),
            _ => return None,
        },
        LType::Lump(inner) => {
            if ftv_u(inner).iter().any(|a| env.iter().any(|(x, _)| x == a)) {
                return None;
            }
            inner.clone()
        }
        LType::Bang(s1) | LType::Boxed(s1) => recover_bang(env, s1)?,
        LType::Mu(beta, body) => {
            let alpha = if ftv_u_in_l(body).contains(beta) { fresh_name(beta) } else { beta.clone() };
            env.push((alpha.clone(), beta.clone()));
            let r = recover_bang(env, body);
            env.pop();
            UType::mu(alpha, r?)
        }
        LType::Var(beta) => {
            let (alpha, _) = env.iter().rev().find(|(_, b)| b == beta)?;
            UType::Var(alpha.clone())
        }
        LType::EmptyBox => return None,
    })
}

fn shape(value: impl ToString, ty: &LType) -> TypeError {
    TypeErrorKind::ShapeMismatch { value: value.to_string(), ty: ty.to_string() }.into()
}

/// Converts a U value of type `recover_u(t)` to the related L value, which
/// is always a `share` form with its store captured inside.
pub fn u_to_l(v: &UExpr, t: &LType, supply: &mut LocSupply) -> Result<LExpr, TypeError> {
    let LType::Bang(s) = t else { return Err(not_in_image(t)) };
    let (st, w) = to_l_inner(v, s, supply)?;
    Ok(LExpr::share_with(st, w))
}

fn to_l_inner(v: &UExpr, s: &LType, supply: &mut LocSupply) -> Result<(Store, LExpr), TypeError> {
    match (s, v) {
        (LType::Unit, UExpr::Unit) => Ok((Store::new(), LExpr::Unit)),
        (LType::Tensor(a, b), UExpr::Pair(x, y)) => {
            let (s1, w1) = to_l_inner(x, a, supply)?;
            let (s2, w2) = to_l_inner(y, b, supply)?;
            let st = s1.join(&s2).expect("fresh locations are distinct");
            Ok((st, LExpr::pair(w1, w2)))
        }
        (LType::Plus(a, b), UExpr::Inj(side, _, x)) => {
            let (st, w) = to_l_inner(x, if *side == Side::Left { a } else { b }, supply)?;
            Ok((st, LExpr::inj(*side, s.clone(), w)))
        }
        (LType::Mu(beta, body), UExpr::Fold(_, x)) => {
            let (st, w) = to_l_inner(x, &unfold_ltype(beta, body), supply)?;
            Ok((st, LExpr::fold(s.clone(), w)))
        }
        (LType::Lump(_), _) => Ok((Store::new(), LExpr::lump_val(v.clone()))),
        (LType::Bang(s1), _) => {
            let (st, w) = to_l_inner(v, s1, supply)?;
            Ok((Store::new(), LExpr::share_with(st, w)))
        }
        (LType::Boxed(s1), _) => {
            let (inner, w) = to_l_inner(v, s1, supply)?;
            let l = supply.fresh();
            Ok((Store::singleton(l, Slot::Full(inner, w)), LExpr::Loc(l)))
        }
        (LType::Lolli(a, b), UExpr::Lam(..)) if matches!((&**a, &**b), (LType::Bang(_), LType::Bang(_))) => {
            let y = fresh_name("y");
            // λy:!a. unlump[!b] (LU { v (UL { share (lump[!a] y) }) })
            let arg = UExpr::ul(LExpr::share(LExpr::lump((**a).clone(), LExpr::var(y.clone()))));
            let body = LExpr::unlump((**b).clone(), LExpr::from_u(UExpr::app(v.clone(), arg)));
            Ok((Store::new(), LExpr::lam(y, (**a).clone(), body)))
        }
        _ => Err(shape(v, s)),
    }
}

/// Converts a closed L value of type `t` (a `share` form) to the related U
/// value.
pub fn l_to_u(v: &LExpr, t: &LType) -> Result<UExpr, TypeError> {
    let (LType::Bang(s), LExpr::Share(st, w)) = (t, v) else {
        return Err(shape(v, t));
    };
    to_u_inner(st, w, s)
}

fn to_u_inner(st: &Store, w: &LExpr, s: &LType) -> Result<UExpr, TypeError> {
    match (s, w) {
        (LType::Unit, LExpr::Unit) => Ok(UExpr::Unit),
        (LType::Tensor(a, b), LExpr::Pair(x, y)) => {
            let sx = st.restrict(&locations_of(x));
            let sy = st.restrict(&locations_of(y));
            Ok(UExpr::pair(to_u_inner(&sx, x, a)?, to_u_inner(&sy, y, b)?))
        }
        (LType::Plus(a, b), LExpr::Inj(side, _, x)) => {
            let tau = recover_u_bang(s)?;
            let inner = to_u_inner(st, x, if *side == Side::Left { a } else { b })?;
            Ok(UExpr::inj(*side, tau, inner))
        }
        (LType::Mu(beta, body), LExpr::Fold(_, x)) => {
            let tau = recover_u_bang(s)?;
            Ok(UExpr::fold(tau, to_u_inner(st, x, &unfold_ltype(beta, body))?))
        }
        (LType::Lump(_), LExpr::LumpVal(u)) => Ok((**u).clone()),
        (LType::Bang(s1), LExpr::Share(inner, x)) => to_u_inner(inner, x, s1),
        (LType::Boxed(s1), LExpr::Loc(l)) => match st.get(*l) {
            Some(Slot::Full(inner, x)) => to_u_inner(inner, x, s1),
            _ => Err(shape(w, s)),
        },
        (LType::Lolli(a, b), LExpr::Lam(..)) => {
            let (LType::Bang(a1), LType::Bang(_)) = (&**a, &**b) else {
                return Err(shape(w, s));
            };
            let tau_a = recover_u_bang(a1)?;
            let x = fresh_name("x");
            // λx:τa. UL { share (lump[!b] ((copy (share σ w)) (unlump[!a] (LU { x })))) }
            let f = LExpr::copy(LExpr::share_with(st.clone(), w.clone()));
            let arg = LExpr::unlump((**a).clone(), LExpr::from_u(UExpr::var(x.clone())));
            let body = LExpr::share(LExpr::lump((**b).clone(), LExpr::app(f, arg)));
            Ok(UExpr::lam(x, tau_a, UExpr::ul(body)))
        }
        _ => Err(shape(w, s)),
    }
}

/// Every `τ` related to `t` by some derivation, found by trying each rule
/// whose conclusion can match, without assuming the rules are disjoint.
/// Used as an oracle for determinism.
pub fn all_compatible(t: &LType) -> Vec<UType> {
    match t {
        LType::Bang(s) => {
            let mut out: Vec<UType> = Vec::new();
            for tau in search(&mut Vec::new(), s) {
                if !out.iter().any(|o| alpha_eq_utype(o, &tau)) {
                    out.push(tau);
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

fn search(env: &mut Vec<(Name, Name)>, s: &LType) -> Vec<UType> {
    let mut out = Vec::new();
    let pairs = |a: Vec<UType>, b: Vec<UType>, f: fn(UType, UType) -> UType| {
        let mut v = Vec::new();
        for x in &a {
            for y in &b {
                v.push(f(x.clone(), y.clone()));
            }
        }
        v
    };
    // Unit, product, sum, function rules.
    if *s == LType::Unit {
        out.push(UType::Unit);
    }
    if let LType::Tensor(a, b) = s {
        out.extend(pairs(search(env, a), search(env, b), UType::prod));
    }
    if let LType::Plus(a, b) = s {
        out.extend(pairs(search(env, a), search(env, b), UType::sum));
    }
    if let LType::Lolli(a, b) = s {
        if let (LType::Bang(a), LType::Bang(b)) = (&**a, &**b) {
            out.extend(pairs(search(env, a), search(env, b), UType::fun));
        }
    }
    // Lump rule.
    if let LType::Lump(inner) = s {
        if ftv_u(inner).iter().all(|a| !env.iter().any(|(x, _)| x == a)) {
            out.push(inner.clone());
        }
    }
    // Bang absorption and box transparency.
    if let LType::Bang(s1) = s {
        out.extend(search(env, s1));
    }
    if let LType::Boxed(s1) = s {
        out.extend(search(env, s1));
    }
    // Recursive types and variables.
    if let LType::Mu(beta, body) = s {
        let alpha = fresh_name("a");
        env.push((alpha.clone(), beta.clone()));
        let inner = search(env, body);
        env.pop();
        out.extend(inner.into_iter().map(|b| UType::mu(alpha.clone(), b)));
    }
    if let LType::Var(beta) = s {
        if let Some((alpha, _)) = env.iter().rev().find(|(_, b)| b == beta) {
            out.push(UType::Var(alpha.clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_lexpr, parse_ltype, parse_store, parse_uexpr, parse_utype};

    fn lt(s: &str) -> LType {
        parse_ltype(s).unwrap()
    }
    fn ut(s: &str) -> UType {
        parse_utype(s).unwrap()
    }

    #[test]
    fn compat_examples() {
        let e = CompatEnv::new();
        assert!(compat(&e, &UType::Unit, &lt("!1")));
        assert!(compat(&e, &UType::Unit, &lt("!!1")));
        assert!(compat(&e, &ut("unit * unit"), &lt("!(!1 * !1)")));
        assert!(!compat(&e, &UType::Unit, &lt("!(1 -o 1)")));
        assert!(!compat(&e, &UType::Unit, &lt("1")));
        for tau in ["unit", "unit -> unit", "forall a. a -> a", "mu a. unit + a"] {
            let t = ut(tau);
            assert!(compat(&e, &t, &LType::bang(LType::Lump(t.clone()))));
        }
        assert!(compat(&e, &ut("(unit -> unit) -> unit"), &lt("!(!(!1 -o !1) -o !1)")));
        assert!(compat(&e, &ut("mu a. unit + a"), &lt("!(mu b. !1 + Box b)")));
        assert!(compat(&CompatEnv::new().with("a", "b"), &ut("a"), &lt("!b")));
    }

    #[test]
    fn recover_examples() {
        assert_eq!(recover_u(&lt("!Lump(unit)")).unwrap(), UType::Unit);
        assert_eq!(recover_u(&lt("!(!1 * !Lump(unit))")).unwrap(), ut("unit * unit"));
        assert_eq!(recover_u(&lt("1")).unwrap_err().code(), "E016");
        assert_eq!(recover_u(&lt("!(1 -o 1)")).unwrap_err().code(), "E016");
        let r = recover_u(&lt("!(mu b. !1 + Box b)")).unwrap();
        assert!(alpha_eq_utype(&r, &ut("mu a. unit + a")));
    }

    #[test]
    fn variables_of_lumps_are_not_tied_to_recursion() {
        let t = lt("!(mu b. Lump(b))");
        let r = recover_u(&t).unwrap();
        assert!(compat(&CompatEnv::new(), &r, &t));
        assert!(!compat(&CompatEnv::new(), &ut("mu b. b"), &t));
        assert_eq!(all_compatible(&t).len(), 1);
    }

    #[test]
    fn conversions_examples() {
        let mut sup = LocSupply::starting_at(0);
        let v = u_to_l(&UExpr::Unit, &lt("!1"), &mut sup).unwrap();
        assert_eq!(v.to_string(), "share ()");
        let f = parse_uexpr("fun (x : unit) -> x").unwrap();
        assert_eq!(u_to_l(&f, &lt("!Lump(unit -> unit)"), &mut sup).unwrap(), LExpr::share(LExpr::lump_val(f)));
        let inl = parse_uexpr("inl[unit + unit] ()").unwrap();
        let w = u_to_l(&inl, &lt("!(!1 + !1)"), &mut sup).unwrap();
        assert_eq!(w.to_string(), "share inl[!1 + !1] share ()");
        assert_eq!(l_to_u(&w, &lt("!(!1 + !1)")).unwrap(), inl);
        assert_eq!(l_to_u(&parse_lexpr("share ()").unwrap(), &lt("!1")).unwrap(), UExpr::Unit);
        let st = parse_store("[#0 := ([] ; share ())]").unwrap();
        let boxed = LExpr::share_with(st, LExpr::Loc(Location(0)));
        assert_eq!(l_to_u(&boxed, &lt("!(Box !1)")).unwrap(), UExpr::Unit);
    }

    #[test]
    fn box_conversion_allocates() {
        let mut sup = LocSupply::starting_at(5);
        let v = parse_uexpr("((), ())").unwrap();
        let t = lt("!(Box !1 * Box 1)");
        let w = u_to_l(&v, &t, &mut sup).unwrap();
        let LExpr::Share(st, _) = &w else { panic!() };
        assert_eq!(st.len(), 2);
        assert_eq!(l_to_u(&w, &t).unwrap(), v);
    }

    #[test]
    fn shape_mismatch() {
        let mut sup = LocSupply::starting_at(0);
        assert_eq!(u_to_l(&UExpr::Unit, &lt("!(!1 * !1)"), &mut sup).unwrap_err().code(), "E020");
    }
}
