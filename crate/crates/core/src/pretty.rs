//! Concrete-syntax printing. Output re-parses to an alpha-equivalent AST.

use std::collections::HashMap;
use std::fmt::{self, Write};

use crate::ast::*;
use crate::subst::{alpha_eq_ltype, alpha_eq_utype, ftv_l, ftv_u};

/// A named, possibly parameterised, U type abbreviation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UAbbrev {
    pub name: Name,
    pub params: Vec<Name>,
    pub body: UType,
}

/// A named, possibly parameterised, L type abbreviation. Parameters
/// range over L types.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LAbbrev {
    pub name: Name,
    pub params: Vec<Name>,
    pub body: LType,
}

/// Type abbreviations in definition order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Abbrevs {
    pub u: Vec<UAbbrev>,
    pub l: Vec<LAbbrev>,
}

impl Abbrevs {
    pub fn find_u(&self, name: &str) -> Option<&UAbbrev> {
        self.u.iter().rev().find(|a| a.name == name)
    }
    pub fn find_l(&self, name: &str) -> Option<&LAbbrev> {
        self.l.iter().rev().find(|a| a.name == name)
    }
}

/// Printer state. With abbreviations attached, printed types are folded
/// back into abbreviation applications where they match.
#[derive(Clone, Copy, Default)]
pub struct Printer<'a> {
    abbrevs: Option<&'a Abbrevs>,
}

const TY_TOP: u8 = 0;
const TY_SUM: u8 = 2;
const TY_PROD: u8 = 3;
const TY_UNARY: u8 = 4;
const TY_ATOM: u8 = 5;

const EX_TOP: u8 = 0;
const EX_APP: u8 = 1;
const EX_ITEM: u8 = 2;
const EX_ATOM: u8 = 3;

fn paren(out: &mut String, cond: bool, f: impl FnOnce(&mut String)) {
    if cond {
        out.push('(');
    }
    f(out);
    if cond {
        out.push(')');
    }
}

impl<'a> Printer<'a> {
    pub fn new() -> Self {
        Printer { abbrevs: None }
    }

    pub fn with_abbrevs(abbrevs: &'a Abbrevs) -> Self {
        Printer { abbrevs: Some(abbrevs) }
    }

    pub fn utype(&self, t: &UType) -> String {
        let mut s = String::new();
        self.ut(&mut s, t, TY_TOP);
        s
    }

    pub fn ltype(&self, t: &LType) -> String {
        let mut s = String::new();
        self.lt(&mut s, t, TY_TOP);
        s
    }

    pub fn uexpr(&self, e: &UExpr) -> String {
        let mut s = String::new();
        self.u(&mut s, e, EX_TOP);
        s
    }

    pub fn lexpr(&self, e: &LExpr) -> String {
        let mut s = String::new();
        self.l(&mut s, e, EX_TOP);
        s
    }

    pub fn store(&self, st: &Store) -> String {
        let mut s = String::new();
        self.st(&mut s, st);
        s
    }

    fn resugar_u(&self, t: &UType) -> Option<String> {
        let ab = self.abbrevs?;
        for a in ab.u.iter().rev() {
            if let Some(args) = match_utype(&a.body, &a.params, t) {
                let mut s = a.name.clone();
                if !a.params.is_empty() {
                    s.push('(');
                    for (i, p) in a.params.iter().enumerate() {
                        if i > 0 {
                            s.push_str(", ");
                        }
                        s.push_str(&self.utype(&args[p]));
                    }
                    s.push(')');
                }
                return Some(s);
            }
        }
        None
    }

    fn resugar_l(&self, t: &LType) -> Option<String> {
        let ab = self.abbrevs?;
        for a in ab.l.iter().rev() {
            if let Some(args) = match_ltype(&a.body, &a.params, t) {
                let mut s = a.name.clone();
                if !a.params.is_empty() {
                    s.push('(');
                    for (i, p) in a.params.iter().enumerate() {
                        if i > 0 {
                            s.push_str(", ");
                        }
                        s.push_str(&self.ltype(&args[p]));
                    }
                    s.push(')');
                }
                return Some(s);
            }
        }
        None
    }

    fn ut(&self, out: &mut String, t: &UType, prec: u8) {
        if !matches!(t, UType::Var(_) | UType::Unit) {
            if let Some(s) = self.resugar_u(t) {
                out.push_str(&s);
                return;
            }
        }
        match t {
            UType::Var(a) => out.push_str(a),
            UType::Unit => out.push_str("unit"),
            UType::Fun(a, b) => paren(out, prec > TY_TOP, |o| {
                self.ut(o, a, TY_UNARY);
                o.push_str(" -> ");
                self.ut(o, b, if matches!(**b, UType::Fun(..)) { TY_TOP } else { TY_UNARY });
            }),
            UType::Sum(a, b) => paren(out, prec > TY_SUM, |o| {
                self.ut(o, a, TY_PROD);
                o.push_str(" + ");
                self.ut(o, b, TY_SUM);
            }),
            UType::Prod(a, b) => paren(out, prec > TY_PROD, |o| {
                self.ut(o, a, TY_UNARY);
                o.push_str(" * ");
                self.ut(o, b, TY_PROD);
            }),
            UType::Mu(a, b) | UType::Forall(a, b) => paren(out, prec > TY_TOP, |o| {
                o.push_str(if matches!(t, UType::Mu(..)) { "mu " } else { "forall " });
                o.push_str(a);
                o.push_str(". ");
                self.ut(o, b, TY_TOP);
            }),
        }
    }

    fn lt(&self, out: &mut String, t: &LType, prec: u8) {
        if !matches!(t, LType::Var(_) | LType::Unit | LType::EmptyBox) {
            if let Some(s) = self.resugar_l(t) {
                out.push_str(&s);
                return;
            }
        }
        match t {
            LType::Var(a) => out.push_str(a),
            LType::Unit => out.push('1'),
            LType::EmptyBox => out.push_str("Box0"),
            LType::Lump(u) => {
                out.push_str("Lump(");
                self.ut(out, u, TY_TOP);
                out.push(')');
            }
            LType::Lolli(a, b) => paren(out, prec > TY_TOP, |o| {
                self.lt(o, a, TY_UNARY);
                o.push_str(" -o ");
                self.lt(o, b, if matches!(**b, LType::Lolli(..)) { TY_TOP } else { TY_UNARY });
            }),
            LType::Plus(a, b) => paren(out, prec > TY_SUM, |o| {
                self.lt(o, a, TY_PROD);
                o.push_str(" + ");
                self.lt(o, b, TY_SUM);
            }),
            LType::Tensor(a, b) => paren(out, prec > TY_PROD, |o| {
                self.lt(o, a, TY_UNARY);
                o.push_str(" * ");
                self.lt(o, b, TY_PROD);
            }),
            LType::Bang(a) => {
                out.push('!');
                self.lt(out, a, TY_UNARY);
            }
            LType::Boxed(a) => paren(out, prec > TY_UNARY, |o| {
                o.push_str("Box ");
                self.lt(o, a, TY_ATOM);
            }),
            LType::Mu(a, b) => paren(out, prec > TY_TOP, |o| {
                o.push_str("mu ");
                o.push_str(a);
                o.push_str(". ");
                self.lt(o, b, TY_TOP);
            }),
        }
    }

    fn st(&self, out: &mut String, st: &Store) {
        out.push('[');
        for (i, (l, slot)) in st.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{l} := ");
            match slot {
                Slot::Empty => out.push_str("empty"),
                Slot::Full(inner, v) => {
                    out.push('(');
                    self.st(out, inner);
                    out.push_str(" ; ");
                    self.l(out, v, EX_TOP);
                    out.push(')');
                }
            }
        }
        out.push(']');
    }

    fn u(&self, out: &mut String, e: &UExpr, prec: u8) {
        match e {
            UExpr::Var(x) => out.push_str(x),
            UExpr::Unit => out.push_str("()"),
            UExpr::Pair(a, b) => {
                out.push('(');
                self.u(out, a, EX_TOP);
                out.push_str(", ");
                self.u(out, b, EX_TOP);
                out.push(')');
            }
            UExpr::Fst(a) | UExpr::Snd(a) | UExpr::Unfold(a) => paren(out, prec > EX_ITEM, |o| {
                o.push_str(match e {
                    UExpr::Fst(_) => "fst ",
                    UExpr::Snd(_) => "snd ",
                    _ => "unfold ",
                });
                self.u(o, a, EX_ITEM);
            }),
            UExpr::Inj(side, t, a) => paren(out, prec > EX_ITEM, |o| {
                o.push_str(side.keyword());
                o.push('[');
                self.ut(o, t, TY_TOP);
                o.push_str("] ");
                self.u(o, a, EX_ITEM);
            }),
            UExpr::Fold(t, a) => paren(out, prec > EX_ITEM, |o| {
                o.push_str("fold[");
                self.ut(o, t, TY_TOP);
                o.push_str("] ");
                self.u(o, a, EX_ITEM);
            }),
            UExpr::TyApp(a, t) => paren(out, prec > EX_ITEM, |o| {
                self.u(o, a, EX_ATOM);
                o.push('[');
                self.ut(o, t, TY_TOP);
                o.push(']');
            }),
            UExpr::App(f, a) => paren(out, prec > EX_APP, |o| {
                self.u(o, f, EX_APP);
                o.push(' ');
                self.u(o, a, EX_ITEM);
            }),
            UExpr::Lam(x, t, b) => paren(out, prec > EX_TOP, |o| {
                let _ = write!(o, "fun ({x} : ");
                self.ut(o, t, TY_TOP);
                o.push_str(") -> ");
                self.u(o, b, EX_TOP);
            }),
            UExpr::TyAbs(a, b) => paren(out, prec > EX_TOP, |o| {
                let _ = write!(o, "Fun {a} -> ");
                self.u(o, b, EX_TOP);
            }),
            UExpr::LetUnit(a, b) => paren(out, prec > EX_TOP, |o| {
                o.push_str("let () = ");
                self.u(o, a, EX_TOP);
                o.push_str(" in ");
                self.u(o, b, EX_TOP);
            }),
            UExpr::Case(e0, x, l, y, r) => paren(out, prec > EX_TOP, |o| {
                o.push_str("case ");
                self.u(o, e0, EX_TOP);
                let _ = write!(o, " of {{ inl {x} -> ");
                self.u(o, l, EX_TOP);
                let _ = write!(o, " | inr {y} -> ");
                self.u(o, r, EX_TOP);
                o.push_str(" }");
            }),
            UExpr::Boundary(st, body) => {
                o_boundary(self, out, st, body);
            }
        }
    }

    fn l(&self, out: &mut String, e: &LExpr, prec: u8) {
        match e {
            LExpr::Var(x) => out.push_str(x),
            LExpr::Unit => out.push_str("()"),
            LExpr::Loc(l) => {
                let _ = write!(out, "{l}");
            }
            LExpr::Pair(a, b) => {
                out.push('(');
                self.l(out, a, EX_TOP);
                out.push_str(", ");
                self.l(out, b, EX_TOP);
                out.push(')');
            }
            LExpr::LumpVal(u) => {
                out.push_str("[| ");
                self.u(out, u, EX_TOP);
                out.push_str(" |]");
            }
            LExpr::FromU(u) => {
                out.push_str("LU { ");
                self.u(out, u, EX_TOP);
                out.push_str(" }");
            }
            LExpr::Phase(n, a) => {
                let _ = write!(out, "phase {n} {{ ");
                self.l(out, a, EX_TOP);
                out.push_str(" }");
            }
            LExpr::Unfold(a)
            | LExpr::Copy(a)
            | LExpr::New(a)
            | LExpr::Free(a)
            | LExpr::BoxUp(a)
            | LExpr::Unbox(a) => paren(out, prec > EX_ITEM, |o| {
                o.push_str(match e {
                    LExpr::Unfold(_) => "unfold ",
                    LExpr::Copy(_) => "copy ",
                    LExpr::New(_) => "new ",
                    LExpr::Free(_) => "free ",
                    LExpr::BoxUp(_) => "box ",
                    _ => "unbox ",
                });
                self.l(o, a, EX_ITEM);
            }),
            LExpr::Share(st, a) => paren(out, prec > EX_ITEM, |o| {
                o.push_str("share ");
                if !st.is_empty() {
                    self.st(o, st);
                    o.push(' ');
                }
                self.l(o, a, EX_ITEM);
            }),
            LExpr::Inj(_, t, a) | LExpr::Fold(t, a) | LExpr::Lump(t, a) | LExpr::Unlump(t, a) => {
                paren(out, prec > EX_ITEM, |o| {
                    o.push_str(match e {
                        LExpr::Inj(s, _, _) => s.keyword(),
                        LExpr::Fold(..) => "fold",
                        LExpr::Lump(..) => "lump",
                        _ => "unlump",
                    });
                    o.push('[');
                    self.lt(o, t, TY_TOP);
                    o.push_str("] ");
                    self.l(o, a, EX_ITEM);
                })
            }
            LExpr::App(f, a) => paren(out, prec > EX_APP, |o| {
                self.l(o, f, EX_APP);
                o.push(' ');
                self.l(o, a, EX_ITEM);
            }),
            LExpr::Lam(x, t, b) => paren(out, prec > EX_TOP, |o| {
                let _ = write!(o, "fun ({x} : ");
                self.lt(o, t, TY_TOP);
                o.push_str(") -o ");
                self.l(o, b, EX_TOP);
            }),
            LExpr::LetUnit(a, b) => paren(out, prec > EX_TOP, |o| {
                o.push_str("let () = ");
                self.l(o, a, EX_TOP);
                o.push_str(" in ");
                self.l(o, b, EX_TOP);
            }),
            LExpr::LetPair(x, y, a, b) => paren(out, prec > EX_TOP, |o| {
                let _ = write!(o, "let ({x}, {y}) = ");
                self.l(o, a, EX_TOP);
                o.push_str(" in ");
                self.l(o, b, EX_TOP);
            }),
            LExpr::Case(e0, x, l, y, r) => paren(out, prec > EX_TOP, |o| {
                o.push_str("case ");
                self.l(o, e0, EX_TOP);
                let _ = write!(o, " of {{ inl {x} -> ");
                self.l(o, l, EX_TOP);
                let _ = write!(o, " | inr {y} -> ");
                self.l(o, r, EX_TOP);
                o.push_str(" }");
            }),
        }
    }
}

fn o_boundary(p: &Printer<'_>, out: &mut String, st: &Store, body: &LExpr) {
    out.push_str("UL ");
    if !st.is_empty() {
        p.st(out, st);
        out.push(' ');
    }
    out.push_str("{ ");
    p.l(out, body, EX_TOP);
    out.push_str(" }");
}

/// Matches `t` against an abbreviation body whose free variables listed in
/// `params` act as pattern variables.
pub fn match_utype(pat: &UType, params: &[Name], t: &UType) -> Option<HashMap<Name, UType>> {
    let mut m = UMatch { params, binds: HashMap::new(), env: Vec::new() };
    if m.go(pat, t) && params.iter().all(|p| m.binds.contains_key(p)) {
        Some(m.binds)
    } else {
        None
    }
}

struct UMatch<'p> {
    params: &'p [Name],
    binds: HashMap<Name, UType>,
    env: Vec<(Name, Name)>,
}

impl UMatch<'_> {
    fn go(&mut self, p: &UType, t: &UType) -> bool {
        match (p, t) {
            (UType::Var(a), _) if self.params.contains(a) && !self.env.iter().any(|(x, _)| x == a) => {
                if ftv_u(t).iter().any(|v| self.env.iter().any(|(_, y)| y == v)) {
                    return false;
                }
                match self.binds.get(a) {
                    Some(prev) => alpha_eq_utype(prev, t),
                    None => {
                        self.binds.insert(a.clone(), t.clone());
                        true
                    }
                }
            }
            (UType::Var(a), UType::Var(b)) => {
                for (x, y) in self.env.iter().rev() {
                    if x == a || y == b {
                        return x == a && y == b;
                    }
                }
                a == b
            }
            (UType::Unit, UType::Unit) => true,
            (UType::Prod(a1, a2), UType::Prod(b1, b2))
            | (UType::Sum(a1, a2), UType::Sum(b1, b2))
            | (UType::Fun(a1, a2), UType::Fun(b1, b2)) => self.go(a1, b1) && self.go(a2, b2),
            (UType::Mu(x, a), UType::Mu(y, b)) | (UType::Forall(x, a), UType::Forall(y, b)) => {
                self.env.push((x.clone(), y.clone()));
                let r = self.go(a, b);
                self.env.pop();
                r
            }
            _ => false,
        }
    }
}

pub fn match_ltype(pat: &LType, params: &[Name], t: &LType) -> Option<HashMap<Name, LType>> {
    let mut m = LMatch { params, binds: HashMap::new(), env: Vec::new() };
    if m.go(pat, t) && params.iter().all(|p| m.binds.contains_key(p)) {
        Some(m.binds)
    } else {
        None
    }
}

struct LMatch<'p> {
    params: &'p [Name],
    binds: HashMap<Name, LType>,
    env: Vec<(Name, Name)>,
}

impl LMatch<'_> {
    fn go(&mut self, p: &LType, t: &LType) -> bool {
        match (p, t) {
            (LType::Var(a), _) if self.params.contains(a) && !self.env.iter().any(|(x, _)| x == a) => {
                if ftv_l(t).iter().any(|v| self.env.iter().any(|(_, y)| y == v)) {
                    return false;
                }
                match self.binds.get(a) {
                    Some(prev) => alpha_eq_ltype(prev, t),
                    None => {
                        self.binds.insert(a.clone(), t.clone());
                        true
                    }
                }
            }
            (LType::Var(a), LType::Var(b)) => {
                for (x, y) in self.env.iter().rev() {
                    if x == a || y == b {
                        return x == a && y == b;
                    }
                }
                a == b
            }
            (LType::Unit, LType::Unit) | (LType::EmptyBox, LType::EmptyBox) => true,
            (LType::Lump(a), LType::Lump(b)) => alpha_eq_utype(a, b),
            (LType::Tensor(a1, a2), LType::Tensor(b1, b2))
            | (LType::Plus(a1, a2), LType::Plus(b1, b2))
            | (LType::Lolli(a1, a2), LType::Lolli(b1, b2)) => self.go(a1, b1) && self.go(a2, b2),
            (LType::Bang(a), LType::Bang(b)) | (LType::Boxed(a), LType::Boxed(b)) => self.go(a, b),
            (LType::Mu(x, a), LType::Mu(y, b)) => {
                self.env.push((x.clone(), y.clone()));
                let r = self.go(a, b);
                self.env.pop();
                r
            }
            _ => false,
        }
    }
}

impl fmt::Display for UType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::new().utype(self))
    }
}

impl fmt::Display for LType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::new().ltype(self))
    }
}

impl fmt::Display for UExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::new().uexpr(self))
    }
}

impl fmt::Display for LExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::new().lexpr(self))
    }
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::new().store(self))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} ; {}>", self.store, self.expr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_forms() {
        assert_eq!(UExpr::Unit.to_string(), "()");
        assert_eq!(LType::lolli(LType::var("t1"), LType::var("t2")).to_string(), "t1 -o t2");
        let t = LType::tensor(LType::boxed(LType::var("t")), LType::var("t"));
        assert_eq!(LType::lolli(t.clone(), t).to_string(), "(Box t * t) -o (Box t * t)");
        assert_eq!(
            UType::fun(UType::fun(UType::Unit, UType::Unit), UType::Unit).to_string(),
            "(unit -> unit) -> unit"
        );
    }

    #[test]
    fn resugars_parameterised_abbreviations() {
        let body = LType::mu(
            "a",
            LType::plus(LType::Unit, LType::boxed(LType::tensor(LType::var("t"), LType::var("a")))),
        );
        let ab = Abbrevs {
            u: vec![],
            l: vec![LAbbrev { name: "LinList".into(), params: vec!["t".into()], body: body.clone() }],
        };
        let inst = crate::subst::subst_ltype(&body, "t", &LType::bang(LType::Unit));
        let p = Printer::with_abbrevs(&ab);
        assert_eq!(p.ltype(&LType::lolli(inst.clone(), inst)), "LinList(!1) -o LinList(!1)");
    }
}
