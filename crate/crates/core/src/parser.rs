//! Concrete syntax for `.ul` files: lexer, recursive-descent parser with
//! sugar expansion, and elaboration of a file into one closed program.
//!
//! Which language a term belongs to is decided by boundary nesting: the
//! top level and `def` bodies are U, `ldef` bodies and the inside of
//! `UL { .. }` are L, and `LU { .. }` switches back to U.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ast::*;
use crate::pretty::{Abbrevs, LAbbrev, Printer, UAbbrev};
use crate::subst::{subst_l, subst_ltype, subst_u, subst_utype, Val};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("parse error at {line}:{col}: expected {}, found {found}", .expected.join(" or "))]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ElabError {
    #[error("unbound name `{0}`")]
    UnboundName(Name),
    #[error("U definition `{0}` used inside L code; write `LU {{ {0} }}` or lift it with `unlump`")]
    UDefInL(Name),
    #[error("L definition `{0}` used inside U code; wrap it in a `UL {{ .. }}` boundary")]
    LDefInU(Name),
    #[error("the file has no `main` definition")]
    NoMain,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Type(UAbbrev),
    LType(LAbbrev),
    Def(Name, UExpr),
    LDef(Name, LExpr),
    Main(UExpr),
}

/// A parsed file: items in source order, with sugar and type
/// abbreviations already expanded inside each body.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceFile {
    pub items: Vec<Item>,
    pub abbrevs: Abbrevs,
}

/// A definition after elaboration: closed, with earlier definitions
/// inlined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Elaborated {
    U(UExpr),
    L(LExpr),
}

impl SourceFile {
    pub fn main(&self) -> Option<&UExpr> {
        self.items.iter().rev().find_map(|i| match i {
            Item::Main(e) => Some(e),
            _ => None,
        })
    }

    /// Prints the file back in concrete syntax (types fully expanded).
    pub fn pretty(&self) -> String {
        let p = Printer::new();
        let mut out = String::new();
        for item in &self.items {
            match item {
                Item::Type(a) => {
                    out.push_str(&format!("type {}{} = {};\n", a.name, params(&a.params), p.utype(&a.body)))
                }
                Item::LType(a) => {
                    out.push_str(&format!("ltype {}{} = {};\n", a.name, params(&a.params), p.ltype(&a.body)))
                }
                Item::Def(n, e) => out.push_str(&format!("def {n} = {};\n", p.uexpr(e))),
                Item::LDef(n, e) => out.push_str(&format!("ldef {n} = {};\n", p.lexpr(e))),
                Item::Main(e) => out.push_str(&format!("main = {};\n", p.uexpr(e))),
            }
        }
        out
    }
}

fn params(ps: &[Name]) -> String {
    if ps.is_empty() {
        String::new()
    } else {
        format!("({})", ps.join(", "))
    }
}

/// Elaborates every definition (and `main`, under the name `main`) in
/// order, inlining earlier definitions.
pub fn elaborate_items(file: &SourceFile) -> Result<Vec<(Name, Elaborated)>, ElabError> {
    let mut done: Vec<(Name, Elaborated)> = Vec::new();
    for item in &file.items {
        let (name, body) = match item {
            Item::Def(n, e) => (n.clone(), Elaborated::U(e.clone())),
            Item::LDef(n, e) => (n.clone(), Elaborated::L(e.clone())),
            Item::Main(e) => ("main".to_string(), Elaborated::U(e.clone())),
            Item::Type(_) | Item::LType(_) => continue,
        };
        let body = inline_defs(body, &done)?;
        done.push((name, body));
    }
    Ok(done)
}

/// The closed program denoted by the file's `main`.
pub fn elaborate(file: &SourceFile) -> Result<UExpr, ElabError> {
    let items = elaborate_items(file)?;
    match items.into_iter().rev().find(|(n, _)| n == "main") {
        Some((_, Elaborated::U(e))) => Ok(e),
        _ => Err(ElabError::NoMain),
    }
}

fn inline_defs(body: Elaborated, defs: &[(Name, Elaborated)]) -> Result<Elaborated, ElabError> {
    let mut body = body;
    for (name, def) in defs.iter().rev() {
        let val = match def {
            Elaborated::U(u) => Val::U(u),
            Elaborated::L(l) => Val::L(l),
        };
        body = match body {
            Elaborated::U(e) => Elaborated::U(subst_u(&e, name, val)),
            Elaborated::L(e) => Elaborated::L(subst_l(&e, name, val)),
        };
    }
    let mut free_u = BTreeSet::new();
    let mut free_l = BTreeSet::new();
    match &body {
        Elaborated::U(e) => sorted_free_u(e, &mut Vec::new(), &mut free_u, &mut free_l),
        Elaborated::L(e) => sorted_free_l(e, &mut Vec::new(), &mut free_u, &mut free_l),
    }
    let is_def = |x: &Name, want_u: bool| {
        defs.iter().rev().find(|(n, _)| n == x).map(|(_, d)| matches!(d, Elaborated::U(_)) == want_u)
    };
    // Names that are free only because they refer to a definition of the
    // other language get a targeted message; the rest are left to the
    // type checker, which reports them with context.
    for x in &free_l {
        if is_def(x, true) == Some(true) {
            return Err(ElabError::UDefInL(x.clone()));
        }
    }
    for x in &free_u {
        if is_def(x, false) == Some(true) {
            return Err(ElabError::LDefInU(x.clone()));
        }
    }
    Ok(body)
}

fn sorted_free_u(e: &UExpr, bound: &mut Vec<Name>, fu: &mut BTreeSet<Name>, fl: &mut BTreeSet<Name>) {
    match e {
        UExpr::Var(x) => {
            if !bound.contains(x) {
                fu.insert(x.clone());
            }
        }
        UExpr::Lam(x, _, b) => {
            bound.push(x.clone());
            sorted_free_u(b, bound, fu, fl);
            bound.pop();
        }
        UExpr::Case(e0, x, l, y, r) => {
            sorted_free_u(e0, bound, fu, fl);
            bound.push(x.clone());
            sorted_free_u(l, bound, fu, fl);
            bound.pop();
            bound.push(y.clone());
            sorted_free_u(r, bound, fu, fl);
            bound.pop();
        }
        UExpr::Unit => {}
        UExpr::Pair(a, b) | UExpr::LetUnit(a, b) | UExpr::App(a, b) => {
            sorted_free_u(a, bound, fu, fl);
            sorted_free_u(b, bound, fu, fl);
        }
        UExpr::Fst(a)
        | UExpr::Snd(a)
        | UExpr::Inj(_, _, a)
        | UExpr::Fold(_, a)
        | UExpr::Unfold(a)
        | UExpr::TyAbs(_, a)
        | UExpr::TyApp(a, _) => sorted_free_u(a, bound, fu, fl),
        UExpr::Boundary(_, b) => sorted_free_l(b, bound, fu, fl),
    }
}

fn sorted_free_l(e: &LExpr, bound: &mut Vec<Name>, fu: &mut BTreeSet<Name>, fl: &mut BTreeSet<Name>) {
    match e {
        LExpr::Var(x) => {
            if !bound.contains(x) {
                fl.insert(x.clone());
            }
        }
        LExpr::Lam(x, _, b) => {
            bound.push(x.clone());
            sorted_free_l(b, bound, fu, fl);
            bound.pop();
        }
        LExpr::LetPair(x, y, a, b) => {
            sorted_free_l(a, bound, fu, fl);
            bound.push(x.clone());
            bound.push(y.clone());
            sorted_free_l(b, bound, fu, fl);
            bound.truncate(bound.len() - 2);
        }
        LExpr::Case(e0, x, l, y, r) => {
            sorted_free_l(e0, bound, fu, fl);
            bound.push(x.clone());
            sorted_free_l(l, bound, fu, fl);
            bound.pop();
            bound.push(y.clone());
            sorted_free_l(r, bound, fu, fl);
            bound.pop();
        }
        LExpr::Unit | LExpr::Loc(_) => {}
        LExpr::Pair(a, b) | LExpr::LetUnit(a, b) | LExpr::App(a, b) => {
            sorted_free_l(a, bound, fu, fl);
            sorted_free_l(b, bound, fu, fl);
        }
        LExpr::Inj(_, _, a)
        | LExpr::Fold(_, a)
        | LExpr::Unfold(a)
        | LExpr::Share(_, a)
        | LExpr::Copy(a)
        | LExpr::New(a)
        | LExpr::Free(a)
        | LExpr::BoxUp(a)
        | LExpr::Unbox(a)
        | LExpr::Lump(_, a)
        | LExpr::Unlump(_, a)
        | LExpr::Phase(_, a) => sorted_free_l(a, bound, fu, fl),
        LExpr::LumpVal(u) | LExpr::FromU(u) => sorted_free_u(u, bound, fu, fl),
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Loc(u64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Loc(n) => write!(f, "`#{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "[|", "|]", ":=", "->", "-o", "(", ")", "[", "]", "{", "}", ",", ":", ";", "=", "*", "+", ".", "|",
    "@", "!",
];

const KEYWORDS: &[&str] = &[
    "type", "ltype", "def", "ldef", "main", "fun", "Fun", "let", "in", "case", "of", "inl", "inr",
    "fold", "unfold", "fst", "snd", "UL", "LU", "share", "copy", "new", "free", "box", "unbox",
    "lump", "unlump", "unit", "mu", "forall", "Box", "Box0", "Lump", "fix", "phase", "empty",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '$'
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, found: String| ParseError { line, col, expected: vec!["a token".into()], found };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if is_ident_start(c) {
            let s = i;
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
            let word: String = chars[s..i].iter().collect();
            col += i - s;
            out.push(Spanned { tok: Tok::Ident(word), line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() || (c == '#' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let is_loc = c == '#';
            let s = if is_loc { i + 1 } else { i };
            let mut j = s;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let digits: String = chars[s..j].iter().collect();
            let n: u64 = digits
                .parse()
                .map_err(|_| err(start_line, start_col, format!("`{digits}`")))?;
            col += j - i;
            i = j;
            let tok = if is_loc { Tok::Loc(n) } else { Tok::Int(n) };
            out.push(Spanned { tok, line: start_line, col: start_col });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = SYMBOLS.iter().find(|s| {
            rest.starts_with(**s)
                && !(**s == "-o" && chars.get(i + 2).is_some_and(|c| is_ident_continue(*c)))
        });
        match sym {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Spanned { tok: Tok::Sym(s), line: start_line, col: start_col });
            }
            None => return Err(err(start_line, start_col, format!("`{c}`"))),
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

/// Parses a whole `.ul` file.
pub fn parse(src: &str) -> Result<SourceFile, ParseError> {
    let mut p = Parser::new(src)?;
    p.file()
}

/// Parses a single U expression (no definitions in scope).
pub fn parse_uexpr(src: &str) -> Result<UExpr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.uexpr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_lexpr(src: &str) -> Result<LExpr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.lexpr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_utype(src: &str) -> Result<UType, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.utype()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_ltype(src: &str) -> Result<LType, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.ltype()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parses an L type with the given abbreviations in scope.
pub fn parse_ltype_with(src: &str, abbrevs: &Abbrevs) -> Result<LType, ParseError> {
    let mut p = Parser::new(src)?;
    p.abbrevs = abbrevs.clone();
    let t = p.ltype()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_store(src: &str) -> Result<Store, ParseError> {
    let mut p = Parser::new(src)?;
    let s = p.store()?;
    p.expect_eof()?;
    Ok(s)
}

/// Binding pattern of the L sugar: `x`, `(x, y)`, and `p@l`.
enum LPat {
    Var(Name),
    Pair(Name, Name),
    At(Box<LPat>, Name),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    abbrevs: Abbrevs,
    u_binders: Vec<Name>,
    l_binders: Vec<Name>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            abbrevs: Abbrevs::default(),
            u_binders: Vec::new(),
            l_binders: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let sp = &self.toks[self.pos];
        Err(ParseError {
            line: sp.line,
            col: sp.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: sp.tok.to_string(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&[&format!("`{s}`")])
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            self.error(&[&format!("`{s}`")])
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error(&["identifier"]),
        }
    }

    // -- top level --------------------------------------------------------

    fn file(&mut self) -> PResult<SourceFile> {
        let mut items = Vec::new();
        loop {
            if matches!(self.peek(), Tok::Eof) {
                break;
            }
            if self.eat_kw("type") {
                let (name, params) = self.abbrev_head()?;
                self.u_binders.extend(params.iter().cloned());
                let body = self.utype();
                self.u_binders.truncate(self.u_binders.len() - params.len());
                let ab = UAbbrev { name, params, body: body? };
                self.expect_sym(";")?;
                self.abbrevs.u.push(ab.clone());
                items.push(Item::Type(ab));
            } else if self.eat_kw("ltype") {
                let (name, params) = self.abbrev_head()?;
                self.l_binders.extend(params.iter().cloned());
                let body = self.ltype();
                self.l_binders.truncate(self.l_binders.len() - params.len());
                let ab = LAbbrev { name, params, body: body? };
                self.expect_sym(";")?;
                self.abbrevs.l.push(ab.clone());
                items.push(Item::LType(ab));
            } else if self.eat_kw("def") {
                let name = self.ident()?;
                self.expect_sym("=")?;
                let e = self.uexpr()?;
                self.expect_sym(";")?;
                items.push(Item::Def(name, e));
            } else if self.eat_kw("ldef") {
                let name = self.ident()?;
                self.expect_sym("=")?;
                let e = self.lexpr()?;
                self.expect_sym(";")?;
                items.push(Item::LDef(name, e));
            } else if self.eat_kw("main") {
                self.expect_sym("=")?;
                let e = self.uexpr()?;
                self.expect_sym(";")?;
                items.push(Item::Main(e));
            } else {
                return self.error(&["`type`", "`ltype`", "`def`", "`ldef`", "`main`"]);
            }
        }
        Ok(SourceFile { items, abbrevs: self.abbrevs.clone() })
    }

    fn abbrev_head(&mut self) -> PResult<(Name, Vec<Name>)> {
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat_sym("(") {
            loop {
                params.push(self.ident()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(")")?;
        }
        self.expect_sym("=")?;
        Ok((name, params))
    }

    // -- types ------------------------------------------------------------

    fn utype(&mut self) -> PResult<UType> {
        if self.is_kw("mu") || self.is_kw("forall") {
            let is_mu = self.is_kw("mu");
            self.bump();
            let a = self.ident()?;
            self.expect_sym(".")?;
            self.u_binders.push(a.clone());
            let body = self.utype();
            self.u_binders.pop();
            let body = body?;
            return Ok(if is_mu { UType::mu(a, body) } else { UType::forall(a, body) });
        }
        let lhs = self.usum_ty()?;
        if self.eat_sym("->") {
            let rhs = self.utype()?;
            return Ok(UType::fun(lhs, rhs));
        }
        Ok(lhs)
    }

    fn usum_ty(&mut self) -> PResult<UType> {
        let lhs = self.uprod_ty()?;
        if self.eat_sym("+") {
            let rhs = self.usum_ty()?;
            return Ok(UType::sum(lhs, rhs));
        }
        Ok(lhs)
    }

    fn uprod_ty(&mut self) -> PResult<UType> {
        let lhs = self.uatom_ty()?;
        if self.eat_sym("*") {
            let rhs = self.uprod_ty()?;
            return Ok(UType::prod(lhs, rhs));
        }
        Ok(lhs)
    }

    fn uatom_ty(&mut self) -> PResult<UType> {
        if self.eat_kw("unit") {
            return Ok(UType::Unit);
        }
        if self.eat_sym("(") {
            let t = self.utype()?;
            self.expect_sym(")")?;
            return Ok(t);
        }
        if self.is_kw("mu") || self.is_kw("forall") {
            return self.utype();
        }
        let name = match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => s.clone(),
            _ => return self.error(&["a U type"]),
        };
        self.bump();
        if self.u_binders.contains(&name) {
            return Ok(UType::Var(name));
        }
        if let Some(ab) = self.abbrevs.find_u(&name).cloned() {
            let args = self.type_args(ab.params.len(), &name, |p| p.utype())?;
            return Ok(instantiate_u(&ab, &args));
        }
        Ok(UType::Var(name))
    }

    fn type_args<T>(
        &mut self,
        arity: usize,
        name: &str,
        mut one: impl FnMut(&mut Self) -> PResult<T>,
    ) -> PResult<Vec<T>> {
        let mut args = Vec::new();
        if arity == 0 {
            return Ok(args);
        }
        if !self.eat_sym("(") {
            return self.error(&[&format!("`(` with {arity} argument(s) for `{name}`")]);
        }
        loop {
            args.push(one(self)?);
            if !self.eat_sym(",") {
                break;
            }
        }
        if args.len() != arity {
            return self.error(&[&format!("{arity} argument(s) for `{name}`")]);
        }
        self.expect_sym(")")?;
        Ok(args)
    }

    fn ltype(&mut self) -> PResult<LType> {
        if self.eat_kw("mu") {
            let a = self.ident()?;
            self.expect_sym(".")?;
            self.l_binders.push(a.clone());
            let body = self.ltype();
            self.l_binders.pop();
            return Ok(LType::mu(a, body?));
        }
        let lhs = self.lsum_ty()?;
        if self.eat_sym("-o") || self.eat_sym("->") {
            let rhs = self.ltype()?;
            return Ok(LType::lolli(lhs, rhs));
        }
        Ok(lhs)
    }

    fn lsum_ty(&mut self) -> PResult<LType> {
        let lhs = self.lprod_ty()?;
        if self.eat_sym("+") {
            let rhs = self.lsum_ty()?;
            return Ok(LType::plus(lhs, rhs));
        }
        Ok(lhs)
    }

    fn lprod_ty(&mut self) -> PResult<LType> {
        let lhs = self.lunary_ty()?;
        if self.eat_sym("*") {
            let rhs = self.lprod_ty()?;
            return Ok(LType::tensor(lhs, rhs));
        }
        Ok(lhs)
    }

    fn lunary_ty(&mut self) -> PResult<LType> {
        if self.eat_sym("!") {
            return Ok(LType::bang(self.lunary_ty()?));
        }
        if self.eat_kw("Box") {
            return Ok(LType::boxed(self.lunary_ty()?));
        }
        self.latom_ty()
    }

    fn latom_ty(&mut self) -> PResult<LType> {
        match self.peek().clone() {
            Tok::Int(1) => {
                self.bump();
                Ok(LType::Unit)
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.ltype()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            Tok::Ident(s) if s == "Box0" => {
                self.bump();
                Ok(LType::EmptyBox)
            }
            Tok::Ident(s) if s == "Lump" => {
                self.bump();
                self.expect_sym("(")?;
                let t = self.utype()?;
                self.expect_sym(")")?;
                Ok(LType::Lump(t))
            }
            Tok::Ident(s) if s == "mu" => self.ltype(),
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                if self.l_binders.contains(&s) {
                    return Ok(LType::Var(s));
                }
                if let Some(ab) = self.abbrevs.find_l(&s).cloned() {
                    let args = self.type_args(ab.params.len(), &s, |p| p.ltype())?;
                    return Ok(instantiate_l(&ab, &args));
                }
                Ok(LType::Var(s))
            }
            _ => self.error(&["an L type"]),
        }
    }

    // -- U expressions ----------------------------------------------------

    fn uexpr(&mut self) -> PResult<UExpr> {
        if self.eat_kw("fun") {
            self.expect_sym("(")?;
            let x = self.ident()?;
            self.expect_sym(":")?;
            let t = self.utype()?;
            self.expect_sym(")")?;
            self.expect_sym("->")?;
            let body = self.uexpr()?;
            return Ok(UExpr::lam(x, t, body));
        }
        if self.eat_kw("Fun") {
            let a = self.ident()?;
            self.expect_sym("->")?;
            self.u_binders.push(a.clone());
            let body = self.uexpr();
            self.u_binders.pop();
            return Ok(UExpr::ty_abs(a, body?));
        }
        if self.eat_kw("let") {
            if self.eat_sym("(") {
                self.expect_sym(")")?;
                self.expect_sym("=")?;
                let e = self.uexpr()?;
                self.expect_kw("in")?;
                let b = self.uexpr()?;
                return Ok(UExpr::let_unit(e, b));
            }
            let x = self.ident()?;
            self.expect_sym(":")?;
            let t = self.utype()?;
            self.expect_sym("=")?;
            let e = self.uexpr()?;
            self.expect_kw("in")?;
            let b = self.uexpr()?;
            return Ok(UExpr::let_in(x, t, e, b));
        }
        if self.eat_kw("case") {
            let e = self.uexpr()?;
            self.expect_kw("of")?;
            self.expect_sym("{")?;
            self.eat_sym("|");
            self.expect_kw("inl")?;
            let x = self.ident()?;
            self.expect_sym("->")?;
            let l = self.uexpr()?;
            self.expect_sym("|")?;
            self.expect_kw("inr")?;
            let y = self.ident()?;
            self.expect_sym("->")?;
            let r = self.uexpr()?;
            self.expect_sym("}")?;
            return Ok(UExpr::case(e, x, l, y, r));
        }
        if self.eat_kw("fix") {
            let f = self.ident()?;
            self.expect_sym("(")?;
            let x = self.ident()?;
            self.expect_sym(":")?;
            let a = self.utype()?;
            self.expect_sym(")")?;
            self.expect_sym(":")?;
            let b = self.utype()?;
            self.expect_sym("=")?;
            let body = self.uexpr()?;
            return Ok(u_fix(&f, &x, a, b, body));
        }
        self.uapp()
    }

    fn starts_uitem(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                !is_keyword(s)
                    || matches!(
                        s.as_str(),
                        "fst" | "snd" | "unfold" | "inl" | "inr" | "fold" | "UL"
                    )
            }
            Tok::Sym("(") => true,
            _ => false,
        }
    }

    fn uapp(&mut self) -> PResult<UExpr> {
        let mut e = self.uitem()?;
        while self.starts_uitem() {
            let a = self.uitem()?;
            e = UExpr::app(e, a);
        }
        Ok(e)
    }

    fn uitem(&mut self) -> PResult<UExpr> {
        if let Tok::Ident(s) = self.peek().clone() {
            match s.as_str() {
                "fst" | "snd" | "unfold" => {
                    self.bump();
                    let a = self.uitem()?;
                    return Ok(match s.as_str() {
                        "fst" => UExpr::fst(a),
                        "snd" => UExpr::snd(a),
                        _ => UExpr::unfold(a),
                    });
                }
                "inl" | "inr" | "fold" => {
                    self.bump();
                    self.expect_sym("[")?;
                    let t = self.utype()?;
                    self.expect_sym("]")?;
                    let a = self.uitem()?;
                    return Ok(match s.as_str() {
                        "inl" => UExpr::inj(Side::Left, t, a),
                        "inr" => UExpr::inj(Side::Right, t, a),
                        _ => UExpr::fold(t, a),
                    });
                }
                _ => {}
            }
        }
        let mut e = self.uatom()?;
        while self.eat_sym("[") {
            let t = self.utype()?;
            self.expect_sym("]")?;
            e = UExpr::ty_app(e, t);
        }
        Ok(e)
    }

    fn uatom(&mut self) -> PResult<UExpr> {
        match self.peek().clone() {
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(UExpr::Unit);
                }
                let a = self.uexpr()?;
                if self.eat_sym(",") {
                    let b = self.uexpr()?;
                    self.expect_sym(")")?;
                    return Ok(UExpr::pair(a, b));
                }
                self.expect_sym(")")?;
                Ok(a)
            }
            Tok::Ident(s) if s == "UL" => {
                self.bump();
                let st = if self.is_sym("[") { self.store()? } else { Store::new() };
                self.expect_sym("{")?;
                let body = self.lexpr()?;
                self.expect_sym("}")?;
                Ok(UExpr::Boundary(st, Box::new(body)))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(UExpr::Var(s))
            }
            _ => self.error(&["a U expression"]),
        }
    }

    // -- L expressions ----------------------------------------------------

    fn lexpr(&mut self) -> PResult<LExpr> {
        if self.eat_kw("fun") {
            self.expect_sym("(")?;
            let x = self.ident()?;
            self.expect_sym(":")?;
            let t = self.ltype()?;
            self.expect_sym(")")?;
            if !(self.eat_sym("-o") || self.eat_sym("->")) {
                return self.error(&["`-o`"]);
            }
            let body = self.lexpr()?;
            return Ok(LExpr::lam(x, t, body));
        }
        if self.eat_kw("let") {
            if self.is_sym("(") && matches!(self.peek_at(1), Tok::Sym(")")) {
                self.bump();
                self.bump();
                self.expect_sym("=")?;
                let e = self.lexpr()?;
                self.expect_kw("in")?;
                let b = self.lexpr()?;
                return Ok(LExpr::let_unit(e, b));
            }
            if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Sym(":")) {
                let x = self.ident()?;
                self.expect_sym(":")?;
                let t = self.ltype()?;
                self.expect_sym("=")?;
                let e = self.lexpr()?;
                self.expect_kw("in")?;
                let b = self.lexpr()?;
                return Ok(LExpr::let_in(x, t, e, b));
            }
            let pat = self.lpattern()?;
            if let LPat::Var(_) = pat {
                return self.error(&["`:` (a let-bound variable needs a type)"]);
            }
            self.expect_sym("=")?;
            let e = self.lexpr()?;
            self.expect_kw("in")?;
            let b = self.lexpr()?;
            return Ok(bind_pattern(pat, e, b));
        }
        if self.eat_kw("case") {
            let e = self.lexpr()?;
            self.expect_kw("of")?;
            self.expect_sym("{")?;
            self.eat_sym("|");
            self.expect_kw("inl")?;
            let (x, lwrap) = self.case_arm_pattern()?;
            self.expect_sym("->")?;
            let l = lwrap(self.lexpr()?);
            self.expect_sym("|")?;
            self.expect_kw("inr")?;
            let (y, rwrap) = self.case_arm_pattern()?;
            self.expect_sym("->")?;
            let r = rwrap(self.lexpr()?);
            self.expect_sym("}")?;
            return Ok(LExpr::case(e, x, l, y, r));
        }
        if self.eat_kw("fix") {
            let f = self.ident()?;
            self.expect_sym("(")?;
            let x = self.ident()?;
            self.expect_sym(":")?;
            let a = self.ltype()?;
            self.expect_sym(")")?;
            self.expect_sym(":")?;
            let b = self.ltype()?;
            self.expect_sym("=")?;
            let body = self.lexpr()?;
            return Ok(l_fix(&f, &x, a, b, body));
        }
        self.lapp()
    }

    fn case_arm_pattern(&mut self) -> PResult<(Name, ArmBody)> {
        match self.lpattern()? {
            LPat::Var(x) => Ok((x, Box::new(|b| b))),
            pat => {
                let c = fresh_name("c");
                let cv = LExpr::var(c.clone());
                Ok((c, Box::new(move |b| bind_pattern(pat, cv, b))))
            }
        }
    }

    fn lpattern(&mut self) -> PResult<LPat> {
        let base = if self.eat_sym("(") {
            let x = self.ident()?;
            self.expect_sym(",")?;
            let y = self.ident()?;
            self.expect_sym(")")?;
            LPat::Pair(x, y)
        } else {
            LPat::Var(self.ident()?)
        };
        if self.eat_sym("@") {
            let l = self.ident()?;
            return Ok(LPat::At(Box::new(base), l));
        }
        Ok(base)
    }

    fn starts_litem(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                !is_keyword(s)
                    || matches!(
                        s.as_str(),
                        "unfold"
                            | "copy"
                            | "new"
                            | "free"
                            | "box"
                            | "unbox"
                            | "inl"
                            | "inr"
                            | "fold"
                            | "lump"
                            | "unlump"
                            | "share"
                            | "LU"
                            | "phase"
                    )
            }
            Tok::Sym("(") | Tok::Sym("[|") | Tok::Loc(_) => true,
            _ => false,
        }
    }

    fn lapp(&mut self) -> PResult<LExpr> {
        let mut e = self.litem()?;
        while self.starts_litem() {
            let a = self.litem()?;
            e = LExpr::app(e, a);
        }
        Ok(e)
    }

    fn litem(&mut self) -> PResult<LExpr> {
        if let Tok::Ident(s) = self.peek().clone() {
            match s.as_str() {
                "unfold" | "copy" | "new" | "free" | "box" | "unbox" => {
                    self.bump();
                    let a = self.litem()?;
                    return Ok(match s.as_str() {
                        "unfold" => LExpr::unfold(a),
                        "copy" => LExpr::copy(a),
                        "new" => LExpr::new_loc(a),
                        "free" => LExpr::free(a),
                        "box" => LExpr::box_up(a),
                        _ => LExpr::unbox(a),
                    });
                }
                "inl" | "inr" | "fold" | "lump" | "unlump" => {
                    self.bump();
                    self.expect_sym("[")?;
                    let t = self.ltype()?;
                    self.expect_sym("]")?;
                    let a = self.litem()?;
                    return Ok(match s.as_str() {
                        "inl" => LExpr::inj(Side::Left, t, a),
                        "inr" => LExpr::inj(Side::Right, t, a),
                        "fold" => LExpr::fold(t, a),
                        "lump" => LExpr::lump(t, a),
                        _ => LExpr::unlump(t, a),
                    });
                }
                "share" => {
                    self.bump();
                    let st = if self.is_sym("[") { self.store()? } else { Store::new() };
                    let a = self.litem()?;
                    return Ok(LExpr::share_with(st, a));
                }
                _ => {}
            }
        }
        let e = self.latom()?;
        if self.eat_sym("@") {
            let l = self.latom()?;
            return Ok(LExpr::box_up(LExpr::pair(l, e)));
        }
        Ok(e)
    }

    fn latom(&mut self) -> PResult<LExpr> {
        match self.peek().clone() {
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(LExpr::Unit);
                }
                let a = self.lexpr()?;
                if self.eat_sym(",") {
                    let b = self.lexpr()?;
                    self.expect_sym(")")?;
                    return Ok(LExpr::pair(a, b));
                }
                self.expect_sym(")")?;
                Ok(a)
            }
            Tok::Sym("[|") => {
                self.bump();
                let u = self.uexpr()?;
                self.expect_sym("|]")?;
                Ok(LExpr::lump_val(u))
            }
            Tok::Loc(n) => {
                self.bump();
                Ok(LExpr::Loc(Location(n)))
            }
            Tok::Ident(s) if s == "LU" => {
                self.bump();
                self.expect_sym("{")?;
                let u = self.uexpr()?;
                self.expect_sym("}")?;
                Ok(LExpr::from_u(u))
            }
            Tok::Ident(s) if s == "phase" => {
                self.bump();
                let n = self.ident()?;
                self.expect_sym("{")?;
                let e = self.lexpr()?;
                self.expect_sym("}")?;
                Ok(LExpr::Phase(n, Box::new(e)))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(LExpr::Var(s))
            }
            _ => self.error(&["an L expression"]),
        }
    }

    fn store(&mut self) -> PResult<Store> {
        self.expect_sym("[")?;
        let mut st = Store::new();
        if self.eat_sym("]") {
            return Ok(st);
        }
        loop {
            let l = match self.peek() {
                Tok::Loc(n) => Location(*n),
                _ => return self.error(&["a location `#n`"]),
            };
            self.bump();
            self.expect_sym(":=")?;
            let slot = if self.eat_kw("empty") {
                Slot::Empty
            } else {
                self.expect_sym("(")?;
                let inner = self.store()?;
                self.expect_sym(";")?;
                let v = self.lexpr()?;
                self.expect_sym(")")?;
                Slot::Full(inner, v)
            };
            if st.insert(l, slot).is_some() {
                return self.error(&["a location not already in this store"]);
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym("]")?;
        Ok(st)
    }
}

/// Wraps a case arm body in the bindings of its pattern.
type ArmBody = Box<dyn FnOnce(LExpr) -> LExpr>;

fn bind_pattern(pat: LPat, scrutinee: LExpr, body: LExpr) -> LExpr {
    match pat {
        LPat::Var(x) => unreachable!("variable pattern `{x}` is bound by its binder directly"),
        LPat::Pair(x, y) => LExpr::let_pair(x, y, scrutinee, body),
        LPat::At(inner, l) => match *inner {
            LPat::Var(x) => LExpr::let_pair(l, x, LExpr::unbox(scrutinee), body),
            other => {
                let tmp = fresh_name("p");
                LExpr::let_pair(
                    l,
                    tmp.clone(),
                    LExpr::unbox(scrutinee),
                    bind_pattern(other, LExpr::Var(tmp), body),
                )
            }
        },
    }
}

fn instantiate_u(ab: &UAbbrev, args: &[UType]) -> UType {
    let fresh: Vec<Name> = ab.params.iter().map(|p| fresh_name(p)).collect();
    let mut body = ab.body.clone();
    for (p, f) in ab.params.iter().zip(&fresh) {
        body = subst_utype(&body, p, &UType::Var(f.clone()));
    }
    for (f, a) in fresh.iter().zip(args) {
        body = subst_utype(&body, f, a);
    }
    body
}

fn instantiate_l(ab: &LAbbrev, args: &[LType]) -> LType {
    let fresh: Vec<Name> = ab.params.iter().map(|p| fresh_name(p)).collect();
    let mut body = ab.body.clone();
    for (p, f) in ab.params.iter().zip(&fresh) {
        body = subst_ltype(&body, p, &LType::Var(f.clone()));
    }
    for (f, a) in fresh.iter().zip(args) {
        body = subst_ltype(&body, f, a);
    }
    body
}

/// `fix f (x : a) : b = body` in U, as a call-by-value fixpoint through
/// the recursive type `mu w. w -> (a -> b)`.
pub fn u_fix(f: &str, x: &str, a: UType, b: UType, body: UExpr) -> UExpr {
    let wv = fresh_name("w");
    let ab = UType::fun(a.clone(), b.clone());
    let wt = UType::mu(wv.clone(), UType::fun(UType::Var(wv.clone()), ab.clone()));
    let w = fresh_name("w");
    let y = fresh_name("y");
    let h = fresh_name("h");
    // fun (w : W) -> fun (x : a) -> (fun (f : a -> b) -> body) (fun (y : a) -> unfold w w y)
    let self_call = UExpr::lam(
        y.clone(),
        a.clone(),
        UExpr::app(
            UExpr::app(UExpr::unfold(UExpr::var(w.clone())), UExpr::var(w.clone())),
            UExpr::var(y),
        ),
    );
    let hdef = UExpr::lam(
        w,
        wt.clone(),
        UExpr::lam(x, a, UExpr::app(UExpr::lam(f, ab.clone(), body), self_call)),
    );
    let ht = UType::fun(wt.clone(), ab);
    UExpr::app(
        UExpr::lam(
            h.clone(),
            ht,
            UExpr::app(UExpr::var(h.clone()), UExpr::fold(wt, UExpr::var(h))),
        ),
        hdef,
    )
}

/// `fix f (x : a) : b = body` in L, through the recursive type
/// `mu s. !s -o (a -o b)`. The result has type `!(a -o b)`; inside `body`,
/// `f : !(a -o b)` and recursive calls are written `copy f arg`.
pub fn l_fix(f: &str, x: &str, a: LType, b: LType, body: LExpr) -> LExpr {
    let sv = fresh_name("s");
    let fun_t = LType::lolli(a.clone(), b);
    let st = LType::mu(
        sv.clone(),
        LType::lolli(LType::bang(LType::Var(sv)), fun_t.clone()),
    );
    let w = fresh_name("w");
    let y = fresh_name("y");
    let hs = fresh_name("hs");
    let y2 = fresh_name("y");
    let self_ref = |w: &str, y: &str| {
        LExpr::share(LExpr::lam(
            y.to_string(),
            a.clone(),
            LExpr::app(
                LExpr::app(LExpr::unfold(LExpr::copy(LExpr::var(w))), LExpr::var(w)),
                LExpr::var(y),
            ),
        ))
    };
    let h = LExpr::fold(
        st.clone(),
        LExpr::lam(
            w.clone(),
            LType::bang(st.clone()),
            LExpr::app(
                LExpr::lam(f, LType::bang(fun_t.clone()), LExpr::lam(x, a.clone(), body)),
                self_ref(&w, &y),
            ),
        ),
    );
    LExpr::app(
        LExpr::lam(hs.clone(), LType::bang(st), self_ref(&hs, &y2)),
        LExpr::share(h),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subst::{alpha_eq_lexpr, alpha_eq_uexpr};

    #[test]
    fn lambda_and_annotation() {
        let e = parse_uexpr("fun (x : unit) -> x").unwrap();
        assert_eq!(e, UExpr::lam("x", UType::Unit, UExpr::var("x")));
    }

    #[test]
    fn box_sugar() {
        let e = parse_lexpr("(x, xs)@l").unwrap();
        assert_eq!(
            e,
            LExpr::box_up(LExpr::pair(LExpr::var("l"), LExpr::pair(LExpr::var("x"), LExpr::var("xs"))))
        );
    }

    #[test]
    fn nested_boundaries() {
        let e = parse_uexpr("UL { share (LU { () }) }").unwrap();
        assert_eq!(e, UExpr::ul(LExpr::share(LExpr::from_u(UExpr::Unit))));
    }

    #[test]
    fn pattern_sugar_matches_explicit_form() {
        let a = parse_lexpr("let (x, xs)@l = e in b").unwrap();
        let b = parse_lexpr("let (l, p) = unbox e in let (x, xs) = p in b").unwrap();
        assert!(alpha_eq_lexpr(&a, &b));
    }

    #[test]
    fn abbreviations_expand() {
        let f = parse("ltype LinList(t) = mu a. 1 + Box (t * a); ldef id = fun (x : LinList(!1)) -o x;")
            .unwrap();
        match &f.items[1] {
            Item::LDef(_, LExpr::Lam(_, t, _)) => {
                let expect = parse_ltype("mu a. 1 + Box (!1 * a)").unwrap();
                assert!(crate::subst::alpha_eq_ltype(t, &expect));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn defs_are_inlined_in_order() {
        let f = parse("def id = fun (x : unit) -> x; main = id ();").unwrap();
        let e = elaborate(&f).unwrap();
        let expect = parse_uexpr("(fun (x : unit) -> x) ()").unwrap();
        assert!(alpha_eq_uexpr(&e, &expect));
    }

    #[test]
    fn errors_carry_position_and_expectation() {
        let err = parse_uexpr("fun (x unit) -> x").unwrap_err();
        assert_eq!((err.line, err.col), (1, 8));
        assert_eq!(err.expected, vec!["`:`".to_string()]);
    }

    #[test]
    fn stores_and_locations() {
        let e = parse_lexpr("share [#0 := empty, #1 := ([] ; ())] (#0, #1)").unwrap();
        match e {
            LExpr::Share(st, _) => assert_eq!(st.len(), 2),
            _ => panic!(),
        }
    }

    #[test]
    fn lolli_lexes_apart_from_identifiers() {
        let t = parse_ltype("1 -o 1").unwrap();
        assert_eq!(t, LType::lolli(LType::Unit, LType::Unit));
        let e = parse_lexpr("f -ok").unwrap_err();
        assert_eq!(e.col, 3);
    }
}
