//! Type errors with stable diagnostic codes.

use std::fmt;

use thiserror::Error;

use crate::ast::{LType, Location, Name};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeErrorKind {
    #[error("linear variable `{0}` is used more than once")]
    LinearVariableReused(Name),
    #[error("linear variable `{0}` is never used")]
    LinearVariableUnused(Name),
    #[error("`share` captures linear variable `{0}`")]
    ShareCapturesLinear(Name),
    #[error("case branches consume different linear resources: {left} vs {right}")]
    BranchUsageMismatch { left: String, right: String },
    #[error("`copy` expects a value of type !t, found {0}")]
    CopyOfNonBang(LType),
    #[error("expected {expected}, found {found}")]
    TypeMismatch { expected: String, found: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(Name),
    #[error("the body of a type abstraction must be a value")]
    NonValueUnderTypeAbstraction,
    #[error("linear variable `{0}` cannot be used across a U boundary")]
    NonDuplicableLinearInScope(Name),
    #[error("the L side of a UL boundary must have type !Lump(T), found {0}")]
    BoundaryTypeNotLumped(LType),
    #[error("linear variable `{0}` occurs in both joined contexts")]
    SharedLinearVariable(Name),
    #[error("location {0} is never used")]
    LocationUnused(Location),
    #[error("location {0} is used more than once")]
    LocationReused(Location),
    #[error("store and store typing disagree: {0}")]
    StoreMismatch(String),
    #[error("location {0} is {1}")]
    DeadAliveMismatch(Location, String),
    #[error("{0} has no compatible U type")]
    NotInImage(LType),
    #[error("unbound type variable `{0}`")]
    UnboundTypeVariable(Name),
    #[error("location {0} is not in the visible store")]
    UnknownLocation(Location),
    #[error("{0}")]
    WrongLanguage(String),
    #[error("value {value} does not have the shape of {ty}")]
    ShapeMismatch { value: String, ty: String },
}

impl TypeErrorKind {
    pub fn code(&self) -> &'static str {
        use TypeErrorKind::*;
        match self {
            LinearVariableReused(_) => "E001",
            LinearVariableUnused(_) => "E002",
            ShareCapturesLinear(_) => "E003",
            BranchUsageMismatch { .. } => "E004",
            CopyOfNonBang(_) => "E005",
            TypeMismatch { .. } => "E006",
            UnboundVariable(_) => "E007",
            NonValueUnderTypeAbstraction => "E008",
            NonDuplicableLinearInScope(_) => "E009",
            BoundaryTypeNotLumped(_) => "E010",
            SharedLinearVariable(_) => "E011",
            LocationUnused(_) => "E012",
            LocationReused(_) => "E013",
            StoreMismatch(_) => "E014",
            DeadAliveMismatch(..) => "E015",
            NotInImage(_) => "E016",
            UnboundTypeVariable(_) => "E017",
            UnknownLocation(_) => "E018",
            WrongLanguage(_) => "E019",
            ShapeMismatch { .. } => "E020",
        }
    }

    pub fn name(&self) -> &'static str {
        use TypeErrorKind::*;
        match self {
            LinearVariableReused(_) => "LinearVariableReused",
            LinearVariableUnused(_) => "LinearVariableUnused",
            ShareCapturesLinear(_) => "ShareCapturesLinear",
            BranchUsageMismatch { .. } => "BranchUsageMismatch",
            CopyOfNonBang(_) => "CopyOfNonBang",
            TypeMismatch { .. } => "TypeMismatch",
            UnboundVariable(_) => "UnboundVariable",
            NonValueUnderTypeAbstraction => "NonValueUnderTypeAbstraction",
            NonDuplicableLinearInScope(_) => "NonDuplicableLinearInScope",
            BoundaryTypeNotLumped(_) => "BoundaryTypeNotLumped",
            SharedLinearVariable(_) => "SharedLinearVariable",
            LocationUnused(_) => "LocationUnused",
            LocationReused(_) => "LocationReused",
            StoreMismatch(_) => "StoreMismatch",
            DeadAliveMismatch(..) => "DeadAliveMismatch",
            NotInImage(_) => "NotInImage",
            UnboundTypeVariable(_) => "UnboundTypeVariable",
            UnknownLocation(_) => "UnknownLocation",
            WrongLanguage(_) => "WrongLanguage",
            ShapeMismatch { .. } => "ShapeMismatch",
        }
    }
}

/// A type error together with the smallest enclosing expression, printed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub context: Option<String>,
}

const CONTEXT_LIMIT: usize = 160;

impl TypeError {
    pub fn new(kind: TypeErrorKind) -> Self {
        TypeError { kind, context: None }
    }

    pub fn code(&self) -> &'static str {
        self.kind.code()
    }

    /// Attaches `ctx` unless a more precise context is already present.
    pub fn within(mut self, ctx: impl FnOnce() -> String) -> Self {
        if self.context.is_none() {
            let mut s = canonical_fresh_names(&ctx());
            if s.chars().count() > CONTEXT_LIMIT {
                s = s.chars().take(CONTEXT_LIMIT).collect::<String>() + " ...";
            }
            self.context = Some(s);
        }
        self
    }

    /// The one-line, greppable form: `error[E001] LinearVariableReused: ...`.
    pub fn headline(&self) -> String {
        format!("error[{}] {}: {}", self.kind.code(), self.kind.name(), self.kind)
    }
}

/// Renumbers generated names (`stem$N`) in order of first occurrence, so
/// rendered diagnostics do not depend on how many names were generated
/// earlier in the process.
pub fn canonical_fresh_names(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut seen: Vec<String> = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '$' && i > 0 && is_ident(chars[i - 1]) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j > i + 1 && !(j < chars.len() && is_ident(chars[j])) {
                let num: String = chars[i + 1..j].iter().collect();
                let k = match seen.iter().position(|n| *n == num) {
                    Some(k) => k,
                    None => {
                        seen.push(num);
                        seen.len() - 1
                    }
                };
                out.push_str(&format!("${}", k + 1));
                i = j;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.headline())?;
        if let Some(c) = &self.context {
            write!(f, "\n  in: {c}")?;
        }
        Ok(())
    }
}

impl std::error::Error for TypeError {}

impl From<TypeErrorKind> for TypeError {
    fn from(kind: TypeErrorKind) -> Self {
        TypeError::new(kind)
    }
}

pub(crate) fn mismatch(expected: impl fmt::Display, found: impl fmt::Display) -> TypeError {
    TypeError::new(TypeErrorKind::TypeMismatch { expected: expected.to_string(), found: found.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_names_are_renumbered() {
        assert_eq!(canonical_fresh_names("f$17 (x$3, f$17) y$"), "f$1 (x$2, f$1) y$");
    }
}
