//! Core of the UL multi-language: syntax, parsing, type checking for the
//! unrestricted (U) and linear (L) languages, value conversion across
//! boundaries, a small-step evaluator, and the functional translation of
//! linear state into U.

pub mod ast;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod funtrans;
pub mod interop;
pub mod parser;
pub mod pretty;
pub mod subst;
pub mod testkit;
pub mod typecheck_l;
pub mod typecheck_u;

pub use ast::*;
pub use eval::{run, EvalError, Machine, Mutant, Outcome, Stats, DEFAULT_FUEL};
pub use error::{TypeError, TypeErrorKind};
pub use funtrans::{check_compositionality, funtrans_config, funtrans_l, funtrans_type, funtrans_u, Hole, HOLE};
pub use interop::{all_compatible, compat, l_to_u, recover_u, u_to_l, CompatEnv};
pub use parser::{elaborate, parse, ElabError, ParseError, SourceFile};
pub use pretty::{Abbrevs, Printer};
pub use subst::*;
pub use typecheck_l::{
    check_config, ctxjoin, infer_store_typing, synth_l, typecheck_l_internal, typecheck_l_surface, UsageReport,
};
pub use typecheck_u::typecheck_u;
pub use corpus::{corpus_suite, Diagnostic, Program, Sidecar};
pub use testkit::{
    check_compositionality_pairs, check_determinism, check_differential, check_mutants, check_roundtrip,
    check_subject_reduction, differential_one, gen_l_config, gen_u_term, Agreement, Report, Uninhabited,
};
