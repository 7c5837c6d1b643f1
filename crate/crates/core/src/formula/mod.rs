//! Response-time formulae: expression IR, S-expression syntax, the BNF
//! grammar with grammatical-evolution mapping, and a fixed-point evaluator.

mod eval;
mod grammar;
mod ir;
mod sexpr;

use thiserror::Error;

pub use eval::{eval_at, eval_formula, DivergenceCause, EvalOutcome};
pub use grammar::{encode_formula, map_genotype, Genotype, Grammar, Rule, Symbol};
pub use ir::{builtin, BaseExpr, BaseVar, Formula, NumExpr, Var, K01};
pub use sexpr::{parse_formula, parse_formula_file, render_formula};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown atom '{atom}' at byte {pos}")]
    UnknownAtom { pos: usize, atom: String },
    #[error("missing (isum ...) term at byte {pos}")]
    MissingIsum { pos: usize },
    #[error("derivation unfinished after consuming {consumed} codons")]
    MappingIncomplete { consumed: usize },
    #[error("genotype has no codons")]
    EmptyGenotype,
}
