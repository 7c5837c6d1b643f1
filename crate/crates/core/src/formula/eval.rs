use crate::analysis::{blocking_term, iterate, Fixpoint};
use crate::model::{AnalysisConfig, Message, MessageId, MessageSet, ModelError, Ticks};

use super::ir::{BaseExpr, BaseVar, Formula, NumExpr, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceCause {
    /// An iterate left `[-cap, cap]`.
    Cap,
    /// No fixed point within `iter_limit` substitutions (includes
    /// oscillation of non-monotone formulae).
    IterLimit,
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalOutcome {
    Value(Ticks),
    Divergent(DivergenceCause),
}

impl EvalOutcome {
    pub fn value(self) -> Option<Ticks> {
        match self {
            EvalOutcome::Value(r) => Some(r),
            EvalOutcome::Divergent(_) => None,
        }
    }
}

struct Overflow;

/// Values bound to the message under analysis.
struct Own {
    r: Ticks,
    d: Ticks,
    j: Ticks,
    c: Ticks,
    b: Ticks,
    t: Ticks,
}

fn num(e: &NumExpr, own: &Own, k: &Message) -> Result<Ticks, Overflow> {
    let bin = |a: &NumExpr, b: &NumExpr| -> Result<(Ticks, Ticks), Overflow> {
        Ok((num(a, own, k)?, num(b, own, k)?))
    };
    match e {
        NumExpr::Var(v) => Ok(match v {
            Var::Ri => own.r,
            Var::Di => own.d,
            Var::Ji => own.j,
            Var::Ci => own.c,
            Var::Bi => own.b,
            Var::Ti => own.t,
            Var::Jk => k.j,
            Var::Ck => k.c,
            Var::Dk => k.d,
            Var::Tk => k.t,
        }),
        NumExpr::Add(a, b) => {
            let (a, b) = bin(a, b)?;
            a.checked_add(b).ok_or(Overflow)
        }
        NumExpr::Sub(a, b) => {
            let (a, b) = bin(a, b)?;
            a.checked_sub(b).ok_or(Overflow)
        }
        NumExpr::Min(a, b) => {
            let (a, b) = bin(a, b)?;
            Ok(a.min(b))
        }
        NumExpr::Max(a, b) => {
            let (a, b) = bin(a, b)?;
            Ok(a.max(b))
        }
    }
}

fn base(e: &BaseExpr, own: &Own) -> Result<Ticks, Overflow> {
    let var = |v: &BaseVar| match v {
        BaseVar::Ji => own.j,
        BaseVar::Ci => own.c,
        BaseVar::Bi => own.b,
    };
    match e {
        BaseExpr::Term(v) => Ok(var(v)),
        BaseExpr::Add(inner, v) => base(inner, own)?.checked_add(var(v)).ok_or(Overflow),
        BaseExpr::Max(inner, v) => Ok(base(inner, own)?.max(var(v))),
    }
}

/// One application of the formula's right-hand side.
fn apply(f: &Formula, own: &Own, hp: &[Message]) -> Result<Ticks, Overflow> {
    let mut r = base(&f.base, own)?;
    let k01 = f.k01.value();
    for k in hp {
        let n = num(&f.num, own, k)?.div_euclid(k.t) + k01;
        r = r.checked_add(n.checked_mul(k.c).ok_or(Overflow)?).ok_or(Overflow)?;
    }
    Ok(r)
}

/// Evaluates `f` for message `id` of `set`.
///
/// Self-referential formulae are iterated from `R = J_i + C_i` until the
/// iterate repeats; leaving the divergence cap or exhausting
/// `cfg.iter_limit` yields [`EvalOutcome::Divergent`].
pub fn eval_formula(
    f: &Formula,
    set: &MessageSet,
    id: MessageId,
    cfg: &AnalysisConfig,
) -> Result<EvalOutcome, ModelError> {
    let index = set.index_of(id)?;
    Ok(eval_at(f, set, index, cfg))
}

/// [`eval_formula`] addressed by position in priority order.
pub fn eval_at(f: &Formula, set: &MessageSet, index: usize, cfg: &AnalysisConfig) -> EvalOutcome {
    let messages = set.messages();
    let m = &messages[index];
    let hp = &messages[..index];
    let b = blocking_term(set, m.id).expect("message is in the set");
    let Some(start) = m.j.checked_add(m.c) else {
        return EvalOutcome::Divergent(DivergenceCause::Overflow);
    };
    let mut own = Own {
        r: start,
        d: m.d,
        j: m.j,
        c: m.c,
        b,
        t: m.t,
    };
    if !f.is_self_referential() {
        return match apply(f, &own, hp) {
            Ok(r) => EvalOutcome::Value(r),
            Err(Overflow) => EvalOutcome::Divergent(DivergenceCause::Overflow),
        };
    }
    let fp = iterate(start, cfg.cap_for(m), cfg.iter_limit, None, |r| {
        own.r = r;
        apply(f, &own, hp)
    });
    match fp {
        Ok(Fixpoint::Converged(r, _)) => EvalOutcome::Value(r),
        Ok(Fixpoint::Cap(_)) | Ok(Fixpoint::Deadline(..)) => {
            EvalOutcome::Divergent(DivergenceCause::Cap)
        }
        Ok(Fixpoint::Limit(_)) => EvalOutcome::Divergent(DivergenceCause::IterLimit),
        Err(Overflow) => EvalOutcome::Divergent(DivergenceCause::Overflow),
    }
}
