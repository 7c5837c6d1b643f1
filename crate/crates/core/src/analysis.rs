//! Response-time tests for fixed-priority non-preemptive CAN arbitration.
//!
//! Three sufficient tests of increasing pessimism (the iterative S1 test
//! and its two closed forms) and an exact busy-period analysis that serves
//! as the reference oracle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AnalysisConfig, Message, MessageId, MessageSet, ModelError, Ticks};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("arithmetic overflow while analysing message {0}")]
    Overflow(MessageId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Converged(Ticks),
    ExceededCap,
    /// First iterate above the deadline; only produced with
    /// [`AnalysisConfig::stop_at_deadline`].
    ExceededDeadline(Ticks),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RtVerdict {
    pub kind: Verdict,
    pub iterations: u32,
}

impl RtVerdict {
    pub fn converged(&self) -> Option<Ticks> {
        match self.kind {
            Verdict::Converged(r) => Some(r),
            _ => None,
        }
    }

    /// Converged with a response time no larger than `deadline`.
    pub fn meets(&self, deadline: Ticks) -> bool {
        matches!(self.kind, Verdict::Converged(r) if r <= deadline)
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            Verdict::Converged(_) => "converged",
            Verdict::ExceededCap => "exceeded-cap",
            Verdict::ExceededDeadline(_) => "exceeded-deadline",
        }
    }

    /// The response-time value carried by the verdict, if any.
    pub fn value(&self) -> Option<Ticks> {
        match self.kind {
            Verdict::Converged(r) | Verdict::ExceededDeadline(r) => Some(r),
            Verdict::ExceededCap => None,
        }
    }
}

/// Outcome of [`iterate`] before it is turned into a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Fixpoint {
    Converged(Ticks, u32),
    Cap(u32),
    Limit(u32),
    Deadline(Ticks, u32),
}

/// Repeated substitution `r <- f(r)` from `start`.
///
/// Stops at the first `m` with `f(r) == r`, when an iterate leaves
/// `[-cap, cap]`, when an iterate exceeds `deadline` (if given), or after
/// `limit` substitutions.
pub(crate) fn iterate<E>(
    start: Ticks,
    cap: Ticks,
    limit: u32,
    deadline: Option<Ticks>,
    mut f: impl FnMut(Ticks) -> Result<Ticks, E>,
) -> Result<Fixpoint, E> {
    let mut r = start;
    for m in 1..=limit {
        let next = f(r)?;
        if next == r {
            return Ok(Fixpoint::Converged(r, m));
        }
        if next > cap || next < -cap {
            return Ok(Fixpoint::Cap(m));
        }
        if let Some(d) = deadline {
            if next > d {
                return Ok(Fixpoint::Deadline(next, m));
            }
        }
        r = next;
    }
    Ok(Fixpoint::Limit(limit))
}

impl From<Fixpoint> for RtVerdict {
    fn from(fp: Fixpoint) -> Self {
        match fp {
            Fixpoint::Converged(r, n) => RtVerdict {
                kind: Verdict::Converged(r),
                iterations: n,
            },
            Fixpoint::Cap(n) | Fixpoint::Limit(n) => RtVerdict {
                kind: Verdict::ExceededCap,
                iterations: n,
            },
            Fixpoint::Deadline(r, n) => RtVerdict {
                kind: Verdict::ExceededDeadline(r),
                iterations: n,
            },
        }
    }
}

/// Checked integer helpers; every failure is reported as an overflow of
/// the message under analysis.
struct Arith(MessageId);

impl Arith {
    fn add(&self, a: Ticks, b: Ticks) -> Result<Ticks, AnalysisError> {
        a.checked_add(b).ok_or(AnalysisError::Overflow(self.0))
    }
    fn sub(&self, a: Ticks, b: Ticks) -> Result<Ticks, AnalysisError> {
        a.checked_sub(b).ok_or(AnalysisError::Overflow(self.0))
    }
    fn mul(&self, a: Ticks, b: Ticks) -> Result<Ticks, AnalysisError> {
        a.checked_mul(b).ok_or(AnalysisError::Overflow(self.0))
    }
    /// Floor division toward negative infinity (`b > 0`).
    fn floor_div(&self, a: Ticks, b: Ticks) -> Ticks {
        a.div_euclid(b)
    }
    fn ceil_div(&self, a: Ticks, b: Ticks) -> Result<Ticks, AnalysisError> {
        Ok(-self.floor_div(a.checked_neg().ok_or(AnalysisError::Overflow(self.0))?, b))
    }
}

/// Longest transmission time among lower-priority messages (`B_i`).
pub fn blocking_term(set: &MessageSet, id: MessageId) -> Result<Ticks, AnalysisError> {
    Ok(set.lp(id)?.iter().map(|m| m.c).max().unwrap_or(0))
}

/// `J_i + C_i + max(B_i, C_i) + sum_k (floor(num_k / T_k) + 1) * C_k`
/// with `num_k = x + J_k`.
fn s1_shape(
    ar: &Arith,
    m: &Message,
    blocking: Ticks,
    hp: &[Message],
    x: Ticks,
) -> Result<Ticks, AnalysisError> {
    let mut r = ar.add(ar.add(m.j, m.c)?, blocking.max(m.c))?;
    for k in hp {
        let n = ar.floor_div(ar.add(x, k.j)?, k.t) + 1;
        r = ar.add(r, ar.mul(n, k.c)?)?;
    }
    Ok(r)
}

/// Iterative sufficient test S1.
pub fn rta_s1(
    set: &MessageSet,
    id: MessageId,
    cfg: &AnalysisConfig,
) -> Result<RtVerdict, AnalysisError> {
    let m = set.get(id)?;
    let hp = set.hp(id)?;
    let b = blocking_term(set, id)?;
    let ar = Arith(id);
    let start = ar.add(m.j, m.c)?;
    let deadline = cfg.stop_at_deadline.then_some(m.d);
    let fp = iterate(start, cfg.cap_for(m), cfg.iter_limit, deadline, |r| {
        let x = ar.sub(ar.sub(r, m.j)?, m.c)?;
        s1_shape(&ar, m, b, hp, x)
    })?;
    Ok(fp.into())
}

fn closed_verdict(r: Ticks, m: &Message, cfg: &AnalysisConfig) -> RtVerdict {
    let kind = if cfg.stop_at_deadline && r > m.d {
        Verdict::ExceededDeadline(r)
    } else {
        Verdict::Converged(r)
    };
    RtVerdict {
        kind,
        iterations: 1,
    }
}

/// Closed form of S1 with the deadline substituted for the response time.
pub fn rta_closed_d(
    set: &MessageSet,
    id: MessageId,
    cfg: &AnalysisConfig,
) -> Result<RtVerdict, AnalysisError> {
    let m = set.get(id)?;
    let ar = Arith(id);
    let x = ar.sub(ar.sub(m.d, m.j)?, m.c)?;
    let r = s1_shape(&ar, m, blocking_term(set, id)?, set.hp(id)?, x)?;
    Ok(closed_verdict(r, m, cfg))
}

/// Closed form without the jitter and cost subtraction in the numerator.
pub fn rta_closed_simple(
    set: &MessageSet,
    id: MessageId,
    cfg: &AnalysisConfig,
) -> Result<RtVerdict, AnalysisError> {
    let m = set.get(id)?;
    let ar = Arith(id);
    let r = s1_shape(&ar, m, blocking_term(set, id)?, set.hp(id)?, m.d)?;
    Ok(closed_verdict(r, m, cfg))
}

/// Exact busy-period analysis.
///
/// The level-i busy period is bounded first; then the queuing delay of
/// every instance released in it is computed and the largest response time
/// is returned.
pub fn rta_exact(
    set: &MessageSet,
    id: MessageId,
    cfg: &AnalysisConfig,
) -> Result<RtVerdict, AnalysisError> {
    let m = set.get(id)?;
    let hp = set.hp(id)?;
    let b = blocking_term(set, id)?;
    let ar = Arith(id);
    let cap = cfg.cap_for(m);
    let mut iterations = 0u32;

    // The busy period is an absolute length that legitimately exceeds the
    // per-message cap; only the iteration limit bounds it. Under overload it
    // grows geometrically, so overflow here also means "no busy period".
    let busy = iterate(m.c, Ticks::MAX, cfg.iter_limit, None, |t| {
        let mut next = b;
        for k in hp.iter().chain(std::iter::once(m)) {
            let n = ar.ceil_div(ar.add(t, k.j)?, k.t)?;
            next = ar.add(next, ar.mul(n, k.c)?)?;
        }
        Ok::<_, AnalysisError>(next)
    });
    let busy_len = match busy {
        Ok(Fixpoint::Converged(t, n)) => {
            iterations += n;
            t
        }
        Ok(Fixpoint::Cap(n) | Fixpoint::Limit(n) | Fixpoint::Deadline(_, n)) => {
            return Ok(RtVerdict {
                kind: Verdict::ExceededCap,
                iterations: n,
            })
        }
        Err(AnalysisError::Overflow(_)) => {
            return Ok(RtVerdict {
                kind: Verdict::ExceededCap,
                iterations,
            })
        }
        Err(e) => return Err(e),
    };

    let instances = ar.ceil_div(ar.add(busy_len, m.j)?, m.t)?.max(1);
    let mut worst: Ticks = Ticks::MIN;
    for q in 0..instances {
        let own = ar.add(b, ar.mul(q, m.c)?)?;
        // Cap the instance's response time, not its absolute queuing delay.
        let w_cap = cap.saturating_add(ar.mul(q, m.t)?);
        let fp = iterate(own, w_cap, cfg.iter_limit, None, |w| {
            let mut next = own;
            for k in hp {
                let n = ar.ceil_div(ar.add(ar.add(w, k.j)?, cfg.tau_bit)?, k.t)?;
                next = ar.add(next, ar.mul(n, k.c)?)?;
            }
            Ok::<_, AnalysisError>(next)
        })?;
        let w = match fp {
            Fixpoint::Converged(w, n) => {
                iterations += n;
                w
            }
            Fixpoint::Cap(n) | Fixpoint::Limit(n) | Fixpoint::Deadline(_, n) => {
                return Ok(RtVerdict {
                    kind: Verdict::ExceededCap,
                    iterations: iterations + n,
                })
            }
        };
        let r = ar.add(ar.sub(ar.add(m.j, w)?, ar.mul(q, m.t)?)?, m.c)?;
        if cfg.stop_at_deadline && r > m.d {
            return Ok(RtVerdict {
                kind: Verdict::ExceededDeadline(r),
                iterations,
            });
        }
        if r > cap {
            return Ok(RtVerdict {
                kind: Verdict::ExceededCap,
                iterations,
            });
        }
        worst = worst.max(r);
    }
    Ok(RtVerdict {
        kind: Verdict::Converged(worst),
        iterations,
    })
}

/// The four response-time tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Test {
    Exact,
    S1,
    ClosedD,
    ClosedSimple,
}

impl Test {
    pub const ALL: [Test; 4] = [Test::Exact, Test::S1, Test::ClosedD, Test::ClosedSimple];

    pub fn name(self) -> &'static str {
        match self {
            Test::Exact => "exact",
            Test::S1 => "s1",
            Test::ClosedD => "cf-d",
            Test::ClosedSimple => "cf-s",
        }
    }

    pub fn from_name(s: &str) -> Option<Test> {
        Test::ALL.into_iter().find(|t| t.name() == s)
    }

    pub fn run(
        self,
        set: &MessageSet,
        id: MessageId,
        cfg: &AnalysisConfig,
    ) -> Result<RtVerdict, AnalysisError> {
        match self {
            Test::Exact => rta_exact(set, id, cfg),
            Test::S1 => rta_s1(set, id, cfg),
            Test::ClosedD => rta_closed_d(set, id, cfg),
            Test::ClosedSimple => rta_closed_simple(set, id, cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageReport {
    pub id: MessageId,
    pub deadline: Ticks,
    pub exact: RtVerdict,
    pub s1: RtVerdict,
    pub cf_d: RtVerdict,
    pub cf_s: RtVerdict,
}

impl MessageReport {
    pub fn verdict(&self, test: Test) -> &RtVerdict {
        match test {
            Test::Exact => &self.exact,
            Test::S1 => &self.s1,
            Test::ClosedD => &self.cf_d,
            Test::ClosedSimple => &self.cf_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SetReport {
    pub messages: Vec<MessageReport>,
}

impl SetReport {
    pub fn set_schedulable(&self, test: Test) -> bool {
        self.messages
            .iter()
            .all(|r| r.verdict(test).meets(r.deadline))
    }
}

pub fn analyze_set(set: &MessageSet, cfg: &AnalysisConfig) -> Result<SetReport, AnalysisError> {
    let messages = set
        .messages()
        .iter()
        .map(|m| {
            Ok(MessageReport {
                id: m.id,
                deadline: m.d,
                exact: rta_exact(set, m.id, cfg)?,
                s1: rta_s1(set, m.id, cfg)?,
                cf_d: rta_closed_d(set, m.id, cfg)?,
                cf_s: rta_closed_simple(set, m.id, cfg)?,
            })
        })
        .collect::<Result<_, AnalysisError>>()?;
    Ok(SetReport { messages })
}
