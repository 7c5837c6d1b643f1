//! Discrete-event simulation of a non-preemptive fixed-priority bus.
//!
//! Instance `j` of message `i` is queued at `O_i + j*T_i + jit` where `jit`
//! is the scenario's first jitter for `j = 0` and its later jitter
//! otherwise. Response times are measured from the nominal release
//! `O_i + j*T_i`, so they include jitter like the analytical bounds do.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use thiserror::Error;

use crate::model::{MessageId, MessageSet, ModelError, Ticks};

pub const HORIZON_CAP: Ticks = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("horizon {horizon} exceeds the limit of {cap} ticks")]
    HorizonTooLarge { horizon: Ticks, cap: Ticks },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScenarioEntry {
    pub id: MessageId,
    pub offset: Ticks,
    pub first_jitter: Ticks,
    pub later_jitter: Ticks,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scenario {
    pub entries: Vec<ScenarioEntry>,
    pub horizon: Ticks,
}

impl Scenario {
    /// Checks the scenario against `set`: one entry per message, offsets in
    /// `[0, T)`, jitters in `[0, J]`, horizon at least 1.
    pub fn validate(&self, set: &MessageSet) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.horizon < 1 {
            return bad(format!("horizon must be >= 1, got {}", self.horizon));
        }
        if self.entries.len() != set.len() {
            return bad(format!(
                "{} entries for a set of {} messages",
                self.entries.len(),
                set.len()
            ));
        }
        let mut seen = vec![false; set.len()];
        for e in &self.entries {
            let idx = set.index_of(e.id)?;
            if std::mem::replace(&mut seen[idx], true) {
                return bad(format!("message {} listed twice", e.id));
            }
            let m = &set.messages()[idx];
            if !(0..m.t).contains(&e.offset) {
                return bad(format!("message {}: offset {} not in [0, {})", e.id, e.offset, m.t));
            }
            for (name, v) in [("first_jitter", e.first_jitter), ("later_jitter", e.later_jitter)] {
                if !(0..=m.j).contains(&v) {
                    return bad(format!("message {}: {name} {v} not in [0, {}]", e.id, m.j));
                }
            }
        }
        Ok(())
    }

    /// Entry for `id`, if present.
    pub fn entry(&self, id: MessageId) -> Option<&ScenarioEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn max_offset(&self) -> Ticks {
        self.entries.iter().map(|e| e.offset).max().unwrap_or(0)
    }
}

/// All offsets zero, first instance released maximally late and every
/// later instance maximally early.
pub fn critical_instant_scenario(set: &MessageSet, horizon: Ticks) -> Scenario {
    Scenario {
        entries: set
            .messages()
            .iter()
            .map(|m| ScenarioEntry {
                id: m.id,
                offset: 0,
                first_jitter: m.j,
                later_jitter: 0,
            })
            .collect(),
        horizon,
    }
}

/// Uniformly random scenario over the valid ranges.
pub fn random_scenario(set: &MessageSet, horizon: Ticks, rng: &mut impl Rng) -> Scenario {
    Scenario {
        entries: set
            .messages()
            .iter()
            .map(|m| ScenarioEntry {
                id: m.id,
                offset: rng.random_range(0..m.t),
                first_jitter: rng.random_range(0..=m.j),
                later_jitter: rng.random_range(0..=m.j),
            })
            .collect(),
        horizon,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Horizon {
    pub ticks: Ticks,
    /// True when the hyperperiod bound was cut to [`HORIZON_CAP`].
    pub clamped: bool,
}

fn gcd(a: Ticks, b: Ticks) -> Ticks {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `min(2*lcm(T) + max_offset + max(J), HORIZON_CAP)`.
pub fn default_horizon(set: &MessageSet, max_offset: Ticks) -> Horizon {
    let clamp = Horizon {
        ticks: HORIZON_CAP,
        clamped: true,
    };
    let mut lcm: Ticks = 1;
    for m in set.messages() {
        match (lcm / gcd(lcm, m.t)).checked_mul(m.t) {
            Some(v) if v <= HORIZON_CAP => lcm = v,
            _ => return clamp,
        }
    }
    let max_j = set.messages().iter().map(|m| m.j).max().unwrap_or(0);
    let ticks = 2 * lcm + max_offset + max_j;
    if ticks > HORIZON_CAP {
        clamp
    } else {
        Horizon {
            ticks,
            clamped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub horizon_cap: Ticks,
    pub record_trace: bool,
    /// Stop at the first deadline miss. Watermarks then cover only the
    /// instances completed so far.
    pub stop_at_first_miss: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            horizon_cap: HORIZON_CAP,
            record_trace: false,
            stop_at_first_miss: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Miss {
    pub id: MessageId,
    pub instance: u64,
    pub nominal_release: Ticks,
}

/// One completed transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub id: MessageId,
    pub instance: u64,
    pub nominal_release: Ticks,
    pub queued: Ticks,
    pub start: Ticks,
    pub finish: Ticks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MessageStats {
    pub id: MessageId,
    /// Largest observed response time; 0 when no instance completed.
    pub watermark: Ticks,
    pub completed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimResult {
    /// In priority order, parallel to the set's messages.
    pub stats: Vec<MessageStats>,
    pub first_miss: Option<Miss>,
    pub trace: Vec<TraceEvent>,
}

impl SimResult {
    pub fn watermark(&self, id: MessageId) -> Option<Ticks> {
        self.stats.iter().find(|s| s.id == id).map(|s| s.watermark)
    }

    pub fn watermarks(&self) -> Vec<Ticks> {
        self.stats.iter().map(|s| s.watermark).collect()
    }
}

pub fn simulate(set: &MessageSet, scenario: &Scenario) -> Result<SimResult, SimError> {
    simulate_with(set, scenario, &SimOptions::default())
}

struct Source {
    offset: Ticks,
    first_jitter: Ticks,
    later_jitter: Ticks,
}

impl Source {
    fn nominal(&self, t: Ticks, instance: u64) -> Ticks {
        self.offset + instance as Ticks * t
    }

    fn queued(&self, t: Ticks, instance: u64) -> Ticks {
        let jit = if instance == 0 {
            self.first_jitter
        } else {
            self.later_jitter
        };
        self.nominal(t, instance) + jit
    }
}

pub fn simulate_with(
    set: &MessageSet,
    scenario: &Scenario,
    opts: &SimOptions,
) -> Result<SimResult, SimError> {
    if scenario.horizon > opts.horizon_cap {
        return Err(SimError::HorizonTooLarge {
            horizon: scenario.horizon,
            cap: opts.horizon_cap,
        });
    }
    scenario.validate(set)?;
    let messages = set.messages();
    let horizon = scenario.horizon;
    let sources: Vec<Source> = messages
        .iter()
        .map(|m| {
            let e = scenario.entry(m.id).expect("validated");
            Source {
                offset: e.offset,
                first_jitter: e.first_jitter,
                later_jitter: e.later_jitter,
            }
        })
        .collect();

    // Arrivals keyed by (queue time, priority index, instance). Instance 1
    // may be queued before instance 0 when later jitter is smaller, so both
    // are seeded up front; from instance 1 on queue times are increasing.
    let mut arrivals: BinaryHeap<Reverse<(Ticks, usize, u64)>> = BinaryHeap::new();
    let push = |arrivals: &mut BinaryHeap<_>, idx: usize, inst: u64| {
        let q = sources[idx].queued(messages[idx].t, inst);
        if q < horizon {
            arrivals.push(Reverse((q, idx, inst)));
        }
    };
    for idx in 0..messages.len() {
        push(&mut arrivals, idx, 0);
        push(&mut arrivals, idx, 1);
    }

    let mut ready: BinaryHeap<Reverse<(usize, u64, Ticks)>> = BinaryHeap::new();
    let mut stats: Vec<MessageStats> = messages
        .iter()
        .map(|m| MessageStats {
            id: m.id,
            watermark: 0,
            completed: 0,
        })
        .collect();
    let mut first_miss = None;
    let mut trace = Vec::new();
    let mut now: Ticks = 0;

    loop {
        while let Some(&Reverse((q, idx, inst))) = arrivals.peek() {
            if q > now {
                break;
            }
            arrivals.pop();
            ready.push(Reverse((idx, inst, q)));
            if inst >= 1 {
                push(&mut arrivals, idx, inst + 1);
            }
        }
        let Some(Reverse((idx, inst, queued))) = ready.pop() else {
            match arrivals.peek() {
                Some(&Reverse((q, _, _))) => {
                    now = q;
                    continue;
                }
                None => break,
            }
        };
        let m = &messages[idx];
        let finish = now + m.c;
        if finish > horizon {
            break;
        }
        let nominal = sources[idx].nominal(m.t, inst);
        let response = finish - nominal;
        let s = &mut stats[idx];
        s.watermark = s.watermark.max(response);
        s.completed += 1;
        if opts.record_trace {
            trace.push(TraceEvent {
                id: m.id,
                instance: inst,
                nominal_release: nominal,
                queued,
                start: now,
                finish,
            });
        }
        now = finish;
        if response > m.d && first_miss.is_none() {
            first_miss = Some(Miss {
                id: m.id,
                instance: inst,
                nominal_release: nominal,
            });
            if opts.stop_at_first_miss {
                break;
            }
        }
    }
    Ok(SimResult {
        stats,
        first_miss,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_message_set, Message};

    fn set(ms: Vec<Message>) -> MessageSet {
        validate_message_set(ms).unwrap()
    }

    fn micro() -> MessageSet {
        set(vec![
            Message::new(1, 1, 1, 4, 4, 0),
            Message::new(2, 2, 2, 10, 10, 0),
        ])
    }

    fn traced(s: &MessageSet, sc: &Scenario) -> SimResult {
        simulate_with(
            s,
            sc,
            &SimOptions {
                record_trace: true,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn lone_frame_response_includes_jitter() {
        let s = set(vec![Message::new(1, 1, 1, 10, 10, 2)]);
        let sc = critical_instant_scenario(&s, 10);
        assert_eq!(sc.entries[0].first_jitter, 2);
        assert_eq!(simulate(&s, &sc).unwrap().watermarks(), vec![3]);
    }

    #[test]
    fn micro_set_trace() {
        let s = micro();
        let r = traced(&s, &critical_instant_scenario(&s, 40));
        // m1 [0,1], m2 [1,3], m1 [4,5], ...
        let head: Vec<_> = r.trace.iter().take(3).map(|e| (e.id.0, e.start, e.finish)).collect();
        assert_eq!(head, vec![(1, 0, 1), (2, 1, 3), (1, 4, 5)]);
        assert_eq!(r.watermarks(), vec![1, 3]);
        assert_eq!(r.first_miss, None);
        assert_eq!(r.stats[0].completed, 10);
        assert_eq!(r.stats[1].completed, 4);
    }

    #[test]
    fn cost_above_deadline_misses_first_instance() {
        let s = set(vec![Message::new(1, 1, 2, 4, 1, 0)]);
        let r = simulate(&s, &critical_instant_scenario(&s, 20)).unwrap();
        assert_eq!(
            r.first_miss,
            Some(Miss {
                id: MessageId(1),
                instance: 0,
                nominal_release: 0
            })
        );
    }

    #[test]
    fn critical_instant_copies_jitter() {
        let s = set(vec![
            Message::new(1, 1, 1, 10, 10, 3),
            Message::new(2, 2, 1, 10, 10, 0),
        ]);
        let sc = critical_instant_scenario(&s, 5);
        let firsts: Vec<_> = sc.entries.iter().map(|e| (e.offset, e.first_jitter, e.later_jitter)).collect();
        assert_eq!(firsts, vec![(0, 3, 0), (0, 0, 0)]);
    }

    #[test]
    fn horizon_rules() {
        let h = default_horizon(&micro(), 0);
        assert_eq!(h, Horizon { ticks: 40, clamped: false });
        let s = set(vec![
            Message::new(1, 1, 1, 2, 2, 0),
            Message::new(2, 2, 1, 3, 3, 0),
        ]);
        assert_eq!(default_horizon(&s, 0).ticks, 12);
        let s = set(vec![
            Message::new(1, 1, 1, 99_991, 99_991, 0),
            Message::new(2, 2, 1, 99_989, 99_989, 0),
        ]);
        assert_eq!(
            default_horizon(&s, 0),
            Horizon { ticks: HORIZON_CAP, clamped: true }
        );
        let sc = critical_instant_scenario(&micro(), HORIZON_CAP + 1);
        assert!(matches!(simulate(&micro(), &sc), Err(SimError::HorizonTooLarge { .. })));
    }

    #[test]
    fn in_flight_frames_are_excluded() {
        let s = micro();
        // m2 would finish at 3, after the horizon of 2.
        let r = simulate(&s, &critical_instant_scenario(&s, 2)).unwrap();
        assert_eq!(r.stats[1].completed, 0);
        assert_eq!(r.watermarks(), vec![1, 0]);
    }

    #[test]
    fn invalid_scenarios() {
        let s = micro();
        let mut sc = critical_instant_scenario(&s, 10);
        sc.entries[0].offset = 4;
        assert!(matches!(simulate(&s, &sc), Err(SimError::InvalidScenario(_))));
        let mut sc = critical_instant_scenario(&s, 10);
        sc.entries[1].later_jitter = 1;
        assert!(matches!(simulate(&s, &sc), Err(SimError::InvalidScenario(_))));
        let mut sc = critical_instant_scenario(&s, 10);
        sc.entries.pop();
        assert!(matches!(simulate(&s, &sc), Err(SimError::InvalidScenario(_))));
    }

    #[test]
    fn later_jitter_below_first_jitter() {
        // Instance 1 is queued at 10 while instance 0 waits until 9.
        let s = set(vec![Message::new(1, 1, 1, 10, 10, 9)]);
        let sc = Scenario {
            entries: vec![ScenarioEntry {
                id: MessageId(1),
                offset: 0,
                first_jitter: 9,
                later_jitter: 0,
            }],
            horizon: 30,
        };
        let r = traced(&s, &sc);
        let spans: Vec<_> = r.trace.iter().map(|e| (e.instance, e.start)).collect();
        assert_eq!(spans, vec![(0, 9), (1, 10), (2, 20)]);
        assert_eq!(r.watermarks(), vec![10]);
    }
}
