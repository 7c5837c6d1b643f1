//! Domain types: CAN messages, priority-ordered message sets, task graphs
//! and platforms.
//!
//! All durations are integer ticks (one tick is the smallest representable
//! duration, e.g. one CAN bit time). Priorities follow CAN identifier
//! semantics: a smaller number is a higher priority.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Duration or instant in integer ticks.
pub type Ticks = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageId(pub u32);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("priority {priority} is used by more than one message")]
    DuplicatePriority { priority: u32 },
    #[error("message id {0} appears more than once")]
    DuplicateId(MessageId),
    #[error("message {id}: parameter {field} must be {bound}, got {value}")]
    NonPositiveParameter {
        id: MessageId,
        field: &'static str,
        bound: &'static str,
        value: i64,
    },
    #[error("unknown message {0}")]
    UnknownMessage(MessageId),
    #[error("invalid task graph: {0}")]
    InvalidTaskGraph(String),
    #[error("platform must have at least one node")]
    EmptyPlatform,
}

/// Timing parameters of one CAN frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    /// 1 is the highest priority.
    pub priority: u32,
    /// Transmission time.
    pub c: Ticks,
    /// Period.
    pub t: Ticks,
    /// Relative deadline.
    pub d: Ticks,
    /// Release jitter.
    pub j: Ticks,
}

impl Message {
    pub fn new(id: u32, priority: u32, c: Ticks, t: Ticks, d: Ticks, j: Ticks) -> Self {
        Message {
            id: MessageId(id),
            priority,
            c,
            t,
            d,
            j,
        }
    }

    pub fn utilization(&self) -> f64 {
        self.c as f64 / self.t as f64
    }
}

/// Non-fatal irregularities found while validating a message set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flag {
    DeadlineExceedsPeriod(MessageId),
    CostExceedsDeadline(MessageId),
}

/// A validated, priority-sorted collection of messages.
///
/// Because messages are stored highest priority first, `hp(i)` is the
/// prefix before `i` and `lp(i)` is the suffix after it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MessageSet {
    messages: Vec<Message>,
    flags: Vec<Flag>,
}

/// Validates raw messages and sorts them by priority.
///
/// Messages with `d > t` or `c > d` are accepted and reported through
/// [`MessageSet::flags`].
pub fn validate_message_set(raw: Vec<Message>) -> Result<MessageSet, ModelError> {
    let mut priorities = HashSet::with_capacity(raw.len());
    let mut ids = HashSet::with_capacity(raw.len());
    for m in &raw {
        check_positive(m.id, "c", m.c)?;
        check_positive(m.id, "t", m.t)?;
        check_positive(m.id, "d", m.d)?;
        if m.j < 0 {
            return Err(ModelError::NonPositiveParameter {
                id: m.id,
                field: "j",
                bound: ">= 0",
                value: m.j,
            });
        }
        if m.priority == 0 {
            return Err(ModelError::NonPositiveParameter {
                id: m.id,
                field: "priority",
                bound: ">= 1",
                value: 0,
            });
        }
        if !priorities.insert(m.priority) {
            return Err(ModelError::DuplicatePriority {
                priority: m.priority,
            });
        }
        if !ids.insert(m.id) {
            return Err(ModelError::DuplicateId(m.id));
        }
    }

    let mut messages = raw;
    messages.sort_by_key(|m| m.priority);
    let mut flags = Vec::new();
    for m in &messages {
        if m.d > m.t {
            flags.push(Flag::DeadlineExceedsPeriod(m.id));
        }
        if m.c > m.d {
            flags.push(Flag::CostExceedsDeadline(m.id));
        }
    }
    Ok(MessageSet { messages, flags })
}

fn check_positive(id: MessageId, field: &'static str, value: Ticks) -> Result<(), ModelError> {
    if value < 1 {
        return Err(ModelError::NonPositiveParameter {
            id,
            field,
            bound: ">= 1",
            value,
        });
    }
    Ok(())
}

impl MessageSet {
    pub fn empty() -> Self {
        MessageSet::default()
    }

    /// Messages in priority order, highest first.
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn flags(&self) -> &[Flag] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn utilization(&self) -> f64 {
        self.messages.iter().map(Message::utilization).sum()
    }

    /// Position of `id` in priority order.
    pub fn index_of(&self, id: MessageId) -> Result<usize, ModelError> {
        self.messages
            .iter()
            .position(|m| m.id == id)
            .ok_or(ModelError::UnknownMessage(id))
    }

    pub fn get(&self, id: MessageId) -> Result<&Message, ModelError> {
        self.index_of(id).map(|i| &self.messages[i])
    }

    /// Messages with strictly higher priority than `id`, in priority order.
    pub fn hp(&self, id: MessageId) -> Result<&[Message], ModelError> {
        let i = self.index_of(id)?;
        Ok(&self.messages[..i])
    }

    /// Messages with strictly lower priority than `id`, in priority order.
    pub fn lp(&self, id: MessageId) -> Result<&[Message], ModelError> {
        let i = self.index_of(id)?;
        Ok(&self.messages[i + 1..])
    }

    /// Returns a copy of the set with every transmission time replaced by
    /// `f(c)`. The priority order is unchanged.
    pub fn map_costs(&self, f: impl Fn(Ticks) -> Ticks) -> MessageSet {
        let messages = self
            .messages
            .iter()
            .map(|m| Message { c: f(m.c), ..*m })
            .collect();
        MessageSet {
            messages,
            flags: self.flags.clone(),
        }
    }
}

/// Free-function form of [`MessageSet::hp`].
pub fn hp_set(set: &MessageSet, id: MessageId) -> Result<Vec<Message>, ModelError> {
    set.hp(id).map(<[Message]>::to_vec)
}

/// A periodic task executing on one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub wcet: Ticks,
    pub t: Ticks,
    pub d: Ticks,
    pub priority: u32,
}

/// A directed communication from `src` to `dst`. When the endpoints are
/// allocated to different nodes, `frame` is transmitted on the shared bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: TaskId,
    pub dst: TaskId,
    pub frame: Message,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskGraph {
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

impl TaskGraph {
    pub fn new(tasks: Vec<Task>, edges: Vec<Edge>) -> Result<Self, ModelError> {
        let tg = TaskGraph { tasks, edges };
        tg.validate()?;
        Ok(tg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidTaskGraph(msg));
        let mut ids = HashSet::new();
        let mut prios = HashSet::new();
        for t in &self.tasks {
            if !ids.insert(t.id) {
                return bad(format!("duplicate task id {}", t.id));
            }
            if !prios.insert(t.priority) {
                return bad(format!("duplicate task priority {}", t.priority));
            }
            // wcet > d is allowed: such a task is simply unschedulable.
            if t.wcet < 1 || t.d < 1 || t.t < 1 {
                return bad(format!("task {} needs positive wcet, d and t", t.id));
            }
        }
        let mut frame_prios = HashSet::new();
        let mut frame_ids = HashSet::new();
        for e in &self.edges {
            if !ids.contains(&e.src) || !ids.contains(&e.dst) {
                return bad(format!("edge {} -> {} has a missing endpoint", e.src, e.dst));
            }
            if !frame_prios.insert(e.frame.priority) {
                return bad(format!("duplicate frame priority {}", e.frame.priority));
            }
            if !frame_ids.insert(e.frame.id) {
                return bad(format!("duplicate frame id {}", e.frame.id));
            }
        }
        // Reuse the message checks for frame parameters.
        validate_message_set(self.edges.iter().map(|e| e.frame).collect())?;
        Ok(())
    }

    pub fn task_index(&self, id: TaskId) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }
}

/// Identical processors sharing one bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Platform {
    node_count: usize,
}

impl Platform {
    pub fn new(node_count: usize) -> Result<Self, ModelError> {
        if node_count == 0 {
            return Err(ModelError::EmptyPlatform);
        }
        Ok(Platform { node_count })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }
}

/// Knobs shared by every fixed-point computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Arbitration granularity added inside the exact test's interference
    /// term.
    pub tau_bit: Ticks,
    pub iter_limit: u32,
    /// Iterates above `cap_factor * max(D_i, T_i)` are treated as divergent.
    pub cap_factor: i64,
    /// Stop as soon as an iterate exceeds the deadline and report
    /// `ExceededDeadline` instead of continuing to a fixed point.
    pub stop_at_deadline: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            tau_bit: 1,
            iter_limit: 256,
            cap_factor: 4,
            stop_at_deadline: false,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.tau_bit < 0 {
            return Err("tau_bit must be >= 0".into());
        }
        if self.iter_limit < 1 {
            return Err("iter_limit must be >= 1".into());
        }
        if self.cap_factor < 1 {
            return Err("cap_factor must be >= 1".into());
        }
        Ok(())
    }

    /// Divergence cap for a message.
    pub fn cap_for(&self, m: &Message) -> Ticks {
        self.cap_factor.saturating_mul(m.d.max(m.t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> MessageSet {
        validate_message_set(vec![
            Message::new(10, 3, 1, 10, 10, 0),
            Message::new(11, 1, 1, 4, 4, 0),
            Message::new(12, 2, 2, 8, 8, 0),
        ])
        .unwrap()
    }

    #[test]
    fn singleton_is_valid() {
        let set = validate_message_set(vec![Message::new(1, 1, 1, 4, 4, 0)]).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.flags().is_empty());
    }

    #[test]
    fn duplicate_priority_rejected() {
        let err = validate_message_set(vec![
            Message::new(1, 1, 1, 4, 4, 0),
            Message::new(2, 1, 1, 4, 4, 0),
        ])
        .unwrap_err();
        assert_eq!(err, ModelError::DuplicatePriority { priority: 1 });
    }

    #[test]
    fn zero_cost_rejected() {
        let err = validate_message_set(vec![Message::new(1, 1, 0, 4, 4, 0)]).unwrap_err();
        assert!(matches!(
            err,
            ModelError::NonPositiveParameter { field: "c", .. }
        ));
    }

    #[test]
    fn negative_jitter_rejected() {
        let err = validate_message_set(vec![Message::new(1, 1, 1, 4, 4, -1)]).unwrap_err();
        assert!(matches!(
            err,
            ModelError::NonPositiveParameter { field: "j", .. }
        ));
    }

    #[test]
    fn irregular_messages_are_flagged_not_rejected() {
        let set = validate_message_set(vec![
            Message::new(1, 1, 1, 4, 6, 0),
            Message::new(2, 2, 5, 10, 3, 0),
        ])
        .unwrap();
        assert_eq!(
            set.flags(),
            &[
                Flag::DeadlineExceedsPeriod(MessageId(1)),
                Flag::CostExceedsDeadline(MessageId(2))
            ]
        );
    }

    #[test]
    fn hp_and_lp() {
        let set = three();
        assert!(set.hp(MessageId(11)).unwrap().is_empty());
        let ids = |ms: &[Message]| ms.iter().map(|m| m.id.0).collect::<Vec<_>>();
        assert_eq!(ids(set.hp(MessageId(10)).unwrap()), vec![11, 12]);
        assert_eq!(ids(set.hp(MessageId(12)).unwrap()), vec![11]);
        assert_eq!(ids(set.lp(MessageId(11)).unwrap()), vec![12, 10]);
        assert_eq!(
            hp_set(&set, MessageId(99)).unwrap_err(),
            ModelError::UnknownMessage(MessageId(99))
        );
    }

    #[test]
    fn validation_is_idempotent() {
        let set = three();
        let again = validate_message_set(set.messages().to_vec()).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn task_graph_checks_endpoints() {
        let task = |id, prio| Task {
            id: TaskId(id),
            wcet: 1,
            t: 10,
            d: 10,
            priority: prio,
        };
        let edge = Edge {
            src: TaskId(1),
            dst: TaskId(3),
            frame: Message::new(1, 1, 1, 10, 10, 0),
        };
        assert!(TaskGraph::new(vec![task(1, 1), task(2, 2)], vec![edge]).is_err());
        assert!(TaskGraph::new(vec![task(1, 1), task(3, 2)], vec![edge]).is_ok());
        assert!(TaskGraph::new(vec![task(1, 1), task(3, 1)], vec![]).is_err());
    }

    #[test]
    fn analysis_config_bounds() {
        assert!(AnalysisConfig::default().validate().is_ok());
        let bad = AnalysisConfig {
            cap_factor: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(Platform::new(0).is_err());
    }
}
