//! Evolutionary task allocation scored by schedulability.
//!
//! Tasks run under preemptive fixed priority on their node. An edge whose
//! endpoints sit on different nodes becomes a CAN frame released with
//! jitter equal to the sender's response time; all such frames are
//! analysed together with the exact bus test.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{iterate, rta_exact, AnalysisError, Fixpoint};
use crate::ga::{self, one_point, EvoConfig, GaError, GenRecord, Problem};
use crate::model::{
    validate_message_set, AnalysisConfig, Message, ModelError, Platform, TaskGraph, Ticks,
};

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("invalid chromosome: {0}")]
    InvalidChromosome(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Ga(#[from] GaError),
}

/// Node index per task, parallel to `TaskGraph::tasks`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AllocationChromosome {
    pub genes: Vec<usize>,
}

impl AllocationChromosome {
    pub fn validate(&self, tg: &TaskGraph, platform: &Platform) -> Result<(), AllocError> {
        if self.genes.len() != tg.tasks.len() {
            return Err(AllocError::InvalidChromosome(format!(
                "{} genes for {} tasks",
                self.genes.len(),
                tg.tasks.len()
            )));
        }
        if let Some(g) = self.genes.iter().find(|&&g| g >= platform.node_count()) {
            return Err(AllocError::InvalidChromosome(format!(
                "node {g} out of range for {} nodes",
                platform.node_count()
            )));
        }
        Ok(())
    }
}

/// Frequency `steps / per_unit` times nominal, or unschedulable at every
/// searched frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frequency {
    Finite { steps: u32, per_unit: u32 },
    Infinite,
}

impl Frequency {
    pub fn as_f64(self) -> f64 {
        match self {
            Frequency::Finite { steps, per_unit } => steps as f64 / per_unit as f64,
            Frequency::Infinite => f64::INFINITY,
        }
    }
}

impl Ord for Frequency {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Frequency::Infinite, Frequency::Infinite) => Ordering::Equal,
            (Frequency::Infinite, _) => Ordering::Greater,
            (_, Frequency::Infinite) => Ordering::Less,
            (
                Frequency::Finite { steps: a, per_unit: pa },
                Frequency::Finite { steps: b, per_unit: pb },
            ) => (*a as u64 * *pb as u64).cmp(&(*b as u64 * *pa as u64)),
        }
    }
}

impl PartialOrd for Frequency {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frequency::Finite { .. } => write!(f, "{}", self.as_f64()),
            Frequency::Infinite => f.write_str("inf"),
        }
    }
}

/// Count is maximised and Breakdown minimised; the ordering puts the
/// better value first so the GA can minimise uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocFitness {
    Count(usize),
    Breakdown(Frequency),
}

impl Ord for AllocFitness {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (AllocFitness::Count(a), AllocFitness::Count(b)) => b.cmp(a),
            (AllocFitness::Breakdown(a), AllocFitness::Breakdown(b)) => a.cmp(b),
            (AllocFitness::Count(_), AllocFitness::Breakdown(_)) => Ordering::Less,
            (AllocFitness::Breakdown(_), AllocFitness::Count(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for AllocFitness {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AllocFitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocFitness::Count(n) => write!(f, "{n}"),
            AllocFitness::Breakdown(fr) => write!(f, "{fr}"),
        }
    }
}

impl ga::Fitness for AllocFitness {
    fn summary(&self) -> f64 {
        match self {
            AllocFitness::Count(n) => *n as f64,
            AllocFitness::Breakdown(fr) => fr.as_f64(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessKind {
    Count,
    Breakdown,
}

impl FitnessKind {
    pub fn from_name(s: &str) -> Option<FitnessKind> {
        match s {
            "count" => Some(FitnessKind::Count),
            "breakdown" => Some(FitnessKind::Breakdown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownConfig {
    /// Search steps per unit of frequency (the resolution is its inverse).
    pub per_unit: u32,
    /// Largest searched multiple of the nominal frequency.
    pub f_max: u32,
}

impl Default for BreakdownConfig {
    fn default() -> Self {
        BreakdownConfig {
            per_unit: 1024,
            f_max: 16,
        }
    }
}

/// Per-task and per-edge schedulability of one allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocReport {
    pub tasks: Vec<bool>,
    pub task_response: Vec<Option<Ticks>>,
    pub edges: Vec<bool>,
}

impl AllocReport {
    pub fn count(&self) -> usize {
        self.tasks.iter().chain(&self.edges).filter(|&&ok| ok).count()
    }

    pub fn fully_schedulable(&self) -> bool {
        self.tasks.iter().chain(&self.edges).all(|&ok| ok)
    }
}

/// `ceil(c * per_unit / steps)`: transmission or execution time at
/// frequency `steps / per_unit`.
fn scale(c: Ticks, steps: u32, per_unit: u32) -> Ticks {
    if steps == per_unit {
        return c;
    }
    let num = c as i128 * per_unit as i128;
    let k = steps as i128;
    ((num + k - 1) / k).min(Ticks::MAX as i128) as Ticks
}

/// Response times at frequency `steps / per_unit`.
fn analyse(
    tg: &TaskGraph,
    chrom: &AllocationChromosome,
    cfg: &AnalysisConfig,
    steps: u32,
    per_unit: u32,
) -> Result<AllocReport, AllocError> {
    let n = tg.tasks.len();
    let wcet: Vec<Ticks> = tg.tasks.iter().map(|t| scale(t.wcet, steps, per_unit)).collect();
    let mut tasks = vec![false; n];
    // A sender without a converged response time releases its frame with
    // jitter equal to the divergence cap; the frame still loads the bus.
    let mut jitter = vec![0; n];
    let mut task_response = vec![None; n];
    for i in 0..n {
        let me = &tg.tasks[i];
        let hp: Vec<usize> = (0..n)
            .filter(|&k| chrom.genes[k] == chrom.genes[i] && tg.tasks[k].priority < me.priority)
            .collect();
        let cap = cfg.cap_factor.saturating_mul(me.d.max(me.t));
        let fp = iterate(wcet[i], cap, cfg.iter_limit, None, |r| {
            let mut next = wcet[i];
            for &k in &hp {
                let tk = tg.tasks[k].t;
                let jobs = r.checked_add(tk - 1).ok_or(())?.div_euclid(tk);
                next = next.checked_add(jobs.checked_mul(wcet[k]).ok_or(())?).ok_or(())?;
            }
            Ok::<_, ()>(next)
        });
        match fp {
            Ok(Fixpoint::Converged(r, _)) => {
                tasks[i] = r <= me.d;
                jitter[i] = r;
                task_response[i] = Some(r);
            }
            _ => jitter[i] = cap,
        }
    }

    let mut edges = vec![true; tg.edges.len()];
    let mut frames = Vec::new();
    let mut frame_edge = Vec::new();
    for (e, edge) in tg.edges.iter().enumerate() {
        let s = tg.task_index(edge.src).expect("validated graph");
        let d = tg.task_index(edge.dst).expect("validated graph");
        if chrom.genes[s] == chrom.genes[d] {
            continue;
        }
        frames.push(Message {
            c: scale(edge.frame.c, steps, per_unit),
            j: jitter[s],
            ..edge.frame
        });
        frame_edge.push((edge.frame.id, (e, s)));
    }
    if !frames.is_empty() {
        let set = validate_message_set(frames)?;
        for (id, (e, s)) in frame_edge {
            let m = set.get(id)?;
            edges[e] = tasks[s] && rta_exact(&set, id, cfg)?.meets(m.d);
        }
    }
    Ok(AllocReport {
        tasks,
        task_response,
        edges,
    })
}

pub fn allocation_report(
    tg: &TaskGraph,
    platform: &Platform,
    chrom: &AllocationChromosome,
    cfg: &AnalysisConfig,
) -> Result<AllocReport, AllocError> {
    chrom.validate(tg, platform)?;
    analyse(tg, chrom, cfg, 1, 1)
}

/// Number of schedulable tasks plus schedulable edges.
pub fn allocation_fitness(
    tg: &TaskGraph,
    platform: &Platform,
    chrom: &AllocationChromosome,
    cfg: &AnalysisConfig,
) -> Result<AllocFitness, AllocError> {
    Ok(AllocFitness::Count(allocation_report(tg, platform, chrom, cfg)?.count()))
}

/// Full schedulability with every cost scaled to frequency
/// `steps / bc.per_unit`.
pub fn schedulable_at(
    tg: &TaskGraph,
    platform: &Platform,
    chrom: &AllocationChromosome,
    cfg: &AnalysisConfig,
    steps: u32,
    bc: &BreakdownConfig,
) -> Result<bool, AllocError> {
    chrom.validate(tg, platform)?;
    if steps == 0 {
        return Err(AllocError::InvalidConfig("frequency must be positive".into()));
    }
    Ok(analyse(tg, chrom, cfg, steps, bc.per_unit)?.fully_schedulable())
}

/// Least frequency on the `1 / per_unit` grid in `(0, f_max]` at which the
/// allocation is fully schedulable.
pub fn breakdown_frequency(
    tg: &TaskGraph,
    platform: &Platform,
    chrom: &AllocationChromosome,
    cfg: &AnalysisConfig,
    bc: &BreakdownConfig,
) -> Result<Frequency, AllocError> {
    if bc.per_unit == 0 || bc.f_max == 0 {
        return Err(AllocError::InvalidConfig("per_unit and f_max must be positive".into()));
    }
    let top = bc.f_max * bc.per_unit;
    if !schedulable_at(tg, platform, chrom, cfg, top, bc)? {
        return Ok(Frequency::Infinite);
    }
    let (mut lo, mut hi) = (1, top);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if schedulable_at(tg, platform, chrom, cfg, mid, bc)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Frequency::Finite {
        steps: lo,
        per_unit: bc.per_unit,
    })
}

pub struct AllocProblem<'a> {
    pub tg: &'a TaskGraph,
    pub platform: &'a Platform,
    pub cfg: AnalysisConfig,
    pub kind: FitnessKind,
    pub breakdown: BreakdownConfig,
}

impl AllocProblem<'_> {
    pub fn score(&self, chrom: &AllocationChromosome) -> Result<AllocFitness, AllocError> {
        match self.kind {
            FitnessKind::Count => allocation_fitness(self.tg, self.platform, chrom, &self.cfg),
            FitnessKind::Breakdown => Ok(AllocFitness::Breakdown(breakdown_frequency(
                self.tg,
                self.platform,
                chrom,
                &self.cfg,
                &self.breakdown,
            )?)),
        }
    }
}

impl Problem for AllocProblem<'_> {
    type Genome = AllocationChromosome;
    type Fitness = AllocFitness;

    fn random(&self, _: &EvoConfig, rng: &mut ChaCha8Rng) -> AllocationChromosome {
        AllocationChromosome {
            genes: (0..self.tg.tasks.len())
                .map(|_| rng.random_range(0..self.platform.node_count()))
                .collect(),
        }
    }

    fn crossover(
        &self,
        a: &AllocationChromosome,
        b: &AllocationChromosome,
        rng: &mut ChaCha8Rng,
    ) -> AllocationChromosome {
        AllocationChromosome {
            genes: one_point(&a.genes, &b.genes, rng),
        }
    }

    /// Redraws one uniformly chosen gene with probability
    /// `min(1, rate * genes)`, i.e. the per-gene rate in expectation.
    fn mutate(&self, g: &mut AllocationChromosome, rate: f64, rng: &mut ChaCha8Rng) {
        if g.genes.is_empty() {
            return;
        }
        let p = (rate * g.genes.len() as f64).min(1.0);
        if rng.random_bool(p) {
            let i = rng.random_range(0..g.genes.len());
            g.genes[i] = rng.random_range(0..self.platform.node_count());
        }
    }

    fn fitness(&self, g: &AllocationChromosome) -> AllocFitness {
        self.score(g).expect("chromosomes produced by the GA are valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocRun {
    pub best: AllocationChromosome,
    pub fitness: AllocFitness,
    pub history: Vec<GenRecord<AllocFitness>>,
}

pub fn evolve_allocation(
    tg: &TaskGraph,
    platform: &Platform,
    evo: &EvoConfig,
    kind: FitnessKind,
    cfg: &AnalysisConfig,
    bc: &BreakdownConfig,
) -> Result<AllocRun, AllocError> {
    let p = AllocProblem {
        tg,
        platform,
        cfg: cfg.clone(),
        kind,
        breakdown: *bc,
    };
    let run = ga::run(&p, evo)?;
    let (best, &fitness) = run.last.best();
    Ok(AllocRun {
        best: best.clone(),
        fitness,
        history: run.history,
    })
}
