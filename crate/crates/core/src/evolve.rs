//! Grammatical evolution of response-time formulae, scenario search for
//! counterexamples, and the alternating test/scenario co-evolution loop.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{rta_exact, AnalysisError};
use crate::formula::{
    eval_at, map_genotype, render_formula, EvalOutcome, Formula, Genotype, Grammar,
};
use crate::ga::{
    self, initial_population, one_point, reevaluate, run_from, EvoConfig, GaError, GenRecord,
    Population, Problem,
};
use crate::model::{AnalysisConfig, MessageId, MessageSet, Ticks};
use crate::sim::{
    critical_instant_scenario, default_horizon, random_scenario, simulate_with, Scenario,
    SimError, SimOptions, HORIZON_CAP,
};

/// Codons are drawn from `0..CODON_RANGE`.
pub const CODON_RANGE: u32 = 256;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus has no usable messages")]
    EmptyCorpus,
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Oracle {
    Exact,
    SimWatermark,
}

impl Oracle {
    pub fn name(self) -> &'static str {
        match self {
            Oracle::Exact => "exact",
            Oracle::SimWatermark => "sim-watermark",
        }
    }

    pub fn from_name(s: &str) -> Option<Oracle> {
        [Oracle::Exact, Oracle::SimWatermark].into_iter().find(|o| o.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessConfig {
    pub oracle: Oracle,
    /// Cost per tick of optimism.
    pub p_opt: u64,
    /// Fixed cost of any optimistic message.
    pub k_opt: u64,
    /// Cost of a divergent message.
    pub p_div: u64,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        FitnessConfig {
            oracle: Oracle::Exact,
            p_opt: 1000,
            k_opt: 1_000_000,
            p_div: 10_000_000,
        }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        if !(self.p_div >= self.k_opt && self.k_opt >= self.p_opt && self.p_opt >= 1) {
            return Err(EvolveError::InvalidConfig(
                "penalties must satisfy p_div >= k_opt >= p_opt >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Message sets with a precomputed reference response time per message.
#[derive(Debug, Clone)]
pub struct Corpus {
    sets: Vec<MessageSet>,
    /// Parallel to each set's messages; `None` marks an oracle failure.
    reference: Vec<Vec<Option<Ticks>>>,
    usable: usize,
}

impl Corpus {
    pub fn new(
        sets: Vec<MessageSet>,
        oracle: Oracle,
        cfg: &AnalysisConfig,
    ) -> Result<Corpus, EvolveError> {
        let reference = sets
            .par_iter()
            .map(|set| reference_values(set, oracle, cfg))
            .collect::<Result<Vec<_>, EvolveError>>()?;
        let usable = reference.iter().flatten().filter(|r| r.is_some()).count();
        if usable == 0 {
            return Err(EvolveError::EmptyCorpus);
        }
        Ok(Corpus {
            sets,
            reference,
            usable,
        })
    }

    pub fn sets(&self) -> &[MessageSet] {
        &self.sets
    }

    /// Reference value of message `index` (priority order) of set `set`.
    pub fn reference(&self, set: usize, index: usize) -> Option<Ticks> {
        self.reference[set][index]
    }

    /// Messages that take part in fitness evaluation.
    pub fn usable_messages(&self) -> usize {
        self.usable
    }

    /// Messages excluded because the oracle produced no value.
    pub fn oracle_failures(&self) -> Vec<(usize, MessageId)> {
        let mut out = Vec::new();
        for (s, (set, refs)) in self.sets.iter().zip(&self.reference).enumerate() {
            for (m, r) in set.messages().iter().zip(refs) {
                if r.is_none() {
                    out.push((s, m.id));
                }
            }
        }
        out
    }
}

fn reference_values(
    set: &MessageSet,
    oracle: Oracle,
    cfg: &AnalysisConfig,
) -> Result<Vec<Option<Ticks>>, EvolveError> {
    match oracle {
        Oracle::Exact => set
            .messages()
            .iter()
            .map(|m| Ok(rta_exact(set, m.id, cfg)?.converged()))
            .collect(),
        Oracle::SimWatermark => {
            let h = default_horizon(set, 0);
            let r = simulate_with(set, &critical_instant_scenario(set, h.ticks), &SimOptions::default())?;
            Ok(r.stats.iter().map(|s| (s.completed > 0).then_some(s.watermark)).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    pub total: u64,
    pub optimistic: usize,
    pub divergent: usize,
}

/// Error of one message; lower is better.
fn message_error(outcome: EvalOutcome, reference: Ticks, fc: &FitnessConfig) -> (u64, bool, bool) {
    match outcome {
        EvalOutcome::Value(r) if r >= reference => ((r - reference) as u64, false, false),
        EvalOutcome::Value(r) => {
            let gap = (reference as i128 - r as i128).min(u64::MAX as i128) as u64;
            (fc.p_opt.saturating_mul(gap).saturating_add(fc.k_opt), true, false)
        }
        EvalOutcome::Divergent(_) => (fc.p_div, false, true),
    }
}

/// Sum of per-message errors of `f` against the corpus reference values.
pub fn fitness_of_formula(
    f: &Formula,
    corpus: &Corpus,
    fc: &FitnessConfig,
    cfg: &AnalysisConfig,
) -> FitnessBreakdown {
    evaluate_formula(f, corpus, fc, cfg).0
}

/// Fitness plus, per set, whether `f` deems every message schedulable.
fn evaluate_formula(
    f: &Formula,
    corpus: &Corpus,
    fc: &FitnessConfig,
    cfg: &AnalysisConfig,
) -> (FitnessBreakdown, Vec<bool>) {
    let mut out = FitnessBreakdown::default();
    let mut schedulable = Vec::with_capacity(corpus.sets.len());
    for (set, refs) in corpus.sets.iter().zip(&corpus.reference) {
        let mut all_meet = true;
        for (i, m) in set.messages().iter().enumerate() {
            let outcome = eval_at(f, set, i, cfg);
            all_meet &= matches!(outcome, EvalOutcome::Value(r) if r <= m.d);
            let Some(reference) = refs[i] else { continue };
            let (err, opt, div) = message_error(outcome, reference, fc);
            out.total = out.total.saturating_add(err);
            out.optimistic += usize::from(opt);
            out.divergent += usize::from(div);
        }
        schedulable.push(all_meet);
    }
    (out, schedulable)
}

/// `F(f) / max(F(builtin 1), 1)`.
pub fn normalized_fitness(
    f: &Formula,
    corpus: &Corpus,
    fc: &FitnessConfig,
    cfg: &AnalysisConfig,
) -> f64 {
    let baseline = fitness_of_formula(&crate::formula::builtin(1).unwrap(), corpus, fc, cfg);
    normalize(fitness_of_formula(f, corpus, fc, cfg).total, baseline.total)
}

pub fn normalize(total: u64, baseline: u64) -> f64 {
    total as f64 / baseline.max(1) as f64
}

/// Whether `f` reports every message of `set` as meeting its deadline.
pub fn deems_schedulable(f: &Formula, set: &MessageSet, cfg: &AnalysisConfig) -> bool {
    set.messages()
        .iter()
        .enumerate()
        .all(|(i, m)| matches!(eval_at(f, set, i, cfg), EvalOutcome::Value(r) if r <= m.d))
}

#[derive(Debug, Clone)]
struct Scored {
    breakdown: FitnessBreakdown,
    schedulable: Arc<Vec<bool>>,
}

/// GE over codon strings. Identical phenotypes are scored once per run.
pub struct FormulaProblem<'a> {
    corpus: &'a Corpus,
    grammar: &'a Grammar,
    fc: FitnessConfig,
    cfg: AnalysisConfig,
    cache: Mutex<HashMap<Formula, Scored>>,
    /// Set index of every scenario in the pool that produced a deadline
    /// miss. A test that deems such a set schedulable is refuted by it.
    refuting_sets: Vec<usize>,
}

impl<'a> FormulaProblem<'a> {
    pub fn new(corpus: &'a Corpus, grammar: &'a Grammar, fc: &FitnessConfig, cfg: &AnalysisConfig) -> Self {
        FormulaProblem {
            corpus,
            grammar,
            fc: fc.clone(),
            cfg: cfg.clone(),
            cache: Mutex::new(HashMap::new()),
            refuting_sets: Vec::new(),
        }
    }

    pub fn incomplete_fitness(&self) -> u64 {
        self.fc.p_div.saturating_mul(self.corpus.usable as u64)
    }

    fn score(&self, f: &Formula) -> Scored {
        if let Some(s) = self.cache.lock().unwrap().get(f) {
            return s.clone();
        }
        let (breakdown, schedulable) = evaluate_formula(f, self.corpus, &self.fc, &self.cfg);
        let s = Scored {
            breakdown,
            schedulable: Arc::new(schedulable),
        };
        self.cache.lock().unwrap().insert(f.clone(), s.clone());
        s
    }

    fn refutations(&self, s: &Scored) -> usize {
        self.refuting_sets.iter().filter(|&&i| s.schedulable[i]).count()
    }

    fn total(&self, f: &Formula) -> u64 {
        let s = self.score(f);
        let penalty = self.fc.p_div.saturating_mul(self.refutations(&s) as u64);
        s.breakdown.total.saturating_add(penalty)
    }
}

impl Problem for FormulaProblem<'_> {
    type Genome = Genotype;
    type Fitness = u64;

    fn random(&self, cfg: &EvoConfig, rng: &mut ChaCha8Rng) -> Genotype {
        Genotype::new((0..cfg.codon_len).map(|_| rng.random_range(0..CODON_RANGE)).collect())
    }

    fn crossover(&self, a: &Genotype, b: &Genotype, rng: &mut ChaCha8Rng) -> Genotype {
        Genotype {
            codons: one_point(&a.codons, &b.codons, rng),
            max_wraps: a.max_wraps,
        }
    }

    fn mutate(&self, g: &mut Genotype, rate: f64, rng: &mut ChaCha8Rng) {
        for c in g.codons.iter_mut() {
            if rng.random_bool(rate) {
                *c = rng.random_range(0..CODON_RANGE);
            }
        }
    }

    fn fitness(&self, g: &Genotype) -> u64 {
        match map_genotype(g, self.grammar) {
            Ok(f) => self.total(&f),
            Err(_) => self.incomplete_fitness(),
        }
    }

    fn evaluate(&self, genomes: &[Genotype], parallel: bool) -> Vec<u64> {
        // Map first, then score each distinct formula once.
        let formulas: Vec<Option<Formula>> = genomes
            .iter()
            .map(|g| map_genotype(g, self.grammar).ok())
            .collect();
        let mut distinct: Vec<&Formula> = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            let mut seen = std::collections::HashSet::new();
            for f in formulas.iter().flatten() {
                if !cache.contains_key(f) && seen.insert(f) {
                    distinct.push(f);
                }
            }
        }
        if parallel {
            distinct.par_iter().for_each(|f| {
                self.score(f);
            });
        } else {
            distinct.iter().for_each(|f| {
                self.score(f);
            });
        }
        formulas
            .iter()
            .map(|f| match f {
                Some(f) => self.total(f),
                None => self.incomplete_fitness(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub generation: u32,
    pub best_fitness: u64,
    pub mean_fitness: f64,
    pub best_formula: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub rows: Vec<HistoryRow>,
    pub best: Option<Formula>,
    pub best_fitness: u64,
}

pub const HISTORY_HEADER: &str = "generation,best_fitness,mean_fitness,best_formula";
const INCOMPLETE: &str = "<incomplete>";

impl RunHistory {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{HISTORY_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.3},{}",
                r.generation, r.best_fitness, r.mean_fitness, r.best_formula
            );
        }
        out
    }

    /// Best formula of the last row of a history CSV.
    pub fn final_formula_from_csv(text: &str) -> Result<Formula, String> {
        let last = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
            .skip(1)
            .last()
            .ok_or("history has no rows")?;
        let formula = last.splitn(4, ',').nth(3).ok_or("history row has too few columns")?;
        crate::formula::parse_formula(formula.trim()).map_err(|e| e.to_string())
    }
}

fn history_row(
    rec: &GenRecord<u64>,
    pop: &Population<Genotype, u64>,
    grammar: &Grammar,
) -> HistoryRow {
    let best_formula = map_genotype(&pop.genomes[rec.best_index], grammar)
        .map(|f| render_formula(&f))
        .unwrap_or_else(|_| INCOMPLETE.to_string());
    HistoryRow {
        generation: rec.generation,
        best_fitness: rec.best,
        mean_fitness: rec.mean,
        best_formula,
    }
}

fn check_elitism(rows: &[HistoryRow], evo: &EvoConfig) {
    if evo.elitism >= 1 {
        for w in rows.windows(2) {
            assert!(
                w[1].best_fitness <= w[0].best_fitness,
                "best fitness rose from {} to {} at generation {}",
                w[0].best_fitness,
                w[1].best_fitness,
                w[1].generation
            );
        }
    }
}

/// Runs `generations` steps, recording every generation.
fn run_tests(
    problem: &FormulaProblem<'_>,
    evo: &EvoConfig,
    mut pop: Population<Genotype, u64>,
    generations: u32,
) -> (Population<Genotype, u64>, Vec<HistoryRow>) {
    let mut rows = vec![history_row(&ga::record(&pop), &pop, problem.grammar)];
    for _ in 0..generations {
        pop = ga::next_generation(problem, evo, &pop);
        rows.push(history_row(&ga::record(&pop), &pop, problem.grammar));
    }
    check_elitism(&rows, evo);
    (pop, rows)
}

pub fn evolve_tests(
    corpus: &Corpus,
    grammar: &Grammar,
    evo: &EvoConfig,
    fc: &FitnessConfig,
    cfg: &AnalysisConfig,
) -> Result<RunHistory, EvolveError> {
    fc.validate()?;
    let problem = FormulaProblem::new(corpus, grammar, fc, cfg);
    let pop = initial_population(&problem, evo)?;
    let (pop, rows) = run_tests(&problem, evo, pop, evo.generations);
    let (g, &best_fitness) = pop.best();
    Ok(RunHistory {
        rows,
        best: map_genotype(g, grammar).ok(),
        best_fitness,
    })
}

/// Scenario together with the corpus set it applies to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScenarioGenome {
    pub set: usize,
    pub scenario: Scenario,
}

/// Higher `refuted` is better; `lateness` (largest watermark minus
/// deadline) breaks ties so the search is drawn towards misses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScenarioFitness {
    pub refuted: usize,
    pub lateness: Ticks,
}

impl Ord for ScenarioFitness {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.refuted, other.lateness).cmp(&(self.refuted, self.lateness))
    }
}

impl PartialOrd for ScenarioFitness {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl ga::Fitness for ScenarioFitness {
    fn summary(&self) -> f64 {
        self.refuted as f64
    }
}

/// Simulation length used during scenario search: four of the longest
/// periods plus the largest jitter.
pub fn search_horizon(set: &MessageSet) -> Ticks {
    let max_t = set.messages().iter().map(|m| m.t).max().unwrap_or(1);
    let max_j = set.messages().iter().map(|m| m.j).max().unwrap_or(0);
    (4 * max_t + max_j).min(HORIZON_CAP)
}

fn lateness_and_miss(set: &MessageSet, s: &Scenario) -> Result<(Ticks, bool), SimError> {
    let r = simulate_with(
        set,
        s,
        &SimOptions {
            stop_at_first_miss: true,
            ..Default::default()
        },
    )?;
    let lateness = set
        .messages()
        .iter()
        .zip(&r.stats)
        .map(|(m, st)| st.watermark - m.d)
        .max()
        .unwrap_or(Ticks::MIN);
    Ok((lateness, r.first_miss.is_some()))
}

/// Number of `tests` that deem `set` schedulable while simulating `s`
/// shows a deadline miss.
pub fn scenario_fitness(
    set: &MessageSet,
    s: &Scenario,
    tests: &[Formula],
    cfg: &AnalysisConfig,
) -> Result<usize, SimError> {
    let (_, miss) = lateness_and_miss(set, s)?;
    if !miss {
        return Ok(0);
    }
    Ok(tests.iter().filter(|f| deems_schedulable(f, set, cfg)).count())
}

pub struct ScenarioProblem<'a> {
    corpus: &'a Corpus,
    /// Per set, the number of current tests that deem it schedulable.
    accepting: Vec<usize>,
}

impl<'a> ScenarioProblem<'a> {
    pub fn new(corpus: &'a Corpus, tests: &[Formula], cfg: &AnalysisConfig) -> Self {
        let accepting = corpus
            .sets
            .par_iter()
            .map(|set| tests.iter().filter(|f| deems_schedulable(f, set, cfg)).count())
            .collect();
        ScenarioProblem { corpus, accepting }
    }
}

impl Problem for ScenarioProblem<'_> {
    type Genome = ScenarioGenome;
    type Fitness = ScenarioFitness;

    fn random(&self, _: &EvoConfig, rng: &mut ChaCha8Rng) -> ScenarioGenome {
        let set = rng.random_range(0..self.corpus.sets.len());
        let s = &self.corpus.sets[set];
        ScenarioGenome {
            set,
            scenario: random_scenario(s, search_horizon(s), rng),
        }
    }

    fn crossover(&self, a: &ScenarioGenome, b: &ScenarioGenome, rng: &mut ChaCha8Rng) -> ScenarioGenome {
        if a.set != b.set {
            return a.clone();
        }
        ScenarioGenome {
            set: a.set,
            scenario: Scenario {
                entries: one_point(&a.scenario.entries, &b.scenario.entries, rng),
                horizon: a.scenario.horizon,
            },
        }
    }

    fn mutate(&self, g: &mut ScenarioGenome, rate: f64, rng: &mut ChaCha8Rng) {
        let set = &self.corpus.sets[g.set];
        for (e, m) in g.scenario.entries.iter_mut().zip(set.messages()) {
            if rng.random_bool(rate) {
                match rng.random_range(0..3) {
                    0 => e.offset = rng.random_range(0..m.t),
                    1 => e.first_jitter = rng.random_range(0..=m.j),
                    _ => e.later_jitter = rng.random_range(0..=m.j),
                }
            }
        }
    }

    fn fitness(&self, g: &ScenarioGenome) -> ScenarioFitness {
        let set = &self.corpus.sets[g.set];
        let (lateness, miss) = lateness_and_miss(set, &g.scenario).expect("valid scenario");
        ScenarioFitness {
            refuted: if miss { self.accepting[g.set] } else { 0 },
            lateness,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSearch {
    pub best: ScenarioGenome,
    pub fitness: ScenarioFitness,
    pub history: Vec<GenRecord<ScenarioFitness>>,
}

/// GA over scenarios of the corpus sets, scored against `tests`.
pub fn evolve_scenarios(
    corpus: &Corpus,
    tests: &[Formula],
    evo: &EvoConfig,
    cfg: &AnalysisConfig,
) -> Result<ScenarioSearch, EvolveError> {
    let problem = ScenarioProblem::new(corpus, tests, cfg);
    let run = ga::run(&problem, evo)?;
    let (best, &fitness) = run.last.best();
    Ok(ScenarioSearch {
        best: best.clone(),
        fitness,
        history: run.history,
    })
}

/// `samples` independent random scenarios per set; returns the best.
pub fn random_scenario_search(
    corpus: &Corpus,
    tests: &[Formula],
    samples: usize,
    seed: u64,
    cfg: &AnalysisConfig,
) -> (ScenarioGenome, ScenarioFitness) {
    let problem = ScenarioProblem::new(corpus, tests, cfg);
    let candidates: Vec<(ScenarioGenome, ScenarioFitness)> = (0..corpus.sets.len())
        .into_par_iter()
        .flat_map_iter(|set| {
            let problem = &problem;
            (0..samples).map(move |k| {
                let mut rng = ga::slot_rng(seed, set as u32, k);
                let s = &corpus.sets[set];
                let g = ScenarioGenome {
                    set,
                    scenario: random_scenario(s, search_horizon(s), &mut rng),
                };
                let f = problem.fitness(&g);
                (g, f)
            })
        })
        .collect();
    candidates
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| (&a.1, i).cmp(&(&b.1, j)))
        .map(|(_, c)| c)
        .expect("non-empty corpus")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoevolutionConfig {
    pub rounds: u32,
    pub test_epochs: u32,
    pub scenario_epochs: u32,
    /// Number of best distinct tests the scenarios are scored against.
    pub top_n: usize,
}

impl Default for CoevolutionConfig {
    fn default() -> Self {
        CoevolutionConfig {
            rounds: 3,
            test_epochs: 20,
            scenario_epochs: 10,
            top_n: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub best_test_fitness: u64,
    pub best_test: String,
    pub best_scenario_refutes: usize,
    pub refuting_scenarios: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coevolution {
    /// Distinct best tests with their final fitness, best first.
    pub tests: Vec<(Formula, u64)>,
    /// Scenarios that produce a miss, best first.
    pub scenarios: Vec<(ScenarioGenome, ScenarioFitness)>,
    pub rounds: Vec<RoundRecord>,
    pub test_history: Vec<HistoryRow>,
}

fn top_tests(pop: &Population<Genotype, u64>, grammar: &Grammar, n: usize) -> Vec<(Formula, u64)> {
    let mut out: Vec<(Formula, u64)> = Vec::new();
    for i in pop.ranking() {
        if out.len() == n {
            break;
        }
        if let Ok(f) = map_genotype(&pop.genomes[i], grammar) {
            if !out.iter().any(|(g, _)| *g == f) {
                out.push((f, pop.fitness[i]));
            }
        }
    }
    out
}

fn hardest(pop: &Population<ScenarioGenome, ScenarioFitness>) -> Vec<(ScenarioGenome, ScenarioFitness)> {
    let mut out: Vec<(ScenarioGenome, ScenarioFitness)> = Vec::new();
    for i in pop.ranking() {
        let g = &pop.genomes[i];
        if pop.fitness[i].lateness > 0 && !out.iter().any(|(h, _)| h == g) {
            out.push((g.clone(), pop.fitness[i]));
        }
    }
    out
}

/// Derived seed for the scenario population so it never shares streams
/// with the test population.
fn scenario_seed(seed: u64) -> u64 {
    seed ^ 0x5ce7_a210_0000_0001
}

/// Alternates test evolution (penalised by every pool scenario that refutes
/// the test) with scenario evolution against the current best tests.
pub fn coevolve(
    corpus: &Corpus,
    grammar: &Grammar,
    evo: &EvoConfig,
    scenario_evo: &EvoConfig,
    co: &CoevolutionConfig,
    fc: &FitnessConfig,
    cfg: &AnalysisConfig,
) -> Result<Coevolution, EvolveError> {
    fc.validate()?;
    if co.top_n == 0 {
        return Err(EvolveError::InvalidConfig("top_n must be >= 1".into()));
    }
    let scen_evo = EvoConfig {
        seed: scenario_seed(scenario_evo.seed),
        ..scenario_evo.clone()
    };
    let mut tests = FormulaProblem::new(corpus, grammar, fc, cfg);
    let mut test_pop = initial_population(&tests, evo)?;
    let mut test_history = vec![history_row(&ga::record(&test_pop), &test_pop, grammar)];
    let top: Vec<Formula> = top_tests(&test_pop, grammar, co.top_n).into_iter().map(|t| t.0).collect();
    let mut scen_pop = initial_population(&ScenarioProblem::new(corpus, &top, cfg), &scen_evo)?;
    let mut rounds = Vec::new();

    for round in 0..co.rounds {
        tests.refuting_sets = hardest(&scen_pop)
            .into_iter()
            .map(|(g, _)| g.set)
            .collect();
        test_pop = reevaluate(&tests, evo, test_pop);
        let (pop, rows) = run_tests(&tests, evo, test_pop, co.test_epochs);
        test_pop = pop;
        test_history.extend(rows);

        let best_tests = top_tests(&test_pop, grammar, co.top_n);
        let top: Vec<Formula> = best_tests.iter().map(|t| t.0.clone()).collect();
        let scenarios = ScenarioProblem::new(corpus, &top, cfg);
        scen_pop = reevaluate(&scenarios, &scen_evo, scen_pop);
        scen_pop = run_from(&scenarios, &scen_evo, scen_pop, co.scenario_epochs).last;

        let (_, sbest) = scen_pop.best();
        rounds.push(RoundRecord {
            round: round + 1,
            best_test_fitness: best_tests.first().map_or(u64::MAX, |t| t.1),
            best_test: best_tests
                .first()
                .map_or_else(|| INCOMPLETE.to_string(), |t| render_formula(&t.0)),
            best_scenario_refutes: sbest.refuted,
            refuting_scenarios: hardest(&scen_pop).len(),
        });
    }
    Ok(Coevolution {
        tests: top_tests(&test_pop, grammar, co.top_n),
        scenarios: hardest(&scen_pop),
        rounds,
        test_history,
    })
}
