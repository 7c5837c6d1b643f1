//! Flat `key = value` run configuration shared by every subcommand.

use rtevo::alloc::BreakdownConfig;
use rtevo::evolve::{CoevolutionConfig, FitnessConfig, Oracle};
use rtevo::formula::{parse_formula, render_formula, Formula, Grammar};
use rtevo::ga::EvoConfig;
use rtevo::gen::GenParams;
use rtevo::io::Provenance;
use rtevo::model::AnalysisConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gen: GenParams,
    pub evo: EvoConfig,
    pub fitness: FitnessConfig,
    pub analysis: AnalysisConfig,
    pub coevolution: CoevolutionConfig,
    pub scenario_population: usize,
    pub breakdown: BreakdownConfig,
    /// `None` means the standard grammar; otherwise the grammar is pinned to
    /// this formula.
    pub pinned: Option<Formula>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gen: GenParams::default(),
            evo: EvoConfig::default(),
            fitness: FitnessConfig::default(),
            analysis: AnalysisConfig::default(),
            coevolution: CoevolutionConfig::default(),
            scenario_population: 50,
            breakdown: BreakdownConfig::default(),
            pinned: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| format!("{key}: cannot parse {v:?}: {e}"))
}

impl RunConfig {
    /// Applies every `key = value` line of `text`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "seed" => {
                let s = num(key, v)?;
                self.gen.seed = s;
                self.evo.seed = s;
            }
            "n_sets" => self.gen.n_sets = num(key, v)?,
            "msgs_per_set" => self.gen.msgs_per_set = num(key, v)?,
            "total_msgs" => {
                self.gen.total_msgs = if v == "none" { None } else { Some(num(key, v)?) }
            }
            "target_util" => self.gen.target_util = num(key, v)?,
            "t_min" => self.gen.t_min = num(key, v)?,
            "t_max" => self.gen.t_max = num(key, v)?,
            "deadline_factor" => self.gen.deadline_factor = num(key, v)?,
            "jitter_factor" => self.gen.jitter_factor = num(key, v)?,
            "population" => self.evo.population = num(key, v)?,
            "generations" => self.evo.generations = num(key, v)?,
            "tournament" => self.evo.tournament = num(key, v)?,
            "crossover_rate" => self.evo.crossover_rate = num(key, v)?,
            "mutation_rate" => self.evo.mutation_rate = num(key, v)?,
            "elitism" => self.evo.elitism = num(key, v)?,
            "codon_len" => self.evo.codon_len = num(key, v)?,
            "parallel" => self.evo.parallel = num(key, v)?,
            "oracle" => {
                self.fitness.oracle =
                    Oracle::from_name(v).ok_or_else(|| format!("oracle: unknown oracle {v:?}"))?
            }
            "p_opt" => self.fitness.p_opt = num(key, v)?,
            "k_opt" => self.fitness.k_opt = num(key, v)?,
            "p_div" => self.fitness.p_div = num(key, v)?,
            "tau_bit" => self.analysis.tau_bit = num(key, v)?,
            "iter_limit" => self.analysis.iter_limit = num(key, v)?,
            "cap_factor" => self.analysis.cap_factor = num(key, v)?,
            "stop_at_deadline" => self.analysis.stop_at_deadline = num(key, v)?,
            "rounds" => self.coevolution.rounds = num(key, v)?,
            "test_epochs" => self.coevolution.test_epochs = num(key, v)?,
            "scenario_epochs" => self.coevolution.scenario_epochs = num(key, v)?,
            "top_n" => self.coevolution.top_n = num(key, v)?,
            "scenario_population" => self.scenario_population = num(key, v)?,
            "per_unit" => self.breakdown.per_unit = num(key, v)?,
            "f_max" => self.breakdown.f_max = num(key, v)?,
            "grammar" => {
                self.pinned = if v == "standard" {
                    None
                } else {
                    Some(parse_formula(v).map_err(|e| format!("grammar: {e}"))?)
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn grammar(&self) -> Grammar {
        match &self.pinned {
            Some(f) => Grammar::pinned(f),
            None => Grammar::standard(),
        }
    }

    pub fn scenario_evo(&self) -> EvoConfig {
        EvoConfig {
            population: self.scenario_population,
            ..self.evo.clone()
        }
    }

    /// Every effective value in a fixed order. The seed is reported
    /// separately by the provenance header.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let g = &self.gen;
        let e = &self.evo;
        let f = &self.fitness;
        let a = &self.analysis;
        let c = &self.coevolution;
        vec![
            ("n_sets", g.n_sets.to_string()),
            ("msgs_per_set", g.msgs_per_set.to_string()),
            ("total_msgs", g.total_msgs.map_or("none".into(), |t| t.to_string())),
            ("target_util", g.target_util.to_string()),
            ("t_min", g.t_min.to_string()),
            ("t_max", g.t_max.to_string()),
            ("deadline_factor", g.deadline_factor.to_string()),
            ("jitter_factor", g.jitter_factor.to_string()),
            ("population", e.population.to_string()),
            ("generations", e.generations.to_string()),
            ("tournament", e.tournament.to_string()),
            ("crossover_rate", e.crossover_rate.to_string()),
            ("mutation_rate", e.mutation_rate.to_string()),
            ("elitism", e.elitism.to_string()),
            ("codon_len", e.codon_len.to_string()),
            ("parallel", e.parallel.to_string()),
            ("oracle", f.oracle.name().into()),
            ("p_opt", f.p_opt.to_string()),
            ("k_opt", f.k_opt.to_string()),
            ("p_div", f.p_div.to_string()),
            ("tau_bit", a.tau_bit.to_string()),
            ("iter_limit", a.iter_limit.to_string()),
            ("cap_factor", a.cap_factor.to_string()),
            ("stop_at_deadline", a.stop_at_deadline.to_string()),
            ("rounds", c.rounds.to_string()),
            ("test_epochs", c.test_epochs.to_string()),
            ("scenario_epochs", c.scenario_epochs.to_string()),
            ("top_n", c.top_n.to_string()),
            ("scenario_population", self.scenario_population.to_string()),
            ("per_unit", self.breakdown.per_unit.to_string()),
            ("f_max", self.breakdown.f_max.to_string()),
            (
                "grammar",
                self.pinned.as_ref().map_or("standard".into(), render_formula),
            ),
        ]
    }

    pub fn provenance(&self, subcommand: &str) -> Provenance {
        self.entries()
            .into_iter()
            .fold(Provenance::new(subcommand), |p, (k, v)| p.with(k, v))
            .seed(self.evo.seed)
    }
}
