use std::fmt::{Display, Write};
use std::path::{Path, PathBuf};

use rtevo::alloc::{
    allocation_report, breakdown_frequency, evolve_allocation, AllocError, FitnessKind,
};
use rtevo::analysis::{analyze_set, AnalysisError, Test};
use rtevo::evolve::{
    self, fitness_of_formula, normalized_fitness, Corpus, EvolveError, RunHistory,
};
use rtevo::formula::{builtin, render_formula, Formula};
use rtevo::ga::GaError;
use rtevo::gen::{generate_corpus, generate_sets, load_corpus, GenError};
use rtevo::io::{self, IoError, Provenance};
use rtevo::model::{Platform, TaskGraph};
use rtevo::sim::{
    critical_instant_scenario, default_horizon, simulate_with, SimError, SimOptions,
};

use crate::config::RunConfig;
use crate::svg;
use crate::{
    AllocateArgs, AnalyzeArgs, CoevolveArgs, EvolveTestArgs, GenCorpusArgs, ReportArgs,
    SimulateArgs,
};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Display) -> Self {
        CliError { code: 1, message: m.to_string() }
    }

    pub fn input(m: impl Display) -> Self {
        CliError { code: 2, message: m.to_string() }
    }

    pub fn runtime(m: impl Display) -> Self {
        CliError { code: 3, message: m.to_string() }
    }
}

/// Read failures and malformed files.
impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::input(e)
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::InvalidParams(_) => CliError::usage(e),
            GenError::InfeasibleParams { .. } | GenError::Io(_) => CliError::runtime(e),
        }
    }
}

impl From<GaError> for CliError {
    fn from(e: GaError) -> Self {
        CliError::usage(e)
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        match e {
            EvolveError::InvalidConfig(_) | EvolveError::Ga(_) => CliError::usage(e),
            _ => CliError::runtime(e),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::runtime(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::runtime(e)
    }
}

impl From<AllocError> for CliError {
    fn from(e: AllocError) -> Self {
        match e {
            AllocError::InvalidConfig(_) | AllocError::Ga(_) => CliError::usage(e),
            _ => CliError::runtime(e),
        }
    }
}

pub fn load_config(cfg: &mut RunConfig, path: &Path) -> Result<(), CliError> {
    let text = io::read_to_string(path)?;
    cfg.apply_text(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, prov: &Provenance, prefix: &str, body: &str) -> Result<(), CliError> {
    io::write_with_header(path, prov, prefix, body).map_err(CliError::runtime)
}

/// Writes to `path` when given, otherwise prints header and body.
fn emit(path: Option<&Path>, prov: &Provenance, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write(p, prov, "# ", body),
        None => {
            // A closed stdout (e.g. piped into `head`) is not an error.
            let mut out = std::io::stdout().lock();
            let _ = std::io::Write::write_all(&mut out, prov.render("# ").as_bytes())
                .and_then(|_| std::io::Write::write_all(&mut out, body.as_bytes()));
            Ok(())
        }
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn corpus_from_dir(cfg: &RunConfig, dir: &Path) -> Result<Corpus, CliError> {
    let sets = load_corpus(dir)?;
    if sets.is_empty() {
        return Err(CliError::input(format!("{}: no message sets", dir.display())));
    }
    let corpus = Corpus::new(sets, cfg.fitness.oracle, &cfg.analysis)?;
    warn_oracle_failures(&corpus);
    Ok(corpus)
}

fn warn_oracle_failures(corpus: &Corpus) {
    let failed = corpus.oracle_failures();
    if !failed.is_empty() {
        eprintln!(
            "rtevo: warning: no reference response time for {} message(s); they are excluded",
            failed.len()
        );
    }
}

pub fn gen_corpus(mut cfg: RunConfig, a: GenCorpusArgs) -> Result<(), CliError> {
    if let Some(n) = a.sets {
        cfg.gen.n_sets = n;
    }
    if let Some(m) = a.msgs {
        cfg.gen.msgs_per_set = m;
        cfg.gen.total_msgs = None;
    }
    if let Some(t) = a.total {
        cfg.gen.total_msgs = Some(t);
    }
    if let Some(u) = a.util {
        cfg.gen.target_util = u;
    }
    if let Some(s) = a.seed {
        cfg.gen.seed = s;
        cfg.evo.seed = s;
    }
    let prov = cfg.provenance("gen-corpus");
    let manifest = generate_corpus(&cfg.gen, &a.out, &prov)?;
    let messages: usize = manifest.sets.iter().map(|s| s.messages).sum();
    println!(
        "wrote {} sets ({messages} messages) to {}",
        manifest.sets.len(),
        a.out.display()
    );
    Ok(())
}

pub fn analyze(cfg: RunConfig, a: AnalyzeArgs) -> Result<(), CliError> {
    let tests: Vec<Test> = if a.test == "all" {
        Test::ALL.to_vec()
    } else {
        vec![Test::from_name(&a.test).ok_or_else(|| {
            CliError::usage(format!("unknown test {:?} (s1, cf-d, cf-s, exact, all)", a.test))
        })?]
    };
    let set = io::read_message_set(&a.input)?;
    let report = analyze_set(&set, &cfg.analysis)?;
    let mut body = String::from("id,test,verdict,r,iterations\n");
    for m in &report.messages {
        for &t in &tests {
            let v = m.verdict(t);
            let r = v.value().map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(body, "{},{},{},{r},{}", m.id, t.name(), v.label(), v.iterations);
        }
    }
    let prov = cfg
        .provenance("analyze")
        .with("in", path_str(&a.input))
        .with("test", &a.test);
    emit(a.out.as_deref(), &prov, &body)?;
    if a.out.is_some() {
        for &t in &tests {
            let ok = report.set_schedulable(t);
            println!("{}: {}", t.name(), if ok { "schedulable" } else { "not schedulable" });
        }
    }
    Ok(())
}

pub fn simulate(cfg: RunConfig, a: SimulateArgs) -> Result<(), CliError> {
    let set = io::read_message_set(&a.input)?;
    let mut scenario = if a.scenario == "critical" {
        critical_instant_scenario(&set, 1)
    } else {
        let path = PathBuf::from(&a.scenario);
        let text = io::read_to_string(&path)?;
        let sc = io::parse_scenario(&path, &text, 1)?;
        sc.validate(&set)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        sc
    };
    scenario.horizon = match a.horizon {
        Some(h) if h < 1 => return Err(CliError::usage("--horizon must be >= 1")),
        Some(h) => h,
        None => {
            let h = default_horizon(&set, scenario.max_offset());
            if h.clamped {
                eprintln!("rtevo: warning: horizon clamped to {}", h.ticks);
            }
            h.ticks
        }
    };
    let opts = SimOptions {
        record_trace: a.trace.is_some(),
        ..Default::default()
    };
    let result = simulate_with(&set, &scenario, &opts)?;
    let prov = cfg
        .provenance("simulate")
        .with("in", path_str(&a.input))
        .with("scenario", &a.scenario)
        .with("horizon", scenario.horizon);
    let mut body = String::from("id,watermark,completed\n");
    for s in &result.stats {
        let _ = writeln!(body, "{},{},{}", s.id, s.watermark, s.completed);
    }
    emit(a.out.as_deref(), &prov, &body)?;
    if let Some(path) = &a.trace {
        let mut t = String::from("id,instance,nominal_release,queued,start,finish\n");
        for e in &result.trace {
            let _ = writeln!(
                t,
                "{},{},{},{},{},{}",
                e.id, e.instance, e.nominal_release, e.queued, e.start, e.finish
            );
        }
        write(path, &prov, "# ", &t)?;
    }
    match &result.first_miss {
        Some(m) => eprintln!(
            "first deadline miss: message {} instance {} released at {}",
            m.id, m.instance, m.nominal_release
        ),
        None => eprintln!("no deadline miss within {} ticks", scenario.horizon),
    }
    Ok(())
}

pub fn evolve_test(mut cfg: RunConfig, a: EvolveTestArgs) -> Result<(), CliError> {
    if let Some(s) = a.seed {
        cfg.evo.seed = s;
    }
    if let Some(g) = a.generations {
        cfg.evo.generations = g;
    }
    let corpus = corpus_from_dir(&cfg, &a.corpus)?;
    let history = evolve::evolve_tests(
        &corpus,
        &cfg.grammar(),
        &cfg.evo,
        &cfg.fitness,
        &cfg.analysis,
    )?;
    let prov = cfg
        .provenance("evolve-test")
        .with("corpus", path_str(&a.corpus));
    let best = history
        .best
        .as_ref()
        .ok_or_else(|| CliError::runtime("no complete formula was ever produced"))?;
    write(&a.out, &prov, "; ", &format!("{}\n", render_formula(best)))?;
    write(&a.log, &prov, "# ", &history.to_csv())?;
    println!("best fitness {}: {}", history.best_fitness, render_formula(best));
    Ok(())
}

pub fn coevolve(mut cfg: RunConfig, a: CoevolveArgs) -> Result<(), CliError> {
    // Generator keys are taken from the corpus parameter file.
    if let Some(p) = &a.corpus_params {
        let mut merged = RunConfig::default();
        load_config(&mut merged, p)?;
        cfg.gen = merged.gen;
    }
    if let Some(r) = a.rounds {
        cfg.coevolution.rounds = r;
    }
    if let Some(s) = a.seed {
        cfg.evo.seed = s;
    }
    let corpus = match (&a.corpus, &a.corpus_params) {
        (Some(dir), _) => corpus_from_dir(&cfg, dir)?,
        _ => {
            let c = Corpus::new(generate_sets(&cfg.gen)?, cfg.fitness.oracle, &cfg.analysis)?;
            warn_oracle_failures(&c);
            c
        }
    };
    let co = evolve::coevolve(
        &corpus,
        &cfg.grammar(),
        &cfg.evo,
        &cfg.scenario_evo(),
        &cfg.coevolution,
        &cfg.fitness,
        &cfg.analysis,
    )?;
    let source = match (&a.corpus, &a.corpus_params) {
        (Some(d), _) => ("corpus", path_str(d)),
        (_, Some(p)) => ("corpus_params", path_str(p)),
        _ => unreachable!("clap requires one corpus source"),
    };
    let prov = cfg.provenance("coevolve").with(source.0, source.1);

    let mut tests = String::new();
    for (f, fit) in &co.tests {
        let _ = writeln!(tests, "{} ; fitness {fit}", render_formula(f));
    }
    write(&a.out, &prov, "; ", &tests)?;
    if let Some(path) = &a.scenarios {
        let mut body = String::from(
            "scenario,set,horizon,refuted,lateness,id,offset,first_jitter,later_jitter\n",
        );
        for (k, (g, fit)) in co.scenarios.iter().enumerate() {
            for e in &g.scenario.entries {
                let _ = writeln!(
                    body,
                    "{k},{},{},{},{},{},{},{},{}",
                    g.set,
                    g.scenario.horizon,
                    fit.refuted,
                    fit.lateness,
                    e.id,
                    e.offset,
                    e.first_jitter,
                    e.later_jitter
                );
            }
        }
        write(path, &prov, "# ", &body)?;
    }
    if let Some(path) = &a.log {
        let h = RunHistory {
            rows: co.test_history.clone(),
            best: None,
            best_fitness: 0,
        };
        write(path, &prov, "# ", &h.to_csv())?;
    }
    if let Some(path) = &a.rounds_log {
        let mut body = String::from(
            "round,best_test_fitness,best_scenario_refutes,refuting_scenarios,best_test\n",
        );
        for r in &co.rounds {
            let _ = writeln!(
                body,
                "{},{},{},{},{}",
                r.round, r.best_test_fitness, r.best_scenario_refutes, r.refuting_scenarios, r.best_test
            );
        }
        write(path, &prov, "# ", &body)?;
    }
    for r in &co.rounds {
        println!(
            "round {}: best test fitness {}, best scenario refutes {}, {} refuting scenario(s)",
            r.round, r.best_test_fitness, r.best_scenario_refutes, r.refuting_scenarios
        );
    }
    if let Some((f, fit)) = co.tests.first() {
        println!("best test {fit}: {}", render_formula(f));
    }
    Ok(())
}

pub fn allocate(mut cfg: RunConfig, a: AllocateArgs) -> Result<(), CliError> {
    let kind = FitnessKind::from_name(&a.fitness)
        .ok_or_else(|| CliError::usage(format!("unknown fitness {:?} (count, breakdown)", a.fitness)))?;
    if let Some(s) = a.seed {
        cfg.evo.seed = s;
    }
    if let Some(g) = a.generations {
        cfg.evo.generations = g;
    }
    let tg: TaskGraph = io::read_task_graph(&a.tasks)?;
    let platform = Platform::new(a.nodes).map_err(CliError::usage)?;
    let run = evolve_allocation(&tg, &platform, &cfg.evo, kind, &cfg.analysis, &cfg.breakdown)?;
    let prov = cfg
        .provenance("allocate")
        .with("tasks", path_str(&a.tasks))
        .with("nodes", a.nodes)
        .with("fitness", &a.fitness);
    let mut body = String::from("task_id,node\n");
    for (t, node) in tg.tasks.iter().zip(&run.best.genes) {
        let _ = writeln!(body, "{},{node}", t.id);
    }
    write(&a.out, &prov, "# ", &body)?;
    if let Some(path) = &a.log {
        let mut h = String::from("generation,best_fitness,mean_fitness\n");
        for r in &run.history {
            let _ = writeln!(h, "{},{},{:.3}", r.generation, r.best, r.mean);
        }
        write(path, &prov, "# ", &h)?;
    }
    let rep = allocation_report(&tg, &platform, &run.best, &cfg.analysis)?;
    let f = breakdown_frequency(&tg, &platform, &run.best, &cfg.analysis, &cfg.breakdown)?;
    println!(
        "best allocation: {} of {} tasks and frames schedulable, breakdown frequency {f}",
        rep.count(),
        tg.tasks.len() + tg.edges.len()
    );
    Ok(())
}

pub fn report(cfg: RunConfig, a: ReportArgs) -> Result<(), CliError> {
    let text = io::read_to_string(&a.history)?;
    let evolved: Formula = RunHistory::final_formula_from_csv(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", a.history.display())))?;
    let corpus = corpus_from_dir(&cfg, &a.baselines)?;
    let mut rows: Vec<(String, Formula)> = (1..=4)
        .map(|k| (format!("eq{k}"), builtin(k).expect("builtins 1-4 exist")))
        .collect();
    rows.push(("evolved".to_string(), evolved));

    let mut body = String::from("label,fitness,normalized,optimistic,divergent,formula\n");
    let mut bars = Vec::new();
    println!("{} usable messages", corpus.usable_messages());
    for (label, f) in &rows {
        let b = fitness_of_formula(f, &corpus, &cfg.fitness, &cfg.analysis);
        let n = normalized_fitness(f, &corpus, &cfg.fitness, &cfg.analysis);
        let _ = writeln!(
            body,
            "{label},{},{n:.6},{},{},{}",
            b.total,
            b.optimistic,
            b.divergent,
            render_formula(f)
        );
        println!(
            "{label}: normalized fitness {n:.6}, {} optimistic, {} divergent",
            b.optimistic, b.divergent
        );
        bars.push((label.clone(), n));
    }
    let prov = cfg
        .provenance("report")
        .with("history", path_str(&a.history))
        .with("baselines", path_str(&a.baselines));
    let csv_path = a.csv.clone().unwrap_or_else(|| a.svg.with_extension("csv"));
    write(&csv_path, &prov, "# ", &body)?;
    let mut chart = String::from("<!--\n");
    chart.push_str(&prov.render(""));
    chart.push_str("-->\n");
    chart.push_str(&svg::bar_chart("Normalised fitness (eq1 = 1)", &bars));
    std::fs::write(&a.svg, chart).map_err(|e| CliError::runtime(IoError::at(&a.svg, e)))?;
    Ok(())
}
