//! Acceptance criteria, one PASS/FAIL line each.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rtevo::alloc::{
    allocation_fitness, breakdown_frequency, evolve_allocation, schedulable_at, AllocFitness,
    AllocationChromosome, BreakdownConfig, FitnessKind, Frequency,
};
use rtevo::analysis::{analyze_set, AnalysisError, Test, Verdict};
use rtevo::evolve::{
    evolve_scenarios, evolve_tests, fitness_of_formula, normalized_fitness,
    random_scenario_search, scenario_fitness, Corpus, FitnessConfig, Oracle,
};
use rtevo::formula::{builtin, eval_at, parse_formula, DivergenceCause, EvalOutcome, Grammar};
use rtevo::ga::EvoConfig;
use rtevo::gen::{generate_sets, GenParams};
use rtevo::io::{csv_payload, read_task_graph};
use rtevo::model::{validate_message_set, AnalysisConfig, Message, MessageSet, Platform};
use rtevo::sim::{critical_instant_scenario, default_horizon, simulate};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let e = start.elapsed();
    check(e < limit, || format!("took {e:.2?}, limit {limit:?}"))
}

fn default_corpus() -> Vec<MessageSet> {
    generate_sets(&GenParams::default()).expect("default corpus")
}

fn micro() -> MessageSet {
    validate_message_set(vec![Message::new(1, 1, 1, 4, 4, 0), Message::new(2, 2, 2, 10, 10, 0)])
        .unwrap()
}

fn c1_micro_set() -> Outcome {
    let start = Instant::now();
    let report = analyze_set(&micro(), &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    let expect = [
        (Test::Exact, [3, 3]),
        (Test::S1, [3, 5]),
        (Test::ClosedD, [3, 7]),
        (Test::ClosedSimple, [3, 7]),
    ];
    for (t, want) in expect {
        let got: Vec<Option<i64>> = report.messages.iter().map(|m| m.verdict(t).converged()).collect();
        check(got == want.map(Some), || format!("{}: {got:?} != {want:?}", t.name()))?;
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("in {:.2?}", start.elapsed()))
}

fn c2_pessimism_chain(sets: &[MessageSet]) -> Outcome {
    let start = Instant::now();
    let cfg = AnalysisConfig::default();
    let util = sets.iter().map(|s| s.utilization()).fold(0.0, f64::max);
    check(util <= 0.6, || format!("set utilisation {util} > 0.6"))?;
    let per_set: Vec<Result<(usize, Vec<String>), String>> = sets
        .par_iter()
        .enumerate()
        .map(|(s, set)| {
            let report = analyze_set(set, &cfg).map_err(|e| e.to_string())?;
            let sim = simulate(set, &critical_instant_scenario(set, default_horizon(set, 0).ticks))
                .map_err(|e| e.to_string())?;
            let mut checked = 0;
            let mut bad = Vec::new();
            for (r, st) in report.messages.iter().zip(&sim.stats) {
                let vals = [r.exact, r.s1, r.cf_d, r.cf_s].map(|v| v.converged());
                let [Some(e), Some(s1), Some(d), Some(cs)] = vals else { continue };
                checked += 1;
                let w = st.watermark;
                let ok = w <= e && (s1 > r.deadline || (e <= s1 && s1 <= d)) && d <= cs;
                if !ok {
                    bad.push(format!("set {s} msg {}: w={w} e={e} s1={s1} d={d} s={cs}", r.id));
                }
            }
            Ok((checked, bad))
        })
        .collect();
    let mut checked = 0;
    let mut bad = Vec::new();
    for r in per_set {
        let (c, b) = r?;
        checked += c;
        bad.extend(b);
    }
    let total: usize = sets.iter().map(|s| s.len()).sum();
    check(sets.len() == 135 && total.abs_diff(2600) <= 5, || {
        format!("corpus has {} sets, {total} messages", sets.len())
    })?;
    check(bad.is_empty(), || format!("{} violations, first: {}", bad.len(), bad[0]))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!("{checked} of {total} messages checked, 0 violations, {:.2?}", start.elapsed()))
}

fn same(outcome: EvalOutcome, hand: Result<Verdict, AnalysisError>) -> bool {
    match (outcome, hand) {
        (EvalOutcome::Value(a), Ok(Verdict::Converged(b))) => a == b,
        (EvalOutcome::Divergent(DivergenceCause::Cap | DivergenceCause::IterLimit), Ok(Verdict::ExceededCap)) => true,
        (EvalOutcome::Divergent(DivergenceCause::Overflow), Err(AnalysisError::Overflow(_))) => true,
        _ => false,
    }
}

fn c3_oracle_equivalence(sets: &[MessageSet]) -> Outcome {
    let cfg = AnalysisConfig::default();
    let pairs = [(1, Test::S1), (2, Test::ClosedD), (3, Test::ClosedSimple)];
    let mut compared = 0;
    for (k, test) in pairs {
        let f = builtin(k).unwrap();
        for (s, set) in sets.iter().enumerate() {
            for (i, m) in set.messages().iter().enumerate() {
                let a = eval_at(&f, set, i, &cfg);
                let b = test.run(set, m.id, &cfg).map(|v| v.kind);
                check(same(a, b.clone()), || {
                    format!("builtin {k} vs {}: set {s} msg {}: {a:?} vs {b:?}", test.name(), m.id)
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} message evaluations identical"))
}

fn rtevo(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rtevo"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn c4_fig4_ordering(sets: &[MessageSet]) -> Outcome {
    let cfg = AnalysisConfig::default();
    let fc = FitnessConfig::default();
    let corpus = Corpus::new(sets.to_vec(), Oracle::Exact, &cfg).map_err(|e| e.to_string())?;
    let f: Vec<u64> = (1..=3)
        .map(|k| fitness_of_formula(&builtin(k).unwrap(), &corpus, &fc, &cfg).total)
        .collect();
    check(f[0] < f[1] && f[1] <= f[2], || format!("F(eq1..3) = {f:?}"))?;

    // The report pipeline on the same corpus.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus_dir = dir.path().join("corpus");
    let cfg_file = dir.path().join("run.cfg");
    fs::write(&cfg_file, "population = 40\ngenerations = 3\n").unwrap();
    let hist = dir.path().join("history.csv");
    let svg = dir.path().join("fig4.svg");
    rtevo(&["gen-corpus", "--out", p(&corpus_dir)])?;
    rtevo(&[
        "--config", p(&cfg_file), "evolve-test", "--corpus", p(&corpus_dir), "--out",
        p(&dir.path().join("best.sexp")), "--log", p(&hist),
    ])?;
    let stdout = rtevo(&["report", "--history", p(&hist), "--baselines", p(&corpus_dir), "--svg", p(&svg)])?;
    let eq4_line = stdout
        .lines()
        .find(|l| l.starts_with("eq4:"))
        .ok_or("report printed no eq4 line")?
        .to_string();
    let fig = csv_payload(&fs::read_to_string(dir.path().join("fig4.csv")).unwrap());
    let eq4 = builtin(4).unwrap();
    let lib = normalized_fitness(&eq4, &corpus, &fc, &cfg);
    let row = fig.lines().find(|l| l.starts_with("eq4,")).ok_or("fig4.csv has no eq4 row")?;
    let reported: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    check((reported - lib).abs() <= 1e-6 * lib.max(1.0), || {
        format!("report {reported} vs library {lib}")
    })?;
    Ok(format!("F = {f:?}; report {eq4_line}"))
}

fn c5_evolution_efficacy() -> Outcome {
    let cfg = AnalysisConfig::default();
    let fc = FitnessConfig::default();
    let sets = generate_sets(&GenParams {
        n_sets: 20,
        msgs_per_set: 15,
        total_msgs: None,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let corpus = Corpus::new(sets, Oracle::Exact, &cfg).map_err(|e| e.to_string())?;
    let f3 = fitness_of_formula(&builtin(3).unwrap(), &corpus, &fc, &cfg).total;
    let mut good = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 1..=5 {
        let start = Instant::now();
        let evo = EvoConfig { seed, ..Default::default() };
        let h = evolve_tests(&corpus, &Grammar::standard(), &evo, &fc, &cfg).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        within(start, Duration::from_secs(600))?;
        check(h.rows.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness), || {
            format!("seed {seed}: best fitness increased")
        })?;
        if let Some(best) = &h.best {
            let b = fitness_of_formula(best, &corpus, &fc, &cfg);
            if b.optimistic == 0 && b.divergent == 0 && b.total <= f3 {
                good.push((seed, b.total));
            }
        }
    }
    check(!good.is_empty(), || format!("no seed beat F(eq3) = {f3} without optimism"))?;
    Ok(format!(
        "{} of 5 seeds non-optimistic with F <= F(eq3) = {f3} ({good:?}); slowest run {slowest:.2?}",
        good.len()
    ))
}

fn c6_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    fs::write(d.join("run.cfg"), "population = 30\ngenerations = 5\nrounds = 1\ntest_epochs = 3\nscenario_epochs = 2\nscenario_population = 20\n").unwrap();
    let graph = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/alloc8.json");
    let mut compared = 0;
    for (tag, mode) in [("a", None), ("b", None), ("s", Some("--serial"))] {
        let o = |name: &str| d.join(format!("{tag}_{name}"));
        let mut base = vec!["--config".to_string(), p(&d.join("run.cfg")).to_string()];
        base.extend(mode.map(String::from));
        let run = |rest: &[&str]| {
            let mut args: Vec<&str> = base.iter().map(String::as_str).collect();
            args.extend_from_slice(rest);
            rtevo(&args)
        };
        run(&["gen-corpus", "--sets", "6", "--msgs", "8", "--seed", "5", "--out", p(&o("corpus"))])?;
        let set = o("corpus").join("set_000.csv");
        run(&["analyze", "--in", p(&set), "--out", p(&o("analyze.csv"))])?;
        run(&["simulate", "--in", p(&set), "--out", p(&o("sim.csv")), "--trace", p(&o("trace.csv"))])?;
        run(&["evolve-test", "--corpus", p(&o("corpus")), "--out", p(&o("best.sexp")), "--log", p(&o("hist.csv"))])?;
        run(&[
            "coevolve", "--corpus", p(&o("corpus")), "--out", p(&o("co.sexp")), "--scenarios",
            p(&o("scen.csv")), "--log", p(&o("cohist.csv")), "--rounds-log", p(&o("rounds.csv")),
        ])?;
        run(&[
            "allocate", "--tasks", p(&graph), "--nodes", "3", "--fitness", "breakdown", "--out",
            p(&o("alloc.csv")), "--log", p(&o("alloclog.csv")),
        ])?;
        run(&["report", "--history", p(&o("hist.csv")), "--baselines", p(&o("corpus")), "--svg", p(&o("fig4.svg"))])?;
    }
    let outputs = [
        "corpus/set_000.csv", "corpus/set_005.csv", "analyze.csv", "sim.csv", "trace.csv",
        "hist.csv", "best.sexp", "co.sexp", "scen.csv", "cohist.csv", "rounds.csv", "alloc.csv",
        "alloclog.csv", "fig4.csv",
    ];
    for name in outputs {
        let read = |tag: &str| fs::read_to_string(d.join(format!("{tag}_{name}"))).map_err(|e| e.to_string());
        let (a, b, s) = (read("a")?, read("b")?, read("s")?);
        let strip = |t: &str| t.lines().filter(|l| !l.starts_with('#') && !l.starts_with(';')).collect::<Vec<_>>().join("\n");
        check(strip(&a) == strip(&b), || format!("{name}: rerun differs"))?;
        check(strip(&a) == strip(&s), || format!("{name}: serial differs from parallel"))?;
        compared += 1;
    }
    Ok(format!("{compared} outputs identical across reruns and serial/parallel"))
}

fn c7_refutation() -> Outcome {
    let cfg = AnalysisConfig::default();
    let sets = generate_sets(&GenParams {
        n_sets: 50,
        msgs_per_set: 10,
        total_msgs: None,
        target_util: 0.95,
        seed: 7,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let corpus = Corpus::new(sets, Oracle::Exact, &cfg).map_err(|e| e.to_string())?;
    let optimistic = parse_formula("(rt Ci (isum Jk 0))").unwrap();
    let tests = [optimistic];
    let evo = EvoConfig {
        population: 60,
        generations: 20,
        seed: 7,
        ..Default::default()
    };
    let found = evolve_scenarios(&corpus, &tests, &evo, &cfg).map_err(|e| e.to_string())?;
    let (best, how) = if found.fitness.refuted >= 1 {
        (found.best, "scenario search")
    } else {
        (random_scenario_search(&corpus, &tests, 20, 7, &cfg).0, "random fallback")
    };
    let set = &corpus.sets()[best.set];
    let n = scenario_fitness(set, &best.scenario, &tests, &cfg).map_err(|e| e.to_string())?;
    check(n >= 1, || "no refuting scenario".into())?;
    Ok(format!("scenario_fitness {n} on set {} via {how}", best.set))
}

fn c8_allocation() -> Outcome {
    let tg = read_task_graph(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/alloc8.json"))
        .map_err(|e| e.to_string())?;
    let platform = Platform::new(3).unwrap();
    let cfg = AnalysisConfig::default();
    let bc = BreakdownConfig::default();
    let full = tg.tasks.len() + tg.edges.len();
    let mut hits = 0;
    let mut nominal = None;
    for seed in 1..=5 {
        let evo = EvoConfig { generations: 200, seed, ..Default::default() };
        let run = evolve_allocation(&tg, &platform, &evo, FitnessKind::Count, &cfg, &bc)
            .map_err(|e| e.to_string())?;
        if run.fitness == AllocFitness::Count(full) {
            hits += 1;
            nominal = Some(run.best);
        }
    }
    check(hits >= 4, || format!("full count in {hits}/5 seeds"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let c = AllocationChromosome {
            genes: (0..tg.tasks.len()).map(|_| rng.random_range(0..3)).collect(),
        };
        let f = breakdown_frequency(&tg, &platform, &c, &cfg, &bc).map_err(|e| e.to_string())?;
        let at = |steps| schedulable_at(&tg, &platform, &c, &cfg, steps, &bc).unwrap();
        match f {
            Frequency::Finite { steps, .. } => {
                check(at(steps), || format!("{c:?} not schedulable at f* = {f}"))?;
                check(steps == 1 || !at(steps - 1), || format!("{c:?} schedulable below f* = {f}"))?;
            }
            Frequency::Infinite => {
                check(!at(bc.f_max * bc.per_unit), || format!("{c:?} reported infinite"))?;
            }
        }
    }
    let c = nominal.ok_or("no fully schedulable allocation found")?;
    check(allocation_fitness(&tg, &platform, &c, &cfg).unwrap() == AllocFitness::Count(full), || {
        "nominal allocation lost schedulability".into()
    })?;
    let f = breakdown_frequency(&tg, &platform, &c, &cfg, &bc).map_err(|e| e.to_string())?;
    check(f <= Frequency::Finite { steps: 1, per_unit: 1 }, || format!("f* = {f} > 1"))?;
    Ok(format!("full count in {hits}/5 seeds, 100 certificates hold, nominal f* = {f}"))
}

fn main() {
    let sets = default_corpus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 micro set", Box::new(c1_micro_set)),
        ("2 pessimism chain", Box::new(|| c2_pessimism_chain(&sets))),
        ("3 oracle equivalence", Box::new(|| c3_oracle_equivalence(&sets))),
        ("4 fitness ordering and report", Box::new(|| c4_fig4_ordering(&sets))),
        ("5 evolution efficacy", Box::new(c5_evolution_efficacy)),
        ("6 determinism", Box::new(c6_determinism)),
        ("7 simulation refutation", Box::new(c7_refutation)),
        ("8 allocation", Box::new(c8_allocation)),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
