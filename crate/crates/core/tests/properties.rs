use proptest::prelude::*;

use rtevo::analysis::{analyze_set, rta_exact};
use rtevo::formula::{
    encode_formula, eval_at, map_genotype, parse_formula, render_formula, FormulaError, Genotype,
    Grammar,
};
use rtevo::gen::{generate_message_set, GenParams, UTIL_SLACK};
use rtevo::model::{validate_message_set, AnalysisConfig, Message, MessageSet};
use rtevo::sim::{critical_instant_scenario, default_horizon, simulate};

fn codons() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..256, 1..80)
}

fn message_set() -> impl Strategy<Value = MessageSet> {
    prop::collection::vec((1i64..8, 10i64..60, 0i64..6), 1..7).prop_map(|raw| {
        let ms = raw
            .into_iter()
            .enumerate()
            .map(|(i, (c, t, j))| {
                let id = i as u32 + 1;
                Message::new(id, id, c, t, t, j)
            })
            .collect();
        validate_message_set(ms).unwrap()
    })
}

proptest! {
    #[test]
    fn mapping_is_closed(c in codons(), wraps in 0u32..4) {
        let g = Genotype { codons: c, max_wraps: wraps };
        match map_genotype(&g, &Grammar::standard()) {
            Ok(f) => {
                let text = render_formula(&f);
                prop_assert_eq!(parse_formula(&text).unwrap(), f);
            }
            Err(FormulaError::MappingIncomplete { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e:?}"),
        }
    }

    #[test]
    fn encoding_inverts_mapping(c in codons()) {
        let g = Genotype::new(c);
        if let Ok(f) = map_genotype(&g, &Grammar::standard()) {
            let back = map_genotype(&encode_formula(&f), &Grammar::standard()).unwrap();
            prop_assert_eq!(back, f);
        }
    }

    #[test]
    fn evaluation_is_total(c in codons(), set in message_set()) {
        if let Ok(f) = map_genotype(&Genotype::new(c), &Grammar::standard()) {
            let cfg = AnalysisConfig::default();
            for i in 0..set.len() {
                let a = eval_at(&f, &set, i, &cfg);
                prop_assert_eq!(a, eval_at(&f, &set, i, &cfg));
            }
        }
    }

    #[test]
    fn hp_and_lp_partition(set in message_set()) {
        for m in set.messages() {
            let hp = set.hp(m.id).unwrap();
            let lp = set.lp(m.id).unwrap();
            prop_assert_eq!(hp.len() + lp.len() + 1, set.len());
            prop_assert!(hp.iter().all(|k| k.priority < m.priority));
            prop_assert!(lp.iter().all(|k| k.priority > m.priority));
        }
    }

    #[test]
    fn pessimism_chain(set in message_set()) {
        let cfg = AnalysisConfig::default();
        let report = analyze_set(&set, &cfg).unwrap();
        let sim = simulate(&set, &critical_instant_scenario(&set, default_horizon(&set, 0).ticks)).unwrap();
        for (r, st) in report.messages.iter().zip(&sim.stats) {
            let cf_d = r.cf_d.converged().unwrap();
            let cf_s = r.cf_s.converged().unwrap();
            prop_assert!(cf_d <= cf_s);
            if let Some(e) = r.exact.converged() {
                prop_assert!(st.watermark <= e);
                if let Some(s1) = r.s1.converged().filter(|&s| s <= r.deadline) {
                    prop_assert!(e <= s1 && s1 <= cf_d, "{e} {s1} {cf_d}");
                }
            }
        }
    }

    #[test]
    fn removing_lowest_priority_never_hurts(set in message_set()) {
        prop_assume!(set.len() >= 2);
        let cfg = AnalysisConfig::default();
        let smaller = validate_message_set(set.messages()[..set.len() - 1].to_vec()).unwrap();
        for m in smaller.messages() {
            let before = rta_exact(&set, m.id, &cfg).unwrap().converged();
            let after = rta_exact(&smaller, m.id, &cfg).unwrap().converged();
            if let (Some(b), Some(a)) = (before, after) {
                prop_assert!(a <= b);
            }
        }
    }

    #[test]
    fn generated_sets_respect_parameters(seed in any::<u64>(), n in 1usize..25, util in 0.1f64..0.9) {
        let p = GenParams { n_sets: 1, msgs_per_set: n, total_msgs: None, target_util: util, seed, ..Default::default() };
        if let Ok(set) = generate_message_set(&p, 0) {
            prop_assert_eq!(set.len(), n);
            prop_assert!(set.utilization() <= util + UTIL_SLACK);
            for (i, m) in set.messages().iter().enumerate() {
                prop_assert!(m.c <= m.d && m.d <= m.t);
                prop_assert!(m.t >= p.t_min && m.t <= p.t_max);
                prop_assert_eq!(m.priority as usize, i + 1);
            }
            prop_assert!(set.messages().windows(2).all(|w| w[0].d <= w[1].d));
            prop_assert_eq!(&generate_message_set(&p, 0).unwrap(), &set);
        }
    }
}
