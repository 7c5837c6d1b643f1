//! BNF grammar of response-time formulae and the grammatical-evolution
//! genotype-to-phenotype mapping.
//!
//! Terminals are fragments of the S-expression surface syntax, so the word
//! derived from a genotype is directly parseable by
//! [`parse_formula`](super::parse_formula).

use std::fmt;

use super::ir::{BaseExpr, BaseVar, Formula, NumExpr, Var, K01};
use super::sexpr::{parse_formula, render_formula};
use super::FormulaError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Symbol {
    T(String),
    N(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub productions: Vec<Vec<Symbol>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    rules: Vec<Rule>,
    start: usize,
}

/// Hard bound on nonterminal expansions per mapping.
const MAX_EXPANSIONS: usize = 100_000;

fn t(s: &str) -> Symbol {
    Symbol::T(s.to_string())
}

impl Grammar {
    pub fn new(rules: Vec<Rule>, start: usize) -> Result<Self, String> {
        if start >= rules.len() {
            return Err("start symbol out of range".into());
        }
        for r in &rules {
            if r.productions.is_empty() {
                return Err(format!("<{}> has no productions", r.name));
            }
            for p in &r.productions {
                for s in p {
                    if let Symbol::N(i) = s {
                        if *i >= rules.len() {
                            return Err(format!("<{}> references unknown rule {i}", r.name));
                        }
                    }
                }
            }
        }
        Ok(Grammar { rules, start })
    }

    /// The response-time grammar. Productions are indexed from 0 in the
    /// order listed:
    ///
    /// ```text
    /// <rt>    ::= <base> "+" <isum>
    /// <base>  ::= <bterm> | <base> "+" <bterm> | max(<base>,<bterm>)
    /// <bterm> ::= J_i | C_i | B_i
    /// <isum>  ::= SUM_{k in hp(i)} (floor(<num>/T_k) + <k01>) * C_k
    /// <k01>   ::= 1 | 0
    /// <num>   ::= <var> | (<num> + <num>) | (<num> - <num>)
    ///           | min(<num>,<num>) | max(<num>,<num>)
    /// <var>   ::= R_i | D_i | J_i | C_i | B_i | T_i | J_k | C_k | D_k | T_k
    /// ```
    pub fn standard() -> Self {
        use Symbol::N;
        const RT: usize = 0;
        const BASE: usize = 1;
        const BTERM: usize = 2;
        const ISUM: usize = 3;
        const K01: usize = 4;
        const NUM: usize = 5;
        const VAR: usize = 6;
        let binary = |op: &str| vec![t(&format!("({op} ")), N(NUM), t(" "), N(NUM), t(")")];
        let rules = vec![
            Rule {
                name: "rt".into(),
                productions: vec![vec![t("(rt "), N(BASE), t(" "), N(ISUM), t(")")]],
            },
            Rule {
                name: "base".into(),
                productions: vec![
                    vec![N(BTERM)],
                    vec![t("(+ "), N(BASE), t(" "), N(BTERM), t(")")],
                    vec![t("(max "), N(BASE), t(" "), N(BTERM), t(")")],
                ],
            },
            Rule {
                name: "bterm".into(),
                productions: BaseVar::ALL.iter().map(|v| vec![t(v.name())]).collect(),
            },
            Rule {
                name: "isum".into(),
                productions: vec![vec![t("(isum "), N(NUM), t(" "), N(K01), t(")")]],
            },
            Rule {
                name: "k01".into(),
                productions: vec![vec![t("1")], vec![t("0")]],
            },
            Rule {
                name: "num".into(),
                productions: vec![
                    vec![N(VAR)],
                    binary("+"),
                    binary("-"),
                    binary("min"),
                    binary("max"),
                ],
            },
            Rule {
                name: "var".into(),
                productions: Var::ALL.iter().map(|v| vec![t(v.name())]).collect(),
            },
        ];
        Grammar { rules, start: RT }
    }

    /// A grammar whose only word is `f`.
    pub fn pinned(f: &Formula) -> Self {
        Grammar {
            rules: vec![Rule {
                name: "rt".into(),
                productions: vec![vec![Symbol::T(render_formula(f))]],
            }],
            start: 0,
        }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Derives the word selected by `g`.
    pub fn derive(&self, g: &Genotype) -> Result<String, FormulaError> {
        if g.codons.is_empty() {
            return Err(FormulaError::EmptyGenotype);
        }
        let budget = g.codons.len() * (g.max_wraps as usize + 1);
        let mut used = 0usize;
        let mut out = String::new();
        let mut stack = vec![Symbol::N(self.start)];
        let mut expansions = 0usize;
        // Popping from the end of a stack that holds productions in reverse
        // order yields the leftmost derivation.
        while let Some(sym) = stack.pop() {
            match sym {
                Symbol::T(s) => out.push_str(&s),
                Symbol::N(i) => {
                    expansions += 1;
                    if expansions > MAX_EXPANSIONS {
                        return Err(FormulaError::MappingIncomplete { consumed: used });
                    }
                    let prods = &self.rules[i].productions;
                    let choice = if prods.len() == 1 {
                        0
                    } else {
                        if used == budget {
                            return Err(FormulaError::MappingIncomplete { consumed: used });
                        }
                        let c = g.codons[used % g.codons.len()];
                        used += 1;
                        c as usize % prods.len()
                    };
                    stack.extend(prods[choice].iter().rev().cloned());
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            write!(f, "<{}> ::=", r.name)?;
            for (i, p) in r.productions.iter().enumerate() {
                if i > 0 {
                    write!(f, " |")?;
                }
                for s in p {
                    match s {
                        Symbol::T(s) => write!(f, " {s:?}")?,
                        Symbol::N(j) => write!(f, " <{}>", self.rules[*j].name)?,
                    }
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Integer codon string decoded through a [`Grammar`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Genotype {
    pub codons: Vec<u32>,
    pub max_wraps: u32,
}

impl Genotype {
    pub fn new(codons: Vec<u32>) -> Self {
        Genotype {
            codons,
            max_wraps: 3,
        }
    }
}

/// Codon string that derives `f` under [`Grammar::standard`]; the inverse
/// of [`map_genotype`] on that grammar.
pub fn encode_formula(f: &Formula) -> Genotype {
    fn base(b: &BaseExpr, out: &mut Vec<u32>) {
        let var = |v: &BaseVar| BaseVar::ALL.iter().position(|x| x == v).unwrap() as u32;
        match b {
            BaseExpr::Term(v) => out.extend([0, var(v)]),
            BaseExpr::Add(inner, v) | BaseExpr::Max(inner, v) => {
                out.push(if matches!(b, BaseExpr::Add(..)) { 1 } else { 2 });
                base(inner, out);
                out.push(var(v));
            }
        }
    }
    fn num(n: &NumExpr, out: &mut Vec<u32>) {
        let (choice, a, b) = match n {
            NumExpr::Var(v) => {
                out.extend([0, Var::ALL.iter().position(|x| x == v).unwrap() as u32]);
                return;
            }
            NumExpr::Add(a, b) => (1, a, b),
            NumExpr::Sub(a, b) => (2, a, b),
            NumExpr::Min(a, b) => (3, a, b),
            NumExpr::Max(a, b) => (4, a, b),
        };
        out.push(choice);
        num(a, out);
        num(b, out);
    }
    let mut codons = Vec::new();
    base(&f.base, &mut codons);
    num(&f.num, &mut codons);
    codons.push(match f.k01 {
        K01::One => 0,
        K01::Zero => 1,
    });
    Genotype::new(codons)
}

/// Maps a genotype to a formula by leftmost derivation: each expansion of a
/// nonterminal with `p > 1` productions consumes one codon `c` and picks
/// production `c mod p`; the codon string is re-read at most `max_wraps`
/// extra times.
pub fn map_genotype(g: &Genotype, grammar: &Grammar) -> Result<Formula, FormulaError> {
    let word = grammar.derive(g)?;
    parse_formula(&word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::builtin;

    #[test]
    fn all_zero_codons() {
        let g = Genotype::new(vec![0; 8]);
        let f = map_genotype(&g, &Grammar::standard()).unwrap();
        assert_eq!(render_formula(&f), "(rt Ji (isum Ri 1))");
    }

    #[test]
    fn mapping_is_deterministic() {
        let g = Genotype::new(vec![7, 2, 9, 14, 3, 3, 1, 0, 5, 11, 4]);
        let grammar = Grammar::standard();
        assert_eq!(map_genotype(&g, &grammar), map_genotype(&g, &grammar));
    }

    #[test]
    fn unfinished_derivation_without_wraps() {
        let g = Genotype {
            codons: vec![1],
            max_wraps: 0,
        };
        assert!(matches!(
            map_genotype(&g, &Grammar::standard()),
            Err(FormulaError::MappingIncomplete { consumed: 1 })
        ));
    }

    #[test]
    fn wrapping_reuses_codons() {
        // [1] wraps forever on <base> recursion; with 3 wraps the codon is
        // read 4 times and the derivation is still unfinished.
        let g = Genotype::new(vec![1]);
        assert!(matches!(
            map_genotype(&g, &Grammar::standard()),
            Err(FormulaError::MappingIncomplete { consumed: 4 })
        ));
        // base:0 bterm:1 (Ci) num:0 var:6 (Jk), then <k01> re-reads the
        // first codon (0 -> "1").
        let mut g = Genotype {
            codons: vec![0, 1, 0, 6],
            max_wraps: 1,
        };
        assert_eq!(
            render_formula(&map_genotype(&g, &Grammar::standard()).unwrap()),
            "(rt Ci (isum Jk 1))"
        );
        g.max_wraps = 0;
        assert!(map_genotype(&g, &Grammar::standard()).is_err());
    }

    #[test]
    fn empty_genotype() {
        assert!(matches!(
            map_genotype(&Genotype::new(vec![]), &Grammar::standard()),
            Err(FormulaError::EmptyGenotype)
        ));
    }

    #[test]
    fn pinned_grammar_has_one_word() {
        let eq3 = builtin(3).unwrap();
        let grammar = Grammar::pinned(&eq3);
        for codons in [vec![0], vec![5, 9, 1], vec![u32::MAX]] {
            assert_eq!(map_genotype(&Genotype::new(codons), &grammar).unwrap(), eq3);
        }
    }

    #[test]
    fn grammar_prints_as_bnf() {
        let text = Grammar::standard().to_string();
        assert!(text.starts_with("<rt> ::= \"(rt \" <base>"));
        assert_eq!(text.lines().count(), 7);
    }

    /// Codon strings that derive each builtin under the standard grammar.
    #[test]
    fn builtins_are_derivable() {
        // Builtin 3: base = (+ (+ (max Bi Ci) Ji) Ci), num = (+ Di Jk), k01 = 1
        // base: 1 [+], base: 1 [+], base: 2 [max], base: 0, bterm 2 (Bi),
        // bterm 1 (Ci), bterm 0 (Ji), bterm 1 (Ci), num 1 [+], num 0, var 1
        // (Di), num 0, var 6 (Jk), k01 0 (1).
        let codons = vec![1, 1, 2, 0, 2, 1, 0, 1, 1, 0, 1, 0, 6, 0];
        let f = map_genotype(&Genotype::new(codons), &Grammar::standard()).unwrap();
        assert_eq!(f, builtin(3).unwrap());
    }

    #[test]
    fn encode_inverts_mapping_for_builtins() {
        for k in 1..=4 {
            let f = builtin(k).unwrap();
            let g = encode_formula(&f);
            assert_eq!(map_genotype(&g, &Grammar::standard()).unwrap(), f, "eq {k}");
        }
    }
}
