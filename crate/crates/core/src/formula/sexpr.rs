//! S-expression surface syntax: `(rt <base> (isum <num> <k01>))`.

use super::ir::{BaseExpr, BaseVar, Formula, NumExpr, Var, K01};
use super::FormulaError;

pub fn render_formula(f: &Formula) -> String {
    let mut out = String::with_capacity(64);
    out.push_str("(rt ");
    render_base(&f.base, &mut out);
    out.push_str(" (isum ");
    render_num(&f.num, &mut out);
    out.push_str(match f.k01 {
        K01::Zero => " 0))",
        K01::One => " 1))",
    });
    out
}

fn render_base(b: &BaseExpr, out: &mut String) {
    match b {
        BaseExpr::Term(v) => out.push_str(v.name()),
        BaseExpr::Add(inner, v) | BaseExpr::Max(inner, v) => {
            out.push_str(if matches!(b, BaseExpr::Add(..)) {
                "(+ "
            } else {
                "(max "
            });
            render_base(inner, out);
            out.push(' ');
            out.push_str(v.name());
            out.push(')');
        }
    }
}

fn render_num(n: &NumExpr, out: &mut String) {
    let (op, a, b) = match n {
        NumExpr::Var(v) => {
            out.push_str(v.name());
            return;
        }
        NumExpr::Add(a, b) => ("+", a, b),
        NumExpr::Sub(a, b) => ("-", a, b),
        NumExpr::Min(a, b) => ("min", a, b),
        NumExpr::Max(a, b) => ("max", a, b),
    };
    out.push('(');
    out.push_str(op);
    out.push(' ');
    render_num(a, out);
    out.push(' ');
    render_num(b, out);
    out.push(')');
}

#[derive(Debug)]
enum Sexp<'a> {
    Atom(&'a str, usize),
    List(Vec<Sexp<'a>>, usize),
}

impl Sexp<'_> {
    fn pos(&self) -> usize {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn syntax(pos: usize, message: impl Into<String>) -> FormulaError {
    FormulaError::Syntax {
        pos,
        message: message.into(),
    }
}

fn read(text: &str) -> Result<Sexp<'_>, FormulaError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<(Vec<Sexp<'_>>, usize)> = Vec::new();
    let mut done: Option<Sexp<'_>> = None;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if done.is_some() {
            return Err(syntax(i, "trailing input after expression"));
        }
        match c {
            b'(' => {
                stack.push((Vec::new(), i));
                i += 1;
            }
            b')' => {
                let (items, start) = stack.pop().ok_or_else(|| syntax(i, "unbalanced ')'"))?;
                let list = Sexp::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => done = Some(list),
                }
                i += 1;
            }
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                let atom = Sexp::Atom(&text[start..i], start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(atom),
                    None => done = Some(atom),
                }
            }
        }
    }
    if let Some((_, start)) = stack.last() {
        return Err(syntax(*start, "unclosed '('"));
    }
    done.ok_or_else(|| syntax(text.len(), "empty input"))
}

fn head<'a>(items: &'a [Sexp<'a>], pos: usize) -> Result<(&'a str, usize), FormulaError> {
    match items.first() {
        Some(Sexp::Atom(a, p)) => Ok((a, *p)),
        Some(other) => Err(syntax(other.pos(), "expected an operator")),
        None => Err(syntax(pos, "empty list")),
    }
}

fn arity(items: &[Sexp<'_>], n: usize, pos: usize, op: &str) -> Result<(), FormulaError> {
    if items.len() != n + 1 {
        return Err(syntax(
            pos,
            format!("'{op}' takes {n} operands, got {}", items.len().saturating_sub(1)),
        ));
    }
    Ok(())
}

fn unknown_or_misplaced(atom: &str, pos: usize, context: &str) -> FormulaError {
    let known = Var::from_name(atom).is_some()
        || matches!(atom, "+" | "-" | "min" | "max" | "rt" | "isum" | "0" | "1");
    if known {
        syntax(pos, format!("'{atom}' is not allowed in {context}"))
    } else {
        FormulaError::UnknownAtom {
            pos,
            atom: atom.to_string(),
        }
    }
}

fn base_var(e: &Sexp<'_>) -> Result<BaseVar, FormulaError> {
    match e {
        Sexp::Atom(a, p) => BaseVar::from_name(a).ok_or_else(|| unknown_or_misplaced(a, *p, "a base term")),
        Sexp::List(_, p) => Err(syntax(*p, "right operand of a base expression must be Ji, Ci or Bi")),
    }
}

fn base(e: &Sexp<'_>) -> Result<BaseExpr, FormulaError> {
    match e {
        Sexp::Atom(..) => Ok(BaseExpr::Term(base_var(e)?)),
        Sexp::List(items, p) => {
            let (op, op_pos) = head(items, *p)?;
            arity(items, 2, *p, op)?;
            let inner = Box::new(base(&items[1])?);
            let v = base_var(&items[2])?;
            match op {
                "+" => Ok(BaseExpr::Add(inner, v)),
                "max" => Ok(BaseExpr::Max(inner, v)),
                _ => Err(unknown_or_misplaced(op, op_pos, "a base expression")),
            }
        }
    }
}

fn num(e: &Sexp<'_>) -> Result<NumExpr, FormulaError> {
    match e {
        Sexp::Atom(a, p) => Var::from_name(a)
            .map(NumExpr::Var)
            .ok_or_else(|| unknown_or_misplaced(a, *p, "a numerator")),
        Sexp::List(items, p) => {
            let (op, op_pos) = head(items, *p)?;
            arity(items, 2, *p, op)?;
            let a = num(&items[1])?;
            let b = num(&items[2])?;
            match op {
                "+" => Ok(NumExpr::add(a, b)),
                "-" => Ok(NumExpr::sub(a, b)),
                "min" => Ok(NumExpr::min(a, b)),
                "max" => Ok(NumExpr::max(a, b)),
                _ => Err(unknown_or_misplaced(op, op_pos, "a numerator")),
            }
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let top = read(text)?;
    let Sexp::List(items, p) = &top else {
        return Err(syntax(top.pos(), "expected '(rt ...)'"));
    };
    let (op, op_pos) = head(items, *p)?;
    if op != "rt" {
        return Err(syntax(op_pos, "expected 'rt'"));
    }
    if items.len() != 3 {
        if items.len() < 3 {
            return Err(FormulaError::MissingIsum { pos: *p });
        }
        return Err(syntax(*p, "'rt' takes a base and an isum"));
    }
    let base = base(&items[1])?;
    let isum = &items[2];
    let Sexp::List(sum_items, sp) = isum else {
        return Err(FormulaError::MissingIsum { pos: isum.pos() });
    };
    match sum_items.first() {
        Some(Sexp::Atom("isum", _)) => {}
        _ => return Err(FormulaError::MissingIsum { pos: *sp }),
    }
    arity(sum_items, 2, *sp, "isum")?;
    let num = num(&sum_items[1])?;
    let k01 = match &sum_items[2] {
        Sexp::Atom("0", _) => K01::Zero,
        Sexp::Atom("1", _) => K01::One,
        other => return Err(syntax(other.pos(), "isum constant must be 0 or 1")),
    };
    Ok(Formula { base, num, k01 })
}

/// Reads a formula file: one formula per line, `;` starts a comment.
pub fn parse_formula_file(text: &str) -> Result<Vec<Formula>, FormulaError> {
    text.lines()
        .map(|l| l.split(';').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(parse_formula)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::builtin;

    #[test]
    fn minimal_word() {
        let f = parse_formula("(rt Ji (isum Dk 0))").unwrap();
        assert_eq!(f.base, BaseExpr::Term(BaseVar::Ji));
        assert_eq!(f.num, NumExpr::Var(Var::Dk));
        assert_eq!(f.k01, K01::Zero);
    }

    #[test]
    fn missing_isum() {
        assert!(matches!(
            parse_formula("(rt Ji Ji)"),
            Err(FormulaError::MissingIsum { .. })
        ));
        assert!(matches!(
            parse_formula("(rt Ji (sum Dk 0))"),
            Err(FormulaError::MissingIsum { .. })
        ));
        assert!(matches!(
            parse_formula("(rt Ji)"),
            Err(FormulaError::MissingIsum { .. })
        ));
    }

    #[test]
    fn unknown_atom_has_position() {
        match parse_formula("(rt Ji (isum Xq 0))") {
            Err(FormulaError::UnknownAtom { pos, atom }) => {
                assert_eq!(pos, 13);
                assert_eq!(atom, "Xq");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "",
            "(rt Ji (isum Dk 0)",
            "(rt Ji (isum Dk 0)))",
            "(rt Ji (isum Dk 2))",
            "(rt Ri (isum Dk 0))",
            "(rt (+ Ji (+ Ci Bi)) (isum Dk 0))",
            "(rt Ji (isum (* Dk Tk) 0))",
            "(rt Ji (isum (+ Dk) 0))",
            "Ji",
        ] {
            let err = parse_formula(bad).unwrap_err();
            assert!(
                matches!(
                    err,
                    FormulaError::Syntax { .. } | FormulaError::UnknownAtom { .. }
                ),
                "{bad}: {err:?}"
            );
        }
    }

    #[test]
    fn builtin_one_renders() {
        assert_eq!(
            render_formula(&builtin(1).unwrap()),
            "(rt (+ (+ (max Bi Ci) Ji) Ci) (isum (+ (- (- Ri Ji) Ci) Jk) 1))"
        );
    }

    #[test]
    fn builtins_round_trip() {
        for k in 1..=4 {
            let f = builtin(k).unwrap();
            assert_eq!(parse_formula(&render_formula(&f)).unwrap(), f);
        }
    }

    #[test]
    fn formula_file_skips_comments() {
        let text = "; seed=1\n(rt Ji (isum Dk 0)) ; fitness=3\n\n(rt Ci (isum Jk 1))\n";
        assert_eq!(parse_formula_file(text).unwrap().len(), 2);
    }
}
