use std::fmt;

/// Message-level atoms allowed in the base part of a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseVar {
    Ji,
    Ci,
    Bi,
}

/// Atoms allowed inside the interference numerator. The `*k` atoms are
/// bound to the higher-priority message currently being summed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Ri,
    Di,
    Ji,
    Ci,
    Bi,
    Ti,
    Jk,
    Ck,
    Dk,
    Tk,
}

impl Var {
    /// In grammar production order.
    pub const ALL: [Var; 10] = [
        Var::Ri,
        Var::Di,
        Var::Ji,
        Var::Ci,
        Var::Bi,
        Var::Ti,
        Var::Jk,
        Var::Ck,
        Var::Dk,
        Var::Tk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Var::Ri => "Ri",
            Var::Di => "Di",
            Var::Ji => "Ji",
            Var::Ci => "Ci",
            Var::Bi => "Bi",
            Var::Ti => "Ti",
            Var::Jk => "Jk",
            Var::Ck => "Ck",
            Var::Dk => "Dk",
            Var::Tk => "Tk",
        }
    }

    pub fn from_name(s: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == s)
    }
}

impl BaseVar {
    pub const ALL: [BaseVar; 3] = [BaseVar::Ji, BaseVar::Ci, BaseVar::Bi];

    pub fn name(self) -> &'static str {
        match self {
            BaseVar::Ji => "Ji",
            BaseVar::Ci => "Ci",
            BaseVar::Bi => "Bi",
        }
    }

    pub fn from_name(s: &str) -> Option<BaseVar> {
        BaseVar::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// Left-spined expression over `{Ji, Ci, Bi}` with `+` and `max`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BaseExpr {
    Term(BaseVar),
    Add(Box<BaseExpr>, BaseVar),
    Max(Box<BaseExpr>, BaseVar),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NumExpr {
    Var(Var),
    Add(Box<NumExpr>, Box<NumExpr>),
    Sub(Box<NumExpr>, Box<NumExpr>),
    Min(Box<NumExpr>, Box<NumExpr>),
    Max(Box<NumExpr>, Box<NumExpr>),
}

/// The constant added to each floor term of the interference sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum K01 {
    Zero,
    One,
}

impl K01 {
    pub fn value(self) -> i64 {
        match self {
            K01::Zero => 0,
            K01::One => 1,
        }
    }
}

/// A response-time formula
/// `R_i = base + SUM_{k in hp(i)} (floor(num / T_k) + k01) * C_k`.
///
/// The formula is self-referential (solved by fixed-point iteration) iff
/// `num` mentions `Ri`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula {
    pub base: BaseExpr,
    pub num: NumExpr,
    pub k01: K01,
}

impl NumExpr {
    pub fn var(v: Var) -> Self {
        NumExpr::Var(v)
    }
    pub fn add(a: NumExpr, b: NumExpr) -> Self {
        NumExpr::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: NumExpr, b: NumExpr) -> Self {
        NumExpr::Sub(Box::new(a), Box::new(b))
    }
    pub fn min(a: NumExpr, b: NumExpr) -> Self {
        NumExpr::Min(Box::new(a), Box::new(b))
    }
    pub fn max(a: NumExpr, b: NumExpr) -> Self {
        NumExpr::Max(Box::new(a), Box::new(b))
    }

    pub fn mentions(&self, v: Var) -> bool {
        match self {
            NumExpr::Var(x) => *x == v,
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Min(a, b) | NumExpr::Max(a, b) => {
                a.mentions(v) || b.mentions(v)
            }
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            NumExpr::Var(x) => {
                if !out.contains(x) {
                    out.push(*x)
                }
            }
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Min(a, b) | NumExpr::Max(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            NumExpr::Var(_) => 1,
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Min(a, b) | NumExpr::Max(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

impl BaseExpr {
    pub fn add(self, v: BaseVar) -> Self {
        BaseExpr::Add(Box::new(self), v)
    }
    pub fn max(self, v: BaseVar) -> Self {
        BaseExpr::Max(Box::new(self), v)
    }
}

impl Formula {
    pub fn is_self_referential(&self) -> bool {
        self.num.mentions(Var::Ri)
    }

    /// Number of IR nodes, used to report formula size.
    pub fn size(&self) -> usize {
        fn base_size(b: &BaseExpr) -> usize {
            match b {
                BaseExpr::Term(_) => 1,
                BaseExpr::Add(inner, _) | BaseExpr::Max(inner, _) => 2 + base_size(inner),
            }
        }
        base_size(&self.base) + self.num.size() + 2
    }
}

/// The four reference formulae.
///
/// 1. the iterative S1 test;
/// 2. S1 with the deadline in place of the response time;
/// 3. the same without the jitter and cost subtraction;
/// 4. an evolved formula that was found to be non-optimistic on a CAN
///    corpus:
///    `Ji + Ci + Bi + SUM floor(min(max(min(max(Ji,Ci),Jk), max(Jk, min(Ci,Ck) - Ci)) + Ri, Ti) / Tk) * Ck`.
pub fn builtin(eq: u8) -> Option<Formula> {
    use NumExpr as N;
    use Var::*;
    let s1_base = BaseExpr::Term(BaseVar::Bi)
        .max(BaseVar::Ci)
        .add(BaseVar::Ji)
        .add(BaseVar::Ci);
    let f = match eq {
        1 => Formula {
            base: s1_base,
            num: N::add(N::sub(N::sub(N::var(Ri), N::var(Ji)), N::var(Ci)), N::var(Jk)),
            k01: K01::One,
        },
        2 => Formula {
            base: s1_base,
            num: N::add(N::sub(N::sub(N::var(Di), N::var(Ji)), N::var(Ci)), N::var(Jk)),
            k01: K01::One,
        },
        3 => Formula {
            base: s1_base,
            num: N::add(N::var(Di), N::var(Jk)),
            k01: K01::One,
        },
        4 => Formula {
            base: BaseExpr::Term(BaseVar::Ji)
                .add(BaseVar::Ci)
                .add(BaseVar::Bi),
            num: N::min(
                N::add(
                    N::max(
                        N::min(N::max(N::var(Ji), N::var(Ci)), N::var(Jk)),
                        N::max(N::var(Jk), N::sub(N::min(N::var(Ci), N::var(Ck)), N::var(Ci))),
                    ),
                    N::var(Ri),
                ),
                N::var(Ti),
            ),
            k01: K01::Zero,
        },
        _ => return None,
    };
    Some(f)
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::sexpr::render_formula(self))
    }
}
