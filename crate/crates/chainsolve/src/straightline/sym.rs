//! Symbolic expression trees. Arithmetic on an unsolved unknown builds one of
//! these instead of a number; `solve_it` turns the tree into a rational
//! function and extracts its smallest admissible real root.

use super::poly::{real_roots, RationalFn, SolveError};
use crate::model::ExecLimits;
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SymExpr {
    Unknown { name: String, positive: bool },
    Const(BigRational),
    Add(Box<SymExpr>, Box<SymExpr>),
    Sub(Box<SymExpr>, Box<SymExpr>),
    Mul(Box<SymExpr>, Box<SymExpr>),
    Div(Box<SymExpr>, Box<SymExpr>),
    Neg(Box<SymExpr>),
    Pow(Box<SymExpr>, i64),
}

impl SymExpr {
    pub fn unknown_names(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        self.collect_unknowns(&mut names);
        names
    }

    fn collect_unknowns(&self, out: &mut BTreeSet<String>) {
        match self {
            SymExpr::Unknown { name, .. } => {
                out.insert(name.clone());
            }
            SymExpr::Const(_) => {}
            SymExpr::Add(a, b) | SymExpr::Sub(a, b) | SymExpr::Mul(a, b) | SymExpr::Div(a, b) => {
                a.collect_unknowns(out);
                b.collect_unknowns(out);
            }
            SymExpr::Neg(a) => a.collect_unknowns(out),
            SymExpr::Pow(a, _) => a.collect_unknowns(out),
        }
    }

    /// Positivity constraint attached to the named unknown, if it occurs.
    pub fn positivity_of(&self, unknown: &str) -> Option<bool> {
        match self {
            SymExpr::Unknown { name, positive } if name == unknown => Some(*positive),
            SymExpr::Unknown { .. } | SymExpr::Const(_) => None,
            SymExpr::Add(a, b) | SymExpr::Sub(a, b) | SymExpr::Mul(a, b) | SymExpr::Div(a, b) => {
                a.positivity_of(unknown).or_else(|| b.positivity_of(unknown))
            }
            SymExpr::Neg(a) | SymExpr::Pow(a, _) => a.positivity_of(unknown),
        }
    }

    fn to_rational_fn(&self, unknown: &str) -> Result<RationalFn, SolveError> {
        match self {
            SymExpr::Unknown { name, .. } => {
                if name == unknown {
                    Ok(RationalFn::unknown())
                } else {
                    Err(SolveError::ForeignUnknown(name.clone(), unknown.to_string()))
                }
            }
            SymExpr::Const(c) => Ok(RationalFn::constant(c.clone())),
            SymExpr::Add(a, b) => Ok(a.to_rational_fn(unknown)?.add(&b.to_rational_fn(unknown)?)),
            SymExpr::Sub(a, b) => Ok(a.to_rational_fn(unknown)?.sub(&b.to_rational_fn(unknown)?)),
            SymExpr::Mul(a, b) => Ok(a.to_rational_fn(unknown)?.mul(&b.to_rational_fn(unknown)?)),
            SymExpr::Div(a, b) => a.to_rational_fn(unknown)?.div(&b.to_rational_fn(unknown)?),
            SymExpr::Neg(a) => Ok(a.to_rational_fn(unknown)?.neg()),
            SymExpr::Pow(a, e) => a.to_rational_fn(unknown)?.pow(*e),
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymExpr::Unknown { name, .. } => f.write_str(name),
            SymExpr::Const(c) => write!(f, "{}", crate::model::rational_to_record(c)),
            SymExpr::Add(a, b) => write!(f, "({a} + {b})"),
            SymExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            SymExpr::Mul(a, b) => write!(f, "({a} * {b})"),
            SymExpr::Div(a, b) => write!(f, "({a} / {b})"),
            SymExpr::Neg(a) => write!(f, "(-{a})"),
            SymExpr::Pow(a, e) => write!(f, "({a} ** {e})"),
        }
    }
}

/// Solves `expr = 0` for the named unknown. Clears denominators, cancels
/// shared factors, extracts real roots, drops roots that violate positivity
/// or make any cleared denominator vanish, and returns the smallest survivor.
/// The positivity constraint is honored whether it arrives on the unknown
/// argument or on a leaf inside the expression.
pub fn solve_for(
    expr: &SymExpr,
    unknown: &str,
    positive_hint: bool,
    limits: &ExecLimits,
) -> Result<BigRational, SolveError> {
    let positive = positive_hint || expr.positivity_of(unknown).unwrap_or(false);
    let rf = expr.to_rational_fn(unknown)?.reduced();
    let roots = real_roots(&rf.num, limits)?;
    let mut admissible: Vec<BigRational> = roots
        .into_iter()
        .filter(|root| !(positive && *root <= BigRational::zero()))
        .filter(|root| !rf.den.eval(root).is_zero())
        .collect();
    admissible.sort();
    admissible.into_iter().next().ok_or(SolveError::NoRoot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rat;

    fn unknown(name: &str, positive: bool) -> SymExpr {
        SymExpr::Unknown { name: name.to_string(), positive }
    }

    fn konst(n: i64) -> SymExpr {
        SymExpr::Const(rat(n))
    }

    #[test]
    fn linear_equation() {
        // 3x - 12 = 0
        let expr = SymExpr::Sub(
            Box::new(SymExpr::Mul(Box::new(konst(3)), Box::new(unknown("x", false)))),
            Box::new(konst(12)),
        );
        assert_eq!(solve_for(&expr, "x", false, &ExecLimits::none()).unwrap(), rat(4));
    }

    #[test]
    fn rational_equation_with_positivity() {
        // 600/d - 600/(d + 1/2) - 200 = 0 has roots -3/2 and 1.
        let d = || Box::new(unknown("d", true));
        let half = SymExpr::Const(BigRational::new(1.into(), 2.into()));
        let expr = SymExpr::Sub(
            Box::new(SymExpr::Sub(
                Box::new(SymExpr::Div(Box::new(konst(600)), d())),
                Box::new(SymExpr::Div(
                    Box::new(konst(600)),
                    Box::new(SymExpr::Add(d(), Box::new(half))),
                )),
            )),
            Box::new(konst(200)),
        );
        assert_eq!(solve_for(&expr, "d", false, &ExecLimits::none()).unwrap(), rat(1));
    }

    #[test]
    fn unconstrained_unknown_returns_smallest_root() {
        // x^2 - 1 = 0 -> roots -1, 1; smallest is -1.
        let expr = SymExpr::Sub(
            Box::new(SymExpr::Pow(Box::new(unknown("x", false)), 2)),
            Box::new(konst(1)),
        );
        assert_eq!(solve_for(&expr, "x", false, &ExecLimits::none()).unwrap(), rat(-1));
    }

    #[test]
    fn pole_roots_are_discarded() {
        // (x - 2)/(x - 2) - 1 = 0 reduces to 0 = 0: degenerate.
        let xm2 = || {
            Box::new(SymExpr::Sub(Box::new(unknown("x", false)), Box::new(konst(2))))
        };
        let expr = SymExpr::Sub(
            Box::new(SymExpr::Div(xm2(), xm2())),
            Box::new(konst(1)),
        );
        assert_eq!(solve_for(&expr, "x", false, &ExecLimits::none()), Err(SolveError::Degenerate));
    }

    #[test]
    fn foreign_unknown_is_an_error() {
        let expr = SymExpr::Add(Box::new(unknown("a", false)), Box::new(unknown("b", false)));
        assert!(matches!(
            solve_for(&expr, "a", false, &ExecLimits::none()),
            Err(SolveError::ForeignUnknown(..))
        ));
    }

    #[test]
    fn no_admissible_root() {
        // x + 1 = 0 with x constrained positive.
        let expr = SymExpr::Add(Box::new(unknown("x", true)), Box::new(konst(1)));
        assert_eq!(solve_for(&expr, "x", false, &ExecLimits::none()), Err(SolveError::NoRoot));
    }
}
