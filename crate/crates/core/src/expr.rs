//! Arithmetic expressions for clock- and dwell-dependent prices.
//!
//! The variable `t` denotes the dwell of the delay being priced; every other
//! variable names a clock of the owning automaton and is read at the start
//! of that delay.

use crate::rational::{self, Rational};
use num_traits::{One, Zero};
use serde_json::{json, Value};
use std::collections::BTreeSet;

/// Name of the dwell variable.
pub const DWELL: &str = "t";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(Rational),
    Var(String),
    Add(Vec<Expr>),
    /// `Sub([a])` is negation, `Sub([a, b, c])` is `a - b - c`.
    Sub(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("operator `{0}` needs at least one operand")]
    Arity(&'static str),
}

impl Expr {
    pub fn constant(q: Rational) -> Self {
        Expr::Const(q)
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    pub fn dwell() -> Self {
        Expr::Var(DWELL.to_string())
    }

    pub fn pow(self, n: u32) -> Self {
        Expr::Pow(Box::new(self), n)
    }

    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Rational>) -> Result<Rational, EvalError> {
        Ok(match self {
            Expr::Const(q) => q.clone(),
            Expr::Var(v) => env(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Expr::Add(xs) => {
                let mut acc = Rational::zero();
                for x in xs {
                    acc += x.eval(env)?;
                }
                acc
            }
            Expr::Sub(xs) => match xs.split_first() {
                None => return Err(EvalError::Arity("sub")),
                Some((first, [])) => -first.eval(env)?,
                Some((first, rest)) => {
                    let mut acc = first.eval(env)?;
                    for x in rest {
                        acc -= x.eval(env)?;
                    }
                    acc
                }
            },
            Expr::Mul(xs) => {
                let mut acc = Rational::one();
                for x in xs {
                    acc *= x.eval(env)?;
                }
                acc
            }
            Expr::Div(a, b) => {
                let d = b.eval(env)?;
                if d.is_zero() {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(env)? / d
            }
            Expr::Pow(b, n) => {
                let base = b.eval(env)?;
                let mut acc = Rational::one();
                for _ in 0..*n {
                    acc *= &base;
                }
                acc
            }
        })
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Add(xs) | Expr::Sub(xs) | Expr::Mul(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
            Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(b, _) => b.collect_vars(out),
        }
    }

    /// Prefix s-expression form, e.g. `["pow", ["sub", 1, "x", ["div", "t", 2]], 2]`.
    pub fn to_json(&self) -> Value {
        let list = |op: &str, xs: &[Expr]| {
            let mut v = vec![json!(op)];
            v.extend(xs.iter().map(Expr::to_json));
            Value::Array(v)
        };
        match self {
            Expr::Const(q) => rational::to_json(q),
            Expr::Var(v) => json!(v),
            Expr::Add(xs) => list("add", xs),
            Expr::Sub(xs) => list("sub", xs),
            Expr::Mul(xs) => list("mul", xs),
            Expr::Div(a, b) => json!(["div", a.to_json(), b.to_json()]),
            Expr::Pow(b, n) => json!(["pow", b.to_json(), n]),
        }
    }

    pub fn from_json(v: &Value) -> Result<Expr, String> {
        match v {
            Value::Number(_) => rational::from_json(v)
                .map(Expr::Const)
                .ok_or_else(|| format!("inexact or invalid numeral {v}")),
            Value::String(s) => Ok(match rational::parse(s) {
                Ok(q) => Expr::Const(q),
                Err(_) if is_identifier(s) => Expr::Var(s.clone()),
                Err(_) => return Err(format!("`{s}` is neither a numeral nor an identifier")),
            }),
            Value::Array(items) => {
                let (head, args) = items.split_first().ok_or_else(|| "empty expression list".to_string())?;
                let op = head.as_str().ok_or_else(|| "operator must be a string".to_string())?;
                let parsed = || args.iter().map(Expr::from_json).collect::<Result<Vec<_>, _>>();
                match op {
                    "add" | "sub" | "mul" => {
                        let xs = parsed()?;
                        if xs.is_empty() {
                            return Err(format!("`{op}` needs at least one operand"));
                        }
                        Ok(match op {
                            "add" => Expr::Add(xs),
                            "sub" => Expr::Sub(xs),
                            _ => Expr::Mul(xs),
                        })
                    }
                    "div" => match parsed()?.as_slice() {
                        [a, b] => Ok(Expr::Div(Box::new(a.clone()), Box::new(b.clone()))),
                        _ => Err("`div` takes two operands".into()),
                    },
                    "pow" => match args {
                        [b, Value::Number(n)] => {
                            let n = n
                                .as_u64()
                                .filter(|n| *n <= u32::MAX as u64)
                                .ok_or_else(|| "`pow` exponent must be a natural number".to_string())?;
                            Ok(Expr::Pow(Box::new(Expr::from_json(b)?), n as u32))
                        }
                        _ => Err("`pow` takes a base and a natural exponent".into()),
                    },
                    other => Err(format!("unknown operator `{other}`")),
                }
            }
            other => Err(format!("unexpected expression {other}")),
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '\''))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn decrement_price() -> Expr {
        // (1 - x - t/2)^2
        Expr::Sub(vec![
            Expr::Const(int(1)),
            Expr::var("x"),
            Expr::Div(Box::new(Expr::dwell()), Box::new(Expr::Const(int(2)))),
        ])
        .pow(2)
    }

    #[test]
    fn evaluates_exactly() {
        let e = decrement_price();
        let env = |v: &str| match v {
            "x" => Some(ratio(1, 2)),
            "t" => Some(ratio(1, 2)),
            _ => None,
        };
        assert_eq!(e.eval(&env).unwrap(), ratio(1, 16));
    }

    #[test]
    fn json_form_matches_prefix_notation() {
        let e = decrement_price();
        assert_eq!(e.to_json(), json!(["pow", ["sub", 1, "x", ["div", "t", 2]], 2]));
        assert_eq!(Expr::from_json(&e.to_json()).unwrap(), e);
        assert_eq!(
            Expr::from_json(&json!(["mul", "1/3", "t"])).unwrap(),
            Expr::Mul(vec![Expr::Const(ratio(1, 3)), Expr::dwell()])
        );
    }

    #[test]
    fn rejects_malformed() {
        assert!(Expr::from_json(&json!(["pow", "t", -1])).is_err());
        assert!(Expr::from_json(&json!(["log", "t"])).is_err());
        assert!(Expr::from_json(&json!(1.5)).is_err());
        assert!(Expr::from_json(&json!("1 2")).is_err());
        let unbound = Expr::var("y").eval(&|_| None);
        assert_eq!(unbound, Err(EvalError::Unbound("y".into())));
    }
}
