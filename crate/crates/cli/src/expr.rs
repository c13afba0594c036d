//! Config expressions parsed by `meval` and evaluated over a fixed variable
//! list. Evaluation is allocation-light and the compiled form is `Send + Sync`,
//! unlike `meval`'s bound closures.

use std::collections::BTreeMap;

use meval::tokenizer::{Operation, Token};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Bin(Operation),
    F1(fn(f64) -> f64),
    Atan2,
    Max(usize),
    Min(usize),
}

/// An expression in the variables given at compile time.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    source: String,
    ops: Vec<Op>,
    depth: usize,
}

fn unary(name: &str) -> Option<fn(f64) -> f64> {
    Some(match name {
        "sqrt" => f64::sqrt,
        "exp" => f64::exp,
        "ln" => f64::ln,
        "abs" => f64::abs,
        "sin" => f64::sin,
        "cos" => f64::cos,
        "tan" => f64::tan,
        "asin" => f64::asin,
        "acos" => f64::acos,
        "atan" => f64::atan,
        "sinh" => f64::sinh,
        "cosh" => f64::cosh,
        "tanh" => f64::tanh,
        "floor" => f64::floor,
        "ceil" => f64::ceil,
        "round" => f64::round,
        "signum" => f64::signum,
        _ => return None,
    })
}

impl CompiledExpr {
    /// Parses `source`. Names resolve to a position in `vars`, then to
    /// `params`, then to the constants `pi` and `e`.
    pub fn compile(source: &str, vars: &[&str], params: &BTreeMap<String, f64>) -> CliResult<Self> {
        let bad = |msg: String| CliError::Usage(format!("expression '{source}': {msg}"));
        let expr: meval::Expr = source.parse().map_err(|e: meval::Error| bad(e.to_string()))?;
        let mut ops = Vec::with_capacity(expr.len());
        let (mut height, mut depth) = (0usize, 0usize);
        for token in expr.iter() {
            let (op, pops) = match token {
                Token::Number(v) => (Op::Const(*v), 0),
                Token::Var(name) => {
                    let op = if let Some(k) = vars.iter().position(|v| v == name) {
                        Op::Var(k)
                    } else if let Some(v) = params.get(name) {
                        Op::Const(*v)
                    } else if name == "pi" {
                        Op::Const(std::f64::consts::PI)
                    } else if name == "e" {
                        Op::Const(std::f64::consts::E)
                    } else {
                        return Err(bad(format!(
                            "unknown variable '{name}' (variables: {})",
                            vars.join(", ")
                        )));
                    };
                    (op, 0)
                }
                Token::Unary(Operation::Minus) => (Op::Neg, 1),
                Token::Unary(Operation::Plus) => continue,
                Token::Binary(op) => (Op::Bin(*op), 2),
                Token::Func(name, Some(n)) => {
                    let n = *n;
                    match (name.as_str(), n) {
                        ("atan2", 2) => (Op::Atan2, 2),
                        ("max", n) if n >= 1 => (Op::Max(n), n),
                        ("min", n) if n >= 1 => (Op::Min(n), n),
                        (f, 1) => match unary(f) {
                            Some(g) => (Op::F1(g), 1),
                            None => return Err(bad(format!("unknown function '{f}'"))),
                        },
                        (f, n) => return Err(bad(format!("function '{f}' with {n} arguments"))),
                    }
                }
                other => return Err(bad(format!("unexpected token {other:?}"))),
            };
            if height < pops {
                return Err(bad("malformed expression".into()));
            }
            height = height - pops + 1;
            depth = depth.max(height);
            ops.push(op);
        }
        if height != 1 {
            return Err(bad("malformed expression".into()));
        }
        Ok(Self {
            source: source.to_string(),
            ops,
            depth,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value at `vars`, ordered as at compile time.
    pub fn eval(&self, vars: &[f64]) -> f64 {
        let mut small = [0.0f64; 32];
        let mut big;
        let stack: &mut [f64] = if self.depth <= small.len() {
            &mut small
        } else {
            big = vec![0.0; self.depth];
            &mut big
        };
        let mut top = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[top] = v;
                    top += 1;
                }
                Op::Var(k) => {
                    stack[top] = vars[k];
                    top += 1;
                }
                Op::Neg => stack[top - 1] = -stack[top - 1],
                Op::F1(f) => stack[top - 1] = f(stack[top - 1]),
                Op::Bin(b) => {
                    let (l, r) = (stack[top - 2], stack[top - 1]);
                    top -= 1;
                    stack[top - 1] = match b {
                        Operation::Plus => l + r,
                        Operation::Minus => l - r,
                        Operation::Times => l * r,
                        Operation::Div => l / r,
                        Operation::Rem => l % r,
                        Operation::Pow => l.powf(r),
                    };
                }
                Op::Atan2 => {
                    let (y, x) = (stack[top - 2], stack[top - 1]);
                    top -= 1;
                    stack[top - 1] = y.atan2(x);
                }
                Op::Max(n) | Op::Min(n) => {
                    let args = &stack[top - n..top];
                    let v = if matches!(op, Op::Max(_)) {
                        args.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        args.iter().copied().fold(f64::INFINITY, f64::min)
                    };
                    top -= n;
                    stack[top] = v;
                    top += 1;
                }
            }
        }
        stack[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CompiledExpr {
        let mut p = BTreeMap::new();
        p.insert("k".to_string(), 3.0);
        CompiledExpr::compile(s, &["x", "y"], &p).unwrap()
    }

    #[test]
    fn agrees_with_meval() {
        let cases = [
            "x * (1 - x^2)",
            "-x + k * y",
            "2^-x",
            "max(x, y, 0.5) - min(x, -y)",
            "atan2(y, x) + sin(pi * x) / exp(y)",
            "(x + y) % 0.3 - --x",
            "tanh(k * y) * abs(x - 1)",
        ];
        for s in cases {
            for (x, y) in [(0.3, -0.7), (1.5, 2.0), (-2.0, 0.1)] {
                let ctx = meval::Context::new().var("x", x).var("y", y).var("k", 3.0).clone();
                let want = meval::eval_str_with_context(s, ctx).unwrap();
                let got = c(s).eval(&[x, y]);
                assert!(
                    got == want || (got - want).abs() <= 1e-15 * want.abs(),
                    "{s}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn unknown_names_are_usage_errors() {
        let p = BTreeMap::new();
        for s in ["x + z", "foo(x)", "x +", "atan2(x)"] {
            assert!(
                matches!(CompiledExpr::compile(s, &["x"], &p), Err(CliError::Usage(_))),
                "{s}"
            );
        }
    }
}
