use std::collections::{BTreeMap, BTreeSet};

use super::{BinOp, Expr, Stmt, UnaryOp, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    /// The result is infinite or NaN.
    #[error("numeric overflow in `{0}`")]
    Overflow(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("type mismatch in `{expr}`: {detail}")]
    TypeMismatch { expr: String, detail: String },
}

/// Variable bindings for one simulation, plus the names read and written so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    values: BTreeMap<String, Value>,
    reads: BTreeSet<String>,
    writes: BTreeSet<String>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: Value) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.values.get(name).copied()
    }

    /// Binds `name` without recording a write (used for loading inputs).
    pub fn bind(&mut self, name: impl Into<String>, value: Value) {
        self.values.insert(name.into(), value);
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    pub fn reads(&self) -> &BTreeSet<String> {
        &self.reads
    }

    pub fn writes(&self) -> &BTreeSet<String> {
        &self.writes
    }

    fn note_reads(&mut self, e: &Expr) {
        for name in e.variables() {
            if !self.reads.contains(name) {
                self.reads.insert(name.to_string());
            }
        }
    }
}

fn mismatch(e: &Expr, detail: String) -> EvalError {
    EvalError::TypeMismatch { expr: e.to_string(), detail }
}

fn num(e: &Expr, v: Value) -> Result<f64, EvalError> {
    v.as_num().ok_or_else(|| mismatch(e, format!("expected number, found {}", v.type_name())))
}

fn boolean(e: &Expr, v: Value) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| mismatch(e, format!("expected boolean, found {}", v.type_name())))
}

/// Evaluates `e`. `&&` and `||` short-circuit.
pub fn eval_expr(e: &Expr, env: &Env) -> Result<Value, EvalError> {
    match e {
        Expr::Lit(v) => Ok(*v),
        Expr::Var(name) => env.get(name).ok_or_else(|| EvalError::Unbound(name.clone())),
        Expr::Unary(op, inner) => {
            let v = eval_expr(inner, env)?;
            Ok(match op {
                UnaryOp::Neg => Value::Num(-num(e, v)?),
                UnaryOp::Not => Value::Bool(!boolean(e, v)?),
            })
        }
        Expr::Binary(op, l, r) => {
            let lv = eval_expr(l, env)?;
            match op {
                BinOp::And => {
                    if !boolean(e, lv)? {
                        return Ok(Value::Bool(false));
                    }
                    return Ok(Value::Bool(boolean(e, eval_expr(r, env)?)?));
                }
                BinOp::Or => {
                    if boolean(e, lv)? {
                        return Ok(Value::Bool(true));
                    }
                    return Ok(Value::Bool(boolean(e, eval_expr(r, env)?)?));
                }
                _ => {}
            }
            let rv = eval_expr(r, env)?;
            match op {
                BinOp::Eq | BinOp::Ne => {
                    if lv.value_type() != rv.value_type() {
                        return Err(mismatch(e, "operands of different types".into()));
                    }
                    Ok(Value::Bool((lv == rv) == (*op == BinOp::Eq)))
                }
                _ => {
                    let (a, b) = (num(e, lv)?, num(e, rv)?);
                    let x = match op {
                        BinOp::Add => a + b,
                        BinOp::Sub => a - b,
                        BinOp::Mul => a * b,
                        BinOp::Div | BinOp::Rem if b == 0.0 => return Err(EvalError::DivisionByZero(e.to_string())),
                        BinOp::Div => a / b,
                        BinOp::Rem => a % b,
                        BinOp::Lt => return Ok(Value::Bool(a < b)),
                        BinOp::Le => return Ok(Value::Bool(a <= b)),
                        BinOp::Gt => return Ok(Value::Bool(a > b)),
                        BinOp::Ge => return Ok(Value::Bool(a >= b)),
                        BinOp::And | BinOp::Or | BinOp::Eq | BinOp::Ne => unreachable!(),
                    };
                    // keeps traces finite so they survive JSON and compare reflexively
                    if !x.is_finite() {
                        return Err(EvalError::Overflow(e.to_string()));
                    }
                    Ok(Value::Num(x))
                }
            }
        }
    }
}

/// Runs assignments left to right; each sees the effects of the earlier ones.
/// On error the environment keeps the assignments made before the failing one.
pub fn exec_stmts(stmts: &[Stmt], env: &mut Env) -> Result<(), EvalError> {
    for s in stmts {
        env.note_reads(&s.value);
        let v = eval_expr(&s.value, env)?;
        env.values.insert(s.target.clone(), v);
        if !env.writes.contains(&s.target) {
            env.writes.insert(s.target.clone());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, parse_stmts};

    fn eval(src: &str, env: &Env) -> Result<Value, EvalError> {
        eval_expr(&parse_expr(src).unwrap(), env)
    }

    #[test]
    fn door_sensor_true_when_open() {
        let env = Env::new().with("DOOR_SENSOR", Value::Num(1.0));
        assert_eq!(eval("DOOR_SENSOR == 1", &env), Ok(Value::Bool(true)));
    }

    #[test]
    fn modulo_and_not() {
        assert_eq!(eval("(3 % 2) == 1 && !false", &Env::new()), Ok(Value::Bool(true)));
        assert_eq!(eval("-7 % 3", &Env::new()), Ok(Value::Num(-1.0)));
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let env = Env::new().with("x", Value::Num(0.0));
        assert!(matches!(eval("1 / x", &env), Err(EvalError::DivisionByZero(_))));
        assert!(matches!(eval("1 % 0", &env), Err(EvalError::DivisionByZero(_))));
        // short-circuit skips the faulty operand
        assert_eq!(eval("false && 1 / x > 0", &env), Ok(Value::Bool(false)));
    }

    #[test]
    fn overflow_is_an_error() {
        let env = Env::new().with("x", Value::Num(1e300));
        assert!(matches!(eval("x * x", &env), Err(EvalError::Overflow(_))));
        assert!(matches!(eval("-x - x * 1e10", &env), Err(EvalError::Overflow(_))));
        assert!(eval("x * x > 0 || true", &env).is_err());
    }

    #[test]
    fn assignments_are_sequential() {
        let mut env = Env::new().with("a", Value::Num(0.0)).with("b", Value::Num(0.0));
        exec_stmts(&parse_stmts("a = 2; b = a * 3").unwrap(), &mut env).unwrap();
        assert_eq!(env.get("b"), Some(Value::Num(6.0)));
        assert!(env.writes().contains("a") && env.writes().contains("b"));
        assert!(env.reads().contains("a"));
    }

    #[test]
    fn light_turns_on() {
        let mut env = Env::new().with("LIGHT", Value::Num(0.0));
        exec_stmts(&parse_stmts("LIGHT = 1").unwrap(), &mut env).unwrap();
        assert_eq!(env.get("LIGHT"), Some(Value::Num(1.0)));
    }

    #[test]
    fn empty_statement_list() {
        let mut env = Env::new().with("x", Value::Num(4.0));
        let before = env.clone();
        exec_stmts(&[], &mut env).unwrap();
        assert_eq!(env, before);
    }
}
