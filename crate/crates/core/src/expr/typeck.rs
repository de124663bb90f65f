use super::{BinOp, Expr, Stmt, UnaryOp, Value, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("undefined variable `{0}`")]
    Undefined(String),
    #[error("{0}")]
    Type(String),
}

/// Infers the type of `e`. `lookup` resolves declared variables.
pub fn check_expr(e: &Expr, lookup: &impl Fn(&str) -> Option<ValueType>) -> Result<ValueType, CheckError> {
    match e {
        Expr::Lit(v) => Ok(v.value_type()),
        Expr::Var(name) => lookup(name).ok_or_else(|| CheckError::Undefined(name.clone())),
        Expr::Unary(op, inner) => {
            let t = check_expr(inner, lookup)?;
            let want = match op {
                UnaryOp::Neg => ValueType::Number,
                UnaryOp::Not => ValueType::Boolean,
            };
            if t != want {
                return Err(CheckError::Type(format!("operator `{}` expects {want}, found {t} in `{e}`", op.symbol())));
            }
            Ok(want)
        }
        Expr::Binary(op, l, r) => {
            let lt = check_expr(l, lookup)?;
            let rt = check_expr(r, lookup)?;
            let mismatch = |want: &str| {
                CheckError::Type(format!("operator `{}` expects {want}, found {lt} and {rt} in `{e}`", op.symbol()))
            };
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                    if lt == ValueType::Number && rt == ValueType::Number {
                        Ok(ValueType::Number)
                    } else {
                        Err(mismatch("numbers"))
                    }
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    if lt == ValueType::Number && rt == ValueType::Number {
                        Ok(ValueType::Boolean)
                    } else {
                        Err(mismatch("numbers"))
                    }
                }
                BinOp::Eq | BinOp::Ne => {
                    if lt == rt {
                        Ok(ValueType::Boolean)
                    } else {
                        Err(mismatch("operands of the same type"))
                    }
                }
                BinOp::And | BinOp::Or => {
                    if lt == ValueType::Boolean && rt == ValueType::Boolean {
                        Ok(ValueType::Boolean)
                    } else {
                        Err(mismatch("booleans"))
                    }
                }
            }
        }
    }
}

/// Checks an assignment. `writable` says whether the target may be assigned
/// (inputs may not).
pub fn check_stmt(
    s: &Stmt,
    lookup: &impl Fn(&str) -> Option<ValueType>,
    writable: &impl Fn(&str) -> bool,
) -> Result<(), CheckError> {
    let target = lookup(&s.target).ok_or_else(|| CheckError::Undefined(s.target.clone()))?;
    let rhs = check_expr(&s.value, lookup)?;
    if !writable(&s.target) {
        return Err(CheckError::Type(format!("cannot assign to input variable `{}`", s.target)));
    }
    if rhs != target {
        return Err(CheckError::Type(format!("cannot assign {rhs} value to {target} variable `{}`", s.target)));
    }
    Ok(())
}

impl Value {
    pub(crate) fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Num(_) => "number",
        }
    }
}
