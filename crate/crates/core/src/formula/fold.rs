use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use super::{BinaryOp, Expr, FormulaAst, UnaryOp};
use crate::value::{format_number, StaticValue};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum FoldError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("operand has the wrong type")]
    WrongType,
    #[error("numeric result is not representable")]
    BadNumber,
    #[error("error literal {0}")]
    ErrorLiteral(String),
    #[error("formula calls a function and is reported unfolded")]
    NotFoldable,
    #[error("formula has references")]
    NotConstant,
}

impl FoldError {
    /// The spreadsheet error token the fold produces, if any.
    pub fn token(&self) -> Option<&str> {
        match self {
            FoldError::DivisionByZero => Some("#DIV/0!"),
            FoldError::WrongType => Some("#VALUE!"),
            FoldError::BadNumber => Some("#NUM!"),
            FoldError::ErrorLiteral(t) => Some(t),
            FoldError::NotFoldable | FoldError::NotConstant => None,
        }
    }
}

/// Integers stay exact until an operation leaves them.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Num {
    Int(i128),
    Float(f64),
}

impl Num {
    fn to_f64(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Float(f) => f,
        }
    }

    fn from_f64(f: f64) -> Result<Num, FoldError> {
        if !f.is_finite() {
            return Err(FoldError::BadNumber);
        }
        Ok(Num::Float(f))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Val {
    Num(Num),
    Text(String),
    Bool(bool),
}

impl Val {
    fn number(&self) -> Result<Num, FoldError> {
        match self {
            Val::Num(n) => Ok(*n),
            Val::Bool(b) => Ok(Num::Int(i128::from(*b))),
            Val::Text(t) => t
                .trim()
                .parse::<f64>()
                .map_err(|_| FoldError::WrongType)
                .and_then(Num::from_f64),
        }
    }

    fn text(&self) -> String {
        match self {
            Val::Num(n) => format_number(n.to_f64()),
            Val::Text(t) => t.clone(),
            Val::Bool(b) => if *b { "TRUE" } else { "FALSE" }.into(),
        }
    }
}

fn arith(op: BinaryOp, a: Num, b: Num) -> Result<Num, FoldError> {
    if let (Num::Int(x), Num::Int(y)) = (a, b) {
        let exact = match op {
            BinaryOp::Add => x.checked_add(y),
            BinaryOp::Sub => x.checked_sub(y),
            BinaryOp::Mul => x.checked_mul(y),
            BinaryOp::Div => {
                if y == 0 {
                    return Err(FoldError::DivisionByZero);
                }
                (x % y == 0).then(|| x / y)
            }
            BinaryOp::Pow => {
                if x == 0 && y < 0 {
                    return Err(FoldError::DivisionByZero);
                }
                u32::try_from(y).ok().and_then(|e| x.checked_pow(e))
            }
            _ => None,
        };
        if let Some(v) = exact {
            return Ok(Num::Int(v));
        }
    }
    let (x, y) = (a.to_f64(), b.to_f64());
    let v = match op {
        BinaryOp::Add => x + y,
        BinaryOp::Sub => x - y,
        BinaryOp::Mul => x * y,
        BinaryOp::Div => {
            if y == 0.0 {
                return Err(FoldError::DivisionByZero);
            }
            x / y
        }
        BinaryOp::Pow => {
            if x == 0.0 && y < 0.0 {
                return Err(FoldError::DivisionByZero);
            }
            x.powf(y)
        }
        _ => unreachable!("not arithmetic"),
    };
    Num::from_f64(v)
}

// Mixed-type comparison order: numbers < text < booleans.
fn compare(a: &Val, b: &Val) -> Ordering {
    fn rank(v: &Val) -> u8 {
        match v {
            Val::Num(_) => 0,
            Val::Text(_) => 1,
            Val::Bool(_) => 2,
        }
    }
    match (a, b) {
        (Val::Num(x), Val::Num(y)) => match (x, y) {
            (Num::Int(x), Num::Int(y)) => x.cmp(y),
            _ => x.to_f64().total_cmp(&y.to_f64()),
        },
        (Val::Text(x), Val::Text(y)) => x.to_lowercase().cmp(&y.to_lowercase()),
        (Val::Bool(x), Val::Bool(y)) => x.cmp(y),
        _ => rank(a).cmp(&rank(b)),
    }
}

fn eval(e: &Expr) -> Result<Val, FoldError> {
    Ok(match e {
        Expr::Number(n) => Val::Num(if n.fract() == 0.0 && n.abs() < 1e30 {
            Num::Int(*n as i128)
        } else {
            Num::Float(*n)
        }),
        Expr::Text(s) => Val::Text(s.clone()),
        Expr::Boolean(b) => Val::Bool(*b),
        Expr::Error(t) => return Err(FoldError::ErrorLiteral(t.clone())),
        Expr::Cell(_) | Expr::Range(..) | Expr::Name(_) => return Err(FoldError::NotConstant),
        Expr::Call(..) => return Err(FoldError::NotFoldable),
        Expr::Unary(op, inner) => {
            let n = eval(inner)?.number()?;
            match op {
                UnaryOp::Plus => Val::Num(n),
                UnaryOp::Neg => Val::Num(arith(BinaryOp::Sub, Num::Int(0), n)?),
            }
        }
        Expr::Percent(inner) => {
            Val::Num(arith(BinaryOp::Div, eval(inner)?.number()?, Num::Int(100))?)
        }
        Expr::Binary(op, l, r) => {
            let (a, b) = (eval(l)?, eval(r)?);
            match op {
                BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Pow => {
                    Val::Num(arith(*op, a.number()?, b.number()?)?)
                }
                BinaryOp::Concat => Val::Text(a.text() + &b.text()),
                BinaryOp::Eq => Val::Bool(compare(&a, &b) == Ordering::Equal),
                BinaryOp::Ne => Val::Bool(compare(&a, &b) != Ordering::Equal),
                BinaryOp::Lt => Val::Bool(compare(&a, &b) == Ordering::Less),
                BinaryOp::Le => Val::Bool(compare(&a, &b) != Ordering::Greater),
                BinaryOp::Gt => Val::Bool(compare(&a, &b) == Ordering::Greater),
                BinaryOp::Ge => Val::Bool(compare(&a, &b) != Ordering::Less),
            }
        }
    })
}

/// Evaluates a formula built only from literals and operators.
pub fn fold_constant(ast: &FormulaAst) -> Result<StaticValue, FoldError> {
    if ast.root.has_reference() {
        return Err(FoldError::NotConstant);
    }
    if ast.root.has_call() {
        return Err(FoldError::NotFoldable);
    }
    Ok(match eval(&ast.root)? {
        Val::Num(n) => StaticValue::float(n.to_f64()),
        Val::Text(t) => StaticValue::string(t),
        Val::Bool(b) => StaticValue::boolean(b),
    })
}
