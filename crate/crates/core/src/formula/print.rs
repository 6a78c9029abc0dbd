use std::fmt::Write;

use super::{BinaryOp, CellRef, Expr, FormulaAst, UnaryOp, PREC_ATOM, PREC_POW, PREC_UNARY};
use crate::address::{column_name, CellAddress};
use crate::value::format_number;

/// Deterministic A1 rendering with a leading `=`.
pub fn print_canonical(ast: &FormulaAst) -> String {
    format!("={}", print_expr(&ast.root))
}

/// Renders an expression without the leading `=`.
pub fn print_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr, &|out, r| write_a1(out, r));
    out
}

/// R1C1-style rendering relative to `host`: relative axes become signed
/// offsets (`R[-7]C[0]`), absolute axes fixed 1-based coordinates (`R1C1`).
/// Correct copy/fill images of one formula render identically.
pub fn relative_shape(ast: &FormulaAst, host: &CellAddress) -> String {
    let mut out = String::new();
    write_expr(&mut out, &ast.root, &|out, r| write_r1c1(out, r, host));
    out
}

type RefWriter<'a> = dyn Fn(&mut String, &CellRef) + 'a;

fn sheet_needs_quotes(sheet: &str) -> bool {
    let mut chars = sheet.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return true,
    }
    !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn write_sheet(out: &mut String, r: &CellRef) {
    if let Some(sheet) = &r.sheet {
        if sheet_needs_quotes(sheet) {
            out.push('\'');
            out.push_str(&sheet.replace('\'', "''"));
            out.push('\'');
        } else {
            out.push_str(sheet);
        }
        out.push('.');
    }
}

fn write_a1(out: &mut String, r: &CellRef) {
    write_sheet(out, r);
    if r.col_absolute {
        out.push('$');
    }
    out.push_str(&column_name(r.column));
    if r.row_absolute {
        out.push('$');
    }
    let _ = write!(out, "{}", r.row + 1);
}

fn write_r1c1(out: &mut String, r: &CellRef, host: &CellAddress) {
    write_sheet(out, r);
    if r.row_absolute {
        let _ = write!(out, "R{}", r.row + 1);
    } else {
        let _ = write!(out, "R[{}]", i64::from(r.row) - i64::from(host.row));
    }
    if r.col_absolute {
        let _ = write!(out, "C{}", r.column + 1);
    } else {
        let _ = write!(out, "C[{}]", i64::from(r.column) - i64::from(host.column));
    }
}

fn write_child(out: &mut String, e: &Expr, parens: bool, refs: &RefWriter<'_>) {
    if parens {
        out.push('(');
    }
    write_expr(out, e, refs);
    if parens {
        out.push(')');
    }
}

fn write_expr(out: &mut String, expr: &Expr, refs: &RefWriter<'_>) {
    match expr {
        Expr::Number(n) => out.push_str(&format_number(*n)),
        Expr::Text(s) => {
            out.push('"');
            out.push_str(&s.replace('"', "\"\""));
            out.push('"');
        }
        Expr::Boolean(b) => out.push_str(if *b { "TRUE" } else { "FALSE" }),
        Expr::Error(e) => out.push_str(e),
        Expr::Cell(r) => refs(out, r),
        Expr::Range(a, b) => {
            refs(out, a);
            out.push(':');
            refs(out, b);
        }
        Expr::Name(n) => out.push_str(n),
        Expr::Unary(op, operand) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Plus => '+',
            });
            write_child(out, operand, operand.precedence() < PREC_UNARY, refs);
        }
        Expr::Percent(operand) => {
            write_child(out, operand, operand.precedence() < PREC_ATOM, refs);
            out.push('%');
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            let (left_parens, right_parens) = if *op == BinaryOp::Pow {
                // The base of `^` is a unary operand; the exponent may be another power.
                (l.precedence() < PREC_UNARY, r.precedence() < PREC_POW)
            } else {
                (l.precedence() < p, r.precedence() <= p)
            };
            write_child(out, l, left_parens, refs);
            out.push_str(op.symbol());
            write_child(out, r, right_parens, refs);
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_expr(out, a, refs);
            }
            out.push(')');
        }
    }
}
