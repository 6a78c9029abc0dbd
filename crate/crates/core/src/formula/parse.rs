use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::{BinaryOp, CellRef, Expr, FormulaAst, UnaryOp};
use crate::address::{parse_column, CellAddress};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub struct SyntaxError {
    /// Byte offset into the formula text after prefix stripping.
    pub position: usize,
    pub expected: Vec<String>,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at {}: expected {}",
            self.position,
            self.expected.join(" or ")
        )
    }
}

fn err<T>(position: usize, expected: &[&str]) -> Result<T, SyntaxError> {
    Err(SyntaxError {
        position,
        expected: expected.iter().map(|s| (*s).to_owned()).collect(),
    })
}

const ERROR_LITERALS: &[&str] = &[
    "#NULL!", "#DIV/0!", "#VALUE!", "#REF!", "#NAME?", "#NUM!", "#N/A",
];

/// Drops a stored namespace prefix (`of:`, `oooc:`, ...) and the legacy
/// `=>=` form, leaving text that starts with `=` for well-formed input.
pub fn strip_stored_prefix(raw: &str) -> &str {
    let mut s = raw.trim_start();
    if let Some(colon) = s.find(':') {
        let prefix = &s[..colon];
        if !prefix.is_empty()
            && prefix.bytes().all(|b| b.is_ascii_alphabetic())
            && s[colon + 1..].starts_with('=')
        {
            s = &s[colon + 1..];
        }
    }
    if s.starts_with("=>=") {
        s = &s[2..];
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Text(String),
    Ref(CellRef),
    RangeRef(CellRef, CellRef),
    Word(String),
    ErrorLit(String),
    LParen,
    RParen,
    Sep,
    Colon,
    Op(&'static str),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || b == b'$'
}

/// `$A$1`, `b7`: returns the reference without a sheet.
fn parse_plain_ref(text: &str) -> Option<CellRef> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let col_absolute = bytes.first() == Some(&b'$');
    if col_absolute {
        i += 1;
    }
    let letters_start = i;
    while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
        i += 1;
    }
    let column = parse_column(&text[letters_start..i])?;
    let row_absolute = bytes.get(i) == Some(&b'$');
    if row_absolute {
        i += 1;
    }
    let digits = &text[i..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let row: u32 = digits.parse().ok()?;
    Some(CellRef {
        sheet: None,
        column,
        row: row.checked_sub(1)?,
        col_absolute,
        row_absolute,
    })
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_byte(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(usize, Tok), SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        let Some(b) = self.peek_byte() else {
            return Ok((start, Tok::End));
        };
        let rest = &self.src[start..];
        let tok = match b {
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b';' | b',' => {
                self.pos += 1;
                Tok::Sep
            }
            b':' => {
                self.pos += 1;
                Tok::Colon
            }
            b'"' => Tok::Text(self.string_literal()?),
            b'[' => self.bracket_ref()?,
            b'\'' => {
                let sheet = self.quoted_sheet()?;
                Tok::Ref(self.sheet_ref(sheet)?)
            }
            b'#' => match ERROR_LITERALS.iter().find(|e| rest.starts_with(**e)) {
                Some(e) => {
                    self.pos += e.len();
                    Tok::ErrorLit((*e).to_owned())
                }
                None => return err(start, &["error literal"]),
            },
            b'0'..=b'9' => Tok::Number(self.number()?),
            b'.' if rest.as_bytes().get(1).is_some_and(u8::is_ascii_digit) => {
                Tok::Number(self.number()?)
            }
            b'<' | b'>' | b'=' | b'+' | b'-' | b'*' | b'/' | b'^' | b'&' | b'%' => {
                let op = ["<=", ">=", "<>"]
                    .into_iter()
                    .find(|op| rest.starts_with(op))
                    .unwrap_or(match b {
                        b'<' => "<",
                        b'>' => ">",
                        b'=' => "=",
                        b'+' => "+",
                        b'-' => "-",
                        b'*' => "*",
                        b'/' => "/",
                        b'^' => "^",
                        b'&' => "&",
                        _ => "%",
                    });
                self.pos += op.len();
                Tok::Op(op)
            }
            b if b.is_ascii_alphabetic() || b == b'_' || b == b'$' => self.word()?,
            _ => return err(start, &["expression"]),
        };
        Ok((start, tok))
    }

    fn string_literal(&mut self) -> Result<String, SyntaxError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(q) = rest.find('"') else {
                return err(start, &["closing quote"]);
            };
            out.push_str(&rest[..q]);
            self.pos += q + 1;
            if self.peek_byte() == Some(b'"') {
                out.push('"');
                self.pos += 1;
            } else {
                return Ok(out);
            }
        }
    }

    fn quoted_sheet(&mut self) -> Result<String, SyntaxError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(q) = rest.find('\'') else {
                return err(start, &["closing quote"]);
            };
            out.push_str(&rest[..q]);
            self.pos += q + 1;
            if self.peek_byte() == Some(b'\'') {
                out.push('\'');
                self.pos += 1;
            } else {
                return Ok(out);
            }
        }
    }

    /// After a sheet name: `.A1`.
    fn sheet_ref(&mut self, sheet: String) -> Result<CellRef, SyntaxError> {
        if self.peek_byte() != Some(b'.') {
            return err(self.pos, &["."]);
        }
        self.pos += 1;
        let start = self.pos;
        while self.peek_byte().is_some_and(is_word_byte) && self.peek_byte() != Some(b'.') {
            self.pos += 1;
        }
        match parse_plain_ref(&self.src[start..self.pos]) {
            Some(mut r) => {
                r.sheet = Some(sheet);
                Ok(r)
            }
            None => err(start, &["cell reference"]),
        }
    }

    fn number(&mut self) -> Result<f64, SyntaxError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.peek_byte() == Some(b'.') {
            self.pos += 1;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.peek_byte(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek_byte(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        self.src[start..self.pos]
            .parse()
            .or_else(|_| err(start, &["number"]))
    }

    fn word(&mut self) -> Result<Tok, SyntaxError> {
        let start = self.pos;
        while self.peek_byte().is_some_and(is_word_byte) {
            self.pos += 1;
        }
        let text = &self.src[start..self.pos];
        // A quoted sheet may follow `$` in absolute-sheet form.
        if text == "$" && self.peek_byte() == Some(b'\'') {
            let sheet = self.quoted_sheet()?;
            return Ok(Tok::Ref(self.sheet_ref(sheet)?));
        }
        let save = self.pos;
        self.skip_ws();
        let is_call = self.peek_byte() == Some(b'(');
        self.pos = save;
        if is_call {
            if text.contains('$') {
                return err(start, &["function name"]);
            }
            return Ok(Tok::Word(text.to_owned()));
        }
        if let Some(r) = parse_plain_ref(text) {
            return Ok(Tok::Ref(r));
        }
        if let Some(dot) = text.rfind('.') {
            let sheet = text[..dot].trim_start_matches('$');
            if let Some(mut r) = parse_plain_ref(&text[dot + 1..]) {
                if sheet.is_empty() {
                    return Ok(Tok::Ref(r));
                }
                r.sheet = Some(sheet.to_owned());
                return Ok(Tok::Ref(r));
            }
        }
        if text.contains('$') {
            return err(start, &["cell reference"]);
        }
        Ok(Tok::Word(text.to_owned()))
    }

    /// ODF bracket syntax: `[.A1]`, `[Sheet1.A1:.B2]`, `[$'My sheet'.A1]`.
    fn bracket_ref(&mut self) -> Result<Tok, SyntaxError> {
        let open = self.pos;
        self.pos += 1;
        let first = self.bracket_part()?;
        let tok = if self.peek_byte() == Some(b':') {
            self.pos += 1;
            let second = self.bracket_part()?;
            Tok::RangeRef(first, second)
        } else {
            Tok::Ref(first)
        };
        if self.peek_byte() != Some(b']') {
            return err(open, &["]"]);
        }
        self.pos += 1;
        Ok(tok)
    }

    fn bracket_part(&mut self) -> Result<CellRef, SyntaxError> {
        if self.peek_byte() == Some(b'$') {
            self.pos += 1;
        }
        let sheet = match self.peek_byte() {
            Some(b'.') => None,
            Some(b'\'') => Some(self.quoted_sheet()?),
            _ => {
                let start = self.pos;
                while self
                    .peek_byte()
                    .is_some_and(|b| b != b'.' && b != b']' && b != b':')
                {
                    self.pos += 1;
                }
                Some(self.src[start..self.pos].to_owned())
            }
        };
        if self.peek_byte() != Some(b'.') {
            return err(self.pos, &["."]);
        }
        self.pos += 1;
        let start = self.pos;
        while self
            .peek_byte()
            .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'$')
        {
            self.pos += 1;
        }
        let mut r = parse_plain_ref(&self.src[start..self.pos])
            .map_or_else(|| err(start, &["cell reference"]), Ok)?;
        r.sheet = sheet;
        Ok(r)
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, offset: usize) -> Result<Self, SyntaxError> {
        let mut lexer = Lexer { src, pos: offset };
        let (tok_pos, tok) = lexer.next()?;
        Ok(Parser {
            lexer,
            tok,
            tok_pos,
        })
    }

    fn bump(&mut self) -> Result<Tok, SyntaxError> {
        let (pos, next) = self.lexer.next()?;
        self.tok_pos = pos;
        Ok(std::mem::replace(&mut self.tok, next))
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.tok, Tok::Op(o) if o == op)
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.concat()?;
        loop {
            let op = match self.tok {
                Tok::Op("=") => BinaryOp::Eq,
                Tok::Op("<>") => BinaryOp::Ne,
                Tok::Op("<") => BinaryOp::Lt,
                Tok::Op("<=") => BinaryOp::Le,
                Tok::Op(">") => BinaryOp::Gt,
                Tok::Op(">=") => BinaryOp::Ge,
                _ => return Ok(left),
            };
            self.bump()?;
            let right = self.concat()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
    }

    fn concat(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.additive()?;
        while self.is_op("&") {
            self.bump()?;
            let right = self.additive()?;
            left = Expr::Binary(BinaryOp::Concat, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.tok {
                Tok::Op("+") => BinaryOp::Add,
                Tok::Op("-") => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.bump()?;
            let right = self.multiplicative()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.power()?;
        loop {
            let op = match self.tok {
                Tok::Op("*") => BinaryOp::Mul,
                Tok::Op("/") => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.bump()?;
            let right = self.power()?;
            left = Expr::Binary(op, Box::new(left), Box::new(right));
        }
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.unary()?;
        if self.is_op("^") {
            self.bump()?;
            let exponent = self.power()?;
            return Ok(Expr::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let op = match self.tok {
            Tok::Op("-") => UnaryOp::Neg,
            Tok::Op("+") => UnaryOp::Plus,
            _ => return self.postfix(),
        };
        self.bump()?;
        Ok(Expr::Unary(op, Box::new(self.unary()?)))
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let atom = self.atom()?;
        if self.is_op("%") {
            self.bump()?;
            return Ok(Expr::Percent(Box::new(atom)));
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.tok_pos;
        match self.bump()? {
            Tok::Number(n) => Ok(Expr::Number(n)),
            Tok::Text(s) => Ok(Expr::Text(s)),
            Tok::ErrorLit(e) => Ok(Expr::Error(e)),
            Tok::RangeRef(a, b) => range(a, b, pos),
            Tok::Ref(start) => {
                if self.tok != Tok::Colon {
                    return Ok(Expr::Cell(start));
                }
                self.bump()?;
                let end_pos = self.tok_pos;
                match self.bump()? {
                    Tok::Ref(end) => range(start, end, end_pos),
                    _ => err(end_pos, &["cell reference"]),
                }
            }
            Tok::Word(w) => {
                if self.tok == Tok::LParen {
                    self.bump()?;
                    return self.call(w.to_ascii_uppercase());
                }
                if w.eq_ignore_ascii_case("TRUE") {
                    Ok(Expr::Boolean(true))
                } else if w.eq_ignore_ascii_case("FALSE") {
                    Ok(Expr::Boolean(false))
                } else if w.contains('.') {
                    err(pos, &["name", "cell reference"])
                } else {
                    Ok(Expr::Name(w))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return err(self.tok_pos, &[")"]);
                }
                self.bump()?;
                Ok(inner)
            }
            _ => err(
                pos,
                &["number", "text", "reference", "name", "function", "("],
            ),
        }
    }

    fn call(&mut self, name: String) -> Result<Expr, SyntaxError> {
        let mut args = Vec::new();
        if self.tok == Tok::RParen {
            self.bump()?;
            return Ok(Expr::Call(name, args));
        }
        loop {
            args.push(self.expr()?);
            match self.tok {
                Tok::Sep => {
                    self.bump()?;
                }
                Tok::RParen => {
                    self.bump()?;
                    return Ok(Expr::Call(name, args));
                }
                _ => return err(self.tok_pos, &[";", ",", ")"]),
            }
        }
    }
}

fn range(start: CellRef, mut end: CellRef, pos: usize) -> Result<Expr, SyntaxError> {
    if let Some(end_sheet) = &end.sheet {
        if start.sheet.as_ref() != Some(end_sheet) {
            // Multi-sheet ranges are not supported.
            return err(pos, &["range on a single sheet"]);
        }
    }
    if start.sheet.is_none() {
        end.sheet = None;
    }
    Ok(Expr::Range(start, end))
}

/// Parses formula text held by `host`. Stored prefixes (`of:=`, `=>=`) are
/// stripped first; positions in errors refer to the stripped text.
pub fn parse_formula(source: &str, host: &CellAddress) -> Result<FormulaAst, SyntaxError> {
    let src = strip_stored_prefix(source);
    if !src.starts_with('=') {
        return err(0, &["="]);
    }
    let mut parser = Parser::new(src, 1)?;
    let root = parser.expr()?;
    if parser.tok != Tok::End {
        return err(parser.tok_pos, &["operator", "end of formula"]);
    }
    Ok(FormulaAst {
        root,
        host: host.clone(),
    })
}
