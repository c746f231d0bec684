//! Tokenizer and token cursor shared by the CRL and `.pqk` parsers.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Byte range in a source text.
///
/// Spans are bookkeeping only: every span compares equal to every other, so
/// deriving equality on an AST compares structure alone.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    /// 1-based line and column of the span start.
    pub fn line_col(&self, src: &str) -> (usize, usize) {
        let upto = &src[..self.start.min(src.len())];
        let line = upto.matches('\n').count() + 1;
        let col = upto.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, col)
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Span {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {pos}: {message}")]
pub struct SyntaxError {
    pub pos: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(pos: usize, message: impl Into<String>) -> Self {
        SyntaxError { pos, message: message.into() }
    }

    /// Renders the error with a line and column computed from `src`.
    pub fn render(&self, src: &str) -> String {
        let (l, c) = Span::new(self.pos, self.pos).line_col(src);
        format!("syntax error at {}:{}: {}", l, c, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(u64),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{}`", s),
            Tok::Num(n) => write!(f, "`{}`", n),
            Tok::Sym(s) => write!(f, "`{}`", s),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const SYMBOLS: &[&str] =
    &["-o", "->", "=>", "(", ")", "{", "}", "[", "]", "<", ">", ",", ";", ":", "=", "?", "|", "*", "!", "@"];

fn ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '%' || c == '#' || c == '$'
}

fn ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

pub fn tokenize(src: &str) -> Result<Vec<(Tok, Span)>, SyntaxError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if src[i..].starts_with("//") {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        if ident_start(c) {
            let mut end = i + c.len_utf8();
            chars.next();
            while let Some(&(j, d)) = chars.peek() {
                if ident_continue(d) {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(src[i..end].to_string()), Span::new(i, end)));
            continue;
        }
        if c.is_ascii_digit() {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_ascii_digit() {
                    end = j + 1;
                    chars.next();
                } else {
                    break;
                }
            }
            let n = src[i..end].parse().map_err(|_| SyntaxError::new(i, "number too large"))?;
            out.push((Tok::Num(n), Span::new(i, end)));
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                for _ in 0..s.len() {
                    chars.next();
                }
                out.push((Tok::Sym(s), Span::new(i, i + s.len())));
            }
            None => return Err(SyntaxError::new(i, format!("unexpected character `{}`", c))),
        }
    }
    out.push((Tok::Eof, Span::new(src.len(), src.len())));
    Ok(out)
}

/// Cursor over a token vector.
pub struct Cursor {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Cursor { toks: tokenize(src)?, pos: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    pub fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    pub fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].1.end
        }
    }

    pub fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.span().start, message)
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<Span, SyntaxError> {
        if self.is_sym(s) {
            Ok(self.bump().1)
        } else {
            Err(self.error(format!("expected `{}`, found {}", s, self.peek())))
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<Span, SyntaxError> {
        if self.is_kw(kw) {
            Ok(self.bump().1)
        } else {
            Err(self.error(format!("expected `{}`, found {}", kw, self.peek())))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, Span), SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.bump().1;
                Ok((s, sp))
            }
            t => Err(self.error(format!("expected identifier, found {}", t))),
        }
    }

    pub fn expect_bit(&mut self) -> Result<bool, SyntaxError> {
        match self.peek() {
            Tok::Num(0) => {
                self.bump();
                Ok(false)
            }
            Tok::Num(1) => {
                self.bump();
                Ok(true)
            }
            t => Err(self.error(format!("expected 0 or 1, found {}", t))),
        }
    }

    pub fn expect_eof(&self) -> Result<(), SyntaxError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            t => Err(self.error(format!("unexpected {} after end of input", t))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_comments() {
        let toks: Vec<Tok> = tokenize("a -o[_] %3 // note\n=> @q'").unwrap().into_iter().map(|t| t.0).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Ident("a".into()),
                Tok::Sym("-o"),
                Tok::Sym("["),
                Tok::Ident("_".into()),
                Tok::Sym("]"),
                Tok::Ident("%3".into()),
                Tok::Sym("=>"),
                Tok::Sym("@"),
                Tok::Ident("q'".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn line_col() {
        assert_eq!(Span::new(4, 5).line_col("ab\ncde"), (2, 2));
    }
}
