//! Minimal SMT-LIB2 s-expression reader for solver output and script checks.

use crate::rational::{self, Rational};
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    /// Symbol, keyword or numeral, with `|...|` quoting removed.
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SexpError {
    #[error("unbalanced parenthesis at byte {0}")]
    Unbalanced(usize),
    #[error("unterminated {0} starting at byte {1}")]
    Unterminated(&'static str, usize),
}

pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<(usize, Vec<Sexp>)> = vec![(0, Vec::new())];
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                stack.push((i, Vec::new()));
                i += 1;
            }
            b')' => {
                let (_, items) = stack.pop().ok_or(SexpError::Unbalanced(i))?;
                stack
                    .last_mut()
                    .ok_or(SexpError::Unbalanced(i))?
                    .1
                    .push(Sexp::List(items));
                i += 1;
            }
            b'|' => {
                let end = text[i + 1..]
                    .find('|')
                    .ok_or(SexpError::Unterminated("quoted symbol", i))?;
                stack
                    .last_mut()
                    .expect("root")
                    .1
                    .push(Sexp::Atom(text[i + 1..i + 1 + end].to_string()));
                i += end + 2;
            }
            b'"' => {
                let start = i;
                let mut s = String::new();
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(SexpError::Unterminated("string", start)),
                        Some(b'"') if bytes.get(i + 1) == Some(&b'"') => {
                            s.push('"');
                            i += 2;
                        }
                        Some(b'"') => {
                            i += 1;
                            break;
                        }
                        Some(_) => {
                            let ch = text[i..].chars().next().expect("in bounds");
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                stack.last_mut().expect("root").1.push(Sexp::Str(s));
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && !matches!(bytes[i], b'(' | b')' | b'|' | b'"' | b';')
                {
                    i += 1;
                }
                stack
                    .last_mut()
                    .expect("root")
                    .1
                    .push(Sexp::Atom(text[start..i].to_string()));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SexpError::Unbalanced(stack.last().map_or(0, |s| s.0)));
    }
    Ok(stack.pop().expect("root").1)
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(xs) => Some(xs),
            _ => None,
        }
    }

    /// Reads a real value: numerals, decimals (a trailing `?` marks a
    /// truncated expansion), `(- v)` and `(/ a b)`.
    pub fn real(&self) -> Option<Rational> {
        match self {
            Sexp::Atom(a) => rational::parse(a.trim_end_matches('?')).ok(),
            Sexp::Str(_) => None,
            Sexp::List(xs) => match xs.as_slice() {
                [op, v] if op.atom() == Some("-") => v.real().map(|q| -q),
                [op, a, b] if op.atom() == Some("/") => {
                    let (a, b) = (a.real()?, b.real()?);
                    (!b.is_zero()).then(|| a / b)
                }
                _ => None,
            },
        }
    }

    pub fn boolean(&self) -> Option<bool> {
        match self.atom()? {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        }
    }
}
