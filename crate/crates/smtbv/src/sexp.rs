//! Minimal s-expression reader for the SMT-LIB2 subset this solver accepts.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s) => Some(s),
            Sexp::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::Atom(_) => None,
            Sexp::List(items) => Some(items),
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s) => write!(f, "{s}"),
            Sexp::List(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error: {}", self.0)
    }
}

impl std::error::Error for ParseError {}

/// Parses every complete s-expression in `input`. Comments (`;` to end of
/// line) and whitespace are skipped. Quoted symbols `|...|` and string
/// literals `"..."` are kept as single atoms.
pub fn parse_all(input: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut parser = Parser {
        chars: input.chars().collect(),
        pos: 0,
    };
    let mut out = Vec::new();
    loop {
        parser.skip_trivia();
        if parser.at_end() {
            return Ok(out);
        }
        out.push(parser.sexp()?);
    }
}

pub fn parse_one(input: &str) -> Result<Sexp, ParseError> {
    let all = parse_all(input)?;
    match all.len() {
        1 => Ok(all.into_iter().next().unwrap()),
        n => Err(ParseError(format!("expected one s-expression, found {n}"))),
    }
}

/// Returns how many unclosed parentheses remain after `input`, ignoring
/// comments and quoted atoms. Used by the REPL driver to detect when a
/// command spans multiple lines. Returns `None` when the input can never
/// balance (too many closing parens).
pub fn paren_balance(input: &str) -> Option<i64> {
    let mut depth: i64 = 0;
    let mut chars = input.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                for c2 in chars.by_ref() {
                    if c2 == '\n' {
                        break;
                    }
                }
            }
            '"' => {
                for c2 in chars.by_ref() {
                    if c2 == '"' {
                        break;
                    }
                }
            }
            '|' => {
                for c2 in chars.by_ref() {
                    if c2 == '|' {
                        break;
                    }
                }
            }
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    Some(depth)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += 1;
            } else if c == ';' {
                while let Some(c2) = self.peek() {
                    self.pos += 1;
                    if c2 == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn sexp(&mut self) -> Result<Sexp, ParseError> {
        self.skip_trivia();
        match self.peek() {
            None => Err(ParseError("unexpected end of input".into())),
            Some('(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(ParseError("unclosed '('".into())),
                        Some(')') => {
                            self.pos += 1;
                            return Ok(Sexp::List(items));
                        }
                        Some(_) => items.push(self.sexp()?),
                    }
                }
            }
            Some(')') => Err(ParseError("unexpected ')'".into())),
            Some('"') => self.delimited_atom('"'),
            Some('|') => self.delimited_atom('|'),
            Some(_) => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    self.pos += 1;
                }
                Ok(Sexp::Atom(self.chars[start..self.pos].iter().collect()))
            }
        }
    }

    fn delimited_atom(&mut self, delim: char) -> Result<Sexp, ParseError> {
        let start = self.pos;
        self.pos += 1;
        while let Some(c) = self.peek() {
            self.pos += 1;
            if c == delim {
                return Ok(Sexp::Atom(self.chars[start..self.pos].iter().collect()));
            }
        }
        Err(ParseError(format!("unclosed {delim}")))
    }
}
