//! The `.snp` text format.
//!
//! ```text
//! system pi_add {
//!   neuron s1 {
//!     spikes = 7;
//!     a+ / a -> a; 2;
//!   }
//!   neuron s2 {
//!     spikes = 1;
//!     a -> a; 0;
//!   }
//!   neuron s3 {
//!     spikes = 0;
//!     a^4 -> a; 1;
//!   }
//!   syn {
//!     s1 -> s3;
//!     s3 -> s2;
//!   }
//!   out s2;
//! }
//! ```
//!
//! Rules are `E / a^r -> a; d;` (firing), `a^r -> a; d;` (firing on exactly
//! `r` spikes) or `a^s -> lambda;` (forgetting). Expressions use juxtaposition,
//! `|`, postfix `+` and parentheses. Whitespace is insignificant and `#`
//! starts a line comment. Numbers are decimal and unbounded.

use std::fmt::{self, Write as _};

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use crate::snp::{
    FiringRule, ForgettingRule, Neuron, PatternError, SnpSystem, SpikePattern, Violation,
};

/// 1-based position of a lexeme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: expected {expected}, found {found}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{span}: {source}")]
    Pattern {
        span: SourceSpan,
        source: PatternError,
    },
    #[error("invalid system: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(BigUint),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Eq,
    Slash,
    Arrow,
    Pipe,
    Plus,
    Caret,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Lexed {
    tok: Tok,
    span: SourceSpan,
}

fn lex(text: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    while let Some(&c) = chars.peek() {
        let start = SourceSpan {
            line,
            column: col,
            length: 1,
        };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '#' {
            while chars.peek().is_some_and(|c| *c != '\n') {
                chars.next();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars
                .peek()
                .filter(|c| c.is_ascii_alphanumeric() || **c == '_')
            {
                s.push(c);
                chars.next();
            }
            col += s.len();
            out.push(Lexed {
                span: SourceSpan {
                    length: s.len(),
                    ..start
                },
                tok: Tok::Ident(s),
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c) = chars.peek().filter(|c| c.is_ascii_digit()) {
                s.push(c);
                chars.next();
            }
            col += s.len();
            let n = BigUint::parse_bytes(s.as_bytes(), 10).expect("decimal digits");
            out.push(Lexed {
                span: SourceSpan {
                    length: s.len(),
                    ..start
                },
                tok: Tok::Nat(n),
            });
            continue;
        }
        chars.next();
        col += 1;
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' => Tok::Semi,
            '=' => Tok::Eq,
            '/' => Tok::Slash,
            '|' => Tok::Pipe,
            '+' => Tok::Plus,
            '^' => Tok::Caret,
            '-' if chars.peek() == Some(&'>') => {
                chars.next();
                col += 1;
                out.push(Lexed {
                    tok: Tok::Arrow,
                    span: SourceSpan { length: 2, ..start },
                });
                continue;
            }
            other => {
                return Err(ParseError {
                    span: start,
                    expected: "a token".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        out.push(Lexed { tok, span: start });
    }
    out.push(Lexed {
        tok: Tok::Eof,
        span: SourceSpan {
            line,
            column: col,
            length: 0,
        },
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

type PResult<T> = Result<T, DslError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> &Lexed {
        let i = self.pos;
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        &self.toks[i]
    }

    fn fail<T>(&self, expected: &str) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        }
        .into())
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(&tok.to_string())
        }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn keyword(&mut self, word: &str) -> PResult<()> {
        if self.is_word(word) {
            self.bump();
            Ok(())
        } else {
            self.fail(&format!("`{word}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail("an identifier"),
        }
    }

    fn nat(&mut self) -> PResult<BigUint> {
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.fail("a natural number"),
        }
    }

    fn system(&mut self) -> PResult<SnpSystem> {
        self.keyword("system")?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut sys = SnpSystem::new(name, String::new());
        if !self.is_word("neuron") {
            return self.fail("`neuron`");
        }
        while self.is_word("neuron") {
            sys.neurons.push(self.neuron()?);
        }
        self.keyword("syn")?;
        self.expect(Tok::LBrace)?;
        while *self.peek() != Tok::RBrace {
            let from = self
                .ident()
                .or_else(|_| self.fail("an identifier or `}`"))?;
            self.expect(Tok::Arrow)?;
            let to = self.ident()?;
            self.expect(Tok::Semi)?;
            sys.synapses.insert((from, to));
        }
        self.expect(Tok::RBrace)?;
        self.keyword("out")?;
        sys.output = self.ident()?;
        self.expect(Tok::Semi)?;
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Eof)?;
        Ok(sys)
    }

    fn neuron(&mut self) -> PResult<Neuron> {
        self.keyword("neuron")?;
        let id = self.ident()?;
        self.expect(Tok::LBrace)?;
        self.keyword("spikes")?;
        self.expect(Tok::Eq)?;
        let spikes = self.nat()?;
        self.expect(Tok::Semi)?;
        let mut neuron = Neuron::new(id, spikes);
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(neuron);
                }
                Tok::LParen => self.rule(&mut neuron)?,
                Tok::Ident(s) if s == "a" => self.rule(&mut neuron)?,
                _ => return self.fail("a rule or `}`"),
            }
        }
    }

    fn rule(&mut self, neuron: &mut Neuron) -> PResult<()> {
        let start = self.span();
        let pattern = self.regex()?;
        match self.peek() {
            Tok::Slash => {
                self.bump();
                let consume = self.atom()?;
                self.expect(Tok::Arrow)?;
                self.keyword("a")?;
                self.expect(Tok::Semi)?;
                let delay = self.nat()?;
                self.expect(Tok::Semi)?;
                let rule = FiringRule::new(pattern, consume, delay).map_err(|source| {
                    DslError::Pattern {
                        span: start,
                        source,
                    }
                })?;
                neuron.firing_rules.push(rule);
                Ok(())
            }
            Tok::Arrow => {
                let SpikePattern::Atom(count) = pattern else {
                    return self.fail("`/`");
                };
                self.bump();
                if self.is_word("a") {
                    self.bump();
                    self.expect(Tok::Semi)?;
                    let delay = self.nat()?;
                    self.expect(Tok::Semi)?;
                    neuron.firing_rules.push(FiringRule::exact(count, delay));
                    Ok(())
                } else if self.is_word("lambda") {
                    self.bump();
                    self.expect(Tok::Semi)?;
                    neuron.forgetting_rules.push(ForgettingRule::new(count));
                    Ok(())
                } else {
                    self.fail("`a` or `lambda`")
                }
            }
            _ => self.fail("`/` or `->`"),
        }
    }

    fn regex(&mut self) -> PResult<SpikePattern> {
        let mut alts = vec![self.term()?];
        while *self.peek() == Tok::Pipe {
            self.bump();
            alts.push(self.term()?);
        }
        Ok(if alts.len() == 1 {
            alts.pop().unwrap()
        } else {
            SpikePattern::Union(alts)
        })
    }

    fn starts_factor(&self) -> bool {
        *self.peek() == Tok::LParen || self.is_word("a")
    }

    fn term(&mut self) -> PResult<SpikePattern> {
        if !self.starts_factor() {
            return self.fail("`a` or `(`");
        }
        let mut parts = Vec::new();
        while self.starts_factor() {
            parts.push(self.factor()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            SpikePattern::Concat(parts)
        })
    }

    fn factor(&mut self) -> PResult<SpikePattern> {
        let primary = if *self.peek() == Tok::LParen {
            self.bump();
            let inner = self.regex()?;
            self.expect(Tok::RParen)?;
            inner
        } else {
            SpikePattern::Atom(self.atom()?)
        };
        if *self.peek() == Tok::Plus {
            self.bump();
            Ok(SpikePattern::plus(primary))
        } else {
            Ok(primary)
        }
    }

    /// `a` or `a^n` with `n ≥ 1`; returns the count.
    fn atom(&mut self) -> PResult<BigUint> {
        self.keyword("a")?;
        if *self.peek() != Tok::Caret {
            return Ok(BigUint::from(1u32));
        }
        self.bump();
        if matches!(self.peek(), Tok::Nat(n) if n.is_zero()) {
            return self.fail("a positive exponent");
        }
        self.nat()
    }
}

/// Parses and validates a system.
pub fn parse_system(text: &str) -> Result<SnpSystem, DslError> {
    let toks = lex(text)?;
    let sys = Parser { toks, pos: 0 }.system()?;
    sys.validate().map_err(DslError::Invalid)?;
    Ok(sys)
}

/// Canonical text for a valid system. `λ` inside firing patterns has no
/// surface syntax, so such patterns are printed through an equivalent
/// `λ`-free expression.
pub fn render_system(sys: &SnpSystem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system {} {{", sys.name);
    for n in &sys.neurons {
        let _ = writeln!(out, "  neuron {} {{", n.id);
        let _ = writeln!(out, "    spikes = {};", n.initial_spikes);
        for r in &n.firing_rules {
            let consume = SpikePattern::Atom(r.consume.clone());
            let pattern = if r.pattern().contains_lambda() {
                r.pattern().split_lambda().1.unwrap_or(SpikePattern::Lambda)
            } else {
                r.pattern().clone()
            };
            if pattern == consume {
                let _ = writeln!(out, "    {consume} -> a; {};", r.delay);
            } else {
                let _ = writeln!(out, "    {pattern} / {consume} -> a; {};", r.delay);
            }
        }
        for r in &n.forgetting_rules {
            let _ = writeln!(out, "    {r};");
        }
        out.push_str("  }\n");
    }
    out.push_str("  syn {\n");
    for (from, to) in &sys.synapses {
        let _ = writeln!(out, "    {from} -> {to};");
    }
    out.push_str("  }\n");
    let _ = writeln!(out, "  out {};", sys.output);
    out.push_str("}\n");
    out
}
