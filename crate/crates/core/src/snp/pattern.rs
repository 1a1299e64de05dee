//! Regular expressions over the one-letter spike alphabet.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::spikeset::{PatternError, SpikeSet};

/// A regular expression over `{a}`.
///
/// `Atom(n)` stands for `a^n`. Concatenation and union are n-ary and hold at
/// least two children; `Plus` is Kleene plus. There is no star: `E*` is
/// written `E+ | λ` where needed, and `λ` only appears through `Lambda`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpikePattern {
    Lambda,
    Atom(BigUint),
    Concat(Vec<SpikePattern>),
    Union(Vec<SpikePattern>),
    Plus(Box<SpikePattern>),
}

impl SpikePattern {
    pub fn atom(n: impl Into<BigUint>) -> Self {
        SpikePattern::Atom(n.into())
    }

    /// `a+`
    pub fn a_plus() -> Self {
        SpikePattern::Plus(Box::new(SpikePattern::Atom(BigUint::one())))
    }

    pub fn plus(inner: SpikePattern) -> Self {
        SpikePattern::Plus(Box::new(inner))
    }

    /// Checks the shape invariants: atoms are positive, concatenations and
    /// unions have at least two children.
    pub fn is_well_formed(&self) -> bool {
        match self {
            SpikePattern::Lambda => true,
            SpikePattern::Atom(n) => !n.is_zero(),
            SpikePattern::Concat(cs) | SpikePattern::Union(cs) => {
                cs.len() >= 2 && cs.iter().all(SpikePattern::is_well_formed)
            }
            SpikePattern::Plus(c) => c.is_well_formed(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            SpikePattern::Lambda | SpikePattern::Atom(_) => 1,
            SpikePattern::Concat(cs) | SpikePattern::Union(cs) => {
                1 + cs.iter().map(SpikePattern::depth).max().unwrap_or(0)
            }
            SpikePattern::Plus(c) => 1 + c.depth(),
        }
    }

    pub fn contains_lambda(&self) -> bool {
        match self {
            SpikePattern::Lambda => true,
            SpikePattern::Atom(_) => false,
            SpikePattern::Concat(cs) | SpikePattern::Union(cs) => {
                cs.iter().any(SpikePattern::contains_lambda)
            }
            SpikePattern::Plus(c) => c.contains_lambda(),
        }
    }

    /// Compiles the expression to the set of spike counts it accepts.
    pub fn compile(&self) -> Result<SpikeSet, PatternError> {
        compile_pattern(self)
    }

    /// Rewrites the expression without `Lambda`, preserving the language up
    /// to the empty word. Returns the nullable flag (whether `λ` is in the
    /// language) and the `λ`-free remainder, `None` when the language is at
    /// most `{λ}`.
    pub fn split_lambda(&self) -> (bool, Option<SpikePattern>) {
        match self {
            SpikePattern::Lambda => (true, None),
            SpikePattern::Atom(_) => (false, Some(self.clone())),
            SpikePattern::Union(cs) => {
                let mut nullable = false;
                let mut parts = Vec::new();
                for c in cs {
                    let (n, p) = c.split_lambda();
                    nullable |= n;
                    parts.extend(p);
                }
                (nullable, union_of(parts))
            }
            SpikePattern::Concat(cs) => {
                let mut acc = cs[0].split_lambda();
                for c in &cs[1..] {
                    let (n2, p2) = c.split_lambda();
                    let (n1, p1) = acc;
                    let mut alts = Vec::new();
                    if let (Some(x), Some(y)) = (&p1, &p2) {
                        alts.push(concat_of(x.clone(), y.clone()));
                    }
                    if n2 {
                        alts.extend(p1.clone());
                    }
                    if n1 {
                        alts.extend(p2.clone());
                    }
                    acc = (n1 && n2, union_of(alts));
                }
                acc
            }
            SpikePattern::Plus(c) => {
                let (n, p) = c.split_lambda();
                (n, p.map(SpikePattern::plus))
            }
        }
    }
}

fn union_of(mut parts: Vec<SpikePattern>) -> Option<SpikePattern> {
    match parts.len() {
        0 => None,
        1 => parts.pop(),
        _ => Some(SpikePattern::Union(parts)),
    }
}

fn concat_of(x: SpikePattern, y: SpikePattern) -> SpikePattern {
    SpikePattern::Concat(vec![x, y])
}

/// Compiles a well-formed pattern to its ultimately periodic set of lengths.
pub fn compile_pattern(p: &SpikePattern) -> Result<SpikeSet, PatternError> {
    match p {
        SpikePattern::Lambda => Ok(SpikeSet::finite([BigUint::zero()])),
        SpikePattern::Atom(n) => Ok(SpikeSet::finite([n.clone()])),
        SpikePattern::Union(cs) => {
            let mut acc = compile_pattern(&cs[0])?;
            for c in &cs[1..] {
                acc = acc.union(&compile_pattern(c)?)?;
            }
            Ok(acc)
        }
        SpikePattern::Concat(cs) => {
            let mut acc = compile_pattern(&cs[0])?;
            for c in &cs[1..] {
                acc = acc.sum(&compile_pattern(c)?)?;
            }
            Ok(acc)
        }
        SpikePattern::Plus(c) => compile_pattern(c)?.plus(),
    }
}

/// Renders in the `.snp` surface syntax. `Lambda` has no surface form and is
/// printed as `λ`; callers that need reparsable text strip it first with
/// [`SpikePattern::split_lambda`].
impl fmt::Display for SpikePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpikePattern::Lambda => write!(f, "λ"),
            SpikePattern::Atom(n) if n.is_one() => write!(f, "a"),
            SpikePattern::Atom(n) => write!(f, "a^{n}"),
            SpikePattern::Union(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    // a union nested directly in a union keeps its grouping
                    if matches!(c, SpikePattern::Union(_)) {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            SpikePattern::Concat(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    match c {
                        SpikePattern::Union(_) | SpikePattern::Concat(_) => write!(f, "({c})")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            SpikePattern::Plus(c) => match **c {
                SpikePattern::Atom(_) | SpikePattern::Lambda => write!(f, "{c}+"),
                _ => write!(f, "({c})+"),
            },
        }
    }
}
