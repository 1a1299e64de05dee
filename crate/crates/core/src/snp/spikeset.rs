//! Ultimately periodic sets of naturals.
//!
//! Every regular language over a one-letter alphabet has a set of word
//! lengths of the form `F ∪ { n ≥ T : n mod P ∈ R }` with `F` finite and below
//! `T`. [`SpikeSet`] stores exactly that, kept canonical (smallest period,
//! then smallest threshold) so that equal languages compile to equal values.
//!
//! Operations work symbolically on arithmetic progressions, so constants of
//! hundreds of bits are fine as long as the shape stays simple. Anything that
//! would require materialising more than [`EXPANSION_LIMIT`] elements or
//! residues is refused with [`PatternError::TooComplex`].

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

/// Upper bound on elements, residues or graph nodes materialised by a
/// single set operation.
pub const EXPANSION_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern is too complex to compile ({0})")]
    TooComplex(&'static str),
}

/// The periodic tail `{ n ≥ threshold : n mod period ∈ residues }`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Periodic {
    pub threshold: BigUint,
    pub period: BigUint,
    pub residues: BTreeSet<BigUint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeSet {
    finite: BTreeSet<BigUint>,
    periodic: Option<Periodic>,
}

/// `{ start + period·j : j ≥ 0 }`
#[derive(Debug, Clone)]
struct Progression {
    start: BigUint,
    period: BigUint,
}

fn budget(n: &BigUint, what: &'static str) -> Result<u64, PatternError> {
    match n.to_u64() {
        Some(v) if v <= EXPANSION_LIMIT => Ok(v),
        _ => Err(PatternError::TooComplex(what)),
    }
}

/// Smallest `n ≥ from` with `n ≡ residue (mod period)`.
fn first_at_or_above(from: &BigUint, residue: &BigUint, period: &BigUint) -> BigUint {
    let offset = (residue + period - from % period) % period;
    from + offset
}

/// Largest `n < below` with `n ≡ residue (mod period)`, if any.
fn last_below(below: &BigUint, residue: &BigUint, period: &BigUint) -> Option<BigUint> {
    if below.is_zero() {
        return None;
    }
    let top = below - 1u32;
    let back = (&top + period - residue % period) % period;
    if back > top {
        None
    } else {
        Some(top - back)
    }
}

impl SpikeSet {
    pub fn empty() -> Self {
        SpikeSet {
            finite: BTreeSet::new(),
            periodic: None,
        }
    }

    pub fn finite<I: IntoIterator<Item = BigUint>>(items: I) -> Self {
        SpikeSet {
            finite: items.into_iter().collect(),
            periodic: None,
        }
    }

    /// `{ n : n ≥ from }`
    pub fn at_least(from: impl Into<BigUint>) -> Self {
        let start = from.into();
        Self::from_parts(
            BTreeSet::new(),
            vec![Progression {
                start,
                period: BigUint::one(),
            }],
        )
        .expect("single progression never expands")
    }

    pub fn finite_part(&self) -> &BTreeSet<BigUint> {
        &self.finite
    }

    pub fn periodic_part(&self) -> Option<&Periodic> {
        self.periodic.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.finite.is_empty() && self.periodic.is_none()
    }

    pub fn is_finite(&self) -> bool {
        self.periodic.is_none()
    }

    pub fn contains(&self, n: &BigUint) -> bool {
        match &self.periodic {
            Some(per) if *n >= per.threshold => per.residues.contains(&(n % &per.period)),
            _ => self.finite.contains(n),
        }
    }

    pub fn contains_u64(&self, n: u64) -> bool {
        self.contains(&BigUint::from(n))
    }

    pub fn min(&self) -> Option<BigUint> {
        let tail = self.periodic.as_ref().and_then(|per| {
            per.residues
                .iter()
                .map(|r| first_at_or_above(&per.threshold, r, &per.period))
                .min()
        });
        match (self.finite.first(), tail) {
            (Some(f), Some(t)) => Some(f.clone().min(t)),
            (Some(f), None) => Some(f.clone()),
            (None, t) => t,
        }
    }

    fn progressions(&self) -> Vec<Progression> {
        match &self.periodic {
            None => Vec::new(),
            Some(per) => per
                .residues
                .iter()
                .map(|r| Progression {
                    start: first_at_or_above(&per.threshold, r, &per.period),
                    period: per.period.clone(),
                })
                .collect(),
        }
    }

    pub fn union(&self, other: &SpikeSet) -> Result<SpikeSet, PatternError> {
        let finite = self.finite.union(&other.finite).cloned().collect();
        let mut progs = self.progressions();
        progs.extend(other.progressions());
        Self::from_parts(finite, progs)
    }

    /// Minkowski sum `{ x + y }`, i.e. language concatenation over `{a}`.
    pub fn sum(&self, other: &SpikeSet) -> Result<SpikeSet, PatternError> {
        let pairs = (self.finite.len() as u64).saturating_mul(other.finite.len() as u64);
        if pairs > EXPANSION_LIMIT {
            return Err(PatternError::TooComplex("finite sum"));
        }
        let mut finite = BTreeSet::new();
        for x in &self.finite {
            for y in &other.finite {
                finite.insert(x + y);
            }
        }
        let mine = self.progressions();
        let theirs = other.progressions();
        let mut progs = Vec::new();
        for x in &self.finite {
            for p in &theirs {
                progs.push(Progression {
                    start: x + &p.start,
                    period: p.period.clone(),
                });
            }
        }
        for y in &other.finite {
            for p in &mine {
                progs.push(Progression {
                    start: y + &p.start,
                    period: p.period.clone(),
                });
            }
        }
        for p in &mine {
            for q in &theirs {
                sum_progressions(p, q, &mut finite, &mut progs)?;
            }
        }
        if progs.len() as u64 > EXPANSION_LIMIT {
            return Err(PatternError::TooComplex("progression count"));
        }
        Self::from_parts(finite, progs)
    }

    /// Kleene plus: all sums of one or more members.
    pub fn plus(&self) -> Result<SpikeSet, PatternError> {
        let zero = BigUint::zero();
        let has_zero = self.contains(&zero);
        let gens_finite: Vec<BigUint> = self
            .finite
            .iter()
            .filter(|n| !n.is_zero())
            .cloned()
            .collect();
        let gens_prog: Vec<Progression> = self
            .progressions()
            .into_iter()
            .map(|p| {
                if p.start.is_zero() {
                    Progression {
                        start: p.period.clone(),
                        period: p.period,
                    }
                } else {
                    p
                }
            })
            .collect();

        let smallest = gens_finite
            .iter()
            .chain(gens_prog.iter().map(|p| &p.start))
            .min()
            .cloned();
        let Some(m) = smallest else {
            // only the empty word (or nothing at all)
            return Ok(self.clone());
        };

        let mut d = m.clone();
        for g in &gens_finite {
            d = d.gcd(g);
        }
        for p in &gens_prog {
            d = d.gcd(&p.start).gcd(&p.period);
        }
        let nodes = budget(&(&m / &d), "closure modulus")? as usize;

        // cheapest generator (in units of d) reaching each residue class mod m/d
        let mut class_min: Vec<Option<BigUint>> = vec![None; nodes];
        let mut offer = |v: BigUint| {
            let c = (&v % nodes).to_usize().expect("class below node count");
            match &class_min[c] {
                Some(cur) if *cur <= v => {}
                _ => class_min[c] = Some(v),
            }
        };
        for g in &gens_finite {
            offer(g / &d);
        }
        let mut walked = 0u64;
        for p in &gens_prog {
            let s = &p.start / &d;
            let step = &p.period / &d;
            let step_mod = (&step % nodes).to_usize().expect("below node count");
            let cycle = if step_mod == 0 {
                1
            } else {
                nodes / step_mod.gcd(&nodes)
            };
            walked += cycle as u64;
            if walked > EXPANSION_LIMIT {
                return Err(PatternError::TooComplex("closure generators"));
            }
            let mut v = s;
            for _ in 0..cycle {
                offer(v.clone());
                v += &step;
            }
        }

        let edges: Vec<(usize, BigUint)> = class_min
            .iter()
            .enumerate()
            .filter_map(|(c, v)| v.clone().map(|v| (c, v)))
            .collect();
        if (nodes as u64).saturating_mul(edges.len() as u64) > EXPANSION_LIMIT {
            return Err(PatternError::TooComplex("closure graph"));
        }

        // shortest sums per residue class; n is reachable iff n ≥ dist[n mod m/d]
        let mut dist: Vec<Option<BigUint>> = class_min.clone();
        let mut heap: BinaryHeap<Reverse<(BigUint, usize)>> = edges
            .iter()
            .map(|(c, v)| Reverse((v.clone(), *c)))
            .collect();
        while let Some(Reverse((du, u))) = heap.pop() {
            if dist[u].as_ref() != Some(&du) {
                continue;
            }
            for (ec, ev) in &edges {
                let w = (u + ec) % nodes;
                let cand = &du + ev;
                if dist[w].as_ref().is_none_or(|cur| cand < *cur) {
                    dist[w] = Some(cand.clone());
                    heap.push(Reverse((cand, w)));
                }
            }
        }

        let period = &d * nodes;
        let progs = dist
            .into_iter()
            .flatten()
            .map(|v| Progression {
                start: v * &d,
                period: period.clone(),
            })
            .collect();
        let mut finite = BTreeSet::new();
        if has_zero {
            finite.insert(zero);
        }
        Self::from_parts(finite, progs)
    }

    /// Builds the canonical form of `finite ∪ progressions`.
    fn from_parts(
        mut finite: BTreeSet<BigUint>,
        progs: Vec<Progression>,
    ) -> Result<SpikeSet, PatternError> {
        if progs.is_empty() {
            return Ok(SpikeSet {
                finite,
                periodic: None,
            });
        }
        let mut period = BigUint::one();
        for p in &progs {
            period = period.lcm(&p.period);
        }
        let mut threshold = progs
            .iter()
            .map(|p| &p.start)
            .max()
            .cloned()
            .unwrap_or_default();

        let mut residues = BTreeSet::new();
        let mut spent = 0u64;
        for p in &progs {
            let copies = budget(&(&period / &p.period), "common period")?;
            spent += copies;
            if spent > EXPANSION_LIMIT {
                return Err(PatternError::TooComplex("common period"));
            }
            let mut r = &p.start % &p.period;
            for _ in 0..copies {
                residues.insert(r.clone());
                r += &p.period;
            }
        }

        // members of each progression that fall below the common threshold
        for p in &progs {
            let count = budget(
                &((&threshold - &p.start).div_ceil(&p.period)),
                "threshold span",
            )?;
            spent += count;
            if spent > EXPANSION_LIMIT {
                return Err(PatternError::TooComplex("threshold span"));
            }
            let mut v = p.start.clone();
            for _ in 0..count {
                finite.insert(v.clone());
                v += &p.period;
            }
        }

        // explicit elements at or above the threshold that the tail misses
        let stray = finite
            .range(threshold.clone()..)
            .filter(|n| !residues.contains(&(*n % &period)))
            .max()
            .cloned();
        if let Some(top) = stray {
            let new_threshold = top + 1u32;
            let per_class = (&new_threshold - &threshold) / &period + 1u32;
            let work = budget(&per_class, "threshold raise")?.saturating_mul(residues.len() as u64);
            if work > EXPANSION_LIMIT {
                return Err(PatternError::TooComplex("threshold raise"));
            }
            for r in &residues {
                let mut v = first_at_or_above(&threshold, r, &period);
                while v < new_threshold {
                    finite.insert(v.clone());
                    v += &period;
                }
            }
            threshold = new_threshold;
        }
        let tail: Vec<BigUint> = finite.range(threshold.clone()..).cloned().collect();
        for n in tail {
            finite.remove(&n);
        }

        let mut set = SpikeSet {
            finite,
            periodic: Some(Periodic {
                threshold,
                period,
                residues,
            }),
        };
        set.minimize_period();
        set.minimize_threshold();
        Ok(set)
    }

    fn minimize_period(&mut self) {
        let Some(per) = self.periodic.as_mut() else {
            return;
        };
        let count = per.residues.len();
        if count <= 1 {
            // a single residue class is already minimal
            return;
        }
        // a valid shorter period d has (period / d) dividing |residues|
        let divisors: Vec<usize> = (2..=count).filter(|j| count % j == 0).collect();
        for j in divisors.into_iter().rev() {
            let (d, rem) = per.period.div_rem(&BigUint::from(j));
            if !rem.is_zero() {
                continue;
            }
            let invariant = per
                .residues
                .iter()
                .all(|r| per.residues.contains(&((r + &d) % &per.period)));
            if invariant {
                per.residues = per.residues.iter().filter(|r| **r < d).cloned().collect();
                per.period = d;
                return;
            }
        }
    }

    fn minimize_threshold(&mut self) {
        let Some(per) = self.periodic.as_mut() else {
            return;
        };
        loop {
            let below_f = self.finite.last().cloned();
            let below_r = per
                .residues
                .iter()
                .filter_map(|r| last_below(&per.threshold, r, &per.period))
                .max();
            let candidate = match (below_f, below_r) {
                (None, None) => {
                    per.threshold = BigUint::zero();
                    return;
                }
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (Some(a), Some(b)) => a.max(b),
            };
            let in_finite = self.finite.contains(&candidate);
            let in_tail = per.residues.contains(&(&candidate % &per.period));
            if in_finite != in_tail {
                per.threshold = candidate + 1u32;
                return;
            }
            self.finite.remove(&candidate);
            per.threshold = candidate;
        }
    }
}

/// Whether a neuron holding `n` spikes satisfies a rule whose pattern
/// compiled to `s`.
pub fn pattern_matches(s: &SpikeSet, n: &BigUint) -> bool {
    s.contains(n)
}

/// `{x + p·i + q·j}` for progressions `x + p·i` and `y + q·j`.
fn sum_progressions(
    a: &Progression,
    b: &Progression,
    finite: &mut BTreeSet<BigUint>,
    progs: &mut Vec<Progression>,
) -> Result<(), PatternError> {
    let base = &a.start + &b.start;
    let g = a.period.gcd(&b.period);
    let pa = &a.period / &g;
    let pb = &b.period / &g;
    if pa.is_one() || pb.is_one() {
        progs.push(Progression {
            start: base,
            period: g,
        });
        return Ok(());
    }
    // coprime generators: every multiple of g beyond the Frobenius number is reachable
    let pa_u = budget(&pa, "frobenius span")?;
    let pb_u = budget(&pb, "frobenius span")?;
    let span = pa_u.checked_mul(pb_u).filter(|s| *s <= EXPANSION_LIMIT);
    let Some(span) = span else {
        return Err(PatternError::TooComplex("frobenius span"));
    };
    let frobenius = span - pa_u - pb_u;
    let mut reachable = vec![false; frobenius as usize + 1];
    reachable[0] = true;
    for v in 1..=frobenius as usize {
        reachable[v] = (v >= pa_u as usize && reachable[v - pa_u as usize])
            || (v >= pb_u as usize && reachable[v - pb_u as usize]);
    }
    for (v, ok) in reachable.iter().enumerate() {
        if *ok {
            finite.insert(&base + &g * BigUint::from(v));
        }
    }
    progs.push(Progression {
        start: base + &g * BigUint::from(frobenius + 1),
        period: g,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn members(s: &SpikeSet, upto: u64) -> Vec<u64> {
        (0..=upto).filter(|n| s.contains_u64(*n)).collect()
    }

    #[test]
    fn at_least_one_is_canonical() {
        let s = SpikeSet::at_least(1u32);
        let per = s.periodic_part().unwrap();
        assert_eq!(per.threshold, big(1));
        assert_eq!(per.period, big(1));
        assert_eq!(
            per.residues.iter().cloned().collect::<Vec<_>>(),
            vec![big(0)]
        );
        assert!(s.finite_part().is_empty());
    }

    #[test]
    fn plus_of_single_atom() {
        let s = SpikeSet::finite([big(3)]).plus().unwrap();
        assert_eq!(members(&s, 12), vec![3, 6, 9, 12]);
        let per = s.periodic_part().unwrap();
        assert_eq!(per.period, big(3));
        assert_eq!(per.threshold, big(1));
    }

    #[test]
    fn plus_of_huge_atom_stays_symbolic() {
        let k = BigUint::from(1u8) << 300u32;
        let s = SpikeSet::finite([k.clone()]).plus().unwrap();
        assert!(s.contains(&k));
        assert!(s.contains(&(&k * 7u32)));
        assert!(!s.contains(&(&k + 1u32)));
        assert!(!s.contains(&BigUint::zero()));
    }

    #[test]
    fn plus_of_two_generators_has_frobenius_gap() {
        // (a^3 | a^5)+ : everything from 8 on, plus 3, 5, 6
        let s = SpikeSet::finite([big(3), big(5)]).plus().unwrap();
        assert_eq!(members(&s, 12), vec![3, 5, 6, 8, 9, 10, 11, 12]);
        assert_eq!(s.periodic_part().unwrap().period, big(1));
        assert_eq!(s.periodic_part().unwrap().threshold, big(8));
    }

    #[test]
    fn sum_of_periodic_sets() {
        let threes = SpikeSet::finite([big(3)]).plus().unwrap();
        let fives = SpikeSet::finite([big(5)]).plus().unwrap();
        let s = threes.sum(&fives).unwrap();
        // 3i + 5j with i, j ≥ 1
        let expect: Vec<u64> = (0..=40)
            .filter(|n| (1..=13).any(|i| (1..=8).any(|j| 3 * i + 5 * j == *n)))
            .collect();
        assert_eq!(members(&s, 40), expect);
    }

    #[test]
    fn union_merges_periods() {
        let evens = SpikeSet::finite([big(2)]).plus().unwrap();
        let threes = SpikeSet::finite([big(3)]).plus().unwrap();
        let s = evens.union(&threes).unwrap();
        assert_eq!(members(&s, 12), vec![2, 3, 4, 6, 8, 9, 10, 12]);
        assert_eq!(s.periodic_part().unwrap().period, big(6));
    }

    #[test]
    fn union_of_equal_languages_is_equal() {
        let a = SpikeSet::finite([big(1)]).plus().unwrap();
        let b = SpikeSet::finite([big(1), big(2)]).plus().unwrap();
        assert_eq!(a, b);
        let c = SpikeSet::finite([big(2)])
            .plus()
            .unwrap()
            .union(&SpikeSet::finite([big(1)]).plus().unwrap())
            .unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn min_element() {
        let s = SpikeSet::finite([big(5)])
            .sum(&SpikeSet::finite([big(3)]).plus().unwrap())
            .unwrap();
        assert_eq!(s.min(), Some(big(8)));
        assert_eq!(SpikeSet::empty().min(), None);
    }

    #[test]
    fn refuses_exploding_lcm() {
        let p = BigUint::from(1u8) << 100u32;
        let q = &p + 1u32;
        let a = SpikeSet::finite([p]).plus().unwrap();
        let b = SpikeSet::finite([q]).plus().unwrap();
        assert!(matches!(a.union(&b), Err(PatternError::TooComplex(_))));
    }
}
