//! Spiking neural P systems: static description, validation, and the two
//! execution engines.

mod engine;
mod pattern;
mod spikeset;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;

pub use engine::{
    run, run_events, run_literal, Engine, NeuronState, Policy, RunLimits, SimError, Simulation,
    SpikeTrace, StepEvent, StopReason, SystemState,
};
pub use pattern::{compile_pattern, SpikePattern};
pub use spikeset::{pattern_matches, PatternError, Periodic, SpikeSet, EXPANSION_LIMIT};

/// `E / a^r -> a; d`
///
/// The pattern is compiled on construction; the compiled set is what the
/// engines consult.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiringRule {
    pattern: SpikePattern,
    accepts: SpikeSet,
    pub consume: BigUint,
    pub delay: BigUint,
}

impl FiringRule {
    pub fn new(
        pattern: SpikePattern,
        consume: impl Into<BigUint>,
        delay: impl Into<BigUint>,
    ) -> Result<Self, PatternError> {
        let accepts = compile_pattern(&pattern)?;
        Ok(FiringRule {
            pattern,
            accepts,
            consume: consume.into(),
            delay: delay.into(),
        })
    }

    /// `a^r -> a; d`, the rule that fires on exactly `r` spikes.
    pub fn exact(consume: impl Into<BigUint>, delay: impl Into<BigUint>) -> Self {
        let consume = consume.into();
        FiringRule {
            pattern: SpikePattern::Atom(consume.clone()),
            accepts: SpikeSet::finite([consume.clone()]),
            consume,
            delay: delay.into(),
        }
    }

    pub fn pattern(&self) -> &SpikePattern {
        &self.pattern
    }

    pub fn accepts(&self) -> &SpikeSet {
        &self.accepts
    }

    /// Whether the pattern is just `a^r` for the rule's own `r`.
    pub fn is_exact(&self) -> bool {
        matches!(&self.pattern, SpikePattern::Atom(n) if *n == self.consume)
    }

    pub fn applies_to(&self, spikes: &BigUint) -> bool {
        *spikes >= self.consume && self.accepts.contains(spikes)
    }
}

impl fmt::Display for FiringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let consumed = SpikePattern::Atom(self.consume.clone());
        if self.is_exact() {
            write!(f, "{consumed} -> a; {}", self.delay)
        } else {
            write!(f, "{} / {consumed} -> a; {}", self.pattern, self.delay)
        }
    }
}

/// `a^s -> λ`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgettingRule {
    pub exact: BigUint,
}

impl ForgettingRule {
    pub fn new(exact: impl Into<BigUint>) -> Self {
        ForgettingRule {
            exact: exact.into(),
        }
    }
}

impl fmt::Display for ForgettingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> lambda", SpikePattern::Atom(self.exact.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleRef {
    Firing(usize),
    Forgetting(usize),
}

impl fmt::Display for RuleRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleRef::Firing(i) => write!(f, "firing rule #{i}"),
            RuleRef::Forgetting(i) => write!(f, "forgetting rule #{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neuron {
    pub id: String,
    pub initial_spikes: BigUint,
    pub firing_rules: Vec<FiringRule>,
    pub forgetting_rules: Vec<ForgettingRule>,
}

impl Neuron {
    pub fn new(id: impl Into<String>, initial_spikes: impl Into<BigUint>) -> Self {
        Neuron {
            id: id.into(),
            initial_spikes: initial_spikes.into(),
            firing_rules: Vec::new(),
            forgetting_rules: Vec::new(),
        }
    }

    pub fn with_firing(mut self, rule: FiringRule) -> Self {
        self.firing_rules.push(rule);
        self
    }

    pub fn with_forgetting(mut self, rule: ForgettingRule) -> Self {
        self.forgetting_rules.push(rule);
        self
    }

    /// Rules usable on `count` spikes: firing rules first, then forgetting
    /// rules, each in declaration order.
    pub fn applicable_rules(&self, count: &BigUint) -> Vec<RuleRef> {
        let firing = self
            .firing_rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.applies_to(count))
            .map(|(i, _)| RuleRef::Firing(i));
        let forgetting = self
            .forgetting_rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.exact == *count)
            .map(|(i, _)| RuleRef::Forgetting(i));
        firing.chain(forgetting).collect()
    }

    pub fn has_applicable_rule(&self, count: &BigUint) -> bool {
        self.firing_rules.iter().any(|r| r.applies_to(count))
            || self.forgetting_rules.iter().any(|r| r.exact == *count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnpSystem {
    pub name: String,
    pub neurons: Vec<Neuron>,
    pub synapses: BTreeSet<(String, String)>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateNeuron {
        neuron: String,
    },
    SelfSynapse {
        neuron: String,
    },
    UnknownSynapseEndpoint {
        from: String,
        to: String,
        missing: String,
    },
    UnknownOutput {
        neuron: String,
    },
    ZeroConsume {
        neuron: String,
        rule: usize,
    },
    ZeroForget {
        neuron: String,
        rule: usize,
    },
    /// The pattern admits a spike count smaller than the number consumed.
    PatternBelowConsume {
        neuron: String,
        rule: usize,
        smallest: BigUint,
    },
    /// The pattern accepts nothing at all.
    EmptyPattern {
        neuron: String,
        rule: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNeuron { neuron } => write!(f, "duplicate neuron `{neuron}`"),
            Violation::SelfSynapse { neuron } => write!(f, "self-synapse on `{neuron}`"),
            Violation::UnknownSynapseEndpoint { from, to, missing } => {
                write!(f, "synapse {from} -> {to} names unknown neuron `{missing}`")
            }
            Violation::UnknownOutput { neuron } => write!(f, "unknown output neuron `{neuron}`"),
            Violation::ZeroConsume { neuron, rule } => {
                write!(f, "neuron `{neuron}` firing rule #{rule} consumes zero spikes")
            }
            Violation::ZeroForget { neuron, rule } => {
                write!(f, "neuron `{neuron}` forgetting rule #{rule} removes zero spikes")
            }
            Violation::PatternBelowConsume { neuron, rule, smallest } => write!(
                f,
                "neuron `{neuron}` firing rule #{rule} accepts {smallest} spikes, fewer than it consumes"
            ),
            Violation::EmptyPattern { neuron, rule } => {
                write!(f, "neuron `{neuron}` firing rule #{rule} can never apply")
            }
        }
    }
}

/// Non-fatal findings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// A firing and a forgetting rule of the same neuron share an enabling count.
    FiringForgettingOverlap {
        neuron: String,
        firing: usize,
        forgetting: usize,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::FiringForgettingOverlap {
                neuron,
                firing,
                forgetting,
            } => write!(
                f,
                "neuron `{neuron}`: firing rule #{firing} and forgetting rule #{forgetting} overlap"
            ),
        }
    }
}

impl SnpSystem {
    pub fn new(name: impl Into<String>, output: impl Into<String>) -> Self {
        SnpSystem {
            name: name.into(),
            neurons: Vec::new(),
            synapses: BTreeSet::new(),
            output: output.into(),
        }
    }

    pub fn with_neuron(mut self, neuron: Neuron) -> Self {
        self.neurons.push(neuron);
        self
    }

    pub fn with_synapse(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.synapses.insert((from.into(), to.into()));
        self
    }

    pub fn neuron(&self, id: &str) -> Option<&Neuron> {
        self.neurons.iter().find(|n| n.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.neurons.iter().position(|n| n.id == id)
    }

    /// Checks every structural invariant and reports all violations found.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let mut seen = HashMap::new();
        for n in &self.neurons {
            if seen.insert(n.id.as_str(), ()).is_some() {
                out.push(Violation::DuplicateNeuron {
                    neuron: n.id.clone(),
                });
            }
        }
        for (from, to) in &self.synapses {
            if from == to {
                out.push(Violation::SelfSynapse {
                    neuron: from.clone(),
                });
            }
            for end in [from, to] {
                if !seen.contains_key(end.as_str()) {
                    out.push(Violation::UnknownSynapseEndpoint {
                        from: from.clone(),
                        to: to.clone(),
                        missing: end.clone(),
                    });
                }
            }
        }
        if !seen.contains_key(self.output.as_str()) {
            out.push(Violation::UnknownOutput {
                neuron: self.output.clone(),
            });
        }
        for n in &self.neurons {
            for (i, r) in n.firing_rules.iter().enumerate() {
                if r.consume.is_zero() {
                    out.push(Violation::ZeroConsume {
                        neuron: n.id.clone(),
                        rule: i,
                    });
                }
                match r.accepts.min() {
                    None => out.push(Violation::EmptyPattern {
                        neuron: n.id.clone(),
                        rule: i,
                    }),
                    Some(smallest) if smallest < r.consume => {
                        out.push(Violation::PatternBelowConsume {
                            neuron: n.id.clone(),
                            rule: i,
                            smallest,
                        })
                    }
                    Some(_) => {}
                }
            }
            for (i, r) in n.forgetting_rules.iter().enumerate() {
                if r.exact.is_zero() {
                    out.push(Violation::ZeroForget {
                        neuron: n.id.clone(),
                        rule: i,
                    });
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn warnings(&self) -> Vec<Warning> {
        let mut out = Vec::new();
        for n in &self.neurons {
            for (fi, fr) in n.firing_rules.iter().enumerate() {
                for (gi, gr) in n.forgetting_rules.iter().enumerate() {
                    if fr.applies_to(&gr.exact) {
                        out.push(Warning::FiringForgettingOverlap {
                            neuron: n.id.clone(),
                            firing: fi,
                            forgetting: gi,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Free-function form of [`SnpSystem::validate`].
pub fn validate_system(sys: &SnpSystem) -> Result<(), Vec<Violation>> {
    sys.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn pi_add_3_2_4() -> SnpSystem {
        SnpSystem::new("pi_add", "s2")
            .with_neuron(
                Neuron::new("s1", 7u32)
                    .with_firing(FiringRule::new(SpikePattern::a_plus(), 1u32, 2u32).unwrap()),
            )
            .with_neuron(Neuron::new("s2", 1u32).with_firing(FiringRule::exact(1u32, 0u32)))
            .with_neuron(Neuron::new("s3", 0u32).with_firing(FiringRule::exact(4u32, 1u32)))
            .with_synapse("s1", "s3")
            .with_synapse("s3", "s2")
    }

    #[test]
    fn pi_add_validates() {
        assert_eq!(pi_add_3_2_4().validate(), Ok(()));
    }

    #[test]
    fn self_synapse_is_reported() {
        let sys = pi_add_3_2_4().with_synapse("s1", "s1");
        let v = sys.validate().unwrap_err();
        assert!(v.contains(&Violation::SelfSynapse {
            neuron: "s1".into()
        }));
        assert!(v[0].to_string().contains("self-synapse"));
    }

    #[test]
    fn unknown_output_is_reported() {
        let mut sys = pi_add_3_2_4();
        sys.output = "s9".into();
        let v = sys.validate().unwrap_err();
        assert_eq!(
            v,
            vec![Violation::UnknownOutput {
                neuron: "s9".into()
            }]
        );
        assert_eq!(v[0].to_string(), "unknown output neuron `s9`");
    }

    #[test]
    fn all_violations_are_collected() {
        let sys = SnpSystem::new("bad", "nowhere")
            .with_neuron(Neuron::new("n", 0u32))
            .with_neuron(
                Neuron::new("n", 0u32)
                    .with_firing(FiringRule::new(SpikePattern::a_plus(), 2u32, 0u32).unwrap()),
            )
            .with_synapse("n", "m");
        let v = sys.validate().unwrap_err();
        assert_eq!(v.len(), 4, "{v:?}");
        assert!(v.iter().any(
            |x| matches!(x, Violation::PatternBelowConsume { smallest, .. } if *smallest == big(1))
        ));
    }

    #[test]
    fn applicable_rules_follow_declaration_order() {
        let s1 = &pi_add_3_2_4().neurons[0];
        assert_eq!(s1.applicable_rules(&big(7)), vec![RuleRef::Firing(0)]);

        let forget = Neuron::new("f", 3u32).with_forgetting(ForgettingRule::new(3u32));
        assert_eq!(
            forget.applicable_rules(&big(3)),
            vec![RuleRef::Forgetting(0)]
        );

        let none = Neuron::new("x", 2u32).with_firing(FiringRule::exact(4u32, 1u32));
        assert!(none.applicable_rules(&big(2)).is_empty());

        let both = Neuron::new("b", 2u32)
            .with_forgetting(ForgettingRule::new(2u32))
            .with_firing(FiringRule::new(SpikePattern::a_plus(), 1u32, 0u32).unwrap());
        assert_eq!(
            both.applicable_rules(&big(2)),
            vec![RuleRef::Firing(0), RuleRef::Forgetting(0)]
        );
    }

    #[test]
    fn overlap_is_a_warning_not_a_violation() {
        let sys = SnpSystem::new("w", "b").with_neuron(
            Neuron::new("b", 2u32)
                .with_firing(FiringRule::new(SpikePattern::a_plus(), 1u32, 0u32).unwrap())
                .with_forgetting(ForgettingRule::new(2u32)),
        );
        assert_eq!(sys.validate(), Ok(()));
        assert_eq!(sys.warnings().len(), 1);
    }

    #[test]
    fn rule_display() {
        let r = FiringRule::new(SpikePattern::a_plus(), 1u32, 2u32).unwrap();
        assert_eq!(r.to_string(), "a+ / a -> a; 2");
        assert_eq!(FiringRule::exact(4u32, 1u32).to_string(), "a^4 -> a; 1");
        assert_eq!(ForgettingRule::new(3u32).to_string(), "a^3 -> lambda");
    }

    #[test]
    fn pattern_membership() {
        assert!(pattern_matches(&SpikeSet::at_least(1u32), &big(7)));
        assert!(!pattern_matches(&SpikeSet::finite([big(4)]), &big(3)));
        let five_plus_threes = SpikePattern::Concat(vec![
            SpikePattern::atom(5u32),
            SpikePattern::Union(vec![
                SpikePattern::Lambda,
                SpikePattern::plus(SpikePattern::atom(3u32)),
            ]),
        ])
        .compile()
        .unwrap();
        assert!(pattern_matches(&five_plus_threes, &big(14)));
        let brute: Vec<u64> = (0..30).filter(|n| *n >= 5 && (n - 5) % 3 == 0).collect();
        let got: Vec<u64> = (0..30)
            .filter(|&n| pattern_matches(&five_plus_threes, &big(n)))
            .collect();
        assert_eq!(got, brute);
    }
}
