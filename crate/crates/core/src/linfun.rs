//! The three-neuron system computing `t1·k + t2`.
//!
//! `s1` starts with `2k-1` spikes and fires `a+/a -> a; t1-1`, so it sends
//! one spike to `s3` every `t1` steps. `s3` (`a^k -> a; t2-1`) fires once it
//! has collected `k` of them, at step `t1·k + 1`, and its spike reaches the
//! output neuron `s2` at `t1·k + t2`. `s2` starts with one spike and fires
//! `a -> a; 0` at step 1 and again at `t1·k + t2 + 1`; the gap between its
//! two spikes is the result.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::snp::{
    run, Engine, FiringRule, Neuron, Policy, RunLimits, SimError, SnpSystem, SpikePattern,
    SpikeTrace,
};

#[derive(Debug, Error)]
pub enum LinError {
    #[error("t1, t2 and k must all be at least 1")]
    Domain,
    #[error("simulation stopped before halting ({0} steps)")]
    OverBudget(u64),
    #[error("expected exactly two output spikes, got {0}")]
    TraceShape(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Parameters of `t1·k + t2`, all at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinParams {
    t1: BigUint,
    t2: BigUint,
    k: BigUint,
}

impl LinParams {
    pub fn new(
        t1: impl Into<BigUint>,
        t2: impl Into<BigUint>,
        k: impl Into<BigUint>,
    ) -> Result<Self, LinError> {
        let (t1, t2, k) = (t1.into(), t2.into(), k.into());
        if t1.is_zero() || t2.is_zero() || k.is_zero() {
            return Err(LinError::Domain);
        }
        Ok(LinParams { t1, t2, k })
    }

    pub fn t1(&self) -> &BigUint {
        &self.t1
    }

    pub fn t2(&self) -> &BigUint {
        &self.t2
    }

    pub fn k(&self) -> &BigUint {
        &self.k
    }
}

pub fn linfun_oracle(p: &LinParams) -> BigUint {
    &p.t1 * &p.k + &p.t2
}

pub fn build_pi_add(p: &LinParams) -> SnpSystem {
    let one = BigUint::one();
    let s1_spikes = (&p.k << 1u32) - 1u32;
    let s1_rule = FiringRule::new(SpikePattern::a_plus(), one.clone(), &p.t1 - 1u32)
        .expect("a+ always compiles");
    SnpSystem::new("pi_add", "s2")
        .with_neuron(Neuron::new("s1", s1_spikes).with_firing(s1_rule))
        .with_neuron(Neuron::new("s2", one.clone()).with_firing(FiringRule::exact(one, 0u32)))
        .with_neuron(
            Neuron::new("s3", 0u32).with_firing(FiringRule::exact(p.k.clone(), &p.t2 - 1u32)),
        )
        .with_synapse("s1", "s3")
        .with_synapse("s3", "s2")
}

/// Ticks needed for a literal run to reach halting, with a little slack:
/// `(2k-1)·t1 + t2 + 4`.
pub fn literal_budget(p: &LinParams) -> Option<u64> {
    (((&p.k << 1u32) - 1u32) * &p.t1 + &p.t2 + 4u32).to_u64()
}

/// Event steps needed by the event engine: `s1` fires and emits `2k-1`
/// times, plus a handful of steps for `s2` and `s3`.
pub fn events_budget(p: &LinParams) -> Option<u64> {
    (((&p.k << 1u32) - 1u32) * 2u32 + 8u32).to_u64()
}

/// Runs the system to halting and returns the gap between the two output
/// spikes, together with the full trace.
pub fn eval_linear_trace(
    p: &LinParams,
    engine: Engine,
    budget: u64,
) -> Result<(BigUint, SpikeTrace), LinError> {
    let sys = build_pi_add(p);
    let trace = run(&sys, engine, &RunLimits::budget(budget), Policy::Strict)?;
    if !trace.halted() {
        return Err(LinError::OverBudget(trace.steps_executed));
    }
    if trace.emissions.len() != 2 {
        return Err(LinError::TraceShape(trace.emissions.len()));
    }
    let value = &trace.emissions[1] - &trace.emissions[0];
    Ok((value, trace))
}

pub fn eval_linear(p: &LinParams, engine: Engine, budget: u64) -> Result<BigUint, LinError> {
    eval_linear_trace(p, engine, budget).map(|(v, _)| v)
}
