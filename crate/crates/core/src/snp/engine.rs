//! Clocked execution of an [`SnpSystem`].
//!
//! Timing model, for a neuron that fires at step `q` with delay `d`:
//!
//! * the `r` consumed spikes leave the neuron at `q`;
//! * the spike is released at `q + d` (at `q` itself when `d = 0`);
//! * spikes arriving during `q+1 ..= q+d-1` are lost;
//! * the neuron may fire again from `q + d + 1` on.
//!
//! Spikes delivered at step `t` become usable at `t + 1`; initial spikes are
//! usable at step 1. Within a step the phases are: rule application, spike
//! release, delivery.
//!
//! The literal engine ticks the clock one step at a time. The event engine
//! jumps straight to the next step where something can happen; both produce
//! the same trace.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use super::{RuleRef, SnpSystem, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// More than one applicable rule in a neuron is an error.
    #[default]
    Strict,
    /// Take the first applicable rule: firing before forgetting, then
    /// declaration order.
    Permissive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Literal,
    Events,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid system: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("neuron `{neuron}` has {choices} applicable rules at step {step}")]
    AmbiguousChoice {
        neuron: String,
        step: BigUint,
        choices: usize,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronState {
    pub spikes: BigUint,
    /// Delivered this step, usable from the next one.
    pub inbox: BigUint,
    /// Inclusive window during which arriving spikes are lost.
    pub closed: Option<(BigUint, BigUint)>,
    pub fire_eligible_at: BigUint,
    pub pending_emission: Option<BigUint>,
}

impl NeuronState {
    pub fn is_closed_at(&self, t: &BigUint) -> bool {
        matches!(&self.closed, Some((from, until)) if from <= t && t <= until)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemState {
    pub clock: BigUint,
    pub neurons: Vec<NeuronState>,
}

impl SystemState {
    pub fn initial(sys: &SnpSystem) -> Self {
        SystemState {
            clock: BigUint::zero(),
            neurons: sys
                .neurons
                .iter()
                .map(|n| NeuronState {
                    spikes: n.initial_spikes.clone(),
                    inbox: BigUint::zero(),
                    closed: None,
                    fire_eligible_at: BigUint::one(),
                    pending_emission: None,
                })
                .collect(),
        }
    }
}

/// What happened to one neuron during a step. Neurons are referred to by
/// their index in [`SnpSystem::neurons`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepEvent {
    Fired {
        neuron: usize,
        rule: usize,
        consumed: BigUint,
        emits_at: BigUint,
    },
    Forgot {
        neuron: usize,
        rule: usize,
        removed: BigUint,
    },
    Emitted {
        neuron: usize,
    },
    Delivered {
        neuron: usize,
        count: BigUint,
    },
    Lost {
        neuron: usize,
        count: BigUint,
    },
}

impl StepEvent {
    pub fn neuron(&self) -> usize {
        match self {
            StepEvent::Fired { neuron, .. }
            | StepEvent::Forgot { neuron, .. }
            | StepEvent::Emitted { neuron }
            | StepEvent::Delivered { neuron, .. }
            | StepEvent::Lost { neuron, .. } => *neuron,
        }
    }

    pub fn describe(&self, sys: &SnpSystem) -> String {
        let id = &sys.neurons[self.neuron()].id;
        match self {
            StepEvent::Fired {
                rule,
                consumed,
                emits_at,
                ..
            } => {
                format!("{id} fires rule #{rule}, consumes {consumed}, emits at {emits_at}")
            }
            StepEvent::Forgot { rule, removed, .. } => {
                format!("{id} forgets {removed} (rule #{rule})")
            }
            StepEvent::Emitted { .. } => format!("{id} emits"),
            StepEvent::Delivered { count, .. } => format!("{id} receives {count}"),
            StepEvent::Lost { count, .. } => format!("{id} is closed, {count} lost"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLimits {
    /// Clock ticks for the literal engine, executed event steps for the
    /// event engine.
    pub budget: u64,
    /// Stop before executing any step past this clock value.
    pub horizon: Option<BigUint>,
    /// Stop as soon as the output neuron has emitted this many spikes.
    pub stop_after_emissions: Option<usize>,
}

impl RunLimits {
    pub fn budget(budget: u64) -> Self {
        RunLimits {
            budget,
            horizon: None,
            stop_after_emissions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Halted,
    Budget,
    Horizon,
    EmissionLimit,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Halted => "halted",
            StopReason::Budget => "budget exhausted",
            StopReason::Horizon => "horizon reached",
            StopReason::EmissionLimit => "emission limit reached",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrace {
    /// Steps at which the output neuron released a spike.
    pub emissions: Vec<BigUint>,
    pub stop: StopReason,
    /// Clock value when the run stopped.
    pub clock: BigUint,
    /// Number of steps the engine executed (ticks or events).
    pub steps_executed: u64,
    /// Executed steps in which some rule applied or some spike moved.
    pub active_steps: u64,
}

impl SpikeTrace {
    pub fn halted(&self) -> bool {
        self.stop == StopReason::Halted
    }

    /// Gaps between consecutive output spikes.
    pub fn intervals(&self) -> Vec<BigUint> {
        self.emissions.windows(2).map(|w| &w[1] - &w[0]).collect()
    }
}

/// One engine instance owning the evolving state of a system.
pub struct Simulation<'a> {
    sys: &'a SnpSystem,
    successors: Vec<Vec<usize>>,
    output: usize,
    policy: Policy,
    state: SystemState,
    enabled: Vec<bool>,
    emissions: Vec<BigUint>,
    steps_executed: u64,
    active_steps: u64,
}

impl<'a> Simulation<'a> {
    pub fn new(sys: &'a SnpSystem, policy: Policy) -> Result<Self, SimError> {
        sys.validate().map_err(SimError::Invalid)?;
        let mut successors = vec![Vec::new(); sys.neurons.len()];
        for (from, to) in &sys.synapses {
            let (Some(i), Some(j)) = (sys.index_of(from), sys.index_of(to)) else {
                unreachable!("validated synapse endpoints");
            };
            successors[i].push(j);
        }
        let output = sys.index_of(&sys.output).expect("validated output");
        let state = SystemState::initial(sys);
        let enabled = sys
            .neurons
            .iter()
            .zip(&state.neurons)
            .map(|(n, s)| n.has_applicable_rule(&s.spikes))
            .collect();
        Ok(Simulation {
            sys,
            successors,
            output,
            policy,
            state,
            enabled,
            emissions: Vec::new(),
            steps_executed: 0,
            active_steps: 0,
        })
    }

    pub fn system(&self) -> &SnpSystem {
        self.sys
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn emissions(&self) -> &[BigUint] {
        &self.emissions
    }

    pub fn steps_executed(&self) -> u64 {
        self.steps_executed
    }

    /// No spike in flight and no neuron able to apply a rule.
    pub fn is_halted(&self) -> bool {
        self.state
            .neurons
            .iter()
            .all(|n| n.pending_emission.is_none())
            && !self.enabled.iter().any(|e| *e)
    }

    /// Earliest step at which a spike is released or a rule can apply.
    pub fn next_event_time(&self) -> Option<BigUint> {
        let soonest = &self.state.clock + 1u32;
        let mut best: Option<BigUint> = None;
        for (ns, enabled) in self.state.neurons.iter().zip(&self.enabled) {
            let t = match &ns.pending_emission {
                Some(p) => p.clone(),
                None if *enabled => ns.fire_eligible_at.clone().max(soonest.clone()),
                None => continue,
            };
            if best.as_ref().is_none_or(|b| t < *b) {
                best = Some(t);
            }
        }
        best
    }

    /// Executes the next clock step.
    pub fn step(&mut self) -> Result<Vec<StepEvent>, SimError> {
        let t = &self.state.clock + 1u32;
        self.step_at(t)
    }

    /// Jumps to the next event (or the next tick if nothing is scheduled)
    /// and executes that step.
    pub fn step_event(&mut self) -> Result<Vec<StepEvent>, SimError> {
        let t = self
            .next_event_time()
            .unwrap_or_else(|| &self.state.clock + 1u32);
        self.step_at(t)
    }

    /// Executes the step at time `t`. Every step strictly between the
    /// current clock and `t` must be quiet.
    fn step_at(&mut self, t: BigUint) -> Result<Vec<StepEvent>, SimError> {
        debug_assert!(t > self.state.clock);
        let mut events = Vec::new();

        // rule application
        for i in 0..self.state.neurons.len() {
            let ns = &self.state.neurons[i];
            if !self.enabled[i] || ns.pending_emission.is_some() || ns.fire_eligible_at > t {
                continue;
            }
            let neuron = &self.sys.neurons[i];
            let choices = neuron.applicable_rules(&ns.spikes);
            if self.policy == Policy::Strict && choices.len() > 1 {
                return Err(SimError::AmbiguousChoice {
                    neuron: neuron.id.clone(),
                    step: t,
                    choices: choices.len(),
                });
            }
            let ns = &mut self.state.neurons[i];
            match choices[0] {
                RuleRef::Firing(r) => {
                    let rule = &neuron.firing_rules[r];
                    ns.spikes -= &rule.consume;
                    let emits_at = &t + &rule.delay;
                    ns.fire_eligible_at = &emits_at + 1u32;
                    ns.closed = if rule.delay > BigUint::one() {
                        Some((&t + 1u32, &emits_at - 1u32))
                    } else {
                        None
                    };
                    ns.pending_emission = Some(emits_at.clone());
                    events.push(StepEvent::Fired {
                        neuron: i,
                        rule: r,
                        consumed: rule.consume.clone(),
                        emits_at,
                    });
                }
                RuleRef::Forgetting(r) => {
                    let rule = &neuron.forgetting_rules[r];
                    ns.spikes -= &rule.exact;
                    events.push(StepEvent::Forgot {
                        neuron: i,
                        rule: r,
                        removed: rule.exact.clone(),
                    });
                }
            }
            self.enabled[i] = neuron.has_applicable_rule(&self.state.neurons[i].spikes);
        }

        // release
        let mut incoming: Vec<u64> = vec![0; self.state.neurons.len()];
        for i in 0..self.state.neurons.len() {
            if self.state.neurons[i].pending_emission.as_ref() != Some(&t) {
                continue;
            }
            self.state.neurons[i].pending_emission = None;
            events.push(StepEvent::Emitted { neuron: i });
            if i == self.output {
                self.emissions.push(t.clone());
            }
            for &j in &self.successors[i] {
                incoming[j] += 1;
            }
        }

        // delivery
        for (j, count) in incoming.into_iter().enumerate() {
            if count == 0 {
                continue;
            }
            let ns = &mut self.state.neurons[j];
            let count = BigUint::from(count);
            if ns.is_closed_at(&t) {
                events.push(StepEvent::Lost { neuron: j, count });
            } else {
                ns.inbox += &count;
                events.push(StepEvent::Delivered { neuron: j, count });
            }
        }
        for (j, ns) in self.state.neurons.iter_mut().enumerate() {
            if !ns.inbox.is_zero() {
                ns.spikes += std::mem::take(&mut ns.inbox);
                self.enabled[j] = self.sys.neurons[j].has_applicable_rule(&ns.spikes);
            }
        }

        self.state.clock = t;
        self.steps_executed += 1;
        if !events.is_empty() {
            self.active_steps += 1;
        }
        Ok(events)
    }

    fn finish(self, stop: StopReason) -> SpikeTrace {
        SpikeTrace {
            emissions: self.emissions,
            stop,
            clock: self.state.clock,
            steps_executed: self.steps_executed,
            active_steps: self.active_steps,
        }
    }

    fn stop_after_step(&self, limits: &RunLimits) -> Option<StopReason> {
        if self.is_halted() {
            return Some(StopReason::Halted);
        }
        if limits
            .stop_after_emissions
            .is_some_and(|n| self.emissions.len() >= n)
        {
            return Some(StopReason::EmissionLimit);
        }
        None
    }
}

/// Runs with either engine.
pub fn run(
    sys: &SnpSystem,
    engine: Engine,
    limits: &RunLimits,
    policy: Policy,
) -> Result<SpikeTrace, SimError> {
    match engine {
        Engine::Literal => run_literal(sys, limits, policy),
        Engine::Events => run_events(sys, limits, policy),
    }
}

/// Ticks the clock one step at a time until the system halts or a limit is hit.
pub fn run_literal(
    sys: &SnpSystem,
    limits: &RunLimits,
    policy: Policy,
) -> Result<SpikeTrace, SimError> {
    let mut sim = Simulation::new(sys, policy)?;
    loop {
        if sim.steps_executed >= limits.budget {
            return Ok(sim.finish(StopReason::Budget));
        }
        if limits
            .horizon
            .as_ref()
            .is_some_and(|h| sim.state.clock >= *h)
        {
            return Ok(sim.finish(StopReason::Horizon));
        }
        sim.step()?;
        if let Some(stop) = sim.stop_after_step(limits) {
            return Ok(sim.finish(stop));
        }
    }
}

/// Jumps the clock from event to event; `limits.budget` counts executed
/// event steps.
pub fn run_events(
    sys: &SnpSystem,
    limits: &RunLimits,
    policy: Policy,
) -> Result<SpikeTrace, SimError> {
    let mut sim = Simulation::new(sys, policy)?;
    loop {
        if sim.steps_executed >= limits.budget {
            return Ok(sim.finish(StopReason::Budget));
        }
        let t = sim
            .next_event_time()
            .unwrap_or_else(|| &sim.state.clock + 1u32);
        if limits.horizon.as_ref().is_some_and(|h| t > *h) {
            return Ok(sim.finish(StopReason::Horizon));
        }
        sim.step_at(t)?;
        if let Some(stop) = sim.stop_after_step(limits) {
            return Ok(sim.finish(stop));
        }
    }
}
