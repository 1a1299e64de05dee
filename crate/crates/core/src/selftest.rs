//! Embedded acceptance vectors.
//!
//! [`run_all`] checks every acceptance criterion against oracles that do not
//! share code with the parts under test: length enumeration for patterns,
//! trial division for primality, plain arithmetic for the linear function and
//! for ciphertext recomposition.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::dsl::{parse_system, render_system};
use crate::elgamal::{
    decrypt, encrypt, encrypt_with, hom_add, hom_mul, hom_scale, keygen, Ciphertext, GroupParams,
};
use crate::linfun::{build_pi_add, eval_linear_trace, literal_budget, LinParams};
use crate::numtheory::{is_probable_prime, rand_range, Rng, DEFAULT_MR_ROUNDS};
use crate::protocol::{
    client_finish, client_prepare, decode_request, decode_response, encode_request,
    encode_response, request, ClientSession, ComputeRequest, ComputeResponse, ProtocolError,
    Server, ServerConfig, ServerMode,
};
use crate::snp::{
    FiringRule, ForgettingRule, Neuron, Policy, SimError, Simulation, SnpSystem, SpikePattern,
    StepEvent,
};

/// `(p, g)` pairs of the fixed groups used by the vectors.
pub const GROUP_23: (u64, u64) = (23, 5);
pub const GROUP_10_BIT: (u64, u64) = (983, 5);
pub const GROUP_32_BIT: (u64, u64) = (3_506_632_979, 735_828_863);
pub const GROUP_64_BIT: (u64, u64) = (16_072_378_691_927_563_667, 14_177_919_514_483_483_812);

/// Random systems run for this many clock steps when comparing engines.
pub const RANDOM_SYSTEM_STEPS: u64 = 10_000;
pub const RANDOM_SYSTEMS: usize = 100;
pub const RANDOM_PATTERNS: usize = 200;
/// Patterns are compared with enumeration on counts `0..=PATTERN_LENGTH`.
pub const PATTERN_LENGTH: u64 = 60;

pub fn group(pg: (u64, u64)) -> GroupParams {
    GroupParams::new(pg.0.into(), pg.1.into()).expect("fixed group is valid")
}

#[derive(Debug, Clone)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {} ({}; {:.2?})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed
        )
    }
}

type Outcome = Result<String, String>;

/// Runs all ten criteria; randomized parts are drawn from `seed`.
pub fn run_all(seed: u64) -> Vec<Criterion> {
    let mut out = Vec::new();
    let mut record = |id, name, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (mut passed, mut detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if let Some(limit) = limit.filter(|l| elapsed > *l) {
            passed = false;
            detail = format!("{detail}; slower than {limit:?}");
        }
        out.push(Criterion {
            id,
            name,
            passed,
            detail,
            elapsed,
        });
    };
    let mut exchanges = Vec::new();
    record(
        1,
        "linear-function law, literal engine",
        Some(Duration::from_secs(60)),
        &mut || pi_add_law(),
    );
    record(2, "engine equivalence", None, &mut || {
        engine_equivalence(seed)
    });
    record(3, "pattern compiler vs enumeration", None, &mut || {
        pattern_compiler(seed)
    });
    record(
        4,
        "ElGamal round trip",
        Some(Duration::from_secs(10)),
        &mut || elgamal_round_trip(seed),
    );
    record(5, "homomorphic identities", None, &mut || {
        homomorphisms(seed)
    });
    record(
        6,
        "end-to-end protocol",
        Some(Duration::from_secs(120)),
        &mut || end_to_end(seed, &mut exchanges),
    );
    record(7, "recomposition identity", None, &mut || {
        recomposition(&exchanges)
    });
    record(8, "randomized encryption", None, &mut || {
        randomization(seed)
    });
    record(9, "Miller-Rabin vs trial division", None, &mut || {
        primality(seed)
    });
    record(10, "DSL round trip", None, &mut || dsl_round_trip(seed));
    out
}

fn grid() -> impl Iterator<Item = (u64, u64, u64)> {
    (1..=12).flat_map(|t1| (1..=12).flat_map(move |t2| (1..=12).map(move |k| (t1, t2, k))))
}

fn lin(t1: u64, t2: u64, k: u64) -> LinParams {
    LinParams::new(t1, t2, k).expect("positive parameters")
}

fn pi_add_law() -> Outcome {
    let mut n = 0;
    for (t1, t2, k) in grid() {
        let p = lin(t1, t2, k);
        let budget = literal_budget(&p).expect("small");
        let (v, trace) = eval_linear_trace(&p, crate::snp::Engine::Literal, budget)
            .map_err(|e| format!("({t1},{t2},{k}): {e}"))?;
        let want = t1 * k + t2;
        if trace.emissions != [BigUint::from(1u32), BigUint::from(want + 1)] || v != want.into() {
            return Err(format!("({t1},{t2},{k}): emissions {:?}", trace.emissions));
        }
        n += 1;
    }
    Ok(format!("{n} instances"))
}

/// A random pattern of at most `depth` levels with exponents in `1..=5`.
pub fn random_pattern(rng: &mut Rng, depth: usize, lambda: bool) -> SpikePattern {
    if depth <= 1 || rng.range(0..=3) == 0 {
        if lambda && rng.range(0..=5) == 0 {
            return SpikePattern::Lambda;
        }
        return SpikePattern::atom(rng.range(1..=5));
    }
    let children = |rng: &mut Rng| {
        (0..rng.range(2..=3))
            .map(|_| random_pattern(rng, depth - 1, lambda))
            .collect()
    };
    match rng.range(0..=2) {
        0 => SpikePattern::Concat(children(rng)),
        1 => SpikePattern::Union(children(rng)),
        _ => SpikePattern::plus(random_pattern(rng, depth - 1, lambda)),
    }
}

/// A valid random system with at most 6 neurons and 3 rules per neuron.
pub fn random_system(rng: &mut Rng) -> SnpSystem {
    let n = rng.range(1..=6) as usize;
    let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let output = ids[rng.range(0..=n as u64 - 1) as usize].clone();
    let mut sys = SnpSystem::new("random", output);
    for id in &ids {
        let mut neuron = Neuron::new(id.clone(), rng.range(0..=8));
        for _ in 0..rng.range(0..=3) {
            let delay = rng.range(0..=4);
            neuron = match rng.range(0..=5) {
                0 => neuron.with_forgetting(ForgettingRule::new(rng.range(1..=6))),
                1 => neuron.with_firing(FiringRule::exact(rng.range(1..=4), delay)),
                _ => {
                    let pattern = random_pattern(rng, 3, false);
                    let smallest = pattern
                        .compile()
                        .expect("small pattern")
                        .min()
                        .and_then(|m| m.to_u64())
                        .expect("lambda-free patterns are nonempty");
                    let consume = rng.range(1..=smallest.min(4));
                    neuron.with_firing(FiringRule::new(pattern, consume, delay).expect("compiles"))
                }
            };
        }
        sys = sys.with_neuron(neuron);
    }
    for from in &ids {
        for to in &ids {
            if from != to && rng.range(0..=1) == 0 {
                sys = sys.with_synapse(from.clone(), to.clone());
            }
        }
    }
    debug_assert_eq!(sys.validate(), Ok(()));
    sys
}

/// The systems used by the engine-equivalence and round-trip criteria.
pub fn random_systems(seed: u64) -> Vec<SnpSystem> {
    let mut rng = Rng::seeded(seed ^ 0x5157_e375);
    (0..RANDOM_SYSTEMS)
        .map(|_| random_system(&mut rng))
        .collect()
}

type StepLog = Vec<(BigUint, Vec<StepEvent>)>;

/// Runs both engines up to clock `horizon` under the permissive policy and
/// reports the first difference in their step logs or final state.
pub fn compare_engines(sys: &SnpSystem, horizon: u64) -> Result<(), String> {
    let h = BigUint::from(horizon);
    let err = |e: SimError| e.to_string();

    let mut lit = Simulation::new(sys, Policy::Permissive).map_err(err)?;
    let mut lit_log: StepLog = Vec::new();
    while !lit.is_halted() && lit.state().clock < h {
        let ev = lit.step().map_err(err)?;
        if !ev.is_empty() {
            lit_log.push((lit.state().clock.clone(), ev));
        }
    }

    let mut jump = Simulation::new(sys, Policy::Permissive).map_err(err)?;
    let mut jump_log: StepLog = Vec::new();
    while !jump.is_halted() && jump.next_event_time().is_some_and(|t| t <= h) {
        let ev = jump.step_event().map_err(err)?;
        if !ev.is_empty() {
            jump_log.push((jump.state().clock.clone(), ev));
        }
    }

    if let Some(i) =
        (0..lit_log.len().max(jump_log.len())).find(|&i| lit_log.get(i) != jump_log.get(i))
    {
        return Err(format!(
            "step logs differ at entry {i}: {:?} vs {:?}",
            lit_log.get(i),
            jump_log.get(i)
        ));
    }
    if lit.emissions() != jump.emissions() || lit.is_halted() != jump.is_halted() {
        return Err("emissions or halting differ".into());
    }
    let held = |s: &Simulation| -> Vec<BigUint> {
        s.state()
            .neurons
            .iter()
            .map(|n| &n.spikes + &n.inbox)
            .collect()
    };
    if held(&lit) != held(&jump) {
        return Err("final spike counts differ".into());
    }
    Ok(())
}

fn engine_equivalence(seed: u64) -> Outcome {
    for (t1, t2, k) in grid() {
        let p = lin(t1, t2, k);
        compare_engines(&build_pi_add(&p), literal_budget(&p).expect("small"))
            .map_err(|e| format!("pi_add({t1},{t2},{k}): {e}"))?;
    }
    for (i, sys) in random_systems(seed).iter().enumerate() {
        compare_engines(sys, RANDOM_SYSTEM_STEPS).map_err(|e| format!("random system {i}: {e}"))?;
    }
    Ok(format!(
        "1728 grid instances, {RANDOM_SYSTEMS} random systems"
    ))
}

/// Lengths in `0..=max` of the words of `p`, by direct set construction.
pub fn enumerate_lengths(p: &SpikePattern, max: u64) -> Vec<bool> {
    let size = max as usize + 1;
    let sum = |a: &[bool], b: &[bool]| {
        let mut out = vec![false; size];
        for i in (0..size).filter(|&i| a[i]) {
            for j in (0..size - i).filter(|&j| b[j]) {
                out[i + j] = true;
            }
        }
        out
    };
    match p {
        SpikePattern::Lambda => (0..size).map(|i| i == 0).collect(),
        SpikePattern::Atom(n) => (0..size).map(|i| BigUint::from(i) == *n).collect(),
        SpikePattern::Union(cs) => cs.iter().fold(vec![false; size], |acc, c| {
            acc.iter()
                .zip(enumerate_lengths(c, max))
                .map(|(a, b)| *a || b)
                .collect()
        }),
        SpikePattern::Concat(cs) => {
            let mut acc: Vec<bool> = (0..size).map(|i| i == 0).collect();
            for c in cs {
                acc = sum(&acc, &enumerate_lengths(c, max));
            }
            acc
        }
        SpikePattern::Plus(c) => {
            let once = enumerate_lengths(c, max);
            let mut acc = once.clone();
            loop {
                let next: Vec<bool> = sum(&acc, &once)
                    .iter()
                    .zip(&acc)
                    .map(|(a, b)| *a || *b)
                    .collect();
                if next == acc {
                    return acc;
                }
                acc = next;
            }
        }
    }
}

fn pattern_compiler(seed: u64) -> Outcome {
    let mut rng = Rng::seeded(seed ^ 0x9a77_e2f0);
    for i in 0..RANDOM_PATTERNS {
        let p = random_pattern(&mut rng, 4, true);
        let set = p.compile().map_err(|e| format!("pattern {i} `{p}`: {e}"))?;
        let want = enumerate_lengths(&p, PATTERN_LENGTH);
        if let Some(n) = (0..=PATTERN_LENGTH).find(|&n| set.contains_u64(n) != want[n as usize]) {
            return Err(format!("pattern {i} `{p}` disagrees at {n}"));
        }
    }
    Ok(format!(
        "{RANDOM_PATTERNS} patterns, counts 0..={PATTERN_LENGTH}"
    ))
}

fn elgamal_round_trip(seed: u64) -> Outcome {
    let small = group(GROUP_23);
    let mut n = 0;
    for x in 1..=21u32 {
        let keys =
            crate::elgamal::KeyPair::from_secret(&small, x.into()).map_err(|e| e.to_string())?;
        for m in 1..=22u32 {
            for y in 1..=21u32 {
                let c = encrypt_with(&small, &keys.h, &m.into(), &y.into())
                    .map_err(|e| e.to_string())?;
                if decrypt(&small, &keys.x, &c).map_err(|e| e.to_string())? != m.into() {
                    return Err(format!("p=23 x={x} m={m} y={y}"));
                }
                n += 1;
            }
        }
    }
    let big = group(GROUP_64_BIT);
    let mut rng = Rng::seeded(seed ^ 0xe19a_3a11);
    for i in 0..1000 {
        let keys = keygen(&big, &mut rng);
        let m = rand_range(&1u32.into(), &(big.p() - 1u32), &mut rng);
        let (c, _) = encrypt(&big, &keys.h, &m, &mut rng).map_err(|e| e.to_string())?;
        if decrypt(&big, &keys.x, &c).map_err(|e| e.to_string())? != m {
            return Err(format!("64-bit trial {i}"));
        }
    }
    Ok(format!("{n} exhaustive at p=23, 1000 at 64 bits"))
}

fn homomorphisms(seed: u64) -> Outcome {
    let g = group(GROUP_64_BIT);
    let p = g.p().clone();
    let mut rng = Rng::seeded(seed ^ 0x40_3040);
    let one = BigUint::from(1u32);
    let top = &p - 1u32;
    let e = |e: crate::elgamal::ElGamalError| e.to_string();
    for i in 0..500 {
        let keys = keygen(&g, &mut rng);
        let m1 = rand_range(&one, &top, &mut rng);
        let m2 = rand_range(&one, &top, &mut rng);
        let k = rand_range(&one, &top, &mut rng);
        let (c1, y) = encrypt(&g, &keys.h, &m1, &mut rng).map_err(e)?;
        let (c2, _) = encrypt(&g, &keys.h, &m2, &mut rng).map_err(e)?;
        let shared = encrypt_with(&g, &keys.h, &m2, &y).map_err(e)?;

        let prod = decrypt(&g, &keys.x, &hom_mul(&g, &c1, &c2)).map_err(e)?;
        let scaled = decrypt(&g, &keys.x, &hom_scale(&g, &c1, &k).map_err(e)?).map_err(e)?;
        let sum = decrypt(&g, &keys.x, &hom_add(&g, &c1, &shared).map_err(e)?).map_err(e)?;
        if prod != &m1 * &m2 % &p || scaled != &m1 * &k % &p || sum != (&m1 + &m2) % &p {
            return Err(format!("trial {i}"));
        }
    }
    Ok("500 trials of each operation at 64 bits".into())
}

/// One completed protocol run, kept for the recomposition check.
pub struct Exchange {
    pub session: ClientSession,
    pub request: ComputeRequest,
    pub response: ComputeResponse,
}

fn exchange(
    params: &GroupParams,
    (t1, t2, k): (u64, u64, u64),
    mode: ServerMode,
    rng: &mut Rng,
    send: &dyn Fn(&ComputeRequest) -> Result<ComputeResponse, ProtocolError>,
    log: &mut Vec<Exchange>,
) -> Result<(), String> {
    let ctx = |e: ProtocolError| format!("({t1},{t2},{k}) at p={}: {e}", params.p());
    let (session, request) = client_prepare(params, &lin(t1, t2, k), mode, rng).map_err(ctx)?;
    let response = send(&request).map_err(ctx)?;
    let got = client_finish(&session, &response).map_err(ctx)?;
    if got != BigUint::from(t1 * k + t2) {
        return Err(format!(
            "({t1},{t2},{k}) at p={} recovered {got}",
            params.p()
        ));
    }
    log.push(Exchange {
        session,
        request,
        response,
    });
    Ok(())
}

fn end_to_end(seed: u64, log: &mut Vec<Exchange>) -> Outcome {
    let mut rng = Rng::seeded(seed ^ 0xe2e);
    let config = ServerConfig::new(ServerMode::Literal);

    // (a) every valid triple at p = 23, through the codec in process
    let p23 = group(GROUP_23);
    let in_process = |req: &ComputeRequest| -> Result<ComputeResponse, ProtocolError> {
        let line = encode_response(&config.handle(&encode_request(req)));
        let reply = decode_response(&line).map_err(ProtocolError::Wire)?;
        reply.map_err(ProtocolError::Remote)
    };
    let mut a = 0;
    for t1 in 1..23u64 {
        for k in 1..23u64 {
            for t2 in (1..23u64).filter(|t2| t1 * k + t2 < 23) {
                exchange(
                    &p23,
                    (t1, t2, k),
                    ServerMode::Closed,
                    &mut rng,
                    &in_process,
                    log,
                )?;
                a += 1;
            }
        }
    }
    debug_assert!(decode_request(&encode_request(&log[0].request)).is_ok());

    let server = Server::bind("127.0.0.1:0", config).map_err(|e| e.to_string())?;
    let handle = server.spawn().map_err(|e| e.to_string())?;
    let addr = handle.local_addr();
    let socket = |req: &ComputeRequest| request(addr, req);

    // (b) 32-bit group over the socket
    let p32 = group(GROUP_32_BIT);
    for _ in 0..200 {
        let triple = (
            rng.range(1..=1 << 16),
            rng.range(1..=1 << 20),
            rng.range(1..=1 << 15),
        );
        exchange(&p32, triple, ServerMode::Closed, &mut rng, &socket, log)?;
    }

    // (c) small group, literal simulation of the ciphertext components
    let p10 = group(GROUP_10_BIT);
    let mut ticks = BigUint::from(0u32);
    for _ in 0..24 {
        let triple = (rng.range(1..=30), rng.range(1..=60), rng.range(1..=30));
        exchange(&p10, triple, ServerMode::Literal, &mut rng, &socket, log)?;
        ticks = ticks.max(log.last().expect("just pushed").response.ticks.clone());
    }
    handle.shutdown();
    Ok(format!(
        "{a} at p=23, 200 at 32 bits over TCP, 24 literal at p=983 (max {ticks} ticks)"
    ))
}

fn recomposition(log: &[Exchange]) -> Outcome {
    if log.is_empty() {
        return Err("no exchanges recorded".into());
    }
    for (i, ex) in log.iter().enumerate() {
        let s = &ex.session;
        let params = s.params();
        let (y1, y2) = s.randomness();
        let plain = s.plain();
        let h = &s.keys().h;
        let e = |e: crate::elgamal::ElGamalError| format!("exchange {i}: {e}");
        let ct_t1 = encrypt_with(params, h, plain.t1(), y1).map_err(e)?;
        let ct_k = encrypt_with(params, h, plain.k(), y2).map_err(e)?;
        let ct_t2 = encrypt_with(params, h, plain.t2(), &((y1 + y2) % params.q())).map_err(e)?;
        let want = hom_add(params, &hom_mul(params, &ct_t1, &ct_k), &ct_t2).map_err(e)?;
        let sent = (&ex.request.t1c, &ex.request.t2c, &ex.request.kc);
        if sent != (&ct_t1.c2, &ct_t2.c2, &ct_k.c2) || s.assemble(&ex.response) != want {
            return Err(format!("exchange {i} at p={}", params.p()));
        }
    }
    Ok(format!("{} exchanges", log.len()))
}

fn randomization(seed: u64) -> Outcome {
    let g = group(GROUP_64_BIT);
    let mut rng = Rng::seeded(seed ^ 0x12a4d);
    let keys = keygen(&g, &mut rng);
    let m = BigUint::from(42u32);
    let mut seen: HashSet<Ciphertext> = HashSet::new();
    for _ in 0..1000 {
        seen.insert(
            encrypt(&g, &keys.h, &m, &mut rng)
                .map_err(|e| e.to_string())?
                .0,
        );
    }
    if seen.len() != 1000 {
        return Err(format!("only {} distinct ciphertexts", seen.len()));
    }
    Ok("1000 distinct".into())
}

fn is_prime_by_division(n: u64) -> bool {
    n >= 2
        && (2..)
            .take_while(|d| d * d <= n)
            .all(|d| !n.is_multiple_of(d))
}

fn primality(seed: u64) -> Outcome {
    let mut rng = Rng::seeded(seed ^ 0x9e1);
    let mut primes = 0;
    for n in 0..100_000u64 {
        let want = is_prime_by_division(n);
        if is_probable_prime(&n.into(), DEFAULT_MR_ROUNDS, &mut rng) != want {
            return Err(format!("disagree at {n}"));
        }
        primes += want as usize;
    }
    for n in [561u64, 1105, 1729] {
        if is_probable_prime(&n.into(), DEFAULT_MR_ROUNDS, &mut rng) {
            return Err(format!("Carmichael number {n} passed"));
        }
    }
    Ok(format!("{primes} primes below 10^5"))
}

fn dsl_round_trip(seed: u64) -> Outcome {
    let grid_systems = grid().map(|(t1, t2, k)| build_pi_add(&lin(t1, t2, k)));
    let mut n = 0;
    for sys in grid_systems.chain(random_systems(seed)) {
        let text = render_system(&sys);
        let back = parse_system(&text).map_err(|e| format!("{e} in\n{text}"))?;
        if back != sys {
            return Err(format!("round trip changed\n{text}"));
        }
        n += 1;
    }
    Ok(format!("{n} systems"))
}
