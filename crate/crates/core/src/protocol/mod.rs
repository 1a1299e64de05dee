//! Private evaluation of `t1·k + t2` on a remote SN P server.
//!
//! The client encrypts `t1` under randomness `y1`, `k` under `y2` and `t2`
//! under `y1 + y2`, keeps the first components and sends only the second
//! ones. The server runs the linear-function system on those three naturals
//! and returns `t1c·kc + t2c`. Because
//!
//! ```text
//! t1·h^y1 · k·h^y2 + t2·h^(y1+y2) = (t1·k + t2)·h^(y1+y2)  (mod p)
//! ```
//!
//! the client decrypts the pair `(c1_t1·c1_k, c2)` to `t1·k + t2`, provided
//! that value is below `p`.

mod server;
pub mod wire;

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use crate::elgamal::{
    decrypt, encrypt_with, keygen, Ciphertext, ElGamalError, GroupParams, KeyPair,
};
use crate::linfun::{build_pi_add, linfun_oracle, LinParams};
use crate::numtheory::{rand_range, Rng};
use crate::snp::{run, Engine, Policy, RunLimits, SimError, StopReason};

pub use server::{request, serve, Server, ServerConfig, ServerHandle};
pub use wire::{
    decode_request, decode_response, encode_request, encode_response, ErrorCode, Reply, WireError,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("t1·k + t2 must be below p")]
    PlaintextTooLarge,
    #[error("bad request: {0}")]
    BadRequest(&'static str),
    #[error("simulation exceeded its budget of {0} steps")]
    OverBudget(u64),
    #[error("response decrypts from a zero second component")]
    DecryptionDegenerate,
    #[error(transparent)]
    ElGamal(#[from] ElGamalError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("server replied {0}")]
    Remote(WireError),
    #[error("malformed reply: {0}")]
    Wire(WireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ProtocolError {
    /// Code used when this error is reported on the wire.
    pub fn wire_code(&self) -> ErrorCode {
        match self {
            ProtocolError::BadRequest(_) | ProtocolError::PlaintextTooLarge => {
                ErrorCode::ValueRange
            }
            ProtocolError::OverBudget(_) => ErrorCode::OverBudget,
            ProtocolError::Remote(e) | ProtocolError::Wire(e) => e.code,
            _ => ErrorCode::Internal,
        }
    }
}

/// How the server evaluates a request, cheapest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ServerMode {
    /// Plain big-integer arithmetic.
    Closed,
    /// Event-jump simulation.
    Events,
    /// Tick-by-tick simulation.
    Literal,
}

impl ServerMode {
    pub const ALL: [ServerMode; 3] = [ServerMode::Closed, ServerMode::Events, ServerMode::Literal];

    pub fn as_str(self) -> &'static str {
        match self {
            ServerMode::Closed => "closed",
            ServerMode::Events => "events",
            ServerMode::Literal => "literal",
        }
    }
}

impl fmt::Display for ServerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown mode `{0}`")]
pub struct UnknownMode(pub String);

impl FromStr for ServerMode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComputeRequest {
    pub mode: ServerMode,
    pub t1c: BigUint,
    pub t2c: BigUint,
    pub kc: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputeResponse {
    /// `t1c·kc + t2c`, not reduced modulo anything.
    pub c2: BigUint,
    /// Final simulated clock; 0 in closed mode.
    pub ticks: BigUint,
    /// Steps in which the system did something; 0 in closed mode.
    pub events: u64,
}

/// Step limits for the simulating modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    pub literal_ticks: u64,
    pub event_steps: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            literal_ticks: 1 << 22,
            event_steps: 1 << 22,
        }
    }
}

/// Client-side state kept between sending the request and decrypting the
/// reply.
#[derive(Debug, Clone)]
pub struct ClientSession {
    params: GroupParams,
    keys: KeyPair,
    y1: BigUint,
    y2: BigUint,
    plain: LinParams,
    c1_t1: BigUint,
    c1_t2: BigUint,
    c1_k: BigUint,
}

impl ClientSession {
    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn randomness(&self) -> (&BigUint, &BigUint) {
        (&self.y1, &self.y2)
    }

    pub fn plain(&self) -> &LinParams {
        &self.plain
    }

    /// Stored first components of the `t1`, `t2` and `k` ciphertexts.
    pub fn first_components(&self) -> (&BigUint, &BigUint, &BigUint) {
        (&self.c1_t1, &self.c1_t2, &self.c1_k)
    }

    /// The ciphertext of `t1·k + t2` formed from the stored first components
    /// and the server's result.
    pub fn assemble(&self, resp: &ComputeResponse) -> Ciphertext {
        let p = self.params.p();
        let c1 = &self.c1_t1 * &self.c1_k % p;
        debug_assert_eq!(c1, self.c1_t2);
        Ciphertext {
            c1,
            c2: &resp.c2 % p,
        }
    }
}

/// Generates a key pair and fresh randomness, then encrypts the inputs.
pub fn client_prepare(
    params: &GroupParams,
    plain: &LinParams,
    mode: ServerMode,
    rng: &mut Rng,
) -> Result<(ClientSession, ComputeRequest), ProtocolError> {
    check_range(params, plain)?;
    let keys = keygen(params, rng);
    let one = BigUint::from(1u32);
    let top = params.q() - 1u32;
    let (y1, y2) = loop {
        let y1 = rand_range(&one, &top, rng);
        let y2 = rand_range(&one, &top, rng);
        if !((&y1 + &y2) % params.q()).is_zero() {
            break (y1, y2);
        }
    };
    client_prepare_with(params, plain, mode, keys, y1, y2)
}

/// [`client_prepare`] with caller-chosen key pair and randomness.
pub fn client_prepare_with(
    params: &GroupParams,
    plain: &LinParams,
    mode: ServerMode,
    keys: KeyPair,
    y1: BigUint,
    y2: BigUint,
) -> Result<(ClientSession, ComputeRequest), ProtocolError> {
    check_range(params, plain)?;
    let y12 = (&y1 + &y2) % params.q();
    let ct_t1 = encrypt_with(params, &keys.h, plain.t1(), &y1)?;
    let ct_k = encrypt_with(params, &keys.h, plain.k(), &y2)?;
    let ct_t2 = encrypt_with(params, &keys.h, plain.t2(), &y12)?;
    let request = ComputeRequest {
        mode,
        t1c: ct_t1.c2,
        t2c: ct_t2.c2,
        kc: ct_k.c2,
    };
    let session = ClientSession {
        params: params.clone(),
        keys,
        y1,
        y2,
        plain: plain.clone(),
        c1_t1: ct_t1.c1,
        c1_t2: ct_t2.c1,
        c1_k: ct_k.c1,
    };
    Ok((session, request))
}

fn check_range(params: &GroupParams, plain: &LinParams) -> Result<(), ProtocolError> {
    if linfun_oracle(plain) >= *params.p() {
        return Err(ProtocolError::PlaintextTooLarge);
    }
    Ok(())
}

/// Evaluates `t1c·kc + t2c` in the requested mode.
pub fn server_compute(
    req: &ComputeRequest,
    budgets: &Budgets,
) -> Result<ComputeResponse, ProtocolError> {
    let lin = LinParams::new(req.t1c.clone(), req.t2c.clone(), req.kc.clone())
        .map_err(|_| ProtocolError::BadRequest("components must be nonzero"))?;
    let (engine, budget) = match req.mode {
        ServerMode::Closed => {
            return Ok(ComputeResponse {
                c2: linfun_oracle(&lin),
                ticks: BigUint::zero(),
                events: 0,
            })
        }
        ServerMode::Events => (Engine::Events, budgets.event_steps),
        ServerMode::Literal => (Engine::Literal, budgets.literal_ticks),
    };
    let limits = RunLimits {
        stop_after_emissions: Some(2),
        ..RunLimits::budget(budget)
    };
    let trace = run(&build_pi_add(&lin), engine, &limits, Policy::Strict)?;
    match (trace.stop, trace.emissions.as_slice()) {
        (StopReason::EmissionLimit, [first, second]) => Ok(ComputeResponse {
            c2: second - first,
            ticks: trace.clock,
            events: trace.active_steps,
        }),
        (StopReason::Budget, _) => Err(ProtocolError::OverBudget(budget)),
        _ => Err(ProtocolError::BadRequest(
            "system stopped without two output spikes",
        )),
    }
}

/// Decrypts the server's result.
pub fn client_finish(
    session: &ClientSession,
    resp: &ComputeResponse,
) -> Result<BigUint, ProtocolError> {
    let c = session.assemble(resp);
    if c.c2.is_zero() {
        return Err(ProtocolError::DecryptionDegenerate);
    }
    Ok(decrypt(&session.params, &session.keys.x, &c)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn p23() -> GroupParams {
        GroupParams::new(big(23), big(5)).unwrap()
    }

    fn lin(t1: u64, t2: u64, k: u64) -> LinParams {
        LinParams::new(t1, t2, k).unwrap()
    }

    #[test]
    fn prepare_shares_randomness() {
        let params = p23();
        let mut rng = Rng::seeded(7);
        for _ in 0..50 {
            let (s, req) =
                client_prepare(&params, &lin(2, 4, 3), ServerMode::Closed, &mut rng).unwrap();
            for v in [&req.t1c, &req.t2c, &req.kc] {
                assert!(*v >= big(1) && *v < big(23));
            }
            let (c1_t1, c1_t2, c1_k) = s.first_components();
            assert_eq!(c1_t1 * c1_k % 23u32, *c1_t2);
            let (y1, y2) = s.randomness();
            assert!(!((y1 + y2) % 22u32).is_zero());
        }
    }

    #[test]
    fn plaintext_bound() {
        let params = p23();
        let mut rng = Rng::seeded(1);
        assert!(matches!(
            client_prepare(&params, &lin(4, 3, 5), ServerMode::Closed, &mut rng),
            Err(ProtocolError::PlaintextTooLarge)
        ));
        assert!(client_prepare(&params, &lin(4, 2, 5), ServerMode::Closed, &mut rng).is_ok());
    }

    #[test]
    fn server_modes_agree() {
        let b = Budgets::default();
        let req = |mode| ComputeRequest {
            mode,
            t1c: big(3),
            t2c: big(2),
            kc: big(4),
        };
        let lit = server_compute(&req(ServerMode::Literal), &b).unwrap();
        assert_eq!(lit.c2, big(14));
        assert_eq!(lit.ticks, big(15));
        let ev = server_compute(&req(ServerMode::Events), &b).unwrap();
        assert_eq!(ev, lit);
        let closed = server_compute(&req(ServerMode::Closed), &b).unwrap();
        assert_eq!(
            closed,
            ComputeResponse {
                c2: big(14),
                ticks: big(0),
                events: 0
            }
        );
    }

    #[test]
    fn server_rejects_zero_and_overbudget() {
        let b = Budgets::default();
        let zero = ComputeRequest {
            mode: ServerMode::Closed,
            t1c: big(3),
            t2c: big(2),
            kc: big(0),
        };
        assert!(matches!(
            server_compute(&zero, &b),
            Err(ProtocolError::BadRequest(_))
        ));
        let tight = Budgets {
            literal_ticks: 10,
            event_steps: 3,
        };
        for mode in [ServerMode::Literal, ServerMode::Events] {
            let req = ComputeRequest {
                mode,
                t1c: big(3),
                t2c: big(2),
                kc: big(4),
            };
            assert!(matches!(
                server_compute(&req, &tight),
                Err(ProtocolError::OverBudget(_))
            ));
        }
    }

    #[test]
    fn round_trip_p23() {
        let params = p23();
        let mut rng = Rng::seeded(99);
        for (t, want) in [((2, 4, 3), 10), ((1, 1, 1), 2)] {
            let (s, req) =
                client_prepare(&params, &lin(t.0, t.1, t.2), ServerMode::Literal, &mut rng)
                    .unwrap();
            let resp = server_compute(&req, &Budgets::default()).unwrap();
            assert_eq!(client_finish(&s, &resp).unwrap(), big(want));
        }
    }

    #[test]
    fn degenerate_response() {
        let params = p23();
        let (s, _) = client_prepare(
            &params,
            &lin(1, 1, 1),
            ServerMode::Closed,
            &mut Rng::seeded(3),
        )
        .unwrap();
        let resp = ComputeResponse {
            c2: big(46),
            ticks: big(0),
            events: 0,
        };
        assert!(matches!(
            client_finish(&s, &resp),
            Err(ProtocolError::DecryptionDegenerate)
        ));
    }

    #[test]
    fn seeded_requests_are_reproducible() {
        let params = p23();
        let a = client_prepare(
            &params,
            &lin(2, 4, 3),
            ServerMode::Closed,
            &mut Rng::seeded(5),
        )
        .unwrap()
        .1;
        let b = client_prepare(
            &params,
            &lin(2, 4, 3),
            ServerMode::Closed,
            &mut Rng::seeded(5),
        )
        .unwrap()
        .1;
        assert_eq!(encode_request(&a), encode_request(&b));
    }

    #[test]
    fn modes_are_ordered_by_cost() {
        assert!(
            ServerMode::Closed < ServerMode::Events && ServerMode::Events < ServerMode::Literal
        );
        assert_eq!("events".parse::<ServerMode>().unwrap(), ServerMode::Events);
        assert!("warp".parse::<ServerMode>().is_err());
    }
}
