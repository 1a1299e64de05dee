use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::thread;

use num_bigint::BigUint;
use proptest::prelude::*;
use snpc_core::elgamal::KeyPair;
use snpc_core::linfun::{linfun_oracle, LinParams};
use snpc_core::numtheory::Rng;
use snpc_core::protocol::wire::MAX_LINE;
use snpc_core::protocol::{
    client_finish, client_prepare, client_prepare_with, decode_request, decode_response,
    encode_request, encode_response, request, server_compute, Budgets, ComputeRequest,
    ComputeResponse, ErrorCode, ProtocolError, Reply, Server, ServerConfig, ServerMode, WireError,
};
use snpc_core::selftest::{group, GROUP_10_BIT, GROUP_23};

fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

fn lin(t1: u64, t2: u64, k: u64) -> LinParams {
    LinParams::new(t1, t2, k).unwrap()
}

fn natural() -> impl Strategy<Value = BigUint> {
    prop::collection::vec(any::<u8>(), 0..40).prop_map(|b| BigUint::from_bytes_be(&b))
}

fn positive() -> impl Strategy<Value = BigUint> {
    natural().prop_map(|n| n + 1u32)
}

fn mode() -> impl Strategy<Value = ServerMode> {
    prop::sample::select(ServerMode::ALL.to_vec())
}

fn code() -> impl Strategy<Value = ErrorCode> {
    prop::sample::select(ErrorCode::ALL.to_vec())
}

proptest! {
    #[test]
    fn requests_round_trip(mode in mode(), t1c in positive(), t2c in positive(), kc in positive()) {
        let req = ComputeRequest { mode, t1c, t2c, kc };
        let line = encode_request(&req);
        prop_assert!(line.ends_with(b"\n"));
        prop_assert_eq!(decode_request(&line).unwrap(), req);
    }

    #[test]
    fn results_round_trip(c2 in positive(), ticks in natural(), events in any::<u64>()) {
        let reply: Reply = Ok(ComputeResponse { c2, ticks, events });
        prop_assert_eq!(decode_response(&encode_response(&reply)).unwrap(), reply);
    }

    #[test]
    fn errors_round_trip(code in code(), msg in "\\PC*|[\"\\\\\n\r ]{0,8}") {
        let reply: Reply = Err(WireError::new(code, msg));
        let line = encode_response(&reply);
        prop_assert_eq!(line.iter().filter(|&&b| b == b'\n').count(), 1);
        prop_assert_eq!(decode_response(&line).unwrap(), reply);
    }

    #[test]
    fn decoders_reject_garbage_without_panicking(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode_request(&bytes);
        let _ = decode_response(&bytes);
    }

    #[test]
    fn hex_is_canonical(n in natural()) {
        let line = String::from_utf8(encode_response(&Ok(ComputeResponse { c2: n.clone() + 1u32, ticks: big(0), events: 0 }))).unwrap();
        let hex = line.split(' ').nth(2).unwrap().strip_prefix("c2=").unwrap();
        prop_assert!(hex == "1" || !hex.starts_with('0'));
        prop_assert!(hex.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)));
    }
}

#[test]
fn modes_agree_at_a_small_prime() {
    let params = group(GROUP_10_BIT);
    let mut rng = Rng::seeded(41);
    let budgets = Budgets::default();
    for _ in 0..12 {
        let plain = lin(rng.range(1..=30), rng.range(1..=40), rng.range(1..=30));
        let (session, req) =
            client_prepare(&params, &plain, ServerMode::Literal, &mut rng).unwrap();
        let at = |mode| {
            server_compute(
                &ComputeRequest {
                    mode,
                    ..req.clone()
                },
                &budgets,
            )
            .unwrap()
        };
        let (lit, ev, closed) = (
            at(ServerMode::Literal),
            at(ServerMode::Events),
            at(ServerMode::Closed),
        );
        assert_eq!(lit, ev);
        assert_eq!(lit.c2, closed.c2);
        assert_eq!(lit.c2, &req.t1c * &req.kc + &req.t2c);
        assert_eq!(lit.ticks, &lit.c2 + 1u32);
        assert_eq!(
            client_finish(&session, &closed).unwrap(),
            linfun_oracle(&plain)
        );
    }
}

#[test]
fn transcripts_do_not_determine_plaintexts() {
    let params = group(GROUP_23);
    let keys = KeyPair::from_secret(&params, big(9)).unwrap();
    type Run = ((u64, u64, u64), u64, u64);
    let prepare = |((t1, t2, k), y1, y2): Run| {
        client_prepare_with(
            &params,
            &lin(t1, t2, k),
            ServerMode::Closed,
            keys.clone(),
            big(y1),
            big(y2),
        )
        .unwrap()
    };
    let mut seen: HashMap<Vec<u8>, Run> = HashMap::new();
    let mut collision = None;
    'search: for t1 in 1..23u64 {
        for k in 1..23u64 {
            for t2 in (1..23u64).filter(|t2| t1 * k + t2 < 23) {
                for y1 in 1..22u64 {
                    for y2 in (1..22u64).filter(|y2| (y1 + y2) % 22 != 0) {
                        let run = ((t1, t2, k), y1, y2);
                        let line = encode_request(&prepare(run).1);
                        match seen.get(&line) {
                            Some(&other) if other.0 != run.0 => {
                                collision = Some((other, run));
                                break 'search;
                            }
                            _ => {
                                seen.insert(line, run);
                            }
                        }
                    }
                }
            }
        }
    }
    let (a, b) = collision.expect("two plaintext triples share a request");
    let ((sa, ra), (sb, rb)) = (prepare(a), prepare(b));
    assert_ne!(a.0, b.0);
    assert_eq!(encode_request(&ra), encode_request(&rb));
    // the same server answer decrypts to each side's own value
    let resp = server_compute(&ra, &Budgets::default()).unwrap();
    for (session, (t1, t2, k)) in [(sa, a.0), (sb, b.0)] {
        assert_eq!(client_finish(&session, &resp).unwrap(), big(t1 * k + t2));
    }
}

#[test]
fn concurrent_clients_get_their_own_answers() {
    let handle = Server::bind("127.0.0.1:0", ServerConfig::new(ServerMode::Literal))
        .unwrap()
        .spawn()
        .unwrap();
    let addr = handle.local_addr();
    let params = group(GROUP_10_BIT);
    let workers: Vec<_> = (0..8u64)
        .map(|i| {
            let params = params.clone();
            thread::spawn(move || {
                let mut rng = Rng::seeded(100 + i);
                for j in 0..5 {
                    let plain = lin(i + 1, j + 1, 2 + i % 3);
                    let mode = ServerMode::ALL[(i + j) as usize % 3];
                    let (session, req) = client_prepare(&params, &plain, mode, &mut rng).unwrap();
                    let resp = request(addr, &req).unwrap();
                    assert_eq!(
                        client_finish(&session, &resp).unwrap(),
                        big((i + 1) * (2 + i % 3) + j + 1)
                    );
                }
            })
        })
        .collect();
    for w in workers {
        w.join().unwrap();
    }
    handle.shutdown();
}

fn raw_exchange(addr: std::net::SocketAddr, payload: Vec<u8>) -> Reply {
    let mut stream = TcpStream::connect(addr).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let sender = thread::spawn(move || {
        let _ = writer.write_all(&payload);
    });
    let mut line = Vec::new();
    BufReader::new(&mut stream)
        .read_until(b'\n', &mut line)
        .unwrap();
    drop(stream);
    sender.join().unwrap();
    decode_response(&line).unwrap()
}

#[test]
fn malformed_traffic_gets_error_lines() {
    let handle = Server::bind("127.0.0.1:0", ServerConfig::new(ServerMode::Closed))
        .unwrap()
        .spawn()
        .unwrap();
    let addr = handle.local_addr();

    let mut oversized = b"SNPC1 COMPUTE mode=closed t1c=".to_vec();
    oversized.resize(MAX_LINE + 4096, b'1');
    oversized.push(b'\n');
    assert_eq!(
        raw_exchange(addr, oversized).unwrap_err().code,
        ErrorCode::BadSyntax
    );

    let warp = b"SNPC1 COMPUTE mode=warp t1c=3 t2c=2 kc=4\n".to_vec();
    assert_eq!(
        raw_exchange(addr, warp).unwrap_err().code,
        ErrorCode::BadMode
    );

    let literal = encode_request(&ComputeRequest {
        mode: ServerMode::Literal,
        t1c: big(3),
        t2c: big(2),
        kc: big(4),
    });
    assert_eq!(
        raw_exchange(addr, literal).unwrap_err().code,
        ErrorCode::BadMode
    );

    let zero = b"SNPC1 COMPUTE mode=closed t1c=3 t2c=2 kc=0\n".to_vec();
    assert_eq!(
        raw_exchange(addr, zero).unwrap_err().code,
        ErrorCode::ValueRange
    );

    let ok = b"SNPC1 COMPUTE mode=closed t1c=3 t2c=2 kc=4\n".to_vec();
    assert_eq!(
        raw_exchange(addr, ok).unwrap(),
        ComputeResponse {
            c2: big(14),
            ticks: big(0),
            events: 0
        }
    );
    handle.shutdown();
}

#[test]
fn budget_overrun_is_reported_as_overbudget() {
    let mut config = ServerConfig::new(ServerMode::Literal);
    config.budgets = Budgets {
        literal_ticks: 100,
        event_steps: 100,
    };
    let handle = Server::bind("127.0.0.1:0", config)
        .unwrap()
        .spawn()
        .unwrap();
    let req = ComputeRequest {
        mode: ServerMode::Literal,
        t1c: big(50),
        t2c: big(2),
        kc: big(4),
    };
    match request(handle.local_addr(), &req) {
        Err(ProtocolError::Remote(e)) => assert_eq!(e.code, ErrorCode::OverBudget),
        other => panic!("unexpected {other:?}"),
    }
    let req = ComputeRequest {
        mode: ServerMode::Events,
        t1c: big(50),
        t2c: big(2),
        kc: big(400),
    };
    assert!(
        matches!(request(handle.local_addr(), &req), Err(ProtocolError::Remote(e)) if e.code == ErrorCode::OverBudget)
    );
    handle.shutdown();
}

#[test]
fn example_exchange_at_23() {
    let params = group(GROUP_23);
    let mut rng = Rng::seeded(2);
    let (session, req) =
        client_prepare(&params, &lin(2, 4, 3), ServerMode::Closed, &mut rng).unwrap();
    let (c1_t1, c1_t2, c1_k) = session.first_components();
    assert_eq!(c1_t1 * c1_k % 23u32, *c1_t2);
    let resp = server_compute(&req, &Budgets::default()).unwrap();
    assert_eq!(client_finish(&session, &resp).unwrap(), big(10));
}
