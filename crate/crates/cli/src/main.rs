//! `snpc`: simulate SN P systems, manage ElGamal keys, and run the private
//! linear-function protocol as client or server.
//!
//! Plaintexts given on the command line end up in shell history and process
//! listings; do not use this tool with real secrets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use thiserror::Error;

use snpc_core::dsl::parse_system;
use snpc_core::elgamal::{keygen, GroupParams};
use snpc_core::linfun::{eval_linear, events_budget, linfun_oracle, literal_budget, LinParams};
use snpc_core::numtheory::Rng;
use snpc_core::protocol::{
    client_finish, client_prepare, request, Budgets, ProtocolError, Server, ServerConfig,
    ServerMode,
};
use snpc_core::selftest;
use snpc_core::snp::{Engine, Policy, Simulation, StopReason};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Domain(String),
    #[error("network: {0}")]
    Network(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Network(_) => 3,
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Io(_) | ProtocolError::Wire(_) => CliError::Network(e.to_string()),
            e => CliError::Domain(e.to_string()),
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "snpc",
    version,
    about = "Spiking neural P systems and private linear-function evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimMode {
    Literal,
    Events,
}

impl From<SimMode> for Engine {
    fn from(m: SimMode) -> Self {
        match m {
            SimMode::Literal => Engine::Literal,
            SimMode::Events => Engine::Events,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtoMode {
    Literal,
    Events,
    Closed,
}

impl From<ProtoMode> for ServerMode {
    fn from(m: ProtoMode) -> Self {
        match m {
            ProtoMode::Literal => ServerMode::Literal,
            ProtoMode::Events => ServerMode::Events,
            ProtoMode::Closed => ServerMode::Closed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a system from a .snp file and print its output spike times.
    Simulate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "literal")]
        mode: SimMode,
        /// Ticks (literal) or event steps (events) before giving up.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        /// Print every firing, emission and delivery.
        #[arg(long)]
        trace: bool,
    },
    /// Build the linear-function system for t1·k + t2 and run it.
    PiAdd {
        #[arg(long)]
        t1: BigUint,
        #[arg(long)]
        t2: BigUint,
        #[arg(long)]
        k: BigUint,
        #[arg(long, value_enum, default_value = "events")]
        mode: SimMode,
    },
    /// Generate group parameters and a key pair.
    Keygen {
        #[arg(long)]
        bits: u64,
        #[arg(long)]
        out_params: PathBuf,
        #[arg(long)]
        out_pub: PathBuf,
        #[arg(long)]
        out_sec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Answer compute requests over TCP.
    Serve {
        #[arg(long, env = "SNPC_BIND")]
        bind: String,
        /// Most expensive evaluation mode to accept.
        #[arg(long, value_enum)]
        mode: ProtoMode,
        /// Step limit for the simulating modes.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Evaluate t1·k + t2 on a server without revealing the inputs.
    Compute {
        #[arg(long)]
        server: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        t1: BigUint,
        #[arg(long)]
        t2: BigUint,
        #[arg(long)]
        k: BigUint,
        #[arg(long, value_enum, default_value = "closed")]
        mode: ProtoMode,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the embedded acceptance vectors.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn rng(seed: Option<u64>) -> Rng {
    seed.map_or_else(Rng::from_entropy, Rng::seeded)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn simulate(file: &Path, mode: SimMode, budget: u64, trace: bool) -> Result<(), CliError> {
    let sys = parse_system(&read(file)?)
        .map_err(|e| CliError::Domain(format!("{}:{e}", file.display())))?;
    for w in sys.warnings() {
        eprintln!("warning: {w}");
    }
    let mut sim = Simulation::new(&sys, Policy::Strict).map_err(domain)?;
    let stop = loop {
        if sim.is_halted() {
            break StopReason::Halted;
        }
        if sim.steps_executed() >= budget {
            break StopReason::Budget;
        }
        let events = match mode {
            SimMode::Literal => sim.step(),
            SimMode::Events => sim.step_event(),
        }
        .map_err(domain)?;
        if trace {
            for e in &events {
                println!("step {}: {}", sim.state().clock, e.describe(&sys));
            }
        }
    };
    let emissions = sim.emissions();
    let joined = |v: &[BigUint]| {
        v.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("emissions: {}", joined(emissions));
    let intervals: Vec<BigUint> = emissions.windows(2).map(|w| &w[1] - &w[0]).collect();
    match intervals.len() {
        0 => {}
        1 => println!("interval: {}", intervals[0]),
        _ => println!("intervals: {}", joined(&intervals)),
    }
    if stop != StopReason::Halted {
        eprintln!("stopped at step {}: {stop}", sim.state().clock);
    }
    Ok(())
}

fn pi_add(t1: BigUint, t2: BigUint, k: BigUint, mode: SimMode) -> Result<(), CliError> {
    let p = LinParams::new(t1, t2, k).map_err(domain)?;
    let budget = match mode {
        SimMode::Literal => literal_budget(&p),
        SimMode::Events => events_budget(&p),
    }
    .ok_or_else(|| CliError::Domain("parameters too large for this mode".into()))?;
    let v = eval_linear(&p, mode.into(), budget).map_err(domain)?;
    let want = linfun_oracle(&p);
    if v != want {
        return Err(CliError::Domain(format!(
            "simulation gave {v}, expected {want}"
        )));
    }
    println!("{v}");
    Ok(())
}

fn keygen_cmd(
    bits: u64,
    params: &Path,
    public: &Path,
    secret: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut rng = rng(seed);
    let group = GroupParams::generate(bits, &mut rng).map_err(domain)?;
    let keys = keygen(&group, &mut rng);
    write(params, &group.to_file_string())?;
    write(public, &keys.public_file_string())?;
    write(secret, &keys.secret_file_string())?;
    println!("p has {} bits", group.p().bits());
    Ok(())
}

fn serve(bind: &str, mode: ProtoMode, budget: Option<u64>) -> Result<(), CliError> {
    let mut config = ServerConfig::new(mode.into());
    if let Some(n) = budget {
        config.budgets = Budgets {
            literal_ticks: n,
            event_steps: n,
        };
    }
    let server =
        Server::bind(bind, config).map_err(|e| CliError::Network(format!("{bind}: {e}")))?;
    let addr = server
        .local_addr()
        .map_err(|e| CliError::Network(e.to_string()))?;
    eprintln!("listening on {addr}");
    server.run().map_err(|e| CliError::Network(e.to_string()))
}

fn compute(
    server: &str,
    params: &Path,
    t1: BigUint,
    t2: BigUint,
    k: BigUint,
    mode: ProtoMode,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let group = GroupParams::from_file_str(&read(params)?).map_err(domain)?;
    let plain = LinParams::new(t1, t2, k).map_err(domain)?;
    let (session, req) = client_prepare(&group, &plain, mode.into(), &mut rng(seed))?;
    let resp = request(server, &req)?;
    println!("{}", client_finish(&session, &resp)?);
    Ok(())
}

fn run_selftest(seed: Option<u64>) -> Result<(), CliError> {
    let seed = seed.unwrap_or_else(|| Rng::from_entropy().next_u64());
    println!("seed {seed}");
    let results = selftest::run_all(seed);
    for c in &results {
        println!("{c}");
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Domain(format!(
            "{failed} of {} criteria failed",
            results.len()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            file,
            mode,
            budget,
            trace,
        } => simulate(&file, mode, budget, trace),
        Command::PiAdd { t1, t2, k, mode } => pi_add(t1, t2, k, mode),
        Command::Keygen {
            bits,
            out_params,
            out_pub,
            out_sec,
            seed,
        } => keygen_cmd(bits, &out_params, &out_pub, &out_sec, seed),
        Command::Serve { bind, mode, budget } => serve(&bind, mode, budget),
        Command::Compute {
            server,
            params,
            t1,
            t2,
            k,
            mode,
            seed,
        } => compute(&server, &params, t1, t2, k, mode, seed),
        Command::Selftest { seed } => run_selftest(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("snpc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
