//! One request per TCP connection, one thread per connection.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::wire::{
    decode_request, decode_response, encode_request, encode_response, ErrorCode, Reply, WireError,
    MAX_LINE,
};
use super::{server_compute, Budgets, ComputeRequest, ComputeResponse, ProtocolError, ServerMode};

const IO_TIMEOUT: Duration = Duration::from_secs(30);
const DRAIN_TIMEOUT: Duration = Duration::from_secs(2);
const DRAIN_LIMIT: u64 = 4 * MAX_LINE as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerConfig {
    /// Most expensive mode the server agrees to run; requests asking for a
    /// costlier one get `BAD_MODE`.
    pub max_mode: ServerMode,
    pub budgets: Budgets,
}

impl ServerConfig {
    pub fn new(max_mode: ServerMode) -> Self {
        ServerConfig {
            max_mode,
            budgets: Budgets::default(),
        }
    }

    /// The reply for one request line.
    pub fn handle(&self, line: &[u8]) -> Reply {
        let req = decode_request(line)?;
        if req.mode > self.max_mode {
            return Err(WireError::new(
                ErrorCode::BadMode,
                format!(
                    "mode {} not served here (limit {})",
                    req.mode, self.max_mode
                ),
            ));
        }
        server_compute(&req, &self.budgets)
            .map_err(|e| WireError::new(e.wire_code(), e.to_string()))
    }
}

pub struct Server {
    listener: TcpListener,
    config: ServerConfig,
    stop: Arc<AtomicBool>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, config: ServerConfig) -> io::Result<Self> {
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            config,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until stopped through a [`ServerHandle`].
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let config = self.config;
            thread::spawn(move || {
                let _ = serve_connection(stream, &config);
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::clone(&self.stop);
        let thread = thread::spawn(move || self.run());
        Ok(ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }
}

/// Binds and serves until the process ends.
pub fn serve(addr: impl ToSocketAddrs, config: ServerConfig) -> io::Result<()> {
    Server::bind(addr, config)?.run()
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // wake the blocking accept
            let _ = TcpStream::connect(self.addr);
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

fn serve_connection(stream: TcpStream, config: &ServerConfig) -> io::Result<()> {
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    let mut writer = stream.try_clone()?;
    let reply = match read_line(&stream)? {
        Some(line) => config.handle(&line),
        None => Err(WireError::new(
            ErrorCode::BadSyntax,
            "line too long or unterminated",
        )),
    };
    writer.write_all(&encode_response(&reply))?;
    writer.flush()?;
    writer.shutdown(Shutdown::Write)?;
    // drain, so that closing does not reset the connection under the reply
    stream.set_read_timeout(Some(DRAIN_TIMEOUT))?;
    io::copy(&mut (&stream).take(DRAIN_LIMIT), &mut io::sink())?;
    Ok(())
}

/// Reads one `\n`-terminated line of at most [`MAX_LINE`] bytes; `None` when
/// the peer sends more than that or closes before the terminator.
fn read_line(stream: &TcpStream) -> io::Result<Option<Vec<u8>>> {
    let mut reader = BufReader::new(stream.take(MAX_LINE as u64));
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    Ok(line.ends_with(b"\n").then_some(line))
}

/// Sends one request and waits for the reply.
pub fn request(
    addr: impl ToSocketAddrs,
    req: &ComputeRequest,
) -> Result<ComputeResponse, ProtocolError> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    stream.write_all(&encode_request(req))?;
    stream.flush()?;
    let line = read_line(&stream)?.ok_or_else(|| {
        ProtocolError::Wire(WireError::new(
            ErrorCode::BadSyntax,
            "reply too long or unterminated",
        ))
    })?;
    decode_response(&line)
        .map_err(ProtocolError::Wire)?
        .map_err(ProtocolError::Remote)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn req(mode: ServerMode) -> ComputeRequest {
        ComputeRequest {
            mode,
            t1c: BigUint::from(3u32),
            t2c: BigUint::from(2u32),
            kc: BigUint::from(4u32),
        }
    }

    #[test]
    fn mode_limit() {
        let cfg = ServerConfig::new(ServerMode::Events);
        assert!(cfg
            .handle(&encode_request(&req(ServerMode::Events)))
            .is_ok());
        assert!(cfg
            .handle(&encode_request(&req(ServerMode::Closed)))
            .is_ok());
        let e = cfg
            .handle(&encode_request(&req(ServerMode::Literal)))
            .unwrap_err();
        assert_eq!(e.code, ErrorCode::BadMode);
    }

    #[test]
    fn loopback_literal() {
        let server = Server::bind("127.0.0.1:0", ServerConfig::new(ServerMode::Literal)).unwrap();
        let handle = server.spawn().unwrap();
        let resp = request(handle.local_addr(), &req(ServerMode::Literal)).unwrap();
        assert_eq!(resp.c2, BigUint::from(14u32));
        handle.shutdown();
    }
}
