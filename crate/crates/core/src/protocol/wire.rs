//! Line codec for the request/response exchange.
//!
//! ```text
//! SNPC1 COMPUTE mode=<mode> t1c=<hex> t2c=<hex> kc=<hex>\n
//! SNPC1 RESULT c2=<hex> ticks=<dec> events=<dec>\n
//! SNPC1 ERROR code=<IDENT> msg="<escaped>"\n
//! ```
//!
//! Integers are canonical: lowercase hex or decimal, no leading zeros except
//! for `0` itself. Fields appear in exactly this order.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use super::{ComputeRequest, ComputeResponse, ServerMode};
use crate::elgamal::{hex, parse_hex};

pub const TAG: &str = "SNPC1";
/// Longest accepted line in bytes, terminator included.
pub const MAX_LINE: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    BadSyntax,
    BadMode,
    ValueRange,
    OverBudget,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 5] = [
        ErrorCode::BadSyntax,
        ErrorCode::BadMode,
        ErrorCode::ValueRange,
        ErrorCode::OverBudget,
        ErrorCode::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadSyntax => "BAD_SYNTAX",
            ErrorCode::BadMode => "BAD_MODE",
            ErrorCode::ValueRange => "VALUE_RANGE",
            ErrorCode::OverBudget => "OVERBUDGET",
            ErrorCode::Internal => "INTERNAL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {msg}")]
pub struct WireError {
    pub code: ErrorCode,
    pub msg: String,
}

impl WireError {
    pub fn new(code: ErrorCode, msg: impl Into<String>) -> Self {
        WireError {
            code,
            msg: msg.into(),
        }
    }

    fn syntax(msg: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadSyntax, msg)
    }
}

/// What a server sends back: a result or an error line.
pub type Reply = Result<ComputeResponse, WireError>;

pub fn encode_request(req: &ComputeRequest) -> Vec<u8> {
    format!(
        "{TAG} COMPUTE mode={} t1c={} t2c={} kc={}\n",
        req.mode,
        hex(&req.t1c),
        hex(&req.t2c),
        hex(&req.kc)
    )
    .into_bytes()
}

pub fn decode_request(line: &[u8]) -> Result<ComputeRequest, WireError> {
    let mut fields = Fields::new(line, "COMPUTE")?;
    let mode = fields.value("mode")?;
    let mode = mode
        .parse::<ServerMode>()
        .map_err(|_| WireError::new(ErrorCode::BadMode, format!("unknown mode `{mode}`")))?;
    let t1c = fields.hex("t1c")?;
    let t2c = fields.hex("t2c")?;
    let kc = fields.hex("kc")?;
    fields.end()?;
    for (name, v) in [("t1c", &t1c), ("t2c", &t2c), ("kc", &kc)] {
        if v.is_zero() {
            return Err(WireError::new(
                ErrorCode::ValueRange,
                format!("{name} must be nonzero"),
            ));
        }
    }
    Ok(ComputeRequest { mode, t1c, t2c, kc })
}

pub fn encode_response(reply: &Reply) -> Vec<u8> {
    match reply {
        Ok(r) => format!(
            "{TAG} RESULT c2={} ticks={} events={}\n",
            hex(&r.c2),
            r.ticks,
            r.events
        ),
        Err(e) => format!("{TAG} ERROR code={} msg=\"{}\"\n", e.code, escape(&e.msg)),
    }
    .into_bytes()
}

/// Decodes a server line. The outer error means the line itself is
/// malformed; the inner one is an error the server reported.
pub fn decode_response(line: &[u8]) -> Result<Reply, WireError> {
    let text = line_text(line)?;
    if let Some(rest) = text.strip_prefix(&format!("{TAG} ERROR ")) {
        return decode_error(rest).map(Err);
    }
    let mut fields = Fields::new(line, "RESULT")?;
    let c2 = fields.hex("c2")?;
    let ticks = fields.dec("ticks")?;
    let events = fields.dec("events")?;
    fields.end()?;
    if c2.is_zero() {
        return Err(WireError::new(ErrorCode::ValueRange, "c2 must be nonzero"));
    }
    let events = u64::try_from(&events)
        .map_err(|_| WireError::new(ErrorCode::ValueRange, "events does not fit in 64 bits"))?;
    Ok(Ok(ComputeResponse { c2, ticks, events }))
}

fn decode_error(rest: &str) -> Result<WireError, WireError> {
    let rest = rest
        .strip_prefix("code=")
        .ok_or_else(|| WireError::syntax("expected code="))?;
    let (code, rest) = rest
        .split_once(' ')
        .ok_or_else(|| WireError::syntax("expected msg="))?;
    let code = ErrorCode::parse(code)
        .ok_or_else(|| WireError::syntax(format!("unknown error code `{code}`")))?;
    let quoted = rest
        .strip_prefix("msg=\"")
        .ok_or_else(|| WireError::syntax("expected msg=\""))?;
    let msg = unescape(quoted)?;
    Ok(WireError { code, msg })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Reads up to the closing quote, which must end the line.
fn unescape(s: &str) -> Result<String, WireError> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' if chars.as_str().is_empty() => return Ok(out),
            '"' => return Err(WireError::syntax("text after closing quote")),
            '\\' => match chars.next() {
                Some('\\') => out.push('\\'),
                Some('"') => out.push('"'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                _ => return Err(WireError::syntax("bad escape in msg")),
            },
            c => out.push(c),
        }
    }
    Err(WireError::syntax("unterminated msg"))
}

fn line_text(line: &[u8]) -> Result<&str, WireError> {
    if line.len() > MAX_LINE {
        return Err(WireError::syntax("line too long"));
    }
    let body = line
        .strip_suffix(b"\n")
        .ok_or_else(|| WireError::syntax("missing line terminator"))?;
    let text = std::str::from_utf8(body).map_err(|_| WireError::syntax("line is not UTF-8"))?;
    if text.contains(['\n', '\r']) {
        return Err(WireError::syntax("stray line break"));
    }
    Ok(text)
}

struct Fields<'a> {
    tokens: std::str::Split<'a, char>,
}

impl<'a> Fields<'a> {
    fn new(line: &'a [u8], verb: &str) -> Result<Self, WireError> {
        let mut tokens = line_text(line)?.split(' ');
        if tokens.next() != Some(TAG) {
            return Err(WireError::syntax(format!("expected `{TAG}`")));
        }
        if tokens.next() != Some(verb) {
            return Err(WireError::syntax(format!("expected `{verb}`")));
        }
        Ok(Fields { tokens })
    }

    fn value(&mut self, key: &str) -> Result<&'a str, WireError> {
        self.tokens
            .next()
            .and_then(|t| t.strip_prefix(key))
            .and_then(|t| t.strip_prefix('='))
            .ok_or_else(|| WireError::syntax(format!("expected `{key}=`")))
    }

    fn hex(&mut self, key: &str) -> Result<BigUint, WireError> {
        let v = self.value(key)?;
        parse_hex(v).ok_or_else(|| WireError::syntax(format!("{key}: `{v}` is not canonical hex")))
    }

    fn dec(&mut self, key: &str) -> Result<BigUint, WireError> {
        let v = self.value(key)?;
        let canonical = !v.is_empty()
            && v.bytes().all(|b| b.is_ascii_digit())
            && (v == "0" || !v.starts_with('0'));
        canonical
            .then(|| v.parse().ok())
            .flatten()
            .ok_or_else(|| WireError::syntax(format!("{key}: `{v}` is not canonical decimal")))
    }

    fn end(mut self) -> Result<(), WireError> {
        match self.tokens.next() {
            None => Ok(()),
            Some(t) => Err(WireError::syntax(format!("unexpected `{t}`"))),
        }
    }
}
