//! Multiplicative ElGamal over `Z_p^*` for a safe prime `p`, with the three
//! ciphertext operations the protocol builds on:
//!
//! * [`hom_mul`]: `(c1·c1', c2·c2')`, decrypts to `m·m'`;
//! * [`hom_scale`]: `(c1, c2·k)`, decrypts to `m·k`;
//! * [`hom_add`]: `(c1, c2 + c2')` for ciphertexts sharing their randomness,
//!   decrypts to `m + m'`.
//!
//! All plaintext arithmetic is modulo `p`. Ciphertexts that share randomness
//! reveal plaintext relations to anyone who sees both, so [`hom_add`] is only
//! for values the caller is prepared to expose in that way.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::numtheory::{
    is_probable_prime, is_safe_prime_generator, mod_inv, rand_range, NumError, Rng,
    DEFAULT_MR_ROUNDS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElGamalError {
    #[error("invalid group parameters: {0}")]
    BadParams(&'static str),
    #[error("message must lie in [1, p-1]")]
    MessageOutOfRange,
    #[error("randomness must lie in [1, q-1]")]
    RandomnessOutOfRange,
    #[error("scalar must lie in [1, p-1]")]
    ScalarOutOfRange,
    #[error("ciphertexts do not share their first component")]
    RandomnessMismatch,
    #[error("ciphertext component out of range")]
    MalformedCiphertext,
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("key file: {0}")]
    KeyFile(String),
}

/// Public group description: prime modulus `p`, generator `g` of `Z_p^*`, and
/// the exponent modulus `q = p - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    g: BigUint,
    q: BigUint,
}

impl GroupParams {
    /// Checks that `p` is a safe prime and `g` generates `Z_p^*`.
    pub fn new(p: BigUint, g: BigUint) -> Result<Self, ElGamalError> {
        // fixed seed: validation must not depend on ambient entropy
        let mut rng = Rng::seeded(0x5afe_9e1e);
        if !is_probable_prime(&p, DEFAULT_MR_ROUNDS, &mut rng) {
            return Err(ElGamalError::BadParams("p is not prime"));
        }
        if p < BigUint::from(5u32) {
            return Err(ElGamalError::BadParams("p is too small"));
        }
        let half = (&p - 1u32) >> 1;
        if !is_probable_prime(&half, DEFAULT_MR_ROUNDS, &mut rng) {
            return Err(ElGamalError::BadParams("p is not a safe prime"));
        }
        if !is_safe_prime_generator(&g, &p) {
            return Err(ElGamalError::BadParams("g does not generate Z_p^*"));
        }
        let q = &p - 1u32;
        Ok(GroupParams { p, g, q })
    }

    pub fn generate(bits: u64, rng: &mut Rng) -> Result<Self, ElGamalError> {
        let (p, g) = crate::numtheory::gen_group(bits, rng)?;
        let q = &p - 1u32;
        Ok(GroupParams { p, g, q })
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    /// `p=<hex>` and `g=<hex>` lines.
    pub fn to_file_string(&self) -> String {
        format!("p={}\ng={}\n", hex(&self.p), hex(&self.g))
    }

    pub fn from_file_str(text: &str) -> Result<Self, ElGamalError> {
        let mut fields = parse_key_file(text, &["p", "g"])?;
        let g = fields.remove("g").expect("required field");
        let p = fields.remove("p").expect("required field");
        GroupParams::new(p, g)
    }

    fn sample_exponent(&self, rng: &mut Rng) -> BigUint {
        rand_range(&BigUint::one(), &(&self.q - 1u32), rng)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    /// Secret exponent in `[1, q-1]`.
    pub x: BigUint,
    /// Public value `g^x mod p`.
    pub h: BigUint,
}

impl KeyPair {
    pub fn from_secret(params: &GroupParams, x: BigUint) -> Result<Self, ElGamalError> {
        if x.is_zero() || x >= params.q {
            return Err(ElGamalError::RandomnessOutOfRange);
        }
        let h = params.g.modpow(&x, &params.p);
        Ok(KeyPair { x, h })
    }

    pub fn public_file_string(&self) -> String {
        format!("h={}\n", hex(&self.h))
    }

    pub fn secret_file_string(&self) -> String {
        format!("x={}\n", hex(&self.x))
    }

    pub fn public_from_file_str(text: &str) -> Result<BigUint, ElGamalError> {
        Ok(parse_key_file(text, &["h"])?
            .remove("h")
            .expect("required field"))
    }

    pub fn secret_from_file_str(params: &GroupParams, text: &str) -> Result<Self, ElGamalError> {
        let x = parse_key_file(text, &["x"])?
            .remove("x")
            .expect("required field");
        KeyPair::from_secret(params, x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    pub c1: BigUint,
    pub c2: BigUint,
}

impl Ciphertext {
    /// Accepts `c1` in `[1, p-1]` and `c2` in `[0, p-1]`; `c2 = 0` only
    /// arises from [`hom_add`] of plaintexts summing to `p`.
    pub fn new(params: &GroupParams, c1: BigUint, c2: BigUint) -> Result<Self, ElGamalError> {
        if c1.is_zero() || c1 >= params.p || c2 >= params.p {
            return Err(ElGamalError::MalformedCiphertext);
        }
        Ok(Ciphertext { c1, c2 })
    }
}

/// Draws `x` uniformly from `[1, q-1]`.
pub fn keygen(params: &GroupParams, rng: &mut Rng) -> KeyPair {
    let x = params.sample_exponent(rng);
    let h = params.g.modpow(&x, &params.p);
    KeyPair { x, h }
}

/// `(g^y, m·h^y) mod p`.
pub fn encrypt_with(
    params: &GroupParams,
    h: &BigUint,
    m: &BigUint,
    y: &BigUint,
) -> Result<Ciphertext, ElGamalError> {
    if m.is_zero() || *m >= params.p {
        return Err(ElGamalError::MessageOutOfRange);
    }
    if y.is_zero() || *y >= params.q {
        return Err(ElGamalError::RandomnessOutOfRange);
    }
    let c1 = params.g.modpow(y, &params.p);
    let c2 = m * h.modpow(y, &params.p) % &params.p;
    Ok(Ciphertext { c1, c2 })
}

/// Encrypts under fresh randomness and hands the randomness back.
pub fn encrypt(
    params: &GroupParams,
    h: &BigUint,
    m: &BigUint,
    rng: &mut Rng,
) -> Result<(Ciphertext, BigUint), ElGamalError> {
    let y = params.sample_exponent(rng);
    Ok((encrypt_with(params, h, m, &y)?, y))
}

/// `c2 · (c1^x)^-1 mod p`.
pub fn decrypt(params: &GroupParams, x: &BigUint, c: &Ciphertext) -> Result<BigUint, ElGamalError> {
    let shared = c.c1.modpow(x, &params.p);
    let inv = mod_inv(&shared, &params.p)?;
    Ok(&c.c2 * inv % &params.p)
}

pub fn hom_mul(params: &GroupParams, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
    Ciphertext {
        c1: &a.c1 * &b.c1 % &params.p,
        c2: &a.c2 * &b.c2 % &params.p,
    }
}

pub fn hom_scale(
    params: &GroupParams,
    c: &Ciphertext,
    k: &BigUint,
) -> Result<Ciphertext, ElGamalError> {
    if k.is_zero() || *k >= params.p {
        return Err(ElGamalError::ScalarOutOfRange);
    }
    Ok(Ciphertext {
        c1: c.c1.clone(),
        c2: &c.c2 * k % &params.p,
    })
}

pub fn hom_add(
    params: &GroupParams,
    a: &Ciphertext,
    b: &Ciphertext,
) -> Result<Ciphertext, ElGamalError> {
    if a.c1 != b.c1 {
        return Err(ElGamalError::RandomnessMismatch);
    }
    Ok(Ciphertext {
        c1: a.c1.clone(),
        c2: (&a.c2 + &b.c2) % &params.p,
    })
}

/// Lowercase hex without leading zeros; zero is `0`.
pub fn hex(n: &BigUint) -> String {
    n.to_str_radix(16)
}

/// Inverse of [`hex`]; rejects uppercase, prefixes, leading zeros and empty input.
pub fn parse_hex(s: &str) -> Option<BigUint> {
    let canonical = !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        && (s == "0" || !s.starts_with('0'));
    if !canonical {
        return None;
    }
    BigUint::parse_bytes(s.as_bytes(), 16)
}

/// Reads `name=hex` lines; every name in `required` must appear exactly once
/// and nothing else may.
fn parse_key_file(
    text: &str,
    required: &[&str],
) -> Result<BTreeMap<String, BigUint>, ElGamalError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((name, value)) = line.split_once('=') else {
            return Err(ElGamalError::KeyFile(format!(
                "line {}: expected name=value",
                i + 1
            )));
        };
        if !required.contains(&name) {
            return Err(ElGamalError::KeyFile(format!(
                "line {}: unexpected field `{name}`",
                i + 1
            )));
        }
        let Some(v) = parse_hex(value) else {
            return Err(ElGamalError::KeyFile(format!(
                "line {}: `{value}` is not canonical hex",
                i + 1
            )));
        };
        if out.insert(name.to_string(), v).is_some() {
            return Err(ElGamalError::KeyFile(format!(
                "line {}: duplicate field `{name}`",
                i + 1
            )));
        }
    }
    for name in required {
        if !out.contains_key(*name) {
            return Err(ElGamalError::KeyFile(format!("missing field `{name}`")));
        }
    }
    Ok(out)
}
