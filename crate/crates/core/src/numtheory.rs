//! Modular arithmetic, primality testing and safe-prime group generation.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

/// Miller–Rabin rounds used when nothing else is specified.
pub const DEFAULT_MR_ROUNDS: usize = 40;

/// Smallest accepted bit length for [`gen_group`].
pub const MIN_GROUP_BITS: u64 = 5;

const MAX_GROUP_CANDIDATES: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("{0} has no inverse modulo {1}")]
    NotInvertible(BigUint, BigUint),
    #[error("no safe prime of {bits} bits found after {tried} candidates")]
    GenerationFailed { bits: u64, tried: usize },
}

/// Deterministic, seedable random stream (ChaCha20).
#[derive(Debug, Clone)]
pub struct Rng(ChaCha20Rng);

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Rng(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Seeded from operating-system entropy.
    pub fn from_entropy() -> Self {
        Rng(ChaCha20Rng::from_entropy())
    }

    /// An independent stream derived from this one, for handing to another
    /// owner (a thread, a sub-task).
    pub fn fork(&mut self) -> Self {
        let mut seed = [0u8; 32];
        self.0.fill_bytes(&mut seed);
        Rng(ChaCha20Rng::from_seed(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn fill_bytes(&mut self, buf: &mut [u8]) {
        self.0.fill_bytes(buf)
    }

    /// Uniform in `range`, for small machine-sized choices.
    pub fn range(&mut self, range: std::ops::RangeInclusive<u64>) -> u64 {
        self.0.gen_range(range)
    }
}

/// `base^exp mod modulus`.
pub fn mod_pow(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> Result<BigUint, NumError> {
    if *modulus < BigUint::from(2u32) {
        return Err(NumError::Domain("modulus must be at least 2"));
    }
    Ok(base.modpow(exp, modulus))
}

/// Inverse of `a` modulo `modulus` by the extended Euclidean algorithm.
pub fn mod_inv(a: &BigUint, modulus: &BigUint) -> Result<BigUint, NumError> {
    if *modulus < BigUint::from(2u32) {
        return Err(NumError::Domain("modulus must be at least 2"));
    }
    let m = BigInt::from_biguint(Sign::Plus, modulus.clone());
    let (mut old_r, mut r) = (BigInt::from_biguint(Sign::Plus, a % modulus), m.clone());
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    while !r.is_zero() {
        let q = &old_r / &r;
        let next_r = &old_r - &q * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, next_s);
    }
    if !old_r.is_one() {
        return Err(NumError::NotInvertible(a.clone(), modulus.clone()));
    }
    let inv = old_s.mod_floor(&m);
    debug_assert!(!inv.is_negative());
    Ok(inv
        .to_biguint()
        .expect("reduced representative is non-negative"))
}

/// Uniform in `[0, bound)`: draws `bits(bound - 1)` random bits and rejects
/// values that land outside the range.
pub fn rand_below(bound: &BigUint, rng: &mut Rng) -> BigUint {
    assert!(!bound.is_zero(), "rand_below needs a positive bound");
    if bound.is_one() {
        return BigUint::zero();
    }
    let bits = (bound - 1u32).bits();
    let bytes = bits.div_ceil(8) as usize;
    let excess = (bytes as u64 * 8 - bits) as u32;
    let mut buf = vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xffu8 >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if candidate < *bound {
            return candidate;
        }
    }
}

/// Uniform in `[low, high]`.
pub fn rand_range(low: &BigUint, high: &BigUint, rng: &mut Rng) -> BigUint {
    assert!(low <= high, "empty range");
    low + rand_below(&(high - low + 1u32), rng)
}

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// `Some(verdict)` when trial division by the small primes settles `n`.
fn trial_division(n: &BigUint) -> Option<bool> {
    if *n < BigUint::from(2u32) {
        return Some(false);
    }
    for &p in &SMALL_PRIMES {
        if *n == BigUint::from(p) {
            return Some(true);
        }
        if (n % p).is_zero() {
            return Some(false);
        }
    }
    if *n < BigUint::from(251u32 * 251) {
        return Some(true);
    }
    None
}

/// Trial division by small primes, then Miller–Rabin with `rounds` random
/// bases. `false` is always right; `true` is wrong with probability at most
/// `4^-rounds`.
pub fn is_probable_prime(n: &BigUint, rounds: usize, rng: &mut Rng) -> bool {
    if let Some(verdict) = trial_division(n) {
        return verdict;
    }
    let one = BigUint::one();
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().expect("n - 1 is nonzero");
    let d = &n_minus_1 >> s;
    let two = BigUint::from(2u32);
    let top = n - 2u32;

    'witness: for _ in 0..rounds {
        let a = rand_range(&two, &top, rng);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = &x * &x % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A safe prime `p = 2q' + 1` of exactly `bits` bits and a generator `g` of
/// the full multiplicative group modulo `p`.
pub fn gen_group(bits: u64, rng: &mut Rng) -> Result<(BigUint, BigUint), NumError> {
    if bits < MIN_GROUP_BITS {
        return Err(NumError::Domain("group size below minimum"));
    }
    let one = BigUint::one();
    for _ in 0..MAX_GROUP_CANDIDATES {
        // q' has bits-1 bits with the top bit set, so p = 2q'+1 has exactly `bits`
        let mut q = rand_below(&(&one << (bits - 2)), rng);
        q.set_bit(bits - 2, true);
        if bits > 3 {
            q.set_bit(0, true);
        }
        let p: BigUint = (&q << 1u32) + 1u32;
        // cheap filters first
        if trial_division(&q) == Some(false) || trial_division(&p) == Some(false) {
            continue;
        }
        if !is_probable_prime(&q, 2, rng) || !is_probable_prime(&p, 2, rng) {
            continue;
        }
        if !is_probable_prime(&q, DEFAULT_MR_ROUNDS, rng)
            || !is_probable_prime(&p, DEFAULT_MR_ROUNDS, rng)
        {
            continue;
        }
        let g = find_generator(&p, &q, rng);
        return Ok((p, g));
    }
    Err(NumError::GenerationFailed {
        bits,
        tried: MAX_GROUP_CANDIDATES,
    })
}

/// True when `g` generates `Z_p^*` for the safe prime `p = 2q' + 1`.
pub fn is_safe_prime_generator(g: &BigUint, p: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *g < two || *g > p - 2u32 {
        return false;
    }
    let q = (p - 1u32) >> 1;
    let one = BigUint::one();
    g.modpow(&two, p) != one && g.modpow(&q, p) != one
}

fn find_generator(p: &BigUint, q: &BigUint, rng: &mut Rng) -> BigUint {
    let two = BigUint::from(2u32);
    let top = p - 2u32;
    debug_assert_eq!(&((q << 1u32) + 1u32), p);
    loop {
        let g = rand_range(&two, &top, rng);
        if is_safe_prime_generator(&g, p) {
            return g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn pow_by_multiplication(base: u64, exp: u64, m: u64) -> u64 {
        (0..exp).fold(1 % m, |acc, _| acc * base % m)
    }

    fn is_prime_by_division(n: u64) -> bool {
        n >= 2
            && (2..)
                .take_while(|d| d * d <= n)
                .all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn mod_pow_vectors() {
        assert_eq!(pow_by_multiplication(5, 6, 23), 8);
        assert_eq!(pow_by_multiplication(10, 6, 23), 6);
        assert_eq!(mod_pow(&big(5), &big(6), &big(23)).unwrap(), big(8));
        assert_eq!(mod_pow(&big(10), &big(6), &big(23)).unwrap(), big(6));
        assert_eq!(mod_pow(&big(12345), &big(0), &big(97)).unwrap(), big(1));
        assert!(matches!(
            mod_pow(&big(3), &big(2), &big(1)),
            Err(NumError::Domain(_))
        ));
    }

    #[test]
    fn mod_pow_matches_repeated_multiplication() {
        for m in 2..40u64 {
            for b in 0..m {
                for e in 0..12u64 {
                    assert_eq!(
                        mod_pow(&big(b), &big(e), &big(m)).unwrap(),
                        big(pow_by_multiplication(b, e, m))
                    );
                }
            }
        }
    }

    #[test]
    fn mod_inv_vectors() {
        assert_eq!(mod_inv(&big(6), &big(23)).unwrap(), big(4));
        assert_eq!(mod_inv(&big(12), &big(23)).unwrap(), big(2));
        assert_eq!(mod_inv(&big(1), &big(23)).unwrap(), big(1));
        assert_eq!(mod_inv(&big(30), &big(23)).unwrap(), big(10));
        assert_eq!(
            mod_inv(&big(6), &big(9)),
            Err(NumError::NotInvertible(big(6), big(9)))
        );
        assert!(matches!(
            mod_inv(&big(0), &big(23)),
            Err(NumError::NotInvertible(..))
        ));
    }

    #[test]
    fn small_primes_agree_with_division() {
        let mut rng = Rng::seeded(1);
        for n in 0..5000u64 {
            assert_eq!(
                is_probable_prime(&big(n), 8, &mut rng),
                is_prime_by_division(n),
                "{n}"
            );
        }
        for carmichael in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(
                &big(carmichael),
                DEFAULT_MR_ROUNDS,
                &mut rng
            ));
        }
    }

    #[test]
    fn known_large_primes() {
        let mut rng = Rng::seeded(2);
        let mersenne_127 = (BigUint::one() << 127u32) - 1u32;
        assert!(is_probable_prime(
            &mersenne_127,
            DEFAULT_MR_ROUNDS,
            &mut rng
        ));
        assert!(!is_probable_prime(
            &(&mersenne_127 * 3u32),
            DEFAULT_MR_ROUNDS,
            &mut rng
        ));
        assert!(!is_probable_prime(
            &((BigUint::one() << 128u32) + 1u32),
            DEFAULT_MR_ROUNDS,
            &mut rng
        ));
    }

    #[test]
    fn generator_certificate_for_23() {
        assert_eq!(pow_by_multiplication(5, 2, 23), 2);
        assert_eq!(pow_by_multiplication(5, 11, 23), 22);
        assert!(is_safe_prime_generator(&big(5), &big(23)));
        // 2 is a quadratic residue mod 23
        assert!(!is_safe_prime_generator(&big(2), &big(23)));
    }

    #[test]
    fn five_bit_group_is_23() {
        for seed in 0..5 {
            let (p, g) = gen_group(5, &mut Rng::seeded(seed)).unwrap();
            assert_eq!(p, big(23));
            assert!(is_safe_prime_generator(&g, &p));
        }
        assert!(matches!(
            gen_group(4, &mut Rng::seeded(0)),
            Err(NumError::Domain(_))
        ));
    }

    #[test]
    fn generated_groups_have_exact_size() {
        let mut rng = Rng::seeded(9);
        for bits in [8u64, 12, 16, 32, 64] {
            let (p, g) = gen_group(bits, &mut rng).unwrap();
            assert_eq!(p.bits(), bits);
            assert!(p.is_odd());
            assert!(g >= big(2) && g <= &p - 2u32);
            assert!(is_safe_prime_generator(&g, &p));
            let q = (&p - 1u32) >> 1;
            assert!(is_probable_prime(&q, DEFAULT_MR_ROUNDS, &mut rng));
        }
    }

    #[test]
    fn rand_below_contract() {
        let mut rng = Rng::seeded(3);
        for _ in 0..100 {
            assert_eq!(rand_below(&big(1), &mut rng), big(0));
        }
        let a: Vec<BigUint> = {
            let mut r = Rng::seeded(77);
            (0..20).map(|_| rand_below(&big(1000), &mut r)).collect()
        };
        let b: Vec<BigUint> = {
            let mut r = Rng::seeded(77);
            (0..20).map(|_| rand_below(&big(1000), &mut r)).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().all(|v| *v < big(1000)));
    }

    #[test]
    fn rand_below_is_uniform() {
        // chi-square with 15 degrees of freedom; critical value at 0.001 is 37.697
        let mut rng = Rng::seeded(4);
        let mut counts = [0u32; 16];
        let draws = 10_000;
        for _ in 0..draws {
            let v = rand_below(&big(16), &mut rng);
            counts[usize::try_from(v.to_u32_digits().first().copied().unwrap_or(0)).unwrap()] += 1;
        }
        let expected = draws as f64 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|c| (*c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 37.697, "chi2 = {chi2}");
    }

    #[test]
    fn forked_streams_differ() {
        let mut a = Rng::seeded(5);
        let mut b = a.fork();
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
