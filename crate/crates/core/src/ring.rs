//! Integer arithmetic over `Z_p` and `Z_{p-1}`.
//!
//! Everything here works on `u64` residues with `u128` intermediates. Primes
//! are capped below `2^61` so products of two residues never overflow, and
//! factorization of `p - 1` is trial division followed by Pollard rho.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest prime accepted by [`PrimeContext::new`] (exclusive).
pub const MAX_PRIME: u64 = 1 << 61;

const MAX_FACTOR_INPUT: u64 = 1 << 63;
const TRIAL_DIVISION_LIMIT: u64 = 1_000_000;

/// Prime factorization as `(prime, exponent)` pairs, primes increasing.
pub type Factorization = Vec<(u64, u32)>;

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    if m <= u32::MAX as u64 {
        // both operands are already reduced below 2^32
        (a % m) * (b % m) % m
    } else {
        ((a as u128 * b as u128) % m as u128) as u64
    }
}

/// `base^exp mod m` by square-and-multiply.
pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> Result<u64> {
    if m == 0 {
        return Err(Error::ZeroInput("pow_mod modulus"));
    }
    if m == 1 {
        return Ok(0);
    }
    let mut base = base % m;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    Ok(acc)
}

/// Infallible power for moduli already known to be nonzero.
#[inline]
pub(crate) fn pow(base: u64, exp: u64, m: u64) -> u64 {
    debug_assert!(m > 0);
    pow_mod(base, exp, m).unwrap_or(0)
}

/// `gcd(0, n) = n`, so `0` lands in the layer of `n` itself.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Inverse of `a` modulo `m`, if it exists. `Z_1` is `{0}` and `0` is its own
/// inverse there.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 0 {
        return None;
    }
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &q in &BASES {
        if n.is_multiple_of(q) {
            return n == q;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_brent(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    for c in 1..n {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut y, mut r, mut q, mut g) = (2u64, 1u64, 1u64, 1u64);
        let mut x = y;
        let mut ys = y;
        const BATCH: u64 = 128;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BATCH.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += BATCH;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
    }
    unreachable!("pollard rho exhausted all increments for {n}")
}

fn split_into(n: u64, primes: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        primes.push(n);
        return;
    }
    let f = pollard_brent(n);
    split_into(f, primes);
    split_into(n / f, primes);
}

pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::ZeroInput("factorize"));
    }
    if n >= MAX_FACTOR_INPUT {
        return Err(Error::OutOfRange {
            what: "factorize input",
            value: n as u128,
            limit: MAX_FACTOR_INPUT as u128,
        });
    }
    let mut rest = n;
    let mut out: Factorization = Vec::new();
    let mut q = 2u64;
    while q <= TRIAL_DIVISION_LIMIT && q * q <= rest {
        if rest.is_multiple_of(q) {
            let mut e = 0;
            while rest.is_multiple_of(q) {
                rest /= q;
                e += 1;
            }
            out.push((q, e));
        }
        q += if q == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        let mut big = Vec::new();
        split_into(rest, &mut big);
        big.sort_unstable();
        for q in big {
            match out.last_mut() {
                Some((last, e)) if *last == q => *e += 1,
                _ => out.push((q, 1)),
            }
        }
    }
    Ok(out)
}

pub fn divisors_from(factors: &[(u64, u32)]) -> Vec<u64> {
    let mut divs = vec![1u64];
    for &(q, e) in factors {
        let len = divs.len();
        let mut power = 1u64;
        for _ in 0..e {
            power *= q;
            for i in 0..len {
                divs.push(divs[i] * power);
            }
        }
    }
    divs.sort_unstable();
    divs
}

/// Number of residues in `Z_n` coprime to `n`; `euler_phi(1) = 1`.
pub fn euler_phi(n: u64) -> u64 {
    assert!(n >= 1, "euler_phi needs n >= 1");
    let factors = factorize(n).expect("n >= 1 and below 2^63");
    factors.iter().fold(n, |acc, &(q, _)| acc / q * (q - 1))
}

fn order_with(x: u64, p: u64, factors: &[(u64, u32)]) -> u64 {
    let mut order = p - 1;
    for &(q, _) in factors {
        while order.is_multiple_of(q) && pow(x, order / q, p) == 1 {
            order /= q;
        }
    }
    order
}

fn smallest_primitive_root(p: u64, factors: &[(u64, u32)]) -> u64 {
    if p == 2 {
        return 1;
    }
    (2..p)
        .find(|&g| factors.iter().all(|&(q, _)| pow(g, (p - 1) / q, p) != 1))
        .expect("every prime has a primitive root")
}

/// Smallest primitive root of `p`. For `p = 2` the group is trivial and `1`
/// is returned.
pub fn find_primitive_root(p: u64) -> Result<u64> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let factors = factorize(p - 1)?;
    Ok(smallest_primitive_root(p, &factors))
}

/// A prime together with everything derived from the structure of `Z_p^*`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeContext {
    p: u64,
    factors: Factorization,
    divisors: Vec<u64>,
    generator: u64,
}

impl PrimeContext {
    pub fn new(p: u64) -> Result<Self> {
        if p >= MAX_PRIME {
            return Err(Error::OutOfRange {
                what: "p",
                value: p as u128,
                limit: MAX_PRIME as u128,
            });
        }
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let factors = factorize(p - 1)?;
        let divisors = divisors_from(&factors);
        let generator = smallest_primitive_root(p, &factors);
        Ok(Self {
            p,
            factors,
            divisors,
            generator,
        })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// `p - 1`, the order of `Z_p^*`.
    #[inline]
    pub fn group_order(&self) -> u64 {
        self.p - 1
    }

    pub fn factorization(&self) -> &[(u64, u32)] {
        &self.factors
    }

    /// Divisors of `p - 1`, ascending.
    pub fn divisors(&self) -> &[u64] {
        &self.divisors
    }

    /// Number of divisors of `p - 1`.
    pub fn tau(&self) -> usize {
        self.divisors.len()
    }

    /// The smallest primitive root.
    #[inline]
    pub fn generator(&self) -> u64 {
        self.generator
    }

    pub fn divides_group_order(&self, n: u64) -> bool {
        n != 0 && (self.p - 1).is_multiple_of(n)
    }

    pub fn multiplicative_order(&self, x: u64) -> Result<u64> {
        let x = x % self.p;
        if x == 0 {
            return Err(Error::NotUnit {
                value: 0,
                modulus: self.p,
            });
        }
        Ok(order_with(x, self.p, &self.factors))
    }

    /// `lambda = g^{(p-1)/T}` for the context's generator `g`.
    pub fn element_of_order(&self, order: u64) -> Result<OrderedElement> {
        if !self.divides_group_order(order) {
            return Err(Error::NotDivisor {
                divisor: order,
                of: self.p - 1,
            });
        }
        let cofactor = (self.p - 1) / order;
        let lambda = pow(self.generator, cofactor, self.p);
        debug_assert_eq!(order_with(lambda, self.p, &self.factors), order);
        Ok(OrderedElement {
            lambda,
            order,
            cofactor,
        })
    }
}

/// An element `lambda` of exact multiplicative order `order`, with
/// `lambda = g^cofactor` and `order * cofactor = p - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedElement {
    pub lambda: u64,
    pub order: u64,
    pub cofactor: u64,
}
