//! Primes, factorization, divisor-function point values and sieves, and the
//! `sigma_k` / `H_{k,j}` machinery everything else consumes.
//!
//! Divisor functions are handled through their prime-power values
//! `tau_k(p^j) = C(k+j-1, j)` and multiplicativity. Bulk evaluation uses a
//! smallest-prime-factor linear sieve for ranges starting at 1 and a
//! segmented factorization sieve (primes up to sqrt(hi)) for ranges that do
//! not. Both produce identical, deterministic tables.

use num::bigint::{BigInt, BigUint};
use num::integer::binomial;
use num::traits::{One, Pow, ToPrimitive, Zero};
use num::BigRational;

use crate::error::{Error, Result};
use crate::DEFAULT_MEMORY_CAP;

/// A prime together with a positive exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimePower {
    pub p: u64,
    pub alpha: u32,
}

/// A positive integer carried with its canonical factorization,
/// primes strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredInteger {
    value: u64,
    factors: Vec<PrimePower>,
}

impl FactoredInteger {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[PrimePower] {
        &self.factors
    }

    /// Exponent of `p` in the factorization (0 if `p` does not divide).
    pub fn ord(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|f| f.p == p)
            .map(|f| f.alpha)
            .unwrap_or(0)
    }

    /// All divisors, unsorted count-bounded enumeration from the factorization.
    pub fn divisors(&self) -> Vec<u64> {
        let mut out = vec![1u64];
        for f in &self.factors {
            let prev = out.len();
            let mut q = 1u64;
            for _ in 0..f.alpha {
                q *= f.p;
                for i in 0..prev {
                    out.push(out[i] * q);
                }
            }
        }
        out
    }
}

/// Deterministic Miller-Rabin, exact for all `n < 2^64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    // This witness set is complete below 2^64.
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a % n, d, n);
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

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// All primes in `[2, limit]`, ascending.
pub fn primes_up_to(limit: u64) -> Result<Vec<u64>> {
    if limit < 2 {
        return Err(Error::Domain(format!(
            "primes_up_to requires limit >= 2, got {limit}"
        )));
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    Ok(primes)
}

fn pollard_rho(n: u64) -> u64 {
    // Brent's cycle variant; n must be composite, odd, > 1.
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let mut x = 2u64;
        let mut y = 2u64;
        let mut d = 1u64;
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd_u64(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Canonical factorization of `n >= 1`. `n = 1` yields an empty factor list.
pub fn factorize(n: u64) -> Result<FactoredInteger> {
    if n == 0 {
        return Err(Error::Domain("factorize requires n >= 1".into()));
    }
    let mut rest = n;
    let mut factors: Vec<PrimePower> = Vec::new();
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31] {
        if rest == 1 {
            break;
        }
        if rest % p == 0 {
            let mut a = 0u32;
            while rest % p == 0 {
                rest /= p;
                a += 1;
            }
            factors.push(PrimePower { p, alpha: a });
        }
    }
    // Trial division up to a small bound, then rho on what remains.
    let mut d = 37u64;
    while d <= 100_000 && d * d <= rest {
        if rest % d == 0 {
            let mut a = 0u32;
            while rest % d == 0 {
                rest /= d;
                a += 1;
            }
            factors.push(PrimePower { p: d, alpha: a });
        }
        d += 2;
    }
    let mut large: Vec<u64> = Vec::new();
    let mut stack = vec![rest];
    while let Some(m) = stack.pop() {
        if m == 1 {
            continue;
        }
        if is_prime(m) {
            large.push(m);
        } else {
            let f = pollard_rho(m);
            stack.push(f);
            stack.push(m / f);
        }
    }
    large.sort_unstable();
    let mut i = 0;
    while i < large.len() {
        let p = large[i];
        let mut a = 0u32;
        while i < large.len() && large[i] == p {
            a += 1;
            i += 1;
        }
        factors.push(PrimePower { p, alpha: a });
    }
    factors.sort_by_key(|f| f.p);
    debug_assert_eq!(
        factors
            .iter()
            .map(|f| f.p.pow(f.alpha))
            .product::<u64>()
            .max(1),
        n
    );
    Ok(FactoredInteger { value: n, factors })
}

/// Binomial coefficient with the two extra conventions used throughout:
/// `C(-1, 0) = 1` and `C(m-1, m) = 0` for `m >= 1` (more generally, zero
/// whenever `0 <= n < m`).
pub fn binom_conv(n: i64, m: u32) -> BigUint {
    if m == 0 {
        // C(n, 0) = 1, including the n = -1 convention.
        return BigUint::one();
    }
    if n < m as i64 {
        return BigUint::zero();
    }
    binomial(BigUint::from(n as u64), BigUint::from(m))
}

/// `tau_k(p^j) = C(k+j-1, j)`, independent of the prime.
pub fn tau_pp(k: u32, j: u32) -> Result<u64> {
    if k == 0 {
        return Err(Error::Domain("tau_pp requires k >= 1".into()));
    }
    binom_conv(k as i64 + j as i64 - 1, j)
        .to_u64()
        .ok_or_else(|| Error::Overflow(format!("tau_{k}(p^{j}) exceeds u64")))
}

/// Internal prime-power divisor value; also defined at k = 0, where
/// `tau_0(p^j)` is 1 at j = 0 and 0 otherwise.
pub(crate) fn tau_pp_u(k: u32, j: u32) -> u64 {
    if k == 0 {
        return (j == 0) as u64;
    }
    // C(k-1+j, j) by an exact running product; prefixes are integers.
    let mut acc = 1u64;
    for t in 1..=j as u64 {
        acc = acc
            .checked_mul(k as u64 - 1 + t)
            .expect("tau_pp_u overflow")
            / t;
    }
    acc
}

/// `tau_k(n)` from a factorization, by multiplicativity.
pub fn tau_point(k: u32, n: &FactoredInteger) -> u64 {
    assert!(k >= 1, "tau_point requires k >= 1");
    n.factors
        .iter()
        .map(|f| tau_pp_u(k, f.alpha))
        .product::<u64>()
}

/// Dense table of `tau_k` over a contiguous range.
#[derive(Debug, Clone)]
pub struct DivisorTable {
    k: u32,
    lo: u64,
    hi: u64,
    values: Vec<u32>,
}

impl DivisorTable {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    /// `tau_k(n)`; `n` must lie in `[lo, hi]`.
    #[inline]
    pub fn get(&self, n: u64) -> u64 {
        self.values[(n - self.lo) as usize] as u64
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }
}

/// Bytes the sieve backing `tau_sieve(k, lo, hi)` will allocate, including
/// transient arrays.
pub fn sieve_bytes_estimate(lo: u64, hi: u64) -> u64 {
    if lo == 1 {
        // values (u32) + per-index smallest-prime exponents (u8) + prime list.
        let n = hi + 1;
        let primes_est = if hi < 16 {
            8
        } else {
            (hi as f64 / (hi as f64).ln() * 1.3) as u64
        };
        5 * n + 4 * primes_est
    } else {
        // values (u32) + residual cofactors (u64) + primes below sqrt(hi).
        let len = hi - lo + 1;
        let s = (hi as f64).sqrt();
        12 * len + 8 * ((s / s.max(3.0).ln() * 1.3) as u64 + 16)
    }
}

/// Sieve `tau_k` over `[lo, hi]` under the default 4 GiB budget.
pub fn tau_sieve(k: u32, lo: u64, hi: u64) -> Result<DivisorTable> {
    tau_sieve_with_cap(k, lo, hi, DEFAULT_MEMORY_CAP)
}

/// Sieve `tau_k` over `[lo, hi]` under an explicit memory budget in bytes.
pub fn tau_sieve_with_cap(k: u32, lo: u64, hi: u64, cap_bytes: u64) -> Result<DivisorTable> {
    if k == 0 {
        return Err(Error::Domain("tau_sieve requires k >= 1".into()));
    }
    if lo < 1 || lo > hi {
        return Err(Error::Domain(format!(
            "tau_sieve requires 1 <= lo <= hi, got [{lo}, {hi}]"
        )));
    }
    let required = sieve_bytes_estimate(lo, hi);
    if required > cap_bytes {
        return Err(Error::Resource {
            required,
            cap: cap_bytes,
        });
    }
    let values = if lo == 1 {
        linear_sieve(k, hi)
    } else {
        segment_sieve(k, lo, hi)?
    };
    Ok(DivisorTable { k, lo, hi, values })
}

/// Smallest-prime-factor linear sieve; index 0 of the result is tau_k(1).
fn linear_sieve(k: u32, hi: u64) -> Vec<u32> {
    let n = hi as usize;
    let mut tau = vec![0u32; n + 1];
    tau[1] = 1;
    if k == 1 {
        for v in tau.iter_mut().skip(1) {
            *v = 1;
        }
        let mut out = tau;
        out.remove(0);
        return out;
    }
    let mut cnt = vec![0u8; n + 1];
    let mut primes: Vec<u32> = Vec::new();
    for i in 2..=n {
        if tau[i] == 0 {
            tau[i] = k;
            cnt[i] = 1;
            primes.push(i as u32);
        }
        let ti = tau[i] as u64;
        let ci = cnt[i] as u32;
        for &p in &primes {
            let p = p as usize;
            let m = match i.checked_mul(p) {
                Some(m) if m <= n => m,
                _ => break,
            };
            if i % p == 0 {
                cnt[m] = cnt[i] + 1;
                let v = ti / tau_pp_u(k, ci) * tau_pp_u(k, ci + 1);
                debug_assert!(v <= u32::MAX as u64);
                tau[m] = v as u32;
                break;
            } else {
                cnt[m] = 1;
                let v = ti * k as u64;
                debug_assert!(v <= u32::MAX as u64);
                tau[m] = v as u32;
            }
        }
    }
    tau.remove(0);
    tau
}

/// Segmented sieve for ranges not starting at 1: strip primes up to
/// sqrt(hi) while recording exponents; whatever is left is a single prime.
fn segment_sieve(k: u32, lo: u64, hi: u64) -> Result<Vec<u32>> {
    let len = (hi - lo + 1) as usize;
    let mut rem: Vec<u64> = (lo..=hi).collect();
    let mut tau = vec![1u32; len];
    let s = hi.isqrt();
    if s >= 2 {
        for p in primes_up_to(s)? {
            let mut m = lo.div_ceil(p) * p;
            while m <= hi {
                let idx = (m - lo) as usize;
                let mut e = 0u32;
                while rem[idx] % p == 0 {
                    rem[idx] /= p;
                    e += 1;
                }
                let v = tau[idx] as u64 * tau_pp_u(k, e);
                debug_assert!(v <= u32::MAX as u64);
                tau[idx] = v as u32;
                m += p;
            }
        }
    }
    for (idx, &r) in rem.iter().enumerate() {
        if r > 1 {
            let v = tau[idx] as u64 * k as u64;
            debug_assert!(v <= u32::MAX as u64);
            tau[idx] = v as u32;
        }
    }
    // tau(1) = 1 sits correctly if the range happens to contain 1.
    Ok(tau)
}

/// Exact rational `n/d`.
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact rational from an integer.
pub fn rat_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `1/p` as an exact rational.
pub fn x_of_p(p: u64) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(p))
}

/// `(1 - 1/p)^e` for any integer exponent, exact.
pub fn one_minus_x_pow(p: u64, e: i32) -> BigRational {
    let base = BigRational::new(BigInt::from(p - 1), BigInt::from(p));
    base.pow(e)
}

/// `r^e` without consuming the base.
pub fn rpow(r: &BigRational, e: i32) -> BigRational {
    r.clone().pow(e)
}

/// Convert an exact rational to the nearest f64, robust to large numerators
/// and denominators.
pub fn rat_to_f64(r: &BigRational) -> f64 {
    let num = r.numer();
    let den = r.denom();
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    if nb <= 1000 && db <= 1000 {
        let n = num.to_f64().unwrap_or(f64::NAN);
        let d = den.to_f64().unwrap_or(f64::NAN);
        return n / d;
    }
    // Scale both parts into f64 range, then repair the exponent.
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n = (num >> shift_n).to_f64().unwrap_or(f64::NAN);
    let d = (den >> shift_d).to_f64().unwrap_or(f64::NAN);
    (n / d) * 2f64.powi((shift_n - shift_d) as i32)
}

/// `H_{k,j}(x)`: the degree `k-1` polynomial with `H_{k,j}(0) = 1` given by
/// `sum_{i=0}^{k-1} [C(k-1,i)/C(j+i,j)] (1-x)^{k-1-i} x^i`, evaluated exactly.
pub fn h_poly(k: u32, j: u32, x: &BigRational) -> BigRational {
    assert!(k >= 1, "h_poly requires k >= 1");
    let one = BigRational::one();
    let om = &one - x;
    let mut acc = BigRational::zero();
    for i in 0..k {
        let c_top = binomial(BigInt::from(k - 1), BigInt::from(i));
        let c_bot = binomial(BigInt::from(j + i), BigInt::from(j));
        let coef = BigRational::new(c_top, c_bot);
        acc += coef * rpow(&om, (k - 1 - i) as i32) * rpow(x, i as i32);
    }
    acc
}

/// `sigma_k(p^j, 1) = tau_k(p^j) * H_{k,j}(1/p)`, exact.
pub fn sigma_pp(k: u32, j: u32, p: u64) -> BigRational {
    assert!(k >= 1, "sigma_pp requires k >= 1");
    let t = BigRational::from_integer(BigInt::from(tau_pp_u(k, j)));
    t * h_poly(k, j, &x_of_p(p))
}

fn mobius_pp(m: u32) -> i64 {
    match m {
        0 => 1,
        1 => -1,
        _ => 0,
    }
}

/// `G_k(p^j, 1)` computed literally from its divisor-sum definition:
/// `sum_{a | p^j} mu(a) a / phi(a) * sum_{b | a} mu(b)/b * sigma_k(p^j b/a, 1)`.
/// Always equals `sigma_{k-1}(p^j, 1)`.
pub fn g_func_pp(k: u32, j: u32, p: u64) -> BigRational {
    assert!(k >= 2 && j >= 1, "g_func_pp requires k >= 2, j >= 1");
    let mut acc = BigRational::zero();
    for m in 0..=j {
        let mu_a = mobius_pp(m);
        if mu_a == 0 {
            continue;
        }
        let a = BigInt::from(p).pow(m);
        let phi_a = if m == 0 {
            BigInt::one()
        } else {
            BigInt::from(p).pow(m) - BigInt::from(p).pow(m - 1)
        };
        let outer = BigRational::new(BigInt::from(mu_a) * a, phi_a);
        let mut inner = BigRational::zero();
        for t in 0..=m {
            let mu_b = mobius_pp(t);
            if mu_b == 0 {
                continue;
            }
            let b_inv = BigRational::new(BigInt::from(mu_b), BigInt::from(p).pow(t));
            inner += b_inv * sigma_pp(k, j - m + t, p);
        }
        acc += outer * inner;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::traits::Signed;
    use proptest::prelude::*;

    fn trial_division_primes(limit: u64) -> Vec<u64> {
        (2..=limit)
            .filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect()
    }

    #[test]
    fn primes_small() {
        assert_eq!(primes_up_to(10).unwrap(), vec![2, 3, 5, 7]);
        assert_eq!(primes_up_to(2).unwrap(), vec![2]);
        let p100 = primes_up_to(100).unwrap();
        assert_eq!(p100.len(), 25);
        assert_eq!(p100, trial_division_primes(100));
    }

    #[test]
    fn primes_below_two_rejected() {
        assert!(primes_up_to(1).is_err());
        assert!(primes_up_to(0).is_err());
    }

    #[test]
    fn miller_rabin_matches_trial_division() {
        for n in 0..2000u64 {
            let naive = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_prime(n), naive, "n = {n}");
        }
        assert!(is_prime(2_147_483_647)); // 2^31 - 1
        assert!(is_prime(2_305_843_009_213_693_951)); // 2^61 - 1
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to 2,3,5,7
    }

    #[test]
    fn factorize_basics() {
        assert!(factorize(0).is_err());
        assert!(factorize(1).unwrap().factors().is_empty());
        let f12 = factorize(12).unwrap();
        assert_eq!(
            f12.factors(),
            &[PrimePower { p: 2, alpha: 2 }, PrimePower { p: 3, alpha: 1 }]
        );
        let n = 735_134_400u64;
        let f = factorize(n).unwrap();
        let back: u64 = f.factors().iter().map(|f| f.p.pow(f.alpha)).product();
        assert_eq!(back, n);
        for w in f.factors().windows(2) {
            assert!(w[0].p < w[1].p);
        }
    }

    #[test]
    fn factorize_large_semiprime() {
        let n = 1_000_003u64 * 999_983;
        let f = factorize(n).unwrap();
        assert_eq!(f.factors().len(), 2);
        assert_eq!(f.value(), n);
    }

    #[test]
    fn binom_conventions() {
        assert_eq!(binom_conv(-1, 0), BigUint::one());
        assert_eq!(binom_conv(3, 5), BigUint::zero());
        assert_eq!(binom_conv(4, 5), BigUint::zero()); // C(m-1, m), m = 5
        assert_eq!(binom_conv(4, 2), BigUint::from(6u32));
        assert_eq!(binom_conv(7, 0), BigUint::one());
    }

    /// Count ordered k-tuples with the given product, the definition of tau_k.
    fn tau_oracle(k: u32, n: u64) -> u64 {
        if k == 1 {
            return 1;
        }
        (1..=n)
            .filter(|d| n % d == 0)
            .map(|d| tau_oracle(k - 1, n / d))
            .sum()
    }

    #[test]
    fn tau_prime_power_values() {
        assert_eq!(tau_pp(3, 2).unwrap(), 6);
        assert_eq!(tau_pp(1, 7).unwrap(), 1);
        assert_eq!(tau_pp(2, 3).unwrap(), tau_oracle(2, 8)); // ordered pairs with product p^3
        assert_eq!(tau_pp(2, 3).unwrap(), 4);
        assert!(tau_pp(0, 1).is_err());
    }

    #[test]
    fn tau_point_values() {
        assert_eq!(tau_point(2, &factorize(12).unwrap()), 6);
        assert_eq!(tau_point(3, &factorize(4).unwrap()), tau_oracle(3, 4));
        assert_eq!(tau_point(3, &factorize(4).unwrap()), 6);
        assert_eq!(tau_point(5, &factorize(1).unwrap()), 1);
    }

    #[test]
    fn tau_recurrence() {
        // tau_{k-1}(p^j) = tau_k(p^j) - tau_k(p^{j-1})
        for k in 2..=10u32 {
            for j in 1..=20u32 {
                assert_eq!(tau_pp_u(k - 1, j), tau_pp_u(k, j) - tau_pp_u(k, j - 1));
            }
        }
    }

    #[test]
    fn generating_series_truncation() {
        // |sum_{j<=J} tau_k(p^j) x^j - (1-x)^{-k}| < tau_k(p^{J+1}) x^{J+1} (1-x)^{-k}
        let j_max = 40u32;
        for k in 1..=6u32 {
            for p in [2u64, 3, 5, 7, 11, 13] {
                let x = x_of_p(p);
                let mut partial = BigRational::zero();
                for j in 0..=j_max {
                    partial += rat_int(tau_pp_u(k, j) as i64) * rpow(&x, j as i32);
                }
                let closed = (BigRational::one() - &x).pow(-(k as i32));
                let diff = (&closed - &partial).abs();
                let bound = rat_int(tau_pp_u(k, j_max + 1) as i64)
                    * rpow(&x, (j_max + 1) as i32)
                    * (BigRational::one() - &x).pow(-(k as i32));
                // The bound degenerates to equality in the geometric case.
                if k == 1 {
                    assert!(diff <= bound, "k={k} p={p}");
                } else {
                    assert!(diff < bound, "k={k} p={p}");
                }
            }
        }
    }

    #[test]
    fn sieve_small_tables() {
        assert_eq!(
            tau_sieve(2, 1, 10).unwrap().values(),
            &[1, 2, 2, 3, 2, 4, 2, 4, 3, 4]
        );
        assert_eq!(tau_sieve(1, 1, 5).unwrap().values(), &[1, 1, 1, 1, 1]);
        assert_eq!(tau_sieve(3, 1, 4).unwrap().values(), &[1, 3, 3, 6]);
    }

    #[test]
    fn sieve_segment_matches_point_values() {
        let t = tau_sieve(3, 1000, 1200).unwrap();
        for n in 1000..=1200u64 {
            assert_eq!(t.get(n), tau_point(3, &factorize(n).unwrap()), "n = {n}");
        }
        // Segment containing 1.
        let t = tau_sieve_with_cap(4, 2, 40, DEFAULT_MEMORY_CAP).unwrap();
        for n in 2..=40u64 {
            assert_eq!(t.get(n), tau_point(4, &factorize(n).unwrap()));
        }
    }

    #[test]
    fn sieve_sampled_agreement() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
        for &k in &[2u32, 3, 4] {
            let t = tau_sieve(k, 1, 200_000).unwrap();
            for _ in 0..1000 {
                let n = rng.gen_range(1..=200_000u64);
                assert_eq!(t.get(n), tau_point(k, &factorize(n).unwrap()));
            }
        }
    }

    #[test]
    fn sieve_budget_exceeded() {
        match tau_sieve_with_cap(2, 1, 10_000_000, 1024) {
            Err(Error::Resource { required, cap }) => {
                assert!(required > cap);
                assert_eq!(cap, 1024);
            }
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn h_poly_normalization() {
        let zero = BigRational::zero();
        for k in 1..=6u32 {
            for j in 0..=8u32 {
                assert_eq!(h_poly(k, j, &zero), BigRational::one());
            }
        }
        // H_{1,j} is identically 1.
        for j in 0..=10u32 {
            assert_eq!(h_poly(1, j, &rat(1, 5)), BigRational::one());
        }
        assert_eq!(h_poly(2, 1, &rat(1, 3)), rat(5, 6));
    }

    /// Adaptive Simpson for the integral form, rescaled to the unit interval:
    /// substituting t = ux turns j x^{-j} int_0^x t^{j-1}(1-t)^{k-1} dt into
    /// j int_0^1 u^{j-1}(1-ux)^{k-1} du, which is numerically well behaved.
    fn h_poly_integral_oracle(k: u32, j: u32, x: f64) -> f64 {
        if j == 0 {
            return 1.0; // the empty-shift normalization
        }
        let f = |u: f64| u.powi(j as i32 - 1) * (1.0 - u * x).powi(k as i32 - 1);
        fn simpson(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            eps: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * eps {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(f, a, m, fa, flm, fm, eps / 2.0, depth - 1)
                    + simpson(f, m, b, fm, frm, fb, eps / 2.0, depth - 1)
            }
        }
        let integral = simpson(&f, 0.0, 1.0, f(0.0), f(0.5), f(1.0), 1e-15, 44);
        j as f64 * integral
    }

    #[test]
    fn h_poly_matches_integral_form() {
        for k in 1..=6u32 {
            for j in 0..=10u32 {
                for &(n, d) in &[(1i64, 2i64), (1, 3), (1, 5), (1, 7)] {
                    let exact = rat_to_f64(&h_poly(k, j, &rat(n, d)));
                    let numeric = h_poly_integral_oracle(k, j, n as f64 / d as f64);
                    assert!(
                        (exact - numeric).abs() <= 1e-12 * exact.abs().max(1.0),
                        "k={k} j={j} x={n}/{d}: {exact} vs {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn sigma_pp_values() {
        assert_eq!(sigma_pp(2, 1, 2), rat(3, 2));
        assert_eq!(sigma_pp(3, 1, 3), rat(19, 9));
        for k in 1..=5u32 {
            for p in [2u64, 3, 5] {
                assert_eq!(sigma_pp(k, 0, p), BigRational::one());
                // sigma_k(p,1)/p = 1 - (1-1/p)^k
                let lhs = sigma_pp(k, 1, p) / rat_int(p as i64);
                let rhs = BigRational::one() - one_minus_x_pow(p, k as i32);
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn sigma_pp_series_truncation() {
        // sigma_k(p^j,1) agrees with (1-1/p)^k sum_{i<=I} tau_k(p^{j+i}) p^{-i}
        // within the exact geometric tail bound tau_k(p^{j+I+1}) p^{-(I+1)}.
        let i_max = 60u32;
        for k in 1..=4u32 {
            for j in 1..=6u32 {
                for p in [2u64, 3, 5] {
                    let x = x_of_p(p);
                    let mut partial = BigRational::zero();
                    for i in 0..=i_max {
                        partial += rat_int(tau_pp_u(k, j + i) as i64) * rpow(&x, i as i32);
                    }
                    partial *= one_minus_x_pow(p, k as i32);
                    let exact = sigma_pp(k, j, p);
                    let diff = (&exact - &partial).abs();
                    let bound =
                        rat_int(tau_pp_u(k, j + i_max + 1) as i64) * rpow(&x, (i_max + 1) as i32);
                    if k == 1 {
                        assert!(diff <= bound, "k={k} j={j} p={p}");
                    } else {
                        assert!(diff < bound, "k={k} j={j} p={p}");
                    }
                }
            }
        }
    }

    #[test]
    fn g_identity() {
        assert_eq!(g_func_pp(2, 1, 2), BigRational::one());
        assert_eq!(g_func_pp(3, 1, 2), rat(3, 2));
        for k in 2..=8u32 {
            for j in 1..=10u32 {
                for p in [2u64, 3, 5, 7, 11] {
                    assert_eq!(g_func_pp(k, j, p), sigma_pp(k - 1, j, p), "k={k} j={j} p={p}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn factorize_roundtrip(n in 1u64..1_000_000_000_000u64) {
            let f = factorize(n).unwrap();
            let back: u64 = f.factors().iter().map(|f| f.p.pow(f.alpha)).product();
            prop_assert_eq!(back.max(1), n);
            for pp in f.factors() {
                prop_assert!(is_prime(pp.p));
                prop_assert!(pp.alpha >= 1);
            }
        }

        #[test]
        fn tau_multiplicative(a in 1u64..5000, b in 1u64..5000, k in 2u32..6) {
            prop_assume!(gcd_u64(a, b) == 1);
            let fa = factorize(a).unwrap();
            let fb = factorize(b).unwrap();
            let fab = factorize(a * b).unwrap();
            prop_assert_eq!(tau_point(k, &fab), tau_point(k, &fa) * tau_point(k, &fb));
        }
    }
}
