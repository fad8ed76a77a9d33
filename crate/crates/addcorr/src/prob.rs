//! Closed-form expectations of the local random variables
//! `X_p(n) = tau_k(p^ord_p(n))` and `Y_p(n) = tau_l(p^ord_p(n+h))`, an exact
//! floor-counting oracle for their joint distribution at finite `N`, and the
//! correction product that reassembles the leading constant from them.
//!
//! Nothing here samples: `count_exact` counts residue classes with floor
//! divisions, so `empirical_expectation` carries no randomness at all, only
//! finite-`N` truncation. That makes the convergence to the closed forms a
//! sharp, reproducible check rather than a statistical one.

use num::traits::{One, Pow, Zero};
use num::BigRational;

use crate::arith::{factorize, one_minus_x_pow, rat_int, rat_to_f64, rpow, tau_pp_u, x_of_p};
use crate::error::{Error, Result};
use crate::singular::{c_of_h, euler_tail_bound, local_factor_c};

/// Expectations of `X_p`, `Y_p`, and their product at one prime, with the
/// dependence correction `E(XY) / (E(X) E(Y))`.
#[derive(Debug, Clone)]
pub struct ExpectationTriple {
    pub p: u64,
    pub k: u32,
    pub l: u32,
    pub alpha: u32,
    pub e_x: BigRational,
    pub e_y: BigRational,
    pub e_xy: BigRational,
    pub correction: BigRational,
}

/// `E(X_p) = (1 - 1/p)^{-(k-1)}`, exact; 1 for `k = 1`.
pub fn expect_x(k: u32, p: u64) -> BigRational {
    assert!(k >= 1, "expect_x requires k >= 1");
    one_minus_x_pow(p, -((k - 1) as i32))
}

/// `E(X_p Y_p)` when `p` does not divide the shift:
/// `(1-1/p)^{-(k-1)} + (1-1/p)^{-(l-1)} - 1`.
pub fn expect_xy_coprime(k: u32, l: u32, p: u64) -> BigRational {
    assert!(k >= 1 && l >= 1, "expect_xy_coprime requires k, l >= 1");
    expect_x(k, p) + expect_x(l, p) - BigRational::one()
}

/// `E(X_p Y_p)` when `p^alpha || h`. The infinite tails are closed into
/// negative-binomial form. `alpha = 0` routes to the coprime case so grid
/// sweeps stay uniform.
pub fn expect_xy(k: u32, l: u32, p: u64, alpha: u32) -> BigRational {
    assert!(k >= 1 && l >= 1, "expect_xy requires k, l >= 1");
    if alpha == 0 {
        return expect_xy_coprime(k, l, p);
    }
    let x = x_of_p(p);
    let mut acc = BigRational::one();
    for i in 1..=alpha {
        let jump = tau_pp_u(k, i) as i64 * tau_pp_u(l, i) as i64
            - tau_pp_u(k, i - 1) as i64 * tau_pp_u(l, i - 1) as i64;
        acc += rat_int(jump) * rpow(&x, i as i32);
    }
    let tail = |r: u32| -> BigRational {
        let mut head = BigRational::zero();
        for i in 0..=alpha {
            head += rat_int(tau_pp_u(r, i) as i64) * rpow(&x, i as i32);
        }
        (BigRational::one() - &x).pow(-(r as i32)) - head
    };
    acc += rat_int(tau_pp_u(k, alpha) as i64) * tail(l - 1);
    acc += rat_int(tau_pp_u(l, alpha) as i64) * tail(k - 1);
    acc
}

/// The full triple at one prime.
pub fn expectation_triple(k: u32, l: u32, p: u64, alpha: u32) -> ExpectationTriple {
    let e_x = expect_x(k, p);
    let e_y = expect_x(l, p);
    let e_xy = expect_xy(k, l, p, alpha);
    let correction = &e_xy / (&e_x * &e_y);
    ExpectationTriple {
        p,
        k,
        l,
        alpha,
        e_x,
        e_y,
        e_xy,
        correction,
    }
}

/// Number of `n <= limit` in the residue class `r (mod m)`, `0 <= r < m`.
fn count_class(r: u64, m: u64, limit: u64) -> u64 {
    if r == 0 {
        limit / m
    } else if r <= limit {
        (limit - r) / m + 1
    } else {
        0
    }
}

/// `#{n <= limit : p^i | n  and  p^j | n + h}` by joint residue counting.
fn count_at_least(p: u64, i: u32, j: u32, h: u64, limit: u64) -> u64 {
    let pi = match p.checked_pow(i) {
        Some(v) if v <= limit => v,
        _ => return 0,
    };
    let pj = match p.checked_pow(j) {
        Some(v) => v,
        None => return 0,
    };
    if i >= j {
        // n = 0 mod p^i forces n + h = h mod p^j; compatible iff p^j | h.
        if h % pj == 0 {
            limit / pi
        } else {
            0
        }
    } else {
        // n = -h mod p^j, and p^i | n iff p^i | h.
        if h % pi != 0 {
            return 0;
        }
        let r = (pj - h % pj) % pj;
        count_class(r, pj, limit)
    }
}

/// `#{n <= limit : p^i || n  and  p^j || n + h}` exactly, by inclusion-
/// exclusion over the four at-least counts. No iteration over `n`.
pub fn count_exact(p: u64, i: u32, j: u32, h: u64, limit: u64) -> u64 {
    assert!(p >= 2 && h >= 1 && limit >= 1);
    let a = count_at_least(p, i, j, h, limit);
    let b = count_at_least(p, i + 1, j, h, limit);
    let c = count_at_least(p, i, j + 1, h, limit);
    let d = count_at_least(p, i + 1, j + 1, h, limit);
    // Grouped so the intermediate never underflows: the events nest.
    (a + d) - (b + c)
}

/// The exact finite-`N` average `(1/N) sum_{n<=N} tau_k(p^ord n) tau_l(p^ord(n+h))`,
/// assembled from `count_exact` over every order pair that can occur.
pub fn empirical_expectation(k: u32, l: u32, p: u64, h: u64, n: u64) -> f64 {
    assert!(k >= 1 && l >= 1 && p >= 2 && h >= 1 && n >= 1);
    let mut i_max = 0u32;
    while p.checked_pow(i_max + 1).map_or(false, |v| v <= n) {
        i_max += 1;
    }
    let mut j_max = 0u32;
    while p.checked_pow(j_max + 1).map_or(false, |v| v <= n + h) {
        j_max += 1;
    }
    let mut total: u128 = 0;
    for i in 0..=i_max {
        for j in 0..=j_max {
            let c = count_exact(p, i, j, h, n);
            if c > 0 {
                total += tau_pp_u(k, i) as u128 * tau_pp_u(l, j) as u128 * c as u128;
            }
        }
    }
    total as f64 / n as f64
}

/// Truncated correction product `prod_{p<=P} E(X_p Y_p) / (E(X_p) E(Y_p))`,
/// with primes dividing `h` beyond the truncation included. Returns the
/// float value and its tail bound, after checking agreement with the
/// constant assembled through `c_of_h`.
pub fn correction_product(k: u32, l: u32, h: u64, prime_limit: u64) -> Result<(f64, f64)> {
    if k < 2 || l < 2 {
        return Err(Error::Domain("correction_product requires k, l >= 2".into()));
    }
    let hf = factorize(h)?;
    let mut acc = 1.0f64;
    for p in crate::arith::primes_up_to(prime_limit)? {
        let alpha = hf.ord(p);
        if alpha == 0 {
            acc *= rat_to_f64(&local_factor_c(k, l, p));
        } else {
            acc *= rat_to_f64(&expectation_triple(k, l, p, alpha).correction);
        }
    }
    for pp in hf.factors() {
        if pp.p > prime_limit {
            acc *= rat_to_f64(&expectation_triple(k, l, pp.p, pp.alpha).correction);
        }
    }
    let tail = euler_tail_bound(k, l, prime_limit);

    let reference = c_of_h(k, l, h, prime_limit)?;
    let combined = tail + reference.tail_bound + 1e-10;
    let rel = (acc / reference.c() - 1.0).abs();
    if rel > combined {
        return Err(Error::Consistency(format!(
            "correction product {acc} disagrees with constant {} beyond {combined:e}",
            reference.c()
        )));
    }
    Ok((acc, tail))
}
