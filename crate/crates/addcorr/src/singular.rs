//! Exact local factors and global Euler products for the leading constant
//! `c_{k,l}(h)`, in each of its published forms, plus the grid sweeps that
//! prove the forms pairwise equal in exact rational arithmetic.
//!
//! The local factor of the shift-independent constant is
//! `(1-1/p)^{k-1} + (1-1/p)^{l-1} - (1-1/p)^{k+l-2}`, and the multiplicative
//! correction `f_{k,l}(p^alpha)` has three equivalent expressions: a direct
//! divisor-jump series with closed geometric tails, a `sigma`-difference
//! ratio, and the same ratio with `sigma` expanded through `tau * H`.
//! A fourth route goes through the local factor `S_{k,l,h}(p)` built from
//! the polynomial `P_{k,l,p}(j)`. Every infinite series is evaluated through
//! exact negative-binomial closed forms, never by numeric truncation.

use num::bigint::BigInt;
use num::traits::{One, Pow, Zero};
use num::{BigRational, BigUint};
use rayon::prelude::*;

use crate::arith::{
    binom_conv, factorize, h_poly, one_minus_x_pow, primes_up_to, rat_int, rat_to_f64, rpow,
    sigma_pp, tau_pp_u, x_of_p, FactoredInteger,
};
use crate::error::{Error, Result};

/// Which expression of `f_{k,l}(p^alpha)` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FForm {
    /// Divisor-jump series with closed tails.
    Direct,
    /// Ratio of `sigma_{k-1} sigma_{l-1}` differences to the local constant.
    Sigma,
    /// Same ratio with `sigma` expanded as `tau * H`.
    HPoly,
}

/// Which printed expression of `P_{k,l,p}(j)` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaoVariant {
    /// Double sum over interior orders with binomial conventions.
    Raw,
    /// Collapsed single-sum form.
    Simplified,
}

/// One grid point of the cross-form equality sweep.
#[derive(Debug, Clone)]
pub struct LocalFactorReport {
    pub k: u32,
    pub l: u32,
    pub p: u64,
    pub alpha: u32,
    pub f_direct: BigRational,
    pub f_sigma: BigRational,
    pub f_h: BigRational,
    /// Local constant factor times local f.
    pub c_local_cf: BigRational,
    /// Local factor of the product form of `c` at this prime.
    pub c_local_tao: BigRational,
    pub all_equal: bool,
}

/// The constant `c_{k,l}(h)` as a float product with an exact rational
/// shift correction and a rigorous truncation tail.
#[derive(Debug, Clone)]
pub struct SingularConstant {
    pub k: u32,
    pub l: u32,
    pub h: FactoredInteger,
    /// Truncated Euler product for the shift-independent constant.
    pub euler_product: f64,
    /// Exact multiplicative correction for the shift.
    pub f_value: BigRational,
    /// `euler_product` times `f_value`, the full leading constant.
    pub c_full: f64,
    pub prime_limit: u64,
    pub tail_bound: f64,
}

impl SingularConstant {
    pub fn c(&self) -> f64 {
        self.c_full
    }
}

/// Local factor of `C_{k,l}`:
/// `(1-1/p)^{k-1} + (1-1/p)^{l-1} - (1-1/p)^{k+l-2}`, exact, in `(0, 1]`.
pub fn local_factor_c(k: u32, l: u32, p: u64) -> BigRational {
    assert!(k >= 2 && l >= 2, "local_factor_c requires k, l >= 2");
    one_minus_x_pow(p, (k - 1) as i32) + one_minus_x_pow(p, (l - 1) as i32)
        - one_minus_x_pow(p, (k + l - 2) as i32)
}

/// `sum_{i > alpha} tau_r(p^i) x^i` in closed form:
/// `(1-x)^{-r} - sum_{i<=alpha} tau_r(p^i) x^i`. Valid for `r = 0` as well.
fn tau_tail(r: u32, alpha: u32, x: &BigRational) -> BigRational {
    let mut head = BigRational::zero();
    for i in 0..=alpha {
        head += rat_int(tau_pp_u(r, i) as i64) * rpow(x, i as i32);
    }
    (BigRational::one() - x).pow(-(r as i32)) - head
}

/// Numerator of the direct form of `f_{k,l}(p^alpha)`; identical to the
/// closed-form expectation `E(X_p Y_p)` at a prime dividing `h` to order
/// exactly `alpha`.
pub(crate) fn f_direct_numerator(k: u32, l: u32, p: u64, alpha: u32) -> BigRational {
    let x = x_of_p(p);
    let mut acc = BigRational::one();
    for i in 1..=alpha {
        let jump = tau_pp_u(k, i) as i64 * tau_pp_u(l, i) as i64
            - tau_pp_u(k, i - 1) as i64 * tau_pp_u(l, i - 1) as i64;
        acc += rat_int(jump) * rpow(&x, i as i32);
    }
    acc += rat_int(tau_pp_u(k, alpha) as i64) * tau_tail(l - 1, alpha, &x);
    acc += rat_int(tau_pp_u(l, alpha) as i64) * tau_tail(k - 1, alpha, &x);
    acc
}

/// `f_{k,l}(p^alpha)` by the divisor-jump series with closed tails.
pub fn f_local_direct(k: u32, l: u32, p: u64, alpha: u32) -> BigRational {
    assert!(k >= 2 && l >= 2, "f_local_direct requires k, l >= 2");
    let den = one_minus_x_pow(p, -((k - 1) as i32)) + one_minus_x_pow(p, -((l - 1) as i32))
        - BigRational::one();
    f_direct_numerator(k, l, p, alpha) / den
}

/// `sum_{j<=alpha} [ s_a(j) s_b(j) x^j - s_a(j+1) s_b(j+1) x^{j+2} ]` for a
/// supplied prime-power sequence `s`.
fn diff_sum(sa: &[BigRational], sb: &[BigRational], x: &BigRational, alpha: u32) -> BigRational {
    let mut acc = BigRational::zero();
    for j in 0..=alpha as usize {
        acc += &sa[j] * &sb[j] * rpow(x, j as i32)
            - &sa[j + 1] * &sb[j + 1] * rpow(x, j as i32 + 2);
    }
    acc
}

fn sigma_seq(r: u32, p: u64, up_to: u32) -> Vec<BigRational> {
    (0..=up_to).map(|j| sigma_pp(r, j, p)).collect()
}

fn tau_h_seq(r: u32, p: u64, up_to: u32) -> Vec<BigRational> {
    let x = x_of_p(p);
    (0..=up_to)
        .map(|j| rat_int(tau_pp_u(r, j) as i64) * h_poly(r, j, &x))
        .collect()
}

/// `f_{k,l}(p^alpha)` as a ratio of `sigma_{k-1} sigma_{l-1}` differences to
/// the local constant factor.
pub fn f_local_sigma(k: u32, l: u32, p: u64, alpha: u32) -> BigRational {
    assert!(k >= 2 && l >= 2, "f_local_sigma requires k, l >= 2");
    let sa = sigma_seq(k - 1, p, alpha + 1);
    let sb = sigma_seq(l - 1, p, alpha + 1);
    diff_sum(&sa, &sb, &x_of_p(p), alpha) / local_factor_c(k, l, p)
}

/// `f_{k,l}(p^alpha)` with `sigma` expanded through `tau * H`.
pub fn f_local_h(k: u32, l: u32, p: u64, alpha: u32) -> BigRational {
    assert!(k >= 2 && l >= 2, "f_local_h requires k, l >= 2");
    let sa = tau_h_seq(k - 1, p, alpha + 1);
    let sb = tau_h_seq(l - 1, p, alpha + 1);
    diff_sum(&sa, &sb, &x_of_p(p), alpha) / local_factor_c(k, l, p)
}

/// The polynomial `P_{k,l,p}(j)`, in either printed form. The two variants
/// agree for every input.
pub fn tao_p(k: u32, l: u32, p: u64, j: u32, variant: TaoVariant) -> BigRational {
    assert!(k >= 2 && l >= 2, "tao_p requires k, l >= 2");
    let q = BigRational::new(BigInt::from(p), BigInt::from(p - 1));
    let mut qpow = Vec::with_capacity((k.max(l)) as usize);
    qpow.push(BigRational::one());
    for _ in 1..k.max(l) {
        qpow.push(qpow.last().unwrap() * &q);
    }
    let big = |b: BigUint| BigRational::from_integer(BigInt::from(b));
    match variant {
        TaoVariant::Raw => {
            let mut acc = BigRational::zero();
            for kp in 2..=k {
                for lp in 2..=l {
                    let c1 = binom_conv((k - kp) as i64 + j as i64 - 1, k - kp);
                    let c2 = binom_conv((l - lp) as i64 + j as i64 - 1, l - lp);
                    if c1.is_zero() || c2.is_zero() {
                        continue;
                    }
                    let bracket =
                        &qpow[(kp - 1) as usize] + &qpow[(lp - 1) as usize] - BigRational::one();
                    acc += big(c1 * c2) * bracket;
                }
            }
            acc
        }
        TaoVariant::Simplified => {
            let ck = big(binom_conv((k + j) as i64 - 2, j));
            let cl = big(binom_conv((l + j) as i64 - 2, j));
            let mut s1 = BigRational::zero();
            for i in 0..=(l - 2) {
                s1 += big(binom_conv(i as i64 + j as i64 - 1, i)) * &qpow[(l - i - 1) as usize];
            }
            let mut s2 = BigRational::zero();
            for i in 0..=(k - 2) {
                s2 += big(binom_conv(i as i64 + j as i64 - 1, i)) * &qpow[(k - i - 1) as usize];
            }
            &ck * s1 + &cl * s2 - ck * cl
        }
    }
}

/// Tao-form local factor for `p^alpha || h`:
/// `(1-1/p)^{k+l-2} sum_{j<=alpha} p^{-j} P_{k,l,p}(j)`.
pub fn tao_local_s(k: u32, l: u32, p: u64, alpha: u32) -> BigRational {
    let x = x_of_p(p);
    let mut sum = BigRational::zero();
    for j in 0..=alpha {
        sum += rpow(&x, j as i32) * tao_p(k, l, p, j, TaoVariant::Simplified);
    }
    one_minus_x_pow(p, (k + l - 2) as i32) * sum
}

/// Local factor of the lower-bound constant:
/// `(1-1/p)^k + (1-1/p)^l - (1-1/p)^{k+l}`, defined for `k, l >= 1`.
pub fn local_factor_c_tilde(k: u32, l: u32, p: u64) -> Result<BigRational> {
    if k < 1 || l < 1 {
        return Err(Error::Domain(format!(
            "local_factor_c_tilde requires k, l >= 1, got ({k}, {l})"
        )));
    }
    Ok(one_minus_x_pow(p, k as i32) + one_minus_x_pow(p, l as i32)
        - one_minus_x_pow(p, (k + l) as i32))
}

/// The multiplicative function paired with the tilde constant: at `p^alpha`
/// it is the `sigma_k sigma_l` difference sum over the tilde local factor.
/// Shifting indices down by one recovers `f`: `g~(k-1, l-1) = f(k, l)`.
pub fn g_tilde_local(k: u32, l: u32, p: u64, alpha: u32) -> Result<BigRational> {
    if k < 1 || l < 1 {
        return Err(Error::Domain(format!(
            "g_tilde_local requires k, l >= 1, got ({k}, {l})"
        )));
    }
    let sa = sigma_seq(k, p, alpha + 1);
    let sb = sigma_seq(l, p, alpha + 1);
    Ok(diff_sum(&sa, &sb, &x_of_p(p), alpha) / local_factor_c_tilde(k, l, p)?)
}

/// `g~_{k,l}(h)` extended multiplicatively.
pub fn g_tilde_multiplicative(k: u32, l: u32, h: &FactoredInteger) -> Result<BigRational> {
    let mut acc = BigRational::one();
    for pp in h.factors() {
        acc *= g_tilde_local(k, l, pp.p, pp.alpha)?;
    }
    Ok(acc)
}

/// `f_{k,l}(h)` extended multiplicatively over the factorization of `h`.
pub fn f_multiplicative(k: u32, l: u32, h: &FactoredInteger, form: FForm) -> BigRational {
    let mut acc = BigRational::one();
    for pp in h.factors() {
        acc *= match form {
            FForm::Direct => f_local_direct(k, l, pp.p, pp.alpha),
            FForm::Sigma => f_local_sigma(k, l, pp.p, pp.alpha),
            FForm::HPoly => f_local_h(k, l, pp.p, pp.alpha),
        };
    }
    acc
}

fn local_factor_c_f64(k: u32, l: u32, p: u64) -> f64 {
    let q = 1.0 - 1.0 / p as f64;
    q.powi((k - 1) as i32) + q.powi((l - 1) as i32) - q.powi((k + l - 2) as i32)
}

/// Rigorous relative bound on the omitted factors of an Euler product whose
/// local factor is `1 - kl/p^2 + O(p^-3)`: `exp(2kl * sum_{n>P} n^-2) - 1`,
/// with the integral majorant `sum_{n>P} n^-2 < 1/P`.
pub fn euler_tail_bound(k: u32, l: u32, prime_limit: u64) -> f64 {
    (2.0 * k as f64 * l as f64 / prime_limit as f64).exp_m1()
}

/// Truncated Euler product for `C_{k,l}` with its tail bound. The product is
/// evaluated in ascending-prime order into a single f64 accumulator, so the
/// result is deterministic.
pub fn c_constant(k: u32, l: u32, prime_limit: u64) -> Result<(f64, f64)> {
    if k < 2 || l < 2 {
        return Err(Error::Domain("c_constant requires k, l >= 2".into()));
    }
    if prime_limit < 100 {
        return Err(Error::Domain(format!(
            "c_constant requires prime_limit >= 100, got {prime_limit}"
        )));
    }
    let mut acc = 1.0f64;
    for p in primes_up_to(prime_limit)? {
        acc *= local_factor_c_f64(k, l, p);
    }
    Ok((acc, euler_tail_bound(k, l, prime_limit)))
}

/// Truncated Euler product for the tilde constant (same tail-bound scheme).
pub fn c_tilde_constant(k: u32, l: u32, prime_limit: u64) -> Result<(f64, f64)> {
    if k < 1 || l < 1 {
        return Err(Error::Domain("c_tilde_constant requires k, l >= 1".into()));
    }
    if prime_limit < 100 {
        return Err(Error::Domain(format!(
            "c_tilde_constant requires prime_limit >= 100, got {prime_limit}"
        )));
    }
    let mut acc = 1.0f64;
    for p in primes_up_to(prime_limit)? {
        let q = 1.0 - 1.0 / p as f64;
        acc *= q.powi(k as i32) + q.powi(l as i32) - q.powi((k + l) as i32);
    }
    Ok((acc, euler_tail_bound(k, l, prime_limit)))
}

/// `c_{k,l}(h)` assembled as `C * f(h)`, cross-checked against the product
/// of local Tao factors. The two routes are algebraically identical, so any
/// disagreement beyond float rounding scaled by the tail bound is a bug.
pub fn c_of_h(k: u32, l: u32, h: u64, prime_limit: u64) -> Result<SingularConstant> {
    let hf = factorize(h)?;
    let (euler_product, tail_bound) = c_constant(k, l, prime_limit)?;
    let f_value = f_multiplicative(k, l, &hf, FForm::Direct);
    let c_full = euler_product * rat_to_f64(&f_value);

    // Second route: Tao factors at p | h, plain local factors elsewhere.
    let mut tao = 1.0f64;
    for p in primes_up_to(prime_limit)? {
        let alpha = hf.ord(p);
        if alpha > 0 {
            tao *= rat_to_f64(&tao_local_s(k, l, p, alpha));
        } else {
            tao *= local_factor_c_f64(k, l, p);
        }
    }
    for pp in hf.factors() {
        if pp.p > prime_limit {
            tao *= rat_to_f64(&tao_local_s(k, l, pp.p, pp.alpha));
        }
    }
    let rel = (tao / c_full - 1.0).abs();
    if rel > 10.0 * tail_bound {
        return Err(Error::Consistency(format!(
            "c_of_h routes disagree: C*f = {c_full}, Tao product = {tao}, rel = {rel:e}"
        )));
    }
    Ok(SingularConstant {
        k,
        l,
        h: hf,
        euler_product,
        f_value,
        c_full,
        prime_limit,
        tail_bound,
    })
}

/// Both sides of the series identity behind the sigma form of `f`: the left
/// side is the normalized `sigma`-difference sum, the right the divisor-jump
/// numerator. Equal for every admissible input; the truncation order only
/// drives an internal re-expansion consistency check of the closed tails.
pub fn lr_series(
    k: u32,
    l: u32,
    p: u64,
    alpha: u32,
    truncation_order: u32,
) -> (BigRational, BigRational) {
    assert!(k >= 2 && l >= 2, "lr_series requires k, l >= 2");
    assert!(
        truncation_order >= alpha + 2,
        "truncation order must be at least alpha + 2"
    );
    let x = x_of_p(p);
    let sa = sigma_seq(k - 1, p, alpha + 1);
    let sb = sigma_seq(l - 1, p, alpha + 1);
    let left = diff_sum(&sa, &sb, &x, alpha) * one_minus_x_pow(p, -((k + l - 2) as i32));
    let right = f_direct_numerator(k, l, p, alpha);

    // Re-expand the closed tails term by term up to the truncation order and
    // close them from there; must reproduce the same rational.
    let jt = truncation_order;
    let mut re = BigRational::one();
    for i in 1..=alpha {
        let jump = tau_pp_u(k, i) as i64 * tau_pp_u(l, i) as i64
            - tau_pp_u(k, i - 1) as i64 * tau_pp_u(l, i - 1) as i64;
        re += rat_int(jump) * rpow(&x, i as i32);
    }
    for i in alpha + 1..=jt {
        let w = tau_pp_u(k, alpha) as i64 * tau_pp_u(l - 1, i) as i64
            + tau_pp_u(l, alpha) as i64 * tau_pp_u(k - 1, i) as i64;
        re += rat_int(w) * rpow(&x, i as i32);
    }
    re += rat_int(tau_pp_u(k, alpha) as i64) * tau_tail(l - 1, jt, &x);
    re += rat_int(tau_pp_u(l, alpha) as i64) * tau_tail(k - 1, jt, &x);
    assert_eq!(re, right, "tail re-expansion mismatch at J = {jt}");

    (left, right)
}

/// A failed equality in [`verify_equivalence`], carrying the counterexample.
#[derive(Debug, Clone)]
pub enum VerificationFailure {
    LocalFactor(Box<LocalFactorReport>),
    Binomial { a: u32, r: u32, n: u32 },
}

impl std::fmt::Display for VerificationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VerificationFailure::LocalFactor(r) => write!(
                f,
                "local factor forms disagree at k={} l={} p={} alpha={}",
                r.k, r.l, r.p, r.alpha
            ),
            VerificationFailure::Binomial { a, r, n } => {
                write!(f, "binomial convolution identity fails at a={a} r={r} n={n}")
            }
        }
    }
}

impl std::error::Error for VerificationFailure {}

/// Optional fault injection for exercising the failure path from tests and
/// the CLI; perturbs the direct form at one grid point.
#[derive(Debug, Clone, Copy)]
pub struct InjectedFault {
    pub k: u32,
    pub l: u32,
    pub p: u64,
    pub alpha: u32,
}

/// Sweep the grid `2 <= k <= k_max`, `2 <= l <= l_max`, primes `p <= p_max`,
/// `0 <= alpha <= alpha_max`, checking every published identity exactly:
/// the three `f` forms, the `S = C * f` factorization, the two `P` variants,
/// the series identity with its re-expansion, the expectation ratio, and the
/// binomial convolution identity the proofs lean on. Reports come back in
/// grid order regardless of parallelism.
pub fn verify_equivalence(
    k_max: u32,
    l_max: u32,
    p_max: u64,
    alpha_max: u32,
) -> std::result::Result<Vec<LocalFactorReport>, VerificationFailure> {
    verify_equivalence_with_fault(k_max, l_max, p_max, alpha_max, None)
}

pub fn verify_equivalence_with_fault(
    k_max: u32,
    l_max: u32,
    p_max: u64,
    alpha_max: u32,
    fault: Option<InjectedFault>,
) -> std::result::Result<Vec<LocalFactorReport>, VerificationFailure> {
    assert!(
        k_max >= 2 && l_max >= 2 && p_max >= 2,
        "grid bounds must be >= 2"
    );
    // Binomial convolution identity: C(a+r+n+1, n) = sum_u C(a+u,u) C(r+n-u, n-u).
    for a in 0..=alpha_max {
        for r in 0..=alpha_max {
            for n in 0..=(k_max + l_max) {
                let lhs = binom_conv((a + r + n + 1) as i64, n);
                let mut rhs = BigUint::zero();
                for u in 0..=n {
                    rhs += binom_conv((a + u) as i64, u) * binom_conv((r + n - u) as i64, n - u);
                }
                if lhs != rhs {
                    return Err(VerificationFailure::Binomial { a, r, n });
                }
            }
        }
    }

    let primes: Vec<u64> = primes_up_to(p_max).expect("p_max >= 2");
    let mut points: Vec<(u32, u32, u64)> = Vec::new();
    for k in 2..=k_max {
        for l in 2..=l_max {
            for &p in &primes {
                points.push((k, l, p));
            }
        }
    }

    let groups: Vec<Vec<LocalFactorReport>> = points
        .par_iter()
        .map(|&(k, l, p)| sweep_point(k, l, p, alpha_max, fault))
        .collect();

    let mut flat = Vec::with_capacity(groups.len() * (alpha_max as usize + 1));
    for group in groups {
        for r in group {
            if !r.all_equal {
                return Err(VerificationFailure::LocalFactor(Box::new(r)));
            }
            flat.push(r);
        }
    }
    Ok(flat)
}

/// All reports for one `(k, l, p)` with `alpha` ranging over the grid, built
/// from shared prefix caches so the sweep stays near-linear in `alpha_max`.
fn sweep_point(
    k: u32,
    l: u32,
    p: u64,
    alpha_max: u32,
    fault: Option<InjectedFault>,
) -> Vec<LocalFactorReport> {
    let x = x_of_p(p);
    let c_local = local_factor_c(k, l, p);
    let e_x = one_minus_x_pow(p, -((k - 1) as i32));
    let e_y = one_minus_x_pow(p, -((l - 1) as i32));
    let norm = one_minus_x_pow(p, -((k + l - 2) as i32));
    let den_direct = &e_x + &e_y - BigRational::one();

    let xpow: Vec<BigRational> = (0..=alpha_max as i32 + 2).map(|i| rpow(&x, i)).collect();

    let sig_a = sigma_seq(k - 1, p, alpha_max + 1);
    let sig_b = sigma_seq(l - 1, p, alpha_max + 1);
    let th_a = tau_h_seq(k - 1, p, alpha_max + 1);
    let th_b = tau_h_seq(l - 1, p, alpha_max + 1);

    // Prefix sums of the sigma- and tau*H-difference series.
    let mut psig = Vec::with_capacity(alpha_max as usize + 1);
    let mut pth = Vec::with_capacity(alpha_max as usize + 1);
    let mut acc_s = BigRational::zero();
    let mut acc_t = BigRational::zero();
    for j in 0..=alpha_max as usize {
        acc_s += &sig_a[j] * &sig_b[j] * &xpow[j] - &sig_a[j + 1] * &sig_b[j + 1] * &xpow[j + 2];
        acc_t += &th_a[j] * &th_b[j] * &xpow[j] - &th_a[j + 1] * &th_b[j + 1] * &xpow[j + 2];
        psig.push(acc_s.clone());
        pth.push(acc_t.clone());
    }

    // Prefix pieces of the direct numerator.
    let gen_k = one_minus_x_pow(p, -((k - 1) as i32));
    let gen_l = one_minus_x_pow(p, -((l - 1) as i32));
    let mut jump_prefix = Vec::with_capacity(alpha_max as usize + 1);
    let mut head_k = Vec::with_capacity(alpha_max as usize + 1); // sum_{i<=a} tau_{k-1}(p^i) x^i
    let mut head_l = Vec::with_capacity(alpha_max as usize + 1);
    let mut js = BigRational::one();
    let mut hk = BigRational::zero();
    let mut hl = BigRational::zero();
    for i in 0..=alpha_max {
        if i > 0 {
            let jump = tau_pp_u(k, i) as i64 * tau_pp_u(l, i) as i64
                - tau_pp_u(k, i - 1) as i64 * tau_pp_u(l, i - 1) as i64;
            js += rat_int(jump) * &xpow[i as usize];
        }
        hk += rat_int(tau_pp_u(k - 1, i) as i64) * &xpow[i as usize];
        hl += rat_int(tau_pp_u(l - 1, i) as i64) * &xpow[i as usize];
        jump_prefix.push(js.clone());
        head_k.push(hk.clone());
        head_l.push(hl.clone());
    }

    // Both printed P variants, once per j.
    let tao_eq: Vec<bool> = (0..=alpha_max)
        .map(|j| tao_p(k, l, p, j, TaoVariant::Raw) == tao_p(k, l, p, j, TaoVariant::Simplified))
        .collect();
    let mut tao_s_prefix = Vec::with_capacity(alpha_max as usize + 1);
    let mut ts = BigRational::zero();
    for j in 0..=alpha_max {
        ts += &xpow[j as usize] * tao_p(k, l, p, j, TaoVariant::Simplified);
        tao_s_prefix.push(&ts * one_minus_x_pow(p, (k + l - 2) as i32));
    }

    let mut out = Vec::with_capacity(alpha_max as usize + 1);
    for alpha in 0..=alpha_max {
        let a = alpha as usize;
        let num_direct = &jump_prefix[a]
            + rat_int(tau_pp_u(k, alpha) as i64) * (&gen_l - &head_l[a])
            + rat_int(tau_pp_u(l, alpha) as i64) * (&gen_k - &head_k[a]);
        let mut f_direct = &num_direct / &den_direct;
        if let Some(fz) = fault {
            if fz.k == k && fz.l == l && fz.p == p && fz.alpha == alpha {
                f_direct += rat_int(1);
            }
        }
        let f_sigma = &psig[a] / &c_local;
        let f_h = &pth[a] / &c_local;
        let c_local_cf = &c_local * &f_direct;
        let c_local_tao = tao_s_prefix[a].clone();

        let mut ok = f_direct == f_sigma && f_sigma == f_h && c_local_cf == c_local_tao;
        // Series identity: left side from the sigma prefix, right side the
        // direct numerator.
        ok = ok && &psig[a] * &norm == num_direct;
        ok = ok && tao_eq[..=a].iter().all(|&b| b);
        // Expectation ratio against the local constant times f.
        if ok {
            let exy = crate::prob::expect_xy(k, l, p, alpha);
            ok = exy / (&e_x * &e_y) == c_local_cf;
        }
        out.push(LocalFactorReport {
            k,
            l,
            p,
            alpha,
            f_direct,
            f_sigma,
            f_h,
            c_local_cf,
            c_local_tao,
            all_equal: ok,
        });
    }
    // Exercise the re-expansion check once per point.
    let (ls, rs) = lr_series(k, l, p, alpha_max.min(3), alpha_max.min(3) + 2);
    if ls != rs {
        if let Some(r) = out.get_mut(alpha_max.min(3) as usize) {
            r.all_equal = false;
        }
    }
    out
}
