//! Exact correlation sums `sum_{n<=x} tau_k(n) tau_l(n+h)`, the Selberg-type
//! double sum powering the lower bound, the minorant sweep, the proven
//! `k = l = 2` main term, and the leading-term prediction used in every
//! ratio experiment.
//!
//! Correlation sums are exact integers: divisor tables hold u32 entries and
//! the dot product accumulates in u128, in fixed block order, so results are
//! bit-identical for any thread count.

use std::sync::OnceLock;
use std::time::Instant;

use num::bigint::BigInt;
use num::traits::{One, Zero};
use num::BigRational;
use rayon::prelude::*;

use crate::arith::{
    factorize, primes_up_to, rat_to_f64, sieve_bytes_estimate, tau_sieve_with_cap, DivisorTable,
    FactoredInteger,
};
use crate::error::{Error, Result};
use crate::singular::{c_tilde_constant, g_tilde_multiplicative, SingularConstant};
use crate::DEFAULT_MEMORY_CAP;

/// One correlation experiment at a single range bound.
#[derive(Debug, Clone)]
pub struct CorrelationRecord {
    pub k: u32,
    pub l: u32,
    pub h: u64,
    pub x: u64,
    pub d_exact: u128,
    pub leading_prediction: f64,
    pub ratio: f64,
    /// Proven main-term prediction, filled only for `k = l = 2, h = 1`.
    pub q2_prediction: Option<f64>,
    pub elapsed: f64,
}

/// High-precision constants entering the `k = l = 2` main term.
#[derive(Debug, Clone, Copy)]
pub struct ZetaConstants {
    pub gamma: f64,
    /// zeta'/zeta at 2.
    pub zeta_log_deriv_2: f64,
    /// (zeta'/zeta)' at 2.
    pub zeta_log_deriv_prime_2: f64,
    pub error_bound: f64,
}

fn factorial(n: u32) -> f64 {
    assert!(n <= 34, "factorial range");
    let mut acc = 1u128;
    for i in 2..=n as u128 {
        acc *= i;
    }
    acc as f64
}

/// Exact dot product of two divisor tables along the shift:
/// `sum_{n=1}^{x} tk(n) * tl(n+h)`. Deterministic for any thread count.
pub fn correlation_dot(tk: &DivisorTable, tl: &DivisorTable, h: u64, x: u64) -> Result<u128> {
    if tk.lo() != 1 || tl.lo() != 1 || tk.hi() < x || tl.hi() < x + h {
        return Err(Error::Domain(
            "correlation_dot requires tables over [1, x] and [1, x+h]".into(),
        ));
    }
    let vk = tk.values();
    let vl = tl.values();
    const BLOCK: u64 = 1 << 20;
    let nblocks = x.div_ceil(BLOCK);
    let partials: Vec<u128> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK + 1;
            let hi = ((b + 1) * BLOCK).min(x);
            let mut acc: u128 = 0;
            for n in lo..=hi {
                let a = vk[(n - 1) as usize] as u64;
                let c = vl[(n + h - 1) as usize] as u64;
                acc += (a * c) as u128;
            }
            acc
        })
        .collect();
    // Ascending block order; u128 addition is exact so order only matters
    // for reproducibility of the procedure itself.
    Ok(partials.iter().sum())
}

/// `D_{k,l}(x, h)` exactly, under the default memory cap.
pub fn correlation_sum(k: u32, l: u32, h: u64, x: u64) -> Result<u128> {
    correlation_sum_with_cap(k, l, h, x, DEFAULT_MEMORY_CAP)
}

/// Bytes of table storage `correlation_sum_with_cap` will request.
pub fn correlation_bytes_estimate(k: u32, l: u32, h: u64, x: u64) -> u64 {
    if k == l {
        sieve_bytes_estimate(1, x + h)
    } else {
        sieve_bytes_estimate(1, x) + sieve_bytes_estimate(1, x + h)
    }
}

pub fn correlation_sum_with_cap(k: u32, l: u32, h: u64, x: u64, cap: u64) -> Result<u128> {
    if k < 1 || l < 1 || h < 1 || x < 1 {
        return Err(Error::Domain(
            "correlation_sum requires k, l, h, x >= 1".into(),
        ));
    }
    let required = correlation_bytes_estimate(k, l, h, x);
    if required > cap {
        return Err(Error::Resource { required, cap });
    }
    if k == l {
        let t = tau_sieve_with_cap(k, 1, x + h, cap)?;
        correlation_dot(&t, &t, h, x)
    } else {
        let tk = tau_sieve_with_cap(k, 1, x, cap)?;
        let tl = tau_sieve_with_cap(l, 1, x + h, cap)?;
        correlation_dot(&tk, &tl, h, x)
    }
}

fn zeta_cached() -> &'static ZetaConstants {
    static CACHE: OnceLock<ZetaConstants> = OnceLock::new();
    CACHE.get_or_init(|| zeta_constants(1e-13).expect("fixed-precision evaluation"))
}

/// One record per range bound, sharing a single sieve pass across the grid.
/// `xs` must be ascending. `D` values are cumulative in `x`.
pub fn correlation_grid(
    k: u32,
    l: u32,
    h: u64,
    xs: &[u64],
    constant: &SingularConstant,
) -> Result<Vec<CorrelationRecord>> {
    correlation_grid_with_cap(k, l, h, xs, constant, DEFAULT_MEMORY_CAP)
}

pub fn correlation_grid_with_cap(
    k: u32,
    l: u32,
    h: u64,
    xs: &[u64],
    constant: &SingularConstant,
    cap: u64,
) -> Result<Vec<CorrelationRecord>> {
    if xs.is_empty() {
        return Err(Error::Domain("correlation_grid needs at least one x".into()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("correlation_grid needs strictly ascending x".into()));
    }
    let start = Instant::now();
    let x_max = *xs.last().unwrap();
    let required = correlation_bytes_estimate(k, l, h, x_max);
    if required > cap {
        return Err(Error::Resource { required, cap });
    }
    let (tk, tl);
    if k == l {
        tk = tau_sieve_with_cap(k, 1, x_max + h, cap)?;
        tl = None;
    } else {
        tk = tau_sieve_with_cap(k, 1, x_max, cap)?;
        tl = Some(tau_sieve_with_cap(l, 1, x_max + h, cap)?);
    }
    let second: &DivisorTable = tl.as_ref().unwrap_or(&tk);

    let mut out = Vec::with_capacity(xs.len());
    let mut acc: u128 = 0;
    let mut n = 1u64;
    for &x in xs {
        while n <= x {
            acc += (tk.get(n) * second.get(n + h)) as u128;
            n += 1;
        }
        let leading = leading_prediction(k, l, h, x, constant)?;
        let q2 = if k == 2 && l == 2 && h == 1 {
            q2_main_term(x as f64, 1, zeta_cached(), false).ok()
        } else {
            None
        };
        out.push(CorrelationRecord {
            k,
            l,
            h,
            x,
            d_exact: acc,
            leading_prediction: leading,
            ratio: acc as f64 / leading,
            q2_prediction: q2,
            elapsed: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Conjectured leading term `c * x * (log x)^{k+l-2} / ((k-1)!(l-1)!)`.
pub fn leading_prediction(
    k: u32,
    l: u32,
    _h: u64,
    x: u64,
    constant: &SingularConstant,
) -> Result<f64> {
    if k < 2 || l < 2 {
        return Err(Error::Domain("leading_prediction requires k, l >= 2".into()));
    }
    if x < 3 {
        return Err(Error::Domain("leading_prediction requires x >= 3".into()));
    }
    let lx = (x as f64).ln();
    Ok(constant.c() * x as f64 * lx.powi((k + l - 2) as i32) / (factorial(k - 1) * factorial(l - 1)))
}

/// Theorem floor: the leading prediction scaled by `2^{-(k+l-2)}`.
/// The `O(log log h / log x)` correction is not folded in; see
/// [`lower_bound_uncertainty`].
pub fn lower_bound_rhs(
    k: u32,
    l: u32,
    h: u64,
    x: u64,
    constant: &SingularConstant,
) -> Result<f64> {
    if k < 3 || l < 3 {
        return Err(Error::Domain(
            "lower_bound_rhs requires k, l >= 3 (theorem hypothesis)".into(),
        ));
    }
    Ok(leading_prediction(k, l, h, x, constant)? / 2f64.powi((k + l - 2) as i32))
}

/// Relative scale of the unquantified `O(log log h / log x)` band attached
/// to the lower bound; reported alongside, never folded into the floor.
pub fn lower_bound_uncertainty(h: u64, x: u64) -> f64 {
    ((h.max(3) as f64).ln()).ln() / (x as f64).ln()
}

const SELBERG_EXACT_CAP: u64 = 10_000;
const SELBERG_FLOAT_CAP: u64 = 100_000;

fn mobius_sieve(n: u64) -> Vec<i8> {
    let n = n as usize;
    let mut mu = vec![0i8; n + 1];
    let mut spf = vec![0u32; n + 1];
    let mut primes: Vec<u32> = Vec::new();
    if n >= 1 {
        mu[1] = 1;
    }
    for i in 2..=n {
        if spf[i] == 0 {
            spf[i] = i as u32;
            mu[i] = -1;
            primes.push(i as u32);
        }
        for &p in &primes {
            let p = p as usize;
            if p > spf[i] as usize {
                break;
            }
            let m = match i.checked_mul(p) {
                Some(m) if m <= n => m,
                _ => break,
            };
            spf[m] = p as u32;
            mu[m] = if i % p == 0 { 0 } else { -mu[i] };
            if i % p == 0 {
                break;
            }
        }
    }
    mu
}

fn lcm_upto(m: u64) -> BigInt {
    let mut acc = BigInt::one();
    if m >= 2 {
        for p in primes_up_to(m).expect("m >= 2") {
            let mut q = p;
            while q <= m / p {
                q *= p;
            }
            acc *= BigInt::from(q);
        }
    }
    acc
}

/// Exact Selberg-type sum `sum_{a,b<=X, (a,b)|h} tau_k(a) tau_l(b) / [a,b]`,
/// via the gcd-class decomposition: pairs are grouped by `g = (a,b) | h` and
/// the coprimality inside a class is unfolded with the Moebius function. All
/// inner sums run over the common denominator `lcm(1..X/g)`.
pub fn selberg_sum(k: u32, l: u32, h: u64, x: u64) -> Result<BigRational> {
    if k < 1 || l < 1 || h < 1 || x < 1 {
        return Err(Error::Domain("selberg_sum requires k, l, h, x >= 1".into()));
    }
    if x > SELBERG_EXACT_CAP {
        return Err(Error::Resource {
            required: x,
            cap: SELBERG_EXACT_CAP,
        });
    }
    let tk = tau_sieve_with_cap(k, 1, x, DEFAULT_MEMORY_CAP)?;
    let tl = if l == k {
        None
    } else {
        Some(tau_sieve_with_cap(l, 1, x, DEFAULT_MEMORY_CAP)?)
    };
    let tl_ref = tl.as_ref().unwrap_or(&tk);
    let mu = mobius_sieve(x);

    let mut divisors = factorize(h)?.divisors();
    divisors.sort_unstable();
    let mut total = BigRational::zero();
    for g in divisors {
        if g > x {
            continue;
        }
        let m = x / g;
        let common = lcm_upto(m);
        // common / c for every c in the class.
        let mut pre = Vec::with_capacity(m as usize + 1);
        pre.push(BigInt::zero()); // unused index 0
        for c in 1..=m {
            pre.push(&common / BigInt::from(c));
        }
        let mut inner = BigInt::zero();
        for e in 1..=m {
            if mu[e as usize] == 0 {
                continue;
            }
            let mut nk = BigInt::zero();
            let mut nl = BigInt::zero();
            let mut c = e;
            while c <= m {
                nk += &pre[c as usize] * BigInt::from(tk.get(g * c));
                nl += &pre[c as usize] * BigInt::from(tl_ref.get(g * c));
                c += e;
            }
            let term = nk * nl;
            if mu[e as usize] > 0 {
                inner += term;
            } else {
                inner -= term;
            }
        }
        total += BigRational::new(inner, BigInt::from(g) * (&common * &common));
    }
    Ok(total)
}

/// Compensated float evaluation of the same double sum, in fixed `(a, b)`
/// lexicographic order. Meant for range bounds beyond the exact cap.
pub fn selberg_sum_f64(k: u32, l: u32, h: u64, x: u64) -> Result<f64> {
    if k < 1 || l < 1 || h < 1 || x < 1 {
        return Err(Error::Domain("selberg_sum_f64 requires k, l, h, x >= 1".into()));
    }
    if x > SELBERG_FLOAT_CAP {
        return Err(Error::Resource {
            required: x,
            cap: SELBERG_FLOAT_CAP,
        });
    }
    let tk = tau_sieve_with_cap(k, 1, x, DEFAULT_MEMORY_CAP)?;
    let tl = if l == k {
        None
    } else {
        Some(tau_sieve_with_cap(l, 1, x, DEFAULT_MEMORY_CAP)?)
    };
    let tl_ref = tl.as_ref().unwrap_or(&tk);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for a in 1..=x {
        let ta = tk.get(a) as f64;
        for b in 1..=x {
            let g = num::integer::gcd(a, b);
            if h % g != 0 {
                continue;
            }
            let lcm = a / g * b;
            let term = ta * tl_ref.get(b) as f64 / lcm as f64;
            // Kahan update.
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
    }
    Ok(sum)
}

/// Main term of the Selberg-type sum:
/// `C~ * g~(h) * (log X)^{k+l} / (k! l!)`.
pub fn selberg_leading(k: u32, l: u32, h: u64, x: u64, prime_limit: u64) -> Result<f64> {
    if x < 3 {
        return Err(Error::Domain("selberg_leading requires X >= 3".into()));
    }
    let (c_tilde, _) = c_tilde_constant(k, l, prime_limit)?;
    let g = g_tilde_multiplicative(k, l, &factorize(h)?)?;
    let lx = (x as f64).ln();
    Ok(c_tilde * rat_to_f64(&g) * lx.powi((k + l) as i32) / (factorial(k) * factorial(l)))
}

/// Exact minorant sum
/// `sum_{sqrt(x)<=n<=x} (sum_{a|n, a<=sqrt(x)} tau_{k-1}(a)) (sum_{b|n+h, b<=sqrt(x+h)} tau_{l-1}(b))`,
/// by a divisor-marking sweep. Always at most the correlation sum at the
/// same arguments.
pub fn minorant_sum(k: u32, l: u32, h: u64, x: u64) -> Result<u128> {
    minorant_sum_with_cap(k, l, h, x, DEFAULT_MEMORY_CAP)
}

pub fn minorant_sum_with_cap(k: u32, l: u32, h: u64, x: u64, cap: u64) -> Result<u128> {
    if k < 3 || l < 3 {
        return Err(Error::Domain("minorant_sum requires k, l >= 3".into()));
    }
    if x < 4 || h < 1 {
        return Err(Error::Domain("minorant_sum requires x >= 4, h >= 1".into()));
    }
    let sx = x.isqrt();
    let n0 = if sx * sx == x { sx } else { sx + 1 };
    let len = (x - n0 + 1) as usize;
    let required = 8 * len as u64 + sieve_bytes_estimate(1, (x + h).isqrt());
    if required > cap {
        return Err(Error::Resource { required, cap });
    }
    let sxh = (x + h).isqrt();
    let ta = tau_sieve_with_cap(k - 1, 1, sx, cap)?;
    let tb = tau_sieve_with_cap(l - 1, 1, sxh, cap)?;

    let mut va = vec![0u32; len];
    for a in 1..=sx {
        let t = ta.get(a) as u32;
        let mut m = n0.div_ceil(a) * a;
        while m <= x {
            va[(m - n0) as usize] += t;
            m += a;
        }
    }
    let mut vb = vec![0u32; len];
    let lo_b = n0 + h;
    let hi_b = x + h;
    for b in 1..=sxh {
        let t = tb.get(b) as u32;
        let mut m = lo_b.div_ceil(b) * b;
        while m <= hi_b {
            vb[(m - lo_b) as usize] += t;
            m += b;
        }
    }
    let mut acc: u128 = 0;
    for i in 0..len {
        acc += (va[i] as u64 * vb[i] as u64) as u128;
    }
    Ok(acc)
}

// --- constants via Euler-Maclaurin -----------------------------------------

const BERNOULLI_2J: [f64; 4] = [
    1.0 / 6.0,   // B2
    -1.0 / 30.0, // B4
    1.0 / 42.0,  // B6
    -1.0 / 30.0, // B8
];

/// `f(t) = (sum_i coeffs[i] ln^i t) * t^{-s}` with symbolic differentiation.
#[derive(Clone)]
struct LogPoly {
    coeffs: Vec<f64>,
    s: i32,
}

impl LogPoly {
    fn new(coeffs: Vec<f64>, s: i32) -> Self {
        LogPoly { coeffs, s }
    }

    fn eval(&self, t: f64) -> f64 {
        let lt = t.ln();
        let mut poly = 0.0;
        for &c in self.coeffs.iter().rev() {
            poly = poly * lt + c;
        }
        poly * t.powi(-self.s)
    }

    fn derivative(&self) -> LogPoly {
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                out[i - 1] += i as f64 * c;
            }
            out[i] -= self.s as f64 * c;
        }
        LogPoly::new(out, self.s + 1)
    }

    /// `int_n^inf ln^i t * t^{-s} dt` combined over the coefficient vector;
    /// requires `s >= 2`. With `abs` set, coefficients enter by magnitude,
    /// giving an upper bound for the integral of |f|.
    fn tail_integral(&self, n: f64, abs: bool) -> f64 {
        assert!(self.s >= 2);
        let s1 = (self.s - 1) as f64;
        let ln_n = n.ln();
        let base = n.powi(-(self.s - 1));
        // I(i) = ln^i n * n^{1-s}/(s-1) + (i/(s-1)) I(i-1)
        let mut table = vec![0.0f64; self.coeffs.len()];
        for i in 0..self.coeffs.len() {
            let lead = ln_n.powi(i as i32) * base / s1;
            table[i] = if i == 0 {
                lead
            } else {
                lead + i as f64 / s1 * table[i - 1]
            };
        }
        self.coeffs
            .iter()
            .zip(&table)
            .map(|(&c, &i)| if abs { c.abs() * i } else { c * i })
            .sum()
    }
}

/// `sum_{n=1}^inf f(n)` for `f = ln^a t / t^2`: direct sum to `n0`, then the
/// Euler-Maclaurin tail with three Bernoulli corrections. Returns the value
/// and a rigorous remainder bound.
fn em_log_power_sum(a: usize, n0: u64) -> (f64, f64) {
    let mut coeffs = vec![0.0; a + 1];
    coeffs[a] = 1.0;
    let f = LogPoly::new(coeffs, 2);

    let mut direct = 0.0f64;
    let mut comp = 0.0f64;
    for n in 1..n0 {
        let term = f.eval(n as f64);
        let y = term - comp;
        let t = direct + y;
        comp = (t - direct) - y;
        direct = t;
    }
    let nf = n0 as f64;
    let mut tail = f.tail_integral(nf, false) + 0.5 * f.eval(nf);
    // Odd derivatives f', f''', f^(5) paired with B2/2!, B4/4!, B6/6!.
    let mut deriv = f.derivative();
    let mut fact = 1.0f64;
    for j in 1..=3u32 {
        if j > 1 {
            deriv = deriv.derivative().derivative();
        }
        fact *= (2 * j - 1) as f64 * (2 * j) as f64;
        tail -= BERNOULLI_2J[(j - 1) as usize] / fact * deriv.eval(nf);
    }
    // Remainder bound through the sixth derivative: |B6|/6! * int |f^(6)|.
    let d6 = deriv.derivative();
    let bound = BERNOULLI_2J[2].abs() / 720.0 * d6.tail_integral(nf, true);
    (direct + tail, bound)
}

fn euler_gamma(n0: u64) -> (f64, f64) {
    let mut h = 0.0f64;
    let mut comp = 0.0f64;
    for n in 1..=n0 {
        let term = 1.0 / n as f64;
        let y = term - comp;
        let t = h + y;
        comp = (t - h) - y;
        h = t;
    }
    let nf = n0 as f64;
    let mut g = h - nf.ln() - 0.5 / nf;
    let mut npow = nf * nf;
    for j in 1..=3u32 {
        g += BERNOULLI_2J[(j - 1) as usize] / (2 * j) as f64 / npow;
        npow *= nf * nf;
    }
    let bound = BERNOULLI_2J[3].abs() / 8.0 / npow;
    (g, bound)
}

pub(crate) fn zeta_constants_at(n0: u64) -> ZetaConstants {
    let (gamma, b_g) = euler_gamma(n0);
    let (z2, b0) = em_log_power_sum(0, n0);
    let (s1, b1) = em_log_power_sum(1, n0);
    let (s2, b2) = em_log_power_sum(2, n0);
    let zp = -s1; // zeta'(2)
    let zpp = s2; // zeta''(2)
    let log_deriv = zp / z2;
    let log_deriv_prime = zpp / z2 - log_deriv * log_deriv;
    // Truncation bounds plus a float-rounding allowance for the O(n0) sums.
    let rounding = 40.0 * f64::EPSILON;
    let error_bound = (b_g + b0 + b1 + b2) * 4.0 + rounding;
    ZetaConstants {
        gamma,
        zeta_log_deriv_2: log_deriv,
        zeta_log_deriv_prime_2: log_deriv_prime,
        error_bound,
    }
}

/// Euler's constant, `zeta'/zeta(2)`, and `(zeta'/zeta)'(2)` by
/// Euler-Maclaurin evaluation with a rigorous remainder.
pub fn zeta_constants(precision_target: f64) -> Result<ZetaConstants> {
    if precision_target < 1e-14 {
        return Err(Error::Domain(format!(
            "precision target {precision_target:e} below attainable 1e-14"
        )));
    }
    let z = zeta_constants_at(100_000);
    if z.error_bound > precision_target {
        return Err(Error::Domain(format!(
            "cannot certify {precision_target:e}; bound is {:e}",
            z.error_bound
        )));
    }
    Ok(z)
}

/// Coefficients of the `k = l = 2` main-term integrand at `h = 1`:
/// `q2(t) = log t log(t+1) + lin * log(t(t+1)) + constant`.
#[derive(Debug, Clone, Copy)]
pub struct Q2Coeffs {
    pub lead: f64,
    pub lin: f64,
    pub constant: f64,
}

/// The printed polynomial carries `2g - z` on the linear term but `2g - 2z`
/// inside the constant, with `g` Euler's constant and `z = zeta'/zeta(2)`.
/// `symmetrize` substitutes `2g - 2z` in both places.
pub fn q2_coeffs(constants: &ZetaConstants, symmetrize: bool) -> Q2Coeffs {
    let two_gamma = 2.0 * constants.gamma;
    let z = constants.zeta_log_deriv_2;
    let lin = if symmetrize {
        two_gamma - 2.0 * z
    } else {
        two_gamma - z
    };
    let c = (two_gamma - 2.0 * z).powi(2) - 4.0 * constants.zeta_log_deriv_prime_2;
    Q2Coeffs {
        lead: 1.0,
        lin,
        constant: c,
    }
}

// 15-point Kronrod extension of 7-point Gauss, positive half.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut kron = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (fl, fr) = (f(c - hw * x), f(c + hw * x));
        // The center node is counted once and belongs to both rules.
        let pair = if x == 0.0 { fl } else { fl + fr };
        kron += wk * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kron * hw, (kron - gauss) * hw)
}

/// Adaptive Gauss-Kronrod integration of a smooth integrand to a relative
/// tolerance.
fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let (whole, _) = gk15(f, a, b);
    let global_tol = rel_tol * whole.abs().max(1e-300);
    let span = b - a;
    let mut stack = vec![(a, b)];
    let mut total = 0.0;
    while let Some((lo, hi)) = stack.pop() {
        let (val, err) = gk15(f, lo, hi);
        let budget = global_tol * ((hi - lo) / span).max(f64::MIN_POSITIVE);
        if err.abs() <= budget || hi - lo < 1e-12 * span {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid));
            stack.push((mid, hi));
        }
    }
    total
}

/// Proven main term for `k = l = 2`: `(6/pi^2) int_0^x q2(t, 1) dt`. The
/// integrand is extended by zero on `(0, 1)`, where the printed lower limit
/// collides with the logarithmic singularity; the convention is documented
/// with the integral, not hidden in it. Only `h = 1` is supported: for
/// larger shifts the printed weight normalization is ambiguous.
pub fn q2_main_term(x: f64, h: u64, constants: &ZetaConstants, symmetrize: bool) -> Result<f64> {
    if h != 1 {
        return Err(Error::Unsupported(format!(
            "q2_main_term is restricted to h = 1 (got h = {h}): the printed \
             divisor weight sum_d d (log d)^j is inconsistent with the known \
             sigma_{{-1}} asymptotic, so no normalization is assumed"
        )));
    }
    if x < 10.0 {
        return Err(Error::Domain("q2_main_term requires x >= 10".into()));
    }
    let q = q2_coeffs(constants, symmetrize);
    let f = |t: f64| {
        q.lead * t.ln() * (t + 1.0).ln() + q.lin * (t * (t + 1.0)).ln() + q.constant
    };
    let integral = integrate_adaptive(&f, 1.0, x, 1e-9);
    Ok(6.0 / std::f64::consts::PI.powi(2) * integral)
}

/// `sigma^(j)(h) = sum_{d|h} d (log d)^j`, exactly as printed.
pub fn sigma_weighted(h: &FactoredInteger, j: u32) -> f64 {
    assert!(j <= 2, "sigma_weighted supports j in 0..=2");
    h.divisors()
        .iter()
        .map(|&d| d as f64 * (d as f64).ln().powi(j as i32))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, tau_sieve};
    use crate::singular::c_of_h;

    fn tau_table(k: u32, hi: u64) -> DivisorTable {
        tau_sieve(k, 1, hi).unwrap()
    }

    fn brute_correlation(k: u32, l: u32, h: u64, x: u64) -> u128 {
        (1..=x)
            .map(|n| (tk_point(k, n) * tk_point(l, n + h)) as u128)
            .sum()
    }

    fn tk_point(k: u32, n: u64) -> u64 {
        crate::arith::tau_point(k, &factorize(n).unwrap())
    }

    #[test]
    fn correlation_known_value() {
        assert_eq!(correlation_sum(2, 2, 1, 10).unwrap(), 74);
    }

    #[test]
    fn correlation_trivial_orders() {
        // tau_1 is identically 1, so D_{1,1} = x.
        for x in [1u64, 7, 100] {
            assert_eq!(correlation_sum(1, 1, 3, x).unwrap(), x as u128);
        }
        // D_{1,l}(x,h) = sum_{n<=x} tau_l(n+h), cross-checked on the table.
        let t = tau_table(3, 120);
        let direct: u128 = (1..=100u64).map(|n| t.get(n + 7) as u128).sum();
        assert_eq!(correlation_sum(1, 3, 7, 100).unwrap(), direct);
    }

    #[test]
    fn correlation_matches_brute_force() {
        assert_eq!(
            correlation_sum(2, 3, 2, 10).unwrap(),
            brute_correlation(2, 3, 2, 10)
        );
        assert_eq!(
            correlation_sum(3, 2, 5, 200).unwrap(),
            brute_correlation(3, 2, 5, 200)
        );
    }

    #[test]
    fn correlation_symmetry_reindexed() {
        // D_{k,k}(x,h) counts the same products as sum_{h<m<=x+h} tau(m-h) tau(m).
        let (k, h, x) = (3u32, 4u64, 500u64);
        let t = tau_table(k, x + h);
        let reindexed: u128 = (h + 1..=x + h).map(|m| (t.get(m - h) * t.get(m)) as u128).sum();
        assert_eq!(correlation_sum(k, k, h, x).unwrap(), reindexed);
    }

    #[test]
    fn correlation_monotone_in_x() {
        let mut prev = 0u128;
        for x in [10u64, 50, 100, 500] {
            let d = correlation_sum(2, 2, 3, x).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn correlation_thread_invariance() {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| correlation_sum(3, 2, 1, 30_000).unwrap());
        let b = four.install(|| correlation_sum(3, 2, 1, 30_000).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn correlation_resource_cap() {
        match correlation_sum_with_cap(2, 2, 1, 50_000_000, 1 << 20) {
            Err(Error::Resource { required, cap }) => {
                assert!(required > cap);
            }
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn grid_is_cumulative_and_consistent() {
        let c = c_of_h(2, 2, 1, 1000).unwrap();
        let recs = correlation_grid(2, 2, 1, &[10, 100, 1000], &c).unwrap();
        assert_eq!(recs[0].d_exact, 74);
        assert!(recs[0].d_exact <= recs[1].d_exact);
        assert!(recs[1].d_exact <= recs[2].d_exact);
        for r in &recs {
            assert_eq!(
                r.d_exact,
                correlation_sum(2, 2, 1, r.x).unwrap(),
                "x = {}",
                r.x
            );
            assert!(r.q2_prediction.is_some());
        }
        // Singleton grid agrees with the plain sum.
        let single = correlation_grid(2, 2, 1, &[57], &c).unwrap();
        assert_eq!(single[0].d_exact, correlation_sum(2, 2, 1, 57).unwrap());
        assert!(correlation_grid(2, 2, 1, &[5, 5], &c).is_err());
    }

    #[test]
    fn leading_prediction_plugin() {
        let c = c_of_h(2, 2, 1, 1000).unwrap();
        let x = std::f64::consts::E.powi(2).ceil() as u64; // 8
        let v = leading_prediction(2, 2, 1, x, &c).unwrap();
        let expect = c.c() * x as f64 * (x as f64).ln().powi(2);
        assert!((v / expect - 1.0).abs() < 1e-15);
        assert!(leading_prediction(1, 2, 1, 100, &c).is_err());
        assert!(leading_prediction(2, 2, 1, 2, &c).is_err());
    }

    #[test]
    fn leading_prediction_desk_recompute() {
        let c = c_of_h(3, 3, 1, 10_000).unwrap();
        let v = leading_prediction(3, 3, 1, 1_000_000, &c).unwrap();
        // Independent order of operations.
        let lx = (1_000_000f64).ln();
        let desk = (c.c() / 4.0) * lx.powi(4) * 1e6;
        assert!((v / desk - 1.0).abs() < 1e-12);
        assert!(v > 0.0);
    }

    fn brute_selberg(k: u32, l: u32, h: u64, x: u64) -> BigRational {
        let mut acc = BigRational::zero();
        for a in 1..=x {
            for b in 1..=x {
                let g = num::integer::gcd(a, b);
                if h % g != 0 {
                    continue;
                }
                let lcm = a / g * b;
                let t = tk_point(k, a) * tk_point(l, b);
                acc += BigRational::new(BigInt::from(t), BigInt::from(lcm));
            }
        }
        acc
    }

    #[test]
    fn selberg_known_values() {
        assert_eq!(selberg_sum(2, 2, 1, 2).unwrap(), rat(3, 1));
        assert_eq!(selberg_sum(2, 2, 2, 2).unwrap(), rat(5, 1));
        assert_eq!(selberg_sum(4, 3, 9, 1).unwrap(), BigRational::one());
    }

    #[test]
    fn selberg_matches_brute_force() {
        for &(k, l, h, x) in &[(2u32, 2u32, 1u64, 30u64), (2, 3, 6, 25), (3, 3, 4, 40)] {
            assert_eq!(
                selberg_sum(k, l, h, x).unwrap(),
                brute_selberg(k, l, h, x),
                "k={k} l={l} h={h} x={x}"
            );
        }
    }

    #[test]
    fn selberg_float_matches_exact() {
        let exact = rat_to_f64(&selberg_sum(2, 2, 2, 200).unwrap());
        let float = selberg_sum_f64(2, 2, 2, 200).unwrap();
        assert!((float / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn selberg_monotone() {
        // Nondecreasing in X and in divisibility-ordered h.
        let s1 = selberg_sum(2, 2, 1, 50).unwrap();
        let s2 = selberg_sum(2, 2, 1, 100).unwrap();
        assert!(s2 >= s1);
        let h1 = selberg_sum(2, 2, 2, 100).unwrap();
        let h2 = selberg_sum(2, 2, 4, 100).unwrap();
        assert!(h1 >= s2);
        assert!(h2 >= h1);
    }

    #[test]
    fn selberg_exact_cap() {
        assert!(matches!(
            selberg_sum(2, 2, 1, 20_000),
            Err(Error::Resource { .. })
        ));
    }

    fn brute_minorant(k: u32, l: u32, h: u64, x: u64) -> u128 {
        let sx = x.isqrt();
        let n0 = if sx * sx == x { sx } else { sx + 1 };
        let sxh = (x + h).isqrt();
        let mut acc = 0u128;
        for n in n0..=x {
            let sa: u64 = (1..=sx).filter(|a| n % a == 0).map(|a| tk_point(k - 1, a)).sum();
            let sb: u64 = (1..=sxh)
                .filter(|b| (n + h) % b == 0)
                .map(|b| tk_point(l - 1, b))
                .sum();
            acc += (sa * sb) as u128;
        }
        acc
    }

    #[test]
    fn minorant_values_and_domination() {
        assert_eq!(minorant_sum(3, 3, 1, 4).unwrap(), brute_minorant(3, 3, 1, 4));
        for &(k, l, h, x) in &[(3u32, 3u32, 1u64, 100u64), (3, 4, 5, 120), (4, 4, 2, 80)] {
            let m = minorant_sum(k, l, h, x).unwrap();
            assert_eq!(m, brute_minorant(k, l, h, x), "brute {k} {l} {h} {x}");
            assert!(m <= correlation_sum(k, l, h, x).unwrap());
        }
        assert!(minorant_sum(2, 3, 1, 100).is_err());
    }

    #[test]
    fn lower_bound_scaling() {
        let c = c_of_h(3, 3, 1, 1000).unwrap();
        let lead = leading_prediction(3, 3, 1, 1000, &c).unwrap();
        let rhs = lower_bound_rhs(3, 3, 1, 1000, &c).unwrap();
        assert!((rhs * 16.0 / lead - 1.0).abs() < 1e-15);
        let c34 = c_of_h(3, 4, 1, 1000).unwrap();
        let lead34 = leading_prediction(3, 4, 1, 1000, &c34).unwrap();
        let rhs34 = lower_bound_rhs(3, 4, 1, 1000, &c34).unwrap();
        assert!((rhs34 * 32.0 / lead34 - 1.0).abs() < 1e-15);
        assert!(lower_bound_rhs(2, 3, 1, 1000, &c).is_err());
    }

    #[test]
    fn zeta_constants_reference_digits() {
        let z = zeta_constants(1e-12).unwrap();
        assert!((z.gamma - 0.5772156649015329).abs() < 1e-13);
        assert!((z.zeta_log_deriv_2 - (-0.5699609)).abs() < 1e-6);
        assert!(z.error_bound <= 1e-12);
        assert!(zeta_constants(1e-15).is_err());
    }

    #[test]
    fn zeta_constants_doubled_truncation() {
        let a = zeta_constants_at(100_000);
        let b = zeta_constants_at(200_000);
        assert!((a.gamma - b.gamma).abs() <= a.error_bound);
        assert!((a.zeta_log_deriv_2 - b.zeta_log_deriv_2).abs() <= a.error_bound);
        assert!((a.zeta_log_deriv_prime_2 - b.zeta_log_deriv_prime_2).abs() <= a.error_bound);
    }

    #[test]
    fn q2_structural_properties() {
        let z = zeta_cached();
        // The leading coefficient of log t log(t+1) is exactly 1.
        assert_eq!(q2_coeffs(z, false).lead, 1.0);
        assert_eq!(q2_coeffs(z, true).lead, 1.0);
        assert!(q2_main_term(50.0, 1, z, false).unwrap() > 0.0);
        // Growth bracket at 1e6: value(2x)/value(x) within (2, 2.3).
        let v1 = q2_main_term(1e6, 1, z, false).unwrap();
        let v2 = q2_main_term(2e6, 1, z, false).unwrap();
        assert!(v2 / v1 > 2.0 && v2 / v1 < 2.3, "ratio {}", v2 / v1);
        assert!(matches!(q2_main_term(1e6, 2, z, false), Err(Error::Unsupported(_))));
        assert!(q2_main_term(5.0, 1, z, false).is_err());
    }

    #[test]
    fn sigma_weighted_values() {
        let h1 = factorize(1).unwrap();
        assert_eq!(sigma_weighted(&h1, 0), 1.0);
        assert_eq!(sigma_weighted(&h1, 1), 0.0);
        let h2 = factorize(2).unwrap();
        assert!((sigma_weighted(&h2, 1) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((sigma_weighted(&h2, 0) - 3.0).abs() < 1e-15);
    }
}
