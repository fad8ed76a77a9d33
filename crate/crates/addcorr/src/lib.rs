//! Exact shifted divisor correlation sums `D_{k,l}(x,h) = sum_{n<=x} tau_k(n) tau_l(n+h)`
//! together with the arithmetic constants that govern their growth.
//!
//! The crate has four layers:
//!
//! * [`arith`] — primes, factorization, exact rational arithmetic helpers,
//!   divisor-function point values and bulk sieves.
//! * [`singular`] — exact local factors and Euler products for the leading
//!   constant `c_{k,l}(h)`, in every published form, plus the machinery that
//!   proves the forms pairwise equal on parameter grids.
//! * [`prob`] — closed-form expectations of the local random variables
//!   `X_p(n) = tau_k(p^ord_p(n))` and an exact floor-counting oracle for them.
//! * [`correlation`] — exact correlation sums, the Selberg-type double sum,
//!   the minorant lower-bound sweep, and the proven `k = l = 2` main term.
//!
//! All identity checks are carried out in exact rational arithmetic; floating
//! point only enters where a truncated Euler product or an integral is
//! genuinely real-valued, and every such value travels with a rigorous
//! truncation bound.

pub mod arith;
pub mod correlation;
mod error;
pub mod prob;
pub mod singular;

pub use error::{Error, Result};

/// Default memory cap for sieves and sweeps (4 GiB).
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;
