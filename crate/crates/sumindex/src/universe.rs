//! Arithmetic for the element universe: integers modulo the Mersenne
//! prime `p = 2^61 - 1`.
//!
//! The universe has to be closed under addition. A prime field of this
//! size keeps the shifted-multiply family in [`crate::hashing`] exactly
//! pairwise independent before range reduction, and the Mersenne form
//! gives branch-light reduction on 64-bit words.

use std::fmt;
use std::ops::{Add, Mul};

use rand::Rng;

/// The universe modulus, `p = 2^61 - 1`.
pub const MODULUS: u64 = (1u64 << 61) - 1;

/// An element of `Z_p` held as its canonical representative.
///
/// Canonical form (`0 <= value < p`) is enforced at construction, never
/// at use sites.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u64);

/// Folds `x < 2^62` once; result is canonical.
#[inline]
fn reduce62(x: u64) -> u64 {
    let r = (x & MODULUS) + (x >> 61);
    if r >= MODULUS {
        r - MODULUS
    } else {
        r
    }
}

/// Folds a double-width product `x < 2^122` down to canonical form.
#[inline]
fn reduce122(x: u128) -> u64 {
    let lo = (x as u64) & MODULUS;
    let hi = (x >> 61) as u64;
    reduce62(lo + hi)
}

impl Element {
    /// Wraps a canonical representative. Panics if `value >= p`.
    #[inline]
    pub fn new(value: u64) -> Element {
        assert!(value < MODULUS, "element {value} not canonical (>= p)");
        Element(value)
    }

    /// Reduces an arbitrary 64-bit integer into the field.
    #[inline]
    pub fn reduce(value: u64) -> Element {
        Element(reduce62(reduce62(value)))
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    /// `(self * other) mod p` via a double-width intermediate.
    #[inline]
    pub fn mul_mod(self, other: Element) -> Element {
        Element(reduce122(self.0 as u128 * other.0 as u128))
    }

    /// Draws a uniform element of `[0, p)`; deterministic given the rng
    /// state.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Element {
        Element(rng.random_range(0..MODULUS))
    }
}

impl Add for Element {
    type Output = Element;

    #[inline]
    fn add(self, rhs: Element) -> Element {
        // both operands canonical, so the sum is < 2^62
        Element(reduce62(self.0 + rhs.0))
    }
}

impl Mul for Element {
    type Output = Element;

    #[inline]
    fn mul(self, rhs: Element) -> Element {
        self.mul_mod(rhs)
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element({})", self.0)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
