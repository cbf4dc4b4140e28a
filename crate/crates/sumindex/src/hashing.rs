//! The pairwise independent hash family `h: U -> [M]`, realized as
//! `x -> ((a*x + b) mod p) mod M` with `a` nonzero.
//!
//! Over `Z_p` the family is exactly pairwise independent; the final
//! `mod M` makes it almost pairwise independent with additive error at
//! most `M/p`, which is negligible for every range used here (`M <= p`).
//! Nothing downstream relies on the bound for correctness: the index
//! verification pass provides the deterministic guarantee.

use rand::Rng;

use crate::universe::{Element, MODULUS};

/// One member of the hash family, stored in O(1) words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairwiseHash {
    multiplier: Element,
    offset: Element,
    range_size: u64,
}

impl PairwiseHash {
    /// Draws `a` uniform in `[1, p)` and `b` uniform in `[0, p)`.
    /// Panics unless `1 <= range_size <= p`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, range_size: u64) -> PairwiseHash {
        assert!(
            range_size >= 1 && range_size <= MODULUS,
            "hash range {range_size} outside [1, p]"
        );
        let multiplier = Element::new(rng.random_range(1..MODULUS));
        let offset = Element::new(rng.random_range(0..MODULUS));
        PairwiseHash {
            multiplier,
            offset,
            range_size,
        }
    }

    /// Reassembles a hash from stored parameters (deserialization,
    /// fixtures). Same domain checks as [`PairwiseHash::sample`].
    pub fn from_parts(multiplier: u64, offset: u64, range_size: u64) -> PairwiseHash {
        assert!(
            range_size >= 1 && range_size <= MODULUS,
            "hash range {range_size} outside [1, p]"
        );
        assert!(multiplier >= 1, "hash multiplier must be nonzero");
        PairwiseHash {
            multiplier: Element::new(multiplier),
            offset: Element::new(offset),
            range_size,
        }
    }

    /// `((a*x + b) mod p) mod M`.
    #[inline]
    pub fn eval(&self, x: Element) -> u64 {
        (self.multiplier.mul_mod(x) + self.offset).value() % self.range_size
    }

    #[inline]
    pub fn range_size(&self) -> u64 {
        self.range_size
    }

    #[inline]
    pub fn multiplier(&self) -> u64 {
        self.multiplier.value()
    }

    #[inline]
    pub fn offset(&self) -> u64 {
        self.offset.value()
    }
}

/// Fraction of `trials` freshly sampled hashes under which `x` and `y`
/// collide. Statistical validation helper; panics if `x == y` or
/// `trials == 0`.
pub fn collision_rate<R: Rng + ?Sized>(
    x: Element,
    y: Element,
    range_size: u64,
    trials: u64,
    rng: &mut R,
) -> f64 {
    assert!(x != y, "collision rate needs distinct inputs");
    assert!(trials >= 1, "collision rate needs at least one trial");
    let mut collisions = 0u64;
    for _ in 0..trials {
        let h = PairwiseHash::sample(rng, range_size);
        if h.eval(x) == h.eval(y) {
            collisions += 1;
        }
    }
    collisions as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn identity_parameters() {
        let h = PairwiseHash::from_parts(1, 0, MODULUS);
        assert_eq!(h.eval(Element::new(42)), 42);
        let h10 = PairwiseHash::from_parts(1, 0, 10);
        assert_eq!(h10.eval(Element::new(MODULUS - 1)), (MODULUS - 1) % 10);
    }

    /// Independent wide-integer evaluation of the defining formula.
    #[test]
    fn matches_big_integer_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let m = rng.random_range(1..=MODULUS);
            let h = PairwiseHash::sample(&mut rng, m);
            let x = Element::sample(&mut rng);
            let expect = ((h.multiplier() as u128 * x.value() as u128 + h.offset() as u128)
                % MODULUS as u128)
                % m as u128;
            assert_eq!(h.eval(x) as u128, expect);
            assert!(h.eval(x) < m);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut r1 = ChaCha20Rng::seed_from_u64(5);
        let mut r2 = ChaCha20Rng::seed_from_u64(5);
        assert_eq!(
            PairwiseHash::sample(&mut r1, 1024),
            PairwiseHash::sample(&mut r2, 1024)
        );
    }

    #[test]
    fn single_bucket_range_is_constant_zero() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let h = PairwiseHash::sample(&mut rng, 1);
        for _ in 0..100 {
            assert_eq!(h.eval(Element::sample(&mut rng)), 0);
        }
    }

    /// With a = 1 and M = p the family is a shift, so eval is a bijection
    /// in b for fixed x (checked on a small subrange).
    #[test]
    fn shift_family_bijection_sanity() {
        let x = Element::new(987_654_321);
        let mut seen = std::collections::HashSet::new();
        for b in 0..1000u64 {
            let h = PairwiseHash::from_parts(1, b, MODULUS);
            assert!(seen.insert(h.eval(x)));
        }
    }

    /// Almost-pairwise collision bound at M = 1024; the binomial
    /// tolerance is computed by the test.
    #[test]
    fn collision_rate_within_pairwise_bound() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let trials = 100_000u64;
        let m = 1024u64;
        let rate = collision_rate(
            Element::new(123_456_789),
            Element::new(777),
            m,
            trials,
            &mut rng,
        );
        let bound = 1.0 / m as f64
            + m as f64 / MODULUS as f64
            + 3.0 * ((1.0 / m as f64) / trials as f64).sqrt();
        assert!(rate <= bound, "rate {rate} above bound {bound}");
    }

    #[test]
    fn near_injective_range_rarely_collides() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let trials = 100_000u64;
        let rate = collision_rate(
            Element::new(1),
            Element::new(2),
            MODULUS,
            trials,
            &mut rng,
        );
        assert!(rate <= 3.0 / trials as f64 + 1.0 / MODULUS as f64);
    }

    #[test]
    fn everything_collides_in_one_bucket() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let rate = collision_rate(Element::new(4), Element::new(5), 1, 100, &mut rng);
        assert_eq!(rate, 1.0);
    }

    #[test]
    #[should_panic(expected = "distinct inputs")]
    fn collision_rate_rejects_equal_inputs() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        collision_rate(Element::new(9), Element::new(9), 16, 10, &mut rng);
    }

    #[test]
    #[should_panic(expected = "outside [1, p]")]
    fn sample_rejects_zero_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        PairwiseHash::sample(&mut rng, 0);
    }

    #[test]
    #[should_panic(expected = "outside [1, p]")]
    fn sample_rejects_oversized_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        PairwiseHash::sample(&mut rng, MODULUS + 1);
    }
}
