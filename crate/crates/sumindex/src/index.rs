//! The queryable index: several hash/inverter pairs over one instance,
//! preprocessed until a verification pass proves every true sum
//! answerable.
//!
//! Preprocessing draws `L` pairwise independent hashes, builds one
//! inverter per composed map `f_l = h_l . g`, then checks the actual
//! query procedure against every element of the true sumset. Failed
//! draws are retried with fresh randomness; after `max_retries`
//! failures at a given `L` the count escalates by one. On success the
//! structure keeps only the shortest prefix of hash/inverter pairs that
//! still answers every sum, which trims stored words without touching
//! the verified property.
//!
//! Soundness is unconditional: every "yes" witness is checked against
//! the sum map before it is returned, and a "no" means no inverter
//! produced a witness, which after verification is proof of absence.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::hashing::PairwiseHash;
use crate::inverter::{derive_params, Inverter, InversionParams, Mode};
use crate::seeds::subseed;
use crate::sumfn::{decode, IndexTuple, Instance, Sumset};
use crate::universe::Element;

const TAG_ATTEMPT: u64 = 0x4154;
const TAG_HASH: u64 = 0x4841;
const TAG_INVERTER: u64 = 0x494e;

/// Diagnostics recorded by [`preprocess`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildStats {
    /// Failed verification attempts before success.
    pub retries: u64,
    /// Times `L` had to grow past its initial value.
    pub l_escalations: u64,
    /// Outcome of the final verification pass (always true for a
    /// preprocessed index; false for deserialized ones until re-checked).
    pub verified: bool,
    /// Sum of `stored_words` over retained inverters.
    pub stored_words_total: u64,
    /// Initial `L` = ceil(2 log2 max(n, 2)).
    pub l_initial: usize,
    /// `L` in force when verification succeeded.
    pub l_sampled: usize,
    /// Hash/inverter pairs retained after prefix pruning.
    pub l_retained: usize,
    /// Per retained hash: how many distinct sums are singletons under
    /// it (no other sum shares their hash value).
    pub singleton_counts: Vec<u64>,
}

impl BuildStats {
    pub(crate) fn unknown(l: usize) -> BuildStats {
        BuildStats {
            retries: 0,
            l_escalations: 0,
            verified: false,
            stored_words_total: 0,
            l_initial: l,
            l_sampled: l,
            l_retained: l,
            singleton_counts: Vec::new(),
        }
    }
}

/// Answer to one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOutcome {
    /// A tuple whose selected elements sum to the queried value, when
    /// one was found.
    pub witness: Option<IndexTuple>,
    /// Oracle evaluations spent across all inverters.
    pub f_evals: u64,
}

impl QueryOutcome {
    pub fn is_member(&self) -> bool {
        self.witness.is_some()
    }
}

/// The preprocessed index: retained lists, `L` hashes and inverters.
#[derive(Debug, Clone)]
pub struct KSumIndex {
    pub(crate) instance: Instance,
    pub(crate) delta: f64,
    pub(crate) mode: Mode,
    pub(crate) hashes: Vec<PairwiseHash>,
    pub(crate) inverters: Vec<Inverter>,
    pub(crate) build_stats: BuildStats,
}

/// Cached images of the sum map for every code; shared by all `f_l`
/// during preprocessing so function evaluations are array reads.
fn sum_cache(instance: &Instance) -> Vec<u64> {
    (0..instance.num_codes())
        .map(|code| instance.sum_at_code(code).value())
        .collect()
}

fn initial_l(n: usize) -> usize {
    (2.0 * (n.max(2) as f64).log2()).ceil() as usize
}

/// Runs the query procedure for one sum against the given pairs,
/// returning the first level that produces a valid witness.
fn first_success_level(
    sums: &[u64],
    hashes: &[PairwiseHash],
    inverters: &[Inverter],
    z: Element,
) -> Option<usize> {
    for (level, (hash, inverter)) in hashes.iter().zip(inverters.iter()).enumerate() {
        let y = hash.eval(z);
        let found = inverter.invert(
            |code| hash.eval(Element::new(sums[code as usize])),
            y,
        );
        if found
            .candidates
            .iter()
            .any(|&code| sums[code as usize] == z.value())
        {
            return Some(level);
        }
    }
    None
}

/// Builds an index for `instance`, looping over fresh randomness until
/// the verification pass accepts. `seed` makes the whole loop
/// reproducible; `max_retries` failures at one `L` escalate `L` by one.
/// The returned index always satisfies [`KSumIndex::verify`].
pub fn preprocess(
    instance: Instance,
    delta: f64,
    mode: Mode,
    seed: u64,
    max_retries: u64,
) -> KSumIndex {
    assert!(
        delta > 0.0 && delta < 1.0,
        "delta {delta} outside the open interval (0, 1)"
    );
    let params = derive_params(
        instance.num_codes(),
        instance.n(),
        instance.k(),
        delta,
        mode,
    );
    let sumset = instance.enumerate_sumset();
    let sums = sum_cache(&instance);

    let l_initial = initial_l(instance.n());
    let mut l = l_initial;
    let mut retries = 0u64;
    let mut escalations = 0u64;
    let mut failures_at_level = 0u64;

    for attempt in 0.. {
        let attempt_seed = subseed(seed, TAG_ATTEMPT, attempt);
        let hashes: Vec<PairwiseHash> = (0..l)
            .map(|level| {
                let mut rng =
                    ChaCha20Rng::seed_from_u64(subseed(attempt_seed, TAG_HASH, level as u64));
                PairwiseHash::sample(&mut rng, instance.num_codes())
            })
            .collect();
        let inverters: Vec<Inverter> = hashes
            .iter()
            .enumerate()
            .map(|(level, hash)| {
                Inverter::build(
                    |code| hash.eval(Element::new(sums[code as usize])),
                    &params,
                    subseed(attempt_seed, TAG_INVERTER, level as u64),
                )
            })
            .collect();

        // Verify the actual query path for every distinct sum, keeping
        // the first level that answers each.
        let mut deepest_level = 0usize;
        let mut failure: Option<Element> = None;
        for entry in sumset.entries() {
            match first_success_level(&sums, &hashes, &inverters, entry.element) {
                Some(level) => deepest_level = deepest_level.max(level),
                None => {
                    failure = Some(entry.element);
                    break;
                }
            }
        }

        match failure {
            None => {
                let keep = deepest_level + 1;
                let mut hashes = hashes;
                let mut inverters = inverters;
                hashes.truncate(keep);
                inverters.truncate(keep);
                let singleton_counts = singleton_counts(&sumset, &hashes);
                let stored_words_total = inverters.iter().map(Inverter::stored_words).sum();
                return KSumIndex {
                    instance,
                    delta,
                    mode,
                    hashes,
                    inverters,
                    build_stats: BuildStats {
                        retries,
                        l_escalations: escalations,
                        verified: true,
                        stored_words_total,
                        l_initial,
                        l_sampled: l,
                        l_retained: keep,
                        singleton_counts,
                    },
                };
            }
            Some(z) => {
                retries += 1;
                failures_at_level += 1;
                eprintln!(
                    "preprocess: attempt {} (L = {}) failed verification at sum {}; redrawing",
                    attempt + 1,
                    l,
                    z
                );
                if failures_at_level >= max_retries.max(1) {
                    l += 1;
                    escalations += 1;
                    failures_at_level = 0;
                }
            }
        }
    }
    unreachable!("preprocess loop runs until verification succeeds")
}

/// Singletons per hash: sums whose hash value no other sum shares.
fn singleton_counts(sumset: &Sumset, hashes: &[PairwiseHash]) -> Vec<u64> {
    hashes
        .iter()
        .map(|hash| {
            let mut values: Vec<u64> = sumset
                .entries()
                .iter()
                .map(|e| hash.eval(e.element))
                .collect();
            values.sort_unstable();
            let mut singletons = 0u64;
            let mut i = 0;
            while i < values.len() {
                let mut j = i + 1;
                while j < values.len() && values[j] == values[i] {
                    j += 1;
                }
                if j - i == 1 {
                    singletons += 1;
                }
                i = j;
            }
            singletons
        })
        .collect()
}

impl KSumIndex {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of retained hash/inverter pairs.
    pub fn num_levels(&self) -> usize {
        self.hashes.len()
    }

    pub fn hashes(&self) -> &[PairwiseHash] {
        &self.hashes
    }

    pub fn inverters(&self) -> &[Inverter] {
        &self.inverters
    }

    pub fn params(&self) -> &InversionParams {
        self.inverters[0].params()
    }

    pub fn build_stats(&self) -> &BuildStats {
        &self.build_stats
    }

    /// Hard bound on `f_evals` for a single query: every inverter is
    /// capped at `STEP_CAP_FACTOR * t * r` evaluations.
    pub fn query_step_bound(&self) -> u64 {
        self.inverters
            .iter()
            .map(|inv| inv.step_cap())
            .sum()
    }

    /// Decides sum membership of `c`. After successful preprocessing
    /// this is exact in both directions: a witness is returned iff `c`
    /// is in the sumset.
    pub fn query(&self, c: Element) -> QueryOutcome {
        let mut evals = 0u64;
        for (hash, inverter) in self.hashes.iter().zip(self.inverters.iter()) {
            let y = hash.eval(c);
            let found = inverter.invert(|code| self.instance.f_at(hash, code), y);
            evals += found.f_evals;
            for &code in &found.candidates {
                if self.instance.sum_at_code(code) == c {
                    return QueryOutcome {
                        witness: Some(decode(code, self.instance.n(), self.instance.k())),
                        f_evals: evals,
                    };
                }
            }
        }
        QueryOutcome {
            witness: None,
            f_evals: evals,
        }
    }

    /// Re-runs the completeness check: true iff the query procedure
    /// produces a valid witness for every distinct sum of the instance.
    pub fn verify(&self) -> bool {
        let sums = sum_cache(&self.instance);
        self.instance.enumerate_sumset().entries().iter().all(|e| {
            first_success_level(&sums, &self.hashes, &self.inverters, e.element)
                .is_some()
        })
    }

    /// As [`KSumIndex::verify`], but returns the sums the index fails
    /// to answer (empty means verified).
    pub fn verify_counterexamples(&self, limit: usize) -> Vec<Element> {
        let sums = sum_cache(&self.instance);
        let mut bad = Vec::new();
        for e in self.instance.enumerate_sumset().entries() {
            if first_success_level(&sums, &self.hashes, &self.inverters, e.element)
                .is_none()
            {
                bad.push(e.element);
                if bad.len() >= limit {
                    break;
                }
            }
        }
        bad
    }

    /// Total persistent footprint in 64-bit words: inverter tables,
    /// hash parameters, the retained lists and the fixed header. Equals
    /// the serialized payload length in words.
    pub fn space_words(&self) -> u64 {
        let header = 8u64;
        let lists = (self.instance.k() as u64 - 1) * self.instance.n() as u64;
        let levels: u64 = self
            .inverters
            .iter()
            .map(|inv| 2 + inv.stored_words())
            .sum();
        header + lists + levels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sumfn::encode;
    use rand::{Rng, SeedableRng};

    fn inst(lists: &[&[u64]]) -> Instance {
        Instance::new(
            lists
                .iter()
                .map(|l| l.iter().map(|&v| Element::new(v)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn random_instance(n: usize, k: usize, seed: u64) -> Instance {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Instance::new(
            (0..k - 1)
                .map(|_| (0..n).map(|_| Element::sample(&mut rng)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn singleton_sumset_builds_and_answers() {
        let idx = preprocess(inst(&[&[5], &[7]]), 0.5, Mode::General, 1, 4);
        assert!(idx.build_stats().verified);
        assert!(idx.num_levels() >= 1);
        let yes = idx.query(Element::new(12));
        assert_eq!(yes.witness, Some(IndexTuple::new(vec![0, 0])));
        let no = idx.query(Element::new(13));
        assert!(no.witness.is_none());
    }

    #[test]
    fn degenerate_all_equal_instance() {
        let idx = preprocess(inst(&[&[9, 9, 9, 9], &[9, 9, 9, 9]]), 0.75, Mode::General, 2, 4);
        let out = idx.query(Element::new(18));
        assert!(out.is_member());
        assert_eq!(idx.instance().sum_at(out.witness.as_ref().unwrap()).value(), 18);
        assert!(!idx.query(Element::new(17)).is_member());
    }

    #[test]
    fn random_instance_build_records_stats() {
        let idx = preprocess(random_instance(64, 3, 7), 0.75, Mode::General, 1, 4);
        let stats = idx.build_stats();
        assert!(stats.verified);
        assert_eq!(stats.l_initial, 12);
        assert!(stats.l_retained <= stats.l_sampled);
        assert_eq!(stats.singleton_counts.len(), stats.l_retained);
        assert_eq!(
            stats.stored_words_total,
            idx.inverters().iter().map(Inverter::stored_words).sum::<u64>()
        );
    }

    /// Exhaustive agreement with the brute-force oracle on a full
    /// instance: every distinct sum answers yes with a valid witness,
    /// and non-sums answer no.
    #[test]
    fn query_matches_oracle_exhaustively() {
        let instance = random_instance(16, 3, 3);
        let sumset = instance.enumerate_sumset();
        let idx = preprocess(instance.clone(), 0.75, Mode::General, 5, 4);
        for entry in sumset.entries() {
            let out = idx.query(entry.element);
            let witness = out.witness.expect("verified index must answer every sum");
            assert_eq!(instance.sum_at(&witness), entry.element);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut checked = 0;
        while checked < 500 {
            let c = Element::sample(&mut rng);
            if sumset.contains(c) {
                continue;
            }
            assert!(!idx.query(c).is_member());
            checked += 1;
        }
    }

    /// Verification equals an independent check that loops over all
    /// codes instead of the sumset enumeration.
    #[test]
    fn verify_agrees_with_code_loop() {
        let instance = random_instance(16, 3, 11);
        let idx = preprocess(instance.clone(), 0.5, Mode::General, 13, 4);
        assert!(idx.verify());
        // independent route: collect sums code by code, query each
        let mut all_ok = true;
        for code in 0..instance.num_codes() {
            let z = instance.sum_at_code(code);
            let out = idx.query(z);
            match out.witness {
                Some(w) => all_ok &= instance.sum_at(&w) == z,
                None => all_ok = false,
            }
        }
        assert!(all_ok);
    }

    #[test]
    fn verify_fails_on_gutted_index() {
        let instance = random_instance(8, 3, 17);
        let mut idx = preprocess(instance, 0.5, Mode::General, 19, 4);
        assert!(idx.verify());
        for inverter in &mut idx.inverters {
            inverter.heavy.clear();
            for table in &mut inverter.tables {
                table.entries.clear();
            }
        }
        assert!(!idx.verify());
        assert!(!idx.verify_counterexamples(5).is_empty());
        // soundness survives arbitrary corruption: answers may flip to
        // "no" but never to an invalid "yes"
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        for _ in 0..200 {
            let c = Element::sample(&mut rng);
            if let Some(w) = idx.query(c).witness {
                assert_eq!(idx.instance().sum_at(&w), c);
            }
        }
    }

    #[test]
    fn query_reports_steps_within_bound() {
        let instance = random_instance(64, 3, 29);
        let idx = preprocess(instance.clone(), 0.75, Mode::General, 31, 4);
        let bound = idx.query_step_bound();
        let mut rng = ChaCha20Rng::seed_from_u64(37);
        for _ in 0..200 {
            let code = rng.random_range(0..instance.num_codes());
            let member = idx.query(instance.sum_at_code(code));
            assert!(member.is_member());
            assert!(member.f_evals <= bound);
            let probe = idx.query(Element::sample(&mut rng));
            assert!(probe.f_evals <= bound);
        }
    }

    /// Mean member-query cost stays within the documented budget shape
    /// c_T * L * n^delta.
    #[test]
    fn member_query_cost_within_budget_shape() {
        let n = 256usize;
        let delta = 0.75;
        let instance = random_instance(n, 3, 41);
        let idx = preprocess(instance.clone(), delta, Mode::General, 43, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(47);
        let mut total = 0u64;
        let trials = 1000;
        for _ in 0..trials {
            let code = rng.random_range(0..instance.num_codes());
            total += idx.query(instance.sum_at_code(code)).f_evals;
        }
        let mean = total as f64 / trials as f64;
        let budget = crate::inverter::STEP_CAP_FACTOR as f64
            * idx.num_levels() as f64
            * (n as f64).powf(delta);
        assert!(mean <= budget, "mean {mean} above budget {budget}");
    }

    #[test]
    fn key_observation_holds_on_built_index() {
        let instance = random_instance(16, 3, 51);
        let idx = preprocess(instance.clone(), 0.5, Mode::General, 53, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(59);
        for _ in 0..500 {
            let t = IndexTuple::new(vec![
                rng.random_range(0..instance.n()),
                rng.random_range(0..instance.n()),
            ]);
            let c = instance.sum_at(&t);
            let code = encode(&t, instance.n());
            for hash in idx.hashes() {
                assert_eq!(instance.f_at(hash, code), hash.eval(c));
            }
        }
    }

    #[test]
    fn preprocess_is_deterministic() {
        let a = preprocess(random_instance(16, 3, 61), 0.75, Mode::General, 67, 4);
        let b = preprocess(random_instance(16, 3, 61), 0.75, Mode::General, 67, 4);
        assert_eq!(a.hashes(), b.hashes());
        assert_eq!(a.inverters(), b.inverters());
        assert_eq!(a.build_stats(), b.build_stats());
    }

    #[test]
    fn random_mode_builds_without_heavy_tables() {
        let idx = preprocess(random_instance(32, 3, 71), 0.75, Mode::Random, 73, 4);
        assert!(idx.build_stats().verified);
        assert!(idx.inverters().iter().all(|inv| inv.heavy_entries().is_empty()));
    }

    #[test]
    fn space_words_sums_the_layout() {
        let idx = preprocess(random_instance(16, 3, 79), 0.5, Mode::General, 83, 4);
        let expect = 8
            + (idx.instance().k() as u64 - 1) * idx.instance().n() as u64
            + idx
                .inverters()
                .iter()
                .map(|inv| 2 + inv.stored_words())
                .sum::<u64>();
        assert_eq!(idx.space_words(), expect);
    }

    #[test]
    #[should_panic(expected = "outside the open interval")]
    fn preprocess_rejects_bad_delta() {
        preprocess(inst(&[&[1], &[2]]), 0.0, Mode::General, 0, 1);
    }
}
