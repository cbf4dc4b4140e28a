//! Preprocessed inversion of a self-map `f: [N] -> [N]`: Hellman-style
//! chain tables plus explicit storage for heavy images.
//!
//! Each of `r` tables iterates `u(x) = sigma_i(f(x))` with its own
//! pairwise independent rerandomizer `sigma_i`, storing `(endpoint,
//! start)` pairs for `m` chains of length `t`. Images whose in-degree is
//! too large for chains to handle are resolved by a direct
//! `(image, preimage)` table instead, and chains terminate early when
//! they would step through such an image.
//!
//! The structure is intentionally incomplete: `invert` may miss
//! preimages. Completeness for the sums that matter is established
//! end-to-end by the verification pass in [`crate::index`].

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::hashing::PairwiseHash;
use crate::seeds::subseed;
use crate::universe::Element;

const TAG_SIGMA: u64 = 0x5349_474d;

/// Per-invert evaluation budget multiplier (`c_T`): an `invert` call
/// performs at most `STEP_CAP_FACTOR * t * r` oracle evaluations,
/// covering the walk plus replays. The cap is enforced, and the actual
/// count is reported on every call.
pub const STEP_CAP_FACTOR: u64 = 4;

/// Parameter regime: `general` targets `T * S^3 = N^3` for arbitrary
/// maps, `random` targets `T * S^2 = N^2` and drops the heavy table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    General,
    Random,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::General => write!(f, "general"),
            Mode::Random => write!(f, "random"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "general" => Ok(Mode::General),
            "random" => Ok(Mode::Random),
            other => Err(format!("unknown mode `{other}` (expected general|random)")),
        }
    }
}

/// Table shape for one inversion structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InversionParams {
    /// `N`, the size of the domain and range of `f`.
    pub domain_size: u64,
    /// Target number of oracle evaluations per query (`T`).
    pub query_budget: u64,
    pub mode: Mode,
    /// Chains per table (`m`).
    pub chains_per_table: u64,
    /// Steps per chain (`t`).
    pub chain_len: u64,
    /// Number of tables (`r`).
    pub table_count: u64,
    /// Heavy-image table capacity (`q`).
    pub heavy_capacity: u64,
}

/// `ceil(base^exp)`, snapping to the nearest integer first so that
/// representable powers (e.g. `256^0.75 = 64`) do not round up from
/// float noise.
fn ceil_pow(base: u64, exp: f64) -> u64 {
    let x = (base as f64).powf(exp);
    let nearest = x.round();
    let v = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (v as u64).max(1)
}

/// Smallest `t >= 1` with `t^k >= v` (exact integer arithmetic).
fn ceil_root(v: u64, k: u32) -> u64 {
    if v <= 1 {
        return 1;
    }
    let guess = (v as f64).powf(1.0 / k as f64) as u64;
    let mut t = guess.saturating_sub(2).max(1);
    while t.checked_pow(k).map_or(false, |p| p < v) {
        t += 1;
    }
    t
}

/// In-degree at or above this enters the heavy table. The cutoff is set
/// where the chain miss probability `(1 - gamma)^d` is negligible
/// relative to `1/N`, so chains and the table split the work instead of
/// the table starving the chains of coverage.
pub(crate) fn heavy_threshold(domain_size: u64) -> u64 {
    let ceil_log2 = if domain_size <= 1 {
        0
    } else {
        64 - (domain_size - 1).leading_zeros() as u64
    };
    (ceil_log2 + 2).max(2)
}

/// Derives table shape from the instance scale and the time/space knob
/// `delta`. `query_budget = ceil(n^delta)`; the chain length follows the
/// mode tradeoff and the remaining parameters fill the domain.
/// Panics if `delta` lies outside `(0, 1)` or `domain_size != n^(k-1)`.
pub fn derive_params(
    domain_size: u64,
    n: usize,
    k: usize,
    delta: f64,
    mode: Mode,
) -> InversionParams {
    assert!(
        delta > 0.0 && delta < 1.0,
        "delta {delta} outside the open interval (0, 1)"
    );
    assert!(k >= 2, "k must be at least 2");
    let expect = (n as u64)
        .checked_pow((k - 1) as u32)
        .expect("n^(k-1) overflows u64");
    assert_eq!(domain_size, expect, "domain_size must equal n^(k-1)");

    let query_budget = ceil_pow(n as u64, delta);
    let chain_len = match mode {
        Mode::General => ceil_root(query_budget, 3),
        Mode::Random => ceil_root(query_budget, 2),
    };
    let table_count = query_budget.div_ceil(chain_len);
    let chains_per_table = domain_size.div_ceil(table_count * chain_len);
    let heavy_capacity = match mode {
        Mode::General => chains_per_table * table_count,
        Mode::Random => 0,
    };
    InversionParams {
        domain_size,
        query_budget,
        mode,
        chains_per_table,
        chain_len,
        table_count,
        heavy_capacity,
    }
}

/// One chain table: `(endpoint, start)` pairs sorted by endpoint.
/// Every stored pair is reachable by walking `x -> sigma(f(x))` from
/// the start for at most `chain_len` steps, stopping at heavy images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainTable {
    pub(crate) rerandomizer: PairwiseHash,
    pub(crate) entries: Vec<(u64, u64)>,
}

impl ChainTable {
    pub fn rerandomizer(&self) -> &PairwiseHash {
        &self.rerandomizer
    }

    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }
}

/// The inversion structure for one fixed `f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inverter {
    pub(crate) params: InversionParams,
    pub(crate) tables: Vec<ChainTable>,
    /// `(image, smallest preimage)` pairs sorted by image.
    pub(crate) heavy: Vec<(u64, u64)>,
    pub(crate) seed: u64,
}

/// Result of one `invert` call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inversion {
    /// Codes `x` with `f(x) = y`, in discovery order (heavy hit first),
    /// deduplicated. Possibly empty even when preimages exist.
    pub candidates: Vec<u64>,
    /// Exact number of oracle evaluations spent.
    pub f_evals: u64,
    /// True when the evaluation cap cut the search short.
    pub truncated: bool,
}

impl Inverter {
    /// Builds chain tables and the heavy-image table for `f`.
    ///
    /// Deterministic given `(f, params, seed)`: rerandomizers derive
    /// from `(seed, table index)`, chain starts are the strided codes
    /// `floor(j * N / m)`, and duplicate endpoints keep the first
    /// (lowest-`j`) start.
    pub fn build<F: Fn(u64) -> u64>(f: F, params: &InversionParams, seed: u64) -> Inverter {
        let n = params.domain_size;
        assert!(n >= 1, "empty domain");
        assert!(
            n <= u32::MAX as u64,
            "domain too large for preprocessing-scale build"
        );

        // One pass caches the images; everything below reads the cache.
        let images: Vec<u64> = (0..n)
            .map(|x| {
                let y = f(x);
                assert!(y < n, "oracle value {y} outside [0, {n})");
                y
            })
            .collect();

        let mut in_degree = vec![0u32; n as usize];
        for &y in &images {
            in_degree[y as usize] += 1;
        }

        // Heavy images: in-degree >= threshold, ranked by in-degree
        // descending then image ascending, capped at q, each mapped to
        // its smallest preimage.
        let threshold = heavy_threshold(n);
        let mut ranked: Vec<(u32, u64)> = in_degree
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d as u64 >= threshold)
            .map(|(y, &d)| (d, y as u64))
            .collect();
        ranked.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked.truncate(params.heavy_capacity as usize);
        let mut heavy: Vec<(u64, u64)> = ranked.iter().map(|&(_, y)| (y, u64::MAX)).collect();
        heavy.sort_unstable_by_key(|&(y, _)| y);
        let mut unassigned = heavy.len();
        for (x, &y) in images.iter().enumerate() {
            if unassigned == 0 {
                break;
            }
            if let Ok(i) = heavy.binary_search_by_key(&y, |&(hy, _)| hy) {
                if heavy[i].1 == u64::MAX {
                    heavy[i].1 = x as u64;
                    unassigned -= 1;
                }
            }
        }
        debug_assert!(heavy.iter().all(|&(_, x)| x != u64::MAX));

        let heavy_lookup: HashSet<u64> = heavy.iter().map(|&(y, _)| y).collect();

        let m = params.chains_per_table;
        let t = params.chain_len;
        let mut tables = Vec::with_capacity(params.table_count as usize);
        for i in 0..params.table_count {
            let mut rng = ChaCha20Rng::seed_from_u64(subseed(seed, TAG_SIGMA, i));
            let sigma = PairwiseHash::sample(&mut rng, n);
            let mut entries: Vec<(u64, u64)> = Vec::with_capacity(m as usize);
            for j in 0..m {
                let start = ((j as u128 * n as u128) / m as u128) as u64;
                let mut x = start;
                for _ in 0..t {
                    let fx = images[x as usize];
                    if heavy_lookup.contains(&fx) {
                        break;
                    }
                    x = sigma.eval(Element::new(fx));
                }
                entries.push((x, start));
            }
            // stable by construction order, so equal endpoints keep the
            // first start
            entries.sort_by_key(|&(end, _)| end);
            entries.dedup_by_key(|&mut (end, _)| end);
            tables.push(ChainTable {
                rerandomizer: sigma,
                entries,
            });
        }

        Inverter {
            params: *params,
            tables,
            heavy,
            seed,
        }
    }

    pub fn params(&self) -> &InversionParams {
        &self.params
    }

    pub fn tables(&self) -> &[ChainTable] {
        &self.tables
    }

    pub fn heavy_entries(&self) -> &[(u64, u64)] {
        &self.heavy
    }

    /// Construction seed (informational; not part of the wire format).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn heavy_preimage(&self, y: u64) -> Option<u64> {
        self.heavy
            .binary_search_by_key(&y, |&(hy, _)| hy)
            .ok()
            .map(|i| self.heavy[i].1)
    }

    #[inline]
    fn is_heavy(&self, y: u64) -> bool {
        self.heavy.binary_search_by_key(&y, |&(hy, _)| hy).is_ok()
    }

    /// Evaluation cap for one `invert` call.
    pub fn step_cap(&self) -> u64 {
        STEP_CAP_FACTOR * self.params.chain_len * self.params.table_count
    }

    /// Searches for preimages of `y`. Every returned candidate `x`
    /// satisfies `f(x) = y` (false alarms from chain merges are
    /// filtered by direct evaluation). Panics if `y` is out of range.
    pub fn invert<F: Fn(u64) -> u64>(&self, f: F, y: u64) -> Inversion {
        let n = self.params.domain_size;
        assert!(y < n, "image {y} out of range [0, {n})");
        let cap = self.step_cap();
        let mut evals = 0u64;
        let mut truncated = false;
        let mut candidates = Vec::new();

        if let Some(x) = self.heavy_preimage(y) {
            // Build chains terminate *at* preimages of heavy images, so
            // the walk below can never reach one; the stored entry is
            // this structure's whole answer for y.
            candidates.push(x);
            return Inversion {
                candidates,
                f_evals: 0,
                truncated: false,
            };
        }

        let t = self.params.chain_len;
        let mut seen: HashSet<u64> = HashSet::new();
        'tables: for table in &self.tables {
            let sigma = &table.rerandomizer;
            // If some chain position x has f(x) = y, the next chain
            // position is sigma(y); walking from there mirrors the
            // remainder of that chain.
            let mut z = sigma.eval(Element::new(y));
            for pos in 0..t {
                if let Ok(idx) = table.entries.binary_search_by_key(&z, |&(end, _)| end) {
                    // Replay the whole chain from its start, collecting
                    // every position that maps to y.
                    let mut x = table.entries[idx].1;
                    for _ in 0..=t {
                        if evals >= cap {
                            truncated = true;
                            break 'tables;
                        }
                        let fx = f(x);
                        evals += 1;
                        if fx == y && seen.insert(x) {
                            candidates.push(x);
                        }
                        if self.is_heavy(fx) {
                            break;
                        }
                        x = sigma.eval(Element::new(fx));
                    }
                }
                if pos + 1 == t {
                    break;
                }
                if evals >= cap {
                    truncated = true;
                    break 'tables;
                }
                let fz = f(z);
                evals += 1;
                if self.is_heavy(fz) {
                    // the build chain would have stopped here
                    break;
                }
                z = sigma.eval(Element::new(fz));
            }
        }

        Inversion {
            candidates,
            f_evals: evals,
            truncated,
        }
    }

    /// Exact word count of the persistent structure: 2 per endpoint
    /// entry, 2 per heavy entry, 3 per table (rerandomizer + entry
    /// count), 7 for parameters and the heavy count. Matches the
    /// serialized footprint, excluding transient build memory.
    pub fn stored_words(&self) -> u64 {
        let mut words = 7 + 2 * self.heavy.len() as u64;
        for table in &self.tables {
            words += 3 + 2 * table.entries.len() as u64;
        }
        words
    }
}
