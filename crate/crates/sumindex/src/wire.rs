//! On-disk index format: a flat sequence of little-endian 64-bit words.
//!
//! Layout: magic word "KSIX", version, then `n`, `k`, `p`, `delta`
//! (IEEE-754 bits), `mode`, `L`; the `k-1` lists; then per level the
//! hash pair `(a, b)`, the six table-shape parameters, the heavy
//! entries as a count plus `(image, preimage)` pairs, and per table the
//! rerandomizer pair plus a count and the `(endpoint, start)` pairs.
//! Entry lists are sorted, so serialization is canonical: equal indexes
//! produce equal bytes.

use std::fmt;

use crate::hashing::PairwiseHash;
use crate::index::{BuildStats, KSumIndex};
use crate::inverter::{ChainTable, InversionParams, Inverter, Mode};
use crate::sumfn::Instance;
use crate::universe::{Element, MODULUS};

const MAGIC: u64 = u64::from_le_bytes(*b"KSIX\0\0\0\0");
const VERSION: u64 = 1;

/// Decode failures, one variant per designated error condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireError {
    /// Leading magic word is not "KSIX".
    BadMagic,
    /// Unsupported format version.
    BadVersion(u64),
    /// Payload ends before the structure is complete.
    Truncated,
    /// Structurally complete but semantically invalid.
    Malformed(String),
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireError::BadMagic => write!(f, "bad magic word"),
            WireError::BadVersion(v) => write!(f, "unsupported format version {v}"),
            WireError::Truncated => write!(f, "truncated payload"),
            WireError::Malformed(msg) => write!(f, "malformed payload: {msg}"),
        }
    }
}

impl std::error::Error for WireError {}

fn malformed(msg: impl Into<String>) -> WireError {
    WireError::Malformed(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Reader<'a> {
        Reader { bytes, pos: 0 }
    }

    fn word(&mut self) -> Result<u64, WireError> {
        let end = self.pos.checked_add(8).ok_or(WireError::Truncated)?;
        if end > self.bytes.len() {
            return Err(WireError::Truncated);
        }
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(u64::from_le_bytes(buf))
    }

    fn element(&mut self, what: &str) -> Result<Element, WireError> {
        let v = self.word()?;
        if v >= MODULUS {
            return Err(malformed(format!("{what} value {v} not below p")));
        }
        Ok(Element::new(v))
    }

    fn finished(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn push_word(out: &mut Vec<u8>, w: u64) {
    out.extend_from_slice(&w.to_le_bytes());
}

impl KSumIndex {
    /// Canonical byte encoding of the index.
    pub fn serialize(&self) -> Vec<u8> {
        let instance = self.instance();
        let mut out = Vec::with_capacity(self.space_words() as usize * 8);
        push_word(&mut out, MAGIC);
        push_word(&mut out, VERSION);
        push_word(&mut out, instance.n() as u64);
        push_word(&mut out, instance.k() as u64);
        push_word(&mut out, MODULUS);
        push_word(&mut out, self.delta().to_bits());
        push_word(
            &mut out,
            match self.mode() {
                Mode::General => 0,
                Mode::Random => 1,
            },
        );
        push_word(&mut out, self.num_levels() as u64);
        for list in instance.lists() {
            for e in list {
                push_word(&mut out, e.value());
            }
        }
        for (hash, inverter) in self.hashes().iter().zip(self.inverters()) {
            push_word(&mut out, hash.multiplier());
            push_word(&mut out, hash.offset());
            let p = inverter.params();
            push_word(&mut out, p.domain_size);
            push_word(&mut out, p.query_budget);
            push_word(&mut out, p.chains_per_table);
            push_word(&mut out, p.chain_len);
            push_word(&mut out, p.table_count);
            push_word(&mut out, p.heavy_capacity);
            push_word(&mut out, inverter.heavy_entries().len() as u64);
            for &(y, x) in inverter.heavy_entries() {
                push_word(&mut out, y);
                push_word(&mut out, x);
            }
            for table in inverter.tables() {
                push_word(&mut out, table.rerandomizer().multiplier());
                push_word(&mut out, table.rerandomizer().offset());
                push_word(&mut out, table.entries().len() as u64);
                for &(end, start) in table.entries() {
                    push_word(&mut out, end);
                    push_word(&mut out, start);
                }
            }
        }
        out
    }

    /// Decodes and validates an index. Build statistics are not part of
    /// the format; the result reports `verified = false` until
    /// [`KSumIndex::verify`] is re-run.
    pub fn deserialize(bytes: &[u8]) -> Result<KSumIndex, WireError> {
        let mut r = Reader::new(bytes);
        if r.word()? != MAGIC {
            return Err(WireError::BadMagic);
        }
        match r.word()? {
            VERSION => {}
            v => return Err(WireError::BadVersion(v)),
        }
        let n = r.word()?;
        let k = r.word()?;
        if r.word()? != MODULUS {
            return Err(malformed("modulus mismatch"));
        }
        let delta = f64::from_bits(r.word()?);
        if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
            return Err(malformed(format!("delta {delta} outside (0, 1)")));
        }
        let mode = match r.word()? {
            0 => Mode::General,
            1 => Mode::Random,
            v => return Err(malformed(format!("unknown mode {v}"))),
        };
        let levels = r.word()?;
        if n < 1 || !(2..=64).contains(&k) {
            return Err(malformed(format!("implausible shape n={n} k={k}")));
        }
        if levels < 1 || levels > 4096 {
            return Err(malformed(format!("implausible level count {levels}")));
        }
        let domain = (n)
            .checked_pow((k - 1) as u32)
            .filter(|&d| d <= MODULUS)
            .ok_or_else(|| malformed("n^(k-1) exceeds the domain bound"))?;

        let mut lists = Vec::with_capacity((k - 1) as usize);
        for _ in 0..k - 1 {
            let mut list = Vec::with_capacity(n as usize);
            for _ in 0..n {
                list.push(r.element("list element")?);
            }
            lists.push(list);
        }
        let instance =
            Instance::new(lists).map_err(|e| malformed(format!("instance rejected: {e}")))?;

        let mut hashes = Vec::with_capacity(levels as usize);
        let mut inverters = Vec::with_capacity(levels as usize);
        for _ in 0..levels {
            let a = r.word()?;
            let b = r.word()?;
            if a < 1 || a >= MODULUS || b >= MODULUS {
                return Err(malformed("hash parameters out of range"));
            }
            hashes.push(PairwiseHash::from_parts(a, b, domain));

            let params = InversionParams {
                domain_size: r.word()?,
                query_budget: r.word()?,
                mode,
                chains_per_table: r.word()?,
                chain_len: r.word()?,
                table_count: r.word()?,
                heavy_capacity: r.word()?,
            };
            if params.domain_size != domain {
                return Err(malformed("inverter domain disagrees with instance"));
            }
            if params.table_count > 1 << 32 || params.chain_len > 1 << 32 {
                return Err(malformed("implausible table shape"));
            }

            let heavy_len = r.word()?;
            if heavy_len > params.heavy_capacity || heavy_len > domain {
                return Err(malformed("heavy table overflows its capacity"));
            }
            let mut heavy = Vec::with_capacity(heavy_len as usize);
            let mut prev: Option<u64> = None;
            for _ in 0..heavy_len {
                let y = r.word()?;
                let x = r.word()?;
                if y >= domain || x >= domain {
                    return Err(malformed("heavy entry out of range"));
                }
                if prev.is_some_and(|p| p >= y) {
                    return Err(malformed("heavy entries not strictly sorted"));
                }
                prev = Some(y);
                heavy.push((y, x));
            }

            let mut tables = Vec::with_capacity(params.table_count as usize);
            for _ in 0..params.table_count {
                let sa = r.word()?;
                let sb = r.word()?;
                if sa < 1 || sa >= MODULUS || sb >= MODULUS {
                    return Err(malformed("rerandomizer parameters out of range"));
                }
                let count = r.word()?;
                if count > params.chains_per_table {
                    return Err(malformed("endpoint table overflows chain count"));
                }
                let mut entries = Vec::with_capacity(count as usize);
                let mut prev: Option<u64> = None;
                for _ in 0..count {
                    let end = r.word()?;
                    let start = r.word()?;
                    if end >= domain || start >= domain {
                        return Err(malformed("endpoint entry out of range"));
                    }
                    if prev.is_some_and(|p| p >= end) {
                        return Err(malformed("endpoints not strictly sorted"));
                    }
                    prev = Some(end);
                    entries.push((end, start));
                }
                tables.push(ChainTable {
                    rerandomizer: PairwiseHash::from_parts(sa, sb, domain),
                    entries,
                });
            }
            inverters.push(Inverter {
                params,
                tables,
                heavy,
                seed: 0,
            });
        }
        if !r.finished() {
            return Err(malformed("trailing data after index"));
        }

        let mut stats = BuildStats::unknown(levels as usize);
        stats.stored_words_total = inverters.iter().map(Inverter::stored_words).sum();
        Ok(KSumIndex {
            instance,
            delta,
            mode,
            hashes,
            inverters,
            build_stats: stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::preprocess;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn sample_index() -> KSumIndex {
        let mut rng = ChaCha20Rng::seed_from_u64(91);
        let lists = (0..2)
            .map(|_| (0..16).map(|_| Element::sample(&mut rng)).collect())
            .collect();
        preprocess(Instance::new(lists).unwrap(), 0.75, Mode::General, 3, 4)
    }

    #[test]
    fn roundtrip_is_byte_idempotent() {
        let idx = sample_index();
        let bytes = idx.serialize();
        let back = KSumIndex::deserialize(&bytes).unwrap();
        assert_eq!(back.serialize(), bytes);
        assert_eq!(back.instance(), idx.instance());
        assert_eq!(back.hashes(), idx.hashes());
        assert_eq!(back.num_levels(), idx.num_levels());
    }

    #[test]
    fn payload_length_equals_space_words() {
        let idx = sample_index();
        assert_eq!(idx.serialize().len() as u64, idx.space_words() * 8);
    }

    #[test]
    fn roundtrip_preserves_query_behavior() {
        let idx = sample_index();
        let back = KSumIndex::deserialize(&idx.serialize()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(97);
        for _ in 0..1000 {
            let c = if rng.random_range(0..2) == 0 {
                let code = rng.random_range(0..idx.instance().num_codes());
                idx.instance().sum_at_code(code)
            } else {
                Element::sample(&mut rng)
            };
            assert_eq!(idx.query(c), back.query(c));
        }
    }

    #[test]
    fn rejects_bad_magic_version_truncation_distinctly() {
        let idx = sample_index();
        let bytes = idx.serialize();

        let mut bad_magic = bytes.clone();
        bad_magic[0] ^= 0xff;
        assert_eq!(
            KSumIndex::deserialize(&bad_magic).unwrap_err(),
            WireError::BadMagic
        );

        let mut bad_version = bytes.clone();
        bad_version[8] = 99;
        assert_eq!(
            KSumIndex::deserialize(&bad_version).unwrap_err(),
            WireError::BadVersion(99)
        );

        for cut in [0, 7, 8, 40, bytes.len() - 9, bytes.len() - 1] {
            assert_eq!(
                KSumIndex::deserialize(&bytes[..cut]).unwrap_err(),
                WireError::Truncated,
                "cut at {cut}"
            );
        }

        let mut trailing = bytes.clone();
        trailing.extend_from_slice(&[0u8; 8]);
        assert!(matches!(
            KSumIndex::deserialize(&trailing).unwrap_err(),
            WireError::Malformed(_)
        ));
    }

    #[test]
    fn corrupted_words_never_panic() {
        let idx = sample_index();
        let bytes = idx.serialize();
        let mut rng = ChaCha20Rng::seed_from_u64(101);
        for _ in 0..500 {
            let mut fuzzed = bytes.clone();
            let flips = rng.random_range(1..4usize);
            for _ in 0..flips {
                let i = rng.random_range(0..fuzzed.len());
                fuzzed[i] ^= 1 << rng.random_range(0..8u32);
            }
            // decoding may succeed or fail, but must never panic, and a
            // success must still answer queries soundly
            if let Ok(back) = KSumIndex::deserialize(&fuzzed) {
                let c = Element::new(12345);
                if let Some(w) = back.query(c).witness {
                    assert_eq!(back.instance().sum_at(&w), c);
                }
            }
        }
    }
}
