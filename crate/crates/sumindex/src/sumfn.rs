//! Instances, the tuple/code bijection on `[n]^(k-1)`, the sum map `g`,
//! the hashed sum map `f = h . g`, sumset enumeration, and the
//! brute-force reference oracle used by tests and verification.
//!
//! Index tuples are identified with integer codes in `[0, N)`,
//! `N = n^(k-1)`, through a mixed-radix encoding (least significant
//! digit first). The inversion machinery only ever sees codes.

use std::collections::HashMap;
use std::fmt;

use crate::hashing::PairwiseHash;
use crate::universe::{Element, MODULUS};

/// A selection of one index per list: `k-1` integers in `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexTuple {
    indices: Vec<usize>,
}

impl IndexTuple {
    pub fn new(indices: Vec<usize>) -> IndexTuple {
        IndexTuple { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Mixed-radix code of a tuple: `sum_j indices[j] * n^j`.
/// Panics if any index is out of range for `n`.
pub fn encode(tuple: &IndexTuple, n: usize) -> u64 {
    let mut code: u64 = 0;
    let mut radix: u64 = 1;
    for &i in &tuple.indices {
        assert!(i < n, "tuple index {i} out of range for n = {n}");
        code += i as u64 * radix;
        radix = radix.saturating_mul(n as u64);
    }
    code
}

/// Exact inverse of [`encode`] for `k-1` digits.
/// Panics if `code >= n^(k-1)`.
pub fn decode(code: u64, n: usize, k: usize) -> IndexTuple {
    assert!(k >= 2, "k must be at least 2");
    let mut rest = code;
    let mut indices = Vec::with_capacity(k - 1);
    for _ in 0..k - 1 {
        indices.push((rest % n as u64) as usize);
        rest /= n as u64;
    }
    assert!(rest == 0, "code {code} out of range for n = {n}, k = {k}");
    IndexTuple { indices }
}

/// Structural errors on instance construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceError {
    /// No lists supplied (k would be < 2).
    NoLists,
    /// A list is empty or lengths differ across lists.
    RaggedLists,
    /// `n^(k-1)` exceeds the hash range bound `p`.
    DomainTooLarge,
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceError::NoLists => write!(f, "instance needs at least one list"),
            InstanceError::RaggedLists => {
                write!(f, "all lists must be nonempty and of equal length")
            }
            InstanceError::DomainTooLarge => {
                write!(f, "n^(k-1) exceeds the supported domain bound")
            }
        }
    }
}

impl std::error::Error for InstanceError {}

/// Line-attributed error from the instance text format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

/// The `k-1` input lists, immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    k: usize,
    lists: Vec<Vec<Element>>,
}

/// One distinct sum together with a witness and its preimage count
/// under the sum map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SumsetEntry {
    pub element: Element,
    pub witness_code: u64,
    pub multiplicity: u64,
}

/// The distinct sums of an instance, sorted by element value.
#[derive(Debug, Clone)]
pub struct Sumset {
    entries: Vec<SumsetEntry>,
}

impl Sumset {
    pub fn entries(&self) -> &[SumsetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, c: Element) -> Option<&SumsetEntry> {
        self.entries
            .binary_search_by_key(&c, |e| e.element)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn contains(&self, c: Element) -> bool {
        self.find(c).is_some()
    }
}

impl Instance {
    /// Validates and takes ownership of the lists. `k` is derived as
    /// `lists.len() + 1`; every list must hold exactly `n >= 1`
    /// elements and `n^(k-1)` must stay within the hash range bound.
    pub fn new(lists: Vec<Vec<Element>>) -> Result<Instance, InstanceError> {
        if lists.is_empty() {
            return Err(InstanceError::NoLists);
        }
        let n = lists[0].len();
        if n == 0 || lists.iter().any(|l| l.len() != n) {
            return Err(InstanceError::RaggedLists);
        }
        let k = lists.len() + 1;
        match (n as u64).checked_pow((k - 1) as u32) {
            Some(domain) if domain <= MODULUS => Ok(Instance { n, k, lists }),
            _ => Err(InstanceError::DomainTooLarge),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `N = n^(k-1)`, the size of the code domain.
    pub fn num_codes(&self) -> u64 {
        (self.n as u64).pow((self.k - 1) as u32)
    }

    pub fn lists(&self) -> &[Vec<Element>] {
        &self.lists
    }

    /// The sum map `g`: one element per list, added in the field.
    pub fn sum_at(&self, tuple: &IndexTuple) -> Element {
        assert_eq!(tuple.indices.len(), self.k - 1, "tuple arity mismatch");
        let mut acc = Element::new(0);
        for (list, &i) in self.lists.iter().zip(tuple.indices.iter()) {
            acc = acc + list[i];
        }
        acc
    }

    /// `g` on a code, decoding digits on the fly (no allocation; this is
    /// the hot path of every function evaluation).
    #[inline]
    pub fn sum_at_code(&self, code: u64) -> Element {
        let n = self.n as u64;
        let mut rest = code;
        let mut acc = Element::new(0);
        for list in &self.lists {
            acc = acc + list[(rest % n) as usize];
            rest /= n;
        }
        debug_assert!(rest == 0, "code out of range");
        acc
    }

    /// The composed self-map `f = h . g` on codes; this is the function
    /// handed to the inverter.
    #[inline]
    pub fn f_at(&self, h: &PairwiseHash, code: u64) -> u64 {
        debug_assert_eq!(h.range_size(), self.num_codes());
        h.eval(self.sum_at_code(code))
    }

    /// Enumerates the distinct sums with witnesses (smallest code) and
    /// multiplicities in one `O(N)` pass. Preprocessing-scale use only.
    pub fn enumerate_sumset(&self) -> Sumset {
        let total = self.num_codes();
        let mut pairs: Vec<(Element, u64)> = Vec::with_capacity(total as usize);
        for code in 0..total {
            pairs.push((self.sum_at_code(code), code));
        }
        pairs.sort_unstable();
        let mut entries: Vec<SumsetEntry> = Vec::new();
        for (element, code) in pairs {
            match entries.last_mut() {
                Some(e) if e.element == element => e.multiplicity += 1,
                _ => entries.push(SumsetEntry {
                    element,
                    witness_code: code,
                    multiplicity: 1,
                }),
            }
        }
        Sumset { entries }
    }

    /// Brute-force membership scan: the reference answer for any query,
    /// independent of every index structure. `O(N)` per call.
    pub fn oracle_query(&self, c: Element) -> Option<IndexTuple> {
        let total = self.num_codes();
        (0..total)
            .find(|&code| self.sum_at_code(code) == c)
            .map(|code| decode(code, self.n, self.k))
    }

    /// Parses the text format: line 1 is `n k p`, lines `2..=k` hold `n`
    /// space-separated element values each.
    pub fn parse(text: &str) -> Result<Instance, ParseError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| ParseError {
            line: 1,
            message: "empty input".into(),
        })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(ParseError {
                line: 1,
                message: format!("expected `n k p`, found {} fields", head.len()),
            });
        }
        let parse_u64 = |s: &str, line: usize, what: &str| -> Result<u64, ParseError> {
            s.parse::<u64>().map_err(|_| ParseError {
                line,
                message: format!("invalid {what} `{s}`"),
            })
        };
        let n = parse_u64(head[0], 1, "n")? as usize;
        let k = parse_u64(head[1], 1, "k")? as usize;
        let p = parse_u64(head[2], 1, "p")?;
        if p != MODULUS {
            return Err(ParseError {
                line: 1,
                message: format!("unsupported modulus {p}, expected {MODULUS}"),
            });
        }
        if k < 2 {
            return Err(ParseError {
                line: 1,
                message: format!("k must be at least 2, found {k}"),
            });
        }
        if n < 1 {
            return Err(ParseError {
                line: 1,
                message: "n must be at least 1".into(),
            });
        }
        let mut lists = Vec::with_capacity(k - 1);
        for want in 0..k - 1 {
            let (idx, line) = lines.next().ok_or_else(|| ParseError {
                line: want + 2,
                message: format!("missing list {} of {}", want + 1, k - 1),
            })?;
            let line_no = idx + 1;
            let mut list = Vec::with_capacity(n);
            for field in line.split_whitespace() {
                let v = parse_u64(field, line_no, "element")?;
                if v >= MODULUS {
                    return Err(ParseError {
                        line: line_no,
                        message: format!("element {v} not below p"),
                    });
                }
                list.push(Element::new(v));
            }
            if list.len() != n {
                return Err(ParseError {
                    line: line_no,
                    message: format!("expected {n} elements, found {}", list.len()),
                });
            }
            lists.push(list);
        }
        Instance::new(lists).map_err(|e| ParseError {
            line: 1,
            message: e.to_string(),
        })
    }

    /// Inverse of [`Instance::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n, self.k, MODULUS);
        for list in &self.lists {
            let row: Vec<String> = list.iter().map(|e| e.value().to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Multiset of all `N` sums keyed by value; test/verification helper
/// kept separate from [`Instance::enumerate_sumset`] so the two can
/// cross-check each other.
pub fn sum_multiset(instance: &Instance) -> HashMap<u64, u64> {
    let mut counts = HashMap::new();
    for code in 0..instance.num_codes() {
        *counts
            .entry(instance.sum_at_code(code).value())
            .or_insert(0u64) += 1;
    }
    counts
}
