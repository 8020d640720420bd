//! Partitions of the site indices `{0..n−1}` into exactly `k` nonempty,
//! unlabeled blocks, encoded as restricted growth strings, and the swap sets
//! each partition induces.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest site count representable by [`SiteSet`].
pub const MAX_SITES: usize = 64;

/// A subset of site indices, stored as a bitmask (bit `m` ↔ site `m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SiteSet(u64);

/// Sites exchanged between the two copies by a swap operator.
pub type SwapSet = SiteSet;

impl SiteSet {
    pub const EMPTY: SiteSet = SiteSet(0);

    pub fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    /// All sites `0..n`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_SITES, "at most {MAX_SITES} sites");
        if n == MAX_SITES {
            Self(u64::MAX)
        } else {
            Self((1u64 << n) - 1)
        }
    }

    pub fn from_sites<I: IntoIterator<Item = usize>>(sites: I) -> Self {
        Self(sites.into_iter().fold(0u64, |acc, m| {
            assert!(m < MAX_SITES, "site {m} out of range");
            acc | (1 << m)
        }))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, site: usize) -> bool {
        site < MAX_SITES && self.0 & (1 << site) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: SiteSet) -> SiteSet {
        Self(self.0 | other.0)
    }

    /// Whether every member is below `n`.
    pub fn within(self, n: usize) -> bool {
        n >= MAX_SITES || self.0 >> n == 0
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_SITES).filter(move |&m| self.contains(m))
    }
}

impl fmt::Display for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sites: Vec<String> = self.iter().map(|m| m.to_string()).collect();
        write!(f, "{{{}}}", sites.join(","))
    }
}

/// A partition of `n` sites into exactly `k` nonempty blocks.
///
/// Block `i` is the set of sites whose label is `i`; labels follow first
/// occurrence, so `rgs[0] = 0` and each label is at most one more than every
/// earlier label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KPartition {
    rgs: Vec<usize>,
    k: usize,
}

impl KPartition {
    /// Validates a restricted growth string.
    pub fn from_rgs(rgs: Vec<usize>) -> Result<Self> {
        if rgs.is_empty() || rgs.len() > MAX_SITES {
            return Err(Error::Parameter(format!(
                "partition of {} sites (expected 1..={MAX_SITES})",
                rgs.len()
            )));
        }
        let mut max = None::<usize>;
        for (m, &label) in rgs.iter().enumerate() {
            let limit = max.map_or(0, |x| x + 1);
            if label > limit {
                return Err(Error::Parameter(format!(
                    "label {label} at site {m} breaks the growth condition"
                )));
            }
            max = Some(max.map_or(label, |x| x.max(label)));
        }
        let k = max.unwrap_or(0) + 1;
        Ok(Self { rgs, k })
    }

    pub fn n(&self) -> usize {
        self.rgs.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rgs(&self) -> &[usize] {
        &self.rgs
    }

    pub fn block(&self, i: usize) -> SiteSet {
        SiteSet::from_sites(
            self.rgs
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == i)
                .map(|(m, _)| m),
        )
    }

    pub fn blocks(&self) -> Vec<SiteSet> {
        let mut out = vec![SiteSet::EMPTY; self.k];
        for (m, &l) in self.rgs.iter().enumerate() {
            out[l] = out[l].union(SiteSet::from_sites([m]));
        }
        out
    }
}

/// Block notation: blocks separated by `|`, sites by `,` (e.g. `0,1|2`).
impl fmt::Display for KPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks: Vec<String> = self
            .blocks()
            .into_iter()
            .map(|b| b.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        f.write_str(&blocks.join("|"))
    }
}

impl FromStr for KPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format {
            context: format!("partition `{s}`"),
            message: msg,
        };
        let mut blocks = Vec::new();
        for block in s.split('|') {
            let sites = block
                .split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|e| bad(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            blocks.push(sites);
        }
        let n: usize = blocks.iter().map(Vec::len).sum();
        if n == 0 || n > MAX_SITES {
            return Err(bad(format!("{n} sites")));
        }
        let mut owner = vec![None; n];
        for (b, sites) in blocks.iter().enumerate() {
            for &m in sites {
                match owner.get_mut(m) {
                    Some(slot @ None) => *slot = Some(b),
                    _ => return Err(bad(format!("site {m} repeated or out of range"))),
                }
            }
        }
        // relabel by first occurrence
        let mut relabel = vec![None; blocks.len()];
        let mut next = 0;
        let rgs = owner
            .into_iter()
            .map(|b| {
                let b = b.expect("every site assigned");
                *relabel[b].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        KPartition::from_rgs(rgs)
    }
}

fn check_range(n: usize, k: usize) -> Result<()> {
    if n == 0 || n > MAX_SITES {
        return Err(Error::Parameter(format!("n = {n} outside 1..={MAX_SITES}")));
    }
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} outside 1..={n}")));
    }
    Ok(())
}

/// Lexicographic generator of all `k`-block partitions of `n` sites.
#[derive(Debug, Clone)]
pub struct KPartitions {
    k: usize,
    next: Option<Vec<usize>>,
}

impl KPartitions {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        check_range(n, k)?;
        // lexicographically smallest: zeros, then 1, 2, …, k−1 at the tail
        let first = (0..n).map(|m| (m + k).saturating_sub(n)).collect();
        Ok(Self {
            k,
            next: Some(first),
        })
    }

    fn advance(&self, cur: &[usize]) -> Option<Vec<usize>> {
        let n = cur.len();
        let k = self.k;
        let mut prefix_max = vec![0; n];
        let mut run = 0;
        for (m, &l) in cur.iter().enumerate() {
            run = run.max(l);
            prefix_max[m] = run;
        }
        for i in (1..n).rev() {
            let cap = (prefix_max[i - 1] + 1).min(k - 1);
            if cur[i] >= cap {
                continue;
            }
            let label = cur[i] + 1;
            let mut max = prefix_max[i - 1].max(label);
            // the n−1−i remaining sites must still open every missing label
            if n - 1 - i < k - 1 - max {
                continue;
            }
            let mut out = cur[..i].to_vec();
            out.push(label);
            for j in i + 1..n {
                let remaining = n - j;
                let needed = k - 1 - max;
                if remaining > needed {
                    out.push(0);
                } else {
                    max += 1;
                    out.push(max);
                }
            }
            return Some(out);
        }
        None
    }
}

impl Iterator for KPartitions {
    type Item = KPartition;

    fn next(&mut self) -> Option<KPartition> {
        let cur = self.next.take()?;
        self.next = self.advance(&cur);
        Some(KPartition { rgs: cur, k: self.k })
    }
}

/// Streaming form of [`enumerate_kpartitions`].
pub fn kpartitions(n: usize, k: usize) -> Result<KPartitions> {
    KPartitions::new(n, k)
}

/// All `k`-block partitions of `n` sites in lexicographic RGS order.
pub fn enumerate_kpartitions(n: usize, k: usize) -> Result<Vec<KPartition>> {
    Ok(KPartitions::new(n, k)?.collect())
}

/// Stirling number of the second kind `S(n, k)`, `None` on overflow.
pub fn stirling2(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    // row[j] = S(m, j)
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for _ in 0..n {
        for j in (1..=k).rev() {
            row[j] = (j as u128).checked_mul(row[j])?.checked_add(row[j - 1])?;
        }
        row[0] = 0;
    }
    Some(row[k])
}

/// One merged factor of a partition term: the sites swapped for the ordered
/// block pair `(i, j)` and how many ordered pairs share that set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapTerm {
    pub i: usize,
    pub j: usize,
    pub set: SwapSet,
    pub multiplicity: u32,
}

/// Swap sets `block_i ∪ block_j` over all ordered pairs, merged by equality.
///
/// Entries keep the first ordered pair (row-major) that produced them, and the
/// multiplicities sum to `k²`.
pub fn swap_sets(alpha: &KPartition) -> Vec<SwapTerm> {
    let blocks = alpha.blocks();
    let mut out: Vec<SwapTerm> = Vec::new();
    for (i, bi) in blocks.iter().enumerate() {
        for (j, bj) in blocks.iter().enumerate() {
            let set = bi.union(*bj);
            match out.iter_mut().find(|t| t.set == set) {
                Some(t) => t.multiplicity += 1,
                None => out.push(SwapTerm {
                    i,
                    j,
                    set,
                    multiplicity: 1,
                }),
            }
        }
    }
    out
}
