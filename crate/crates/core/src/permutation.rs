//! Decks in one-line notation and the three statistics read off them.
//!
//! Positions are 1-based in the public API: position 1 is the top of the deck
//! and `get(i)` is the card at depth `i`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    entries: Vec<u32>,
}

/// Statistics of the first `len` positions of a permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefixSummary {
    pub len: usize,
    pub prefix_max: u32,
    pub prefix_fixed: usize,
    pub prefix_descents: usize,
    /// Pairs `(i, k)` with `i <= len`, `i < k <= n` and `entries[i] > entries[k]`.
    pub prefix_inversions: u64,
}

impl Permutation {
    /// The ordered deck `{1, 2, ..., n}`.
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDeckSize(0));
        }
        Ok(Self {
            entries: (1..=n as u32).collect(),
        })
    }

    /// Validates that `entries` is a bijection of `1..=n`.
    pub fn from_entries(entries: Vec<u32>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::InvalidDeckSize(0));
        }
        let mut seen = vec![false; n];
        for &v in &entries {
            let idx = (v as usize).wrapping_sub(1);
            if idx >= n || seen[idx] {
                return Err(Error::NotAPermutation(n));
            }
            seen[idx] = true;
        }
        Ok(Self { entries })
    }

    /// Skips validation; callers guarantee a bijection.
    pub(crate) fn from_entries_unchecked(entries: Vec<u32>) -> Self {
        debug_assert!(Self::from_entries(entries.clone()).is_ok());
        Self { entries }
    }

    /// Uniformly random permutation of `1..=n` (Fisher-Yates).
    pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDeckSize(0));
        }
        let mut entries: Vec<u32> = (1..=n as u32).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            entries.swap(i, j);
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Card values from the top of the deck down; `entries()[i - 1]` is the
    /// card at position `i`.
    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<u32> {
        self.entries
    }

    /// Card at 1-based position `pos`.
    pub fn get(&self, pos: usize) -> Option<u32> {
        pos.checked_sub(1).and_then(|i| self.entries.get(i).copied())
    }

    pub fn is_identity(&self) -> bool {
        self.entries
            .iter()
            .enumerate()
            .all(|(i, &v)| v as usize == i + 1)
    }

    /// The inverse permutation: `inverse.get(self.get(i)) == i`.
    pub fn invert(&self) -> Self {
        let mut inv = vec![0u32; self.entries.len()];
        for (i, &v) in self.entries.iter().enumerate() {
            inv[v as usize - 1] = i as u32 + 1;
        }
        Self { entries: inv }
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::NotAPermutation(other.len()));
        }
        Ok(Self {
            entries: other
                .entries
                .iter()
                .map(|&v| self.entries[v as usize - 1])
                .collect(),
        })
    }

    pub fn count_fixed_points(&self) -> usize {
        count_fixed_points(&self.entries)
    }

    pub fn count_descents(&self) -> usize {
        count_descents(&self.entries)
    }

    /// Inversion count by merge sort, O(n log n).
    pub fn count_inversions(&self) -> u64 {
        count_inversions(&self.entries)
    }

    pub fn prefix_summary(&self, len: usize) -> Result<PrefixSummary> {
        let n = self.len();
        if len == 0 || len > n {
            return Err(Error::IndexOutOfRange {
                index: len,
                lo: 1,
                hi: n,
            });
        }
        let prefix = &self.entries[..len];
        Ok(PrefixSummary {
            len,
            prefix_max: prefix.iter().copied().max().unwrap_or(0),
            prefix_fixed: count_fixed_points(prefix),
            prefix_descents: count_descents(prefix),
            prefix_inversions: prefix_inversions(&self.entries, len),
        })
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

/// Fixed points of a (possibly partial) one-line listing, positions counted from 1.
pub fn count_fixed_points(entries: &[u32]) -> usize {
    entries
        .iter()
        .enumerate()
        .filter(|&(i, &v)| v as usize == i + 1)
        .count()
}

pub fn count_descents(entries: &[u32]) -> usize {
    entries.windows(2).filter(|w| w[0] > w[1]).count()
}

pub fn count_inversions(entries: &[u32]) -> u64 {
    let mut work = entries.to_vec();
    let mut buf = vec![0u32; entries.len()];
    merge_count(&mut work, &mut buf)
}

fn merge_count(xs: &mut [u32], buf: &mut [u32]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (lo, hi) = xs.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        merge_count(lo, blo) + merge_count(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if xs[i] <= xs[j] {
            buf[k] = xs[i];
            i += 1;
        } else {
            buf[k] = xs[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&xs[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&xs[j..n]);
    xs.copy_from_slice(&buf[..n]);
    count
}

/// Inversions `(i, k)` whose left position lies in the first `len` positions.
fn prefix_inversions(entries: &[u32], len: usize) -> u64 {
    let n = entries.len();
    let mut tree = Fenwick::new(n);
    let mut total = 0u64;
    for (i, &v) in entries.iter().enumerate().rev() {
        if i < len {
            total += tree.prefix_sum(v as usize - 1);
        }
        tree.add(v as usize);
    }
    total
}

/// Counts over values `1..=n`.
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, mut i: usize) {
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted values in `1..=i`.
    fn prefix_sum(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }
}

/// First `len` entries of a uniformly random permutation of `1..=n`, drawn by
/// a partial Fisher-Yates pass in O(n) time.
pub fn sample_uniform_prefix<R: Rng + ?Sized>(n: usize, len: usize, rng: &mut R) -> Vec<u32> {
    let mut entries: Vec<u32> = (1..=n as u32).collect();
    let len = len.min(n);
    for i in 0..len {
        let j = rng.random_range(i..n);
        entries.swap(i, j);
    }
    entries.truncate(len);
    entries
}
