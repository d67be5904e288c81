use serde::{Deserialize, Serialize};
use std::fmt;

/// A set of variable indices out of a ground set `{0, .., n-1}`, stored as a
/// bitmask. Indices are 0-based everywhere inside the library; conversion to
/// the 1-based convention used in printed output happens at the formatting
/// boundary ([`fmt::Display`] and the `one_based` helpers).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet {
    n: usize,
    blocks: Vec<u64>,
}

impl IndexSet {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            blocks: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Build from 1-based indices, as they appear in printed tables and CLI
    /// arguments.
    pub fn from_one_based(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        Self::from_indices(n, indices.into_iter().map(|i| i - 1))
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.n, "index {i} out of range 0..{}", self.n);
        self.blocks[i / 64] |= 1u64 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < self.n);
        self.blocks[i / 64] &= !(1u64 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.blocks[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a | b)
            .collect();
        Self { n: self.n, blocks }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a & b)
            .collect();
        Self { n: self.n, blocks }
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a & !b)
            .collect();
        Self { n: self.n, blocks }
    }

    /// Complement within the ground set.
    pub fn complement(&self) -> Self {
        let mut s = Self {
            n: self.n,
            blocks: self.blocks.iter().map(|b| !b).collect(),
        };
        // mask tail bits beyond n
        let tail = self.n % 64;
        if tail != 0 {
            if let Some(last) = s.blocks.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
        if self.n == 0 {
            s.blocks.clear();
        }
        s
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| a & b == 0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn smallest(&self) -> Option<usize> {
        self.iter().next()
    }

    /// Ascending iteration over members.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().enumerate().flat_map(|(bi, &block)| {
            let mut b = block;
            std::iter::from_fn(move || {
                if b == 0 {
                    None
                } else {
                    let t = b.trailing_zeros() as usize;
                    b &= b - 1;
                    Some(bi * 64 + t)
                }
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Members as 1-based indices, for printed output.
    pub fn one_based(&self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}
