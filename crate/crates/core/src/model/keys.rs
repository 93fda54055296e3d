use std::fmt;

use crate::error::{Error, Result};

/// The universe `0..n` of keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroundSet {
    n: u32,
}

impl GroundSet {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(crate::error::invalid("n", format!("ground set needs at least 2 keys, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn empty(&self) -> KeySet {
        KeySet::empty(self.n)
    }

    pub fn full(&self) -> KeySet {
        KeySet::full(self.n)
    }

    pub fn subset(&self, keys: impl IntoIterator<Item = u32>) -> Result<KeySet> {
        KeySet::from_keys(self.n, keys)
    }
}

/// A subset of `0..n` stored as a bitset.
///
/// Iteration is always in increasing key order, so the set doubles as the
/// sorted duplicate-free member list.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeySet {
    n: u32,
    words: Vec<u64>,
}

fn word_count(n: u32) -> usize {
    (n as usize).div_ceil(64)
}

impl KeySet {
    pub fn empty(n: u32) -> Self {
        Self {
            n,
            words: vec![0; word_count(n)],
        }
    }

    pub fn full(n: u32) -> Self {
        let mut s = Self {
            n,
            words: vec![u64::MAX; word_count(n)],
        };
        s.trim();
        s
    }

    /// Builds a set from keys in any order; duplicates are merged.
    pub fn from_keys(n: u32, keys: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut s = Self::empty(n);
        for key in keys {
            if key >= n {
                return Err(Error::KeyOutOfRange { key, n });
            }
            s.insert(key);
        }
        Ok(s)
    }

    /// Builds a set from raw words; bits at or above `n` are cleared.
    pub fn from_words(n: u32, mut words: Vec<u64>) -> Self {
        words.resize(word_count(n), 0);
        let mut s = Self { n, words };
        s.trim();
        s
    }

    fn trim(&mut self) {
        let rem = self.n % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Size of the universe this set lives in.
    pub fn universe(&self) -> u32 {
        self.n
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    #[inline]
    pub fn contains(&self, key: u32) -> bool {
        key < self.n && self.words[(key >> 6) as usize] >> (key & 63) & 1 == 1
    }

    /// Inserts `key`; returns true if it was absent.
    ///
    /// # Panics
    /// If `key >= n`.
    #[inline]
    pub fn insert(&mut self, key: u32) -> bool {
        assert!(key < self.n, "key {key} outside universe of size {}", self.n);
        let w = &mut self.words[(key >> 6) as usize];
        let bit = 1u64 << (key & 63);
        let fresh = *w & bit == 0;
        *w |= bit;
        fresh
    }

    #[inline]
    pub fn remove(&mut self, key: u32) -> bool {
        if key >= self.n {
            return false;
        }
        let w = &mut self.words[(key >> 6) as usize];
        let bit = 1u64 << (key & 63);
        let present = *w & bit != 0;
        *w &= !bit;
        present
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn iter(&self) -> Iter<'_> {
        Iter {
            words: &self.words,
            idx: 0,
            cur: self.words.first().copied().unwrap_or(0),
        }
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.iter().collect()
    }

    /// Smallest member, if any.
    pub fn first(&self) -> Option<u32> {
        self.iter().next()
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(self.n, other.n, "key sets from different universes");
    }

    pub fn union_with(&mut self, other: &Self) {
        self.check_same(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &Self) {
        self.check_same(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn difference_with(&mut self, other: &Self) {
        self.check_same(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut s = self.clone();
        s.difference_with(other);
        s
    }

    pub fn complement(&self) -> Self {
        Self::full(self.n).difference(self)
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        self.check_same(other);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.check_same(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersection_len(other) == 0
    }
}

impl fmt::Debug for KeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl<'a> IntoIterator for &'a KeySet {
    type Item = u32;
    type IntoIter = Iter<'a>;

    fn into_iter(self) -> Iter<'a> {
        self.iter()
    }
}

/// Ascending iterator over the members of a [`KeySet`].
pub struct Iter<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl Iterator for Iter<'_> {
    type Item = u32;

    #[inline]
    fn next(&mut self) -> Option<u32> {
        loop {
            if self.cur != 0 {
                let tz = self.cur.trailing_zeros();
                self.cur &= self.cur - 1;
                return Some((self.idx as u32) * 64 + tz);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}
