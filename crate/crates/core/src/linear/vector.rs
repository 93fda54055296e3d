use crate::error::{Error, Result};
use crate::model::KeySet;

/// A sparse query vector: stored entries are the keys of `U ∪ M`, sorted.
///
/// Over `F_p` an entry may hold a sampled zero; it is kept so that the support
/// the attacker intended stays visible next to the true `‖v‖₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVector<V> {
    n: u32,
    keys: Vec<u32>,
    values: Vec<V>,
}

impl<V> QueryVector<V> {
    pub fn zero(n: u32) -> Self {
        Self {
            n,
            keys: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_pairs(n: u32, mut pairs: Vec<(u32, V)>) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        if let Some(&(key, _)) = pairs.iter().find(|p| p.0 >= n) {
            return Err(Error::KeyOutOfRange { key, n });
        }
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(crate::error::invalid("pairs", "duplicate key"));
        }
        let (keys, values) = pairs.into_iter().unzip();
        Ok(Self { n, keys, values })
    }

    /// Every coordinate stored, in order.
    pub fn dense(values: Vec<V>) -> Self {
        Self {
            n: values.len() as u32,
            keys: (0..values.len() as u32).collect(),
            values,
        }
    }

    pub(crate) fn from_sorted(n: u32, keys: Vec<u32>, values: Vec<V>) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        Self { n, keys, values }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[u32] {
        &self.keys
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &V)> + '_ {
        self.keys.iter().copied().zip(&self.values)
    }

    pub fn get(&self, key: u32) -> Option<&V> {
        self.keys.binary_search(&key).ok().map(|i| &self.values[i])
    }

    /// Stored keys as a set, including entries whose value is zero.
    pub fn support(&self) -> KeySet {
        let mut out = KeySet::empty(self.n);
        self.keys.iter().for_each(|&k| {
            out.insert(k);
        });
        out
    }
}

impl QueryVector<u64> {
    /// Stored entries that hold a sampled zero.
    pub fn sampled_zeros(&self) -> usize {
        self.values.iter().filter(|v| **v == 0).count()
    }

    /// `‖v‖₀`.
    pub fn l0(&self) -> usize {
        self.len() - self.sampled_zeros()
    }
}
