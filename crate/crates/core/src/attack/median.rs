/// Lower median of a multiset of counters under unit increments and removals.
///
/// Keeps a histogram of counter values plus the current median value and the
/// number of elements strictly below it; each update moves the pointer by at
/// most one bucket per unit of imbalance.
#[derive(Debug, Clone)]
pub struct MedianTracker {
    hist: Vec<u64>,
    len: u64,
    median: usize,
    below: u64,
}

impl MedianTracker {
    /// `len` counters, all zero.
    pub fn new(len: u64) -> Self {
        Self {
            hist: vec![len],
            len,
            median: 0,
            below: 0,
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Element `floor((m-1)/2)` of the sorted multiset, `None` when empty.
    pub fn median(&self) -> Option<u64> {
        (self.len > 0).then_some(self.median as u64)
    }

    /// A counter moves from `old` to `old + 1`.
    pub fn increment(&mut self, old: u64) {
        let old = old as usize;
        debug_assert!(self.hist.get(old).is_some_and(|&h| h > 0));
        if old + 1 >= self.hist.len() {
            self.hist.resize(old + 2, 0);
        }
        self.hist[old] -= 1;
        self.hist[old + 1] += 1;
        if old + 1 == self.median {
            self.below -= 1;
        }
        self.rebalance();
    }

    /// A counter with value `value` leaves the multiset.
    pub fn remove(&mut self, value: u64) {
        let value = value as usize;
        debug_assert!(self.hist.get(value).is_some_and(|&h| h > 0));
        self.hist[value] -= 1;
        self.len -= 1;
        if value < self.median {
            self.below -= 1;
        }
        self.rebalance();
    }

    fn rebalance(&mut self) {
        if self.len == 0 {
            self.median = 0;
            self.below = 0;
            return;
        }
        let idx = (self.len - 1) / 2;
        loop {
            if self.below > idx {
                self.median -= 1;
                self.below -= self.hist[self.median];
            } else if self.below + self.hist[self.median] <= idx {
                self.below += self.hist[self.median];
                self.median += 1;
            } else {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::lower_median;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_brute_force(ops in proptest::collection::vec((0usize..40, any::<bool>()), 1..400)) {
            let mut vals = vec![0u64; 40];
            let mut alive = vec![true; 40];
            let mut t = MedianTracker::new(40);
            for (i, remove) in ops {
                if !alive[i] {
                    continue;
                }
                if remove {
                    t.remove(vals[i]);
                    alive[i] = false;
                } else {
                    t.increment(vals[i]);
                    vals[i] += 1;
                }
                let live: Vec<u64> = vals.iter().zip(&alive).filter(|p| *p.1).map(|p| *p.0).collect();
                prop_assert_eq!(t.median(), lower_median(&live));
            }
        }
    }

    #[test]
    fn empty_tracker() {
        let mut t = MedianTracker::new(1);
        assert_eq!(t.median(), Some(0));
        t.remove(0);
        assert_eq!(t.median(), None);
        assert!(t.is_empty());
    }
}
