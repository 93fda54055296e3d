use std::collections::HashMap;

use super::ComposableMap;
use crate::error::{invalid, Result};
use crate::model::KeySet;

pub const DEFAULT_AXIOM_N_MAX: u32 = 12;

/// Outcome of one exhaustive check.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub name: &'static str,
    pub passed: bool,
    pub skipped: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub family: &'static str,
    pub n: u32,
    pub distinct_sketches: usize,
    pub max_core: usize,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

struct Tally {
    name: &'static str,
    witness: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, witness: None }
    }

    fn fail(&mut self, msg: impl FnOnce() -> String) {
        if self.witness.is_none() {
            self.witness = Some(msg());
        }
    }

    fn done(self) -> AxiomCheck {
        AxiomCheck {
            name: self.name,
            passed: self.witness.is_none(),
            skipped: false,
            witness: self.witness,
        }
    }
}

fn bits(mask: u32) -> String {
    let keys: Vec<u32> = (0..32).filter(|i| mask >> i & 1 == 1).collect();
    format!("{keys:?}")
}

fn submasks(v: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(v);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & v) };
        Some(cur)
    })
}

/// Exhaustively checks the composable-map axioms over all `2^n` subsets.
pub fn brute_force_axioms<M: ComposableMap + ?Sized>(map: &M, n_max: u32) -> Result<AxiomReport> {
    let n = map.n();
    if n > n_max || n > 20 {
        return Err(invalid("n", format!("exhaustive check needs n <= {}, map has n = {n}", n_max.min(20))));
    }
    let total = 1u32 << n;
    let set_of = |mask: u32| KeySet::from_words(n, vec![mask as u64]);

    let mut ids: HashMap<M::Sketch, u32> = HashMap::new();
    let mut reps: Vec<M::Sketch> = Vec::new();
    let mut id = vec![0u32; total as usize];
    for mask in 0..total {
        let s = map.sketch(&set_of(mask))?;
        let next = reps.len() as u32;
        let e = *ids.entry(s.clone()).or_insert_with(|| {
            reps.push(s);
            next
        });
        id[mask as usize] = e;
    }
    let distinct = reps.len();

    // compose table over distinct sketches; u32::MAX marks an unknown result
    let mut table = vec![u32::MAX; distinct * distinct];
    let mut foreign: Option<String> = None;
    for a in 0..distinct {
        for b in 0..distinct {
            match map.compose(&reps[a], &reps[b]) {
                Ok(s) => {
                    if let Some(&c) = ids.get(&s) {
                        table[a * distinct + b] = c;
                    } else if foreign.is_none() {
                        foreign = Some(format!("{:?} ⊕ {:?} = {:?} is not the sketch of any set", reps[a], reps[b], s));
                    }
                }
                Err(e) => {
                    if foreign.is_none() {
                        foreign = Some(format!("compose failed: {e}"));
                    }
                }
            }
        }
    }
    let op = |a: u32, b: u32| table[a as usize * distinct + b as usize];

    let mut checks = Vec::new();

    let mut t = Tally::new("composability");
    if let Some(w) = foreign.clone() {
        t.fail(|| w);
    }
    'outer: for u in 0..total {
        for v in 0..total {
            if op(id[u as usize], id[v as usize]) != id[(u | v) as usize] {
                t.fail(|| format!("S({}) ⊕ S({}) != S(union)", bits(u), bits(v)));
                break 'outer;
            }
        }
    }
    checks.push(t.done());

    let mut t = Tally::new("idempotence");
    for a in 0..distinct as u32 {
        if op(a, a) != a {
            t.fail(|| format!("{:?} ⊕ itself differs", reps[a as usize]));
        }
    }
    checks.push(t.done());

    let empty_id = id[0];
    let mut t = Tally::new("identity");
    for a in 0..distinct as u32 {
        if op(empty_id, a) != a {
            t.fail(|| format!("S(∅) ⊕ {:?} differs", reps[a as usize]));
        }
    }
    checks.push(t.done());

    let mut t = Tally::new("commutativity");
    for a in 0..distinct as u32 {
        for b in 0..distinct as u32 {
            if op(a, b) != op(b, a) {
                t.fail(|| format!("{:?}, {:?}", reps[a as usize], reps[b as usize]));
            }
        }
    }
    checks.push(t.done());

    let mut t = Tally::new("associativity");
    let d = distinct as u64;
    let triples = d * d * d;
    let stride = (triples / 200_000).max(1);
    let mut idx = 0u64;
    while idx < triples {
        let (a, b, c) = ((idx / (d * d)) as u32, ((idx / d) % d) as u32, (idx % d) as u32);
        let left = op(a, b);
        let right = op(b, c);
        if left == u32::MAX || right == u32::MAX || op(left, c) != op(a, right) {
            t.fail(|| format!("({:?} ⊕ {:?}) ⊕ {:?}", reps[a as usize], reps[b as usize], reps[c as usize]));
            break;
        }
        idx += stride;
    }
    checks.push(t.done());

    let mut t = Tally::new("midpoint");
    'mid: for v in 0..total {
        for u in submasks(v) {
            if id[u as usize] != id[v as usize] {
                continue;
            }
            for extra in submasks(v & !u) {
                if id[(u | extra) as usize] != id[v as usize] {
                    t.fail(|| format!("S({}) = S({}) but S({}) differs", bits(u), bits(v), bits(u | extra)));
                    break 'mid;
                }
            }
        }
    }
    checks.push(t.done());

    let mut maxset = vec![0u32; distinct];
    for mask in 0..total {
        maxset[id[mask as usize] as usize] |= mask;
    }
    let mut t = Tally::new("maxset");
    for (s, &m) in maxset.iter().enumerate() {
        if id[m as usize] != s as u32 {
            t.fail(|| format!("MaxSet({:?}) = {} sketches differently", reps[s], bits(m)));
        }
    }
    checks.push(t.done());

    let mut t = Tally::new("containment-order");
    'ord: for v in 0..total {
        let iv = id[v as usize];
        for u in submasks(v) {
            let iu = id[u as usize];
            if op(iu, iv) != iv || maxset[iu as usize] & !maxset[iv as usize] != 0 {
                t.fail(|| format!("{} ⊆ {} but sketches are not ordered", bits(u), bits(v)));
                break 'ord;
            }
        }
    }
    checks.push(t.done());

    let mut core_size = vec![0usize; total as usize];
    let mut t = Tally::new("core-characterization");
    for u in 0..total {
        let core = map.in_core(&set_of(u))?;
        let c = core.words().first().copied().unwrap_or(0) as u32;
        core_size[u as usize] = core.len();
        let iu = id[u as usize];
        let minimal = (0..n).filter(|i| c >> i & 1 == 1).all(|i| id[(c & !(1 << i)) as usize] != iu);
        if c & !u != 0 || id[c as usize] != iu || !minimal || u & !maxset[iu as usize] != 0 {
            t.fail(|| format!("in_core({}) = {} is not a minimal core inside it", bits(u), bits(c)));
        }
    }
    checks.push(t.done());

    // all minimal preimages, grouped by sketch
    let mut core_sizes: Vec<(usize, usize)> = vec![(usize::MAX, 0); distinct];
    for u in 0..total {
        let iu = id[u as usize];
        if (0..n).filter(|i| u >> i & 1 == 1).all(|i| id[(u & !(1 << i)) as usize] != iu) {
            let e = &mut core_sizes[iu as usize];
            let size = u.count_ones() as usize;
            e.0 = e.0.min(size);
            e.1 = e.1.max(size);
        }
    }
    let max_core = core_sizes.iter().map(|e| e.1).max().unwrap_or(0);
    let mut t = Tally::new("rank-bound");
    if max_core > map.rank_bound() {
        t.fail(|| format!("a core of size {max_core} exceeds the bound {}", map.rank_bound()));
    }
    checks.push(t.done());

    if map.is_monotone() {
        let mut t = Tally::new("monotone-core-size");
        for (s, &(lo, hi)) in core_sizes.iter().enumerate() {
            if lo != hi {
                t.fail(|| format!("{:?} has cores of sizes {lo} and {hi}", reps[s]));
            }
        }
        'mono: for v in 0..total {
            for u in submasks(v) {
                if core_size[u as usize] > core_size[v as usize] {
                    t.fail(|| format!("{} ⊆ {} but its core is larger", bits(u), bits(v)));
                    break 'mono;
                }
            }
        }
        checks.push(t.done());
    } else {
        checks.push(AxiomCheck {
            name: "monotone-core-size",
            passed: true,
            skipped: true,
            witness: None,
        });
    }

    Ok(AxiomReport {
        family: map.family(),
        n,
        distinct_sketches: distinct,
        max_core,
        checks,
    })
}
