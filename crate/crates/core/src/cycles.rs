//! Periodic orbits of `T_k` and classification of integers by the cycle they
//! fall into.
//!
//! Classification runs over a memo of already-resolved states. Each memo entry
//! records not only the attracting cycle and the distance to it, but also how
//! many applications an independent run from that state would need before it
//! could stop, and the largest bit size met on the way. Inherited results are
//! therefore subject to exactly the caps a fresh run would face, so memoized
//! and independent classification agree outcome for outcome.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::OrbitError;
use crate::map::{t_apply, MapParam};

const CHUNK: usize = 2048;

/// Identifies a cycle by its generator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleId(BigInt);

impl CycleId {
    pub fn generator(&self) -> &BigInt {
        &self.0
    }
}

impl From<i64> for CycleId {
    fn from(g: i64) -> Self {
        CycleId(BigInt::from(g))
    }
}

impl From<BigInt> for CycleId {
    fn from(g: BigInt) -> Self {
        CycleId(g)
    }
}

impl fmt::Display for CycleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for CycleId {
    type Err = OrbitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<BigInt>()
            .map(CycleId)
            .map_err(|e| OrbitError::Parse(format!("cycle id {s:?}: {e}")))
    }
}

impl Serialize for CycleId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for CycleId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One period of a cycle, rotated to start at its generator: the element of
/// least absolute value, the positive one on a tie.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cycle {
    elements: Vec<BigInt>,
}

impl Cycle {
    /// Canonicalizes one period given in orbit order, starting anywhere.
    pub fn from_elements(mut elements: Vec<BigInt>) -> Self {
        assert!(!elements.is_empty(), "empty cycle");
        let g = elements
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.abs().cmp(&b.abs()).then_with(|| b.cmp(a)))
            .map(|(i, _)| i)
            .unwrap();
        elements.rotate_left(g);
        Cycle { elements }
    }

    pub fn elements(&self) -> &[BigInt] {
        &self.elements
    }

    pub fn generator(&self) -> &BigInt {
        &self.elements[0]
    }

    pub fn id(&self) -> CycleId {
        CycleId(self.elements[0].clone())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: &BigInt) -> bool {
        self.elements.contains(n)
    }

    pub fn has_positive(&self) -> bool {
        self.elements.iter().any(|e| e.is_positive())
    }

    /// Re-checks closure and distinctness under `T_k`.
    pub fn verify(&self, p: &MapParam) -> bool {
        let n = self.elements.len();
        let mut sorted = self.elements.clone();
        sorted.sort();
        sorted.dedup();
        sorted.len() == n
            && (0..n).all(|i| t_apply(p, &self.elements[i]) == self.elements[(i + 1) % n])
    }
}

/// A collection of canonical cycles with element lookup.
#[derive(Clone, Debug, Default)]
pub struct CycleSet {
    cycles: BTreeMap<CycleId, Cycle>,
    index: HashMap<BigInt, CycleId>,
}

impl CycleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the cycle was already present.
    pub fn insert(&mut self, c: Cycle) -> bool {
        let id = c.id();
        if self.cycles.contains_key(&id) {
            return false;
        }
        for e in c.elements() {
            self.index.insert(e.clone(), id.clone());
        }
        self.cycles.insert(id, c);
        true
    }

    pub fn get(&self, id: &CycleId) -> Option<&Cycle> {
        self.cycles.get(id)
    }

    pub fn cycle_of(&self, n: &BigInt) -> Option<&CycleId> {
        self.index.get(n)
    }

    /// Cycles in generator order.
    pub fn iter(&self) -> impl Iterator<Item = &Cycle> {
        self.cycles.values()
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }
}

impl FromIterator<Cycle> for CycleSet {
    fn from_iter<I: IntoIterator<Item = Cycle>>(iter: I) -> Self {
        let mut s = CycleSet::new();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Positive,
    AllIntegers,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Attraction {
    Attracted { cycle: CycleId, steps_to_entry: u64 },
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifyOutcome {
    pub n: BigInt,
    pub result: Attraction,
}

impl ClassifyOutcome {
    pub fn cycle(&self) -> Option<&CycleId> {
        match &self.result {
            Attraction::Attracted { cycle, .. } => Some(cycle),
            Attraction::Unresolved => None,
        }
    }
}

/// A single classification plus the cycle it closed, if that cycle was not
/// among the known ones.
#[derive(Clone, Debug)]
pub struct Classification {
    pub outcome: ClassifyOutcome,
    pub discovered: Option<Cycle>,
}

#[derive(Clone, Debug)]
pub struct RangeClassification {
    pub outcomes: Vec<ClassifyOutcome>,
    /// Cycles closed during the run that were not in the known set, in
    /// generator order.
    pub discovered: Vec<Cycle>,
}

#[derive(Clone, Debug)]
pub struct CycleSearch {
    /// Distinct cycles in generator order.
    pub cycles: Vec<Cycle>,
    /// Starting points skipped because they hit a cap.
    pub capped: Vec<BigInt>,
}

#[derive(Clone, Debug)]
struct Resolved {
    cycle: usize,
    steps: u64,
    cost: u64,
    peak_bits: u64,
}

/// Classifier state: the known cycles, the ones found along the way, and the
/// memo of resolved states.
struct Classifier<'a> {
    p: &'a MapParam,
    cycles: Vec<Cycle>,
    known_len: usize,
    members: HashMap<BigInt, usize>,
    memo: HashMap<BigInt, Resolved>,
}

impl<'a> Classifier<'a> {
    fn new(p: &'a MapParam, known: &CycleSet) -> Self {
        let mut c = Classifier {
            p,
            cycles: Vec::new(),
            known_len: 0,
            members: HashMap::new(),
            memo: HashMap::new(),
        };
        for cyc in known.iter() {
            let i = c.cycles.len();
            for e in cyc.elements() {
                c.members.insert(e.clone(), i);
            }
            c.cycles.push(cyc.clone());
        }
        c.known_len = c.cycles.len();
        c
    }

    fn outcome(&self, n: BigInt, r: Option<(usize, u64)>) -> ClassifyOutcome {
        let result = match r {
            Some((ci, steps)) => Attraction::Attracted {
                cycle: self.cycles[ci].id(),
                steps_to_entry: steps,
            },
            None => Attraction::Unresolved,
        };
        ClassifyOutcome { n, result }
    }

    fn classify(&mut self, n: &BigInt) -> ClassifyOutcome {
        let max_steps = self.p.max_steps();
        let max_bits = self.p.max_bits();
        let mut path: Vec<BigInt> = Vec::new();
        let mut bits: Vec<u64> = Vec::new();
        let mut pos: HashMap<BigInt, usize> = HashMap::new();
        let mut x = n.clone();

        enum Stop {
            Known(usize),
            Memo(Resolved),
            Closed(usize),
        }

        let stop = loop {
            let xb = x.bits();
            if xb > max_bits {
                return self.outcome(n.clone(), None);
            }
            if let Some(&ci) = self.members.get(&x) {
                path.push(x);
                bits.push(xb);
                break Stop::Known(ci);
            }
            if let Some(r) = self.memo.get(&x) {
                break Stop::Memo(r.clone());
            }
            if let Some(&j) = pos.get(&x) {
                break Stop::Closed(j);
            }
            if path.len() as u64 == max_steps {
                return self.outcome(n.clone(), None);
            }
            let next = t_apply(self.p, &x);
            pos.insert(x.clone(), path.len());
            path.push(x);
            bits.push(xb);
            x = next;
        };

        // suffix_peak[j] = max bits over path[j..]
        let mut suffix_peak = bits.clone();
        for j in (0..suffix_peak.len().saturating_sub(1)).rev() {
            suffix_peak[j] = suffix_peak[j].max(suffix_peak[j + 1]);
        }

        match stop {
            Stop::Known(ci) => {
                // the last path element lies on a known cycle
                let i = path.len() - 1;
                for (j, s) in path.iter().enumerate().take(i) {
                    let d = (i - j) as u64;
                    self.memo.insert(
                        s.clone(),
                        Resolved { cycle: ci, steps: d, cost: d, peak_bits: suffix_peak[j] },
                    );
                }
                self.outcome(n.clone(), Some((ci, i as u64)))
            }
            Stop::Memo(r) => {
                let i = path.len();
                let mut result = None;
                for j in (0..i).rev() {
                    let d = (i - j) as u64;
                    let cost = d + r.cost;
                    let peak = suffix_peak[j].max(r.peak_bits);
                    if cost > max_steps || peak > max_bits {
                        // every earlier state needs at least as much
                        break;
                    }
                    let e = Resolved { cycle: r.cycle, steps: d + r.steps, cost, peak_bits: peak };
                    if j == 0 {
                        result = Some((e.cycle, e.steps));
                    }
                    self.memo.insert(path[j].clone(), e);
                }
                if i == 0 {
                    result = Some((r.cycle, r.steps));
                }
                self.outcome(n.clone(), result)
            }
            Stop::Closed(j) => {
                let i = path.len();
                let period = (i - j) as u64;
                // discovered cycles are reached through their memo entries
                // only; a fresh run would still have to close them
                let ci = self.cycles.len();
                self.cycles.push(Cycle::from_elements(path[j..].to_vec()));
                let cycle_peak = suffix_peak[j];
                for (t, s) in path.iter().enumerate() {
                    let e = if t >= j {
                        Resolved { cycle: ci, steps: 0, cost: period, peak_bits: cycle_peak }
                    } else {
                        Resolved {
                            cycle: ci,
                            steps: (j - t) as u64,
                            cost: (i - t) as u64,
                            peak_bits: suffix_peak[t],
                        }
                    };
                    self.memo.insert(s.clone(), e);
                }
                self.outcome(n.clone(), Some((ci, j as u64)))
            }
        }
    }

    fn discovered(&self) -> Vec<Cycle> {
        self.cycles[self.known_len..].to_vec()
    }
}

/// Classifies `n` against the `known` cycles.
pub fn classify(p: &MapParam, n: &BigInt, known: &CycleSet) -> Classification {
    let mut c = Classifier::new(p, known);
    let outcome = c.classify(n);
    let discovered = c.discovered().into_iter().next();
    Classification { outcome, discovered }
}

fn classify_chunk(p: &MapParam, chunk: &[BigInt], known: &CycleSet) -> (Vec<ClassifyOutcome>, Vec<Cycle>) {
    let mut c = Classifier::new(p, known);
    let outcomes = chunk.iter().map(|n| c.classify(n)).collect();
    (outcomes, c.discovered())
}

/// Classifies every integer of `range`, reusing resolved states across
/// starting points. Matches per-element [`classify`] exactly.
pub fn classify_range(p: &MapParam, range: RangeInclusive<i64>, known: &CycleSet) -> RangeClassification {
    let starts: Vec<BigInt> = range.map(BigInt::from).collect();
    classify_many(p, &starts, known)
}

pub fn classify_many(p: &MapParam, starts: &[BigInt], known: &CycleSet) -> RangeClassification {
    let parts = p
        .execution()
        .map_chunks(starts, CHUNK, |chunk| classify_chunk(p, chunk, known));
    let mut outcomes = Vec::with_capacity(starts.len());
    let mut found: BTreeMap<CycleId, Cycle> = BTreeMap::new();
    for (o, d) in parts {
        outcomes.extend(o);
        for c in d {
            found.entry(c.id()).or_insert(c);
        }
    }
    RangeClassification {
        outcomes,
        discovered: found.into_values().collect(),
    }
}

/// Every cycle reached from starting points with `|n| <= bound` (or
/// `1 <= n <= bound` for [`Domain::Positive`]).
pub fn find_cycles(p: &MapParam, bound: u64, domain: Domain) -> CycleSearch {
    let b = bound as i64;
    let range = match domain {
        Domain::Positive => 1..=b,
        Domain::AllIntegers => -b..=b,
    };
    let rc = classify_range(p, range, &CycleSet::new());
    let capped = rc
        .outcomes
        .iter()
        .filter(|o| o.result == Attraction::Unresolved)
        .map(|o| o.n.clone())
        .collect();
    CycleSearch {
        cycles: rc.discovered,
        capped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::map::iterate;
    use proptest::prelude::*;

    fn b(n: i64) -> BigInt {
        BigInt::from(n)
    }

    fn mp(k: i64) -> MapParam {
        MapParam::new(k).unwrap()
    }

    fn bigs(xs: &[i64]) -> Vec<BigInt> {
        xs.iter().map(|&x| b(x)).collect()
    }

    /// Independent oracle: iterate with i128 until a repeat; return the
    /// generator of the cycle reached.
    fn oracle_attractor(k: i128, n: i128) -> i128 {
        let mut seen = std::collections::HashSet::new();
        let mut x = n;
        let mut path = Vec::new();
        while seen.insert(x) {
            path.push(x);
            x = if x % 2 != 0 { (3 * x + k) / 2 } else { x / 2 };
        }
        let start = path.iter().position(|&s| s == x).unwrap();
        *path[start..]
            .iter()
            .min_by(|a, b| a.abs().cmp(&b.abs()).then(b.cmp(a)))
            .unwrap()
    }

    #[test]
    fn canonical_rotation() {
        let c = Cycle::from_elements(bigs(&[10, 5, 7]));
        assert_eq!(c.elements(), bigs(&[5, 7, 10]).as_slice());
        // tie on |x| prefers the positive element
        let c = Cycle::from_elements(bigs(&[-3, 4, 3]));
        assert_eq!(c.generator(), &b(3));
        assert_eq!(c.elements(), bigs(&[3, -3, 4]).as_slice());
    }

    #[test]
    fn three_cycles_for_minus_one() {
        let s = find_cycles(&mp(-1), 200, Domain::Positive);
        let gens: Vec<_> = s.cycles.iter().map(|c| c.generator().clone()).collect();
        let lens: Vec<_> = s.cycles.iter().map(|c| c.len()).collect();
        assert_eq!(gens, bigs(&[1, 5, 17]));
        assert_eq!(lens, vec![1, 3, 11]);
        assert!(s.capped.is_empty());
        assert_eq!(
            s.cycles[2].elements(),
            bigs(&[17, 25, 37, 55, 82, 41, 61, 91, 136, 68, 34]).as_slice()
        );
    }

    #[test]
    fn one_cycle_for_plus_one() {
        let s = find_cycles(&mp(1), 1000, Domain::Positive);
        assert_eq!(s.cycles.len(), 1);
        assert_eq!(s.cycles[0].elements(), bigs(&[1, 2]).as_slice());
    }

    #[test]
    fn cycles_for_five() {
        let s = find_cycles(&mp(5), 50, Domain::Positive);
        let has = |xs: &[i64]| s.cycles.iter().any(|c| c.elements() == bigs(xs).as_slice());
        assert!(has(&[1, 4, 2]));
        assert!(has(&[5, 10]));
        for c in &s.cycles {
            assert!(c.verify(&mp(5)));
        }
    }

    #[test]
    fn all_integers_domain_includes_negative_and_zero_cycles() {
        let s = find_cycles(&mp(1), 50, Domain::AllIntegers);
        let gens: Vec<_> = s.cycles.iter().map(|c| c.generator().clone()).collect();
        assert_eq!(gens, bigs(&[-17, -5, -1, 0, 1]));
    }

    #[test]
    fn classify_examples() {
        let known: CycleSet = find_cycles(&mp(1), 10, Domain::Positive).cycles.into_iter().collect();
        let c = classify(&mp(1), &b(27), &known);
        assert_eq!(c.outcome.cycle(), Some(&CycleId::from(1)));
        assert!(c.discovered.is_none());
        // 27 takes 70 steps of T to reach 2, the first cycle element it meets
        let t = iterate(&mp(1), &b(27));
        let first = t.states.iter().position(|s| *s == b(1) || *s == b(2)).unwrap() as u64;
        assert_eq!(
            c.outcome.result,
            Attraction::Attracted { cycle: CycleId::from(1), steps_to_entry: first }
        );

        let c = classify(&mp(-1), &b(3), &CycleSet::new());
        assert_eq!(c.outcome.cycle(), Some(&CycleId::from(1)));
        assert_eq!(c.discovered.unwrap().elements(), bigs(&[1]).as_slice());

        let c = classify(&mp(1), &b(1), &known);
        assert_eq!(
            c.outcome.result,
            Attraction::Attracted { cycle: CycleId::from(1), steps_to_entry: 0 }
        );
    }

    #[test]
    fn classify_range_examples() {
        let rc = classify_range(&mp(-1), 1..=10, &CycleSet::new());
        let labels: Vec<i128> = rc
            .outcomes
            .iter()
            .map(|o| o.cycle().unwrap().generator().try_into().unwrap())
            .collect();
        let oracle: Vec<i128> = (1..=10).map(|n| oracle_attractor(-1, n)).collect();
        assert_eq!(labels, oracle);
        assert_eq!(labels, vec![1, 1, 1, 1, 5, 1, 5, 1, 5, 5]);

        let rc = classify_range(&mp(1), 1..=100, &CycleSet::new());
        assert!(rc.outcomes.iter().all(|o| o.cycle() == Some(&CycleId::from(1))));

        let known: CycleSet = [Cycle::from_elements(bigs(&[1, 2]))].into_iter().collect();
        let rc = classify_range(&mp(1), 1..=1, &known);
        assert_eq!(
            rc.outcomes[0].result,
            Attraction::Attracted { cycle: CycleId::from(1), steps_to_entry: 0 }
        );
        assert!(rc.discovered.is_empty());
    }

    #[test]
    fn caps_match_between_memo_and_fresh_runs() {
        // tight caps make some starting points unresolved; memoized
        // classification must agree with fresh runs anyway
        for (k, steps, bits) in [(1, 20, 4096), (1, 200, 12), (-1, 15, 4096), (5, 9, 10)] {
            let p = MapParam::with_caps(k, steps, bits).unwrap();
            let rc = classify_range(&p, -300..=300, &CycleSet::new());
            for o in &rc.outcomes {
                let fresh = classify(&p, &o.n, &CycleSet::new()).outcome;
                assert_eq!(o, &fresh, "k={k} n={}", o.n);
            }
        }
    }

    #[test]
    fn unresolved_matches_iterate() {
        let p = MapParam::with_caps(1, 30, 4096).unwrap();
        for n in 1..200 {
            let t = iterate(&p, &b(n));
            let c = classify(&p, &b(n), &CycleSet::new()).outcome;
            assert_eq!(t.is_resolved(), c.cycle().is_some(), "n={n}");
        }
    }

    #[test]
    fn execution_strategies_agree() {
        let base = mp(-1);
        let runs: Vec<_> = Execution::available()
            .into_iter()
            .map(|e| classify_range(&base.clone().with_execution(e), -5000..=5000, &CycleSet::new()))
            .collect();
        for r in &runs {
            assert_eq!(r.outcomes, runs[0].outcomes);
            assert_eq!(r.discovered, runs[0].discovered);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rotation_idempotent(k in prop::sample::select(vec![1i64, -1, 5, 7, -11, 13]), n in -2000i64..2000, r in 0usize..20) {
            let p = mp(k);
            let c = iterate(&p, &b(n)).cycle().unwrap();
            let mut e = c.elements().to_vec();
            let len = e.len();
            e.rotate_left(r % len);
            prop_assert_eq!(Cycle::from_elements(e), c.clone());
            prop_assert!(c.verify(&p));
        }

        #[test]
        fn memo_transparent(k in prop::sample::select(vec![1i64, -1, 5, -5, 7, 11]), lo in -3000i64..3000, len in 1i64..200) {
            let p = mp(k);
            let rc = classify_range(&p, lo..=lo + len, &CycleSet::new());
            for o in &rc.outcomes {
                prop_assert_eq!(o, &classify(&p, &o.n, &CycleSet::new()).outcome);
                let g: i128 = o.cycle().unwrap().generator().try_into().unwrap();
                let n: i128 = (&o.n).try_into().unwrap();
                prop_assert_eq!(g, oracle_attractor(k as i128, n));
            }
        }

        #[test]
        fn search_monotone(k in prop::sample::select(vec![1i64, -1, 5, 7, -13]), b1 in 1u64..200, extra in 0u64..200) {
            let p = mp(k);
            let small = find_cycles(&p, b1, Domain::AllIntegers);
            let big = find_cycles(&p, b1 + extra, Domain::AllIntegers);
            for c in &small.cycles {
                prop_assert!(big.cycles.contains(c));
            }
        }
    }
}
