//! Finite-window verdicts and sound certificates.
//!
//! Nothing here claims more than it checked. Window verdicts speak about the
//! window only; a [`Certificate`] is a pair of forward orbits that avoid each
//! other's roots, which is a complete proof of disjointness.

use std::collections::{BTreeSet, HashSet, VecDeque};

use num_bigint::BigInt;
use num_traits::Signed;
use serde::Serialize;

use crate::cycles::{classify_many, CycleId, CycleSet};
use crate::error::{OrbitError, Result};
use crate::inverse::{trichotomy, DisjointnessVerdict, OrbitSample, Relation};
use crate::map::{inverse_step, iterate, t_apply, MapParam};
use crate::residue::{closure_check, component_partition, reduce, ResidueSet};

/// Indicator of a set `S ∩ N+` on `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipWindow {
    pub k: i64,
    pub lo: u64,
    pub hi: u64,
    pub bits: Vec<bool>,
    /// Entries for `n < exact_below` are exact.
    pub exact_below: u64,
}

impl MembershipWindow {
    pub fn new(k: i64, lo: u64, hi: u64, bits: Vec<bool>, exact_below: u64) -> Result<Self> {
        if lo < 1 || hi < lo {
            return Err(OrbitError::pre(format!("window [{lo}, {hi}] must satisfy 1 <= lo <= hi")));
        }
        if bits.len() as u64 != hi - lo + 1 {
            return Err(OrbitError::pre(format!("{} bits for window [{lo}, {hi}]", bits.len())));
        }
        Ok(MembershipWindow { k, lo, hi, bits, exact_below })
    }

    /// Exact window from a predicate on every `n` in range.
    pub fn from_fn(k: i64, lo: u64, hi: u64, f: impl Fn(u64) -> bool) -> Result<Self> {
        Self::new(k, lo, hi, (lo..=hi).map(f).collect(), hi.saturating_add(1))
    }

    /// Coefficient window of a backward orbit's generating function.
    pub fn from_sample(k: i64, s: &OrbitSample, lo: u64, hi: u64) -> Result<Self> {
        let bits = (lo..=hi).map(|n| s.positive_members.contains(&BigInt::from(n))).collect();
        Self::new(k, lo, hi, bits, s.frontier_exhausted_below)
    }

    pub fn bit(&self, n: u64) -> bool {
        self.bits[(n - self.lo) as usize]
    }

    pub fn is_exact(&self) -> bool {
        self.exact_below > self.hi
    }

    /// Last index with an exact entry.
    fn exact_end(&self) -> Option<u64> {
        let end = self.hi.min(self.exact_below.saturating_sub(1));
        (end >= self.lo).then_some(end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RationalityConfig {
    /// The tail must cover at least this many periods of `|k|`.
    pub min_tail_periods: u64,
    /// The tail must cover at least this fraction of the exact window.
    pub min_tail_fraction: f64,
}

impl Default for RationalityConfig {
    fn default() -> Self {
        RationalityConfig { min_tail_periods: 10, min_tail_fraction: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RationalityStatus {
    ConsistentWithRational { x: ResidueSet, k0: u64 },
    /// Two entries of one residue class that differ after every admissible
    /// `k0`: the later one lies too close to the end of the window.
    InconsistentWithinWindow { witness: (u64, u64) },
    Inconclusive,
}

impl RationalityStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RationalityStatus::ConsistentWithRational { .. } => "ConsistentWithRational",
            RationalityStatus::InconsistentWithinWindow { .. } => "InconsistentWithinWindow",
            RationalityStatus::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalityVerdict {
    pub status: RationalityStatus,
    /// Closure of the candidate set of classes that end in ones.
    pub closure_ok: bool,
}

/// Eventual periodicity of a 0/1 sequence by residue class.
struct ClassTails {
    /// Final value per class, `None` for classes with no entry.
    last: Vec<Option<bool>>,
    /// Largest index whose entry differs from its class's final value.
    last_flip: Option<u64>,
}

fn class_tails(lo: u64, end: u64, d: u64, bit: impl Fn(u64) -> bool) -> ClassTails {
    let mut last = vec![None; d as usize];
    let mut last_flip = None;
    // walk backwards: the first mismatch met per class is its last flip
    for n in (lo..=end).rev() {
        let a = (n % d) as usize;
        let v = bit(n);
        match last[a] {
            None => last[a] = Some(v),
            Some(f) if f != v => {
                last_flip = Some(last_flip.map_or(n, |l: u64| l.max(n)));
            }
            _ => {}
        }
    }
    ClassTails { last, last_flip }
}

pub fn rationality_check(w: &MembershipWindow, cfg: &RationalityConfig) -> RationalityVerdict {
    let q = w.k.unsigned_abs().max(1);
    let Some(end) = w.exact_end() else {
        return RationalityVerdict { status: RationalityStatus::Inconclusive, closure_ok: false };
    };
    let tails = class_tails(w.lo, end, q, |n| w.bit(n));
    // classes absent from a short window fall back to their tail-less default
    let x = ResidueSet::new(q, (0..q).filter(|&a| tails.last[a as usize] == Some(true)))
        .expect("residues below modulus");
    let closure_ok = closure_check(&x);
    let k0 = tails.last_flip.map_or(w.lo, |f| f + 1);
    let tail = end + 1 - k0;
    let exact_len = end + 1 - w.lo;
    let long_enough = tail >= cfg.min_tail_periods.saturating_mul(q)
        && tail as f64 >= cfg.min_tail_fraction * exact_len as f64;
    let status = if long_enough {
        RationalityStatus::ConsistentWithRational { x, k0 }
    } else if w.is_exact() {
        let f = tails.last_flip.unwrap_or(end);
        RationalityStatus::InconsistentWithinWindow { witness: (f, f + q) }
    } else {
        RationalityStatus::Inconclusive
    };
    RationalityVerdict { status, closure_ok }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmlMatch {
    pub d: u64,
    /// Residues `a` in `[0, d)` whose positive progression is all zeros.
    pub progressions: Vec<u64>,
    /// Beyond this index the zero set is exactly the progressions.
    pub n0: u64,
    /// Symmetric difference of the zero set and the progressions below `n0`.
    pub exceptions: BTreeSet<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmlResult {
    Match(SmlMatch),
    NoMatch,
}

/// Finds the least modulus `d <= d_max` for which the zero set in `[1, n]` is
/// eventually a union of residue classes mod `d`.
///
/// A fit is accepted when the periodic tail covers at least half of the
/// window and at least two periods.
pub fn sml_pattern(zeros: &BTreeSet<u64>, n: u64, d_max: u64) -> Result<SmlResult> {
    if d_max < 1 {
        return Err(OrbitError::pre("d_max must be >= 1"));
    }
    if n < d_max.saturating_mul(4) {
        return Err(OrbitError::pre(format!("window end {n} is below 4·d_max = {}", 4 * d_max)));
    }
    if let Some(&z) = zeros.iter().find(|&&z| z < 1 || z > n) {
        return Err(OrbitError::pre(format!("zero index {z} outside [1, {n}]")));
    }
    for d in 1..=d_max {
        let t = class_tails(1, n, d, |i| zeros.contains(&i));
        let n0 = t.last_flip.map_or(1, |f| f + 1);
        let tail = n + 1 - n0;
        if tail * 2 < n || tail < 2 * d {
            continue;
        }
        let progressions: Vec<u64> = (0..d).filter(|&a| t.last[a as usize] == Some(true)).collect();
        let exceptions = (1..n0)
            .filter(|i| zeros.contains(i) != progressions.contains(&(i % d)))
            .collect();
        return Ok(SmlResult::Match(SmlMatch { d, progressions, n0, exceptions }));
    }
    Ok(SmlResult::NoMatch)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub m: BigInt,
    pub partner: BigInt,
    pub witness: DisjointnessVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertificateResult {
    Certified(Certificate),
    NoCertificateFound,
}

impl CertificateResult {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            CertificateResult::Certified(c) => Some(c),
            CertificateResult::NoCertificateFound => None,
        }
    }
}

/// Searches the least positive `m' <= bound` in the residue component of `m`
/// whose backward orbit is disjoint from that of `m`.
pub fn natural_boundary_certificate(p: &MapParam, m: &BigInt, bound: u64) -> Result<CertificateResult> {
    if !m.is_positive() {
        return Err(OrbitError::pre(format!("m = {m} must be positive")));
    }
    let part = component_partition(p.k())?;
    let comp = part.index_of(m);
    let first = iterate(p, m);
    if !first.is_resolved() {
        return Ok(CertificateResult::NoCertificateFound);
    }
    for c in 1..=bound {
        let c = BigInt::from(c);
        if &c == m || part.index_of(&c) != comp || first.contains(&c) {
            continue;
        }
        let second = iterate(p, &c);
        if !second.is_resolved() || second.contains(m) {
            continue;
        }
        let witness = trichotomy(p, m, &c)?;
        debug_assert_eq!(witness.relation, Relation::Disjoint);
        return Ok(CertificateResult::Certified(Certificate { m: m.clone(), partner: c, witness }));
    }
    Ok(CertificateResult::NoCertificateFound)
}

/// Forward orbit as a set, computed without the trajectory machinery.
fn plain_orbit(p: &MapParam, n: &BigInt) -> Option<HashSet<BigInt>> {
    let mut seen = HashSet::new();
    let mut x = n.clone();
    for _ in 0..=p.max_steps() {
        if !seen.insert(x.clone()) {
            return Some(seen);
        }
        x = t_apply(p, &x);
    }
    None
}

/// Re-derives a certificate's disjointness from scratch.
pub fn verify_certificate(p: &MapParam, c: &Certificate) -> bool {
    let (Some(a), Some(b)) = (plain_orbit(p, &c.m), plain_orbit(p, &c.partner)) else {
        return false;
    };
    let same_component = component_partition(p.k())
        .map(|part| part.index_of(&c.m) == part.index_of(&c.partner))
        .unwrap_or(false);
    same_component && c.partner.is_positive() && !a.contains(&c.partner) && !b.contains(&c.m)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExceptionalConfig {
    /// Positive starting points scanned for attractors.
    pub cycle_bound: u64,
    /// Largest spine node or attractor representative considered.
    pub partner_search_bound: u64,
    /// Depth of the backward search for a positive subtree element.
    pub subtree_depth: usize,
    pub subtree_nodes: usize,
}

impl ExceptionalConfig {
    pub fn new(cycle_bound: u64, partner_search_bound: u64) -> Self {
        ExceptionalConfig { cycle_bound, partner_search_bound, subtree_depth: 32, subtree_nodes: 4096 }
    }
}

impl Default for ExceptionalConfig {
    fn default() -> Self {
        Self::new(1000, 1000)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ComponentVerdict {
    Certified {
        exceptional: BTreeSet<BigInt>,
        /// Disjoint pairs inside the component.
        certificate_pairs: Vec<(BigInt, BigInt)>,
        /// First node on the inverse tree with two positive subtrees, when
        /// the component has a single attractor.
        branch: Option<BigInt>,
        children: Vec<BigInt>,
    },
    Unresolved {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentReport {
    pub component: ResidueSet,
    pub attractors: Vec<CycleId>,
    pub verdict: ComponentVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExceptionalSetReport {
    pub k: i64,
    pub per_component: Vec<ComponentReport>,
    /// Union of the exceptional sets, present when every component is
    /// certified.
    pub e_k: Option<BTreeSet<BigInt>>,
}

/// Whether some positive integer lies in `O^-(root)` within the search limits.
fn has_positive_subtree(p: &MapParam, root: &BigInt, cfg: &ExceptionalConfig) -> bool {
    let mut queue = VecDeque::from([(root.clone(), 0usize)]);
    let mut seen = HashSet::from([root.clone()]);
    while let Some((v, d)) = queue.pop_front() {
        if v.is_positive() {
            return true;
        }
        if d >= cfg.subtree_depth || seen.len() > cfg.subtree_nodes {
            continue;
        }
        for c in inverse_step(p, &v) {
            if seen.insert(c.clone()) {
                queue.push_back((c, d + 1));
            }
        }
    }
    false
}

fn unresolved(component: ResidueSet, attractors: Vec<CycleId>, reason: impl Into<String>) -> ComponentReport {
    ComponentReport { component, attractors, verdict: ComponentVerdict::Unresolved { reason: reason.into() } }
}

fn component_report(p: &MapParam, component: ResidueSet, cfg: &ExceptionalConfig) -> ComponentReport {
    let starts: Vec<BigInt> = (1..=cfg.cycle_bound)
        .filter(|&n| component.contains(n % component.modulus()))
        .map(BigInt::from)
        .collect();
    let rc = classify_many(p, &starts, &CycleSet::new());
    let cycles: CycleSet = rc.discovered.into_iter().collect();
    if let Some(o) = rc.outcomes.iter().find(|o| o.cycle().is_none()) {
        return unresolved(component, Vec::new(), format!("forward orbit of {} hit a cap", o.n));
    }
    // least representative per attractor, in order of first appearance
    let mut reps: Vec<(CycleId, BigInt)> = Vec::new();
    for o in &rc.outcomes {
        let id = o.cycle().expect("resolved");
        if !reps.iter().any(|(r, _)| r == id) {
            reps.push((id.clone(), o.n.clone()));
        }
    }
    reps.sort_by(|a, b| a.0.cmp(&b.0));
    let attractors: Vec<CycleId> = reps.iter().map(|(id, _)| id.clone()).collect();
    let bound = BigInt::from(cfg.partner_search_bound);

    match reps.len() {
        0 => unresolved(component, attractors, "no positive starting point in range"),
        1 => {
            let cycle = cycles.get(&reps[0].0).expect("discovered cycle").clone();
            let mut exceptional: BTreeSet<BigInt> =
                cycle.elements().iter().filter(|x| x.is_positive()).cloned().collect();
            let mut level: Vec<BigInt> = cycle
                .elements()
                .iter()
                .flat_map(|c| inverse_step(p, c))
                .filter(|x| !cycle.contains(x))
                .collect();
            let mut branch = None;
            let mut steps = 0u64;
            loop {
                if let Some(x) = level.iter().find(|x| x.abs() > bound) {
                    return unresolved(
                        component,
                        attractors,
                        format!("{x} exceeds the partner search bound {}", cfg.partner_search_bound),
                    );
                }
                let positive: Vec<BigInt> =
                    level.iter().filter(|x| has_positive_subtree(p, x, cfg)).cloned().collect();
                if positive.len() >= 2 {
                    let children = positive;
                    let pairs = vec![(children[0].clone(), children[1].clone())];
                    return ComponentReport {
                        component,
                        attractors,
                        verdict: ComponentVerdict::Certified {
                            exceptional,
                            certificate_pairs: pairs,
                            branch,
                            children,
                        },
                    };
                }
                let Some(next) = positive.into_iter().next() else {
                    return unresolved(component, attractors, "inverse tree has no positive subtree");
                };
                steps += 1;
                if steps > cfg.partner_search_bound {
                    return unresolved(component, attractors, "spine longer than the search bound");
                }
                if next.is_positive() {
                    exceptional.insert(next.clone());
                }
                level = inverse_step(p, &next);
                branch = Some(next);
            }
        }
        _ => {
            if let Some((_, r)) = reps.iter().find(|(_, r)| r > &bound) {
                return unresolved(component, attractors, format!("representative {r} exceeds the search bound"));
            }
            let pairs = reps.windows(2).map(|w| (w[0].1.clone(), w[1].1.clone())).collect();
            ComponentReport {
                component,
                attractors,
                verdict: ComponentVerdict::Certified {
                    exceptional: BTreeSet::new(),
                    certificate_pairs: pairs,
                    branch: None,
                    children: Vec::new(),
                },
            }
        }
    }
}

/// Semi-algorithm for the positive integers whose backward-orbit generating
/// function may fail to have a natural boundary.
pub fn exceptional_set(p: &MapParam, cfg: &ExceptionalConfig) -> Result<ExceptionalSetReport> {
    if cfg.cycle_bound < 1 || cfg.partner_search_bound < 1 {
        return Err(OrbitError::pre("bounds must be >= 1"));
    }
    let part = component_partition(p.k())?;
    let per_component: Vec<ComponentReport> = p
        .execution()
        .map(&part.components, |c| component_report(p, c.clone(), cfg));
    let e_k = per_component
        .iter()
        .map(|r| match &r.verdict {
            ComponentVerdict::Certified { exceptional, .. } => Some(exceptional.clone()),
            ComponentVerdict::Unresolved { .. } => None,
        })
        .collect::<Option<Vec<_>>>()
        .map(|sets| sets.into_iter().flatten().collect());
    Ok(ExceptionalSetReport { k: p.k(), per_component, e_k })
}

/// The residue-class membership predicate `n mod |k| ∈ X`.
pub fn residue_indicator(x: &ResidueSet) -> impl Fn(u64) -> bool + '_ {
    move |n| x.contains(reduce(&BigInt::from(n), x.modulus()))
}
