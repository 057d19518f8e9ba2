//! Backward orbits `O^-(m) = { n : T_k^j(n) = m for some j >= 0 }`.
//!
//! A backward search from `m` that prunes nodes above a size cap cannot by
//! itself be exact below the cap: forward paths climb far above their start
//! (27 peaks at 9232 under `T_1`), so small members may hang below pruned
//! nodes. Exactness comes from two sources:
//!
//! - if every pruned node is a multiple of 3, its whole subtree is the
//!   doubling chain above the cap, so the search is already complete;
//! - otherwise a [`BackwardAtlas`] over the window follows every integer of
//!   the window forward until it re-enters the window or settles, and
//!   membership is read off the resulting forest.
//!
//! Disjointness of two backward orbits is decided from forward orbits only.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{OrbitError, Result};
use crate::map::{inverse_step, iterate, t_apply, MapParam, Trajectory};

pub const DEFAULT_NODE_CAP: u64 = 4_000_001;
const ATLAS_CHUNK: usize = 4096;
/// Window radius limit for the atlas (keeps `T` on window values inside i64).
pub const MAX_ATLAS_RADIUS: u64 = 1 << 40;

/// An explored portion of a backward orbit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitSample {
    pub root: BigInt,
    pub n_cap: u64,
    pub positive_members: BTreeSet<BigInt>,
    pub negative_members: BTreeSet<BigInt>,
    /// Children pruned by the backward search because they exceed the cap.
    pub frontier: Vec<BigInt>,
    /// Every member with absolute value below this is listed.
    pub frontier_exhausted_below: u64,
    pub depth_used: usize,
}

impl OrbitSample {
    /// Membership, when `|n|` is below the watermark.
    pub fn contains(&self, n: &BigInt) -> Option<bool> {
        if n.magnitude() >= &BigUint::from(self.frontier_exhausted_below) {
            if self.positive_members.contains(n) || self.negative_members.contains(n) {
                return Some(true);
            }
            return None;
        }
        Some(self.positive_members.contains(n) || self.negative_members.contains(n))
    }

    pub fn members(&self) -> impl Iterator<Item = &BigInt> {
        self.negative_members.iter().chain(self.positive_members.iter())
    }

    pub fn len(&self) -> usize {
        self.positive_members.len() + self.negative_members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_exact(&self) -> bool {
        self.frontier_exhausted_below > self.n_cap
    }

    fn insert(&mut self, x: BigInt) {
        if x.is_negative() {
            self.negative_members.insert(x);
        } else if x.is_positive() {
            self.positive_members.insert(x);
        }
    }
}

struct Bfs {
    members: Vec<BigInt>,
    frontier: Vec<BigInt>,
    depth: usize,
    truncated: bool,
}

fn backward_bfs(p: &MapParam, m: &BigInt, n_cap: u64, node_cap: u64) -> Bfs {
    let cap = BigUint::from(n_cap);
    let mut heap: BinaryHeap<Reverse<(BigUint, bool, BigInt, usize)>> = BinaryHeap::new();
    let mut seen: HashSet<BigInt> = HashSet::new();
    heap.push(Reverse((m.magnitude().clone(), m.is_negative(), m.clone(), 0)));
    seen.insert(m.clone());
    let mut out = Bfs { members: Vec::new(), frontier: Vec::new(), depth: 0, truncated: false };
    while let Some(Reverse((_, _, v, d))) = heap.pop() {
        if out.members.len() as u64 >= node_cap {
            out.truncated = true;
            break;
        }
        out.depth = out.depth.max(d);
        for c in inverse_step(p, &v) {
            if !seen.insert(c.clone()) {
                continue;
            }
            if c.magnitude() > &cap {
                out.frontier.push(c);
            } else {
                heap.push(Reverse((c.magnitude().clone(), c.is_negative(), c, d + 1)));
            }
        }
        out.members.push(v);
    }
    out
}

/// Enumerates `O^-(m)` within `|n| <= n_cap`.
///
/// `node_cap` bounds the backward search and the completion window; running
/// out lowers `frontier_exhausted_below` instead of failing.
pub fn enumerate_backward(p: &MapParam, m: &BigInt, n_cap: u64, node_cap: u64) -> Result<OrbitSample> {
    if m.magnitude() > &BigUint::from(n_cap) {
        return Err(OrbitError::pre(format!("n_cap {n_cap} is below |m| = {}", m.abs())));
    }
    if node_cap < 1 {
        return Err(OrbitError::pre("node_cap must be >= 1"));
    }
    let mut sample = OrbitSample {
        root: m.clone(),
        n_cap,
        positive_members: BTreeSet::new(),
        negative_members: BTreeSet::new(),
        frontier: Vec::new(),
        frontier_exhausted_below: n_cap.saturating_add(1),
        depth_used: 0,
    };
    if m.is_zero() {
        // the orbit of 0 is {0}, which has no signed members
        return Ok(sample);
    }

    let bfs = backward_bfs(p, m, n_cap, node_cap);
    let three = BigInt::from(3);
    let closed = !bfs.truncated && bfs.frontier.iter().all(|c| c.is_multiple_of(&three));
    sample.depth_used = bfs.depth;
    sample.frontier = bfs.frontier;
    for x in bfs.members {
        sample.insert(x);
    }
    if closed {
        return Ok(sample);
    }

    let radius = n_cap.min(node_cap.saturating_sub(1) / 2).min(MAX_ATLAS_RADIUS);
    let mi = m.to_i64().filter(|v| v.unsigned_abs() <= radius);
    match mi {
        Some(mi) => {
            let atlas = BackwardAtlas::build(p, radius)?;
            let s = atlas.sample(mi)?;
            for x in s.members {
                sample.insert(BigInt::from(x));
            }
            sample.frontier_exhausted_below = s.exhausted_below;
        }
        None => {
            // nothing beyond 0 is certified
            sample.frontier_exhausted_below = 1;
        }
    }
    Ok(sample)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Link {
    /// First state after at least one step that lies back in the window.
    Window(i64),
    /// The path settles into a cycle outside the window.
    Terminal,
    Unresolved,
}

#[derive(Clone, Debug)]
struct Excursion {
    link: Link,
    cost: u64,
    peak_bits: u64,
}

/// Forward structure of every integer in `[-radius, radius]`: the next state
/// back inside the window, and whether the chain from each integer settles
/// under the caps. Answers exact backward-orbit membership inside the window
/// for any root.
pub struct BackwardAtlas {
    k: i64,
    radius: i64,
    links: Vec<Link>,
    child_start: Vec<u32>,
    children: Vec<i64>,
    settled: Vec<bool>,
}

/// Members of one backward orbit inside the atlas window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtlasSample {
    pub root: i64,
    /// Sorted ascending.
    pub members: Vec<i64>,
    /// Membership is decided for every `|n|` below this.
    pub exhausted_below: u64,
}

impl AtlasSample {
    pub fn contains(&self, n: i64) -> bool {
        self.members.binary_search(&n).is_ok()
    }
}

impl BackwardAtlas {
    pub fn build(p: &MapParam, radius: u64) -> Result<Self> {
        if radius > MAX_ATLAS_RADIUS {
            return Err(OrbitError::Budget(format!("atlas radius {radius} exceeds {MAX_ATLAS_RADIUS}")));
        }
        let r = radius as i64;
        let xs: Vec<i64> = (-r..=r).collect();
        let links: Vec<Link> = p
            .execution()
            .map_chunks(&xs, ATLAS_CHUNK, |chunk| {
                let mut memo = HashMap::new();
                chunk.iter().map(|&x| window_link(p, r, x, &mut memo)).collect::<Vec<_>>()
            })
            .into_iter()
            .flatten()
            .collect();

        let width = links.len();
        let idx = |x: i64| (x + r) as usize;

        let mut counts = vec![0u32; width + 1];
        for l in &links {
            if let Link::Window(y) = l {
                counts[idx(*y) + 1] += 1;
            }
        }
        for i in 0..width {
            counts[i + 1] += counts[i];
        }
        let child_start = counts.clone();
        let mut fill = counts;
        let mut children = vec![0i64; child_start[width] as usize];
        for (i, l) in links.iter().enumerate() {
            if let Link::Window(y) = l {
                let slot = &mut fill[idx(*y)];
                children[*slot as usize] = i as i64 - r;
                *slot += 1;
            }
        }

        // 0 unknown, 1 on the current walk, 2 settled, 3 unsettled
        let mut state = vec![0u8; width];
        let mut walk = Vec::new();
        for start in 0..width {
            if state[start] != 0 {
                continue;
            }
            walk.clear();
            let mut i = start;
            let verdict = loop {
                match state[i] {
                    2 => break 2,
                    3 => break 3,
                    1 => break 2, // cycle inside the window
                    _ => {}
                }
                state[i] = 1;
                walk.push(i);
                match links[i] {
                    Link::Window(y) => i = idx(y),
                    Link::Terminal => break 2,
                    Link::Unresolved => break 3,
                }
            };
            for &w in &walk {
                state[w] = verdict;
            }
        }
        let settled = state.into_iter().map(|s| s == 2).collect();

        Ok(BackwardAtlas { k: p.k(), radius: r, links, child_start, children, settled })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn radius(&self) -> u64 {
        self.radius as u64
    }

    /// Exact members of `O^-(root)` inside the window.
    pub fn sample(&self, root: i64) -> Result<AtlasSample> {
        if root.abs() > self.radius {
            return Err(OrbitError::pre(format!("root {root} outside atlas radius {}", self.radius)));
        }
        let r = self.radius;
        let width = self.links.len();
        let mut member = vec![false; width];
        let mut queue = VecDeque::new();
        member[(root + r) as usize] = true;
        queue.push_back(root);
        while let Some(y) = queue.pop_front() {
            let i = (y + r) as usize;
            for &x in &self.children[self.child_start[i] as usize..self.child_start[i + 1] as usize] {
                let j = (x + r) as usize;
                if !member[j] {
                    member[j] = true;
                    queue.push_back(x);
                }
            }
        }
        let mut exhausted = (r as u64) + 1;
        for a in 0..=r {
            let undecided = |x: i64| {
                let i = (x + r) as usize;
                !member[i] && !self.settled[i]
            };
            if undecided(a) || undecided(-a) {
                exhausted = a as u64;
                break;
            }
        }
        let members = (0..width).filter(|&i| member[i]).map(|i| i as i64 - r).filter(|&x| x != 0).collect();
        Ok(AtlasSample { root, members, exhausted_below: exhausted })
    }

    /// Integers of the window whose forward chain was cut off by a cap.
    pub fn unsettled(&self) -> impl Iterator<Item = i64> + '_ {
        self.settled
            .iter()
            .enumerate()
            .filter(|(_, s)| !**s)
            .map(move |(i, _)| i as i64 - self.radius)
    }
}

fn window_link(p: &MapParam, r: i64, x: i64, memo: &mut HashMap<BigInt, Excursion>) -> Link {
    let y = p.apply_i64(x);
    if y.abs() <= r {
        return Link::Window(y);
    }
    let max_steps = p.max_steps();
    let max_bits = p.max_bits();
    if max_steps < 2 {
        return Link::Unresolved;
    }
    let mut path: Vec<BigInt> = Vec::new();
    let mut bits: Vec<u64> = Vec::new();
    let mut pos: HashMap<BigInt, usize> = HashMap::new();
    let mut s = BigInt::from(y);
    let rb = BigInt::from(r);

    enum Stop {
        Window(i64),
        Memo(Excursion),
        Closed(usize),
    }
    let stop = loop {
        let sb = s.bits();
        if sb > max_bits {
            return Link::Unresolved;
        }
        if s.abs() <= rb {
            break Stop::Window(s.to_i64().unwrap());
        }
        if let Some(e) = memo.get(&s) {
            break Stop::Memo(e.clone());
        }
        if let Some(&j) = pos.get(&s) {
            break Stop::Closed(j);
        }
        // one application from x plus the excursion so far
        if 1 + path.len() as u64 == max_steps {
            return Link::Unresolved;
        }
        let next = t_apply(p, &s);
        pos.insert(s.clone(), path.len());
        path.push(s);
        bits.push(sb);
        s = next;
    };

    let i = path.len();
    let mut suffix = bits;
    for j in (0..i.saturating_sub(1)).rev() {
        suffix[j] = suffix[j].max(suffix[j + 1]);
    }
    let (link, tail_cost, tail_peak, cycle_from) = match stop {
        Stop::Window(w) => (Link::Window(w), 0, 64 - w.unsigned_abs().leading_zeros() as u64, None),
        Stop::Memo(e) => (e.link, e.cost, e.peak_bits, None),
        Stop::Closed(j) => (Link::Terminal, 0, 0, Some(j)),
    };
    let cost_at = |t: usize| match cycle_from {
        Some(j) if t >= j => (i - j) as u64,
        _ => (i - t) as u64 + tail_cost,
    };
    let peak_at = |t: usize| match cycle_from {
        Some(j) if t >= j => suffix[j],
        _ => suffix.get(t).copied().unwrap_or(0).max(tail_peak),
    };
    for (t, state) in path.iter().enumerate() {
        let cost = cost_at(t);
        if cost <= max_steps {
            memo.insert(state.clone(), Excursion { link, cost, peak_bits: peak_at(t) });
        }
    }
    let x_bits = 64 - x.unsigned_abs().leading_zeros() as u64;
    if cost_at(0) < max_steps && peak_at(0).max(x_bits) <= max_bits {
        link
    } else {
        Link::Unresolved
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Disjoint,
    /// `m1` lies in `O^-(m2)`, so `O^-(m1) ⊂ O^-(m2)`.
    NestedFirstInSecond,
    /// `m2` lies in `O^-(m1)`.
    NestedSecondInFirst,
    /// Both roots lie on the same cycle; the backward orbits coincide.
    Identical,
    Unresolved,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Disjoint => "disjoint",
            Relation::NestedFirstInSecond => "nested_first_in_second",
            Relation::NestedSecondInFirst => "nested_second_in_first",
            Relation::Identical => "identical",
            Relation::Unresolved => "unresolved",
        }
    }
}

/// Forward paths that decided a [`DisjointnessVerdict`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub first: Trajectory,
    pub second: Trajectory,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn one(f: &mut fmt::Formatter<'_>, t: &Trajectory) -> fmt::Result {
            write!(f, "O+({}) =", t.start)?;
            for s in t.orbit() {
                write!(f, " {s}")?;
            }
            match t.cycle() {
                Some(c) => write!(f, " (cycle {})", c.id()),
                None => write!(f, " (capped)"),
            }
        }
        one(f, &self.first)?;
        write!(f, "; ")?;
        one(f, &self.second)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjointnessVerdict {
    pub m1: BigInt,
    pub m2: BigInt,
    pub relation: Relation,
    pub witness: Witness,
}

/// Decides the relation between two backward orbits from already computed
/// forward trajectories of their roots.
pub fn relation_from_trajectories(first: &Trajectory, second: &Trajectory) -> Relation {
    if !first.is_resolved() || !second.is_resolved() {
        return Relation::Unresolved;
    }
    let a_in_b = second.contains(&first.start);
    let b_in_a = first.contains(&second.start);
    match (b_in_a, a_in_b) {
        (true, true) => Relation::Identical,
        (true, false) => Relation::NestedFirstInSecond,
        (false, true) => Relation::NestedSecondInFirst,
        (false, false) => Relation::Disjoint,
    }
}

pub fn trichotomy(p: &MapParam, m1: &BigInt, m2: &BigInt) -> Result<DisjointnessVerdict> {
    if m1 == m2 {
        return Err(OrbitError::pre("trichotomy needs distinct roots"));
    }
    let first = iterate(p, m1);
    let second = iterate(p, m2);
    let relation = relation_from_trajectories(&first, &second);
    Ok(DisjointnessVerdict {
        m1: m1.clone(),
        m2: m2.clone(),
        relation,
        witness: Witness { first, second },
    })
}

/// True iff the enumerated backward orbit of `m ≡ 0 (mod 3)` is exactly the
/// doubling chain `{ m·2^j <= n_cap }`.
pub fn fabry_case_check(p: &MapParam, m: &BigInt, n_cap: u64) -> Result<bool> {
    if !m.is_positive() || !m.is_multiple_of(&BigInt::from(3)) {
        return Err(OrbitError::pre(format!("m = {m} must be a positive multiple of 3")));
    }
    let s = enumerate_backward(p, m, n_cap, DEFAULT_NODE_CAP)?;
    let cap = BigInt::from(n_cap);
    let mut chain = BTreeSet::new();
    let mut x = m.clone();
    while x <= cap {
        chain.insert(x.clone());
        x *= 2;
    }
    Ok(s.is_exact() && s.negative_members.is_empty() && s.positive_members == chain)
}

/// One refinement step of a collection of pairwise disjoint backward orbits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Refinement {
    pub roots: Vec<BigInt>,
    /// Elements no longer covered by any root's orbit: the split root, or its
    /// whole cycle when the root is periodic.
    pub removed: Vec<BigInt>,
}

/// Replaces `roots[index]` using `O^-(m) = {m} ∪ ⋃_{T(m') = m} O^-(m')`.
///
/// For a periodic root the cycle itself is removed and replaced by the roots
/// of the trees that enter it.
pub fn partition_refine(p: &MapParam, roots: &[BigInt], index: usize) -> Result<Refinement> {
    if index >= roots.len() {
        return Err(OrbitError::pre(format!("index {index} out of range for {} roots", roots.len())));
    }
    let trajectories: Vec<Trajectory> = roots.iter().map(|m| iterate(p, m)).collect();
    for (i, t) in trajectories.iter().enumerate() {
        if !t.is_resolved() {
            return Err(OrbitError::pre(format!("forward orbit of {} is unresolved", t.start)));
        }
        for u in &trajectories[i + 1..] {
            if t.start == u.start || relation_from_trajectories(t, u) != Relation::Disjoint {
                return Err(OrbitError::pre(format!(
                    "backward orbits of {} and {} are not disjoint",
                    t.start, u.start
                )));
            }
        }
    }
    let m = &roots[index];
    let t = &trajectories[index];
    let (replacement, removed) = if t.preperiod() == Some(0) {
        let cycle = t.orbit().to_vec();
        let on_cycle: HashSet<&BigInt> = cycle.iter().collect();
        let mut entering = Vec::new();
        for c in &cycle {
            for x in inverse_step(p, c) {
                if !on_cycle.contains(&x) {
                    entering.push(x);
                }
            }
        }
        (entering, cycle)
    } else {
        (inverse_step(p, m), vec![m.clone()])
    };
    let mut out: Vec<BigInt> = roots[..index].to_vec();
    out.extend(replacement);
    out.extend_from_slice(&roots[index + 1..]);
    Ok(Refinement { roots: out, removed })
}
