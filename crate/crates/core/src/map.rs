//! The 3x+k map `T_k`, its multivalued inverse and bounded forward iteration.
//!
//! `T_k(n) = (3n + k) / 2` for odd `n` and `n / 2` for even `n`, defined for
//! `k ≡ ±1 (mod 6)`. All arithmetic is on [`BigInt`]; trajectories are cut
//! off by explicit step and bit-size caps instead of overflowing.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use crate::cycles::{Cycle, CycleId};
use crate::error::{OrbitError, Result};
use crate::exec::Execution;

pub const DEFAULT_MAX_STEPS: u64 = 100_000;
pub const DEFAULT_MAX_BITS: u64 = 4096;

/// The parameter `k` together with the iteration caps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapParam {
    k: i64,
    k_big: BigInt,
    max_steps: u64,
    max_bits: u64,
    execution: Execution,
}

impl MapParam {
    pub fn new(k: i64) -> Result<Self> {
        Self::with_caps(k, DEFAULT_MAX_STEPS, DEFAULT_MAX_BITS)
    }

    pub fn with_caps(k: i64, max_steps: u64, max_bits: u64) -> Result<Self> {
        if !valid_k(k) {
            return Err(OrbitError::InvalidK(k));
        }
        if max_steps < 1 {
            return Err(OrbitError::InvalidCap("max_steps must be >= 1".into()));
        }
        if max_bits < 8 {
            return Err(OrbitError::InvalidCap("max_bits must be >= 8".into()));
        }
        Ok(MapParam {
            k,
            k_big: BigInt::from(k),
            max_steps,
            max_bits,
            execution: Execution::default(),
        })
    }

    /// Same map and caps, different batch execution strategy.
    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn k_big(&self) -> &BigInt {
        &self.k_big
    }

    /// `|k|`, the modulus of the residue-class structure.
    pub fn modulus(&self) -> u64 {
        self.k.unsigned_abs()
    }

    pub fn max_steps(&self) -> u64 {
        self.max_steps
    }

    pub fn max_bits(&self) -> u64 {
        self.max_bits
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    /// The conjugate map `T_{-k}`.
    pub fn negated(&self) -> MapParam {
        MapParam {
            k: -self.k,
            k_big: -&self.k_big,
            ..self.clone()
        }
    }

    pub fn apply(&self, n: &BigInt) -> BigInt {
        t_apply(self, n)
    }

    pub(crate) fn apply_i64(&self, n: i64) -> i64 {
        // callers keep |n| far below i64::MAX / 3
        if n & 1 != 0 {
            (3 * n + self.k) / 2
        } else {
            n / 2
        }
    }
}

pub fn valid_k(k: i64) -> bool {
    matches!(k.unsigned_abs() % 6, 1 | 5)
}

/// One application of `T_k`.
pub fn t_apply(p: &MapParam, n: &BigInt) -> BigInt {
    if n.is_odd() {
        (n * 3 + &p.k_big) / 2
    } else {
        n / 2
    }
}

/// Every `m` with `T_k(m) = n`: always `2n`, plus `(2n - k)/3` when that is
/// an odd integer.
pub fn inverse_step(p: &MapParam, n: &BigInt) -> Vec<BigInt> {
    let doubled: BigInt = n * 2;
    let (q, r) = (&doubled - &p.k_big).div_rem(&BigInt::from(3));
    if r.is_zero() && q.is_odd() {
        vec![doubled, q]
    } else {
        vec![doubled]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrajectoryOutcome {
    /// `states[entry_index]` is the first state of the cycle; the final
    /// recorded state repeats it.
    EnteredCycle { cycle: CycleId, entry_index: usize },
    CapExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub start: BigInt,
    pub states: Vec<BigInt>,
    pub outcome: TrajectoryOutcome,
}

impl Trajectory {
    pub fn is_resolved(&self) -> bool {
        matches!(self.outcome, TrajectoryOutcome::EnteredCycle { .. })
    }

    /// Number of steps before the cycle is entered.
    pub fn preperiod(&self) -> Option<usize> {
        match self.outcome {
            TrajectoryOutcome::EnteredCycle { entry_index, .. } => Some(entry_index),
            TrajectoryOutcome::CapExceeded => None,
        }
    }

    pub fn period(&self) -> Option<usize> {
        self.preperiod().map(|e| self.states.len() - 1 - e)
    }

    /// The distinct states of the forward orbit (the repeated last state is
    /// dropped for resolved trajectories).
    pub fn orbit(&self) -> &[BigInt] {
        if self.is_resolved() {
            &self.states[..self.states.len() - 1]
        } else {
            &self.states
        }
    }

    pub fn cycle(&self) -> Option<Cycle> {
        let e = self.preperiod()?;
        Some(Cycle::from_elements(
            self.states[e..self.states.len() - 1].to_vec(),
        ))
    }

    pub fn contains(&self, n: &BigInt) -> bool {
        self.orbit().contains(n)
    }
}

/// Iterates `T_k` from `n` until a state repeats or a cap is hit.
pub fn iterate(p: &MapParam, n: &BigInt) -> Trajectory {
    let mut states = vec![n.clone()];
    let mut seen: HashMap<BigInt, usize> = HashMap::new();
    seen.insert(n.clone(), 0);
    let outcome = if n.bits() > p.max_bits {
        TrajectoryOutcome::CapExceeded
    } else {
        loop {
            if (states.len() - 1) as u64 >= p.max_steps {
                break TrajectoryOutcome::CapExceeded;
            }
            let next = t_apply(p, states.last().unwrap());
            if next.bits() > p.max_bits {
                states.push(next);
                break TrajectoryOutcome::CapExceeded;
            }
            if let Some(&j) = seen.get(&next) {
                states.push(next);
                let cycle = Cycle::from_elements(states[j..states.len() - 1].to_vec());
                break TrajectoryOutcome::EnteredCycle {
                    cycle: cycle.id(),
                    entry_index: j,
                };
            }
            seen.insert(next.clone(), states.len());
            states.push(next);
        }
    };
    Trajectory {
        start: n.clone(),
        states,
        outcome,
    }
}

/// Checks `T_k(-n) = -T_{-k}(n)` over `range`.
pub fn conjugacy_negation_check(k: i64, range: RangeInclusive<i64>) -> Result<bool> {
    let p = MapParam::new(k)?;
    let q = p.negated();
    Ok(range.into_iter().all(|n| {
        let n = BigInt::from(n);
        t_apply(&p, &-&n) == -t_apply(&q, &n)
    }))
}
