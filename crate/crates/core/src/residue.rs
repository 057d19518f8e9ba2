//! Residue classes mod `|k|` under `r ↦ 2r` and `r ↦ 3r`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OrbitError, Result};
use crate::map::{inverse_step, t_apply, valid_k, MapParam};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueSet {
    modulus: u64,
    members: BTreeSet<u64>,
}

impl ResidueSet {
    pub fn new(modulus: u64, members: impl IntoIterator<Item = u64>) -> Result<Self> {
        if modulus == 0 {
            return Err(OrbitError::pre("modulus must be positive"));
        }
        let members: BTreeSet<u64> = members.into_iter().collect();
        if let Some(&a) = members.iter().find(|&&a| a >= modulus) {
            return Err(OrbitError::pre(format!("residue {a} is not below modulus {modulus}")));
        }
        Ok(ResidueSet { modulus, members })
    }

    /// Every residue mod `modulus`.
    pub fn full(modulus: u64) -> Result<Self> {
        Self::new(modulus, 0..modulus)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn members(&self) -> &BTreeSet<u64> {
        &self.members
    }

    pub fn contains(&self, a: u64) -> bool {
        self.members.contains(&a)
    }

    /// Whether the class of `n` belongs to the set.
    pub fn contains_class(&self, n: &BigInt) -> bool {
        self.contains(reduce(n, self.modulus))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn least(&self) -> Option<u64> {
        self.members.first().copied()
    }
}

impl fmt::Display for ResidueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}} mod {}", self.modulus)
    }
}

/// `n mod modulus` in `[0, modulus)`.
pub fn reduce(n: &BigInt, modulus: u64) -> u64 {
    let r = n % BigInt::from(modulus);
    let r = if r < BigInt::zero() { r + modulus } else { r };
    r.to_u64().expect("residue fits in u64")
}

fn modulus_of(k: i64) -> Result<u64> {
    if !valid_k(k) {
        return Err(OrbitError::InvalidK(k));
    }
    Ok(k.unsigned_abs())
}

/// The orbit of `a` under ×2 and ×3 mod `|k|`: the minimal closed set
/// containing it.
pub fn residue_component(k: i64, a: u64) -> Result<ResidueSet> {
    let q = modulus_of(k)?;
    if a >= q {
        return Err(OrbitError::pre(format!("residue {a} is not below |k| = {q}")));
    }
    let mut members = BTreeSet::from([a]);
    let mut work = vec![a];
    while let Some(r) = work.pop() {
        for s in [mul_mod(r, 2, q), mul_mod(r, 3, q)] {
            if members.insert(s) {
                work.push(s);
            }
        }
    }
    Ok(ResidueSet { modulus: q, members })
}

fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentPartition {
    pub modulus: u64,
    /// Ordered by least element.
    pub components: Vec<ResidueSet>,
}

impl ComponentPartition {
    /// Index of the component holding the class of `n`.
    pub fn index_of(&self, n: &BigInt) -> usize {
        let a = reduce(n, self.modulus);
        self.components
            .iter()
            .position(|c| c.contains(a))
            .expect("components cover every residue")
    }

    pub fn component_of(&self, n: &BigInt) -> &ResidueSet {
        &self.components[self.index_of(n)]
    }
}

pub fn component_partition(k: i64) -> Result<ComponentPartition> {
    let q = modulus_of(k)?;
    let mut seen = vec![false; q as usize];
    let mut components = Vec::new();
    for a in 0..q {
        if seen[a as usize] {
            continue;
        }
        let c = residue_component(k, a)?;
        for &r in c.members() {
            seen[r as usize] = true;
        }
        components.push(c);
    }
    Ok(ComponentPartition { modulus: q, components })
}

/// True iff `2a` and `3a` stay in the set for every member `a`.
pub fn closure_check(x: &ResidueSet) -> bool {
    let q = x.modulus;
    x.members.iter().all(|&a| x.contains(mul_mod(a, 2, q)) && x.contains(mul_mod(a, 3, q)))
}

/// Both commutator identities at `r` for `S1(r) = 2r`, `S3(r) = 3r + k`.
pub fn commutator_identities(k: i64, r: &BigRational) -> bool {
    let kq = BigRational::from_integer(BigInt::from(k));
    let two = BigRational::from_integer(BigInt::from(2));
    let three = BigRational::from_integer(BigInt::from(3));
    let s1 = |x: &BigRational| x * &two;
    let s1_inv = |x: &BigRational| x / &two;
    let s3 = |x: &BigRational| x * &three + &kq;
    let s3_inv = |x: &BigRational| (x - &kq) / &three;
    let a = s1(&s3(&s1_inv(&s3_inv(r))));
    let b = s3(&s1(&s3_inv(&s1_inv(r))));
    a == r + &kq && b == r - &kq
}

/// A rational with numerator in `[-10^6, 10^6]` and denominator in `[1, 10^6]`.
pub fn random_rational<R: Rng>(rng: &mut R) -> BigRational {
    let num: i64 = rng.random_range(-1_000_000..=1_000_000);
    let den: i64 = rng.random_range(1..=1_000_000);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Checks the identities at `r` and at `depth` seeded random rationals.
pub fn commutator_check(k: i64, r: &BigRational, depth: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    commutator_identities(k, r) && (0..depth).all(|_| commutator_identities(k, &random_rational(&mut rng)))
}

/// Verifies `d'·T_{k'}(n) = T_k(d'·n)` with `k = d'·k'` for every `n` in range.
pub fn divisor_conjugacy_check(k: i64, multiplier: i64, range: RangeInclusive<i64>) -> Result<bool> {
    if !valid_k(k) {
        return Err(OrbitError::InvalidK(k));
    }
    if multiplier < 1 || multiplier >= k.abs() || k % multiplier != 0 {
        return Err(OrbitError::pre(format!("{multiplier} is not a proper positive divisor of {k}")));
    }
    let inner = MapParam::new(k / multiplier)?;
    let outer = MapParam::new(k)?;
    let d = BigInt::from(multiplier);
    Ok(range.into_iter().all(|n| {
        let n = BigInt::from(n);
        &d * t_apply(&inner, &n) == t_apply(&outer, &(&d * &n))
    }))
}

/// Forward and backward invariance of the components: `n`, `T_k(n)` and
/// every preimage of `n` share a component, for all `n` in range.
pub fn bi_invariance_check(p: &MapParam, range: RangeInclusive<i64>) -> Result<bool> {
    let part = component_partition(p.k())?;
    let ns: Vec<i64> = range.collect();
    let ok = p.execution().map_chunks(&ns, 4096, |chunk| {
        chunk.iter().all(|&n| {
            let n = BigInt::from(n);
            let c = part.index_of(&n);
            part.index_of(&t_apply(p, &n)) == c && inverse_step(p, &n).iter().all(|m| part.index_of(m) == c)
        })
    });
    Ok(ok.into_iter().all(|b| b))
}
