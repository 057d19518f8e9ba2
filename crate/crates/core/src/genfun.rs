//! Exact rational generating functions.
//!
//! - iterate series `Σ_{n>=1} T^m(n) z^n`, from the affine law
//!   `T^m(a + j·2^m) = 3^{e(a)}·j + T^m(a)` on residues `a mod 2^m`;
//! - forward-orbit series `Σ_j T^j(n) w^j` of an eventually periodic orbit;
//! - 0/1 coefficient windows of backward-orbit series.
//!
//! Every constructed series is checked against direct iteration before it is
//! returned.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Pow, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{OrbitError, Result};
use crate::inverse::{enumerate_backward, DEFAULT_NODE_CAP};
use crate::map::{iterate, t_apply, MapParam};
use crate::poly::{one_minus_pow_factors, Poly};
use crate::verdicts::MembershipWindow;

/// Coefficients compared against direct iteration.
pub const ORACLE_TERMS: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Denominator {
    /// `(1 - z^period)^exp`.
    Pow { period: u64, exp: u32 },
    Explicit(Poly),
}

impl Denominator {
    pub fn poly(&self) -> Poly {
        match self {
            Denominator::Pow { period, exp } => Poly::one_minus_pow(*period as usize).pow(*exp),
            Denominator::Explicit(p) => p.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalSeries {
    pub numerator: Poly,
    pub denominator: Denominator,
    pub variable: char,
}

impl RationalSeries {
    pub fn new(numerator: Poly, denominator: Denominator, variable: char) -> Self {
        RationalSeries { numerator, denominator, variable }
    }

    /// First `n` coefficients.
    pub fn expand(&self, n: usize) -> Vec<BigInt> {
        self.numerator.series_div(&self.denominator.poly(), n)
    }

    /// Cancels every factor of a structured denominator that divides the
    /// numerator. The factors of `1 - z^P` are irreducible, so the result
    /// is in lowest terms.
    pub fn reduced(&self) -> RationalSeries {
        let Denominator::Pow { period, exp } = self.denominator else {
            return self.clone();
        };
        let mut num = self.numerator.clone();
        let mut remaining = Vec::new();
        let mut cancelled = false;
        for (_, f) in one_minus_pow_factors(period as usize) {
            let mut mult = exp;
            while mult > 0 {
                match num.div_exact(&f) {
                    Some(q) if !num.is_zero() => {
                        num = q;
                        mult -= 1;
                        cancelled = true;
                    }
                    _ => break,
                }
            }
            remaining.extend(std::iter::repeat_n(f, mult as usize));
        }
        let denominator = if cancelled {
            Denominator::Explicit(remaining.iter().fold(Poly::one(), |a, f| a.mul(f)))
        } else {
            self.denominator.clone()
        };
        RationalSeries { numerator: num, denominator, variable: self.variable }
    }

    pub fn to_json(&self) -> Value {
        let strs = |p: &Poly| p.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>();
        match &self.denominator {
            Denominator::Pow { period, exp } => json!({
                "num": strs(&self.numerator),
                "den_pow": { "P": period, "e": exp },
            }),
            Denominator::Explicit(d) => json!({ "num": strs(&self.numerator), "den": strs(d) }),
        }
    }

    pub fn from_json(v: &Value, variable: char) -> Result<Self> {
        let coeffs = |v: &Value| -> Result<Poly> {
            let arr = v.as_array().ok_or_else(|| OrbitError::Parse("expected a coefficient array".into()))?;
            let cs = arr
                .iter()
                .map(|c| {
                    c.as_str()
                        .and_then(|s| s.parse::<BigInt>().ok())
                        .ok_or_else(|| OrbitError::Parse(format!("bad coefficient {c}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Poly::new(cs))
        };
        let numerator = coeffs(&v["num"])?;
        let denominator = if let Some(d) = v.get("den") {
            Denominator::Explicit(coeffs(d)?)
        } else {
            let dp = &v["den_pow"];
            match (dp["P"].as_u64(), dp["e"].as_u64()) {
                (Some(period), Some(exp)) if period >= 1 => Denominator::Pow { period, exp: exp as u32 },
                _ => return Err(OrbitError::Parse("missing den or den_pow".into())),
            }
        };
        Ok(RationalSeries { numerator, denominator, variable })
    }
}

impl fmt::Display for RationalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.variable.to_string();
        let num = self.numerator.to_string().replace('z', &v);
        match &self.denominator {
            Denominator::Pow { period, exp } => {
                let base = if *period == 1 { format!("1 - {v}") } else { format!("1 - {v}^{period}") };
                match exp {
                    0 => write!(f, "{num}"),
                    1 => write!(f, "({num})/({base})"),
                    e => write!(f, "({num})/({base})^{e}"),
                }
            }
            Denominator::Explicit(d) => write!(f, "({num})/({})", d.to_string().replace('z', &v)),
        }
    }
}

/// Per-residue data of `T^m` on classes mod `2^m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineClassTable {
    pub m: u32,
    /// Row `a`: odd states among the first `m` iterates of `a`, and `T^m(a)`.
    pub rows: Vec<(u32, BigInt)>,
}

impl AffineClassTable {
    pub fn build(p: &MapParam, m: u32) -> Self {
        let residues: Vec<u64> = (0..1u64 << m).collect();
        let rows = p
            .execution()
            .map_chunks(&residues, 1024, |chunk| {
                chunk.iter().map(|&a| iterate_counting(p, &BigInt::from(a), m)).collect::<Vec<_>>()
            })
            .into_iter()
            .flatten()
            .collect();
        AffineClassTable { m, rows }
    }

    /// Checks the affine law by direct iteration at `j ∈ {0, 1, 2, 5}` for
    /// `samples` random residues.
    pub fn verify_affine_law(&self, p: &MapParam, samples: usize, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modulus = BigInt::one() << self.m;
        (0..samples).all(|_| {
            let a = rng.random_range(0..self.rows.len());
            let (e, c) = &self.rows[a];
            [0u32, 1, 2, 5].iter().all(|&j| {
                let n = BigInt::from(a) + &modulus * j;
                let want = BigInt::from(3).pow(*e) * j + c;
                iterate_counting(p, &n, self.m).1 == want
            })
        })
    }
}

fn iterate_counting(p: &MapParam, n: &BigInt, m: u32) -> (u32, BigInt) {
    let mut x = n.clone();
    let mut odd = 0;
    for _ in 0..m {
        if x.bit(0) {
            odd += 1;
        }
        x = t_apply(p, &x);
    }
    (odd, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenfunBudget {
    /// Largest iterate count; the table has `2^max_m` rows.
    pub max_m: u32,
}

impl Default for GenfunBudget {
    fn default() -> Self {
        GenfunBudget { max_m: 16 }
    }
}

pub fn iterate_gf(p: &MapParam, m: u32) -> Result<RationalSeries> {
    iterate_gf_with(p, m, GenfunBudget::default())
}

/// `Σ_{n>=1} T^m(n) z^n` as a reduced rational function. `m = 0` gives the
/// identity series `z/(1-z)^2`.
pub fn iterate_gf_with(p: &MapParam, m: u32, budget: GenfunBudget) -> Result<RationalSeries> {
    if m > budget.max_m || m > 40 {
        return Err(OrbitError::Budget(format!("m = {m} exceeds the budget {}", budget.max_m)));
    }
    let table = AffineClassTable::build(p, m);
    if !table.verify_affine_law(p, 32, 0) {
        return Err(OrbitError::Verification(format!("affine law failed for m = {m}")));
    }
    let period = 1usize << m;
    let mut num = vec![BigInt::zero(); 2 * period];
    // z^a (c_a + (3^e - c_a) z^P); the a = 0 row contributes nothing at j = 0
    // because T^m(0) = 0
    for (a, (e, c)) in table.rows.iter().enumerate() {
        num[a] += c;
        num[a + period] += BigInt::from(3).pow(*e) - c;
    }
    let raw = RationalSeries::new(Poly::new(num), Denominator::Pow { period: period as u64, exp: 2 }, 'z');
    let g = raw.reduced();

    let want: Vec<BigInt> = (0..ORACLE_TERMS as u64).map(|n| iterate_counting(p, &BigInt::from(n), m).1).collect();
    if g.expand(ORACLE_TERMS) != want || raw.expand(ORACLE_TERMS) != want {
        return Err(OrbitError::Verification(format!("series for m = {m} disagrees with direct iteration")));
    }
    if !verify_pole_structure(&g, m) {
        return Err(OrbitError::Verification(format!("denominator does not divide (1 - z^{period})^2")));
    }
    Ok(g)
}

/// True iff the denominator of `g` divides `(1 - z^{2^m})^2`: the poles are
/// among the `2^m`-th roots of unity and at most double.
pub fn verify_pole_structure(g: &RationalSeries, m: u32) -> bool {
    let target = Poly::one_minus_pow(1usize << m).pow(2);
    target.div_exact(&g.denominator.poly()).is_some()
}

/// `Σ_j T^j(n) w^j`, or `None` when the orbit hits a cap.
pub fn forward_gf(p: &MapParam, n: &BigInt) -> Option<RationalSeries> {
    let t = iterate(p, n);
    let (pre, q) = (t.preperiod()?, t.period()?);
    let states = t.orbit();
    let head = Poly::new(states[..pre].to_vec());
    let cycle = Poly::new(states[pre..pre + q].to_vec());
    let num = head.mul(&Poly::one_minus_pow(q)).add(&cycle.shift(pre));
    let g = RationalSeries::new(num, Denominator::Pow { period: q as u64, exp: 1 }, 'w').reduced();
    let want: Vec<BigInt> = (0..ORACLE_TERMS).map(|j| state_at(states, pre, q, j)).collect();
    assert_eq!(g.expand(ORACLE_TERMS), want, "forward series of {n} disagrees with its orbit");
    Some(g)
}

/// `T^j(n)` from the preperiodic and periodic parts of an orbit.
fn state_at(states: &[BigInt], pre: usize, q: usize, j: usize) -> BigInt {
    if j < pre {
        states[j].clone()
    } else {
        states[pre + (j - pre) % q].clone()
    }
}

/// Coefficients `c_1..c_N` of the backward-orbit series of `m`, exact below
/// the window's `exact_below`.
pub fn backward_gf_window(p: &MapParam, m: &BigInt, n: u64) -> Result<MembershipWindow> {
    backward_gf_union_window(p, std::slice::from_ref(m), n)
}

/// Coefficient window of the union of several backward orbits.
pub fn backward_gf_union_window(p: &MapParam, roots: &[BigInt], n: u64) -> Result<MembershipWindow> {
    if roots.is_empty() || roots.iter().any(|m| m.is_zero()) {
        return Err(OrbitError::pre("roots must be nonzero"));
    }
    if n < 1 {
        return Err(OrbitError::pre("window end must be >= 1"));
    }
    let mut bits = vec![false; n as usize];
    let mut exact_below = u64::MAX;
    for m in roots {
        let cap = n.max(m.magnitude().to_u64().unwrap_or(u64::MAX));
        let s = enumerate_backward(p, m, cap, DEFAULT_NODE_CAP)?;
        for x in &s.positive_members {
            if let Some(i) = x.to_u64() {
                if (1..=n).contains(&i) {
                    bits[(i - 1) as usize] = true;
                }
            }
        }
        exact_below = exact_below.min(s.frontier_exhausted_below);
    }
    MembershipWindow::new(p.k(), 1, n, bits, exact_below)
}
