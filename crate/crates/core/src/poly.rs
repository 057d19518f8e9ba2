//! Dense integer polynomials with the few operations rational generating
//! functions need. Loops skip zero coefficients, so products and quotients
//! by sparse factors such as `1 - z^P` stay linear in the degree.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly(Vec<BigInt>);

impl Poly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn one() -> Self {
        Poly(vec![BigInt::one()])
    }

    /// `c·z^d`.
    pub fn monomial(c: BigInt, d: usize) -> Self {
        let mut v = vec![BigInt::zero(); d + 1];
        v[d] = c;
        Self::new(v)
    }

    /// `1 - z^p`.
    pub fn one_minus_pow(p: usize) -> Self {
        Poly::one().sub(&Poly::monomial(BigInt::one(), p))
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.0
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.0.get(i).cloned().unwrap_or_default()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn nonzero(&self) -> impl Iterator<Item = (usize, &BigInt)> {
        self.0.iter().enumerate().filter(|(_, c)| !c.is_zero())
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly::new((0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![BigInt::zero(); self.0.len() + o.0.len() - 1];
        let (small, big) = if self.nonzero().count() <= o.nonzero().count() { (self, o) } else { (o, self) };
        for (i, a) in small.nonzero() {
            for (j, b) in big.nonzero() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn pow(&self, e: u32) -> Poly {
        (0..e).fold(Poly::one(), |acc, _| acc.mul(self))
    }

    /// Shift by `z^d`.
    pub fn shift(&self, d: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![BigInt::zero(); d];
        v.extend(self.0.iter().cloned());
        Poly(v)
    }

    pub fn content(&self) -> BigInt {
        self.0.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// First `n` power series coefficients of `self / den`. Requires
    /// `den(0) = ±1` so that every coefficient stays integral.
    pub fn series_div(&self, den: &Poly, n: usize) -> Vec<BigInt> {
        let d0 = den.coeff(0);
        assert!(d0.abs().is_one(), "series division needs a unit constant term");
        let tail: Vec<(usize, BigInt)> = den.nonzero().filter(|(j, _)| *j > 0).map(|(j, c)| (j, c.clone())).collect();
        let mut out: Vec<BigInt> = Vec::with_capacity(n);
        for i in 0..n {
            let mut c = self.coeff(i);
            for (j, dj) in &tail {
                if *j > i {
                    break;
                }
                c -= dj * &out[i - j];
            }
            out.push(if d0.is_negative() { -c } else { c });
        }
        out
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        let dd = d.degree()?;
        let Some(nd) = self.degree() else {
            return Some(Poly::zero());
        };
        if nd < dd {
            return None;
        }
        if d.coeff(0).abs().is_one() {
            let s = self.series_div(d, nd + 1);
            if s[nd - dd + 1..].iter().any(|c| !c.is_zero()) {
                return None;
            }
            return Some(Poly::new(s[..=nd - dd].to_vec()));
        }
        self.div_exact_rational(d)
    }

    fn div_exact_rational(&self, d: &Poly) -> Option<Poly> {
        let dd = d.degree()?;
        let lead = BigRational::from_integer(d.coeff(dd));
        let mut rem: Vec<BigRational> = self.0.iter().map(|c| BigRational::from_integer(c.clone())).collect();
        let nd = rem.len() - 1;
        let mut q = vec![BigRational::zero(); nd - dd + 1];
        for i in (0..=nd - dd).rev() {
            let c = &rem[i + dd] / &lead;
            if c.is_zero() {
                continue;
            }
            for (j, dj) in d.nonzero() {
                rem[i + j] -= &c * BigRational::from_integer(dj.clone());
            }
            q[i] = c;
        }
        if rem.iter().any(|c| !c.is_zero()) || q.iter().any(|c| !c.is_integer()) {
            return None;
        }
        Some(Poly::new(q.into_iter().map(|c| c.to_integer()).collect()))
    }

    /// Evaluation at an integer.
    pub fn eval(&self, z: &BigInt) -> BigInt {
        self.0.iter().rev().fold(BigInt::zero(), |acc, c| acc * z + c)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.nonzero() {
            let (neg, a) = (c.is_negative(), c.abs());
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            match (i, a.is_one()) {
                (0, _) => write!(f, "{a}")?,
                (1, true) => write!(f, "z")?,
                (1, false) => write!(f, "{a}z")?,
                (_, true) => write!(f, "z^{i}")?,
                (_, false) => write!(f, "{a}z^{i}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

/// The cyclotomic-type factor of `1 - z^p` for the divisor `d`: `1 - z` for
/// `d = 1`, the cyclotomic polynomial `Φ_d` otherwise. Their product over
/// all divisors is `1 - z^p`.
pub fn cyclotomic_factor(d: usize) -> Poly {
    assert!(d >= 1);
    if d == 1 {
        return Poly::from_i64(&[1, -1]);
    }
    if d.is_power_of_two() {
        return Poly::one().add(&Poly::monomial(BigInt::one(), d / 2));
    }
    let mut q = Poly::one_minus_pow(d);
    for e in divisors(d) {
        if e < d {
            q = q.div_exact(&cyclotomic_factor(e)).expect("cyclotomic factor divides");
        }
    }
    q
}

/// Irreducible factors of `1 - z^p`, one per divisor of `p`.
pub fn one_minus_pow_factors(p: usize) -> Vec<(usize, Poly)> {
    if p.is_power_of_two() {
        let mut v = vec![(1, cyclotomic_factor(1))];
        let mut d = 2;
        while d <= p {
            v.push((d, cyclotomic_factor(d)));
            d *= 2;
        }
        return v;
    }
    divisors(p).into_iter().map(|d| (d, cyclotomic_factor(d))).collect()
}
