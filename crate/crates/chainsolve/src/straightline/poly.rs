//! Univariate polynomials and rational functions over exact rationals, with
//! root extraction: exact closed forms through degree 2, bracketed bisection
//! above that.

use crate::model::ExecLimits;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    /// Coefficient of x^i at index i. No trailing zeros.
    coeffs: Vec<BigRational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("equation reduces to 0 = 0 and has no determinate root")]
    Degenerate,
    #[error("equation mentions unknown {0:?}, expected {1:?}")]
    ForeignUnknown(String, String),
    #[error("symbolic exponent must be a literal integer")]
    SymbolicExponent,
    #[error("no real root satisfies the constraints")]
    NoRoot,
    #[error("root search exceeded the execution deadline")]
    Timeout,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Poly {
        let mut p = Poly { coeffs: vec![c] };
        p.normalize();
        p
    }

    /// The monomial x.
    pub fn unknown() -> Poly {
        Poly { coeffs: vec![BigRational::zero(), BigRational::one()] }
    }

    fn normalize(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the zero polynomial is reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, i: usize) -> BigRational {
        self.coeffs.get(i).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            coeffs.push(self.coeff(i) + other.coeff(i));
        }
        let mut p = Poly { coeffs };
        p.normalize();
        p
    }

    pub fn neg(&self) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| -c.clone()).collect() }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        let mut p = Poly { coeffs };
        p.normalize();
        p
    }

    pub fn pow(&self, exp: u32) -> Poly {
        let mut acc = Poly::constant(BigRational::one());
        for _ in 0..exp {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Polynomial division, panics on zero divisor. Each round cancels the
    /// leading term of the remainder, so the loop strictly shrinks it.
    fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "polynomial division by zero");
        let mut rem = self.clone();
        let mut quot = vec![BigRational::zero(); self.coeffs.len()];
        let dlead = divisor.coeffs.last().unwrap().clone();
        let ddeg = divisor.degree();
        while !rem.is_zero() && rem.degree() >= ddeg {
            let shift = rem.degree() - ddeg;
            let factor = rem.coeffs.last().unwrap() / &dlead;
            quot[shift] = factor.clone();
            let mut scaled = vec![BigRational::zero(); shift];
            scaled.extend(divisor.coeffs.iter().map(|c| c * &factor));
            let mut sp = Poly { coeffs: scaled };
            sp.normalize();
            rem = rem.sub(&sp);
        }
        let mut q = Poly { coeffs: quot };
        q.normalize();
        (q, rem)
    }

    /// Monic greatest common divisor by Euclid's algorithm.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            return a;
        }
        let lead = a.coeffs.last().unwrap().clone();
        Poly { coeffs: a.coeffs.iter().map(|c| c / &lead).collect() }
    }

    pub fn divide_exact(&self, divisor: &Poly) -> Poly {
        let (q, r) = self.div_rem(divisor);
        debug_assert!(r.is_zero(), "inexact polynomial division");
        q
    }
}

/// Quotient of two polynomials. The denominator is never the zero polynomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalFn {
    pub num: Poly,
    pub den: Poly,
}

impl RationalFn {
    pub fn constant(c: BigRational) -> RationalFn {
        RationalFn { num: Poly::constant(c), den: one() }
    }

    pub fn unknown() -> RationalFn {
        RationalFn { num: Poly::unknown(), den: one() }
    }

    pub fn add(&self, o: &RationalFn) -> RationalFn {
        RationalFn {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
    }

    pub fn sub(&self, o: &RationalFn) -> RationalFn {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> RationalFn {
        RationalFn { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, o: &RationalFn) -> RationalFn {
        RationalFn { num: self.num.mul(&o.num), den: self.den.mul(&o.den) }
    }

    pub fn div(&self, o: &RationalFn) -> Result<RationalFn, SolveError> {
        if o.num.is_zero() {
            // Division by the zero function has no roots to offer.
            return Err(SolveError::Degenerate);
        }
        Ok(RationalFn { num: self.num.mul(&o.den), den: self.den.mul(&o.num) })
    }

    pub fn pow(&self, exp: i64) -> Result<RationalFn, SolveError> {
        let base = if exp < 0 {
            if self.num.is_zero() {
                return Err(SolveError::Degenerate);
            }
            RationalFn { num: self.den.clone(), den: self.num.clone() }
        } else {
            self.clone()
        };
        let e = exp.unsigned_abs() as u32;
        Ok(RationalFn { num: base.num.pow(e), den: base.den.pow(e) })
    }

    /// Cancels common factors so spurious pole/root coincidences disappear.
    pub fn reduced(&self) -> RationalFn {
        let g = self.num.gcd(&self.den);
        if g.is_zero() || g.degree() == 0 {
            return self.clone();
        }
        RationalFn { num: self.num.divide_exact(&g), den: self.den.divide_exact(&g) }
    }
}

fn one() -> Poly {
    Poly::constant(BigRational::one())
}

/// Exact square root of a nonnegative rational, if one exists.
pub fn sqrt_exact(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let ns = r.numer().sqrt();
    let ds = r.denom().sqrt();
    if &(&ns * &ns) == r.numer() && &(&ds * &ds) == r.denom() {
        Some(BigRational::new(ns, ds))
    } else {
        None
    }
}

/// Rational approximation of a square root with absolute error below 1e-24.
pub fn sqrt_approx(r: &BigRational) -> BigRational {
    debug_assert!(!r.is_negative());
    let scale = BigInt::from(10u32).pow(24);
    // sqrt(p/q) = isqrt(p * q * scale^2) / (q * scale), floor error < 1/(q*scale).
    let n = r.numer() * r.denom() * &scale * &scale;
    BigRational::new(n.sqrt(), r.denom() * &scale)
}

fn tiny(pow10: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(10u32).pow(pow10))
}

/// Real roots of a polynomial, ascending. Exact through degree 2; bracketed
/// bisection (sign changes on a grid inside the coefficient bound) above that,
/// accurate to well below 1e-9. Even-multiplicity roots that never cross zero
/// are outside the contract of the bisection fallback.
pub fn real_roots(p: &Poly, limits: &ExecLimits) -> Result<Vec<BigRational>, SolveError> {
    if p.is_zero() {
        return Err(SolveError::Degenerate);
    }
    match p.degree() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![-p.coeff(0) / p.coeff(1)]),
        2 => {
            let (a, b, c) = (p.coeff(2), p.coeff(1), p.coeff(0));
            let disc = &b * &b - BigRational::from_integer(4.into()) * &a * &c;
            if disc.is_negative() {
                return Ok(Vec::new());
            }
            let sq = sqrt_exact(&disc).unwrap_or_else(|| sqrt_approx(&disc));
            let two_a = BigRational::from_integer(2.into()) * &a;
            let mut roots = vec![(-&b - &sq) / &two_a, (-&b + &sq) / &two_a];
            roots.sort();
            if roots[0] == roots[1] {
                roots.pop();
            }
            Ok(roots)
        }
        _ => bisection_roots(p, limits),
    }
}

fn bisection_roots(p: &Poly, limits: &ExecLimits) -> Result<Vec<BigRational>, SolveError> {
    let lead = p.coeff(p.degree());
    let mut bound = BigRational::one();
    for i in 0..p.degree() {
        let ratio = (p.coeff(i) / &lead).abs();
        if ratio > bound {
            bound = ratio;
        }
    }
    bound += BigRational::one();

    const GRID: i64 = 4096;
    let mut roots: Vec<BigRational> = Vec::new();
    let step = &bound * BigRational::from_integer(2.into()) / BigRational::from_integer(GRID.into());
    let mut prev_x = -bound.clone();
    let mut prev_v = p.eval(&prev_x);
    for i in 1..=GRID {
        if limits.expired() {
            return Err(SolveError::Timeout);
        }
        let x = -&bound + &step * BigRational::from_integer(i.into());
        let v = p.eval(&x);
        if prev_v.is_zero() {
            roots.push(prev_x.clone());
        } else if !v.is_zero() && prev_v.is_negative() != v.is_negative() {
            roots.push(bisect(p, prev_x.clone(), x.clone(), limits)?);
        }
        prev_x = x;
        prev_v = v;
    }
    if prev_v.is_zero() {
        roots.push(prev_x);
    }
    roots.sort();
    let gap = tiny(10);
    roots.dedup_by(|a, b| (a.clone() - b.clone()).abs() < gap);
    Ok(roots)
}

fn bisect(
    p: &Poly,
    mut lo: BigRational,
    mut hi: BigRational,
    limits: &ExecLimits,
) -> Result<BigRational, SolveError> {
    let mut lo_v = p.eval(&lo);
    let width = tiny(12);
    let two = BigRational::from_integer(2.into());
    for _ in 0..200 {
        if limits.expired() {
            return Err(SolveError::Timeout);
        }
        if (hi.clone() - lo.clone()).abs() < width {
            break;
        }
        let mid = (&lo + &hi) / &two;
        let mid_v = p.eval(&mid);
        if mid_v.is_zero() {
            return Ok(mid);
        }
        if mid_v.is_negative() == lo_v.is_negative() {
            lo = mid;
            lo_v = mid_v;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rat;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn poly(coeffs: &[i64]) -> Poly {
        let mut p = Poly { coeffs: coeffs.iter().map(|&c| rat(c)).collect() };
        p.normalize();
        p
    }

    #[test]
    fn linear_root() {
        // 2x - 6 = 0
        let roots = real_roots(&poly(&[-6, 2]), &ExecLimits::none()).unwrap();
        assert_eq!(roots, vec![rat(3)]);
    }

    #[test]
    fn quadratic_exact_roots() {
        // 2x^2 + x - 3 = (2x + 3)(x - 1)
        let roots = real_roots(&poly(&[-3, 1, 2]), &ExecLimits::none()).unwrap();
        assert_eq!(roots, vec![r(-3, 2), rat(1)]);
    }

    #[test]
    fn quadratic_no_real_roots() {
        let roots = real_roots(&poly(&[1, 0, 1]), &ExecLimits::none()).unwrap();
        assert!(roots.is_empty());
    }

    #[test]
    fn quadratic_irrational_root_close_to_reference() {
        // x^2 - 5 = 0, positive root is sqrt(5).
        let roots = real_roots(&poly(&[-5, 0, 1]), &ExecLimits::none()).unwrap();
        assert_eq!(roots.len(), 2);
        let sqrt5 = BigRational::new(
            "22360679774997896964".parse().unwrap(),
            BigInt::from(10u32).pow(19),
        );
        let err = (roots[1].clone() - sqrt5).abs();
        assert!(err < tiny(9), "error {err}");
    }

    #[test]
    fn cubic_roots_by_bisection() {
        // (x - 1)(x - 2)(x - 3) = x^3 - 6x^2 + 11x - 6
        let roots = real_roots(&poly(&[-6, 11, -6, 1]), &ExecLimits::none()).unwrap();
        assert_eq!(roots.len(), 3);
        for (root, want) in roots.iter().zip([1i64, 2, 3]) {
            assert!((root.clone() - rat(want)).abs() < tiny(9));
        }
    }

    #[test]
    fn gcd_cancels_shared_factor() {
        // num = (x-1)(x-2), den = (x-1)(x+4)
        let num = poly(&[-1, 1]).mul(&poly(&[-2, 1]));
        let den = poly(&[-1, 1]).mul(&poly(&[4, 1]));
        let rf = RationalFn { num, den }.reduced();
        assert_eq!(rf.num, poly(&[-2, 1]));
        assert_eq!(rf.den, poly(&[4, 1]));
    }

    #[test]
    fn sqrt_exact_detects_perfect_squares() {
        assert_eq!(sqrt_exact(&r(9, 4)), Some(r(3, 2)));
        assert_eq!(sqrt_exact(&rat(250000)), Some(rat(500)));
        assert_eq!(sqrt_exact(&rat(5)), None);
        assert_eq!(sqrt_exact(&rat(-4)), None);
    }

    #[test]
    fn zero_polynomial_is_degenerate() {
        assert_eq!(real_roots(&Poly::zero(), &ExecLimits::none()), Err(SolveError::Degenerate));
    }
}
