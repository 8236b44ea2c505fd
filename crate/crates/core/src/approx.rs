//! Arbitrary-precision dyadic floats and complex pairs built on them.
//!
//! A [`BigFloat`] is `mantissa · 2^exp` with the mantissa kept at a working
//! precision of `prec` bits (round to nearest, ties away from zero). Operations
//! never silently downgrade precision: the result of a binary operation works
//! at the max of the operand precisions.
//!
//! Directed-rounding variants back the interval arithmetic used by the
//! certified eigenvalue bound in `matrix`.

use crate::error::NumericsError;
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{Pow, Signed, Zero};
use std::cmp::Ordering;

pub const MIN_PRECISION: u32 = 64;

#[derive(Clone, Debug)]
pub struct BigFloat {
    /// Zero iff mantissa is zero.
    mantissa: BigInt,
    exp: i64,
    prec: u32,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Round {
    Nearest,
    Down,
    Up,
}

impl BigFloat {
    pub fn zero(prec: u32) -> Self {
        BigFloat { mantissa: BigInt::zero(), exp: 0, prec }
    }

    pub fn from_bigint(n: BigInt, prec: u32) -> Self {
        let mut x = BigFloat { mantissa: n, exp: 0, prec };
        x.normalize(Round::Nearest);
        x
    }

    pub fn from_i64(n: i64, prec: u32) -> Self {
        Self::from_bigint(BigInt::from(n), prec)
    }

    pub fn from_rational(r: &BigRational, prec: u32, rnd: Round) -> Self {
        if r.is_zero() {
            return Self::zero(prec);
        }
        // numer/denom * 2^(prec+2) guard bits, then integer divide
        let guard = prec as i64 + 2;
        let num = r.numer() << guard;
        let (q, rem) = num_integer::Integer::div_rem(&num, r.denom());
        let mut q = q;
        match rnd {
            Round::Nearest => {
                // round half away from zero on the guard remainder
                let two_rem = rem.abs() << 1;
                if two_rem >= r.denom().abs() {
                    if num.sign() == Sign::Minus {
                        q -= 1;
                    } else {
                        q += 1;
                    }
                }
            }
            Round::Down => {
                if rem.sign() == Sign::Minus {
                    q -= 1;
                }
            }
            Round::Up => {
                if rem.sign() == Sign::Plus {
                    q += 1;
                }
            }
        }
        let mut x = BigFloat { mantissa: q, exp: -guard, prec };
        x.normalize(rnd);
        x
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    fn normalize(&mut self, rnd: Round) {
        if self.mantissa.is_zero() {
            self.exp = 0;
            return;
        }
        let bits = self.mantissa.bits() as i64;
        let target = self.prec as i64;
        if bits > target {
            let shift = (bits - target) as u64;
            let neg = self.mantissa.is_negative();
            let dropped_mask = (BigInt::from(1) << shift) - 1;
            let dropped = (&self.mantissa & &dropped_mask).abs();
            self.mantissa >>= shift;
            self.exp += shift as i64;
            let bump = match rnd {
                Round::Nearest => (&dropped << 1) >= (BigInt::from(1) << shift),
                Round::Down => neg && !dropped.is_zero(),
                Round::Up => !neg && !dropped.is_zero(),
            };
            if bump {
                if neg {
                    self.mantissa -= 1;
                } else {
                    self.mantissa += 1;
                }
            }
        }
    }

    pub fn neg(&self) -> Self {
        BigFloat { mantissa: -self.mantissa.clone(), exp: self.exp, prec: self.prec }
    }

    pub fn abs(&self) -> Self {
        BigFloat { mantissa: self.mantissa.abs(), exp: self.exp, prec: self.prec }
    }

    fn add_rnd(&self, other: &Self, rnd: Round) -> Self {
        let prec = self.prec.max(other.prec);
        if self.is_zero() {
            let mut r = other.clone();
            r.prec = prec;
            return r;
        }
        if other.is_zero() {
            let mut r = self.clone();
            r.prec = prec;
            return r;
        }
        let (lo, hi) = if self.exp <= other.exp { (self, other) } else { (other, self) };
        let shift = (hi.exp - lo.exp) as u64;
        // Cap the alignment shift: beyond prec+4 bits the low part only
        // perturbs rounding, which the directed modes must still see.
        let cap = prec as u64 + 4;
        if shift > cap {
            let mut m = hi.mantissa.clone() << cap;
            let tiny = if lo.mantissa.is_negative() { -1 } else { 1 };
            m += tiny; // sticky bit standing in for the far-off addend
            let mut r = BigFloat { mantissa: m, exp: hi.exp - cap as i64, prec };
            r.normalize(rnd);
            // widen one ulp so directed results still bracket the true sum
            match rnd {
                Round::Down => r.mantissa -= 1,
                Round::Up => r.mantissa += 1,
                Round::Nearest => {}
            }
            return r;
        }
        let m = (&hi.mantissa << shift) + &lo.mantissa;
        let mut r = BigFloat { mantissa: m, exp: lo.exp, prec };
        r.normalize(rnd);
        r
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_rnd(other, Round::Nearest)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_rnd(&other.neg(), Round::Nearest)
    }

    fn mul_rnd(&self, other: &Self, rnd: Round) -> Self {
        let prec = self.prec.max(other.prec);
        let mut r = BigFloat {
            mantissa: &self.mantissa * &other.mantissa,
            exp: self.exp + other.exp,
            prec,
        };
        r.normalize(rnd);
        r
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_rnd(other, Round::Nearest)
    }

    fn div_rnd(&self, other: &Self, rnd: Round) -> Self {
        assert!(!other.is_zero(), "BigFloat division by zero");
        let prec = self.prec.max(other.prec);
        if self.is_zero() {
            return Self::zero(prec);
        }
        let guard = prec as i64 + 4;
        let num = &self.mantissa << guard;
        let (q, rem) = num_integer::Integer::div_rem(&num, &other.mantissa);
        let mut q = q;
        let exact = rem.is_zero();
        let result_neg = q.is_negative() || (q.is_zero() && (num.sign() != other.mantissa.sign()));
        if !exact {
            match rnd {
                Round::Nearest => {
                    if (rem.abs() << 1) >= other.mantissa.abs() {
                        if result_neg {
                            q -= 1;
                        } else {
                            q += 1;
                        }
                    }
                }
                Round::Down => {
                    if result_neg {
                        q -= 1;
                    }
                }
                Round::Up => {
                    if !result_neg {
                        q += 1;
                    }
                }
            }
        }
        let mut r = BigFloat { mantissa: q, exp: self.exp - other.exp - guard, prec };
        r.normalize(rnd);
        r
    }

    pub fn div(&self, other: &Self) -> Self {
        self.div_rnd(other, Round::Nearest)
    }

    /// Square root of a nonnegative float (round to nearest-ish; error on negative).
    pub fn sqrt(&self, rnd: Round) -> Result<Self, NumericsError> {
        if self.is_negative() {
            return Err(NumericsError::NegativeSqrt);
        }
        if self.is_zero() {
            return Ok(Self::zero(self.prec));
        }
        let prec = self.prec;
        // Work on mantissa * 2^exp with even exponent.
        let mut m = self.mantissa.clone();
        let mut e = self.exp;
        let target_bits = 2 * (prec as i64 + 4);
        let cur_bits = m.bits() as i64;
        let mut shift = target_bits - cur_bits;
        if (e - shift) % 2 != 0 {
            shift += 1;
        }
        if shift > 0 {
            m <<= shift as u64;
            e -= shift;
        } else if shift < 0 {
            // keep as-is; plenty of bits already (parity fix below)
            if e % 2 != 0 {
                m <<= 1;
                e -= 1;
            }
        }
        let s = m.sqrt(); // floor sqrt
        let mut r = BigFloat { mantissa: s.clone(), exp: e / 2, prec };
        match rnd {
            Round::Up => {
                if &s * &s != m {
                    r.mantissa += 1;
                }
            }
            Round::Down | Round::Nearest => {}
        }
        r.normalize(rnd);
        Ok(r)
    }

    /// `n`-th root of a positive float by Newton iteration, `rnd`-directed.
    pub fn nth_root(&self, n: u32, rnd: Round) -> Result<Self, NumericsError> {
        assert!(n >= 1);
        if n == 1 {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(Self::zero(self.prec));
        }
        if self.is_negative() {
            return Err(NumericsError::NegativeSqrt);
        }
        if n == 2 {
            return self.sqrt(rnd);
        }
        let prec = self.prec;
        // Scale to integer N = m * 2^k with k ≡ 0 mod n and N large, take floor n-th root.
        let mut m = self.mantissa.clone();
        let mut e = self.exp;
        let target_bits = (n as i64) * (prec as i64 + 4);
        let mut shift = target_bits - m.bits() as i64;
        if shift < 0 {
            shift = 0;
        }
        let rem = (e - shift).rem_euclid(n as i64);
        shift += rem;
        m <<= shift as u64;
        e -= shift;
        let root = m.nth_root(n);
        let mut r = BigFloat { mantissa: root.clone(), exp: e / n as i64, prec };
        if rnd == Round::Up && Pow::pow(&root, n) != m {
            r.mantissa += 1;
        }
        r.normalize(rnd);
        Ok(r)
    }

    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        self.abs().cmp(&other.abs())
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits() as i64;
        let (m, e) = if bits > 53 {
            let shift = bits - 53;
            (&self.mantissa >> shift as u64, self.exp + shift)
        } else {
            (self.mantissa.clone(), self.exp)
        };
        let mf = m.to_string().parse::<f64>().unwrap_or(f64::NAN);
        mf * 2f64.powi(e as i32)
    }

    /// Exact rational value of this dyadic float.
    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from(&self.mantissa << self.exp as u64)
        } else {
            BigRational::new(self.mantissa.clone(), BigInt::from(1) << (-self.exp) as u64)
        }
    }

    /// 2^k as a float.
    pub fn pow2(k: i64, prec: u32) -> Self {
        BigFloat { mantissa: BigInt::from(1), exp: k, prec }
    }
}

impl PartialEq for BigFloat {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for BigFloat {}

impl PartialOrd for BigFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BigFloat {
    fn cmp(&self, other: &Self) -> Ordering {
        // compare mantissa*2^exp without materializing huge shifts when signs differ
        let ls = self.mantissa.sign();
        let rs = other.mantissa.sign();
        if ls != rs {
            return if ls == Sign::Minus || (ls == Sign::NoSign && rs == Sign::Plus) {
                Ordering::Less
            } else {
                Ordering::Greater
            };
        }
        if self.is_zero() && other.is_zero() {
            return Ordering::Equal;
        }
        let d = self.sub(other);
        if d.is_zero() {
            Ordering::Equal
        } else if d.is_negative() {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

/// Complex number over [`BigFloat`].
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxComplex {
    pub re: BigFloat,
    pub im: BigFloat,
}

impl ApproxComplex {
    pub fn new(re: BigFloat, im: BigFloat) -> Self {
        ApproxComplex { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        ApproxComplex { re: BigFloat::zero(prec), im: BigFloat::zero(prec) }
    }

    pub fn from_exact(x: &crate::scalar::Exact, prec: u32) -> Self {
        ApproxComplex {
            re: BigFloat::from_rational(&x.re, prec, Round::Nearest),
            im: BigFloat::from_rational(&x.im, prec, Round::Nearest),
        }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn conj(&self) -> Self {
        ApproxComplex { re: self.re.clone(), im: self.im.neg() }
    }

    pub fn add(&self, o: &Self) -> Self {
        ApproxComplex { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        ApproxComplex { re: self.re.sub(&o.re), im: self.im.sub(&o.im) }
    }

    pub fn mul(&self, o: &Self) -> Self {
        ApproxComplex {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    pub fn div(&self, o: &Self) -> Self {
        let n = o.re.mul(&o.re).add(&o.im.mul(&o.im));
        let num = self.mul(&o.conj());
        ApproxComplex { re: num.re.div(&n), im: num.im.div(&n) }
    }

    pub fn norm_sqr(&self) -> BigFloat {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    /// |z|, rounded up (used for Gershgorin radii).
    pub fn abs_upper(&self) -> BigFloat {
        self.norm_sqr().sqrt(Round::Up).expect("norm_sqr is nonnegative")
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

/// Closed dyadic interval `[lo, hi]` with outward rounding.
#[derive(Clone, Debug)]
pub struct Interval {
    pub lo: BigFloat,
    pub hi: BigFloat,
}

impl Interval {
    pub fn point(x: BigFloat) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        Interval {
            lo: BigFloat::from_rational(r, prec, Round::Down),
            hi: BigFloat::from_rational(r, prec, Round::Up),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Interval { lo: self.lo.add_rnd(&o.lo, Round::Down), hi: self.hi.add_rnd(&o.hi, Round::Up) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Interval {
            lo: self.lo.add_rnd(&o.hi.neg(), Round::Down),
            hi: self.hi.add_rnd(&o.lo.neg(), Round::Up),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let cands_lo = [
            self.lo.mul_rnd(&o.lo, Round::Down),
            self.lo.mul_rnd(&o.hi, Round::Down),
            self.hi.mul_rnd(&o.lo, Round::Down),
            self.hi.mul_rnd(&o.hi, Round::Down),
        ];
        let cands_hi = [
            self.lo.mul_rnd(&o.lo, Round::Up),
            self.lo.mul_rnd(&o.hi, Round::Up),
            self.hi.mul_rnd(&o.lo, Round::Up),
            self.hi.mul_rnd(&o.hi, Round::Up),
        ];
        Interval {
            lo: cands_lo.iter().min().unwrap().clone(),
            hi: cands_hi.iter().max().unwrap().clone(),
        }
    }

    /// Division by an interval that certainly excludes zero.
    pub fn div(&self, o: &Self) -> Result<Self, NumericsError> {
        let zero = BigFloat::zero(o.lo.prec());
        if o.lo <= zero && o.hi >= zero {
            return Err(NumericsError::IntervalDivByZero);
        }
        let cands_lo = [
            self.lo.div_rnd(&o.lo, Round::Down),
            self.lo.div_rnd(&o.hi, Round::Down),
            self.hi.div_rnd(&o.lo, Round::Down),
            self.hi.div_rnd(&o.hi, Round::Down),
        ];
        let cands_hi = [
            self.lo.div_rnd(&o.lo, Round::Up),
            self.lo.div_rnd(&o.hi, Round::Up),
            self.hi.div_rnd(&o.lo, Round::Up),
            self.hi.div_rnd(&o.hi, Round::Up),
        ];
        Ok(Interval {
            lo: cands_lo.iter().min().unwrap().clone(),
            hi: cands_hi.iter().max().unwrap().clone(),
        })
    }

    /// Square root; requires lo ≥ 0 for a certified result.
    pub fn sqrt(&self) -> Result<Self, NumericsError> {
        Ok(Interval { lo: self.lo.sqrt(Round::Down)?, hi: self.hi.sqrt(Round::Up)? })
    }

    pub fn certainly_positive(&self) -> bool {
        !self.lo.is_zero() && !self.lo.is_negative()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn rational_round_trip_exact_dyadics() {
        let r = rat(3, 8);
        let x = BigFloat::from_rational(&r, 64, Round::Nearest);
        assert_eq!(x.to_rational(), r);
    }

    #[test]
    fn sqrt_two_squares_back() {
        let two = BigFloat::from_i64(2, 128);
        let s = two.sqrt(Round::Nearest).unwrap();
        let sq = s.mul(&s);
        let err = sq.sub(&two).abs();
        assert!(err < BigFloat::pow2(-120, 128), "sqrt(2)^2 error too large");
    }

    #[test]
    fn nth_root_of_positive_rational() {
        let x = BigFloat::from_rational(&rat(9, 20), 128, Round::Nearest);
        let r = x.nth_root(4, Round::Nearest).unwrap();
        let mut p = r.clone();
        for _ in 0..3 {
            p = p.mul(&r);
        }
        let err = p.sub(&x).abs();
        assert!(err < BigFloat::pow2(-110, 128));
    }

    #[test]
    fn directed_rounding_brackets() {
        let third = rat(1, 3);
        let lo = BigFloat::from_rational(&third, 64, Round::Down);
        let hi = BigFloat::from_rational(&third, 64, Round::Up);
        assert!(lo.to_rational() < third);
        assert!(hi.to_rational() > third);
    }

    #[test]
    fn interval_mul_contains_true_product() {
        let a = Interval::from_rational(&rat(1, 3), 64);
        let b = Interval::from_rational(&rat(-2, 7), 64);
        let p = a.mul(&b);
        let truth = rat(1, 3) * rat(-2, 7);
        assert!(p.lo.to_rational() <= truth && truth <= p.hi.to_rational());
    }

    #[test]
    fn doubled_precision_refines() {
        // chains of operations at 2p bits agree with p-bit results to ~2^{-p}
        let mut x64 = BigFloat::from_rational(&rat(1, 3), 64, Round::Nearest);
        let mut x128 = BigFloat::from_rational(&rat(1, 3), 128, Round::Nearest);
        let c64 = BigFloat::from_rational(&rat(7, 5), 64, Round::Nearest);
        let c128 = BigFloat::from_rational(&rat(7, 5), 128, Round::Nearest);
        for _ in 0..10_000 {
            x64 = x64.mul(&c64).sub(&BigFloat::from_i64(1, 64).div(&c64));
            x128 = x128.mul(&c128).sub(&BigFloat::from_i64(1, 128).div(&c128));
            if x64.abs() > BigFloat::from_i64(1 << 20, 64) {
                x64 = x64.div(&BigFloat::from_i64(1 << 20, 64));
                x128 = x128.div(&BigFloat::from_i64(1 << 20, 128));
            }
        }
        let rel = x64.sub(&x128).abs().div(&x128.abs());
        assert!(rel < BigFloat::pow2(-60 + 4, 128), "relative drift {:?}", rel.to_f64());
    }
}
