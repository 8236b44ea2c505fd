//! Symbolic prefactors: exact products of fractional powers.
//!
//! Conformal-block evaluations factor as (symbolic prefactor) × (Gaussian
//! rational). The prefactor collects terms `b^e` with positive rational
//! magnitude `b` and rational exponent `e`, plus a phase that is a rational
//! multiple of π. Magnitudes are kept prime-factorized, so equality and
//! positivity are decided exactly; realization as a float happens only on the
//! approximate path.
//!
//! Branch choices that come in conjugate pairs (opposite arguments) enter
//! through [`SymbolicFactor::mul_conj_pair`], which cancels the unknown phase
//! exactly without ever representing it.

use crate::approx::{BigFloat, Round};
use crate::scalar::Exact;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// `gaussian · e^{iπ·phase_pi} · Π p^{e_p}` with primes `p` and rational `e_p`.
#[derive(Clone, PartialEq, Eq)]
pub struct SymbolicFactor {
    /// Exact Gaussian-rational multiplier (may be zero).
    pub gaussian: Exact,
    /// Phase exponent: the factor contributes `e^{iπ·phase_pi}`; reduced mod 2.
    pub phase_pi: BigRational,
    /// Map prime → exponent; every base is a positive rational built from these.
    pub primes: BTreeMap<u64, BigRational>,
}

fn reduce_mod2(r: &BigRational) -> BigRational {
    let two = BigRational::from(BigInt::from(2));
    let mut x = r.clone();
    let q = (&x / &two).floor();
    x -= q * &two;
    if x.is_negative() {
        x += &two;
    }
    x
}

fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut k = 0;
            while n % p == 0 {
                n /= p;
                k += 1;
            }
            out.push((p, k));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

impl SymbolicFactor {
    pub fn one() -> Self {
        SymbolicFactor {
            gaussian: Exact::one(),
            phase_pi: BigRational::zero(),
            primes: BTreeMap::new(),
        }
    }

    pub fn from_exact(x: Exact) -> Self {
        let mut f = Self::one();
        f.gaussian = x;
        f
    }

    pub fn is_zero(&self) -> bool {
        self.gaussian.is_zero()
    }

    fn push_prime(&mut self, p: u64, e: BigRational) {
        if e.is_zero() {
            return;
        }
        let entry = self.primes.entry(p).or_insert_with(BigRational::zero);
        *entry += e;
        if entry.is_zero() {
            self.primes.remove(&p);
        }
    }

    /// Multiply by `q^e` for a positive rational `q` (arg 0).
    pub fn mul_pos_rational_pow(&mut self, q: &BigRational, e: &BigRational) {
        assert!(q.is_positive(), "base must be a positive rational");
        let n = q.numer().to_u64().expect("base numerator fits u64");
        let d = q.denom().to_u64().expect("base denominator fits u64");
        for (p, k) in factorize(n) {
            self.push_prime(p, e * BigRational::from(BigInt::from(k)));
        }
        for (p, k) in factorize(d) {
            self.push_prime(p, -(e * BigRational::from(BigInt::from(k))));
        }
    }

    /// Multiply by `λ^e` where `arg λ = arg_pi·π` exactly.
    ///
    /// The magnitude enters as `(|λ|²)^{e/2}`, so `|λ|²` must be a (positive)
    /// rational — always true for Gaussian-rational λ. The claimed argument is
    /// validated against λ when it is an axis or diagonal direction.
    pub fn mul_gaussian_pow(&mut self, base: &Exact, e: &BigRational, arg_pi: &BigRational) {
        assert!(!base.is_zero(), "zero base in symbolic power");
        debug_assert!(arg_matches(base, arg_pi), "claimed arg {} π does not match {}", arg_pi, base);
        let n2 = base.norm_sqr();
        let half = e / BigRational::from(BigInt::from(2));
        self.mul_pos_rational_pow(&n2, &half);
        self.phase_pi = reduce_mod2(&(&self.phase_pi + e * arg_pi));
    }

    /// Multiply by `λ^e · conj(λ)^e` with opposite argument choices: the phase
    /// cancels exactly and only `(|λ|²)^e` remains.
    pub fn mul_conj_pair(&mut self, base: &Exact, e: &BigRational) {
        assert!(!base.is_zero(), "zero base in symbolic power");
        let n2 = base.norm_sqr();
        self.mul_pos_rational_pow(&n2, e);
    }

    pub fn mul_exact(&mut self, x: &Exact) {
        self.gaussian = &self.gaussian * x;
    }

    pub fn mul(&mut self, other: &SymbolicFactor) {
        self.gaussian = &self.gaussian * &other.gaussian;
        self.phase_pi = reduce_mod2(&(&self.phase_pi + &other.phase_pi));
        for (p, e) in &other.primes {
            self.push_prime(*p, e.clone());
        }
    }

    pub fn inv(&self) -> SymbolicFactor {
        SymbolicFactor {
            gaussian: self.gaussian.inv(),
            phase_pi: reduce_mod2(&-self.phase_pi.clone()),
            primes: self.primes.iter().map(|(p, e)| (*p, -e.clone())).collect(),
        }
    }

    pub fn conj(&self) -> SymbolicFactor {
        SymbolicFactor {
            gaussian: self.gaussian.conj(),
            phase_pi: reduce_mod2(&-self.phase_pi.clone()),
            primes: self.primes.clone(),
        }
    }

    /// Fold phases of the form `e^{iπ·(k/2)}` (k integer) into the Gaussian part.
    pub fn canonicalize(&mut self) {
        let two = BigRational::from(BigInt::from(2));
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let phase = reduce_mod2(&self.phase_pi);
        // phase/half integral?
        let q = &phase / &half;
        if q.is_integer() {
            let k = (q.numer() % BigInt::from(4) + BigInt::from(4)) % BigInt::from(4);
            let k = k.to_u32().unwrap();
            let mult = match k {
                0 => Exact::one(),
                1 => Exact::i(),
                2 => -Exact::one(),
                _ => -Exact::i(),
            };
            self.gaussian = &self.gaussian * &mult;
            self.phase_pi = BigRational::zero();
        } else {
            self.phase_pi = phase;
        }
        let _ = two;
        // pull integer prime exponents into the Gaussian part
        let mut int_part = BigRational::one();
        let mut keep = BTreeMap::new();
        for (p, e) in std::mem::take(&mut self.primes) {
            if e.is_integer() {
                let k = e.numer().to_i64().expect("prime exponent fits i64");
                let base = BigRational::from(BigInt::from(p));
                if k >= 0 {
                    for _ in 0..k {
                        int_part *= &base;
                    }
                } else {
                    for _ in 0..(-k) {
                        int_part /= &base;
                    }
                }
            } else {
                keep.insert(p, e);
            }
        }
        self.primes = keep;
        self.gaussian = self.gaussian.scale(&int_part);
    }

    /// True if, after canonicalization, the factor is a strictly positive rational
    /// times a strictly positive fractional-power product (i.e. certainly > 0).
    pub fn is_certainly_positive(&self) -> bool {
        let mut c = self.clone();
        c.canonicalize();
        c.phase_pi.is_zero() && c.gaussian.is_real() && c.gaussian.re.is_positive()
    }

    /// Exact value when all exponents are integral and the phase is a half-turn
    /// multiple; `None` otherwise.
    pub fn to_exact(&self) -> Option<Exact> {
        let mut c = self.clone();
        c.canonicalize();
        if c.primes.is_empty() && c.phase_pi.is_zero() {
            Some(c.gaussian)
        } else {
            None
        }
    }

    /// Realize as an approximate complex pair (re, im) at `prec` bits.
    pub fn to_approx(&self, prec: u32) -> Result<(BigFloat, BigFloat), crate::error::BlockError> {
        let mut c = self.clone();
        c.canonicalize();
        // magnitude
        let mut mag = BigFloat::from_i64(1, prec);
        for (p, e) in &c.primes {
            let denom = e.denom().to_u32().ok_or(crate::error::BlockError::UnresolvedBranch)?;
            let numer = e.numer().to_i64().ok_or(crate::error::BlockError::UnresolvedBranch)?;
            let base = BigFloat::from_i64(*p as i64, prec);
            let root = base.nth_root(denom, Round::Nearest).map_err(|_| {
                crate::error::BlockError::UnresolvedBranch
            })?;
            let mut pow = BigFloat::from_i64(1, prec);
            for _ in 0..numer.unsigned_abs() {
                pow = pow.mul(&root);
            }
            if numer < 0 {
                pow = BigFloat::from_i64(1, prec).div(&pow);
            }
            mag = mag.mul(&pow);
        }
        if !c.phase_pi.is_zero() {
            return Err(crate::error::BlockError::MissingArg(format!(
                "irrational phase e^(i pi {}) cannot be realized on this path",
                c.phase_pi
            )));
        }
        let (gr, gi) = (&c.gaussian.re, &c.gaussian.im);
        let re = BigFloat::from_rational(gr, prec, Round::Nearest).mul(&mag);
        let im = BigFloat::from_rational(gi, prec, Round::Nearest).mul(&mag);
        Ok((re, im))
    }

    pub fn to_f64_parts(&self) -> (f64, f64) {
        match self.to_approx(96) {
            Ok((re, im)) => (re.to_f64(), im.to_f64()),
            Err(_) => (f64::NAN, f64::NAN),
        }
    }
}

/// Does `base` point in direction `e^{iπ·arg_pi}`? Only directions with
/// rational cosine/sine (axes) or the four diagonals are decidable here.
fn arg_matches(base: &Exact, arg_pi: &BigRational) -> bool {
    let r = reduce_mod2(arg_pi);
    let table: [(i64, i64, (i32, i32)); 8] = [
        (0, 1, (1, 0)),
        (1, 4, (1, 1)),
        (1, 2, (0, 1)),
        (3, 4, (-1, 1)),
        (1, 1, (-1, 0)),
        (5, 4, (-1, -1)),
        (3, 2, (0, -1)),
        (7, 4, (1, -1)),
    ];
    for (n, d, (sx, sy)) in table {
        if r == BigRational::new(BigInt::from(n), BigInt::from(d)) {
            let re_sign = if base.re.is_zero() { 0 } else if base.re.is_positive() { 1 } else { -1 };
            let im_sign = if base.im.is_zero() { 0 } else if base.im.is_positive() { 1 } else { -1 };
            if re_sign != sx || im_sign != sy {
                return false;
            }
            // diagonal directions additionally need |re| = |im|
            if sx != 0 && sy != 0 && base.re.abs() != base.im.abs() {
                return false;
            }
            return true;
        }
    }
    // unlisted direction: accept the caller's branch choice (cannot validate)
    true
}

impl fmt::Debug for SymbolicFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} * e^(i pi {})", self.gaussian, self.phase_pi)?;
        for (p, e) in &self.primes {
            write!(f, " * {}^({})", p, e)?;
        }
        Ok(())
    }
}

impl fmt::Display for SymbolicFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn conj_pair_cancels_phase() {
        let mut f = SymbolicFactor::one();
        // (3+4i)^{1/3} * conj(3+4i)^{1/3} = 25^{1/3} = 5^{2/3}
        f.mul_conj_pair(&Exact::gaussian(3, 1, 4, 1), &rat(1, 3));
        let mut g = SymbolicFactor::one();
        g.mul_pos_rational_pow(&rat(5, 1), &rat(2, 3));
        f.canonicalize();
        g.canonicalize();
        assert_eq!(f, g);
    }

    #[test]
    fn i_power_folds_to_gaussian() {
        let mut f = SymbolicFactor::one();
        // (2i)^2 with arg(i)=π/2: magnitude 4, phase π → -4
        f.mul_gaussian_pow(&Exact::gaussian(0, 1, 2, 1), &rat(2, 1), &rat(1, 2));
        assert_eq!(f.to_exact().unwrap(), Exact::from_i64(-4));
    }

    #[test]
    fn positivity_detection() {
        let mut f = SymbolicFactor::one();
        f.mul_pos_rational_pow(&rat(9, 20), &rat(-1, 4));
        f.mul_exact(&Exact::from_frac(3, 7));
        assert!(f.is_certainly_positive());
        f.mul_exact(&-Exact::one());
        assert!(!f.is_certainly_positive());
    }

    #[test]
    fn approx_realization() {
        let mut f = SymbolicFactor::one();
        f.mul_pos_rational_pow(&rat(2, 1), &rat(1, 2)); // sqrt(2)
        let (re, _) = f.to_approx(96).unwrap();
        let v = re.to_f64();
        assert!((v - std::f64::consts::SQRT_2).abs() < 1e-12);
    }
}
