//! Exact scalars: Gaussian rationals `a + b·i` over arbitrary-precision rationals.
//!
//! Every quantity on the exact path of the engine is an [`Exact`]. Equality is
//! decidable, and the four field operations are closed (division by a nonzero
//! element stays exact).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// A Gaussian rational `re + im·i`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Exact {
    pub re: BigRational,
    pub im: BigRational,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Exact {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Exact { re, im }
    }

    pub fn from_rat(re: BigRational) -> Self {
        Exact { re, im: BigRational::zero() }
    }

    pub fn from_i64(n: i64) -> Self {
        Exact::from_rat(BigRational::from(BigInt::from(n)))
    }

    /// `p/q` as a real scalar.
    pub fn from_frac(p: i64, q: i64) -> Self {
        Exact::from_rat(rat(p, q))
    }

    /// `(a/b) + (c/d)·i`.
    pub fn gaussian(a: i64, b: i64, c: i64, d: i64) -> Self {
        Exact { re: rat(a, b), im: rat(c, d) }
    }

    pub fn zero() -> Self {
        Exact::from_i64(0)
    }

    pub fn one() -> Self {
        Exact::from_i64(1)
    }

    pub fn i() -> Self {
        Exact { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Exact { re: self.re.clone(), im: -self.im.clone() }
    }

    /// Squared modulus `re² + im²`, a nonnegative rational.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "division by zero Exact scalar");
        let n = self.norm_sqr();
        Exact { re: &self.re / &n, im: -&self.im / &n }
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        Exact { re: &self.re * r, im: &self.im * r }
    }

    /// Integer power (negative allowed for nonzero base).
    pub fn powi(&self, n: i64) -> Self {
        if n == 0 {
            return Exact::one();
        }
        let base = if n < 0 { self.inv() } else { self.clone() };
        let mut acc = Exact::one();
        for _ in 0..n.unsigned_abs() {
            acc = &acc * &base;
        }
        acc
    }

    /// Real part must be the whole story; errors otherwise.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.im.is_zero() {
            Some(&self.re)
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        fn r2f(r: &BigRational) -> f64 {
            let n = r.numer();
            let d = r.denom();
            // Scale down big operands so the quotient stays representable.
            let bits = n.bits().max(d.bits());
            if bits > 900 {
                let shift = bits - 900;
                let n2 = n >> shift;
                let d2 = d >> shift;
                str_to_f64(&n2) / str_to_f64(&d2)
            } else {
                str_to_f64(n) / str_to_f64(d)
            }
        }
        fn str_to_f64(b: &BigInt) -> f64 {
            b.to_string().parse::<f64>().unwrap_or(f64::NAN)
        }
        (r2f(&self.re), r2f(&self.im))
    }

    pub fn abs_f64(&self) -> f64 {
        let (re, im) = self.to_f64();
        re.hypot(im)
    }
}

macro_rules! fmt_impl {
    ($trait:ident) => {
        impl fmt::$trait for Exact {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                if self.im.is_zero() {
                    write!(f, "{}", self.re)
                } else if self.re.is_zero() {
                    write!(f, "{}*i", self.im)
                } else if self.im.is_negative() {
                    write!(f, "{}{}*i", self.re, self.im)
                } else {
                    write!(f, "{}+{}*i", self.re, self.im)
                }
            }
        }
    };
}
fmt_impl!(Debug);
fmt_impl!(Display);

macro_rules! binop {
    ($trait:ident, $method:ident, |$a:ident, $b:ident| $body:expr) => {
        impl $trait for &Exact {
            type Output = Exact;
            fn $method(self, rhs: &Exact) -> Exact {
                let $a = self;
                let $b = rhs;
                $body
            }
        }
        impl $trait for Exact {
            type Output = Exact;
            fn $method(self, rhs: Exact) -> Exact {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Exact { re: &a.re + &b.re, im: &a.im + &b.im });
binop!(Sub, sub, |a, b| Exact { re: &a.re - &b.re, im: &a.im - &b.im });
binop!(Mul, mul, |a, b| Exact {
    re: &a.re * &b.re - &a.im * &b.im,
    im: &a.re * &b.im + &a.im * &b.re,
});
binop!(Div, div, |a, b| a * &b.inv());

impl Neg for &Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact { re: -self.re.clone(), im: -self.im.clone() }
    }
}
impl Neg for Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        -&self
    }
}

impl AddAssign<&Exact> for Exact {
    fn add_assign(&mut self, rhs: &Exact) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}
impl SubAssign<&Exact> for Exact {
    fn sub_assign(&mut self, rhs: &Exact) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}
impl MulAssign<&Exact> for Exact {
    fn mul_assign(&mut self, rhs: &Exact) {
        *self = &*self * rhs;
    }
}

/// Serialize as `"p/q"` or `"p/q+r/s*i"`; parse the same shapes.
pub fn exact_to_string(x: &Exact) -> String {
    x.to_string()
}

pub fn rational_from_str(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(BigRational::new(n, d))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(BigRational::from(n))
    }
}

pub fn exact_from_str(s: &str) -> Option<Exact> {
    let s = s.trim().replace(' ', "");
    if let Some(body) = s.strip_suffix("*i") {
        // Split into real and imaginary pieces at the last +/- not inside a fraction.
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            if (bytes[k] == b'+' || bytes[k] == b'-') && bytes[k - 1] != b'/' {
                // Don't split a leading sign of the imaginary coefficient.
                split = Some(k);
                break;
            }
        }
        match split {
            Some(k) => {
                let re = rational_from_str(&body[..k])?;
                let im_str = &body[k..];
                let im = if im_str == "+" {
                    BigRational::one()
                } else if im_str == "-" {
                    -BigRational::one()
                } else {
                    rational_from_str(im_str)?
                };
                Some(Exact { re, im })
            }
            None => {
                let im = rational_from_str(body)?;
                Some(Exact { re: BigRational::zero(), im })
            }
        }
    } else {
        Some(Exact::from_rat(rational_from_str(&s)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_ops() {
        let a = Exact::gaussian(1, 2, 3, 4);
        let b = Exact::gaussian(-2, 1, 1, 3);
        let prod = &a * &b;
        let back = &prod / &b;
        assert_eq!(back, a);
        assert_eq!(&a - &a, Exact::zero());
        assert_eq!(&a * &a.inv(), Exact::one());
    }

    #[test]
    fn conj_and_norm() {
        let a = Exact::gaussian(3, 1, -4, 1);
        assert_eq!(a.norm_sqr(), rat(25, 1));
        assert_eq!(&a * &a.conj(), Exact::from_i64(25));
    }

    #[test]
    fn string_round_trip() {
        for s in ["3/4", "-2", "1/2+1/3*i", "-1/2-5*i", "2/7*i"] {
            let x = exact_from_str(s).unwrap();
            let y = exact_from_str(&exact_to_string(&x)).unwrap();
            assert_eq!(x, y, "round trip failed for {s}");
        }
    }
}
