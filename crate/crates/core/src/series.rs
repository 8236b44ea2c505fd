//! Truncated formal power series `Σ_{n≥1} a_n z^n` with exact coefficients,
//! the composition group structure, and exact Möbius maps on the sphere.
//!
//! A series carries its order explicitly: `coeffs[k]` is the coefficient of
//! `z^{k+1}`, and everything above `z^order` is unknown (not zero). Operations
//! report exactness through the order of their output.

use crate::error::SeriesError;
use crate::scalar::Exact;
use num_rational::BigRational;

/// `a_1 z + a_2 z² + … + a_K z^K`, truncated at `order` = K.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalSeries {
    coeffs: Vec<Exact>, // coeffs[k] multiplies z^{k+1}
}

impl FormalSeries {
    pub fn new(coeffs: Vec<Exact>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least the linear coefficient");
        FormalSeries { coeffs }
    }

    pub fn identity(order: usize) -> Self {
        let mut c = vec![Exact::zero(); order];
        c[0] = Exact::one();
        FormalSeries { coeffs: c }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of z^n (1-based; n ≤ order).
    pub fn coeff(&self, n: usize) -> &Exact {
        &self.coeffs[n - 1]
    }

    pub fn coeffs(&self) -> &[Exact] {
        &self.coeffs
    }

    pub fn linear(&self) -> &Exact {
        &self.coeffs[0]
    }

    pub fn in_group(&self) -> bool {
        !self.coeffs[0].is_zero()
    }

    pub fn truncate(&self, order: usize) -> Self {
        assert!(order >= 1 && order <= self.order());
        FormalSeries { coeffs: self.coeffs[..order].to_vec() }
    }

    pub fn scale(&self, c: &Exact) -> Self {
        FormalSeries { coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    /// Truncated composition self ∘ other, exact through min(orders).
    pub fn compose(&self, other: &FormalSeries) -> FormalSeries {
        let order = self.order().min(other.order());
        // Horner in the (nilpotent mod z^{order+1}) series `other`
        let mut acc = vec![Exact::zero(); order];
        for k in (0..self.coeffs.len().min(order)).rev() {
            // acc = acc * other + a_{k+1} (in the "divided by z" normalization):
            // maintain acc as the series Σ acc_j z^j with acc_0 meaning z^0 term
            // of self∘other / z-structure. Simpler: polynomial accumulate.
            acc = mul_trunc(&acc, other, order);
            acc[0] = &acc[0] + &self.coeffs[k];
        }
        // acc currently holds (self ∘ other)/z-free? No: we built
        // a_1 + other·(a_2 + other·(…)) — multiply once more by nothing: the
        // result series is other-powers times coefficients: final = acc * other
        let res = mul_series(&acc, other, order);
        FormalSeries { coeffs: res }
    }

    /// Compositional inverse through the same order (Newton/undetermined coefficients).
    pub fn invert(&self) -> Result<FormalSeries, SeriesError> {
        if !self.in_group() {
            return Err(SeriesError::NotInvertible);
        }
        let order = self.order();
        let a1_inv = self.coeffs[0].inv();
        let mut inv = vec![Exact::zero(); order];
        inv[0] = a1_inv.clone();
        // solve (self ∘ inv)(z) = z order by order
        for n in 2..=order {
            let partial = FormalSeries { coeffs: inv.clone() };
            let comp = self.compose(&partial);
            // coefficient of z^n must vanish; it is linear in inv[n-1] with slope a1
            let err = comp.coeff(n).clone();
            let correction = &err * &a1_inv;
            inv[n - 1] = &inv[n - 1] - &correction;
        }
        Ok(FormalSeries { coeffs: inv })
    }

    /// Evaluate at an exact point (plain truncated polynomial evaluation).
    pub fn eval(&self, z: &Exact) -> Exact {
        let mut acc = Exact::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * z) + c;
        }
        &acc * z
    }

    pub fn derivative_at_zero(&self) -> &Exact {
        self.linear()
    }
}

/// Multiply a plain coefficient vector (constant term at index 0) by a series
/// with no constant term; truncate so the *result indices* stay < order.
fn mul_trunc(acc: &[Exact], s: &FormalSeries, order: usize) -> Vec<Exact> {
    let mut out = vec![Exact::zero(); order];
    for (i, a) in acc.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in s.coeffs.iter().enumerate() {
            let idx = i + j + 1;
            if idx < order {
                out[idx] = &out[idx] + &(a * b);
            } else {
                break;
            }
        }
    }
    out
}

/// acc (constant-term-indexed) times series s, producing series coefficients
/// (z^1-indexed) through `order`.
fn mul_series(acc: &[Exact], s: &FormalSeries, order: usize) -> Vec<Exact> {
    let mut out = vec![Exact::zero(); order];
    for (i, a) in acc.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in s.coeffs.iter().enumerate() {
            let pow = i + j + 1; // z^{i} * z^{j+1}
            if pow <= order {
                out[pow - 1] = &out[pow - 1] + &(a * b);
            } else {
                break;
            }
        }
    }
    out
}

/// Product of two series with zero constant term, through `order`.
pub fn mul(a: &FormalSeries, b: &FormalSeries, order: usize) -> FormalSeries {
    let mut out = vec![Exact::zero(); order];
    for (i, x) in a.coeffs.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.coeffs.iter().enumerate() {
            let pow = i + j + 2;
            if pow <= order {
                out[pow - 1] = &out[pow - 1] + &(x * y);
            } else {
                break;
            }
        }
    }
    FormalSeries { coeffs: out }
}

/// Exact Möbius transformation `z ↦ (a z + b)/(c z + d)` on ℙ¹.
#[derive(Clone, Debug, PartialEq)]
pub struct Mobius {
    pub a: Exact,
    pub b: Exact,
    pub c: Exact,
    pub d: Exact,
}

/// Point on ℙ¹ with exact finite part.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Finite(Exact),
    Infinity,
}

impl Point {
    pub fn finite(x: Exact) -> Self {
        Point::Finite(x)
    }

    pub fn conj(&self) -> Point {
        match self {
            Point::Finite(x) => Point::Finite(x.conj()),
            Point::Infinity => Point::Infinity,
        }
    }

    /// Image under z ↦ 1/conj(z).
    pub fn inv_conj(&self) -> Point {
        match self {
            Point::Finite(x) if x.is_zero() => Point::Infinity,
            Point::Finite(x) => Point::Finite(x.conj().inv()),
            Point::Infinity => Point::Finite(Exact::zero()),
        }
    }
}

impl Mobius {
    pub fn new(a: Exact, b: Exact, c: Exact, d: Exact) -> Self {
        let det = &(&a * &d) - &(&b * &c);
        assert!(!det.is_zero(), "degenerate Mobius map");
        Mobius { a, b, c, d }
    }

    pub fn identity() -> Self {
        Mobius::new(Exact::one(), Exact::zero(), Exact::zero(), Exact::one())
    }

    /// z ↦ z + t
    pub fn translation(t: Exact) -> Self {
        Mobius::new(Exact::one(), t, Exact::zero(), Exact::one())
    }

    /// z ↦ λz
    pub fn scaling(l: Exact) -> Self {
        Mobius::new(l, Exact::zero(), Exact::zero(), Exact::one())
    }

    /// z ↦ 1/z
    pub fn inversion() -> Self {
        Mobius::new(Exact::zero(), Exact::one(), Exact::one(), Exact::zero())
    }

    pub fn eval(&self, p: &Point) -> Point {
        match p {
            Point::Finite(z) => {
                let num = &(&self.a * z) + &self.b;
                let den = &(&self.c * z) + &self.d;
                if den.is_zero() {
                    Point::Infinity
                } else {
                    Point::Finite(&num / &den)
                }
            }
            Point::Infinity => {
                if self.c.is_zero() {
                    Point::Infinity
                } else {
                    Point::Finite(&self.a / &self.c)
                }
            }
        }
    }

    pub fn compose(&self, other: &Mobius) -> Mobius {
        // matrix product self · other
        Mobius::new(
            &(&self.a * &other.a) + &(&self.b * &other.c),
            &(&self.a * &other.b) + &(&self.b * &other.d),
            &(&self.c * &other.a) + &(&self.d * &other.c),
            &(&self.c * &other.b) + &(&self.d * &other.d),
        )
    }

    pub fn inverse(&self) -> Mobius {
        Mobius::new(self.d.clone(), -&self.b, -&self.c, self.a.clone())
    }

    /// Entry-wise complex conjugate: represents z ↦ conj(self(conj z)).
    pub fn conj(&self) -> Mobius {
        Mobius::new(self.a.conj(), self.b.conj(), self.c.conj(), self.d.conj())
    }

    /// The unique Möbius map sending (0, ∞, i) ↦ (p0, p∞, pi).
    pub fn from_three_points(p0: &Point, pinf: &Point, pi: &Point) -> Mobius {
        // general pattern: first map (0,∞,i) to (0,∞,i)=identity, then solve.
        // Solve M(z)=(az+b)/(cz+d): M(0)=p0, M(∞)=p∞, M(i)=pi.
        let i = Exact::i();
        match (p0, pinf, pi) {
            (Point::Finite(x0), Point::Finite(xinf), Point::Finite(xi)) => {
                // a/c = xinf, b/d = x0; set c=t, d=1: a = xinf t, b = x0;
                // (xinf t i + x0)/(t i + 1) = xi → t = (x0 - xi)/((xi - xinf) i)
                let t = &(x0 - xi) / &(&(xi - xinf) * &i);
                Mobius::new(&t * xinf, x0.clone(), t, Exact::one())
            }
            (Point::Finite(x0), Point::Finite(xinf), Point::Infinity) => {
                // M(i)=∞ → c i + d = 0 → d = -c i; choose c = 1, d = -i
                // M(0)=b/d=x0 → b = -i x0; M(∞)=a/c=xinf → a=xinf
                Mobius::new(xinf.clone(), -&(&i * x0), Exact::one(), -&i)
            }
            (Point::Finite(x0), Point::Infinity, Point::Finite(xi)) => {
                // M(∞)=∞ → c = 0; M(0) = b/d = x0; M(i) = (a i + b)/d = xi
                // choose d = 1: b = x0, a = (xi - x0)/i
                Mobius::new(&(xi - x0) / &i, x0.clone(), Exact::zero(), Exact::one())
            }
            (Point::Infinity, Point::Finite(xinf), Point::Finite(xi)) => {
                // M(0)=∞ → d = 0; M(∞)=a/c=xinf; M(i)=(a i + b)/(c i)=xi
                // choose c = 1: a = xinf; b = i(xi - xinf)
                Mobius::new(xinf.clone(), &i * &(xi - xinf), Exact::one(), Exact::zero())
            }
            (Point::Infinity, Point::Infinity, _) | (Point::Infinity, _, Point::Infinity) => {
                panic!("marked points must be distinct")
            }
            (Point::Finite(_), Point::Infinity, Point::Infinity) => {
                panic!("marked points must be distinct")
            }
        }
    }

    /// Local series expansion around a point `p` with `self(p)` finite-or-∞
    /// handled by the caller; returns the series of `self − self(p)` in the
    /// local parameter `t` (= z − p, or 1/z at ∞), which lies in 𝔾 when self
    /// is univalent there. Errors if `p` maps to ∞ (pole).
    pub fn local_series(&self, p: &Point, order: usize) -> Result<FormalSeries, SeriesError> {
        // reduce to expansion at 0 via pre-composition with the chart map
        let chart = match p {
            Point::Finite(x) => Mobius::translation(x.clone()),
            Point::Infinity => Mobius::inversion(), // t ↦ 1/t sends 0 ↦ ∞
        };
        let m = self.compose(&chart); // m(t) around t=0
        let val = m.eval(&Point::Finite(Exact::zero()));
        let v0 = match val {
            Point::Finite(v) => v,
            Point::Infinity => return Err(SeriesError::PoleAtPoint),
        };
        // series of (a t + b)/(c t + d) − v0 = ((a − v0 c)t + (b − v0 d))/(c t + d),
        // numerator constant term vanishes by construction.
        let num1 = &m.a - &(&v0 * &m.c);
        if m.d.is_zero() {
            return Err(SeriesError::PoleAtPoint);
        }
        // 1/(c t + d) = (1/d)·Σ (−c/d)^k t^k
        let dinv = m.d.inv();
        let ratio = -&(&m.c * &dinv);
        let mut coeffs = Vec::with_capacity(order);
        // (num1 · t) · (1/d) Σ ratio^k t^k → coefficient of t^{k+1} = num1/d · ratio^k
        let lead = &num1 * &dinv;
        let mut pw = Exact::one();
        for _ in 0..order {
            coeffs.push(&lead * &pw);
            pw = &pw * &ratio;
        }
        Ok(FormalSeries::new(coeffs))
    }

    /// Derivative value (self)'(p) of the map at a finite point with finite image.
    pub fn derivative_at(&self, z: &Exact) -> Exact {
        let den = &(&self.c * z) + &self.d;
        let det = &(&self.a * &self.d) - &(&self.b * &self.c);
        &det / &(&den * &den)
    }
}

/// The map ϖ(z) = i(z − i)/(z + i).
pub fn omega_map() -> Mobius {
    let i = Exact::i();
    Mobius::new(i.clone(), Exact::one(), Exact::one(), i)
}

/// ϑ_γ(z) = 1/(γ+z) − 1/γ as an exact Möbius map (γ ≠ 0).
pub fn theta_gamma(gamma: &Exact) -> Mobius {
    // 1/(γ+z) − 1/γ = −z/(γ(γ+z)) = (−z + 0)/(γ z + γ²)
    Mobius::new(
        -Exact::one(),
        Exact::zero(),
        gamma.clone(),
        gamma * gamma,
    )
}

/// ρ(α|id)_z(t) = α(z + t) − α(z) for a series α, expanded exactly to `order`.
pub fn relative_coordinate(alpha: &FormalSeries, z: &Exact, order: usize) -> Result<FormalSeries, SeriesError> {
    // α(z+t) − α(z) = Σ_n a_n[(z+t)^n − z^n]; expand binomially, truncate at t^order.
    if alpha.order() < order {
        return Err(SeriesError::OrderTooSmall { have: alpha.order(), need: order });
    }
    let mut out = vec![Exact::zero(); order];
    for n in 1..=alpha.order() {
        let a = alpha.coeff(n);
        if a.is_zero() {
            continue;
        }
        // (z+t)^n − z^n = Σ_{k=1..n} C(n,k) z^{n−k} t^k
        let mut binom = BigRational::from_integer(n.into()); // C(n,1)
        let mut zpow = z.powi((n as i64) - 1);
        for k in 1..=n.min(order) {
            let term = Exact::from_rat(binom.clone());
            out[k - 1] = &out[k - 1] + &(&(&term * &zpow) * a);
            // update binom to C(n,k+1), zpow to z^{n-k-1}
            if k < n {
                binom = binom * BigRational::from_integer((n - k).into())
                    / BigRational::from_integer((k + 1).into());
                if !z.is_zero() {
                    zpow = &zpow / z;
                } else {
                    zpow = if n - k - 1 == 0 { Exact::one() } else { Exact::zero() };
                }
            }
        }
    }
    if out[0].is_zero() {
        return Err(SeriesError::NotInvertible);
    }
    Ok(FormalSeries::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn poly(v: &[(i64, i64)]) -> FormalSeries {
        FormalSeries::new(v.iter().map(|&(p, q)| Exact::from_frac(p, q)).collect())
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let s = poly(&[(1, 1), (1, 1), (0, 1), (2, 3), (-1, 2)]);
        let inv = s.invert().unwrap();
        let id = s.compose(&inv);
        assert_eq!(id, FormalSeries::identity(5));
        let id2 = inv.compose(&s);
        assert_eq!(id2, FormalSeries::identity(5));
    }

    #[test]
    fn invert_catalan_signs() {
        // invert(z + z²) = z − z² + 2z³ − 5z⁴ + 14z⁵
        let s = poly(&[(1, 1), (1, 1), (0, 1), (0, 1), (0, 1)]);
        let inv = s.invert().unwrap();
        let expected = [(1i64, 1i64), (-1, 1), (2, 1), (-5, 1), (14, 1)];
        for (n, (p, q)) in expected.iter().enumerate() {
            assert_eq!(inv.coeff(n + 1), &Exact::from_frac(*p, *q), "coefficient of z^{}", n + 1);
        }
    }

    #[test]
    fn lagrange_inversion_oracle() {
        // [z^n] α^{-1} = (1/n)·[w^{n-1}] (w/α(w))^n, cross-checked on a random-ish series
        let s = poly(&[(2, 1), (1, 3), (-1, 2), (1, 1), (0, 1), (1, 5)]);
        let inv = s.invert().unwrap();
        let order = s.order();
        for n in 1..=order {
            // compute (w/α(w))^n as a power series in w through w^{n-1}
            // w/α(w) = 1/(a1 + a2 w + …) — ordinary series with constant term
            let mut recip = vec![Exact::zero(); order]; // constant-term-indexed
            let a1_inv = s.coeff(1).inv();
            recip[0] = a1_inv.clone();
            for k in 1..order {
                // (Σ recip_j w^j)(Σ a_{i+1} w^i) = 1 → recursive
                let mut acc = Exact::zero();
                for j in 0..k {
                    let a_idx = k - j + 1; // a_{k-j+1} multiplies w^{k-j}
                    if a_idx <= order {
                        acc += &(&recip[j] * s.coeff(a_idx));
                    }
                }
                recip[k] = -&(&acc * &a1_inv);
            }
            // power: recip^n truncated, take coefficient of w^{n-1}
            let mut pw = vec![Exact::zero(); order];
            pw[0] = Exact::one();
            for _ in 0..n {
                let mut nx = vec![Exact::zero(); order];
                for i in 0..order {
                    if pw[i].is_zero() {
                        continue;
                    }
                    for j in 0..order - i {
                        nx[i + j] = &nx[i + j] + &(&pw[i] * &recip[j]);
                    }
                }
                pw = nx;
            }
            let lagrange = pw[n - 1].scale(&rat(1, n as i64));
            assert_eq!(inv.coeff(n), &lagrange, "Lagrange inversion mismatch at n={n}");
        }
    }

    #[test]
    fn mobius_rational_composition() {
        // z/(1−az) ∘ z/(1−bz) = z/(1−(a+b)z)
        let a = Exact::from_frac(2, 3);
        let b = Exact::from_frac(-1, 4);
        let ma = Mobius::new(Exact::one(), Exact::zero(), -&a, Exact::one());
        let mb = Mobius::new(Exact::one(), Exact::zero(), -&b, Exact::one());
        let mc = ma.compose(&mb);
        let sum = &a + &b;
        let expect = Mobius::new(Exact::one(), Exact::zero(), -&sum, Exact::one());
        // compare as normalized series
        let s1 = mc.local_series(&Point::finite(Exact::zero()), 6).unwrap();
        let s2 = expect.local_series(&Point::finite(Exact::zero()), 6).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn omega_is_an_involution_rationally() {
        // ϖ∘ϖ = 1/ζ as exact maps
        let w = omega_map();
        let ww = w.compose(&w);
        let inv = Mobius::inversion();
        // projective equality: entries proportional by a single nonzero λ
        let pairs = [(&ww.a, &inv.a), (&ww.b, &inv.b), (&ww.c, &inv.c), (&ww.d, &inv.d)];
        let lam = pairs
            .iter()
            .find(|(_, y)| !y.is_zero())
            .map(|(x, y)| *x / *y)
            .unwrap();
        assert!(!lam.is_zero());
        for (x, y) in pairs {
            assert_eq!(x, &(&lam * y));
        }
    }

    #[test]
    fn omega_series_at_i() {
        // ϖ vanishes at i; local series there in (ζ−i): i·t/(t+2i) = t/2·(1/(1 − i t/2))-ish
        let w = omega_map();
        let s = w.local_series(&Point::finite(Exact::i()), 4).unwrap();
        // i t/(t + 2i) = (i/2i) t (1/(1 + t/2i)) = (1/2) t Σ (−1/(2i))^k t^k
        let half = Exact::from_frac(1, 2);
        assert_eq!(s.coeff(1), &half);
        let m_inv_2i = &-Exact::one() / &Exact::gaussian(0, 1, 2, 1);
        assert_eq!(s.coeff(2), &(&half * &m_inv_2i));
    }

    #[test]
    fn relative_coordinate_identity() {
        let alpha = FormalSeries::identity(5);
        let r = relative_coordinate(&alpha, &Exact::from_frac(1, 3), 5).unwrap();
        assert_eq!(r, FormalSeries::identity(5));
    }

    #[test]
    fn theta_gamma_matches_definition() {
        let g = Exact::from_frac(5, 4);
        let th = theta_gamma(&g);
        let z = Exact::from_frac(1, 7);
        let got = th.eval(&Point::finite(z.clone()));
        let want = &(&g + &z).inv() - &g.inv();
        assert_eq!(got, Point::Finite(want));
    }
}
