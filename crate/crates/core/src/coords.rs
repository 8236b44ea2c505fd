//! The coordinate-change group: extraction of Virasoro coefficients from a
//! series ρ(z) = ρ′(0)·exp(Σ_{n>0} c_n z^{n+1}∂_z)z, and the operators
//! U(ρ) = ρ′(0)^{L̃₀}·exp(Σ c_n L_n) and U₀(ρ) = ρ′(0)^{L₀}·exp(Σ c_n L_n)
//! acting on truncated modules.
//!
//! U is exact on the window (L_n with n > 0 lowers levels, λ^{L̃₀} takes
//! integer powers). U₀ additionally contributes λ^{lowest weight}, which is
//! kept symbolic when fractional.

use crate::error::{BlockError, SeriesError};
use crate::module::{apply_exp_lowering, apply_lambda_ltilde, ModeFamily, ModuleVector};
use crate::scalar::Exact;
use crate::series::{FormalSeries, Mobius, Point};
use crate::symfactor::SymbolicFactor;
use num_rational::BigRational;
use num_traits::Zero;

/// An element ρ of the coordinate-change group with its extracted data.
#[derive(Clone, Debug)]
pub struct CoordChange {
    pub series: FormalSeries,
    /// λ = ρ′(0).
    pub lambda: Exact,
    /// Chosen argument of λ as a rational multiple of π, when one is fixed.
    pub arg_pi: Option<BigRational>,
    /// c_1 … c_{K−1}: exp(Σ c_n z^{n+1}∂_z) reproduces series/λ through order K.
    pub virasoro_coeffs: Vec<Exact>,
}

/// Apply the derivation D = Σ_n c_n z^{n+1}∂_z to a polynomial (coefficients
/// of z^1…z^K), truncating at order K.
fn apply_derivation(coeffs: &[Exact], c: &[Exact], order: usize) -> Vec<Exact> {
    let mut out = vec![Exact::zero(); order];
    for (i, a) in coeffs.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let pow = i + 1; // a multiplies z^pow
        for (n, cn) in c.iter().enumerate() {
            if cn.is_zero() {
                continue;
            }
            // c_n z^{n+1} ∂_z (z^pow) = c_n · pow · z^{pow+n+1}
            let target = pow + n + 1;
            if target <= order {
                let term = &(a * cn) * &Exact::from_i64(pow as i64);
                out[target - 1] = &out[target - 1] + &term;
            }
        }
    }
    out
}

/// exp(Σ c_n z^{n+1}∂_z)·z as a truncated series of the given order.
pub fn exp_derivation_series(c: &[Exact], order: usize) -> FormalSeries {
    let mut acc = vec![Exact::zero(); order];
    acc[0] = Exact::one(); // the series z
    let mut term = acc.clone();
    for k in 1..order {
        term = apply_derivation(&term, c, order);
        if term.iter().all(|x| x.is_zero()) {
            break;
        }
        let kinv = Exact::from_frac(1, k as i64);
        term = term.iter().map(|x| x * &kinv).collect();
        for (o, t) in acc.iter_mut().zip(term.iter()) {
            *o += t;
        }
    }
    FormalSeries::new(acc)
}

/// Solve ρ = λ·exp(Σ_{n>0} c_n z^{n+1}∂_z)z for λ and c_1…c_{K−1}, exactly.
pub fn extract_virasoro_coeffs(rho: &FormalSeries) -> Result<CoordChange, SeriesError> {
    if !rho.in_group() {
        return Err(SeriesError::NotInvertible);
    }
    let order = rho.order();
    let lambda = rho.linear().clone();
    let lam_inv = lambda.inv();
    let normalized: Vec<Exact> = rho.coeffs().iter().map(|a| a * &lam_inv).collect();
    let mut c: Vec<Exact> = Vec::with_capacity(order.saturating_sub(1));
    for n in 1..order {
        // with c_1…c_{n−1} fixed, the z^{n+1} coefficient of exp(D)z is
        // (known lower-order contribution) + c_n; peel it off.
        c.push(Exact::zero());
        let trial = exp_derivation_series(&c, n + 1);
        let have = trial.coeff(n + 1);
        let want = &normalized[n];
        let cn = want - have;
        *c.last_mut().unwrap() = cn;
    }
    // round-trip check: re-exponentiation reproduces the series exactly
    let check = exp_derivation_series(&c, order);
    for n in 1..=order {
        debug_assert_eq!(
            &(check.coeff(n) * &lambda),
            rho.coeff(n),
            "virasoro extraction round-trip failed at order {n}"
        );
    }
    Ok(CoordChange { series: rho.clone(), lambda, arg_pi: None, virasoro_coeffs: c })
}

impl CoordChange {
    pub fn identity(order: usize) -> Self {
        extract_virasoro_coeffs(&FormalSeries::identity(order)).unwrap()
    }

    pub fn from_series(s: &FormalSeries) -> Result<Self, SeriesError> {
        extract_virasoro_coeffs(s)
    }

    pub fn with_arg(mut self, arg_pi: BigRational) -> Self {
        self.arg_pi = Some(arg_pi);
        self
    }

    /// The series of a Möbius map vanishing at `at`, expanded to `order`.
    pub fn from_mobius(m: &Mobius, at: &Point, order: usize) -> Result<Self, SeriesError> {
        let s = m.local_series(at, order)?;
        extract_virasoro_coeffs(&s)
    }
}

/// U(ρ)w = λ^{L̃₀}·exp(Σ c_n L_n)·w, exact on the truncation window.
pub fn apply_u(
    rho: &CoordChange,
    l_family: &ModeFamily,
    w: &ModuleVector,
) -> Result<ModuleVector, BlockError> {
    let cutoff = w.module.cutoff;
    // need c_1…c_cutoff; missing higher coefficients only matter if they could
    // act, i.e. if the vector has components at levels ≥ n
    let top = w.top_level().unwrap_or(0);
    if rho.virasoro_coeffs.len() < top {
        return Err(BlockError::Series(SeriesError::OrderTooSmall {
            have: rho.virasoro_coeffs.len() + 1,
            need: top + 1,
        }));
    }
    let mut terms: Vec<(Exact, &crate::module::ModeOperator)> = Vec::new();
    for (n, cn) in rho.virasoro_coeffs.iter().enumerate() {
        if cn.is_zero() {
            continue;
        }
        let op = l_family.get((n + 1) as i64).ok_or(BlockError::Module(
            crate::error::ModuleError::Truncated {
                op: format!("L_{}", n + 1),
                module: w.module.name.clone(),
                need: n + 1,
                have: cutoff,
            },
        ))?;
        terms.push((cn.clone(), op));
    }
    let exp_part = apply_exp_lowering(&terms, w)?;
    Ok(apply_lambda_ltilde(&rho.lambda, &exp_part))
}

/// U₀(ρ)w = λ^{L₀}·exp(Σ c_n L_n)·w. The fractional part λ^{λ_W} of λ^{L₀}
/// is returned as a symbolic factor; the rest is exact.
///
/// The symbolic factor needs the argument of λ: either `rho.arg_pi` is set, or
/// the caller later pairs this factor with its conjugate (opposite argument)
/// via [`SymbolicFactor::mul_conj_pair`] — in that case pass `pair_tag = true`
/// to defer; deferred factors are an error to realize unpaired.
pub fn apply_u0(
    rho: &CoordChange,
    l_family: &ModeFamily,
    w: &ModuleVector,
) -> Result<(SymbolicFactor, ModuleVector), BlockError> {
    let u_part = apply_u(rho, l_family, w)?;
    let lw = &w.module.lowest_weight;
    let mut factor = SymbolicFactor::one();
    if !lw.is_zero() {
        if lw.is_integer() {
            factor.mul_exact(&rho.lambda.powi(lw.to_integer().try_into().unwrap_or(0)));
        } else {
            let arg = rho
                .arg_pi
                .clone()
                .ok_or_else(|| BlockError::MissingArg(format!(
                    "fractional power {}^{} needs an argument choice",
                    rho.lambda, lw
                )))?;
            factor.mul_gaussian_pow(&rho.lambda, lw, &arg);
        }
    }
    Ok((factor, u_part))
}

/// U₀ where the caller guarantees conjugate pairing: the fractional prefactor
/// is returned as the pair's base so two slots can be combined exactly.
pub struct PairedU0 {
    /// λ^{lowest weight} with λ the derivative; combine two of these with
    /// [`SymbolicFactor::mul_conj_pair`].
    pub lambda: Exact,
    pub exponent: BigRational,
    pub vector: ModuleVector,
}

pub fn apply_u0_paired(
    rho: &CoordChange,
    l_family: &ModeFamily,
    w: &ModuleVector,
) -> Result<PairedU0, BlockError> {
    let u_part = apply_u(rho, l_family, w)?;
    Ok(PairedU0 {
        lambda: rho.lambda.clone(),
        exponent: w.module.lowest_weight.clone(),
        vector: u_part,
    })
}

/// Named classical coordinates.
pub mod standard {
    use super::*;
    use crate::series::{omega_map, theta_gamma};

    /// ϑ_γ as a coordinate change with the branch rule arg(−γ^{−2}) = π − 2·argγ
    /// recorded for the fractional part (the λ of ϑ_γ is −γ^{−2}).
    pub fn vartheta(gamma: &Exact, arg_gamma_pi: &BigRational, order: usize) -> CoordChange {
        let m = theta_gamma(gamma);
        let mut cc = CoordChange::from_mobius(&m, &Point::finite(Exact::zero()), order)
            .expect("vartheta is a coordinate at 0");
        let pi = BigRational::from_integer(1.into());
        cc.arg_pi = Some(&pi - &(arg_gamma_pi * BigRational::from_integer(2.into())));
        cc
    }

    /// The involution coordinate ϖ(ζ) = i(ζ−i)/(ζ+i) expanded at a point.
    pub fn omega_at(p: &Point, order: usize) -> Result<CoordChange, SeriesError> {
        CoordChange::from_mobius(&omega_map(), p, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_fock, FockSpec};
    use crate::scalar::rat;
    use crate::series::FormalSeries;

    fn series(v: &[(i64, i64)]) -> FormalSeries {
        FormalSeries::new(v.iter().map(|&(p, q)| Exact::from_frac(p, q)).collect())
    }

    #[test]
    fn identity_has_no_coeffs() {
        let cc = extract_virasoro_coeffs(&FormalSeries::identity(6)).unwrap();
        assert_eq!(cc.lambda, Exact::one());
        assert!(cc.virasoro_coeffs.iter().all(|c| c.is_zero()));
    }

    #[test]
    fn mobius_gives_single_c1() {
        // z/(1−τz): c1 = τ, others 0
        let tau = Exact::from_frac(3, 7);
        let m = Mobius::new(Exact::one(), Exact::zero(), -&tau, Exact::one());
        let cc = CoordChange::from_mobius(&m, &Point::finite(Exact::zero()), 6).unwrap();
        assert_eq!(cc.lambda, Exact::one());
        assert_eq!(cc.virasoro_coeffs[0], tau);
        assert!(cc.virasoro_coeffs[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn cubic_example() {
        // ρ(z) = z + z³ → c = (0, 1, 0, −3/2) at order 5
        let cc = extract_virasoro_coeffs(&series(&[(1, 1), (0, 1), (1, 1), (0, 1), (0, 1)])).unwrap();
        let expect = [rat(0, 1), rat(1, 1), rat(0, 1), rat(-3, 2)];
        for (k, e) in expect.iter().enumerate() {
            assert_eq!(cc.virasoro_coeffs[k], Exact::from_rat(e.clone()), "c_{}", k + 1);
        }
    }

    #[test]
    fn u_of_identity_is_identity() {
        let f = build_fock(&FockSpec { alpha: rat(1, 2), cutoff: 4 });
        let cc = CoordChange::identity(5);
        for lvl in 0..=4usize {
            for idx in 0..f.module.dim(lvl) {
                let v = f.module.basis_vector(lvl, idx);
                let u = apply_u(&cc, &f.l, &v).unwrap();
                assert_eq!(u, v);
            }
        }
    }

    #[test]
    fn u_mobius_is_exp_l1() {
        // ρ = z/(1−τz): U(ρ) = e^{τL₁}
        let f = build_fock(&FockSpec { alpha: rat(1, 3), cutoff: 4 });
        let tau = Exact::from_frac(2, 5);
        let m = Mobius::new(Exact::one(), Exact::zero(), -&tau, Exact::one());
        let cc = CoordChange::from_mobius(&m, &Point::finite(Exact::zero()), 5).unwrap();
        let l1 = f.l.get(1).unwrap();
        for lvl in 0..=4usize {
            for idx in 0..f.module.dim(lvl) {
                let v = f.module.basis_vector(lvl, idx);
                let got = apply_u(&cc, &f.l, &v).unwrap();
                let want =
                    crate::module::apply_exp_lowering(&[(tau.clone(), l1)], &v).unwrap();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn group_law_on_module() {
        // U(α∘β) = U(α)U(β) exactly on the window
        let f = build_fock(&FockSpec { alpha: rat(1, 2), cutoff: 5 });
        let a = series(&[(1, 1), (1, 2), (0, 1), (-1, 3), (2, 1), (0, 1)]);
        let b = series(&[(2, 1), (0, 1), (1, 4), (1, 1), (0, 1), (-1, 2)]);
        let ab = a.compose(&b);
        let ca = extract_virasoro_coeffs(&a).unwrap();
        let cb = extract_virasoro_coeffs(&b).unwrap();
        let cab = extract_virasoro_coeffs(&ab).unwrap();
        for lvl in 0..=5usize {
            for idx in 0..f.module.dim(lvl) {
                let v = f.module.basis_vector(lvl, idx);
                let lhs = apply_u(&cab, &f.l, &v).unwrap();
                let rhs = apply_u(&ca, &f.l, &apply_u(&cb, &f.l, &v).unwrap()).unwrap();
                assert_eq!(lhs, rhs, "group law fails on level {lvl} idx {idx}");
            }
        }
    }

    #[test]
    fn commutation_with_scaling() {
        // exp(Σ c_n L_n)·λ^{L̃₀} = λ^{L̃₀}·exp(Σ c_n λⁿ L_n)
        let f = build_fock(&FockSpec { alpha: rat(0, 1), cutoff: 5 });
        let lam = Exact::from_frac(3, 2);
        let c = [Exact::from_frac(1, 2), Exact::from_frac(-1, 3), Exact::from_frac(1, 5)];
        for lvl in 0..=5usize {
            for idx in 0..f.module.dim(lvl) {
                let v = f.module.basis_vector(lvl, idx);
                let terms: Vec<(Exact, &crate::module::ModeOperator)> = c
                    .iter()
                    .enumerate()
                    .map(|(n, cn)| (cn.clone(), f.l.get((n + 1) as i64).unwrap()))
                    .collect();
                let lhs = apply_exp_lowering(&terms, &apply_lambda_ltilde(&lam, &v)).unwrap();
                let scaled_terms: Vec<(Exact, &crate::module::ModeOperator)> = c
                    .iter()
                    .enumerate()
                    .map(|(n, cn)| {
                        (cn * &lam.powi((n + 1) as i64), f.l.get((n + 1) as i64).unwrap())
                    })
                    .collect();
                let rhs = apply_lambda_ltilde(&lam, &apply_exp_lowering(&scaled_terms, &v).unwrap());
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn vartheta_dressing_matches_exp_form() {
        // U₀(ϑ_γ) = e^{γL₁}(−γ^{−2})^{L₀}: check on the vacuum module where
        // L₀ has integer spectrum so everything is exact.
        let f = build_fock(&FockSpec { alpha: rat(0, 1), cutoff: 4 });
        let gamma = Exact::from_frac(5, 4);
        let th = standard::vartheta(&gamma, &rat(0, 1), 6);
        let l1 = f.l.get(1).unwrap();
        let mgsq = -&gamma.powi(-2); // −γ^{−2}
        for lvl in 0..=4usize {
            for idx in 0..f.module.dim(lvl) {
                let v = f.module.basis_vector(lvl, idx);
                let (factor, got) = apply_u0(&th, &f.l, &v).unwrap();
                assert!(factor.to_exact().unwrap() == Exact::one());
                // expected: e^{γL₁}(−γ^{−2})^{L₀} v = e^{γL₁}·(−γ²)^{-lvl}·... wait,
                // L₀ = level on F₀: (−γ^{−2})^{lvl}·e^{γL₁}-after? order matters:
                // apply (−γ^{−2})^{L₀} first (diagonal), then e^{γL₁}.
                let scaled = v.scale(&mgsq.powi(lvl as i64));
                let want = apply_exp_lowering(&[(gamma.clone(), l1)], &scaled).unwrap();
                assert_eq!(got, want, "vartheta mismatch at level {lvl} idx {idx}");
            }
        }
    }
}
