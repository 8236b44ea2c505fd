//! The q-series sewing engine: contraction of two blocks over a graded basis,
//! normalized vs. standard sewing, double sewing, and convergence diagnostics.
//!
//! Contractions use the Gram-inverse kernel rather than orthonormal bases:
//! orthonormalization needs square roots and would leave the exact path, and
//! the contraction Σ φ(·, b_j)·(G⁻¹)-paired·ψ(·, b̄_k) is basis-free.

use crate::blocks::BlockFunctional;
use crate::error::SewError;
use crate::module::{ConjugationMap, GradedModule, ModuleVector};
use crate::scalar::Exact;
use crate::symfactor::SymbolicFactor;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use std::sync::Arc;

/// How the two sewn slots pair.
pub enum SewPairing {
    /// Left slot carries M, right slot carries M′ (dual coordinates): the
    /// contraction kernel is Σ_j b_j ⊗ b_j^∨.
    DualPair { module: Arc<GradedModule>, dual: Arc<GradedModule> },
    /// Both slots carry the vacuum module, identified with its dual by C∘Θ.
    VacuumSelf { module: Arc<GradedModule>, theta: ConjugationMap },
}

impl SewPairing {
    /// Kernel vectors (left insertion, right insertion) at the given level;
    /// the Gram-inverse weights are folded into the right insertion.
    pub fn kernel(&self, level: usize) -> Vec<(ModuleVector, ModuleVector)> {
        match self {
            SewPairing::DualPair { module, dual } => {
                (0..module.dim(level))
                    .map(|j| {
                        let left = module.basis_vector(level, j);
                        // b_j^∨ is the j-th dual-coordinate unit vector
                        let right = dual.basis_vector(level, j);
                        (left, right)
                    })
                    .collect()
            }
            SewPairing::VacuumSelf { module, theta } => {
                let ginv = module.gram_inv(level);
                (0..module.dim(level))
                    .map(|j| {
                        let left = module.basis_vector(level, j);
                        // (CΘ)⁻¹ b_j^∨ = Θ(Σ_k (G⁻¹)_{kj} b_k)
                        let mut col = ModuleVector::zero(module.clone());
                        for k in 0..module.dim(level) {
                            col.comps[level][k] = ginv.at(k, j).clone();
                        }
                        let right = theta.apply(&col);
                        (left, right)
                    })
                    .collect()
            }
        }
    }

    pub fn module_name(&self) -> &str {
        match self {
            SewPairing::DualPair { module, .. } => &module.name,
            SewPairing::VacuumSelf { module, .. } => &module.name,
        }
    }

    /// L₀ − L̃₀ on the sewn module (the q^{offset} of standard sewing).
    pub fn offset(&self) -> BigRational {
        match self {
            SewPairing::DualPair { module, .. } => module.lowest_weight.clone(),
            SewPairing::VacuumSelf { module, .. } => module.lowest_weight.clone(),
        }
    }
}

/// A sewing series Σ_n c_n q^{offset+n} with its admissibility radii.
#[derive(Clone, Debug)]
pub struct QSeries {
    pub exponent_offset: BigRational,
    /// Input-independent symbolic prefactor (from the two blocks).
    pub prefactor: SymbolicFactor,
    pub coeffs: Vec<Exact>,
    pub truncation: usize,
    /// Squared radii (r², ρ²) of the sewing schedule, exact.
    pub radius_sqr: (BigRational, BigRational),
    /// All coefficients exact within the blocks' windows.
    pub window_ok: bool,
}

impl QSeries {
    /// Is q admissible, i.e. q² < r²ρ²?
    pub fn admissible(&self, q: &BigRational) -> bool {
        (q * q) < &self.radius_sqr.0 * &self.radius_sqr.1
    }

    /// Exact partial sum Σ c_n qⁿ (without q^{offset} or the prefactor).
    pub fn partial_sum(&self, q: &BigRational) -> Exact {
        let qx = Exact::from_rat(q.clone());
        let mut acc = Exact::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * &qx) + c;
        }
        acc
    }

    /// Full value as a symbolic factor: prefactor · q^{offset} · partial sum,
    /// plus a geometric tail estimate fitted from the last coefficients.
    pub fn eval(&self, q: &BigRational) -> (SymbolicFactor, f64) {
        let mut f = self.prefactor.clone();
        if !self.exponent_offset.is_zero() {
            f.mul_pos_rational_pow(q, &self.exponent_offset);
        }
        f.mul_exact(&self.partial_sum(q));
        (f, self.tail_estimate(q))
    }

    /// Geometric tail bound fitted from the trailing coefficients (diagnostic).
    pub fn tail_estimate(&self, q: &BigRational) -> f64 {
        let n = self.coeffs.len();
        if n < 3 {
            return 0.0;
        }
        let qf = q.to_f64().unwrap_or(f64::NAN);
        let mags: Vec<f64> = self.coeffs.iter().map(|c| c.abs_f64()).collect();
        let mut rate: f64 = 0.0;
        let mut count = 0;
        for k in (n.saturating_sub(4))..n - 1 {
            if mags[k] > 0.0 && mags[k + 1] > 0.0 {
                rate = rate.max(mags[k + 1] / mags[k]);
                count += 1;
            }
        }
        if count == 0 {
            return 0.0;
        }
        let x = rate * qf;
        if x >= 1.0 {
            return f64::INFINITY;
        }
        mags[n - 1] * qf.powi(n as i32 - 1) * x / (1.0 - x)
    }
}

/// Contract two block functionals along one slot each.
///
/// `left_inputs` and `right_inputs` carry the non-sewn arguments in order;
/// the sewn slot positions are `left_slot`, `right_slot`.
pub struct SewJob<'a> {
    pub left: &'a BlockFunctional,
    pub right: &'a BlockFunctional,
    pub left_slot: usize,
    pub right_slot: usize,
    pub pairing: &'a SewPairing,
    /// Squared radii of the two coordinate discs (exact bookkeeping).
    pub radius_sqr: (BigRational, BigRational),
}

pub fn sew_pair(
    job: &SewJob<'_>,
    left_inputs: &[&ModuleVector],
    right_inputs: &[&ModuleVector],
    truncation: usize,
) -> Result<QSeries, SewError> {
    // slot checks
    let lmod = &job.left.slots[job.left_slot].module;
    let rmod = &job.right.slots[job.right_slot].module;
    match job.pairing {
        SewPairing::DualPair { module, dual } => {
            if !Arc::ptr_eq(lmod, module) {
                return Err(SewError::SlotMismatch(format!(
                    "left slot carries {}, expected {}",
                    lmod.name, module.name
                )));
            }
            if !Arc::ptr_eq(rmod, dual) {
                return Err(SewError::SlotMismatch(format!(
                    "right slot carries {}, expected {}",
                    rmod.name, dual.name
                )));
            }
        }
        SewPairing::VacuumSelf { module, .. } => {
            for (side, m) in [("left", lmod), ("right", rmod)] {
                if !Arc::ptr_eq(m, module) {
                    return Err(SewError::SlotMismatch(format!(
                        "{side} slot carries {}, expected vacuum {}",
                        m.name, module.name
                    )));
                }
            }
        }
    }
    let mut coeffs = Vec::with_capacity(truncation + 1);
    let mut window_ok = true;
    for n in 0..=truncation {
        let mut acc = Exact::zero();
        for (bl, br) in job.pairing.kernel(n) {
            let lv = eval_with_insert(job.left, left_inputs, job.left_slot, &bl)?;
            if lv.0.is_zero() {
                window_ok &= lv.1;
                continue;
            }
            let rv = eval_with_insert(job.right, right_inputs, job.right_slot, &br)?;
            window_ok &= lv.1 && rv.1;
            acc += &(&lv.0 * &rv.0);
        }
        coeffs.push(acc);
    }
    let mut prefactor = job.left.prefactor.clone();
    prefactor.mul(&job.right.prefactor);
    Ok(QSeries {
        exponent_offset: job.pairing.offset(),
        prefactor,
        coeffs,
        truncation,
        radius_sqr: job.radius_sqr.clone(),
        window_ok,
    })
}

fn eval_with_insert(
    phi: &BlockFunctional,
    fixed: &[&ModuleVector],
    slot: usize,
    insert: &ModuleVector,
) -> Result<(Exact, bool), SewError> {
    let mut inputs: Vec<&ModuleVector> = Vec::with_capacity(phi.arity());
    let mut kf = 0usize;
    for k in 0..phi.arity() {
        if k == slot {
            inputs.push(insert);
        } else {
            inputs.push(fixed[kf]);
            kf += 1;
        }
    }
    let (v, win) = phi.eval_exact(&inputs)?;
    Ok((v, win.discarded == 0))
}

/// Double sewing: contract `middle` with `left` along (left_slot, m_left) and
/// with `right` along (m_right, right_slot), both at q = 1, summing levels
/// (n, k) ≤ truncation. Returns the value and the order-swap check.
pub struct DoubleSewJob<'a> {
    pub left: &'a BlockFunctional,
    pub middle: &'a BlockFunctional,
    pub right: &'a BlockFunctional,
    pub left_slot: usize,
    pub m_left: usize,
    pub m_right: usize,
    pub right_slot: usize,
    pub pairing_left: &'a SewPairing,
    pub pairing_right: &'a SewPairing,
    /// (r₁², ρ₁², r₂², ρ₂²) — both products must exceed 1 for q = 1.
    pub radii_sqr: (BigRational, BigRational, BigRational, BigRational),
}

pub struct DoubleSewValue {
    pub value: Exact,
    pub prefactor: SymbolicFactor,
    pub swapped_equal: bool,
    pub window_ok: bool,
}

pub fn double_sew(
    job: &DoubleSewJob<'_>,
    left_inputs: &[&ModuleVector],
    middle_inputs: &[&ModuleVector],
    right_inputs: &[&ModuleVector],
    truncation: usize,
) -> Result<DoubleSewValue, SewError> {
    let one = BigRational::from_integer(1.into());
    if &job.radii_sqr.0 * &job.radii_sqr.1 <= one || &job.radii_sqr.2 * &job.radii_sqr.3 <= one {
        return Err(SewError::RadiusCondition);
    }
    let mut window_ok = true;
    // sum over (n, k): left(b_n) · middle(b_n^∨-side, c_k) · right(c_k-side)
    let mut totals_nk = Exact::zero(); // n outer, k inner
    let mut totals_kn = Exact::zero(); // k outer, n inner
    let mut terms: Vec<Vec<Exact>> = Vec::new();
    for n in 0..=truncation {
        let mut row = Vec::new();
        for k in 0..=truncation {
            let mut acc = Exact::zero();
            for (bl, bm_left) in job.pairing_left.kernel(n) {
                let lv = eval_with_insert(job.left, left_inputs, job.left_slot, &bl)?;
                window_ok &= lv.1;
                if lv.0.is_zero() {
                    continue;
                }
                for (bm_right, br) in job.pairing_right.kernel(k) {
                    // middle with both insertions
                    let mv = eval_middle(job.middle, middle_inputs, job.m_left, &bm_left, job.m_right, &bm_right)?;
                    window_ok &= mv.1;
                    if mv.0.is_zero() {
                        continue;
                    }
                    let rv = eval_with_insert(job.right, right_inputs, job.right_slot, &br)?;
                    window_ok &= rv.1;
                    acc += &(&(&lv.0 * &mv.0) * &rv.0);
                }
            }
            row.push(acc);
        }
        terms.push(row);
    }
    for n in 0..=truncation {
        for k in 0..=truncation {
            totals_nk += &terms[n][k];
        }
    }
    for k in 0..=truncation {
        for n in 0..=truncation {
            totals_kn += &terms[n][k];
        }
    }
    let mut prefactor = job.left.prefactor.clone();
    prefactor.mul(&job.middle.prefactor);
    prefactor.mul(&job.right.prefactor);
    Ok(DoubleSewValue {
        value: totals_nk.clone(),
        prefactor,
        swapped_equal: totals_nk == totals_kn,
        window_ok,
    })
}

fn eval_middle(
    phi: &BlockFunctional,
    fixed: &[&ModuleVector],
    slot_a: usize,
    insert_a: &ModuleVector,
    slot_b: usize,
    insert_b: &ModuleVector,
) -> Result<(Exact, bool), SewError> {
    let mut inputs: Vec<&ModuleVector> = Vec::with_capacity(phi.arity());
    let mut kf = 0usize;
    for k in 0..phi.arity() {
        if k == slot_a {
            inputs.push(insert_a);
        } else if k == slot_b {
            inputs.push(insert_b);
        } else {
            inputs.push(fixed[kf]);
            kf += 1;
        }
    }
    let (v, win) = phi.eval_exact(&inputs)?;
    Ok((v, win.discarded == 0))
}

/// Successive-ratio diagnostics for a q-series.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub ratios: Vec<f64>,
    pub fitted_rate: f64,
    /// 1/rate: the empirical radius of convergence.
    pub fitted_radius: f64,
    pub monotone_decreasing_tail: bool,
    /// rρ from the schedule, for comparison.
    pub schedule_radius: f64,
}

pub fn convergence_report(s: &QSeries) -> ConvergenceReport {
    let mags: Vec<f64> = s.coeffs.iter().map(|c| c.abs_f64()).collect();
    let mut ratios = Vec::new();
    for k in 0..mags.len().saturating_sub(1) {
        if mags[k] > 0.0 {
            ratios.push(mags[k + 1] / mags[k]);
        } else {
            ratios.push(0.0);
        }
    }
    // least-squares slope of log|c_n| over the trailing half (zeros skipped)
    let half = mags.len() / 2;
    let pts: Vec<(f64, f64)> = mags
        .iter()
        .enumerate()
        .skip(half)
        .filter(|(_, &m)| m > 0.0)
        .map(|(n, &m)| (n as f64, m.ln()))
        .collect();
    let fitted_rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-12 {
            0.0
        } else {
            ((n * sxy - sx * sy) / denom).exp()
        }
    } else {
        0.0
    };
    let fitted_radius = if fitted_rate > 0.0 { 1.0 / fitted_rate } else { f64::INFINITY };
    let tail = &mags[mags.len().saturating_sub(4)..];
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let schedule_radius = {
        let rr = (&s.radius_sqr.0 * &s.radius_sqr.1).to_f64().unwrap_or(f64::NAN);
        rr.sqrt()
    };
    ConvergenceReport {
        ratios,
        fitted_rate,
        fitted_radius,
        monotone_decreasing_tail: monotone,
        schedule_radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn geometric_series(a: (i64, i64), t: usize) -> QSeries {
        let base = Exact::from_frac(a.0, a.1);
        let mut coeffs = Vec::new();
        let mut cur = Exact::one();
        for _ in 0..=t {
            coeffs.push(cur.clone());
            cur = &cur * &base;
        }
        QSeries {
            exponent_offset: BigRational::zero(),
            prefactor: SymbolicFactor::one(),
            coeffs,
            truncation: t,
            radius_sqr: (rat(4, 1), rat(4, 1)),
            window_ok: true,
        }
    }

    #[test]
    fn partial_sum_and_tail() {
        // c_n = (1/2)^n at q = 1/2: partial sum → 4/3, tail within 2× of truth
        let s = geometric_series((1, 2), 16);
        let q = rat(1, 2);
        let got = s.partial_sum(&q);
        // exact: Σ_{n≤16} 4^{-n} = (1 − 4^{-17})/(3/4)
        let tail_true = 0.25f64.powi(17) / (1.0 - 0.25) * 1.0;
        let est = s.tail_estimate(&q);
        assert!(est > 0.0 && est <= 2.0 * tail_true * (1.0 + 1e-9), "tail {est} vs {tail_true}");
        let (refre, _) = got.to_f64();
        assert!((refre - (1.0 - 0.25f64.powi(17)) / 0.75).abs() < 1e-12);
    }

    #[test]
    fn convergence_rate_fit() {
        let s = geometric_series((2, 3), 16);
        let rep = convergence_report(&s);
        assert!((rep.fitted_rate - 2.0 / 3.0).abs() < 0.05 * (2.0 / 3.0));
        assert!((rep.fitted_radius - 1.5).abs() < 0.1);
    }

    #[test]
    fn polynomial_series_rate_zero() {
        let mut s = geometric_series((1, 2), 8);
        for c in s.coeffs.iter_mut().skip(3) {
            *c = Exact::zero();
        }
        let rep = convergence_report(&s);
        assert_eq!(rep.fitted_rate, 0.0);
    }
}
