//! Genus-0 conformal blocks realized through intertwining operators: basic
//! blocks on positive trinions, coordinate dressings, conjugates, the residue
//! (Jacobi) identity checker, and the derived intertwiner operations.
//!
//! A block functional is never an abstract functional: it is a concrete
//! realization (intertwiner table + dressings + symbolic prefactor), the only
//! finite representation at genus 0.

use crate::coords::{apply_u, CoordChange};
use crate::error::BlockError;
use crate::fock::IntertwinerTable;
use crate::module::{
    apply_exp_lowering, apply_exp_raising, ConjugationMap, GradedModule, ModeFamily, ModeOperator,
    ModuleVector, Window,
};
use crate::scalar::Exact;
use crate::series::{omega_map, Mobius, Point};
use crate::symfactor::SymbolicFactor;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use std::sync::Arc;

/// The two exact involutions of the sphere used for self-conjugate data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Involution {
    /// z ↦ conj(z), equator = ℝ.
    ConjZ,
    /// z ↦ 1/conj(z), equator = unit circle.
    ConjInvZ,
}

impl Involution {
    pub fn apply(&self, p: &Point) -> Point {
        match self {
            Involution::ConjZ => p.conj(),
            Involution::ConjInvZ => p.inv_conj(),
        }
    }

    /// Pullback of a coordinate: η*(w) = conj(η(w*)).
    pub fn pullback(&self, m: &Mobius) -> Mobius {
        match self {
            Involution::ConjZ => m.conj(),
            Involution::ConjInvZ => m.conj().compose(&Mobius::inversion()),
        }
    }
}

/// A 3-pointed sphere with Möbius coordinates and self-conjugacy data.
#[derive(Clone, Debug)]
pub struct Trinion {
    pub points: [Point; 3],
    pub coords: [Mobius; 3],
    pub involution: Involution,
}

fn mobius_projectively_equal(a: &Mobius, b: &Mobius) -> bool {
    let pairs = [(&a.a, &b.a), (&a.b, &b.b), (&a.c, &b.c), (&a.d, &b.d)];
    let lam = match pairs.iter().find(|(_, y)| !y.is_zero()) {
        Some((x, y)) => {
            if x.is_zero() {
                return false;
            }
            *x / *y
        }
        None => return false,
    };
    pairs.iter().all(|(x, y)| **x == &lam * *y)
}

impl Trinion {
    /// The standard positive trinion (ℙ¹; 0, ∞, i; ζ, 1/ζ, ϖ).
    pub fn standard() -> Self {
        Trinion {
            points: [Point::finite(Exact::zero()), Point::Infinity, Point::finite(Exact::i())],
            coords: [Mobius::identity(), Mobius::inversion(), omega_map()],
            involution: Involution::ConjInvZ,
        }
    }

    /// Validate the positive-trinion conditions; returns a reason on failure.
    pub fn check_positive(&self) -> Result<(), BlockError> {
        let inv = &self.involution;
        if inv.apply(&self.points[0]) != self.points[1] {
            return Err(BlockError::NotPositiveTrinion(
                "involution does not exchange the first two marked points".into(),
            ));
        }
        if inv.apply(&self.points[2]) != self.points[2] {
            return Err(BlockError::NotPositiveTrinion(
                "involution does not fix the third marked point".into(),
            ));
        }
        // η₂ = η₁* and η₃ = η₃* (as maps)
        if !mobius_projectively_equal(&self.coords[1], &inv.pullback(&self.coords[0])) {
            return Err(BlockError::NotPositiveTrinion(
                "second coordinate is not the conjugate of the first".into(),
            ));
        }
        if !mobius_projectively_equal(&self.coords[2], &inv.pullback(&self.coords[2])) {
            return Err(BlockError::NotPositiveTrinion(
                "third coordinate is not involution-fixed".into(),
            ));
        }
        // Imag(η₃(x₁)) < 0
        match self.coords[2].eval(&self.points[0]) {
            Point::Finite(v) if v.im.is_negative() => Ok(()),
            _ => Err(BlockError::NotPositiveTrinion("Imag(eta3(x1)) is not negative".into())),
        }
    }

    /// |η₃(x₁)|² — the square of the sewing radius this trinion admits.
    pub fn radius_sqr(&self) -> Result<BigRational, BlockError> {
        match self.coords[2].eval(&self.points[0]) {
            Point::Finite(v) => Ok(v.norm_sqr()),
            Point::Infinity => Err(BlockError::NotPositiveTrinion("eta3(x1) = infinity".into())),
        }
    }
}

/// Per-slot context: the module and its Virasoro family.
#[derive(Clone)]
pub struct SlotCtx {
    pub module: Arc<GradedModule>,
    pub l: Arc<ModeFamily>,
}

/// The standard-trinion evaluator for a module W:
/// (w₁, x₂, v) ↦ ⟨Y_W(2^{L₀} e^{−i L₁} v, i) w₁, x₂⟩ with x₂ ∈ W′ dual coords.
pub struct StandardTrinionCore {
    /// α = 0 table realizing Y_W: V ⊗ W → W.
    pub table: Arc<IntertwinerTable>,
    /// L₁ on V, for the e^{−iL₁} dressing of the insertion.
    pub v_l1: ModeOperator,
}

impl StandardTrinionCore {
    /// The dressed insertion 2^{L₀} e^{−iL₁} v (exact: integer V-weights).
    pub fn dress_insertion(&self, v: &ModuleVector) -> Result<ModuleVector, BlockError> {
        let minus_i = -Exact::i();
        let lowered = apply_exp_lowering(&[(minus_i, &self.v_l1)], v)?;
        // 2^{L₀} on V: scale level n by 2^n
        let mut out = lowered;
        let mut pw = Exact::one();
        for n in 0..out.comps.len() {
            if n > 0 {
                pw = &pw * &Exact::from_i64(2);
            }
            for x in out.comps[n].iter_mut() {
                *x = &*x * &pw;
            }
        }
        Ok(out)
    }

    pub fn eval(
        &self,
        w1: &ModuleVector,
        x2: &ModuleVector,
        v: &ModuleVector,
    ) -> Result<(Exact, Window), BlockError> {
        let dressed = self.dress_insertion(v)?;
        let (img, win) = self.table.apply(&dressed, &Exact::i(), w1);
        // pairing truncation: x2 components above the table window are lost
        let ok = x2.top_level().map(|t| t <= win.max_level).unwrap_or(true);
        let window = Window {
            max_level: win.max_level,
            discarded: if ok { 0 } else { 1 },
        };
        Ok((img.pair(x2), window))
    }
}

/// Realization tree of a block functional.
pub enum Realization {
    /// ⟨w₁, x₂⟩ on (ℙ¹; 0, ∞; ζ, 1/ζ): slot 0 in W, slot 1 in W′ (dual coords).
    Pairing,
    /// Basic-block core on the standard positive trinion: slots (W, W′, V).
    StandardTrinion(StandardTrinionCore),
    /// Charged intertwiner block on (ℙ¹; 0, z, ∞): slots (W₁=F_β, W₂=F_α, W₃′).
    /// Value ⟨𝒴(w₂, z)w₁, x₃⟩ (without the z^{αβ} prefactor, which lives in
    /// the functional's symbolic prefactor).
    ChargedTrinion { table: Arc<IntertwinerTable>, z: Exact },
    /// Inner functional preceded by per-slot dressings U(ρᵢ) (exact parts;
    /// fractional λ^{h} prefactors were moved into the functional prefactor).
    Dressed { inner: Box<BlockFunctional>, dressings: Vec<Option<CoordChange>> },
    /// Inner functional on e^{τᵢ L₋₁}-shifted arguments (windowed).
    Translated { inner: Box<BlockFunctional>, shifts: Vec<Exact>, lm1: Vec<ModeOperator> },
    /// Conjugate functional: slots are the duals; value conj(inner(C⁻¹x•)).
    Conjugate { inner: Box<BlockFunctional>, to_inner: Vec<ConjugationMap> },
}

/// A conformal block functional: slot contexts, realization, and the
/// input-independent symbolic prefactor.
pub struct BlockFunctional {
    pub slots: Vec<SlotCtx>,
    pub realization: Realization,
    pub prefactor: SymbolicFactor,
}

impl BlockFunctional {
    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    /// Exact part of the evaluation (full value = prefactor × this).
    pub fn eval_exact(&self, inputs: &[&ModuleVector]) -> Result<(Exact, Window), BlockError> {
        assert_eq!(inputs.len(), self.arity(), "arity mismatch");
        for (k, w) in inputs.iter().enumerate() {
            assert!(
                Arc::ptr_eq(&w.module, &self.slots[k].module),
                "slot {k} expects module {}",
                self.slots[k].module.name
            );
        }
        match &self.realization {
            Realization::Pairing => {
                Ok((inputs[0].pair(inputs[1]), Window::full(self.slots[0].module.cutoff)))
            }
            Realization::StandardTrinion(core) => core.eval(inputs[0], inputs[1], inputs[2]),
            Realization::ChargedTrinion { table, z } => {
                let (img, win) = table.apply(inputs[1], z, inputs[0]);
                let ok = inputs[2].top_level().map(|t| t <= win.max_level).unwrap_or(true);
                let window =
                    Window { max_level: win.max_level, discarded: if ok { 0 } else { 1 } };
                Ok((img.pair(inputs[2]), window))
            }
            Realization::Dressed { inner, dressings } => {
                let mut dressed: Vec<ModuleVector> = Vec::with_capacity(inputs.len());
                for (k, w) in inputs.iter().enumerate() {
                    match &dressings[k] {
                        Some(cc) => dressed.push(apply_u(cc, &self.slots[k].l, w)?),
                        None => dressed.push((*w).clone()),
                    }
                }
                let refs: Vec<&ModuleVector> = dressed.iter().collect();
                inner.eval_exact(&refs)
            }
            Realization::Translated { inner, shifts, lm1 } => {
                let mut out_window = Window::full(usize::MAX);
                let mut shifted: Vec<ModuleVector> = Vec::with_capacity(inputs.len());
                for (k, w) in inputs.iter().enumerate() {
                    if shifts[k].is_zero() {
                        shifted.push((*w).clone());
                        continue;
                    }
                    let (img, win) = apply_exp_raising(&[(shifts[k].clone(), &lm1[k])], w)?;
                    out_window = out_window.intersect(&win);
                    shifted.push(img);
                }
                let refs: Vec<&ModuleVector> = shifted.iter().collect();
                let (val, win) = inner.eval_exact(&refs)?;
                Ok((val, out_window.intersect(&win)))
            }
            Realization::Conjugate { inner, to_inner } => {
                let mut mapped: Vec<ModuleVector> = Vec::with_capacity(inputs.len());
                for (k, x) in inputs.iter().enumerate() {
                    mapped.push(to_inner[k].apply(x));
                }
                let refs: Vec<&ModuleVector> = mapped.iter().collect();
                let (val, win) = inner.eval_exact(&refs)?;
                Ok((val.conj(), win))
            }
        }
    }

    /// Full value as a symbolic factor (prefactor × exact part).
    pub fn eval(&self, inputs: &[&ModuleVector]) -> Result<(SymbolicFactor, Window), BlockError> {
        let (x, win) = self.eval_exact(inputs)?;
        let mut f = self.prefactor.clone();
        f.mul_exact(&x);
        Ok((f, win))
    }

    /// Access the pieces of a top-level dressed realization, for callers that
    /// dress inputs once and evaluate the inner functional many times.
    pub fn as_dressed(&self) -> Option<(&BlockFunctional, &[Option<CoordChange>])> {
        match &self.realization {
            Realization::Dressed { inner, dressings } => Some((inner, dressings)),
            _ => None,
        }
    }
}

/// Everything needed to build blocks for one unitary module W: the module, its
/// dual, conjugations, Virasoro families, and the α = 0 table realizing Y_W.
pub struct ModuleBlockCtx {
    pub module: Arc<GradedModule>,
    pub dual: Arc<GradedModule>,
    pub conj: ConjugationMap,
    pub l: Arc<ModeFamily>,
    pub table: Arc<IntertwinerTable>,
    /// V-side data shared by all modules of the model.
    pub v_module: Arc<GradedModule>,
    pub v_l: Arc<ModeFamily>,
}

/// ω_{W,P}: reduce P to the standard trinion by the unique Möbius map sending
/// (0, ∞, i) to the marked points, and dress with U₀ under the paired-argument
/// rule (the first two derivatives are conjugate; their fractional powers
/// combine to |λ|^{2h} > 0 with no argument choice needed).
pub fn basic_block(ctx: &ModuleBlockCtx, p: &Trinion) -> Result<BlockFunctional, BlockError> {
    p.check_positive()?;
    let f = Mobius::from_three_points(&p.points[0], &p.points[1], &p.points[2]);
    let f_inv = f.inverse();
    let std = Trinion::standard();
    // dressings ρᵢ = η̃ᵢ ∘ μᵢ^{-1}, η̃ᵢ = (standard coord)ᵢ ∘ F^{-1}
    let order = ctx.module.cutoff.max(ctx.v_module.cutoff) + 1;
    let mut dressings: Vec<Option<CoordChange>> = Vec::with_capacity(3);
    let mut lambdas: Vec<Exact> = Vec::with_capacity(3);
    for i in 0..3 {
        let eta_tilde = std.coords[i].compose(&f_inv);
        let rho_map = eta_tilde.compose(&p.coords[i].inverse());
        let cc = CoordChange::from_mobius(&rho_map, &Point::finite(Exact::zero()), order)?;
        lambdas.push(cc.lambda.clone());
        dressings.push(Some(cc));
    }
    // eq-45-style consistency: the first two derivatives are conjugate
    if lambdas[0] != lambdas[1].conj() {
        return Err(BlockError::NotPositiveTrinion(
            "dressing derivatives at the exchanged points are not conjugate".into(),
        ));
    }
    let mut prefactor = SymbolicFactor::one();
    let h = &ctx.module.lowest_weight;
    if !h.is_zero() {
        prefactor.mul_conj_pair(&lambdas[0], h);
    }
    let core = StandardTrinionCore {
        table: ctx.table.clone(),
        v_l1: ctx.v_l.get(1).expect("L_1 on V").clone(),
    };
    let slots = vec![
        SlotCtx { module: ctx.module.clone(), l: ctx.l.clone() },
        SlotCtx {
            module: ctx.dual.clone(),
            l: Arc::new(dual_l_family(&ctx.l, &ctx.module, &ctx.dual)),
        },
        SlotCtx { module: ctx.v_module.clone(), l: ctx.v_l.clone() },
    ];
    let inner = BlockFunctional {
        slots: slots.clone(),
        realization: Realization::StandardTrinion(core),
        prefactor: SymbolicFactor::one(),
    };
    Ok(BlockFunctional {
        slots,
        realization: Realization::Dressed { inner: Box::new(inner), dressings },
        prefactor,
    })
}

/// Virasoro family on the dual module: L′_n = (L_{−n})ᵀ.
pub fn dual_l_family(
    l: &ModeFamily,
    module: &Arc<GradedModule>,
    dual: &Arc<GradedModule>,
) -> ModeFamily {
    let _ = module;
    let mut out = ModeFamily::default();
    for (&n, op) in &l.ops {
        let mut t = op.transpose(dual.clone(), dual.clone());
        t.name = format!("L'_{}", -n);
        out.insert(-n, t);
    }
    out
}

/// Conjugate block φ*: slots become the duals, value is conj ∘ φ ∘ C⁻¹.
pub fn conjugate_block(
    phi: BlockFunctional,
    conjugations: Vec<ConjugationMap>,
) -> BlockFunctional {
    assert_eq!(conjugations.len(), phi.arity());
    let slots: Vec<SlotCtx> = phi
        .slots
        .iter()
        .zip(conjugations.iter())
        .map(|(s, c)| {
            assert!(Arc::ptr_eq(&c.target, &s.module), "conjugation must land in the slot module");
            SlotCtx { module: c.source.clone(), l: s.l.clone() }
        })
        .collect();
    // slot L-families for the dual side are not used by Conjugate evaluation;
    // keep the inner ones for structural completeness.
    let prefactor = phi.prefactor.conj();
    BlockFunctional {
        slots,
        realization: Realization::Conjugate { inner: Box::new(phi), to_inner: conjugations },
        prefactor,
    }
}

/// Translate a block: φ_τ(w•) = φ(e^{τ₁L₋₁}w₁ ⊗ …), truncation-windowed.
pub fn translate_block(
    phi: BlockFunctional,
    shifts: Vec<Exact>,
    lm1: Vec<ModeOperator>,
) -> BlockFunctional {
    assert_eq!(shifts.len(), phi.arity());
    let slots = phi.slots.clone();
    let prefactor = phi.prefactor.clone();
    BlockFunctional {
        slots,
        realization: Realization::Translated { inner: Box::new(phi), shifts, lm1 },
        prefactor,
    }
}

/// Outcome of the proportionality test against a basic block.
#[derive(Debug)]
pub struct Proportionality {
    /// φ = λ·ω on the spanning set; `None` when φ vanishes there.
    pub ratio: Option<SymbolicFactor>,
    pub strictly_positive: bool,
    pub zero: bool,
    /// Exact proportionality held on every probed input.
    pub consistent: bool,
}

/// Decide the sign class of φ against ω = basic_block on the same trinion by
/// probing the diagonal w ⊗ Cw ⊗ 𝟙 and a spanning set.
pub fn proportionality_test(
    phi: &BlockFunctional,
    omega: &BlockFunctional,
    conj: &ConjugationMap,
    probes: &[ModuleVector],
    vacuum: &ModuleVector,
) -> Result<Proportionality, BlockError> {
    let mut ratio: Option<(SymbolicFactor, SymbolicFactor)> = None;
    let mut consistent = true;
    let mut all_zero = true;
    for w in probes {
        let cw = conj.apply(w);
        let inputs = [w, &cw, vacuum];
        let (pv, pw) = phi.eval(&inputs)?;
        let (ov, ow) = omega.eval(&inputs)?;
        if pw.discarded != 0 || ow.discarded != 0 {
            return Err(BlockError::WindowExceeded("proportionality probe".into()));
        }
        if ov.is_zero() {
            if !pv.is_zero() {
                consistent = false;
            }
            continue;
        }
        if !pv.is_zero() {
            all_zero = false;
        }
        match &ratio {
            None => ratio = Some((pv, ov)),
            Some((p0, o0)) => {
                // cross-check p0·ov == pv·o0 exactly (scalar proportionality)
                let mut lhs = p0.clone();
                lhs.mul(&ov);
                let mut rhs = pv.clone();
                rhs.mul(o0);
                let mut l = lhs.clone();
                l.canonicalize();
                let mut r = rhs.clone();
                r.canonicalize();
                if l != r {
                    consistent = false;
                }
            }
        }
    }
    let lam = ratio.map(|(p, o)| {
        let mut l = p;
        l.mul(&o.inv());
        l.canonicalize();
        l
    });
    let strictly_positive =
        lam.as_ref().map(|l| l.is_certainly_positive()).unwrap_or(false) && !all_zero;
    Ok(Proportionality { ratio: lam, strictly_positive, zero: all_zero, consistent })
}

/// Rational function with poles only at the marked points {0, z, ∞} of the
/// charged trinion: f = Σ pⱼζʲ + Σ cₖ ζ^{−k} + Σ dₖ (ζ−z)^{−k}.
#[derive(Clone, Debug)]
pub struct MarkedRational {
    pub poly: Vec<Exact>,
    pub pole0: Vec<Exact>,
    pub polez: Vec<Exact>,
}

impl MarkedRational {
    /// Laurent coefficients f_{0,n} at ζ = 0, for n in [lo, hi].
    pub fn coeffs_at_zero(&self, z: &Exact, lo: i64, hi: i64) -> Vec<(i64, Exact)> {
        let mut out = Vec::new();
        for n in lo..=hi {
            let mut acc = Exact::zero();
            if n >= 0 {
                if let Some(p) = self.poly.get(n as usize) {
                    acc += p;
                }
                // (ζ−z)^{−k} = (−1)^k z^{−k} Σ_j C(k+j−1, j) (ζ/z)^j
                for (kk, d) in self.polez.iter().enumerate() {
                    let k = kk + 1;
                    if d.is_zero() {
                        continue;
                    }
                    let sign = if k % 2 == 0 { Exact::one() } else { -Exact::one() };
                    let c = crate::fock::binom_c_pub(k, n as usize);
                    let term = &(&(&sign * d) * &c) * &z.powi(-(k as i64) - n);
                    acc += &term;
                }
            }
            if n < 0 {
                let k = (-n) as usize;
                if let Some(c) = self.pole0.get(k - 1) {
                    acc += c;
                }
            }
            out.push((n, acc));
        }
        out
    }

    /// Laurent coefficients f_{z,n} in t = ζ − z, for n in [lo, hi].
    pub fn coeffs_at_z(&self, z: &Exact, lo: i64, hi: i64) -> Vec<(i64, Exact)> {
        let mut out = Vec::new();
        for n in lo..=hi {
            let mut acc = Exact::zero();
            if n >= 0 {
                // poly(z + t): coefficient of t^n is Σ_j C(j, n) p_j z^{j−n}
                for (j, p) in self.poly.iter().enumerate() {
                    if p.is_zero() || (j as i64) < n {
                        continue;
                    }
                    let c = binom_exact(j as i64, n);
                    acc += &(&(p * &c) * &z.powi(j as i64 - n));
                }
                // ζ^{−k} = (z+t)^{−k} = z^{−k} Σ_j (−1)^j C(k+j−1,j) (t/z)^j
                for (kk, c0) in self.pole0.iter().enumerate() {
                    let k = kk + 1;
                    if c0.is_zero() {
                        continue;
                    }
                    let sign = if n % 2 == 0 { Exact::one() } else { -Exact::one() };
                    let c = crate::fock::binom_c_pub(k, n as usize);
                    acc += &(&(&(c0 * &sign) * &c) * &z.powi(-(k as i64) - n));
                }
            } else {
                let k = (-n) as usize;
                if let Some(d) = self.polez.get(k - 1) {
                    acc += d;
                }
            }
            out.push((n, acc));
        }
        out
    }

    /// Coefficients f_{∞,n} of ζ^n for |ζ| large, n in [lo, hi].
    pub fn coeffs_at_infinity(&self, z: &Exact, lo: i64, hi: i64) -> Vec<(i64, Exact)> {
        let mut out = Vec::new();
        for n in lo..=hi {
            let mut acc = Exact::zero();
            if n >= 0 {
                if let Some(p) = self.poly.get(n as usize) {
                    acc += p;
                }
            } else {
                let k = (-n) as usize;
                if let Some(c) = self.pole0.get(k - 1) {
                    acc += c;
                }
                // (ζ−z)^{−kk} = Σ_j C(kk+j−1, j) z^j ζ^{−kk−j}: ζ^{−k} term j = k−kk
                for (kki, d) in self.polez.iter().enumerate() {
                    let kk = kki + 1;
                    if d.is_zero() || kk > k {
                        continue;
                    }
                    let j = k - kk;
                    let c = crate::fock::binom_c_pub(kk, j);
                    acc += &(&(d * &c) * &z.powi(j as i64));
                }
            }
            out.push((n, acc));
        }
        out
    }
}

fn binom_exact(n: i64, k: i64) -> Exact {
    let mut acc = BigRational::from_integer(1.into());
    for t in 0..k {
        acc *= BigRational::from_integer((n - t).into());
        acc /= BigRational::from_integer((t + 1).into());
    }
    Exact::from_rat(acc)
}

/// Violation report of the residue identity.
#[derive(Debug)]
pub struct JacobiReport {
    pub exact_pass: bool,
    pub lhs: Exact,
    pub rhs: Exact,
    pub window_ok: bool,
}

/// Context bundling the three α = 0 tables needed to move a V-insertion
/// through the charged trinion (ℙ¹; 0, z, ∞) with modules (W₁, W₂, W₃′).
pub struct JacobiCtx {
    /// charged table: W₂-insertions acting W₁ → W₃.
    pub charged: Arc<IntertwinerTable>,
    /// Y on W₁ (α=0 table V⊗W₁→W₁).
    pub y1: Arc<IntertwinerTable>,
    /// Y on W₂.
    pub y2: Arc<IntertwinerTable>,
    /// Y on W₃.
    pub y3: Arc<IntertwinerTable>,
    /// L₁ on V (for Y′ mode assembly on the ∞ side).
    pub v_l: Arc<ModeFamily>,
    pub z: Exact,
}

/// Y′(v)_n = Σ_j (−1)^{h}/j! · Y(L₁ʲv)_{2h−j−n−2} for homogeneous v of
/// weight h: the list of (coefficient, dressed insertion, mode index) terms.
pub fn y_prime_terms(
    v_l1: &ModeOperator,
    v: &ModuleVector,
    h: usize,
    n: i64,
) -> Result<Vec<(Exact, ModuleVector, i64)>, BlockError> {
    let mut out = Vec::new();
    let sign = if h % 2 == 0 { Exact::one() } else { -Exact::one() };
    let mut cur = v.clone();
    let mut fact = BigRational::from_integer(1.into());
    for j in 0..=h as i64 {
        if cur.is_zero() {
            break;
        }
        let coef = &sign * &Exact::from_rat(BigRational::from_integer(1.into()) / fact.clone());
        let mode = 2 * h as i64 - j - n - 2;
        out.push((coef, cur.clone(), mode));
        let (next, _) = v_l1.apply(&cur)?;
        cur = next;
        fact *= BigRational::from_integer((j + 1).into());
    }
    Ok(out)
}

/// Evaluate both sides of the residue identity for f, v, and inputs
/// (w₁, w₂, x₃); exact verdict within the window.
pub fn jacobi_residue_check(
    ctx: &JacobiCtx,
    f: &MarkedRational,
    v: &ModuleVector,
    v_weight: usize,
    w1: &ModuleVector,
    w2: &ModuleVector,
    x3: &ModuleVector,
) -> Result<JacobiReport, BlockError> {
    let z = &ctx.z;
    let tgt_cut = ctx.charged.tgt_max.min(ctx.charged.tgt.cutoff) as i64;
    let h = v_weight as i64;
    let x3top = x3.top_level().unwrap_or(0) as i64;
    let w1top = w1.top_level().unwrap_or(0) as i64;
    let w2top = w2.top_level().unwrap_or(0) as i64;
    let mut window_ok = true;

    // LHS: Σ_n f_{∞,n} ⟨Y_{W₃}(v)_n 𝒴(w₂,z)w₁, x₃⟩ with the mode applied to
    // the truncated completion X = 𝒴(w₂,z)w₁. The pairing needs X-levels
    // m = lvl(x₃) + n + 1 − p (p = weight of the v-part); any such m above the
    // stored window invalidates exactness.
    let n_lo_inf = -(x3top + h + 2);
    let n_hi_inf = (f.poly.len() as i64).max(tgt_cut + h);
    let f_inf = f.coeffs_at_infinity(z, n_lo_inf, n_hi_inf);
    let (base_img, base_win) = ctx.charged.apply(w2, z, w1);
    window_ok &= base_win.discarded == 0;
    let mut lhs = Exact::zero();
    for (n, fc) in &f_inf {
        if fc.is_zero() {
            continue;
        }
        // exactness: source levels needed beyond the window?
        for p in 0..=h {
            if v.comps.get(p as usize).map(|c| c.iter().any(|x| !x.is_zero())).unwrap_or(false) {
                let m_needed = x3top + n + 1 - p;
                if m_needed > tgt_cut {
                    window_ok = false;
                }
            }
        }
        let (img, win) = apply_table_mode(&ctx.y3, v, v_weight, *n, &base_img, x3top as usize)?;
        window_ok &= win.discarded == 0;
        lhs += &(&img.pair(x3) * fc);
    }

    // RHS term at 0 (module W₁): Σ_n f_{0,n} ⟨𝒴(w₂,z)(Y_{W₁}(v)_n w₁), x₃⟩
    let n_lo_0 = -(f.pole0.len() as i64);
    let n_hi_0 = w1top + h - 1; // Y(v)_n w₁ = 0 beyond
    let f_0 = f.coeffs_at_zero(z, n_lo_0, n_hi_0);
    let mut rhs = Exact::zero();
    for (n, fc) in &f_0 {
        if fc.is_zero() {
            continue;
        }
        let (yw1, win) = apply_table_mode(&ctx.y1, v, v_weight, *n, w1, usize::MAX)?;
        window_ok &= win.discarded == 0;
        if yw1.is_zero() {
            continue;
        }
        if yw1.top_level().unwrap_or(0) > ctx.charged.src_max {
            window_ok = false;
        }
        let (img, win2) = ctx.charged.apply(w2, z, &yw1);
        window_ok &= win2.discarded == 0;
        rhs += &(&img.pair(x3) * fc);
    }
    // RHS term at z (module W₂): Σ_n f_{z,n} ⟨𝒴(Y_{W₂}(v)_n w₂, z)w₁, x₃⟩
    let n_lo_z = -(f.polez.len() as i64);
    let n_hi_z = w2top + h - 1;
    let f_z = f.coeffs_at_z(z, n_lo_z, n_hi_z);
    for (n, fc) in &f_z {
        if fc.is_zero() {
            continue;
        }
        let (yw2, win) = apply_table_mode(&ctx.y2, v, v_weight, *n, w2, usize::MAX)?;
        window_ok &= win.discarded == 0;
        if yw2.is_zero() {
            continue;
        }
        if yw2.top_level().unwrap_or(0) > ctx.charged.u_max {
            window_ok = false;
        }
        let (img, win2) = ctx.charged.apply(&yw2, z, w1);
        window_ok &= win2.discarded == 0;
        rhs += &(&img.pair(x3) * fc);
    }
    let exact_pass = window_ok && lhs == rhs;
    Ok(JacobiReport { exact_pass, lhs, rhs, window_ok })
}

/// Apply the mode Y(v)_n (v possibly inhomogeneous of top weight h) from an
/// α = 0 table to a vector. Truncation above the table window is flagged only
/// when the lost levels are ≤ `needed_top` (the depth the caller will read).
fn apply_table_mode(
    table: &IntertwinerTable,
    v: &ModuleVector,
    v_weight: usize,
    n: i64,
    w: &ModuleVector,
    needed_top: usize,
) -> Result<(ModuleVector, Window), BlockError> {
    let mut out = ModuleVector::zero(table.tgt.clone());
    let mut window = Window::full(table.tgt_max);
    for p in 0..=v_weight.min(v.module.cutoff) {
        for (ui, uc) in v.comps[p].iter().enumerate() {
            if uc.is_zero() {
                continue;
            }
            let shift = p as i64 - n - 1;
            for m in 0..w.comps.len() {
                if w.comps[m].iter().all(|x| x.is_zero()) {
                    continue;
                }
                let l = m as i64 + shift;
                if l < 0 {
                    continue;
                }
                if l as usize > table.tgt_max.min(table.tgt.cutoff) {
                    if l as usize <= needed_top {
                        window.discarded += 1;
                    }
                    continue;
                }
                if let Some(b) = table.block(p, ui, m, l as usize) {
                    let img = b.apply(&w.comps[m]);
                    for (t, x) in img.into_iter().enumerate() {
                        if !x.is_zero() {
                            out.comps[l as usize][t] += &(&x * uc);
                        }
                    }
                }
            }
        }
    }
    Ok((out, window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::vacuum;
    use crate::model::{charge_ctx, vacuum_ctx};
    use crate::scalar::rat;

    fn standard_omega(alpha: (i64, i64), w_cut: usize, v_cut: usize) -> (crate::model::VacuumCtx, crate::model::ChargeCtx, BlockFunctional) {
        let vac = vacuum_ctx(v_cut);
        let ch = charge_ctx(&vac, &rat(alpha.0, alpha.1), w_cut);
        let ctx = ch.block_ctx(&vac);
        let omega = basic_block(&ctx, &Trinion::standard()).unwrap();
        (vac, ch, omega)
    }

    #[test]
    fn standard_block_vacuum_insertion_is_inner_product() {
        // ω(w₁ ⊗ Cw₂ ⊗ 𝟙) = ⟨w₁|w₂⟩
        let (vac, ch, omega) = standard_omega((1, 2), 3, 4);
        let one = vacuum(&vac.fock.module);
        for lvl in 0..=3usize {
            for idx in 0..ch.fock.module.dim(lvl) {
                for lvl2 in 0..=3usize {
                    for idx2 in 0..ch.fock.module.dim(lvl2) {
                        let w1 = ch.fock.module.basis_vector(lvl, idx);
                        let w2 = ch.fock.module.basis_vector(lvl2, idx2).scale(&Exact::gaussian(1, 3, 1, 2));
                        let cw2 = ch.dual.conj.apply(&w2);
                        let (val, win) = omega.eval(&[&w1, &cw2, &one]).unwrap();
                        assert_eq!(win.discarded, 0);
                        let want = w1.inner(&w2);
                        assert_eq!(val.to_exact().unwrap(), want);
                    }
                }
            }
        }
    }

    #[test]
    fn standard_block_conformal_vector_matches_direct_element() {
        // ω(w₁ ⊗ Cw₂ ⊗ c) = ⟨Y(2^{L₀}e^{−iL₁}c, i)w₁|w₂⟩; e^{−iL₁}c = c, so the
        // insertion is 4c and the matrix element is 4·⟨Y(c,i)w₁|w₂⟩.
        let (vac, ch, omega) = standard_omega((1, 2), 4, 4);
        let c = crate::fock::conformal_vector(&vac.fock);
        let w1 = ch.fock.module.basis_vector(1, 0);
        let w2 = ch.fock.module.basis_vector(1, 0);
        let cw2 = ch.dual.conj.apply(&w2);
        let (val, _) = omega.eval(&[&w1, &cw2, &c]).unwrap();
        // direct route: Σ_n i^{1−n}... via the table at z = i on the dressed c
        let (img, _) = ch.table.apply(&c.scale(&Exact::from_i64(4)), &Exact::i(), &w1);
        let wanted = img.pair(&ch.dual.conj.apply(&w2));
        assert_eq!(val.to_exact().unwrap(), wanted);
        // and the L₀-weight consistency: nonzero
        assert!(!val.is_zero());
    }

    #[test]
    fn self_conjugacy_of_basic_block() {
        // conj ω(w₂ ⊗ Cw₁ ⊗ Θv) = ω(w₁ ⊗ Cw₂ ⊗ v)
        let (vac, ch, omega) = standard_omega((1, 2), 3, 4);
        let theta = &vac.theta;
        let mut probes: Vec<(ModuleVector, ModuleVector, ModuleVector)> = Vec::new();
        let w1 = ch.fock.module.basis_vector(2, 1).scale(&Exact::gaussian(1, 1, 1, 3));
        let w2 = ch.fock.module.basis_vector(1, 0).scale(&Exact::gaussian(0, 1, -2, 5));
        let v = vac.fock.module.basis_vector(2, 0).add(&vacuum(&vac.fock.module));
        probes.push((w1, w2, v));
        let w1 = ch.fock.module.basis_vector(3, 2);
        let w2 = ch.fock.module.basis_vector(3, 0);
        let v = vac.fock.module.basis_vector(3, 1);
        probes.push((w1, w2, v));
        for (w1, w2, v) in probes {
            let cw1 = ch.dual.conj.apply(&w1);
            let cw2 = ch.dual.conj.apply(&w2);
            let tv = theta.apply(&v);
            let (lhs, _) = omega.eval(&[&w2, &cw1, &tv]).unwrap();
            let (rhs, _) = omega.eval(&[&w1, &cw2, &v]).unwrap();
            assert_eq!(lhs.to_exact().unwrap().conj(), rhs.to_exact().unwrap());
        }
    }

    #[test]
    fn dressed_trinion_diagonal_positive() {
        // a non-standard positive trinion with rational data: same points, but
        // first coordinate λζ/(1−τζ) and its conjugate at ∞.
        let vac = vacuum_ctx(5);
        let ch = charge_ctx(&vac, &rat(1, 2), 3);
        let ctx = ch.block_ctx(&vac);
        let lam = Exact::gaussian(2, 1, 1, 1); // 2 + i
        let tau = Exact::gaussian(1, 3, -1, 2);
        let eta1 = Mobius::new(lam.clone(), Exact::zero(), -&tau, Exact::one());
        let inv = Involution::ConjInvZ;
        let eta2 = inv.pullback(&eta1);
        let tri = Trinion {
            points: [Point::finite(Exact::zero()), Point::Infinity, Point::finite(Exact::i())],
            coords: [eta1, eta2, omega_map()],
            involution: inv,
        };
        tri.check_positive().unwrap();
        let omega = basic_block(&ctx, &tri).unwrap();
        let one = vacuum(&vac.fock.module);
        for lvl in 0..=3usize {
            for idx in 0..ch.fock.module.dim(lvl) {
                let w = ch.fock.module.basis_vector(lvl, idx).scale(&Exact::gaussian(3, 2, -1, 7));
                let cw = ch.dual.conj.apply(&w);
                let (val, win) = omega.eval(&[&w, &cw, &one]).unwrap();
                assert_eq!(win.discarded, 0);
                assert!(val.is_certainly_positive(), "diagonal value not positive: {val:?}");
            }
        }
    }

    #[test]
    fn non_positive_trinion_rejected() {
        // swap the roles of x₁ and x₂: Imag(η₃(x₁)) > 0 → not positive
        let tri = Trinion {
            points: [Point::Infinity, Point::finite(Exact::zero()), Point::finite(Exact::i())],
            coords: [Mobius::inversion(), Mobius::identity(), omega_map()],
            involution: Involution::ConjInvZ,
        };
        assert!(tri.check_positive().is_err());
    }

    #[test]
    fn proportionality_of_scaled_block() {
        let (vac, ch, omega) = standard_omega((1, 2), 3, 4);
        let ctx = ch.block_ctx(&vac);
        let omega2 = basic_block(&ctx, &Trinion::standard()).unwrap();
        // φ = 2·ω
        let mut phi = omega2;
        phi.prefactor.mul_exact(&Exact::from_i64(2));
        let probes: Vec<ModuleVector> = (0..=2usize)
            .flat_map(|lvl| {
                (0..ch.fock.module.dim(lvl))
                    .map(|i| ch.fock.module.basis_vector(lvl, i))
                    .collect::<Vec<_>>()
            })
            .collect();
        let one = vacuum(&vac.fock.module);
        let report = proportionality_test(&phi, &omega, &ch.dual.conj, &probes, &one).unwrap();
        assert!(report.consistent);
        assert!(report.strictly_positive);
        assert_eq!(report.ratio.unwrap().to_exact().unwrap(), Exact::from_i64(2));
    }

    #[test]
    fn jacobi_identity_exact_on_charged_trinion() {
        use crate::fock::{fock_intertwiner, TableModules};
        let alpha = rat(1, 2);
        let beta = rat(1, 2);
        // charged table 𝒴: F_α ⊗ F_β → F_{α+β}, z = 1
        let it = fock_intertwiner(&alpha, &beta, 4, 4, 8);
        let vcut = 3usize;
        let vac = vacuum_ctx(vcut);
        // α=0 tables on the three modules
        let y1 = IntertwinerTable::build(
            &TableModules {
                op_module: &vac.fock.module,
                op_a: &vac.fock.a,
                src: &it.src_fock.module,
                src_a: &it.src_fock.a,
                src_charge: beta.clone(),
                tgt: &it.src_fock.module,
                tgt_a: &it.src_fock.a,
                tgt_charge: beta.clone(),
            },
            vcut, 4, 4,
        );
        let y2 = IntertwinerTable::build(
            &TableModules {
                op_module: &vac.fock.module,
                op_a: &vac.fock.a,
                src: &it.op_fock.module,
                src_a: &it.op_fock.a,
                src_charge: alpha.clone(),
                tgt: &it.op_fock.module,
                tgt_a: &it.op_fock.a,
                tgt_charge: alpha.clone(),
            },
            vcut, 4, 4,
        );
        let y3 = IntertwinerTable::build(
            &TableModules {
                op_module: &vac.fock.module,
                op_a: &vac.fock.a,
                src: &it.tgt_fock.module,
                src_a: &it.tgt_fock.a,
                src_charge: &alpha + &beta,
                tgt: &it.tgt_fock.module,
                tgt_a: &it.tgt_fock.a,
                tgt_charge: &alpha + &beta,
            },
            vcut, 8, 8,
        );
        let tgt_dual = crate::module::contragredient_module(&it.tgt_fock.module);
        let ctx = JacobiCtx {
            charged: Arc::new(it.table),
            y1: Arc::new(y1),
            y2: Arc::new(y2),
            y3: Arc::new(y3),
            v_l: Arc::new(vac.fock.l.clone()),
            z: Exact::one(),
        };
        // f = 1 (constant): trivial exactness; then poles of order ≤ 2
        let fs = [
            MarkedRational { poly: vec![Exact::one()], pole0: vec![], polez: vec![] },
            MarkedRational {
                poly: vec![Exact::zero(), Exact::one()],
                pole0: vec![Exact::from_frac(1, 2)],
                polez: vec![],
            },
            MarkedRational {
                poly: vec![Exact::from_frac(2, 3)],
                pole0: vec![Exact::zero(), Exact::from_i64(1)],
                polez: vec![Exact::from_i64(1), Exact::from_frac(-1, 3)],
            },
        ];
        let w1 = it.src_fock.module.basis_vector(1, 0);
        let w2 = it.op_fock.module.basis_vector(0, 0);
        let x3 = tgt_dual.basis_vector(1, 0);
        // v runs over V-basis through weight 2
        for vlvl in 0..=2usize {
            for vidx in 0..vac.fock.module.dim(vlvl) {
                let v = vac.fock.module.basis_vector(vlvl, vidx);
                for f in &fs {
                    let rep = jacobi_residue_check(&ctx, f, &v, vlvl, &w1, &w2, &x3).unwrap();
                    assert!(rep.window_ok, "window not satisfied for v level {vlvl}");
                    assert!(
                        rep.exact_pass,
                        "jacobi fails: v level {vlvl} idx {vidx}: lhs={} rhs={}",
                        rep.lhs, rep.rhs
                    );
                }
            }
        }
    }
}
