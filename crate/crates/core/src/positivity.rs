//! Positivity of fusion products on the free-boson model: reflection-positive
//! Gram matrices from sewn basic blocks, the transport-operator fit from the
//! fusion relation, the λ-proportionality between the two, and the q → 0
//! degeneration identity.

use crate::blocks::{basic_block, Involution, Trinion};
use crate::coords::CoordChange;
use crate::deep::{DeepInsertion, DeepIntertwiner, PartitionRegistry};
use crate::error::FitError;
use crate::fock::{build_fock, FockSpec, IntertwinerTable, TableModules};
use crate::matrix::{psd_check_exact, ExactMatrix, PsdVerdict};
use crate::model::{ChargeCtx, VacuumCtx};
use crate::module::{apply_exp_lowering, apply_lambda_ltilde, ModuleVector, RectMatrix};
use crate::scalar::Exact;
use crate::series::{Mobius, Point};
use crate::symfactor::SymbolicFactor;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// The trinion family at a rational parameter s ∈ (1/√2, 1):
/// t = (1−s)/(1+s), with the sewing geometry used throughout.
pub struct TrinionFamily {
    pub s: BigRational,
    pub t: BigRational,
    /// (ℙ¹; ti, −ti, ∞; ϖ+si, ϖ⁻¹−si, 1/ζ)
    pub p: Trinion,
    /// (ℙ¹; 0, ∞, i; ζ, 1/ζ, ϖ) — the standard positive trinion.
    pub q: Trinion,
}

impl TrinionFamily {
    pub fn new(s: &BigRational) -> Result<Self, FitError> {
        let one = BigRational::one();
        let two = BigRational::from_integer(2.into());
        if !(s < &one && &(s * s) * &two > one) {
            return Err(FitError::BadParameter(format!(
                "s = {s} outside the admissible window 1/sqrt(2) < s < 1"
            )));
        }
        let t = (&one - s) / (&one + s);
        let i = Exact::i();
        let sx = Exact::from_rat(s.clone());
        let tx = Exact::from_rat(t.clone());
        let one_x = Exact::one();
        // ϖ + si = [i(1+s)ζ + (1−s)] / (ζ + i)
        let eta1 = Mobius::new(
            &i * &(&one_x + &sx),
            &one_x - &sx,
            Exact::one(),
            i.clone(),
        );
        // ϖ⁻¹ − si = [−i(1+s)ζ + (1−s)] / (ζ − i)
        let eta2 = Mobius::new(
            -&(&i * &(&one_x + &sx)),
            &one_x - &sx,
            Exact::one(),
            -&i,
        );
        let p = Trinion {
            points: [
                Point::finite(&tx * &i),
                Point::finite(-&(&tx * &i)),
                Point::Infinity,
            ],
            coords: [eta1, eta2, Mobius::inversion()],
            involution: Involution::ConjZ,
        };
        p.check_positive().map_err(FitError::Block)?;
        let q = Trinion::standard();
        q.check_positive().map_err(FitError::Block)?;
        Ok(TrinionFamily { s: s.clone(), t, p, q })
    }

    /// Squared radii (δ², ρ²) of the vacuum sewing channel: δ = 1/t, ρ = 1.
    pub fn radii_sqr(&self) -> (BigRational, BigRational) {
        let one = BigRational::one();
        ((&one / &self.t) * (&one / &self.t), one)
    }
}

/// The Gram report of a reflection-positivity run.
pub struct GramReport {
    pub matrix: ExactMatrix,
    /// Common positive prefactor of all entries (factored out of `matrix`).
    pub prefactor: SymbolicFactor,
    pub verdict: PsdVerdict,
    pub hermitian: bool,
    pub q: BigRational,
    pub truncation: usize,
    /// Manifest of the vector pairs indexing the matrix.
    pub pair_labels: Vec<String>,
    /// Per-coefficient decay magnitudes (diagnostics).
    pub level_norms: Vec<f64>,
    pub window_ok: bool,
}

/// Per-level coefficient matrices of ω_{W₁′,P} #_q ω_{W₂,Q} on the pair set:
/// entry [l][k] of `levels[n]` is the level-n contraction coefficient of
/// (Cw_l ⊗ w_k ⊗ w̃_k ⊗ Cw̃_l); the q-series Gram is Σ_n qⁿ·levels[n].
pub struct GramLevels {
    pub levels: Vec<ExactMatrix>,
    pub prefactor: SymbolicFactor,
    pub window_ok: bool,
    pub radius_sqr: (BigRational, BigRational),
}

pub fn fusion_gram_levels(
    vac: &VacuumCtx,
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    fam: &TrinionFamily,
    pairs: &[(ModuleVector, ModuleVector)],
    truncation: usize,
) -> Result<GramLevels, FitError> {
    let omega_p = basic_block(&ch1.dual_block_ctx(vac), &fam.p).map_err(FitError::Block)?;
    let omega_q = basic_block(&ch2.block_ctx(vac), &fam.q).map_err(FitError::Block)?;
    let n_pairs = pairs.len();
    let (core_p, dr_p) = omega_p.as_dressed().expect("basic block is dressed");
    let (core_q, dr_q) = omega_q.as_dressed().expect("basic block is dressed");
    let dress = |cc: &Option<CoordChange>,
                 slot: &crate::blocks::SlotCtx,
                 v: &ModuleVector|
     -> Result<ModuleVector, FitError> {
        match cc {
            Some(cc) => crate::coords::apply_u(cc, &slot.l, v).map_err(FitError::Block),
            None => Ok(v.clone()),
        }
    };
    let mut cw = Vec::with_capacity(n_pairs);
    let mut wk = Vec::with_capacity(n_pairs);
    let mut wtk = Vec::with_capacity(n_pairs);
    let mut cwt = Vec::with_capacity(n_pairs);
    for (w, wt) in pairs {
        cw.push(dress(&dr_p[0], &omega_p.slots[0], &ch1.dual.conj.apply(w))?);
        wk.push(dress(&dr_p[1], &omega_p.slots[1], w)?);
        wtk.push(dress(&dr_q[0], &omega_q.slots[0], wt)?);
        cwt.push(dress(&dr_q[1], &omega_q.slots[1], &ch2.dual.conj.apply(wt))?);
    }
    let top = truncation.min(vac.fock.module.cutoff);
    let vdim: usize = (0..=top).map(|n| vac.fock.module.dim(n)).sum();
    let flat = |lvl: usize, idx: usize| -> usize {
        (0..lvl).map(|n| vac.fock.module.dim(n)).sum::<usize>() + idx
    };
    let core_p_st = match &core_p.realization {
        crate::blocks::Realization::StandardTrinion(c) => c,
        _ => unreachable!("basic block core"),
    };
    let core_q_st = match &core_q.realization {
        crate::blocks::Realization::StandardTrinion(c) => c,
        _ => unreachable!("basic block core"),
    };
    let mut window_ok = true;
    // M_P[b][l][k] = core_P(cw_l ⊗ wk_k ⊗ b) for basis insertions b, computed
    // from one table image per (b, l); same on the Q side.
    let mut m_p = vec![Exact::zero(); vdim * n_pairs * n_pairs];
    let mut m_q = vec![Exact::zero(); vdim * n_pairs * n_pairs];
    for lvl in 0..=top {
        for idx in 0..vac.fock.module.dim(lvl) {
            let b = vac.fock.module.basis_vector(lvl, idx);
            let fb = flat(lvl, idx);
            let dvp = core_p_st.dress_insertion(&b).map_err(FitError::Block)?;
            let dvq = core_q_st.dress_insertion(&b).map_err(FitError::Block)?;
            for l in 0..n_pairs {
                let (img, win) = core_p_st.table.apply(&dvp, &Exact::i(), &cw[l]);
                window_ok &= win.discarded == 0;
                for k in 0..n_pairs {
                    m_p[(fb * n_pairs + l) * n_pairs + k] = img.pair(&wk[k]);
                }
            }
            for k in 0..n_pairs {
                let (img, win) = core_q_st.table.apply(&dvq, &Exact::i(), &wtk[k]);
                window_ok &= win.discarded == 0;
                for l in 0..n_pairs {
                    m_q[(fb * n_pairs + k) * n_pairs + l] = img.pair(&cwt[l]);
                }
            }
        }
    }
    // kernel contraction per level, ρ₃-dressings folded into the kernel
    let mut levels = Vec::with_capacity(top + 1);
    for n in 0..=top {
        let mut contrib = vec![Exact::zero(); n_pairs * n_pairs];
        for (b_left, b_right) in vacuum_kernel(vac, n) {
            let dl = dress(&dr_p[2], &omega_p.slots[2], &b_left)?;
            let drv = dress(&dr_q[2], &omega_q.slots[2], &b_right)?;
            let mut terms_l: Vec<(usize, Exact)> = Vec::new();
            for lvl in 0..=top {
                for (idx, c) in dl.comps[lvl].iter().enumerate() {
                    if !c.is_zero() {
                        terms_l.push((flat(lvl, idx), c.clone()));
                    }
                }
            }
            let mut terms_r: Vec<(usize, Exact)> = Vec::new();
            for lvl in 0..=top {
                for (idx, c) in drv.comps[lvl].iter().enumerate() {
                    if !c.is_zero() {
                        terms_r.push((flat(lvl, idx), c.clone()));
                    }
                }
            }
            for l in 0..n_pairs {
                for k in 0..n_pairs {
                    let mut a = Exact::zero();
                    for (fb, c) in &terms_l {
                        let v = &m_p[(fb * n_pairs + l) * n_pairs + k];
                        if !v.is_zero() {
                            a += &(v * c);
                        }
                    }
                    if a.is_zero() {
                        continue;
                    }
                    let mut b = Exact::zero();
                    for (fb, c) in &terms_r {
                        let v = &m_q[(fb * n_pairs + k) * n_pairs + l];
                        if !v.is_zero() {
                            b += &(v * c);
                        }
                    }
                    contrib[l * n_pairs + k] += &(&a * &b);
                }
            }
        }
        levels.push(ExactMatrix { dim: n_pairs, entries: contrib });
    }
    let mut prefactor = omega_p.prefactor.clone();
    prefactor.mul(&omega_q.prefactor);
    Ok(GramLevels { levels, prefactor, window_ok, radius_sqr: fam.radii_sqr() })
}

/// Assemble the Gram matrix at a specific q from per-level coefficients.
pub fn assemble_gram(gl: &GramLevels, q: &BigRational) -> Result<GramReport, FitError> {
    let rr = &gl.radius_sqr.0 * &gl.radius_sqr.1;
    if !(q.is_positive() && &(q * q) < &rr) {
        return Err(FitError::Sew(crate::error::SewError::OutOfRange {
            q: q.to_string(),
            limit: format!("sqrt({})", rr),
        }));
    }
    let n_pairs = gl.levels.first().map(|m| m.dim).unwrap_or(0);
    let mut entries = vec![Exact::zero(); n_pairs * n_pairs];
    let mut level_norms = Vec::with_capacity(gl.levels.len());
    let mut qpow = Exact::one();
    let qx = Exact::from_rat(q.clone());
    for (n, lev) in gl.levels.iter().enumerate() {
        if n > 0 {
            qpow = &qpow * &qx;
        }
        let mut norm = 0.0f64;
        for (e, c) in entries.iter_mut().zip(lev.entries.iter()) {
            let weighted = c * &qpow;
            norm += weighted.abs_f64().powi(2);
            *e += &weighted;
        }
        level_norms.push(norm.sqrt());
    }
    let matrix = ExactMatrix { dim: n_pairs, entries };
    let hermitian = matrix.is_hermitian();
    let verdict = psd_check_exact(&matrix).map_err(FitError::Numerics)?;
    Ok(GramReport {
        matrix,
        prefactor: gl.prefactor.clone(),
        verdict,
        hermitian,
        q: q.clone(),
        truncation: gl.levels.len().saturating_sub(1),
        pair_labels: (0..n_pairs).map(|k| format!("pair{k}")).collect(),
        level_norms,
        window_ok: gl.window_ok,
    })
}

/// ω_{W₁′,P} #_q ω_{W₂,Q} contracted over the vacuum channel, evaluated on all
/// pairs (w_k ⊗ w̃_k), with the PSD verdict of the resulting Gram matrix.
pub fn fusion_gram(
    vac: &VacuumCtx,
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    fam: &TrinionFamily,
    pairs: &[(ModuleVector, ModuleVector)],
    q: &BigRational,
    truncation: usize,
) -> Result<GramReport, FitError> {
    let gl = fusion_gram_levels(vac, ch1, ch2, fam, pairs, truncation)?;
    assemble_gram(&gl, q)
}

/// Kernel of the vacuum sewing channel at a level, via the CΘ identification:
/// pairs (b_j, Θ(Σ_k (G⁻¹)_{kj} b_k)).
pub fn vacuum_kernel(vac: &VacuumCtx, level: usize) -> Vec<(ModuleVector, ModuleVector)> {
    let module = &vac.fock.module;
    let ginv = module.gram_inv(level);
    (0..module.dim(level))
        .map(|j| {
            let left = module.basis_vector(level, j);
            let mut col = ModuleVector::zero(module.clone());
            for k in 0..module.dim(level) {
                col.comps[level][k] = ginv.at(k, j).clone();
            }
            let right = vac.theta.apply(&col);
            (left, right)
        })
        .collect()
}

/// All basis pairs (w, w̃) with levels ≤ the given bounds.
pub fn basis_pairs(
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    max1: usize,
    max2: usize,
) -> Vec<(ModuleVector, ModuleVector)> {
    let mut out = Vec::new();
    for l1 in 0..=max1.min(ch1.fock.module.cutoff) {
        for i1 in 0..ch1.fock.module.dim(l1) {
            for l2 in 0..=max2.min(ch2.fock.module.cutoff) {
                for i2 in 0..ch2.fock.module.dim(l2) {
                    out.push((
                        ch1.fock.module.basis_vector(l1, i1),
                        ch2.fock.module.basis_vector(l2, i2),
                    ));
                }
            }
        }
    }
    out
}

/// The q → 0 leading coefficient of a diagonal Gram entry factorizes into the
/// two single-block evaluations; both factors are strictly positive.
pub struct DegenerationReport {
    pub coefficient: Exact,
    pub factor_p: Exact,
    pub factor_q: Exact,
    pub factors_positive: bool,
    pub exact_product: bool,
}

pub fn degeneration_limit(
    vac: &VacuumCtx,
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    fam: &TrinionFamily,
    w: &ModuleVector,
    wt: &ModuleVector,
) -> Result<DegenerationReport, FitError> {
    let omega_p = basic_block(&ch1.dual_block_ctx(vac), &fam.p).map_err(FitError::Block)?;
    let omega_q = basic_block(&ch2.block_ctx(vac), &fam.q).map_err(FitError::Block)?;
    let cw = ch1.dual.conj.apply(w);
    let cwt = ch2.dual.conj.apply(wt);
    let one_v = crate::fock::vacuum(&vac.fock.module);
    let (fp, _) = omega_p.eval_exact(&[&cw, w, &one_v]).map_err(FitError::Block)?;
    let (fq, _) = omega_q.eval_exact(&[wt, &cwt, &one_v]).map_err(FitError::Block)?;
    // the level-0 kernel is (𝟙, 𝟙) with weight 1, so c₀ = fp·fq exactly
    let kernel0 = vacuum_kernel(vac, 0);
    let (b_left, b_right) = &kernel0[0];
    let (gp, _) = omega_p.eval_exact(&[&cw, w, b_left]).map_err(FitError::Block)?;
    let (gq, _) = omega_q.eval_exact(&[wt, &cwt, b_right]).map_err(FitError::Block)?;
    let coefficient = &gp * &gq;
    let factors_positive = {
        // full factors carry the blocks' positive prefactors; positivity of the
        // exact parts is what varies with the inputs
        let p_pos = fp.is_real() && fp.re.is_positive();
        let q_pos = fq.is_real() && fq.re.is_positive();
        p_pos && q_pos
    };
    Ok(DegenerationReport {
        exact_product: coefficient == &fp * &fq,
        coefficient,
        factor_p: fp,
        factor_q: fq,
        factors_positive,
    })
}

/// Rescaling q = q₁·q₂ into the third coordinates (the q = 1 reduction):
/// returns the Gram recomputed in the rescaled configuration for an exact
/// equality check against the direct q-run.
pub fn reduction_q_split(
    vac: &VacuumCtx,
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    fam: &TrinionFamily,
    pairs: &[(ModuleVector, ModuleVector)],
    q1: &BigRational,
    q2: &BigRational,
    truncation: usize,
) -> Result<ExactMatrix, FitError> {
    // dressing the third slots by q₁^{L₀}, q₂^{L₀} multiplies the level-n
    // kernel contribution by (q₁q₂)ⁿ; realize literally by scaling insertions.
    let omega_p = basic_block(&ch1.dual_block_ctx(vac), &fam.p).map_err(FitError::Block)?;
    let omega_q = basic_block(&ch2.block_ctx(vac), &fam.q).map_err(FitError::Block)?;
    let n_pairs = pairs.len();
    let cw: Vec<ModuleVector> = pairs.iter().map(|(w, _)| ch1.dual.conj.apply(w)).collect();
    let cwt: Vec<ModuleVector> = pairs.iter().map(|(_, wt)| ch2.dual.conj.apply(wt)).collect();
    let mut entries = vec![Exact::zero(); n_pairs * n_pairs];
    let q1x = Exact::from_rat(q1.clone());
    let q2x = Exact::from_rat(q2.clone());
    for n in 0..=truncation.min(vac.fock.module.cutoff) {
        for (b_left, b_right) in vacuum_kernel(vac, n) {
            let bl = apply_lambda_ltilde(&q1x, &b_left);
            let br = apply_lambda_ltilde(&q2x, &b_right);
            for l in 0..n_pairs {
                for k in 0..n_pairs {
                    let (a, _) = omega_p
                        .eval_exact(&[&cw[l], &pairs[k].0, &bl])
                        .map_err(FitError::Block)?;
                    if a.is_zero() {
                        continue;
                    }
                    let (b, _) = omega_q
                        .eval_exact(&[&pairs[k].1, &cwt[l], &br])
                        .map_err(FitError::Block)?;
                    entries[l * n_pairs + k] += &(&a * &b);
                }
            }
        }
    }
    Ok(ExactMatrix { dim: n_pairs, entries })
}

/// Identification ι: W′ → F_{−α} intertwining the Heisenberg action, with
/// ι(C𝟙_α) = 𝟙_{−α}: per-level basis-change matrices.
pub struct DualIdentification {
    pub neg_fock: crate::fock::FockModule,
    /// per level: matrix sending dual coordinates to F_{−α} coordinates.
    pub maps: Vec<RectMatrix>,
}

pub fn dual_identification(ch: &ChargeCtx) -> DualIdentification {
    let cutoff = ch.fock.module.cutoff;
    let neg_fock = build_fock(&FockSpec { alpha: -ch.alpha.clone(), cutoff });
    let mut maps = Vec::with_capacity(cutoff + 1);
    for n in 0..=cutoff {
        let dim = ch.dual.module.dim(n);
        // words a′_{−λ} C𝟙 in dual coordinates
        let mut word_mat = RectMatrix::zeros(dim, dim);
        for (j, lam) in crate::fock::partitions(n).iter().enumerate() {
            let mut v = ch.dual.module.basis_vector(0, 0); // C𝟙 = unit dual vector
            for &part in lam.iter().rev() {
                let op = ch.dual.a.get(-(part as i64)).expect("dual creation mode");
                let (img, _) = op.apply(&v).expect("dual word stays in window");
                v = img;
            }
            for r in 0..dim {
                word_mat[(r, j)] = v.comps[n][r].clone();
            }
        }
        // ι sends word j to the j-th monomial of F_{−α}: ι = Id ∘ word_mat⁻¹
        maps.push(word_mat.inverse());
    }
    DualIdentification { neg_fock, maps }
}

impl DualIdentification {
    pub fn apply(&self, x: &ModuleVector) -> ModuleVector {
        let mut out = ModuleVector::zero(self.neg_fock.module.clone());
        for n in 0..x.comps.len() {
            if x.comps[n].iter().all(|c| c.is_zero()) {
                continue;
            }
            out.comps[n] = self.maps[n].apply(&x.comps[n]);
        }
        out
    }
}

/// U₀(ϑ_{s⁻¹i})⁻¹ C v on W′, exact part (the fractional s^{−α²} is returned
/// separately by the callers that need it): (s²)^{−L̃₀} e^{−s⁻¹ i L₁}(Cv).
pub fn annihilation_side_dressing(
    ch: &ChargeCtx,
    s: &BigRational,
    v: &ModuleVector,
) -> Result<ModuleVector, FitError> {
    let cv = ch.dual.conj.apply(v);
    let s_inv_i = &Exact::i() / &Exact::from_rat(s.clone());
    let l1 = ch.dual_l.get(1).expect("L1 on the dual");
    let lowered = apply_exp_lowering(&[(-&s_inv_i, l1)], &cv)
        .map_err(|e| FitError::Block(crate::error::BlockError::Module(e)))?;
    let scale = Exact::from_rat((s * s).clone()).inv();
    Ok(apply_lambda_ltilde(&scale, &lowered))
}

/// Result of the transport-operator fit.
pub struct TransportFit {
    /// Scalar A as (positive symbolic factor)·(exact rational part).
    pub a_symbolic: SymbolicFactor,
    pub a_exact: Exact,
    pub a_float: f64,
    /// Relative residual √(Σ|L − A·R|² / Σ|L|²).
    pub residual: f64,
    pub residual_sqr: BigRational,
    pub depth: usize,
    pub equations: usize,
    pub positive: bool,
}

/// Probe tuples (w₁, v₁, w₂, w̃₂) from levels ≤ 1 of the two modules.
fn transport_probes(
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
) -> Vec<(ModuleVector, ModuleVector, ModuleVector, ModuleVector)> {
    let mut w1s = vec![ch1.fock.module.basis_vector(0, 0)];
    if ch1.fock.module.cutoff >= 1 {
        w1s.push(ch1.fock.module.basis_vector(1, 0));
    }
    let mut w2s = vec![ch2.fock.module.basis_vector(0, 0)];
    if ch2.fock.module.cutoff >= 1 {
        w2s.push(ch2.fock.module.basis_vector(1, 0));
    }
    let mut out = Vec::new();
    for w1 in &w1s {
        for v1 in &w1s {
            for w2 in &w2s {
                for wt2 in &w2s {
                    out.push((w1.clone(), v1.clone(), w2.clone(), wt2.clone()));
                }
            }
        }
    }
    out
}

/// Shared context for the deep two-sided computations.
pub struct TransportCtx {
    pub alpha: BigRational,
    pub beta: BigRational,
    pub s: BigRational,
    pub depth: usize,
    pub reg: PartitionRegistry,
    /// Π table (small windows, both for deep base cases and eq-83 checks).
    pub pi_small: IntertwinerTable,
    /// Γ-side table: (−α, α) intertwiner with small windows.
    pub gamma_small: IntertwinerTable,
    pub pi_op_fock: crate::fock::FockModule,
    pub pi_src_fock: crate::fock::FockModule,
    pub pi_tgt_fock: crate::fock::FockModule,
    pub gamma_op_fock: crate::fock::FockModule,
    pub gamma_tgt_fock: crate::fock::FockModule,
}

pub fn transport_ctx(
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    s: &BigRational,
    depth: usize,
) -> TransportCtx {
    let alpha = ch1.alpha.clone();
    let beta = ch2.alpha.clone();
    let reg = PartitionRegistry::new(depth);
    let small = 4usize;
    // Π: F_α ⊗ F_β → F_{α+β}; base cases need target level 0 only, but keep a
    // small window for cross-checks.
    let pi_op_fock = build_fock(&FockSpec { alpha: alpha.clone(), cutoff: small });
    let pi_src_fock = build_fock(&FockSpec { alpha: beta.clone(), cutoff: small });
    let pi_tgt_fock = build_fock(&FockSpec { alpha: &alpha + &beta, cutoff: small });
    let pi_small = IntertwinerTable::build(
        &TableModules {
            op_module: &pi_op_fock.module,
            op_a: &pi_op_fock.a,
            src: &pi_src_fock.module,
            src_a: &pi_src_fock.a,
            src_charge: beta.clone(),
            tgt: &pi_tgt_fock.module,
            tgt_a: &pi_tgt_fock.a,
            tgt_charge: &alpha + &beta,
        },
        small,
        small,
        small,
    );
    let gamma_op_fock = build_fock(&FockSpec { alpha: -alpha.clone(), cutoff: small });
    let gamma_tgt_fock = build_fock(&FockSpec { alpha: BigRational::zero(), cutoff: small });
    let gamma_small = IntertwinerTable::build(
        &TableModules {
            op_module: &gamma_op_fock.module,
            op_a: &gamma_op_fock.a,
            src: &pi_op_fock.module,
            src_a: &pi_op_fock.a,
            src_charge: alpha.clone(),
            tgt: &gamma_tgt_fock.module,
            tgt_a: &gamma_tgt_fock.a,
            tgt_charge: BigRational::zero(),
        },
        small,
        small,
        small,
    );
    TransportCtx {
        alpha,
        beta,
        s: s.clone(),
        depth,
        reg,
        pi_small,
        gamma_small,
        pi_op_fock,
        pi_src_fock,
        pi_tgt_fock,
        gamma_op_fock,
        gamma_tgt_fock,
    }
}

/// i^k as an exact scalar.
fn i_pow(k: i64) -> Exact {
    match k.rem_euclid(4) {
        0 => Exact::one(),
        1 => Exact::i(),
        2 => -Exact::one(),
        _ => -Exact::i(),
    }
}

/// Left side of the fusion relation, summed through the depth:
/// Σ_n ⟨Y_{W₂}(P_n Γ(w₁′, (s⁻¹−s)i) w₁, si) w₂ | w̃₂⟩-exact-part, where
/// w₁′ = U₀(ϑ_{s⁻¹i})⁻¹ C v₁ and the common fractional factor
/// (s⁻¹−s)^{−α²}·s^{−α²}·e^{iπα²/2}·(phase of x^{−α²}) is NOT included.
pub fn transport_lhs(
    ctx: &TransportCtx,
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    ident: &DualIdentification,
    gamma_deep: &DeepIntertwiner<'_>,
    y_deep: &DeepInsertion<'_>,
    w1: &ModuleVector,
    v1: &ModuleVector,
    w2: &ModuleVector,
    wt2: &ModuleVector,
) -> Result<Exact, FitError> {
    let _ = ch2;
    // u₀ = ι(U₀(ϑ)⁻¹ C v₁) ∈ F_{−α}, Gaussian-rational coefficients
    let dressed = annihilation_side_dressing(ch1, &ctx.s, v1)?;
    let u0 = ident.apply(&dressed);
    let x_mag = Exact::from_rat(&ctx.s.clone().recip() - &ctx.s); // |x| = s⁻¹ − s
    let s_mag = Exact::from_rat(ctx.s.clone());
    let w1_states = crate::deep::exact_states_of(w1);
    let u0_states = crate::deep::exact_states_of(&u0);
    let w2_states = crate::deep::exact_states_of(w2);
    let wt2_states = crate::deep::exact_states_of(wt2);
    assert_eq!(w2_states.len(), 1, "probe w₂ must be a basis state");
    assert_eq!(wt2_states.len(), 1, "probe w̃₂ must be a basis state");
    let (w2s, w2c) = (&w2_states[0].0, &w2_states[0].1);
    let (wt2s, wt2c) = (&wt2_states[0].0, &wt2_states[0].1);
    let probe_scale = &*w2c * &wt2c.conj();
    let mut total = Exact::zero();
    for n in 0..=ctx.depth {
        let mut level_sum = Exact::zero();
        for mu_idx in 0..ctx.reg.by_level[n].len() {
            let mu = (n, mu_idx);
            // h̃(μ; w₂, w̃₂): insertion elements on W₂
            let h = y_deep.h(mu, *w2s, *wt2s);
            if h.is_zero() {
                continue;
            }
            // Σ over u₀, w₁ components: g̃_Γ with magnitude and phase factors
            let mut gsum = Exact::zero();
            for (us, uc) in &u0_states {
                for (ws, wc) in &w1_states {
                    let g = gamma_deep.g(mu, *us, *ws);
                    if g.is_zero() {
                        continue;
                    }
                    // x-exponent of this term: n − |w₁| − |u|
                    let e1 = n as i64 - ws.0 as i64 - us.0 as i64;
                    // z-exponent of h: |w̃₂| − |w₂| − n
                    let e2 = wt2s.0 as i64 - w2s.0 as i64 - n as i64;
                    let mag = &x_mag.powi(e1) * &s_mag.powi(e2);
                    let phase = i_pow(e1 + e2);
                    let coef = &(uc * wc) * &(&mag * &phase);
                    gsum += &(&coef * &Exact::from_rat(g));
                }
            }
            if gsum.is_zero() {
                continue;
            }
            let zl = &ctx.reg.zl[n][mu_idx];
            level_sum += &(&gsum * &Exact::from_rat((BigRational::one() / zl) * h));
        }
        total += &level_sum;
    }
    total = &total * &probe_scale;
    Ok(total)
}

/// Right side: Ψ#₁Ψ*-entries Σ_r Σ_{μ⊢r} (1/z_μ)·[Π-element](w₁,w₂) ·
/// conj([Π-element](v₁,w̃₂)), magnitudes and phases folded; the common
/// fractional factor s^{2αβ} is NOT included.
pub fn transport_rhs(
    ctx: &TransportCtx,
    pi_deep: &DeepIntertwiner<'_>,
    w1: &ModuleVector,
    v1: &ModuleVector,
    w2: &ModuleVector,
    wt2: &ModuleVector,
) -> Result<Exact, FitError> {
    let s_mag = Exact::from_rat(ctx.s.clone());
    let w1_states = crate::deep::exact_states_of(w1);
    let v1_states = crate::deep::exact_states_of(v1);
    let w2_states = crate::deep::exact_states_of(w2);
    let wt2_states = crate::deep::exact_states_of(wt2);
    let mut total = Exact::zero();
    for r in 0..=ctx.depth {
        let mut level = Exact::zero();
        for mu_idx in 0..ctx.reg.by_level[r].len() {
            let mu = (r, mu_idx);
            // first factor (w₁, w₂) plain; second factor (v₁, w̃₂) conjugated
            let mut first = Exact::zero();
            for (us, uc) in &w1_states {
                for (ws, wc) in &w2_states {
                    let g = pi_deep.g(mu, *us, *ws);
                    if g.is_zero() {
                        continue;
                    }
                    let e = r as i64 - ws.0 as i64 - us.0 as i64;
                    let zf = &s_mag.powi(e) * &i_pow(e);
                    first += &(&(&(uc * wc) * &zf) * &Exact::from_rat(g));
                }
            }
            if first.is_zero() {
                continue;
            }
            let mut second = Exact::zero();
            for (us, uc) in &v1_states {
                for (ws, wc) in &wt2_states {
                    let g = pi_deep.g(mu, *us, *ws);
                    if g.is_zero() {
                        continue;
                    }
                    let e = r as i64 - ws.0 as i64 - us.0 as i64;
                    let zf = &s_mag.powi(e) * &i_pow(e);
                    second += &(&(&(uc * wc) * &zf) * &Exact::from_rat(g));
                }
            }
            if second.is_zero() {
                continue;
            }
            let zl = &ctx.reg.zl[r][mu_idx];
            let term = &first * &second.conj();
            level += &term.scale(&(BigRational::one() / zl));
        }
        total += &level;
    }
    Ok(total)
}

/// Fit the transport scalar A over the probe tuples:
/// full-A = a_symbolic · a_exact with the residual as truncation certificate.
pub fn transport_fit(
    vac: &VacuumCtx,
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    s: &BigRational,
    depth: usize,
    threshold: f64,
) -> Result<TransportFit, FitError> {
    let _ = vac;
    let ctx = transport_ctx(ch1, ch2, s, depth);
    let small_reg = PartitionRegistry::new(4);
    let ident = dual_identification(ch1);
    let gamma_deep = DeepIntertwiner::new(
        &ctx.reg,
        &small_reg,
        -ctx.alpha.clone(),
        ctx.alpha.clone(),
        &ctx.gamma_small,
    );
    let y_deep = DeepInsertion::new(&ctx.reg, &small_reg, ctx.beta.clone());
    let pi_deep =
        DeepIntertwiner::new(&ctx.reg, &small_reg, ctx.alpha.clone(), ctx.beta.clone(), &ctx.pi_small);
    let probes = transport_probes(ch1, ch2);
    let mut ls: Vec<Exact> = Vec::new();
    let mut rs: Vec<Exact> = Vec::new();
    for (w1, v1, w2, wt2) in &probes {
        let l = transport_lhs(&ctx, ch1, ch2, &ident, &gamma_deep, &y_deep, w1, v1, w2, wt2)?;
        let r = transport_rhs(&ctx, &pi_deep, w1, v1, w2, wt2)?;
        ls.push(l);
        rs.push(r);
    }
    // least squares for a single complex scalar: a = Σ l·conj(r) / Σ |r|²
    let mut num = Exact::zero();
    let mut den = BigRational::zero();
    for (l, r) in ls.iter().zip(rs.iter()) {
        num += &(l * &r.conj());
        den += r.norm_sqr();
    }
    if den.is_zero() {
        return Err(FitError::WindowTooSmall {
            residual: f64::INFINITY,
            threshold,
            suggested: depth * 2,
        });
    }
    let a_exact = num.scale(&(BigRational::one() / &den));
    let mut res_sqr = BigRational::zero();
    let mut l_sqr = BigRational::zero();
    for (l, r) in ls.iter().zip(rs.iter()) {
        let d = l - &(&a_exact * r);
        res_sqr += d.norm_sqr();
        l_sqr += l.norm_sqr();
    }
    let rel_sqr = if l_sqr.is_zero() { BigRational::zero() } else { &res_sqr / &l_sqr };
    let residual = rel_sqr.to_f64().unwrap_or(f64::NAN).sqrt();
    // symbolic factor: LHS-sym / RHS-sym
    // LHS-sym = e^{iπα²/2} · ((s⁻¹−s)i)^{−α²}|_{arg π/2} · (s²)^{−α²/2}
    // RHS-sym = (si)^{αβ}|_{π/2} · conj((si)^{αβ})
    let alpha2 = &ctx.alpha * &ctx.alpha;
    let mut sym = SymbolicFactor::one();
    let half = BigRational::new(1.into(), 2.into());
    sym.phase_pi = &alpha2 * &half; // Γ normalization phase e^{iπα²/2}
    let x = &Exact::i() * &Exact::from_rat(&ctx.s.clone().recip() - &ctx.s);
    sym.mul_gaussian_pow(&x, &-alpha2.clone(), &half);
    sym.mul_pos_rational_pow(&(&ctx.s * &ctx.s), &-(&alpha2 * &half));
    // divide by RHS-sym = s^{2αβ}
    let two_ab = BigRational::from_integer(2.into()) * &ctx.alpha * &ctx.beta;
    sym.mul_pos_rational_pow(&ctx.s, &-two_ab);
    sym.canonicalize();
    let positive = sym.is_certainly_positive()
        && a_exact.is_real()
        && a_exact.re.is_positive();
    let a_float = {
        let (fr, _) = sym.to_f64_parts();
        fr * a_exact.to_f64().0
    };
    if residual > threshold {
        return Err(FitError::WindowTooSmall {
            residual,
            threshold,
            suggested: depth + depth / 2,
        });
    }
    Ok(TransportFit {
        a_symbolic: sym,
        a_exact,
        a_float,
        residual,
        residual_sqr: rel_sqr,
        depth,
        equations: probes.len(),
        positive,
    })
}

/// The auxiliary two-point block τ on (ℙ¹; si, −i; ζ−si, ϖ⁻¹): the dressed
/// pairing ⟨U(ρ₁)v, U(ρ₂)y′⟩ with the Möbius dressings solved exactly from
/// the geometry, normalized by τ(𝟙 ⊗ C𝟙) = 1.
pub struct TauBlock {
    pub rho1: CoordChange,
    pub rho2: CoordChange,
}

pub fn tau_block(s: &BigRational, order: usize) -> TauBlock {
    // equivalence g(z) = (−iz + siδ)/(z + δ) with δ = −i(1+s): ρ₁ = μ₁⁻¹,
    // ρ₂ = (1/ζ)∘μ₂⁻¹ computed exactly as Möbius series at 0.
    let i = Exact::i();
    let sx = Exact::from_rat(s.clone());
    let one = Exact::one();
    let delta = -&(&i * &(&one + &sx));
    let g = Mobius::new(
        -&i,
        &(&sx * &i) * &delta,
        Exact::one(),
        delta.clone(),
    );
    // μ₁ = (ζ − si) ∘ g, μ₂ = ϖ⁻¹ ∘ g; ϖ⁻¹ = 1/ϖ
    let shift = Mobius::translation(-&(&sx * &i));
    let mu1 = shift.compose(&g);
    let omega_inv = Mobius::inversion().compose(&crate::series::omega_map());
    let mu2 = omega_inv.compose(&g);
    // ρ₁ = ζ ∘ μ₁⁻¹ (series of the inverse at 0); ρ₂ = (1/ζ) ∘ μ₂⁻¹
    let rho1_map = mu1.inverse();
    let rho2_map = Mobius::inversion().compose(&mu2.inverse());
    let rho1 = CoordChange::from_mobius(&rho1_map, &Point::finite(Exact::zero()), order)
        .expect("tau rho1");
    let rho2 = CoordChange::from_mobius(&rho2_map, &Point::finite(Exact::zero()), order)
        .expect("tau rho2");
    TauBlock { rho1, rho2 }
}

impl TauBlock {
    /// τ(v ⊗ y′), exact (integer weights on V).
    pub fn eval(
        &self,
        vac: &VacuumCtx,
        dual_l: &crate::module::ModeFamily,
        v: &ModuleVector,
        y_dual: &ModuleVector,
    ) -> Result<Exact, FitError> {
        let uv = crate::coords::apply_u(&self.rho1, &vac.l, v).map_err(FitError::Block)?;
        let uy = crate::coords::apply_u(&self.rho2, dual_l, y_dual).map_err(FitError::Block)?;
        Ok(uv.pair(&uy))
    }
}

/// λ-relation outcome.
pub struct LambdaReport {
    /// λ₁ as a symbolic factor (positive when the run is consistent).
    pub lambda1: SymbolicFactor,
    /// Exact match of the lowest-weight value with (s⁻¹−s)^{−2d} s^{−2d} ‖w₁‖².
    pub lowest_weight_exact: bool,
    /// Relative residual of the full two-sided identity.
    pub residual: f64,
    pub residual_sqr: BigRational,
    pub equations: usize,
    pub window_ok: bool,
}

/// Verify ω_{W₁′,P} #₁ ω_{W₂,Q} = λ₁ · A · Ψ #₁ Ψ* with λ₁ from the
/// lowest-weight ratio and A from the transport fit.
pub fn lambda_relation_check(
    vac: &VacuumCtx,
    ch1: &ChargeCtx,
    ch2: &ChargeCtx,
    fam: &TrinionFamily,
    fit: &TransportFit,
    depth: usize,
    lhs_truncation: usize,
) -> Result<LambdaReport, FitError> {
    let s = &fam.s;
    let alpha = &ch1.alpha;
    let d = alpha * alpha / BigRational::from_integer(2.into());
    // --- κ#₁τ on the lowest-weight diagonal: exact collapse to the closed form
    let ctx = transport_ctx(ch1, ch2, s, depth);
    let small_reg = PartitionRegistry::new(4);
    let ident = dual_identification(ch1);
    let gamma_deep = DeepIntertwiner::new(
        &ctx.reg,
        &small_reg,
        -ctx.alpha.clone(),
        ctx.alpha.clone(),
        &ctx.gamma_small,
    );
    let one1 = ch1.fock.module.basis_vector(0, 0);
    // κ(C𝟙 ⊗ 𝟙 ⊗ C𝟙-slot): the vacuum-paired value of Γ(U₀(ϑ)⁻¹C𝟙, x)𝟙:
    // exact part = g̃_Γ(∅; ι(dressed), 𝟙) with the x^{…}-powers at μ = ∅.
    let dressed = annihilation_side_dressing(ch1, s, &one1)?;
    let u0 = ident.apply(&dressed);
    let u0_states = crate::deep::exact_states_of(&u0);
    let x_mag = Exact::from_rat(&s.clone().recip() - s);
    let mut kappa_tau_exact = Exact::zero();
    for (us, uc) in &u0_states {
        let g = gamma_deep.g((0, 0), *us, (0, 0));
        if g.is_zero() {
            continue;
        }
        let e1 = 0i64 - 0 - us.0 as i64;
        let zf = &x_mag.powi(e1) * &i_pow(e1);
        kappa_tau_exact += &(&(uc * &zf) * &Exact::from_rat(g));
    }
    // full κ#τ-value symbolic part: e^{iπα²/2}·x^{−α²}·(s²)^{−d}
    let alpha2 = alpha * alpha;
    let half = BigRational::new(1.into(), 2.into());
    let mut kappa_tau_sym = SymbolicFactor::one();
    kappa_tau_sym.phase_pi = &alpha2 * &half;
    let x = &Exact::i() * &x_mag;
    kappa_tau_sym.mul_gaussian_pow(&x, &-alpha2.clone(), &half);
    kappa_tau_sym.mul_pos_rational_pow(&(s * s), &-d.clone());
    let mut kappa_tau_full = kappa_tau_sym.clone();
    kappa_tau_full.mul_exact(&kappa_tau_exact);
    // closed form: (s⁻¹−s)^{−2d}·s^{−2d}·‖w₁‖², ‖𝟙_α‖² = 1
    let mut closed = SymbolicFactor::one();
    let minus_2d = -(BigRational::from_integer(2.into()) * &d);
    closed.mul_pos_rational_pow(&(&s.clone().recip() - s), &minus_2d);
    closed.mul_pos_rational_pow(s, &minus_2d);
    let mut a_can = kappa_tau_full.clone();
    a_can.canonicalize();
    let mut b_can = closed.clone();
    b_can.canonicalize();
    let lowest_weight_exact = a_can == b_can;

    // --- λ₁ = ω_P(C𝟙⊗𝟙⊗𝟙) / (κ#τ-value)
    let omega_p = basic_block(&ch1.dual_block_ctx(vac), &fam.p).map_err(FitError::Block)?;
    let omega_q = basic_block(&ch2.block_ctx(vac), &fam.q).map_err(FitError::Block)?;
    let c_one1 = ch1.dual.conj.apply(&one1);
    let one_v = crate::fock::vacuum(&vac.fock.module);
    let (omega_low, _) = omega_p
        .eval(&[&c_one1, &one1, &one_v])
        .map_err(FitError::Block)?;
    let mut lambda1 = omega_low.clone();
    lambda1.mul(&kappa_tau_full.inv());
    lambda1.canonicalize();

    // --- two-sided identity on probe tuples
    let pi_deep = DeepIntertwiner::new(
        &ctx.reg,
        &small_reg,
        ctx.alpha.clone(),
        ctx.beta.clone(),
        &ctx.pi_small,
    );
    let probes = transport_probes(ch1, ch2);
    // LHS entries: ω_P #₁ ω_Q at q = 1 over the vacuum channel
    let mut window_ok = true;
    let mut lhs_vals: Vec<Exact> = Vec::new();
    let mut rhs_vals: Vec<Exact> = Vec::new();
    for (w1, v1, w2, wt2) in &probes {
        let cv1 = ch1.dual.conj.apply(v1);
        let cwt2 = ch2.dual.conj.apply(wt2);
        let mut entry = Exact::zero();
        for n in 0..=lhs_truncation.min(vac.fock.module.cutoff) {
            for (b_left, b_right) in vacuum_kernel(vac, n) {
                let (a, win1) = omega_p
                    .eval_exact(&[&cv1, w1, &b_left])
                    .map_err(FitError::Block)?;
                window_ok &= win1.discarded == 0;
                if a.is_zero() {
                    continue;
                }
                let (b, win2) = omega_q
                    .eval_exact(&[w2, &cwt2, &b_right])
                    .map_err(FitError::Block)?;
                window_ok &= win2.discarded == 0;
                entry += &(&a * &b);
            }
        }
        lhs_vals.push(entry);
        let r = transport_rhs(&ctx, &pi_deep, w1, v1, w2, wt2)?;
        rhs_vals.push(r);
    }
    // fold symbolic parts: LHS-sym = pref_P · pref_Q;
    // RHS-sym = λ₁ · A-sym · s^{2αβ}; ratio must reduce to an exact scalar.
    let mut lhs_sym = omega_p.prefactor.clone();
    lhs_sym.mul(&omega_q.prefactor);
    let mut rhs_sym = lambda1.clone();
    rhs_sym.mul(&fit.a_symbolic);
    let two_ab = BigRational::from_integer(2.into()) * &ctx.alpha * &ctx.beta;
    rhs_sym.mul_pos_rational_pow(s, &two_ab);
    rhs_sym.mul_exact(&fit.a_exact);
    let mut ratio = rhs_sym.clone();
    ratio.mul(&lhs_sym.inv());
    ratio.canonicalize();
    let ratio_exact = ratio.to_exact().ok_or_else(|| {
        FitError::BadParameter("two-sided identity has mismatched fractional factors".into())
    })?;
    let mut res_sqr = BigRational::zero();
    let mut l_sqr = BigRational::zero();
    for (l, r) in lhs_vals.iter().zip(rhs_vals.iter()) {
        let d = l - &(&ratio_exact * r);
        res_sqr += d.norm_sqr();
        l_sqr += l.norm_sqr();
    }
    let rel_sqr = if l_sqr.is_zero() { BigRational::zero() } else { &res_sqr / &l_sqr };
    let residual = rel_sqr.to_f64().unwrap_or(f64::NAN).sqrt();
    Ok(LambdaReport {
        lambda1,
        lowest_weight_exact,
        residual,
        residual_sqr: rel_sqr,
        equations: probes.len(),
        window_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{charge_ctx, vacuum_ctx};
    use crate::scalar::rat;

    #[test]
    fn tau_has_vacuum_pairing_property() {
        // τ(v ⊗ C𝟙) = ⟨v|𝟙⟩ and τ(𝟙 ⊗ Cv) = ⟨𝟙|v⟩ for all v through the window
        let s = rat(4, 5);
        let vac = vacuum_ctx(5);
        let dual = crate::module::contragredient_module(&vac.fock.module);
        let dual_l = crate::blocks::dual_l_family(&vac.fock.l, &vac.fock.module, &dual);
        let conj = crate::module::canonical_conjugation(&vac.fock.module, &dual);
        let tau = tau_block(&s, 7);
        let one = vac.fock.module.basis_vector(0, 0);
        for lvl in 0..=4usize {
            for idx in 0..vac.fock.module.dim(lvl) {
                let v = vac.fock.module.basis_vector(lvl, idx);
                let got1 = tau.eval(&vac, &dual_l, &v, &conj.apply(&one)).unwrap();
                let want1 = v.inner(&one);
                assert_eq!(got1, want1, "tau(v, C1) at level {lvl}");
                let got2 = tau.eval(&vac, &dual_l, &one, &conj.apply(&v)).unwrap();
                let want2 = one.inner(&v);
                assert_eq!(got2, want2, "tau(1, Cv) at level {lvl}");
            }
        }
    }

    #[test]
    fn degeneration_product_and_positivity() {
        let s = rat(4, 5);
        let fam = TrinionFamily::new(&s).unwrap();
        let vac = vacuum_ctx(4);
        let ch1 = charge_ctx(&vac, &rat(1, 2), 2);
        let ch2 = charge_ctx(&vac, &rat(1, 2), 2);
        for (w, wt) in basis_pairs(&ch1, &ch2, 1, 1) {
            let rep = degeneration_limit(&vac, &ch1, &ch2, &fam, &w, &wt).unwrap();
            assert!(rep.exact_product, "leading coefficient must factor exactly");
            assert!(rep.factors_positive, "both factors strictly positive");
            assert!(rep.coefficient.is_real() && rep.coefficient.re.is_positive());
        }
        // sesquilinearity: scaling w by 3 scales the coefficient by 9
        let (w, wt) = (&ch1.fock.module.basis_vector(1, 0), &ch2.fock.module.basis_vector(0, 0));
        let r1 = degeneration_limit(&vac, &ch1, &ch2, &fam, w, wt).unwrap();
        let r2 =
            degeneration_limit(&vac, &ch1, &ch2, &fam, &w.scale(&Exact::from_i64(3)), wt).unwrap();
        assert_eq!(r2.coefficient, r1.coefficient.scale(&rat(9, 1)));
    }

    #[test]
    fn small_fusion_gram_is_psd_and_hermitian() {
        let s = rat(4, 5);
        let q = rat(1, 2);
        let fam = TrinionFamily::new(&s).unwrap();
        let vac = vacuum_ctx(6);
        let ch1 = charge_ctx(&vac, &rat(1, 2), 2);
        let ch2 = charge_ctx(&vac, &rat(1, 2), 2);
        let pairs = basis_pairs(&ch1, &ch2, 1, 1);
        let rep = fusion_gram(&vac, &ch1, &ch2, &fam, &pairs, &q, 6).unwrap();
        assert!(rep.window_ok);
        assert!(rep.hermitian, "fusion Gram must be Hermitian");
        assert!(rep.prefactor.is_certainly_positive());
        assert!(rep.verdict.is_psd, "fusion Gram must be PSD");
        // coefficients decay fast: the last level contributes little
        let n = rep.level_norms.len();
        assert!(rep.level_norms[n - 1] < 1e-4 * (rep.level_norms[0] + 1.0));
    }

    #[test]
    fn q_split_reduction_matches() {
        let s = rat(4, 5);
        let fam = TrinionFamily::new(&s).unwrap();
        let vac = vacuum_ctx(5);
        let ch1 = charge_ctx(&vac, &rat(1, 2), 1);
        let ch2 = charge_ctx(&vac, &rat(1, 2), 1);
        let pairs = basis_pairs(&ch1, &ch2, 1, 0);
        let q = rat(1, 4);
        let direct = fusion_gram(&vac, &ch1, &ch2, &fam, &pairs, &q, 5).unwrap();
        let split = reduction_q_split(&vac, &ch1, &ch2, &fam, &pairs, &rat(1, 2), &rat(1, 2), 5)
            .unwrap();
        assert_eq!(direct.matrix, split, "q-split must reproduce the Gram exactly");
    }

    #[test]
    fn transport_fit_vacuum_charge_gives_one() {
        // W₁ = F₀: Γ reduces to the vacuum pairing and A = 1 under the
        // top-coefficient normalization.
        let vac = vacuum_ctx(4);
        let ch1 = charge_ctx(&vac, &rat(0, 1), 2);
        let ch2 = charge_ctx(&vac, &rat(1, 2), 2);
        let fit = transport_fit(&vac, &ch1, &ch2, &rat(4, 5), 36, 1e-6).unwrap();
        assert!(fit.positive, "A must be positive");
        assert!(fit.residual <= 1e-6, "residual {}", fit.residual);
        assert!((fit.a_float - 1.0).abs() < 1e-5, "A = {} should be 1", fit.a_float);
        let mut sym = fit.a_symbolic.clone();
        sym.canonicalize();
        assert_eq!(sym.to_exact().unwrap(), Exact::one());
    }

    #[test]
    fn lambda_lowest_weight_closed_form() {
        let s = rat(4, 5);
        let fam = TrinionFamily::new(&s).unwrap();
        let vac = vacuum_ctx(6);
        let ch1 = charge_ctx(&vac, &rat(1, 2), 2);
        let ch2 = charge_ctx(&vac, &rat(1, 2), 2);
        let fit = transport_fit(&vac, &ch1, &ch2, &s, 20, 1.0).unwrap();
        let rep = lambda_relation_check(&vac, &ch1, &ch2, &fam, &fit, 20, 6).unwrap();
        assert!(rep.lowest_weight_exact, "kappa#tau lowest-weight must match the closed form");
        assert!(rep.lambda1.is_certainly_positive(), "lambda1 must be positive");
    }
}
