//! Truncated L₀-graded modules with inner products, mode operators,
//! contragredients, and conjugation maps.
//!
//! Every module stores levels 0…N only. Operators keep one rectangular block
//! per source level; compositions that would leave the window are defined on
//! the sub-window where no information is lost, and callers receive the valid
//! window through [`Window`] bookkeeping.

use crate::error::ModuleError;
use crate::matrix::{psd_check_exact, ExactMatrix};
use crate::scalar::Exact;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Basis label: a partition of the level for the built-in model, or an opaque
/// tag for imported models.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Partition(Vec<u32>),
    Opaque(String),
}

impl Label {
    pub fn to_string_label(&self) -> String {
        match self {
            Label::Partition(p) => {
                let parts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
                format!("[{}]", parts.join(","))
            }
            Label::Opaque(s) => s.clone(),
        }
    }
}

/// Rectangular exact matrix (rows × cols), row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RectMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Exact>,
}

impl RectMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RectMatrix { rows, cols, entries: vec![Exact::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = Exact::one();
        }
        m
    }

    pub fn at(&self, r: usize, c: usize) -> &Exact {
        &self.entries[r * self.cols + c]
    }

    pub fn apply(&self, v: &[Exact]) -> Vec<Exact> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![Exact::zero(); self.rows];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let e = self.at(r, c);
                if !e.is_zero() && !v[c].is_zero() {
                    out[r] += &(e * &v[c]);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> RectMatrix {
        let mut t = RectMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self.at(r, c).clone();
            }
        }
        t
    }

    pub fn conj(&self) -> RectMatrix {
        RectMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x.conj()).collect(),
        }
    }

    pub fn mul(&self, other: &RectMatrix) -> RectMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = RectMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let x = self.at(r, k);
                if x.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let y = other.at(k, c);
                    if !y.is_zero() {
                        out[(r, c)] += &(x * y);
                    }
                }
            }
        }
        out
    }

    pub fn to_square(&self) -> ExactMatrix {
        assert_eq!(self.rows, self.cols);
        ExactMatrix { dim: self.rows, entries: self.entries.clone() }
    }

    pub fn from_square(m: &ExactMatrix) -> RectMatrix {
        RectMatrix { rows: m.dim, cols: m.dim, entries: m.entries.clone() }
    }

    /// Exact inverse of a square matrix; panics if singular.
    pub fn inverse(&self) -> RectMatrix {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = RectMatrix::identity(n);
        for col in 0..n {
            let piv = (col..n).find(|&r| !a.at(r, col).is_zero()).expect("singular matrix");
            if piv != col {
                for c in 0..n {
                    a.entries.swap(col * n + c, piv * n + c);
                    inv.entries.swap(col * n + c, piv * n + c);
                }
            }
            let pinv = a.at(col, col).inv();
            for c in 0..n {
                a[(col, c)] = &a[(col, c)] * &pinv;
                inv[(col, c)] = &inv[(col, c)] * &pinv;
            }
            for r in 0..n {
                if r != col && !a.at(r, col).is_zero() {
                    let f = a.at(r, col).clone();
                    for c in 0..n {
                        let d1 = &f * a.at(col, c);
                        a[(r, c)] = &a[(r, c)] - &d1;
                        let d2 = &f * inv.at(col, c);
                        inv[(r, c)] = &inv[(r, c)] - &d2;
                    }
                }
            }
        }
        inv
    }
}

impl std::ops::Index<(usize, usize)> for RectMatrix {
    type Output = Exact;
    fn index(&self, (r, c): (usize, usize)) -> &Exact {
        &self.entries[r * self.cols + c]
    }
}
impl std::ops::IndexMut<(usize, usize)> for RectMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Exact {
        &mut self.entries[r * self.cols + c]
    }
}

/// A finitely truncated L₀-graded inner-product space.
#[derive(Clone, Debug)]
pub struct GradedModule {
    pub name: String,
    pub cutoff: usize,
    /// λ with L₀ = λ + L̃₀ (the module is L₀-simple).
    pub lowest_weight: BigRational,
    pub level_dims: Vec<usize>,
    pub labels: Vec<Vec<Label>>,
    pub gram: Vec<ExactMatrix>,
    gram_inv: Vec<RectMatrix>,
}

impl GradedModule {
    pub fn new(
        name: String,
        lowest_weight: BigRational,
        labels: Vec<Vec<Label>>,
        gram: Vec<ExactMatrix>,
    ) -> Self {
        let cutoff = labels.len() - 1;
        assert_eq!(gram.len(), labels.len());
        let level_dims: Vec<usize> = labels.iter().map(|l| l.len()).collect();
        for (n, g) in gram.iter().enumerate() {
            assert_eq!(g.dim, level_dims[n], "Gram dimension mismatch at level {n}");
        }
        let gram_inv = gram.iter().map(|g| RectMatrix::from_square(g).inverse()).collect();
        GradedModule { name, cutoff, lowest_weight, level_dims, labels, gram, gram_inv }
    }

    pub fn dim(&self, level: usize) -> usize {
        if level <= self.cutoff {
            self.level_dims[level]
        } else {
            0
        }
    }

    pub fn total_dim_through(&self, level: usize) -> usize {
        (0..=level.min(self.cutoff)).map(|n| self.dim(n)).sum()
    }

    pub fn gram_inv(&self, level: usize) -> &RectMatrix {
        &self.gram_inv[level]
    }

    /// L₀ eigenvalue on level n.
    pub fn weight(&self, level: usize) -> BigRational {
        &self.lowest_weight + BigRational::from_integer(level.into())
    }

    /// Strict positive-definiteness of every level Gram (unitarity of the form).
    pub fn check_gram_positive(&self) -> Result<(), ModuleError> {
        for (n, g) in self.gram.iter().enumerate() {
            let v = psd_check_exact(g).map_err(|_| ModuleError::GramNotPositive(n))?;
            let strict = v.is_psd
                && v.min_pivot.as_ref().map(|p| p.is_positive()).unwrap_or(g.dim == 0);
            if !strict {
                return Err(ModuleError::GramNotPositive(n));
            }
        }
        Ok(())
    }

    pub fn basis_vector(self: &Arc<Self>, level: usize, index: usize) -> ModuleVector {
        let mut v = ModuleVector::zero(self.clone());
        v.comps[level][index] = Exact::one();
        v
    }

    /// Index of a partition label at its level.
    pub fn label_index(&self, level: usize, label: &Label) -> Option<usize> {
        self.labels[level].iter().position(|l| l == label)
    }
}

/// Element of a graded module: one coefficient column per level.
#[derive(Clone, Debug)]
pub struct ModuleVector {
    pub module: Arc<GradedModule>,
    pub comps: Vec<Vec<Exact>>,
}

impl PartialEq for ModuleVector {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.module, &other.module) && self.comps == other.comps
    }
}

impl ModuleVector {
    pub fn zero(module: Arc<GradedModule>) -> Self {
        let comps = module.level_dims.iter().map(|&d| vec![Exact::zero(); d]).collect();
        ModuleVector { module, comps }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|x| x.is_zero()))
    }

    pub fn add(&self, other: &ModuleVector) -> ModuleVector {
        assert!(Arc::ptr_eq(&self.module, &other.module), "module mismatch");
        let mut out = self.clone();
        for (n, col) in other.comps.iter().enumerate() {
            for (j, x) in col.iter().enumerate() {
                out.comps[n][j] += x;
            }
        }
        out
    }

    pub fn scale(&self, c: &Exact) -> ModuleVector {
        let mut out = self.clone();
        for col in out.comps.iter_mut() {
            for x in col.iter_mut() {
                *x = &*x * c;
            }
        }
        out
    }

    pub fn neg(&self) -> ModuleVector {
        self.scale(&-Exact::one())
    }

    /// Highest level with a nonzero component (None if zero).
    pub fn top_level(&self) -> Option<usize> {
        (0..self.comps.len()).rev().find(|&n| self.comps[n].iter().any(|x| !x.is_zero()))
    }

    /// Inner product ⟨self | other⟩ (antilinear in the second argument).
    pub fn inner(&self, other: &ModuleVector) -> Exact {
        assert!(Arc::ptr_eq(&self.module, &other.module), "module mismatch");
        let mut acc = Exact::zero();
        for n in 0..self.comps.len() {
            let g = &self.module.gram[n];
            for j in 0..self.comps[n].len() {
                if self.comps[n][j].is_zero() {
                    continue;
                }
                for k in 0..other.comps[n].len() {
                    if other.comps[n][k].is_zero() {
                        continue;
                    }
                    // ⟨Σ x_j b_j | Σ y_k b_k⟩ = Σ x_j conj(y_k) ⟨b_j|b_k⟩
                    acc += &(&(&self.comps[n][j] * &other.comps[n][k].conj()) * &g[(j, k)]);
                }
            }
        }
        acc
    }

    /// Pairing ⟨self, dual⟩ with an element of the contragredient in dual coords.
    pub fn pair(&self, dual: &ModuleVector) -> Exact {
        let mut acc = Exact::zero();
        for n in 0..self.comps.len().min(dual.comps.len()) {
            for j in 0..self.comps[n].len().min(dual.comps[n].len()) {
                if !self.comps[n][j].is_zero() && !dual.comps[n][j].is_zero() {
                    acc += &(&self.comps[n][j] * &dual.comps[n][j]);
                }
            }
        }
        acc
    }
}

/// Valid-window bookkeeping: levels where a computed quantity is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    /// The result is exact for inputs supported on levels ≤ `max_level`.
    pub max_level: usize,
    /// Orders discarded above the cutoff (0 when nothing was lost).
    pub discarded: usize,
}

impl Window {
    pub fn full(max_level: usize) -> Self {
        Window { max_level, discarded: 0 }
    }

    pub fn intersect(&self, other: &Window) -> Window {
        Window {
            max_level: self.max_level.min(other.max_level),
            discarded: self.discarded.max(other.discarded),
        }
    }
}

/// Level-block operator between graded modules: maps level n → n + shift.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    pub name: String,
    pub source: Arc<GradedModule>,
    pub target: Arc<GradedModule>,
    pub shift: i64,
    /// blocks[n]: matrix (dim_target(n+shift) × dim_source(n)); None where the
    /// image leaves the window.
    pub blocks: Vec<Option<RectMatrix>>,
}

impl ModeOperator {
    pub fn zero(name: String, source: Arc<GradedModule>, target: Arc<GradedModule>, shift: i64) -> Self {
        let mut blocks = Vec::new();
        for n in 0..=source.cutoff {
            let t = n as i64 + shift;
            if t >= 0 && (t as usize) <= target.cutoff {
                blocks.push(Some(RectMatrix::zeros(target.dim(t as usize), source.dim(n))));
            } else {
                blocks.push(None);
            }
        }
        ModeOperator { name, source, target, shift, blocks }
    }

    pub fn block(&self, src_level: usize) -> Option<&RectMatrix> {
        self.blocks.get(src_level).and_then(|b| b.as_ref())
    }

    /// Apply to a vector; levels whose image would exit the window report as
    /// discarded in the returned [`Window`].
    pub fn apply(&self, v: &ModuleVector) -> Result<(ModuleVector, Window), ModuleError> {
        if !Arc::ptr_eq(&self.source, &v.module) {
            return Err(ModuleError::Mismatch {
                expected: self.source.name.clone(),
                got: v.module.name.clone(),
            });
        }
        let mut out = ModuleVector::zero(self.target.clone());
        let mut discarded = 0usize;
        for n in 0..v.comps.len() {
            if v.comps[n].iter().all(|x| x.is_zero()) {
                continue;
            }
            let t = n as i64 + self.shift;
            if t < 0 {
                continue; // annihilated below level 0: genuinely zero
            }
            match self.block(n) {
                Some(b) => {
                    let img = b.apply(&v.comps[n]);
                    let t = t as usize;
                    for (j, x) in img.into_iter().enumerate() {
                        out.comps[t][j] += &x;
                    }
                }
                None => {
                    discarded += 1;
                }
            }
        }
        let max_ok = if self.shift <= 0 {
            self.source.cutoff
        } else {
            self.source.cutoff.saturating_sub(self.shift as usize)
        };
        Ok((out, Window { max_level: max_ok, discarded }))
    }

    /// Transpose with respect to the pairing: blocks are transposed and the
    /// roles of source/target swap (dual coordinates on both sides).
    pub fn transpose(&self, new_source: Arc<GradedModule>, new_target: Arc<GradedModule>) -> ModeOperator {
        // block mapping level m -> m + shift transposes to level m+shift -> m
        let mut blocks: Vec<Option<RectMatrix>> = vec![None; new_source.cutoff + 1];
        for (n, b) in self.blocks.iter().enumerate() {
            if let Some(b) = b {
                let t = (n as i64 + self.shift) as usize;
                if t <= new_source.cutoff {
                    blocks[t] = Some(b.transpose());
                }
            }
        }
        ModeOperator {
            name: format!("{}^T", self.name),
            source: new_source,
            target: new_target,
            shift: -self.shift,
            blocks,
        }
    }
}

/// A named family of mode operators (e.g. all a_n or all L_n through cutoff).
#[derive(Clone, Debug, Default)]
pub struct ModeFamily {
    pub ops: BTreeMap<i64, ModeOperator>,
}

impl ModeFamily {
    pub fn get(&self, n: i64) -> Option<&ModeOperator> {
        self.ops.get(&n)
    }

    pub fn insert(&mut self, n: i64, op: ModeOperator) {
        self.ops.insert(n, op);
    }
}

/// Antilinear level-preserving map (C_W or Θ): apply(v) = M·conj(v) per level.
#[derive(Clone, Debug)]
pub struct ConjugationMap {
    pub name: String,
    pub source: Arc<GradedModule>,
    pub target: Arc<GradedModule>,
    pub blocks: Vec<RectMatrix>,
}

impl ConjugationMap {
    pub fn apply(&self, v: &ModuleVector) -> ModuleVector {
        assert!(Arc::ptr_eq(&self.source, &v.module), "conjugation source mismatch");
        let mut out = ModuleVector::zero(self.target.clone());
        for n in 0..v.comps.len() {
            let conjd: Vec<Exact> = v.comps[n].iter().map(|x| x.conj()).collect();
            out.comps[n] = self.blocks[n].apply(&conjd);
        }
        out
    }

    /// The inverse antilinear map (blocks: conj of matrix inverse).
    pub fn inverse(&self) -> ConjugationMap {
        ConjugationMap {
            name: format!("{}^-1", self.name),
            source: self.target.clone(),
            target: self.source.clone(),
            blocks: self.blocks.iter().map(|b| b.inverse().conj()).collect(),
        }
    }
}

/// The canonical conjugation C_W: W → W′, C w = ⟨·|w⟩, with W′ in dual
/// coordinates: block per level is the Gram matrix itself.
pub fn canonical_conjugation(w: &Arc<GradedModule>, w_dual: &Arc<GradedModule>) -> ConjugationMap {
    let blocks = w.gram.iter().map(RectMatrix::from_square).collect();
    ConjugationMap {
        name: format!("C_{}", w.name),
        source: w.clone(),
        target: w_dual.clone(),
        blocks,
    }
}

/// Contragredient module: dual bases per level, Gram = transpose of inverse.
///
/// The supplied `modes` are transported by the transpose relation: the mode of
/// the dual action is the transpose of the primed mode on W, with the primed
/// modes given by the caller (see `fock::y_prime_family` for insertions of
/// weight-h vectors).
pub fn contragredient_module(w: &Arc<GradedModule>) -> Arc<GradedModule> {
    let gram: Vec<ExactMatrix> = w
        .gram
        .iter()
        .map(|g| {
            let inv = RectMatrix::from_square(g).inverse();
            inv.conj().to_square()
        })
        .collect();
    Arc::new(GradedModule::new(
        format!("{}'", w.name),
        w.lowest_weight.clone(),
        w.labels.clone(),
        gram,
    ))
}

/// exp(Σ_k coeffs_k · ops_k) applied to v, where every op strictly lowers the
/// level (nilpotent on the window): the sum terminates exactly.
pub fn apply_exp_lowering(
    terms: &[(Exact, &ModeOperator)],
    v: &ModuleVector,
) -> Result<ModuleVector, ModuleError> {
    for (_, op) in terms {
        assert!(op.shift < 0, "apply_exp_lowering requires strictly lowering operators");
    }
    let mut acc = v.clone();
    let mut term = v.clone();
    let max_iters = v.module.cutoff + 1;
    for k in 1..=max_iters {
        // term ← (Σ c·op)(term) / k
        let mut next = ModuleVector::zero(v.module.clone());
        let mut any = false;
        for (c, op) in terms {
            if c.is_zero() {
                continue;
            }
            let (img, _) = op.apply(&term)?;
            if !img.is_zero() {
                next = next.add(&img.scale(c));
                any = true;
            }
        }
        if !any || next.is_zero() {
            break;
        }
        let kinv = Exact::from_frac(1, k as i64);
        term = next.scale(&kinv);
        acc = acc.add(&term);
    }
    Ok(acc)
}

/// exp of a level-raising operator family, truncated at the window; reports
/// the number of discarded orders.
pub fn apply_exp_raising(
    terms: &[(Exact, &ModeOperator)],
    v: &ModuleVector,
) -> Result<(ModuleVector, Window), ModuleError> {
    for (_, op) in terms {
        assert!(op.shift > 0, "apply_exp_raising requires strictly raising operators");
    }
    let mut acc = v.clone();
    let mut term = v.clone();
    let cutoff = v.module.cutoff;
    let mut discarded = 0usize;
    for k in 1..=cutoff + 1 {
        let mut next = ModuleVector::zero(v.module.clone());
        let mut any = false;
        for (c, op) in terms {
            if c.is_zero() {
                continue;
            }
            let (img, w) = op.apply(&term)?;
            discarded += w.discarded;
            if !img.is_zero() {
                next = next.add(&img.scale(c));
                any = true;
            }
        }
        if !any || next.is_zero() {
            break;
        }
        let kinv = Exact::from_frac(1, k as i64);
        term = next.scale(&kinv);
        acc = acc.add(&term);
    }
    let top = v.top_level().unwrap_or(0);
    Ok((acc, Window { max_level: cutoff.saturating_sub(top), discarded }))
}

/// λ^{L̃₀}: scale level n by λ^n (integer powers, exact).
pub fn apply_lambda_ltilde(lambda: &Exact, v: &ModuleVector) -> ModuleVector {
    let mut out = v.clone();
    let mut pw = Exact::one();
    for n in 0..out.comps.len() {
        if n > 0 {
            pw = &pw * lambda;
        }
        for x in out.comps[n].iter_mut() {
            *x = &*x * &pw;
        }
    }
    out
}

/// Report from the unitarity check: worst violating datum, if any.
#[derive(Debug, Clone)]
pub struct UnitarityReport {
    pub passed: bool,
    pub checked: usize,
    pub failures: Vec<String>,
}

/// Verify the mode-level adjoint identity ⟨Y(u)_n w₁ | w₂⟩ = ⟨w₁ | Y′(Θu)_n w₂⟩
/// for the supplied list of (Y(u)-family, Y′(Θu)-family) pairs, through the
/// truncation window. All data exact; failures are located by level.
pub fn check_unitarity(
    module: &Arc<GradedModule>,
    pairs: &[(String, ModeFamily, ModeFamily)],
) -> UnitarityReport {
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for (name, y_fam, yprime_theta_fam) in pairs {
        for (&n, y_op) in &y_fam.ops {
            let yp_op = match yprime_theta_fam.get(n) {
                Some(op) => op,
                None => continue,
            };
            for m1 in 0..=module.cutoff {
                let t = m1 as i64 + y_op.shift;
                if t < 0 || t as usize > module.cutoff {
                    continue;
                }
                let m2 = t as usize;
                let yb = match y_op.block(m1) {
                    Some(b) => b,
                    None => continue,
                };
                let ypb = match yp_op.block(m2) {
                    Some(b) => b,
                    None => continue,
                };
                checked += 1;
                // ⟨Y(u)_n b_k | b_j⟩ = ⟨b_k | Y'(Θu)_n b_j⟩ for all j,k
                let g2 = &module.gram[m2];
                let g1 = &module.gram[m1];
                let mut ok = true;
                'outer: for k in 0..module.dim(m1) {
                    for j in 0..module.dim(m2) {
                        let mut lhs = Exact::zero();
                        for r in 0..module.dim(m2) {
                            if !yb.at(r, k).is_zero() {
                                lhs += &(yb.at(r, k) * &g2[(r, j)]);
                            }
                        }
                        let mut rhs = Exact::zero();
                        for r in 0..module.dim(m1) {
                            if !ypb.at(r, j).is_zero() {
                                // ⟨b_k | Σ_r N_{rj} b_r⟩ = Σ_r conj(N_{rj}) G1[k][r]
                                rhs += &(&ypb.at(r, j).conj() * &g1[(k, r)]);
                            }
                        }
                        if lhs != rhs {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
                if !ok {
                    failures.push(format!(
                        "{name} mode n={n}: adjoint identity fails on levels {m1}->{m2}"
                    ));
                }
            }
        }
    }
    UnitarityReport { passed: failures.is_empty(), checked, failures }
}

/// Dimension of the weight-0 eigenspace of L₀ (vacuum-like vectors), with the
/// unitarity consequences asserted: nonnegative spectrum and L₁W₍₁₎ = 0.
pub fn vacuum_like_dim(
    module: &Arc<GradedModule>,
    l1: Option<&ModeOperator>,
) -> Result<usize, ModuleError> {
    if module.lowest_weight.is_negative() {
        return Err(ModuleError::NegativeWeight);
    }
    let dim = if module.lowest_weight.is_zero() { module.dim(0) } else { 0 };
    if dim > 0 {
        // L₁ on the weight-1 space must vanish
        if let Some(l1) = l1 {
            if let Some(b) = l1.block(1) {
                if b.entries.iter().any(|x| !x.is_zero()) {
                    return Err(ModuleError::NegativeWeight);
                }
            }
        }
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn simple_module() -> Arc<GradedModule> {
        // two levels: dims 1, 2 with diagonal Gram
        let labels = vec![
            vec![Label::Opaque("v".into())],
            vec![Label::Opaque("x".into()), Label::Opaque("y".into())],
        ];
        let gram = vec![
            ExactMatrix::from_rows(vec![vec![Exact::one()]]),
            ExactMatrix::from_rows(vec![
                vec![Exact::from_i64(2), Exact::zero()],
                vec![Exact::zero(), Exact::from_i64(3)],
            ]),
        ];
        Arc::new(GradedModule::new("T".into(), rat(0, 1), labels, gram))
    }

    #[test]
    fn inner_product_uses_gram() {
        let m = simple_module();
        let x = m.basis_vector(1, 0);
        assert_eq!(x.inner(&x), Exact::from_i64(2));
        let v = m.basis_vector(0, 0);
        assert_eq!(v.inner(&x), Exact::zero());
    }

    #[test]
    fn contragredient_has_inverse_gram() {
        let m = simple_module();
        let md = contragredient_module(&m);
        assert_eq!(md.gram[1][(0, 0)], Exact::from_frac(1, 2));
        assert_eq!(md.gram[1][(1, 1)], Exact::from_frac(1, 3));
    }

    #[test]
    fn conjugation_roundtrip_is_identity() {
        let m = simple_module();
        let md = contragredient_module(&m);
        let c = canonical_conjugation(&m, &md);
        let cinv = c.inverse();
        let x = m.basis_vector(1, 1).scale(&Exact::gaussian(1, 2, -1, 3));
        let back = cinv.apply(&c.apply(&x));
        assert_eq!(back, x);
        // C is isometric-antilinear: ⟨Cw1|Cw2⟩ = conj ⟨w1|w2⟩
        let y = m.basis_vector(1, 0).scale(&Exact::gaussian(0, 1, 1, 1));
        let lhs = c.apply(&y).inner(&c.apply(&x));
        assert_eq!(lhs, y.inner(&x).conj());
    }

    #[test]
    fn pairing_in_dual_coords() {
        let m = simple_module();
        let md = contragredient_module(&m);
        let c = canonical_conjugation(&m, &md);
        let x = m.basis_vector(1, 0);
        let y = m.basis_vector(1, 0).scale(&Exact::gaussian(2, 1, 5, 1));
        // ⟨x, C y⟩ = ⟨x | y⟩
        assert_eq!(x.pair(&c.apply(&y)), x.inner(&y));
    }
}
