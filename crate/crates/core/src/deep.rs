//! Deep-level matrix elements of Fock intertwiners by memoized commutator
//! recursion, for level sums far beyond the stored table windows.
//!
//! For z on the imaginary axis (the only case the positivity pipeline needs),
//! every matrix element factors as (rational) · zᵏ with k fixed by the level
//! bookkeeping, so the recursions below run entirely over rationals; powers of
//! z and branch phases are applied once at assembly time.

use crate::fock::{partitions, z_lambda, IntertwinerTable};
use crate::module::ModuleVector;
use crate::scalar::Exact;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

/// Partition registry through a depth: levels, index maps, largest-part links.
pub struct PartitionRegistry {
    pub depth: usize,
    pub by_level: Vec<Vec<Vec<u32>>>,
    pub index: Vec<BTreeMap<Vec<u32>, usize>>,
    /// (level, idx) → (largest part, (level′, idx′) of the remainder).
    pub peel: Vec<Vec<(u32, (usize, usize))>>,
    /// z_λ per (level, idx).
    pub zl: Vec<Vec<BigRational>>,
}

impl PartitionRegistry {
    pub fn new(depth: usize) -> Self {
        let mut by_level = Vec::with_capacity(depth + 1);
        let mut index: Vec<BTreeMap<Vec<u32>, usize>> = Vec::with_capacity(depth + 1);
        for n in 0..=depth {
            let ps = partitions(n);
            index.push(ps.iter().cloned().enumerate().map(|(j, p)| (p, j)).collect());
            by_level.push(ps);
        }
        let mut peel = Vec::with_capacity(depth + 1);
        let mut zl = Vec::with_capacity(depth + 1);
        for n in 0..=depth {
            let mut links = Vec::with_capacity(by_level[n].len());
            let mut zs = Vec::with_capacity(by_level[n].len());
            for p in &by_level[n] {
                zs.push(z_lambda(p));
                if p.is_empty() {
                    links.push((0u32, (0usize, 0usize)));
                } else {
                    let m = p[0];
                    let rest: Vec<u32> = p[1..].to_vec();
                    let rl = n - m as usize;
                    let ri = index[rl][&rest];
                    links.push((m, (rl, ri)));
                }
            }
            peel.push(links);
            zl.push(zs);
        }
        PartitionRegistry { depth, by_level, index, peel, zl }
    }
}

/// A small-module state: (level, index) within a window of low levels.
type State = (usize, usize);

/// Result of annihilating a monomial state with a_m: scaled new state.
fn annihilate(reg_small: &PartitionRegistry, st: State, m: u32) -> Option<(BigRational, State)> {
    let p = &reg_small.by_level[st.0][st.1];
    let mult = p.iter().filter(|&&x| x == m).count();
    if mult == 0 {
        return None;
    }
    let mut q: Vec<u32> = Vec::with_capacity(p.len() - 1);
    let mut removed = false;
    for &x in p {
        if !removed && x == m {
            removed = true;
            continue;
        }
        q.push(x);
    }
    let nl = st.0 - m as usize;
    let ni = reg_small.index[nl][&q];
    Some((BigRational::from_integer((m as i64 * mult as i64).into()), (nl, ni)))
}

/// Deep evaluation of ⟨𝒴(u, z)w | a_{−μ}𝟙⟩ for a charged Fock intertwiner
/// 𝒴: F_op ⊗ F_src → F_tgt, in the scaled (z-free) normalization:
/// the true value is (returned rational) · z^{|μ| − |u| − |w|} · z^{op·src}.
pub struct DeepIntertwiner<'a> {
    /// Registry deep enough for the target-side partitions.
    pub reg: &'a PartitionRegistry,
    /// Registry for the small op/src windows (can be the same object).
    pub small: &'a PartitionRegistry,
    /// a₀ eigenvalue on the op module.
    pub op_charge: BigRational,
    /// a₀ eigenvalue on the source module.
    pub src_charge: BigRational,
    /// Base-case table: must cover (u-levels, src-levels, tgt level 0).
    pub table: &'a IntertwinerTable,
    memo: std::cell::RefCell<BTreeMap<(usize, usize, usize, usize, usize, usize), BigRational>>,
}

impl<'a> DeepIntertwiner<'a> {
    pub fn new(
        reg: &'a PartitionRegistry,
        small: &'a PartitionRegistry,
        op_charge: BigRational,
        src_charge: BigRational,
        table: &'a IntertwinerTable,
    ) -> Self {
        DeepIntertwiner { reg, small, op_charge, src_charge, table, memo: Default::default() }
    }

    /// Scaled g̃(μ; u, w) with u, w basis states of the op/src modules.
    pub fn g(&self, mu: State, u: State, w: State) -> BigRational {
        if let Some(v) = self.memo.borrow().get(&(mu.0, mu.1, u.0, u.1, w.0, w.1)) {
            return v.clone();
        }
        let val = if mu.0 == 0 {
            // ⟨𝒴(u,z)w | 𝟙⟩: the (src w.0 → tgt 0) block entry of the table
            match self.table.block(u.0, u.1, w.0, 0) {
                Some(b) => {
                    let e = b.at(0, w.1);
                    e.as_rational().expect("free-boson table entries are rational").clone()
                }
                None => BigRational::zero(),
            }
        } else {
            // peel the largest part m of μ:
            // g(μ) = Σ_{j≥0} C(m,j)·g(μ′; a_j u, w) + g(μ′; u, a_m w)
            let (m, mu_rest) = self.reg.peel[mu.0][mu.1];
            let mut acc = BigRational::zero();
            // j = 0: a₀u = op_charge·u (binom(m,0) = 1)
            if !self.op_charge.is_zero() {
                acc += &self.op_charge * self.g(mu_rest, u, w);
            }
            // j ≥ 1: a_j u
            let mut binom = BigRational::one();
            for j in 1..=(u.0 as u32) {
                binom = binom * BigRational::from_integer((m as i64 - (j as i64 - 1)).into())
                    / BigRational::from_integer((j as i64).into());
                if binom.is_zero() {
                    // C(m, j) vanishes beyond j = m and stays zero
                    break;
                }
                if let Some((c, u2)) = annihilate(self.small, u, j) {
                    acc += &binom * c * self.g(mu_rest, u2, w);
                }
            }
            // + g(μ′; u, a_m w)
            if let Some((c, w2)) = annihilate(self.small, w, m) {
                acc += c * self.g(mu_rest, u, w2);
            }
            acc
        };
        self.memo.borrow_mut().insert((mu.0, mu.1, u.0, u.1, w.0, w.1), val.clone());
        val
    }

    /// Scaled g̃ extended bilinearly over rational combinations of states.
    pub fn g_vec(
        &self,
        mu: State,
        u: &[(State, BigRational)],
        w: &[(State, BigRational)],
    ) -> BigRational {
        let mut acc = BigRational::zero();
        for (us, uc) in u {
            for (ws, wc) in w {
                acc += uc * wc * self.g(mu, *us, *ws);
            }
        }
        acc
    }
}

/// Deep evaluation of ⟨Y(a_{−ν}𝟙₀, z)w | w̃⟩ on a charged Fock module of
/// charge β, in the scaled normalization: true value is
/// (returned rational) · z^{|w̃| − |w| − |ν|}.
pub struct DeepInsertion<'a> {
    pub reg: &'a PartitionRegistry,
    pub small: &'a PartitionRegistry,
    /// a₀ eigenvalue β of the module carrying w, w̃.
    pub charge: BigRational,
    memo: std::cell::RefCell<BTreeMap<(usize, usize, usize, usize, usize, usize), BigRational>>,
}

impl<'a> DeepInsertion<'a> {
    pub fn new(reg: &'a PartitionRegistry, small: &'a PartitionRegistry, charge: BigRational) -> Self {
        DeepInsertion { reg, small, charge, memo: Default::default() }
    }

    /// Scaled h̃(ν; w, w̃): ν indexes the deep registry; w, w̃ the small one.
    pub fn h(&self, nu: State, w: State, wt: State) -> BigRational {
        if nu.0 == 0 {
            // Y(𝟙) = id: ⟨w|w̃⟩ = δ·z_λ
            return if w == wt { self.small.zl[w.0][w.1].clone() } else { BigRational::zero() };
        }
        if let Some(v) = self.memo.borrow().get(&(nu.0, nu.1, w.0, w.1, wt.0, wt.1)) {
            return v.clone();
        }
        let (r, nu_rest) = self.reg.peel[nu.0][nu.1];
        let sign = if r % 2 == 0 { BigRational::one() } else { -BigRational::one() };
        let mut acc = BigRational::zero();
        // term 1: Σ_j C(r+j−1, j)·⟨Y(ν′)w | a_{r+j} w̃⟩ (adjoint of a_{−r−j})
        let mut binom = BigRational::one(); // C(r−1, 0)
        for j in 0..=(wt.0 as u32) {
            if j > 0 {
                binom = binom * BigRational::from_integer((r as i64 + j as i64 - 1).into())
                    / BigRational::from_integer((j as i64).into());
            }
            if (r + j) as usize <= wt.0 {
                if let Some((c, wt2)) = annihilate(self.small, wt, r + j) {
                    acc += &binom * c * self.h(nu_rest, w, wt2);
                }
            }
        }
        // term 2: −(−1)^r Σ_j C(r+j−1, j)·⟨Y(ν′)(a_j w) | w̃⟩, j = 0 gives β
        let mut binom = BigRational::one();
        // j = 0
        if !self.charge.is_zero() {
            acc -= &sign * &self.charge * self.h(nu_rest, w, wt);
        }
        for j in 1..=(w.0 as u32) {
            binom = binom * BigRational::from_integer((r as i64 + j as i64 - 1).into())
                / BigRational::from_integer((j as i64).into());
            if let Some((c, w2)) = annihilate(self.small, w, j) {
                acc -= &sign * &binom * c * self.h(nu_rest, w2, wt);
            }
        }
        self.memo.borrow_mut().insert((nu.0, nu.1, w.0, w.1, wt.0, wt.1), acc.clone());
        acc
    }
}

/// Express a small module vector with rational coefficients as state pairs.
pub fn states_of(v: &ModuleVector) -> Vec<(State, BigRational)> {
    let mut out = Vec::new();
    for (lvl, col) in v.comps.iter().enumerate() {
        for (idx, c) in col.iter().enumerate() {
            if !c.is_zero() {
                out.push((
                    (lvl, idx),
                    c.as_rational().expect("deep states need rational coefficients").clone(),
                ));
            }
        }
    }
    out
}

/// As `states_of` but allowing Gaussian-rational coefficients, returned exact.
pub fn exact_states_of(v: &ModuleVector) -> Vec<(State, Exact)> {
    let mut out = Vec::new();
    for (lvl, col) in v.comps.iter().enumerate() {
        for (idx, c) in col.iter().enumerate() {
            if !c.is_zero() {
                out.push(((lvl, idx), c.clone()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fock_intertwiner, FockIntertwiner};
    use crate::scalar::rat;

    fn setup() -> (PartitionRegistry, FockIntertwiner) {
        let reg = PartitionRegistry::new(8);
        let it = fock_intertwiner(&rat(1, 2), &rat(1, 2), 3, 3, 8);
        (reg, it)
    }

    #[test]
    fn deep_matches_table_route() {
        // g̃(μ; u, w) must reproduce the table blocks: the coefficient of b_μ in
        // 𝒴(u,z)w at level |μ| is g̃/z_μ (z-powers stripped on both sides).
        let (reg, it) = setup();
        let deep = DeepIntertwiner::new(&reg, &reg, rat(1, 2), rat(1, 2), &it.table);
        for mu_lvl in 0..=6usize {
            for mu_idx in 0..reg.by_level[mu_lvl].len() {
                for u in [(0usize, 0usize), (1, 0), (2, 1)] {
                    for w in [(0usize, 0usize), (1, 0)] {
                        let g = deep.g((mu_lvl, mu_idx), u, w);
                        // table route: block (u → w → mu_lvl) entry row mu_idx
                        let want = match it.table.block(u.0, u.1, w.0, mu_lvl) {
                            Some(b) => {
                                // coefficient of b_μ; g̃ = coeff · z_μ
                                let c = b.at(mu_idx, w.1);
                                c.as_rational().unwrap() * &reg.zl[mu_lvl][mu_idx]
                            }
                            None => BigRational::zero(),
                        };
                        assert_eq!(g, want, "mismatch at mu=({mu_lvl},{mu_idx}) u={u:?} w={w:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn deep_insertion_matches_vacuum_table() {
        // h̃(ν; w, w̃) against an α = 0 table on F_{1/2}: the scaled value of
        // ⟨Y(b_ν, z)w | w̃⟩ is the (|w| → |w̃|) block entry times z_{w̃}.
        use crate::fock::{IntertwinerTable, TableModules};
        use crate::model::vacuum_ctx;
        let reg = PartitionRegistry::new(6);
        let vac = vacuum_ctx(6);
        let f = crate::fock::build_fock(&crate::fock::FockSpec { alpha: rat(1, 2), cutoff: 3 });
        let y = IntertwinerTable::build(
            &TableModules {
                op_module: &vac.fock.module,
                op_a: &vac.fock.a,
                src: &f.module,
                src_a: &f.a,
                src_charge: rat(1, 2),
                tgt: &f.module,
                tgt_a: &f.a,
                tgt_charge: rat(1, 2),
            },
            6,
            3,
            3,
        );
        let deep = DeepInsertion::new(&reg, &reg, rat(1, 2));
        for nu_lvl in 0..=6usize {
            for nu_idx in 0..reg.by_level[nu_lvl].len() {
                for w in [(0usize, 0usize), (1, 0), (2, 0), (2, 1)] {
                    for wt in [(0usize, 0usize), (1, 0), (2, 0), (2, 1)] {
                        let h = deep.h((nu_lvl, nu_idx), w, wt);
                        let want = match y.block(nu_lvl, nu_idx, w.0, wt.0) {
                            Some(b) => {
                                let c = b.at(wt.1, w.1);
                                c.as_rational().unwrap() * &reg.zl[wt.0][wt.1]
                            }
                            None => BigRational::zero(),
                        };
                        assert_eq!(
                            h, want,
                            "insertion mismatch nu=({nu_lvl},{nu_idx}) w={w:?} wt={wt:?}"
                        );
                    }
                }
            }
        }
    }
}
