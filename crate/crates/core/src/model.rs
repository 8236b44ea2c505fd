//! Assembly of the free-boson model pieces needed by block evaluation and
//! sewing: the vacuum sector (V, Θ, Virasoro) and per-charge contexts
//! (F_α, its dual, conjugations, and the vacuum-insertion tables).

use crate::fock::{build_fock, contragredient_fock, theta_map, DualFock, FockModule, FockSpec, IntertwinerTable, TableModules};
use crate::blocks::{dual_l_family, ModuleBlockCtx, SlotCtx};
use crate::module::{ConjugationMap, GradedModule, ModeFamily};
use num_rational::BigRational;
use num_traits::Zero;
use std::sync::Arc;

/// The vacuum sector: V = F₀ with Virasoro modes and the PCT operator.
pub struct VacuumCtx {
    pub fock: FockModule,
    pub l: Arc<ModeFamily>,
    pub theta: ConjugationMap,
}

pub fn vacuum_ctx(cutoff: usize) -> VacuumCtx {
    let fock = build_fock(&FockSpec { alpha: BigRational::zero(), cutoff });
    let l = Arc::new(fock.l.clone());
    let theta = theta_map(&fock);
    VacuumCtx { fock, l, theta }
}

/// One charge sector F_α with everything block evaluation needs.
pub struct ChargeCtx {
    pub alpha: BigRational,
    pub fock: FockModule,
    pub dual: DualFock,
    pub l: Arc<ModeFamily>,
    pub dual_l: Arc<ModeFamily>,
    /// Y on F_α: α = 0 table with insertions from V.
    pub table: Arc<IntertwinerTable>,
    /// Y on F_α′ (the contragredient action), same shape.
    pub dual_table: Arc<IntertwinerTable>,
}

/// Build a charge sector. `w_cut` truncates F_α; insertions from V run
/// through the vacuum context's cutoff.
pub fn charge_ctx(vac: &VacuumCtx, alpha: &BigRational, w_cut: usize) -> ChargeCtx {
    let fock = build_fock(&FockSpec { alpha: alpha.clone(), cutoff: w_cut });
    let dual = contragredient_fock(&fock);
    let l = Arc::new(fock.l.clone());
    let dual_l = Arc::new(dual.l.clone());
    let u_max = vac.fock.module.cutoff;
    let table = Arc::new(IntertwinerTable::build(
        &TableModules {
            op_module: &vac.fock.module,
            op_a: &vac.fock.a,
            src: &fock.module,
            src_a: &fock.a,
            src_charge: alpha.clone(),
            tgt: &fock.module,
            tgt_a: &fock.a,
            tgt_charge: alpha.clone(),
        },
        u_max,
        w_cut,
        w_cut,
    ));
    let dual_table = Arc::new(IntertwinerTable::build(
        &TableModules {
            op_module: &vac.fock.module,
            op_a: &vac.fock.a,
            src: &dual.module,
            src_a: &dual.a,
            src_charge: -alpha.clone(),
            tgt: &dual.module,
            tgt_a: &dual.a,
            tgt_charge: -alpha.clone(),
        },
        u_max,
        w_cut,
        w_cut,
    ));
    ChargeCtx { alpha: alpha.clone(), fock, dual, l, dual_l, table, dual_table }
}

impl ChargeCtx {
    /// Block context for basic blocks on W = F_α.
    pub fn block_ctx(&self, vac: &VacuumCtx) -> ModuleBlockCtx {
        ModuleBlockCtx {
            module: self.fock.module.clone(),
            dual: self.dual.module.clone(),
            conj: self.dual.conj.clone(),
            l: self.l.clone(),
            table: self.table.clone(),
            v_module: vac.fock.module.clone(),
            v_l: vac.l.clone(),
        }
    }

    /// Block context for W = F_α′ (the dual as the primary slot).
    pub fn dual_block_ctx(&self, vac: &VacuumCtx) -> ModuleBlockCtx {
        ModuleBlockCtx {
            module: self.dual.module.clone(),
            dual: self.fock.module.clone(),
            conj: self.dual.conj.inverse(),
            l: self.dual_l.clone(),
            table: self.dual_table.clone(),
            v_module: vac.fock.module.clone(),
            v_l: vac.l.clone(),
        }
    }

    pub fn slot(&self) -> SlotCtx {
        SlotCtx { module: self.fock.module.clone(), l: self.l.clone() }
    }

    pub fn dual_slot(&self) -> SlotCtx {
        SlotCtx { module: self.dual.module.clone(), l: self.dual_l.clone() }
    }
}

/// Direct access to a module's dual L-family, mirroring `blocks::dual_l_family`.
pub fn dual_family(l: &ModeFamily, module: &Arc<GradedModule>, dual: &Arc<GradedModule>) -> ModeFamily {
    dual_l_family(l, module, dual)
}
