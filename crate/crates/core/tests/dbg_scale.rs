#[test]
fn criterion5_scale_timing() {
    use voa_core::model::{charge_ctx, vacuum_ctx};
    use voa_core::positivity::*;
    use voa_core::scalar::rat;
    let t0 = std::time::Instant::now();
    let s = rat(4, 5);
    let fam = TrinionFamily::new(&s).unwrap();
    let vac = vacuum_ctx(12);
    let ch1 = charge_ctx(&vac, &rat(1, 2), 4);
    let ch2 = charge_ctx(&vac, &rat(1, 2), 4);
    eprintln!("setup: {:?}", t0.elapsed());
    let pairs = basis_pairs(&ch1, &ch2, 2, 2);
    let t1 = std::time::Instant::now();
    let gl = fusion_gram_levels(&vac, &ch1, &ch2, &fam, &pairs, 12).unwrap();
    eprintln!("levels: {:?} window={}", t1.elapsed(), gl.window_ok);
    for q in [rat(1,4), rat(1,2), rat(3,4)] {
        let rep = assemble_gram(&gl, &q).unwrap();
        eprintln!("q={:?}: psd={} herm={} tail={:.2e}", q, rep.verdict.is_psd, rep.hermitian,
            rep.level_norms[12]/(rep.level_norms[0]+1e-30));
    }
}
