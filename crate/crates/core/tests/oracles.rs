use shortpath_core::eigensolve::{self, SolverConfig};
use shortpath_core::hilbert::{BasisMode, HsParams};
use shortpath_core::instance::random_instance;
use shortpath_core::{bw, verify};

#[test]
fn lanczos_matches_full_spectrum_above_dense_cutoff() {
    let inst = random_instance(9, 3, 18, &[-1, 1], 5).unwrap();
    let p = HsParams::new(0.7, 2.5, 3).unwrap();
    let cfg = SolverConfig::<f64>::default();
    let spec = eigensolve::full_spectrum(&inst, &p, BasisMode::Full).unwrap();
    let (e, v) = eigensolve::ground(&inst, &p, BasisMode::Full, &cfg).unwrap();
    assert!((e - spec[0]).abs() < 1e-9, "{e} vs {}", spec[0]);
    assert!((v.norm() - 1.0).abs() < 1e-10);
    let gap = eigensolve::gap(&inst, &p, BasisMode::Full, &cfg).unwrap();
    assert!((gap - (spec[1] - spec[0])).abs() < 1e-8);
}

#[test]
fn even_mode_agrees_with_full_mode_ground() {
    let inst = random_instance(8, 2, 16, &[-1, 1], 9).unwrap();
    let p = HsParams::new(1.0, 3.0, 3).unwrap();
    let cfg = SolverConfig::<f64>::default();
    let (even, _) = eigensolve::ground(&inst, &p, BasisMode::Even, &cfg).unwrap();
    let full = eigensolve::full_spectrum(&inst, &p, BasisMode::Full).unwrap();
    assert!((even - full[0]).abs() < 1e-9);
}

#[test]
fn brillouin_wigner_agrees_on_battery() {
    let cfg = SolverConfig::<f64>::default();
    for e in verify::battery(6, 4, 9).unwrap() {
        let p = e.params();
        let (g, _) = eigensolve::ground(&e.inst, &p, e.mode, &cfg).unwrap();
        let bw_e = bw::self_consistent_e01(&e.inst, &p, e.mode, &cfg).unwrap();
        assert!((g - bw_e).abs() < 1e-8, "#{}: {g} vs {bw_e}", e.index);
        let p_ov = bw::p_ov_exact(&e.inst, &p, e.mode, &cfg).unwrap();
        assert!(p_ov > 0.0 && p_ov <= 1.0);
    }
}
