use super::*;
use crate::birman_schwinger::{build_projections, skewed_second_kind};
use crate::grid::{bmo_norm, make_grid};
use crate::potentials::{sample_potential, PotentialSpec};
use std::sync::OnceLock;

fn bump_case() -> &'static (WaveCrossCheck, WaveOperatorBundle) {
    static CASE: OnceLock<(WaveCrossCheck, WaveOperatorBundle)> = OnceLock::new();
    CASE.get_or_init(|| {
        let g = make_grid(64.0, 512).unwrap();
        let v = sample_potential(&PotentialSpec::bump(0.5, 1.5), &g).unwrap();
        wave_cross_check(&v, &QuadConfig::default(), &WavePacketFamily::default(), &TimeSchedule::default()).unwrap()
    })
}

fn family_distance(w: &DMatrix<C64>, g: &Grid) -> f64 {
    let f = WavePacketFamily::default().matrix(g);
    relative_distance(&(w * &f), &f)
}

#[test]
fn zero_potential_gives_identity_both_ways() {
    let g = make_grid(32.0, 128).unwrap();
    let v = sample_potential(&PotentialSpec::Zero, &g).unwrap();
    let st = stationary_wave_op(&v, &QuadConfig::default()).unwrap();
    assert!(st.distance_from_identity() < 1e-14);
    let fam = WavePacketFamily { centers: vec![0.0], wavenumbers: vec![1.0], sigma: 4.0 };
    let (img, _) = time_dependent_wave_op(&v, &fam, &TimeSchedule::default()).unwrap();
    assert!(relative_distance(&img.outputs, &img.inputs) < 1e-10);
}

#[test]
fn stationary_and_time_dependent_agree() {
    let (c, st) = bump_case();
    assert!(c.stationary_vs_time <= 5e-2, "{c:?}");
    assert!(c.isometry_stationary <= 5e-2);
    assert!(c.isometry_time <= 5e-2);
    assert!(c.intertwining <= 5e-2);
    assert!(c.adjoint_defect <= 1e-10);
    assert!(c.schedule.converged);
    assert!(!st.quadrature.as_ref().unwrap().tail_warning);
}

#[test]
fn small_potential_is_first_order_on_packets() {
    let g = make_grid(64.0, 512).unwrap();
    let v = sample_potential(&PotentialSpec::bump(0.5, 1.5), &g).unwrap();
    let d1 = family_distance(&stationary_wave_op(&v.scaled(1e-6), &QuadConfig::default()).unwrap().w, &g);
    let d2 = family_distance(&stationary_wave_op(&v.scaled(1e-5), &QuadConfig::default()).unwrap().w, &g);
    assert!(d1 < 1e-5, "{d1}");
    assert!((d2 / d1 - 10.0).abs() < 0.5, "{d1} {d2}");
}

#[test]
fn plus_is_entrywise_conjugate() {
    let (_, st) = bump_case();
    let p = st.plus();
    assert_eq!(p.w[(3, 7)], st.w[(3, 7)].conj());
}

#[test]
fn container_roundtrip_and_checksum() {
    let (_, st) = bump_case();
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("w");
    write_bundle(st, &stem).unwrap();
    let back = read_bundle(&stem).unwrap();
    assert_eq!(back.w, st.w);
    assert_eq!(back.w_star, st.w_star);
    assert_eq!(back.method, WaveMethod::Stationary);
    let bin = stem.with_extension("bin");
    let mut bytes = std::fs::read(&bin).unwrap();
    bytes[100] ^= 1;
    std::fs::write(&bin, bytes).unwrap();
    assert!(read_bundle(&stem).is_err());
}

#[test]
fn identity_probe_is_one() {
    let g = make_grid(16.0, 128).unwrap();
    let id = WaveOperatorBundle::identity(&g, WaveMethod::Stationary);
    for p in [1.0, 2.0, 4.0, f64::INFINITY] {
        let r = lp_norm_probe(&id.w, &g, p, &WeightSpec::Unit, 12, 3).unwrap();
        assert!((r.lower_bound - 1.0).abs() < 1e-12, "{p} {r:?}");
        assert!((r.upper_bound - 1.0).abs() < 1e-12, "{p} {r:?}");
    }
}

#[test]
fn schur_sums_are_grid_stable() {
    let spec = CZKernelSpec::new(CZKind::Schur { rho: 2.0 }).unwrap();
    let row = |n| {
        let g = make_grid(40.0, n).unwrap();
        schur_sums(&spec.matrix(&g), &g, 2.0, &WeightSpec::Unit).unwrap().0
    };
    let (a, b) = (row(400), row(800));
    assert!((a - b).abs() / b < 1e-2, "{a} {b}");
    assert!(b <= 2.0 * std::f64::consts::PI);
}

#[test]
fn regular_bump_is_bounded_on_l2() {
    let (_, st) = bump_case();
    let r = lp_norm_probe(&st.w, &st.grid, 2.0, &WeightSpec::Unit, 24, 7).unwrap();
    assert!(r.lower_bound <= 1.05, "{r:?}");
    assert!(r.lower_bound <= r.upper_bound);
}

#[test]
fn even_weight_probe_is_reflection_invariant() {
    let (_, st) = bump_case();
    let g = &st.grid;
    let n = g.n;
    let tau = DMatrix::from_fn(n, n, |i, j| if i + j == n - 1 { cr(1.0) } else { cr(0.0) });
    let flipped = &tau * &st.w * &tau;
    let wt = WeightSpec::Japanese { a: 0.5 };
    assert!(wt.is_even(g));
    let a = lp_norm_probe(&st.w, g, 3.0, &wt, 12, 5).unwrap();
    let b = lp_norm_probe(&flipped, g, 3.0, &wt, 12, 5).unwrap();
    assert!((a.lower_bound - b.lower_bound).abs() < 1e-10 * a.lower_bound);
}

#[test]
fn truncated_hilbert_of_indicator() {
    // h = 2/41 puts nodes on +-1 and 5
    let g = make_grid(9.0, 370).unwrap();
    let f = g.sample_real(|x| {
        if (x.abs() - 1.0).abs() < 1e-9 {
            0.5
        } else if x.abs() < 1.0 {
            1.0
        } else {
            0.0
        }
    });
    let out = cz_apply(&CZKernelSpec::new(CZKind::TruncatedHilbert { eps: 2.0 }).unwrap(), &f).unwrap();
    let i = g.x().iter().position(|x| (x - 5.0).abs() < 1e-9).unwrap();
    assert!((out.values[i].re - 1.5f64.ln()).abs() < 1e-3, "{}", out.values[i]);
}

#[test]
fn k1_minus_vanishes_near_the_antidiagonals() {
    let spec = CZKernelSpec::new(CZKind::K1 { plus: false }).unwrap();
    for &(x, y) in &[(3.0, 3.5), (-2.0, 2.9), (0.1, -0.2), (7.0, -6.01)] {
        assert_eq!(spec.kernel(x, y), cr(0.0));
    }
    for &(x, y) in &[(5.0, 1.0), (-4.0, 0.5), (0.2, -8.0)] {
        assert!((spec.kernel(x, y) + spec.kernel(y, x)).norm() < 1e-15);
        assert!(spec.kernel(x, y).norm() > 0.0);
    }
}

#[test]
fn chi_decomposition_matches_direct_quadrature() {
    let g = make_grid(12.0, 200).unwrap();
    let one = cr(1.0);
    let specs = vec![
        CZKernelSpec::new(CZKind::K1 { plus: true }).unwrap(),
        CZKernelSpec::new(CZKind::K1 { plus: false }).unwrap(),
        CZKernelSpec::new(CZKind::K2 { plus: true }).unwrap(),
        CZKernelSpec::new(CZKind::K2 { plus: false }).unwrap(),
        CZKernelSpec::g(1, true, one, C64::new(0.3, 0.2)).unwrap(),
        CZKernelSpec::g(2, true, one, -one).unwrap(),
        CZKernelSpec::g(3, false, one, -I).unwrap(),
        CZKernelSpec::g(4, true, one, -one).unwrap(),
        CZKernelSpec::g(4, false, one, C64::new(-0.5, 1.0)).unwrap(),
    ];
    for s in &specs {
        let d = decomposition_defect(s, &g, 11).unwrap();
        assert!(d <= 1e-10, "{:?} {d}", s.kind);
    }
    let h = CZKernelSpec::new(CZKind::TruncatedHilbert { eps: 1.0 }).unwrap();
    assert!(cz_apply_decomposed(&h, &g.sample_real(|_| 1.0)).is_err());
}

#[test]
fn translation_kernel_adjoints() {
    let g = make_grid(10.0, 160).unwrap();
    let psi = Cutoff::default();
    for k in [TildeKernel::K1, TildeKernel::K2 { plus: true }, TildeKernel::K2 { plus: false }] {
        assert!(adjoint_identity_defect(k, &psi, &g) < 1e-12, "{k:?}");
    }
}

#[test]
fn restricted_g_kernels_reject_wrong_b() {
    let one = cr(1.0);
    assert!(CZKernelSpec::g(2, true, one, one).is_err());
    assert!(CZKernelSpec::g(3, false, one, one).is_err());
    assert!(CZKernelSpec::g(4, true, one, I).is_err());
    assert!(CZKernelSpec::g(5, true, one, one).is_err());
    assert!(CZKernelSpec::g(2, false, one, one).is_ok());
    assert!(CZKernelSpec::new(CZKind::TruncatedHilbert { eps: 0.0 }).is_err());
}

#[test]
fn atom_outputs_stay_bounded_for_cz_kernels() {
    let g = make_grid(80.0, 1600).unwrap();
    // truncation scales sit well below the smallest radius, so the sweep sees no transition
    let mut g1 = CZKernelSpec::g(1, true, cr(1.0), cr(0.5)).unwrap();
    g1.psi = Cutoff { lo: 0.09, hi: 0.36 };
    for spec in [CZKernelSpec::new(CZKind::TruncatedHilbert { eps: 0.3 }).unwrap(), g1] {
        let r = atom_bmo_suite(&spec.matrix(&g), &g, 100, (2.0, 20.0), 9).unwrap();
        assert!(r.envelope_slope <= 0.05, "{:?} {}", spec.kind, r.envelope_slope);
    }
}

fn plain_odd(x: f64, y: f64) -> C64 {
    let d = x.abs() - y.abs();
    // discrete principal value: the mirror pair |x| = |y| is skipped
    if d.abs() < 1e-12 {
        cr(0.0)
    } else {
        cr(1.0 / d)
    }
}

#[test]
fn plain_odd_kernel_on_constants_grows_with_the_box() {
    let spec = CZKernelSpec::new(CZKind::Custom(std::sync::Arc::new(plain_odd))).unwrap();
    let sup = |l: f64| {
        let g = make_grid(l, (20.0 * l) as usize).unwrap();
        let out = cz_apply(&spec, &g.sample_real(|_| 1.0)).unwrap();
        (out.abs().into_iter().fold(0.0, f64::max), bmo_norm(&out))
    };
    let (s1, b1) = sup(10.0);
    let (s2, b2) = sup(40.0);
    assert!(s2 - s1 > 2.0, "{s1} {s2}");
    assert!(b2 < 2.0 * b1, "{b1} {b2}");
}

#[test]
fn counterexample_models() {
    let g = make_grid(160.0, 8192).unwrap();
    let r = counterexample_sweep(&[10.0, 20.0, 40.0, 80.0], &g, (1e4, 1e8), None).unwrap();
    for row in &r.model_a {
        assert!(row.rel_err < 1e-2, "{row:?}");
    }
    assert!((r.tail_slope - 1.0).abs() < 0.1, "{}", r.tail_slope);
    assert!(r.model_b_slope.abs() < 0.1, "{}", r.model_b_slope);
    assert!(counterexample_sweep(&[100.0], &g, (1e4, 1e8), None).is_err());
}

#[test]
fn model_a_closed_form_matches_quadrature() {
    let g = make_grid(40.0, 4000).unwrap();
    for &(r, x) in &[(5.0, 7.0), (5.0, 12.0), (10.0, 3.0)] {
        let (a, b) = (model_a_value(&g, r, x), model_a_closed(r, x));
        assert!((a - b).abs() < 1e-2 * b.abs().max(1e-3), "{r} {x} {a} {b}");
    }
}

#[test]
fn d_star_with_zero_blocks_has_no_tail() {
    let g = make_grid(10.0, 512).unwrap();
    let w = skewed_second_kind(&g, 0.5, 0.6).unwrap();
    let vu = VUFactorization::new(&w).unwrap();
    let ps = build_projections(&vu).unwrap();
    let z = DMatrix::<C64>::zeros(vu.len(), vu.len());
    let rep = d_star_with_blocks(&vu, &ps, &z, &z, 2.0, 0.0, &DStarConfig::default()).unwrap();
    assert_eq!(rep.d_star_abs, 0.0);
    assert!(rep.tail_values.iter().all(|v| *v == 0.0));
}

#[test]
fn skewed_resonance_has_one_over_x_tail() {
    let g = make_grid(10.0, 1024).unwrap();
    let w = skewed_second_kind(&g, 0.5, 0.6).unwrap();
    let rep = d_star_probe(&w, &DStarConfig { r: Some(2.0), ..DStarConfig::default() }).unwrap();
    assert!(rep.reliable);
    assert!(rep.d_star_abs > 0.1, "{rep:?}");
    assert!((rep.tail_exponent + 1.0).abs() < 0.1, "{rep:?}");
    assert!((0.5..=2.0).contains(&rep.consistency_ratio), "{rep:?}");
}
