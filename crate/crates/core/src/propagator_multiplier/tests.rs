use super::*;
use crate::grid::make_grid;
use crate::potentials::{sample_potential, PotentialSpec};
use crate::spectral::{eigendecompose, SpectralOptions};
use crate::wave_ops::{stationary_wave_op, QuadConfig, WaveMethod, WavePacketFamily};
use num_bigint::BigInt;
use proptest::prelude::*;

fn spectral(spec: &PotentialSpec, l: f64, n: usize, bc: Boundary) -> (SampledPotential, SpectralData) {
    let g = make_grid(l, n).unwrap();
    let v = sample_potential(spec, &g).unwrap();
    let sd = eigendecompose(&build_hamiltonian(&v, bc).unwrap(), SpectralOptions::default()).unwrap();
    (v, sd)
}

fn packet(g: &crate::grid::Grid) -> SampledFunction {
    g.sample(|x| C64::from_polar((-x * x / 18.0).exp(), 1.3 * x))
}

#[test]
fn evolve_at_zero_is_the_ac_projection() {
    let (_, sd) = spectral(&PotentialSpec::bump(-2.0, 1.5), 20.0, 200, Boundary::DirichletClamped);
    assert!(!sd.bound_state_indices.is_empty());
    let f = packet(&sd.grid);
    let u = evolve(&sd, 0.0, &f).unwrap();
    let p = crate::spectral::ac_projector(&sd).map(cr) * DVector::from_column_slice(&f.values);
    let d = u.values.iter().zip(p.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(d < 1e-12);
}

#[test]
fn evolve_is_unitary_on_the_ac_part() {
    let (_, sd) = spectral(&PotentialSpec::bump(-2.0, 1.5), 20.0, 200, Boundary::DirichletClamped);
    let f = packet(&sd.grid);
    let e = |u: &SampledFunction| u.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n0 = e(&evolve(&sd, 0.0, &f).unwrap());
    for t in [0.5, 3.0, 40.0, 300.0] {
        assert!((e(&evolve(&sd, t, &f).unwrap()) - n0).abs() < 1e-10 * n0);
    }
}

#[test]
fn free_evolution_matches_the_fourier_propagator() {
    let (_, sd) = spectral(&PotentialSpec::Zero, 20.0, 256, Boundary::Periodic);
    let f = packet(&sd.grid);
    let prop = FreePropagator::new(&sd.grid, Symbol::Stencil);
    for t in [0.7, 5.0] {
        let a = evolve(&sd, t, &f).unwrap();
        let b = prop.evolve(t, &f).u;
        let d = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 1e-6, "{t} {d}");
    }
}

#[test]
fn region_vertices_and_edges() {
    assert!(in_region(0.5, 0.5).unwrap());
    assert!(!in_region(1.0, 0.0).unwrap());
    assert!(!in_region(1.0, 1.0 / 3.0).unwrap());
    assert!(!in_region(2.0 / 3.0, 0.0).unwrap());
    assert!(!in_region(0.8, 0.0).unwrap());
    assert!(in_region(0.75, 0.25).unwrap());
    assert!(!in_region(0.6, 0.6).unwrap());
    assert!(!in_region(1.0, 1.0).unwrap());
    assert!(in_region(0.2, 0.4).is_err());
    assert!(in_region(1.2, 0.1).is_err());
}

#[test]
fn region_exact_on_rational_boundary_points() {
    let r = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
    // on AB (included) and on AD (included)
    assert!(in_region_exact(&r(4, 5), &r(2, 5)));
    assert!(in_region_exact(&r(7, 12), &r(1, 4)));
    // just across AB
    assert!(!in_region_exact(&r(4, 5), &r(2_000_001, 5_000_000)));
    // B itself lies on BC
    assert!(!in_region_exact(&r(1, 1), &r(1, 3)));
    assert!(in_region_exact(&r(999_999, 1_000_000), &r(1, 3)));
}

proptest! {
    #[test]
    fn segments_from_a_stay_inside(a in 0.0f64..1.0) {
        // the region is convex and holds A and (0.95, 0.1)
        let (bx, by) = (0.95, 0.1);
        let (x, y) = (0.5 * (1.0 - a) + bx * a, 0.5 * (1.0 - a) + by * a);
        prop_assume!(y <= x);
        let inside = in_region(x, y).unwrap();
        prop_assert!(inside);
    }

    #[test]
    fn region_matches_half_planes_off_the_boundary(x in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let y = x * t;
        let s = [x + 3.0 * y - 2.0, 2.0 - 3.0 * x - y, x - 1.0, -y];
        prop_assume!(s.iter().all(|v| v.abs() > 1e-9));
        let want = s[0] < 0.0 && s[1] < 0.0 && s[2] < 0.0 && s[3] < 0.0;
        prop_assert_eq!(in_region(x, y).unwrap(), want);
    }
}

#[test]
fn free_decay_exponents() {
    let g = make_grid(400.0, 4096).unwrap();
    let v = sample_potential(&PotentialSpec::Zero, &g).unwrap();
    let r = decay_scan(&v, &[(1.0, 0.0), (0.5, 0.5)], &DecayConfig::default()).unwrap();
    assert!((r.rows[0].exponent + 0.25).abs() < 0.02, "{:?}", r.rows[0].exponent);
    assert!(r.rows[1].exponent.abs() < 0.01);
    assert!(r.rows.iter().all(|row| row.exponent <= 1e-3));
    assert!(!r.rows[0].in_region && r.rows[1].in_region);
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("inv_p,inv_q,exponent,stderr,in_region"));
}

#[test]
fn decay_scan_rejects_bad_pairs() {
    let g = make_grid(40.0, 256).unwrap();
    let v = sample_potential(&PotentialSpec::Zero, &g).unwrap();
    assert!(decay_scan(&v, &[(0.2, 0.5)], &DecayConfig::default()).is_err());
    assert!(decay_scan(&v, &[], &DecayConfig::default()).is_err());
    let far = DecayConfig { centers: vec![39.0], ..DecayConfig::default() };
    assert!(decay_scan(&v, &[(0.5, 0.5)], &far).is_err());
}

#[test]
fn bound_states_are_removed_from_decay_data() {
    let g = make_grid(100.0, 1024).unwrap();
    let v = sample_potential(&PotentialSpec::bump(-2.0, 1.5), &g).unwrap();
    let cfg = DecayConfig { t_max: 10.0, times: 8, widths: vec![1.0], ..DecayConfig::default() };
    let r = decay_scan(&v, &[(0.5, 0.5)], &cfg).unwrap();
    assert!(r.bound_states_removed >= 1);
    assert!(r.rows[0].exponent <= 1e-3);
}

#[test]
fn multiplier_routes_agree_for_the_free_operator() {
    let (_, sd) = spectral(&PotentialSpec::Zero, 32.0, 256, Boundary::Periodic);
    let id = WaveOperatorBundle::identity(&sd.grid, WaveMethod::Stationary);
    let fam = WavePacketFamily { centers: vec![0.0], wavenumbers: vec![1.0, -0.7], sigma: 4.0 }.matrix(&sd.grid);
    for s in [MultiplierSpec::constant(1.0), MultiplierSpec::heat(), MultiplierSpec::bump(1.0, 0.5)] {
        let (c, _, _) = spectral_multiplier(&sd, &id, &s, &fam).unwrap();
        assert!(c.distance <= 1e-6, "{c:?}");
    }
}

#[test]
fn multiplier_routes_agree_with_a_bump() {
    let (v, sd) = spectral(&PotentialSpec::bump(0.5, 1.5), 64.0, 512, Boundary::Periodic);
    let w = stationary_wave_op(&v, &QuadConfig::default()).unwrap();
    let fam = WavePacketFamily::default().matrix(&sd.grid);
    for s in [MultiplierSpec::constant(1.0), MultiplierSpec::heat(), MultiplierSpec::bump(3.0, 2.0)] {
        let (c, _, _) = spectral_multiplier(&sd, &w, &s, &fam).unwrap();
        assert!(c.distance <= 1e-2, "{c:?}");
    }
    assert!(completeness_defect(&sd, &w) <= 5e-2);
}

#[test]
fn negative_part_selects_bound_states() {
    // depth 2 keeps the shallow second state localized at this box size
    let (v, sd) = spectral(&PotentialSpec::bump(-2.0, 1.5), 32.0, 256, Boundary::Periodic);
    assert_eq!(sd.point_indices().len(), 2);
    let w = stationary_wave_op(&v, &QuadConfig { low_nodes: 60, high_nodes: 120, ..QuadConfig::default() }).unwrap();
    let fam = crate::wave_ops::WavePacketFamily { centers: vec![0.0], wavenumbers: vec![0.0, 0.8], sigma: 1.5 }
        .matrix(&sd.grid);
    let (c, a, _) = spectral_multiplier(&sd, &w, &MultiplierSpec::negative_part(), &fam).unwrap();
    assert!(a.norm() > 0.0);
    assert!(c.distance <= 5e-2, "{c:?}");
}

#[test]
fn smoothness_checks() {
    let one = hormander_mikhlin_check(&MultiplierSpec::constant(1.0), 1.0).unwrap();
    assert!(one.pass);
    let g: Vec<C64> = (0..4096).map(|i| cr(eta(-4.0 + 8.0 * i as f64 / 4096.0))).collect();
    assert!((one.hormander_m - hs_norm(&g, 4.0, 1.0)).abs() < 1e-12 * one.hormander_m);
    let p = hormander_mikhlin_check(&MultiplierSpec::imaginary_power(1.0), 1.0).unwrap();
    assert!(p.pass);
    assert!((p.mikhlin.0 - 1.0).abs() < 1e-12 && (p.mikhlin.1 - 1.0).abs() < 1e-3);
    let j = hormander_mikhlin_check(&MultiplierSpec::jump(1.0), 1.0).unwrap();
    assert!(!j.hormander_pass && !j.mikhlin_pass);
    assert!(hormander_mikhlin_check(&MultiplierSpec::constant(1.0), 0.5).is_err());
}

#[test]
fn eta_is_a_bump_on_the_octave_pair() {
    assert_eq!(eta(0.5), 0.0);
    assert_eq!(eta(2.0), 0.0);
    assert_eq!(eta(1.0), 1.0);
    assert!(eta(0.7) > 0.0 && eta(1.5) > 0.0);
    assert!((eta(2f64.powf(0.3)) - eta(2f64.powf(-0.3))).abs() < 1e-15);
}
