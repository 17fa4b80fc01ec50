//! Acceptance suite: ten criteria, each a list of named numeric checks. Shared by
//! the `selftest` command and the acceptance test target.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::birman_schwinger::{
    build_m, build_projections, cancellation_exponent, concordance_exponent, resolvent_identity_defect, MFactor,
    VUFactorization,
};
use crate::error::{config, Result};
use crate::free_ops::{f_alpha_beta, resolvent_entry, resolvent_jump_entry, taylor_split, FKind, Sign, SpectralParam};
use crate::grid::{ap_characteristic, make_grid, WeightSpec};
use crate::potentials::{resonance_builder, sample_potential, zero_eigen_builder, PotentialSpec, Profile};
use crate::propagator_multiplier::{
    completeness_defect, decay_scan, hormander_mikhlin_check, spectral_multiplier, DecayConfig, MultiplierSpec,
};
use crate::quad::geomspace;
use crate::spectral::{
    build_hamiltonian, classify_zero_energy, eigen_slice, eigendecompose, Boundary, SpectralOptions, ZeroClass,
};
use crate::wave_ops::{
    atom_bmo_suite, counterexample_sweep, decomposition_defect, relative_distance, stationary_wave_op,
    time_dependent_wave_op, wave_cross_check, CZKernelSpec, CZKind, QuadConfig, TimeSchedule, WaveCrossCheck,
    WaveOperatorBundle, WavePacketFamily,
};

const WAVE_BUMP: (f64, f64) = (0.5, 1.5);

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub const CRITERIA: [&str; 10] = [
    "algebraic identities",
    "resolvent identities",
    "projection and cancellation laws",
    "resonance classification concordance",
    "wave-operator cross-validation",
    "counterexample quantitatives",
    "decay exponents",
    "embedded eigenvalue",
    "CZ kernels and weights",
    "multiplier consistency",
];

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Flips the sign of the closed-form resolvent jump kernel.
    pub corrupt_kernel_sign: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// human-readable acceptance rule, e.g. "<= 1e-12"
    pub rule: String,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, rule: format!("<= {limit:e}"), pass: value <= limit }
    }

    pub fn near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Check { name: name.into(), value, rule: format!("{target} +- {tol}"), pass: (value - target).abs() <= tol }
    }

    pub fn between(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check { name: name.into(), value, rule: format!("in [{lo}, {hi}]"), pass: (lo..=hi).contains(&value) }
    }

    pub fn ge(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, rule: format!(">= {limit}"), pass: value >= limit }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Check { name: name.into(), value: if ok { 1.0 } else { 0.0 }, rule: "true".into(), pass: ok }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: String,
    pub checks: Vec<Check>,
    /// set when the criterion could not be evaluated at all
    pub error: Option<String>,
    pub pass: bool,
    /// wall time; kept out of reports so they stay byte-identical
    #[serde(skip)]
    pub seconds: f64,
}

impl CriterionResult {
    pub fn failing(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("[{status}] {:>2}. {} ({:.1}s)", self.id, self.title, self.seconds);
        if let Some(e) = &self.error {
            s.push_str(&format!("\n        error: {e}"));
        }
        for c in self.failing() {
            s.push_str(&format!("\n        failing: {} = {:.6e} (want {})", c.name, c.value, c.rule));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub options: SuiteOptions,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
}

/// Runs criteria lazily, sharing the wave-operator build between 5 and 10.
pub struct Suite {
    pub opts: SuiteOptions,
    wave: OnceLock<std::result::Result<(WaveCrossCheck, WaveOperatorBundle), String>>,
}

impl Suite {
    pub fn new(opts: SuiteOptions) -> Self {
        Suite { opts, wave: OnceLock::new() }
    }

    pub fn run(&self, id: usize) -> Result<CriterionResult> {
        if !(1..=10).contains(&id) {
            return config(format!("criterion must lie in 1..=10, got {id}"));
        }
        let t = Instant::now();
        let out = match id {
            1 => self.algebraic(),
            2 => self.resolvent(),
            3 => self.projections(),
            4 => self.concordance(),
            5 => self.wave_ops(),
            6 => self.counterexamples(),
            7 => self.decay(),
            8 => self.embedded(),
            9 => self.cz_weights(),
            _ => self.multipliers(),
        };
        let (checks, error) = match out {
            Ok(c) => (c, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        let pass = error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.pass);
        Ok(CriterionResult {
            id,
            title: CRITERIA[id - 1].into(),
            checks,
            error,
            pass,
            seconds: t.elapsed().as_secs_f64(),
        })
    }

    pub fn run_all(&self, ids: &[usize], mut each: impl FnMut(&CriterionResult)) -> Result<SuiteReport> {
        let mut criteria = Vec::new();
        for &id in ids {
            let r = self.run(id)?;
            each(&r);
            criteria.push(r);
        }
        let pass = criteria.iter().all(|c| c.pass);
        Ok(SuiteReport { options: self.opts.clone(), criteria, pass })
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.opts.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    fn algebraic(&self) -> Result<Vec<Check>> {
        let mut rng = self.rng(1);
        let mut ab: f64 = 0.0;
        for _ in 0..1000 {
            let (l, x, y) = (rng.gen_range(0.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let v = f_alpha_beta(l, x, y, rng.gen_range(0..4), rng.gen_range(0..4))?;
            ab = ab.max((v.direct - v.expansion).norm());
        }
        let mut taylor: f64 = 0.0;
        for _ in 0..1000 {
            let (l, x, y) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let order = rng.gen_range(1..4u32);
            for f in [FKind::Plus, FKind::Minus, FKind::TildePlus, FKind::TildeMinus] {
                if order == 3 && matches!(f, FKind::Plus | FKind::Minus) {
                    continue;
                }
                let t = taylor_split(l, x, y, order, f)?;
                taylor = taylor.max((t.reconstruct() - t.direct()).norm());
            }
        }
        let sign = if self.opts.corrupt_kernel_sign { -1.0 } else { 1.0 };
        let mut jump: f64 = 0.0;
        for _ in 0..1000 {
            let (l, r): (f64, f64) = (rng.gen_range(0.01..5.0), rng.gen_range(0.0..10.0));
            let a = resolvent_entry(SpectralParam::new(l, Sign::Plus)?, r)
                - resolvent_entry(SpectralParam::new(l, Sign::Minus)?, r);
            let b = resolvent_jump_entry(l, r) * sign;
            jump = jump.max((a - b).norm() / b.norm().max(1.0));
        }
        Ok(vec![
            Check::le("f_alpha_beta direct vs expansion", ab, 1e-12),
            Check::le("Taylor reconstruction", taylor, 1e-10),
            Check::le("resolvent jump closed form", jump, 1e-12),
        ])
    }

    fn resolvent(&self) -> Result<Vec<Check>> {
        let mut out = Vec::new();
        for (perturbed, tag) in [(false, "free"), (true, "perturbed")] {
            let d = |n: usize| -> Result<f64> {
                let v = sample_potential(&PotentialSpec::bump(1.0, 2.0), &make_grid(20.0, n)?)?;
                let f = v.grid.sample_real(|x| (-x * x).exp());
                resolvent_identity_defect(&v, 1.0, &f, perturbed)
            };
            let (a, b) = (d(1024)?, d(2048)?);
            out.push(Check::le(&format!("{tag} defect at n = 2048"), b, 1e-2));
            out.push(Check::between(&format!("{tag} refinement ratio"), a / b, 3.0, 5.0));
        }
        Ok(out)
    }

    fn projections(&self) -> Result<Vec<Check>> {
        let v = sample_potential(&PotentialSpec::bump(1.0, 2.0), &make_grid(10.0, 256)?)?;
        let vu = VUFactorization::new(&v)?;
        let ps = build_projections(&vu)?;
        let mut rng = self.rng(3);
        let probe = DVector::from_fn(vu.len(), |_, _| rng.gen_range(-1.0..1.0));
        let lams = geomspace(1e-3, 1e-1, 6);
        let mut out = vec![
            Check::le("projection defect", ps.projection_defect(), 1e-10),
            Check::le("moment annihilation", ps.moment_defect(&vu, &probe), 1e-10),
        ];
        for (a, tol) in [(1u32, 0.15), (2, 0.15), (3, 0.2)] {
            let e = cancellation_exponent(&v, a, &lams)?.exponent;
            out.push(Check::near(&format!("cancellation exponent alpha = {a}"), e, a as f64 - 3.0, tol));
        }
        Ok(out)
    }

    fn concordance(&self) -> Result<Vec<Check>> {
        let cases = [
            (PotentialSpec::Zero, 10.0, 1024, Some((-3.0, 0.3))),
            (resonance_builder(1.0, 1.0, Profile::default())?, 10.0, 1024, Some((-1.0, 0.2))),
            (resonance_builder(0.0, 1.0, Profile::default())?, 10.0, 1024, Some((-3.0, 0.3))),
            (PotentialSpec::bump(1.0, 2.0), 10.0, 1024, Some((0.0, 0.2))),
            // non-compact: approaches -4 only as the box grows
            (zero_eigen_builder(2.0)?, 30.0, 512, None),
        ];
        let mut out = Vec::new();
        for (spec, l, n, want) in cases {
            let v = sample_potential(&spec, &make_grid(l, n)?)?;
            let class = classify_zero_energy(&v)?.class;
            let e = concordance_exponent(&v)?.exponent;
            let name = spec.name();
            let label = match &spec {
                PotentialSpec::ResonanceBuilt { c, .. } if *c != 0.0 => "first_kind_built",
                PotentialSpec::ResonanceBuilt { .. } => "second_kind_built",
                _ => name,
            };
            out.push(Check::holds(
                &format!("{label}: shooting class {class:?} = exponent class"),
                class == ZeroClass::from_exponent(e),
            ));
            if let Some((target, tol)) = want {
                out.push(Check::near(&format!("{label}: blow-up exponent"), e, target, tol));
            } else {
                out.push(Check::holds(&format!("{label}: zero-eigenvalue class"), class == ZeroClass::ZeroEigenvalue));
            }
        }
        Ok(out)
    }

    fn wave_case(&self) -> Result<&(WaveCrossCheck, WaveOperatorBundle)> {
        let r = self.wave.get_or_init(|| {
            let g = make_grid(64.0, 512).map_err(|e| e.to_string())?;
            let v = sample_potential(&PotentialSpec::bump(WAVE_BUMP.0, WAVE_BUMP.1), &g).map_err(|e| e.to_string())?;
            wave_cross_check(&v, &QuadConfig::default(), &WavePacketFamily::default(), &TimeSchedule::default())
                .map_err(|e| e.to_string())
        });
        r.as_ref().map_err(|e| crate::Error::Numerical(e.clone()))
    }

    fn wave_ops(&self) -> Result<Vec<Check>> {
        let (c, _) = self.wave_case()?;
        let g = make_grid(32.0, 128)?;
        let z = sample_potential(&PotentialSpec::Zero, &g)?;
        let st = stationary_wave_op(&z, &QuadConfig::default())?;
        let fam = WavePacketFamily { centers: vec![0.0], wavenumbers: vec![1.0], sigma: 4.0 };
        let (img, _) = time_dependent_wave_op(&z, &fam, &TimeSchedule::default())?;
        Ok(vec![
            Check::le("stationary vs time-dependent", c.stationary_vs_time, 5e-2),
            Check::le("isometry (stationary)", c.isometry_stationary, 5e-2),
            Check::le("isometry (time-dependent)", c.isometry_time, 5e-2),
            Check::le("intertwining", c.intertwining, 5e-2),
            Check::le("V = 0 stationary identity", st.distance_from_identity(), 1e-14),
            Check::le("V = 0 time-dependent identity", relative_distance(&img.outputs, &img.inputs), 1e-10),
        ])
    }

    fn counterexamples(&self) -> Result<Vec<Check>> {
        let g = make_grid(160.0, 8192)?;
        let r = counterexample_sweep(&[10.0, 20.0, 40.0, 80.0], &g, (1e4, 1e8), None)?;
        let mut out: Vec<Check> = r
            .model_a
            .iter()
            .map(|row| Check::le(&format!("model (a) at x = R + 2, R = {}", row.r), row.rel_err, 2e-2))
            .collect();
        out.push(Check::near("model (a) tail slope", r.tail_slope, 1.0, 0.1));
        out.push(Check::le("model (b) sup-norm slope", r.model_b_slope, 0.05));
        Ok(out)
    }

    fn decay(&self) -> Result<Vec<Check>> {
        let g = make_grid(400.0, 4096)?;
        let free = sample_potential(&PotentialSpec::Zero, &g)?;
        let f = decay_scan(&free, &[(1.0, 0.0), (0.5, 0.5)], &DecayConfig::default())?;
        let bump = sample_potential(&PotentialSpec::bump(0.5, 1.5), &g)?;
        let cfg = DecayConfig { centers: vec![0.0, 20.0, 60.0], ..DecayConfig::default() };
        let p = decay_scan(&bump, &[(0.75, 0.25), (0.5, 0.5)], &cfg)?;
        let worst = f.rows.iter().chain(&p.rows).map(|r| r.exponent).fold(f64::NEG_INFINITY, f64::max);
        Ok(vec![
            Check::near("free (1, 0)", f.rows[0].exponent, -0.25, 0.02),
            Check::near("free (1/2, 1/2)", f.rows[1].exponent, 0.0, 0.01),
            Check::near("bump (3/4, 1/4)", p.rows[0].exponent, -0.125, 0.03),
            Check::near("bump (1/2, 1/2)", p.rows[1].exponent, 0.0, 0.01),
            Check::le("no growth", worst, 1e-3),
        ])
    }

    fn embedded(&self) -> Result<Vec<Check>> {
        let g = make_grid(15.0, 4096)?;
        let v = sample_potential(&PotentialSpec::Embedded, &g)?;
        let h = build_hamiltonian(&v, Boundary::DirichletClamped)?;
        let pairs = eigen_slice(&h, 0.9, 1.1, 64)?;
        let best = pairs
            .iter()
            .max_by(|a, b| a.localization.total_cmp(&b.localization))
            .ok_or_else(|| crate::Error::Numerical("no eigenvalue near 1".into()))?;
        let sech: Vec<f64> = g.x().iter().map(|x| 1.0 / x.cosh()).collect();
        let ns = sech.iter().map(|s| s * s).sum::<f64>().sqrt();
        let cos = best.vector.iter().zip(&sech).map(|(a, b)| a * b).sum::<f64>().abs() / ns;
        // Birman-Schwinger: smallest singular value of M dips at lambda = 1
        let gs = make_grid(15.0, 256)?;
        let vu = VUFactorization::new(&sample_potential(&PotentialSpec::Embedded, &gs)?)?;
        let sig = |l: f64| -> Result<f64> { Ok(1.0 / MFactor::new(&build_m(&vu, l, Sign::Plus)?)?.inverse_norm()) };
        let (s1, near) = (sig(1.0)?, sig(0.9)?.min(sig(1.1)?));
        Ok(vec![
            Check::near("eigenvalue", best.value, 1.0, 1e-3),
            Check::ge("cosine with sech", cos, 0.999),
            Check::le("M near-singular at 1 (sigma_min ratio to neighbours)", s1 / near, 1e-2),
        ])
    }

    fn cz_weights(&self) -> Result<Vec<Check>> {
        let g = make_grid(12.0, 200)?;
        let one = cr(1.0);
        let specs = [
            CZKernelSpec::new(CZKind::K1 { plus: true })?,
            CZKernelSpec::new(CZKind::K1 { plus: false })?,
            CZKernelSpec::new(CZKind::K2 { plus: true })?,
            CZKernelSpec::new(CZKind::K2 { plus: false })?,
            CZKernelSpec::g(1, true, one, C64::new(0.3, 0.2))?,
            CZKernelSpec::g(2, true, one, -one)?,
            CZKernelSpec::g(3, false, one, C64::new(0.0, -1.0))?,
            CZKernelSpec::g(4, true, one, -one)?,
            CZKernelSpec::g(4, false, one, C64::new(-0.5, 1.0))?,
        ];
        let mut chi: f64 = 0.0;
        for s in &specs {
            chi = chi.max(decomposition_defect(s, &g, self.opts.seed)?);
        }
        let ga = make_grid(80.0, 1600)?;
        let h = CZKernelSpec::new(CZKind::TruncatedHilbert { eps: 0.3 })?;
        let atoms = atom_bmo_suite(&h.matrix(&ga), &ga, 100, (2.0, 20.0), self.opts.seed)?;
        let gw = make_grid(1.0, 512)?;
        let unit = ap_characteristic(&WeightSpec::Unit, 2.0, &gw)?.value;
        let half = |n| -> Result<f64> {
            Ok(ap_characteristic(&WeightSpec::Power { a: 0.5 }, 2.0, &make_grid(1.0, n)?)?.value)
        };
        let (a, b) = (half(512)?, half(1024)?);
        let power = hormander_mikhlin_check(&MultiplierSpec::imaginary_power(1.0), 1.0)?;
        let jump = hormander_mikhlin_check(&MultiplierSpec::jump(1.0), 1.0)?;
        Ok(vec![
            Check::le("chi decomposition", chi, 1e-10),
            Check::le("truncated Hilbert atom envelope slope", atoms.envelope_slope, 0.05),
            Check::near("[unit]_A2", unit, 1.0, 0.0),
            Check::le("[|x|^(1/2)]_A2 refinement change", ((a - b) / a).abs(), 0.05),
            Check::holds("Mikhlin passes for lambda^i", power.mikhlin_pass),
            Check::holds("Mikhlin fails for a jump", !jump.mikhlin_pass),
        ])
    }

    fn multipliers(&self) -> Result<Vec<Check>> {
        let (c, w) = self.wave_case()?;
        let construction = c.stationary_vs_time;
        let v = sample_potential(&PotentialSpec::bump(WAVE_BUMP.0, WAVE_BUMP.1), &w.grid)?;
        let sd = eigendecompose(&build_hamiltonian(&v, Boundary::Periodic)?, SpectralOptions::default())?;
        let fam = WavePacketFamily::default().matrix(&w.grid);
        let mut out = Vec::new();
        for s in [MultiplierSpec::constant(1.0), MultiplierSpec::heat(), MultiplierSpec::bump(3.0, 2.0)] {
            let (cmp, _, _) = spectral_multiplier(&sd, w, &s, &fam)?;
            out.push(Check::le(&format!("routes agree for {}", cmp.name), cmp.distance, 3.0 * construction));
        }
        out.push(Check::le("sum P_j + W W* = I", completeness_defect(&sd, w), 5e-2));
        Ok(out)
    }
}
