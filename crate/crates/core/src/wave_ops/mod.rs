//! Wave operators W = s-lim e^{itH} e^{-it d^4}: the stationary lambda-integral, the
//! time-averaged construction on a periodic box, identity checks, L^p probes and a
//! binary container. Calderon-Zygmund kernels live in `cz`, counterexample models in `counter`.

pub mod counter;
pub mod cz;

pub use counter::*;
pub use cz::*;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::birman_schwinger::{build_m, MFactor, VUFactorization};
use crate::error::{config, Error, Result};
use crate::free_ops::{f_pm, resolvent_jump_entry, FreePropagator, Sign, Symbol, I};
use crate::grid::{lp_norm, make_atom, reflect, Grid, SampledFunction, WeightSpec};
use crate::potentials::SampledPotential;
use crate::quad::{gauss_legendre, log_gauss};
use crate::spectral::{build_hamiltonian, eigendecompose, Boundary, SpectralData, SpectralOptions};

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum WaveMethod {
    Stationary,
    TimeDependent,
}

/// Lambda nodes: log-Gauss on [lambda_min, lambda0] and Gauss on [lambda0, lambda_max].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub lambda_min: f64,
    pub lambda0: f64,
    pub lambda_max: f64,
    pub low_nodes: usize,
    pub high_nodes: usize,
    /// warn when the estimated tail beyond lambda_max exceeds this
    pub tail_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { lambda_min: 1e-3, lambda0: 0.1, lambda_max: 8.0, low_nodes: 200, high_nodes: 400, tail_tol: 1e-2 }
    }
}

impl QuadConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.lambda_min && self.lambda_min < self.lambda0 && self.lambda0 < self.lambda_max) {
            return config("quadrature needs 0 < lambda_min < lambda0 < lambda_max");
        }
        if self.low_nodes == 0 || self.high_nodes == 0 {
            return config("quadrature needs nodes on both pieces");
        }
        Ok(())
    }

    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut l, mut w) = log_gauss(self.low_nodes, self.lambda_min, self.lambda0);
        let (l2, w2) = gauss_legendre(self.high_nodes, self.lambda0, self.lambda_max);
        l.extend(l2);
        w.extend(w2);
        (l, w)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureMeta {
    pub config: QuadConfig,
    pub nodes: usize,
    /// |integrand(lambda_max)| lambda_max / 2, the tail of a `<lambda>^-3` law, in RMS operator norm
    pub tail_estimate: f64,
    pub tail_warning: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleMeta {
    pub times: Vec<f64>,
    pub window: usize,
    /// relative change between the last two Cesaro averages
    pub last_change: f64,
    pub converged: bool,
}

/// W acts on sample vectors; w_star is its adjoint in the trapezoid inner product.
#[derive(Clone, Debug)]
pub struct WaveOperatorBundle {
    pub w: DMatrix<C64>,
    pub w_star: DMatrix<C64>,
    pub method: WaveMethod,
    pub quadrature: Option<QuadratureMeta>,
    pub grid: Grid,
    pub notes: Vec<String>,
}

/// Adjoint with respect to sum conj(f) g w: (A*)_ij = conj(A_ji) w_j / w_i.
pub fn weighted_adjoint(a: &DMatrix<C64>, g: &Grid) -> DMatrix<C64> {
    let w = g.weights();
    DMatrix::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj() * (w[j] / w[i]))
}

impl WaveOperatorBundle {
    pub fn identity(g: &Grid, method: WaveMethod) -> Self {
        let id = DMatrix::identity(g.n, g.n);
        WaveOperatorBundle {
            w: id.clone(),
            w_star: id,
            method,
            quadrature: None,
            grid: g.clone(),
            notes: vec!["V vanishes: W is the identity".into()],
        }
    }

    pub fn apply(&self, f: &SampledFunction) -> SampledFunction {
        let v = &self.w * DVector::from_column_slice(&f.values);
        SampledFunction { grid: self.grid.clone(), values: v.as_slice().to_vec() }
    }

    /// W+ f = conj(W- conj f), i.e. entrywise conjugation.
    pub fn plus(&self) -> WaveOperatorBundle {
        let mut b = self.clone();
        b.w = self.w.map(|z| z.conj());
        b.w_star = self.w_star.map(|z| z.conj());
        b
    }

    /// max |W* - adjoint(W)| relative to max |W|.
    pub fn adjoint_defect(&self) -> f64 {
        let a = weighted_adjoint(&self.w, &self.grid);
        let scale = self.w.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (&a - &self.w_star).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
    }

    /// RMS operator size ||W - I||_F / sqrt(n).
    pub fn distance_from_identity(&self) -> f64 {
        let n = self.grid.n;
        (&self.w - DMatrix::<C64>::identity(n, n)).norm() / (n as f64).sqrt()
    }
}

// ---------------------------------------------------------------------------
// stationary construction

/// W- = I - (2/(pi i)) int lambda^3 R0+ v M^{-1} v (R0+ - R0-) dlambda on the lambda nodes.
pub fn stationary_wave_op(pot: &SampledPotential, cfg: &QuadConfig) -> Result<WaveOperatorBundle> {
    cfg.validate()?;
    let g = pot.grid.clone();
    if pot.is_zero() {
        return Ok(WaveOperatorBundle::identity(&g, WaveMethod::Stationary));
    }
    let vu = VUFactorization::new(pot)?;
    let (lams, ws) = cfg.nodes();
    let n = g.n;
    let s = vu.len();
    let x = g.x();
    let tw = g.weights();
    // one term lambda^3 A M^{-1} B per node, with the quadrature weight folded into A
    let term = |lam: f64, wq: f64| -> Result<(DMatrix<C64>, DMatrix<C64>)> {
        let op = build_m(&vu, lam, Sign::Plus)?;
        let fac = MFactor::new(&op)?;
        let a = DMatrix::from_fn(n, s, |i, k| f_pm(lam * (x[i] - vu.x[k]).abs(), Sign::Plus) * (0.25 * wq * vu.d[k]));
        let b = DMatrix::from_fn(s, n, |k, j| resolvent_jump_entry(lam, (vu.x[k] - x[j]).abs()) * (vu.d[k] * tw[j]));
        let mut mb = DMatrix::zeros(s, n);
        for j in 0..n {
            mb.set_column(j, &fac.solve(&b.column(j).into_owned()));
        }
        Ok((a, mb))
    };
    const CHUNK: usize = 40;
    let idx: Vec<usize> = (0..lams.len()).collect();
    let partial = idx
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<DMatrix<C64>> {
            let mut acat = DMatrix::zeros(n, s * chunk.len());
            let mut bcat = DMatrix::zeros(s * chunk.len(), n);
            for (c, &q) in chunk.iter().enumerate() {
                let (a, mb) = term(lams[q], ws[q])?;
                acat.columns_mut(c * s, s).copy_from(&a);
                bcat.rows_mut(c * s, s).copy_from(&mb);
            }
            Ok(acat * bcat)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = DMatrix::<C64>::zeros(n, n);
    for p in &partial {
        acc += p;
    }
    let coef = cr(2.0 / std::f64::consts::PI) / I;
    let w = DMatrix::<C64>::identity(n, n) - acc * coef;
    // tail from the last node, assuming the <lambda>^-3 law
    let lmax = *lams.last().unwrap();
    let (a, mb) = term(lmax, 1.0)?;
    let integrand = (a * mb).norm() * (2.0 / std::f64::consts::PI) / (n as f64).sqrt();
    let tail_estimate = integrand * lmax / 2.0;
    let mut notes = Vec::new();
    let tail_warning = tail_estimate > cfg.tail_tol;
    if tail_warning {
        notes.push(format!("lambda tail estimate {tail_estimate:.2e} exceeds {:.1e}", cfg.tail_tol));
    }
    let w_star = weighted_adjoint(&w, &g);
    Ok(WaveOperatorBundle {
        w,
        w_star,
        method: WaveMethod::Stationary,
        quadrature: Some(QuadratureMeta { config: cfg.clone(), nodes: lams.len(), tail_estimate, tail_warning }),
        grid: g,
        notes,
    })
}

// ---------------------------------------------------------------------------
// test families

/// Modulated Gaussians exp(-(x - c)^2 / (2 sigma^2)) e^{i k x}, band-limited near k.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct WavePacketFamily {
    pub centers: Vec<f64>,
    pub wavenumbers: Vec<f64>,
    pub sigma: f64,
}

impl Default for WavePacketFamily {
    fn default() -> Self {
        WavePacketFamily { centers: vec![-8.0, 0.0, 8.0], wavenumbers: vec![1.5, -1.5, 1.2], sigma: 8.0 }
    }
}

impl WavePacketFamily {
    pub fn len(&self) -> usize {
        self.centers.len() * self.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Columns are the packets sampled on the grid.
    pub fn matrix(&self, g: &Grid) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(g.n, self.len());
        let mut col = 0;
        for &c in &self.centers {
            for &k in &self.wavenumbers {
                for (i, &x) in g.x().iter().enumerate() {
                    let env = (-(x - c).powi(2) / (2.0 * self.sigma * self.sigma)).exp();
                    m[(i, col)] = C64::from_polar(env, k * x);
                }
                col += 1;
            }
        }
        m
    }

    /// Longest time before the fastest packet component (|k| + 1/sigma, group velocity 4k^3)
    /// starting two widths out can wrap around the periodic box.
    pub fn recurrence_safe_tmax(&self, g: &Grid) -> f64 {
        let cmax = self.centers.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let kmax = self.wavenumbers.iter().fold(0.0f64, |a, k| a.max(k.abs())) + 1.0 / self.sigma;
        let room = 2.0 * g.half_width - 2.0 * (cmax + 2.0 * self.sigma);
        room / (4.0 * kmax.powi(3))
    }
}

/// Trapezoid-weighted Gram matrix F* diag(w) G.
pub fn gram(f: &DMatrix<C64>, g: &DMatrix<C64>, grid: &Grid) -> DMatrix<C64> {
    let w = grid.weights();
    let mut gw = g.clone();
    for (i, mut row) in gw.row_iter_mut().enumerate() {
        row *= cr(w[i]);
    }
    f.adjoint() * gw
}

/// || (WF)*(WF) - F*F ||_F / ||F*F||_F on a family.
pub fn isometry_defect(w: &DMatrix<C64>, family: &DMatrix<C64>, grid: &Grid) -> f64 {
    let wf = w * family;
    let g0 = gram(family, family, grid);
    (gram(&wf, &wf, grid) - &g0).norm() / g0.norm()
}

// ---------------------------------------------------------------------------
// time-dependent construction

/// Geometric schedule with a Cesaro window over its last entries.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSchedule {
    pub t_min: f64,
    /// None: the family's recurrence-safe time on the periodic box
    pub t_max: Option<f64>,
    pub count: usize,
    pub window: usize,
    pub tol: f64,
}

impl Default for TimeSchedule {
    fn default() -> Self {
        TimeSchedule { t_min: 1.0, t_max: None, count: 16, window: 8, tol: 5e-2 }
    }
}

/// e^{-itH} e^{it d^4} on the periodic box, with the periodic five-point H diagonalized once
/// and the free flow applied through the stencil symbol, so both use the same discretization.
pub struct TimeDependentEngine {
    pub grid: Grid,
    pub spectral: SpectralData,
    prop: FreePropagator,
}

impl TimeDependentEngine {
    pub fn new(pot: &SampledPotential) -> Result<Self> {
        let h = build_hamiltonian(pot, Boundary::Periodic)?;
        let spectral = eigendecompose(&h, SpectralOptions::default())?;
        Ok(TimeDependentEngine {
            grid: pot.grid.clone(),
            spectral,
            prop: FreePropagator::new(&pot.grid, Symbol::Stencil),
        })
    }

    /// phi(H) f through the eigenbasis, columnwise.
    pub fn h_function(&self, f: &DMatrix<C64>, phi: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let q = &self.spectral.eigenvectors;
        let re = f.map(|z| z.re);
        let im = f.map(|z| z.im);
        let (cre, cim) = (q.transpose() * re, q.transpose() * im);
        let mut c = DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| C64::new(cre[(i, j)], cim[(i, j)]));
        for (i, mut row) in c.row_iter_mut().enumerate() {
            row *= phi(self.spectral.eigenvalues[i]);
        }
        let (ore, oim) = (q * c.map(|z| z.re), q * c.map(|z| z.im));
        DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| C64::new(ore[(i, j)], oim[(i, j)]))
    }

    /// phi(stencil symbol) f by FFT, columnwise.
    pub fn free_function(&self, f: &DMatrix<C64>, phi: impl Fn(f64) -> C64 + Copy) -> DMatrix<C64> {
        let mut out = f.clone();
        for mut col in out.column_iter_mut() {
            let mut v: Vec<C64> = col.iter().cloned().collect();
            self.prop.apply_multiplier(&mut v, phi);
            col.copy_from_slice(&v);
        }
        out
    }

    /// Projector onto the complement of bound states and localized embedded states.
    pub fn ac_part(&self, f: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = f.clone();
        for k in self.spectral.point_indices() {
            let v = self.spectral.eigenvectors.column(k).map(cr);
            let c = v.transpose() * f;
            out -= &v * c;
        }
        out
    }

    /// e^{-i tau H} e^{i tau d^4} f, the W- approximant at t = -tau.
    pub fn at(&self, tau: f64, f: &DMatrix<C64>) -> DMatrix<C64> {
        let g = self.free_function(f, |s| C64::from_polar(1.0, tau * s));
        self.h_function(&g, |e| C64::from_polar(1.0, -tau * e))
    }

    pub fn times(&self, sched: &TimeSchedule, family: &WavePacketFamily) -> Result<Vec<f64>> {
        let tmax = sched.t_max.unwrap_or_else(|| family.recurrence_safe_tmax(&self.grid));
        if sched.window < 2 || sched.window >= sched.count {
            return config("Cesaro window must lie in [2, count)");
        }
        if !(tmax > sched.t_min && sched.t_min > 0.0) {
            return config(format!("schedule needs 0 < t_min < t_max, got t_max = {tmax:.3}; enlarge the box"));
        }
        Ok(crate::quad::geomspace(sched.t_min, tmax, sched.count))
    }

    /// Cesaro average of the last `window` approximants and its last-step change.
    pub fn apply(&self, f: &DMatrix<C64>, times: &[f64], sched: &TimeSchedule) -> (DMatrix<C64>, ScheduleMeta) {
        let imgs: Vec<DMatrix<C64>> = times.par_iter().map(|&t| self.at(t, f)).collect();
        let k = times.len();
        let avg = |lo: usize| {
            let mut a = DMatrix::<C64>::zeros(f.nrows(), f.ncols());
            for m in &imgs[lo..lo + sched.window] {
                a += m;
            }
            a / cr(sched.window as f64)
        };
        let last = avg(k - sched.window);
        let prev = avg(k - sched.window - 1);
        let change = (&last - &prev).norm() / last.norm();
        let meta = ScheduleMeta {
            times: times.to_vec(),
            window: sched.window,
            last_change: change,
            converged: change <= sched.tol,
        };
        (last, meta)
    }
}

/// W- applied to a family by time averaging. Only band-limited inputs have a meaningful
/// pre-recurrence limit on the box, so the result is the image of the family.
#[derive(Clone, Debug)]
pub struct FamilyImage {
    pub inputs: DMatrix<C64>,
    pub outputs: DMatrix<C64>,
    pub schedule: ScheduleMeta,
    pub method: WaveMethod,
}

pub fn time_dependent_wave_op(
    pot: &SampledPotential,
    family: &WavePacketFamily,
    sched: &TimeSchedule,
) -> Result<(FamilyImage, TimeDependentEngine)> {
    let engine = TimeDependentEngine::new(pot)?;
    let f = family.matrix(&pot.grid);
    if pot.is_zero() {
        let meta = ScheduleMeta { times: vec![], window: sched.window, last_change: 0.0, converged: true };
        let img = FamilyImage { inputs: f.clone(), outputs: f, schedule: meta, method: WaveMethod::TimeDependent };
        return Ok((img, engine));
    }
    let times = engine.times(sched, family)?;
    let (out, meta) = engine.apply(&f, &times, sched);
    Ok((FamilyImage { inputs: f, outputs: out, schedule: meta, method: WaveMethod::TimeDependent }, engine))
}

/// ||A - B||_F / ||A||_F.
pub fn relative_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm() / a.norm()
}

/// ||e^{-H} P_ac W F - W e^{-d^4} F|| / ||W e^{-d^4} F|| with the time-averaged W.
pub fn intertwining_defect(engine: &TimeDependentEngine, img: &FamilyImage, sched: &TimeSchedule) -> f64 {
    let heat = |s: f64| cr((-s).exp());
    let left = engine.h_function(&engine.ac_part(&img.outputs), heat);
    let g = engine.free_function(&img.inputs, heat);
    let right = if img.schedule.times.is_empty() { g } else { engine.apply(&g, &img.schedule.times, sched).0 };
    relative_distance(&right, &left)
}

/// All identity checks for one potential at one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct WaveCrossCheck {
    pub stationary_vs_time: f64,
    pub isometry_stationary: f64,
    pub isometry_time: f64,
    pub intertwining: f64,
    pub adjoint_defect: f64,
    pub identity_distance: f64,
    pub tail_estimate: f64,
    pub schedule: ScheduleMeta,
}

pub fn wave_cross_check(
    pot: &SampledPotential,
    quad: &QuadConfig,
    family: &WavePacketFamily,
    sched: &TimeSchedule,
) -> Result<(WaveCrossCheck, WaveOperatorBundle)> {
    let st = stationary_wave_op(pot, quad)?;
    let (img, engine) = time_dependent_wave_op(pot, family, sched)?;
    let g = &pot.grid;
    let stf = &st.w * &img.inputs;
    let check = WaveCrossCheck {
        stationary_vs_time: relative_distance(&stf, &img.outputs),
        isometry_stationary: isometry_defect(&st.w, &img.inputs, g),
        isometry_time: {
            let g0 = gram(&img.inputs, &img.inputs, g);
            (gram(&img.outputs, &img.outputs, g) - &g0).norm() / g0.norm()
        },
        intertwining: intertwining_defect(&engine, &img, sched),
        adjoint_defect: st.adjoint_defect(),
        identity_distance: st.distance_from_identity(),
        tail_estimate: st.quadrature.as_ref().map_or(0.0, |q| q.tail_estimate),
        schedule: img.schedule,
    };
    Ok((check, st))
}

// ---------------------------------------------------------------------------
// L^p probes

#[derive(Clone, Debug, Serialize)]
pub struct LpProbe {
    pub p: f64,
    pub weight: WeightSpec,
    /// max ||W f|| / max(||f||, ||tau f||) over the family
    pub lower_bound: f64,
    pub worst_member: String,
    /// Schur bound B^{1/p} A^{1-1/p} for the absolute kernel; bounds |W|, hence W
    pub upper_bound: f64,
    /// sup_x int |K(x, y)| dy (p = infinity Schur value)
    pub row_sum: f64,
    /// sup_y int |K(x, y)| dx (p = 1 Schur value)
    pub col_sum: f64,
    pub family_size: usize,
}

fn weighted_norm(f: &SampledFunction, p: f64, w: &WeightSpec) -> f64 {
    lp_norm(f, p, w)
}

/// ||W f|| / max(||f||, ||tau f||) for one input.
pub fn probe_value(w: &DMatrix<C64>, f: &SampledFunction, p: f64, weight: &WeightSpec) -> f64 {
    let wf = w * DVector::from_column_slice(&f.values);
    let wf = SampledFunction { grid: f.grid.clone(), values: wf.as_slice().to_vec() };
    let den = weighted_norm(f, p, weight).max(weighted_norm(&reflect(f), p, weight));
    weighted_norm(&wf, p, weight) / den
}

/// Family: seeded smooth random sums of Gaussians, atoms, indicators f_R and their reflections.
pub fn probe_family(g: &Grid, size: usize, seed: u64) -> Result<Vec<(String, SampledFunction)>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = g.half_width;
    let per = size.div_ceil(3).max(1);
    for k in 0..per {
        let bumps: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| (rng.gen_range(-0.5 * l..0.5 * l), rng.gen_range(1.0..4.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = g.sample_real(|x| bumps.iter().map(|(c, s, a)| a * (-(x - c).powi(2) / (2.0 * s * s)).exp()).sum());
        out.push((format!("smooth{k}"), f));
    }
    for k in 0..per {
        let r = (2.0f64).max(rng.gen_range(2.0..(0.25 * l).max(2.5)));
        let c = rng.gen_range(-(l - r - 1.0).max(0.0)..=(l - r - 1.0).max(0.0)) * 0.5;
        if let Ok(a) = make_atom(g, c, r, seed.wrapping_add(k as u64)) {
            out.push((format!("atom{k}"), a.to_function(g)));
        }
    }
    for k in 0..per {
        let r = 0.45 * l * (k + 1) as f64 / per as f64;
        let f = g.sample_real(|x| if x.abs() <= r { 1.0 } else { 0.0 });
        out.push((format!("indicator{k}"), f));
    }
    let n0 = out.len();
    for k in 0..n0 {
        let (name, f) = out[k].clone();
        out.push((format!("{name}_reflected"), reflect(&f)));
    }
    Ok(out)
}

/// Schur values of the kernel K(x_i, y_j) = W_ij / w_j, conjugated by the weight w^{1/p}.
pub fn schur_sums(w: &DMatrix<C64>, g: &Grid, p: f64, weight: &WeightSpec) -> Result<(f64, f64)> {
    let tw = g.weights();
    let ws = if p.is_infinite() { vec![1.0; g.n] } else { weight.samples(g)? };
    let wp: Vec<f64> = ws.iter().map(|w| if p.is_infinite() { 1.0 } else { w.powf(1.0 / p) }).collect();
    let n = g.n;
    let row = (0..n).map(|i| (0..n).map(|j| w[(i, j)].norm() * wp[i] / wp[j]).sum::<f64>()).fold(0.0, f64::max);
    let col = (0..n)
        .map(|j| (0..n).map(|i| w[(i, j)].norm() * wp[i] / wp[j] * tw[i] / tw[j]).sum::<f64>())
        .fold(0.0, f64::max);
    Ok((row, col))
}

pub fn lp_norm_probe(
    w: &DMatrix<C64>,
    g: &Grid,
    p: f64,
    weight: &WeightSpec,
    family_size: usize,
    seed: u64,
) -> Result<LpProbe> {
    if !(p >= 1.0) {
        return config(format!("p must lie in [1, inf], got {p}"));
    }
    weight.samples(g)?;
    let fam = probe_family(g, family_size, seed)?;
    let vals: Vec<(f64, String)> =
        fam.par_iter().map(|(name, f)| (probe_value(w, f, p, weight), name.clone())).collect();
    let (lower_bound, worst_member) = vals.into_iter().fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    let (row_sum, col_sum) = schur_sums(w, g, p, weight)?;
    let upper_bound = if p.is_infinite() { row_sum } else { col_sum.powf(1.0 / p) * row_sum.powf(1.0 - 1.0 / p) };
    Ok(LpProbe {
        p,
        weight: weight.clone(),
        lower_bound,
        worst_member,
        upper_bound,
        row_sum,
        col_sum,
        family_size: fam.len(),
    })
}

// ---------------------------------------------------------------------------
// container

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleSidecar {
    pub method: WaveMethod,
    pub half_width: f64,
    pub n: usize,
    pub quadrature: Option<QuadratureMeta>,
    pub notes: Vec<String>,
    pub sha256: String,
}

const MAGIC: &[u8; 8] = b"WAVEOP01";

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `stem.bin` (W then W*, column-major little-endian re/im pairs) and `stem.json`.
pub fn write_bundle(b: &WaveOperatorBundle, stem: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(24 + 32 * b.w.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(b.w.nrows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(b.w.ncols() as u64).to_le_bytes());
    for m in [&b.w, &b.w_star] {
        for z in m.iter() {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let (bin, json) = paths(stem);
    std::fs::File::create(&bin)?.write_all(&bytes)?;
    let side = BundleSidecar {
        method: b.method,
        half_width: b.grid.half_width,
        n: b.grid.n,
        quadrature: b.quadrature.clone(),
        notes: b.notes.clone(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    };
    std::fs::write(json, serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_bundle(stem: &Path) -> Result<WaveOperatorBundle> {
    let (bin, json) = paths(stem);
    let side: BundleSidecar = serde_json::from_str(&std::fs::read_to_string(json)?)?;
    let mut bytes = Vec::new();
    std::fs::File::open(bin)?.read_to_end(&mut bytes)?;
    if format!("{:x}", Sha256::digest(&bytes)) != side.sha256 {
        return Err(Error::Numerical("bundle checksum mismatch".into()));
    }
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(Error::Numerical("not a wave-operator container".into()));
    }
    let rd = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap()) as usize;
    let (r, c) = (rd(8), rd(16));
    if bytes.len() != 24 + 32 * r * c {
        return Err(Error::Numerical("container size does not match its header".into()));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let mat =
        |off: usize| DMatrix::from_iterator(r, c, (0..r * c).map(|k| C64::new(f(off + 16 * k), f(off + 16 * k + 8))));
    let grid = crate::grid::make_grid(side.half_width, side.n)?;
    Ok(WaveOperatorBundle {
        w: mat(24),
        w_star: mat(24 + 16 * r * c),
        method: side.method,
        quadrature: side.quadrature,
        grid,
        notes: side.notes,
    })
}

#[cfg(test)]
mod tests;
