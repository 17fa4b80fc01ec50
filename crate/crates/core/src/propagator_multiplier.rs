//! Long-time behaviour and functional calculus of H: e^{-itH} P_ac through the eigenbasis,
//! L^p -> L^q decay scans over the admissible (1/p, 1/q) region, spectral multipliers
//! f(H) by two routes, and Hormander / Mikhlin smoothness checks for symbols.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{config, Result};
use crate::free_ops::{AbsorbingLayer, FreePropagator, Symbol};
use crate::grid::{lp_norm, SampledFunction, WeightSpec};
use crate::potentials::SampledPotential;
use crate::quad::{geomspace, loglog_slope};
use crate::spectral::{build_hamiltonian, eigen_slice, Boundary, SpectralData};
use crate::wave_ops::{relative_distance, weighted_adjoint, WaveOperatorBundle};

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

// ---------------------------------------------------------------------------
// evolution on the ac subspace

/// sum over retained pairs of e^{-it lambda_j} <f, v_j> v_j (Euclidean pairing on samples).
pub fn evolve(sd: &SpectralData, t: f64, f: &SampledFunction) -> Result<SampledFunction> {
    if !f.grid.same_as(&sd.grid) {
        return config("function and spectral data live on different grids");
    }
    let q = &sd.eigenvectors;
    let idx = sd.ac_indices();
    let re = DVector::from_iterator(f.values.len(), f.values.iter().map(|z| z.re));
    let im = DVector::from_iterator(f.values.len(), f.values.iter().map(|z| z.im));
    let mut out = vec![cr(0.0); f.values.len()];
    for &k in &idx {
        let v = q.column(k);
        let c = C64::new(v.dot(&re), v.dot(&im)) * C64::from_polar(1.0, -t * sd.eigenvalues[k]);
        for (o, a) in out.iter_mut().zip(v.iter()) {
            *o += c * a;
        }
    }
    SampledFunction::new(&f.grid, out)
}

// ---------------------------------------------------------------------------
// the decay region

/// Closed quadrangle A = (1/2, 1/2), B = (1, 1/3), C = (1, 0), D = (2/3, 0) in the
/// (1/p, 1/q) plane minus the closed segments BC and DC, decided in exact arithmetic.
pub fn in_region(invp: f64, invq: f64) -> Result<bool> {
    if !(invp.is_finite() && invq.is_finite() && 0.0 <= invq && invq <= invp && invp <= 1.0) {
        return config(format!("need 0 <= 1/q <= 1/p <= 1, got ({invp}, {invq})"));
    }
    let x = BigRational::from_float(invp).expect("finite");
    let y = BigRational::from_float(invq).expect("finite");
    Ok(in_region_exact(&x, &y))
}

/// The same test for exact rationals.
pub fn in_region_exact(x: &BigRational, y: &BigRational) -> bool {
    let k = |v: f64| BigRational::from_float(v).expect("finite");
    let (one, two, three, zero) = (k(1.0), k(2.0), k(3.0), k(0.0));
    // below AB: x + 3y <= 2; right of DA: 3x + y >= 2; off BC: x < 1; off DC: y > 0
    x + &three * y <= two && &three * x + y >= two && *x < one && *y > zero
}

// ---------------------------------------------------------------------------
// decay scans

/// Gaussian data exp(-(x - c)^2 / (2 s^2)) over all (width, centre) pairs.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub times: usize,
    pub widths: Vec<f64>,
    pub centers: Vec<f64>,
    pub layer_width_frac: f64,
    pub layer_strength: f64,
    pub dt: f64,
    /// members are dropped from the sup once this fraction of their mass sits in the outer 2%
    pub edge_tol: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            t_min: 1.0,
            t_max: 100.0,
            times: 24,
            widths: vec![0.25, 0.5, 1.0, 2.0],
            centers: vec![0.0],
            layer_width_frac: 0.25,
            layer_strength: 5.0,
            dt: 0.02,
            edge_tol: 1e-2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub inv_p: f64,
    pub inv_q: f64,
    pub exponent: f64,
    pub stderr: f64,
    /// -(1/4)(1/p - 1/q)
    pub predicted: f64,
    pub in_region: bool,
    /// sup over the family of ||u(t)||_q / ||f||_p at each time
    pub sup: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayScanResult {
    pub rows: Vec<DecayRow>,
    pub times: Vec<f64>,
    /// number of leading times kept after edge trimming
    pub window: usize,
    pub bound_states_removed: usize,
    pub warnings: Vec<String>,
}

impl DecayScanResult {
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["inv_p", "inv_q", "exponent", "stderr", "in_region"])?;
        for r in &self.rows {
            w.serialize((r.inv_p, r.inv_q, r.exponent, r.stderr, r.in_region))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn exponent_of(inv: f64) -> f64 {
    if inv == 0.0 {
        f64::INFINITY
    } else {
        1.0 / inv
    }
}

/// Split-step evolution of each family member with an absorbing layer, sup over the family of
/// ||u(t)||_q / ||f||_p per pair, and a log-log fit. Bound states of V (found on the clamped
/// operator) are projected out of the data first.
pub fn decay_scan(pot: &SampledPotential, pairs: &[(f64, f64)], cfg: &DecayConfig) -> Result<DecayScanResult> {
    if pairs.is_empty() {
        return config("decay scan needs at least one (1/p, 1/q) pair");
    }
    for &(a, b) in pairs {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || b > a {
            return config(format!("need 0 <= 1/q <= 1/p <= 1, got ({a}, {b})"));
        }
    }
    if !(cfg.t_min > 0.0 && cfg.t_max > cfg.t_min && cfg.times >= 4 && cfg.dt > 0.0) {
        return config("decay schedule needs 0 < t_min < t_max, at least four times and dt > 0");
    }
    if cfg.widths.is_empty() || cfg.centers.is_empty() || cfg.widths.iter().any(|w| !(*w > 0.0)) {
        return config("decay family needs positive widths and at least one centre");
    }
    let g = &pot.grid;
    if cfg.centers.iter().any(|c| c.abs() > (1.0 - cfg.layer_width_frac) * g.half_width) {
        return config("decay family centres must sit inside the absorbing layer");
    }
    // bound states of V
    let mut bound = Vec::new();
    let vmin = pot.values.iter().cloned().fold(0.0, f64::min);
    if vmin < 0.0 {
        let h = build_hamiltonian(pot, Boundary::DirichletClamped)?;
        bound = eigen_slice(&h, vmin - 1.0, -1e-9, 64)?.into_iter().map(|p| p.vector).collect::<Vec<_>>();
    }
    let times = geomspace(cfg.t_min, cfg.t_max, cfg.times);
    let prop = FreePropagator::new(g, Symbol::Continuum);
    let layer = AbsorbingLayer { width_frac: cfg.layer_width_frac, strength: cfg.layer_strength, dt: cfg.dt };
    let vpot = if pot.is_zero() { None } else { Some(pot.values.as_slice()) };
    let members: Vec<(f64, f64)> = cfg.widths.iter().flat_map(|&s| cfg.centers.iter().map(move |&c| (s, c))).collect();
    // per member: ratios[time][pair] and the time index at which it leaves the window
    let runs: Vec<(Vec<Vec<f64>>, usize)> = members
        .par_iter()
        .map(|&(s, c)| {
            let mut vals: Vec<C64> = g.x().iter().map(|x| cr((-(x - c).powi(2) / (2.0 * s * s)).exp())).collect();
            for b in &bound {
                let d: f64 = b.iter().zip(&vals).map(|(a, z)| a * z.re).sum();
                vals.iter_mut().zip(b).for_each(|(z, a)| *z -= d * a);
            }
            let f = SampledFunction { grid: g.clone(), values: vals };
            let den: Vec<f64> = pairs.iter().map(|&(a, _)| lp_norm(&f, exponent_of(a), &WeightSpec::Unit)).collect();
            let mut ratios = Vec::with_capacity(times.len());
            let mut valid = times.len();
            prop.evolve_absorbing(&f, &times, layer, vpot, |_, u| {
                let uf = SampledFunction { grid: g.clone(), values: u.to_vec() };
                if valid == times.len() && uf.boundary_mass(0.02) > cfg.edge_tol {
                    valid = ratios.len();
                }
                ratios.push(
                    pairs
                        .iter()
                        .zip(&den)
                        .map(|(&(_, b), d)| lp_norm(&uf, exponent_of(b), &WeightSpec::Unit) / d)
                        .collect(),
                );
            });
            (ratios, valid)
        })
        .collect();
    let window = runs.iter().map(|r| r.1).max().unwrap_or(0);
    let mut warnings = Vec::new();
    if window < times.len() {
        warnings.push(format!("every member reached the box edge; fit trimmed to {window} of {} times", times.len()));
    }
    if window < 4 {
        return config("decay fit window shorter than four times; enlarge the box or shorten t_max");
    }
    let rows = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| -> Result<DecayRow> {
            let sup: Vec<f64> = (0..window)
                .map(|ti| runs.iter().filter(|r| ti < r.1).map(|r| r.0[ti][k]).fold(0.0, f64::max))
                .collect();
            let (exponent, stderr) = loglog_slope(&times[..window], &sup);
            Ok(DecayRow {
                inv_p: a,
                inv_q: b,
                exponent,
                stderr,
                predicted: -0.25 * (a - b),
                in_region: in_region(a, b)?,
                sup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayScanResult { rows, times: times[..window].to_vec(), window, bound_states_removed: bound.len(), warnings })
}

// ---------------------------------------------------------------------------
// multipliers

/// eta(lambda): smooth bump supported in [1/2, 2].
pub fn eta(lambda: f64) -> f64 {
    if lambda <= 0.5 || lambda >= 2.0 {
        return 0.0;
    }
    let t = (lambda.ln() / 2f64.ln()).abs();
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

#[derive(Clone)]
pub struct MultiplierSpec {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
}

impl std::fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MultiplierSpec({})", self.name)
    }
}

impl MultiplierSpec {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        MultiplierSpec { name: name.into(), f: Arc::new(f) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| cr(c))
    }

    /// e^{-lambda}
    pub fn heat() -> Self {
        Self::new("heat", |l| cr((-l).exp()))
    }

    /// exp(-(lambda - c)^2 / w^2)
    pub fn bump(center: f64, width: f64) -> Self {
        Self::new(format!("bump({center},{width})"), move |l| cr((-((l - center) / width).powi(2)).exp()))
    }

    /// |lambda|^{i beta}, 0 at the origin
    pub fn imaginary_power(beta: f64) -> Self {
        Self::new(
            format!("power(i{beta})"),
            move |l| {
                if l == 0.0 {
                    cr(0.0)
                } else {
                    C64::from_polar(1.0, beta * l.abs().ln())
                }
            },
        )
    }

    /// 1 below `at`, -1 above
    pub fn jump(at: f64) -> Self {
        Self::new(format!("jump({at})"), move |l| cr(if l < at { 1.0 } else { -1.0 }))
    }

    /// indicator of (-inf, 0)
    pub fn negative_part() -> Self {
        Self::new("negative", |l| cr(if l < 0.0 { 1.0 } else { 0.0 }))
    }

    pub fn eval(&self, l: f64) -> C64 {
        (self.f)(l)
    }
}

/// f(H) F with the same periodic discretization as the spectral data.
pub fn multiplier_eigen(sd: &SpectralData, spec: &MultiplierSpec, fam: &DMatrix<C64>) -> DMatrix<C64> {
    let q = sd.eigenvectors.map(cr);
    let mut c = q.transpose() * fam;
    for (k, mut row) in c.row_iter_mut().enumerate() {
        row *= spec.eval(sd.eigenvalues[k]);
    }
    q * c
}

/// sum_j f(lambda_j) P_j F + W f(d^4) W* F, with f(d^4) the Fourier multiplier of the
/// stencil symbol so that V = 0 reproduces the eigen route exactly.
pub fn multiplier_wave(
    sd: &SpectralData,
    w: &WaveOperatorBundle,
    spec: &MultiplierSpec,
    fam: &DMatrix<C64>,
) -> Result<DMatrix<C64>> {
    if !w.grid.same_as(&sd.grid) {
        return config("wave operator and spectral data live on different grids");
    }
    let mut inner = &w.w_star * fam;
    let prop = FreePropagator::new(&w.grid, Symbol::Stencil);
    for mut col in inner.column_iter_mut() {
        let mut v: Vec<C64> = col.iter().cloned().collect();
        prop.apply_multiplier(&mut v, |s| spec.eval(s));
        col.copy_from_slice(&v);
    }
    let mut out = &w.w * inner;
    for k in sd.point_indices() {
        let v = sd.eigenvectors.column(k).map(cr);
        let c = v.transpose() * fam;
        out += (&v * c) * spec.eval(sd.eigenvalues[k]);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplierComparison {
    pub name: String,
    /// ||a - b|| / max(||a||, ||b||) on the family, 0 when both vanish
    pub distance: f64,
    /// relative distance of each route from the input family (how far f(H) is from I there)
    pub eigen_vs_input: f64,
    pub wave_vs_input: f64,
    pub point_states: usize,
}

fn symmetric_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

pub fn spectral_multiplier(
    sd: &SpectralData,
    w: &WaveOperatorBundle,
    spec: &MultiplierSpec,
    fam: &DMatrix<C64>,
) -> Result<(MultiplierComparison, DMatrix<C64>, DMatrix<C64>)> {
    let a = multiplier_eigen(sd, spec, fam);
    let b = multiplier_wave(sd, w, spec, fam)?;
    let cmp = MultiplierComparison {
        name: spec.name.clone(),
        distance: symmetric_distance(&a, &b),
        eigen_vs_input: relative_distance(&a, fam),
        wave_vs_input: relative_distance(&b, fam),
        point_states: sd.point_indices().len(),
    };
    Ok((cmp, a, b))
}

/// RMS size of sum_j P_j + W W* - I over the whole grid (trapezoid-weighted adjoint).
pub fn completeness_defect(sd: &SpectralData, w: &WaveOperatorBundle) -> f64 {
    let n = w.grid.n;
    let mut m = &w.w * weighted_adjoint(&w.w, &w.grid);
    for k in sd.point_indices() {
        let v = sd.eigenvectors.column(k).map(cr);
        m += &v * v.transpose();
    }
    (m - DMatrix::<C64>::identity(n, n)).norm() / (n as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Hormander and Mikhlin checks

#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    pub name: String,
    pub s: f64,
    /// (delta, ||eta f(delta .)||_{H^s}) at the base resolution
    pub sweep: Vec<(f64, f64)>,
    pub hormander_m: f64,
    /// the same supremum with twice the symbol grid
    pub hormander_m_refined: f64,
    /// sup |f| and sup |lambda f'(lambda)| on a log grid, and the refined values
    pub mikhlin: (f64, f64),
    pub mikhlin_refined: (f64, f64),
    pub hormander_pass: bool,
    pub mikhlin_pass: bool,
    pub pass: bool,
}

/// H^s norm of g sampled on [-a, a] with m points, weighting the FFT by <xi>^{2s}.
fn hs_norm(g: &[C64], a: f64, s: f64) -> f64 {
    let m = g.len();
    let dl = 2.0 * a / m as f64;
    let mut v = g.to_vec();
    FftPlanner::new().plan_fft_forward(m).process(&mut v);
    let dxi = 2.0 * PI / (m as f64 * dl);
    let mut acc = 0.0;
    for (k, z) in v.iter().enumerate() {
        let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        let xi = kk * dxi;
        acc += (1.0 + xi * xi).powf(s) * (z * dl).norm_sqr();
    }
    (acc * dxi / (2.0 * PI)).sqrt()
}

fn hormander_sup(spec: &MultiplierSpec, s: f64, m: usize) -> Vec<(f64, f64)> {
    let a = 4.0;
    (-10..=10)
        .into_par_iter()
        .flat_map_iter(|j| {
            // quarter-octave offsets so symbol features between dyadic scales are seen
            (0..4).map(move |q| 2f64.powf(j as f64 + 0.25 * q as f64))
        })
        .map(|d| {
            let g: Vec<C64> = (0..m)
                .map(|i| {
                    let l = -a + 2.0 * a * i as f64 / m as f64;
                    let e = eta(l);
                    if e == 0.0 {
                        cr(0.0)
                    } else {
                        spec.eval(d * l) * e
                    }
                })
                .collect();
            (d, hs_norm(&g, a, s))
        })
        .collect()
}

fn mikhlin_constants(spec: &MultiplierSpec, per_octave: usize) -> (f64, f64) {
    let octaves = 20;
    let m = octaves * per_octave;
    let ls: Vec<f64> = (0..=m).map(|i| 2f64.powf(-10.0 + i as f64 / per_octave as f64)).collect();
    let c0 = ls.iter().map(|&l| spec.eval(l).norm()).fold(0.0, f64::max);
    let c1 = ls
        .windows(2)
        .map(|w| {
            let d = (spec.eval(w[1]) - spec.eval(w[0])).norm() / (w[1] - w[0]);
            d * 0.5 * (w[0] + w[1])
        })
        .fold(0.0, f64::max);
    (c0, c1)
}

/// Dyadic H^s sweep of eta f(delta .) and Mikhlin constants, each at two resolutions. A
/// quantity that grows by more than 20% under refinement is treated as unbounded.
pub fn hormander_mikhlin_check(spec: &MultiplierSpec, s: f64) -> Result<SmoothnessReport> {
    if !(s > 0.5) {
        return config(format!("the Hormander check needs s > 1/2, got {s}"));
    }
    let base = 4096;
    let sweep = hormander_sup(spec, s, base);
    let sup = |v: &[(f64, f64)]| v.iter().map(|p| p.1).fold(0.0, f64::max);
    let hm = sup(&sweep);
    let hm2 = sup(&hormander_sup(spec, s, 2 * base));
    let mk = mikhlin_constants(spec, 256);
    let mk2 = mikhlin_constants(spec, 512);
    let stable = |a: f64, b: f64| a.is_finite() && b.is_finite() && b <= 1.2 * a.max(1e-300);
    let hormander_pass = stable(hm, hm2);
    let mikhlin_pass = stable(mk.0, mk2.0) && stable(mk.1, mk2.1);
    Ok(SmoothnessReport {
        name: spec.name.clone(),
        s,
        sweep,
        hormander_m: hm,
        hormander_m_refined: hm2,
        mikhlin: mk,
        mikhlin_refined: mk2,
        hormander_pass,
        mikhlin_pass,
        pass: hormander_pass && mikhlin_pass,
    })
}

#[cfg(test)]
mod tests;
