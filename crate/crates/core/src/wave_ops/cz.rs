//! Calderon-Zygmund model kernels built from psi(||x| +- |y||^2) / (|x| +- |y|) and
//! their relatives, applied by quadrature directly or through the chi+- reduction to the
//! translation-type kernels psi(|x - y|^2)/(x - y) and psi(|x - y|^2)/(x +- iy).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{config, Result};
use crate::free_ops::I;
use crate::grid::{bmo_norm, lp_norm, make_atom, Grid, SampledFunction, WeightSpec};
use crate::quad::linfit;

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Smooth monotone cutoff: 0 on [0, lo], 1 on [hi, inf).
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Cutoff {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff { lo: 1.0, hi: 2.0 }
    }
}

impl Cutoff {
    pub fn eval(&self, s: f64) -> f64 {
        if s <= self.lo {
            return 0.0;
        }
        if s >= self.hi {
            return 1.0;
        }
        let e = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        let t = (s - self.lo) / (self.hi - self.lo);
        e(t) / (e(t) + e(1.0 - t))
    }
}

/// Kernel families. `sign_out` / `sign_in` select g_1 .. g_4 (sgn x, sgn y factors).
#[derive(Clone)]
pub enum CZKind {
    /// psi(||x| +- |y||^2) / (|x| +- |y|)
    K1 {
        plus: bool,
    },
    /// psi(||x| - |y||^2) / (|x| +- i|y|)
    K2 {
        plus: bool,
    },
    /// g_j^+- = a(k1+ +- k1-) + b(k2+ +- k2-), times sgn x for j = 3, 4 and sgn y for j = 2, 4
    G {
        j: u8,
        plus: bool,
        a: C64,
        b: C64,
    },
    /// int_{|x - y| > eps} f(y) / (x - y) dy
    TruncatedHilbert {
        eps: f64,
    },
    /// <|x| - |y|>^-rho
    Schur {
        rho: f64,
    },
    Custom(Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>),
}

impl std::fmt::Debug for CZKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CZKind::K1 { plus } => write!(f, "k1{}", if *plus { "+" } else { "-" }),
            CZKind::K2 { plus } => write!(f, "k2{}", if *plus { "+" } else { "-" }),
            CZKind::G { j, plus, a, b } => write!(f, "g{j}{} a={a} b={b}", if *plus { "+" } else { "-" }),
            CZKind::TruncatedHilbert { eps } => write!(f, "hilbert(eps={eps})"),
            CZKind::Schur { rho } => write!(f, "schur(rho={rho})"),
            CZKind::Custom(_) => write!(f, "custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CZKernelSpec {
    pub kind: CZKind,
    pub psi: Cutoff,
    /// Holder exponent in the standard-kernel smoothness bound
    pub delta: f64,
}

impl CZKernelSpec {
    pub fn new(kind: CZKind) -> Result<Self> {
        let s = CZKernelSpec { kind, psi: Cutoff::default(), delta: 1.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn g(j: u8, plus: bool, a: C64, b: C64) -> Result<Self> {
        Self::new(CZKind::G { j, plus, a, b })
    }

    /// The b-restrictions under which g_2+, g_3-, g_4+ are CZ kernels.
    pub fn validate(&self) -> Result<()> {
        if !(self.psi.lo >= 0.0 && self.psi.hi > self.psi.lo) {
            return config("cutoff needs 0 <= lo < hi");
        }
        if let CZKind::G { j, plus, a, b } = &self.kind {
            if !(1..=4).contains(j) {
                return config(format!("g_j needs j in 1..=4, got {j}"));
            }
            let need = match (j, plus) {
                (2, true) | (4, true) => Some(-*a),
                (3, false) => Some(-I * a),
                _ => None,
            };
            if let Some(bn) = need {
                if (b - bn).norm() > 1e-12 * (1.0 + a.norm()) {
                    return config(format!("g_{j}{} requires b = {bn}, got b = {b}", if *plus { "+" } else { "-" }));
                }
            }
        }
        if let CZKind::TruncatedHilbert { eps } = self.kind {
            if !(eps > 0.0) {
                return config("truncated Hilbert transform needs eps > 0");
            }
        }
        Ok(())
    }

    fn k1(&self, x: f64, y: f64, plus: bool) -> C64 {
        let (ax, ay) = (x.abs(), y.abs());
        let d = if plus { ax + ay } else { ax - ay };
        let p = self.psi.eval(d * d);
        if p == 0.0 {
            cr(0.0)
        } else {
            cr(p / d)
        }
    }

    fn k2(&self, x: f64, y: f64, plus: bool) -> C64 {
        let (ax, ay) = (x.abs(), y.abs());
        let p = self.psi.eval((ax - ay).powi(2));
        if p == 0.0 {
            return cr(0.0);
        }
        let den = if plus { C64::new(ax, ay) } else { C64::new(ax, -ay) };
        cr(p) / den
    }

    /// Pointwise kernel K(x, y).
    pub fn kernel(&self, x: f64, y: f64) -> C64 {
        match &self.kind {
            CZKind::K1 { plus } => self.k1(x, y, *plus),
            CZKind::K2 { plus } => self.k2(x, y, *plus),
            CZKind::G { j, plus, a, b } => {
                let s = if *plus { 1.0 } else { -1.0 };
                let g = a * (self.k1(x, y, true) + self.k1(x, y, false) * s)
                    + b * (self.k2(x, y, true) + self.k2(x, y, false) * s);
                let (so, si) = g_signs(*j);
                g * (if so { x.signum() } else { 1.0 }) * (if si { y.signum() } else { 1.0 })
            }
            CZKind::TruncatedHilbert { eps } => {
                let d = x - y;
                if d.abs() > *eps {
                    cr(1.0 / d)
                } else {
                    cr(0.0)
                }
            }
            CZKind::Schur { rho } => cr((1.0 + (x.abs() - y.abs()).powi(2)).powf(-rho / 2.0)),
            CZKind::Custom(f) => f(x, y),
        }
    }

    /// Operator matrix on the grid: entries K(x_i, y_j) w_j.
    pub fn matrix(&self, g: &Grid) -> DMatrix<C64> {
        let x = g.x();
        let w = g.weights();
        DMatrix::from_fn(g.n, g.n, |i, j| self.kernel(x[i], x[j]) * w[j])
    }
}

fn g_signs(j: u8) -> (bool, bool) {
    (j == 3 || j == 4, j == 2 || j == 4)
}

pub fn cz_apply(spec: &CZKernelSpec, f: &SampledFunction) -> Result<SampledFunction> {
    spec.validate()?;
    let g = &f.grid;
    let x = g.x();
    let w = g.weights();
    let vals = (0..g.n)
        .into_par_iter()
        .map(|i| (0..g.n).map(|j| spec.kernel(x[i], x[j]) * f.values[j] * w[j]).sum())
        .collect();
    Ok(SampledFunction { grid: g.clone(), values: vals })
}

/// Translation-type kernels of the chi+- reduction.
fn tilde_k1(psi: &Cutoff, x: f64, y: f64) -> C64 {
    let d = x - y;
    let p = psi.eval(d * d);
    if p == 0.0 {
        cr(0.0)
    } else {
        cr(p / d)
    }
}

fn tilde_k2(psi: &Cutoff, x: f64, y: f64, plus: bool) -> C64 {
    let p = psi.eval((x - y).powi(2));
    if p == 0.0 {
        return cr(0.0);
    }
    cr(p) / if plus { C64::new(x, y) } else { C64::new(x, -y) }
}

/// (chi_a T chi_b)(1 + tau) f evaluated on the grid for a translation kernel `kt`;
/// `a_pos`, `b_pos` choose chi+ (true) or chi-.
fn restricted(g: &Grid, f: &[C64], kt: impl Fn(f64, f64) -> C64 + Sync, a_pos: bool, b_pos: bool) -> Vec<C64> {
    let x = g.x();
    let w = g.weights();
    let n = g.n;
    // (1 + tau) f: f(y) + f(-y); the grid is mirror symmetric
    let sym: Vec<C64> = (0..n).map(|j| f[j] + f[n - 1 - j]).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            if (x[i] > 0.0) != a_pos {
                return cr(0.0);
            }
            (0..n).filter(|&j| (x[j] > 0.0) == b_pos).map(|j| kt(x[i], x[j]) * sym[j] * w[j]).sum()
        })
        .collect()
}

fn k1_decomposed(spec: &CZKernelSpec, g: &Grid, f: &[C64], plus: bool) -> Vec<C64> {
    let kt = |x: f64, y: f64| tilde_k1(&spec.psi, x, y);
    // chi+ T chi-+ - chi- T chi+-
    let a = restricted(g, f, kt, true, !plus);
    let b = restricted(g, f, kt, false, plus);
    a.iter().zip(&b).map(|(p, q)| p - q).collect()
}

fn k2_decomposed(spec: &CZKernelSpec, g: &Grid, f: &[C64], plus: bool) -> Vec<C64> {
    let kt = |x: f64, y: f64| tilde_k2(&spec.psi, x, y, plus);
    let a = restricted(g, f, kt, true, true);
    let b = restricted(g, f, kt, false, false);
    a.iter().zip(&b).map(|(p, q)| p - q).collect()
}

/// The same operator through (chi+ T~ chi-+ - chi- T~ chi+-)(1 + tau) and its k2 analogue.
pub fn cz_apply_decomposed(spec: &CZKernelSpec, f: &SampledFunction) -> Result<SampledFunction> {
    spec.validate()?;
    let g = &f.grid;
    let vals = match &spec.kind {
        CZKind::K1 { plus } => k1_decomposed(spec, g, &f.values, *plus),
        CZKind::K2 { plus } => k2_decomposed(spec, g, &f.values, *plus),
        CZKind::G { j, plus, a, b } => {
            let (so, si) = g_signs(*j);
            let x = g.x();
            let input: Vec<C64> =
                if si { f.values.iter().zip(x).map(|(v, x)| v * x.signum()).collect() } else { f.values.clone() };
            let s = if *plus { 1.0 } else { -1.0 };
            let p1 = k1_decomposed(spec, g, &input, true);
            let m1 = k1_decomposed(spec, g, &input, false);
            let p2 = k2_decomposed(spec, g, &input, true);
            let m2 = k2_decomposed(spec, g, &input, false);
            (0..g.n)
                .map(|i| {
                    let v = a * (p1[i] + m1[i] * s) + b * (p2[i] + m2[i] * s);
                    if so {
                        v * x[i].signum()
                    } else {
                        v
                    }
                })
                .collect()
        }
        other => return config(format!("{other:?} has no chi+- decomposition")),
    };
    Ok(SampledFunction { grid: g.clone(), values: vals })
}

/// max |direct - decomposed| / max |direct| over a seeded random input.
pub fn decomposition_defect(spec: &CZKernelSpec, g: &Grid, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<C64> = (0..g.n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let f = SampledFunction::new(g, vals)?;
    let a = cz_apply(spec, &f)?;
    let b = cz_apply_decomposed(spec, &f)?;
    let scale = a.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let d = a.values.iter().zip(&b.values).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    Ok(d / scale)
}

/// Which translation kernel an adjoint identity refers to.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum TildeKernel {
    K1,
    K2 { plus: bool },
}

/// max |A* - c A| / max |A| for (T~k1)* = -T~k1 and (T~k2+-)* = +-i T~k2+-,
/// with A* the adjoint in the trapezoid inner product.
pub fn adjoint_identity_defect(which: TildeKernel, psi: &Cutoff, g: &Grid) -> f64 {
    let x = g.x();
    let w = g.weights();
    let (kt, c): (Box<dyn Fn(f64, f64) -> C64>, C64) = match which {
        TildeKernel::K1 => (Box::new(|a, b| tilde_k1(psi, a, b)), cr(-1.0)),
        TildeKernel::K2 { plus } => (Box::new(move |a, b| tilde_k2(psi, a, b, plus)), if plus { I } else { -I }),
    };
    let a = DMatrix::from_fn(g.n, g.n, |i, j| kt(x[i], x[j]) * w[j]);
    let adj = super::weighted_adjoint(&a, g);
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (&adj - &a * c).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

// ---------------------------------------------------------------------------
// atoms and BMO

#[derive(Clone, Debug, Serialize)]
pub struct AtomSuiteReport {
    /// (radius, ||T a||_{L^1}) per atom
    pub outputs: Vec<(f64, f64)>,
    pub max_l1: f64,
    /// log-log slope of the per-bin maxima of ||T a||_1 against r
    pub envelope_slope: f64,
    /// BMO norms of T f over seeded random f with |f| <= 1
    pub bmo_outputs: Vec<f64>,
    pub max_bmo: f64,
    pub max_linf: f64,
}

/// Atoms with radii geometric in [r_min, r_max], centers random; ten radius bins.
pub fn atom_bmo_suite(
    op: &DMatrix<C64>,
    g: &Grid,
    n_atoms: usize,
    r_range: (f64, f64),
    seed: u64,
) -> Result<AtomSuiteReport> {
    let (r_min, r_max) = r_range;
    if !(r_min >= 2.0 && r_max >= r_min && r_max < 0.5 * g.half_width) {
        return config("atom radii must satisfy 2 <= r_min <= r_max < L/2");
    }
    if n_atoms < 10 {
        return config("atom suite needs at least ten atoms");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<(f64, f64)> = (0..n_atoms)
        .map(|k| {
            let t = k as f64 / (n_atoms - 1) as f64;
            let r = r_min * (r_max / r_min).powf(t);
            let room = 0.5 * g.half_width - r;
            (r, rng.gen_range(-room..=room))
        })
        .collect();
    let outputs = specs
        .par_iter()
        .enumerate()
        .map(|(k, &(r, c))| -> Result<(f64, f64)> {
            let a = make_atom(g, c, r, seed.wrapping_add(1 + k as u64))?;
            let v = op * DVector::from_vec(a.to_function(g).values);
            let out = SampledFunction { grid: g.clone(), values: v.as_slice().to_vec() };
            Ok((r, lp_norm(&out, 1.0, &WeightSpec::Unit)))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_l1 = outputs.iter().map(|o| o.1).fold(0.0, f64::max);
    let bins = 10;
    let per = n_atoms / bins;
    let (mut br, mut bm) = (Vec::new(), Vec::new());
    for b in 0..bins {
        let chunk = &outputs[b * per..if b == bins - 1 { n_atoms } else { (b + 1) * per }];
        let r = chunk.iter().map(|o| o.0.ln()).sum::<f64>() / chunk.len() as f64;
        br.push(r);
        bm.push(chunk.iter().map(|o| o.1).fold(0.0, f64::max).ln());
    }
    let envelope_slope = linfit(&br, &bm).0;
    let bmo: Vec<(f64, f64)> = (0..8)
        .into_par_iter()
        .map(|k| {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37 + k as u64));
            let f: Vec<C64> = (0..g.n).map(|_| cr(r.gen_range(-1.0..1.0))).collect();
            let v = op * DVector::from_vec(f);
            let out = SampledFunction { grid: g.clone(), values: v.as_slice().to_vec() };
            (bmo_norm(&out), lp_norm(&out, f64::INFINITY, &WeightSpec::Unit))
        })
        .collect();
    Ok(AtomSuiteReport {
        outputs,
        max_l1,
        envelope_slope,
        bmo_outputs: bmo.iter().map(|b| b.0).collect(),
        max_bmo: bmo.iter().map(|b| b.0).fold(0.0, f64::max),
        max_linf: bmo.iter().map(|b| b.1).fold(0.0, f64::max),
    })
}
