//! Counterexample models: the unbounded kernel [1/(|x|+|y|) + 1/(|x|-|y|)] chi_{||x|-|y||>=2},
//! the shift-averaged odd kernel that stays bounded on indicators, and the D* probe of the
//! second-kind low-energy kernel.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::{Cutoff, WaveOperatorBundle};
use crate::birman_schwinger::{build_projections, fit_inverse_expansion, ProjectionSet, VUFactorization};
use crate::error::{config, Result};
use crate::free_ops::I;
use crate::grid::Grid;
use crate::potentials::SampledPotential;
use crate::quad::{gauss_legendre, geomspace, loglog_slope};

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Model (a) kernel [1/(|x|+|y|) + 1/(|x|-|y|)] chi_{||x|-|y|| >= 2}.
pub fn model_a_kernel(x: f64, y: f64) -> f64 {
    let (ax, ay) = (x.abs(), y.abs());
    if (ax - ay).abs() < 2.0 {
        0.0
    } else {
        1.0 / (ax + ay) + 1.0 / (ax - ay)
    }
}

/// (T f_R)(x) for f_R = chi_[-R, R] by trapezoid quadrature on the grid.
pub fn model_a_value(g: &Grid, r: f64, x: f64) -> f64 {
    g.x().iter().zip(g.weights()).filter(|(y, _)| y.abs() <= r).map(|(y, w)| model_a_kernel(x, *y) * w).sum()
}

/// Closed form of (T f_R)(x): 2 [ln(A + t) - ln|A - t|] over the allowed t in [0, R], A = |x|.
pub fn model_a_closed(r: f64, x: f64) -> f64 {
    let a = x.abs();
    let prim = |t: f64| (a + t).ln() - (a - t).abs().ln();
    let mut s = 0.0;
    // allowed: t <= A - 2 or t >= A + 2
    let hi1 = r.min(a - 2.0);
    if hi1 > 0.0 {
        s += prim(hi1) - prim(0.0);
    }
    let lo2 = a + 2.0;
    if r > lo2 {
        s += prim(r) - prim(lo2);
    }
    2.0 * s
}

/// int_{R+2 <= |x| <= R'} |(T f_R)(x)| dx by Gauss-Legendre in log x.
pub fn model_a_tail(r: f64, r_prime: f64) -> f64 {
    let (t, w) = gauss_legendre(400, (r + 2.0).ln(), r_prime.ln());
    2.0 * t.iter().zip(&w).map(|(t, w)| model_a_closed(r, t.exp()).abs() * t.exp() * w).sum::<f64>()
}

/// Antiderivative for t >= 0 of 1/(A+t) - 1/(A-t) - 2t/(A^2+t^2).
fn model_b_prim(a: f64, t: f64) -> f64 {
    (a + t).ln() + (a - t).abs().ln() - (a * a + t * t).ln()
}

/// int_c^d over t >= 0 of the positive-t expression, on the allowed set |A - t| >= 2.
fn model_b_half(a: f64, c: f64, d: f64) -> f64 {
    if d <= c {
        return 0.0;
    }
    let mut s = 0.0;
    let (lo1, hi1) = (c, d.min(a - 2.0));
    if hi1 > lo1 {
        s += model_b_prim(a, hi1) - model_b_prim(a, lo1);
    }
    let (lo2, hi2) = (c.max(a + 2.0), d);
    if hi2 > lo2 {
        s += model_b_prim(a, hi2) - model_b_prim(a, lo2);
    }
    s
}

/// int_lo^hi g~4(X, t) dt with g~4 = i sgn X sgn t (chi/(|X|+|t|) - chi/(|X|-|t|) - 2 chi |t|/(X^2+t^2)).
pub fn model_b_row_integral(xx: f64, lo: f64, hi: f64) -> C64 {
    let a = xx.abs();
    let pos = model_b_half(a, lo.max(0.0), hi.max(0.0));
    let neg = model_b_half(a, (-hi).max(0.0), (-lo).max(0.0));
    I * (xx.signum() * (pos - neg))
}

fn model_bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// (T_G f_R)(x) for G = int m(u1, u2) g~4(x - th1 u1, y - th2 u2) dTheta with
/// the model weight m = u1 u2 phi(u1) phi(u2).
pub fn model_b_value(r: f64, x: f64) -> C64 {
    let (u, wu) = gauss_legendre(12, -1.0, 1.0);
    let (th, wt) = gauss_legendre(6, 0.0, 1.0);
    let mut acc = C64::new(0.0, 0.0);
    for (i1, &u1) in u.iter().enumerate() {
        let m1 = u1 * model_bump(u1) * wu[i1];
        for (i2, &u2) in u.iter().enumerate() {
            let m = m1 * u2 * model_bump(u2) * wu[i2];
            for (k1, &t1) in th.iter().enumerate() {
                for (k2, &t2) in th.iter().enumerate() {
                    let s = t2 * u2;
                    acc += model_b_row_integral(x - t1 * u1, -r - s, r - s) * (m * wt[k1] * wt[k2]);
                }
            }
        }
    }
    acc
}

/// sup_x |(T_G f_R)(x)| over a scan of [-3R, 3R] refined near |x| = R.
pub fn model_b_sup(r: f64) -> f64 {
    let mut xs: Vec<f64> = (0..=300).map(|k| -3.0 * r + 6.0 * r * k as f64 / 300.0).collect();
    for c in [-r, r] {
        xs.extend((0..=80).map(|k| c - 4.0 + 8.0 * k as f64 / 80.0));
    }
    xs.par_iter().map(|&x| model_b_value(r, x).norm()).reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelARow {
    pub r: f64,
    pub value: f64,
    pub expected: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub model_a: Vec<ModelARow>,
    /// (R', tail integral) for f_1
    pub tail: Vec<(f64, f64)>,
    /// d ln T / d ln ln R', 1 for logarithmic growth
    pub tail_slope: f64,
    /// (R, sup-norm) for model (b)
    pub model_b: Vec<(f64, f64)>,
    pub model_b_slope: f64,
    /// (R, ||W f_R||_inf) through a constructed wave operator
    pub full_pipeline: Option<Vec<(f64, f64)>>,
    pub full_pipeline_slope: Option<f64>,
}

/// Runs models (a) and (b) over `radii` on `g` (needs L >= 2 max R), plus the
/// full-pipeline sup norms when a bundle is given.
pub fn counterexample_sweep(
    radii: &[f64],
    g: &Grid,
    tail_range: (f64, f64),
    bundle: Option<&WaveOperatorBundle>,
) -> Result<CounterexampleReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return config("counterexample sweep needs positive radii");
    }
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    if g.half_width < 2.0 * rmax {
        return config(format!("grid half-width {} is below 2 max R = {}", g.half_width, 2.0 * rmax));
    }
    if !(tail_range.0 > 3.0 && tail_range.1 > tail_range.0) {
        return config("tail range needs 3 < R'_min < R'_max");
    }
    let model_a = radii
        .iter()
        .map(|&r| {
            let value = model_a_value(g, r, r + 2.0);
            let expected = 2.0 * (r + 1.0).ln();
            ModelARow { r, value, expected, rel_err: (value - expected).abs() / expected }
        })
        .collect();
    let rp = geomspace(tail_range.0, tail_range.1, 9);
    let tail: Vec<(f64, f64)> = rp.iter().map(|&p| (p, model_a_tail(1.0, p))).collect();
    let lx: Vec<f64> = rp.iter().map(|p| p.ln()).collect();
    let ty: Vec<f64> = tail.iter().map(|t| t.1).collect();
    let tail_slope = loglog_slope(&lx, &ty).0;
    let model_b: Vec<(f64, f64)> = radii.iter().map(|&r| (r, model_b_sup(r))).collect();
    let (rs, bs): (Vec<f64>, Vec<f64>) = model_b.iter().cloned().unzip();
    let model_b_slope = if radii.len() > 1 { loglog_slope(&rs, &bs).0 } else { 0.0 };
    let (full_pipeline, full_pipeline_slope) = match bundle {
        Some(b) => {
            let bg = &b.grid;
            let rows: Vec<(f64, f64)> = radii
                .iter()
                .filter(|r| **r <= 0.5 * bg.half_width)
                .map(|&r| {
                    let f = bg.sample_real(|x| if x.abs() <= r { 1.0 } else { 0.0 });
                    (r, b.apply(&f).abs().into_iter().fold(0.0, f64::max))
                })
                .collect();
            let slope = if rows.len() > 1 {
                let (a, c): (Vec<f64>, Vec<f64>) = rows.iter().cloned().unzip();
                Some(loglog_slope(&a, &c).0)
            } else {
                None
            };
            (Some(rows), slope)
        }
        None => (None, None),
    };
    Ok(CounterexampleReport { model_a, tail, tail_slope, model_b, model_b_slope, full_pipeline, full_pipeline_slope })
}

// ---------------------------------------------------------------------------
// D*

#[derive(Clone, Debug, Serialize)]
pub struct DStarConfig {
    /// fit window for the expansion blocks
    pub fit_lambdas: (f64, f64, usize),
    pub fit_powers: Vec<i32>,
    /// g_R radius; None picks max(2, support radius + 1)
    pub r: Option<f64>,
    /// chi(lambda) = 1 - cutoff(lambda)
    pub chi: Cutoff,
    pub lambda_nodes: usize,
    pub y_nodes: usize,
    pub x_points: usize,
}

impl Default for DStarConfig {
    fn default() -> Self {
        DStarConfig {
            fit_lambdas: (1e-2, 1e-1, 12),
            fit_powers: (-3..=4).collect(),
            r: None,
            chi: Cutoff { lo: 1.0, hi: 2.0 },
            lambda_nodes: 400,
            y_nodes: 64,
            x_points: 12,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DStarReport {
    pub d_star: (f64, f64),
    pub d_star_abs: f64,
    pub fit_residual: f64,
    pub reliable: bool,
    pub r: f64,
    pub xs: Vec<f64>,
    /// |(T* g_R)(x)| at xs
    pub tail_values: Vec<f64>,
    pub tail_exponent: f64,
    /// c in |(T* g_R)(x)| ~ c R / x
    pub far_field_coefficient: f64,
    /// c / (|D*| / 72)
    pub consistency_ratio: f64,
}

/// 6 <x^3 v, Q3 B_{-1} Q1 x v> - <x^3 v, Q3 B_{-3} Q3 x^3 v> with bilinear pairings.
pub fn d_star_from_blocks(vu: &VUFactorization, ps: &ProjectionSet, b3: &DMatrix<C64>, b1: &DMatrix<C64>) -> C64 {
    let n = vu.len();
    let e3 = DVector::from_fn(n, |i, _| vu.d[i] * vu.x[i].powi(3));
    let e1 = DVector::from_fn(n, |i, _| vu.d[i] * vu.x[i]);
    let q3e3 = (&ps.q3 * e3).map(cr);
    let q1e1 = (&ps.q1 * e1).map(cr);
    let t1 = (q3e3.transpose() * b1 * &q1e1)[(0, 0)];
    let t3 = (q3e3.transpose() * b3 * &q3e3)[(0, 0)];
    t1 * 6.0 - t3
}

/// sum_{k >= order} c_k z^k / k! with c_k = deriv(k); converges for the |z| <~ a few used here.
fn taylor_tail(deriv: impl Fn(u32) -> C64, z: f64, order: u32) -> C64 {
    let mut term_scale = 1.0;
    for k in 1..=order {
        term_scale *= z / k as f64;
    }
    let mut acc = C64::new(0.0, 0.0);
    let mut k = order;
    loop {
        let t = deriv(k) * term_scale;
        acc += t;
        k += 1;
        term_scale *= z / k as f64;
        if (term_scale.abs() < 1e-18 && k > order + 4) || k > order + 80 {
            break;
        }
    }
    acc
}

/// F+^{(k)}(s) = i^{k+1} e^{is} - (-1)^k e^{-s} with the exponentials precomputed.
fn fplus_k(eis: C64, ems: f64, k: u32) -> C64 {
    let ik = match (k + 1) % 4 {
        0 => cr(1.0),
        1 => I,
        2 => cr(-1.0),
        _ => -I,
    };
    ik * eis - cr(if k.is_multiple_of(2) { ems } else { -ems })
}

/// (T* g_R)(x) for the kernel assembled from the lambda^-3 and lambda^-1 blocks:
/// conj of -(2/(pi i)) int chi(lambda) lambda^3 <g_R R0+ v, (lambda^-3 B3 + lambda^-1 B1) v J(., x)> dlambda,
/// with the moment cancellations of Q3 and Q1 taken analytically as Taylor remainders.
pub fn low_energy_tail(
    vu: &VUFactorization,
    ps: &ProjectionSet,
    b3: &DMatrix<C64>,
    b1: &DMatrix<C64>,
    r: f64,
    xs: &[f64],
    cfg: &DStarConfig,
) -> Vec<C64> {
    let s = vu.len();
    let q3 = ps.q3.map(cr);
    let q1 = ps.q1.map(cr);
    let (lam, wl) = gauss_legendre(cfg.lambda_nodes, 0.0, cfg.chi.hi);
    let (yp, wy) = gauss_legendre(cfg.y_nodes, r, 2.0 * r);
    let terms: Vec<Vec<C64>> = lam
        .par_iter()
        .zip(&wl)
        .map(|(&l, &w)| {
            let chi = 1.0 - cfg.chi.eval(l);
            if chi == 0.0 {
                return vec![C64::new(0.0, 0.0); xs.len()];
            }
            let l3 = l.powi(3);
            // a_k = int g_R(y) R0+(y, u_k) dy; g_R is odd, so the y < 0 half mirrors y > 0 with u -> -u
            let a = DVector::from_fn(s, |k, _| {
                let u = vu.x[k];
                let mut acc = C64::new(0.0, 0.0);
                for (&y, &wyy) in yp.iter().zip(&wy) {
                    let eis = C64::from_polar(1.0, l * y);
                    let ems = (-l * y).exp();
                    let d = |j: u32| fplus_k(eis, ems, j);
                    // y > 0: expansion variable -l u; y < 0 (g = -1): +l u
                    acc += (taylor_tail(d, -l * u, 3) - taylor_tail(d, l * u, 3)) * wyy;
                }
                acc / (4.0 * l3) * vu.d[k]
            });
            let alpha = &q3 * a;
            let at3 = alpha.transpose() * b3;
            let at1 = alpha.transpose() * b1 * cr(l * l);
            xs.iter()
                .map(|&x| {
                    let jv = |order: u32| {
                        DVector::from_fn(s, |k, _| {
                            let u = vu.x[k];
                            let d = |j: u32| cr((l * x + j as f64 * FRAC_PI_2).cos());
                            I * taylor_tail(d, -l * u, order) / (2.0 * l3) * vu.d[k]
                        })
                    };
                    let beta3 = &q3 * jv(3);
                    let beta1 = &q1 * jv(1);
                    ((&at3 * beta3)[(0, 0)] + (&at1 * beta1)[(0, 0)]) * (w * chi)
                })
                .collect()
        })
        .collect();
    let coef = -cr(2.0 / PI) / I;
    (0..xs.len()).map(|i| (terms.iter().map(|t| t[i]).sum::<C64>() * coef).conj()).collect()
}

/// D* from fitted expansion blocks and the far-field coefficient of T* g_R.
pub fn d_star_probe(pot: &SampledPotential, cfg: &DStarConfig) -> Result<DStarReport> {
    let supp = match pot.support_radius {
        Some(r) => r,
        None => return config("the D* probe needs a compactly supported potential"),
    };
    let vu = VUFactorization::new(pot)?;
    let ps = build_projections(&vu)?;
    if ps.rank_q3 == 0 {
        return config("the D* probe needs a second-kind resonance (Q3 has rank 0)");
    }
    let (lo, hi, m) = cfg.fit_lambdas;
    let fit = fit_inverse_expansion(&vu, &geomspace(lo, hi, m), &cfg.fit_powers)?;
    let (b3, b1) = match (fit.block(-3), fit.block(-1)) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        _ => return config("fit powers must include -3 and -1"),
    };
    let fit_residual = fit.residuals.iter().cloned().fold(0.0, f64::max);
    let r = cfg.r.unwrap_or((supp + 1.0).max(2.0));
    if r < supp + 1.0 {
        return config(format!("g_R needs supp V inside [-R + 1, R - 1]; R = {r}, support radius {supp}"));
    }
    d_star_with_blocks(&vu, &ps, &b3, &b1, r, fit_residual, cfg)
}

pub fn d_star_with_blocks(
    vu: &VUFactorization,
    ps: &ProjectionSet,
    b3: &DMatrix<C64>,
    b1: &DMatrix<C64>,
    r: f64,
    fit_residual: f64,
    cfg: &DStarConfig,
) -> Result<DStarReport> {
    let d = d_star_from_blocks(vu, ps, b3, b1);
    // far window: the 1/x law needs x well past the chi transition and R
    let x0 = (20.0 * r).max(40.0);
    let xs = geomspace(x0, 4.0 * x0, cfg.x_points);
    let vals = low_energy_tail(vu, ps, b3, b1, r, &xs, cfg);
    let tail_values: Vec<f64> = vals.iter().map(|z| z.norm()).collect();
    let flat = tail_values.iter().all(|v| *v == 0.0);
    let tail_exponent = if flat { 0.0 } else { loglog_slope(&xs, &tail_values).0 };
    // least squares for |T g| = c R / x
    let basis: Vec<f64> = xs.iter().map(|x| r / x).collect();
    let c = basis.iter().zip(&tail_values).map(|(b, v)| b * v).sum::<f64>() / basis.iter().map(|b| b * b).sum::<f64>();
    let consistency_ratio = if d.norm() > 0.0 { c / (d.norm() / 72.0) } else { f64::NAN };
    Ok(DStarReport {
        d_star: (d.re, d.im),
        d_star_abs: d.norm(),
        fit_residual,
        reliable: fit_residual < 1e-2,
        r,
        xs,
        tail_values,
        tail_exponent,
        far_field_coefficient: c,
        consistency_ratio,
    })
}
