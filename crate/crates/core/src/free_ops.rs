//! Closed-form objects of the free operator d^4/dx^4: the functions F+-,
//! free resolvent kernels, G0, Taylor splits, and the free propagator.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{config, Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::quad::gauss_legendre;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn s(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// lambda > 0 together with the boundary-value branch.
#[derive(Clone, Copy, Debug)]
pub struct SpectralParam {
    pub lambda: f64,
    pub sign: Sign,
}

impl SpectralParam {
    pub fn new(lambda: f64, sign: Sign) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("spectral parameter must be positive, got {lambda}")));
        }
        Ok(SpectralParam { lambda, sign })
    }
}

/// F+-(s) = +-i e^{+-is} - e^{-s}.
pub fn f_pm(s: f64, sign: Sign) -> C64 {
    f_pm_deriv(s, sign, 0)
}

/// k-th derivative of F+- in closed form: (+-i)^{k+1} e^{+-is} - (-1)^k e^{-s}.
pub fn f_pm_deriv(s: f64, sign: Sign, k: u32) -> C64 {
    let si = I * sign.s();
    let osc = si.powu(k + 1) * C64::from_polar(1.0, sign.s() * s);
    let sgn = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    osc - cr(sgn * (-s).exp())
}

/// The corrected function F~+-(s) = F+-(s) + (1 +- i) s^2 / 2, which has F~'(0) = F~''(0) = 0.
pub fn f_tilde_deriv(s: f64, sign: Sign, k: u32) -> C64 {
    let c = C64::new(1.0, sign.s());
    let corr = match k {
        0 => c * s * s / 2.0,
        1 => c * s,
        2 => c,
        _ => C64::new(0.0, 0.0),
    };
    f_pm_deriv(s, sign, k) + corr
}

/// Dense kernel K(x_i, y_j) acting by apply(f)_i = sum_j K_ij f_j h.
#[derive(Clone, Debug)]
pub struct ComplexKernel {
    pub rows: Grid,
    pub cols: Grid,
    pub k: DMatrix<C64>,
}

impl ComplexKernel {
    pub fn from_fn(rows: &Grid, cols: &Grid, f: impl Fn(f64, f64) -> C64 + Sync) -> Self {
        let (xr, xc) = (rows.x(), cols.x());
        let nr = rows.n;
        let nc = cols.n;
        // column-major fill, parallel over columns
        let data: Vec<C64> = (0..nc)
            .into_par_iter()
            .flat_map_iter(|j| {
                let y = xc[j];
                let f = &f;
                xr.iter().map(move |&x| f(x, y))
            })
            .collect();
        ComplexKernel { rows: rows.clone(), cols: cols.clone(), k: DMatrix::from_vec(nr, nc, data) }
    }

    pub fn identity(g: &Grid) -> Self {
        // the identity operator in the h-weighted action is I / h
        ComplexKernel { rows: g.clone(), cols: g.clone(), k: DMatrix::identity(g.n, g.n) * cr(1.0 / g.h) }
    }

    pub fn apply(&self, f: &SampledFunction) -> SampledFunction {
        assert!(f.grid.same_as(&self.cols), "kernel/function grid mismatch");
        let v = nalgebra::DVector::from_column_slice(&f.values);
        let out = &self.k * v * cr(self.cols.h);
        SampledFunction { grid: self.rows.clone(), values: out.as_slice().to_vec() }
    }

    /// Matrix of the discrete operator, i.e. K scaled by the column spacing.
    pub fn operator(&self) -> DMatrix<C64> {
        &self.k * cr(self.cols.h)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let k = &self.k;
        k.nrows() == k.ncols() && (0..k.nrows()).all(|i| (0..i).all(|j| (k[(i, j)] - k[(j, i)]).norm() <= tol))
    }
}

/// R0+-(lambda^4)(x, y) = F+-(lambda|x - y|) / (4 lambda^3).
pub fn resolvent_entry(sp: SpectralParam, r: f64) -> C64 {
    f_pm(sp.lambda * r, sp.sign) / (4.0 * sp.lambda.powi(3))
}

/// (R0+ - R0-)(lambda^4)(x, y) = i cos(lambda|x - y|) / (2 lambda^3), evaluated in closed form.
pub fn resolvent_jump_entry(lambda: f64, r: f64) -> C64 {
    I * (lambda * r).cos() / (2.0 * lambda.powi(3))
}

pub fn free_resolvent_kernel(sp: SpectralParam, g: &Grid) -> ComplexKernel {
    ComplexKernel::from_fn(g, g, |x, y| resolvent_entry(sp, (x - y).abs()))
}

pub fn resolvent_jump_kernel(lambda: f64, g: &Grid) -> Result<ComplexKernel> {
    SpectralParam::new(lambda, Sign::Plus)?;
    Ok(ComplexKernel::from_fn(g, g, |x, y| resolvent_jump_entry(lambda, (x - y).abs())))
}

/// G0 = (d^4)^{-1} with kernel |x - y|^3 / 12.
pub fn g0_kernel(g: &Grid) -> ComplexKernel {
    ComplexKernel::from_fn(g, g, |x, y| cr((x - y).abs().powi(3) / 12.0))
}

/// Interior fourth difference [1, -4, 6, -4, 1] / h^4; the two nodes at each end are left at zero.
pub fn fourth_difference(f: &SampledFunction) -> SampledFunction {
    let v = &f.values;
    let n = v.len();
    let h4 = f.grid.h.powi(4);
    let mut out = vec![C64::new(0.0, 0.0); n];
    for i in 2..n - 2 {
        out[i] = (v[i - 2] - v[i - 1] * 4.0 + v[i] * 6.0 - v[i + 1] * 4.0 + v[i + 2]) / h4;
    }
    SampledFunction { grid: f.grid.clone(), values: out }
}

/// Both forms of F+^(a)(lambda|x|) [F+^(b) - F-^(b)](lambda|y|).
#[derive(Clone, Copy, Debug)]
pub struct AlphaBeta {
    pub direct: C64,
    pub expansion: C64,
}

pub fn f_alpha_beta(lambda: f64, x: f64, y: f64, alpha: u32, beta: u32) -> Result<AlphaBeta> {
    if alpha > 3 || beta > 3 {
        return config(format!("alpha, beta must lie in 0..=3, got ({alpha}, {beta})"));
    }
    if lambda < 0.0 {
        return Err(Error::Domain("lambda must be nonnegative".into()));
    }
    let (a, b) = (lambda * x.abs(), lambda * y.abs());
    let direct =
        f_pm_deriv(a, Sign::Plus, alpha) * (f_pm_deriv(b, Sign::Plus, beta) - f_pm_deriv(b, Sign::Minus, beta));
    let iab = I.powu(alpha + beta);
    let sb = if beta.is_multiple_of(2) { 1.0 } else { -1.0 };
    let sa = if alpha.is_multiple_of(2) { 1.0 } else { -1.0 };
    let e = |re: f64, im: f64| C64::new(re, im).exp();
    let expansion = -iab * (e(0.0, a + b) + e(0.0, a - b) * sb) - I.powu(beta + 1) * e(-a, b) * sa
        + (-I).powu(beta + 1) * e(-a, -b) * sa;
    Ok(AlphaBeta { direct, expansion })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FKind {
    Plus,
    Minus,
    TildePlus,
    TildeMinus,
}

impl FKind {
    pub fn deriv(self, s: f64, k: u32) -> C64 {
        match self {
            FKind::Plus => f_pm_deriv(s, Sign::Plus, k),
            FKind::Minus => f_pm_deriv(s, Sign::Minus, k),
            FKind::TildePlus => f_tilde_deriv(s, Sign::Plus, k),
            FKind::TildeMinus => f_tilde_deriv(s, Sign::Minus, k),
        }
    }
}

/// Taylor split of F(lambda|x - y|) about y = 0 with integral remainder in theta.
#[derive(Clone, Debug)]
pub struct TaylorSplit {
    pub lambda: f64,
    pub x: f64,
    pub y: f64,
    pub order: u32,
    pub f: FKind,
    /// F(lambda|x|), -lambda y F'(lambda|x|) sgn x, ... up to order - 1
    pub terms: Vec<C64>,
    pub remainder: C64,
}

fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl TaylorSplit {
    /// Integrand of the remainder at theta.
    pub fn remainder_integrand(&self, theta: f64) -> C64 {
        let (l, x, y) = (self.lambda, self.x, self.y);
        let u = x - theta * y;
        let s = l * u.abs();
        match self.order {
            1 => -self.f.deriv(s, 1) * (l * y * sgn(u)),
            2 => self.f.deriv(s, 2) * (l * l * y * y * (1.0 - theta)),
            _ => -self.f.deriv(s, 3) * (l.powi(3) * y.powi(3) * (1.0 - theta).powi(2) * sgn(u) / 2.0),
        }
    }

    pub fn reconstruct(&self) -> C64 {
        self.terms.iter().sum::<C64>() + self.remainder
    }

    pub fn direct(&self) -> C64 {
        self.f.deriv(self.lambda * (self.x - self.y).abs(), 0)
    }
}

pub fn taylor_split(lambda: f64, x: f64, y: f64, order: u32, f: FKind) -> Result<TaylorSplit> {
    if !(1..=3).contains(&order) {
        return config(format!("Taylor order must be 1, 2 or 3, got {order}"));
    }
    if order == 3 && matches!(f, FKind::Plus | FKind::Minus) {
        return Err(Error::Domain(
            "order-3 split needs F''(0) = 0, which fails for F+-; use the corrected F~+-".into(),
        ));
    }
    let s = lambda * x.abs();
    let mut terms = vec![f.deriv(s, 0)];
    if order >= 2 {
        terms.push(-f.deriv(s, 1) * (lambda * y * sgn(x)));
    }
    if order >= 3 {
        terms.push(f.deriv(s, 2) * (lambda * lambda * y * y / 2.0));
    }
    let mut ts = TaylorSplit { lambda, x, y, order, f, terms, remainder: C64::new(0.0, 0.0) };
    // The integrand has a kink where x = theta y; split there.
    let mut cuts = vec![0.0, 1.0];
    if y != 0.0 {
        let t = x / y;
        if t > 0.0 && t < 1.0 {
            cuts.insert(1, t);
        }
    }
    let mut rem = C64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let (nodes, weights) = gauss_legendre(64, w[0], w[1]);
        for (t, q) in nodes.iter().zip(&weights) {
            rem += ts.remainder_integrand(*t) * *q;
        }
    }
    ts.remainder = rem;
    Ok(ts)
}

/// Which dispersion relation the Fourier propagator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Symbol {
    /// xi^4
    Continuum,
    /// 16 sin^4(xi h / 2) / h^4, the symbol of the five-point stencil
    Stencil,
}

/// Smooth absorbing layer applied between short Fourier steps.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AbsorbingLayer {
    /// fraction of L occupied by the layer at each end
    pub width_frac: f64,
    /// damping rate at the outer edge
    pub strength: f64,
    pub dt: f64,
}

impl Default for AbsorbingLayer {
    fn default() -> Self {
        AbsorbingLayer { width_frac: 0.25, strength: 5.0, dt: 0.02 }
    }
}

#[derive(Clone, Debug)]
pub struct Propagated {
    pub u: SampledFunction,
    pub boundary_mass: f64,
    pub wrap_warning: bool,
}

/// Fourier evolution e^{-it d^4} on the periodized box.
pub struct FreePropagator {
    grid: Grid,
    symbol: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub kind: Symbol,
}

impl FreePropagator {
    pub fn new(grid: &Grid, kind: Symbol) -> Self {
        let n = grid.n;
        let h = grid.h;
        let period = n as f64 * h;
        let symbol = (0..n)
            .map(|k| {
                let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                let xi = 2.0 * std::f64::consts::PI * kk / period;
                match kind {
                    Symbol::Continuum => xi.powi(4),
                    Symbol::Stencil => 16.0 * (xi * h / 2.0).sin().powi(4) / h.powi(4),
                }
            })
            .collect();
        let mut pl = FftPlanner::new();
        FreePropagator { grid: grid.clone(), symbol, fwd: pl.plan_fft_forward(n), inv: pl.plan_fft_inverse(n), kind }
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Apply the Fourier multiplier m(symbol) in place.
    pub fn apply_multiplier(&self, v: &mut [C64], m: impl Fn(f64) -> C64) {
        self.fwd.process(v);
        let s = 1.0 / v.len() as f64;
        for (z, sym) in v.iter_mut().zip(&self.symbol) {
            *z *= m(*sym) * s;
        }
        self.inv.process(v);
    }

    pub fn evolve_values(&self, t: f64, v: &mut [C64]) {
        if t == 0.0 {
            return;
        }
        self.apply_multiplier(v, |s| C64::from_polar(1.0, -t * s));
    }

    /// u(t) = e^{-it d^4} f with a wraparound diagnostic.
    pub fn evolve(&self, t: f64, f: &SampledFunction) -> Propagated {
        assert!(f.grid.same_as(&self.grid));
        let mut v = f.values.clone();
        self.evolve_values(t, &mut v);
        let u = SampledFunction { grid: self.grid.clone(), values: v };
        let bm = u.boundary_mass(0.05);
        Propagated { u, boundary_mass: bm, wrap_warning: bm > 0.01 }
    }

    /// Evolve through an increasing schedule with an absorbing layer, calling `visit`
    /// at each scheduled time. An optional real potential is split in (Strang).
    pub fn evolve_absorbing(
        &self,
        f: &SampledFunction,
        times: &[f64],
        layer: AbsorbingLayer,
        potential: Option<&[f64]>,
        mut visit: impl FnMut(f64, &[C64]),
    ) {
        let l = self.grid.half_width;
        let w = layer.width_frac * l;
        let ramp: Vec<f64> = self.grid.x().iter().map(|x| ((x.abs() - (l - w)) / w).clamp(0.0, 1.0).powi(2)).collect();
        let mut u = f.values.clone();
        let mut t = 0.0;
        for &target in times {
            while t < target - 1e-12 {
                let dt = layer.dt.min(target - t);
                if let Some(vp) = potential {
                    for (z, v) in u.iter_mut().zip(vp) {
                        *z *= C64::from_polar(1.0, -0.5 * dt * v);
                    }
                }
                self.evolve_values(dt, &mut u);
                if let Some(vp) = potential {
                    for (z, v) in u.iter_mut().zip(vp) {
                        *z *= C64::from_polar(1.0, -0.5 * dt * v);
                    }
                }
                for (z, r) in u.iter_mut().zip(&ramp) {
                    *z *= (-dt * layer.strength * r).exp();
                }
                t += dt;
            }
            visit(t, &u);
        }
    }
}

pub fn free_propagator(t: f64, f: &SampledFunction) -> Propagated {
    FreePropagator::new(&f.grid, Symbol::Continuum).evolve(t, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn f_values() {
        assert!((f_pm(0.0, Sign::Plus) - C64::new(-1.0, 1.0)).norm() < 1e-15);
        assert!((f_pm(0.0, Sign::Minus) - C64::new(-1.0, -1.0)).norm() < 1e-15);
        let v = f_pm(std::f64::consts::PI, Sign::Plus);
        assert!((v - C64::new(-(-std::f64::consts::PI).exp(), -1.0)).norm() < 1e-15);
        // F'(0) = 0, F''(0) = -+i - 1, F'''(0) = 2
        for s in [Sign::Plus, Sign::Minus] {
            assert!(f_pm_deriv(0.0, s, 1).norm() < 1e-15);
            assert!((f_pm_deriv(0.0, s, 2) - C64::new(-1.0, -s.s())).norm() < 1e-15);
            assert!((f_pm_deriv(0.0, s, 3) - C64::new(2.0, 0.0)).norm() < 1e-15);
            assert!(f_tilde_deriv(0.0, s, 2).norm() < 1e-15);
        }
    }

    #[test]
    fn derivative_closed_forms_match_differences() {
        let h = 1e-5;
        for s in [Sign::Plus, Sign::Minus] {
            for k in 0..3 {
                for x in [0.3, 1.1, 2.7] {
                    let fd = (f_pm_deriv(x + h, s, k) - f_pm_deriv(x - h, s, k)) / (2.0 * h);
                    assert!((fd - f_pm_deriv(x, s, k + 1)).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn kernel_entries() {
        let g = make_grid(3.0, 32).unwrap();
        let sp = SpectralParam::new(0.7, Sign::Plus).unwrap();
        let k = free_resolvent_kernel(sp, &g);
        let d = C64::new(-1.0, 1.0) / (4.0 * 0.7f64.powi(3));
        for i in 0..g.n {
            assert!((k.k[(i, i)] - d).norm() < 1e-14);
        }
        assert!(k.is_symmetric(0.0));
        let km = free_resolvent_kernel(SpectralParam::new(0.7, Sign::Minus).unwrap(), &g);
        assert_eq!(km.k, k.k.map(|z| z.conj()));
        assert!(SpectralParam::new(0.0, Sign::Plus).is_err());
        let g0 = g0_kernel(&g);
        assert!(g0.is_symmetric(0.0));
        assert_eq!(g0.k[(0, 0)], C64::new(0.0, 0.0));
        assert!((cr(2.0f64.powi(3) / 12.0) - C64::new(2.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn jump_closed_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let l: f64 = rng.gen_range(0.01..5.0);
            let r: f64 = rng.gen_range(0.0..10.0);
            let a = resolvent_entry(SpectralParam::new(l, Sign::Plus).unwrap(), r)
                - resolvent_entry(SpectralParam::new(l, Sign::Minus).unwrap(), r);
            let b = resolvent_jump_entry(l, r);
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn alpha_beta_examples() {
        let v = f_alpha_beta(0.0, 0.3, 0.2, 0, 0).unwrap();
        assert!((v.direct - C64::new(-2.0, -2.0)).norm() < 1e-15);
        assert!((v.expansion - C64::new(-2.0, -2.0)).norm() < 1e-15);
        assert!(f_alpha_beta(1.0, 0.0, 0.0, 4, 0).is_err());
        let a = f_alpha_beta(0.8, 1.2, 0.5, 1, 2).unwrap();
        let b = f_alpha_beta(0.8, 1.2, -0.5, 1, 2).unwrap();
        assert!((a.expansion - b.expansion).norm() < 1e-15);
    }

    #[test]
    fn taylor_examples() {
        for order in 1..=2 {
            let t = taylor_split(1.3, 0.7, 0.0, order, FKind::Plus).unwrap();
            assert_eq!(t.remainder, C64::new(0.0, 0.0));
            assert!((t.reconstruct() - t.direct()).norm() < 1e-15);
        }
        let t = taylor_split(1.0, 0.0, 1.0, 2, FKind::Plus).unwrap();
        assert!((t.reconstruct() - f_pm(1.0, Sign::Plus)).norm() < 1e-10);
        assert!(taylor_split(1.0, 0.5, 0.5, 3, FKind::Minus).is_err());
        let t = taylor_split(1.0, 0.3, 0.9, 3, FKind::TildeMinus).unwrap();
        assert!((t.reconstruct() - t.direct()).norm() < 1e-10);
    }

    proptest! {
        #[test]
        fn alpha_beta_agree(l in 0.0..4.0f64, x in -4.0..4.0f64, y in -4.0..4.0f64, a in 0u32..4, b in 0u32..4) {
            let v = f_alpha_beta(l, x, y, a, b).unwrap();
            prop_assert!((v.direct - v.expansion).norm() <= 1e-12);
        }

        #[test]
        fn taylor_reconstructs(l in 0.0..2.0f64, x in 0.0..2.0f64, y in 0.0..2.0f64, order in 1u32..4) {
            for f in [FKind::Plus, FKind::Minus, FKind::TildePlus, FKind::TildeMinus] {
                if order == 3 && matches!(f, FKind::Plus | FKind::Minus) { continue; }
                let t = taylor_split(l, x, y, order, f).unwrap();
                prop_assert!((t.reconstruct() - t.direct()).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn propagator_basics() {
        let g = make_grid(20.0, 256).unwrap();
        let f = g.sample(|x| C64::from_polar((-x * x / 2.0).exp(), 0.5 * x));
        let p = FreePropagator::new(&g, Symbol::Continuum);
        let u0 = p.evolve(0.0, &f);
        assert_eq!(u0.u.values, f.values);
        let plain = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for t in [0.3, 2.0, 17.0] {
            let u = p.evolve(t, &f);
            assert!((plain(&u.u.values) - plain(&f.values)).abs() < 1e-10 * plain(&f.values));
        }
        let a = p.evolve(0.7, &p.evolve(1.1, &f).u).u;
        let b = p.evolve(1.8, &f).u;
        let d: f64 = a.values.iter().zip(&b.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-10);
        // stencil symbol close to xi^4 at low frequency
        let ps = FreePropagator::new(&g, Symbol::Stencil);
        let k = 3;
        let xi = 2.0 * std::f64::consts::PI * k as f64 / (g.n as f64 * g.h);
        assert!((ps.symbol()[k] / xi.powi(4) - 1.0).abs() < 1e-2);
    }
}
