//! Truncated-line grids, sampled functions, and the norms used throughout:
//! weighted L^p, weak L^1, BMO, the A_p characteristic, and H^1 atoms.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Uniform symmetric grid on [-L, L]. Cheap to clone.
#[derive(Clone, Debug)]
pub struct Grid {
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
    x: Arc<[f64]>,
    tw: Arc<[f64]>,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !n.is_multiple_of(2) || n < 16 {
            return config(format!("grid needs an even point count >= 16, got {n}"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return config(format!("grid half-width must be positive, got {half_width}"));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        // Build from both ends so x_i = -x_{n-1-i} holds bit for bit.
        let mut x = vec![0.0; n];
        for i in 0..n / 2 {
            let xi = -half_width + i as f64 * h;
            x[i] = xi;
            x[n - 1 - i] = -xi;
        }
        let mut tw = vec![h; n];
        tw[0] = 0.5 * h;
        tw[n - 1] = 0.5 * h;
        Ok(Grid { half_width, n, h, x: x.into(), tw: tw.into() })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> &[f64] {
        &self.tw
    }

    pub fn sample(&self, f: impl Fn(f64) -> C64) -> SampledFunction {
        SampledFunction { grid: self.clone(), values: self.x.iter().map(|&x| f(x)).collect() }
    }

    pub fn sample_real(&self, f: impl Fn(f64) -> f64) -> SampledFunction {
        self.sample(|x| C64::new(f(x), 0.0))
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }
}

pub fn make_grid(half_width: f64, n: usize) -> Result<Grid> {
    Grid::new(half_width, n)
}

#[derive(Clone, Debug)]
pub struct SampledFunction {
    pub grid: Grid,
    pub values: Vec<C64>,
}

impl SampledFunction {
    pub fn new(grid: &Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n {
            return config(format!("expected {} samples, got {}", grid.n, values.len()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("sampled function has non-finite entries".into()));
        }
        Ok(SampledFunction { grid: grid.clone(), values })
    }

    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: &Grid) -> Self {
        SampledFunction { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.n] }
    }

    pub fn scale(&self, c: C64) -> Self {
        SampledFunction { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Trapezoid inner product <self, g> = sum conj(self) g w.
    pub fn inner(&self, g: &SampledFunction) -> C64 {
        self.values.iter().zip(&g.values).zip(self.grid.weights()).map(|((a, b), w)| a.conj() * b * w).sum()
    }

    pub fn l2(&self) -> f64 {
        lp_norm(self, 2.0, &WeightSpec::Unit)
    }

    /// Fraction of L^2 mass sitting within `frac * L` of either end of the box.
    pub fn boundary_mass(&self, frac: f64) -> f64 {
        let l = self.grid.half_width;
        let mut edge = 0.0;
        let mut tot = 0.0;
        for ((x, v), w) in self.grid.x().iter().zip(&self.values).zip(self.grid.weights()) {
            let m = v.norm_sqr() * w;
            tot += m;
            if x.abs() > (1.0 - frac) * l {
                edge += m;
            }
        }
        if tot == 0.0 {
            0.0
        } else {
            edge / tot
        }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re", "im"])?;
        for (x, v) in self.grid.x().iter().zip(&self.values) {
            w.serialize((x, v.re, v.im))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "half_width": self.grid.half_width,
            "n": self.grid.n,
            "re": self.values.iter().map(|v| v.re).collect::<Vec<_>>(),
            "im": self.values.iter().map(|v| v.im).collect::<Vec<_>>(),
        })
    }
}

/// reflect(f)(x) = f(-x). On a symmetric grid this is index reversal.
pub fn reflect(f: &SampledFunction) -> SampledFunction {
    let mut values = f.values.clone();
    values.reverse();
    SampledFunction { grid: f.grid.clone(), values }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Unit,
    /// |x|^a; a node exactly at 0 with a < 0 is evaluated at h/2.
    Power {
        a: f64,
    },
    /// `<x>^a` = (1 + x^2)^(a/2)
    Japanese {
        a: f64,
    },
    Custom {
        samples: Vec<f64>,
    },
}

impl WeightSpec {
    pub fn samples(&self, g: &Grid) -> Result<Vec<f64>> {
        let w: Vec<f64> = match self {
            WeightSpec::Unit => vec![1.0; g.n],
            WeightSpec::Power { a } => g
                .x()
                .iter()
                .map(|&x| {
                    let r = if x == 0.0 && *a < 0.0 { 0.5 * g.h } else { x.abs() };
                    r.powf(*a)
                })
                .collect(),
            WeightSpec::Japanese { a } => g.x().iter().map(|x| (1.0 + x * x).powf(a / 2.0)).collect(),
            WeightSpec::Custom { samples } => {
                if samples.len() != g.n {
                    return config("custom weight length does not match grid");
                }
                samples.clone()
            }
        };
        // |x|^a with a > 0 is allowed to vanish at a node on 0 only; the grids here
        // never carry one (n is even).
        if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return config("weight must be strictly positive and finite on the grid");
        }
        Ok(w)
    }

    pub fn is_even(&self, g: &Grid) -> bool {
        match self.samples(g) {
            Ok(w) => (0..g.n / 2).all(|i| {
                let (a, b) = (w[i], w[g.n - 1 - i]);
                (a - b).abs() <= 1e-14 * a.abs().max(b.abs())
            }),
            Err(_) => false,
        }
    }
}

/// Weighted L^p norm with trapezoid quadrature; p = infinity ignores the weight.
pub fn lp_norm(f: &SampledFunction, p: f64, w: &WeightSpec) -> f64 {
    assert!(p >= 1.0, "p must lie in [1, inf]");
    if p.is_infinite() {
        return f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let ws = w.samples(&f.grid).expect("weight must be valid on the grid");
    let q = f.grid.weights();
    let s: f64 = f.values.iter().zip(&ws).zip(q).map(|((v, w), q)| v.norm().powf(p) * w * q).sum();
    s.powf(1.0 / p)
}

/// sup over levels of lambda * w({|f| > lambda}). The level-set measure is taken on the
/// piecewise-linear interpolant of |f| (segment weight = smaller endpoint weight, which
/// keeps the estimate below the trapezoid L^1 norm); levels approach each |f_i| from below.
pub fn weak_l1(f: &SampledFunction, w: &WeightSpec) -> f64 {
    let ws = w.samples(&f.grid).expect("weight must be valid on the grid");
    let a = f.abs();
    let h = f.grid.h;
    let mut levels: Vec<f64> = a.iter().cloned().filter(|v| *v > 0.0).collect();
    levels.sort_by(|x, y| y.total_cmp(x));
    levels.dedup();
    levels
        .par_iter()
        .map(|&lev| {
            let mut m = 0.0;
            for i in 0..a.len() - 1 {
                let (p, q) = (a[i], a[i + 1]);
                let frac = if p >= lev && q >= lev {
                    1.0
                } else if p >= lev {
                    (p - lev) / (p - q)
                } else if q >= lev {
                    (q - lev) / (q - p)
                } else {
                    0.0
                };
                m += frac * h * ws[i].min(ws[i + 1]);
            }
            lev * m
        })
        .reduce(|| 0.0, f64::max)
}

/// Node-index intervals [start, start + len) swept by BMO and A_p estimates:
/// dyadic lengths 2, 4, ... up to n at every offset.
fn dyadic_lengths(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut m = 2;
    while m <= n {
        out.push(m);
        m *= 2;
    }
    if *out.last().unwrap() != n {
        out.push(n);
    }
    out
}

/// Swept estimate of sup_I |I|^-1 int_I |f - f_I|. A lower bound for the true norm.
pub fn bmo_norm(f: &SampledFunction) -> f64 {
    let v = &f.values;
    let n = v.len();
    dyadic_lengths(n)
        .into_par_iter()
        .map(|m| {
            let mut best: f64 = 0.0;
            let mut run: C64 = v[..m].iter().sum();
            for s in 0..=n - m {
                if s > 0 {
                    run += v[s + m - 1] - v[s - 1];
                }
                let mean = run / m as f64;
                let osc = v[s..s + m].iter().map(|z| (z - mean).norm()).sum::<f64>() / m as f64;
                best = best.max(osc);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct ApReport {
    pub value: f64,
    /// sup of the A_p product over intervals of each swept length
    pub per_scale: Vec<(usize, f64)>,
    /// log-log growth of the per-scale sup against interval length
    pub growth_slope: f64,
    pub divergent: bool,
}

/// Swept A_p characteristic of a weight on a grid.
pub fn ap_characteristic(w: &WeightSpec, p: f64, g: &Grid) -> Result<ApReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return config(format!("A_p needs p in [1, inf), got {p}"));
    }
    let ws = w.samples(g)?;
    let n = ws.len();
    // prefix sums of w and of the dual weight
    let dual: Vec<f64> = if p > 1.0 {
        ws.iter().map(|w| w.powf(-1.0 / (p - 1.0))).collect()
    } else {
        ws.iter().map(|w| 1.0 / w).collect()
    };
    let mut pw = vec![0.0; n + 1];
    let mut pd = vec![0.0; n + 1];
    for i in 0..n {
        pw[i + 1] = pw[i] + ws[i];
        pd[i + 1] = pd[i] + dual[i];
    }
    let per_scale: Vec<(usize, f64)> = dyadic_lengths(n)
        .into_par_iter()
        .map(|m| {
            let mut best: f64 = 0.0;
            for s in 0..=n - m {
                let aw = (pw[s + m] - pw[s]) / m as f64;
                let val = if p > 1.0 {
                    let ad = (pd[s + m] - pd[s]) / m as f64;
                    aw * ad.powf(p - 1.0)
                } else {
                    aw * dual[s..s + m].iter().cloned().fold(0.0, f64::max)
                };
                best = best.max(val);
            }
            (m, best)
        })
        .collect();
    let value = per_scale.iter().map(|s| s.1).fold(1.0, f64::max);
    let xs: Vec<f64> = per_scale.iter().map(|s| s.0 as f64).collect();
    let ys: Vec<f64> = per_scale.iter().map(|s| s.1).collect();
    let (growth_slope, _) = crate::quad::loglog_slope(&xs, &ys);
    Ok(ApReport { value, per_scale, growth_slope, divergent: growth_slope > 0.25 })
}

#[derive(Clone, Debug)]
pub struct Atom {
    pub center: f64,
    pub radius: f64,
    pub values: Vec<f64>,
}

impl Atom {
    pub fn to_function(&self, g: &Grid) -> SampledFunction {
        SampledFunction::from_real(g, &self.values).expect("atom matches grid")
    }

    /// Check support, size and zero mean against the atom contract.
    pub fn is_valid(&self, g: &Grid) -> bool {
        let l1: f64 = self.values.iter().map(|a| a.abs() * g.h).sum();
        let mean: f64 = self.values.iter().map(|a| a * g.h).sum();
        let sup_ok = self.values.iter().all(|a| a.abs() <= 1.0 / (2.0 * self.radius) + 1e-15);
        let supp_ok = g.x().iter().zip(&self.values).all(|(x, a)| *a == 0.0 || (x - self.center).abs() < self.radius);
        sup_ok && supp_ok && mean.abs() <= 1e-10 * l1.max(1e-300)
    }
}

/// Random piecewise-constant H^1 atom on (x0 - r, x0 + r), sup <= 1/(2r), zero mean.
pub fn make_atom(g: &Grid, x0: f64, r: f64, seed: u64) -> Result<Atom> {
    if r < 2.0 {
        return config(format!("atom radius must be >= 2, got {r}"));
    }
    if x0 - r < -g.half_width || x0 + r > g.half_width {
        return config("atom support exceeds the grid");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = rng.gen_range(2..=8usize);
    let heights: Vec<f64> = (0..pieces).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut vals = vec![0.0; g.n];
    let mut inside = Vec::new();
    for (i, &x) in g.x().iter().enumerate() {
        let t = (x - x0) / r;
        if t.abs() < 1.0 {
            let k = (((t + 1.0) / 2.0 * pieces as f64) as usize).min(pieces - 1);
            vals[i] = heights[k];
            inside.push(i);
        }
    }
    if inside.len() < 2 {
        return config("atom support contains fewer than two nodes");
    }
    let mean = inside.iter().map(|&i| vals[i]).sum::<f64>() / inside.len() as f64;
    for &i in &inside {
        vals[i] -= mean;
    }
    let sup = inside.iter().map(|&i| vals[i].abs()).fold(0.0, f64::max);
    if sup == 0.0 {
        // all pieces equal: fall back to a Haar profile
        for &i in &inside {
            vals[i] = if g.x()[i] < x0 { 1.0 } else { -1.0 };
        }
        let m = inside.iter().map(|&i| vals[i]).sum::<f64>() / inside.len() as f64;
        for &i in &inside {
            vals[i] -= m;
        }
    }
    let sup = inside.iter().map(|&i| vals[i].abs()).fold(0.0, f64::max);
    let s = 1.0 / (2.0 * r) / sup;
    for &i in &inside {
        vals[i] *= s;
    }
    // one more pass of mean removal to push the residual into rounding
    let mean = inside.iter().map(|&i| vals[i]).sum::<f64>() / inside.len() as f64;
    for &i in &inside {
        vals[i] -= mean;
    }
    let sup = inside.iter().map(|&i| vals[i].abs()).fold(0.0, f64::max);
    if sup > 1.0 / (2.0 * r) {
        let s = 1.0 / (2.0 * r) / sup;
        for &i in &inside {
            vals[i] *= s;
        }
    }
    Ok(Atom { center: x0, radius: r, values: vals })
}

/// The Haar atom: +1/(2r) left of x0, -1/(2r) right of it.
pub fn haar_atom(g: &Grid, x0: f64, r: f64) -> Result<Atom> {
    if r < 2.0 {
        return config(format!("atom radius must be >= 2, got {r}"));
    }
    let vals = g
        .x()
        .iter()
        .map(|&x| {
            let t = x - x0;
            if t.abs() >= r {
                0.0
            } else if t < 0.0 {
                1.0 / (2.0 * r)
            } else {
                -1.0 / (2.0 * r)
            }
        })
        .collect();
    Ok(Atom { center: x0, radius: r, values: vals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_examples() {
        let g = make_grid(1.0, 16).unwrap();
        assert_eq!(g.x()[0], -1.0);
        assert_eq!(g.x()[15], 1.0);
        assert!((g.h - 2.0 / 15.0).abs() < 1e-15);
        let g = make_grid(20.0, 2048).unwrap();
        assert!((g.h - 0.019540791).abs() < 1e-8);
        assert!(make_grid(1.0, 3).is_err());
        assert!(make_grid(1.0, 17).is_err());
        assert!(make_grid(-1.0, 16).is_err());
        for i in 0..g.n {
            assert_eq!(g.x()[i], -g.x()[g.n - 1 - i]);
        }
    }

    #[test]
    fn lp_examples() {
        let g = make_grid(1.0, 2048).unwrap();
        let one = g.sample_real(|_| 1.0);
        assert!((lp_norm(&one, 2.0, &WeightSpec::Unit) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(lp_norm(&one, f64::INFINITY, &WeightSpec::Unit), 1.0);
        let ax = g.sample_real(|x| x.abs());
        assert!((lp_norm(&ax, 1.0, &WeightSpec::Unit) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn weak_l1_examples() {
        let g = make_grid(1.0, 64).unwrap();
        let one = g.sample_real(|_| 1.0);
        assert!((weak_l1(&one, &WeightSpec::Unit) - 2.0).abs() < 1e-12);
        assert_eq!(weak_l1(&SampledFunction::zeros(&g), &WeightSpec::Unit), 0.0);
        let g = make_grid(10.0, 2000).unwrap();
        let inv = g.sample_real(|x| 1.0 / x.abs());
        let v = weak_l1(&inv, &WeightSpec::Unit);
        assert!((v - 2.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn bmo_examples() {
        let g = make_grid(1.0, 256).unwrap();
        assert_eq!(bmo_norm(&g.sample_real(|_| 3.0)), 0.0);
        let s = bmo_norm(&g.sample_real(|x| x.signum()));
        assert!((s - 1.0).abs() < 0.05, "{s}");
        let lg = |n| {
            let g = make_grid(1.0, n).unwrap();
            bmo_norm(&g.sample_real(|x| x.abs().max(0.25 * g.h).ln()))
        };
        let (a, b) = (lg(512), lg(1024));
        assert!(a.is_finite() && ((a - b) / a).abs() < 0.1, "{a} {b}");
    }

    #[test]
    fn ap_examples() {
        let g = make_grid(1.0, 512).unwrap();
        let r = ap_characteristic(&WeightSpec::Unit, 2.0, &g).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(!r.divergent);
        let half = |n| {
            let g = make_grid(1.0, n).unwrap();
            ap_characteristic(&WeightSpec::Power { a: 0.5 }, 2.0, &g).unwrap()
        };
        let (a, b) = (half(512), half(1024));
        assert!(!a.divergent && ((a.value - b.value) / a.value).abs() < 0.05);
        let r = ap_characteristic(&WeightSpec::Power { a: -2.0 }, 2.0, &g).unwrap();
        assert!(r.divergent, "{r:?}");
        let r = ap_characteristic(&WeightSpec::Unit, 1.0, &g).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn atoms() {
        let g = make_grid(10.0, 1000).unwrap();
        let h = haar_atom(&g, 0.0, 2.0).unwrap();
        assert!(h.is_valid(&g));
        for seed in 0..50 {
            let a = make_atom(&g, -1.0, 2.0 + seed as f64 * 0.1, seed).unwrap();
            assert!(a.is_valid(&g));
            let s: f64 = a.values.iter().map(|v| v * g.h).sum();
            assert!(s.abs() <= 1e-10);
        }
        assert!(make_atom(&g, 0.0, 1.0, 0).is_err());
        assert!(make_atom(&g, 9.0, 2.0, 0).is_err());
    }

    #[test]
    fn reflect_examples() {
        let g = make_grid(2.0, 32).unwrap();
        let e = g.sample_real(|x| x * x);
        assert_eq!(reflect(&e).values, e.values);
        let o = g.sample_real(|x| x.powi(3));
        let r = reflect(&o);
        for (a, b) in r.values.iter().zip(&o.values) {
            assert_eq!(*a, -b);
        }
    }

    fn arb_fn() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 64)
    }

    proptest! {
        #[test]
        fn lp_homogeneous(vals in arb_fn(), cr in -3.0..3.0f64, ci in -3.0..3.0f64, p in 1.0..6.0f64) {
            let g = make_grid(3.0, 64).unwrap();
            let f = SampledFunction::new(&g, vals.iter().map(|(a, b)| C64::new(*a, *b)).collect()).unwrap();
            let k = C64::new(cr, ci);
            let w = WeightSpec::Japanese { a: 1.0 };
            let lhs = lp_norm(&f.scale(k), p, &w);
            let rhs = k.norm() * lp_norm(&f, p, &w);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn reflect_involution_and_even_isometry(vals in arb_fn(), p in 1.0..6.0f64) {
            let g = make_grid(3.0, 64).unwrap();
            let f = SampledFunction::new(&g, vals.iter().map(|(a, b)| C64::new(*a, *b)).collect()).unwrap();
            prop_assert_eq!(reflect(&reflect(&f)).values, f.values.clone());
            for w in [WeightSpec::Unit, WeightSpec::Power { a: 0.5 }, WeightSpec::Japanese { a: -1.0 }] {
                prop_assert!(w.is_even(&g));
                let a = lp_norm(&f, p, &w);
                let b = lp_norm(&reflect(&f), p, &w);
                prop_assert!((a - b).abs() <= 1e-12 * a);
            }
        }

        #[test]
        fn bmo_shift_invariant(vals in prop::collection::vec(-4.0..4.0f64, 64), k in -10.0..10.0f64) {
            let g = make_grid(3.0, 64).unwrap();
            let f = SampledFunction::from_real(&g, &vals).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|v| v + k).collect();
            let fs = SampledFunction::from_real(&g, &shifted).unwrap();
            let (a, b) = (bmo_norm(&f), bmo_norm(&fs));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn weak_below_strong(vals in prop::collection::vec(-4.0..4.0f64, 64), a in -0.9..2.0f64) {
            let g = make_grid(3.0, 64).unwrap();
            let f = SampledFunction::from_real(&g, &vals).unwrap();
            let w = WeightSpec::Power { a };
            prop_assert!(weak_l1(&f, &w) <= lp_norm(&f, 1.0, &w) * (1.0 + 1e-12));
        }

        #[test]
        fn ap_at_least_one(a in -0.9..0.9f64, p in 1.1..4.0f64) {
            let g = make_grid(2.0, 64).unwrap();
            let r = ap_characteristic(&WeightSpec::Power { a }, p, &g).unwrap();
            prop_assert!(r.value >= 1.0);
        }
    }
}
