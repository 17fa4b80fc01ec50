//! Example potentials: bumps, resonance-engineered and zero-eigenvalue-engineered
//! potentials, the embedded-eigenvalue potential, and sampled custom data.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::quad::linfit;

/// Interior profile used by the resonance builder on |x| < 1.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// Even polynomial of degree 18 glued to c|x| + d with matching derivatives
    /// through order 8 at |x| = 1, so V is C^4 across the gluing points;
    /// `center` is its value at 0.
    Polynomial { center: Option<f64> },
    /// phi = d on the interior; only valid with c = 0.
    Flat,
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Polynomial { center: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    /// amplitude * exp(1 - 1/(1 - (x/r)^2)); a seed adds a smooth positive modulation
    CompactBump {
        amplitude: f64,
        radius: f64,
        seed: Option<u64>,
    },
    ResonanceBuilt {
        c: f64,
        d: f64,
        #[serde(default)]
        profile: Profile,
    },
    ZeroEigenBuilt {
        s: f64,
    },
    /// 20 sech^2 x - 24 sech^4 x, with eigenfunction sech x at energy 1
    Embedded,
    /// Samples on an arbitrary increasing node set, linearly interpolated, zero outside.
    Custom {
        x: Vec<f64>,
        v: Vec<f64>,
    },
}

impl PotentialSpec {
    pub fn bump(amplitude: f64, radius: f64) -> Self {
        PotentialSpec::CompactBump { amplitude, radius, seed: None }
    }

    /// Radius of the support when it is compact.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            PotentialSpec::Zero => Some(0.0),
            PotentialSpec::CompactBump { radius, .. } => Some(*radius),
            PotentialSpec::ResonanceBuilt { .. } => Some(1.0),
            PotentialSpec::Custom { x, v } => {
                let r = x.iter().zip(v).filter(|(_, v)| **v != 0.0).map(|(x, _)| x.abs()).fold(0.0, f64::max);
                Some(r)
            }
            _ => None,
        }
    }

    /// Claimed decay exponent mu in |V| <~ `<x>^-mu`; infinity for compact support.
    pub fn decay_claim(&self) -> f64 {
        match self {
            PotentialSpec::ZeroEigenBuilt { .. } => 4.0,
            _ => f64::INFINITY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::Zero => "free",
            PotentialSpec::CompactBump { .. } => "bump",
            PotentialSpec::ResonanceBuilt { .. } => "resonance_built",
            PotentialSpec::ZeroEigenBuilt { .. } => "zero_eigen_built",
            PotentialSpec::Embedded => "embedded",
            PotentialSpec::Custom { .. } => "custom",
        }
    }

    /// Pointwise value; compact variants evaluate to 0 off their support.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.evaluator()?(x))
    }

    /// Validated pointwise evaluator with any setup (profile gluing) done once.
    pub fn evaluator(&self) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        let spec = self.clone();
        let profile = match self {
            PotentialSpec::ResonanceBuilt { c, d, profile } => Some(ResonanceProfile::new(*c, *d, profile)?),
            PotentialSpec::ZeroEigenBuilt { s } if *s <= 1.0 => {
                return config(format!("zero-eigen builder needs s > 1, got {s}"));
            }
            PotentialSpec::Custom { x, v } if x.len() != v.len() || x.len() < 2 => {
                return config("custom potential needs matching x and v arrays of length >= 2");
            }
            _ => None,
        };
        Ok(Box::new(move |x| spec.eval_inner(x, profile.as_ref())))
    }

    fn eval_inner(&self, x: f64, profile: Option<&ResonanceProfile>) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::CompactBump { amplitude, radius, seed } => {
                let t = x / radius;
                if t.abs() >= 1.0 {
                    0.0
                } else {
                    let mut m = 1.0;
                    if let Some(seed) = seed {
                        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                        for k in 1..=3 {
                            let c: f64 = rng.gen_range(-1.0..1.0) / 12.0;
                            m += c * (k as f64 * std::f64::consts::PI * t).cos();
                        }
                    }
                    amplitude * (1.0 - 1.0 / (1.0 - t * t)).exp() * m
                }
            }
            PotentialSpec::ResonanceBuilt { .. } => profile.expect("profile prepared").potential(x),
            PotentialSpec::ZeroEigenBuilt { s } => zero_eigen_potential(*s, x),
            PotentialSpec::Embedded => {
                let c = 1.0 / x.cosh();
                20.0 * c * c - 24.0 * c.powi(4)
            }
            PotentialSpec::Custom { x: xs, v } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    0.0
                } else {
                    let k = xs.partition_point(|p| *p <= x).clamp(1, xs.len() - 1);
                    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                    v[k - 1] * (1.0 - t) + v[k] * t
                }
            }
        }
    }
}

/// Sampled real potential with its provenance.
#[derive(Clone, Debug)]
pub struct SampledPotential {
    pub spec: PotentialSpec,
    pub grid: Grid,
    pub values: Vec<f64>,
    pub support_radius: Option<f64>,
}

impl SampledPotential {
    pub fn as_function(&self) -> SampledFunction {
        SampledFunction::from_real(&self.grid, &self.values).expect("potential samples are finite")
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= k);
        out.spec = PotentialSpec::Custom { x: self.grid.x().to_vec(), v: out.values.clone() };
        out
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs() * self.grid.h).sum()
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "V"])?;
        for (x, v) in self.grid.x().iter().zip(&self.values) {
            w.serialize((x, v))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl std::io::Read) -> Result<PotentialSpec> {
        let mut r = csv::Reader::from_reader(input);
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in r.deserialize() {
            let (x, v): (f64, f64) = rec?;
            xs.push(x);
            vs.push(v);
        }
        Ok(PotentialSpec::Custom { x: xs, v: vs })
    }
}

pub fn sample_potential(spec: &PotentialSpec, g: &Grid) -> Result<SampledPotential> {
    let support_radius = spec.support_radius();
    if let Some(r) = support_radius {
        if r >= g.half_width / 2.0 && !matches!(spec, PotentialSpec::Custom { .. }) {
            return config(format!("support radius {r} must stay below L/2 = {}", g.half_width / 2.0));
        }
        if r > g.half_width {
            return config("potential support exceeds the grid");
        }
    }
    let f = spec.evaluator()?;
    let values: Vec<f64> = g.x().iter().map(|&x| f(x)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("potential has non-finite samples".into()));
    }
    Ok(SampledPotential { spec: spec.clone(), grid: g.clone(), values, support_radius })
}

/// phi_1 for the resonance builder: c|x| + d outside [-1, 1], an even degree-18
/// polynomial inside, glued with matching derivatives through order 8.
#[derive(Clone, Debug)]
pub struct ResonanceProfile {
    pub c: f64,
    pub d: f64,
    /// coefficients of x^0, x^2, ..., x^18
    coef: [f64; NCOEF],
}

impl ResonanceProfile {
    pub fn new(c: f64, d: f64, profile: &Profile) -> Result<Self> {
        if c < 0.0 || d < 0.0 || (c == 0.0 && d == 0.0) {
            return config(format!("resonance builder needs c, d >= 0 not both zero, got ({c}, {d})"));
        }
        let coef = match profile {
            Profile::Flat => {
                if c != 0.0 {
                    return config("flat interior profile only glues to c = 0");
                }
                let mut c0 = [0.0; NCOEF];
                c0[0] = d;
                c0
            }
            Profile::Polynomial { center } => {
                let center = center.unwrap_or(d + 0.5 * c.max(d));
                // rows: value at 0, then P^(k)(1) for k = 0..8
                let mut a = DMatrix::<f64>::zeros(NCOEF, NCOEF);
                let mut b = DVector::<f64>::zeros(NCOEF);
                a[(0, 0)] = 1.0;
                b[0] = center;
                let mut target = [0.0; NCOEF - 1];
                target[0] = c + d;
                target[1] = c;
                for (k, t) in target.iter().enumerate() {
                    for j in 0..NCOEF {
                        let p = 2 * j;
                        a[(k + 1, j)] = falling(p, k);
                    }
                    b[k + 1] = *t;
                }
                let sol =
                    a.lu().solve(&b).ok_or_else(|| Error::Numerical("profile gluing system is singular".into()))?;
                let mut c0 = [0.0; NCOEF];
                c0.copy_from_slice(sol.as_slice());
                c0
            }
        };
        let out = ResonanceProfile { c, d, coef };
        // positivity on the interior
        for i in 0..=2000 {
            let x = i as f64 / 2000.0;
            if out.deriv(x, 0) <= 0.0 {
                return config(format!("interior profile is not positive at x = {x:.4}"));
            }
        }
        Ok(out)
    }

    /// k-th derivative of phi_1 at x.
    pub fn deriv(&self, x: f64, k: usize) -> f64 {
        let ax = x.abs();
        if ax >= 1.0 {
            return match k {
                0 => self.c * ax + self.d,
                1 => self.c * x.signum(),
                _ => 0.0,
            };
        }
        let mut s = 0.0;
        for (j, a) in self.coef.iter().enumerate() {
            let p = 2 * j;
            if p >= k {
                s += a * falling(p, k) * x.powi((p - k) as i32);
            }
        }
        s
    }

    /// V = -(phi_1'''') / phi_1.
    pub fn potential(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            -self.deriv(x, 4) / self.deriv(x, 0)
        }
    }
}

const NCOEF: usize = 10;

fn falling(p: usize, k: usize) -> f64 {
    if k > p {
        return 0.0;
    }
    ((p - k + 1)..=p).map(|v| v as f64).product()
}

pub fn resonance_builder(c: f64, d: f64, profile: Profile) -> Result<PotentialSpec> {
    ResonanceProfile::new(c, d, &profile)?;
    Ok(PotentialSpec::ResonanceBuilt { c, d, profile })
}

pub fn zero_eigen_builder(s: f64) -> Result<PotentialSpec> {
    if !(s > 1.0) {
        return config(format!("zero-eigen builder needs s > 1 so that phi is in L^2, got {s}"));
    }
    Ok(PotentialSpec::ZeroEigenBuilt { s })
}

/// phi = (1 + x^2)^(-s/2).
pub fn zero_eigen_phi(s: f64, x: f64) -> f64 {
    (1.0 + x * x).powf(-s / 2.0)
}

/// phi'''' / phi in closed form.
pub fn zero_eigen_ratio(s: f64, x: f64) -> f64 {
    let x2 = x * x;
    let num =
        s * (s + 1.0) * (s + 2.0) * (s + 3.0) * x2 * x2 - 6.0 * s * (s + 2.0) * (s + 3.0) * x2 + 3.0 * s * (s + 2.0);
    num / (1.0 + x2).powi(4)
}

pub fn zero_eigen_potential(s: f64, x: f64) -> f64 {
    -zero_eigen_ratio(s, x)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayClass {
    /// vanishes on the whole fit window
    Compact,
    /// log|V| bends away faster than any power over the window
    SuperPolynomial {
        exponent_first_half: f64,
        exponent_second_half: f64,
    },
    Power {
        exponent: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialReport {
    pub name: String,
    pub decay: DecayClass,
    pub repulsive: bool,
    pub compact: bool,
    pub max_abs: f64,
    pub even: bool,
}

/// Decay fit on |x| in [L/2, 0.9L], repulsivity xV' <= 0 by centered differences, support.
pub fn checks(p: &SampledPotential) -> PotentialReport {
    let g = &p.grid;
    let l = g.half_width;
    let max_abs = p.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut lx = Vec::new();
    let mut lv = Vec::new();
    let mut any_zero = false;
    for (x, v) in g.x().iter().zip(&p.values) {
        if *x >= 0.5 * l && *x <= 0.9 * l {
            if v.abs() <= 1e-300 {
                any_zero = true;
            } else {
                lx.push((1.0 + x * x).sqrt().ln());
                lv.push(v.abs().ln());
            }
        }
    }
    let decay = if lx.len() < 4 || (any_zero && lx.len() < 8) {
        DecayClass::Compact
    } else {
        let (s, _, _) = linfit(&lx, &lv);
        let m = lx.len() / 2;
        let (s1, _, _) = linfit(&lx[..m], &lv[..m]);
        let (s2, _, _) = linfit(&lx[m..], &lv[m..]);
        if any_zero || (s2 / s1 > 1.25 && -s2 > 8.0) {
            DecayClass::SuperPolynomial { exponent_first_half: -s1, exponent_second_half: -s2 }
        } else {
            DecayClass::Power { exponent: -s }
        }
    };
    let tol = 1e-10 * max_abs.max(1e-300);
    let x = g.x();
    let repulsive = (1..g.n - 1).all(|i| {
        let dv = (p.values[i + 1] - p.values[i - 1]) / (2.0 * g.h);
        x[i] * dv <= tol
    });
    let compact = p.support_radius.is_some();
    let even = (0..g.n / 2).all(|i| (p.values[i] - p.values[g.n - 1 - i]).abs() <= 1e-12 * max_abs.max(1e-300));
    PotentialReport { name: p.spec.name().into(), decay, repulsive, compact, max_abs, even }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn samples() {
        let g = make_grid(10.0, 512).unwrap();
        let z = sample_potential(&PotentialSpec::Zero, &g).unwrap();
        assert!(z.is_zero());
        let e = sample_potential(&PotentialSpec::Embedded, &g).unwrap();
        for (x, v) in g.x().iter().zip(&e.values) {
            let c = 1.0 / x.cosh();
            assert!((v - (20.0 * c * c - 24.0 * c.powi(4))).abs() < 1e-14);
        }
        let b =
            sample_potential(&PotentialSpec::CompactBump { amplitude: 1.0, radius: 2.0, seed: Some(3) }, &g).unwrap();
        for (x, v) in g.x().iter().zip(&b.values) {
            if x.abs() >= 2.0 {
                assert_eq!(*v, 0.0);
            } else {
                assert!(*v > 0.0);
            }
        }
        assert!(sample_potential(&PotentialSpec::bump(1.0, 6.0), &g).is_err());
    }

    #[test]
    fn flat_profile_gives_zero() {
        let g = make_grid(5.0, 256).unwrap();
        let spec = resonance_builder(0.0, 1.0, Profile::Flat).unwrap();
        assert!(sample_potential(&spec, &g).unwrap().is_zero());
        assert!(resonance_builder(1.0, 1.0, Profile::Flat).is_err());
        assert!(resonance_builder(0.0, 0.0, Profile::default()).is_err());
    }

    #[test]
    fn resonance_gluing_and_residual() {
        for (c, d) in [(1.0, 1.0), (0.0, 1.0), (2.0, 0.5)] {
            let p = ResonanceProfile::new(c, d, &Profile::default()).unwrap();
            // derivatives match the exterior at x = 1 through order 8
            let mut ext = [0.0; NCOEF - 1];
            ext[0] = c + d;
            ext[1] = c;
            for (k, e) in ext.iter().enumerate() {
                let (mut inner, mut scale) = (0.0, 1.0f64);
                for (j, a) in p.coef.iter().enumerate() {
                    inner += a * falling(2 * j, k);
                    scale = scale.max((a * falling(2 * j, k)).abs());
                }
                assert!((inner - e).abs() < 1e-9 * scale, "c={c} d={d} k={k}: {inner} vs {e}");
            }
            // phi'''' + V phi = 0 pointwise
            for i in 0..400 {
                let x = -1.5 + 3.0 * i as f64 / 399.0;
                let r = p.deriv(x, 4) + p.potential(x) * p.deriv(x, 0);
                assert!(r.abs() <= 1e-6 * p.deriv(x, 0).abs());
            }
        }
    }

    #[test]
    fn zero_eigen_closed_form() {
        assert!(zero_eigen_builder(1.0).is_err());
        // compare against high-order differences of phi
        let s = 2.0;
        let h = 1e-2;
        for x in [0.0, 0.4, 1.3, 3.0] {
            let f = |t: f64| zero_eigen_phi(s, t);
            let d4 = (-f(x - 3.0 * h) + 12.0 * f(x - 2.0 * h) - 39.0 * f(x - h) + 56.0 * f(x) - 39.0 * f(x + h)
                + 12.0 * f(x + 2.0 * h)
                - f(x + 3.0 * h))
                / (6.0 * h.powi(4));
            assert!((d4 - zero_eigen_ratio(s, x) * f(x)).abs() < 1e-3);
        }
    }

    #[test]
    fn embedded_identity() {
        // (d^4 + V) sech = sech with closed-form derivatives
        for i in 0..200 {
            let x = -8.0 + 16.0 * i as f64 / 199.0;
            let (c, t) = (1.0 / x.cosh(), x.tanh());
            // sech'''' = sech (1 - 20 sech^2 + 24 sech^4) for sech; expressed via t
            let d4 = c * (t.powi(4) - 18.0 * t * t * c * c + 5.0 * c.powi(4));
            let v = PotentialSpec::Embedded.eval(x).unwrap();
            assert!((d4 + v * c - c).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn check_reports() {
        let g = make_grid(40.0, 1024).unwrap();
        let z = checks(&sample_potential(&PotentialSpec::Zero, &g).unwrap());
        assert!(z.repulsive && z.decay == DecayClass::Compact);
        let g15 = make_grid(15.0, 1024).unwrap();
        let e = checks(&sample_potential(&PotentialSpec::Embedded, &g15).unwrap());
        assert!(!e.repulsive);
        assert!(matches!(e.decay, DecayClass::SuperPolynomial { .. }), "{:?}", e.decay);
        let zb = checks(&sample_potential(&PotentialSpec::ZeroEigenBuilt { s: 2.0 }, &g).unwrap());
        match zb.decay {
            DecayClass::Power { exponent } => assert!((exponent - 4.0).abs() < 0.3, "{exponent}"),
            other => panic!("{other:?}"),
        }
        assert!(zb.even);
    }
}
