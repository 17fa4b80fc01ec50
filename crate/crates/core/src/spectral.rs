//! Discretized Hamiltonian d^4 + V, dense and banded eigensolvers, bound and
//! embedded state detection, and zero-energy classification.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::grid::Grid;
use crate::potentials::SampledPotential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// u and u' vanish beyond the box: rows are the stencil truncated at the ends
    DirichletClamped,
    Periodic,
}

/// Five-point stencil [1, -4, 6, -4, 1] / h^4 plus diag(V).
#[derive(Clone, Debug)]
pub struct DiscreteHamiltonian {
    pub grid: Grid,
    pub v: Vec<f64>,
    pub bc: Boundary,
}

pub fn build_hamiltonian(v: &SampledPotential, bc: Boundary) -> Result<DiscreteHamiltonian> {
    let g = &v.grid;
    let vmax = v.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if vmax * g.h.powi(4) >= 6.0 {
        return config(format!("grid too coarse for the potential: max|V| h^4 = {:.3} >= 6", vmax * g.h.powi(4)));
    }
    Ok(DiscreteHamiltonian { grid: g.clone(), v: v.values.clone(), bc })
}

const STENCIL: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];

impl DiscreteHamiltonian {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// Upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        16.0 / self.grid.h.powi(4) + self.v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        let n = self.n();
        let h4 = self.grid.h.powi(4);
        (0..n)
            .map(|i| {
                let mut s = u[i] * self.v[i];
                for (o, c) in STENCIL.iter().enumerate() {
                    let j = i as isize + o as isize - 2;
                    let j = match self.bc {
                        Boundary::DirichletClamped => {
                            if j < 0 || j >= n as isize {
                                continue;
                            }
                            j as usize
                        }
                        Boundary::Periodic => j.rem_euclid(n as isize) as usize,
                    };
                    s += u[j] * (c / h4);
                }
                s
            })
            .collect()
    }

    pub fn apply_real(&self, u: &[f64]) -> Vec<f64> {
        let c: Vec<C64> = u.iter().map(|x| C64::new(*x, 0.0)).collect();
        self.apply(&c).into_iter().map(|z| z.re).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let h4 = self.grid.h.powi(4);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += self.v[i];
            for (o, c) in STENCIL.iter().enumerate() {
                let j = i as isize + o as isize - 2;
                let j = match self.bc {
                    Boundary::DirichletClamped => {
                        if j < 0 || j >= n as isize {
                            continue;
                        }
                        j as usize
                    }
                    Boundary::Periodic => j.rem_euclid(n as isize) as usize,
                };
                m[(i, j)] += c / h4;
            }
        }
        m
    }

    /// Bands (diag, first, second) of the clamped matrix.
    fn bands(&self) -> Result<[Vec<f64>; 3]> {
        if self.bc != Boundary::DirichletClamped {
            return config("banded solvers need the clamped boundary condition");
        }
        let n = self.n();
        let h4 = self.grid.h.powi(4);
        let d0 = (0..n).map(|i| 6.0 / h4 + self.v[i]).collect();
        let d1 = vec![-4.0 / h4; n - 1];
        let d2 = vec![1.0 / h4; n - 2];
        Ok([d0, d1, d2])
    }
}

/// Tuning for bound-state detection.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// eps_bound = max(rel_bound * max(||V||_inf, 1), 1e3 * eps_mach * ||H||); the stencil part of
    /// ||H|| grows like h^-4 and would swamp eigenvalues of order one on fine grids
    pub rel_bound: f64,
    pub localization: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { rel_bound: 1e-6, localization: 0.99 }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    pub grid: Grid,
    pub eigenvalues: Vec<f64>,
    /// columns are orthonormal in the Euclidean inner product
    pub eigenvectors: DMatrix<f64>,
    pub localization: Vec<f64>,
    pub bound_state_indices: Vec<usize>,
    pub embedded_candidates: Vec<usize>,
    pub eps_bound: f64,
}

/// Mass fraction of a vector inside |x| <= L/2.
pub fn localization(g: &Grid, v: &[f64]) -> f64 {
    let l = g.half_width;
    let (mut inner, mut tot) = (0.0, 0.0);
    for (x, a) in g.x().iter().zip(v) {
        tot += a * a;
        if x.abs() <= 0.5 * l {
            inner += a * a;
        }
    }
    inner / tot
}

pub fn eigendecompose(h: &DiscreteHamiltonian, opts: SpectralOptions) -> Result<SpectralData> {
    let m = h.to_dense();
    let eig = SymmetricEigen::try_new(m, 1e-15, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let n = h.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(k));
    }
    let vmax = h.v.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let eps_bound = (opts.rel_bound * vmax).max(1e3 * f64::EPSILON * h.norm_bound());
    let localization: Vec<f64> = (0..n).map(|k| localization(&h.grid, vecs.column(k).as_slice())).collect();
    let bound_state_indices =
        (0..n).filter(|&k| eigenvalues[k] < -eps_bound && localization[k] >= opts.localization).collect();
    let embedded_candidates =
        (0..n).filter(|&k| eigenvalues[k] > eps_bound && localization[k] >= opts.localization).collect();
    Ok(SpectralData {
        grid: h.grid.clone(),
        eigenvalues,
        eigenvectors: vecs,
        localization,
        bound_state_indices,
        embedded_candidates,
        eps_bound,
    })
}

impl SpectralData {
    /// Indices treated as point spectrum (bound states and embedded candidates).
    pub fn point_indices(&self) -> Vec<usize> {
        let mut v = self.bound_state_indices.clone();
        v.extend(&self.embedded_candidates);
        v
    }

    pub fn ac_indices(&self) -> Vec<usize> {
        let p = self.point_indices();
        (0..self.eigenvalues.len()).filter(|k| !p.contains(k)).collect()
    }

    /// Largest ||H v - lambda v|| over all pairs.
    pub fn max_residual(&self, h: &DiscreteHamiltonian) -> f64 {
        (0..self.eigenvalues.len())
            .map(|k| {
                let v = self.eigenvectors.column(k);
                let hv = h.apply_real(v.as_slice());
                hv.iter().zip(v.iter()).map(|(a, b)| (a - self.eigenvalues[k] * b).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "eigenvalue", "localization"])?;
        for (k, (e, l)) in self.eigenvalues.iter().zip(&self.localization).enumerate() {
            w.serialize((k, e, l))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Projector onto the complement of bound states and embedded candidates, as a
/// matrix acting on samples (Euclidean inner product).
pub fn ac_projector(sd: &SpectralData) -> DMatrix<f64> {
    let n = sd.eigenvalues.len();
    let mut p = DMatrix::identity(n, n);
    for k in sd.point_indices() {
        let v = sd.eigenvectors.column(k);
        p -= v * v.transpose();
    }
    p
}

// ---------------------------------------------------------------------------
// Banded spectral slicing for large clamped grids.

/// Number of eigenvalues of the pentadiagonal matrix strictly below sigma (Sylvester inertia of LDL^T).
fn count_below(b: &[Vec<f64>; 3], sigma: f64) -> usize {
    let n = b[0].len();
    let scale = b[0].iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let tiny = 1e-300_f64.max(f64::EPSILON * scale * 1e-6);
    let mut d = vec![0.0; n];
    // l1[i] = L[i][i-1], l2[i] = L[i][i-2]
    let mut l1 = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    let mut neg = 0;
    for i in 0..n {
        // L[i][i-2]
        if i >= 2 {
            l2[i] = b[2][i - 2] / d[i - 2];
        }
        if i >= 1 {
            let mut a = b[1][i - 1];
            if i >= 2 {
                a -= l2[i] * l1[i - 1] * d[i - 2];
            }
            l1[i] = a / d[i - 1];
        }
        let mut di = b[0][i] - sigma;
        if i >= 1 {
            di -= l1[i] * l1[i] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i] * l2[i] * d[i - 2];
        }
        if di.abs() < tiny {
            di = -tiny;
        }
        if di < 0.0 {
            neg += 1;
        }
        d[i] = di;
    }
    neg
}

/// Banded LU with partial pivoting for inverse iteration (kl = ku = 2).
struct BandLu {
    n: usize,
    start: Vec<usize>,
    rows: Vec<[f64; 8]>,
    piv: Vec<usize>,
    mult: Vec<[f64; 2]>,
}

impl BandLu {
    fn new(b: &[Vec<f64>; 3], sigma: f64) -> Self {
        let n = b[0].len();
        let mut start = vec![0usize; n];
        let mut rows = vec![[0.0; 8]; n];
        for i in 0..n {
            let s = i.saturating_sub(2);
            start[i] = s;
            for j in s..(i + 3).min(n) {
                let v = match i.abs_diff(j) {
                    0 => b[0][i] - sigma,
                    1 => b[1][i.min(j)],
                    _ => b[2][i.min(j)],
                };
                rows[i][j - s] = v;
            }
        }
        let mut lu = BandLu { n, start, rows, piv: vec![0; n], mult: vec![[0.0; 2]; n] };
        lu.factor();
        lu
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        let s = self.start[r];
        if c < s || c >= s + 8 {
            0.0
        } else {
            self.rows[r][c - s]
        }
    }

    fn factor(&mut self) {
        let n = self.n;
        let scale = self.rows.iter().flat_map(|r| r.iter()).fold(0.0f64, |a, b| a.max(b.abs()));
        let floor = f64::EPSILON * scale * 1e-3;
        for k in 0..n {
            let last = (k + 2).min(n - 1);
            // every row in the active block has zeros left of column k
            for r in k..=last {
                self.reanchor(r, k);
            }
            let mut p = k;
            for r in k..=last {
                if self.rows[r][0].abs() > self.rows[p][0].abs() {
                    p = r;
                }
            }
            self.piv[k] = p;
            self.rows.swap(k, p);
            if self.rows[k][0].abs() < floor {
                self.rows[k][0] = floor;
            }
            let pivot = self.rows[k][0];
            for (m, r) in (k + 1..=last).enumerate() {
                let f = self.rows[r][0] / pivot;
                self.mult[k][m] = f;
                if f != 0.0 {
                    for c in 1..8 {
                        self.rows[r][c] -= f * self.rows[k][c];
                    }
                }
                self.rows[r][0] = 0.0;
            }
        }
    }

    fn reanchor(&mut self, r: usize, anchor: usize) {
        let s = self.start[r];
        if s == anchor {
            return;
        }
        let mut new = [0.0; 8];
        for c in anchor..anchor + 8 {
            if c >= s && c < s + 8 {
                new[c - anchor] = self.rows[r][c - s];
            }
        }
        self.rows[r] = new;
        self.start[r] = anchor;
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            rhs.swap(k, self.piv[k]);
            let last = (k + 2).min(n - 1);
            for (m, r) in (k + 1..=last).enumerate() {
                rhs[r] -= self.mult[k][m] * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = rhs[k];
            for c in k + 1..(k + 5).min(n) {
                s -= self.get(k, c) * rhs[c];
            }
            rhs[k] = s / self.get(k, k);
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub localization: f64,
    pub residual: f64,
}

/// All eigenpairs of the clamped Hamiltonian with eigenvalue in [lo, hi], by
/// inertia bisection and shifted inverse iteration. Cost is linear in n per pair.
pub fn eigen_slice(h: &DiscreteHamiltonian, lo: f64, hi: f64, max_pairs: usize) -> Result<Vec<EigenPair>> {
    let b = h.bands()?;
    let (clo, chi) = (count_below(&b, lo), count_below(&b, hi));
    if chi - clo > max_pairs {
        return config(format!("slice [{lo}, {hi}] holds {} eigenvalues, above the cap {max_pairs}", chi - clo));
    }
    let tol = 4.0 * f64::EPSILON * h.norm_bound();
    let mut out = Vec::new();
    for k in clo..chi {
        // bisection for the k-th eigenvalue (0-based count)
        let (mut a, mut c) = (lo, hi);
        while c - a > tol.max(1e-15 * (a.abs() + c.abs())) {
            let m = 0.5 * (a + c);
            if m == a || m == c {
                break;
            }
            if count_below(&b, m) > k {
                c = m;
            } else {
                a = m;
            }
        }
        let lam = 0.5 * (a + c);
        let shift = lam + tol * 10.0;
        let lu = BandLu::new(&b, shift);
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let mut v: Vec<f64> = (0..h.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // deflate pairs already found (close eigenvalues)
        for _ in 0..6 {
            for p in &out {
                let p: &EigenPair = p;
                let d: f64 = p.vector.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(&p.vector).for_each(|(x, y)| *x -= d * y);
            }
            lu.solve(&mut v);
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
        }
        let hv = h.apply_real(&v);
        let rq: f64 = hv.iter().zip(&v).map(|(a, b)| a * b).sum();
        let residual = hv.iter().zip(&v).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
        let loc = localization(&h.grid, &v);
        out.push(EigenPair { value: rq, vector: v, localization: loc, residual });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Zero-energy classification.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroClass {
    Regular,
    FirstKind,
    SecondKind,
    ZeroEigenvalue,
}

impl ZeroClass {
    /// Expected blow-up exponent of ||M^{-1}(lambda)|| as lambda -> 0.
    pub fn expected_exponent(self) -> f64 {
        match self {
            ZeroClass::Regular => 0.0,
            ZeroClass::FirstKind => -1.0,
            ZeroClass::SecondKind => -3.0,
            // R_V ~ P_0 / lambda^4 near an eigenvalue at zero
            ZeroClass::ZeroEigenvalue => -4.0,
        }
    }

    /// Class suggested by a fitted exponent.
    pub fn from_exponent(e: f64) -> ZeroClass {
        if e > -0.5 {
            ZeroClass::Regular
        } else if e > -2.0 {
            ZeroClass::FirstKind
        } else if e > -3.5 {
            ZeroClass::SecondKind
        } else {
            ZeroClass::ZeroEigenvalue
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceClass {
    pub class: ZeroClass,
    pub method: String,
    /// singular values of the 4x4 connection matrix
    pub connection_singular_values: Vec<f64>,
    /// relative size of the growing part of the bounded candidate
    pub bounded_defect: f64,
    /// relative smallest singular value of the quadratic/cubic block on {1, x}
    pub linear_defect: f64,
    pub birman_exponent: Option<f64>,
    /// true when the classification is a surrogate (non-compact potential)
    pub surrogate: bool,
    pub notes: Vec<String>,
}

/// Right-side cubic coefficients of the solutions that equal 1, x, x^2, x^3 left of the support.
pub fn connection_matrix(v: &SampledPotential, r: f64) -> Result<DMatrix<f64>> {
    let pot = v.spec.evaluator()?;
    let step = v.grid.h / 4.0;
    let a = -r;
    let b = r + 3.0;
    let steps = ((b - a) / step).ceil() as usize;
    let dx = (b - a) / steps as f64;
    let mut c = DMatrix::zeros(4, 4);
    for k in 0..4 {
        // state (phi, phi', phi'', phi''') of x^k at x = a
        let mut y = [0.0; 4];
        for (d, yd) in y.iter_mut().enumerate() {
            if d <= k {
                let f: f64 = ((k - d + 1)..=k).map(|t| t as f64).product();
                *yd = f * a.powi((k - d) as i32);
            }
        }
        let rhs = |x: f64, y: &[f64; 4]| [y[1], y[2], y[3], -pot(x) * y[0]];
        let mut x = a;
        let mut fit_x = Vec::new();
        let mut fit_y = Vec::new();
        for _ in 0..steps {
            let k1 = rhs(x, &y);
            let t = |s: &[f64; 4], f: f64| [y[0] + f * s[0], y[1] + f * s[1], y[2] + f * s[2], y[3] + f * s[3]];
            let k2 = rhs(x + dx / 2.0, &t(&k1, dx / 2.0));
            let k3 = rhs(x + dx / 2.0, &t(&k2, dx / 2.0));
            let k4 = rhs(x + dx, &t(&k3, dx));
            for d in 0..4 {
                y[d] += dx / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
            x += dx;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical(format!("shooting blew up at x = {x:.4} (step {dx:.3e})")));
            }
            if x >= r + 1.0 - 1e-12 {
                fit_x.push(x);
                fit_y.push(y[0]);
            }
        }
        // cubic least squares on [r + 1, r + 3]
        let m = fit_x.len();
        let mut a_mat = DMatrix::zeros(m, 4);
        for (i, xv) in fit_x.iter().enumerate() {
            for p in 0..4 {
                a_mat[(i, p)] = xv.powi(p as i32);
            }
        }
        let rhs_v = DVector::from_vec(fit_y);
        let sol = a_mat.svd(true, true).solve(&rhs_v, 1e-14).map_err(|e| Error::Numerical(e.to_string()))?;
        c.set_column(k, &sol);
    }
    Ok(c)
}

/// Shooting classification for compact V; non-compact V falls back to the
/// Birman-Schwinger exponent plus an eigenvalue check near 0.
pub fn classify_zero_energy(v: &SampledPotential) -> Result<ResonanceClass> {
    match v.support_radius {
        Some(r) if r < v.grid.half_width / 2.0 => classify_shooting(v, r.max(v.grid.h)),
        _ => classify_noncompact(v),
    }
}

fn classify_shooting(v: &SampledPotential, r: f64) -> Result<ResonanceClass> {
    let c = connection_matrix(v, r)?;
    let sv = c.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let thr = 1e-6;
    // bounded: the solution that is constant on the left stays in span{1} on the right
    let col0 = c.column(0);
    let bounded_defect = (col0[1].powi(2) + col0[2].powi(2) + col0[3].powi(2)).sqrt() / smax;
    // at most linear: some combination of {1, x} on the left has no x^2, x^3 on the right
    let block = c.view((2, 0), (2, 2)).into_owned();
    let bsv = block.svd(false, false).singular_values;
    let linear_defect = bsv.min() / smax;
    let class = if bounded_defect <= thr {
        ZeroClass::SecondKind
    } else if linear_defect <= thr {
        ZeroClass::FirstKind
    } else {
        ZeroClass::Regular
    };
    Ok(ResonanceClass {
        class,
        method: "shooting".into(),
        connection_singular_values: sv.iter().cloned().collect(),
        bounded_defect,
        linear_defect,
        birman_exponent: None,
        surrogate: false,
        notes: vec!["compact support: no L^2 solution at zero energy is possible".into()],
    })
}

/// Half width of the energy window searched for a zero mode.
pub const ZERO_MODE_SEARCH: f64 = 0.2;

fn classify_noncompact(v: &SampledPotential) -> Result<ResonanceClass> {
    let mut notes = vec!["non-compact potential: growth classes are a surrogate on the truncated box".to_string()];
    // A true zero eigenvalue shows up as a localized pair shifted by O(h^2): either it is
    // already within the window, or halving h shrinks it by about 4.
    let window = 1e-3;
    let nearest = |pv: &SampledPotential| -> Result<Option<f64>> {
        let h = build_hamiltonian(pv, Boundary::DirichletClamped)?;
        let pairs = eigen_slice(&h, -ZERO_MODE_SEARCH, ZERO_MODE_SEARCH, 256)?;
        Ok(pairs.iter().filter(|p| p.localization >= 0.99).map(|p| p.value).min_by(|a, b| a.abs().total_cmp(&b.abs())))
    };
    let coarse = nearest(v)?;
    let zero_mode = match coarse {
        Some(e) if e.abs() <= window => true,
        Some(e) => {
            let fine_grid = crate::grid::make_grid(v.grid.half_width, 2 * v.grid.n)?;
            let fine = nearest(&crate::potentials::sample_potential(&v.spec, &fine_grid)?)?;
            match fine {
                Some(f) => {
                    notes.push(format!("nearest localized eigenvalue {e:.3e} at n, {f:.3e} at 2n"));
                    f.abs() <= window || (f.abs() <= 0.35 * e.abs() && f * e > 0.0)
                }
                None => false,
            }
        }
        None => false,
    };
    let exp = crate::birman_schwinger::saturation_aware_exponent(v)?;
    if let Some(n) = &exp.note {
        notes.push(n.clone());
    }
    let class = if zero_mode {
        notes.push("localized eigenpair converging to zero under refinement".into());
        ZeroClass::ZeroEigenvalue
    } else {
        ZeroClass::from_exponent(exp.exponent)
    };
    Ok(ResonanceClass {
        class,
        method: "eigen+birman".into(),
        connection_singular_values: vec![],
        bounded_defect: f64::NAN,
        linear_defect: f64::NAN,
        birman_exponent: Some(exp.exponent),
        surrogate: true,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potentials::{sample_potential, PotentialSpec};

    fn free(l: f64, n: usize) -> SampledPotential {
        sample_potential(&PotentialSpec::Zero, &make_grid(l, n).unwrap()).unwrap()
    }

    #[test]
    fn cubics_in_kernel() {
        let h = build_hamiltonian(&free(2.0, 64), Boundary::DirichletClamped).unwrap();
        let x: Vec<f64> = h.grid.x().to_vec();
        let u: Vec<f64> = x.iter().map(|x| x.powi(3) - 2.0 * x + 1.0).collect();
        let hu = h.apply_real(&u);
        for i in 2..62 {
            assert!(hu[i].abs() < 1e-8 * h.norm_bound().sqrt(), "{}", hu[i]);
        }
    }

    #[test]
    fn plane_wave_symbol() {
        let g = make_grid(30.0, 2048).unwrap();
        let h = build_hamiltonian(&free(30.0, 2048), Boundary::Periodic).unwrap();
        let u: Vec<C64> = g.x().iter().map(|&x| C64::from_polar(1.0, x)).collect();
        let hu = h.apply(&u);
        let ratio = (hu[1000] / u[1000]).re;
        assert!((ratio - 1.0).abs() < 2.0 * g.h * g.h, "{ratio}");
    }

    #[test]
    fn dense_free_and_embedded() {
        let sd = eigendecompose(
            &build_hamiltonian(&free(10.0, 128), Boundary::Periodic).unwrap(),
            SpectralOptions::default(),
        )
        .unwrap();
        assert!(sd.eigenvalues[0] > -1e-8);
        assert!(sd.bound_state_indices.is_empty());
        let p = ac_projector(&sd);
        assert!((p - DMatrix::identity(128, 128)).norm() < 1e-12);

        let g = make_grid(15.0, 512).unwrap();
        let v = sample_potential(&PotentialSpec::Embedded, &g).unwrap();
        let h = build_hamiltonian(&v, Boundary::DirichletClamped).unwrap();
        let sd = eigendecompose(&h, SpectralOptions::default()).unwrap();
        assert!(sd.max_residual(&h) <= 1e-8 * h.norm_bound());
        assert_eq!(sd.embedded_candidates.len(), 1, "{:?}", sd.embedded_candidates);
        let k = sd.embedded_candidates[0];
        assert!((sd.eigenvalues[k] - 1.0).abs() < 1e-2);
        let p = ac_projector(&sd);
        assert!((&p * &p - &p).norm() < 1e-10);
        let tr: f64 = (0..512).map(|i| p[(i, i)]).sum();
        assert!((512.0 - tr - sd.point_indices().len() as f64).abs() < 1e-9);
        // commutes with H
        let hm = h.to_dense();
        assert!((&hm * &p - &p * &hm).norm() <= 1e-8 * h.norm_bound() * 10.0);
    }

    #[test]
    fn negative_bump_binds() {
        let g = make_grid(10.0, 256).unwrap();
        let v = sample_potential(&PotentialSpec::bump(-5.0, 1.5), &g).unwrap();
        let h = build_hamiltonian(&v, Boundary::DirichletClamped).unwrap();
        let sd = eigendecompose(&h, SpectralOptions::default()).unwrap();
        assert!(!sd.bound_state_indices.is_empty());
        // variational oracle
        let phi: Vec<f64> = g.x().iter().map(|x| (-x * x / 8.0).exp()).collect();
        let hp = h.apply_real(&phi);
        assert!(hp.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>() < 0.0);
    }

    #[test]
    fn slice_matches_dense() {
        let g = make_grid(15.0, 400).unwrap();
        let v = sample_potential(&PotentialSpec::Embedded, &g).unwrap();
        let h = build_hamiltonian(&v, Boundary::DirichletClamped).unwrap();
        let sd = eigendecompose(&h, SpectralOptions::default()).unwrap();
        let pairs = eigen_slice(&h, 0.2, 3.0, 50).unwrap();
        let dense: Vec<f64> = sd.eigenvalues.iter().cloned().filter(|e| *e >= 0.2 && *e <= 3.0).collect();
        assert_eq!(pairs.len(), dense.len());
        for (p, d) in pairs.iter().zip(&dense) {
            assert!((p.value - d).abs() < 1e-8 * h.norm_bound(), "{} {}", p.value, d);
            assert!(p.residual < 1e-6 * h.norm_bound());
        }
    }

    #[test]
    fn shooting_free_is_second_kind() {
        let c = classify_zero_energy(&free(10.0, 512)).unwrap();
        assert_eq!(c.class, ZeroClass::SecondKind);
    }
}
