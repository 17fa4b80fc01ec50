//! Gauss-Legendre rules and small fitting helpers shared by the sweeps.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; m];
    let mut ws = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m.
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        xs[i] = -z;
        xs[m - 1 - i] = z;
        ws[i] = w;
        ws[m - 1 - i] = w;
    }
    let (c, s) = (0.5 * (a + b), 0.5 * (b - a));
    (xs.iter().map(|t| c + s * t).collect(), ws.iter().map(|w| w * s).collect())
}

/// Gauss-Legendre in log(lambda) on [a, b]; weights include the Jacobian.
pub fn log_gauss(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre(m, a.ln(), b.ln());
    let lam: Vec<f64> = t.iter().map(|t| t.exp()).collect();
    let ws = w.iter().zip(&lam).map(|(w, l)| w * l).collect();
    (lam, ws)
}

pub fn geomspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..m).map(|i| (la + (lb - la) * i as f64 / (m - 1) as f64).exp()).collect()
}

/// Ordinary least-squares line. Returns (slope, intercept, stderr of slope).
pub fn linfit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
    let se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, icept, se)
}

/// Slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (s, _, se) = linfit(&lx, &ly);
    (s, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        let (x, w) = gauss_legendre(8, -1.0, 2.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(15)).sum();
        let exact = (2f64.powi(16) - 1.0) / 16.0;
        assert!((s - exact).abs() < 1e-9 * exact);
        let (x, w) = gauss_legendre(64, 0.0, 1.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert!((s - 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn log_gauss_integrates_inverse() {
        let (l, w) = log_gauss(40, 1e-3, 0.1);
        let s: f64 = l.iter().zip(&w).map(|(l, w)| w / l).sum();
        assert!((s - 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn linfit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (s, c, se) = linfit(&x, &y);
        assert!((s + 0.5).abs() < 1e-14 && (c - 3.0).abs() < 1e-14 && se < 1e-12);
    }
}
