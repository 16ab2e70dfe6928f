//! The limiting null law of the statistic: the distribution of
//! integral_0^1 B(u)^2 du for a standard Brownian bridge B.
//!
//! By the Karhunen-Loeve expansion the law equals sum_k xi_k^2 / (k pi)^2
//! with xi_k independent standard normals, so its characteristic function is
//! prod_k (1 - 2it/(k^2 pi^2))^(-1/2). The CDF is obtained by Gil-Pelaez
//! inversion of the product truncated at K terms, with the remainder
//! approximated by a Gaussian matching its mean and variance:
//!
//!   F(x) = 1/2 - (1/pi) int_0^inf sin(theta(u,x)) e^(-s2 u^2/2) / (u rho(u)) du,
//!   theta(u,x) = (1/2) sum_{k<=K} atan(2 lam_k u) + mu_R u - x u,
//!   rho(u)     = prod_{k<=K} (1 + 4 lam_k^2 u^2)^(1/4),
//!
//! where mu_R and s2 are the mean and variance of the truncated remainder.
//! Everything that does not depend on x is precomputed on a fixed
//! Gauss-Legendre grid, so one CDF evaluation is a single weighted sine sum.

use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// Eigenvalue truncation used by the shared table.
pub const DEFAULT_K: usize = 1000;

/// Beyond this point the upper tail is below 1e-20 (Chernoff bound with the
/// leading eigenvalue), so the CDF is reported as exactly 1.
const TAIL_ONE: f64 = 12.0;

/// Upper end of the inversion grid; the integrand magnitude is < 1e-13 here
/// and decays faster than any polynomial.
const U_MAX: f64 = 3000.0;

/// Gauss-Legendre order per panel.
const GL_ORDER: usize = 40;

static STANDARD: Lazy<CvmLimit> = Lazy::new(|| CvmLimit::new(DEFAULT_K));

/// Precomputed inversion grid and cached quantiles for the limit law.
pub struct CvmLimit {
    k_terms: usize,
    tol: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    phases: Vec<f64>,
    quantile_cache: Vec<(f64, f64)>,
}

impl CvmLimit {
    pub fn new(k_terms: usize) -> Self {
        let (nodes, weights, phases) = build_grid(k_terms);
        let mut table = CvmLimit {
            k_terms,
            tol: 1e-8,
            nodes,
            weights,
            phases,
            quantile_cache: Vec::new(),
        };
        table.quantile_cache = [0.90, 0.95, 0.99]
            .iter()
            .map(|&p| (p, table.quantile_uncached(p)))
            .collect();
        table
    }

    /// Shared table with the default truncation.
    pub fn standard() -> &'static CvmLimit {
        &STANDARD
    }

    pub fn k_terms(&self) -> usize {
        self.k_terms
    }

    /// P(integral B^2 <= x). Total on finite reals; 0 for x <= 0.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= TAIL_ONE {
            return 1.0;
        }
        // compensated sum: the far tail of the CDF changes by ~1e-14 per
        // grid step and must stay monotone against rounding noise
        let mut acc = 0.0f64;
        let mut carry = 0.0f64;
        for i in 0..self.nodes.len() {
            let term = self.weights[i] * (self.phases[i] - x * self.nodes[i]).sin();
            let y = term - carry;
            let t = acc + y;
            carry = (t - acc) - y;
            acc = t;
        }
        let raw = 0.5 - acc;
        // the quadrature noise floor (~1e-13) exceeds the true mass beyond
        // these points; snapping keeps the CDF monotone in both tails
        if raw < 1e-9 {
            0.0
        } else if raw > 1.0 - 1e-9 {
            1.0
        } else {
            raw
        }
    }

    /// Inverse CDF by bracketing and bisection on the monotone CDF;
    /// |cdf(result) - p| <= tol.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !p.is_finite() || p <= 0.0 || p >= 1.0 {
            return Err(Error::LevelOutOfRange(p));
        }
        for &(level, q) in &self.quantile_cache {
            if level == p {
                return Ok(q);
            }
        }
        Ok(self.quantile_uncached(p))
    }

    fn quantile_uncached(&self, p: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = 0.25;
        while self.cdf(hi) < p && hi < TAIL_ONE {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let f = self.cdf(mid);
            if (f - p).abs() <= 0.1 * self.tol || hi - lo < 1e-13 {
                return mid;
            }
            if f < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Upper-tail probability of the statistic under the limit law.
    pub fn p_value(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeStatistic(t));
        }
        Ok(1.0 - self.cdf(t))
    }
}

/// CDF of the limit law through the shared table.
pub fn cvm_limit_cdf(x: f64) -> f64 {
    CvmLimit::standard().cdf(x)
}

/// Quantile of the limit law through the shared table.
pub fn cvm_limit_quantile(p: f64) -> Result<f64> {
    CvmLimit::standard().quantile(p)
}

/// Asymptotic p-value of an observed statistic.
pub fn p_value(t: f64) -> Result<f64> {
    CvmLimit::standard().p_value(t)
}

// -- grid construction -------------------------------------------------------

fn build_grid(k_terms: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pi = std::f64::consts::PI;
    let lam: Vec<f64> = (1..=k_terms)
        .map(|k| 1.0 / ((k * k) as f64 * pi * pi))
        .collect();

    // prefix sums of lam^p for the small-angle tail approximations
    let prefix = |p: u32| -> Vec<f64> {
        let mut out = Vec::with_capacity(k_terms + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for &l in &lam {
            acc += l.powi(p as i32);
            out.push(acc);
        }
        out
    };
    let p1 = prefix(1);
    let p2 = prefix(2);
    let p3 = prefix(3);
    let p4 = prefix(4);

    // remainder mean and variance beyond K
    let mu_r = tail_sum_inv_sq(k_terms) / (pi * pi);
    let var_r = 2.0 * tail_sum_inv_quartic(k_terms) / pi.powi(4);

    let (gl_x, gl_w) = gauss_legendre(GL_ORDER);

    // panel layout: fine where the integrand is large, coarser in the tail;
    // widths keep the phase change per panel within the GL order for x up
    // to TAIL_ONE
    let mut panels: Vec<(f64, f64)> = Vec::new();
    let mut push_panels = |from: f64, to: f64, width: f64| {
        let count = ((to - from) / width).round() as usize;
        for i in 0..count {
            panels.push((from + i as f64 * width, from + (i + 1) as f64 * width));
        }
    };
    push_panels(0.0, 60.0, 1.0);
    push_panels(60.0, 600.0, 2.0);
    push_panels(600.0, U_MAX, 3.0);

    // small-angle cutoff: below this, atan and ln1p use their leading terms
    const EPS_CUT: f64 = 1e-3;

    let mut nodes = Vec::with_capacity(panels.len() * GL_ORDER);
    let mut weights = Vec::with_capacity(panels.len() * GL_ORDER);
    let mut phases = Vec::with_capacity(panels.len() * GL_ORDER);

    for &(a, b) in &panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for g in 0..GL_ORDER {
            let u = mid + half * gl_x[g];
            let w = half * gl_w[g];

            // first index where 2 lam_k u <= EPS_CUT
            let k0 = ((2.0 * u / (pi * pi * EPS_CUT)).sqrt().ceil() as usize).clamp(1, k_terms + 1);

            let mut s1 = 0.0; // sum of atan(2 lam u)
            let mut s2 = 0.0; // sum of ln(1 + 4 lam^2 u^2)
            for &l in &lam[..k0 - 1] {
                let e = 2.0 * l * u;
                s1 += e.atan();
                s2 += (e * e).ln_1p();
            }
            // leading-order tails for k >= k0
            let t1 = p1[k_terms] - p1[k0 - 1];
            let t2 = p2[k_terms] - p2[k0 - 1];
            let t3 = p3[k_terms] - p3[k0 - 1];
            let t4 = p4[k_terms] - p4[k0 - 1];
            s1 += 2.0 * u * t1 - (8.0 / 3.0) * u.powi(3) * t3;
            s2 += 4.0 * u * u * t2 - 8.0 * u.powi(4) * t4;

            let magnitude = (-0.5 * var_r * u * u - 0.25 * s2).exp() / (u * pi);
            nodes.push(u);
            weights.push(w * magnitude);
            phases.push(0.5 * s1 + mu_r * u);
        }
    }
    (nodes, weights, phases)
}

/// sum_{k > K} 1/k^2 by Euler-Maclaurin; exact to f64 for K >= 10.
fn tail_sum_inv_sq(k: usize) -> f64 {
    let m = (k + 1) as f64;
    1.0 / m + 1.0 / (2.0 * m * m) + 1.0 / (6.0 * m.powi(3)) - 1.0 / (30.0 * m.powi(5))
        + 1.0 / (42.0 * m.powi(7))
}

/// sum_{k > K} 1/k^4 by Euler-Maclaurin.
fn tail_sum_inv_quartic(k: usize) -> f64 {
    let m = (k + 1) as f64;
    1.0 / (3.0 * m.powi(3)) + 1.0 / (2.0 * m.powi(4)) + 1.0 / (3.0 * m.powi(5))
        - 1.0 / (6.0 * m.powi(7))
        + 2.0 / (9.0 * m.powi(9))
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            // Legendre polynomial and derivative at z by recurrence
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let mut p0 = 1.0;
                let mut p1 = 0.0;
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
                }
                let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                x[i] = -z;
                x[n - 1 - i] = z;
                let wi = 2.0 / ((1.0 - z * z) * dp * dp);
                w[i] = wi;
                w[n - 1 - i] = wi;
                break;
            }
        }
    }
    (x, w)
}
