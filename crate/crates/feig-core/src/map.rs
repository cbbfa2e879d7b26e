//! The fixed point of period doubling.
//!
//! Solves g(x) = alpha * g(g(x / alpha)) for an even unimodal map
//! normalized by g(0) = 1, represented as g(z) = F(z^r) with
//! F(w) = 1 + sum c_k w^k. With that representation evenness and the
//! normalization are structural and alpha = 1/g(1) follows from the
//! equation at x = 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FeigError, Result};

/// Solved renormalization fixed point g(z) = 1 + sum c_k z^(r k).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeigenbaumMap {
    pub r: u32,
    pub order: usize,
    pub alpha: f64,
    pub coeffs: Vec<f64>,
    pub residual: f64,
    pub radius: f64,
}

/// Recursion limits for evaluating g outside the series disc through
/// g(z) = alpha * g(g(z / alpha)).
#[derive(Debug, Clone, Copy)]
pub struct ContinuationPolicy {
    pub max_depth: u32,
    pub tol: f64,
}

impl Default for ContinuationPolicy {
    fn default() -> Self {
        ContinuationPolicy {
            max_depth: 24,
            tol: 1e-12,
        }
    }
}

impl FeigenbaumMap {
    /// F(w) = 1 + sum c_k w^k by Horner.
    fn f_real(&self, w: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc * w + 1.0
    }

    fn f_complex(&self, w: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc * w + 1.0
    }

    /// F'(w).
    fn f_prime_complex(&self, w: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * w + c * (k + 1) as f64;
        }
        acc
    }

    /// Series evaluation of g on the reals, valid inside the series disc.
    pub fn g_real(&self, x: f64) -> f64 {
        self.f_real(x.powi(self.r as i32))
    }

    /// Series evaluation of g, no domain check.
    pub fn g_series(&self, z: Complex64) -> Complex64 {
        self.f_complex(z.powu(self.r))
    }

    /// Series evaluation of g'.
    pub fn g_prime_series(&self, z: Complex64) -> Complex64 {
        let r = self.r;
        self.f_prime_complex(z.powu(r)) * (r as f64) * z.powu(r - 1)
    }
}

/// Collocation abscissas: Chebyshev nodes of (0, 1) in w = x^r, pulled
/// back to x. Chebyshev spacing in the series variable keeps the Newton
/// system as well conditioned as a monomial basis allows.
fn cheb_nodes(n: usize, r: u32) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = (2 * i + 1) as f64 / (2 * n) as f64 * std::f64::consts::PI;
            let w = 0.5 + 0.5 * t.cos();
            w.powf(1.0 / r as f64)
        })
        .collect()
}

/// A second collocation grid (Chebyshev points of the second kind, open),
/// used only to cross-check the solution off the real axis.
fn cheb_nodes_alt(n: usize, r: u32) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = (i + 1) as f64 / (n + 1) as f64 * std::f64::consts::PI;
            let w = 0.5 + 0.5 * t.cos();
            w.powf(1.0 / r as f64)
        })
        .collect()
}

/// Collocation nodes: Chebyshev points on the real segment plus points on
/// circles in the upper half plane. The equation holds on a complex
/// neighbourhood of the segment, and the circle nodes are what pin the
/// solution down off the real axis (a fit on [0, 1] alone is accurate to
/// ~1e-7 at |z| = 1 and worse beyond). Circle nodes also condition the
/// monomial basis far better than any real grid.
fn colloc_nodes(order: usize, r: u32, alt: bool) -> Vec<Complex64> {
    let real = if alt {
        cheb_nodes_alt(order, r)
    } else {
        cheb_nodes(order, r)
    };
    let mut nodes: Vec<Complex64> = real.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    let radii: &[f64] = if alt {
        &[0.45, 0.75, 1.05, 1.35, 1.65, 1.95]
    } else {
        &[0.5, 0.8, 1.1, 1.4, 1.7, 2.0]
    };
    let shift = if alt { 0.7 } else { 0.3 };
    for &rho in radii {
        for j in 0..12 {
            let theta = std::f64::consts::PI * (j as f64 + shift) / 12.0;
            nodes.push(Complex64::from_polar(rho, theta));
        }
    }
    nodes
}

struct Collocation {
    r: u32,
    nodes: Vec<Complex64>,
}

impl Collocation {
    fn make_map(&self, coeffs: &[f64]) -> FeigenbaumMap {
        FeigenbaumMap {
            r: self.r,
            order: coeffs.len(),
            alpha: 0.0,
            coeffs: coeffs.to_vec(),
            residual: 0.0,
            radius: 0.0,
        }
    }

    fn residual(&self, coeffs: &[f64], out: &mut [Complex64]) {
        let map = self.make_map(coeffs);
        let alpha = 1.0 / map.g_real(1.0);
        for (o, &x) in out.iter_mut().zip(self.nodes.iter()) {
            *o = map.g_series(x) - alpha * map.g_series(map.g_series(x / alpha));
        }
    }

    fn residual_sup(&self, coeffs: &[f64]) -> f64 {
        let mut out = vec![Complex64::new(0.0, 0.0); self.nodes.len()];
        self.residual(coeffs, &mut out);
        out.iter()
            .fold(0.0f64, |m, v| m.max(v.re.abs()).max(v.im.abs()))
    }

    /// Exact Jacobian of the collocation residual, including the implicit
    /// dependence of alpha = 1/F(1) on the coefficients. Finite differences
    /// are useless here: the high-order columns scale like x^(rk) and sink
    /// below differencing noise.
    fn jacobian(&self, coeffs: &[f64]) -> Vec<Vec<Complex64>> {
        let map = self.make_map(coeffs);
        let n = coeffs.len();
        let ri = self.r as i32;
        let alpha = 1.0 / map.g_real(1.0);
        let f_prime = |w: Complex64| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &c) in map.coeffs.iter().enumerate().rev() {
                acc = acc * w + c * (k + 1) as f64;
            }
            acc
        };
        let mut jac: Vec<Vec<Complex64>> = Vec::with_capacity(self.nodes.len());
        for &x in self.nodes.iter() {
            let y = x / alpha;
            let wy = y.powi(ri);
            let u = map.f_complex(wy);
            let wu = u.powi(ri);
            let v = map.f_complex(wu);
            let fp_y = f_prime(wy) * self.r as f64 * y.powi(ri - 1);
            let fp_u = f_prime(wu) * self.r as f64 * u.powi(ri - 1);
            let wx = x.powi(ri);
            // d y / d c_k = x for every k, since d alpha / d c_k = -alpha^2
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            let mut pow_x = Complex64::new(1.0, 0.0);
            let mut pow_y = Complex64::new(1.0, 0.0);
            let mut pow_u = Complex64::new(1.0, 0.0);
            for slot in row.iter_mut() {
                pow_x *= wx;
                pow_y *= wy;
                pow_u *= wu;
                let du = pow_y + fp_y * x;
                let dv = pow_u + fp_u * du;
                *slot = pow_x + alpha * alpha * v - alpha * dv;
            }
            jac.push(row);
        }
        jac
    }
}

/// Dense least squares by Householder QR with column equilibration; the
/// systems here are tiny (a few hundred rows).
fn lstsq_qr(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = a.len();
    let n = a[0].len();
    if m < n {
        return None;
    }
    let mut col_scale = vec![1.0; n];
    for (j, s) in col_scale.iter_mut().enumerate() {
        let mx = (0..m).map(|i| a[i][j].abs()).fold(0.0f64, f64::max);
        if mx > 0.0 {
            *s = mx;
            for row in a.iter_mut() {
                row[j] /= mx;
            }
        }
    }
    for col in 0..n {
        let norm = (col..m).map(|i| a[i][col] * a[i][col]).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return None;
        }
        let sign = if a[col][col] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (col..m).map(|i| a[i][col]).collect();
        v[0] += sign * norm;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 < 1e-300 {
            continue;
        }
        for j in col..n {
            let dot: f64 = (col..m).map(|i| v[i - col] * a[i][j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in col..m {
                a[i][j] -= f * v[i - col];
            }
        }
        let dot: f64 = (col..m).map(|i| v[i - col] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in col..m {
            b[i] -= f * v[i - col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        if a[col][col].abs() < 1e-300 {
            return None;
        }
        x[col] = s / a[col][col];
    }
    for (xi, s) in x.iter_mut().zip(col_scale.iter()) {
        *xi /= s;
    }
    Some(x)
}

/// Solve the fixed-point equation by collocation and damped Newton.
pub fn solve_feigenbaum(r: u32, order: usize, tol: f64) -> Result<FeigenbaumMap> {
    if r < 2 || r % 2 != 0 {
        return Err(FeigError::BadCriticality(r));
    }
    if order < 10 {
        return Err(FeigError::InsufficientData(format!(
            "order must be >= 10, got {order}"
        )));
    }
    if !(tol > 0.0) {
        return Err(FeigError::InsufficientData("tol must be > 0".into()));
    }

    // Continuation in the truncation order. Once the tail coefficients
    // fall below double-precision noise the extra unknowns stop being
    // identifiable, so each stage keeps the best iterate seen and a later
    // stall cannot undo an earlier converged solve.
    let mut coeffs = vec![0.0; 12.min(order)];
    coeffs[0] = -1.5;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut ord = coeffs.len();
    loop {
        coeffs.resize(ord, 0.0);
        let colloc = Collocation {
            r,
            nodes: colloc_nodes(ord, r, false),
        };
        // Each stage refines as far as the line search allows, not just to
        // `tol`: the extra digits are what make the series usable off the
        // real axis.
        let (cand, norm) = newton_stage(&colloc, coeffs.clone(), 0.0);
        if best.as_ref().map_or(true, |(_, b)| norm < *b) {
            coeffs = cand.clone();
            best = Some((cand, norm));
        }
        if ord == order {
            break;
        }
        ord = (ord + 4).min(order);
    }
    let (mut coeffs, res_norm) = best.unwrap();

    if res_norm > tol {
        return Err(FeigError::NonConvergence(format!(
            "collocation residual {res_norm:.3e} above tol {tol:.3e}"
        )));
    }
    coeffs.resize(order, 0.0);

    let mut map = FeigenbaumMap {
        r,
        order,
        alpha: 0.0,
        coeffs,
        residual: 0.0,
        radius: 0.0,
    };
    map.alpha = 1.0 / map.g_real(1.0);
    if map.alpha >= -1.0 {
        return Err(FeigError::NonConvergence(format!(
            "converged to a spurious branch, alpha = {}",
            map.alpha
        )));
    }

    // achieved defect on a finer validation grid
    let grid = 512;
    let mut defect = 0.0f64;
    for i in 0..=grid {
        let x = i as f64 / grid as f64;
        let d = (map.g_real(x) - map.alpha * map.g_real(map.g_real(x / map.alpha))).abs();
        defect = defect.max(d);
    }
    map.residual = defect;

    // Cross-check against an independent solve on a different grid; where
    // the two polynomials agree the truncation is trustworthy.
    let alt_colloc = Collocation {
        r,
        nodes: colloc_nodes(order, r, true),
    };
    let (alt_coeffs, _) = newton_stage(&alt_colloc, map.coeffs.clone(), 0.0);
    let alt = FeigenbaumMap {
        coeffs: alt_coeffs,
        ..map.clone()
    };
    map.radius = validity_radius(&map, &alt, (10.0 * tol).max(defect));
    Ok(map)
}

/// One damped Gauss-Newton run at a fixed truncation order. Returns the
/// best iterate seen together with its sup-norm collocation residual.
fn newton_stage(colloc: &Collocation, mut coeffs: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
    let mut res = vec![Complex64::new(0.0, 0.0); colloc.nodes.len()];
    colloc.residual(&coeffs, &mut res);
    let mut res_norm = res
        .iter()
        .fold(0.0f64, |m, v| m.max(v.re.abs()).max(v.im.abs()));

    for _ in 0..60 {
        if res_norm <= tol {
            break;
        }
        let jac = colloc.jacobian(&coeffs);
        // split each complex equation into its real and imaginary parts
        let mut a: Vec<Vec<f64>> = Vec::with_capacity(2 * jac.len());
        let mut b: Vec<f64> = Vec::with_capacity(2 * jac.len());
        for (row, (node, ri)) in jac
            .iter()
            .zip(colloc.nodes.iter().zip(res.iter()))
        {
            a.push(row.iter().map(|c| c.re).collect());
            b.push(ri.re);
            if node.im != 0.0 {
                a.push(row.iter().map(|c| c.im).collect());
                b.push(ri.im);
            }
        }
        let step = match lstsq_qr(a, b) {
            Some(s) => s,
            None => break,
        };
        // backtracking line search on the sup norm
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = coeffs
                .iter()
                .zip(step.iter())
                .map(|(c, s)| c - lambda * s)
                .collect();
            let trial_norm = colloc.residual_sup(&trial);
            if trial_norm < res_norm {
                coeffs = trial;
                res_norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        colloc.residual(&coeffs, &mut res);
        res_norm = res
            .iter()
            .fold(0.0f64, |m, v| m.max(v.re.abs()).max(v.im.abs()));
    }
    (coeffs, res_norm)
}

/// Empirical series-trust radius: largest |z| where two independently
/// collocated solutions agree to within `tol`.
fn validity_radius(map: &FeigenbaumMap, alt: &FeigenbaumMap, tol: f64) -> f64 {
    let mut radius = 0.0;
    let mut rho: f64 = 0.2;
    'outer: while rho < 10.0 {
        for k in 0..64 {
            let z = Complex64::from_polar(rho, k as f64 * std::f64::consts::TAU / 64.0);
            if (map.g_series(z) - alt.g_series(z)).norm() > tol {
                break 'outer;
            }
        }
        radius = rho;
        rho *= 1.02;
    }
    radius
}

/// g(z), by series inside the trust disc and by the functional equation
/// g(z) = alpha * g(g(z / alpha)) outside it.
pub fn eval_g(map: &FeigenbaumMap, z: Complex64, policy: &ContinuationPolicy) -> Result<Complex64> {
    eval_g_depth(map, z, policy.max_depth)
}

fn eval_g_depth(map: &FeigenbaumMap, z: Complex64, depth: u32) -> Result<Complex64> {
    if z.norm() <= map.radius {
        return Ok(map.g_series(z));
    }
    if depth == 0 {
        return Err(FeigError::OutOfDomain(format!(
            "continuation depth exhausted at |z| = {:.3}",
            z.norm()
        )));
    }
    let inner = eval_g_depth(map, z / map.alpha, depth - 1)?;
    let outer = eval_g_depth(map, inner, depth - 1)?;
    Ok(map.alpha * outer)
}

/// g'(z) with the same continuation scheme, via the chain rule
/// g'(z) = g'(g(z/alpha)) * g'(z/alpha).
pub fn eval_g_prime(
    map: &FeigenbaumMap,
    z: Complex64,
    policy: &ContinuationPolicy,
) -> Result<Complex64> {
    eval_g_prime_depth(map, z, policy.max_depth)
}

fn eval_g_prime_depth(map: &FeigenbaumMap, z: Complex64, depth: u32) -> Result<Complex64> {
    if z.norm() <= map.radius {
        return Ok(map.g_prime_series(z));
    }
    if depth == 0 {
        return Err(FeigError::OutOfDomain(format!(
            "continuation depth exhausted at |z| = {:.3}",
            z.norm()
        )));
    }
    let w = eval_g_depth(map, z / map.alpha, depth - 1)?;
    let d_inner = eval_g_prime_depth(map, z / map.alpha, depth - 1)?;
    let d_outer = eval_g_prime_depth(map, w, depth - 1)?;
    Ok(d_outer * d_inner)
}

/// The unique zero x0 of g in (0, 1), by bisection.
pub fn find_x0(map: &FeigenbaumMap) -> Result<f64> {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    if map.g_real(lo) <= 0.0 || map.g_real(hi) >= 0.0 {
        return Err(FeigError::NonConvergence(
            "g does not change sign on (0,1)".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if map.g_real(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Independent estimate of |alpha| from the superstable period-doubling
/// cascade of x -> 1 - mu |x|^r: the nearest-to-critical cycle points
/// d_n = f^(2^(n-1))(0) scale by alpha.
pub fn alpha_oracle(r: u32, precision: f64) -> Result<f64> {
    if r < 2 || r % 2 != 0 {
        return Err(FeigError::BadCriticality(r));
    }
    let f = |mu: f64, x: f64| 1.0 - mu * x.abs().powi(r as i32);
    let orbit0 = |mu: f64, n: u64| {
        let mut x = 0.0;
        for _ in 0..n {
            x = f(mu, x);
        }
        x
    };

    // superstable parameters mu_n: f^(2^n)(0) = 0, found by bisection on
    // a bracket predicted from the previous gaps
    let mut mus: Vec<f64> = vec![];
    let mut ratios: Vec<f64> = vec![];
    let mut ds: Vec<f64> = vec![];
    let max_level = 18;
    for n in 1..=max_level {
        let period = 1u64 << n;
        let (mut lo, mut hi) = match mus.len() {
            0 => (0.5, 1.4),
            1 => (mus[0] + 1e-6, 2.0),
            _ => {
                let gap = mus[mus.len() - 1] - mus[mus.len() - 2];
                let guess = mus[mus.len() - 1] + gap / 4.669;
                (mus[mus.len() - 1] + gap * 0.05, guess + gap * 0.6)
            }
        };
        // The superstable parameter is the first zero of f^(2^n)(0) above
        // mu_{n-1}; scan for the first sign change rather than widening the
        // bracket, since the orbit value turns negative again further out.
        let scan = 400;
        let step = (hi - lo) / scan as f64;
        let mut flo = orbit0(lo, period);
        let mut found = false;
        for i in 1..=scan {
            let x = lo + step * i as f64;
            let fx = orbit0(x, period);
            if fx.signum() != flo.signum() {
                hi = x;
                lo = x - step;
                found = true;
                break;
            }
            flo = fx;
        }
        if !found {
            return Err(FeigError::NonConvergence(format!(
                "no superstable bracket at level {n}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = orbit0(mid, period);
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
            if hi - lo < f64::EPSILON * hi.abs() {
                break;
            }
        }
        let mu = 0.5 * (lo + hi);
        mus.push(mu);
        ds.push(orbit0(mu, 1u64 << (n - 1)));
        if ds.len() >= 2 {
            let ratio = (ds[ds.len() - 2] / ds[ds.len() - 1]).abs();
            ratios.push(ratio);
        }
        // Aitken-accelerated tail once three ratios exist
        if ratios.len() >= 3 {
            let m = ratios.len();
            let (r0, r1, r2) = (ratios[m - 3], ratios[m - 2], ratios[m - 1]);
            let denom = (r2 - r1) - (r1 - r0);
            let accel = if denom.abs() > 1e-300 {
                r2 - (r2 - r1) * (r2 - r1) / denom
            } else {
                r2
            };
            if (r2 - r1).abs() < precision {
                return Ok(accel);
            }
            // geometric convergence broken by rounding: the parameter gaps
            // shrink past what f64 bisection resolves, and further levels
            // only add noise
            if (r2 - r1).abs() > (r1 - r0).abs() {
                return Err(FeigError::NonConvergence(format!(
                    "cascade ratios hit the rounding floor at {:.1e}, above requested {precision:.1e}",
                    (r1 - r0).abs()
                )));
            }
        }
    }
    Err(FeigError::NonConvergence(
        "cascade ratios did not settle within precision".into(),
    ))
}
