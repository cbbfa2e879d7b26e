//! Thermodynamic-formalism estimates for the limit arc: partition sums
//! P_m(s) over words of the three-map system, the Bowen root as a
//! surrogate for the Hausdorff dimension, a discrete conformal measure
//! with Frostman-ratio checks, an independent box-counting oracle, and
//! the quasicircle M-condition estimate.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{FeigError, Result};
use crate::geometry::{linear_fit, CurveApprox};
use crate::ifs::{build_X, limit_curve};
use crate::inverse::u_eval;
use crate::map::FeigenbaumMap;

/// Probe offsets for the sup/inf bracketing variants: the basepoint and
/// two nearby samples per cylinder (local distortion bracket).
const PROBE_DELTA: f64 = 0.01;
const NPROBE: usize = 3;

// ---------------------------------------------------------------------
// fast inverse branch: per-cell Taylor models of u on the lower half
// plane, built lazily by polynomial Taylor shift + series inversion
// ---------------------------------------------------------------------

const PATCH_H: f64 = 0.2;
const INV_DEG: usize = 10;

struct Patch {
    z0: Complex64,
    /// u(z) = sum beta_k (z - z0)^k, beta_0 = u(z0)
    beta: [Complex64; INV_DEG + 1],
}

enum Slot {
    Good(Patch),
    Fallback,
}

struct FastU<'a> {
    map: &'a FeigenbaumMap,
    /// dense coefficients of the polynomial g(z) = F(z^r), ascending
    gpoly: Vec<Complex64>,
    cells: HashMap<(i64, i64), Slot>,
}

impl<'a> FastU<'a> {
    fn new(map: &'a FeigenbaumMap) -> Self {
        let r = map.r as usize;
        let mut gpoly = vec![Complex64::new(0.0, 0.0); r * map.coeffs.len() + r + 1];
        gpoly[0] = Complex64::new(1.0, 0.0);
        for (k, &c) in map.coeffs.iter().enumerate() {
            gpoly[r * (k + 1)] = Complex64::new(c, 0.0);
        }
        FastU {
            map,
            gpoly,
            cells: HashMap::new(),
        }
    }

    /// Taylor coefficients of g at w0 up to degree INV_DEG, by in-place
    /// synthetic-division shift.
    fn g_shift(&self, w0: Complex64) -> [Complex64; INV_DEG + 1] {
        let mut a = self.gpoly.clone();
        let n = a.len() - 1;
        let mut out = [Complex64::new(0.0, 0.0); INV_DEG + 1];
        for (i, o) in out.iter_mut().enumerate() {
            if i > n {
                break;
            }
            for k in (i..n).rev() {
                let high = a[k + 1];
                a[k] += high * w0;
            }
            *o = a[i];
        }
        out
    }

    fn build_patch(&self, z0: Complex64) -> Result<Patch> {
        let w0 = u_eval(self.map, z0)?;
        let b = self.g_shift(w0);
        // invert q(t) = b0 + b1 t + ... : find t(s) with q(t) = b0 + s
        if b[1].norm() < 1e-12 {
            return Err(FeigError::BranchLoss(format!(
                "inverse series degenerate at {z0}"
            )));
        }
        let mut beta = [Complex64::new(0.0, 0.0); INV_DEG + 1];
        beta[1] = 1.0 / b[1];
        for m in 2..=INV_DEG {
            // coefficient of s^m in sum_{j>=2} b_j t(s)^j using beta_{<m}
            let mut tm = Complex64::new(0.0, 0.0);
            // t^j truncated to degree m
            let mut pow = [Complex64::new(0.0, 0.0); INV_DEG + 1];
            pow[..m].copy_from_slice(&beta[..m]);
            for j in 2..=m {
                // pow currently t^(j-1); multiply by t
                let mut next = [Complex64::new(0.0, 0.0); INV_DEG + 1];
                for p in 1..m {
                    if pow[p].norm() == 0.0 {
                        continue;
                    }
                    for q in 1..=(m - p) {
                        let add = pow[p] * beta[q];
                        next[p + q] += add;
                    }
                }
                pow = next;
                tm += b[j] * pow[m];
            }
            beta[m] = -tm / b[1];
        }
        beta[0] = w0;
        Ok(Patch { z0, beta })
    }

    fn cell_of(z: Complex64) -> (i64, i64) {
        ((z.re / PATCH_H).floor() as i64, (z.im / PATCH_H).floor() as i64)
    }

    /// u(z) and u'(z) for z in the lower half plane.
    fn eval_prime(&mut self, z: Complex64) -> Result<(Complex64, Complex64)> {
        if z.im > -0.25 {
            // too close to the slit: stay on the slow path
            return u_eval_prime_slow(self.map, z);
        }
        let key = Self::cell_of(z);
        if !self.cells.contains_key(&key) {
            let z0 = Complex64::new(
                (key.0 as f64 + 0.5) * PATCH_H,
                (key.1 as f64 + 0.5) * PATCH_H,
            );
            let slot = match self.build_patch(z0) {
                Ok(p) => {
                    // validate against the slow branch at two corners
                    let mut ok = true;
                    for dz in [
                        Complex64::new(0.45 * PATCH_H, 0.45 * PATCH_H),
                        Complex64::new(-0.45 * PATCH_H, -0.45 * PATCH_H),
                    ] {
                        let zt = z0 + dz;
                        let direct = u_eval(self.map, zt)?;
                        let fast = eval_patch(&p, zt).0;
                        if (direct - fast).norm() > 1e-7 * (1.0 + direct.norm()) {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        Slot::Good(p)
                    } else {
                        Slot::Fallback
                    }
                }
                Err(_) => Slot::Fallback,
            };
            self.cells.insert(key, slot);
        }
        match self.cells.get(&key).unwrap() {
            Slot::Good(p) => Ok(eval_patch(p, z)),
            Slot::Fallback => u_eval_prime_slow(self.map, z),
        }
    }
}

fn eval_patch(p: &Patch, z: Complex64) -> (Complex64, Complex64) {
    let t = z - p.z0;
    let mut val = Complex64::new(0.0, 0.0);
    let mut der = Complex64::new(0.0, 0.0);
    for k in (1..=INV_DEG).rev() {
        val = (val + p.beta[k]) * t;
        der = der * t + p.beta[k] * k as f64;
    }
    (val + p.beta[0], der)
}

fn u_eval_prime_slow(map: &FeigenbaumMap, z: Complex64) -> Result<(Complex64, Complex64)> {
    crate::inverse::u_eval_with_prime(map, z)
}

/// phi_i value and derivative magnitude via the fast inverse branch;
/// u*(y) = u(conj y) and |(u*)'| = |u'(conj y)|.
fn phi_fast(
    fu: &mut FastU,
    aa: f64,
    i: u32,
    z: Complex64,
) -> Result<(Complex64, f64)> {
    match i {
        1 => {
            let (w, wp) = fu.eval_prime((aa * z).conj())?;
            Ok((w, aa * wp.norm()))
        }
        2 => {
            let (w, wp) = fu.eval_prime((aa * aa * z).conj())?;
            Ok((w, aa * aa * wp.norm()))
        }
        3 => {
            let (w1, wp1) = fu.eval_prime(z.conj())?;
            let chi = aa * w1;
            let (w2, wp2) = fu.eval_prime(chi.conj())?;
            Ok((aa * w2, aa * aa * wp1.norm() * wp2.norm()))
        }
        _ => Err(FeigError::OutOfDomain(format!("no map phi_{i}"))),
    }
}

// ---------------------------------------------------------------------
// leaf tables: derivative magnitudes of all 3^m words at the basepoint
// plus per-cylinder sup/inf over nearby probes, cached per (map, m, z)
// ---------------------------------------------------------------------

type LeafTable = Arc<Vec<[f64; 3]>>;

fn leaf_cache() -> &'static Mutex<HashMap<(u32, usize, usize, u64, u64), LeafTable>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, usize, usize, u64, u64), LeafTable>>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn walk_leaves(
    fu: &mut FastU,
    aa: f64,
    pts: [Complex64; NPROBE],
    der: [f64; NPROBE],
    depth: usize,
    out: &mut Vec<[f64; 3]>,
    anchors: Option<&mut Vec<Complex64>>,
) -> Result<()> {
    if depth == 0 {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for d in der {
            lo = lo.min(d);
            hi = hi.max(d);
        }
        out.push([der[0], hi, lo]);
        if let Some(a) = anchors {
            a.push(pts[0]);
        }
        return Ok(());
    }
    let mut anchors = anchors;
    for i in 1..=3 {
        let mut npts = pts;
        let mut nder = der;
        for p in 0..NPROBE {
            let (w, dm) = phi_fast(fu, aa, i, pts[p])?;
            npts[p] = w;
            nder[p] = der[p] * dm;
        }
        walk_leaves(fu, aa, npts, nder, depth - 1, out, anchors.as_deref_mut())?;
    }
    Ok(())
}

fn leaf_table(map: &FeigenbaumMap, m: usize, z: Complex64) -> Result<LeafTable> {
    let key = (map.r, map.order, m, z.re.to_bits(), z.im.to_bits());
    if let Some(t) = leaf_cache().lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let aa = -map.alpha;
    let mut fu = FastU::new(map);
    let pts = [
        z,
        z + Complex64::new(PROBE_DELTA, 0.0),
        z + Complex64::new(0.0, PROBE_DELTA),
    ];
    let mut out = Vec::with_capacity(3usize.pow(m as u32));
    walk_leaves(&mut fu, aa, pts, [1.0; NPROBE], m, &mut out, None)?;
    let table: LeafTable = Arc::new(out);
    leaf_cache().lock().unwrap().insert(key, table.clone());
    Ok(table)
}

// ---------------------------------------------------------------------
// public types
// ---------------------------------------------------------------------

/// Partition-sum values for word lengths m <= depth at probe exponents.
#[derive(Debug, Clone)]
pub struct PressureTable {
    pub depth: usize,
    /// (m, s, value, sup_value, inf_value)
    pub rows: Vec<(usize, f64, f64, f64, f64)>,
}

/// Discrete conformal measure at exponent s on depth-n cylinders.
#[derive(Debug, Clone)]
pub struct ConformalMeasure {
    pub s: f64,
    pub n: usize,
    pub basepoint: Complex64,
    /// normalized cylinder weights, indexed by word (first-applied symbol
    /// in the least significant base-3 digit)
    pub weights: Vec<f64>,
    /// cylinder representatives phi_word(basepoint)
    pub anchors: Vec<Complex64>,
    /// unnormalized derivative magnitudes (for diameter estimates)
    pub derivs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    pub bowen_roots: Vec<f64>,
    pub h: f64,
    pub bracket: (f64, f64),
    pub error: f64,
    pub box_dim: f64,
}

#[derive(Debug, Clone)]
pub struct QuasicircleReport {
    pub m_estimate: f64,
    pub depth: usize,
}

// ---------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------

/// A fixed basepoint z in Int(X) \ I: the grid point maximizing the
/// distance to both the carrier boundary and the limit arc.
pub fn default_basepoint(map: &FeigenbaumMap) -> Result<Complex64> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, usize), Complex64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&z) = cache.lock().unwrap().get(&(map.r, map.order)) {
        return Ok(z);
    }
    let x = build_X(map, 0.03)?;
    let outline = x.outline();
    let arc = limit_curve(map, 8)?;
    let (lo, hi) = outline.bbox();
    let mut best = (f64::NEG_INFINITY, Complex64::new(0.0, 0.0));
    let n = 48;
    for i in 0..n {
        for j in 0..n {
            let p = Complex64::new(
                lo.re + (hi.re - lo.re) * (i as f64 + 0.5) / n as f64,
                lo.im + (hi.im - lo.im) * (j as f64 + 0.5) / n as f64,
            );
            if !outline.contains_interior(p, 1e-9) {
                continue;
            }
            let score = outline.distance_to(p).min(arc.distance_to(p));
            if score > best.0 {
                best = (score, p);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(FeigError::NonConvergence(
            "no interior basepoint found".into(),
        ));
    }
    cache.lock().unwrap().insert((map.r, map.order), best.1);
    Ok(best.1)
}

/// P_m(s) at the basepoint z plus sup/inf bracketing variants from
/// per-cylinder probe samples.
pub fn partition_sum(
    map: &FeigenbaumMap,
    s: f64,
    m: usize,
    z: Complex64,
) -> Result<(f64, f64, f64)> {
    if m < 1 {
        return Err(FeigError::OutOfDomain("word length m must be >= 1".into()));
    }
    if s < 0.0 {
        return Err(FeigError::OutOfDomain("exponent s must be >= 0".into()));
    }
    let table = leaf_table(map, m, z)?;
    let mut v = 0.0;
    let mut hi = 0.0;
    let mut lo = 0.0;
    for row in table.iter() {
        v += row[0].powf(s);
        hi += row[1].powf(s);
        lo += row[2].powf(s);
    }
    Ok((v, hi, lo))
}

fn bisect_root(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    if fa.signum() == fb.signum() {
        return Err(FeigError::NoBracket(a, b));
    }
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm.signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// The Bowen root: s with P_m(s) = 1 at the default basepoint.
pub fn bowen_root(map: &FeigenbaumMap, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(FeigError::OutOfDomain("need word length m >= 2".into()));
    }
    let z = default_basepoint(map)?;
    let table = leaf_table(map, m, z)?;
    bisect_root(
        |s| table.iter().map(|r| r[0].powf(s)).sum::<f64>() - 1.0,
        0.0,
        2.0,
    )
}

/// Roots of the inf- and sup-variant sums: a bracket [h_inf, h_sup]
/// around the Bowen root.
pub fn bowen_bracket(map: &FeigenbaumMap, m: usize) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(FeigError::OutOfDomain("need word length m >= 2".into()));
    }
    let z = default_basepoint(map)?;
    let table = leaf_table(map, m, z)?;
    let lo = bisect_root(
        |s| table.iter().map(|r| r[2].powf(s)).sum::<f64>() - 1.0,
        0.0,
        2.0,
    )?;
    let hi = bisect_root(
        |s| table.iter().map(|r| r[1].powf(s)).sum::<f64>() - 1.0,
        0.0,
        2.0,
    )?;
    Ok((lo, hi))
}

/// Pressure table for the CLI report.
pub fn pressure_table(
    map: &FeigenbaumMap,
    depth: usize,
    probes: &[f64],
) -> Result<PressureTable> {
    let z = default_basepoint(map)?;
    let mut rows = Vec::new();
    for m in 1..=depth {
        for &s in probes {
            let (v, hi, lo) = partition_sum(map, s, m, z)?;
            rows.push((m, s, v, hi, lo));
        }
    }
    Ok(PressureTable { depth, rows })
}

/// Box-counting slope of a curve polyline over the supplied scales.
pub fn box_counting_oracle(curve: &CurveApprox, scales: &[f64]) -> Result<f64> {
    if curve.len() < 3usize.pow(8) {
        return Err(FeigError::InsufficientResolution(format!(
            "need at least 3^8 points, got {}",
            curve.len()
        )));
    }
    if scales.len() < 2 {
        return Err(FeigError::InsufficientResolution(
            "need at least two scales".into(),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &delta in scales {
        if delta <= 0.0 {
            return Err(FeigError::OutOfDomain("scales must be positive".into()));
        }
        let mut cells: std::collections::HashSet<(i64, i64)> = std::collections::HashSet::new();
        for (a, b) in curve.segments() {
            let len = (b - a).norm();
            let steps = (len / (0.3 * delta)).ceil().max(1.0) as usize;
            for k in 0..=steps {
                let p = a + (b - a) * (k as f64 / steps as f64);
                cells.insert(((p.re / delta).floor() as i64, (p.im / delta).floor() as i64));
            }
        }
        xs.push((1.0 / delta).ln());
        // subtract the fencepost box: N(delta) ~ len/delta + O(1) for an
        // arc, and the constant term biases the slope at coarse scales
        ys.push(((cells.len().saturating_sub(1)).max(1) as f64).ln());
    }
    let (_a, slope, _r2) = linear_fit(&xs, &ys);
    Ok(slope)
}

/// Normalized cylinder weights w_eps ∝ |phi'_eps(z)|^s over |eps| = n.
pub fn conformal_measure(
    map: &FeigenbaumMap,
    s: f64,
    n: usize,
    z: Complex64,
) -> Result<ConformalMeasure> {
    if n < 1 {
        return Err(FeigError::OutOfDomain("need depth n >= 1".into()));
    }
    let aa = -map.alpha;
    let mut fu = FastU::new(map);
    let pts = [z; NPROBE];
    let mut rows = Vec::with_capacity(3usize.pow(n as u32));
    let mut anchors = Vec::with_capacity(rows.capacity());
    walk_leaves(&mut fu, aa, pts, [1.0; NPROBE], n, &mut rows, Some(&mut anchors))?;
    let derivs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut weights: Vec<f64> = derivs.iter().map(|d| d.powf(s)).collect();
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(FeigError::NonConvergence(format!(
            "partition sum degenerate: {total}"
        )));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(ConformalMeasure {
        s,
        n,
        basepoint: z,
        weights,
        anchors,
        derivs,
    })
}

/// Residual of the conformality identity per outer map i = 1, 2, 3:
/// |mu(C_i) - sum over depth-(n-1) words of w_eps |phi'_i(anchor_eps)|^s|
/// normalized by the cylinder mass.
pub fn conformality_residual(map: &FeigenbaumMap, measure: &ConformalMeasure) -> Result<Vec<f64>> {
    let coarse = conformal_measure(map, measure.s, measure.n - 1, measure.basepoint)?;
    let aa = -map.alpha;
    let mut fu = FastU::new(map);
    let mut out = Vec::with_capacity(3);
    for i in 1..=3u32 {
        // the outermost symbol is chosen at the deepest level of the leaf
        // walk, so its cylinder is the residue class index = i - 1 mod 3
        let mass: f64 = measure
            .weights
            .iter()
            .skip(i as usize - 1)
            .step_by(3)
            .sum();
        let mut rhs = 0.0;
        for (w, &a) in coarse.weights.iter().zip(&coarse.anchors) {
            let (_, dm) = phi_fast(&mut fu, aa, i, a)?;
            rhs += w * dm.powf(measure.s);
        }
        out.push((mass, rhs));
    }
    let rhs_total: f64 = out.iter().map(|(_, r)| r).sum();
    Ok(out
        .into_iter()
        .map(|(mass, rhs)| (mass - rhs / rhs_total).abs() / mass.max(1e-300))
        .collect())
}

/// Extremes of mu(B(x, r)) / r^h over sampled centers and radii.
pub fn frostman_ratios(
    map: &FeigenbaumMap,
    measure: &ConformalMeasure,
    h: f64,
    centers: usize,
    radii: &[f64],
) -> Result<(f64, f64)> {
    let _ = map;
    if measure.n < 8 {
        return Err(FeigError::InsufficientDepth(format!(
            "measure depth {} < 8",
            measure.n
        )));
    }
    let (lo, hi) = {
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &a in &measure.anchors {
            lo = Complex64::new(lo.re.min(a.re), lo.im.min(a.im));
            hi = Complex64::new(hi.re.max(a.re), hi.im.max(a.im));
        }
        (lo, hi)
    };
    let spread = (hi - lo).norm();
    let cyl = measure
        .derivs
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        * spread;
    for &r in radii {
        if r > 0.5 * spread || r < 0.5 * cyl {
            return Err(FeigError::InsufficientDepth(format!(
                "radius {r} outside the resolvable range [{:.2e}, {:.2e}]",
                0.5 * cyl,
                0.5 * spread
            )));
        }
    }
    let stride = (measure.anchors.len() / centers.max(1)).max(1);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for ci in (0..measure.anchors.len()).step_by(stride).take(centers) {
        let x = measure.anchors[ci];
        for &r in radii {
            let mut mass = 0.0;
            for ((&w, &a), &d) in measure
                .weights
                .iter()
                .zip(&measure.anchors)
                .zip(&measure.derivs)
            {
                let rho = (d * spread).max(1e-300);
                let dist = (a - x).norm();
                // fractional counting of boundary cylinders
                let f = ((r + 0.5 * rho - dist) / rho).clamp(0.0, 1.0);
                mass += w * f;
            }
            let ratio = mass / r.powf(h);
            min_ratio = min_ratio.min(ratio);
            max_ratio = max_ratio.max(ratio);
        }
    }
    Ok((min_ratio, max_ratio))
}

/// Maximum over ordered triples (xi1, xi3, xi2) along the polyline of
/// |xi3 - xi1| / |xi2 - xi1| (three-point bounded-turning estimate).
pub fn m_condition_estimate(curve: &CurveApprox) -> QuasicircleReport {
    let n = curve.len();
    let samples = 110.min(n);
    let idx: Vec<usize> = (0..samples).map(|k| k * (n - 1) / (samples - 1).max(1)).collect();
    let mut m_est: f64 = 0.0;
    for a in 0..idx.len() {
        for b in (a + 1)..idx.len() {
            let x1 = curve.points[idx[a]];
            let x2 = curve.points[idx[b]];
            let denom = (x2 - x1).norm();
            if denom < 1e-15 {
                continue;
            }
            for c in (a + 1)..b {
                let x3 = curve.points[idx[c]];
                let ratio = (x3 - x1).norm() / denom;
                if ratio > m_est {
                    m_est = ratio;
                }
            }
        }
    }
    let depth = ((n.max(2) - 1) as f64).log(3.0).round() as usize;
    QuasicircleReport {
        m_estimate: m_est,
        depth,
    }
}

/// Full dimension estimate for the CLI report.
pub fn dimension_estimate(map: &FeigenbaumMap, max_depth: usize) -> Result<DimensionEstimate> {
    let mut roots = Vec::new();
    for m in (2..=max_depth).step_by(2) {
        roots.push(bowen_root(map, m)?);
    }
    let h = *roots.last().ok_or_else(|| {
        FeigError::OutOfDomain("max_depth must allow at least word length 2".into())
    })?;
    let bracket = bowen_bracket(map, max_depth.max(2))?;
    let curve = limit_curve(map, 10.min(max_depth as u32).max(8))?;
    let scales: Vec<f64> = (3..9).map(|k| 2.0f64.powi(-k)).collect();
    let box_dim = box_counting_oracle(&curve, &scales)?;
    Ok(DimensionEstimate {
        bowen_roots: roots,
        h,
        bracket,
        error: 0.5 * (bracket.1 - bracket.0),
        box_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::solve_feigenbaum;

    fn solved() -> &'static FeigenbaumMap {
        static MAP: OnceLock<FeigenbaumMap> = OnceLock::new();
        MAP.get_or_init(|| solve_feigenbaum(2, 40, 1e-12).expect("solver"))
    }

    fn basepoint() -> Complex64 {
        default_basepoint(solved()).expect("basepoint")
    }

    #[test]
    fn fast_branch_matches_slow() {
        let map = solved();
        let mut fu = FastU::new(map);
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..120 {
            let z = Complex64::new(0.2 + 5.0 * next(), -0.8 - 5.0 * next());
            let (fast, fast_p) = fu.eval_prime(z).unwrap();
            let (slow, slow_p) = crate::inverse::u_eval_with_prime(map, z).unwrap();
            assert!(
                (fast - slow).norm() < 1e-7 * (1.0 + slow.norm()),
                "value mismatch at {z}: {fast} vs {slow}"
            );
            assert!(
                (fast_p - slow_p).norm() < 1e-5 * (1.0 + slow_p.norm()),
                "derivative mismatch at {z}"
            );
        }
    }

    #[test]
    fn partition_sum_basics() {
        let map = solved();
        let z = basepoint();
        // m = 1, s = 0: three maps
        let (v, hi, lo) = partition_sum(map, 0.0, 1, z).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        assert!((hi - 3.0).abs() < 1e-12 && (lo - 3.0).abs() < 1e-12);

        // sup >= value >= inf, all positive
        for m in [2usize, 4, 6] {
            for s in [0.5, 1.0, 1.5] {
                let (v, hi, lo) = partition_sum(map, s, m, z).unwrap();
                assert!(lo > 0.0);
                assert!(hi >= v && v >= lo, "bracket violated at m={m}, s={s}");
            }
        }

        // s = 2 stays bounded in m (area comparison)
        let (a4, _, _) = partition_sum(map, 2.0, 4, z).unwrap();
        let (a8, _, _) = partition_sum(map, 2.0, 8, z).unwrap();
        assert!(a8 < 1.5 * a4.max(1.0), "area sums blow up: {a4} -> {a8}");

        // monotone decreasing in s for m >= 4
        let (p_low, _, _) = partition_sum(map, 0.8, 4, z).unwrap();
        let (p_high, _, _) = partition_sum(map, 1.6, 4, z).unwrap();
        assert!(p_low > p_high);
    }

    #[test]
    fn submultiplicative_sup_sums() {
        let map = solved();
        let z = basepoint();
        let s = 1.2;
        let (_, s3, _) = partition_sum(map, s, 3, z).unwrap();
        let (_, s4, _) = partition_sum(map, s, 4, z).unwrap();
        let (_, s7, _) = partition_sum(map, s, 7, z).unwrap();
        // finite-sample sup over probes: allow a small distortion slack
        assert!(
            s7 <= 1.05 * s3 * s4,
            "submultiplicativity fails: {s7} vs {}",
            s3 * s4
        );
    }

    #[test]
    fn bowen_roots_bracket_and_settle() {
        let map = solved();
        let h6 = bowen_root(map, 6).unwrap();
        let h8 = bowen_root(map, 8).unwrap();
        assert!(h8 > 1.0 && h8 < 2.0, "h out of (1,2): {h8}");
        assert!((h8 - h6).abs() < 0.05, "roots drifting: {h6} -> {h8}");
        let (lo, hi) = bowen_bracket(map, 8).unwrap();
        assert!(lo <= h8 + 1e-9 && h8 <= hi + 1e-9, "root outside bracket");
        assert!(hi - lo < 0.05, "bracket too wide at m=8: {}", hi - lo);
        assert!(bowen_root(map, 1).is_err());
    }

    #[test]
    fn box_counting_on_known_curves() {
        // straight segment -> dimension 1
        let seg: Vec<Complex64> = (0..=7000)
            .map(|i| Complex64::new(i as f64 / 7000.0, 0.5))
            .collect();
        let seg = CurveApprox::open(seg);
        let scales: Vec<f64> = (3..9).map(|k| 2.0f64.powi(-k)).collect();
        let d = box_counting_oracle(&seg, &scales).unwrap();
        assert!((d - 1.0).abs() < 0.02, "segment dimension {d}");

        // resolution guard
        let short = CurveApprox::open(vec![Complex64::new(0.0, 0.0); 100]);
        assert!(box_counting_oracle(&short, &scales).is_err());

        // limit arc: close to 1 from either side at these scales, and
        // stable under halving the window
        let map = solved();
        let arc = limit_curve(map, 9).unwrap();
        let d_arc = box_counting_oracle(&arc, &scales).unwrap();
        assert!(d_arc > 0.95 && d_arc < 2.0, "arc dimension {d_arc}");
        let d_half = box_counting_oracle(&arc, &scales[..3]).unwrap();
        assert!((d_arc - d_half).abs() < 0.03, "window shift: {d_arc} vs {d_half}");
    }

    #[test]
    fn conformal_measure_properties() {
        let map = solved();
        let z = basepoint();
        let h = bowen_root(map, 8).unwrap();
        let mu8 = conformal_measure(map, h, 8, z).unwrap();
        let total: f64 = mu8.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let max8 = mu8.weights.iter().cloned().fold(0.0, f64::max);
        assert!(max8 < 1.0);

        // max cylinder weight decays with depth
        let mu9 = conformal_measure(map, h, 9, z).unwrap();
        let max9 = mu9.weights.iter().cloned().fold(0.0, f64::max);
        assert!(max9 < max8, "no decay: {max8} -> {max9}");

        // conformality residual small per outer map
        let res = conformality_residual(map, &mu8).unwrap();
        for (i, r) in res.iter().enumerate() {
            assert!(*r < 0.05, "conformality residual phi_{}: {r}", i + 1);
        }
    }

    #[test]
    fn frostman_ratio_window() {
        let map = solved();
        let z = basepoint();
        let h = bowen_root(map, 8).unwrap();
        let mu = conformal_measure(map, h, 9, z).unwrap();
        let radii: Vec<f64> = (2..8).map(|k| 0.4 * 2.0f64.powi(-k)).collect();
        let (lo, hi) = frostman_ratios(map, &mu, h, 40, &radii).unwrap();
        assert!(lo > 0.0 && hi.is_finite());
        let c2 = hi / lo;
        assert!(c2 < 200.0, "Frostman constant blows up: {c2}");

        // doubling the radii moves ratios by a bounded factor
        let doubled: Vec<f64> = radii.iter().map(|r| 2.0 * r).collect();
        let (lo2, hi2) = frostman_ratios(map, &mu, h, 40, &doubled).unwrap();
        assert!(hi2 / lo2 < 2.0f64.powf(h) * c2 * 1.5);

        // range guard
        let shallow = conformal_measure(map, h, 5, z).unwrap();
        assert!(frostman_ratios(map, &shallow, h, 10, &radii).is_err());
        assert!(frostman_ratios(map, &mu, h, 10, &[100.0]).is_err());
    }

    #[test]
    fn m_condition_behaviour() {
        // straight segment: estimate 1
        let seg: Vec<Complex64> = (0..=500)
            .map(|i| Complex64::new(i as f64 / 500.0, 0.0))
            .collect();
        let rep = m_condition_estimate(&CurveApprox::open(seg));
        // finite sampling keeps the supremum slightly below 1
        assert!(
            rep.m_estimate > 0.95 && rep.m_estimate <= 1.0 + 1e-12,
            "segment M = {}",
            rep.m_estimate
        );

        // limit arc: stabilizes across depths
        let map = solved();
        let m8 = m_condition_estimate(&limit_curve(map, 8).unwrap()).m_estimate;
        let m10 = m_condition_estimate(&limit_curve(map, 10).unwrap()).m_estimate;
        assert!(m8 > 0.9, "M estimate degenerate: {m8}");
        assert!(
            (m8 - m10).abs() / m8 < 0.1,
            "M estimate unstable: {m8} vs {m10}"
        );
    }
}
