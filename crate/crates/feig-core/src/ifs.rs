//! The two iterated function systems acting on the compact X: the finite
//! system S = {phi_1, phi_2, phi_3} and the infinite system {psi_k}, the
//! limit set I as an ordered simple arc from c/|alpha| to c, and the
//! invariant curve L = union of |alpha|^n I over integer n.

use num_complex::Complex64;

use crate::error::{FeigError, Result};
use crate::geometry::{refine_arc, CurveApprox};
use crate::inverse::{chi_eval, find_c, omega_boundary, u_star_eval, u_star_prime_mag};
use crate::map::FeigenbaumMap;

/// A finite composition word. For the finite system the alphabet is
/// {1, 2, 3}; phi_1 and phi_2 are antiholomorphic and phi_3 = chi^2 is
/// holomorphic, so the orientation is (-1)^(number of symbols != 3).
/// For the infinite system every psi_k is antiholomorphic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolWord {
    pub symbols: Vec<u32>,
    pub orientation: i8,
}

impl SymbolWord {
    /// A word over the finite system S; symbols must lie in {1, 2, 3}.
    pub fn finite(symbols: Vec<u32>) -> Self {
        let anti = symbols.iter().filter(|&&s| s != 3).count();
        SymbolWord {
            symbols,
            orientation: if anti % 2 == 0 { 1 } else { -1 },
        }
    }

    /// A word over the infinite system {psi_k}; every factor is
    /// antiholomorphic.
    pub fn infinite(symbols: Vec<u32>) -> Self {
        let orientation = if symbols.len() % 2 == 0 { 1 } else { -1 };
        SymbolWord {
            symbols,
            orientation,
        }
    }

    pub fn empty() -> Self {
        SymbolWord {
            symbols: Vec::new(),
            orientation: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// The compact X bounded by three polyline sides. Writing P0 for the top
/// end u*(alpha^2) of the straight arc tau_0, and e1 for the far end of
/// tau_1, the sides are joined at four corner points:
///
/// * `bottom` (B_X) runs from P0/|alpha| through the rescaled even arcs
///   tau_2/|alpha|, tau_4/|alpha|, ... into c/|alpha| and back out through
///   the odd arcs ..., tau_5/|alpha|, tau_3/|alpha| to e1/|alpha|;
/// * `left` (L_X) runs from P0/|alpha| along tau_0 \ (tau_0/|alpha|) to
///   P0, then through tau_2, tau_4, ... into c;
/// * `right` (R_X) is the u* image of the sector ray beyond tau_0, from
///   e1/|alpha| = u*(P0) into c.
#[derive(Debug, Clone)]
pub struct CompactX {
    pub bottom: CurveApprox,
    pub left: CurveApprox,
    pub right: CurveApprox,
    /// [c, c/|alpha|, P0/|alpha|, e1/|alpha|]
    pub corners: Vec<Complex64>,
}

impl CompactX {
    /// The boundary as one closed polyline: left side out to c, right
    /// side back to e1/|alpha|, bottom back to the start.
    pub fn outline(&self) -> CurveApprox {
        let mut pts = self.left.points.clone();
        let join = 1e-9 * self.diameter();
        let mut out = CurveApprox::open(pts.split_off(0));
        out.extend_with(&self.right.reversed(), join);
        out.extend_with(&self.bottom.reversed(), join);
        // drop the repeated starting corner before closing up
        if let (Some(first), Some(last)) = (out.first(), out.last()) {
            if (first - last).norm() <= join {
                out.points.pop();
            }
        }
        CurveApprox::closed(out.points)
    }

    pub fn diameter(&self) -> f64 {
        self.left
            .diameter()
            .max(self.right.diameter())
            .max(self.bottom.diameter())
    }

    pub fn contains(&self, p: Complex64, tube: f64) -> bool {
        self.outline().contains(p, tube)
    }
}

fn alpha_abs(map: &FeigenbaumMap) -> f64 {
    -map.alpha
}

/// phi_i together with the magnitude of its derivative. The chain rule
/// for magnitudes is insensitive to conjugation: |(f о h)'| = |f'(h z)|
/// |h'(z)| whether each factor is holomorphic or antiholomorphic.
fn phi_with_deriv(map: &FeigenbaumMap, i: u32, z: Complex64) -> Result<(Complex64, f64)> {
    let aa = alpha_abs(map);
    match i {
        1 => {
            let w = aa * z;
            Ok((u_star_eval(map, w)?, aa * u_star_prime_mag(map, w)?))
        }
        2 => {
            let w = aa * aa * z;
            Ok((u_star_eval(map, w)?, aa * aa * u_star_prime_mag(map, w)?))
        }
        3 => {
            let mid = chi_eval(map, z)?;
            let d = aa * u_star_prime_mag(map, z)?;
            Ok((chi_eval(map, mid)?, d * aa * u_star_prime_mag(map, mid)?))
        }
        _ => Err(FeigError::OutOfDomain(format!(
            "phi index must be 1, 2 or 3, got {i}"
        ))),
    }
}

/// phi_1(z) = u*(|alpha| z), phi_2(z) = u*(alpha^2 z), phi_3 = chi^2.
pub fn phi_apply(map: &FeigenbaumMap, i: u32, z: Complex64) -> Result<Complex64> {
    Ok(phi_with_deriv(map, i, z)?.0)
}

/// psi_k(z) = u*(|alpha|^k z), k >= 1.
pub fn psi_apply(map: &FeigenbaumMap, k: u32, z: Complex64) -> Result<Complex64> {
    if k == 0 {
        return Err(FeigError::OutOfDomain(
            "psi index must be a positive integer".into(),
        ));
    }
    u_star_eval(map, alpha_abs(map).powi(k as i32) * z)
}

/// The composition phi_{e1} о ... о phi_{en} applied to z (the last
/// symbol acts first).
pub fn word_apply(map: &FeigenbaumMap, w: &SymbolWord, z: Complex64) -> Result<Complex64> {
    let mut z = z;
    for &s in w.symbols.iter().rev() {
        z = phi_apply(map, s, z)?;
    }
    Ok(z)
}

/// |(phi_w)'(z)| by the chain rule on derivative magnitudes; conjugation
/// only flips orientation, not the modulus.
pub fn word_derivative_mag(map: &FeigenbaumMap, w: &SymbolWord, z: Complex64) -> Result<f64> {
    let mut z = z;
    let mut d = 1.0;
    for &s in w.symbols.iter().rev() {
        let (zn, ds) = phi_with_deriv(map, s, z)?;
        d *= ds;
        z = zn;
    }
    Ok(d)
}

fn push_dedup(pts: &mut Vec<Complex64>, p: Complex64, eps: f64) {
    if pts.last().map_or(true, |&q| (q - p).norm() > eps) {
        pts.push(p);
    }
}

fn append_arc(pts: &mut Vec<Complex64>, arc: &[Complex64], eps: f64) {
    for &p in arc {
        push_dedup(pts, p, eps);
    }
}

/// Assemble the compact X from the boundary arcs of omega. `resolution`
/// bounds the relative size of the truncated arc tails near c and
/// c/|alpha|; the arcs themselves are refined adaptively.
#[allow(non_snake_case)]
pub fn build_X(map: &FeigenbaumMap, resolution: f64) -> Result<CompactX> {
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(FeigError::InsufficientResolution(format!(
            "resolution must lie in (0, 1), got {resolution}"
        )));
    }
    let aa = alpha_abs(map);
    let c = find_c(map, 1e-12)?.c;

    // decide how many tau arcs are needed: they shrink geometrically, so
    // estimate the rate from a short prefix first
    let probe = omega_boundary(map, 6, 32)?;
    let d4 = probe.tau[4].diameter();
    let d6 = probe.tau[6].diameter();
    let rate = (d6 / d4).sqrt().clamp(0.05, 0.95);
    let scale = probe.tau[1].diameter();
    let wanted = ((resolution * scale / probe.tau[2].diameter()).ln() / rate.ln()).ceil();
    let n_arcs = (wanted as usize + 3).clamp(8, 40);

    let ob = omega_boundary(map, n_arcs, 96)?;
    let tau = &ob.tau;
    let p0 = *tau[0].points.last().unwrap();
    let eps = 1e-13 * scale;

    // left side: the unscaled part of tau_0, then the even arcs into c
    let mut left = Vec::new();
    let seg_steps = 48;
    for i in 0..=seg_steps {
        let t = i as f64 / seg_steps as f64;
        push_dedup(&mut left, p0 * (1.0 / aa + t * (1.0 - 1.0 / aa)), eps);
    }
    let mut k = 2;
    while k < tau.len() {
        append_arc(&mut left, &tau[k].points, eps);
        k += 2;
    }
    push_dedup(&mut left, c, eps);

    // bottom: even arcs rescaled into c/|alpha|, then odd arcs rescaled
    // back out to e1/|alpha| = u*(P0)
    let mut bottom = Vec::new();
    let mut k = 2;
    while k < tau.len() {
        append_arc(
            &mut bottom,
            &tau[k].points.iter().map(|&p| p / aa).collect::<Vec<_>>(),
            eps,
        );
        k += 2;
    }
    push_dedup(&mut bottom, c / aa, eps);
    let mut k = if (tau.len() - 1) % 2 == 1 {
        tau.len() - 1
    } else {
        tau.len() - 2
    };
    while k >= 3 {
        let rescaled: Vec<Complex64> = tau[k].points.iter().rev().map(|&p| p / aa).collect();
        append_arc(&mut bottom, &rescaled, eps);
        k -= 2;
    }
    let e1_scaled = *tau[1].points.last().unwrap() / aa;
    push_dedup(&mut bottom, e1_scaled, eps);

    // right side: u* of the sector ray beyond tau_0, scale block by scale
    // block until the image settles at c
    let mut right = vec![u_star_eval(map, p0)?];
    let mut lo = p0;
    for _ in 0..60 {
        let hi = lo * aa;
        let f = |t: f64| {
            let z = lo + t * (hi - lo);
            u_star_eval(map, z).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        };
        let block = refine_arc(&f, 0.0, 1.0, 1e-4, 1e-12, 10);
        if block.iter().any(|p| !p.re.is_finite()) {
            return Err(FeigError::NonConvergence(
                "u* failed on the right-hand ray".into(),
            ));
        }
        append_arc(&mut right, &block, eps);
        lo = hi;
        if (right.last().unwrap() - c).norm() < resolution * scale {
            break;
        }
    }
    push_dedup(&mut right, c, eps);

    Ok(CompactX {
        bottom: CurveApprox::open(bottom),
        left: CurveApprox::open(left),
        right: CurveApprox::open(right),
        corners: vec![c, c / aa, p0 / aa, e1_scaled],
    })
}

/// The limit arc I of the finite system, as the polyline through the
/// 3^depth + 1 cylinder junction points ordered so that phi_1 covers
/// [a1, a2], phi_2 covers [a2, a3] and phi_3 covers [a3, a4], with
/// a1 = c/|alpha| and a4 = c. Each vertex carries the ternary address of
/// its cylinder.
pub fn limit_curve(map: &FeigenbaumMap, depth: u32) -> Result<CurveApprox> {
    limit_curve_refined(map, depth, 1)
}

/// Like [`limit_curve`] but seeded with a `subdiv`-segment chord, giving
/// subdiv * 3^depth segments; the extra vertices interpolate inside each
/// deepest cylinder. Useful when the junctions alone are too sparse.
pub fn limit_curve_refined(map: &FeigenbaumMap, depth: u32, subdiv: usize) -> Result<CurveApprox> {
    if depth < 1 || subdiv < 1 {
        return Err(FeigError::InsufficientDepth(
            "limit curve needs depth >= 1 and subdiv >= 1".into(),
        ));
    }
    let aa = alpha_abs(map);
    let c = find_c(map, 1e-12)?.c;
    let a1 = c / aa;

    let mut pts: Vec<Complex64> = (0..=subdiv)
        .map(|i| {
            let t = i as f64 / subdiv as f64;
            a1 + t * (c - a1)
        })
        .collect();

    for _ in 0..depth {
        let mut next = Vec::with_capacity(3 * pts.len() - 2);
        for i in 1..=3u32 {
            for (k, &p) in pts.iter().enumerate() {
                if i > 1 && k == 0 {
                    continue; // junction already emitted by the previous branch
                }
                next.push(phi_apply(map, i, p)?);
            }
        }
        pts = next;
    }

    let cylinders = 3usize.pow(depth);
    let addresses = (0..pts.len())
        .map(|j| {
            let mut cyl = (j / subdiv).min(cylinders - 1);
            let mut word = vec![0u8; depth as usize];
            for slot in word.iter_mut().rev() {
                *slot = (cyl % 3) as u8 + 1;
                cyl /= 3;
            }
            word
        })
        .collect();

    let mut curve = CurveApprox::open(pts);
    curve.addresses = Some(addresses);
    Ok(curve)
}

/// L restricted to a scale window: the concatenation of |alpha|^n I for
/// scale_min <= n <= scale_max, joined at the shared points |alpha|^n c.
#[allow(non_snake_case)]
pub fn curve_L(
    map: &FeigenbaumMap,
    depth: u32,
    scale_min: i32,
    scale_max: i32,
) -> Result<CurveApprox> {
    if scale_min > scale_max {
        return Err(FeigError::OutOfDomain(format!(
            "empty scale window [{scale_min}, {scale_max}]"
        )));
    }
    let aa = alpha_abs(map);
    let arc = limit_curve(map, depth)?;
    let mut out = arc.scale(Complex64::new(aa.powi(scale_min), 0.0));
    // bbox diagonal: a cheap stand-in for the diameter, only a scale here
    let (blo, bhi) = out.bbox();
    let join = 1e-9 * (bhi - blo).norm().max(1.0);
    for n in (scale_min + 1)..=scale_max {
        out.extend_with(&arc.scale(Complex64::new(aa.powi(n), 0.0)), join * aa.powi(n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hausdorff_distance;
    use crate::inverse::hyperbolic_distance;
    use crate::map::{eval_g, solve_feigenbaum, ContinuationPolicy};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn solved() -> &'static FeigenbaumMap {
        static MAP: OnceLock<FeigenbaumMap> = OnceLock::new();
        MAP.get_or_init(|| solve_feigenbaum(2, 40, 1e-12).expect("solver"))
    }

    fn compact_x() -> &'static CompactX {
        static X: OnceLock<CompactX> = OnceLock::new();
        X.get_or_init(|| build_X(solved(), 1e-6).expect("build_X"))
    }

    fn c_point(map: &FeigenbaumMap) -> Complex64 {
        find_c(map, 1e-12).unwrap().c
    }

    fn random_in_h(rng: &mut impl Rng) -> Complex64 {
        Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(0.05..1.8))
    }

    /// Rejection-sample points of Int(X) staying `margin` away from the
    /// boundary.
    fn interior_samples(x: &CompactX, rng: &mut impl Rng, count: usize, margin: f64) -> Vec<Complex64> {
        let outline = x.outline();
        let (lo, hi) = outline.bbox();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let p = Complex64::new(rng.gen_range(lo.re..hi.re), rng.gen_range(lo.im..hi.im));
            if outline.contains_interior(p, margin) {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn maps_fix_their_points() {
        let map = solved();
        let aa = -map.alpha;
        let c = c_point(map);
        let f3 = phi_apply(map, 3, c).unwrap();
        assert!((f3 - c).norm() < 1e-10, "phi_3(c) = {f3}, c = {c}");
        let f1 = phi_apply(map, 1, c / aa).unwrap();
        assert!((f1 - c / aa).norm() < 1e-10, "phi_1(c/|a|) = {f1}");
    }

    #[test]
    fn psi_reduces_to_the_finite_system() {
        let map = solved();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..40 {
            let z = random_in_h(&mut rng);
            let p1 = psi_apply(map, 1, z).unwrap();
            assert!((p1 - phi_apply(map, 1, z).unwrap()).norm() < 1e-12);

            let p3 = psi_apply(map, 3, z).unwrap();
            let f31 = phi_apply(map, 3, phi_apply(map, 1, z).unwrap()).unwrap();
            assert!((p3 - f31).norm() < 1e-10, "psi_3 != phi_3 phi_1 at {z}");

            let p4 = psi_apply(map, 4, z).unwrap();
            let f32 = phi_apply(map, 3, phi_apply(map, 2, z).unwrap()).unwrap();
            assert!((p4 - f32).norm() < 1e-10, "psi_4 != phi_3 phi_2 at {z}");
        }
        assert!(psi_apply(map, 0, Complex64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn words_compose_and_differentiate() {
        let map = solved();
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let z = random_in_h(&mut rng);

        let e = SymbolWord::empty();
        assert_eq!(word_apply(map, &e, z).unwrap(), z);
        assert_eq!(word_derivative_mag(map, &e, z).unwrap(), 1.0);
        assert_eq!(e.orientation, 1);
        assert_eq!(SymbolWord::finite(vec![1, 2]).orientation, 1);
        assert_eq!(SymbolWord::finite(vec![1, 3, 3]).orientation, -1);
        assert_eq!(SymbolWord::infinite(vec![5, 2, 7]).orientation, -1);

        // derivative magnitude against a centered difference
        for _ in 0..12 {
            let w = SymbolWord::finite((0..4).map(|_| rng.gen_range(1..=3)).collect());
            let z = random_in_h(&mut rng);
            let h = 1e-6;
            let d = word_derivative_mag(map, &w, z).unwrap();
            let fp = word_apply(map, &w, z + h).unwrap();
            let fm = word_apply(map, &w, z - h).unwrap();
            let fd = (fp - fm).norm() / (2.0 * h);
            assert!(
                (d - fd).abs() <= 1e-4 * d.max(1e-6),
                "word {:?}: |phi_w'| = {d}, fd = {fd}",
                w.symbols
            );
        }

        // the word 3^n contracts everything to c
        let c = c_point(map);
        let mut prev = f64::INFINITY;
        for n in [2u32, 4, 8, 16] {
            let w = SymbolWord::finite(vec![3; n as usize]);
            let img = word_apply(map, &w, Complex64::new(0.3, 0.9)).unwrap();
            let d = (img - c).norm();
            assert!(d < prev, "phi_3^{n} image moved away from c");
            prev = d;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn compact_x_is_a_jordan_domain() {
        let map = solved();
        let x = compact_x();
        let aa = -map.alpha;
        let c = c_point(map);
        let diam = x.diameter();

        // corner bookkeeping
        assert!((x.corners[0] - c).norm() < 1e-10);
        assert!((x.corners[1] - c / aa).norm() < 1e-10);
        assert!(x.left.distance_to(c) < 1e-8 * diam);
        assert!(x.bottom.distance_to(c / aa) < 1e-8 * diam);

        // the three sides close up into a chain
        let join = 1e-6 * diam;
        assert!((x.left.first().unwrap() - x.bottom.first().unwrap()).norm() < join);
        assert!((x.left.last().unwrap() - x.right.last().unwrap()).norm() < join);
        assert!((x.right.first().unwrap() - x.bottom.last().unwrap()).norm() < join);

        // strictly inside the upper half plane
        let min_im = x
            .outline()
            .points
            .iter()
            .map(|p| p.im)
            .fold(f64::INFINITY, f64::min);
        assert!(min_im > 0.0, "min Im over dX = {min_im}");

        // an obvious interior point
        let mid = Complex64::new(0.3, 1.2);
        assert!(x.contains(mid, 1e-6 * diam));
    }

    #[test]
    fn rescaled_x_meets_x_only_along_even_arcs() {
        let map = solved();
        let x = compact_x();
        let aa = -map.alpha;
        let outline = x.outline();
        let scaled = outline.scale(Complex64::new(aa, 0.0));
        let diam = x.diameter();
        let mut rng = ChaCha8Rng::seed_from_u64(53);

        // interior samples of |alpha| X that are not close to the shared
        // arcs (the left side of X) must lie outside X
        let mut tested = 0;
        let (lo, hi) = scaled.bbox();
        while tested < 200 {
            let p = Complex64::new(rng.gen_range(lo.re..hi.re), rng.gen_range(lo.im..hi.im));
            if !scaled.contains_interior(p, 0.02 * aa * diam) {
                continue;
            }
            if x.left.distance_to(p) < 0.05 * diam {
                continue;
            }
            tested += 1;
            assert!(
                !outline.contains_interior(p, 1e-6 * diam),
                "interior point {p} of |alpha|X is interior to X"
            );
        }
    }

    #[test]
    fn forward_invariance_of_x() {
        let map = solved();
        let x = compact_x();
        let outline = x.outline();
        let tube = 1e-6 * x.diameter();
        let n = outline.len();
        let stride = (n / 240).max(1);
        for i in (0..n).step_by(stride) {
            let z = outline.points[i];
            for sym in 1..=3u32 {
                let img = phi_apply(map, sym, z).unwrap();
                assert!(
                    outline.contains(img, tube),
                    "phi_{sym} of boundary point {z} lands at {img} outside X"
                );
            }
        }
        // the infinite system too, on a sparser sample
        for i in (0..n).step_by(stride * 4) {
            let z = outline.points[i];
            for k in 1..=6u32 {
                let img = psi_apply(map, k, z).unwrap();
                assert!(
                    outline.contains(img, tube),
                    "psi_{k} of boundary point {z} lands at {img} outside X"
                );
            }
        }
    }

    #[test]
    fn images_have_disjoint_interiors() {
        let map = solved();
        let x = compact_x();
        let outline = x.outline();
        let tube = 1e-6 * x.diameter();
        let mut rng = ChaCha8Rng::seed_from_u64(54);

        // boundary polygons of the three images
        let stride = (outline.len() / 700).max(1);
        let sampled: Vec<Complex64> = outline.points.iter().step_by(stride).copied().collect();
        let polys: Vec<CurveApprox> = (1..=3u32)
            .map(|i| {
                CurveApprox::closed(
                    sampled
                        .iter()
                        .map(|&p| phi_apply(map, i, p).unwrap())
                        .collect(),
                )
            })
            .collect();
        let meshes: Vec<f64> = polys.iter().map(|p| p.mesh()).collect();

        let samples = interior_samples(x, &mut rng, 500, 0.02 * x.diameter());
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let slack = tube.max(2.0 * meshes[j]);
                for &z in &samples {
                    let img = phi_apply(map, i as u32 + 1, z).unwrap();
                    assert!(
                        !polys[j].contains_interior(img, slack),
                        "phi_{}(interior) point {img} is interior to phi_{}(X)",
                        i + 1,
                        j + 1
                    );
                }
            }
        }
    }

    #[test]
    fn adjacency_pattern() {
        let map = solved();
        let x = compact_x();
        let outline = x.outline();
        let stride = (outline.len() / 900).max(1);
        let sampled: Vec<Complex64> = outline.points.iter().step_by(stride).copied().collect();
        let polys: Vec<CurveApprox> = (1..=3u32)
            .map(|i| {
                CurveApprox::closed(
                    sampled
                        .iter()
                        .map(|&p| phi_apply(map, i, p).unwrap())
                        .collect(),
                )
            })
            .collect();
        let min_dist = |a: &CurveApprox, b: &CurveApprox| {
            a.points
                .iter()
                .map(|&p| b.distance_to(p))
                .fold(f64::INFINITY, f64::min)
        };
        let diam = x.diameter();

        // neighbours touch (shared junction points map exactly), the
        // outer pair keeps a genuine gap
        assert!(min_dist(&polys[0], &polys[1]) <= 1e-6 * diam, "phi_1, phi_2 detached");
        assert!(min_dist(&polys[1], &polys[2]) <= 1e-6 * diam, "phi_2, phi_3 detached");
        let gap = min_dist(&polys[0], &polys[2]);
        assert!(gap > 0.01 * diam, "phi_1(X) and phi_3(X) too close: {gap}");
    }

    #[test]
    fn hyperbolic_contraction() {
        let map = solved();
        let x = compact_x();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let pts = interior_samples(x, &mut rng, 60, 0.01 * x.diameter());
        let mut lambda: f64 = 0.0;
        for pair in pts.chunks(2) {
            if pair.len() < 2 || (pair[0] - pair[1]).norm() < 1e-9 {
                continue;
            }
            let d0 = hyperbolic_distance(pair[0], pair[1]);
            for i in 1..=3u32 {
                let a = phi_apply(map, i, pair[0]).unwrap();
                let b = phi_apply(map, i, pair[1]).unwrap();
                lambda = lambda.max(hyperbolic_distance(a, b) / d0);
            }
        }
        assert!(lambda < 1.0, "no uniform hyperbolic contraction: {lambda}");
    }

    #[test]
    fn bounded_distortion() {
        let map = solved();
        let za = Complex64::new(0.3, 0.8);
        let zb = Complex64::new(0.7, 1.4);
        let mut kmax: f64 = 1.0;
        // all words of length up to 6, then a random batch of length 8
        let mut words: Vec<Vec<u32>> = Vec::new();
        for len in 1..=6u32 {
            let total = 3usize.pow(len);
            for idx in 0..total {
                let mut w = Vec::with_capacity(len as usize);
                let mut v = idx;
                for _ in 0..len {
                    w.push((v % 3) as u32 + 1);
                    v /= 3;
                }
                words.push(w);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        for _ in 0..120 {
            words.push((0..8).map(|_| rng.gen_range(1..=3)).collect());
        }
        for syms in words {
            let w = SymbolWord::finite(syms);
            let da = word_derivative_mag(map, &w, za).unwrap();
            let db = word_derivative_mag(map, &w, zb).unwrap();
            kmax = kmax.max(da / db).max(db / da);
        }
        assert!(kmax.is_finite() && kmax < 100.0, "distortion bound K = {kmax}");
    }

    #[test]
    fn limit_arc_structure() {
        let map = solved();
        let aa = -map.alpha;
        let c = c_point(map);
        let arc = limit_curve(map, 4).unwrap();
        assert_eq!(arc.len(), 3usize.pow(4) + 1);
        assert!((arc.first().unwrap() - c / aa).norm() < 1e-9);
        assert!((arc.last().unwrap() - c).norm() < 1e-9);

        // junction identity a2 = phi_1(a4) = phi_2(a1)
        let a2_by_1 = phi_apply(map, 1, c).unwrap();
        let a2_by_2 = phi_apply(map, 2, c / aa).unwrap();
        assert!((a2_by_1 - a2_by_2).norm() < 1e-9, "a2 mismatch");
        assert!(arc.distance_to(a2_by_1) < 1e-9);

        // addresses are lexicographically monotone
        let addr = arc.addresses.as_ref().unwrap();
        for w in addr.windows(2) {
            assert!(w[0] <= w[1]);
        }

        assert_eq!(arc.self_intersections(), 0, "junction polyline crosses itself");
        let fine = limit_curve_refined(map, 4, 40).unwrap();
        assert_eq!(fine.len(), 40 * 81 + 1);
        assert_eq!(fine.self_intersections(), 0, "refined polyline crosses itself");
    }

    #[test]
    fn l_is_rescaling_invariant() {
        let map = solved();
        let aa = -map.alpha;
        let l = curve_L(map, 6, -2, 3).unwrap();
        let shifted = curve_L(map, 6, -1, 4).unwrap();
        let scaled = l.scale(Complex64::new(aa, 0.0));
        let d = hausdorff_distance(&scaled, &shifted);
        assert!(
            d <= 2.0 * shifted.mesh(),
            "|alpha| L differs from L on the common window by {d}"
        );
        for p in &l.points {
            let arg = p.arg();
            assert!(
                arg > 0.0 && arg < std::f64::consts::PI / map.r as f64,
                "vertex {p} left the sector"
            );
        }
    }

    #[test]
    fn g_maps_l0_onto_conjugate_tail() {
        let map = solved();
        let policy = ContinuationPolicy {
            max_depth: 40,
            tol: 1e-9,
        };
        let arc = limit_curve(map, 7).unwrap();
        let tail = curve_L(map, 7, 1, 10).unwrap().conj();
        let mesh_i = arc.mesh();
        let aa = -map.alpha;
        let covered = 0.5 * tail.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let mut checked = 0;
        for &z in arc.points.iter().skip(1).take(arc.len() - 2) {
            let img = eval_g(map, z, &policy).unwrap();
            if img.norm() > covered {
                continue; // g blows up at c; the truncated tail ends sooner
            }
            checked += 1;
            let d = tail.distance_to(img);
            // the comparison polyline coarsens by |alpha| per scale
            let local = mesh_i * (img.norm() / arc.points[0].norm()).max(1.0) * aa;
            assert!(d <= 3.0 * local, "g({z}) = {img} misses the conjugate tail by {d}");
        }
        assert!(checked > arc.len() / 2, "too few images inside the window");
    }

    #[test]
    fn points_escape_the_omega0_proxy() {
        let map = solved();
        let policy = ContinuationPolicy {
            max_depth: 32,
            tol: 1e-9,
        };
        let aa = -map.alpha;
        let radius = aa * aa;
        let arc = limit_curve(map, 5).unwrap();
        let mut slow = 0usize;
        let mut total = 0usize;
        for n in 0..=3i32 {
            let budget = 2usize.pow(n as u32 + 1);
            for &z0 in arc.points.iter().step_by(9) {
                let mut z = z0 / Complex64::new(aa.powi(n), 0.0);
                total += 1;
                let mut escaped = false;
                for _ in 0..budget + 1 {
                    if z.norm() > radius {
                        escaped = true;
                        break;
                    }
                    match eval_g(map, z, &policy) {
                        Ok(w) => z = w,
                        Err(_) => {
                            escaped = true; // left every trust region: certainly outside
                            break;
                        }
                    }
                }
                if !escaped {
                    slow += 1;
                }
            }
        }
        let frac = 1.0 - slow as f64 / total as f64;
        assert!(
            frac >= 0.9,
            "only {:.1}% of sampled L_n points escaped on schedule",
            100.0 * frac
        );
    }
}
