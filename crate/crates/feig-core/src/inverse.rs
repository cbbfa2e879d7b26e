//! The inverse branch u of g pinned by u(1) = 0, u(1/alpha) = 1, the
//! antiholomorphic maps u* and chi, the singular point c, and the boundary
//! arcs tau_n of the Jordan domain omega = u*(H+).
//!
//! Everything reduces to solving F(v) = z in the v = w^r plane: F is
//! well-conditioned at v = 0 (F'(0) = c_1 != 0), so the branch point of u
//! at z = 1 costs nothing, and the sector branch of u is recovered as
//! w = v^(1/r) with arg v in [0, pi].

use num_complex::Complex64;

use crate::error::{FeigError, Result};
use crate::geometry::{refine_arc, CurveApprox};
use crate::map::{find_x0, FeigenbaumMap};

/// Fixed point of chi, where g blows up.
#[derive(Debug, Clone, Copy)]
pub struct SingularPoint {
    pub c: Complex64,
    pub iterations: usize,
    pub defect: f64,
}

/// Boundary data of omega: the arcs tau_0..tau_n and the real contact
/// segment [0, |alpha| x0].
#[derive(Debug, Clone)]
pub struct OmegaBoundary {
    pub tau: Vec<CurveApprox>,
    pub real_segment: (f64, f64),
}

/// Beyond this modulus u is evaluated through its functional equation;
/// inside it the direct Newton solve stays within the series trust disc.
const REDUCE_AT: f64 = 2.45;

fn f_value(map: &FeigenbaumMap, v: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in map.coeffs.iter().rev() {
        acc = (acc + c) * v;
    }
    acc + 1.0
}

fn f_prime(map: &FeigenbaumMap, v: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &c) in map.coeffs.iter().enumerate().rev() {
        acc = acc * v + c * (k + 1) as f64;
    }
    acc
}

/// Newton for F(v) = z from a given seed. Returns None on stagnation or
/// when the iterate leaves the closed upper half plane (branch loss).
fn newton_f(map: &FeigenbaumMap, z: Complex64, seed: Complex64) -> Option<Complex64> {
    let scale = z.norm().max(1.0);
    let mut v = seed;
    for _ in 0..40 {
        let res = f_value(map, v) - z;
        if res.norm() <= 1e-14 * scale {
            return Some(v);
        }
        let dv = res / f_prime(map, v);
        v -= dv;
        if v.im < -1e-9 * (1.0 + v.norm()) {
            return None;
        }
        if !v.re.is_finite() || !v.im.is_finite() {
            return None;
        }
    }
    if (f_value(map, v) - z).norm() <= 1e-12 * scale {
        Some(v)
    } else {
        None
    }
}

/// Solve F(v) = z with the branch pinned by continuation along the
/// straight path from 1 to z (which stays in the closed half plane).
fn continue_from_one(map: &FeigenbaumMap, z: Complex64) -> Result<Complex64> {
    let c1 = map.coeffs[0];
    let mut steps = 8usize;
    loop {
        let mut v = Complex64::new(0.0, 0.0);
        let mut ok = true;
        for i in 1..=steps {
            let t = i as f64 / steps as f64;
            let zt = Complex64::new(1.0, 0.0) + t * (z - 1.0);
            let seed = if i == 1 { (zt - 1.0) / c1 } else { v };
            match newton_f(map, zt, seed) {
                Some(vn) => v = vn,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            // clamp the boundary: the correct branch has v in closed H+
            if v.im < 0.0 {
                v.im = 0.0;
            }
            return Ok(v);
        }
        steps *= 4;
        if steps > 2048 {
            return Err(FeigError::BranchLoss(format!(
                "u continuation from 1 to {z} lost the sector branch"
            )));
        }
    }
}

/// r-th root mapping the closed upper half v-plane onto the sector
/// arg in [0, pi/r]; the boundary ray arg v = pi (not -pi) is enforced.
fn sector_root(v: Complex64, r: u32) -> Complex64 {
    if v.norm() == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut arg = v.arg();
    if arg < -0.5 {
        arg += 2.0 * std::f64::consts::PI;
    }
    arg = arg.clamp(0.0, std::f64::consts::PI);
    Complex64::from_polar(v.norm().powf(1.0 / r as f64), arg / r as f64)
}

/// u and u' on the closed lower half plane; real arguments are the
/// boundary limits from below (equivalently: u* limits on the real axis).
fn u_lower(map: &FeigenbaumMap, z: Complex64, depth: u32) -> Result<(Complex64, Complex64)> {
    if depth == 0 {
        return Err(FeigError::NonConvergence(format!(
            "functional-equation reduction for u did not terminate at {z}"
        )));
    }
    if z.norm() > REDUCE_AT {
        // u(z) = |alpha| u(u(z/alpha)); z/alpha is in closed H+, and
        // u there follows by the conjugation symmetry of u.
        let a = (z / map.alpha).conj();
        let (wa, wpa) = u_lower(map, a, depth - 1)?;
        let (w, wp) = u_lower(map, wa.conj(), depth - 1)?;
        // d/dz of conj(u(conj(z/alpha))) is conj(u'(conj(z/alpha)))/alpha
        return Ok((-map.alpha * w, -wp * wpa.conj()));
    }
    let v = continue_from_one(map, z)?;
    let w = sector_root(v, map.r);
    let gp = f_prime(map, v) * map.r as f64 * w.powi(map.r as i32 - 1);
    Ok((w, 1.0 / gp))
}

/// u(z) for z in H+ or H- or real z in [alpha, 1]; the slit plane of
/// Fact 1. Values on H- land in the sector Pi.
pub fn u_eval(map: &FeigenbaumMap, z: Complex64) -> Result<Complex64> {
    Ok(u_eval_with_prime(map, z)?.0)
}

/// u together with its complex derivative (holomorphic on each half
/// plane). The derivative blows up at the branch point z = 1.
pub fn u_eval_with_prime(map: &FeigenbaumMap, z: Complex64) -> Result<(Complex64, Complex64)> {
    if z.im > 0.0 {
        let (w, wp) = u_lower(map, z.conj(), 64)?;
        return Ok((w.conj(), wp.conj()));
    }
    if z.im == 0.0 && !(map.alpha..=1.0).contains(&z.re) {
        return Err(FeigError::OutOfDomain(format!(
            "u is single-valued only off the slits: z = {} is real outside [alpha, 1]",
            z.re
        )));
    }
    u_lower(map, z, 64)
}

/// u*(z) = u(z*) on the closed upper half plane; on the real axis this is
/// the boundary limit from H- of u, which exists everywhere (Fact 3).
pub fn u_star_eval(map: &FeigenbaumMap, z: Complex64) -> Result<Complex64> {
    if z.im < 0.0 {
        return Err(FeigError::OutOfDomain(format!(
            "u* is defined on the closed upper half plane, got {z}"
        )));
    }
    Ok(u_lower(map, z.conj(), 64)?.0)
}

/// |u*'|(z) = |u'(z*)|, the derivative magnitude of the antiholomorphic
/// map u*.
pub fn u_star_prime_mag(map: &FeigenbaumMap, z: Complex64) -> Result<f64> {
    Ok(u_lower(map, z.conj(), 64)?.1.norm())
}

/// chi(z) = |alpha| u*(z), an antiholomorphic self-map of H+.
pub fn chi_eval(map: &FeigenbaumMap, z: Complex64) -> Result<Complex64> {
    Ok(-map.alpha * u_star_eval(map, z)?)
}

/// The singular point c: unique attracting fixed point of chi, found by
/// plain iteration from i (global attraction, Fact 2).
pub fn find_c(map: &FeigenbaumMap, tol: f64) -> Result<SingularPoint> {
    let mut z = Complex64::new(0.0, 1.0);
    for it in 1..=2000 {
        let zn = chi_eval(map, z)?;
        let step = (zn - z).norm();
        z = zn;
        if step <= 0.5 * tol {
            let defect = (chi_eval(map, z)? - z).norm();
            if defect <= tol {
                return Ok(SingularPoint {
                    c: z,
                    iterations: it,
                    defect,
                });
            }
        }
    }
    Err(FeigError::NonConvergence(format!(
        "chi iteration did not reach defect {tol:.1e}"
    )))
}

/// Hyperbolic distance in H+ (used for the contraction checks).
pub fn hyperbolic_distance(a: Complex64, b: Complex64) -> f64 {
    let t = 1.0 + (a - b).norm_sqr() / (2.0 * a.im * b.im);
    (t + (t * t - 1.0).sqrt()).ln()
}

/// Boundary arcs tau_0..tau_n of omega, each adaptively refined, plus the
/// real contact segment [0, |alpha| x0].
///
/// tau_0 = u*([1, alpha^2]) is the straight piece on the ray e^{i pi/r};
/// each further arc is the chi-image of the previous one:
/// tau_{k+1} = chi(tau_k).
pub fn omega_boundary(map: &FeigenbaumMap, n: usize, pts_per_arc: usize) -> Result<OmegaBoundary> {
    if n < 1 || pts_per_arc < 8 {
        return Err(FeigError::InsufficientData(
            "need n >= 1 arcs and >= 8 points per arc".into(),
        ));
    }
    let x0 = find_x0(map)?;
    let a2 = map.alpha * map.alpha;

    // cosine-clustered parameter grid: the joint endpoints are where the
    // angle checks happen, so resolution is concentrated there
    let grid: Vec<f64> = (0..=pts_per_arc)
        .map(|i| {
            let t = i as f64 / pts_per_arc as f64;
            0.5 - 0.5 * (std::f64::consts::PI * t).cos()
        })
        .collect();

    let tau0_pts = grid
        .iter()
        .map(|&t| u_star_eval(map, Complex64::new(1.0 + t * (a2 - 1.0), 0.0)))
        .collect::<Result<Vec<_>>>()?;
    let mut tau: Vec<CurveApprox> = vec![CurveApprox::open(tau0_pts)];

    for _ in 0..n {
        let prev = tau.last().unwrap();
        let pts = prev.points.clone();
        // chi of a polyline, re-refined between consecutive images so that
        // curvature introduced by chi is resolved
        let f = |t: f64| {
            let idx = (t * (pts.len() - 1) as f64).floor() as usize;
            let idx = idx.min(pts.len() - 2);
            let frac = t * (pts.len() - 1) as f64 - idx as f64;
            let z = pts[idx] + frac * (pts[idx + 1] - pts[idx]);
            chi_eval(map, z).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        };
        let refined = refine_arc(&f, 0.0, 1.0, 1e-4, 1e-12, 12);
        if refined.iter().any(|p| !p.re.is_finite()) {
            return Err(FeigError::NonConvergence(
                "chi image of a tau arc failed to evaluate".into(),
            ));
        }
        tau.push(CurveApprox::open(refined));
    }
    Ok(OmegaBoundary {
        tau,
        real_segment: (0.0, -map.alpha * x0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::solve_feigenbaum;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solved() -> FeigenbaumMap {
        solve_feigenbaum(2, 40, 1e-12).expect("solver")
    }

    #[test]
    fn pins_the_branch() {
        let map = solved();
        let u1 = u_eval(&map, Complex64::new(1.0, 0.0)).unwrap();
        assert!(u1.norm() < 1e-12, "u(1) = {u1}");
        let ua = u_eval(&map, Complex64::new(1.0 / map.alpha, 0.0)).unwrap();
        assert!((ua - 1.0).norm() < 1e-12, "u(1/alpha) = {ua}");
    }

    #[test]
    fn round_trip_and_sector() {
        let map = solved();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let z = Complex64::new(rng.gen_range(-2.2..2.2), -rng.gen_range(0.01..2.0));
            let w = u_eval(&map, z).unwrap();
            // u(H-) is inside the sector Pi
            assert!(w.arg() > 0.0 && w.arg() < std::f64::consts::FRAC_PI_2, "u({z}) = {w}");
            let back = map.g_series(w);
            assert!((back - z).norm() < 1e-10, "g(u({z})) = {back}");
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let map = solved();
        let z = Complex64::new(0.7, 0.9);
        let a = u_eval(&map, z).unwrap();
        let b = u_eval(&map, z.conj()).unwrap();
        assert!((a.conj() - b).norm() < 1e-13);
    }

    #[test]
    fn functional_equation_inside_direct_region() {
        let map = solved();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            // samples kept inside the direct-Newton region so the check is
            // independent of the reduction that uses this very equation
            let re = rng.gen_range(-2.3..2.3);
            let im = rng.gen_range(0.05..1.8) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let z = Complex64::new(re, im);
            if z.norm() > 2.4 {
                continue;
            }
            let lhs = u_eval(&map, z).unwrap();
            let inner = u_eval(&map, z / map.alpha).unwrap();
            let rhs = -map.alpha * u_eval(&map, inner).unwrap();
            worst = worst.max((lhs - rhs).norm());
        }
        assert!(worst < 1e-8, "u-equation residual {worst}");
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let map = solved();
        let z = Complex64::new(-0.8, -0.6);
        let (_, up) = u_eval_with_prime(&map, z).unwrap();
        let h = 1e-6;
        let fd = (u_eval(&map, z + h).unwrap() - u_eval(&map, z - h).unwrap()) / (2.0 * h);
        assert!((up - fd).norm() < 1e-7, "u' = {up}, fd = {fd}");
    }

    #[test]
    fn rejects_slit_points() {
        let map = solved();
        assert!(u_eval(&map, Complex64::new(3.0, 0.0)).is_err());
        assert!(u_eval(&map, Complex64::new(-4.0, 0.0)).is_err());
        assert!(u_star_eval(&map, Complex64::new(0.3, -0.2)).is_err());
    }

    #[test]
    fn chi_conjugates_the_rescaling() {
        let map = solved();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..30 {
            let z = Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(0.05..1.5));
            let us = u_star_eval(&map, z).unwrap();
            // chi(u*(z)) = u*(alpha z*)
            let lhs = chi_eval(&map, us).unwrap();
            let rhs = u_star_eval(&map, map.alpha * z.conj()).unwrap();
            assert!((lhs - rhs).norm() < 1e-10, "conj identity at {z}");
            // chi^2(u*(z)) = u*(alpha^2 z)
            let lhs2 = chi_eval(&map, lhs).unwrap();
            let rhs2 = u_star_eval(&map, map.alpha * map.alpha * z).unwrap();
            assert!((lhs2 - rhs2).norm() < 1e-10, "conj2 identity at {z}");
        }
    }

    #[test]
    fn chi_contracts_hyperbolically() {
        let map = solved();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..20 {
            let a = Complex64::new(rng.gen_range(-1.0..1.5), rng.gen_range(0.1..1.5));
            let b = Complex64::new(rng.gen_range(-1.0..1.5), rng.gen_range(0.1..1.5));
            if (a - b).norm() < 1e-3 {
                continue;
            }
            let ca = chi_eval(&map, a).unwrap();
            let cb = chi_eval(&map, b).unwrap();
            assert!(hyperbolic_distance(ca, cb) < hyperbolic_distance(a, b));
        }
    }

    #[test]
    fn singular_point() {
        let map = solved();
        let sp = find_c(&map, 1e-11).unwrap();
        assert!(sp.defect <= 1e-11);
        let arg = sp.c.arg();
        assert!(arg > 0.0 && arg < std::f64::consts::FRAC_PI_2, "c = {}", sp.c);
        // fixed for chi^2 as well
        let c2 = chi_eval(&map, chi_eval(&map, sp.c).unwrap()).unwrap();
        assert!((c2 - sp.c).norm() < 2e-11);
    }

    #[test]
    fn tau_arcs() {
        let map = solved();
        let ob = omega_boundary(&map, 7, 64).unwrap();
        // tau_0 on the ray e^{i pi/2} R+ starting at 0
        let t0 = &ob.tau[0];
        assert!(t0.first().unwrap().norm() < 1e-12);
        for &p in &t0.points {
            assert!(p.re.abs() < 1e-10, "tau_0 point off the ray: {p}");
        }
        // chained by chi
        let sp = find_c(&map, 1e-11).unwrap();
        for k in 0..ob.tau.len() - 1 {
            let mid = ob.tau[k].points[ob.tau[k].len() / 2];
            let img = chi_eval(&map, mid).unwrap();
            assert!(
                ob.tau[k + 1].distance_to(img) < 1e-4,
                "chi(tau_{k}) misses tau_{}",
                k + 1
            );
        }
        // diameters decay toward c
        let d4 = ob.tau[4].diameter();
        let d6 = ob.tau[6].diameter();
        assert!(d6 < d4);
        let far = ob.tau.last().unwrap().last().unwrap();
        assert!((far - sp.c).norm() < 0.1 * ob.tau[2].diameter() + 1e-6);
    }

    #[test]
    fn tau_meeting_angles() {
        let map = solved();
        let ob = omega_boundary(&map, 7, 128).unwrap();
        for n in 0..=4usize {
            let a = &ob.tau[n];
            let b = &ob.tau[n + 2];
            // tau_n ends where tau_{n+2} begins
            let joint = a.last().unwrap();
            assert!(
                (joint - b.first().unwrap()).norm() < 1e-6,
                "tau_{n} and tau_{} do not share an endpoint",
                n + 2
            );
            let da = a.points[a.len() - 2] - joint;
            let db = b.points[1] - joint;
            let mut angle = (db.arg() - da.arg()).abs();
            if angle > std::f64::consts::PI {
                angle = 2.0 * std::f64::consts::PI - angle;
            }
            assert!(
                (angle - std::f64::consts::FRAC_PI_2).abs() < 1e-2,
                "angle between tau_{n} and tau_{} is {angle}",
                n + 2
            );
        }
    }
}
