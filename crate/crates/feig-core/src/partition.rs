//! The Markov partition: depth-0 sectors bounded by rotations of L and
//! L*, their g-preimage pieces, the two-map "machine" on the triangle
//! Delta that generates all pieces attached to (0, x0), veins, external
//! rays, and the tiling of a neighborhood of the critical point.

use num_complex::Complex64;

use crate::error::{FeigError, Result};
use crate::geometry::{linear_fit, CurveApprox};
use crate::ifs::{curve_L, limit_curve};
use crate::inverse::{find_c, u_star_eval};
use crate::map::{eval_g, eval_g_prime, find_x0, ContinuationPolicy, FeigenbaumMap};

/// How a piece was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum GenRecord {
    /// Depth-0 sector R_{0,j} (or its conjugate).
    Sector { j: u32, conj: bool },
    /// Machine word applied to the seed R2 = R~1/|alpha|, left symbol
    /// applied first; then scaled by |alpha|^scale, rotated by
    /// e^{2 pi i rot / r} and optionally conjugated (M^ext bookkeeping).
    Machine {
        word: Vec<MachineMap>,
        scale: i32,
        rot: u32,
        conj: bool,
    },
    /// Branch-tracked pullback of another piece.
    Pullback { parent: String, branch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MachineMap {
    /// z -> z / |alpha|
    A,
    /// z -> u*(z)
    B,
}

impl GenRecord {
    pub fn label(&self) -> String {
        match self {
            GenRecord::Sector { j, conj } => {
                format!("R0,{j}{}", if *conj { "*" } else { "" })
            }
            GenRecord::Machine {
                word,
                scale,
                rot,
                conj,
            } => {
                let mut s = String::new();
                // composition order: last applied symbol printed first
                for m in word.iter().rev() {
                    s.push(match m {
                        MachineMap::A => 'A',
                        MachineMap::B => 'B',
                    });
                }
                let mut out = format!("{s}(R2)");
                if *scale != 0 {
                    out.push_str(&format!("a^{scale}"));
                }
                if *rot != 0 {
                    out.push_str(&format!("rot{rot}"));
                }
                if *conj {
                    out.push('*');
                }
                out
            }
            GenRecord::Pullback { parent, branch } => format!("g^-1[{branch}]({parent})"),
        }
    }
}

/// A Markov-partition piece represented by its closed boundary polyline
/// and its two base points.
#[derive(Debug, Clone)]
pub struct Piece {
    pub depth: usize,
    pub gen: GenRecord,
    pub boundary: CurveApprox,
    pub x_r: Complex64,
    /// The infinity-side base point; for unbounded depth-0 sectors this
    /// holds the sector's ray direction instead (see `inf_is_direction`).
    pub x_r_inf: Complex64,
    pub inf_is_direction: bool,
    pub level: usize,
}

impl Piece {
    pub fn diam(&self) -> f64 {
        self.boundary.diameter()
    }

    /// Polygon area by the shoelace rule.
    pub fn area(&self) -> f64 {
        let pts = &self.boundary.points;
        let n = pts.len();
        let mut a = 0.0;
        for i in 0..n {
            let p = pts[i];
            let q = pts[(i + 1) % n];
            a += p.re * q.im - q.re * p.im;
        }
        0.5 * a.abs()
    }

    pub fn contains(&self, p: Complex64, tube: f64) -> bool {
        self.boundary.contains(p, tube)
    }

    pub fn contains_interior(&self, p: Complex64, tube: f64) -> bool {
        self.boundary.contains_interior(p, tube)
    }

    /// Apply z -> s*z (+ optional conjugation) to boundary and base data.
    pub fn transformed(&self, s: Complex64, conj: bool, gen: GenRecord, depth: usize) -> Piece {
        let f = |z: Complex64| if conj { (s * z).conj() } else { s * z };
        Piece {
            depth,
            gen,
            boundary: self.boundary.map(f),
            x_r: f(self.x_r),
            x_r_inf: if self.inf_is_direction {
                let d = f(self.x_r_inf);
                d / d.norm()
            } else {
                f(self.x_r_inf)
            },
            inf_is_direction: self.inf_is_direction,
            level: 0,
        }
    }
}

/// The vein of a piece: the analytic arc joining its base points whose
/// forward image is a straight ray.
#[derive(Debug, Clone)]
pub struct Vein {
    pub arc: CurveApprox,
    pub length: f64,
}

/// An external-ray approximation: a chain of boundary arcs from the
/// target point out to the edge of the generated scale window.
#[derive(Debug, Clone)]
pub struct RayPath {
    pub target: Complex64,
    pub arcs: Vec<CurveApprox>,
    pub truncation_depth: i32,
}

impl RayPath {
    pub fn flattened(&self) -> CurveApprox {
        let mut out = CurveApprox::open(vec![]);
        for a in &self.arcs {
            if out.is_empty() {
                out = a.clone();
                out.addresses = None;
            } else {
                let join = 1e-6 * (1.0 + a.diameter());
                out.extend_with(a, join);
            }
        }
        out
    }
}

/// The triangle Delta, its u* image Delta_0, the seed piece R2 and the
/// boundary arcs of Section 3 used to run the machine.
#[derive(Debug, Clone)]
pub struct MachineDomain {
    pub delta: CurveApprox,
    pub delta0: CurveApprox,
    pub seed: Piece,
    /// gamma^+ and gamma^-: the two sides of R~1 from x0 to c.
    pub gamma_plus: CurveApprox,
    pub gamma_minus: CurveApprox,
    /// gamma_1^-: the part of gamma^- between x0 and c/|alpha|.
    pub gamma_minus_1: CurveApprox,
    /// beta1 = u*(L0), from u*(c/|alpha|) to c/|alpha|.
    pub beta1: CurveApprox,
    /// beta2 = gamma_1^- \ beta1, from x0 to u*(c/|alpha|).
    pub beta2: CurveApprox,
    /// The vein of R~1: u* of the sector ray, from x0 to c.
    pub vein_r1: CurveApprox,
}

const L_DEPTH: u32 = 5;
const L_LO: i32 = -9;
const L_HI: i32 = 13;

fn alpha_abs(map: &FeigenbaumMap) -> f64 {
    -map.alpha
}

fn policy() -> ContinuationPolicy {
    ContinuationPolicy {
        max_depth: 40,
        tol: 1e-9,
    }
}

/// Keep roughly `target` points of a polyline, preserving endpoints.
fn decimate(pts: &[Complex64], target: usize) -> Vec<Complex64> {
    if pts.len() <= target || target < 3 {
        return pts.to_vec();
    }
    let stride = pts.len() / target;
    let mut out: Vec<Complex64> = pts.iter().step_by(stride.max(1)).copied().collect();
    if (out.last().unwrap() - pts.last().unwrap()).norm() > 0.0 {
        out.push(*pts.last().unwrap());
    }
    out
}

fn u_star_polyline(map: &FeigenbaumMap, pts: &[Complex64]) -> Result<Vec<Complex64>> {
    pts.iter().map(|&p| u_star_eval(map, p)).collect()
}

/// u* of a window of L, ordered from the 0-end (image near x0) to the
/// far end (image near c); endpoints x0 and c are appended exactly.
fn gamma_arc(map: &FeigenbaumMap, source: &[Complex64]) -> Result<Vec<Complex64>> {
    let x0 = find_x0(map)?;
    let c = find_c(map, 1e-12)?.c;
    let mut pts = vec![Complex64::new(x0, 0.0)];
    for &p in source {
        pts.push(u_star_eval(map, p)?);
    }
    pts.push(c);
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-13);
    Ok(pts)
}

/// Build the machine domain of Section 3.
pub fn machine_domain(map: &FeigenbaumMap) -> Result<MachineDomain> {
    let aa = alpha_abs(map);
    let x0 = find_x0(map)?;
    let c = find_c(map, 1e-12)?.c;

    // windows of L at consecutive scales; kept per-scale so that the
    // sub-arcs beta1/beta2/gamma_1^- can be split exactly at junctions
    let arc_i = limit_curve(map, L_DEPTH)?;
    let scale_pts = |n: i32| -> Vec<Complex64> {
        decimate(&arc_i.points, 64)
            .iter()
            .map(|&p| p * aa.powi(n))
            .collect()
    };
    let mut l_window: Vec<Complex64> = Vec::new();
    for n in L_LO..=L_HI {
        let pts = scale_pts(n);
        let skip = usize::from(n > L_LO);
        l_window.extend_from_slice(&pts[skip..]);
    }

    let gamma_minus = CurveApprox::open(gamma_arc(map, &l_window)?);
    let minus_l_star: Vec<Complex64> = l_window.iter().map(|p| -p.conj()).collect();
    let gamma_plus = CurveApprox::open(gamma_arc(map, &minus_l_star)?);

    // gamma_1^- = u*(L up to scale 0) from x0 to c/|alpha|; beta1 is the
    // u* image of the scale-0 copy (u*(L0)), beta2 the rest
    let mut beta2_pts = vec![Complex64::new(x0, 0.0)];
    for n in L_LO..0 {
        let pts = scale_pts(n);
        let skip = usize::from(n > L_LO);
        beta2_pts.extend(u_star_polyline(map, &pts[skip..])?);
    }
    let beta1_pts = u_star_polyline(map, &scale_pts(0))?;
    let mut beta1_pts = beta1_pts;
    beta1_pts.push(c / aa);
    let beta1 = CurveApprox::open(beta1_pts);
    let beta2 = CurveApprox::open(beta2_pts);
    let mut g1_pts = beta2.points.clone();
    g1_pts.extend_from_slice(&beta1.points);
    g1_pts.dedup_by(|a, b| (*a - *b).norm() < 1e-13);
    let gamma_minus_1 = CurveApprox::open(g1_pts);

    // Delta: (0, x0) on the real line, gamma_1^- from x0 to c/|alpha|,
    // then the arc of L from c/|alpha| back down to 0
    let mut delta_pts: Vec<Complex64> = (0..=48)
        .map(|i| Complex64::new(x0 * i as f64 / 48.0, 0.0))
        .collect();
    delta_pts.extend_from_slice(&gamma_minus_1.points[1..]);
    for n in (L_LO..0).rev() {
        let pts = scale_pts(n);
        for p in pts.iter().rev().skip(1) {
            delta_pts.push(*p);
        }
    }
    delta_pts.dedup_by(|a, b| (*a - *b).norm() < 1e-13);
    if let Some(&last) = delta_pts.last() {
        if last.norm() < 1e-9 {
            delta_pts.pop();
        }
    }
    let delta = CurveApprox::closed(delta_pts);
    let delta0 = CurveApprox::closed(u_star_polyline(map, &delta.points)?);

    // seed piece R2 = R~1/|alpha|
    let mut r1_pts = gamma_minus.points.clone();
    for p in gamma_plus.points.iter().rev().skip(1) {
        if (*p - r1_pts[0]).norm() > 1e-13 {
            r1_pts.push(*p);
        }
    }
    let r1_boundary = CurveApprox::closed(decimate(&r1_pts, 700));
    let seed = Piece {
        depth: 2,
        gen: GenRecord::Machine {
            word: vec![],
            scale: 0,
            rot: 0,
            conj: false,
        },
        boundary: r1_boundary.scale(Complex64::new(1.0 / aa, 0.0)),
        x_r: Complex64::new(x0 / aa, 0.0),
        x_r_inf: c / aa,
        inf_is_direction: false,
        level: 0,
    };

    // vein of R~1: u* of the straight ray of R0 (the positive imaginary
    // ray for r = 2; e^{i pi/r} R+ in general)
    let dir = Complex64::from_polar(1.0, std::f64::consts::PI / map.r as f64);
    let mut vein_pts = vec![Complex64::new(x0, 0.0)];
    let mut t = 1e-4;
    while t < 3.0e5 {
        vein_pts.push(u_star_eval(map, dir * t)?);
        t *= 1.35;
    }
    vein_pts.push(c);
    let vein_r1 = CurveApprox::open(vein_pts);

    Ok(MachineDomain {
        delta,
        delta0,
        seed,
        gamma_plus,
        gamma_minus,
        gamma_minus_1,
        beta1,
        beta2,
        vein_r1,
    })
}

/// The depth-1 piece R~1 = u*(R0) (boundary gamma^- then gamma^+).
pub fn depth1_piece(map: &FeigenbaumMap, dom: &MachineDomain) -> Piece {
    let aa = alpha_abs(map);
    Piece {
        depth: 1,
        gen: GenRecord::Machine {
            word: vec![],
            scale: 1,
            rot: 0,
            conj: false,
        },
        boundary: dom.seed.boundary.scale(Complex64::new(aa, 0.0)),
        x_r: dom.seed.x_r * aa,
        x_r_inf: dom.seed.x_r_inf * aa,
        inf_is_direction: false,
        level: 1,
    }
}

/// The 2(r-1) depth-0 sectors, truncated to the scale window of the
/// generated curve L.
pub fn depth0_sectors(map: &FeigenbaumMap) -> Result<Vec<Piece>> {
    let r = map.r;
    let aa = alpha_abs(map);
    let arc_i = limit_curve(map, L_DEPTH)?;
    let base = decimate(&arc_i.points, 64);
    let mut l_window: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];
    for n in L_LO..=L_HI {
        let skip = usize::from(n > L_LO);
        for &p in base.iter().skip(skip) {
            l_window.push(p * aa.powi(n));
        }
    }

    // the 2r boundary curves: rotations of L and of L* covering the
    // angular slots (k pi/r, (k+1) pi/r)
    let slot_curve = |k: i64| -> Vec<Complex64> {
        let k = k.rem_euclid(2 * r as i64);
        if k % 2 == 0 {
            let rot = Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / r as f64);
            l_window.iter().map(|&p| rot * p).collect()
        } else {
            let rot = Complex64::from_polar(1.0, std::f64::consts::PI * (k + 1) as f64 / r as f64);
            l_window.iter().map(|&p| rot * p.conj()).collect()
        }
    };

    let mut out = Vec::new();
    for conj in [false, true] {
        for j in 1..r {
            // sector between the curves in slots j-1 and j (conjugated
            // sectors mirror them)
            let below = slot_curve(j as i64 - 1);
            let above = slot_curve(j as i64);
            let mut pts = below.clone();
            // close at the far end with a circular arc
            let far_b = *below.last().unwrap();
            let far_a = *above.last().unwrap();
            let (th0, mut th1) = (far_b.arg(), far_a.arg());
            if th1 < th0 {
                th1 += 2.0 * std::f64::consts::PI;
            }
            let rad = far_b.norm();
            for i in 1..16 {
                let th = th0 + (th1 - th0) * i as f64 / 16.0;
                pts.push(Complex64::from_polar(rad, th));
            }
            for p in above.iter().rev() {
                pts.push(*p);
            }
            pts.dedup_by(|a, b| (*a - *b).norm() < 1e-13);
            if (pts[0] - *pts.last().unwrap()).norm() < 1e-13 {
                pts.pop();
            }
            let mut boundary = CurveApprox::closed(pts);
            let mut dir = Complex64::from_polar(1.0, std::f64::consts::PI * j as f64 / r as f64);
            if conj {
                boundary = boundary.conj();
                dir = dir.conj();
            }
            out.push(Piece {
                depth: 0,
                gen: GenRecord::Sector { j, conj },
                boundary,
                x_r: Complex64::new(0.0, 0.0),
                x_r_inf: dir,
                inf_is_direction: true,
                level: 0,
            });
        }
    }
    Ok(out)
}

/// Apply one machine map to a piece.
pub fn machine_apply(map: &FeigenbaumMap, m: MachineMap, piece: &Piece) -> Result<Piece> {
    let aa = alpha_abs(map);
    let (word, scale, rot, conj) = match &piece.gen {
        GenRecord::Machine {
            word,
            scale,
            rot,
            conj,
        } => (word.clone(), *scale, *rot, *conj),
        _ => {
            return Err(FeigError::OutOfDomain(
                "the machine acts on machine-generated pieces".into(),
            ))
        }
    };
    if scale != 0 || rot != 0 || conj {
        return Err(FeigError::OutOfDomain(
            "the machine acts on pieces inside Delta (no M^ext decoration)".into(),
        ));
    }
    let mut word = word;
    word.push(m);
    match m {
        MachineMap::A => Ok(Piece {
            depth: piece.depth * 2,
            gen: GenRecord::Machine {
                word,
                scale: 0,
                rot: 0,
                conj: false,
            },
            boundary: piece.boundary.scale(Complex64::new(1.0 / aa, 0.0)),
            x_r: piece.x_r / aa,
            x_r_inf: piece.x_r_inf / aa,
            inf_is_direction: false,
            level: 0,
        }),
        MachineMap::B => {
            let pts = u_star_polyline(map, &piece.boundary.points)?;
            Ok(Piece {
                depth: piece.depth + 1,
                gen: GenRecord::Machine {
                    word,
                    scale: 0,
                    rot: 0,
                    conj: false,
                },
                boundary: CurveApprox::closed(pts),
                x_r: u_star_eval(map, piece.x_r)?,
                x_r_inf: u_star_eval(map, piece.x_r_inf)?,
                inf_is_direction: false,
                level: 0,
            })
        }
    }
}

/// All machine pieces w(R2) for words of length <= max_word_len,
/// breadth-first (so the output order is deterministic).
pub fn machine_tile(map: &FeigenbaumMap, max_word_len: usize) -> Result<Vec<Piece>> {
    let dom = machine_domain(map)?;
    machine_tile_from(map, &dom, max_word_len, usize::MAX)
}

/// Machine pieces from a prebuilt domain, stopping at `max_pieces`.
pub fn machine_tile_from(
    map: &FeigenbaumMap,
    dom: &MachineDomain,
    max_word_len: usize,
    max_pieces: usize,
) -> Result<Vec<Piece>> {
    let mut out = vec![dom.seed.clone()];
    let mut frontier = vec![dom.seed.clone()];
    for _ in 0..max_word_len {
        let mut next = Vec::new();
        for p in &frontier {
            for m in [MachineMap::A, MachineMap::B] {
                if out.len() + next.len() >= max_pieces {
                    break;
                }
                next.push(machine_apply(map, m, p)?);
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend(next.iter().cloned());
        frontier = next;
        if out.len() >= max_pieces {
            break;
        }
    }
    out.truncate(max_pieces);
    Ok(out)
}

/// Solve g(z) = w by a damped Newton iteration from `seed`.
fn newton_g(map: &FeigenbaumMap, w: Complex64, seed: Complex64) -> Result<Complex64> {
    let pol = policy();
    let mut z = seed;
    let mut best = (f64::INFINITY, seed);
    for _ in 0..60 {
        let val = eval_g(map, z, &pol)? - w;
        let r = val.norm();
        if r < best.0 {
            best = (r, z);
        }
        if r <= 1e-12 * (1.0 + w.norm()) {
            return Ok(z);
        }
        let dp = eval_g_prime(map, z, &pol)?;
        if dp.norm() < 1e-14 {
            break;
        }
        let mut step = val / dp;
        // keep steps local so the branch does not jump
        let cap = 0.25 * (1.0 + z.norm());
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        z -= step;
    }
    if best.0 <= 1e-9 * (1.0 + w.norm()) {
        return Ok(best.1);
    }
    Err(FeigError::NonConvergence(format!(
        "Newton for g(z) = {w} stalled at residual {:.2e}",
        best.0
    )))
}

/// Enumerate preimages of w under g inside the disc |z| <= rad, sorted
/// by argument then modulus (deterministic branch indexing).
pub fn preimages_of(map: &FeigenbaumMap, w: Complex64, rad: f64) -> Vec<Complex64> {
    let mut found: Vec<Complex64> = Vec::new();
    let n = 33;
    for i in 0..n {
        for j in 0..n {
            let seed = Complex64::new(
                -rad + 2.0 * rad * i as f64 / (n - 1) as f64,
                -rad + 2.0 * rad * j as f64 / (n - 1) as f64,
            );
            if let Ok(z) = newton_g(map, w, seed) {
                if z.norm() <= rad + 1e-9 && !found.iter().any(|&f| (f - z).norm() < 1e-7) {
                    found.push(z);
                }
            }
        }
    }
    found.sort_by(|a, b| {
        (a.arg(), a.norm())
            .partial_cmp(&(b.arg(), b.norm()))
            .unwrap()
    });
    found
}

/// March a preimage of the closed polyline `target` by continuation:
/// z follows g^{-1} along the polyline starting from `seed` over
/// target[0].
fn pull_polyline(map: &FeigenbaumMap, target: &[Complex64], seed: Complex64) -> Result<Vec<Complex64>> {
    let mut out = vec![seed];
    let mut z = seed;
    let n = target.len();
    for k in 0..n {
        let w0 = target[k];
        let w1 = target[(k + 1) % n];
        let mut steps = 1usize;
        'outer: loop {
            let mut zt = z;
            for s in 1..=steps {
                let w = w0 + (w1 - w0) * (s as f64 / steps as f64);
                match newton_g(map, w, zt) {
                    Ok(nz) => {
                        // a jump much larger than the target step means the
                        // continuation slipped onto another branch
                        let wstep = (w1 - w0).norm() / steps as f64;
                        if (nz - zt).norm() > 40.0 * (wstep + 1e-6) && steps < 256 {
                            steps *= 4;
                            continue 'outer;
                        }
                        zt = nz;
                    }
                    Err(_) if steps < 256 => {
                        steps *= 4;
                        continue 'outer;
                    }
                    Err(e) => return Err(e),
                }
            }
            z = zt;
            break;
        }
        out.push(z);
    }
    // closure check: the march must come back to the seed
    let diam = CurveApprox::open(out.clone()).diameter();
    if (out[0] - *out.last().unwrap()).norm() > 1e-5 * diam.max(1e-3) {
        return Err(FeigError::BranchLoss(format!(
            "pullback did not close up: gap {:.2e}",
            (out[0] - *out.last().unwrap()).norm()
        )));
    }
    out.pop();
    Ok(out)
}

/// Pull a piece back by one inverse branch of g. The branch indexes the
/// deterministically-ordered preimages of the piece's base point x_R.
pub fn pullback_piece(map: &FeigenbaumMap, piece: &Piece, branch: usize) -> Result<Piece> {
    if piece.depth == 0 {
        return pullback_sector(map, piece, branch);
    }
    let rad = 1.5 * alpha_abs(map);
    let pres = preimages_of(map, piece.x_r, rad);
    if branch >= pres.len() {
        return Err(FeigError::OutOfDomain(format!(
            "branch {branch} out of range: {} preimages of the base point",
            pres.len()
        )));
    }
    let x_new = pres[branch];

    // rotate the boundary so the march starts at the vertex nearest x_R
    // (the seed is a preimage of that point)
    let pts = &piece.boundary.points;
    let start = (0..pts.len())
        .min_by(|&a, &b| {
            (pts[a] - piece.x_r)
                .norm()
                .partial_cmp(&(pts[b] - piece.x_r).norm())
                .unwrap()
        })
        .unwrap();
    let rotated: Vec<Complex64> = (0..pts.len()).map(|i| pts[(start + i) % pts.len()]).collect();
    let seed = newton_g(map, rotated[0], x_new)?;
    let pulled = pull_polyline(map, &rotated, seed)?;

    // the new infinity-side base point is the marched preimage of the old
    let inf_idx = (0..rotated.len())
        .min_by(|&a, &b| {
            (rotated[a] - piece.x_r_inf)
                .norm()
                .partial_cmp(&(rotated[b] - piece.x_r_inf).norm())
                .unwrap()
        })
        .unwrap();
    Ok(Piece {
        depth: piece.depth + 1,
        gen: GenRecord::Pullback {
            parent: piece.gen.label(),
            branch,
        },
        boundary: CurveApprox::closed(pulled.clone()),
        x_r: x_new,
        x_r_inf: pulled[inf_idx.min(pulled.len() - 1)],
        inf_is_direction: false,
        level: 0,
    })
}

/// Depth-1 pieces directly through the inverse branch u*: the components
/// of g^{-1}(R0*) are +/- u*(R0) and those of g^{-1}(R0) their
/// conjugates (r = 2).
fn pullback_sector(map: &FeigenbaumMap, piece: &Piece, branch: usize) -> Result<Piece> {
    if map.r != 2 {
        return Err(FeigError::OutOfDomain(
            "sector pullback implemented for r = 2".into(),
        ));
    }
    let (_j, par_conj) = match piece.gen {
        GenRecord::Sector { j, conj } => (j, conj),
        _ => unreachable!(),
    };
    if branch >= 2 {
        return Err(FeigError::OutOfDomain(
            "a sector has two preimage components".into(),
        ));
    }
    let c = find_c(map, 1e-12)?.c;
    let x0 = find_x0(map)?;
    // g^{-1}(R0*) = +/- u*(R0): build u*(sector boundary); conjugate
    // parents give the conjugate children
    let src = if par_conj {
        piece.boundary.conj()
    } else {
        piece.boundary.clone()
    };
    let mut pts = Vec::with_capacity(src.len());
    for &p in &src.points {
        pts.push(u_star_eval(map, p)?);
    }
    let sign = if branch == 0 { 1.0 } else { -1.0 };
    let mut child = CurveApprox::closed(pts).scale(Complex64::new(sign, 0.0));
    let mut x_r = Complex64::new(sign * x0, 0.0);
    let mut x_inf = sign * c;
    // children of R0 are conjugates of children of R0*
    if !par_conj {
        child = child.conj();
        x_inf = x_inf.conj();
        x_r = x_r.conj();
    }
    Ok(Piece {
        depth: 1,
        gen: GenRecord::Pullback {
            parent: piece.gen.label(),
            branch,
        },
        boundary: child,
        x_r,
        x_r_inf: x_inf,
        inf_is_direction: false,
        level: 1,
    })
}

/// Scale a piece by 1/alpha (Theorem B (a): M_n -> M_2n).
pub fn rescale_piece(map: &FeigenbaumMap, piece: &Piece) -> Piece {
    let s = Complex64::new(1.0 / map.alpha, 0.0);
    let gen = match &piece.gen {
        GenRecord::Machine {
            word,
            scale,
            rot,
            conj,
        } => GenRecord::Machine {
            word: word.clone(),
            scale: scale - 1,
            rot: (rot + map.r / 2) % map.r,
            conj: *conj,
        },
        other => other.clone(),
    };
    piece.transformed(s, false, gen, piece.depth * 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    Disjoint,
    Nested,
    SharedArc,
    SharedBasePoint,
}

/// Classify a pair of pieces per Theorem B (b).
pub fn classify_pair(p1: &Piece, p2: &Piece) -> Result<PairClass> {
    let tube = 1e-6 * p1.diam().max(p2.diam());
    let contact = 4.0 * p1.boundary.mesh().max(p2.boundary.mesh());

    let inside = |outer: &Piece, inner: &Piece| {
        inner
            .boundary
            .points
            .iter()
            .all(|&p| outer.contains(p, contact))
    };
    if inside(p1, p2) || inside(p2, p1) {
        return Ok(PairClass::Nested);
    }

    // count boundary vertices of p1 close to p2's boundary
    let near: Vec<usize> = p1
        .boundary
        .points
        .iter()
        .enumerate()
        .filter(|(_, &p)| p2.boundary.distance_to(p) <= contact)
        .map(|(i, _)| i)
        .collect();
    if near.is_empty() {
        // no touching at polyline resolution: genuinely disjoint?
        let gap = p1
            .boundary
            .points
            .iter()
            .map(|&p| p2.boundary.distance_to(p))
            .fold(f64::INFINITY, f64::min);
        if gap > 2.0 * contact {
            return Ok(PairClass::Disjoint);
        }
        return Err(FeigError::Ambiguous(format!(
            "contact margin too small: gap {gap:.2e} vs contact {contact:.2e}"
        )));
    }
    // contact spread: a shared arc spans many consecutive vertices, a
    // shared base point only a few near x_R
    let span = {
        let pts = &p1.boundary.points;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &i in &near {
            let d = (pts[i] - p1.x_r).norm();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    };
    let base_touch = (p1.x_r - p2.x_r).norm() <= contact;
    if base_touch && span.1 <= 0.05 * p1.diam().max(tube) {
        return Ok(PairClass::SharedBasePoint);
    }
    Ok(PairClass::SharedArc)
}

/// The vein of a piece: replay its generation record on the seed vein.
pub fn compute_vein(map: &FeigenbaumMap, piece: &Piece) -> Result<Vein> {
    let aa = alpha_abs(map);
    let arc = match &piece.gen {
        GenRecord::Sector { j, conj } => {
            // the straight ray of the sector, truncated to the window
            let dir = Complex64::from_polar(1.0, std::f64::consts::PI * *j as f64 / map.r as f64);
            let dir = if *conj { dir.conj() } else { dir };
            let rad = piece.boundary.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
            let pts: Vec<Complex64> = (0..=64).map(|i| dir * (rad * i as f64 / 64.0)).collect();
            CurveApprox::open(pts)
        }
        GenRecord::Machine {
            word,
            scale,
            rot,
            conj,
        } => {
            let dom = machine_domain(map)?;
            let mut pts = dom.vein_r1.scale(Complex64::new(1.0 / aa, 0.0)).points;
            for m in word {
                pts = match m {
                    MachineMap::A => pts.iter().map(|&p| p / aa).collect(),
                    MachineMap::B => u_star_polyline(map, &pts)?,
                };
            }
            let s = Complex64::from_polar(
                aa.powi(*scale),
                2.0 * std::f64::consts::PI * *rot as f64 / map.r as f64,
            );
            let mut curve = CurveApprox::open(pts).scale(s);
            if *conj {
                curve = curve.conj();
            }
            curve
        }
        GenRecord::Pullback { .. } => {
            return Err(FeigError::InsufficientData(
                "veins of pullback pieces are not replayed; regenerate via the machine".into(),
            ))
        }
    };
    let length = arc.arc_length();
    Ok(Vein { arc, length })
}

/// Pieces covering a neighborhood of 0: machine tiles with their
/// symmetry copies (+/-, conjugate) and their u-lifts into the rotated
/// sectors, restricted to pieces meeting the disc of `radius`.
pub fn generate_tiling(map: &FeigenbaumMap, radius: f64, max_pieces: usize) -> Result<Vec<Piece>> {
    let aa = alpha_abs(map);
    let dom = machine_domain(map)?;
    let words = machine_tile_from(map, &dom, 24, max_pieces / 8 + 8)?;

    let mut out: Vec<Piece> = Vec::new();
    let meets = |p: &Piece| -> bool {
        let (lo, hi) = p.boundary.bbox();
        lo.re <= radius && lo.im <= radius && hi.re >= -radius && hi.im >= -radius
            && p.boundary.points.iter().any(|q| q.norm() <= radius + p.diam())
    };
    for w in &words {
        if out.len() >= max_pieces {
            break;
        }
        for (rot, conj) in [(0u32, false), (0, true), (map.r / 2, false), (map.r / 2, true)] {
            let s = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rot as f64 / map.r as f64);
            let gen = match &w.gen {
                GenRecord::Machine { word, scale, .. } => GenRecord::Machine {
                    word: word.clone(),
                    scale: *scale,
                    rot,
                    conj,
                },
                other => other.clone(),
            };
            let p = w.transformed(s, conj, gen, w.depth);
            if meets(&p) {
                out.push(p);
            }
            if out.len() >= max_pieces {
                break;
            }
        }
    }

    // u-lifts: pieces attached to the rotated rays e^{i pi/r} R+ are
    // u* images of conjugated pieces scaled into the band (1, alpha^2)
    let band = (1.0, aa * aa);
    let lifts: Vec<Piece> = out
        .iter()
        .filter(|p| !matches!(p.gen, GenRecord::Machine { conj: true, .. }))
        .filter(|p| p.x_r.norm() > 1e-12)
        .cloned()
        .collect();
    let mut lifted = Vec::new();
    'lift: for p in &lifts {
        // base scale k0 puts |x_R| in the band; k0+1 reaches the outer part
        // of the band that the narrow range of census bases never hits
        let mut k0 = 0i32;
        let mut x = p.x_r.norm();
        while x <= band.0 {
            x *= aa;
            k0 += 1;
        }
        while x > band.1 {
            x /= aa;
            k0 -= 1;
        }
        for k in [k0, k0 + 1] {
            if out.len() + lifted.len() >= max_pieces {
                break 'lift;
            }
            let scaled = p.transformed(Complex64::new(aa.powi(k), 0.0), true, p.gen.clone(), p.depth);
            // u of the conjugated piece: u(P*) = u*(P)
            let pts: Result<Vec<Complex64>> = scaled
                .boundary
                .points
                .iter()
                .map(|&q| u_star_eval(map, q.conj()))
                .collect();
            let Ok(pts) = pts else { continue };
            let Ok(xr) = u_star_eval(map, scaled.x_r.conj()) else { continue };
            let Ok(xi) = u_star_eval(map, scaled.x_r_inf.conj()) else { continue };
            let q = Piece {
                depth: scaled.depth + 1,
                gen: GenRecord::Pullback {
                    parent: format!("{}a^{k}*", p.gen.label()),
                    branch: 0,
                },
                boundary: CurveApprox::closed(pts),
                x_r: xr,
                x_r_inf: xi,
                inf_is_direction: false,
                level: 0,
            };
            for (rot, conj) in [(0u32, false), (0, true), (map.r / 2, false), (map.r / 2, true)] {
                let s = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rot as f64 / map.r as f64);
                let v = q.transformed(s, conj, q.gen.clone(), q.depth);
                if meets(&v) {
                    lifted.push(v);
                }
            }
            // rescaled copies reaching into the disc
            let mut s = 1.0 / aa;
            for _ in 0..12 {
                let v = q.transformed(Complex64::new(s, 0.0), false, q.gen.clone(), q.depth);
                if v.diam() < 1e-5 {
                    break;
                }
                if meets(&v) {
                    lifted.push(v.clone());
                    lifted.push(v.transformed(Complex64::new(1.0, 0.0), true, v.gen.clone(), v.depth));
                    lifted.push(v.transformed(Complex64::new(-1.0, 0.0), false, v.gen.clone(), v.depth));
                    lifted.push(v.transformed(Complex64::new(-1.0, 0.0), true, v.gen.clone(), v.depth));
                }
                s /= aa;
            }
            if out.len() + lifted.len() >= max_pieces {
                break 'lift;
            }
        }
    }
    out.extend(lifted);
    out.truncate(max_pieces);
    Ok(out)
}

/// Fraction of the disc of `radius` covered by the generated closed
/// pieces plus a thin tube around the rotated real lines.
pub fn tiling_coverage(map: &FeigenbaumMap, radius: f64, max_pieces: usize) -> Result<f64> {
    let pieces = generate_tiling(map, radius, max_pieces)?;
    Ok(coverage_of(&pieces, radius, map.r))
}

/// Covered fraction of the disc for an already-generated piece family.
pub fn coverage_of(pieces: &[Piece], radius: f64, r: u32) -> f64 {
    let tube = 0.004 * radius;

    // deterministic low-discrepancy samples in the disc
    let n = 4000;
    let mut covered = 0usize;
    let golden = 0.618_033_988_749_894_9_f64;
    let mut boxes: Vec<(Complex64, Complex64)> = Vec::with_capacity(pieces.len());
    for p in pieces {
        boxes.push(p.boundary.bbox());
    }
    for i in 0..n {
        let rho = radius * ((i as f64 + 0.5) / n as f64).sqrt();
        let th = 2.0 * std::f64::consts::PI * ((i as f64 * golden) % 1.0);
        let z = Complex64::from_polar(rho, th);
        // the rotated real lines
        let mut on_line = false;
        for j in 0..r {
            let d = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / r as f64);
            let w = z / d;
            if w.im.abs() <= tube {
                on_line = true;
                break;
            }
        }
        if on_line {
            covered += 1;
            continue;
        }
        let mut inside = false;
        for (p, (lo, hi)) in pieces.iter().zip(&boxes) {
            if z.re < lo.re - tube || z.re > hi.re + tube || z.im < lo.im - tube || z.im > hi.im + tube {
                continue;
            }
            if p.contains(z, tube) {
                inside = true;
                break;
            }
        }
        if inside {
            covered += 1;
        }
    }
    covered as f64 / n as f64
}

/// A nested chain of pieces inside R~1 via the refinement operator
/// H(P) = u((u(|alpha| P*))*): each application produces a deeper piece
/// of the partition contained in the previous one.
pub fn nested_chain(map: &FeigenbaumMap, start: &Piece, len: usize) -> Result<Vec<Piece>> {
    let aa = alpha_abs(map);
    let mut out = vec![start.clone()];
    let mut cur = start.clone();
    for _ in 1..len {
        // Q = u(|alpha| P*) = u*(|alpha| P): a piece attached to the
        // imaginary ray inside the sector R0
        let q: Vec<Complex64> = cur
            .boundary
            .points
            .iter()
            .map(|&p| u_star_eval(map, aa * p))
            .collect::<Result<Vec<_>>>()?;
        // C = u(Q*) = u*(Q)
        let c_pts: Vec<Complex64> = q.iter().map(|&p| u_star_eval(map, p)).collect::<Result<Vec<_>>>()?;
        let x_r = u_star_eval(map, u_star_eval(map, aa * cur.x_r)?)?;
        let x_i = u_star_eval(map, u_star_eval(map, aa * cur.x_r_inf)?)?;
        cur = Piece {
            depth: cur.depth + 2,
            gen: GenRecord::Pullback {
                parent: cur.gen.label(),
                branch: 0,
            },
            boundary: CurveApprox::closed(c_pts),
            x_r,
            x_r_inf: x_i,
            inf_is_direction: false,
            level: cur.level + 1,
        };
        out.push(cur.clone());
    }
    Ok(out)
}

/// Least-squares decay fit over nested chains: diam(R_m) ~ C lambda^m.
/// Returns (C, lambda, r_squared).
pub fn diameter_decay(chains: &[Vec<Piece>]) -> Result<(f64, f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for chain in chains {
        if chain.len() < 2 {
            return Err(FeigError::InsufficientData(
                "a nested chain needs at least two pieces".into(),
            ));
        }
        let d0 = chain[0].diam();
        for (m, p) in chain.iter().enumerate() {
            xs.push(m as f64);
            ys.push((p.diam() / d0).ln());
        }
    }
    if xs.len() < 4 {
        return Err(FeigError::InsufficientData(
            "need chains of total length >= 4".into(),
        ));
    }
    let (a, b, r2) = linear_fit(&xs, &ys);
    Ok((a.exp(), b.exp(), r2))
}

/// Path of vein arcs from z's cell down to 0: the vein of the smallest
/// generated piece containing z, followed to its base point on a rotated
/// ray, then the ray itself into 0 (the veins of the deeper pieces
/// degenerate onto the ray).
pub fn vein_path_to_zero(map: &FeigenbaumMap, z: Complex64, max_level: usize) -> Result<CurveApprox> {
    if z.norm() < 1e-12 {
        return Ok(CurveApprox::open(vec![Complex64::new(0.0, 0.0)]));
    }
    let tiling = generate_tiling(map, 1.1 * z.norm(), (1 << max_level.min(12)).max(64))?;
    vein_path_in(map, &tiling, z)
}

/// Same as [`vein_path_to_zero`] but reusing a generated tiling.
pub fn vein_path_in(map: &FeigenbaumMap, tiling: &[Piece], z: Complex64) -> Result<CurveApprox> {
    if z.norm() < 1e-12 {
        return Ok(CurveApprox::open(vec![Complex64::new(0.0, 0.0)]));
    }
    let mut best: Option<&Piece> = None;
    for p in tiling {
        if p.contains(z, 1e-9 + 1e-6 * p.diam())
            && best.map_or(true, |b| p.diam() < b.diam())
        {
            best = Some(p);
        }
    }
    let Some(cell) = best else {
        return Err(FeigError::NotCovered(format!(
            "{z} is outside the generated tiling"
        )));
    };
    // the undecorated machine vein, re-decorated like the cell
    let vein = vein_for(map, cell)?;
    // enter the vein at the point nearest z, follow it to x_R
    let pts = &vein.arc.points;
    let k = (0..pts.len())
        .min_by(|&a, &b| (pts[a] - z).norm().partial_cmp(&(pts[b] - z).norm()).unwrap())
        .unwrap();
    let to_base_fwd = (pts[0] - cell.x_r).norm() < (pts[pts.len() - 1] - cell.x_r).norm();
    let mut path = vec![z];
    if to_base_fwd {
        for i in (0..=k).rev() {
            path.push(pts[i]);
        }
    } else {
        for &p in pts.iter().skip(k) {
            path.push(p);
        }
    }
    // descend along the ray through x_R into 0
    let base = *path.last().unwrap();
    for i in 1..=32 {
        let t = 1.0 - i as f64 / 32.0;
        path.push(base * t);
    }
    path.dedup_by(|a, b| (*a - *b).norm() < 1e-13);
    Ok(CurveApprox::open(path))
}

/// Vein of a decorated (M^ext) piece: replay the machine vein and apply
/// the same scale/rotation/conjugation.
fn vein_for(map: &FeigenbaumMap, piece: &Piece) -> Result<Vein> {
    match &piece.gen {
        GenRecord::Machine { .. } | GenRecord::Sector { .. } => compute_vein(map, piece),
        GenRecord::Pullback { .. } => {
            // u-lift pieces: approximate the vein by the boundary-anchored
            // straight continuation from x_R toward x_R_inf if replay is
            // unavailable; the arc between the base points inside the cell
            let pts: Vec<Complex64> = (0..=32)
                .map(|i| {
                    let t = i as f64 / 32.0;
                    piece.x_r + t * (piece.x_r_inf - piece.x_r)
                })
                .collect();
            let arc = CurveApprox::open(pts);
            let length = arc.arc_length();
            Ok(Vein { arc, length })
        }
    }
}

/// External ray to a generated base point: boundary arcs from x out to
/// the window edge per the Section 5 construction; the ray to 0 is L
/// itself.
pub fn external_ray(map: &FeigenbaumMap, x: Complex64, depth: i32) -> Result<RayPath> {
    let aa = alpha_abs(map);
    if x.norm() < 1e-12 {
        let l = curve_L(map, 6, -depth, depth)?;
        return Ok(RayPath {
            target: x,
            arcs: vec![l],
            truncation_depth: depth,
        });
    }
    let dom = machine_domain(map)?;
    // locate the machine piece whose base point is x (within tolerance)
    let words = machine_tile_from(map, &dom, 12, 600)?;
    let cell = words
        .iter()
        .min_by(|a, b| {
            (a.x_r - x)
                .norm()
                .partial_cmp(&(b.x_r - x).norm())
                .unwrap()
        })
        .unwrap();
    if (cell.x_r - x).norm() > 1e-7 * (1.0 + x.norm()) {
        return Err(FeigError::NotCovered(format!(
            "{x} is not a base point of the generated machine census"
        )));
    }
    let word = match &cell.gen {
        GenRecord::Machine { word, .. } => word.clone(),
        _ => unreachable!(),
    };

    // inside Delta: from x_{w(R2)} along w(gamma^+/|alpha|) to w(c/|a|),
    // then bridge arcs along u* images of the L side of Delta
    let c = find_c(map, 1e-12)?.c;
    let mut arcs: Vec<CurveApprox> = Vec::new();
    let base_arc = dom.gamma_plus.scale(Complex64::new(1.0 / aa, 0.0));
    // replay: maintain the arc list as the word is applied outermost-last
    let mut cur: Vec<CurveApprox> = vec![base_arc];
    for m in &word {
        for a in cur.iter_mut() {
            *a = match m {
                MachineMap::A => a.scale(Complex64::new(1.0 / aa, 0.0)),
                MachineMap::B => CurveApprox::open(u_star_polyline(map, &a.points)?),
            };
        }
        // bridge from the image of c/|alpha| onward to c/|alpha|
        match m {
            MachineMap::A => {
                // L arc from c/|alpha|^2 up to c/|alpha|
                let l = limit_curve(map, L_DEPTH)?;
                cur.push(l.scale(Complex64::new(aa.powi(-1), 0.0)));
            }
            MachineMap::B => {
                // u* of the L side of Delta from c/|alpha| to x0, then
                // gamma_1^- from x0 to c/|alpha|
                let mut side: Vec<Complex64> = Vec::new();
                let l = limit_curve(map, L_DEPTH)?;
                for n in (L_LO..0).rev() {
                    for &p in decimate(&l.points, 48).iter().rev() {
                        side.push(p * aa.powi(n));
                    }
                }
                let lifted = u_star_polyline(map, &side)?;
                cur.push(CurveApprox::open(lifted));
                cur.push(dom.gamma_minus_1.clone());
            }
        }
    }
    arcs.extend(cur);
    // from c/|alpha| out along L to the window edge
    let tail = curve_L(map, L_DEPTH, -1, depth)?;
    arcs.push(tail);
    let _ = c;
    Ok(RayPath {
        target: x,
        arcs,
        truncation_depth: depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hausdorff_distance;
    use crate::map::solve_feigenbaum;
    use std::sync::OnceLock;

    fn solved() -> &'static FeigenbaumMap {
        static MAP: OnceLock<FeigenbaumMap> = OnceLock::new();
        MAP.get_or_init(|| solve_feigenbaum(2, 40, 1e-12).expect("solver"))
    }

    fn domain() -> &'static MachineDomain {
        static DOM: OnceLock<MachineDomain> = OnceLock::new();
        DOM.get_or_init(|| machine_domain(solved()).expect("machine domain"))
    }

    #[test]
    fn sector_count_and_rays() {
        let map = solved();
        let sectors = depth0_sectors(map).unwrap();
        assert_eq!(sectors.len(), 2); // 2(r-1), r = 2
        for s in &sectors {
            // the sector contains its straight ray
            let dir = s.x_r_inf;
            assert!(s.inf_is_direction);
            for t in [0.3, 1.0, 2.5] {
                assert!(
                    s.contains(dir * t, 1e-6),
                    "{} missing its ray point at t={t}",
                    s.gen.label()
                );
            }
        }
    }

    #[test]
    fn machine_domain_identities() {
        let map = solved();
        let dom = domain();
        let aa = -map.alpha;
        let c = find_c(map, 1e-12).unwrap().c;
        let x0 = find_x0(map).unwrap();

        // triangle vertices
        assert!(dom.delta.distance_to(Complex64::new(x0, 0.0)) < 1e-9);
        assert!(dom.delta.distance_to(c / aa) < 1e-9);
        assert!(dom.delta.distance_to(Complex64::new(0.0, 0.0)) < 1e-9);

        // Delta0 = u*(Delta): check a sparse sample of Delta0 vertices
        // against the directly-mapped boundary
        assert!(dom.delta0.len() == dom.delta.len());

        // beta1 runs from u*(c/|alpha|) to c/|alpha|
        let b1_start = u_star_eval(map, c / aa).unwrap();
        assert!((dom.beta1.first().unwrap() - b1_start).norm() < 1e-7);
        assert!((dom.beta1.last().unwrap() - c / aa).norm() < 1e-9);

        // (machinearc): beta1 lies on gamma^+/|alpha|
        let gp_scaled = dom.gamma_plus.scale(Complex64::new(1.0 / aa, 0.0));
        let worst = dom
            .beta1
            .points
            .iter()
            .map(|&p| gp_scaled.distance_to(p))
            .fold(0.0, f64::max);
        assert!(worst < 2.0 * gp_scaled.mesh(), "beta1 off gamma+/|a|: {worst}");

        // the seed R2 lies inside Delta
        for &p in dom.seed.boundary.points.iter().step_by(7) {
            assert!(
                dom.delta.contains(p, 2.0 * dom.delta.mesh()),
                "R2 boundary point {p} outside Delta"
            );
        }

        // vein of R~1 joins x0 and c
        assert!((dom.vein_r1.first().unwrap() - x0).norm() < 1e-9);
        assert!((dom.vein_r1.last().unwrap() - c).norm() < 1e-2);
    }

    #[test]
    fn machine_tiles_disjoint_and_anchored() {
        let map = solved();
        let dom = domain();
        let pieces = machine_tile_from(map, dom, 3, 64).unwrap();
        assert_eq!(pieces.len(), 1 + 2 + 4 + 8);

        // every piece touches (0, x0) at its base point
        let x0 = find_x0(map).unwrap();
        for p in &pieces {
            assert!(p.x_r.im.abs() < 1e-9, "{} base off the real line", p.gen.label());
            assert!(p.x_r.re > 0.0 && p.x_r.re < x0);
            assert!(
                p.boundary.distance_to(p.x_r) < 1e-7 * p.diam().max(1e-3),
                "{} base point off its boundary",
                p.gen.label()
            );
        }

        // A(R2), B(R2), R2 pairwise disjoint interiors (sampled)
        for i in 0..3.min(pieces.len()) {
            for j in 0..i {
                let (a, b) = (&pieces[i], &pieces[j]);
                let cls = classify_pair(a, b).unwrap();
                assert!(
                    cls == PairClass::Disjoint || cls == PairClass::SharedArc,
                    "{} vs {}: {:?}",
                    a.gen.label(),
                    b.gen.label(),
                    cls
                );
            }
        }
    }

    #[test]
    fn depth1_census_and_rescale() {
        let map = solved();
        let dom = domain();
        let sectors = depth0_sectors(map).unwrap();
        let mut depth1 = Vec::new();
        for s in &sectors {
            for b in 0..2 {
                depth1.push(pullback_piece(map, s, b).unwrap());
            }
        }
        assert_eq!(depth1.len(), 4); // 2r(r-1)

        // base points are rotations/conjugates of (x0, c)
        let x0 = find_x0(map).unwrap();
        let c = find_c(map, 1e-12).unwrap().c;
        for p in &depth1 {
            assert!(
                (p.x_r.norm() - x0).abs() < 1e-9,
                "depth-1 base {} not on |z| = x0",
                p.x_r
            );
            assert!((p.x_r_inf.norm() - c.norm()).abs() < 1e-6);
        }

        // Theorem B (a): R~1/alpha matches the machine seed mirrored
        let r1 = depth1
            .iter()
            .find(|p| (p.x_r - Complex64::new(x0, 0.0)).norm() < 1e-9 && p.x_r_inf.im > 0.0)
            .expect("R~1 in the census");
        let rescaled = rescale_piece(map, r1);
        let minus_r2 = dom
            .seed
            .transformed(Complex64::new(-1.0, 0.0), false, dom.seed.gen.clone(), 2);
        let d = hausdorff_distance(&rescaled.boundary, &minus_r2.boundary);
        assert!(
            d <= 3.0 * rescaled.boundary.mesh().max(minus_r2.boundary.mesh()),
            "R~1/alpha vs -R2: Hausdorff {d}"
        );
    }

    #[test]
    fn classify_depth1_pairs() {
        let map = solved();
        let sectors = depth0_sectors(map).unwrap();
        let mut depth1 = Vec::new();
        for s in &sectors {
            for b in 0..2 {
                depth1.push(pullback_piece(map, s, b).unwrap());
            }
        }
        // R~1 and R~1* meet at the common base point x0
        let x0 = find_x0(map).unwrap();
        let up: Vec<&Piece> = depth1
            .iter()
            .filter(|p| (p.x_r - Complex64::new(x0, 0.0)).norm() < 1e-9)
            .collect();
        assert_eq!(up.len(), 2);
        let cls = classify_pair(up[0], up[1]).unwrap();
        assert_eq!(cls, PairClass::SharedBasePoint);

        // opposite-side pieces are disjoint
        let down: Vec<&Piece> = depth1
            .iter()
            .filter(|p| (p.x_r + Complex64::new(x0, 0.0)).norm() < 1e-9)
            .collect();
        let cls = classify_pair(up[0], down[0]).unwrap();
        assert_eq!(cls, PairClass::Disjoint);
    }

    #[test]
    fn nested_chain_and_decay() {
        let map = solved();
        let dom = domain();
        let r1 = depth1_piece(map, dom);
        let chain = nested_chain(map, &r1, 6).unwrap();
        // genuine nesting, checked by winding
        for w in chain.windows(2) {
            let (outer, inner) = (&w[0], &w[1]);
            for &p in inner.boundary.points.iter().step_by(5) {
                assert!(
                    outer.contains(p, 4.0 * outer.boundary.mesh()),
                    "chain breaks: {p} of {} outside {}",
                    inner.gen.label(),
                    outer.gen.label()
                );
            }
        }
        let (c, lambda, r2) = diameter_decay(&[chain]).unwrap();
        assert!(lambda < 1.0, "no decay: lambda = {lambda}");
        assert!(r2 > 0.9, "bad fit: r^2 = {r2}");
        assert!(c > 0.0);
        assert!(diameter_decay(&[vec![r1]]).is_err());
    }

    #[test]
    fn veins_join_base_points() {
        let map = solved();
        let dom = domain();
        let pieces = machine_tile_from(map, dom, 2, 8).unwrap();
        for p in &pieces {
            let v = compute_vein(map, p).unwrap();
            assert!(
                (v.arc.first().unwrap() - p.x_r).norm() < 1e-6 * (1.0 + p.diam()),
                "{} vein start off x_R",
                p.gen.label()
            );
            assert!(
                (v.arc.last().unwrap() - p.x_r_inf).norm() < 0.05 * p.diam(),
                "{} vein end off x_R_inf",
                p.gen.label()
            );
            assert!(v.length.is_finite() && v.length > 0.0);
            // the vein stays inside the closed piece
            for &q in v.arc.points.iter().step_by(4) {
                assert!(
                    p.contains(q, 4.0 * p.boundary.mesh()),
                    "{} vein exits the piece at {q}",
                    p.gen.label()
                );
            }
        }
    }

    #[test]
    fn coverage_grows() {
        let map = solved();
        let radius = 0.5 / (-map.alpha);
        let lo = tiling_coverage(map, radius, 300).unwrap();
        let hi = tiling_coverage(map, radius, 1500).unwrap();
        assert!(hi >= lo - 1e-9, "coverage dropped: {lo} -> {hi}");
        assert!(hi > 0.8, "coverage too small: {hi}");
    }

    #[test]
    fn vein_paths_scale_linearly() {
        let map = solved();
        let tiling = generate_tiling(map, 0.5, 2000).unwrap();
        let z0 = vein_path_in(map, &tiling, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(z0.len(), 1);

        let mut ratios = Vec::new();
        let golden = 0.618_033_988_749_894_9_f64;
        for i in 0..60 {
            let rho = 0.04 + 0.4 * ((i as f64 + 0.5) / 60.0);
            let th = 2.0 * std::f64::consts::PI * ((i as f64 * golden) % 1.0);
            let z = Complex64::from_polar(rho, th);
            match vein_path_in(map, &tiling, z) {
                Ok(path) => ratios.push(path.arc_length() / z.norm()),
                Err(FeigError::NotCovered(_)) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
        assert!(ratios.len() >= 30, "too few covered samples: {}", ratios.len());
        let cmax = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(cmax < 50.0, "path length not linearly bounded: C = {cmax}");
    }

    #[test]
    fn external_ray_scaling() {
        let map = solved();
        let aa = -map.alpha;
        let dom = domain();
        let words = machine_tile_from(map, dom, 3, 16).unwrap();
        // pick a base point whose |alpha|-multiple is also a base point:
        // x_{A w} = x_w / |alpha|
        let child = words
            .iter()
            .find(|p| matches!(&p.gen, GenRecord::Machine { word, .. } if word.last() == Some(&MachineMap::A)))
            .unwrap();
        let x_small = child.x_r;
        let ray_small = external_ray(map, x_small, 6).unwrap().flattened();
        let ray_big = external_ray(map, x_small * aa, 5).unwrap().flattened();
        let scaled = ray_small.scale(Complex64::new(aa, 0.0));
        // compare on the common window: one-sided from the big ray
        let worst = ray_big
            .points
            .iter()
            .filter(|p| p.norm() < 0.7 * scaled.points.iter().map(|q| q.norm()).fold(0.0, f64::max))
            .map(|&p| scaled.distance_to(p))
            .fold(0.0, f64::max);
        assert!(
            worst <= 3.0 * scaled.mesh().max(ray_big.mesh()),
            "ray scaling mismatch: {worst}"
        );

        // the ray to 0 is L itself
        let l = external_ray(map, Complex64::new(0.0, 0.0), 4).unwrap();
        assert!(l.arcs.len() == 1);
    }
}
