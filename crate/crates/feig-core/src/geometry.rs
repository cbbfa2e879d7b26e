//! Polyline geometry. Every curve in this crate (arcs, boundaries, the
//! invariant ray) is carried as an ordered polyline, so set questions
//! reduce to winding numbers, tube distances and segment intersections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Ordered polyline, optionally with a symbolic address per vertex
/// (digits over {1,2,3} for limit-curve vertices).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CurveApprox {
    pub points: Vec<Complex64>,
    pub addresses: Option<Vec<Vec<u8>>>,
    pub closed: bool,
}

impl CurveApprox {
    pub fn open(points: Vec<Complex64>) -> Self {
        CurveApprox {
            points,
            addresses: None,
            closed: false,
        }
    }

    pub fn closed(points: Vec<Complex64>) -> Self {
        CurveApprox {
            points,
            addresses: None,
            closed: true,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<Complex64> {
        self.points.first().copied()
    }

    pub fn last(&self) -> Option<Complex64> {
        self.points.last().copied()
    }

    /// Iterator over segments, including the wrap-around one if closed.
    pub fn segments(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.points.len();
        let wrap = if self.closed && n > 2 { 1 } else { 0 };
        (0..n.saturating_sub(1) + wrap).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn arc_length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Longest segment, the discretization mesh.
    pub fn mesh(&self) -> f64 {
        self.segments()
            .map(|(a, b)| (b - a).norm())
            .fold(0.0, f64::max)
    }

    /// Exact diameter of the vertex set, via the convex hull so that
    /// polylines with many vertices stay affordable.
    pub fn diameter(&self) -> f64 {
        let hull = convex_hull(&self.points);
        let mut d = 0.0f64;
        for (i, &a) in hull.iter().enumerate() {
            for &b in &hull[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn bbox(&self) -> (Complex64, Complex64) {
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo.re = lo.re.min(p.re);
            lo.im = lo.im.min(p.im);
            hi.re = hi.re.max(p.re);
            hi.im = hi.im.max(p.im);
        }
        (lo, hi)
    }

    pub fn reversed(&self) -> Self {
        let mut c = self.clone();
        c.points.reverse();
        if let Some(a) = &mut c.addresses {
            a.reverse();
        }
        c
    }

    /// Apply a pointwise map, dropping addresses.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        CurveApprox {
            points: self.points.iter().map(|&p| f(p)).collect(),
            addresses: None,
            closed: self.closed,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|p| p * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|p| p.conj())
    }

    /// Distance from a point to the polyline.
    pub fn distance_to(&self, p: Complex64) -> f64 {
        self.segments()
            .map(|(a, b)| dist_point_segment(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Winding-based containment for closed polylines, with a tube
    /// tolerance: points within `tube` of the boundary count as inside.
    pub fn contains(&self, p: Complex64, tube: f64) -> bool {
        debug_assert!(self.closed);
        if self.distance_to(p) <= tube {
            return true;
        }
        winding_number(&self.points, p) != 0
    }

    /// Strict interior: nonzero winding and further than `tube` from the
    /// boundary.
    pub fn contains_interior(&self, p: Complex64, tube: f64) -> bool {
        debug_assert!(self.closed);
        self.distance_to(p) > tube && winding_number(&self.points, p) != 0
    }

    /// Number of proper self-intersections among non-adjacent segments.
    pub fn self_intersections(&self) -> usize {
        let segs: Vec<(Complex64, Complex64)> = self.segments().collect();
        let n = segs.len();
        let mut count = 0;
        for i in 0..n {
            for j in i + 2..n {
                if self.closed && i == 0 && j == n - 1 {
                    continue;
                }
                if segments_intersect(segs[i].0, segs[i].1, segs[j].0, segs[j].1) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Append another polyline, dropping its first point when it repeats
    /// the current endpoint.
    pub fn extend_with(&mut self, other: &CurveApprox, join_tol: f64) {
        let mut it = other.points.iter();
        if let (Some(last), Some(first)) = (self.last(), other.first()) {
            if (last - first).norm() <= join_tol {
                it.next();
            }
        }
        self.points.extend(it.copied());
        self.addresses = None;
    }
}

/// Andrew's monotone-chain convex hull of a point set.
fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    pts.dedup_by(|a, b| a.re == b.re && a.im == b.im);
    let cross = |o: Complex64, a: Complex64, b: Complex64| {
        (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
    };
    let mut hull: Vec<Complex64> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

pub fn dist_point_segment(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).re * ab.re + (p - a).im * ab.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Integer winding number of a closed polyline around p (crossing rule).
pub fn winding_number(points: &[Complex64], p: Complex64) -> i32 {
    let n = points.len();
    if n < 3 {
        return 0;
    }
    let mut w = 0i32;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        if a.im <= p.im {
            if b.im > p.im && cross(b - a, p - a) > 0.0 {
                w += 1;
            }
        } else if b.im <= p.im && cross(b - a, p - a) < 0.0 {
            w -= 1;
        }
    }
    w
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Proper or touching intersection of segments ab and cd.
pub fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Complex64, q: Complex64, r: Complex64| {
        cross(q - p, r - p).abs() < 1e-14
            && r.re >= p.re.min(q.re) - 1e-14
            && r.re <= p.re.max(q.re) + 1e-14
            && r.im >= p.im.min(q.im) - 1e-14
            && r.im <= p.im.max(q.im) + 1e-14
    };
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}

/// One-sided Hausdorff distance: sup over vertices of `a` of the distance
/// to the polyline `b`.
pub fn hausdorff_one_sided(a: &CurveApprox, b: &CurveApprox) -> f64 {
    a.points
        .iter()
        .map(|&p| b.distance_to(p))
        .fold(0.0, f64::max)
}

pub fn hausdorff_distance(a: &CurveApprox, b: &CurveApprox) -> f64 {
    hausdorff_one_sided(a, b).max(hausdorff_one_sided(b, a))
}

/// Sample an analytic arc f: [t0, t1] -> C adaptively: a parameter
/// interval is split until the midpoint deviates from the chord by less
/// than `tol` times the chord length (absolute floor `abs_tol`).
pub fn refine_arc(
    f: &dyn Fn(f64) -> Complex64,
    t0: f64,
    t1: f64,
    tol: f64,
    abs_tol: f64,
    max_depth: u32,
) -> Vec<Complex64> {
    let mut pts = vec![f(t0)];
    refine_rec(f, t0, f(t0), t1, f(t1), tol, abs_tol, max_depth, &mut pts);
    pts
}

#[allow(clippy::too_many_arguments)]
fn refine_rec(
    f: &dyn Fn(f64) -> Complex64,
    t0: f64,
    p0: Complex64,
    t1: f64,
    p1: Complex64,
    tol: f64,
    abs_tol: f64,
    depth: u32,
    out: &mut Vec<Complex64>,
) {
    let tm = 0.5 * (t0 + t1);
    let pm = f(tm);
    let chord = (p1 - p0).norm();
    let dev = dist_point_segment(pm, p0, p1);
    if depth == 0 || dev <= tol * chord.max(1e-12) || dev <= abs_tol {
        out.push(pm);
        out.push(p1);
        return;
    }
    refine_rec(f, t0, p0, tm, pm, tol, abs_tol, depth - 1, out);
    // pm is already in `out` as the left half's endpoint
    refine_rec(f, tm, pm, t1, p1, tol, abs_tol, depth - 1, out);
}

/// Least-squares line fit y = a + b x; returns (a, b, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> CurveApprox {
        CurveApprox::closed(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
        ])
    }

    #[test]
    fn winding_and_containment() {
        let sq = square();
        assert!(sq.contains(Complex64::new(0.5, 0.5), 0.0));
        assert!(!sq.contains(Complex64::new(1.5, 0.5), 0.0));
        // tube tolerance pulls boundary-near points inside
        assert!(sq.contains(Complex64::new(1.0 + 1e-8, 0.5), 1e-6));
        assert!(!sq.contains_interior(Complex64::new(1.0 - 1e-8, 0.5), 1e-6));
    }

    #[test]
    fn hausdorff_of_shifted_square() {
        let a = square();
        let b = a.map(|p| p + Complex64::new(0.0, 0.25));
        let d = hausdorff_distance(&a, &b);
        assert!((d - 0.25).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn self_intersection_counts() {
        let simple = CurveApprox::open(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
        ]);
        assert_eq!(simple.self_intersections(), 0);
        let bow = CurveApprox::open(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ]);
        assert_eq!(bow.self_intersections(), 1);
    }

    #[test]
    fn adaptive_refinement_resolves_a_circle() {
        let f = |t: f64| Complex64::from_polar(1.0, t);
        let pts = refine_arc(&f, 0.0, std::f64::consts::PI, 1e-4, 1e-9, 20);
        assert!(pts.len() > 16);
        let poly = CurveApprox::open(pts);
        assert!((poly.arc_length() - std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x).collect();
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert!((a - 2.0).abs() < 1e-12);
        assert!((b + 3.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
