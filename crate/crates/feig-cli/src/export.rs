//! File outputs: CSV curve dumps, SVG renderings, census JSON.

use std::io::Write;
use std::path::Path;

use anyhow::Result;
use feig_core::partition::Piece;
use feig_core::CurveApprox;

/// 17 significant digits, deterministic.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn address_string(addr: &[u8]) -> String {
    addr.iter().map(|d| char::from(b'0' + d)).collect()
}

/// CSV with header "re,im,address"; the address column is the ternary
/// cylinder address when the curve carries one, empty otherwise.
pub fn write_curve_csv(curve: &CurveApprox, path: &Path) -> Result<()> {
    let mut out = String::from("re,im,address\n");
    for (i, p) in curve.points.iter().enumerate() {
        let addr = curve
            .addresses
            .as_ref()
            .and_then(|a| a.get(i))
            .map(|a| address_string(a))
            .unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", fmt_f64(p.re), fmt_f64(p.im), addr));
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

fn path_data(curve: &CurveApprox) -> String {
    let mut d = String::new();
    for (i, p) in curve.points.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        d.push_str(&format!("{cmd}{:.6} {:.6}", p.re, -p.im));
    }
    if curve.closed {
        d.push('Z');
    }
    d
}

fn svg_document(body: &str, bbox: (f64, f64, f64, f64)) -> String {
    let (x, y, w, h) = bbox;
    let pad = 0.05 * w.max(h).max(1e-9);
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.6} {:.6} {:.6} {:.6}\">\n{}</svg>\n",
        x - pad,
        y - pad,
        w + 2.0 * pad,
        h + 2.0 * pad,
        body
    )
}

fn curves_bbox(curves: &[&CurveApprox]) -> (f64, f64, f64, f64) {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for p in &c.points {
            lo.0 = lo.0.min(p.re);
            lo.1 = lo.1.min(-p.im);
            hi.0 = hi.0.max(p.re);
            hi.1 = hi.1.max(-p.im);
        }
    }
    (lo.0, lo.1, hi.0 - lo.0, hi.1 - lo.1)
}

pub fn write_curves_svg(curves: &[&CurveApprox], path: &Path) -> Result<()> {
    let bbox = curves_bbox(curves);
    let width = 0.0015 * bbox.2.max(bbox.3).max(1e-9);
    let mut body = String::new();
    for c in curves {
        body.push_str(&format!(
            "  <path d=\"{}\" fill=\"none\" stroke=\"#1a1a1a\" stroke-width=\"{width:.8}\"/>\n",
            path_data(c)
        ));
    }
    std::fs::File::create(path)?.write_all(svg_document(&body, bbox).as_bytes())?;
    Ok(())
}

/// One path per piece, fill keyed by depth parity.
pub fn write_tiling_svg(pieces: &[Piece], path: &Path) -> Result<()> {
    let curves: Vec<&CurveApprox> = pieces.iter().map(|p| &p.boundary).collect();
    let bbox = curves_bbox(&curves);
    let width = 0.0008 * bbox.2.max(bbox.3).max(1e-9);
    let mut body = String::new();
    for p in pieces {
        let fill = if p.depth % 2 == 0 { "#9ecae1" } else { "#fdae6b" };
        body.push_str(&format!(
            "  <path d=\"{}\" fill=\"{}\" fill-opacity=\"0.55\" stroke=\"#333333\" stroke-width=\"{width:.8}\"/>\n",
            path_data(&p.boundary),
            fill
        ));
    }
    std::fs::File::create(path)?.write_all(svg_document(&body, bbox).as_bytes())?;
    Ok(())
}

/// Census JSON: [{"depth", "gen", "x_R":[re,im], "area", "diam"}].
pub fn census_json(pieces: &[Piece]) -> serde_json::Value {
    serde_json::Value::Array(
        pieces
            .iter()
            .map(|p| {
                serde_json::json!({
                    "depth": p.depth,
                    "gen": p.gen.label(),
                    "x_R": [p.x_r.re, p.x_r.im],
                    "area": p.area(),
                    "diam": p.diam(),
                })
            })
            .collect(),
    )
}
