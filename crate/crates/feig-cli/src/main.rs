use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use feig_cli::checks::{run_suites, Suite};
use feig_cli::export;
use feig_core::dimension::{dimension_estimate, m_condition_estimate};
use feig_core::ifs::{curve_L, limit_curve};
use feig_core::map::solve_feigenbaum;
use feig_core::partition::{external_ray, generate_tiling};
use feig_core::FeigenbaumMap;

#[derive(Parser)]
#[command(name = "feig", version, disable_help_subcommand = true)]
#[command(about = "Feigenbaum fixed-point numerics: solve, render, tile, estimate, verify")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the fixed-point equation and save the map as JSON
    Solve {
        #[arg(long)]
        r: u32,
        #[arg(long, default_value_t = 40)]
        order: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the invariant curve over a window of scales
    Curve {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        depth: u32,
        /// scale window, e.g. -2..3
        #[arg(long, default_value = "-1..1", allow_hyphen_values = true)]
        scales: String,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate and render the partition tiling
    Tiles {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 2000)]
        max_pieces: usize,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        census: Option<PathBuf>,
    },
    /// Hausdorff-dimension estimate report
    Dim {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        max_depth: usize,
        #[arg(long)]
        report: PathBuf,
    },
    /// External ray through a base point
    Rays {
        #[arg(long)]
        map: PathBuf,
        /// base point as RE,IM
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        depth: i32,
        #[arg(long)]
        svg: PathBuf,
    },
    /// Run a verification suite and write the report
    Verify {
        #[arg(long)]
        map: PathBuf,
        /// one of core, ifs, markov, dim, all
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn load_map(path: &Path) -> anyhow::Result<FeigenbaumMap> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn parse_scales(s: &str) -> Option<(i32, i32)> {
    let (a, b) = s.split_once("..")?;
    let lo: i32 = a.trim().parse().ok()?;
    let hi: i32 = b.trim().parse().ok()?;
    Some((lo, hi))
}

fn parse_point(s: &str) -> Option<Complex64> {
    let (a, b) = s.split_once(',')?;
    let re: f64 = a.trim().parse().ok()?;
    let im: f64 = b.trim().parse().ok()?;
    Some(Complex64::new(re, im))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Cmd) -> anyhow::Result<ExitCode> {
    match cmd {
        Cmd::Solve { r, order, tol, out } => {
            let map = solve_feigenbaum(r, order, tol)?;
            write_json(&out, &serde_json::to_value(&map)?)?;
            println!(
                "solved r={} order={} alpha={:.15} residual={:.3e}",
                map.r, map.order, map.alpha, map.residual
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Curve {
            map,
            depth,
            scales,
            svg,
            csv,
        } => {
            if depth == 0 {
                return Ok(usage_error("--depth must be at least 1"));
            }
            let Some((lo, hi)) = parse_scales(&scales) else {
                return Ok(usage_error("--scales expects INT..INT"));
            };
            if lo > hi {
                return Ok(usage_error("--scales window is empty"));
            }
            let m = load_map(&map)?;
            let curve = curve_L(&m, depth, lo, hi)?;
            if let Some(path) = &csv {
                export::write_curve_csv(&curve, path)?;
            }
            if let Some(path) = &svg {
                export::write_curves_svg(&[&curve], path)?;
            }
            println!("curve depth={depth} scales={lo}..{hi} points={}", curve.len());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Tiles {
            map,
            depth,
            radius,
            max_pieces,
            svg,
            census,
        } => {
            if depth == 0 {
                return Ok(usage_error("--depth must be at least 1"));
            }
            if !(radius.is_finite() && radius > 0.0) {
                return Ok(usage_error("--radius must be positive"));
            }
            let m = load_map(&map)?;
            let mut pieces = generate_tiling(&m, radius, max_pieces)?;
            pieces.retain(|p| p.depth <= depth);
            if let Some(path) = &svg {
                export::write_tiling_svg(&pieces, path)?;
            }
            if let Some(path) = &census {
                write_json(path, &export::census_json(&pieces))?;
            }
            println!("tiles depth<={depth} radius={radius} pieces={}", pieces.len());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Dim {
            map,
            max_depth,
            report,
        } => {
            if max_depth < 2 {
                return Ok(usage_error("--max-depth must be at least 2"));
            }
            let m = load_map(&map)?;
            let est = dimension_estimate(&m, max_depth)?;
            let m_curve = limit_curve(&m, 10.min(max_depth as u32).max(8))?;
            let m_est = m_condition_estimate(&m_curve).m_estimate;
            write_json(
                &report,
                &json!({
                    "h": est.h,
                    "bracket": [est.bracket.0, est.bracket.1],
                    "box_dim": est.box_dim,
                    "bowen_roots": est.bowen_roots,
                    "M_estimate": m_est,
                    "depth": max_depth
                }),
            )?;
            println!(
                "dim h={:.6} bracket=[{:.6}, {:.6}] box={:.4}",
                est.h, est.bracket.0, est.bracket.1, est.box_dim
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Rays {
            map,
            point,
            depth,
            svg,
        } => {
            let Some(x) = parse_point(&point) else {
                return Ok(usage_error("--point expects RE,IM"));
            };
            if depth < 1 {
                return Ok(usage_error("--depth must be at least 1"));
            }
            let m = load_map(&map)?;
            let ray = external_ray(&m, x, depth)?;
            let arcs: Vec<&feig_core::CurveApprox> = ray.arcs.iter().collect();
            export::write_curves_svg(&arcs, &svg)?;
            println!("ray target={},{} arcs={}", x.re, x.im, ray.arcs.len());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify {
            map,
            suite,
            seed,
            report,
        } => {
            let Some(suites) = Suite::parse(&suite) else {
                return Ok(usage_error("--suite expects core, ifs, markov, dim or all"));
            };
            let m = load_map(&map)?;
            let records = run_suites(&m, &suites, seed);
            let all_pass = records.iter().all(|r| !r.asserted() || r.passed());
            if let Some(path) = &report {
                write_json(
                    path,
                    &json!({
                        "suite": suite,
                        "seed": seed,
                        "checks": serde_json::to_value(&records)?
                    }),
                )?;
            }
            for r in &records {
                println!("{:<9} {} [{}]", r.status, r.name, r.paper_anchor);
            }
            if all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                let failing: Vec<&str> = records
                    .iter()
                    .filter(|r| r.asserted() && !r.passed())
                    .map(|r| r.name.as_str())
                    .collect();
                eprintln!("failed checks: {}", failing.join(", "));
                Ok(ExitCode::from(1))
            }
        }
    }
}
