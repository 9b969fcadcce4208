//! `milnor`: relative homology of real Milnor fibres from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use milnor_core::oracle::{self, MeshComplex};
use milnor_core::pipeline::{self, AnalysisConfig, SignChoice};
use milnor_core::report;
use milnor_core::sphcrit::{self, SolverConfig};
use milnor_core::Polynomial;

#[derive(Parser)]
#[command(
    name = "milnor",
    version,
    about = "Relative homology of real Milnor fibres"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: perturb, find sphere critical points, count handles, optionally verify with a mesh.
    Analyze(AnalyzeArgs),
    /// Critical points of f_t restricted to the sphere of radius delta.
    CriticalPoints(CommonArgs),
    /// Mesh the fibre and compute its relative homology directly.
    Oracle(MeshArgs),
    /// Mesh the fibre and write it as an OFF file.
    ExportMesh(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct CommonArgs {
    /// Polynomial, e.g. "x^3 - y^2". Multiplication needs an explicit '*'.
    #[arg(short = 'p', long = "poly", allow_hyphen_values = true)]
    poly: String,
    /// Comma-separated variable names.
    #[arg(short = 'v', long = "vars", value_delimiter = ',', required = true)]
    vars: Vec<String>,
    /// Sphere radius.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Perturbation vector, comma separated: f_t = f - sum t_i x_i.
    #[arg(long = "t", value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multi-start count for the critical-point solver.
    #[arg(long)]
    num_starts: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Fibre level; chosen automatically when omitted.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Which fibre: + (positive), - (negative) or both.
    #[arg(long, default_value = "+", value_parser = parse_sign, allow_hyphen_values = true)]
    sign: SignChoice,
    /// Verify the ranks with the mesh oracle.
    #[arg(long)]
    oracle: bool,
    /// Mesh grid spacing.
    #[arg(long)]
    resolution: Option<f64>,
    /// Write the oracle mesh to this OFF file (implies --oracle).
    #[arg(long)]
    export_mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    max_attempts: usize,
    /// Initial perturbation magnitude.
    #[arg(long)]
    magnitude: Option<f64>,
}

#[derive(Args)]
struct MeshArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Fibre level. When omitted the full analysis picks t and the level.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    /// Output OFF path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_sign(s: &str) -> Result<SignChoice, String> {
    match s {
        "+" | "positive" | "pos" => Ok(SignChoice::Positive),
        "-" | "negative" | "neg" => Ok(SignChoice::Negative),
        "both" | "+-" | "±" => Ok(SignChoice::Both),
        _ => Err(format!("expected +, - or both, got {s:?}")),
    }
}

fn config_from(common: &CommonArgs) -> AnalysisConfig {
    let vars: Vec<&str> = common.vars.iter().map(|s| s.trim()).collect();
    let mut c = AnalysisConfig::new(&common.poly, &vars);
    c.delta = common.delta;
    c.t = common.t.clone();
    c.seed = common.seed;
    c.num_starts = common.num_starts;
    c
}

type CliResult = Result<u8, String>;

fn configure_threads() {
    if let Some(n) = std::env::var("MILNOR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn analyze(args: &AnalyzeArgs) -> CliResult {
    let mut c = config_from(&args.common);
    c.epsilon = args.epsilon;
    c.sign = args.sign;
    c.oracle = args.oracle || args.export_mesh.is_some();
    c.resolution = args.resolution;
    c.max_attempts = args.max_attempts;
    c.magnitude = args.magnitude;
    let analysis = pipeline::analyze(&c).map_err(|e| e.to_string())?;
    if let Some(path) = &args.export_mesh {
        let many = analysis.meshes.len() > 1;
        for (sign, mesh) in &analysis.meshes {
            let p = if many && *sign == milnor_core::fibre::Sign::Negative {
                negative_path(path)
            } else {
                path.clone()
            };
            write_mesh(&p, mesh)?;
        }
    }
    let e = &analysis.envelope;
    match args.common.format {
        Format::Json => print!("{}", report::report_json(e)),
        Format::Text => print!("{}", report::report_text(e)),
    }
    Ok(e.exit_code as u8)
}

fn negative_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.negative.{}", ext.to_string_lossy()),
        None => format!("{stem}.negative"),
    };
    path.with_file_name(name)
}

fn write_mesh(path: &Path, mesh: &MeshComplex) -> Result<(), String> {
    std::fs::write(path, oracle::write_off(mesh))
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    eprintln!(
        "wrote {} vertices and {} cells to {}",
        mesh.vertices.len(),
        mesh.cells.len(),
        path.display()
    );
    Ok(())
}

fn parse_poly(common: &CommonArgs) -> Result<Polynomial, String> {
    let vars: Vec<String> = common.vars.iter().map(|s| s.trim().to_string()).collect();
    let f = Polynomial::parse(&common.poly, &vars).map_err(|e| e.to_string())?;
    match &common.t {
        Some(t) => f.perturb_f64(t).map_err(|e| e.to_string()),
        None => Ok(f),
    }
}

fn critical_points(args: &CommonArgs) -> CliResult {
    let f_t = parse_poly(args)?;
    let mut cfg = SolverConfig::for_problem(f_t.nvars(), args.delta);
    cfg.seed = args.seed;
    if let Some(n) = args.num_starts {
        cfg.num_starts = n;
    }
    let search =
        sphcrit::find_critical_points(&f_t, args.delta, &cfg).map_err(|e| e.to_string())?;
    match args.format {
        Format::Json => print!(
            "{}",
            report::canonical_json(&json!({
                "schema_version": pipeline::SCHEMA_VERSION,
                "polynomial": f_t.to_string(),
                "delta": args.delta,
                "exhaustive": search.exhaustive,
                "warnings": search.warnings,
                "points": search.points,
            }))
        ),
        Format::Text => {
            println!(
                "critical points of {} on the sphere of radius {}",
                f_t, args.delta
            );
            for p in &search.points {
                let idx = p.morse_index.map_or("-".to_string(), |k| k.to_string());
                println!(
                    "  value {:.12}  index {idx}  multiplier {:.12}  at {:?}",
                    p.value, p.multiplier, p.location
                );
            }
            for w in &search.warnings {
                println!("  warning: {w}");
            }
        }
    }
    Ok(0)
}

/// Builds the mesh either directly at `--epsilon` or through the full analysis.
fn build_mesh(args: &MeshArgs) -> Result<(MeshComplex, u8), String> {
    let common = &args.common;
    match args.epsilon {
        Some(eps) => {
            let f_t = parse_poly(common)?;
            let res = args
                .resolution
                .unwrap_or_else(|| oracle::default_resolution(f_t.nvars(), common.delta));
            let mesh = oracle::extract_fibre_adaptive(&f_t, eps, common.delta, res)
                .map_err(|e| e.to_string())?;
            Ok((mesh, 0))
        }
        None => {
            let mut c = config_from(common);
            c.oracle = true;
            c.resolution = args.resolution;
            let a = pipeline::analyze(&c).map_err(|e| e.to_string())?;
            let code = a.envelope.exit_code as u8;
            let mesh = a
                .meshes
                .into_iter()
                .next()
                .map(|(_, m)| m)
                .ok_or("no mesh was produced (empty fibre or unsupported dimension)")?;
            Ok((mesh, code))
        }
    }
}

fn run_oracle(args: &MeshArgs) -> CliResult {
    let (mesh, code) = build_mesh(args)?;
    let h = oracle::relative_homology_mesh(&mesh).map_err(|e| e.to_string())?;
    match args.common.format {
        Format::Json => print!(
            "{}",
            report::canonical_json(&json!({
                "schema_version": pipeline::SCHEMA_VERSION,
                "level": mesh.level,
                "delta": mesh.delta,
                "resolution": mesh.resolution,
                "vertices": mesh.vertices.len(),
                "cells": mesh.cells.len(),
                "boundary_vertices": mesh.boundary_vertices.len(),
                "homology": h,
            }))
        ),
        Format::Text => {
            println!(
                "mesh at level {:e}: {} vertices, {} cells, {} boundary vertices (resolution {:e})",
                mesh.level,
                mesh.vertices.len(),
                mesh.cells.len(),
                mesh.boundary_vertices.len(),
                mesh.resolution
            );
            print!("{h}");
            println!("  euler_rel = {}", h.euler_rel);
        }
    }
    Ok(code)
}

fn export_mesh(args: &ExportArgs) -> CliResult {
    let (mesh, code) = build_mesh(&args.mesh)?;
    write_mesh(&args.out, &mesh)?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::CriticalPoints(a) => critical_points(a),
        Command::Oracle(a) => run_oracle(a),
        Command::ExportMesh(a) => export_mesh(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
