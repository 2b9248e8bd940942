//! Command-line pipeline: `eigs` (single aperture), `sweep` (aperture
//! sweep with fits and plots), `render` (heatmaps from a previous `eigs`
//! run). Configuration comes from an optional strict-schema JSON file,
//! overridden field by field by flags; every run writes a manifest with
//! the fully resolved config so outputs can be reproduced byte for byte.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainFamily;
use crate::localization::LocalizationReport;
use crate::render::{output_filename, render_loglog_svg, render_mode_svg};
use crate::sweep::{
    default_h_list, run_sweep_with_partial, solve_stage, sweep_csv, Boundary, ModeSelector,
    SweepConfig,
};

#[derive(Debug, Parser)]
#[command(name = "eigenlocal", version, about = "Neumann eigenfunctions and \
symmetry-induced localization on two-room planar domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one aperture size and write mesh, spectrum and mode vectors.
    Eigs(CommonArgs),
    /// Run the aperture sweep, fit power laws and emit table + plots.
    Sweep(CommonArgs),
    /// Render heatmaps for modes of a previous `eigs` run.
    Render(RenderArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON config file; flags override individual fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<DomainFamily>,
    /// Single aperture size (eigs) or fallback sweep value.
    #[arg(long)]
    pub h: Option<f64>,
    /// Comma-separated aperture list for sweeps.
    #[arg(long = "h-list", value_delimiter = ',')]
    pub h_list: Option<Vec<f64>>,
    /// Target mesh edge length.
    #[arg(long = "target-edge")]
    pub target_edge: Option<f64>,
    /// Number of eigenpairs.
    #[arg(long)]
    pub k: Option<usize>,
    /// Eigensolver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for all randomness in the run.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub boundary: Option<Boundary>,
    /// Output directory.
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Mode indices to render (comma-separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub modes: Vec<usize>,
}

fn default_target_edge() -> f64 {
    0.025
}
fn default_k() -> usize {
    12
}
fn default_tol() -> f64 {
    crate::eigensolver::DEFAULT_TOL
}
fn default_boundary() -> Boundary {
    Boundary::Neumann
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Fully resolved run configuration. Unknown JSON keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: DomainFamily,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub h_list: Option<Vec<f64>>,
    #[serde(default = "default_target_edge")]
    pub target_edge: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Rank of the tracked mode among the skew modes at the first h.
    #[serde(default)]
    pub mode_selector: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    fn sweep_config(&self) -> SweepConfig {
        let h_list = self
            .h_list
            .clone()
            .or_else(|| self.h.map(|h| vec![h]))
            .unwrap_or_else(default_h_list);
        SweepConfig {
            family: self.family,
            h_list,
            target_edge: self.target_edge,
            k: self.k,
            tol: self.tol,
            seed: self.seed,
            mode_selector: ModeSelector::SkewRank(self.mode_selector),
            boundary: self.boundary,
        }
    }
}

/// Merge the optional config file with flag overrides.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| {
                Error::Parameter(format!("config {}: {e}", path.display()))
            })?
        }
        None => {
            let family = args.family.ok_or_else(|| {
                Error::Parameter("--family is required when no --config is given".into())
            })?;
            RunConfig {
                family,
                h: None,
                h_list: None,
                target_edge: default_target_edge(),
                k: default_k(),
                tol: default_tol(),
                seed: 0,
                mode_selector: 0,
                boundary: default_boundary(),
                output_dir: default_out(),
            }
        }
    };
    if let Some(f) = args.family {
        cfg.family = f;
    }
    if let Some(h) = args.h {
        cfg.h = Some(h);
    }
    if let Some(hl) = &args.h_list {
        cfg.h_list = Some(hl.clone());
    }
    if let Some(e) = args.target_edge {
        cfg.target_edge = e;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(b) = args.boundary {
        cfg.boundary = b;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

/// Write atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_manifest(cfg: &RunConfig, command: &str) -> Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        tool: &'a str,
        version: &'a str,
        command: &'a str,
        config: &'a RunConfig,
    }
    write_json(
        &cfg.output_dir.join("manifest.json"),
        &Manifest {
            tool: "eigenlocal",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: cfg,
        },
    )
}

#[derive(Serialize, Deserialize)]
struct EigsFile {
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    parities: Vec<crate::symmetry::Parity>,
    seed: u64,
    tol: f64,
}

pub fn cmd_eigs(cfg: &RunConfig) -> Result<()> {
    let h = cfg.h.ok_or_else(|| {
        Error::Parameter("eigs needs a single aperture: set --h or \"h\" in the config".into())
    })?;
    let sweep_cfg = cfg.sweep_config();
    let stage = solve_stage(&sweep_cfg, h)?;
    let spec = crate::geometry::build_two_room_domain(cfg.family, h)?;
    let out = &cfg.output_dir;
    write_json(&out.join("domain.json"), &spec)?;
    write_json(&out.join("mesh.json"), &stage.mesh)?;
    let residuals: Vec<f64> = stage
        .modes
        .iter()
        .zip(&stage.eigenvalues)
        .map(|(u, &l)| {
            let ku = stage.stiffness.matvec_alloc(u);
            let mu = stage.mass.matvec_alloc(u);
            ku.iter()
                .zip(&mu)
                .map(|(a, b)| (a - l * b).powi(2))
                .sum::<f64>()
                .sqrt()
                / l.max(1.0)
        })
        .collect();
    write_json(
        &out.join("eigs.json"),
        &EigsFile {
            eigenvalues: stage.eigenvalues.clone(),
            residuals,
            parities: stage.reports.iter().map(|r| r.parity).collect(),
            seed: cfg.seed,
            tol: cfg.tol,
        },
    )?;
    for (i, u) in stage.modes.iter().enumerate() {
        let text: String = u.iter().map(|v| format!("{v:.17e}\n")).collect();
        write_atomic(&out.join(format!("mode_{i}.txt")), text.as_bytes())?;
    }
    write_atomic(
        &out.join("localization.csv"),
        sweep_csv(&stage.reports).as_bytes(),
    )?;
    write_manifest(cfg, "eigs")?;
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let sweep_cfg = cfg.sweep_config();
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out)?;
    let mut partial: Vec<LocalizationReport> = Vec::new();
    let result = match run_sweep_with_partial(&sweep_cfg, &mut partial) {
        Ok(r) => r,
        Err(e) => {
            // keep whatever tracked rows exist so a failed sweep is not a
            // total loss
            write_atomic(
                &out.join("sweep.csv.partial"),
                sweep_csv(&partial).as_bytes(),
            )?;
            return Err(e);
        }
    };
    write_atomic(&out.join("sweep.csv"), sweep_csv(&result.reports).as_bytes())?;
    write_json(&out.join("sweep.json"), &result)?;
    let table = crate::sweep::emit_summary_table(std::slice::from_ref(&result))?;
    write_atomic(&out.join("summary.txt"), table.as_bytes())?;
    let l2_points: Vec<(f64, f64)> =
        result.reports.iter().map(|r| (r.h, r.l2_outside)).collect();
    let linf_points: Vec<(f64, f64)> =
        result.reports.iter().map(|r| (r.h, r.linf_outside)).collect();
    let l2_svg = render_loglog_svg(&l2_points, &result.l2_fit, "Localization in L² norm")?;
    let linf_svg = render_loglog_svg(&linf_points, &result.linf_fit, "Localization in L∞ norm")?;
    write_atomic(&out.join("loglog_l2.svg"), l2_svg.as_bytes())?;
    write_atomic(&out.join("loglog_linf.svg"), linf_svg.as_bytes())?;
    write_manifest(cfg, "sweep")?;
    Ok(())
}

pub fn cmd_render(cfg: &RunConfig, modes: &[usize]) -> Result<()> {
    let out = &cfg.output_dir;
    let mesh_text = std::fs::read_to_string(out.join("mesh.json"))?;
    let mesh: crate::mesh::Mesh = serde_json::from_str(&mesh_text)?;
    let eigs_text = std::fs::read_to_string(out.join("eigs.json"))?;
    let eigs: EigsFile = serde_json::from_str(&eigs_text)?;
    let spec_text = std::fs::read_to_string(out.join("domain.json"))?;
    let spec: crate::geometry::DomainSpec = serde_json::from_str(&spec_text)?;
    for &mode in modes {
        if mode >= eigs.eigenvalues.len() {
            return Err(Error::Parameter(format!(
                "mode {mode} requested but the run holds {} modes",
                eigs.eigenvalues.len()
            )));
        }
        let text = std::fs::read_to_string(out.join(format!("mode_{mode}.txt")))?;
        let u: Vec<f64> = text
            .lines()
            .map(|l| {
                l.trim().parse::<f64>().map_err(|e| {
                    Error::Parameter(format!("mode_{mode}.txt: bad value: {e}"))
                })
            })
            .collect::<Result<_>>()?;
        let svg = render_mode_svg(&mesh, &u)?;
        let name = output_filename(
            &format!("{:?}", spec.family),
            spec.aperture_h,
            mode,
            "heatmap",
        );
        write_atomic(&out.join(name), svg.as_bytes())?;
    }
    write_manifest(cfg, "render")?;
    Ok(())
}

/// Entry point used by main: returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Eigs(args) => resolve_config(args).and_then(|cfg| cmd_eigs(&cfg)),
        Command::Sweep(args) => resolve_config(args).and_then(|cfg| cmd_sweep(&cfg)),
        Command::Render(args) => {
            resolve_config(&args.common).and_then(|cfg| cmd_render(&cfg, &args.modes))
        }
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
