//! Aperture sweep: solve the eigenproblem at each aperture size h, track a
//! chosen skew mode across h by overlap (eigenvalue ordering would swap
//! modes at crossings), and fit log-log power laws to the outside norms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{apply_dirichlet, assemble};
use crate::geometry::{build_two_room_domain, DomainFamily};
use crate::localization::{measure, normalize, rank_localized, LocalizationReport, CSV_HEADER};
use crate::mesh::{interpolate_p1_clamped, triangulate, Mesh};
use crate::sparse::SparseSymMatrix;
use crate::symmetry::{classify_parity, disentangle_clusters, reflection_permutation, Parity};

/// Best-fit power law y = a x^b with r2 measured in log-log space.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

/// Which tracked mode to sweep: the `rank`-th skew mode, counted in
/// ascending-eigenvalue order among the modes classified skew at the
/// first h (rank 0 = first skew mode).
#[derive(Debug, Clone, Copy, Serialize)]
pub enum ModeSelector {
    SkewRank(usize),
    /// Most localized skew mode (smallest l2_outside) at the first h.
    MostLocalizedSkew,
}

impl Default for ModeSelector {
    fn default() -> Self {
        ModeSelector::SkewRank(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, clap::ValueEnum)]
pub enum Boundary {
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub family: DomainFamily,
    pub h_list: Vec<f64>,
    pub target_edge: f64,
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub mode_selector: ModeSelector,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub family: DomainFamily,
    pub parity: Parity,
    /// Eigenvalue of the tracked mode at the first (reference) h.
    pub reference_eigenvalue: f64,
    pub reports: Vec<LocalizationReport>,
    pub l2_fit: PowerLawFit,
    pub linf_fit: PowerLawFit,
}

/// Default grid: five h values logarithmically spaced over [0.05, 0.2],
/// descending so tracking starts from the widest aperture.
pub fn default_h_list() -> Vec<f64> {
    let (lo, hi) = (0.05f64.ln(), 0.2f64.ln());
    (0..5)
        .map(|i| (hi + (lo - hi) * i as f64 / 4.0).exp())
        .collect()
}

/// Ordinary least squares on (log x, log y).
///
/// Requires at least 3 points (arity error), all coordinates strictly
/// positive (domain error), and distinct x values.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::Parameter(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::Parameter(format!(
                "power-law fit requires strictly positive points, got ({x}, {y})"
            )));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter(
            "power-law fit requires distinct x values".into(),
        ));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let a = (my - b * mx).exp();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (a.ln() + b * p.0)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(PowerLawFit { a, b, r2 })
}

/// printf-style `%.Pg` formatting: P significant digits, trailing zeros
/// stripped, scientific notation outside [1e-4, 10^P).
pub fn format_g(v: f64, precision: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let p = precision.max(1);
    let exp = v.abs().log10().floor() as i32;
    // mirror printf %g: re-derive the exponent after rounding to p digits
    let rounded = format!("{:.*e}", p - 1, v);
    let exp: i32 = rounded
        .split(['e', 'E'])
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(exp);
    let strip = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if exp < -4 || exp >= p as i32 {
        let mantissa = strip(
            rounded
                .split(['e', 'E'])
                .next()
                .unwrap_or(&rounded)
                .to_string(),
        );
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip(format!("{:.*}", decimals, v))
    }
}

fn fit_cell(fit: &PowerLawFit) -> String {
    format!("y = {}x^{}", format_g(fit.a, 4), format_g(fit.b, 4))
}

/// Paper-style summary table: one column per tracked mode, rows for the
/// L2 and Linf fits. Byte-identical output for identical inputs.
pub fn emit_summary_table(results: &[SweepResult]) -> Result<String> {
    if results.is_empty() {
        return Err(Error::Parameter(
            "summary table needs at least one sweep result".into(),
        ));
    }
    let row_label_width = "L∞ Localization".chars().count();
    let headers: Vec<String> = results
        .iter()
        .map(|r| {
            format!(
                "{:?} mode {} ({})",
                r.family, r.reports[0].mode_index, r.parity
            )
        })
        .collect();
    let l2_cells: Vec<String> = results.iter().map(|r| fit_cell(&r.l2_fit)).collect();
    let linf_cells: Vec<String> = results.iter().map(|r| fit_cell(&r.linf_fit)).collect();
    let widths: Vec<usize> = headers
        .iter()
        .zip(&l2_cells)
        .zip(&linf_cells)
        .map(|((h, a), b)| h.chars().count().max(a.chars().count()).max(b.chars().count()))
        .collect();
    let pad = |s: &str, w: usize| {
        let len = s.chars().count();
        format!("{}{}", s, " ".repeat(w.saturating_sub(len)))
    };
    let mut out = String::new();
    out.push_str(&pad("", row_label_width));
    for (h, w) in headers.iter().zip(&widths) {
        out.push_str("  ");
        out.push_str(&pad(h, *w));
    }
    out.push('\n');
    for (label, cells) in [("L² Localization", &l2_cells), ("L∞ Localization", &linf_cells)] {
        out.push_str(&pad(label, row_label_width));
        for (c, w) in cells.iter().zip(&widths) {
            out.push_str("  ");
            out.push_str(&pad(c, *w));
        }
        out.push('\n');
    }
    Ok(out)
}

/// CSV for a list of reports, one row per (mode, h), with header.
pub fn sweep_csv(reports: &[LocalizationReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Reads EIGENLOCAL_THREADS; defaults to available parallelism.
pub fn thread_cap() -> usize {
    std::env::var("EIGENLOCAL_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Apply `f` to 0..n with at most `threads` worker threads; results keep
/// their index order.
fn parallel_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.min(n).max(1);
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<T>>> =
        (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

/// Everything the tracker needs from one aperture size.
pub struct SweepStage {
    pub h: f64,
    pub mesh: Mesh,
    pub stiffness: SparseSymMatrix,
    pub mass: SparseSymMatrix,
    pub eigenvalues: Vec<f64>,
    /// M-normalized full-length mode vectors.
    pub modes: Vec<Vec<f64>>,
    pub reports: Vec<LocalizationReport>,
}

/// Solve one aperture size end to end: geometry, mesh, assembly, solve,
/// parity disentangling, normalization, measurement.
pub fn solve_stage(cfg: &SweepConfig, h: f64) -> Result<SweepStage> {
    let spec = build_two_room_domain(cfg.family, h)?;
    let mesh = triangulate(&spec, cfg.target_edge)?;
    let (k_mat, m_mat) = assemble(&mesh)?;
    let (mut eigenvalues, mut modes) = match cfg.boundary {
        Boundary::Neumann => {
            let basis =
                crate::eigensolver::solve_smallest(&k_mat, &m_mat, cfg.k, cfg.tol, cfg.seed)?;
            (basis.eigenvalues, basis.eigenvectors)
        }
        Boundary::Dirichlet => {
            let boundary: Vec<usize> = {
                let mut v: Vec<usize> = mesh
                    .boundary_edges
                    .iter()
                    .flat_map(|e| [e[0], e[1]])
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            };
            let (kr, mr, dofs) = apply_dirichlet(&k_mat, &m_mat, &boundary)?;
            let basis = crate::eigensolver::solve_smallest(&kr, &mr, cfg.k, cfg.tol, cfg.seed)?;
            let vecs = basis
                .eigenvectors
                .iter()
                .map(|v| dofs.expand(v))
                .collect();
            (basis.eigenvalues, vecs)
        }
    };
    let axis = mesh.axis.clone().ok_or_else(|| {
        Error::Symmetry("sweep mesh carries no symmetry axis".into())
    })?;
    let perm = reflection_permutation(&mesh, &axis)?;
    disentangle_clusters(&k_mat, &m_mat, &perm, &mut eigenvalues, &mut modes, cfg.tol)?;
    let modes: Vec<Vec<f64>> = modes
        .iter()
        .map(|u| normalize(u, &m_mat))
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(modes.len());
    for (i, u) in modes.iter().enumerate() {
        let (parity, _) = classify_parity(&perm, u);
        reports.push(measure(&mesh, &m_mat, u, i, eigenvalues[i], h, parity)?);
    }
    Ok(SweepStage {
        h,
        mesh,
        stiffness: k_mat,
        mass: m_mat,
        eigenvalues,
        modes,
        reports,
    })
}

fn select_initial_mode(stage: &SweepStage, selector: ModeSelector) -> Result<usize> {
    let skew: Vec<usize> = (0..stage.reports.len())
        .filter(|&i| stage.reports[i].parity == Parity::Skew && stage.eigenvalues[i] > 1e-8)
        .collect();
    if skew.is_empty() {
        return Err(Error::Symmetry(format!(
            "no skew mode among the first {} eigenpairs at h = {}",
            stage.reports.len(),
            stage.h
        )));
    }
    match selector {
        ModeSelector::SkewRank(r) => skew.get(r).copied().ok_or_else(|| {
            Error::Parameter(format!(
                "skew mode rank {r} requested but only {} skew modes found",
                skew.len()
            ))
        }),
        ModeSelector::MostLocalizedSkew => {
            let skew_reports: Vec<LocalizationReport> =
                skew.iter().map(|&i| stage.reports[i].clone()).collect();
            let best = rank_localized(&skew_reports, 1)[0];
            Ok(skew[best])
        }
    }
}

/// M-weighted overlap between a candidate mode on `stage` and a reference
/// vector interpolated from the previous mesh (both M-normalized).
fn track_mode(prev: &SweepStage, prev_mode: usize, cur: &SweepStage) -> Result<(usize, f64)> {
    let interp = interpolate_p1_clamped(&prev.mesh, &prev.modes[prev_mode], &cur.mesh)?;
    let interp = normalize(&interp, &cur.mass)?;
    let m_interp = cur.mass.matvec_alloc(&interp);
    let mut best = (0usize, 0.0f64);
    for (i, u) in cur.modes.iter().enumerate() {
        let overlap: f64 = u.iter().zip(&m_interp).map(|(a, b)| a * b).sum::<f64>().abs();
        if overlap > best.1 {
            best = (i, overlap);
        }
    }
    Ok(best)
}

fn validate_h_list(cfg: &SweepConfig) -> Result<()> {
    if cfg.h_list.len() < 3 {
        return Err(Error::Parameter(format!(
            "sweep needs at least 3 aperture values for the fit, got {}",
            cfg.h_list.len()
        )));
    }
    let increasing = cfg.h_list.windows(2).all(|w| w[1] > w[0]);
    let decreasing = cfg.h_list.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::Parameter(
            "aperture list must be strictly monotone (all values distinct)".into(),
        ));
    }
    Ok(())
}

/// Full sweep. Appends each tracked report to `partial` as it is produced,
/// so callers can persist partial results when tracking or fitting fails.
pub fn run_sweep_with_partial(
    cfg: &SweepConfig,
    partial: &mut Vec<LocalizationReport>,
) -> Result<SweepResult> {
    validate_h_list(cfg)?;
    for &h in &cfg.h_list {
        // fail fast with the geometry's bound message before spawning work
        build_two_room_domain(cfg.family, h)?;
    }
    let stages: Vec<Result<SweepStage>> =
        parallel_map(cfg.h_list.len(), thread_cap(), |i| solve_stage(cfg, cfg.h_list[i]));
    let mut ok_stages = Vec::with_capacity(stages.len());
    for s in stages {
        ok_stages.push(s?);
    }
    let mut tracked = select_initial_mode(&ok_stages[0], cfg.mode_selector)?;
    let parity = ok_stages[0].reports[tracked].parity;
    let reference_eigenvalue = ok_stages[0].eigenvalues[tracked];
    partial.push(ok_stages[0].reports[tracked].clone());
    for w in 1..ok_stages.len() {
        let (best, overlap) = track_mode(&ok_stages[w - 1], tracked, &ok_stages[w])?;
        if overlap < 0.9 {
            return Err(Error::Tracking(format!(
                "mode lost between h = {} and h = {}: best overlap {overlap:.4} < 0.9",
                ok_stages[w - 1].h,
                ok_stages[w].h
            )));
        }
        tracked = best;
        partial.push(ok_stages[w].reports[tracked].clone());
    }
    let l2_points: Vec<(f64, f64)> =
        partial.iter().map(|r| (r.h, r.l2_outside)).collect();
    let linf_points: Vec<(f64, f64)> =
        partial.iter().map(|r| (r.h, r.linf_outside)).collect();
    let l2_fit = fit_power_law(&l2_points)?;
    let linf_fit = fit_power_law(&linf_points)?;
    Ok(SweepResult {
        family: cfg.family,
        parity,
        reference_eigenvalue,
        reports: partial.clone(),
        l2_fit,
        linf_fit,
    })
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let mut partial = Vec::new();
    run_sweep_with_partial(cfg, &mut partial)
}
