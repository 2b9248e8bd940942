//! Quantifying how much of a mode's mass leaks past the aperture.
//!
//! A mode is localized in Omega_1 when its L2 and Linf norms over the rest
//! of the domain (passage plus Omega_2) are small. Everything here assumes
//! M-normalized inputs, so `l2_outside` is directly the square root of the
//! mass fraction outside Omega_1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{norm_region, NormKind};
use crate::geometry::RegionTag;
use crate::mesh::Mesh;
use crate::sparse::SparseSymMatrix;
use crate::symmetry::Parity;

/// Scale `u` to unit M-norm and fix its sign. Errors on (numerically)
/// zero vectors.
pub fn normalize(u: &[f64], m: &SparseSymMatrix) -> Result<Vec<f64>> {
    let norm = m.quad_form(u, u).max(0.0).sqrt();
    if norm < 1e-12 {
        return Err(Error::Parameter(
            "cannot normalize a vector with M-norm below 1e-12".into(),
        ));
    }
    let mut out: Vec<f64> = u.iter().map(|&v| v / norm).collect();
    crate::eigensolver::fix_sign(&mut out);
    Ok(out)
}

/// Localization measurements for one mode at one aperture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub mode_index: usize,
    pub eigenvalue: f64,
    pub h: f64,
    pub l2_outside: f64,
    pub linf_outside: f64,
    pub parity: Parity,
}

impl LocalizationReport {
    /// CSV row: `mode,h,lambda,parity,l2_outside,linf_outside`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.mode_index, self.h, self.eigenvalue, self.parity, self.l2_outside,
            self.linf_outside
        )
    }
}

pub const CSV_HEADER: &str = "mode,h,lambda,parity,l2_outside,linf_outside";

/// Measure the outside norms of an M-normalized mode.
///
/// The input must satisfy u^T M u = 1 to 1e-8 (Contract error otherwise).
/// The regional L2 norms obey the Pythagorean identity
/// `l2_inside^2 + l2_outside^2 = 1` to 1e-10, which is asserted here.
pub fn measure(
    mesh: &Mesh,
    m: &SparseSymMatrix,
    u: &[f64],
    mode_index: usize,
    eigenvalue: f64,
    h: f64,
    parity: Parity,
) -> Result<LocalizationReport> {
    let mass = m.quad_form(u, u);
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::Contract(format!(
            "mode {mode_index} is not M-normalized: u^T M u = {mass}"
        )));
    }
    let outside = [RegionTag::Omega2, RegionTag::Passage];
    let inside = [RegionTag::Omega1];
    let l2_outside = norm_region(mesh, u, &outside, NormKind::L2)?;
    let l2_inside = norm_region(mesh, u, &inside, NormKind::L2)?;
    let pyth = l2_inside * l2_inside + l2_outside * l2_outside;
    if (pyth - mass).abs() > 1e-10 {
        return Err(Error::Contract(format!(
            "regional L2 norms violate the Pythagorean identity: \
             {l2_inside}^2 + {l2_outside}^2 = {pyth} vs total {mass}"
        )));
    }
    let linf_outside = norm_region(mesh, u, &outside, NormKind::Linf)?;
    Ok(LocalizationReport {
        mode_index,
        eigenvalue,
        h,
        l2_outside,
        linf_outside,
        parity,
    })
}

/// Indices of the `count` most localized modes, most localized first.
/// Sorts by ascending l2_outside, breaking ties by mode index; `count`
/// is clamped to the number of reports.
pub fn rank_localized(reports: &[LocalizationReport], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| {
        reports[a]
            .l2_outside
            .total_cmp(&reports[b].l2_outside)
            .then(reports[a].mode_index.cmp(&reports[b].mode_index))
    });
    order.truncate(count.min(reports.len()));
    order
}
