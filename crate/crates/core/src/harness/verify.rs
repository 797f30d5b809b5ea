//! Stability and consistency measurements over a mesh sequence.

use std::str::FromStr;

use serde::Serialize;

use super::checks::{ablation_check, slope_check, uniformity_check, Check};
use crate::reconstruction::Discretization;
use crate::verification::{
    adjoint_consistency_exact, consistency_error, infsup_constant, interpolate_displacement, korn_constant,
    BubbleCoupling, ManufacturedTresca,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyKind {
    Infsup,
    Korn,
    /// Primal and adjoint consistency of the manufactured solution; meshes
    /// must cover `(−1,1)³` with the fracture on `x = 0`.
    Consistency,
}

impl FromStr for VerifyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infsup" => Ok(Self::Infsup),
            "korn" => Ok(Self::Korn),
            "consistency" => Ok(Self::Consistency),
            _ => Err(Error::InvalidInput(format!("unknown check `{s}`"))),
        }
    }
}

/// Measured values on one mesh; unused entries stay `None`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyRow {
    pub n_cells: usize,
    /// `N_cells^{-1/d}`
    pub h: f64,
    pub infsup: Option<f64>,
    pub infsup_ablated: Option<f64>,
    pub korn: Option<f64>,
    pub consistency: Option<f64>,
    pub adjoint: Option<f64>,
}

pub fn verify_row(disc: &Discretization, kind: VerifyKind) -> Result<VerifyRow> {
    let n_cells = disc.mesh.cells.len();
    let mut row = VerifyRow {
        n_cells,
        h: (n_cells as f64).powf(-1.0 / disc.dim() as f64),
        ..Default::default()
    };
    match kind {
        VerifyKind::Infsup => {
            row.infsup = Some(infsup_constant(disc, BubbleCoupling::Included)?);
            row.infsup_ablated = Some(infsup_constant(disc, BubbleCoupling::Ablated)?);
        }
        VerifyKind::Korn => row.korn = Some(korn_constant(disc)?),
        VerifyKind::Consistency => {
            let sol = ManufacturedTresca::default();
            let v = interpolate_displacement(disc, &sol);
            row.consistency = Some(consistency_error(disc, &sol, &v));
            row.adjoint = Some(adjoint_consistency_exact(disc, &sol)?);
        }
    }
    Ok(row)
}

/// Checks on a sequence of rows of one kind. A single mesh only gets the
/// positivity part of the uniformity checks.
pub fn verify_checks(rows: &[VerifyRow], kind: VerifyKind) -> Vec<Check> {
    let col = |f: fn(&VerifyRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<f64>>();
    match kind {
        VerifyKind::Infsup => {
            let full = col(|r| r.infsup);
            vec![uniformity_check("infsup", &full), ablation_check(&full, &col(|r| r.infsup_ablated))]
        }
        VerifyKind::Korn => vec![uniformity_check("korn", &col(|r| r.korn))],
        VerifyKind::Consistency => {
            let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
            vec![
                slope_check("primal consistency", &h, &col(|r| r.consistency)),
                slope_check("adjoint consistency", &h, &col(|r| r.adjoint)),
            ]
        }
    }
}
