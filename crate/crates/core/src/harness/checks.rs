//! Pass/fail checks on study reports and stability sequences.

use serde::Serialize;

use super::report::{ConvergenceReport, LevelDiagnostics};
use super::{Family, Study};
use crate::verification::fitted_slope;

/// Largest admissible face-wise normal jump.
pub const NORMAL_JUMP_TOL: f64 = 1e-12;
/// KKT violations may exceed the Newton tolerance by this factor.
pub const KKT_FACTOR: f64 = 10.0;
/// Relative deviation of `λ_n` allowed on the middle of the crack.
pub const COMPRESSION_LAMBDA_TOL: f64 = 0.03;
pub const UNIFORMITY_RATIO: f64 = 2.0;
pub const ABLATION_RATIO: f64 = 4.0;
pub const CONSISTENCY_SLOPE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// EOCs of `column` all at least `min`.
pub fn eoc_at_least(report: &ConvergenceReport, column: &str, min: f64) -> Check {
    let name = format!("{}_{} eoc({column}) >= {min}", report.study.name(), report.family.name());
    match report.table.eoc(column) {
        Some(e) if !e.is_empty() => Check::new(name, e.iter().all(|&r| r >= min), fmt_list(&e)),
        _ => Check::new(name, false, "needs two levels"),
    }
}

/// EOCs of `column` all within `[lo, hi]`.
pub fn eoc_within(report: &ConvergenceReport, column: &str, lo: f64, hi: f64) -> Check {
    let name = format!("{}_{} eoc({column}) in [{lo}, {hi}]", report.study.name(), report.family.name());
    match report.table.eoc(column) {
        Some(e) if !e.is_empty() => Check::new(name, e.iter().all(|&r| r >= lo && r <= hi), fmt_list(&e)),
        _ => Check::new(name, false, "needs two levels"),
    }
}

/// Converged solves with face-wise KKT violations below `KKT_FACTOR · tol`.
/// The violations scaled by the multiplier and jump sizes are reported too.
pub fn kkt_check(label: &str, diagnostics: &[LevelDiagnostics], tol: f64) -> Check {
    let bound = KKT_FACTOR * tol;
    let worst = diagnostics.iter().map(|d| d.kkt.max()).fold(0.0, f64::max);
    let scaled = diagnostics.iter().map(|d| d.kkt_relative).fold(0.0, f64::max);
    let converged = diagnostics.iter().all(|d| d.solve.converged);
    Check::new(
        format!("{label} kkt <= {bound:.0e}"),
        converged && worst <= bound,
        format!(
            "{} solves, converged={converged}, worst violation {worst:.2e}, worst scaled {scaled:.2e}",
            diagnostics.len()
        ),
    )
}

pub fn normal_jump_check(label: &str, diagnostics: &[LevelDiagnostics]) -> Check {
    let jumps: Vec<f64> = diagnostics.iter().map(|d| d.max_normal_jump).collect();
    let open: Vec<usize> = diagnostics.iter().map(|d| d.open).collect();
    Check::new(
        format!("{label} max normal jump <= {NORMAL_JUMP_TOL:.0e}"),
        jumps.iter().all(|&j| j <= NORMAL_JUMP_TOL),
        format!("per level {} with {open:?} open faces", fmt_sci(&jumps)),
    )
}

/// The checks that apply to a finished study run.
pub fn study_checks(report: &ConvergenceReport, tol: f64) -> Vec<Check> {
    let label = format!("{}_{}", report.study.name(), report.family.name());
    let mut out = Vec::new();
    match (report.study, report.family) {
        (Study::Manufactured3d, Family::Cartesian) => {
            out.push(eoc_at_least(report, "u", 1.8));
            out.push(eoc_at_least(report, "jump", 1.8));
            out.push(eoc_at_least(report, "grad_u", 1.7));
            out.push(eoc_at_least(report, "lambda_n", 1.2));
        }
        (Study::Manufactured3d, Family::Tet) => {
            out.push(eoc_within(report, "grad_u", 0.8, 1.4));
            out.push(eoc_within(report, "lambda_n", 0.8, 1.4));
        }
        (Study::Compression2d, _) => {
            let mid = report.table.column("lambda_n_middle_max").unwrap_or_default();
            out.push(Check::new(
                format!("{label} lambda_n within {:.0}% on the middle 60%", COMPRESSION_LAMBDA_TOL * 100.0),
                !mid.is_empty() && mid.iter().all(|&m| m <= COMPRESSION_LAMBDA_TOL),
                format!("max relative deviation per level {}", fmt_sci(&mid)),
            ));
            out.push(eoc_at_least(report, "slip", 0.8));
            let l2 = report.table.column("lambda_n").unwrap_or_default();
            let mut c = eoc_at_least(report, "lambda_n", 1.0);
            c.passed &= l2.windows(2).all(|w| w[1] < w[0]);
            c.detail = format!("errors {} eoc {}", fmt_sci(&l2), c.detail);
            out.push(c);
        }
        _ => {}
    }
    out.push(kkt_check(&label, &report.diagnostics, tol));
    if report.study == Study::Manufactured3d {
        out.push(normal_jump_check(&label, &report.diagnostics));
    }
    out
}

/// Bounded ratio of the largest to the smallest positive value.
pub fn uniformity_check(name: &str, values: &[f64]) -> Check {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    Check::new(
        format!("{name} > 0 and max/min <= {UNIFORMITY_RATIO}"),
        !values.is_empty() && min > 0.0 && ratio <= UNIFORMITY_RATIO,
        format!("values {} ratio {ratio:.3}", fmt_sci(values)),
    )
}

/// The bubble-free constant is at least `ABLATION_RATIO` times smaller
/// than the full one on every level.
pub fn ablation_check(full: &[f64], ablated: &[f64]) -> Check {
    let ratios: Vec<f64> = full.iter().zip(ablated).map(|(a, b)| a / b).collect();
    Check::new(
        format!("infsup without bubbles degrades by >= {ABLATION_RATIO}x"),
        !ratios.is_empty() && ratios.iter().all(|&r| r >= ABLATION_RATIO),
        format!("ablated {} full/ablated {}", fmt_sci(ablated), fmt_sci(&ratios)),
    )
}

pub fn slope_check(name: &str, h: &[f64], e: &[f64]) -> Check {
    let s = fitted_slope(h, e);
    Check::new(
        format!("{name} fitted slope >= {CONSISTENCY_SLOPE}"),
        h.len() >= 2 && s >= CONSISTENCY_SLOPE,
        format!("values {} slope {s:.3}", fmt_sci(e)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ConvergenceTable, LevelRow};

    fn report(values: &[(f64, f64)]) -> ConvergenceReport {
        ConvergenceReport {
            study: Study::Manufactured3d,
            family: Family::Tet,
            table: ConvergenceTable {
                columns: vec!["grad_u".into(), "lambda_n".into()],
                rows: values
                    .iter()
                    .enumerate()
                    .map(|(i, &(h, e))| LevelRow {
                        level: i,
                        h,
                        n_cells: 1,
                        values: vec![e, e],
                    })
                    .collect(),
            },
            diagnostics: vec![],
        }
    }

    #[test]
    fn eoc_band() {
        let r = report(&[(1.0, 1.0), (0.5, 0.5)]);
        assert!(eoc_within(&r, "grad_u", 0.8, 1.4).passed);
        assert!(!eoc_at_least(&r, "grad_u", 1.5).passed);
        assert!(!eoc_at_least(&report(&[(1.0, 1.0)]), "grad_u", 0.0).passed);
        assert!(!eoc_at_least(&r, "missing", 0.0).passed);
    }

    #[test]
    fn ratios() {
        assert!(uniformity_check("c", &[0.5, 0.3, 0.26]).passed);
        assert!(!uniformity_check("c", &[0.5, 0.2]).passed);
        assert!(!uniformity_check("c", &[0.5, 0.0]).passed);
        assert!(ablation_check(&[0.3, 0.3], &[0.0, 0.05]).passed);
        assert!(!ablation_check(&[0.3], &[0.1]).passed);
    }

    #[test]
    fn line_format() {
        assert_eq!(Check::new("a", true, "b").line(), "PASS a: b");
        assert_eq!(Check::new("a", false, "b").line(), "FAIL a: b");
    }
}
