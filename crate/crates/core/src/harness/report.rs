use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Family, Study};
use crate::contact::{KktReport, SolveReport};
use crate::verification::eoc;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: usize,
    pub h: f64,
    pub n_cells: usize,
    pub values: Vec<f64>,
}

/// Named error columns, one row per level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub columns: Vec<String>,
    pub rows: Vec<LevelRow>,
}

impl ConvergenceTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn h(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    /// EOCs of a column between consecutive rows.
    pub fn eoc(&self, name: &str) -> Option<Vec<f64>> {
        Some(eoc(&self.h(), &self.column(name)?))
    }

    /// Columns `level,h,n_cells`, the error columns, then `eoc_<name>` for
    /// each error column (empty on the first row).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["level".to_string(), "h".into(), "n_cells".into()];
        header.extend(self.columns.iter().cloned());
        header.extend(self.columns.iter().map(|c| format!("eoc_{c}")));
        out.write_record(&header).map_err(csv_error)?;
        let rates: Vec<Vec<f64>> = self.columns.iter().map(|c| self.eoc(c).unwrap()).collect();
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![r.level.to_string(), r.h.to_string(), r.n_cells.to_string()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            rec.extend(rates.iter().map(|e| if i == 0 { String::new() } else { e[i - 1].to_string() }));
            out.write_record(&rec).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Inverse of [`ConvergenceTable::write_csv`]; EOC columns are dropped.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[..3] != ["level", "h", "n_cells"] {
            return Err(Error::InvalidInput("unexpected CSV header".into()));
        }
        let columns: Vec<String> = header[3..].iter().take_while(|c| !c.starts_with("eoc_")).cloned().collect();
        let k = columns.len();
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad number `{s}`: {e}")));
        let parse_u = |s: &str| s.parse::<usize>().map_err(|e| Error::InvalidInput(format!("bad count `{s}`: {e}")));
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_error)?;
            rows.push(LevelRow {
                level: parse_u(&rec[0])?,
                h: parse_f(&rec[1])?,
                n_cells: parse_u(&rec[2])?,
                values: (0..k).map(|i| parse_f(&rec[3 + i])).collect::<Result<_>>()?,
            });
        }
        Ok(Self { columns, rows })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// Solver and contact-state data of one level.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub n_unknowns: usize,
    pub n_fracture_faces: usize,
    pub solve: SolveReport,
    pub kkt: KktReport,
    /// Largest KKT violation after dividing multiplier terms by the
    /// multiplier scale and jump terms by the jump scale.
    pub kkt_relative: f64,
    pub open: usize,
    pub stick: usize,
    pub slip: usize,
    pub max_normal_jump: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub study: Study,
    pub family: Family,
    pub table: ConvergenceTable,
    pub diagnostics: Vec<LevelDiagnostics>,
}

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.table.write_csv(w)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Plain-text table with EOCs for the terminal.
    pub fn summary(&self) -> String {
        let t = &self.table;
        let mut s = format!("{} / {}\n{:>6} {:>11} {:>8}", self.study.name(), self.family.name(), "level", "h", "cells");
        for c in &t.columns {
            s.push_str(&format!(" {:>16}", c));
        }
        s.push('\n');
        let rates: Vec<Vec<f64>> = t.columns.iter().map(|c| t.eoc(c).unwrap()).collect();
        for (i, r) in t.rows.iter().enumerate() {
            s.push_str(&format!("{:>6} {:>11.4e} {:>8}", r.level, r.h, r.n_cells));
            for (v, e) in r.values.iter().zip(&rates) {
                let rate = if i == 0 { "     ".to_string() } else { format!("{:5.2}", e[i - 1]) };
                s.push_str(&format!(" {:>10.3e} {rate}", v));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ConvergenceTable {
        ConvergenceTable {
            columns: vec!["u".into(), "jump".into()],
            rows: vec![
                LevelRow {
                    level: 8,
                    h: 0.125,
                    n_cells: 512,
                    values: vec![0.1 / 3.0, 1e-17],
                },
                LevelRow {
                    level: 16,
                    h: 0.0625,
                    n_cells: 4096,
                    values: vec![std::f64::consts::PI * 1e-3, 2.5e-18],
                },
            ],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = table();
        let mut a = Vec::new();
        t.write_csv(&mut a).unwrap();
        let back = ConvergenceTable::read_csv(a.as_slice()).unwrap();
        assert_eq!(back, t);
        for (x, y) in back.rows.iter().zip(&t.rows) {
            for (p, q) in x.values.iter().zip(&y.values) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
        let mut b = Vec::new();
        back.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("level,h,n_cells,u,jump,eoc_u,eoc_jump\n"));
    }

    #[test]
    fn table_eoc() {
        let t = table();
        assert!((t.eoc("jump").unwrap()[0] - 2.0).abs() < 1e-12);
        assert!(t.eoc("missing").is_none());
    }
}
