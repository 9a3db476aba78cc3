//! `report.csv`: task, variant, P, R, F1, MAE, rho, hyperparameters.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Classification,
    Regression,
}

/// Test-split metrics of one task. Classification rows carry P/R/F1,
/// regression rows MAE and rho.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: String,
    pub variant: String,
    pub kind: TaskKind,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub mae: Option<f64>,
    pub rho: Option<f64>,
    pub hyperparameters: String,
}

impl EvalReport {
    pub fn classification(task: &str, variant: &str, prf: super::metrics::Prf, hyper: &str) -> Self {
        EvalReport {
            task: task.to_string(),
            variant: variant.to_string(),
            kind: TaskKind::Classification,
            precision: Some(prf.precision),
            recall: Some(prf.recall),
            f1: Some(prf.f1),
            mae: None,
            rho: None,
            hyperparameters: sanitize(hyper),
        }
    }

    pub fn regression(task: &str, variant: &str, mae: f64, rho: f64, hyper: &str) -> Self {
        EvalReport {
            task: task.to_string(),
            variant: variant.to_string(),
            kind: TaskKind::Regression,
            precision: None,
            recall: None,
            f1: None,
            mae: Some(mae),
            rho: Some(rho),
            hyperparameters: sanitize(hyper),
        }
    }
}

/// Hyperparameter strings must not break the CSV.
fn sanitize(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

pub const REPORT_HEADER: &str = "task,variant,P,R,F1,MAE,rho,hyperparameters";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report_csv<W: Write>(out: &mut W, reports: &[EvalReport]) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.task,
            r.variant,
            cell(r.precision),
            cell(r.recall),
            cell(r.f1),
            cell(r.mae),
            cell(r.rho),
            r.hyperparameters
        )?;
    }
    Ok(())
}

/// Reads a report written by [`write_report_csv`]; `#` lines are skipped.
pub fn read_report_csv<R: BufRead>(reader: R, path: &Path) -> Result<Vec<EvalReport>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != REPORT_HEADER {
                return Err(Error::parse(path, i + 1, "unexpected report header"));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.splitn(8, ',').collect();
        if f.len() != 8 {
            return Err(Error::parse(path, i + 1, "expected 8 columns"));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::parse(path, i + 1, format!("bad number {s:?}")))
            }
        };
        let precision = num(f[2])?;
        let f1 = num(f[4])?;
        out.push(EvalReport {
            task: f[0].to_string(),
            variant: f[1].to_string(),
            kind: if f1.is_some() || precision.is_some() {
                TaskKind::Classification
            } else {
                TaskKind::Regression
            },
            precision,
            recall: num(f[3])?,
            f1,
            mae: num(f[5])?,
            rho: num(f[6])?,
            hyperparameters: f[7].to_string(),
        });
    }
    Ok(out)
}
