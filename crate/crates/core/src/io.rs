//! File formats: systems and supply rates as JSON, trajectories as CSV,
//! certification reports as JSON with sorted keys.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certifier::Report;
use crate::error::{Error, Result};
use crate::lti::{StateSpace, Trajectory};
use crate::qdf::{QdfCoeff, SupplyRate};

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Rows to a matrix; an empty row list yields `0 x cols_if_empty`.
pub fn rows_to_matrix(rows: &[Vec<f64>], cols_if_empty: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, cols_if_empty));
    }
    let cols = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Format(format!("{name}: row {i} has {} entries, expected {cols}", rows[i].len())));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[derive(Debug, Serialize, Deserialize)]
struct SystemFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

/// Parses `{"A": [[..]], "B": .., "C": .., "D": ..}`; `n = 0` uses empty arrays
/// for `A`, `B`, `C` and takes `p x m` from `D`.
pub fn system_from_json(text: &str) -> Result<StateSpace> {
    let f: SystemFile = serde_json::from_str(text)?;
    let d = rows_to_matrix(&f.d, 0, "D")?;
    let (p, m) = d.shape();
    let n = f.a.len();
    let a = rows_to_matrix(&f.a, 0, "A")?;
    let b = if n == 0 { DMatrix::zeros(0, m) } else { rows_to_matrix(&f.b, m, "B")? };
    let c = if f.c.is_empty() { DMatrix::zeros(p, n) } else { rows_to_matrix(&f.c, n, "C")? };
    let c = if n == 0 { DMatrix::zeros(p, 0) } else { c };
    StateSpace::new(a, b, c, d)
}

pub fn system_to_json(sys: &StateSpace) -> String {
    let f = SystemFile {
        a: matrix_to_rows(sys.a()),
        b: matrix_to_rows(sys.b()),
        c: if sys.n() == 0 { Vec::new() } else { matrix_to_rows(sys.c()) },
        d: matrix_to_rows(sys.d()),
    };
    serde_json::to_string_pretty(&f).expect("system serializes")
}

#[derive(Debug, Serialize, Deserialize)]
struct SupplyFile {
    m: usize,
    p: usize,
    phi: Vec<Vec<f64>>,
}

/// Parses `{"m": .., "p": .., "phi": [[..]]}` with `phi` of size `(m+p)(M+1)`.
pub fn supply_from_json(text: &str) -> Result<SupplyRate> {
    let f: SupplyFile = serde_json::from_str(text)?;
    let phi = rows_to_matrix(&f.phi, 0, "phi")?;
    SupplyRate::custom(QdfCoeff::new(f.m + f.p, phi)?, f.m)
}

fn parse_row(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<f64>().map_err(|_| format!("'{f}' is not a number"))
        })
        .collect()
}

/// Reads rows `u_1..u_m, y_1..y_p`; a single non-numeric first row is taken as a header.
pub fn parse_trajectory_csv_str(text: &str, m: usize, p: usize) -> Result<Trajectory> {
    let q = m + p;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row = match parse_row(line) {
            Ok(r) => r,
            Err(_) if samples.is_empty() && lineno == first_content_line(text) => continue,
            Err(e) => return Err(Error::Format(format!("line {lineno}: {e}"))),
        };
        if row.len() != q {
            return Err(Error::Format(format!(
                "line {lineno}: expected {q} fields (m={m}, p={p}), found {}",
                row.len()
            )));
        }
        samples.push(DVector::from_vec(row));
    }
    if samples.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Trajectory::new(m, p, samples)
}

fn first_content_line(text: &str) -> usize {
    text.lines().position(|l| !l.trim().is_empty()).map_or(0, |i| i + 1)
}

pub fn parse_trajectory_csv(path: &Path, m: usize, p: usize) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path)?;
    parse_trajectory_csv_str(&text, m, p)
}

/// CSV with a `u1..,y1..` header and 17 significant digits per value.
pub fn trajectory_to_csv(w: &Trajectory) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=w.m())
        .map(|i| format!("u{i}"))
        .chain((1..=w.p()).map(|j| format!("y{j}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for s in w.samples() {
        let fields: Vec<String> = s.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// JSON report; keys come out sorted, so output is stable for a fixed input.
pub fn report_to_json(report: &Report, timestamp: Option<&str>) -> Value {
    let mut v = json!({
        "verdict": report.verdict.as_str(),
        "exit_code": report.verdict.exit_code(),
        "conclusive": report.conclusive,
        "explanation": report.explanation,
        "d": report.d,
        "supply_degree": report.supply_degree,
        "necessity_applicable": report.necessity_applicable,
        "rank_report": serde_json::to_value(&report.rank_report).expect("rank report serializes"),
    });
    let map = v.as_object_mut().expect("object literal");
    map.insert(
        "solver".into(),
        match &report.solver {
            Some(s) => json!({
                "status": serde_json::to_value(s.status).expect("status serializes"),
                "iterations": s.iterations,
                "variable_margin": finite(s.variable_margin),
                "lmi_margin": finite(s.lmi_margin),
                "margin_bound": s.margin_bound.map_or(Value::Null, finite),
                "tolerance": s.tolerance,
                "reduced_dim": s.reduced_dim,
            }),
            None => Value::Null,
        },
    );
    map.insert(
        "certificate".into(),
        match &report.certificate {
            Some(c) => json!({
                "psi": matrix_to_rows(c.psi.psi()),
                "psi_degree": c.psi.degree(),
                "P": c.p.as_ref().map(matrix_to_rows),
                "lmi_margins": {
                    "psi_min_eig": finite(c.lmi_margins.psi_min_eig),
                    "lmi_min_eig": finite(c.lmi_margins.lmi_min_eig),
                    "tolerance": c.lmi_margins.tolerance,
                },
            }),
            None => Value::Null,
        },
    );
    if let Some(ts) = timestamp {
        map.insert("timestamp".into(), json!(ts));
    }
    v
}
