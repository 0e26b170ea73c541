use std::io::Write;

use rayon::prelude::*;

use super::{sphere_run_errors, AnalysisError, ErrorRecord};
use crate::flow::{FlowConfig, SchemeKind, StartPolicy};
use crate::linalg::CgConfig;
use crate::mesh::{build_sphere, Order};

/// Which parameter is refined between consecutive runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    /// Fixed mesh, decreasing step sizes.
    Temporal { subdivisions: u32, taus: Vec<f64> },
    /// Fixed step size, refined meshes.
    Spatial { subdivisions: Vec<u32>, tau: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub protocol: Protocol,
    pub scheme: SchemeKind,
    pub order: usize,
    pub degree: usize,
    pub radius: f64,
    pub t_end: f64,
    pub alpha: f64,
    pub cg: CgConfig,
    pub start: StartPolicy,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            protocol: Protocol::Temporal {
                subdivisions: 4,
                taus: vec![0.2, 0.1, 0.05, 0.025, 0.0125],
            },
            scheme: SchemeKind::Esfem,
            order: 3,
            degree: 2,
            radius: 2.0,
            t_end: 0.6,
            alpha: 0.0,
            cg: CgConfig::default(),
            start: StartPolicy::Matched,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EocRow {
    pub errors: ErrorRecord,
    /// Orders of `x, v, ν, H` against the previous row.
    pub eoc: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
    /// Set when a run failed; rows hold the runs before it.
    pub failure: Option<String>,
}

const HEADER: [&str; 10] = [
    "tau", "h", "err_x", "err_v", "err_nu", "err_H", "eoc_x", "eoc_v", "eoc_nu", "eoc_H",
];

impl EocTable {
    /// Builds the table, computing orders against the refined parameter.
    pub fn from_records(records: Vec<ErrorRecord>, temporal: bool) -> Self {
        let mut rows: Vec<EocRow> = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let eoc = (i > 0).then(|| {
                let p = &records[i - 1];
                let ratio = if temporal { p.tau / r.tau } else { p.h / r.h };
                let (a, b) = (p.values(), r.values());
                std::array::from_fn(|c| (a[c] / b[c]).ln() / ratio.ln())
            });
            rows.push(EocRow { errors: *r, eoc });
        }
        EocTable {
            rows,
            failure: None,
        }
    }

    /// Orders of one quantity (`0..4` for `x, v, ν, H`) between consecutive rows.
    pub fn orders(&self, quantity: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.eoc.map(|e| e[quantity]))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let io = |e: csv::Error| AnalysisError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER).map_err(io)?;
        for row in &self.rows {
            let e = &row.errors;
            let mut rec: Vec<String> = [e.tau, e.h, e.x, e.v, e.nu, e.curvature]
                .iter()
                .map(|v| v.to_string())
                .collect();
            match row.eoc {
                Some(o) => rec.extend(o.iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat(String::new()).take(4)),
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| AnalysisError::Io(e.to_string()))
    }

    /// Whitespace-separated columns for log-log plots.
    pub fn write_dat<W: Write>(&self, mut out: W) -> Result<(), AnalysisError> {
        let io = |e: std::io::Error| AnalysisError::Io(e.to_string());
        writeln!(out, "# {}", HEADER[..6].join(" ")).map_err(io)?;
        for row in &self.rows {
            let e = &row.errors;
            writeln!(
                out,
                "{:e} {:e} {:e} {:e} {:e} {:e}",
                e.tau, e.h, e.x, e.v, e.nu, e.curvature
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

fn validate(config: &StudyConfig) -> Result<Vec<(u32, f64)>, AnalysisError> {
    let bad = |m: &str| Err(AnalysisError::InvalidStudy(m.into()));
    let runs: Vec<(u32, f64)> = match &config.protocol {
        Protocol::Temporal { subdivisions, taus } => {
            if taus.windows(2).any(|w| !(w[1] < w[0])) {
                return bad("step sizes must be strictly decreasing");
            }
            taus.iter().map(|&t| (*subdivisions, t)).collect()
        }
        Protocol::Spatial { subdivisions, tau } => {
            if subdivisions.windows(2).any(|w| !(w[1] > w[0])) {
                return bad("subdivision levels must be strictly increasing");
            }
            subdivisions.iter().map(|&s| (s, *tau)).collect()
        }
    };
    if runs.is_empty() {
        return bad("no runs requested");
    }
    if Order::from_degree(config.degree).is_none() {
        return bad("element degree must be 1 or 2");
    }
    if !(config.radius > 0.0) {
        return bad("radius must be positive");
    }
    Ok(runs)
}

/// Runs the sphere flow for every step size or mesh of the protocol and
/// tabulates L∞-in-time K-norm errors with their orders.
///
/// Runs execute concurrently. A failing run truncates the table at the
/// first failure and records its message.
pub fn convergence_study(config: &StudyConfig) -> Result<EocTable, AnalysisError> {
    let runs = validate(config)?;
    let order = Order::from_degree(config.degree).expect("validated");
    let results: Vec<Result<ErrorRecord, AnalysisError>> = runs
        .par_iter()
        .map(|&(subdivisions, tau)| {
            let mesh = build_sphere(subdivisions, config.radius, order)?;
            let flow = FlowConfig {
                scheme: config.scheme,
                order: config.order,
                tau,
                t_end: config.t_end,
                alpha: config.alpha,
                cg: config.cg,
                start: config.start,
                ..FlowConfig::default()
            };
            sphere_run_errors(&mesh, config.radius, &flow).map(|(e, _)| e)
        })
        .collect();
    let mut records = Vec::new();
    let mut failure = None;
    for r in results {
        match r {
            Ok(e) => records.push(e),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let temporal = matches!(config.protocol, Protocol::Temporal { .. });
    let mut table = EocTable::from_records(records, temporal);
    table.failure = failure;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(tau: f64, h: f64, e: f64) -> ErrorRecord {
        ErrorRecord {
            t: 0.6,
            tau,
            h,
            x: e,
            v: 2.0 * e,
            nu: e,
            curvature: e,
        }
    }

    #[test]
    fn single_row_has_no_orders() {
        let t = EocTable::from_records(vec![record(0.1, 0.2, 1e-3)], true);
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].eoc.is_none());
        assert!(t.orders(0).is_empty());
    }

    #[test]
    fn orders_of_exact_power_laws() {
        let recs = (0..4)
            .map(|i| {
                let tau = 0.2 / 2f64.powi(i);
                record(tau, 0.3, tau.powi(3))
            })
            .collect();
        let t = EocTable::from_records(recs, true);
        for o in t.orders(2) {
            assert!((o - 3.0).abs() < 1e-12);
        }
        let recs = [0.4, 0.2, 0.1]
            .iter()
            .map(|&h: &f64| record(0.01, h, h * h))
            .collect();
        let t = EocTable::from_records(recs, false);
        for o in t.orders(0) {
            assert!((o - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let recs = vec![record(0.2, 0.3, 8e-3), record(0.1, 0.3, 1e-3)];
        let t = EocTable::from_records(recs, true);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "tau,h,err_x,err_v,err_nu,err_H,eoc_x,eoc_v,eoc_nu,eoc_H"
        );
        assert!(lines[1].ends_with(",,,,"));
        assert_eq!(lines[2].split(',').count(), 10);
    }

    #[test]
    fn invalid_protocols() {
        let mut c = StudyConfig {
            protocol: Protocol::Temporal {
                subdivisions: 1,
                taus: vec![0.1, 0.2],
            },
            ..StudyConfig::default()
        };
        assert!(convergence_study(&c).is_err());
        c.protocol = Protocol::Spatial {
            subdivisions: vec![],
            tau: 0.1,
        };
        assert!(convergence_study(&c).is_err());
    }
}
