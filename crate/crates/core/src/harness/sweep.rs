//! Parameter sweeps over the mean photon number.
//!
//! Grid points run in parallel; each uses the base seed, so neighbouring
//! points share random numbers and differences reflect the parameter only.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::report::write_rows;
use super::scenario::{run_scenario, ScenarioError};
use crate::keymath::{critical_qber, holevo_bound};

pub const SWEEP_HEADER: &str =
    "mu,clicks_per_pulse,qber,qber_ci_low,qber_ci_high,chi,h_qber,secret_fraction,secret_bits_per_packet,critical_qber";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub grid: Vec<f64>,
    pub base: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub clicks_per_pulse: f64,
    pub qber: Option<f64>,
    pub qber_ci_low: Option<f64>,
    pub qber_ci_high: Option<f64>,
    pub chi: f64,
    pub h_qber: Option<f64>,
    pub secret_fraction: Option<f64>,
    pub secret_bits_per_packet: f64,
    pub critical_qber: f64,
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

pub fn run_point(base: &ScenarioConfig, mu: f64) -> Result<SweepRow, ScenarioError> {
    let mut cfg = base.clone();
    cfg.protocol.mu = mu;
    let outcome = run_scenario(&cfg)?;
    let params = cfg.security_params();
    let row = match outcome.summary {
        Some(s) => SweepRow {
            mu,
            clicks_per_pulse: s.clicks_per_pulse,
            qber: s.qber,
            qber_ci_low: s.qber_ci.map(|c| c.0),
            qber_ci_high: s.qber_ci.map(|c| c.1),
            chi: s.chi,
            h_qber: s.h_qber,
            secret_fraction: s.secret_fraction,
            secret_bits_per_packet: s.secret_bits_per_packet,
            critical_qber: s.critical_qber,
        },
        None => SweepRow {
            mu,
            clicks_per_pulse: 0.0,
            qber: None,
            qber_ci_low: None,
            qber_ci_high: None,
            chi: holevo_bound(&params),
            h_qber: None,
            secret_fraction: None,
            secret_bits_per_packet: 0.0,
            critical_qber: critical_qber(&params),
        },
    };
    Ok(row)
}

/// One row per grid point, in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, ScenarioError> {
    spec.base.validate()?;
    spec.grid.par_iter().map(|mu| run_point(&spec.base, *mu)).collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    if rows.is_empty() {
        return writeln!(out, "{SWEEP_HEADER}");
    }
    write_rows(rows, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = log_grid(0.02, 0.5, 12);
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 0.02);
        assert_eq!(g[11], 0.5);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_grid(0.1, 0.5, 1), vec![0.1]);
    }

    #[test]
    fn header_matches_row_fields() {
        let row = SweepRow {
            mu: 0.1,
            clicks_per_pulse: 1e-4,
            qber: Some(0.05),
            qber_ci_low: Some(0.04),
            qber_ci_high: Some(0.06),
            chi: 0.4,
            h_qber: Some(0.28),
            secret_fraction: Some(0.3),
            secret_bits_per_packet: 2.0,
            critical_qber: 0.12,
        };
        let mut buf = Vec::new();
        write_sweep_csv(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER);
        let back: SweepRow = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .next()
            .unwrap()
            .unwrap();
        assert_eq!(back, row);
    }
}
