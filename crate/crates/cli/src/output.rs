//! Rendering of results as JSON documents or flat CSV tables.

use std::io::Write;
use std::path::Path;

use polysplit_core::TestReport;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::experiments::{PowerCurve, SizeTable, SnrReport, StabilityReport, SimulationTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// A result that can be written in either format.
pub trait Render {
    fn json(&self) -> Result<String>;
    fn csv(&self) -> Result<String>;
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Input(e.to_string()))
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Input(e.to_string()))?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Input(e.to_string())
}

impl Render for TestReport {
    fn json(&self) -> Result<String> {
        to_json(self)
    }

    /// One row per split; the last row carries the combined result.
    fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let gammas = &self.config.gammas;
        let mut header: Vec<String> =
            ["split", "seed", "n_train", "n_test", "j2", "t1_chisq", "p_t1"].iter().map(|s| s.to_string()).collect();
        for g in gammas {
            header.push(format!("p_gamma_{g}"));
        }
        header.extend(["t_c", "p_c", "status"].iter().map(|s| s.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.per_split {
            let mut rec = vec![
                s.split_index.to_string(),
                s.split_seed.to_string(),
                s.n_train.to_string(),
                s.n_test.to_string(),
                s.j2_effective.to_string(),
                s.t1.chisq.to_string(),
                s.t1.p_value.to_string(),
            ];
            for g in gammas {
                let p = s.gamma_stats.iter().find(|x| x.gamma == *g).map(|x| x.p_value.to_string()).unwrap_or_default();
                rec.push(p);
            }
            rec.push(s.t_c.to_string());
            rec.push(s.p_c.to_string());
            rec.push(if s.failed() { "failed".into() } else { "ok".into() });
            w.write_record(&rec).map_err(csv_err)?;
        }
        let mut last = vec!["combined".to_string(), self.config.master_seed.to_string()];
        last.extend(std::iter::repeat(String::new()).take(5 + gammas.len()));
        last.push(self.t_dc.to_string());
        last.push(self.p_dc.to_string());
        last.push(format!("{} failed", self.failed_splits));
        w.write_record(&last).map_err(csv_err)?;
        finish(w)
    }
}

impl Render for SizeTable {
    fn json(&self) -> Result<String> {
        to_json(self)
    }
    fn csv(&self) -> Result<String> {
        csv_rows(&self.cells)
    }
}

impl Render for PowerCurve {
    fn json(&self) -> Result<String> {
        to_json(self)
    }
    fn csv(&self) -> Result<String> {
        csv_rows(&self.points)
    }
}

impl Render for StabilityReport {
    fn json(&self) -> Result<String> {
        to_json(self)
    }
    fn csv(&self) -> Result<String> {
        csv_rows(&self.rows)
    }
}

#[derive(Serialize)]
struct SnrCsvRow<'a> {
    candidate_set: &'a str,
    gamma: u32,
    n_eff: usize,
    mu_n_beta: f64,
    sigma_n1: f64,
    snr_n: f64,
    mu_2n_beta: f64,
    sigma_2n1: f64,
    snr_2n: f64,
    trace_r_xi: f64,
    delta_r_delta: f64,
    admissibility_ratio: f64,
    mc_reps: usize,
}

impl Render for SnrReport {
    fn json(&self) -> Result<String> {
        to_json(self)
    }
    fn csv(&self) -> Result<String> {
        let rows: Vec<SnrCsvRow> = self
            .rows
            .iter()
            .map(|r| {
                let e = &r.estimate;
                SnrCsvRow {
                    candidate_set: &r.candidate_set,
                    gamma: r.gamma,
                    n_eff: e.n_eff,
                    mu_n_beta: e.mu_n_beta,
                    sigma_n1: e.sigma_n1,
                    snr_n: e.snr_n,
                    mu_2n_beta: e.mu_2n_beta,
                    sigma_2n1: e.sigma_2n1,
                    snr_2n: e.snr_2n,
                    trace_r_xi: e.trace_r_xi,
                    delta_r_delta: e.delta_r_delta,
                    admissibility_ratio: e.admissibility_ratio,
                    mc_reps: e.mc_reps,
                }
            })
            .collect();
        csv_rows(&rows)
    }
}

impl Render for SimulationTruth {
    fn json(&self) -> Result<String> {
        to_json(self)
    }
    fn csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row {
            variant: usize,
            effect: f64,
        }
        let rows: Vec<Row> = self.effects.iter().enumerate().map(|(variant, &effect)| Row { variant, effect }).collect();
        csv_rows(&rows)
    }
}

pub fn render<R: Render>(value: &R, format: Format) -> Result<String> {
    match format {
        Format::Json => value.json(),
        Format::Csv => value.csv(),
    }
}

/// Write to `path`, or to standard output when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
            }
            std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source })
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}
