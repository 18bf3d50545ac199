//! Columnar plot-data projections from a run directory, consumable by any
//! plotting tool: `x<TAB>y[<TAB>series]`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::harness::runner::{ENSEMBLES_FILE, METRICS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotSeries {
    BurstCurve,
    Modulators,
    Ensembles,
}

impl PlotSeries {
    pub fn parse(name: &str) -> Result<PlotSeries, PlotError> {
        match name {
            "burst_curve" => Ok(PlotSeries::BurstCurve),
            "modulators" => Ok(PlotSeries::Modulators),
            "ensembles" => Ok(PlotSeries::Ensembles),
            other => Err(PlotError::UnknownSeries(other.to_string())),
        }
    }

    fn file_name(self) -> &'static str {
        match self {
            PlotSeries::BurstCurve => "plot_burst_curve.tsv",
            PlotSeries::Modulators => "plot_modulators.tsv",
            PlotSeries::Ensembles => "plot_ensembles.tsv",
        }
    }
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("unknown plot series `{0}`")]
    UnknownSeries(String),
    #[error("malformed log line: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn columns(line: &str) -> Vec<&str> {
    line.split('\t').collect()
}

/// Project the requested series out of a run directory and write it next to
/// the logs. Returns the written path.
pub fn emit_plotdata(run_dir: &Path, series: PlotSeries) -> Result<PathBuf, PlotError> {
    let mut out = String::new();
    match series {
        PlotSeries::BurstCurve => {
            let text = std::fs::read_to_string(run_dir.join(METRICS_FILE))?;
            for line in text.lines().skip(1) {
                let c = columns(line);
                if c.len() < 2 {
                    return Err(PlotError::Malformed(line.to_string()));
                }
                let _ = writeln!(out, "{}\t{}", c[0], c[1]);
            }
        }
        PlotSeries::Modulators => {
            let text = std::fs::read_to_string(run_dir.join(METRICS_FILE))?;
            for line in text.lines().skip(1) {
                let c = columns(line);
                if c.len() < 10 {
                    return Err(PlotError::Malformed(line.to_string()));
                }
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", c[0], c[6], c[7], c[8], c[9]);
            }
        }
        PlotSeries::Ensembles => {
            let text = std::fs::read_to_string(run_dir.join(ENSEMBLES_FILE))?;
            for line in text.lines().skip(1) {
                let c = columns(line);
                if c.len() < 3 {
                    return Err(PlotError::Malformed(line.to_string()));
                }
                // x = window, y = ensemble size, series = ensemble id
                let _ = writeln!(out, "{}\t{}\t{}", c[0], c[2], c[1]);
            }
        }
    }
    let path = run_dir.join(series.file_name());
    std::fs::write(&path, out)?;
    Ok(path)
}
