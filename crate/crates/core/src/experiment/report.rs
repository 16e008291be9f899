use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::runner::ExperimentRecord;
use super::ExperimentError;
use crate::bounds::BoundId;

pub const CSV_HEADER: [&str; 18] = [
    "p",
    "T",
    "k",
    "size_x",
    "size_y",
    "exact",
    "trivial",
    "theorem1",
    "cor1",
    "cor2",
    "oldcor_gar1",
    "fs_xy",
    "gar_78",
    "gaka_34",
    "ratio_theorem1",
    "below_threshold",
    "admissible_ell",
    "seed",
];

const CSV_BOUNDS: [BoundId; 8] = [
    BoundId::Trivial,
    BoundId::Theorem1,
    BoundId::Cor1,
    BoundId::Cor2,
    BoundId::OldcorGar1,
    BoundId::FsXy,
    BoundId::Gar78,
    BoundId::Gaka34,
];

/// Allowed excess of `W` over `|X||Y|` from rounding.
const TRIVIAL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// One row per cell. Failed cells keep their grid coordinates and leave the
/// numeric columns empty.
pub fn write_csv<W: Write>(record: &ExperimentRecord, out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for cell in &record.cells {
        let mut row = vec![
            cell.p.to_string(),
            cell.order.to_string(),
            cell.k.to_string(),
            cell.size_x.to_string(),
            cell.size_y.to_string(),
        ];
        match &cell.report {
            Some(r) => {
                let trivial = (r.size_x as f64) * (r.size_y as f64);
                if r.exact > trivial * (1.0 + TRIVIAL_SLACK) {
                    return Err(ExperimentError::Check(format!(
                        "p = {}, T = {}, k = {}: exact {} exceeds |X||Y| = {trivial}",
                        r.p, r.order, r.k, r.exact
                    )));
                }
                row.push(r.exact.to_string());
                row.extend(CSV_BOUNDS.iter().map(|&id| r.value(id).to_string()));
                row.push(sig12(r.ratio(BoundId::Theorem1)));
                row.push(r.below_threshold.to_string());
                row.push(r.admissible_ell.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 12)),
        }
        row.push(cell.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn write_json<W: Write>(record: &ExperimentRecord, mut out: W) -> Result<(), ExperimentError> {
    serde_json::to_writer_pretty(&mut out, record)?;
    writeln!(out).map_err(|source| ExperimentError::Io {
        path: "<json>".into(),
        source,
    })
}

/// Write `record` to `path`, or to stdout when `path` is `None`.
pub fn emit_report(
    record: &ExperimentRecord,
    format: ReportFormat,
    path: Option<&Path>,
) -> Result<(), ExperimentError> {
    let sink: Box<dyn Write> = match path {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| {
            ExperimentError::Io {
                path: path.to_path_buf(),
                source,
            }
        })?)),
        None => Box::new(io::stdout().lock()),
    };
    match format {
        ReportFormat::Csv => write_csv(record, sink),
        ReportFormat::Json => write_json(record, sink),
    }
}
