//! CSV export and re-import of sweep reports.
//!
//! Four files are written into the output directory:
//!
//! - `p_fap.csv`: FAP counts and percentages per MPC group, one row per frequency.
//! - `fap_snr.csv`: quartiles of the FAP SNR (dB).
//! - `errors.csv`: receiver and failure counts with median errors.
//! - `cdf.csv`: sorted error samples with their empirical probability `k/n`,
//!   tagged by frequency and estimator (`dnls`, `lls`, `peb`).
//!
//! Floats are written in shortest round-trip form, so [`load_report`]
//! reconstructs the report exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, FrequencyResult, SweepReport};
use crate::materials::BandLabel;

pub const P_FAP_FILE: &str = "p_fap.csv";
pub const FAP_SNR_FILE: &str = "fap_snr.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const CDF_FILE: &str = "cdf.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        count: v.len(),
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct PFapRow {
    frequency_hz: f64,
    band: BandLabel,
    n_mpc1: usize,
    n_mpc2: usize,
    n_mpc3: usize,
    n_mpc4: usize,
    p_mpc1: f64,
    p_mpc2: f64,
    p_mpc3: f64,
    p_mpc4: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnrRow {
    frequency_hz: f64,
    count: usize,
    min: Option<f64>,
    q1: Option<f64>,
    median: Option<f64>,
    q3: Option<f64>,
    max: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorRow {
    frequency_hz: f64,
    receivers: usize,
    excluded: usize,
    dnls_failures: usize,
    lls_failures: usize,
    peb_failures: usize,
    dnls_median_m: Option<f64>,
    lls_median_m: Option<f64>,
    peb_median_m: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CdfRow {
    frequency_hz: f64,
    estimator: String,
    error_m: f64,
    probability: f64,
}

const P_FAP_HEADER: [&str; 10] = [
    "frequency_hz",
    "band",
    "n_mpc1",
    "n_mpc2",
    "n_mpc3",
    "n_mpc4",
    "p_mpc1",
    "p_mpc2",
    "p_mpc3",
    "p_mpc4",
];
const SNR_HEADER: [&str; 7] = ["frequency_hz", "count", "min", "q1", "median", "q3", "max"];
const ERROR_HEADER: [&str; 9] = [
    "frequency_hz",
    "receivers",
    "excluded",
    "dnls_failures",
    "lls_failures",
    "peb_failures",
    "dnls_median_m",
    "lls_median_m",
    "peb_median_m",
];
const CDF_HEADER: [&str; 4] = ["frequency_hz", "estimator", "error_m", "probability"];

fn csv_err(file: &str, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Csv {
        file: file.to_owned(),
        message: e.to_string(),
    }
}

fn write_csv<T: Serialize>(dir: &Path, file: &str, header: &[&str], rows: &[T]) -> Result<(), ExperimentError> {
    let out = BufWriter::new(File::create(dir.join(file))?);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header).map_err(|e| csv_err(file, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(file, e))?;
    }
    w.into_inner().map_err(|e| csv_err(file, e))?.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(dir: &Path, file: &str) -> Result<Vec<T>, ExperimentError> {
    let reader = BufReader::new(File::open(dir.join(file))?);
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| csv_err(file, e))
}

fn median(sorted: &[f64]) -> Option<f64> {
    (!sorted.is_empty()).then(|| quantile(sorted, 0.5))
}

const ESTIMATORS: [&str; 3] = ["dnls", "lls", "peb"];

fn samples<'a>(r: &'a FrequencyResult, estimator: &str) -> &'a [f64] {
    match estimator {
        "dnls" => &r.dnls_errors,
        "lls" => &r.lls_errors,
        _ => &r.peb,
    }
}

/// Writes the report CSVs into `dir`, creating it if needed.
pub fn export_report(report: &SweepReport, dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let p_rows: Vec<PFapRow> = report
        .results
        .iter()
        .map(|r| PFapRow {
            frequency_hz: r.frequency_hz,
            band: r.band,
            n_mpc1: r.fap_counts[0],
            n_mpc2: r.fap_counts[1],
            n_mpc3: r.fap_counts[2],
            n_mpc4: r.fap_counts[3],
            p_mpc1: r.p_fap[0],
            p_mpc2: r.p_fap[1],
            p_mpc3: r.p_fap[2],
            p_mpc4: r.p_fap[3],
        })
        .collect();
    write_csv(dir, P_FAP_FILE, &P_FAP_HEADER, &p_rows)?;

    let snr_rows: Vec<SnrRow> = report
        .results
        .iter()
        .map(|r| {
            let q = r.fap_snr;
            SnrRow {
                frequency_hz: r.frequency_hz,
                count: q.map_or(0, |q| q.count),
                min: q.map(|q| q.min),
                q1: q.map(|q| q.q1),
                median: q.map(|q| q.median),
                q3: q.map(|q| q.q3),
                max: q.map(|q| q.max),
            }
        })
        .collect();
    write_csv(dir, FAP_SNR_FILE, &SNR_HEADER, &snr_rows)?;

    let err_rows: Vec<ErrorRow> = report
        .results
        .iter()
        .map(|r| ErrorRow {
            frequency_hz: r.frequency_hz,
            receivers: r.receivers,
            excluded: r.excluded,
            dnls_failures: r.dnls_failures,
            lls_failures: r.lls_failures,
            peb_failures: r.peb_failures,
            dnls_median_m: median(&r.dnls_errors),
            lls_median_m: median(&r.lls_errors),
            peb_median_m: median(&r.peb),
        })
        .collect();
    write_csv(dir, ERRORS_FILE, &ERROR_HEADER, &err_rows)?;

    let mut cdf_rows = Vec::new();
    for r in &report.results {
        for est in ESTIMATORS {
            let s = samples(r, est);
            let n = s.len();
            for (k, &e) in s.iter().enumerate() {
                cdf_rows.push(CdfRow {
                    frequency_hz: r.frequency_hz,
                    estimator: est.to_owned(),
                    error_m: e,
                    probability: (k + 1) as f64 / n as f64,
                });
            }
        }
    }
    write_csv(dir, CDF_FILE, &CDF_HEADER, &cdf_rows)
}

/// Reads a report previously written by [`export_report`].
pub fn load_report(dir: &Path) -> Result<SweepReport, ExperimentError> {
    let p_rows: Vec<PFapRow> = read_csv(dir, P_FAP_FILE)?;
    let snr_rows: Vec<SnrRow> = read_csv(dir, FAP_SNR_FILE)?;
    let err_rows: Vec<ErrorRow> = read_csv(dir, ERRORS_FILE)?;
    let cdf_rows: Vec<CdfRow> = read_csv(dir, CDF_FILE)?;
    if snr_rows.len() != p_rows.len() || err_rows.len() != p_rows.len() {
        return Err(csv_err(
            dir.to_string_lossy().as_ref(),
            "report files disagree on frequency count",
        ));
    }
    let mut cdf: BTreeMap<(u64, String), Vec<f64>> = BTreeMap::new();
    for row in cdf_rows {
        if !ESTIMATORS.contains(&row.estimator.as_str()) {
            return Err(csv_err(CDF_FILE, format!("unknown estimator {:?}", row.estimator)));
        }
        cdf.entry((row.frequency_hz.to_bits(), row.estimator))
            .or_default()
            .push(row.error_m);
    }
    let mut take = |f: f64, est: &str| cdf.remove(&(f.to_bits(), est.to_owned())).unwrap_or_default();
    let mut results = Vec::with_capacity(p_rows.len());
    for ((p, s), e) in p_rows.into_iter().zip(snr_rows).zip(err_rows) {
        if p.frequency_hz != s.frequency_hz || p.frequency_hz != e.frequency_hz {
            return Err(csv_err(P_FAP_FILE, "frequency rows out of order across files"));
        }
        let fap_snr = match (s.min, s.q1, s.median, s.q3, s.max) {
            (Some(min), Some(q1), Some(median), Some(q3), Some(max)) => Some(Quartiles {
                count: s.count,
                min,
                q1,
                median,
                q3,
                max,
            }),
            _ => None,
        };
        results.push(FrequencyResult {
            frequency_hz: p.frequency_hz,
            band: p.band,
            fap_counts: [p.n_mpc1, p.n_mpc2, p.n_mpc3, p.n_mpc4],
            p_fap: [p.p_mpc1, p.p_mpc2, p.p_mpc3, p.p_mpc4],
            fap_snr,
            receivers: e.receivers,
            excluded: e.excluded,
            dnls_failures: e.dnls_failures,
            lls_failures: e.lls_failures,
            peb_failures: e.peb_failures,
            dnls_errors: take(p.frequency_hz, "dnls"),
            lls_errors: take(p.frequency_hz, "lls"),
            peb: take(p.frequency_hz, "peb"),
        });
    }
    Ok(SweepReport { results })
}
