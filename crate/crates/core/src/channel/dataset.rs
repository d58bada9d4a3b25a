//! Line-delimited JSON dataset of multipath records.
//!
//! One record per line:
//!
//! ```text
//! {"schema":1,"anchor_id":0,"rx_id":7,"rx_xyz":[3.0,4.0,7.5],"interactions":"Tx-D-Rx","path_length_m":21.4,"rx_power_dbm":-71.2}
//! ```
//!
//! `tof_s` and `edge` are optional. Blank lines are ignored.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{format_interactions, noise_floor_dbm, parse_interactions, Mpc, Pdp};
use crate::geometry::Point3;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Allowed relative disagreement between a stored ToF and `length / c`.
const TOF_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unsupported schema version {found} (expected {DATASET_SCHEMA_VERSION})")]
    UnsupportedSchema { line: usize, found: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub schema: u32,
    pub anchor_id: usize,
    pub rx_id: usize,
    pub rx_xyz: [f64; 3],
    pub interactions: String,
    pub path_length_m: f64,
    pub rx_power_dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tof_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<usize>,
}

impl DatasetRecord {
    pub fn from_mpc(pdp: &Pdp, mpc: &Mpc) -> Self {
        let r = pdp.receiver;
        Self {
            schema: DATASET_SCHEMA_VERSION,
            anchor_id: mpc.anchor_id,
            rx_id: pdp.rx_id,
            rx_xyz: [r.x, r.y, r.z],
            interactions: format_interactions(&mpc.interactions),
            path_length_m: mpc.path_length,
            rx_power_dbm: mpc.rx_power_dbm,
            tof_s: Some(mpc.tof),
            edge: mpc.edge,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    /// Profiles ordered by (anchor, receiver).
    pub pdps: Vec<Pdp>,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
}

/// Parses records with their 1-based line numbers.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<(usize, DatasetRecord)>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.schema != DATASET_SCHEMA_VERSION {
            return Err(DatasetError::UnsupportedSchema {
                line: line_no,
                found: rec.schema,
            });
        }
        out.push((line_no, rec));
    }
    Ok(out)
}

pub fn write_dataset<W: Write>(mut writer: W, pdps: &[Pdp]) -> io::Result<()> {
    for pdp in pdps {
        for mpc in &pdp.mpcs {
            let rec = DatasetRecord::from_mpc(pdp, mpc);
            serde_json::to_writer(&mut writer, &rec)?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()
}

pub fn export_dataset(path: &Path, pdps: &[Pdp]) -> io::Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), pdps)
}

fn check(rec: &DatasetRecord) -> Result<Mpc, String> {
    let finite = rec.rx_xyz.iter().all(|v| v.is_finite()) && rec.rx_power_dbm.is_finite();
    if !finite {
        return Err("non-finite receiver position or power".into());
    }
    if !(rec.path_length_m > 0.0 && rec.path_length_m.is_finite()) {
        return Err(format!("path length must be positive, got {}", rec.path_length_m));
    }
    let interactions = parse_interactions(&rec.interactions).map_err(|e| e.to_string())?;
    let mpc = Mpc::new(interactions, rec.path_length_m, rec.rx_power_dbm, 0.0, rec.anchor_id);
    if let Some(tof) = rec.tof_s {
        if !((tof - mpc.tof).abs() <= TOF_REL_TOL * mpc.tof) {
            return Err(format!(
                "ToF {tof:e} s disagrees with length {} m (expected {:e} s)",
                rec.path_length_m, mpc.tof
            ));
        }
    }
    Ok(mpc)
}

/// Validates records and groups them into profiles. SNR is recomputed from
/// power against the kTB noise floor.
pub fn ingest_reader<R: BufRead>(
    reader: R,
    bandwidth_hz: f64,
    noise_temperature_k: f64,
) -> Result<IngestReport, DatasetError> {
    let floor = noise_floor_dbm(bandwidth_hz, noise_temperature_k);
    let mut report = IngestReport::default();
    let mut groups: BTreeMap<(usize, usize), (Point3, Vec<Mpc>)> = BTreeMap::new();
    let mut positions: BTreeMap<usize, [f64; 3]> = BTreeMap::new();
    for (line, rec) in read_dataset(reader)? {
        let verdict = check(&rec).and_then(|mpc| match positions.get(&rec.rx_id) {
            Some(p) if *p != rec.rx_xyz => Err(format!(
                "receiver {} previously at {:?}, now {:?}",
                rec.rx_id, p, rec.rx_xyz
            )),
            _ => Ok(mpc),
        });
        match verdict {
            Ok(mut mpc) => {
                mpc.snr_db = rec.rx_power_dbm - floor;
                mpc.edge = rec.edge;
                positions.insert(rec.rx_id, rec.rx_xyz);
                let [x, y, z] = rec.rx_xyz;
                groups
                    .entry((rec.anchor_id, rec.rx_id))
                    .or_insert_with(|| (Point3::new(x, y, z), Vec::new()))
                    .1
                    .push(mpc);
                report.accepted += 1;
            }
            Err(reason) => report.rejected.push(Rejection { line, reason }),
        }
    }
    report.pdps = groups
        .into_iter()
        .map(|((anchor, rx), (pos, mpcs))| Pdp::new(anchor, rx, pos, mpcs))
        .collect();
    Ok(report)
}

pub fn ingest_dataset(path: &Path, bandwidth_hz: f64, noise_temperature_k: f64) -> Result<IngestReport, DatasetError> {
    ingest_reader(BufReader::new(File::open(path)?), bandwidth_hz, noise_temperature_k)
}
