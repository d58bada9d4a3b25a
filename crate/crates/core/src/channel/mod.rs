//! Multipath components: classification, SNR, power-delay profiles, scene
//! synthesis and dataset ingestion.

mod dataset;
mod scene;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::{BOLTZMANN, SPEED_OF_LIGHT};

pub use dataset::{
    export_dataset, ingest_dataset, ingest_reader, read_dataset, write_dataset, DatasetError, DatasetRecord,
    IngestReport, Rejection, DATASET_SCHEMA_VERSION,
};
pub use scene::{
    BandPower, BuildingConfig, EdgeSite, InteriorWall, LinkBudget, PathGeometry, PathLimits, RadioConfig, Receiver,
    ReceiverGrid, Scene, SceneConfig, WallAxis, WindowLayout,
};

/// Number of strongest MPCs retained per profile.
pub const DEFAULT_TOP_K: usize = 25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("unknown interaction symbol {0:?}")]
    UnknownSymbol(String),
    #[error("interaction string must start with Tx and end with Rx: {0:?}")]
    Unframed(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Material(#[from] crate::materials::MaterialError),
    #[error("scene config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interaction {
    /// Transmission through a slab.
    T,
    /// Specular reflection.
    R,
    /// Edge diffraction.
    D,
    /// Diffuse scattering.
    DS,
}

impl Interaction {
    pub fn symbol(self) -> &'static str {
        match self {
            Interaction::T => "T",
            Interaction::R => "R",
            Interaction::D => "D",
            Interaction::DS => "DS",
        }
    }
}

impl FromStr for Interaction {
    type Err = ChannelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(Interaction::T),
            "R" => Ok(Interaction::R),
            "D" => Ok(Interaction::D),
            "DS" => Ok(Interaction::DS),
            other => Err(ChannelError::UnknownSymbol(other.to_owned())),
        }
    }
}

/// Parses a path string such as `Tx-T-D-T-Rx`.
pub fn parse_interactions(s: &str) -> Result<Vec<Interaction>, ChannelError> {
    let tokens: Vec<&str> = s.trim().split('-').map(str::trim).collect();
    if tokens.len() < 2 || tokens[0] != "Tx" || tokens[tokens.len() - 1] != "Rx" {
        return Err(ChannelError::Unframed(s.to_owned()));
    }
    tokens[1..tokens.len() - 1].iter().map(|t| t.parse()).collect()
}

pub fn format_interactions(interactions: &[Interaction]) -> String {
    let mut s = String::from("Tx");
    for i in interactions {
        s.push('-');
        s.push_str(i.symbol());
    }
    s.push_str("-Rx");
    s
}

/// Path-model groups: Euclidean (1, 2), diffraction (3), mismatch (4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MpcGroup {
    MPC1,
    MPC2,
    MPC3,
    MPC4,
}

impl MpcGroup {
    pub const ALL: [MpcGroup; 4] = [MpcGroup::MPC1, MpcGroup::MPC2, MpcGroup::MPC3, MpcGroup::MPC4];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MpcGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MPC{}", self.index() + 1)
    }
}

impl FromStr for MpcGroup {
    type Err = ChannelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MPC1" => Ok(MpcGroup::MPC1),
            "MPC2" => Ok(MpcGroup::MPC2),
            "MPC3" => Ok(MpcGroup::MPC3),
            "MPC4" => Ok(MpcGroup::MPC4),
            other => Err(ChannelError::UnknownSymbol(other.to_owned())),
        }
    }
}

/// Maps an interaction sequence to its path-model group. Trailing
/// transmissions never change the group.
pub fn classify_mpc(interactions: &[Interaction]) -> MpcGroup {
    let tail_is_transmission = |rest: &[Interaction]| rest.iter().all(|&i| i == Interaction::T);
    match interactions.split_first() {
        None => MpcGroup::MPC1,
        Some((Interaction::T, rest)) if tail_is_transmission(rest) => MpcGroup::MPC1,
        Some((Interaction::R, rest)) if tail_is_transmission(rest) => MpcGroup::MPC2,
        Some((Interaction::D, rest)) if tail_is_transmission(rest) => MpcGroup::MPC3,
        _ => MpcGroup::MPC4,
    }
}

/// Classifies a textual path string.
pub fn classify_str(s: &str) -> Result<MpcGroup, ChannelError> {
    parse_interactions(s).map(|i| classify_mpc(&i))
}

/// Thermal noise floor `kTB` in dBm.
pub fn noise_floor_dbm(bandwidth_hz: f64, noise_temperature_k: f64) -> f64 {
    10.0 * (BOLTZMANN * noise_temperature_k * bandwidth_hz / 1e-3).log10()
}

pub fn snr_db(rx_power_dbm: f64, bandwidth_hz: f64, noise_temperature_k: f64) -> f64 {
    rx_power_dbm - noise_floor_dbm(bandwidth_hz, noise_temperature_k)
}

/// One multipath component at a receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Mpc {
    pub interactions: Vec<Interaction>,
    pub path_length: f64,
    pub tof: f64,
    pub rx_power_dbm: f64,
    pub snr_db: f64,
    pub anchor_id: usize,
    pub group: MpcGroup,
    /// Scene window-edge index for synthesized diffraction paths.
    pub edge: Option<usize>,
}

impl Mpc {
    pub fn new(
        interactions: Vec<Interaction>,
        path_length: f64,
        rx_power_dbm: f64,
        snr_db: f64,
        anchor_id: usize,
    ) -> Self {
        let group = classify_mpc(&interactions);
        Self {
            interactions,
            path_length,
            tof: path_length / SPEED_OF_LIGHT,
            rx_power_dbm,
            snr_db,
            anchor_id,
            group,
            edge: None,
        }
    }

    pub fn path_string(&self) -> String {
        format_interactions(&self.interactions)
    }
}

/// Power-delay profile for one (anchor, receiver) pair, sorted by ToF.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdp {
    pub anchor_id: usize,
    pub rx_id: usize,
    pub receiver: Point3,
    pub mpcs: Vec<Mpc>,
}

impl Pdp {
    pub fn new(anchor_id: usize, rx_id: usize, receiver: Point3, mut mpcs: Vec<Mpc>) -> Self {
        sort_by_tof(&mut mpcs);
        Self {
            anchor_id,
            rx_id,
            receiver,
            mpcs,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mpcs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.mpcs.len()
    }
}

fn sort_by_tof(mpcs: &mut [Mpc]) {
    mpcs.sort_by(|a, b| a.tof.total_cmp(&b.tof));
}

/// Keeps the `k` highest-SNR components, returned in ToF order.
///
/// SNR ties are broken by earlier ToF.
pub fn truncate_top_k(pdp: &Pdp, k: usize) -> Pdp {
    let k = k.max(1);
    if pdp.mpcs.len() <= k {
        return pdp.clone();
    }
    let mut order: Vec<usize> = (0..pdp.mpcs.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&pdp.mpcs[i], &pdp.mpcs[j]);
        b.snr_db
            .total_cmp(&a.snr_db)
            .then(a.tof.total_cmp(&b.tof))
            .then(i.cmp(&j))
    });
    order.truncate(k);
    order.sort_unstable();
    let kept = order.into_iter().map(|i| pdp.mpcs[i].clone()).collect();
    Pdp::new(pdp.anchor_id, pdp.rx_id, pdp.receiver, kept)
}
