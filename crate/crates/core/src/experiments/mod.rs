//! Scenario presets and the frequency sweep that turns the scene into FAP
//! statistics and positioning-error distributions.

mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    truncate_top_k, BandPower, BuildingConfig, ChannelError, InteriorWall, MpcGroup, PathGeometry, PathLimits, Pdp,
    RadioConfig, Receiver, ReceiverGrid, Scene, SceneConfig, WallAxis, WindowLayout,
};
use crate::fap::{range_sigma_m, select_fap, synthesize_measurement_with, FapSelection, Spectrum, DEFAULT_T_FAP_DB};
use crate::geometry::Point3;
use crate::materials::{BandLabel, DiffractionLossModel, MaterialTable, Polarization};
use crate::par::{self, ExecMode};
use crate::positioning::{
    dnls_solve, initial_guess, lls_solve, peb, AnchorMeasurement, DnlsOptions, MeasurementSet, RangeModel,
};

pub use report::{export_report, load_report, quartiles, Quartiles, CDF_FILE, ERRORS_FILE, FAP_SNR_FILE, P_FAP_FILE};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("no FAP selections to tally")]
    ZeroReceivers,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{file}: {message}")]
    Csv { file: String, message: String },
}

/// Default frequency ladder (Hz): three FR1, two FR3 and two FR2 points.
pub const DEFAULT_FREQUENCIES_HZ: [f64; 7] = [0.7e9, 3.5e9, 5.8e9, 10e9, 15e9, 28e9, 39e9];

fn default_radio() -> RadioConfig {
    RadioConfig {
        bandwidth_hz: 400e6,
        noise_temperature_k: 290.0,
        min_snr_db: 0.0,
        top_k: crate::channel::DEFAULT_TOP_K,
        polarization: Polarization::Te,
        diffraction: DiffractionLossModel::default(),
        fr1: BandPower {
            tx_power_dbm: 20.0,
            rx_processing_gain_db: 0.0,
        },
        fr2: BandPower {
            tx_power_dbm: 30.0,
            rx_processing_gain_db: 20.0,
        },
        fr3: BandPower {
            tx_power_dbm: 30.0,
            rx_processing_gain_db: 0.0,
        },
    }
}

/// Seven-storey office block, 30 m x 16 m, with a central corridor and
/// rooms on both sides. Receivers on floors 3-4 on a 2 m grid.
pub fn build_default_scene() -> SceneConfig {
    let mut walls = vec![
        InteriorWall {
            axis: WallAxis::Y,
            position: 6.2,
            from: 0.0,
            to: 30.0,
        },
        InteriorWall {
            axis: WallAxis::Y,
            position: 9.8,
            from: 0.0,
            to: 30.0,
        },
    ];
    for k in 0..5 {
        let x = 5.2 + 5.0 * k as f64;
        for (from, to) in [(0.0, 6.2), (9.8, 16.0)] {
            walls.push(InteriorWall {
                axis: WallAxis::X,
                position: x,
                from,
                to,
            });
        }
    }
    SceneConfig {
        building: BuildingConfig {
            length_x: 30.0,
            length_y: 16.0,
            floors: 7,
            floor_height: 3.0,
        },
        exterior_slab: "concrete_wall".into(),
        floor_slab: "concrete_floor".into(),
        interior_slab: "drywall".into(),
        interior_walls: walls,
        windows: Some(WindowLayout {
            width: 2.0,
            height: 2.0,
            sill: 0.5,
            pitch: 5.0,
            margin: 1.5,
        }),
        anchors: vec![
            [9.0, -18.0, 3.0],
            [22.0, 34.0, 4.5],
            [-18.0, 11.0, 3.8],
            [48.0, 4.0, 5.2],
        ],
        receivers: ReceiverGrid {
            spacing: 2.0,
            floors: vec![3, 4],
            height_above_floor: 1.5,
        },
        radio: default_radio(),
        limits: PathLimits {
            max_transmissions: 6,
            max_reflections: 6,
            max_diffractions: 1,
        },
        materials: MaterialTable::default(),
    }
}

/// Same building with a 0.5 m grid on floors 3-7.
pub fn full_scale_scene() -> SceneConfig {
    let mut cfg = build_default_scene();
    cfg.receivers.spacing = 0.5;
    cfg.receivers.floors = (3..=7).collect();
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub frequencies_hz: Vec<f64>,
    pub t_fap_db: f64,
    /// Noise realisations per receiver and frequency.
    pub trials: usize,
    pub seed: u64,
    /// Use exact FAP lengths as ranges.
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default)]
    pub exec: ExecMode,
    #[serde(default)]
    pub spectrum: Spectrum,
    pub scene: SceneConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            frequencies_hz: DEFAULT_FREQUENCIES_HZ.to_vec(),
            t_fap_db: DEFAULT_T_FAP_DB,
            trials: 4,
            seed: 1,
            noiseless: false,
            weighted: false,
            exec: ExecMode::default(),
            spectrum: Spectrum::Flat,
            scene: build_default_scene(),
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("sweep config serialises")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.into()));
        if self.frequencies_hz.is_empty() {
            return bad("frequency ladder is empty");
        }
        if self.frequencies_hz.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return bad("frequencies must be positive");
        }
        if self.frequencies_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("frequency ladder must be strictly increasing");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.t_fap_db >= 0.0) {
            return bad("t_fap must be non-negative");
        }
        self.spectrum
            .mean_squared_bandwidth(self.scene.radio.bandwidth_hz)
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        self.scene.validate()?;
        Ok(())
    }
}

/// Aggregates for one frequency of the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResult {
    pub frequency_hz: f64,
    pub band: BandLabel,
    /// FAP count per group, indexed by [`MpcGroup::index`].
    pub fap_counts: [usize; 4],
    /// Percentage per group over all detected (anchor, receiver) pairs.
    pub p_fap: [f64; 4],
    pub fap_snr: Option<Quartiles>,
    pub receivers: usize,
    /// Receivers without a FAP from every anchor.
    pub excluded: usize,
    pub dnls_failures: usize,
    pub lls_failures: usize,
    pub peb_failures: usize,
    /// Sorted 3D errors (m).
    pub dnls_errors: Vec<f64>,
    pub lls_errors: Vec<f64>,
    pub peb: Vec<f64>,
}

impl FrequencyResult {
    pub fn exclusion_rate(&self) -> f64 {
        if self.receivers == 0 {
            0.0
        } else {
            self.excluded as f64 / self.receivers as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub results: Vec<FrequencyResult>,
}

/// Percentage of FAPs per group. Each inner vector holds one anchor's
/// selections; the total over all anchors is the denominator.
pub fn p_fap_stats(per_anchor: &[Vec<MpcGroup>]) -> Result<[f64; 4], ExperimentError> {
    let counts = tally(per_anchor.iter().flatten().copied());
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(ExperimentError::ZeroReceivers);
    }
    Ok(counts.map(|c| 100.0 * c as f64 / total as f64))
}

fn tally(groups: impl Iterator<Item = MpcGroup>) -> [usize; 4] {
    let mut counts = [0; 4];
    for g in groups {
        counts[g.index()] += 1;
    }
    counts
}

/// Receiver-level outcome at one frequency.
struct Outcome {
    faps: Vec<Option<(MpcGroup, f64)>>,
    excluded: bool,
    dnls: Vec<Option<f64>>,
    lls: Vec<Option<f64>>,
    peb: Option<Option<f64>>,
}

struct Context<'a> {
    cfg: &'a SweepConfig,
    scene: &'a Scene,
    bounds: (Point3, Point3),
    beta_sq: f64,
    options: DnlsOptions,
}

/// Edge for an anchor's diffraction model: the FAP's own edge if it
/// diffracted, otherwise the strongest diffracted path to the receiver.
fn associate_edge(
    scene: &Scene,
    fap: &FapSelection,
    paths: &[PathGeometry],
    budget: &crate::channel::LinkBudget,
) -> Option<(usize, f64)> {
    let power_of = |p: &PathGeometry| scene.rx_power_dbm(p, budget);
    if let Some(edge) = fap.chosen.edge {
        let path = paths
            .iter()
            .find(|p| p.edge == Some(edge) && p.length == fap.chosen.path_length);
        return Some((edge, path.map_or(fap.chosen.rx_power_dbm, power_of)));
    }
    paths
        .iter()
        .filter_map(|p| p.edge.map(|e| (e, power_of(p), p.length)))
        .filter(|(_, pw, _)| pw.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.total_cmp(&a.2)))
        .map(|(e, pw, _)| (e, pw))
}

fn evaluate_receiver(
    ctx: &Context,
    freq_index: usize,
    rx: &Receiver,
    traced: &[Vec<PathGeometry>],
    budget: &crate::channel::LinkBudget,
) -> Outcome {
    let scene = ctx.scene;
    let radio = &scene.config().radio;
    let noise = crate::channel::noise_floor_dbm(radio.bandwidth_hz, radio.noise_temperature_k);
    let selections: Vec<Option<FapSelection>> = traced
        .iter()
        .enumerate()
        .map(|(a, paths)| {
            let pdp = truncate_top_k(&scene.profile(a, rx, paths, budget), radio.top_k);
            select_fap(&pdp, ctx.cfg.t_fap_db).ok()
        })
        .collect();
    let faps = selections
        .iter()
        .map(|s| s.as_ref().map(|s| (s.chosen.group, s.chosen.snr_db)))
        .collect();
    let trials = ctx.cfg.trials;
    if selections.len() < 4 || selections.iter().any(Option::is_none) {
        return Outcome {
            faps,
            excluded: true,
            dnls: Vec::new(),
            lls: Vec::new(),
            peb: None,
        };
    }
    let selections: Vec<FapSelection> = selections.into_iter().flatten().collect();

    let mut template = MeasurementSet::default();
    let mut peb_snr = Vec::new();
    for (a, fap) in selections.iter().enumerate() {
        let assoc = associate_edge(scene, fap, &traced[a], budget);
        let model = match assoc {
            Some((edge, _)) => RangeModel::diffraction(scene.edges()[edge].edge.clone()),
            None => RangeModel::Euclidean,
        };
        peb_snr.push(assoc.map_or(fap.chosen.snr_db, |(_, p)| p - noise));
        template.anchors.push(AnchorMeasurement {
            anchor_id: a,
            position: scene.anchors()[a],
            range: fap.chosen.path_length,
            sigma: range_sigma_m(ctx.beta_sq, fap.chosen.snr_db).unwrap_or(f64::NAN),
            model,
        });
    }
    let truth = rx.position;
    let bound = peb(&truth, &template, &peb_snr, ctx.beta_sq).ok().map(|f| f.peb);

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    rng.set_stream(((freq_index as u64) << 32) | rx.id as u64);
    let mut dnls = Vec::with_capacity(trials);
    let mut lls = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut meas = template.clone();
        if !ctx.cfg.noiseless {
            for (am, fap) in meas.anchors.iter_mut().zip(&selections) {
                match synthesize_measurement_with(fap, ctx.beta_sq, &mut rng) {
                    Ok(m) => am.range = m.range,
                    Err(_) => am.range = f64::NAN,
                }
            }
        }
        let init = initial_guess(&meas, &ctx.bounds);
        dnls.push(
            dnls_solve(&meas, &init, &ctx.options)
                .ok()
                .filter(|e| e.converged)
                .map(|e| (e.alpha_hat - truth).norm()),
        );
        lls.push(lls_solve(&meas).ok().map(|e| (e.alpha_hat - truth).norm()));
    }
    Outcome {
        faps,
        excluded: false,
        dnls,
        lls,
        peb: Some(bound),
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Top-k profiles for every (receiver, anchor) pair at one frequency,
/// receiver-major.
pub fn synthesize_profiles(scene: &Scene, f_hz: f64, exec: ExecMode) -> Vec<Pdp> {
    let budget = scene.link_budget(f_hz);
    let top_k = scene.config().radio.top_k;
    let n_anchors = scene.anchors().len();
    par::map(exec, scene.receivers(), |rx| {
        (0..n_anchors)
            .map(|a| {
                let paths = scene.trace(a, &rx.position);
                truncate_top_k(&scene.profile(a, rx, &paths, &budget), top_k)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Runs the full pipeline for every frequency of the ladder.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport, ExperimentError> {
    cfg.validate()?;
    let scene = Scene::new(cfg.scene.clone())?;
    let receivers = scene.receivers();
    let n_anchors = scene.anchors().len();
    // Path geometry does not depend on frequency; trace once.
    let traced: Vec<Vec<Vec<PathGeometry>>> = par::map(cfg.exec, receivers, |rx| {
        (0..n_anchors).map(|a| scene.trace(a, &rx.position)).collect()
    });
    let ctx = Context {
        cfg,
        scene: &scene,
        bounds: scene.bounds(),
        beta_sq: cfg
            .spectrum
            .mean_squared_bandwidth(cfg.scene.radio.bandwidth_hz)
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?,
        options: DnlsOptions {
            weighted: cfg.weighted,
            ..DnlsOptions::default()
        },
    };

    let mut results = Vec::with_capacity(cfg.frequencies_hz.len());
    for (fi, &f) in cfg.frequencies_hz.iter().enumerate() {
        let budget = scene.link_budget(f);
        let outcomes = par::map_range(cfg.exec, receivers.len(), |i| {
            evaluate_receiver(&ctx, fi, &receivers[i], &traced[i], &budget)
        });
        let groups: Vec<MpcGroup> = outcomes
            .iter()
            .flat_map(|o| o.faps.iter().flatten().map(|g| g.0))
            .collect();
        let snrs: Vec<f64> = outcomes
            .iter()
            .flat_map(|o| o.faps.iter().flatten().map(|g| g.1))
            .collect();
        let fap_counts = tally(groups.iter().copied());
        let p_fap = p_fap_stats(std::slice::from_ref(&groups)).unwrap_or([0.0; 4]);
        let collect = |pick: fn(&Outcome) -> &Vec<Option<f64>>| {
            let all: Vec<Option<f64>> = outcomes.iter().flat_map(|o| pick(o).iter().copied()).collect();
            let failures = all.iter().filter(|e| e.is_none()).count();
            (sorted(all.into_iter().flatten().collect()), failures)
        };
        let (dnls_errors, dnls_failures) = collect(|o| &o.dnls);
        let (lls_errors, lls_failures) = collect(|o| &o.lls);
        let pebs: Vec<Option<f64>> = outcomes.iter().filter_map(|o| o.peb).collect();
        results.push(FrequencyResult {
            frequency_hz: f,
            band: budget.band.label,
            fap_counts,
            p_fap,
            fap_snr: quartiles(&snrs),
            receivers: receivers.len(),
            excluded: outcomes.iter().filter(|o| o.excluded).count(),
            dnls_failures,
            lls_failures,
            peb_failures: pebs.iter().filter(|p| p.is_none()).count(),
            dnls_errors,
            lls_errors,
            peb: sorted(pebs.into_iter().flatten().collect()),
        });
    }
    Ok(SweepReport { results })
}
