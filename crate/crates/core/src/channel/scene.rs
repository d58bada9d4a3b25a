//! Outdoor-to-indoor scene: an axis-aligned building with a concrete shell,
//! window apertures, floor slabs and drywall partitions, plus the
//! deterministic path enumerator that feeds power-delay profiles.
//!
//! Walls and slabs are zero-thickness panels carrying a [`SlabSpec`] for loss.
//! The enumerator produces the direct path, single specular reflections off
//! every panel face, and single diffractions at every horizontal window edge,
//! each with the transmissions its legs accumulate.

use serde::{Deserialize, Serialize};

use super::{classify_mpc, noise_floor_dbm, ChannelError, Interaction, Mpc, Pdp};
use crate::geometry::{
    diffraction_point, euclidean_distance, reflection_path_length, EdgeKind, Point3, ReflectorPlane, Vec3, WindowEdge,
};
use crate::materials::{
    diffraction_loss_db, free_space_path_loss_db, reflection_loss_db, transmission_loss_db, Band, BandLabel,
    DiffractionLossModel, MaterialTable, Polarization, SlabSpec,
};

const EXTERIOR: usize = 0;
const FLOOR: usize = 1;
const INTERIOR: usize = 2;

/// Points closer than this to a panel plane count as lying on it.
const PLANE_EPS: f64 = 1e-9;
/// Receivers closer than this to a wall are dropped from the grid.
const WALL_CLEARANCE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingConfig {
    pub length_x: f64,
    pub length_y: f64,
    pub floors: u32,
    pub floor_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallAxis {
    /// Wall in the plane `x = position`, spanning `from..to` in y.
    X,
    /// Wall in the plane `y = position`, spanning `from..to` in x.
    Y,
}

/// Full-height interior partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorWall {
    pub axis: WallAxis,
    pub position: f64,
    pub from: f64,
    pub to: f64,
}

/// Regular window rows repeated on every facade and floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLayout {
    pub width: f64,
    /// Vertical window height `w`.
    pub height: f64,
    /// Sill height above the floor.
    pub sill: f64,
    /// Horizontal distance between consecutive window left edges.
    pub pitch: f64,
    /// Clearance from the facade corners.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverGrid {
    pub spacing: f64,
    /// 1-based floor numbers.
    pub floors: Vec<u32>,
    pub height_above_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPower {
    pub tx_power_dbm: f64,
    pub rx_processing_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub noise_temperature_k: f64,
    /// Components below this SNR are not detected.
    pub min_snr_db: f64,
    pub top_k: usize,
    pub polarization: Polarization,
    pub diffraction: DiffractionLossModel,
    pub fr1: BandPower,
    pub fr2: BandPower,
    pub fr3: BandPower,
}

impl RadioConfig {
    pub fn band_at(&self, f_hz: f64) -> Band {
        let label = BandLabel::from_frequency(f_hz);
        let power = match label {
            BandLabel::FR1 => self.fr1,
            BandLabel::FR2 => self.fr2,
            BandLabel::FR3 => self.fr3,
        };
        Band {
            label,
            center_frequency: f_hz,
            bandwidth: self.bandwidth_hz,
            tx_power_dbm: power.tx_power_dbm,
            rx_processing_gain_db: power.rx_processing_gain_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLimits {
    pub max_transmissions: u32,
    pub max_reflections: u32,
    pub max_diffractions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub building: BuildingConfig,
    pub exterior_slab: String,
    pub floor_slab: String,
    pub interior_slab: String,
    #[serde(default)]
    pub interior_walls: Vec<InteriorWall>,
    #[serde(default)]
    pub windows: Option<WindowLayout>,
    pub anchors: Vec<[f64; 3]>,
    pub receivers: ReceiverGrid,
    pub radio: RadioConfig,
    pub limits: PathLimits,
    #[serde(default)]
    pub materials: MaterialTable,
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self, ChannelError> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| ChannelError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scene config serialises")
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: String| Err(ChannelError::InvalidScene(msg));
        let b = &self.building;
        if !(b.length_x > 0.0 && b.length_y > 0.0 && b.floor_height > 0.0) || b.floors == 0 {
            return bad("building dimensions and floor count must be positive".into());
        }
        if !(self.receivers.spacing > 0.0) {
            return bad(format!(
                "receiver spacing must be positive, got {}",
                self.receivers.spacing
            ));
        }
        if let Some(f) = self.receivers.floors.iter().find(|&&f| f == 0 || f > b.floors) {
            return bad(format!("receiver floor {f} outside 1..={}", b.floors));
        }
        let h = self.receivers.height_above_floor;
        if !(h > 0.0 && h < b.floor_height) {
            return bad(format!("receiver height {h} must lie strictly inside a floor"));
        }
        if let Some(w) = &self.windows {
            if !(w.width > 0.0 && w.height > 0.0 && w.pitch > 0.0 && w.sill >= 0.0 && w.margin >= 0.0) {
                return bad("window dimensions must be positive".into());
            }
            if w.sill + w.height >= b.floor_height {
                return bad("window must fit below the next floor slab".into());
            }
        }
        for wall in &self.interior_walls {
            let (extent, span) = match wall.axis {
                WallAxis::X => (b.length_x, b.length_y),
                WallAxis::Y => (b.length_y, b.length_x),
            };
            if !(wall.position > 0.0
                && wall.position < extent
                && wall.from < wall.to
                && wall.from >= 0.0
                && wall.to <= span)
            {
                return bad(format!("interior wall {wall:?} lies outside the footprint"));
            }
        }
        if self.anchors.iter().flatten().any(|v| !v.is_finite()) {
            return bad("anchor coordinates must be finite".into());
        }
        if !(self.radio.bandwidth_hz > 0.0 && self.radio.noise_temperature_k > 0.0) {
            return bad("bandwidth and noise temperature must be positive".into());
        }
        if self.radio.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        for name in [&self.exterior_slab, &self.floor_slab, &self.interior_slab] {
            self.materials.slab(name)?.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub id: usize,
    pub position: Point3,
    pub floor: u32,
}

/// A diffracting window edge placed on a facade.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSite {
    pub edge: WindowEdge,
    pub kind: EdgeKind,
    pub floor: u32,
    pub window: usize,
    /// Outward facade normal.
    pub outward: Vec3,
    facade_offset: f64,
}

impl EdgeSite {
    /// Positive outside the facade plane.
    fn facade_side(&self, p: &Point3) -> f64 {
        self.outward.dot(&p.coords) - self.facade_offset
    }
}

/// Axis-aligned rectangle in the plane `coords[axis] = coord`, with holes.
#[derive(Debug, Clone)]
struct Panel {
    axis: usize,
    coord: f64,
    u: usize,
    v: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    holes: Vec<([f64; 2], [f64; 2])>,
    slab: usize,
}

impl Panel {
    fn contains(&self, p: &Point3) -> bool {
        let (pu, pv) = (p[self.u], p[self.v]);
        let inside = pu >= self.lo[0] && pu <= self.hi[0] && pv >= self.lo[1] && pv <= self.hi[1];
        inside
            && !self
                .holes
                .iter()
                .any(|(lo, hi)| pu > lo[0] && pu < hi[0] && pv > lo[1] && pv < hi[1])
    }

    /// Strict crossing of the open segment `a..b` through the solid panel.
    fn crossed_by(&self, a: &Point3, b: &Point3) -> bool {
        let da = a[self.axis] - self.coord;
        let db = b[self.axis] - self.coord;
        if da.abs() < PLANE_EPS || db.abs() < PLANE_EPS || (da > 0.0) == (db > 0.0) {
            return false;
        }
        let t = da / (da - db);
        self.contains(&(a + (b - a) * t))
    }

    fn reflector(&self) -> ReflectorPlane {
        let mut normal = Vec3::zeros();
        normal[self.axis] = 1.0;
        let corner = |u: f64, v: f64| {
            let mut p = Point3::origin();
            p[self.axis] = self.coord;
            p[self.u] = u;
            p[self.v] = v;
            p
        };
        ReflectorPlane::new(normal, self.coord)
            .expect("axis normal is unit")
            .with_facet(vec![
                corner(self.lo[0], self.lo[1]),
                corner(self.hi[0], self.lo[1]),
                corner(self.hi[0], self.hi[1]),
                corner(self.lo[0], self.hi[1]),
            ])
    }
}

/// Frequency-independent description of one enumerated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGeometry {
    pub interactions: Vec<Interaction>,
    pub length: f64,
    /// Transmissions per slab kind (exterior, floor, interior).
    pub crossings: [u32; 3],
    /// Reflecting slab kind and incidence angle from the panel normal.
    pub reflection: Option<(usize, f64)>,
    /// Index into [`Scene::edges`] for diffraction paths.
    pub edge: Option<usize>,
}

impl PathGeometry {
    fn transmissions(&self) -> u32 {
        self.crossings.iter().sum()
    }
}

/// Per-frequency loss constants shared by every path at that frequency.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    pub band: Band,
    slab_loss_db: [f64; 3],
    diffraction_db: f64,
    noise_floor_dbm: f64,
}

/// Compiled, immutable scene geometry.
#[derive(Debug, Clone)]
pub struct Scene {
    config: SceneConfig,
    slabs: [SlabSpec; 3],
    panels: Vec<Panel>,
    edges: Vec<EdgeSite>,
    anchors: Vec<Point3>,
    receivers: Vec<Receiver>,
}

impl Scene {
    pub fn new(config: SceneConfig) -> Result<Self, ChannelError> {
        config.validate()?;
        let slabs = [
            config.materials.slab(&config.exterior_slab)?,
            config.materials.slab(&config.floor_slab)?,
            config.materials.slab(&config.interior_slab)?,
        ];
        let b = &config.building;
        let (lx, ly) = (b.length_x, b.length_y);
        let height = b.floors as f64 * b.floor_height;

        let mut panels = Vec::new();
        let mut edges = Vec::new();
        let mut window_id = 0;
        // (axis, coord, along-axis, facade length, outward sign)
        let facades = [
            (1, 0.0, 0, lx, -1.0),
            (1, ly, 0, lx, 1.0),
            (0, 0.0, 1, ly, -1.0),
            (0, lx, 1, ly, 1.0),
        ];
        for &(axis, coord, along, length, sign) in &facades {
            let mut holes = Vec::new();
            let mut outward = Vec3::zeros();
            outward[axis] = sign;
            if let Some(win) = &config.windows {
                for floor in 1..=b.floors {
                    let sill = (floor - 1) as f64 * b.floor_height + win.sill;
                    let top = sill + win.height;
                    let mut left = win.margin;
                    while left + win.width <= length - win.margin + 1e-9 {
                        let right = left + win.width;
                        holes.push(([left, sill], [right, top]));
                        for (z, kind) in [(sill, EdgeKind::Bottom), (top, EdgeKind::Top)] {
                            let at = |s: f64| {
                                let mut p = Point3::new(0.0, 0.0, z);
                                p[axis] = coord;
                                p[along] = s;
                                p
                            };
                            let edge = WindowEdge::from_world(&at(left), &at(right), win.height, kind)
                                .map_err(|e| ChannelError::InvalidScene(e.to_string()))?;
                            edges.push(EdgeSite {
                                edge,
                                kind,
                                floor,
                                window: window_id,
                                outward,
                                facade_offset: sign * coord,
                            });
                        }
                        window_id += 1;
                        left += win.pitch;
                    }
                }
            }
            panels.push(Panel {
                axis,
                coord,
                u: along,
                v: 2,
                lo: [0.0, 0.0],
                hi: [length, height],
                holes,
                slab: EXTERIOR,
            });
        }
        for k in 0..=b.floors {
            panels.push(Panel {
                axis: 2,
                coord: k as f64 * b.floor_height,
                u: 0,
                v: 1,
                lo: [0.0, 0.0],
                hi: [lx, ly],
                holes: Vec::new(),
                slab: FLOOR,
            });
        }
        for wall in &config.interior_walls {
            let (axis, u) = match wall.axis {
                WallAxis::X => (0, 1),
                WallAxis::Y => (1, 0),
            };
            panels.push(Panel {
                axis,
                coord: wall.position,
                u,
                v: 2,
                lo: [wall.from, 0.0],
                hi: [wall.to, height],
                holes: Vec::new(),
                slab: INTERIOR,
            });
        }

        let anchors = config.anchors.iter().map(|a| Point3::new(a[0], a[1], a[2])).collect();
        let mut scene = Self {
            config,
            slabs,
            panels,
            edges,
            anchors,
            receivers: Vec::new(),
        };
        scene.receivers = scene.build_receivers();
        Ok(scene)
    }

    pub fn from_toml(text: &str) -> Result<Self, ChannelError> {
        Self::new(SceneConfig::from_toml(text)?)
    }

    fn build_receivers(&self) -> Vec<Receiver> {
        let b = &self.config.building;
        let grid = &self.config.receivers;
        let s = grid.spacing;
        let coords = |len: f64| -> Vec<f64> {
            let n = (len / s).floor() as usize;
            (0..n).map(|i| s * (i as f64 + 0.5)).filter(|&c| c < len).collect()
        };
        let xs = coords(b.length_x);
        let ys = coords(b.length_y);
        let mut out = Vec::new();
        for &floor in &grid.floors {
            let z = (floor - 1) as f64 * b.floor_height + grid.height_above_floor;
            for &x in &xs {
                for &y in &ys {
                    let p = Point3::new(x, y, z);
                    if self.near_interior_wall(&p) {
                        continue;
                    }
                    out.push(Receiver {
                        id: out.len(),
                        position: p,
                        floor,
                    });
                }
            }
        }
        out
    }

    fn near_interior_wall(&self, p: &Point3) -> bool {
        self.panels.iter().filter(|panel| panel.slab == INTERIOR).any(|panel| {
            (p[panel.axis] - panel.coord).abs() < WALL_CLEARANCE
                && p[panel.u] >= panel.lo[0] - WALL_CLEARANCE
                && p[panel.u] <= panel.hi[0] + WALL_CLEARANCE
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn anchors(&self) -> &[Point3] {
        &self.anchors
    }

    pub fn receivers(&self) -> &[Receiver] {
        &self.receivers
    }

    pub fn edges(&self) -> &[EdgeSite] {
        &self.edges
    }

    pub fn slab(&self, kind: usize) -> &SlabSpec {
        &self.slabs[kind]
    }

    /// Axis-aligned bounds of the building.
    pub fn bounds(&self) -> (Point3, Point3) {
        let b = &self.config.building;
        (
            Point3::origin(),
            Point3::new(b.length_x, b.length_y, b.floors as f64 * b.floor_height),
        )
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let (lo, hi) = self.bounds();
        (0..3).all(|i| p[i] > lo[i] && p[i] < hi[i])
    }

    pub fn band_at(&self, f_hz: f64) -> Band {
        self.config.radio.band_at(f_hz)
    }

    /// Transmissions of the open segment, counted per slab kind.
    fn crossings(&self, a: &Point3, b: &Point3) -> [u32; 3] {
        let mut counts = [0u32; 3];
        for panel in &self.panels {
            if panel.crossed_by(a, b) {
                counts[panel.slab] += 1;
            }
        }
        counts
    }

    fn path(&self, legs: (&[u32; 3], Option<(Interaction, &[u32; 3])>), length: f64) -> PathGeometry {
        let t = |n: u32| std::iter::repeat_n(Interaction::T, n as usize);
        let first: u32 = legs.0.iter().sum();
        let mut interactions: Vec<Interaction> = t(first).collect();
        let mut crossings = *legs.0;
        if let Some((bounce, second)) = legs.1 {
            interactions.push(bounce);
            interactions.extend(t(second.iter().sum()));
            for (c, s) in crossings.iter_mut().zip(second) {
                *c += s;
            }
        }
        PathGeometry {
            interactions,
            length,
            crossings,
            reflection: None,
            edge: None,
        }
    }

    /// Enumerates the frequency-independent path families from an anchor to a
    /// receiver position.
    pub fn trace(&self, anchor: usize, rx: &Point3) -> Vec<PathGeometry> {
        let tx = &self.anchors[anchor];
        let limits = &self.config.limits;
        let mut paths = Vec::new();

        let direct = self.crossings(tx, rx);
        paths.push(self.path((&direct, None), euclidean_distance(tx, rx)));

        if limits.max_reflections >= 1 {
            for panel in &self.panels {
                let plane = panel.reflector();
                let Ok(hit) = reflection_path_length(tx, rx, &plane) else {
                    continue;
                };
                if !hit.valid || !panel.contains(&hit.specular_point) {
                    continue;
                }
                let s = hit.specular_point;
                let incoming = s - tx;
                let cos_i = (incoming[panel.axis].abs() / incoming.norm()).clamp(0.0, 1.0);
                let mut path = self.path(
                    (&self.crossings(tx, &s), Some((Interaction::R, &self.crossings(&s, rx)))),
                    hit.length,
                );
                path.reflection = Some((panel.slab, cos_i.acos()));
                paths.push(path);
            }
        }

        if limits.max_diffractions >= 1 {
            for (idx, site) in self.edges.iter().enumerate() {
                if site.facade_side(tx) <= 0.0 || site.facade_side(rx) >= 0.0 {
                    continue;
                }
                // Off-edge stationary points clamp to a window corner.
                let Ok(sol) = diffraction_point(tx, rx, &site.edge) else {
                    continue;
                };
                let mut path = self.path(
                    (
                        &self.crossings(tx, &sol.q),
                        Some((Interaction::D, &self.crossings(&sol.q, rx))),
                    ),
                    sol.path_length,
                );
                path.edge = Some(idx);
                paths.push(path);
            }
        }

        paths.retain(|p| p.transmissions() <= limits.max_transmissions);
        paths
    }

    pub fn link_budget(&self, f_hz: f64) -> LinkBudget {
        let radio = &self.config.radio;
        LinkBudget {
            band: radio.band_at(f_hz),
            slab_loss_db: [0, 1, 2].map(|k| transmission_loss_db(&self.slabs[k], f_hz)),
            diffraction_db: diffraction_loss_db(&radio.diffraction, f_hz),
            noise_floor_dbm: noise_floor_dbm(radio.bandwidth_hz, radio.noise_temperature_k),
        }
    }

    /// Received power of a traced path in dBm (may be `-inf`).
    pub fn rx_power_dbm(&self, path: &PathGeometry, budget: &LinkBudget) -> f64 {
        let f = budget.band.center_frequency;
        let Ok(fspl) = free_space_path_loss_db(path.length, f) else {
            return f64::NEG_INFINITY;
        };
        let mut loss = fspl;
        for (n, l) in path.crossings.iter().zip(&budget.slab_loss_db) {
            if *n > 0 {
                loss += *n as f64 * l;
            }
        }
        if let Some((slab, angle)) = path.reflection {
            loss += reflection_loss_db(&self.slabs[slab], f, angle, self.config.radio.polarization);
        }
        if path.edge.is_some() {
            loss += budget.diffraction_db;
        }
        budget.band.tx_power_dbm - loss + budget.band.rx_processing_gain_db
    }

    /// Converts a traced path to a detected MPC, or `None` when it is blocked
    /// or below the detection SNR.
    pub fn to_mpc(&self, path: &PathGeometry, anchor: usize, budget: &LinkBudget) -> Option<Mpc> {
        let power = self.rx_power_dbm(path, budget);
        let snr = power - budget.noise_floor_dbm;
        if !power.is_finite() || snr < self.config.radio.min_snr_db {
            return None;
        }
        let mut mpc = Mpc::new(path.interactions.clone(), path.length, power, snr, anchor);
        debug_assert_eq!(mpc.group, classify_mpc(&path.interactions));
        mpc.edge = path.edge;
        Some(mpc)
    }

    /// Profile built from pre-traced paths at one frequency.
    pub fn profile(&self, anchor: usize, rx: &Receiver, paths: &[PathGeometry], budget: &LinkBudget) -> Pdp {
        let mpcs = paths.iter().filter_map(|p| self.to_mpc(p, anchor, budget)).collect();
        Pdp::new(anchor, rx.id, rx.position, mpcs)
    }

    /// Full (untruncated) profile for an anchor and receiver at `f_hz`.
    pub fn enumerate_mpcs(&self, anchor: usize, rx: &Receiver, f_hz: f64) -> Pdp {
        let paths = self.trace(anchor, &rx.position);
        self.profile(anchor, rx, &paths, &self.link_budget(f_hz))
    }
}
