//! First-arriving-path selection, ranging CRLB and noisy range synthesis.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Mpc, MpcGroup, Pdp};
use crate::materials::Band;
use crate::SPEED_OF_LIGHT;

/// Default FAP threshold below the strongest path.
pub const DEFAULT_T_FAP_DB: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FapError {
    #[error("no multipath component detected (anchor {anchor_id}, receiver {rx_id})")]
    NoDetection { anchor_id: usize, rx_id: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FapSelection {
    pub chosen: Mpc,
    /// Strongest SNR in the profile (dB).
    pub s_max: f64,
    pub threshold: f64,
    pub t_fap: f64,
}

/// Earliest component whose SNR is within `t_fap` dB of the strongest one.
/// Equal arrival times go to the stronger component.
pub fn select_fap(pdp: &Pdp, t_fap: f64) -> Result<FapSelection, FapError> {
    let s_max = pdp
        .mpcs
        .iter()
        .map(|m| m.snr_db)
        .max_by(f64::total_cmp)
        .ok_or(FapError::NoDetection {
            anchor_id: pdp.anchor_id,
            rx_id: pdp.rx_id,
        })?;
    let threshold = s_max - t_fap;
    let chosen = pdp
        .mpcs
        .iter()
        .filter(|m| m.snr_db >= threshold)
        .min_by(|a, b| a.tof.total_cmp(&b.tof).then(b.snr_db.total_cmp(&a.snr_db)))
        .expect("strongest component always qualifies");
    Ok(FapSelection {
        chosen: chosen.clone(),
        s_max,
        threshold,
        t_fap,
    })
}

/// Baseband power spectrum used for the mean squared bandwidth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Spectrum {
    /// Rectangular over `[-B/2, B/2]`.
    #[default]
    Flat,
    /// Amplitude samples `|S(f)|` on an increasing frequency grid (Hz),
    /// integrated with the trapezoid rule.
    Sampled { freqs: Vec<f64>, amplitude: Vec<f64> },
    /// Spectral lines `(f, |S|)`.
    Discrete { lines: Vec<(f64, f64)> },
}

impl Spectrum {
    /// `beta^2 = int f^2 |S|^2 df / int |S|^2 df`.
    pub fn mean_squared_bandwidth(&self, bandwidth_hz: f64) -> Result<f64, FapError> {
        let ratio = |num: f64, den: f64| {
            if den > 0.0 && num > 0.0 && (num / den).is_finite() {
                Ok(num / den)
            } else {
                Err(FapError::InvalidInput("spectrum carries no power away from DC".into()))
            }
        };
        match self {
            Spectrum::Flat => {
                if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
                    return Err(FapError::InvalidInput(format!(
                        "bandwidth must be positive, got {bandwidth_hz}"
                    )));
                }
                Ok(bandwidth_hz * bandwidth_hz / 12.0)
            }
            Spectrum::Sampled { freqs, amplitude } => {
                if freqs.len() != amplitude.len() || freqs.len() < 2 || freqs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(FapError::InvalidInput(
                        "sampled spectrum needs >= 2 increasing samples".into(),
                    ));
                }
                let (mut num, mut den) = (0.0, 0.0);
                for i in 1..freqs.len() {
                    let df = freqs[i] - freqs[i - 1];
                    let (p0, p1) = (amplitude[i - 1].powi(2), amplitude[i].powi(2));
                    num += 0.5 * df * (freqs[i - 1].powi(2) * p0 + freqs[i].powi(2) * p1);
                    den += 0.5 * df * (p0 + p1);
                }
                ratio(num, den)
            }
            Spectrum::Discrete { lines } => {
                let num: f64 = lines.iter().map(|(f, a)| f * f * a * a).sum();
                let den: f64 = lines.iter().map(|(_, a)| a * a).sum();
                ratio(num, den)
            }
        }
    }
}

/// `beta^2` of a flat spectrum spanning the band.
pub fn mean_squared_bandwidth(band: &Band) -> f64 {
    band.bandwidth * band.bandwidth / 12.0
}

/// Standard deviation of the ToF estimate, `1 / sqrt(8 pi^2 beta^2 S)`.
pub fn ranging_crlb_std_seconds(beta_sq: f64, snr_linear: f64) -> Result<f64, FapError> {
    if !(beta_sq > 0.0 && snr_linear > 0.0) || !beta_sq.is_finite() || !snr_linear.is_finite() {
        return Err(FapError::InvalidInput(format!(
            "beta^2 and SNR must be positive and finite, got {beta_sq:e}, {snr_linear:e}"
        )));
    }
    Ok(1.0 / (8.0 * PI * PI * beta_sq * snr_linear).sqrt())
}

/// Range standard deviation in metres for an SNR in dB.
pub fn range_sigma_m(beta_sq: f64, snr_db: f64) -> Result<f64, FapError> {
    Ok(SPEED_OF_LIGHT * ranging_crlb_std_seconds(beta_sq, db_to_linear(snr_db))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeMeasurement {
    pub anchor_id: usize,
    pub range: f64,
    pub sigma: f64,
    pub fap_group: MpcGroup,
    pub snr_db: f64,
    /// Window edge of a diffracted FAP, if known.
    pub edge: Option<usize>,
}

/// Noisy range of the selected FAP drawn from `rng`.
pub fn synthesize_measurement_with<R: Rng + ?Sized>(
    fap: &FapSelection,
    beta_sq: f64,
    rng: &mut R,
) -> Result<RangeMeasurement, FapError> {
    let sigma = range_sigma_m(beta_sq, fap.chosen.snr_db)?;
    let noise = Normal::new(0.0, sigma)
        .map_err(|e| FapError::InvalidInput(e.to_string()))?
        .sample(rng);
    Ok(RangeMeasurement {
        anchor_id: fap.chosen.anchor_id,
        range: fap.chosen.path_length + noise,
        sigma,
        fap_group: fap.chosen.group,
        snr_db: fap.chosen.snr_db,
        edge: fap.chosen.edge,
    })
}

pub fn synthesize_measurement(fap: &FapSelection, beta_sq: f64, seed: u64) -> Result<RangeMeasurement, FapError> {
    synthesize_measurement_with(fap, beta_sq, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{parse_interactions, Interaction};
    use crate::geometry::Point3;
    use approx::assert_relative_eq;

    fn pdp(paths: &[(f64, f64)]) -> Pdp {
        let mpcs = paths
            .iter()
            .map(|&(len, snr)| Mpc::new(vec![Interaction::T], len, snr - 88.0, snr, 0))
            .collect();
        Pdp::new(0, 0, Point3::origin(), mpcs)
    }

    #[test]
    fn fap_rule_examples() {
        let s = select_fap(&pdp(&[(10.0, 25.0), (12.0, 30.0)]), 20.0).unwrap();
        assert_eq!(s.threshold, 10.0);
        assert_eq!(s.chosen.path_length, 10.0);
        let s = select_fap(&pdp(&[(10.0, 5.0), (11.0, 8.0), (12.0, 30.0)]), 20.0).unwrap();
        assert_eq!(s.chosen.path_length, 12.0);
        let s = select_fap(&pdp(&[(10.0, 5.0), (11.0, 30.0), (12.0, 30.0)]), 0.0).unwrap();
        assert_eq!(s.chosen.path_length, 11.0);
    }

    #[test]
    fn equal_tof_prefers_stronger() {
        let s = select_fap(&pdp(&[(10.0, 15.0), (10.0, 18.0), (12.0, 30.0)]), 20.0).unwrap();
        assert_eq!(s.chosen.snr_db, 18.0);
    }

    #[test]
    fn empty_profile_is_no_detection() {
        assert!(matches!(select_fap(&pdp(&[]), 20.0), Err(FapError::NoDetection { .. })));
    }

    #[test]
    fn flat_and_two_line_bandwidth() {
        let b = 400e6;
        assert_relative_eq!(
            Spectrum::Flat.mean_squared_bandwidth(b).unwrap(),
            1.3333333333333333e16,
            max_relative = 1e-12
        );
        let lines = Spectrum::Discrete {
            lines: vec![(-b / 2.0, 1.0), (b / 2.0, 1.0)],
        };
        assert_relative_eq!(
            lines.mean_squared_bandwidth(b).unwrap(),
            b * b / 4.0,
            max_relative = 1e-12
        );
        let scaled = Spectrum::Discrete {
            lines: vec![(-b / 2.0, 7.0), (b / 2.0, 7.0)],
        };
        assert_eq!(
            scaled.mean_squared_bandwidth(b).unwrap(),
            lines.mean_squared_bandwidth(b).unwrap()
        );
    }

    #[test]
    fn sampled_rectangle_converges_to_flat() {
        let b = 400e6;
        let n = 4001;
        let freqs: Vec<f64> = (0..n).map(|i| -b / 2.0 + b * i as f64 / (n - 1) as f64).collect();
        let spec = Spectrum::Sampled {
            freqs,
            amplitude: vec![3.0; n],
        };
        assert_relative_eq!(
            spec.mean_squared_bandwidth(b).unwrap(),
            b * b / 12.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn crlb_reference_value() {
        let beta_sq = 400e6f64.powi(2) / 12.0;
        let std = ranging_crlb_std_seconds(beta_sq, 10.0).unwrap();
        // 1 / sqrt(8 pi^2 * (4e8)^2/12 * 10)
        assert_relative_eq!(std, 3.0820e-10, max_relative = 1e-4);
        assert_eq!(ranging_crlb_std_seconds(beta_sq, 40.0).unwrap(), std / 2.0);
        assert!(ranging_crlb_std_seconds(0.0, 1.0).is_err());
        assert!(ranging_crlb_std_seconds(1.0, -1.0).is_err());
    }

    #[test]
    fn measurement_is_seeded() {
        let p = Pdp::new(
            3,
            0,
            Point3::origin(),
            vec![Mpc::new(parse_interactions("Tx-D-Rx").unwrap(), 25.0, -60.0, 28.0, 3)],
        );
        let fap = select_fap(&p, 20.0).unwrap();
        let beta_sq = 400e6f64.powi(2) / 12.0;
        let a = synthesize_measurement(&fap, beta_sq, 42).unwrap();
        let b = synthesize_measurement(&fap, beta_sq, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.anchor_id, 3);
        assert_eq!(a.fap_group, MpcGroup::MPC3);
        assert!(a.sigma > 0.0 && (a.range - 25.0).abs() < 6.0 * a.sigma);
    }
}
