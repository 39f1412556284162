//! Network scenarios: AP/device placement, traffic and radio constants.
//!
//! Everything downstream (gains, neighborhoods, plans, simulation) is a
//! deterministic function of a [`NetworkScenario`]. Radio constants are kept
//! in the units users quote (dBm, dBm/Hz) and converted to linear units by the
//! accessor methods.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG stream used for placement; the channel module uses its own streams.
pub(crate) const PLACEMENT_STREAM: u64 = 0;

/// How line-of-sight state is assigned to each AP-device link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LosModel {
    /// Bernoulli with probability `exp(-R / scale_m)`.
    Random { scale_m: f64 },
    ForceLos,
    ForceNlos,
}

impl Default for LosModel {
    fn default() -> Self {
        LosModel::Random { scale_m: 200.0 }
    }
}

fn default_packet_bits() -> f64 {
    5.0e5
}
fn default_bandwidth() -> f64 {
    10.0e6
}
fn default_p_max_dbm() -> f64 {
    23.0
}
fn default_noise() -> f64 {
    -174.0
}
fn default_xi() -> f64 {
    1.0
}
fn default_alpha() -> usize {
    20
}
fn default_sigma_los() -> f64 {
    4.0
}
fn default_sigma_nlos() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}

/// Scalar parameters of a scenario. Defaults follow an LTE-like macro setup:
/// 23 dBm per AP over 10 MHz, 0.5 Mbit mean packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_aps: usize,
    pub n_devices: usize,
    pub area_side_m: f64,
    /// Per-device packet arrival rate (packets/s), replicated to all devices
    /// unless the scenario carries per-device overrides.
    pub lambda: f64,
    #[serde(default = "default_packet_bits")]
    pub mean_packet_bits: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    /// Total AP transmit power in dBm, spread flat over the band to give the
    /// peak PSD.
    #[serde(default = "default_p_max_dbm")]
    pub p_max_dbm: f64,
    #[serde(default = "default_noise")]
    pub noise_psd_dbm_hz: f64,
    /// Linear SNR threshold for neighborhood membership.
    #[serde(default = "default_xi")]
    pub snr_threshold: f64,
    #[serde(default = "default_alpha")]
    pub neighborhood_cap: usize,
    #[serde(default)]
    pub los_model: LosModel,
    #[serde(default = "default_sigma_los")]
    pub shadowing_los_db: f64,
    #[serde(default = "default_sigma_nlos")]
    pub shadowing_nlos_db: f64,
    #[serde(default = "default_true")]
    pub shadowing: bool,
    pub seed: u64,
}

impl ScenarioParams {
    /// Defaults with the given geometry.
    pub fn new(n_aps: usize, n_devices: usize, area_side_m: f64, seed: u64) -> Self {
        ScenarioParams {
            n_aps,
            n_devices,
            area_side_m,
            lambda: 10.0,
            mean_packet_bits: default_packet_bits(),
            bandwidth_hz: default_bandwidth(),
            p_max_dbm: default_p_max_dbm(),
            noise_psd_dbm_hz: default_noise(),
            snr_threshold: default_xi(),
            neighborhood_cap: default_alpha(),
            los_model: LosModel::default(),
            shadowing_los_db: default_sigma_los(),
            shadowing_nlos_db: default_sigma_nlos(),
            shadowing: true,
            seed,
        }
    }

    /// 100 APs and 250 devices over a 1,330 m square.
    pub fn medium(seed: u64) -> Self {
        Self::new(100, 250, 1330.0, seed)
    }

    /// 1,000 APs and 2,500 devices over a 4,200 m square.
    pub fn large(seed: u64) -> Self {
        Self::new(1000, 2500, 4200.0, seed)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(field, format!("must be positive, got {v}")))
            }
        }
        if self.n_aps == 0 {
            return Err(Error::validation("n_aps", "must be at least 1"));
        }
        if self.n_devices == 0 {
            return Err(Error::validation("n_devices", "must be at least 1"));
        }
        positive("area_side_m", self.area_side_m)?;
        positive("lambda", self.lambda)?;
        positive("mean_packet_bits", self.mean_packet_bits)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("snr_threshold", self.snr_threshold)?;
        if !self.p_max_dbm.is_finite() {
            return Err(Error::validation("p_max_dbm", "must be finite"));
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::validation("noise_psd_dbm_hz", "must be finite"));
        }
        if self.neighborhood_cap == 0 {
            return Err(Error::validation("neighborhood_cap", "must be at least 1"));
        }
        if let LosModel::Random { scale_m } = self.los_model {
            positive("los_model.scale_m", scale_m)?;
        }
        if !(self.shadowing_los_db >= 0.0 && self.shadowing_nlos_db >= 0.0) {
            return Err(Error::validation("shadowing", "standard deviations must be >= 0"));
        }
        Ok(())
    }
}

pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub params: ScenarioParams,
    pub ap_positions: Vec<Point>,
    pub device_positions: Vec<Point>,
    /// Per-device arrival rates (packets/s).
    pub lambda: Vec<f64>,
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

impl NetworkScenario {
    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn n_devices(&self) -> usize {
        self.device_positions.len()
    }

    /// Peak PSD in W/Hz.
    pub fn p_max(&self) -> f64 {
        dbm_to_watts(self.params.p_max_dbm) / self.params.bandwidth_hz
    }

    /// Thermal noise PSD in W/Hz.
    pub fn noise_psd(&self) -> f64 {
        dbm_to_watts(self.params.noise_psd_dbm_hz)
    }

    pub fn bandwidth(&self) -> f64 {
        self.params.bandwidth_hz
    }

    pub fn packet_bits(&self) -> f64 {
        self.params.mean_packet_bits
    }

    /// Offered load per device in bits/s.
    pub fn loads_bits(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|a| a * self.params.mean_packet_bits)
            .collect()
    }

    /// Same geometry and channel draws with every device's arrival rate set to
    /// `lambda`.
    pub fn with_uniform_lambda(&self, lambda: f64) -> NetworkScenario {
        let mut s = self.clone();
        s.params.lambda = lambda;
        s.lambda = vec![lambda; s.n_devices()];
        s
    }

    pub fn distance(&self, ap: usize, device: usize) -> f64 {
        let (ax, ay) = self.ap_positions[ap];
        let (dx, dy) = self.device_positions[device];
        (ax - dx).hypot(ay - dy)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.ap_positions.len() != self.params.n_aps {
            return Err(Error::validation(
                "ap_positions",
                format!(
                    "expected {} entries, found {}",
                    self.params.n_aps,
                    self.ap_positions.len()
                ),
            ));
        }
        if self.device_positions.len() != self.params.n_devices {
            return Err(Error::validation(
                "device_positions",
                format!(
                    "expected {} entries, found {}",
                    self.params.n_devices,
                    self.device_positions.len()
                ),
            ));
        }
        if self.lambda.len() != self.params.n_devices {
            return Err(Error::validation("lambda_per_device", "length must equal n_devices"));
        }
        let side = self.params.area_side_m;
        let inside = |&(x, y): &Point| (0.0..=side).contains(&x) && (0.0..=side).contains(&y);
        if !self.ap_positions.iter().all(inside) {
            return Err(Error::validation("ap_positions", "position outside the area"));
        }
        if !self.device_positions.iter().all(inside) {
            return Err(Error::validation("device_positions", "position outside the area"));
        }
        if let Some(bad) = self.lambda.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::validation("lambda_per_device", format!("rate {bad} is not positive")));
        }
        Ok(())
    }
}

/// Drops APs and devices uniformly at random over the square.
pub fn generate_scenario(params: ScenarioParams) -> Result<NetworkScenario> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(PLACEMENT_STREAM);
    let side = params.area_side_m;
    let mut draw = |count: usize| -> Vec<Point> {
        (0..count)
            .map(|_| (rng.random::<f64>() * side, rng.random::<f64>() * side))
            .collect()
    };
    let ap_positions = draw(params.n_aps);
    let device_positions = draw(params.n_devices);
    let lambda = vec![params.lambda; params.n_devices];
    Ok(NetworkScenario {
        params,
        ap_positions,
        device_positions,
        lambda,
    })
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    params: ScenarioParams,
    ap_positions: Vec<Point>,
    device_positions: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_per_device: Option<Vec<f64>>,
}

impl NetworkScenario {
    pub fn to_json(&self) -> String {
        let homogeneous = self.lambda.iter().all(|&a| a == self.params.lambda);
        let file = ScenarioFile {
            params: self.params.clone(),
            ap_positions: self.ap_positions.clone(),
            device_positions: self.device_positions.clone(),
            lambda_per_device: (!homogeneous).then(|| self.lambda.clone()),
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|source| Error::Parse {
            what: "scenario".into(),
            source,
        })?;
        let lambda = file
            .lambda_per_device
            .unwrap_or_else(|| vec![file.params.lambda; file.params.n_devices]);
        let s = NetworkScenario {
            params: file.params,
            ap_positions: file.ap_positions,
            device_positions: file.device_positions,
            lambda,
        };
        s.validate()?;
        Ok(s)
    }
}

pub fn save_scenario(s: &NetworkScenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, s.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<NetworkScenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NetworkScenario::from_json(&text)
}
