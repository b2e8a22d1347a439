//! Run configuration file (TOML). Every key is optional; unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::depth::GaussianKernel;
use crate::error::{Error, Result};
use crate::fusion::{FusionTable, PipelineMode, PipelineParams, SpeedSchedule};
use crate::global::OracleParams;
use crate::harness::{SimParams, SuiteConfig};
use crate::sim::{ScenarioId, ScenarioParams, TofModel, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub table: FusionTable,
    pub schedule: SpeedSchedule,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { table: FusionTable::standard(), schedule: SpeedSchedule::standard() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioId,
    pub mode: PipelineMode,
    pub trials: u32,
    #[serde(with = "seed_repr")]
    pub seed: u64,
    /// Target forward speed, m/s.
    pub v_t: f64,
    /// Maximum target yaw rate, deg/s.
    pub yaw_t: f64,
    /// Steering discretization threshold.
    pub eta: f64,
    /// ToF noise standard deviation, mm.
    pub noise_sigma: f64,
    /// Trial timeout, s.
    pub t_max: f64,
    pub kernel_sigma: f64,
    pub telemetry_stride: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Custom world file used instead of the built-in scenario geometry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world: Option<PathBuf>,
    pub oracle: OracleParams,
    pub geometry: ScenarioParams,
    pub fusion: FusionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioId::S1,
            mode: PipelineMode::Fused,
            trials: 5,
            seed: 42,
            v_t: 1.5,
            yaw_t: 60.0,
            eta: 0.1,
            noise_sigma: 20.0,
            t_max: 120.0,
            kernel_sigma: GaussianKernel::DEFAULT_SIGMA,
            telemetry_stride: 1,
            out: None,
            world: None,
            oracle: OracleParams::default(),
            geometry: ScenarioParams::default(),
            fusion: FusionConfig::default(),
        }
    }
}

/// TOML integers are signed, so seeds above `i64::MAX` are written as
/// decimal strings. Both forms are accepted on input.
mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(|_| de::Error::custom("seed must be non-negative")),
            Repr::Text(t) => t.parse().map_err(|_| de::Error::custom(format!("invalid seed `{t}`"))),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::parse_in(text, Path::new("<config>"))
    }

    fn parse_in(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        positive("v_t", self.v_t)?;
        positive("yaw_t", self.yaw_t)?;
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::config("eta", format!("must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config("noise_sigma", format!("must be >= 0, got {}", self.noise_sigma)));
        }
        positive("t_max", self.t_max)?;
        positive("kernel_sigma", self.kernel_sigma)?;
        if self.telemetry_stride == 0 {
            return Err(Error::config("telemetry_stride", "must be at least 1"));
        }
        positive("oracle.lookahead_m", self.oracle.lookahead_m)?;
        positive("oracle.camera_fov_deg", self.oracle.camera_fov_deg)?;
        self.geometry.validate()
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn sim_params(&self) -> Result<SimParams> {
        let kernel = GaussianKernel::gaussian(self.kernel_sigma)
            .map_err(|e| Error::config("kernel_sigma", e.to_string()))?;
        Ok(SimParams {
            pipeline: PipelineParams {
                v_t: self.v_t,
                yaw_t: self.yaw_t,
                eta: self.eta,
                kernel,
                table: self.fusion.table.clone(),
                schedule: self.fusion.schedule.clone(),
            },
            oracle: self.oracle,
            tof: TofModel { noise_sigma_mm: self.noise_sigma, ..TofModel::default() },
            t_max: self.t_max,
            telemetry_stride: self.telemetry_stride,
        })
    }

    /// Suite over the given cells; loads the custom world if one is set.
    pub fn suite(&self, scenarios: Vec<ScenarioId>, modes: Vec<PipelineMode>) -> Result<SuiteConfig> {
        let world = self.world.as_deref().map(load_world).transpose()?;
        Ok(SuiteConfig {
            scenarios,
            modes,
            trials: self.trials,
            global_seed: self.seed,
            layout: self.geometry,
            params: self.sim_params()?,
            world,
            threads: None,
        })
    }
}

/// Reads and validates a config file. A relative `world` path is taken
/// relative to the config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = RunConfig::parse_in(&text, path)?;
    if let (Some(w), Some(dir)) = (&cfg.world, path.parent()) {
        if w.is_relative() {
            cfg.world = Some(dir.join(w));
        }
    }
    Ok(cfg)
}

/// Custom geometry: walls, obstacles, lane, start pose, end region and
/// section labels.
pub fn load_world(path: &Path) -> Result<World> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let world: World = toml::from_str(&text)
        .map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.message().to_string() })?;
    world.validate()?;
    Ok(world)
}
