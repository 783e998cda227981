//! Flat key-value scenario config files (TOML syntax).
//!
//! Every key is optional and falls back to [`ScenarioConfig::default`].
//! Quantities with a natural log-scale form accept either spelling, but not
//! both at once:
//!
//! | linear                | log scale              |
//! |-----------------------|------------------------|
//! | `tx_power_w`          | `tx_power_dbm`         |
//! | `noise_psd_w_per_hz`  | `noise_psd_dbm_per_hz` |
//! | `si_level`            | `si_level_db`          |
//! | `wavelength_m`        | `carrier_hz`           |
//!
//! Unknown keys are rejected. See `configs/default.toml` for every key.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::link_model::{db_to_linear, dbm_to_watts, SPEED_OF_LIGHT};
use crate::scenario::{Point, ScenarioConfig, ScenarioError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
    #[error("{context}: invalid config:\n  - {}", .violations.join("\n  - "))]
    Invalid { context: String, violations: Vec<String> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    area_size_m: Option<f64>,
    flow_count: Option<usize>,
    slots_per_frame: Option<u64>,
    qos_min_mbps: Option<f64>,
    qos_max_mbps: Option<f64>,
    bandwidth_hz: Option<f64>,
    bs_share: Option<f64>,
    mr_share: Option<f64>,
    tx_power_w: Option<f64>,
    tx_power_dbm: Option<f64>,
    noise_psd_w_per_hz: Option<f64>,
    noise_psd_dbm_per_hz: Option<f64>,
    path_loss_exp: Option<f64>,
    efficiency: Option<f64>,
    si_level: Option<f64>,
    si_level_db: Option<f64>,
    wavelength_m: Option<f64>,
    carrier_hz: Option<f64>,
    bs_beamwidth_deg: Option<f64>,
    mr_beamwidth_deg: Option<f64>,
    user_beamwidth_deg: Option<f64>,
    bs_x: Option<f64>,
    bs_y: Option<f64>,
    mr_x: Option<f64>,
    mr_y: Option<f64>,
    blockage_prob: Option<f64>,
    min_distance_m: Option<f64>,
    seed: Option<u64>,
}

fn pick(
    errs: &mut Vec<String>,
    linear: Option<f64>,
    log: Option<f64>,
    names: (&str, &str),
    convert: impl Fn(f64) -> f64,
) -> Option<f64> {
    match (linear, log) {
        (Some(_), Some(_)) => {
            errs.push(format!("give either {} or {}, not both", names.0, names.1));
            None
        }
        (Some(v), None) => Some(v),
        (None, Some(v)) => Some(convert(v)),
        (None, None) => None,
    }
}

impl ConfigFile {
    fn into_config(self) -> Result<ScenarioConfig, Vec<String>> {
        let mut cfg = ScenarioConfig::default();
        let mut errs = Vec::new();
        let r = &mut cfg.radio;

        if let Some(v) = self.area_size_m {
            cfg.area_size_m = v;
        }
        if let Some(v) = self.flow_count {
            cfg.flow_count = v;
        }
        if let Some(v) = self.slots_per_frame {
            cfg.slots_per_frame = v;
        }
        if let Some(v) = self.qos_min_mbps {
            cfg.qos_min_bps = v * 1e6;
        }
        if let Some(v) = self.qos_max_mbps {
            cfg.qos_max_bps = v * 1e6;
        }
        if let Some(v) = self.bandwidth_hz {
            r.bandwidth_hz = v;
        }
        match (self.bs_share, self.mr_share) {
            (Some(a), Some(b)) => {
                r.bs_share = a;
                r.mr_share = b;
            }
            (Some(a), None) => *r = r.with_bs_share(a),
            (None, Some(b)) => *r = r.with_bs_share(1.0 - b),
            (None, None) => {}
        }
        if let Some(v) = pick(&mut errs, self.tx_power_w, self.tx_power_dbm, ("tx_power_w", "tx_power_dbm"), dbm_to_watts) {
            r.tx_power_w = v;
        }
        if let Some(v) = pick(
            &mut errs,
            self.noise_psd_w_per_hz,
            self.noise_psd_dbm_per_hz,
            ("noise_psd_w_per_hz", "noise_psd_dbm_per_hz"),
            dbm_to_watts,
        ) {
            r.noise_psd_w_per_hz = v;
        }
        if let Some(v) = self.path_loss_exp {
            r.path_loss_exp = v;
        }
        if let Some(v) = self.efficiency {
            r.efficiency = v;
        }
        if let Some(v) = pick(&mut errs, self.si_level, self.si_level_db, ("si_level", "si_level_db"), db_to_linear) {
            r.si_level = v;
        }
        if let Some(v) = pick(&mut errs, self.wavelength_m, self.carrier_hz, ("wavelength_m", "carrier_hz"), |f| {
            SPEED_OF_LIGHT / f
        }) {
            r.wavelength_m = v;
        }
        if let Some(v) = self.bs_beamwidth_deg {
            r.bs_beamwidth_deg = v;
        }
        if let Some(v) = self.mr_beamwidth_deg {
            r.mr_beamwidth_deg = v;
        }
        if let Some(v) = self.user_beamwidth_deg {
            r.user_beamwidth_deg = v;
        }
        cfg.bs_position = Point::new(self.bs_x.unwrap_or(cfg.bs_position.x), self.bs_y.unwrap_or(cfg.bs_position.y));
        cfg.mr_position = Point::new(self.mr_x.unwrap_or(cfg.mr_position.x), self.mr_y.unwrap_or(cfg.mr_position.y));
        if let Some(v) = self.blockage_prob {
            cfg.blockage_prob = v;
        }
        if let Some(v) = self.min_distance_m {
            cfg.min_distance_m = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }

        match cfg.validate() {
            Ok(()) => {}
            Err(ScenarioError::Invalid(v)) => errs.extend(v),
            Err(e) => errs.push(e.to_string()),
        }
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(errs)
        }
    }
}

pub fn parse_config(text: &str, context: &str) -> Result<ScenarioConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })?;
    file.into_config().map_err(|violations| ConfigError::Invalid { context: context.to_string(), violations })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text, &path.display().to_string())
}
