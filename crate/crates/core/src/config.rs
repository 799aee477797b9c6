//! Plain-text configuration: one `key = value` per line, `#` comments.
//! Unknown keys are an error; command-line overrides win over file values.

use std::collections::BTreeMap;
use std::path::Path;

use crate::channel::{ChannelConfig, ChannelModel, CsirMode, PilotEnergyMode};
use crate::detect::{DEFAULT_ML_CAP, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::mapping::ImConfig;
use crate::sim::SweepSpec;
use crate::train::TrainConfig;

/// Everything a run needs, with defaults filled in for the optional parts.
#[derive(Debug, Clone, PartialEq)]
pub struct FullConfig {
    pub im: ImConfig,
    pub channel: ChannelConfig,
    pub train: TrainConfig,
    /// Sweep settings; the detector list is supplied by the caller.
    pub snr_grid_db: Vec<f64>,
    pub frames_per_point: u64,
    pub min_bit_errors: u64,
    pub tau: f64,
    pub ml_cap: f64,
}

impl FullConfig {
    pub fn sweep_spec(
        &self,
        detectors: Vec<crate::detect::DetectorKind>,
        seed: u64,
    ) -> SweepSpec {
        let mut spec = SweepSpec::new(self.snr_grid_db.clone(), self.frames_per_point, detectors, seed);
        spec.min_bit_errors = self.min_bit_errors;
        spec.tau = self.tau;
        spec.ml_cap = self.ml_cap;
        spec
    }
}

const KNOWN_KEYS: &[&str] = &[
    // frame mapping
    "n_tx",
    "n_rx",
    "n_sub",
    "k_active",
    "f_active",
    "mod_order",
    "special_amp_ratio",
    // channel
    "channel_model",
    "rho",
    "csir_mode",
    "n_pilot",
    "pilot_energy_mode",
    // sweep
    "snr_grid",
    "frames_per_point",
    "min_bit_errors",
    "tau",
    "ml_cap",
    // training
    "epochs_ad",
    "epochs_sd",
    "batch_size",
    "learning_rate",
    "train_records",
    "holdout_records",
    "train_snr_grid",
];

fn parse_pairs(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{source}:{}: expected `key = value`, got `{raw}`", lineno + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_grid(value: &str, key: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("key `{key}`: bad number `{v}`")))
        })
        .collect::<Result<_>>()?;
    if grid.is_empty() {
        return Err(Error::Config(format!("key `{key}`: empty grid")));
    }
    Ok(grid)
}

fn get_parsed<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("key `{key}`: bad value `{v}`"))),
    }
}

fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
}

/// Build the full configuration from file text plus override pairs.
pub fn parse_config_text(text: &str, overrides: &[(String, String)]) -> Result<FullConfig> {
    let mut map = BTreeMap::new();
    for (k, v) in parse_pairs(text, "config")? {
        if !KNOWN_KEYS.contains(&k.as_str()) {
            return Err(Error::UnknownKey(k));
        }
        map.insert(k, v);
    }
    for (k, v) in overrides {
        if !KNOWN_KEYS.contains(&k.as_str()) {
            return Err(Error::UnknownKey(k.clone()));
        }
        map.insert(k.clone(), v.clone());
    }

    let im = ImConfig::new(
        require(get_parsed(&map, "n_tx")?, "n_tx")?,
        require(get_parsed(&map, "n_rx")?, "n_rx")?,
        require(get_parsed(&map, "n_sub")?, "n_sub")?,
        require(get_parsed(&map, "k_active")?, "k_active")?,
        require(get_parsed(&map, "f_active")?, "f_active")?,
        require(get_parsed(&map, "mod_order")?, "mod_order")?,
        get_parsed(&map, "special_amp_ratio")?.unwrap_or(0.5),
    )?;

    let model = match map.get("channel_model").map(String::as_str) {
        None | Some("rayleigh") => ChannelModel::Rayleigh,
        Some("correlated") => ChannelModel::Correlated,
        Some(other) => {
            return Err(Error::Config(format!("key `channel_model`: unknown model `{other}`")))
        }
    };
    let csir = match map.get("csir_mode").map(String::as_str) {
        None | Some("perfect") => CsirMode::Perfect,
        Some("imperfect") => CsirMode::Imperfect,
        Some(other) => {
            return Err(Error::Config(format!("key `csir_mode`: unknown mode `{other}`")))
        }
    };
    let pilot_energy = match map.get("pilot_energy_mode").map(String::as_str) {
        None | Some("es") => PilotEnergyMode::DataEnergy,
        Some("unit") => PilotEnergyMode::Unit,
        Some(other) => {
            return Err(Error::Config(format!("key `pilot_energy_mode`: unknown mode `{other}`")))
        }
    };
    let channel = ChannelConfig {
        model,
        rho: get_parsed(&map, "rho")?.unwrap_or(0.5),
        csir,
        n_pilot: get_parsed(&map, "n_pilot")?,
        pilot_energy,
    };
    channel.validate()?;

    let mut train = TrainConfig::default();
    if let Some(v) = get_parsed(&map, "epochs_ad")? {
        train.epochs_ad = v;
    }
    if let Some(v) = get_parsed(&map, "epochs_sd")? {
        train.epochs_sd = v;
    }
    if let Some(v) = get_parsed(&map, "batch_size")? {
        train.batch_size = v;
    }
    if let Some(v) = get_parsed(&map, "learning_rate")? {
        train.learning_rate = v;
    }
    if let Some(v) = get_parsed(&map, "train_records")? {
        train.train_records = v;
    }
    if let Some(v) = get_parsed(&map, "holdout_records")? {
        train.holdout_records = v;
    }
    if let Some(v) = map.get("train_snr_grid") {
        train.snr_grid_db = parse_grid(v, "train_snr_grid")?;
    }
    train.validate()?;

    let snr_grid_db = match map.get("snr_grid") {
        Some(v) => parse_grid(v, "snr_grid")?,
        None => vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
    };

    Ok(FullConfig {
        im,
        channel,
        train,
        snr_grid_db,
        frames_per_point: get_parsed(&map, "frames_per_point")?.unwrap_or(10_000),
        min_bit_errors: get_parsed(&map, "min_bit_errors")?.unwrap_or(100),
        tau: get_parsed(&map, "tau")?.unwrap_or(DEFAULT_TAU),
        ml_cap: get_parsed(&map, "ml_cap")?.unwrap_or(DEFAULT_ML_CAP),
    })
}

/// Read and parse a configuration file.
pub fn parse_config(path: &Path, overrides: &[(String, String)]) -> Result<FullConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text, overrides)
}
