//! Flat `key = value` experiment files.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored.
//! Keys mirror [`ExperimentConfig`] fields, with `N`, `R` and `A_L`
//! accepted as aliases for `n_eds`, `n_relays` and `area_side`. Anything
//! not set keeps its default.

use std::fmt;
use std::path::Path;

use relaysim_core::{CaptureTable, ExperimentConfig, RadioProfile, SpreadingFactor};

use crate::error::CliError;

/// A config problem pinned to its line (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Every key [`apply`] understands, in documentation order.
pub const KEYS: &[&str] = &[
    "architecture",
    "n_eds",
    "n_relays",
    "area_side",
    "building_side",
    "building_pitch",
    "building_height",
    "sim_time",
    "payload_interval",
    "payload_bytes",
    "ed_tx_power",
    "relay_tx_power",
    "ed_gain",
    "relay_gain",
    "gw_gain",
    "eu868_bandwidth",
    "ism_bandwidth",
    "coding_rate",
    "preamble_symbols",
    "gw_height",
    "node_height",
    "o2i_loss",
    "shadowing",
    "shadowing_sigma_los",
    "shadowing_sigma_nlos",
    "los_model",
    "adr_margin",
    "capture_gamma",
    "relay_self_traffic",
    "rx_window_symbols",
    "rx1_delay",
    "rx2_delay",
    "relay_queue_limit",
    "eu868_sensitivity",
    "ism_sensitivity",
    "eu868_tx_current",
    "ism_tx_current",
    "eu868_rx_current",
    "ism_rx_current",
    "eu868_sleep_current",
    "ism_sleep_current",
    "supply_voltage",
    "run_count",
    "base_seed",
];

fn number<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("'{value}' is not a valid number"))
}

fn boolean(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("'{value}' is not a boolean (true/false)")),
    }
}

fn list(value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(|v| number(v.trim())).collect()
}

/// `k` of CR 4/(4+k), written either as `1` or as `4/5`.
fn coding_rate(value: &str) -> Result<u8, String> {
    match value.split_once('/') {
        Some(("4", den)) => Ok(number::<u8>(den.trim())?.saturating_sub(4)),
        Some(_) => Err(format!("coding rate '{value}' must look like 4/5 .. 4/8")),
        None => number(value),
    }
}

/// `power:current` pairs, e.g. `0:10, 12.5:24`.
fn current_curve(value: &str) -> Result<Vec<(f64, f64)>, String> {
    value
        .split(',')
        .map(|pair| {
            let (p, i) = pair
                .split_once(':')
                .ok_or_else(|| format!("'{pair}' is not a power:current pair"))?;
            Ok((number(p.trim())?, number(i.trim())?))
        })
        .collect()
}

fn set_sensitivities(
    profile: &mut RadioProfile,
    bandwidth: u32,
    values: &[f64],
) -> Result<(), String> {
    let band = profile.band.band();
    let sfs: Vec<SpreadingFactor> = band.spreading_factors().collect();
    if values.len() != sfs.len() {
        return Err(format!(
            "expected {} sensitivities ({}..{}), got {}",
            sfs.len(),
            band.min_sf(),
            band.max_sf(),
            values.len()
        ));
    }
    for (&sf, &dbm) in sfs.iter().zip(values) {
        profile.set_sensitivity(sf, bandwidth, dbm);
    }
    Ok(())
}

/// Applies one `key = value` setting.
///
/// Sensitivity lists are stored for the bandwidth configured at the time
/// they are read, so set bandwidths first.
pub fn apply(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<(), String> {
    let value = value.trim();
    match key.trim() {
        "architecture" => {
            cfg.architecture = value
                .parse()
                .map_err(|e: relaysim_core::Error| e.to_string())?
        }
        "n_eds" | "N" => cfg.n_eds = number(value)?,
        "n_relays" | "R" => cfg.n_relays = number(value)?,
        "area_side" | "A_L" => cfg.area_side = number(value)?,
        "building_side" => cfg.building_side = number(value)?,
        "building_pitch" => cfg.building_pitch = number(value)?,
        "building_height" => cfg.building_height = number(value)?,
        "sim_time" => cfg.sim_time = number(value)?,
        "payload_interval" => cfg.payload_interval = number(value)?,
        "payload_bytes" => cfg.payload_bytes = number(value)?,
        "ed_tx_power" => cfg.ed_tx_power = number(value)?,
        "relay_tx_power" => cfg.relay_tx_power = number(value)?,
        "ed_gain" => cfg.ed_gain = number(value)?,
        "relay_gain" => cfg.relay_gain = number(value)?,
        "gw_gain" => cfg.gw_gain = number(value)?,
        "eu868_bandwidth" => cfg.eu868_bandwidth = number(value)?,
        "ism_bandwidth" => cfg.ism_bandwidth = number(value)?,
        "coding_rate" => cfg.coding_rate = coding_rate(value)?,
        "preamble_symbols" => cfg.preamble_symbols = number(value)?,
        "gw_height" => cfg.gw_height = number(value)?,
        "node_height" => cfg.node_height = number(value)?,
        "o2i_loss" => cfg.o2i_loss = number(value)?,
        "shadowing" => cfg.shadowing = boolean(value)?,
        "shadowing_sigma_los" => cfg.shadowing_sigma_los = number(value)?,
        "shadowing_sigma_nlos" => cfg.shadowing_sigma_nlos = number(value)?,
        "los_model" => {
            cfg.los_model = value
                .parse()
                .map_err(|e: relaysim_core::Error| e.to_string())?
        }
        "adr_margin" => cfg.adr_margin = number(value)?,
        "capture_gamma" => {
            let values = list(value)?;
            cfg.capture = match values.as_slice() {
                [g] => CaptureTable::uniform(*g),
                [a, b, c, d, e, f] => CaptureTable::from_diagonal([*a, *b, *c, *d, *e, *f]),
                _ => return Err("capture_gamma takes one value or six (SF7..SF12)".into()),
            };
        }
        "relay_self_traffic" => cfg.relay_self_traffic = boolean(value)?,
        "rx_window_symbols" => cfg.rx_window_symbols = number(value)?,
        "rx1_delay" => cfg.rx1_delay = number(value)?,
        "rx2_delay" => cfg.rx2_delay = number(value)?,
        "relay_queue_limit" => cfg.relay_queue_limit = number(value)?,
        "eu868_sensitivity" => {
            set_sensitivities(&mut cfg.eu868_profile, cfg.eu868_bandwidth, &list(value)?)?
        }
        "ism_sensitivity" => {
            set_sensitivities(&mut cfg.ism_profile, cfg.ism_bandwidth, &list(value)?)?
        }
        "eu868_tx_current" => cfg
            .eu868_profile
            .set_tx_current_curve(current_curve(value)?),
        "ism_tx_current" => cfg.ism_profile.set_tx_current_curve(current_curve(value)?),
        "eu868_rx_current" => cfg.eu868_profile.rx_current_ma = number(value)?,
        "ism_rx_current" => cfg.ism_profile.rx_current_ma = number(value)?,
        "eu868_sleep_current" => cfg.eu868_profile.sleep_current_ma = number(value)?,
        "ism_sleep_current" => cfg.ism_profile.sleep_current_ma = number(value)?,
        "supply_voltage" => {
            let v = number(value)?;
            cfg.eu868_profile.supply_voltage = v;
            cfg.ism_profile.supply_voltage = v;
        }
        "run_count" => cfg.run_count = number(value)?,
        "base_seed" => cfg.base_seed = number(value)?,
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

/// Parses a config document on top of the defaults.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        if value.trim().is_empty() {
            return Err(ConfigError {
                line,
                message: format!("missing value for '{}'", key.trim()),
            });
        }
        apply(&mut cfg, key, value).map_err(|message| ConfigError { line, message })?;
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(cfg: &mut ExperimentConfig, overrides: &[String]) -> Result<(), CliError> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{item}' is not key=value")))?;
        apply(cfg, key, value).map_err(|e| CliError::Config(format!("override '{item}': {e}")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use relaysim_core::Architecture;

    #[test]
    fn parses_values_comments_and_aliases() {
        let text = "# reference setup\narchitecture = subghz\nN = 50   # devices\nA_L=1000\n\nshadowing = off\ncoding_rate = 4/6\n";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.architecture, Architecture::SubGhzOnly);
        assert_eq!(cfg.n_eds, 50);
        assert_eq!(cfg.area_side, 1000.0);
        assert!(!cfg.shadowing);
        assert_eq!(cfg.coding_rate, 2);
        assert_eq!(cfg.n_relays, 5);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse("N = 5\n\nR = five\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("five"));
        assert_eq!(parse("sim_time 300").unwrap_err().line, 1);
        let unknown = parse("N = 5\nspeed = 3").unwrap_err();
        assert_eq!(
            (unknown.line, unknown.message.as_str()),
            (2, "unknown key 'speed'")
        );
        assert_eq!(parse("N =").unwrap_err().line, 1);
    }

    #[test]
    fn capture_and_profiles() {
        let cfg = parse(
            "capture_gamma = 1,2,3,4,5,6\nism_tx_current = 12.5:30, 0:9\nsupply_voltage = 3.0",
        )
        .unwrap();
        assert_eq!(cfg.capture.gamma(SpreadingFactor::new(5).unwrap()), 1.0);
        assert_eq!(
            cfg.ism_profile.tx_current_curve(),
            &[(0.0, 9.0), (12.5, 30.0)]
        );
        assert_eq!(cfg.eu868_profile.supply_voltage, 3.0);
        assert!(parse("eu868_sensitivity = -120, -125").is_err());
        assert!(parse("capture_gamma = 1,2").is_err());
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let samples = [
            ("architecture", "proposal"),
            ("los_model", "probabilistic"),
            ("capture_gamma", "6"),
            ("shadowing", "true"),
            ("relay_self_traffic", "false"),
            ("eu868_sensitivity", "-124,-127,-130,-133,-135,-137"),
            ("ism_sensitivity", "-109,-111,-115,-118,-121,-124,-127,-130"),
            ("eu868_tx_current", "13:28"),
            ("ism_tx_current", "12.5:24"),
            ("coding_rate", "1"),
        ];
        for key in KEYS {
            let value = samples
                .iter()
                .find(|(k, _)| k == key)
                .map_or("3", |(_, v)| v);
            let mut cfg = ExperimentConfig::default();
            apply(&mut cfg, key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = parse("N = 50").unwrap();
        apply_overrides(&mut cfg, &["N=500".into(), "R=2".into()]).unwrap();
        assert_eq!((cfg.n_eds, cfg.n_relays), (500, 2));
        assert!(apply_overrides(&mut cfg, &["N".into()]).is_err());
    }
}
