//! One sectioned configuration for every stage, loaded from TOML with
//! `key.path=value` overrides on top.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detect::DetectorConfig;
use crate::error::{Error, Result};
use crate::evaluate::EvalConfig;
use crate::noisechar::NoiseConfig;
use crate::simulate::SimulationConfig;
use crate::templates::TemplateConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub simulate: SimulationConfig,
    pub templates: TemplateConfig,
    pub detect: DetectorConfig,
    pub evaluate: EvalConfig,
    pub noise: NoiseConfig,
}

fn parse_value(raw: &str) -> toml::Value {
    // bare words that are not valid TOML are taken as strings
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `path` (dot separated) in `table`, creating intermediate tables.
fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("malformed key path `{path}`")));
    }
    let mut cur = table;
    for (i, key) in keys[..keys.len() - 1].iter().enumerate() {
        let entry = cur
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!("`{}` is not a table", keys[..=i].join(".")))
        })?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl Config {
    /// Parses TOML text, then applies `key.path=value` overrides. `origin`
    /// names the source in messages.
    pub fn from_toml(text: &str, overrides: &[String], origin: &str) -> Result<Config> {
        let mut table: toml::Table = toml::from_str(text)
            .map_err(|e| Error::Config(format!("{origin}: {}", e.to_string().trim_end())))?;
        for o in overrides {
            let (path, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not of the form key.path=value")))?;
            set_path(&mut table, path.trim(), parse_value(raw.trim()))?;
        }
        let config: Config = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{origin}: at `{path}`: {}", e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` when given, otherwise starts from defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Config::from_toml(&text, overrides, &p.display().to_string())
            }
            None => Config::from_toml("", overrides, "defaults"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.simulate.validate()?;
        self.templates.validate()?;
        self.detect.validate()?;
        self.evaluate.validate()?;
        self.noise.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::from_toml("", &[], "t").unwrap(), Config::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml(), &[], "t").unwrap(), c);
    }

    #[test]
    fn overrides_beat_file_values() {
        let text = "[simulate]\nobjects_per_scene = 12\n";
        let c = Config::from_toml(text, &[], "t").unwrap();
        assert_eq!(c.simulate.objects_per_scene, 12);
        let c = Config::from_toml(
            text,
            &[
                "simulate.objects_per_scene=7".into(),
                "detect.seabed.clearance = 0.05".into(),
                "simulate.scanner.direction_mode=x".into(),
                "evaluate.thresholds=[0.5, 1.0]".into(),
            ],
            "t",
        )
        .unwrap();
        assert_eq!(c.simulate.objects_per_scene, 7);
        assert_eq!(c.detect.seabed.clearance, 0.05);
        assert_eq!(c.evaluate.thresholds, vec![0.5, 1.0]);
        assert_ne!(c.fingerprint(), Config::default().fingerprint());
    }

    #[test]
    fn unknown_keys_are_reported_with_their_path() {
        let err = Config::from_toml("[detect.seabed]\nclearence = 0.1\n", &[], "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("detect.seabed") && msg.contains("clearence"), "{msg}");
        let err = Config::from_toml("", &["simulate.scanner.beam_count=\"many\"".into()], "t").unwrap_err();
        assert!(err.to_string().contains("simulate.scanner.beam_count"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(Config::from_toml("", &["simulate.scanner.beam_count=2000".into()], "t").is_err());
        assert!(Config::from_toml("", &["detect.seabed.clearance=0".into()], "t").is_err());
        assert!(Config::from_toml("", &["evaluate.thresholds=[-1.0]".into()], "t").is_err());
        assert!(Config::from_toml("", &["noclue".into()], "t").is_err());
        assert!(Config::from_toml("", &["simulate.objects_per_scene.x=1".into()], "t").is_err());
    }
}
