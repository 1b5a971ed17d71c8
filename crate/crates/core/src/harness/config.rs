use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commcost::LinkConfig;
use crate::datagen::{PowerLawPartitionConfig, SynCovConfig, SynLabelConfig};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, SgdConfig};
use crate::protocol::RoundConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Syncov(SynCovConfig),
    Synlabel(SynLabelConfig),
    /// IDX image/label files split across devices with a power-law profile.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        partition: PowerLawPartitionConfig,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Syncov(SynCovConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    /// Dataset generation, partitioning and train/test split.
    pub data: u64,
    /// Initialisation, sampling, stragglers and local SGD.
    pub protocol: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { data: 1, protocol: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Global rounds `T`.
    pub rounds: usize,
    pub seeds: Seeds,
    pub dataset: DatasetSpec,
    /// `n_features` and `n_classes` are overwritten from the dataset.
    pub model: ModelSpec,
    pub sgd: SgdConfig,
    pub round: RoundConfig,
    pub comm: LinkConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            seeds: Seeds::default(),
            dataset: DatasetSpec::default(),
            model: ModelSpec::default(),
            sgd: SgdConfig::default(),
            round: RoundConfig::default(),
            comm: LinkConfig::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Checks that do not need the dataset; device-count checks happen once
    /// it is built.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds must be at least 1"));
        }
        self.sgd.validate()?;
        self.comm.validate()?;
        match &self.dataset {
            DatasetSpec::Syncov(c) => c.validate(),
            DatasetSpec::Synlabel(c) => c.validate(),
            DatasetSpec::Idx { images, labels, .. } => {
                for p in [images, labels] {
                    if !p.exists() {
                        return Err(Error::config(format!("dataset file {} does not exist", p.display())));
                    }
                }
                Ok(())
            }
        }
    }

    /// Parse TOML, then apply `dotted.key=value` overrides. Override values
    /// are read as TOML scalars/arrays and fall back to plain strings.
    pub fn from_toml_with_overrides(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = match text {
            Some(t) => t.parse().map_err(|e| Error::Parse(format!("config: {e}")))?,
            None => toml::Table::new(),
        };
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override `{ov}` is not key=value")))?;
            let value = parse_value(raw.trim());
            set_dotted(&mut table, key.trim(), value)?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => None,
        };
        Self::from_toml_with_overrides(text.as_deref(), overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Parse(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{GlobalWeighting, Protocol};

    #[test]
    fn empty_config_is_default() {
        let cfg = ExperimentConfig::from_toml_with_overrides(Some(""), &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let text = "rounds = 5\n[round]\nprotocol = \"fedavg\"\n";
        let cfg = ExperimentConfig::from_toml_with_overrides(
            Some(text),
            &[
                "round.partitions=4".into(),
                "round.global_weighting=data_size".into(),
                "sgd.learning_rate=0.5".into(),
                "dataset.kind=synlabel".into(),
                "dataset.dirichlet_beta=2.0".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.rounds, 5);
        assert_eq!(cfg.round.protocol, Protocol::FedAvg);
        assert_eq!(cfg.round.partitions, 4);
        assert_eq!(cfg.round.global_weighting, GlobalWeighting::DataSize);
        assert_eq!(cfg.sgd.learning_rate, 0.5);
        match cfg.dataset {
            DatasetSpec::Synlabel(c) => assert_eq!(c.dirichlet_beta, 2.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_with_overrides(None, &["round.bogus=1".into()]).is_err());
        assert!(ExperimentConfig::from_toml_with_overrides(None, &["nokey".into()]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.round.straggler_rate = 0.5;
        cfg.dataset = DatasetSpec::Synlabel(SynLabelConfig::default());
        let back = ExperimentConfig::from_toml_with_overrides(Some(&cfg.to_toml()), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation() {
        let cfg = ExperimentConfig {
            rounds: 0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            dataset: DatasetSpec::Idx {
                images: "/nonexistent/images".into(),
                labels: "/nonexistent/labels".into(),
                partition: PowerLawPartitionConfig::default(),
            },
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
