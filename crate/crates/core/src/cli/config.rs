use std::path::{Path, PathBuf};

use crate::arch::{parse_kv, ConfigError, PfanConfig};
use crate::error::{Error, Result};
use crate::train::TrainConfig;

/// Model, training, path and seed settings after merging defaults, a config
/// file and command-line flags, in increasing order of precedence.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: PfanConfig,
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub sources: Option<PathBuf>,
}

pub const PATH_KEYS: [&str; 4] = ["data", "out", "weights", "sources"];

impl RunConfig {
    pub fn defaults(desk: bool) -> Self {
        let (model, train) = if desk {
            (PfanConfig::desk(), TrainConfig::desk())
        } else {
            (PfanConfig::default(), TrainConfig::default())
        };
        Self {
            model,
            train,
            data: None,
            out: None,
            weights: None,
            sources: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let path = Some(PathBuf::from(value));
        match key {
            "data" => self.data = path,
            "out" => self.out = path,
            "weights" => self.weights = path,
            "sources" => self.sources = path,
            _ => {
                if !self.model.set(key, value)? && !self.train.set(key, value)? {
                    return Err(ConfigError::UnknownKey(key.to_string()));
                }
            }
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides`; validated at the end.
    pub fn resolve(desk: bool, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::defaults(desk);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (k, v) in parse_kv(&text)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.model.validate()?;
        cfg.train.validate(&cfg.model)?;
        Ok(cfg)
    }

    pub fn require(&self, value: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        value.clone().ok_or_else(|| {
            Error::Config(ConfigError::Constraint(format!(
                "missing `{key}`: pass --{key} or set it in the config file"
            )))
        })
    }

    /// Every setting as `key=value` lines; paths only when set.
    pub fn to_text(&self) -> String {
        let mut s = self.model.to_string() + &self.train.to_string();
        for (k, v) in PATH_KEYS
            .iter()
            .zip([&self.data, &self.out, &self.weights, &self.sources])
        {
            if let Some(p) = v {
                s += &format!("{k}={}\n", p.display());
            }
        }
        s
    }
}

/// Splits a `KEY=VALUE` flag argument.
pub fn parse_assignment(arg: &str) -> std::result::Result<(String, String), String> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected KEY=VALUE, got `{arg}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_over_file_over_default() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "# desk run\nbatch = 3\nlr=1e-3\nout=runs/a\n").unwrap();
        let flags = vec![("batch".to_string(), "2".to_string())];
        let cfg = RunConfig::resolve(true, Some(&file), &flags).unwrap();
        assert_eq!(cfg.train.batch, 2);
        assert_eq!(cfg.train.lr, 1e-3);
        assert_eq!(cfg.train.beta1, 0.5);
        assert_eq!(cfg.model, PfanConfig::desk());
        assert_eq!(cfg.out, Some(PathBuf::from("runs/a")));
    }

    #[test]
    fn text_round_trips() {
        let mut cfg = RunConfig::defaults(true);
        cfg.set("weights", "w.pfw").unwrap();
        cfg.set("seed", "9").unwrap();
        let mut back = RunConfig::defaults(false);
        for (k, v) in parse_kv(&cfg.to_text()).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let mut cfg = RunConfig::defaults(false);
        assert!(matches!(cfg.set("colour", "1"), Err(ConfigError::UnknownKey(k)) if k == "colour"));
        assert!(matches!(cfg.set("lr", "fast"), Err(ConfigError::Value { key, .. }) if key == "lr"));
        let bad = vec![("crop".to_string(), "2".to_string())];
        assert_eq!(RunConfig::resolve(false, None, &bad).unwrap_err().class(), "config");
        let missing = RunConfig::resolve(false, Some(Path::new("/nonexistent/x.cfg")), &[]).unwrap_err();
        assert_eq!(missing.class(), "io");
        assert!(parse_assignment("novalue").is_err());
        assert_eq!(parse_assignment("a = b").unwrap(), ("a".into(), "b".into()));
    }
}
