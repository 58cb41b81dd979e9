use std::collections::BTreeMap;
use std::fmt;

/// Generator and discriminator topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PfanConfig {
    pub base_channels: usize,
    pub n_mbi: usize,
    pub n_lat: usize,
    pub mbi_kernels: Vec<usize>,
    pub mbi_groups: usize,
    pub mbi_expand_ratio: usize,
    /// Adds `x` to each MBI block's output. Off by default.
    pub mbi_residual: bool,
    pub lat_window: usize,
    pub leff_expand_ratio: usize,
    pub use_global_input_skip: bool,
    pub disc_layers: usize,
}

impl Default for PfanConfig {
    fn default() -> Self {
        Self {
            base_channels: 64,
            n_mbi: 4,
            n_lat: 2,
            mbi_kernels: vec![3, 7, 11],
            mbi_groups: 64,
            mbi_expand_ratio: 4,
            mbi_residual: false,
            lat_window: 8,
            leff_expand_ratio: 2,
            use_global_input_skip: true,
            disc_layers: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Constraint(String),
}

impl PfanConfig {
    /// Small topology for quick CPU runs.
    pub fn desk() -> Self {
        Self {
            base_channels: 16,
            n_mbi: 2,
            n_lat: 1,
            mbi_groups: 16,
            ..Self::default()
        }
    }

    /// Query/key width of SEA; the value width is the same.
    pub fn attn_channels(&self) -> usize {
        self.base_channels / 2
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Constraint(m));
        let counts = [
            ("base_channels", self.base_channels),
            ("n_mbi", self.n_mbi),
            ("n_lat", self.n_lat),
            ("mbi_groups", self.mbi_groups),
            ("mbi_expand_ratio", self.mbi_expand_ratio),
            ("lat_window", self.lat_window),
            ("leff_expand_ratio", self.leff_expand_ratio),
            ("disc_layers", self.disc_layers),
        ];
        if let Some((k, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return fail(format!("{k} must be at least 1"));
        }
        if !self.base_channels.is_multiple_of(self.mbi_groups) {
            return fail(format!(
                "mbi_groups {} must divide base_channels {}",
                self.mbi_groups, self.base_channels
            ));
        }
        if self.base_channels < 2 || !self.base_channels.is_multiple_of(2) {
            return fail(format!("base_channels {} must be even", self.base_channels));
        }
        if self.mbi_kernels.is_empty() {
            return fail("mbi_kernels is empty".into());
        }
        if let Some(k) = self.mbi_kernels.iter().find(|k| *k % 2 == 0) {
            return fail(format!("mbi kernel {k} must be odd"));
        }
        if self.disc_layers > 8 {
            return fail(format!("disc_layers {} exceeds 8", self.disc_layers));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let kernels = self
            .mbi_kernels
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("base_channels", self.base_channels.to_string()),
            ("n_mbi", self.n_mbi.to_string()),
            ("n_lat", self.n_lat.to_string()),
            ("mbi_kernels", kernels),
            ("mbi_groups", self.mbi_groups.to_string()),
            ("mbi_expand_ratio", self.mbi_expand_ratio.to_string()),
            ("mbi_residual", self.mbi_residual.to_string()),
            ("lat_window", self.lat_window.to_string()),
            ("leff_expand_ratio", self.leff_expand_ratio.to_string()),
            ("use_global_input_skip", self.use_global_input_skip.to_string()),
            ("disc_layers", self.disc_layers.to_string()),
        ]
    }

    pub const KEYS: [&'static str; 11] = [
        "base_channels",
        "n_mbi",
        "n_lat",
        "mbi_kernels",
        "mbi_groups",
        "mbi_expand_ratio",
        "mbi_residual",
        "lat_window",
        "leff_expand_ratio",
        "use_global_input_skip",
        "disc_layers",
    ];

    /// Applies one `key = value` setting. Returns `Ok(false)` for keys that
    /// belong to another section so callers can chain parsers.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        match key {
            "base_channels" => self.base_channels = parse(key, value)?,
            "n_mbi" => self.n_mbi = parse(key, value)?,
            "n_lat" => self.n_lat = parse(key, value)?,
            "mbi_kernels" => {
                self.mbi_kernels = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "mbi_groups" => self.mbi_groups = parse(key, value)?,
            "mbi_expand_ratio" => self.mbi_expand_ratio = parse(key, value)?,
            "mbi_residual" => self.mbi_residual = parse(key, value)?,
            "lat_window" => self.lat_window = parse(key, value)?,
            "leff_expand_ratio" => self.leff_expand_ratio = parse(key, value)?,
            "use_global_input_skip" => self.use_global_input_skip = parse(key, value)?,
            "disc_layers" => self.disc_layers = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Parses the `key=value` lines produced by [`PfanConfig`]'s `Display`.
    /// Unlisted keys keep their defaults; unknown keys are errors.
    pub fn from_kv(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, v) in parse_kv(text)? {
            if !cfg.set(&k, &v)? {
                return Err(ConfigError::UnknownKey(k));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for PfanConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_pairs() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub(crate) fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: fmt::Display,
{
    value.trim().parse().map_err(|e: V::Err| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

/// Splits `key = value` lines; `#` starts a comment. Later duplicates win.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Value {
            key: line.to_string(),
            value: String::new(),
            reason: "expected key=value".into(),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}
