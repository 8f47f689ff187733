//! Flat `key = value` configuration files.

use std::fmt;
use std::path::Path;

use ssdfrc_core::experiments::HarnessSettings;
use ssdfrc_core::model::{SnrConvention, SystemConfig};

/// Every accepted key with a one-line description. Help text and the parser
/// both read from this table.
pub const KEYS: &[(&str, &str)] = &[
    ("n_transmit", "transmit antennas Nt (default 32)"),
    ("n_active", "active antennas / RF chains Nx (default 6)"),
    ("n_subcarriers", "OFDM subcarriers L (default 64)"),
    ("n_receive", "receive antennas M (default 32; compare-ssr defaults to 28)"),
    ("bits_per_symbol", "bits per data symbol Q, QPSK only (default 2)"),
    ("snr_db", "signal-to-noise ratio in dB (default 0)"),
    ("snr_convention", "unit_symbol (sigma2 = 10^(-snr/10)) or shared_power (Nx times that)"),
    ("subcarrier_spacing_hz", "subcarrier spacing (default 250000)"),
    ("ofdm_symbol_duration_s", "OFDM symbol duration Tp (default 5e-6)"),
    ("n_ofdm_symbols", "symbols per frame Np, used by the rate report (default 1)"),
    ("threshold_offset_coeff", "detection threshold offset per receive antenna (default 0.01)"),
    ("branch_factor", "groups per search level (default 2)"),
    ("base_seed", "base random seed (default 0x5eeddf2c; SSDFRC_SEED overrides the default)"),
    ("n_trials", "Monte Carlo trials per grid point (default 1000)"),
    ("workers", "worker threads, 1 = serial timing-stable run (default: all cores)"),
    ("noise_variance", "fixed noise variance replacing the SNR-derived one"),
    ("epsilon", "fixed detection threshold replacing the derived one"),
    ("m_values", "comma-separated receive-antenna grid"),
    ("snr_values", "comma-separated SNR grid in dB"),
    ("method", "method for simulate: projection or ssr (default projection)"),
    ("bpdn_max_iterations", "sparse-recovery iteration cap per solve (default 2000)"),
    ("bpdn_penalty_parameter", "sparse-recovery step as a fraction of 1/L, in (0, 1] (default 1)"),
    ("bpdn_convergence_tol", "sparse-recovery relative tolerance (default 1e-6)"),
    ("bpdn_support_threshold", "support threshold relative to the largest entry (default 0.3)"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, text: String },
    UnknownKey { line: Option<usize>, key: String },
    BadValue { line: Option<usize>, key: String, value: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |line: &Option<usize>| line.map_or_else(|| "override".to_string(), |l| format!("line {l}"));
        match self {
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected `key = value`, found `{text}`"),
            ConfigError::UnknownKey { line, key } => write!(f, "{}: unknown key `{key}`", at(line)),
            ConfigError::BadValue { line, key, value } => write!(f, "{}: invalid value `{value}` for `{key}`", at(line)),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Physical configuration plus harness settings and grids.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub harness: HarnessSettings,
    pub m_values: Option<Vec<usize>>,
    pub snr_values: Option<Vec<f64>>,
    pub method: String,
    /// Whether `n_receive` was set explicitly.
    pub receive_set: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemConfig::table1(),
            harness: HarnessSettings::default(),
            m_values: None,
            snr_values: None,
            method: "projection".into(),
            receive_set: false,
        }
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    let items: Option<Vec<T>> = v.split(',').map(|s| s.trim().parse().ok()).collect();
    items.filter(|l| !l.is_empty())
}

fn parse_u64(v: &str) -> Option<u64> {
    match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16).ok(),
        None => v.replace('_', "").parse().ok(),
    }
}

impl RunConfig {
    /// Sets one key. `line` is only used for error messages.
    pub fn apply(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        fn num<T: std::str::FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        let s = &mut self.system;
        let h = &mut self.harness;
        match key {
            "n_transmit" => s.n_transmit = num(value).ok_or_else(bad)?,
            "n_active" => s.n_active = num(value).ok_or_else(bad)?,
            "n_subcarriers" => s.n_subcarriers = num(value).ok_or_else(bad)?,
            "n_receive" => {
                s.n_receive = num(value).ok_or_else(bad)?;
                self.receive_set = true;
            }
            "bits_per_symbol" => s.bits_per_symbol = num(value).ok_or_else(bad)?,
            "snr_db" => s.snr_db = num(value).ok_or_else(bad)?,
            "snr_convention" => s.snr_convention = SnrConvention::parse(value).ok_or_else(bad)?,
            "subcarrier_spacing_hz" => s.subcarrier_spacing_hz = num(value).ok_or_else(bad)?,
            "ofdm_symbol_duration_s" => s.ofdm_symbol_duration_s = num(value).ok_or_else(bad)?,
            "n_ofdm_symbols" => s.n_ofdm_symbols = num(value).ok_or_else(bad)?,
            "threshold_offset_coeff" => s.threshold_offset_coeff = num(value).ok_or_else(bad)?,
            "branch_factor" => s.branch_factor = num(value).ok_or_else(bad)?,
            "base_seed" => s.base_seed = parse_u64(value).ok_or_else(bad)?,
            "n_trials" => h.n_trials = num(value).filter(|&n: &usize| n > 0).ok_or_else(bad)?,
            "workers" => h.workers = Some(num(value).filter(|&n: &usize| n > 0).ok_or_else(bad)?),
            "noise_variance" => h.noise_variance = Some(num(value).filter(|&v: &f64| v >= 0.0).ok_or_else(bad)?),
            "epsilon" => h.epsilon = Some(num(value).filter(|&v: &f64| v >= 0.0).ok_or_else(bad)?),
            "m_values" => self.m_values = Some(parse_list(value).ok_or_else(bad)?),
            "snr_values" => self.snr_values = Some(parse_list(value).ok_or_else(bad)?),
            "method" => match value {
                "projection" | "ssr" => self.method = value.to_string(),
                _ => return Err(bad()),
            },
            "bpdn_max_iterations" => h.bpdn.max_iterations = num(value).ok_or_else(bad)?,
            "bpdn_penalty_parameter" => h.bpdn.penalty_parameter = num(value).ok_or_else(bad)?,
            "bpdn_convergence_tol" => h.bpdn.convergence_tol = num(value).ok_or_else(bad)?,
            "bpdn_support_threshold" => h.bpdn.support_threshold = num(value).ok_or_else(bad)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies the lines of a config file in order.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: content.to_string(),
            })?;
            self.apply(key.trim(), value.trim(), Some(line))?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: 0,
                text: o.clone(),
            })?;
            self.apply(key.trim(), value.trim(), None)?;
        }
        Ok(())
    }
}

/// Error from reading a config file, kept apart so callers can map it to an
/// I/O exit status.
#[derive(Debug)]
pub struct ReadError {
    pub path: std::path::PathBuf,
    pub source: std::io::Error,
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot read {}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for ReadError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Defaults, then the seed from the environment, then the file, then the
/// overrides.
pub fn parse_config(path: Option<&Path>, overrides: &[String], env_seed: Option<&str>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(seed) = env_seed {
        cfg.apply("base_seed", seed, None)
            .map_err(|e| anyhow::anyhow!("SSDFRC_SEED: {e}"))?;
    }
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|source| ReadError {
            path: p.to_path_buf(),
            source,
        })?;
        cfg.apply_text(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
    }
    cfg.apply_overrides(overrides)?;
    for w in cfg.system.validate()? {
        eprintln!("warning: {w}");
    }
    cfg.harness.bpdn.validate()?;
    Ok(cfg)
}

/// Help section listing every key.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let mut s = String::from("Configuration keys (config file lines or --set key=value):\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k:<width$}  {d}\n"));
    }
    s
}
