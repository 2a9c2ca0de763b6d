//! Run configuration: a `key = value` text file with `#` comments, overlaid
//! by command-line values for the same keys.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use coexsim_core::channel::ChannelConfig;
use coexsim_core::engine::{ChannelChoice, SimPoint, StopRule};
use coexsim_core::ofdm::{ModeParams, N_DATA};

pub const MAX_PAYLOAD_BYTES: usize = 2304;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("key `{key}` given twice")]
    Duplicate { key: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rates: Vec<u32>,
    pub ebn0_grid: Vec<f64>,
    pub erasures: Vec<usize>,
    pub sir_db: f64,
    pub payload_bytes: usize,
    pub tau_rms_ns: f64,
    pub bt_enabled: bool,
    pub seed: u64,
    pub stop: StopRule,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rates: ModeParams::ALL.iter().map(|m| m.rate_mbps).collect(),
            ebn0_grid: (1..=8).map(|i| 5.0 * i as f64).collect(),
            erasures: vec![0, 5, 7],
            sir_db: 0.0,
            payload_bytes: 100,
            tau_rms_ns: 100.0,
            bt_enabled: true,
            seed: 1,
            stop: StopRule::default(),
            output: PathBuf::from("out"),
        }
    }
}

/// `(line, key, value)` triples in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        if pairs.iter().any(|(_, k, _): &(usize, String, String)| k == key) {
            return Err(ConfigError::Duplicate { key: key.to_string() });
        }
        pairs.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn scalar<T: FromStr>(key: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| invalid(key, format!("`{value}`: {e}")))
}

fn list<T: FromStr>(key: &'static str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(invalid(key, "list is empty"));
    }
    Ok(items)
}

fn boolean(key: &'static str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(invalid(key, format!("`{other}` is not a boolean"))),
    }
}

impl RunConfig {
    /// Defaults, then the file (if any), then `overrides` in order; the
    /// result is validated.
    pub fn load(file: Option<&Path>, overrides: &[(&str, String)]) -> Result<Self, ConfigError> {
        let text = match file {
            Some(path) => std::fs::read_to_string(path).map_err(|source| ConfigError::File {
                path: path.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_text(&text, overrides)
    }

    pub fn from_text(text: &str, overrides: &[(&str, String)]) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (_, key, value) in parse_pairs(text)? {
            cfg.set(&key, &value)?;
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "rates" => self.rates = list("rates", value)?,
            "ebn0_grid" => self.ebn0_grid = list("ebn0_grid", value)?,
            "erasures" => self.erasures = list("erasures", value)?,
            "sir_db" => self.sir_db = scalar("sir_db", value)?,
            "payload_bytes" => self.payload_bytes = scalar("payload_bytes", value)?,
            "tau_rms_ns" => self.tau_rms_ns = scalar("tau_rms_ns", value)?,
            "bt_enabled" => self.bt_enabled = boolean("bt_enabled", value)?,
            "seed" => self.seed = scalar("seed", value)?,
            "min_errors" => self.stop.min_errors = scalar("min_errors", value)?,
            "max_trials" => self.stop.max_trials = scalar("max_trials", value)?,
            "output" => {
                if value.trim().is_empty() {
                    return Err(invalid("output", "path is empty"));
                }
                self.output = PathBuf::from(value.trim());
            }
            _ => return Err(ConfigError::UnknownKey { key: key.to_string() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for &r in &self.rates {
            ModeParams::from_rate(r).map_err(|_| invalid("rates", format!("{r} is not one of 12, 24, 36, 48, 54")))?;
        }
        if let Some(x) = self.ebn0_grid.iter().find(|x| !x.is_finite()) {
            return Err(invalid("ebn0_grid", format!("{x} is not finite")));
        }
        if let Some(e) = self.erasures.iter().find(|&&e| e > N_DATA) {
            return Err(invalid("erasures", format!("{e} exceeds {N_DATA}")));
        }
        if !self.sir_db.is_finite() {
            return Err(invalid("sir_db", "must be finite"));
        }
        if !(1..=MAX_PAYLOAD_BYTES).contains(&self.payload_bytes) {
            return Err(invalid(
                "payload_bytes",
                format!("{} is outside 1..={MAX_PAYLOAD_BYTES}", self.payload_bytes),
            ));
        }
        self.channel_config()
            .validate()
            .map_err(|e| invalid("tau_rms_ns", e))?;
        if self.stop.min_errors == 0 {
            return Err(invalid("min_errors", "must be at least 1"));
        }
        if self.stop.max_trials < self.stop.min_errors {
            return Err(invalid("max_trials", "must be at least min_errors"));
        }
        Ok(())
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig::with_tau_rms(self.tau_rms_ns / 1e9)
    }

    /// Sweep cells ordered by rate, then erasure count, then Eb/N0.
    pub fn points(&self) -> Vec<SimPoint> {
        let mut points = Vec::with_capacity(self.rates.len() * self.erasures.len() * self.ebn0_grid.len());
        for &rate in &self.rates {
            let mode = ModeParams::from_rate(rate).expect("validated rate");
            for &e in &self.erasures {
                for &ebn0 in &self.ebn0_grid {
                    let mut p = SimPoint::new(mode, ebn0, e);
                    p.bt_enabled = self.bt_enabled;
                    p.sir_db = self.sir_db;
                    p.seed = self.seed;
                    p.payload_bytes = self.payload_bytes;
                    p.channel = ChannelChoice::Rayleigh(self.channel_config());
                    points.push(p);
                }
            }
        }
        points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: ConfigError) -> String {
        match e {
            ConfigError::Invalid { key, .. } => key.to_string(),
            ConfigError::UnknownKey { key } | ConfigError::Duplicate { key } => key,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_text("", &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.rates, [12, 24, 36, 48, 54]);
        assert_eq!(cfg.ebn0_grid, [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]);
        assert_eq!(cfg.erasures, [0, 5, 7]);
        assert_eq!(cfg.points().len(), 120);
    }

    #[test]
    fn flags_override_file() {
        let cfg = RunConfig::from_text("rates = 12,54\n", &[("rates", "24".into())]).unwrap();
        assert_eq!(cfg.rates, [24]);
    }

    #[test]
    fn comments_blank_lines_and_spacing() {
        let text = "# sweep\n\n  seed=7   # master\nebn0_grid = 10, 20 ,30\nbt_enabled = false\noutput = runs/a\n";
        let cfg = RunConfig::from_text(text, &[]).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.ebn0_grid, [10.0, 20.0, 30.0]);
        assert!(!cfg.bt_enabled);
        assert_eq!(cfg.output, PathBuf::from("runs/a"));
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("payload_bytes = 0", "payload_bytes"),
            ("payload_bytes = 2305", "payload_bytes"),
            ("payload_bytes = many", "payload_bytes"),
            ("rates = 11", "rates"),
            ("rates =", "rates"),
            ("erasures = 49", "erasures"),
            ("ebn0_grid = 5, inf", "ebn0_grid"),
            ("sir_db = nan", "sir_db"),
            ("tau_rms_ns = -1", "tau_rms_ns"),
            ("bt_enabled = maybe", "bt_enabled"),
            ("min_errors = 0", "min_errors"),
            ("min_errors = 10\nmax_trials = 5", "max_trials"),
            ("seed = -1", "seed"),
            ("ratse = 12", "ratse"),
            ("seed = 1\nseed = 2", "seed"),
        ];
        for (text, key) in cases {
            let e = RunConfig::from_text(text, &[]).unwrap_err();
            assert_eq!(key_of(e), key, "{text}");
        }
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let e = RunConfig::from_text("seed = 1\njust words\n", &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { line: 2 }), "{e}");
    }

    #[test]
    fn missing_file_is_a_file_error() {
        let e = RunConfig::load(Some(Path::new("/nonexistent/coexsim.conf")), &[]).unwrap_err();
        assert!(matches!(e, ConfigError::File { .. }));
    }

    #[test]
    fn points_carry_the_configuration() {
        let text = "rates = 36\nerasures = 5\nebn0_grid = 20\nsir_db = -3\npayload_bytes = 50\ntau_rms_ns = 50\nbt_enabled = no\nseed = 9";
        let p = RunConfig::from_text(text, &[]).unwrap().points()[0];
        assert_eq!(p.mode.rate_mbps, 36);
        assert_eq!(p.n_erasures, 5);
        assert_eq!(p.ebn0_db, 20.0);
        assert_eq!(p.sir_db, -3.0);
        assert_eq!(p.payload_bytes, 50);
        assert!(!p.bt_enabled);
        assert_eq!(p.seed, 9);
        assert_eq!(p.channel, ChannelChoice::Rayleigh(ChannelConfig::with_tau_rms(50e-9)));
        assert!(p.validate().is_ok());
    }

    #[test]
    fn sweep_order_is_rate_erasure_ebn0() {
        let cfg = RunConfig::from_text("rates = 12, 54\nerasures = 0, 7\nebn0_grid = 5, 10", &[]).unwrap();
        let cells: Vec<_> = cfg
            .points()
            .iter()
            .map(|p| (p.mode.rate_mbps, p.n_erasures, p.ebn0_db as i32))
            .collect();
        assert_eq!(
            cells,
            [
                (12, 0, 5),
                (12, 0, 10),
                (12, 7, 5),
                (12, 7, 10),
                (54, 0, 5),
                (54, 0, 10),
                (54, 7, 5),
                (54, 7, 10)
            ]
        );
    }
}
