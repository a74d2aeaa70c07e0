//! Parsers for the text inputs: `key=value` config files, parameter grids and
//! thresholds.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use num_rational::BigRational;
use steinkit::er_model::Thresholds;
use steinkit::exactnum::{from_f64, to_f64};
use steinkit::jack_model::parse_alpha;
use thiserror::Error;

pub const MIN_SAMPLES: usize = 100;
pub const MAX_GRID_POINTS: usize = 1000;
pub const MAX_ER_N: u64 = 100_000;
pub const MAX_JACK_N: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("duplicate config key {0:?}")]
    DuplicateKey(String),
    #[error("bad grid point {point:?}: {msg}")]
    GridPoint { point: String, msg: String },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid has more than {MAX_GRID_POINTS} points")]
    GridTooLarge,
    #[error("bad thresholds {0:?}: expected n_bar,m_bar,c_bar")]
    Thresholds(String),
    #[error("bad value for {key}: {value:?}")]
    Value { key: String, value: String },
    #[error("samples must be at least {MIN_SAMPLES}, got {0}")]
    TooFewSamples(usize),
}

pub const CONFIG_KEYS: [&str; 8] = [
    "grid",
    "samples",
    "seed",
    "confidence",
    "epsilon",
    "out",
    "format",
    "thresholds",
];

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped.
pub fn parse_kv_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            msg: "expected key=value".into(),
        })?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if out
            .insert(key.to_string(), value.trim().to_string())
            .is_some()
        {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ErPoint {
    pub n: u64,
    pub m: u64,
}

impl fmt::Display for ErPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.n, self.m)
    }
}

/// Alpha given exactly, or as a power `n^p` of the grid point's `n`.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec {
    Exact(BigRational),
    Power(f64),
}

impl AlphaSpec {
    pub fn value(&self, n: u32) -> BigRational {
        match self {
            Self::Exact(a) => a.clone(),
            Self::Power(p) => from_f64(f64::from(n).powf(*p)),
        }
    }

    pub fn value_f64(&self, n: u32) -> f64 {
        match self {
            Self::Exact(a) => to_f64(a),
            Self::Power(p) => f64::from(n).powf(*p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JackPoint {
    pub n: u32,
    pub alpha: AlphaSpec,
}

impl fmt::Display for JackPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.alpha {
            AlphaSpec::Exact(a) => write!(f, "{},{}", self.n, a),
            AlphaSpec::Power(p) => write!(f, "{},n^{}", self.n, p),
        }
    }
}

fn grid_error(point: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::GridPoint {
        point: point.to_string(),
        msg: msg.into(),
    }
}

fn split_points(s: &str) -> Result<Vec<(&str, &str, &str)>, ConfigError> {
    let points: Vec<&str> = s
        .split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect();
    if points.is_empty() {
        return Err(ConfigError::EmptyGrid);
    }
    if points.len() > MAX_GRID_POINTS {
        return Err(ConfigError::GridTooLarge);
    }
    points
        .into_iter()
        .map(|p| {
            let (a, b) = p
                .split_once(',')
                .ok_or_else(|| grid_error(p, "expected two comma-separated fields"))?;
            Ok((p, a.trim(), b.trim()))
        })
        .collect()
}

/// `n,m` points separated by `;`. `m` is an integer or a multiple of `n`
/// written `0.5n`, `n` or `2n`, rounded to the nearest integer.
pub fn parse_er_grid(s: &str) -> Result<Vec<ErPoint>, ConfigError> {
    split_points(s)?
        .into_iter()
        .map(|(p, n, m)| {
            let n: u64 = n
                .parse()
                .map_err(|_| grid_error(p, "n is not an integer"))?;
            if n > MAX_ER_N {
                return Err(grid_error(p, format!("n exceeds {MAX_ER_N}")));
            }
            let m = match m.strip_suffix('n') {
                Some(factor) => {
                    let c: f64 = if factor.is_empty() {
                        1.0
                    } else {
                        factor
                            .parse()
                            .map_err(|_| grid_error(p, "bad multiple of n"))?
                    };
                    if !(c >= 0.0 && c.is_finite()) {
                        return Err(grid_error(p, "bad multiple of n"));
                    }
                    let m = (c * n as f64).round();
                    if m > (MAX_ER_N * MAX_ER_N) as f64 {
                        return Err(grid_error(p, "m too large"));
                    }
                    m as u64
                }
                None => m
                    .parse()
                    .map_err(|_| grid_error(p, "m is not an integer"))?,
            };
            Ok(ErPoint { n, m })
        })
        .collect()
}

/// `n,alpha` points separated by `;`. `alpha` is a positive rational
/// (`3/2`, `0.25`) or a power of `n` written `n^1.5`.
pub fn parse_jack_grid(s: &str) -> Result<Vec<JackPoint>, ConfigError> {
    split_points(s)?
        .into_iter()
        .map(|(p, n, a)| {
            let n: u32 = n
                .parse()
                .map_err(|_| grid_error(p, "n is not an integer"))?;
            if !(2..=MAX_JACK_N).contains(&n) {
                return Err(grid_error(p, format!("n must lie in 2..={MAX_JACK_N}")));
            }
            let alpha = match a.strip_prefix("n^") {
                Some(e) => {
                    let e: f64 = e.parse().map_err(|_| grid_error(p, "bad exponent"))?;
                    let v = f64::from(n).powf(e);
                    if !(e.is_finite() && v > 0.0 && v.is_finite()) {
                        return Err(grid_error(p, "alpha out of range"));
                    }
                    AlphaSpec::Power(e)
                }
                None => {
                    let v = parse_alpha(a).map_err(|e| grid_error(p, e.to_string()))?;
                    let f = to_f64(&v);
                    if !(f > 0.0 && f.is_finite()) {
                        return Err(grid_error(p, "alpha out of range"));
                    }
                    AlphaSpec::Exact(v)
                }
            };
            Ok(JackPoint { n, alpha })
        })
        .collect()
}

/// `n_bar,m_bar,c_bar`.
pub fn parse_thresholds(s: &str) -> Result<Thresholds, ConfigError> {
    let bad = || ConfigError::Thresholds(s.to_string());
    let fields: Vec<&str> = s.split(',').map(str::trim).collect();
    let [n, m, c] = fields.as_slice() else {
        return Err(bad());
    };
    Thresholds::new(
        n.parse().map_err(|_| bad())?,
        m.parse().map_err(|_| bad())?,
        c.parse().map_err(|_| bad())?,
    )
    .map_err(|_| bad())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(ConfigError::Value {
                key: "format".into(),
                value: s.into(),
            }),
        }
    }
}

/// Settings shared by the subcommands, as strings until a subcommand
/// interprets them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawSettings {
    pub values: BTreeMap<String, String>,
}

impl RawSettings {
    /// Later layers win.
    pub fn layer(&mut self, other: BTreeMap<String, String>) {
        self.values.extend(other);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Value {
                key: key.into(),
                value: v.into(),
            }),
        }
    }

    pub fn samples(&self, default: usize) -> Result<usize, ConfigError> {
        let s = self.parse("samples", default)?;
        if s < MIN_SAMPLES {
            return Err(ConfigError::TooFewSamples(s));
        }
        Ok(s)
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.parse("seed", DEFAULT_SEED)
    }

    pub fn confidence(&self) -> Result<f64, ConfigError> {
        let c = self.parse("confidence", steinkit::stein_core::DEFAULT_CONFIDENCE)?;
        if !(c > 0.0 && c < 1.0) {
            return Err(ConfigError::Value {
                key: "confidence".into(),
                value: c.to_string(),
            });
        }
        Ok(c)
    }

    pub fn epsilon(&self) -> Result<f64, ConfigError> {
        let e = self.parse("epsilon", DEFAULT_EPSILON)?;
        if !(e > 0.0 && e < 1.0) {
            return Err(ConfigError::Value {
                key: "epsilon".into(),
                value: e.to_string(),
            });
        }
        Ok(e)
    }

    pub fn format(&self, default: Format) -> Result<Format, ConfigError> {
        self.parse("format", default)
    }

    pub fn out(&self) -> Option<PathBuf> {
        self.get("out").map(PathBuf::from)
    }

    pub fn thresholds(&self) -> Result<Thresholds, ConfigError> {
        self.get("thresholds")
            .map_or(Ok(Thresholds::default()), parse_thresholds)
    }
}

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_EPSILON: f64 = 0.4;

#[cfg(test)]
mod tests {
    use super::*;
    use steinkit::exactnum::ratio;

    #[test]
    fn kv_config() {
        let c =
            parse_kv_config("# comment\n\nsamples = 500\n seed=7 \ngrid = 10,5;20,1n\n").unwrap();
        assert_eq!(c["samples"], "500");
        assert_eq!(c["seed"], "7");
        assert_eq!(c["grid"], "10,5;20,1n");
        assert!(matches!(
            parse_kv_config("samples"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_kv_config("colour=red"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            parse_kv_config("seed=1\nseed=2"),
            Err(ConfigError::DuplicateKey(_))
        ));
    }

    #[test]
    fn er_grid() {
        let g = parse_er_grid("400,0.5n; 400,n;400,2n;4,2").unwrap();
        let pairs: Vec<(u64, u64)> = g.iter().map(|p| (p.n, p.m)).collect();
        assert_eq!(pairs, vec![(400, 200), (400, 400), (400, 800), (4, 2)]);
        for bad in ["", ";", "4", "4,x", "x,2", "4,-1n", "4,nann", "200000,1"] {
            assert!(parse_er_grid(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn jack_grid() {
        let g = parse_jack_grid("16,n^1.5;8,3/2;2,1").unwrap();
        assert_eq!(g[0].alpha, AlphaSpec::Power(1.5));
        assert_eq!(g[0].alpha.value_f64(16), 64.0);
        assert_eq!(g[1].alpha, AlphaSpec::Exact(ratio(3, 2)));
        for bad in ["1,1", "4,0", "4,n^", "4,n^1e400", "x,1", "4"] {
            assert!(parse_jack_grid(bad).is_err(), "{bad:?}");
        }
        for p in &g {
            assert_eq!(parse_jack_grid(&p.to_string()).unwrap()[0], *p);
        }
    }

    #[test]
    fn thresholds() {
        let t = parse_thresholds("344,28,1.0").unwrap();
        assert_eq!((t.n_bar, t.m_bar, t.c_bar), (344, 28, 1.0));
        for bad in ["1,2", "0,1,1", "1,1,-1", "a,b,c", "1,2,3,4"] {
            assert!(parse_thresholds(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn layering() {
        let mut s = RawSettings::default();
        s.layer(parse_kv_config("samples=500\nseed=3").unwrap());
        s.layer(BTreeMap::from([("seed".to_string(), "9".to_string())]));
        assert_eq!(s.samples(1000).unwrap(), 500);
        assert_eq!(s.seed().unwrap(), 9);
        s.layer(BTreeMap::from([("samples".to_string(), "10".to_string())]));
        assert!(s.samples(1000).is_err());
    }
}
