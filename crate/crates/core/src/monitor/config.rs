use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Execution;

use super::MissingPolicy;

pub const DEFAULT_LEVELS: [f64; 2] = [0.95, 0.99];

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub x_csv_path: PathBuf,
    pub y_csv_path: PathBuf,
    pub v_levels: Vec<f64>,
    /// Degrees of freedom `(m₁, m₂)` to hold fixed in the marginal fits.
    pub fix_innovation_df: Option<(f64, f64)>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub missing: MissingPolicy,
    pub exec: Execution,
}

impl MonitorConfig {
    pub fn new(x_csv_path: impl Into<PathBuf>, y_csv_path: impl Into<PathBuf>) -> Self {
        Self {
            x_csv_path: x_csv_path.into(),
            y_csv_path: y_csv_path.into(),
            v_levels: DEFAULT_LEVELS.to_vec(),
            fix_innovation_df: None,
            output_path: None,
            seed: 0,
            missing: MissingPolicy::Reject,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.v_levels.is_empty() {
            return Err(Error::Config("at least one v level is required".into()));
        }
        if let Some(v) = self.v_levels.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::Config(format!("v level {v} is outside (0, 1)")));
        }
        if let Some((m1, m2)) = self.fix_innovation_df {
            if !(m1 > 2.0 && m2 > 2.0) {
                return Err(Error::Config(format!(
                    "fixed degrees of freedom must exceed 2, got {m1},{m2}"
                )));
            }
        }
        for p in [&self.x_csv_path, &self.y_csv_path] {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

/// Settings from a flat `key = value` file. Keys mirror the CLI flags:
/// `x`, `y`, `v` (comma-separated, or repeated), `out`, `fix-df`, `seed`,
/// `drop-missing`. Blank lines and `#` comments are ignored; relative paths
/// resolve against the file's directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub v: Vec<f64>,
    pub out: Option<PathBuf>,
    pub fix_df: Option<(f64, f64)>,
    pub seed: Option<u64>,
    pub drop_missing: Option<bool>,
}

pub fn parse_df_pair(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(Error::Config(format!("bad degrees-of-freedom pair `{s}`"))),
        },
        _ => Err(Error::Config(format!("expected `m1,m2`, got `{s}`"))),
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("expected a boolean, got `{s}`"))),
    }
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let resolve = |s: &str| {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key = value",
                    i + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config(format!("line {}: bad {what} `{value}`", i + 1));
            match key {
                "x" => cfg.x = Some(resolve(value)),
                "y" => cfg.y = Some(resolve(value)),
                "out" => cfg.out = Some(resolve(value)),
                "v" => {
                    for part in value.split(',') {
                        cfg.v.push(part.trim().parse().map_err(|_| bad("level"))?);
                    }
                }
                "fix-df" => cfg.fix_df = Some(parse_df_pair(value)?),
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "drop-missing" => cfg.drop_missing = Some(parse_bool(value)?),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{other}`",
                        i + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    /// Overlays `over` (typically the command line) on top of `self`.
    pub fn merge(mut self, over: ConfigFile) -> Self {
        self.x = over.x.or(self.x);
        self.y = over.y.or(self.y);
        self.out = over.out.or(self.out);
        if !over.v.is_empty() {
            self.v = over.v;
        }
        self.fix_df = over.fix_df.or(self.fix_df);
        self.seed = over.seed.or(self.seed);
        self.drop_missing = over.drop_missing.or(self.drop_missing);
        self
    }

    pub fn into_config(self) -> Result<MonitorConfig> {
        let x = self
            .x
            .ok_or_else(|| Error::Config("missing x series path".into()))?;
        let y = self
            .y
            .ok_or_else(|| Error::Config("missing y series path".into()))?;
        let mut cfg = MonitorConfig::new(x, y);
        if !self.v.is_empty() {
            cfg.v_levels = self.v;
        }
        cfg.fix_innovation_df = self.fix_df;
        cfg.output_path = self.out;
        cfg.seed = self.seed.unwrap_or(0);
        if self.drop_missing == Some(true) {
            cfg.missing = MissingPolicy::Drop;
        }
        Ok(cfg)
    }
}
