//! Flat `key = value` scenario files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! case-sensitive; unknown keys are rejected all at once.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use powershape::control::ClosedLoopMode;
use powershape::LineParams;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("{0}")]
    Invalid(#[from] powershape::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    RlcDemo,
    OpenLoopStability,
    BoundaryPassivity,
    ClosedLoop,
    AltMap,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RlcDemo => "rlc-demo",
            Self::OpenLoopStability => "open-loop-stability",
            Self::BoundaryPassivity => "boundary-passivity",
            Self::ClosedLoop => "closed-loop",
            Self::AltMap => "altmap",
        }
    }
}

impl FromStr for Scenario {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "rlc-demo" => Self::RlcDemo,
            "open-loop-stability" => Self::OpenLoopStability,
            "boundary-passivity" => Self::BoundaryPassivity,
            "closed-loop" => Self::ClosedLoop,
            "altmap" => Self::AltMap,
            _ => return Err(()),
        })
    }
}

/// Initial field of the line scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Zero,
    /// `i = cos(pi z/2)`, `v = sin(pi z/2)/2`.
    Standing,
    /// Same current with `G v + di/dz = 0`.
    Quiet,
    /// Seeded random Fourier series.
    Random,
    /// The closed-loop target itself.
    Target,
}

impl FromStr for Initial {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "zero" => Self::Zero,
            "standing" => Self::Standing,
            "quiet" => Self::Quiet,
            "random" => Self::Random,
            "target" => Self::Target,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortMode {
    PassiveShort,
    Controlled,
}

/// Conductance given directly or picked so the stability condition holds
/// with `lhs = target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conductance {
    Value(f64),
    Auto,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub n_cells: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub stride: usize,
    pub cfl: f64,
    pub params: LineParams,
    pub conductance: Conductance,
    pub stability_target: f64,
    pub initial: Initial,
    pub probes: Vec<f64>,
    pub output: Option<String>,
    // rlc-demo
    pub r_l: f64,
    pub r_c: f64,
    pub v_s_star: f64,
    pub i_l0: f64,
    pub v_c0: f64,
    // boundary-passivity
    pub port: PortMode,
    pub drives: usize,
    pub drive_amplitude: f64,
    pub ramp_time: f64,
    // closed-loop
    pub k_gain: f64,
    pub loop_mode: ClosedLoopMode,
    pub target_i0: f64,
    pub target_i1: f64,
    pub terminal_tol: f64,
    // altmap
    pub lambda_factors: Vec<f64>,
    pub half_p2: bool,
}

/// Every key the parser accepts.
pub const KEYS: &[&str] = &[
    "scenario", "name", "seed", "n_cells", "dt", "t_end", "stride", "cfl", "L", "C", "R", "G", "R0", "E",
    "R1", "C1", "stability_target", "initial", "probes", "output", "R_L", "R_C", "v_s_star", "i_L0",
    "v_C0", "port", "drives", "drive_amplitude", "ramp_time", "K", "loop_mode", "target_i0", "target_i1",
    "terminal_tol", "lambda_factors", "half_p2",
];

struct Raw(BTreeMap<String, String>);

impl Raw {
    fn get<T: FromStr>(&self, key: &str, expected: &'static str, default: T) -> Result<T, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                value: v.clone(),
                expected,
            }),
        }
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: v.clone(),
                    expected: "comma-separated numbers",
                }),
        }
    }
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        Self::parse(&text, stem)
    }

    /// Parse `text`; `default_name` names the output directory unless the
    /// file sets `name`.
    pub fn parse(text: &str, default_name: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: k + 1, text: line.into() });
            };
            let key = key.trim().to_string();
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: k + 1, key });
            }
        }
        let unknown: Vec<String> = map.keys().filter(|k| !KEYS.contains(&k.as_str())).cloned().collect();
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let raw = Raw(map);

        let scenario = match raw.0.get("scenario") {
            None => return Err(ConfigError::Missing("scenario")),
            Some(s) => s.parse().map_err(|_| ConfigError::BadValue {
                key: "scenario".into(),
                value: s.clone(),
                expected: "rlc-demo, open-loop-stability, boundary-passivity, closed-loop or altmap",
            })?,
        };
        let dt = match raw.0.get("dt").map(String::as_str) {
            None | Some("auto") => None,
            Some(_) => Some(raw.get("dt", "a number or `auto`", 0.0)?),
        };
        let conductance = match raw.0.get("G").map(String::as_str) {
            Some("auto") => Conductance::Auto,
            _ => Conductance::Value(raw.get("G", "a number or `auto`", 1.0)?),
        };
        let d = LineParams::default();
        let params = LineParams {
            l: raw.get("L", "a number", d.l)?,
            c: raw.get("C", "a number", d.c)?,
            r: raw.get("R", "a number", d.r)?,
            g: match conductance {
                Conductance::Value(g) => g,
                Conductance::Auto => 1.0,
            },
            r0: raw.get("R0", "a number", d.r0)?,
            e: raw.get("E", "a number", d.e)?,
            r1: raw.get("R1", "a number", d.r1)?,
            c1: raw.get("C1", "a number", d.c1)?,
        };
        let initial = match raw.0.get("initial") {
            None => match scenario {
                Scenario::BoundaryPassivity => Initial::Zero,
                Scenario::ClosedLoop => Initial::Zero,
                _ => Initial::Quiet,
            },
            Some(s) => s.parse().map_err(|_| ConfigError::BadValue {
                key: "initial".into(),
                value: s.clone(),
                expected: "zero, standing, quiet, random or target",
            })?,
        };
        let port = match raw.0.get("port").map(String::as_str) {
            None | Some("controlled") => PortMode::Controlled,
            Some("passive-short") => PortMode::PassiveShort,
            Some(s) => {
                return Err(ConfigError::BadValue {
                    key: "port".into(),
                    value: s.into(),
                    expected: "passive-short or controlled",
                })
            }
        };
        let loop_mode = match raw.0.get("loop_mode").map(String::as_str) {
            None | Some("shaped") => ClosedLoopMode::ShapedDynamics,
            Some("interconnected") => ClosedLoopMode::Interconnected,
            Some(s) => {
                return Err(ConfigError::BadValue {
                    key: "loop_mode".into(),
                    value: s.into(),
                    expected: "shaped or interconnected",
                })
            }
        };
        let cfg = Self {
            name: raw.get("name", "a name", default_name.to_string())?,
            scenario,
            seed: raw.get("seed", "an unsigned integer", 0)?,
            n_cells: raw.get("n_cells", "an integer >= 2", 100)?,
            dt,
            t_end: raw.get("t_end", "a number", if scenario == Scenario::RlcDemo { 20.0 } else { 5.0 })?,
            stride: raw.get("stride", "a positive integer", 1)?,
            cfl: raw.get("cfl", "a number", 0.5)?,
            params,
            conductance,
            stability_target: raw.get("stability_target", "a number", 0.8)?,
            initial,
            probes: raw.list("probes", &[0.0, 0.5, 1.0])?,
            output: raw.0.get("output").cloned(),
            r_l: raw.get("R_L", "a number", 1.0)?,
            r_c: raw.get("R_C", "a number", 1.0)?,
            v_s_star: raw.get("v_s_star", "a number", 2.0)?,
            i_l0: raw.get("i_L0", "a number", 0.0)?,
            v_c0: raw.get("v_C0", "a number", 0.0)?,
            port,
            drives: raw.get("drives", "an integer", 1)?,
            drive_amplitude: raw.get("drive_amplitude", "a number", 1.0)?,
            ramp_time: raw.get("ramp_time", "a number", 0.5)?,
            k_gain: raw.get("K", "a number", 1.0)?,
            loop_mode,
            target_i0: raw.get("target_i0", "a number", 0.5)?,
            target_i1: raw.get("target_i1", "a number", 0.5)?,
            terminal_tol: raw.get("terminal_tol", "a number", 1e-3)?,
            lambda_factors: raw.list("lambda_factors", &[0.25, 0.5, 0.75, 2.0])?,
            half_p2: raw.get("half_p2", "true or false", true)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(powershape::Error::InvalidParameter(msg.into())));
        if self.scenario == Scenario::RlcDemo {
            powershape::rlc::RlcParams::new(
                self.params.l,
                self.params.c,
                self.r_l,
                self.r_c,
                self.k_gain,
                self.v_s_star,
            )?;
        } else {
            self.params.validate()?;
            if self.n_cells < 2 {
                return bad("n_cells must be at least 2");
            }
        }
        if !(self.t_end > 0.0) {
            return bad("t_end must be positive");
        }
        if self.stride == 0 {
            return bad("stride must be positive");
        }
        if matches!(self.dt, Some(dt) if !(dt > 0.0)) {
            return bad("dt must be positive");
        }
        if !(self.cfl > 0.0) || !(self.stability_target > 0.0) {
            return bad("cfl and stability_target must be positive");
        }
        if self.probes.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return bad("probes must lie in [0, 1]");
        }
        if self.k_gain < 0.0 {
            return bad("K must be non-negative");
        }
        Ok(())
    }
}
