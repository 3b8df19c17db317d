//! The JSON run-configuration schema: parsing, validation, and conversion to
//! core types.
//!
//! The document is validated key by key before any run; unknown keys are
//! rejected. The bias is configured as the win probability `p` in [0.5, 1)
//! and converted to the internal `delta = p - 1/2` — `delta` itself is not an
//! accepted key, so the two can never disagree.

use std::fmt;

use serde_json::{json, Map, Value};
use yardsale_core::{
    FractionDistribution, InitialState, ModelParams, StreamKey, TrajectoryConfig,
};

/// A rejected configuration, with the offending key or line in the message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Uniform,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FractionSpec {
    Constant { beta: f64 },
    Uniform { lo: f64, hi: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl FractionSpec {
    pub fn to_distribution(self) -> Result<FractionDistribution, ConfigError> {
        match self {
            Self::Constant { beta } => FractionDistribution::constant(beta),
            Self::Uniform { lo, hi } => FractionDistribution::uniform(lo, hi),
            Self::Beta { alpha, beta } => FractionDistribution::beta(alpha, beta),
        }
        .map_err(|e| ConfigError(format!("key `fraction`: {e}")))
    }
}

pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;
pub const DEFAULT_RECORD_EVERY: u64 = 1;
pub const DEFAULT_OUT: &str = "yardsale";
/// Condensation threshold used when a command needs one and the config does
/// not set `condensation_epsilon`.
pub const DEFAULT_CONDENSATION_EPSILON: f64 = 1e-6;

/// Parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfigFile {
    pub n_agents: usize,
    pub initial: InitialSpec,
    /// Win probability of the richer agent, in [0.5, 1).
    pub p: f64,
    pub fraction: FractionSpec,
    pub lambda: Option<Vec<f64>>,
    pub chi: Option<f64>,
    pub max_steps: u64,
    pub condensation_epsilon: Option<f64>,
    pub record_every: u64,
    pub seed: u64,
    pub out: String,
}

const KNOWN_KEYS: [&str; 11] = [
    "n_agents",
    "initial",
    "p",
    "fraction",
    "lambda",
    "chi",
    "max_steps",
    "condensation_epsilon",
    "record_every",
    "seed",
    "out",
];

fn require<'a>(map: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ConfigError> {
    map.get(key)
        .ok_or_else(|| ConfigError(format!("missing required key `{key}`")))
}

fn get_u64(value: &Value, key: &str) -> Result<u64, ConfigError> {
    value
        .as_u64()
        .ok_or_else(|| ConfigError(format!("key `{key}` must be a nonnegative integer")))
}

fn get_f64(value: &Value, key: &str) -> Result<f64, ConfigError> {
    value
        .as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError(format!("key `{key}` must be a finite number")))
}

fn get_f64_list(value: &Value, key: &str) -> Result<Vec<f64>, ConfigError> {
    let arr = value
        .as_array()
        .ok_or_else(|| ConfigError(format!("key `{key}` must be a list of numbers")))?;
    arr.iter().map(|v| get_f64(v, key)).collect()
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfigFile, ConfigError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError(format!("invalid JSON: {e}")))?;
    let map = match value {
        Value::Object(map) => map,
        _ => return err("configuration must be a JSON object"),
    };
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return err(format!("unknown key `{key}`"));
        }
    }

    let n_agents = get_u64(require(&map, "n_agents")?, "n_agents")?;
    if n_agents < 2 {
        return err(format!("key `n_agents` must be at least 2, got {n_agents}"));
    }
    let n_agents = n_agents as usize;

    let initial = match require(&map, "initial")? {
        Value::String(s) if s == "uniform" => InitialSpec::Uniform,
        Value::String(s) => {
            return err(format!(
                "key `initial` must be \"uniform\" or a list of wealths, got \"{s}\""
            ))
        }
        v @ Value::Array(_) => {
            let raw = get_f64_list(v, "initial")?;
            if raw.len() != n_agents {
                return err(format!(
                    "key `initial` has {} entries, expected n_agents = {n_agents}",
                    raw.len()
                ));
            }
            if let Some(bad) = raw.iter().find(|x| **x < 0.0) {
                return err(format!("key `initial` contains a negative entry ({bad})"));
            }
            if raw.iter().sum::<f64>() <= 0.0 {
                return err("key `initial` must sum to a positive value");
            }
            InitialSpec::Explicit(raw)
        }
        _ => return err("key `initial` must be \"uniform\" or a list of wealths"),
    };

    let p = get_f64(require(&map, "p")?, "p")?;
    if !(0.5..1.0).contains(&p) {
        return err(format!("key `p` must lie in [0.5, 1), got {p}"));
    }

    let fraction = parse_fraction(require(&map, "fraction")?)?;
    fraction.to_distribution()?;

    let lambda = match map.get("lambda") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let lambda = get_f64_list(v, "lambda")?;
            if lambda.len() != n_agents {
                return err(format!(
                    "key `lambda` has {} entries, expected n_agents = {n_agents}",
                    lambda.len()
                ));
            }
            if let Some(bad) = lambda.iter().find(|x| **x <= 0.0 || **x >= 1.0) {
                return err(format!(
                    "key `lambda` entries must lie in (0, 1), got {bad}"
                ));
            }
            Some(lambda)
        }
    };

    let chi = match map.get("chi") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let chi = get_f64(v, "chi")?;
            if chi <= 0.0 || chi >= 1.0 {
                return err(format!("key `chi` must lie in the open (0, 1), got {chi}"));
            }
            Some(chi)
        }
    };

    let max_steps = match map.get("max_steps") {
        None => DEFAULT_MAX_STEPS,
        Some(v) => {
            let steps = get_u64(v, "max_steps")?;
            if steps == 0 {
                return err("key `max_steps` must be at least 1");
            }
            steps
        }
    };

    let condensation_epsilon = match map.get("condensation_epsilon") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let eps = get_f64(v, "condensation_epsilon")?;
            if eps <= 0.0 || eps >= 1.0 {
                return err(format!(
                    "key `condensation_epsilon` must lie in (0, 1), got {eps}"
                ));
            }
            Some(eps)
        }
    };

    let record_every = match map.get("record_every") {
        None => DEFAULT_RECORD_EVERY,
        Some(v) => {
            let r = get_u64(v, "record_every")?;
            if r == 0 {
                return err("key `record_every` must be at least 1");
            }
            r
        }
    };

    let seed = get_u64(require(&map, "seed")?, "seed")?;

    let out = match map.get("out") {
        None => DEFAULT_OUT.to_string(),
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return err("key `out` must be a nonempty string"),
    };

    let config = RunConfigFile {
        n_agents,
        initial,
        p,
        fraction,
        lambda,
        chi,
        max_steps,
        condensation_epsilon,
        record_every,
        seed,
        out,
    };
    // Surface cross-field problems (tax floor vs condensation threshold) at
    // parse time, with the core as the single source of truth.
    config
        .trajectory_config()?
        .validate()
        .map_err(|e| ConfigError(e.to_string()))?;
    Ok(config)
}

fn parse_fraction(value: &Value) -> Result<FractionSpec, ConfigError> {
    let map = match value {
        Value::Object(map) => map,
        _ => return err("key `fraction` must be an object with a `kind` tag"),
    };
    let kind = match map.get("kind") {
        Some(Value::String(s)) => s.as_str(),
        _ => return err("key `fraction.kind` must be \"constant\", \"uniform\", or \"beta\""),
    };
    let allowed: &[&str] = match kind {
        "constant" => &["kind", "beta"],
        "uniform" => &["kind", "lo", "hi"],
        "beta" => &["kind", "alpha", "beta"],
        other => {
            return err(format!(
                "key `fraction.kind` must be \"constant\", \"uniform\", or \"beta\", got \"{other}\""
            ))
        }
    };
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return err(format!("unknown key `fraction.{key}`"));
        }
    }
    let field = |key: &str| -> Result<f64, ConfigError> {
        get_f64(
            map.get(key)
                .ok_or_else(|| ConfigError(format!("missing key `fraction.{key}`")))?,
            &format!("fraction.{key}"),
        )
    };
    Ok(match kind {
        "constant" => FractionSpec::Constant {
            beta: field("beta")?,
        },
        "uniform" => FractionSpec::Uniform {
            lo: field("lo")?,
            hi: field("hi")?,
        },
        _ => FractionSpec::Beta {
            alpha: field("alpha")?,
            beta: field("beta")?,
        },
    })
}

impl RunConfigFile {
    pub fn delta(&self) -> f64 {
        self.p - 0.5
    }

    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let mut params = ModelParams::new(
            self.n_agents,
            self.delta(),
            self.fraction.to_distribution()?,
        )
        .map_err(|e| ConfigError(e.to_string()))?;
        if let Some(lambda) = &self.lambda {
            params = params
                .with_risk_lambda(lambda.clone())
                .map_err(|e| ConfigError(e.to_string()))?;
        }
        if let Some(chi) = self.chi {
            params = params
                .with_tax(chi)
                .map_err(|e| ConfigError(e.to_string()))?;
        }
        Ok(params)
    }

    /// Core trajectory config; the stream key starts at trajectory index 0.
    pub fn trajectory_config(&self) -> Result<TrajectoryConfig, ConfigError> {
        Ok(TrajectoryConfig {
            params: self.model_params()?,
            initial: match &self.initial {
                InitialSpec::Uniform => InitialState::Uniform,
                InitialSpec::Explicit(raw) => InitialState::Explicit(raw.clone()),
            },
            max_steps: self.max_steps,
            condensation_epsilon: self.condensation_epsilon,
            record_every: self.record_every,
            key: StreamKey::new(self.seed, 0),
        })
    }

    /// Normalized document: defaults filled in, optional absent keys omitted.
    pub fn to_document(&self) -> Value {
        let mut map = Map::new();
        map.insert("n_agents".into(), json!(self.n_agents));
        map.insert(
            "initial".into(),
            match &self.initial {
                InitialSpec::Uniform => json!("uniform"),
                InitialSpec::Explicit(raw) => json!(raw),
            },
        );
        map.insert("p".into(), json!(self.p));
        map.insert(
            "fraction".into(),
            match self.fraction {
                FractionSpec::Constant { beta } => json!({"kind": "constant", "beta": beta}),
                FractionSpec::Uniform { lo, hi } => json!({"kind": "uniform", "lo": lo, "hi": hi}),
                FractionSpec::Beta { alpha, beta } => {
                    json!({"kind": "beta", "alpha": alpha, "beta": beta})
                }
            },
        );
        if let Some(lambda) = &self.lambda {
            map.insert("lambda".into(), json!(lambda));
        }
        if let Some(chi) = self.chi {
            map.insert("chi".into(), json!(chi));
        }
        map.insert("max_steps".into(), json!(self.max_steps));
        if let Some(eps) = self.condensation_epsilon {
            map.insert("condensation_epsilon".into(), json!(eps));
        }
        map.insert("record_every".into(), json!(self.record_every));
        map.insert("seed".into(), json!(self.seed));
        map.insert("out".into(), json!(self.out));
        Value::Object(map)
    }
}
