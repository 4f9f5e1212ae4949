//! JSON experiment configuration.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use ising_kac_core::lattice::TorusField;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Glauber,
    Phi42,
    Oracle,
    Compare,
    KernelScan,
    BesovCorpus,
}

impl Mode {
    pub fn id(self) -> &'static str {
        match self {
            Mode::Glauber => "glauber",
            Mode::Phi42 => "phi42",
            Mode::Oracle => "oracle",
            Mode::Compare => "compare",
            Mode::KernelScan => "kernel-scan",
            Mode::BesovCorpus => "besov-corpus",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub gammas: Vec<f64>,
    /// Mass parameter `A`.
    pub a: f64,
    /// External field; only used with an explicit `beta`.
    pub b: f64,
    /// Explicit inverse temperature. `None` selects the critical scaling.
    pub beta: Option<f64>,
    /// Lattice half-size for oracle mode.
    pub oracle_n: usize,
    pub profile: String,
    pub seed: u64,
    pub replicas: usize,
    pub t_burn: f64,
    pub t_sample: f64,
    pub cadence: f64,
    pub observables: Vec<String>,
    /// Galerkin cutoff for Φ⁴ runs; defaults to the lattice `N`.
    pub m: Option<usize>,
    pub dt: f64,
    /// Window of the linearized co-simulation.
    pub window: f64,
    pub corpus_size: usize,
    pub nu: f64,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Glauber,
            gammas: vec![0.25],
            a: 0.0,
            b: 0.0,
            beta: None,
            oracle_n: 2,
            profile: "unit-diffusion".into(),
            seed: 1,
            replicas: 1,
            t_burn: 1.0,
            t_sample: 10.0,
            cadence: 0.1,
            observables: vec!["lp:2".into()],
            m: None,
            dt: 0.0025,
            window: 0.005,
            corpus_size: 100,
            nu: 0.25,
            threads: 1,
            out: None,
        }
    }
}

const KEYS: [&str; 21] = [
    "mode", "gammas", "a", "b", "beta", "oracle_n", "profile", "seed", "replicas", "t_burn",
    "t_sample", "cadence", "observables", "m", "dt", "window", "corpus_size", "nu", "threads",
    "out", "$comment",
];

impl ExperimentConfig {
    /// Parses and validates; schema errors name the offending key.
    pub fn from_json(text: &str) -> LabResult<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(mut map) = value else {
            return Err(LabError::Schema { key: "<root>".into(), reason: "expected an object".into() });
        };
        for key in map.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(LabError::Schema { key: key.clone(), reason: "unknown key".into() });
            }
        }
        map.remove("$comment");
        for (key, v) in &map {
            let single = Value::Object([(key.clone(), v.clone())].into_iter().collect());
            if let Err(e) = serde_json::from_value::<ExperimentConfig>(single) {
                return Err(LabError::Schema { key: key.clone(), reason: e.to_string() });
            }
        }
        let cfg: ExperimentConfig = serde_json::from_value(Value::Object(map))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> LabResult<()> {
        let bad = |key: &str, reason: String| Err(LabError::Schema { key: key.into(), reason });
        if self.gammas.is_empty() && matches!(self.mode, Mode::Glauber | Mode::Compare | Mode::KernelScan | Mode::BesovCorpus) {
            return bad("gammas", "at least one γ is required".into());
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return bad("gammas", format!("γ = {g} is not in (0, 1)"));
        }
        if self.replicas == 0 {
            return bad("replicas", "must be positive".into());
        }
        if self.threads == 0 {
            return bad("threads", "must be positive".into());
        }
        if !(self.cadence > 0.0) {
            return bad("cadence", "must be positive".into());
        }
        if !(self.t_burn >= 0.0) {
            return bad("t_burn", "must be nonnegative".into());
        }
        if !(self.t_sample >= 0.0) {
            return bad("t_sample", "must be nonnegative".into());
        }
        if !(self.dt > 0.0) {
            return bad("dt", "must be positive".into());
        }
        if !(self.window > 0.0) {
            return bad("window", "must be positive".into());
        }
        if self.m == Some(0) {
            return bad("m", "must be positive".into());
        }
        if self.oracle_n == 0 || self.oracle_n > 2 {
            return bad("oracle_n", "exact enumeration supports N ∈ {1, 2}".into());
        }
        if let Err(e) = ising_kac_core::kernel::Profile::from_id(&self.profile) {
            return bad("profile", e.to_string());
        }
        for (i, o) in self.observables.iter().enumerate() {
            if let Err(e) = o.parse::<Observable>() {
                return bad(&format!("observables[{i}]"), e.to_string());
            }
        }
        Ok(())
    }

    pub fn parsed_observables(&self) -> LabResult<Vec<Observable>> {
        self.observables.iter().map(|o| o.parse()).collect()
    }
}

/// Named test function on the torus `[-1, 1)²`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Const,
    /// `cos(π ω·x)`.
    Re([i64; 2]),
    /// `sin(π ω·x)`.
    Im([i64; 2]),
    /// Smooth compactly supported bump of radius `width`, periodized.
    Bump { center: [f64; 2], width: f64 },
}

fn wrap(d: f64) -> f64 {
    (d + 1.0).rem_euclid(2.0) - 1.0
}

impl TestFunction {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            TestFunction::Const => 1.0,
            TestFunction::Re(w) => (PI * (w[0] as f64 * x + w[1] as f64 * y)).cos(),
            TestFunction::Im(w) => (PI * (w[0] as f64 * x + w[1] as f64 * y)).sin(),
            TestFunction::Bump { center, width } => {
                let dx = wrap(x - center[0]);
                let dy = wrap(y - center[1]);
                let r2 = (dx * dx + dy * dy) / (width * width);
                if r2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample(&self, n: usize) -> TorusField {
        TorusField::from_fn(n, |x, y| self.eval(x, y))
    }
}

fn bad_observable(s: &str, why: &str) -> LabError {
    LabError::Param(format!("observable `{s}`: {why}"))
}

fn parse_ints(s: &str, full: &str) -> LabResult<[i64; 2]> {
    let (a, b) = s.split_once(',').ok_or_else(|| bad_observable(full, "expected w1,w2"))?;
    let p = |t: &str| t.trim().parse::<i64>().map_err(|_| bad_observable(full, "bad frequency"));
    Ok([p(a)?, p(b)?])
}

impl std::str::FromStr for TestFunction {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        if s == "const" {
            return Ok(TestFunction::Const);
        }
        if let Some(rest) = s.strip_prefix("re:") {
            return Ok(TestFunction::Re(parse_ints(rest, s)?));
        }
        if let Some(rest) = s.strip_prefix("im:") {
            return Ok(TestFunction::Im(parse_ints(rest, s)?));
        }
        if let Some(rest) = s.strip_prefix("bump:") {
            let v: Vec<f64> = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad_observable(s, "bad bump parameters"))?;
            if v.len() != 3 || !(v[2] > 0.0 && v[2] <= 1.0) {
                return Err(bad_observable(s, "bump needs cx,cy,width with width in (0, 1]"));
            }
            return Ok(TestFunction::Bump { center: [v[0], v[1]], width: v[2] });
        }
        Err(bad_observable(s, "unknown test function"))
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Const => write!(f, "const"),
            TestFunction::Re(w) => write!(f, "re:{},{}", w[0], w[1]),
            TestFunction::Im(w) => write!(f, "im:{},{}", w[0], w[1]),
            TestFunction::Bump { center, width } => write!(f, "bump:{},{},{}", center[0], center[1], width),
        }
    }
}

/// Scalar observable recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// `‖X‖_p^p`.
    Lp(f64),
    /// `⟨X, φ⟩`.
    Pair(TestFunction),
    /// `⟨γ^{-1}σ, φ⟩ − ⟨X_γ, φ⟩` (Glauber only).
    SpinPair(TestFunction),
    /// Mean spin.
    Magnetization,
    /// `‖H_j(Z, c)‖` in `B^{-0.1}_{∞,∞}`.
    Wick(usize),
}

impl std::str::FromStr for Observable {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        if s == "magnetization" {
            return Ok(Observable::Magnetization);
        }
        if let Some(rest) = s.strip_prefix("lp:") {
            let p: f64 = rest.parse().map_err(|_| bad_observable(s, "bad exponent"))?;
            if !(p >= 1.0) {
                return Err(bad_observable(s, "p must be at least 1"));
            }
            return Ok(Observable::Lp(p));
        }
        if let Some(rest) = s.strip_prefix("pair:") {
            return Ok(Observable::Pair(rest.parse()?));
        }
        if let Some(rest) = s.strip_prefix("spin-pair:") {
            return Ok(Observable::SpinPair(rest.parse()?));
        }
        if let Some(rest) = s.strip_prefix("wick:") {
            let j: usize = rest.parse().map_err(|_| bad_observable(s, "bad degree"))?;
            if !(1..=3).contains(&j) {
                return Err(bad_observable(s, "degree must be 1, 2 or 3"));
            }
            return Ok(Observable::Wick(j));
        }
        Err(bad_observable(s, "unknown observable"))
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Lp(p) => write!(f, "lp:{p}"),
            Observable::Pair(t) => write!(f, "pair:{t}"),
            Observable::SpinPair(t) => write!(f, "spin-pair:{t}"),
            Observable::Magnetization => write!(f, "magnetization"),
            Observable::Wick(j) => write!(f, "wick:{j}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn schema_errors_name_the_key() {
        let key_of = |text: &str| match ExperimentConfig::from_json(text) {
            Err(LabError::Schema { key, .. }) => key,
            other => panic!("expected schema error, got {other:?}"),
        };
        assert_eq!(key_of(r#"{"gamma": [0.25]}"#), "gamma");
        assert_eq!(key_of(r#"{"replicas": "four"}"#), "replicas");
        assert_eq!(key_of(r#"{"gammas": [1.5]}"#), "gammas");
        assert_eq!(key_of(r#"{"mode": "ising"}"#), "mode");
        assert_eq!(key_of(r#"{"observables": ["lp:2", "pair:re:1"]}"#), "observables[1]");
        assert_eq!(key_of("[1]"), "<root>");
    }

    #[test]
    fn observable_names_round_trip() {
        for s in ["lp:4", "pair:re:1,0", "pair:im:0,-2", "spin-pair:bump:0,0.5,0.4", "magnetization", "wick:3", "pair:const"] {
            let o: Observable = s.parse().unwrap();
            assert_eq!(o.to_string(), s);
        }
        assert!("lp:x".parse::<Observable>().is_err());
        assert!("wick:4".parse::<Observable>().is_err());
    }

    #[test]
    fn bump_is_periodic_and_supported() {
        let b = TestFunction::Bump { center: [0.9, 0.0], width: 0.3 };
        assert!((b.eval(-0.95, 0.0) - b.eval(0.75, 0.0)).abs() < 1e-14);
        assert!(b.eval(-0.95, 0.0) > 0.0);
        assert_eq!(b.eval(0.0, 0.0), 0.0);
        assert!((b.eval(0.9, 0.0) - 1.0).abs() < 1e-15);
    }
}
