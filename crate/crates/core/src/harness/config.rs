use std::fmt;
use std::path::PathBuf;

use serde_json::{Map, Value};

use crate::graph::GraphFamily;

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub messages: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.messages.join("; "))
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Family(GraphFamily),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Circuit,
    RandomMatching,
    Async,
    Replay,
}

pub const MODEL_KINDS: &str = "circuit, random_matching, async, replay";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Replay document for `replay`.
    pub path: Option<PathBuf>,
    /// Use the measured inclusion frequency over this many rounds as `p_min`
    /// instead of the closed form (random matchings only).
    pub measure_p_min: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    /// All `k` tokens on node 0.
    Point {
        k: i64,
    },
    /// `k` tokens on each node of the first half.
    TwoBlock {
        k: i64,
    },
    /// Independent uniform loads in `0..=k`.
    Random {
        k: i64,
        seed: u64,
    },
    Explicit {
        loads: Vec<i64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoundsSpec {
    Explicit(u64),
    TauSpectral { multiplier: f64 },
    Staircase { multiplier: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Standard,
    Continuous,
    Height,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observers {
    pub cadence: u64,
    pub y_level: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    /// Initial discrepancy bound.
    pub k: i64,
    pub rounds: RoundsSpec,
    pub engine: EngineKind,
    pub trials: usize,
    pub seed: u64,
    pub observers: Observers,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_CADENCE: u64 = 1;
pub const DEFAULT_MULTIPLIER: f64 = 8.0;

const TOP_KEYS: &[&str] = &[
    "graph",
    "model",
    "initial",
    "K",
    "rounds",
    "multiplier",
    "engine",
    "trials",
    "seed",
    "observers",
    "out",
];

struct Parser {
    errors: Vec<String>,
}

impl Parser {
    fn err(&mut self, m: impl Into<String>) {
        self.errors.push(m.into());
    }

    fn uint(&mut self, v: &Value, what: &str) -> Option<u64> {
        let r = v.as_u64();
        if r.is_none() {
            self.err(format!("{what} must be a non-negative integer"));
        }
        r
    }

    fn int(&mut self, v: &Value, what: &str) -> Option<i64> {
        let r = v.as_i64();
        if r.is_none() {
            self.err(format!("{what} must be an integer"));
        }
        r
    }

    fn positive(&mut self, v: &Value, what: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x > 0.0 && x.is_finite() => Some(x),
            _ => {
                self.err(format!("{what} must be a positive number"));
                None
            }
        }
    }

    fn object<'a>(&mut self, v: &'a Value, what: &str) -> Option<&'a Map<String, Value>> {
        let r = v.as_object();
        if r.is_none() {
            self.err(format!("{what} must be an object"));
        }
        r
    }

    fn graph(&mut self, v: &Value) -> Option<GraphSpec> {
        let obj = self.object(v, "graph")?;
        if obj.get("family").and_then(Value::as_str) == Some("file") {
            return match obj.get("path").and_then(Value::as_str) {
                Some(p) => Some(GraphSpec::File(p.into())),
                None => {
                    self.err("graph.path is required for family \"file\"");
                    None
                }
            };
        }
        match serde_json::from_value::<GraphFamily>(v.clone()) {
            Ok(f) => Some(GraphSpec::Family(f)),
            Err(e) => {
                self.err(format!(
                    "graph: {e} (families: hypercube{{d}}, cycle{{n}}, torus{{a,b}}, complete{{n}}, random_regular{{n,d,seed}}, file{{path}})"
                ));
                None
            }
        }
    }

    fn model(&mut self, v: &Value) -> Option<ModelSpec> {
        let (name, obj) = match v {
            Value::String(s) => (s.as_str(), None),
            Value::Object(o) => match o.get("kind").and_then(Value::as_str) {
                Some(s) => (s, Some(o)),
                None => {
                    self.err("model.kind is required");
                    return None;
                }
            },
            _ => {
                self.err("model must be a kind name or an object with a kind");
                return None;
            }
        };
        let kind = match name {
            "circuit" => ModelKind::Circuit,
            "random_matching" => ModelKind::RandomMatching,
            "async" => ModelKind::Async,
            "replay" => ModelKind::Replay,
            other => {
                self.err(format!(
                    "unknown model kind \"{other}\"; valid kinds: {MODEL_KINDS}"
                ));
                return None;
            }
        };
        let path = obj
            .and_then(|o| o.get("path"))
            .and_then(Value::as_str)
            .map(PathBuf::from);
        if kind == ModelKind::Replay && path.is_none() {
            self.err("model.path is required for replay");
        }
        let measure_p_min = match obj.and_then(|o| o.get("measure_p_min")) {
            Some(v) => {
                let r = self.uint(v, "model.measure_p_min");
                if kind != ModelKind::RandomMatching {
                    self.err("model.measure_p_min applies to random_matching only");
                }
                r.filter(|&r| {
                    if r == 0 {
                        self.err("model.measure_p_min must be at least 1");
                    }
                    r > 0
                })
            }
            None => None,
        };
        Some(ModelSpec {
            kind,
            path,
            measure_p_min,
        })
    }

    fn initial(&mut self, v: &Value) -> Option<InitialSpec> {
        let obj = self.object(v, "initial")?;
        let kind = obj.get("kind").and_then(Value::as_str);
        let mut k = || -> Option<i64> {
            let k = match obj.get("K") {
                Some(v) => self.int(v, "initial.K")?,
                None => {
                    self.err("initial.K is required");
                    return None;
                }
            };
            if k < 1 {
                self.err("K must be ≥ 1");
                return None;
            }
            Some(k)
        };
        match kind {
            Some("point") => Some(InitialSpec::Point { k: k()? }),
            Some("two_block") => Some(InitialSpec::TwoBlock { k: k()? }),
            Some("random") => {
                let k = k();
                let seed = match obj.get("seed") {
                    Some(s) => self.uint(s, "initial.seed"),
                    None => Some(0),
                };
                Some(InitialSpec::Random { k: k?, seed: seed? })
            }
            Some("explicit") => {
                let loads: Option<Vec<i64>> = obj
                    .get("loads")
                    .and_then(Value::as_array)
                    .and_then(|a| a.iter().map(Value::as_i64).collect());
                match loads {
                    Some(l) if l.iter().all(|&x| x >= 0) => {
                        Some(InitialSpec::Explicit { loads: l })
                    }
                    _ => {
                        self.err("initial.loads must be an array of non-negative integers");
                        None
                    }
                }
            }
            other => {
                self.err(format!(
                    "unknown initial kind {other:?}; valid kinds: point, two_block, random, explicit"
                ));
                None
            }
        }
    }

    fn rounds(&mut self, v: Option<&Value>, multiplier: f64) -> Option<RoundsSpec> {
        let v = match v {
            None => return Some(RoundsSpec::TauSpectral { multiplier }),
            Some(v) => v,
        };
        if v.is_u64() {
            return Some(RoundsSpec::Explicit(v.as_u64()?));
        }
        let (name, obj) = match v {
            Value::String(s) => (s.as_str(), None),
            Value::Object(o) => (o.get("kind").and_then(Value::as_str).unwrap_or(""), Some(o)),
            _ => ("", None),
        };
        let mult = match obj.and_then(|o| o.get("multiplier")) {
            Some(m) => self.positive(m, "rounds.multiplier")?,
            None => multiplier,
        };
        match name {
            "tau_spectral" => Some(RoundsSpec::TauSpectral { multiplier: mult }),
            "staircase" => Some(RoundsSpec::Staircase { multiplier: mult }),
            "explicit" => {
                let r = obj.and_then(|o| o.get("rounds"));
                match r {
                    Some(r) => self.uint(r, "rounds.rounds").map(RoundsSpec::Explicit),
                    None => {
                        self.err("rounds.rounds is required for explicit rounds");
                        None
                    }
                }
            }
            _ => {
                self.err("rounds must be a count, \"tau_spectral\", \"staircase\" or {kind, ...}");
                None
            }
        }
    }
}

/// Parses and validates a JSON configuration, reporting every problem at once.
pub fn load_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ConfigError {
        messages: vec![format!("not valid JSON: {e}")],
    })?;
    parse_config(&doc)
}

pub fn parse_config(doc: &Value) -> Result<ExperimentConfig, ConfigError> {
    let mut p = Parser { errors: Vec::new() };
    let Some(root) = doc.as_object() else {
        return Err(ConfigError {
            messages: vec!["config must be a JSON object".into()],
        });
    };
    for key in root.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            p.err(format!("unknown key \"{key}\""));
        }
    }
    let mut required = |key: &str| {
        let v = root.get(key);
        if v.is_none() {
            p.err(format!("{key} is required"));
        }
        v
    };
    let (g, m, i) = (required("graph"), required("model"), required("initial"));
    let graph = g.and_then(|v| p.graph(v));
    let model = m.and_then(|v| p.model(v));
    let initial = i.and_then(|v| p.initial(v));

    let multiplier = match root.get("multiplier") {
        Some(v) => p.positive(v, "multiplier").unwrap_or(DEFAULT_MULTIPLIER),
        None => DEFAULT_MULTIPLIER,
    };
    let rounds = p.rounds(root.get("rounds"), multiplier);
    let engine = match root.get("engine").map(|v| v.as_str()) {
        None | Some(Some("standard")) => Some(EngineKind::Standard),
        Some(Some("continuous")) => Some(EngineKind::Continuous),
        Some(Some("height")) => Some(EngineKind::Height),
        Some(other) => {
            p.err(format!(
                "unknown engine {}; valid engines: standard, continuous, height",
                other.map_or("(not a string)".to_string(), |s| format!("\"{s}\""))
            ));
            None
        }
    };
    let trials = match root.get("trials") {
        Some(v) => p.uint(v, "trials").filter(|&t| {
            if t == 0 {
                p.err("trials must be ≥ 1");
            }
            t > 0
        }),
        None => Some(DEFAULT_TRIALS as u64),
    };
    let seed = match root.get("seed") {
        Some(v) => p.uint(v, "seed"),
        None => Some(0),
    };
    let observers = match root.get("observers") {
        None => Some(Observers {
            cadence: DEFAULT_CADENCE,
            y_level: None,
        }),
        Some(v) => p.object(v, "observers").cloned().and_then(|o| {
            for key in o.keys() {
                if !["cadence", "y_level"].contains(&key.as_str()) {
                    p.err(format!("unknown key \"observers.{key}\""));
                }
            }
            let cadence = match o.get("cadence") {
                Some(c) => p.uint(c, "observers.cadence").filter(|&c| {
                    if c == 0 {
                        p.err("cadence must be ≥ 1");
                    }
                    c > 0
                }),
                None => Some(DEFAULT_CADENCE),
            };
            let y_level = o.get("y_level").map(|y| p.int(y, "observers.y_level"));
            Some(Observers {
                cadence: cadence?,
                y_level: match y_level {
                    Some(Some(l)) => Some(l),
                    Some(None) => return None,
                    None => None,
                },
            })
        }),
    };
    let out = root.get("out").and_then(|v| match v.as_str() {
        Some(s) => Some(PathBuf::from(s)),
        None => {
            p.err("out must be a path string");
            None
        }
    });

    let k = match (root.get("K"), &initial) {
        (Some(v), _) => p.int(v, "K").filter(|&k| {
            if k < 1 {
                p.err("K must be ≥ 1");
            }
            k >= 1
        }),
        (
            None,
            Some(
                InitialSpec::Point { k }
                | InitialSpec::TwoBlock { k }
                | InitialSpec::Random { k, .. },
            ),
        ) => Some(*k),
        (None, Some(InitialSpec::Explicit { loads })) => {
            let max = loads.iter().copied().max().unwrap_or(0);
            let min = loads.iter().copied().min().unwrap_or(0);
            Some((max - min).max(1))
        }
        (None, None) => None,
    };
    if let (Some(k), Some(InitialSpec::Explicit { loads })) = (k, &initial) {
        let disc = loads.iter().max().unwrap_or(&0) - loads.iter().min().unwrap_or(&0);
        if disc > k {
            p.err(format!("initial discrepancy {disc} exceeds K = {k}"));
        }
    }
    if let (Some(RoundsSpec::Staircase { .. }), Some(e)) = (rounds, engine) {
        if e != EngineKind::Standard {
            p.err("staircase rounds require the standard engine");
        }
    }

    if !p.errors.is_empty() {
        return Err(ConfigError { messages: p.errors });
    }
    Ok(ExperimentConfig {
        graph: graph.expect("checked"),
        model: model.expect("checked"),
        initial: initial.expect("checked"),
        k: k.expect("checked"),
        rounds: rounds.expect("checked"),
        engine: engine.expect("checked"),
        trials: trials.expect("checked") as usize,
        seed: seed.expect("checked"),
        observers: observers.expect("checked"),
        out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = load_config(r#"{"graph":{"family":"cycle","n":4},"model":"async","initial":{"kind":"point","K":16}}"#).unwrap();
        assert_eq!(c.graph, GraphSpec::Family(GraphFamily::Cycle { n: 4 }));
        assert_eq!(c.model.kind, ModelKind::Async);
        assert_eq!(c.k, 16);
        assert_eq!(c.trials, 10);
        assert_eq!(c.observers.cadence, 1);
        assert_eq!(c.rounds, RoundsSpec::TauSpectral { multiplier: 8.0 });
        assert_eq!(c.engine, EngineKind::Standard);
    }

    #[test]
    fn k_zero_is_rejected() {
        let e = load_config(r#"{"graph":{"family":"cycle","n":4},"model":"async","initial":{"kind":"point","K":0}}"#)
            .unwrap_err();
        assert_eq!(e.messages, vec!["K must be ≥ 1".to_string()]);
    }

    #[test]
    fn unknown_model_names_valid_kinds() {
        let e = load_config(r#"{"graph":{"family":"cycle","n":4},"model":"gossip","initial":{"kind":"point","K":3}}"#)
            .unwrap_err();
        assert!(
            e.messages[0].contains("gossip") && e.messages[0].contains(MODEL_KINDS),
            "{e}"
        );
    }

    #[test]
    fn all_errors_in_one_pass() {
        let e = load_config(
            r#"{"graph":{"family":"cube"},"model":"x","initial":{"kind":"point","K":-1},"trials":0,
                "observers":{"cadence":0},"engine":"warp","bogus":1}"#,
        )
        .unwrap_err();
        assert_eq!(e.messages.len(), 7, "{e}");
    }

    #[test]
    fn explicit_loads_respect_k() {
        let e = load_config(
            r#"{"graph":{"family":"cycle","n":3},"model":"circuit","K":2,"initial":{"kind":"explicit","loads":[5,0,1]}}"#,
        )
        .unwrap_err();
        assert!(e.messages[0].contains("exceeds K"));
    }

    #[test]
    fn rounds_forms() {
        let base = r#"{"graph":{"family":"cycle","n":4},"model":"circuit","initial":{"kind":"point","K":4},"multiplier":2,"rounds":"#;
        let parse = |r: &str| load_config(&format!("{base}{r}}}")).unwrap().rounds;
        assert_eq!(parse("7"), RoundsSpec::Explicit(7));
        assert_eq!(
            parse(r#""staircase""#),
            RoundsSpec::Staircase { multiplier: 2.0 }
        );
        assert_eq!(
            parse(r#"{"kind":"tau_spectral","multiplier":3}"#),
            RoundsSpec::TauSpectral { multiplier: 3.0 }
        );
        assert_eq!(
            parse(r#"{"kind":"explicit","rounds":0}"#),
            RoundsSpec::Explicit(0)
        );
    }
}
