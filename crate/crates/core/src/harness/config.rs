//! Experiment configuration as flat dotted TOML keys.
//!
//! ```toml
//! task = "box_push_2d"
//! mode = "train"
//! seeds = [0, 1, 2]
//! learner.b_p = 0.25
//! planner.n_e_max = 8.0
//! env.contact_friction = 0.5
//! budget.max_nodes = 3000
//! ```
//!
//! Top-level keys: `task`, `mode`, `preset`, `seeds`, `workers`. Sections:
//! `env.*` (physical task parameters), `planner.*`, `learner.*`,
//! `budget.max_nodes`, `budget.max_env_steps`, `budget.wall_clock_s`,
//! `sweep.param`, `sweep.values`, `sweep.param2`, `sweep.values2`,
//! `sweep.base`. A bare planner or learner field name (`gamma = 0.9`)
//! resolves to its section when the name is unambiguous.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value as Json;
use toml::Value;

use super::HarnessError;
use crate::learner::{LearnerError, TrainConfig};
use crate::planner::{PlannerError, PlannerParams};
use crate::sim::{make_env, param_keys, EnvModel, ParamValue, SimError, TaskId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Plan,
    Train,
    Sweep,
    PretrainEval,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Plan => "plan",
            Mode::Train => "train",
            Mode::Sweep => "sweep",
            Mode::PretrainEval => "pretrain-eval",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "plan" => Mode::Plan,
            "train" => Mode::Train,
            "sweep" => Mode::Sweep,
            "pretrain-eval" => Mode::PretrainEval,
            _ => return None,
        })
    }
}

/// Learner budget preset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Small networks and epochs that finish in minutes.
    Desk,
    /// Published network sizes and epoch counts.
    Full,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Full => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Budget {
    pub max_nodes: usize,
    pub max_env_steps: Option<usize>,
    pub wall_clock_s: Option<f64>,
}

/// Grid over one or two config keys.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<Value>,
    pub param2: Option<String>,
    pub values2: Vec<Value>,
    /// Mode run in every cell: `plan` (average progress) or `train`
    /// (average success).
    pub base: Mode,
}

impl SweepSpec {
    /// Grid cells as `(value, value2)` in row-major order.
    pub fn cells(&self) -> Vec<(Value, Option<Value>)> {
        let mut out = Vec::new();
        for v in &self.values {
            if self.param2.is_some() {
                for w in &self.values2 {
                    out.push((v.clone(), Some(w.clone())));
                }
            } else {
                out.push((v.clone(), None));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub task: TaskId,
    pub mode: Mode,
    pub preset: Preset,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub env_overrides: BTreeMap<String, ParamValue>,
    pub env: EnvModel,
    pub planner: PlannerParams,
    pub learner: TrainConfig,
    pub budget: Budget,
    pub sweep: Option<SweepSpec>,
    /// Source keys, for re-resolution after overrides.
    raw: BTreeMap<String, (Value, String)>,
}

impl PartialEq for ExperimentConfig {
    fn eq(&self, other: &Self) -> bool {
        self.to_toml() == other.to_toml()
    }
}

/// Node budget of the planner preset.
pub fn default_max_nodes(task: TaskId) -> usize {
    match task {
        TaskId::BoxPush1d => 1000,
        TaskId::BoxPush2d => 3000,
        TaskId::PlanarHand => 10_000,
    }
}

fn err(location: impl Into<String>, message: impl fmt::Display) -> HarnessError {
    HarnessError::Config {
        location: location.into(),
        message: message.to_string(),
    }
}

/// Line of `key` in `text`, honoring `[table]` headers.
fn locate(text: &str, key: &str) -> Option<usize> {
    let mut table = String::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = h.trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        let k: String = k.split('.').map(|p| p.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
        let full = if table.is_empty() { k } else { format!("{table}.{k}") };
        if full == key {
            return Some(i + 1);
        }
    }
    None
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn toml_to_json(v: &Value) -> Option<Json> {
    Some(match v {
        Value::String(s) => Json::String(s.clone()),
        Value::Integer(i) => Json::from(*i),
        Value::Float(f) => Json::Number(serde_json::Number::from_f64(*f)?),
        Value::Boolean(b) => Json::Bool(*b),
        Value::Array(a) => Json::Array(a.iter().map(toml_to_json).collect::<Option<_>>()?),
        Value::Datetime(_) | Value::Table(_) => return None,
    })
}

fn json_to_toml(v: &Json) -> Option<Value> {
    Some(match v {
        Json::Null => return None,
        Json::Bool(b) => Value::Boolean(*b),
        Json::Number(n) => match n.as_i64() {
            Some(i) if !n.is_f64() => Value::Integer(i),
            _ => Value::Float(n.as_f64()?),
        },
        Json::String(s) => Value::String(s.clone()),
        Json::Array(a) => Value::Array(a.iter().map(json_to_toml).collect::<Option<_>>()?),
        Json::Object(_) => return None,
    })
}

fn field_names<T: Serialize>(value: &T, hidden: &[&str]) -> Vec<String> {
    match serde_json::to_value(value).expect("plain struct") {
        Json::Object(m) => m.keys().filter(|k| !hidden.contains(&k.as_str())).cloned().collect(),
        _ => Vec::new(),
    }
}

const PLANNER_HIDDEN: &[&str] = &["max_nodes"];
const LEARNER_HIDDEN: &[&str] = &["max_env_steps"];

/// Sets `field` of a serde struct, trying `null` for the strings `none`
/// and `variable` when the literal does not fit.
fn set_field<T: Serialize + DeserializeOwned>(target: &T, field: &str, value: &Value, hidden: &[&str], location: &str) -> Result<T, HarnessError> {
    let mut obj = serde_json::to_value(target).expect("plain struct");
    let map = obj.as_object_mut().expect("struct serializes to an object");
    if !map.contains_key(field) || hidden.contains(&field) {
        return Err(err(location, "unknown key"));
    }
    let json = toml_to_json(value).ok_or_else(|| err(location, "unsupported value type"))?;
    map.insert(field.to_string(), json);
    match serde_json::from_value(obj.clone()) {
        Ok(v) => Ok(v),
        Err(e) => {
            if matches!(value.as_str(), Some("none" | "variable")) {
                obj.as_object_mut().unwrap().insert(field.to_string(), Json::Null);
                if let Ok(v) = serde_json::from_value(obj) {
                    return Ok(v);
                }
            }
            Err(err(location, format!("type mismatch: {e}")))
        }
    }
}

fn param_value(v: &Value) -> Option<ParamValue> {
    match v {
        Value::Integer(i) => Some(ParamValue::Num(*i as f64)),
        Value::Float(f) => Some(ParamValue::Num(*f)),
        Value::Array(a) => a.iter().map(|x| x.as_float().or(x.as_integer().map(|i| i as f64))).collect::<Option<Vec<_>>>().map(ParamValue::List),
        _ => None,
    }
}

fn as_usize(v: &Value, loc: &str) -> Result<usize, HarnessError> {
    v.as_integer()
        .filter(|i| *i >= 0)
        .map(|i| i as usize)
        .ok_or_else(|| err(loc, "expected a non-negative integer"))
}

fn as_str<'a>(v: &'a Value, loc: &str) -> Result<&'a str, HarnessError> {
    v.as_str().ok_or_else(|| err(loc, "expected a string"))
}

/// Letters `r`, `c`, `p`, `g` select random, continuation, proximity and
/// goal-directed actions with equal weight.
pub fn action_mix(letters: &str) -> Option<[f64; 4]> {
    let mut p = [0.0; 4];
    for c in letters.chars() {
        let i = "rcpg".find(c)?;
        p[i] = 1.0;
    }
    (p.iter().sum::<f64>() > 0.0).then_some(p)
}

/// Applies one planner or learner key, including the derived sweep keys
/// `planner.action_mix`, `planner.goal_split` and `planner.q_p_scale`.
fn apply_section_key(cfg: &mut ExperimentConfig, key: &str, value: &Value, loc: &str) -> Result<(), HarnessError> {
    let (section, field) = key.split_once('.').ok_or_else(|| err(loc, "unknown key"))?;
    match (section, field) {
        ("planner", "action_mix") => {
            let s = as_str(value, loc)?;
            cfg.planner.p_a = action_mix(s).ok_or_else(|| err(loc, "expected letters from r, c, p, g"))?;
        }
        ("planner", "goal_split") => {
            let n_g = as_usize(value, loc)?.max(1);
            let total = cfg.planner.n_g * cfg.planner.n_i;
            cfg.planner.n_g = n_g;
            cfg.planner.n_i = total.div_ceil(n_g).max(1);
        }
        ("planner", "q_p_scale") => {
            let f = value.as_float().or(value.as_integer().map(|i| i as f64)).ok_or_else(|| err(loc, "expected a number"))?;
            let base = PlannerParams::for_task(&cfg.env).q_p;
            cfg.planner.q_p = base.iter().map(|q| q * f).collect();
        }
        ("planner", f) => cfg.planner = set_field(&cfg.planner, f, value, PLANNER_HIDDEN, loc)?,
        ("learner", f) => cfg.learner = set_field(&cfg.learner, f, value, LEARNER_HIDDEN, loc)?,
        _ => return Err(err(loc, "unknown key")),
    }
    Ok(())
}

impl ExperimentConfig {
    fn resolve(raw: BTreeMap<String, (Value, String)>) -> Result<Self, HarnessError> {
        let get = |k: &str| raw.get(k);
        let task = match get("task") {
            Some((v, loc)) => as_str(v, loc)?.parse::<TaskId>().map_err(|e| err(loc.clone(), e))?,
            None => TaskId::BoxPush1d,
        };
        let mode = match get("mode") {
            Some((v, loc)) => Mode::parse(as_str(v, loc)?).ok_or_else(|| err(loc.clone(), "expected plan, train, sweep or pretrain-eval"))?,
            None => Mode::Plan,
        };
        let preset = match get("preset") {
            Some((v, loc)) => match as_str(v, loc)? {
                "desk" => Preset::Desk,
                "full" => Preset::Full,
                _ => return Err(err(loc.clone(), "expected desk or full")),
            },
            None => Preset::Desk,
        };
        let seeds = match get("seeds") {
            Some((Value::Array(a), loc)) => a.iter().map(|v| as_usize(v, loc).map(|s| s as u64)).collect::<Result<Vec<_>, _>>()?,
            Some((v, loc)) => vec![as_usize(v, loc)? as u64],
            None => (0..5).collect(),
        };
        if seeds.is_empty() {
            let loc = get("seeds").map(|(_, l)| l.clone()).unwrap_or_default();
            return Err(err(loc, "seeds must be nonempty"));
        }
        let workers = match get("workers") {
            Some((v, loc)) => as_usize(v, loc)?.max(1),
            None => 1,
        };

        let keys = param_keys(task);
        let mut env_overrides = BTreeMap::new();
        for (k, (v, loc)) in raw.range("env.".to_string()..) {
            let Some(name) = k.strip_prefix("env.") else { break };
            if !keys.iter().any(|p| p == name) {
                return Err(err(loc.clone(), format!("unknown environment parameter for {task}")));
            }
            let pv = param_value(v).ok_or_else(|| err(loc.clone(), "expected a number or a list of numbers"))?;
            env_overrides.insert(name.to_string(), pv);
        }
        let env = make_env(task, &env_overrides).map_err(|e| match &e {
            SimError::InvalidParam { key, .. } => err(raw.get(&format!("env.{key}")).map(|(_, l)| l.clone()).unwrap_or_else(|| format!("env.{key}")), e),
            _ => err("env", e),
        })?;

        let learner = match preset {
            Preset::Desk => TrainConfig::desk(&env),
            Preset::Full => TrainConfig::full(&env),
        };
        let mut cfg = Self {
            task,
            mode,
            preset,
            seeds,
            workers,
            env_overrides,
            planner: PlannerParams::for_task(&env),
            learner,
            env,
            budget: Budget {
                max_nodes: default_max_nodes(task),
                max_env_steps: None,
                wall_clock_s: None,
            },
            sweep: None,
            raw: BTreeMap::new(),
        };
        for (k, (v, loc)) in &raw {
            match k.as_str() {
                "budget.max_nodes" => cfg.budget.max_nodes = as_usize(v, loc)?,
                "budget.max_env_steps" => cfg.budget.max_env_steps = Some(as_usize(v, loc)?),
                "budget.wall_clock_s" => cfg.budget.wall_clock_s = Some(v.as_float().or(v.as_integer().map(|i| i as f64)).ok_or_else(|| err(loc.clone(), "expected seconds"))?),
                _ => {}
            }
        }
        if cfg.budget.max_nodes < 2 || cfg.budget.max_env_steps == Some(0) || cfg.budget.wall_clock_s.is_some_and(|w| !(w > 0.0)) {
            return Err(err("budget", "budgets must be positive (max_nodes at least 2)"));
        }
        for (k, (v, loc)) in &raw {
            if k.starts_with("planner.") || k.starts_with("learner.") {
                apply_section_key(&mut cfg, k, v, loc)?;
            }
        }
        if !raw.contains_key("planner.n_g") && !raw.contains_key("planner.goal_split") {
            // Enough selections for the node budget to bind.
            cfg.planner.n_g = cfg.planner.n_g.max(cfg.budget.max_nodes.div_ceil(cfg.planner.n_i.max(1)));
        }
        cfg.planner.max_nodes = Some(cfg.budget.max_nodes);
        cfg.learner.max_env_steps = cfg.budget.max_env_steps;

        let section_loc = |section: &str, key: &str| {
            let k = format!("{section}.{key}");
            raw.get(&k).map(|(_, l)| l.clone()).unwrap_or(k)
        };
        cfg.planner.validate(&cfg.env).map_err(|e| match &e {
            PlannerError::InvalidParam { key, .. } => err(section_loc("planner", key), e),
            _ => err("planner", e),
        })?;
        cfg.learner.validate(&cfg.env).map_err(|e| match &e {
            LearnerError::InvalidConfig { key, .. } => err(section_loc("learner", key), e),
            _ => err("learner", e),
        })?;

        let sweep_keys: Vec<&String> = raw.keys().filter(|k| k.starts_with("sweep.")).collect();
        if !sweep_keys.is_empty() || mode == Mode::Sweep {
            cfg.sweep = Some(Self::resolve_sweep(&cfg, &raw)?);
        }
        for (k, (_, loc)) in &raw {
            let known_top = ["task", "mode", "preset", "seeds", "workers"].contains(&k.as_str());
            let known_section = ["env.", "planner.", "learner.", "budget.", "sweep."].iter().any(|p| k.starts_with(p));
            let known_budget = !k.starts_with("budget.") || ["budget.max_nodes", "budget.max_env_steps", "budget.wall_clock_s"].contains(&k.as_str());
            if !(known_top || known_section) || !known_budget {
                return Err(err(loc.clone(), "unknown key"));
            }
        }
        cfg.raw = raw;
        Ok(cfg)
    }

    fn resolve_sweep(cfg: &Self, raw: &BTreeMap<String, (Value, String)>) -> Result<SweepSpec, HarnessError> {
        let missing = |k: &str| err(k, "required for sweeps");
        let (param, ploc) = raw.get("sweep.param").ok_or_else(|| missing("sweep.param"))?;
        let param = as_str(param, ploc)?.to_string();
        let values = match raw.get("sweep.values") {
            Some((Value::Array(a), _)) if !a.is_empty() => a.clone(),
            Some((_, loc)) => return Err(err(loc.clone(), "expected a nonempty array")),
            None => return Err(missing("sweep.values")),
        };
        let (param2, values2) = match raw.get("sweep.param2") {
            Some((p, loc)) => {
                let p = as_str(p, loc)?.to_string();
                match raw.get("sweep.values2") {
                    Some((Value::Array(a), _)) if !a.is_empty() => (Some(p), a.clone()),
                    Some((_, loc)) => return Err(err(loc.clone(), "expected a nonempty array")),
                    None => return Err(missing("sweep.values2")),
                }
            }
            None => (None, Vec::new()),
        };
        let base = match raw.get("sweep.base") {
            Some((v, loc)) => match as_str(v, loc)? {
                "plan" => Mode::Plan,
                "train" => Mode::Train,
                _ => return Err(err(loc.clone(), "expected plan or train")),
            },
            None => Mode::Plan,
        };
        for k in raw.keys().filter(|k| k.starts_with("sweep.")) {
            if !["sweep.param", "sweep.values", "sweep.param2", "sweep.values2", "sweep.base"].contains(&k.as_str()) {
                return Err(err(raw[k].1.clone(), "unknown key"));
            }
        }
        let spec = SweepSpec {
            param,
            values,
            param2,
            values2,
            base,
        };
        for (i, (v, w)) in spec.cells().into_iter().enumerate() {
            cfg.cell(&spec, &v, w.as_ref()).map_err(|e| match e {
                HarnessError::Config { location, message } => err(format!("sweep cell {i} ({location})"), message),
                other => other,
            })?;
        }
        Ok(spec)
    }

    /// Copy of this config with one sweep cell's values applied.
    pub fn cell(&self, spec: &SweepSpec, value: &Value, value2: Option<&Value>) -> Result<ExperimentConfig, HarnessError> {
        let mut raw = self.raw.clone();
        raw.retain(|k, _| !k.starts_with("sweep."));
        raw.insert("mode".into(), (Value::String(spec.base.as_str().into()), "sweep.base".into()));
        let mut c = Self::resolve(raw)?;
        c.set(&spec.param, value.clone(), "sweep.param")?;
        if let (Some(p), Some(v)) = (&spec.param2, value2) {
            c.set(p, v.clone(), "sweep.param2")?;
        }
        Ok(c)
    }

    /// Overrides one dotted key and re-resolves the whole config.
    pub fn set(&mut self, key: &str, value: Value, location: &str) -> Result<(), HarnessError> {
        let key = canonical_key(key, &self.env).map_err(|m| err(location, m))?;
        let mut raw = self.raw.clone();
        let derived = matches!(key.as_str(), "planner.action_mix" | "planner.goal_split" | "planner.q_p_scale");
        if derived {
            // Derived keys act on the resolved values and are not stored.
            let sweep = self.sweep.take();
            apply_section_key(self, &key, &value, location)?;
            self.raw = Self::raw_from_resolved(self);
            self.sweep = sweep;
            self.raw.extend(raw.into_iter().filter(|(k, _)| k.starts_with("sweep.")));
            return Ok(());
        }
        raw.insert(key, (value, location.to_string()));
        *self = Self::resolve(raw)?;
        Ok(())
    }

    /// Applies several `(key, value, location)` overrides, resolving once so
    /// that keys which only validate together (sweep grids) can be set.
    pub fn set_all(&mut self, items: Vec<(String, Value, String)>) -> Result<(), HarnessError> {
        let mut raw = self.raw.clone();
        let mut derived = Vec::new();
        for (key, value, loc) in items {
            let key = canonical_key(&key, &self.env).map_err(|m| err(loc.clone(), m))?;
            if matches!(key.as_str(), "planner.action_mix" | "planner.goal_split" | "planner.q_p_scale") {
                derived.push((key, value, loc));
            } else {
                raw.insert(key, (value, loc));
            }
        }
        *self = Self::resolve(raw)?;
        for (key, value, loc) in derived {
            self.set(&key, value, &loc)?;
        }
        Ok(())
    }

    fn raw_from_resolved(cfg: &Self) -> BTreeMap<String, (Value, String)> {
        cfg.entries().into_iter().map(|(k, v)| (k.clone(), (v, k))).collect()
    }

    /// Every resolved key with its value, sorted.
    pub fn entries(&self) -> Vec<(String, Value)> {
        let mut out: BTreeMap<String, Value> = BTreeMap::new();
        out.insert("task".into(), Value::String(self.task.as_str().into()));
        out.insert("mode".into(), Value::String(self.mode.as_str().into()));
        out.insert("preset".into(), Value::String(self.preset.as_str().into()));
        out.insert("seeds".into(), Value::Array(self.seeds.iter().map(|s| Value::Integer(*s as i64)).collect()));
        out.insert("workers".into(), Value::Integer(self.workers as i64));
        for (k, v) in &self.env_overrides {
            let v = match v {
                ParamValue::Num(x) => Value::Float(*x),
                ParamValue::List(xs) => Value::Array(xs.iter().map(|x| Value::Float(*x)).collect()),
            };
            out.insert(format!("env.{k}"), v);
        }
        for (section, json, hidden) in [
            ("planner", serde_json::to_value(&self.planner).unwrap(), PLANNER_HIDDEN),
            ("learner", serde_json::to_value(&self.learner).unwrap(), LEARNER_HIDDEN),
        ] {
            for (k, v) in json.as_object().unwrap() {
                if hidden.contains(&k.as_str()) {
                    continue;
                }
                if let Some(t) = json_to_toml(v) {
                    out.insert(format!("{section}.{k}"), t);
                }
            }
        }
        out.insert("budget.max_nodes".into(), Value::Integer(self.budget.max_nodes as i64));
        if let Some(m) = self.budget.max_env_steps {
            out.insert("budget.max_env_steps".into(), Value::Integer(m as i64));
        }
        if let Some(w) = self.budget.wall_clock_s {
            out.insert("budget.wall_clock_s".into(), Value::Float(w));
        }
        if let Some(s) = &self.sweep {
            out.insert("sweep.param".into(), Value::String(s.param.clone()));
            out.insert("sweep.values".into(), Value::Array(s.values.clone()));
            if let Some(p) = &s.param2 {
                out.insert("sweep.param2".into(), Value::String(p.clone()));
                out.insert("sweep.values2".into(), Value::Array(s.values2.clone()));
            }
            out.insert("sweep.base".into(), Value::String(s.base.as_str().into()));
        }
        out.into_iter().collect()
    }

    /// Canonical snapshot: every resolved key, sorted, one per line.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

/// Full dotted key for `key`, expanding unambiguous bare field names.
fn canonical_key(key: &str, env: &EnvModel) -> Result<String, String> {
    if key.contains('.') || ["task", "mode", "preset", "seeds", "workers"].contains(&key) {
        return Ok(key.to_string());
    }
    let mut hits = Vec::new();
    if field_names(&PlannerParams::for_task(env), PLANNER_HIDDEN).iter().any(|f| f == key) {
        hits.push(format!("planner.{key}"));
    }
    if field_names(&TrainConfig::desk(env), LEARNER_HIDDEN).iter().any(|f| f == key) {
        hits.push(format!("learner.{key}"));
    }
    if param_keys(env.task).iter().any(|f| f == key) {
        hits.push(format!("env.{key}"));
    }
    match hits.len() {
        0 => Err("unknown key".into()),
        1 => Ok(hits.pop().unwrap()),
        _ => Err(format!("ambiguous key, use one of {}", hits.join(", "))),
    }
}

/// Strict parse of a configuration text. Errors carry `line N (key)`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| text[..s.start].lines().count().max(1));
        err(line.map_or("config".into(), |l| format!("line {l}")), e.message())
    })?;
    let mut flat = Vec::new();
    flatten("", &table, &mut flat);
    let loc = |k: &str| locate(text, k).map_or(k.to_string(), |l| format!("line {l} ({k})"));

    let task = flat.iter().find(|(k, _)| k == "task").and_then(|(_, v)| v.as_str()).unwrap_or("box_push_1d");
    let task: TaskId = task.parse().map_err(|e: SimError| err(loc("task"), e))?;
    let env = make_env(task, &BTreeMap::new()).expect("bundled defaults are valid");

    let mut raw = BTreeMap::new();
    for (k, v) in flat {
        let key = canonical_key(&k, &env).map_err(|m| err(loc(&k), m))?;
        if raw.insert(key.clone(), (v, loc(&k))).is_some() {
            return Err(err(loc(&k), format!("duplicate key {key}")));
        }
    }
    ExperimentConfig::resolve(raw)
}

/// Parses a `--set` value as TOML, falling back to a bare string.
pub fn parse_value(text: &str) -> Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}
