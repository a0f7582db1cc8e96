use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{SimError, SystemState};

const TASKS_TOML: &str = include_str!("../../config/tasks.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    BoxPush1d,
    BoxPush2d,
    PlanarHand,
}

impl TaskId {
    pub const ALL: [TaskId; 3] = [TaskId::BoxPush1d, TaskId::BoxPush2d, TaskId::PlanarHand];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::BoxPush1d => "box_push_1d",
            TaskId::BoxPush2d => "box_push_2d",
            TaskId::PlanarHand => "planar_hand",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "box_push_1d" => Ok(TaskId::BoxPush1d),
            "box_push_2d" => Ok(TaskId::BoxPush2d),
            "planar_hand" => Ok(TaskId::PlanarHand),
            other => Err(SimError::UnknownTask(other.to_string())),
        }
    }
}

/// Compliant contact constants shared by every body pair of a task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub stiffness: f64,
    pub damping: f64,
    pub friction: f64,
    pub tangential_damping: f64,
    pub ground_friction: f64,
    pub ground_damping: f64,
}

/// Body shapes of a task. Boxes are axis-aligned for the pushing tasks and
/// oriented for the hand; fingers are chains of contact circles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Push1d {
        pusher_half: f64,
        object_half: f64,
    },
    Push2d {
        pusher_half: [f64; 2],
        object_half: [f64; 2],
    },
    Hand {
        finger_bases: [[f64; 2]; 2],
        link_length: f64,
        tip_radius: f64,
        link_circles: usize,
        box_half: [f64; 2],
    },
}

/// A fully parameterized planar task. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvModel {
    pub task: TaskId,
    pub n_r: usize,
    pub n_o: usize,
    pub state_min: Vec<f64>,
    pub state_max: Vec<f64>,
    pub robot_inertia: Vec<f64>,
    pub object_mass: f64,
    pub object_inertia: f64,
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub dt_c: f64,
    pub dt_a: f64,
    pub contact: ContactParams,
    pub gravity: f64,
    pub geometry: Geometry,
    pub start: SystemState,
    pub goal: SystemState,
    pub start_noise: Vec<f64>,
    pub goal_noise: Vec<f64>,
    pub alpha_max: Vec<f64>,
    pub penetration_tol: f64,
    pub sample_retries: usize,
}

/// Value of a single environment parameter override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    List(Vec<f64>),
}

impl ParamValue {
    fn to_toml(&self) -> toml::Value {
        match self {
            ParamValue::Num(v) => toml::Value::Float(*v),
            ParamValue::List(v) => toml::Value::Array(v.iter().map(|x| toml::Value::Float(*x)).collect()),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(v) => write!(f, "{v:?}"),
            ParamValue::List(v) => {
                f.write_str("[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x:?}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl EnvModel {
    pub fn n_s(&self) -> usize {
        2 * (self.n_r + self.n_o)
    }

    /// Number of proximity sensors.
    pub fn n_p(&self) -> usize {
        match self.geometry {
            Geometry::Push1d { .. } | Geometry::Push2d { .. } => 1,
            Geometry::Hand { .. } => 2,
        }
    }

    /// Number of control substeps per base action step.
    pub fn substeps_per_action(&self) -> usize {
        (self.dt_a / self.dt_c).round() as usize
    }

    pub fn joint_min(&self) -> &[f64] {
        &self.state_min[..self.n_r]
    }

    pub fn joint_max(&self) -> &[f64] {
        &self.state_max[..self.n_r]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |key: &str, reason: String| SimError::InvalidParam {
            key: key.to_string(),
            reason,
        };
        let n_s = self.n_s();
        for (key, len, want) in [
            ("state_min", self.state_min.len(), n_s),
            ("state_max", self.state_max.len(), n_s),
            ("start_noise", self.start_noise.len(), n_s),
            ("goal_noise", self.goal_noise.len(), n_s),
            ("kp", self.kp.len(), self.n_r),
            ("kd", self.kd.len(), self.n_r),
            ("robot_inertia", self.robot_inertia.len(), self.n_r),
            ("alpha_max", self.alpha_max.len(), self.n_r),
        ] {
            if len != want {
                return Err(bad(key, format!("expected {want} entries, got {len}")));
            }
        }
        if !(self.dt_c > 0.0 && self.dt_c.is_finite()) {
            return Err(bad("dt_c", "must be positive".into()));
        }
        if self.dt_c > self.dt_a {
            return Err(bad("dt_c", format!("dt_c = {} exceeds dt_a = {}", self.dt_c, self.dt_a)));
        }
        let ratio = self.dt_a / self.dt_c;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(bad("dt_a", format!("dt_a = {} is not an integer multiple of dt_c = {}", self.dt_a, self.dt_c)));
        }
        for i in 0..n_s {
            if !(self.state_min[i] <= self.state_max[i]) {
                return Err(bad("state_min", format!("coordinate {i}: min {} > max {}", self.state_min[i], self.state_max[i])));
            }
        }
        if !(self.contact.stiffness > 0.0) {
            return Err(bad("contact_stiffness", "must be positive".into()));
        }
        for (key, v) in [
            ("contact_damping", self.contact.damping),
            ("contact_friction", self.contact.friction),
            ("contact_tangential_damping", self.contact.tangential_damping),
            ("ground_friction", self.contact.ground_friction),
            ("ground_damping", self.contact.ground_damping),
            ("gravity", self.gravity),
            ("penetration_tol", self.penetration_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(key, format!("must be finite and non-negative, got {v}")));
            }
        }
        if !(self.object_mass > 0.0) {
            return Err(bad("object_mass", "must be positive".into()));
        }
        if matches!(self.geometry, Geometry::Hand { .. }) && !(self.object_inertia > 0.0) {
            return Err(bad("object_inertia", "must be positive".into()));
        }
        if self.robot_inertia.iter().any(|m| !(*m > 0.0)) {
            return Err(bad("robot_inertia", "must be positive".into()));
        }
        if self.kp.iter().chain(&self.kd).any(|g| !(*g >= 0.0)) {
            return Err(bad("kp", "gains must be non-negative".into()));
        }
        if self.alpha_max.iter().any(|a| !(*a >= 0.0)) {
            return Err(bad("alpha_max", "must be non-negative".into()));
        }
        if self.sample_retries == 0 {
            return Err(bad("sample_retries", "must be at least 1".into()));
        }
        Ok(())
    }
}

/// Build a task environment from the bundled defaults plus `overrides`.
pub fn make_env(task: TaskId, overrides: &BTreeMap<String, ParamValue>) -> Result<EnvModel, SimError> {
    let root: toml::Table = TASKS_TOML.parse().expect("bundled task table is valid TOML");
    let mut table = root
        .get(task.as_str())
        .and_then(|v| v.as_table())
        .cloned()
        .expect("bundled task table has every task");
    for (key, value) in overrides {
        if !table.contains_key(key) {
            return Err(SimError::InvalidParam {
                key: key.clone(),
                reason: format!("not a parameter of {task}"),
            });
        }
        table.insert(key.clone(), value.to_toml());
    }
    let env = build(task, &table)?;
    env.validate()?;
    Ok(env)
}

/// Same as [`make_env`] but looks the task up by name.
pub fn make_env_by_name(name: &str, overrides: &BTreeMap<String, ParamValue>) -> Result<EnvModel, SimError> {
    make_env(name.parse()?, overrides)
}

struct Reader<'a> {
    table: &'a toml::Table,
}

impl Reader<'_> {
    fn num(&self, key: &str) -> Result<f64, SimError> {
        match self.table.get(key) {
            Some(toml::Value::Float(v)) => Ok(*v),
            Some(toml::Value::Integer(v)) => Ok(*v as f64),
            Some(_) => Err(SimError::InvalidParam {
                key: key.into(),
                reason: "expected a number".into(),
            }),
            None => Err(SimError::InvalidParam {
                key: key.into(),
                reason: "missing".into(),
            }),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, SimError> {
        let err = |reason: &str| SimError::InvalidParam {
            key: key.into(),
            reason: reason.into(),
        };
        match self.table.get(key) {
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Float(x) => Ok(*x),
                    toml::Value::Integer(x) => Ok(*x as f64),
                    _ => Err(err("expected a list of numbers")),
                })
                .collect(),
            Some(toml::Value::Float(v)) => Ok(vec![*v]),
            Some(toml::Value::Integer(v)) => Ok(vec![*v as f64]),
            Some(_) => Err(err("expected a list of numbers")),
            None => Err(err("missing")),
        }
    }

    fn pair(&self, key: &str) -> Result<[f64; 2], SimError> {
        let v = self.list(key)?;
        if v.len() != 2 {
            return Err(SimError::InvalidParam {
                key: key.into(),
                reason: format!("expected 2 entries, got {}", v.len()),
            });
        }
        Ok([v[0], v[1]])
    }

    fn state(&self, key: &str, n_r: usize, n_o: usize) -> Result<SystemState, SimError> {
        SystemState::from_flat(n_r, n_o, self.list(key)?).map_err(|e| SimError::InvalidParam {
            key: key.into(),
            reason: e.to_string(),
        })
    }
}

fn build(task: TaskId, table: &toml::Table) -> Result<EnvModel, SimError> {
    let r = Reader { table };
    let (n_r, n_o, geometry) = match task {
        TaskId::BoxPush1d => (
            1,
            1,
            Geometry::Push1d {
                pusher_half: r.num("pusher_half")?,
                object_half: r.num("object_half")?,
            },
        ),
        TaskId::BoxPush2d => (
            2,
            2,
            Geometry::Push2d {
                pusher_half: r.pair("pusher_half")?,
                object_half: r.pair("object_half")?,
            },
        ),
        TaskId::PlanarHand => {
            let bases = r.list("finger_bases")?;
            if bases.len() != 4 {
                return Err(SimError::InvalidParam {
                    key: "finger_bases".into(),
                    reason: "expected 4 entries".into(),
                });
            }
            let circles = r.num("link_circles")?;
            if circles < 1.0 || circles.fract() != 0.0 {
                return Err(SimError::InvalidParam {
                    key: "link_circles".into(),
                    reason: "must be a positive integer".into(),
                });
            }
            (
                4,
                3,
                Geometry::Hand {
                    finger_bases: [[bases[0], bases[1]], [bases[2], bases[3]]],
                    link_length: r.num("link_length")?,
                    tip_radius: r.num("tip_radius")?,
                    link_circles: circles as usize,
                    box_half: r.pair("box_half")?,
                },
            )
        }
    };
    let retries = r.num("sample_retries")?;
    if retries < 0.0 || retries.fract() != 0.0 {
        return Err(SimError::InvalidParam {
            key: "sample_retries".into(),
            reason: "must be a non-negative integer".into(),
        });
    }
    Ok(EnvModel {
        task,
        n_r,
        n_o,
        state_min: r.list("state_min")?,
        state_max: r.list("state_max")?,
        robot_inertia: r.list("robot_inertia")?,
        object_mass: r.num("object_mass")?,
        object_inertia: r.num("object_inertia")?,
        kp: r.list("kp")?,
        kd: r.list("kd")?,
        dt_c: r.num("dt_c")?,
        dt_a: r.num("dt_a")?,
        contact: ContactParams {
            stiffness: r.num("contact_stiffness")?,
            damping: r.num("contact_damping")?,
            friction: r.num("contact_friction")?,
            tangential_damping: r.num("contact_tangential_damping")?,
            ground_friction: r.num("ground_friction")?,
            ground_damping: r.num("ground_damping")?,
        },
        gravity: r.num("gravity")?,
        geometry,
        start: r.state("start", n_r, n_o)?,
        goal: r.state("goal", n_r, n_o)?,
        start_noise: r.list("start_noise")?,
        goal_noise: r.list("goal_noise")?,
        alpha_max: r.list("alpha_max")?,
        penetration_tol: r.num("penetration_tol")?,
        sample_retries: retries as usize,
    })
}

/// Parameter keys accepted by [`make_env`] for a task.
pub fn param_keys(task: TaskId) -> Vec<String> {
    let root: toml::Table = TASKS_TOML.parse().expect("bundled task table is valid TOML");
    root[task.as_str()].as_table().map(|t| t.keys().cloned().collect()).unwrap_or_default()
}
