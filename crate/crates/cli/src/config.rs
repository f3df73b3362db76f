use std::fmt;

use reach_avoid::certify::ExhaustiveOptions;
use reach_avoid::env::{EnvironmentSpec, State, System, PRESET_NAMES};
use reach_avoid::neural::{Objective, TrainConfig};
use reach_avoid::tabular::{Grid, Lookup, QLearningConfig, Schedule};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Invalid or unreadable experiment configuration.
#[derive(Debug)]
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

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    ValueIteration,
    TabularQ,
    Ddqn,
    MinimaxDdqn,
    SumBaseline,
}

impl SolverKind {
    const NAMES: [&'static str; 5] = ["value-iteration", "tabular-q", "ddqn", "minimax-ddqn", "sum-baseline"];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::ValueIteration => "value-iteration",
            SolverKind::TabularQ => "tabular-q",
            SolverKind::Ddqn => "ddqn",
            SolverKind::MinimaxDdqn => "minimax-ddqn",
            SolverKind::SumBaseline => "sum-baseline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub counts: Vec<usize>,
    pub lookup: Lookup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueIterationSection {
    pub gamma: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    /// Rollout length used by every certification check.
    pub horizon: usize,
    /// Grid of probe states for confusion reports.
    pub probe_counts: Vec<usize>,
    /// Grid of start states for success ratios logged during training.
    pub validation_counts: Vec<usize>,
    /// Discount factors of the nesting report; empty disables it.
    pub gamma_ladder: Vec<f64>,
    pub ladder_reference: f64,
    pub ladder_tol: f64,
    /// Samples per free axis when slicing a network.
    pub slice_resolution: [usize; 2],
    pub exhaustive: ExhaustiveOptions,
    /// Start states validated exhaustively during `evaluate`.
    pub exhaustive_starts: Vec<Vec<f64>>,
}

/// A fully resolved experiment: every default filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub solver: SolverKind,
    pub out_dir: Option<String>,
    pub preset: String,
    pub environment: EnvironmentSpec,
    pub grid: GridSection,
    pub value_iteration: ValueIterationSection,
    pub tabular_q: QLearningConfig,
    pub train: TrainConfig,
    pub certify: CertifySection,
}

const TOP_LEVEL: [&str; 9] = ["seed", "solver", "out_dir", "environment", "grid", "value_iteration", "tabular_q", "train", "certify"];

fn to_value<T: Serialize>(x: &T) -> Value {
    Value::try_from(x).expect("defaults serialize to TOML")
}

/// Overlay `user` onto `base`. Keys absent from `base` are rejected, except
/// under a tagged table whose `kind` the user changes, which is replaced whole.
fn overlay(base: &mut Value, user: Value, path: &str) -> Result<(), ConfigError> {
    match (base, user) {
        (Value::Table(b), Value::Table(u)) => {
            if let (Some(bk), Some(uk)) = (b.get("kind"), u.get("kind")) {
                if bk != uk {
                    *b = u;
                    return Ok(());
                }
            }
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v, &format!("{path}.{k}"))?,
                    None => return err(format!("unknown field `{path}.{k}`")),
                }
            }
            Ok(())
        }
        (Value::Float(slot), Value::Integer(i)) => {
            *slot = i as f64;
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

fn section<T: Serialize + DeserializeOwned>(defaults: &T, user: Option<Value>, path: &str) -> Result<T, ConfigError> {
    let mut value = to_value(defaults);
    if let Some(user) = user {
        if !user.is_table() {
            return err(format!("`{path}` must be a table"));
        }
        overlay(&mut value, user, path)?;
    }
    value.try_into().map_err(|e: toml::de::Error| ConfigError(format!("{path}: {}", e.message())))
}

fn default_counts(env: &EnvironmentSpec) -> Vec<usize> {
    match env.state_dim() {
        2 => vec![81, 241],
        3 => vec![61, 61, 60],
        n => vec![8; n],
    }
}

fn coarse_counts(env: &EnvironmentSpec, fine: bool) -> Vec<usize> {
    match (env.state_dim(), fine) {
        (2, true) => vec![41, 121],
        (2, false) => vec![21, 61],
        (3, true) => vec![21, 21, 12],
        (3, false) => vec![11, 11, 8],
        (n, _) => vec![3; n],
    }
}

fn train_defaults(env: &EnvironmentSpec, solver: SolverKind, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::defaults_for(env);
    match solver {
        SolverKind::Ddqn => cfg.objective = Objective::ReachAvoid,
        SolverKind::MinimaxDdqn => cfg.objective = Objective::Minimax,
        SolverKind::SumBaseline => {
            cfg.objective = Objective::SumCost { penalty: 0.1 };
            cfg.gamma = Schedule::constant(0.95);
        }
        _ => {}
    }
    cfg.seed = seed;
    cfg
}

impl ExperimentConfig {
    /// Parse and resolve a TOML config; `seed` overrides the file's seed.
    pub fn resolve(text: &str, seed: Option<u64>) -> Result<Self, ConfigError> {
        let mut raw: Table = text.parse().map_err(|e: toml::de::Error| ConfigError(format!("config: {e}")))?;
        if let Some(k) = raw.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
            return err(format!("unknown field `{k}`"));
        }
        let file_seed = match raw.remove("seed") {
            None => 0,
            Some(Value::Integer(s)) if s >= 0 => s as u64,
            Some(v) => return err(format!("seed: expected a non-negative integer, got {v}")),
        };
        let seed = seed.unwrap_or(file_seed);
        let solver = match raw.remove("solver") {
            Some(Value::String(s)) => match SolverKind::NAMES.iter().position(|n| *n == s) {
                Some(_) => Value::String(s).try_into::<SolverKind>().expect("known solver name"),
                None => return err(format!("solver: unknown solver `{s}` (expected one of {})", SolverKind::NAMES.join(", "))),
            },
            Some(v) => return err(format!("solver: expected a string, got {v}")),
            None => return err("solver: missing"),
        };
        let out_dir = match raw.remove("out_dir") {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(v) => return err(format!("out_dir: expected a string, got {v}")),
        };

        let mut env_table = match raw.remove("environment") {
            Some(Value::Table(t)) => t,
            Some(_) => return err("environment: must be a table"),
            None => return err("environment: missing"),
        };
        let preset = match env_table.remove("preset") {
            Some(Value::String(s)) => s,
            _ => return err("environment.preset: missing or not a string"),
        };
        let base = EnvironmentSpec::preset(&preset)
            .map_err(|_| ConfigError(format!("environment.preset: unknown preset `{preset}` (expected one of {})", PRESET_NAMES.join(", "))))?;
        let environment: EnvironmentSpec = section(&base, Some(Value::Table(env_table)), "environment")?;
        environment.validate().map_err(|e| ConfigError(format!("environment: {e}")))?;
        let is_game = matches!(environment.system, System::AttackDefense(_));
        match (solver, is_game) {
            (SolverKind::MinimaxDdqn, false) => return err("solver: minimax-ddqn needs the attack-defense environment"),
            (s, true) if s != SolverKind::MinimaxDdqn => {
                return err(format!("solver: {} does not handle the two-player attack-defense game; use minimax-ddqn", s.name()))
            }
            _ => {}
        }

        let grid = section(&GridSection { counts: default_counts(&environment), lookup: Lookup::Snap }, raw.remove("grid"), "grid")?;
        Grid::for_env(&environment, grid.counts.clone()).map_err(|e| ConfigError(format!("grid.counts: {e}")))?;
        let value_iteration = section(
            &ValueIterationSection { gamma: 0.9999, tol: 1e-6, max_sweeps: 200_000 },
            raw.remove("value_iteration"),
            "value_iteration",
        )?;
        if !(value_iteration.gamma > 0.0 && value_iteration.gamma < 1.0) {
            return err(format!("value_iteration.gamma: {} outside (0, 1)", value_iteration.gamma));
        }
        let mut tabular_q = section(&QLearningConfig::new(2_000_000, environment.horizon, seed), raw.remove("tabular_q"), "tabular_q")?;
        tabular_q.seed = seed;
        let mut train = section(&train_defaults(&environment, solver, seed), raw.remove("train"), "train")?;
        train.seed = seed;
        train.validate(&environment).map_err(|e| ConfigError(format!("train: {e}")))?;
        let certify = section(
            &CertifySection {
                horizon: environment.horizon,
                probe_counts: coarse_counts(&environment, true),
                validation_counts: coarse_counts(&environment, false),
                gamma_ladder: Vec::new(),
                ladder_reference: 0.999999,
                ladder_tol: 1e-9,
                slice_resolution: [101, 101],
                exhaustive: ExhaustiveOptions::default(),
                exhaustive_starts: Vec::new(),
            },
            raw.remove("certify"),
            "certify",
        )?;
        if certify.horizon == 0 {
            return err("certify.horizon: must be at least 1");
        }
        for (key, counts) in [("probe_counts", &certify.probe_counts), ("validation_counts", &certify.validation_counts)] {
            Grid::for_env(&environment, counts.clone()).map_err(|e| ConfigError(format!("certify.{key}: {e}")))?;
        }
        if let Some(s) = certify.exhaustive_starts.iter().find(|s| s.len() != environment.state_dim()) {
            return err(format!("certify.exhaustive_starts: state {s:?} has the wrong dimension"));
        }
        Ok(Self { seed, solver, out_dir, preset, environment, grid, value_iteration, tabular_q, train, certify })
    }

    /// The resolved config as TOML; resolving it again yields `self`.
    pub fn to_toml(&self) -> String {
        let mut env = to_value(&self.environment);
        if let Value::Table(t) = &mut env {
            t.insert("preset".into(), Value::String(self.preset.clone()));
        }
        let mut top = Table::new();
        top.insert("seed".into(), Value::Integer(self.seed as i64));
        top.insert("solver".into(), Value::String(self.solver.name().into()));
        if let Some(dir) = &self.out_dir {
            top.insert("out_dir".into(), Value::String(dir.clone()));
        }
        top.insert("environment".into(), env);
        top.insert("grid".into(), to_value(&self.grid));
        top.insert("value_iteration".into(), to_value(&self.value_iteration));
        top.insert("tabular_q".into(), to_value(&self.tabular_q));
        top.insert("train".into(), to_value(&self.train));
        top.insert("certify".into(), to_value(&self.certify));
        toml::to_string(&top).expect("resolved config serializes")
    }

    pub fn grid(&self) -> Grid {
        Grid::for_env(&self.environment, self.grid.counts.clone()).expect("validated during resolution")
    }

    /// Cell centers of a grid over the environment domain.
    pub fn grid_states(&self, counts: &[usize]) -> Vec<State> {
        let grid = Grid::for_env(&self.environment, counts.to_vec()).expect("validated during resolution");
        (0..grid.n_cells()).map(|c| State::from_vector(grid.center(c))).collect()
    }

    pub fn default_out_dir(&self) -> String {
        format!("runs/{}-{}-seed{}", self.environment.name, self.solver.name(), self.seed)
    }
}
