//! Benchmark dynamical systems with target and safety margins.
//!
//! Every environment exposes the same contract: a finite control set, a
//! deterministic one-step integrator, and a pair of margins `(l, g)` with
//! `l(s) <= 0` exactly on the target set and `g(s) > 0` exactly on the
//! failure set.

mod attack_defense;
mod dubins;
pub mod geometry;
mod lander;
mod particle;

use std::f64::consts::TAU;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};
use thiserror::Error;

pub use attack_defense::AttackDefenseParams;
pub use dubins::{unicycle_arc, DubinsParams};
pub use geometry::{BoxSpec, Polygon};
pub use lander::LanderParams;
pub use particle::ParticleParams;

use lander::LANDER_CONTROLS;
use particle::PARTICLE_CONTROLS;

pub type Vector = SmallVec<[f64; 6]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("state has dimension {got}, environment `{env}` expects {expected}")]
    DimensionMismatch { env: String, expected: usize, got: usize },
    #[error("control {control:?} is not in the control set of `{env}`")]
    UnknownControl { env: String, control: Vec<f64> },
    #[error("action index {index} out of range, `{env}` has {count} actions")]
    ActionOutOfRange { env: String, index: usize, count: usize },
    #[error("state contains non-finite entries: {0:?}")]
    NonFinite(Vec<f64>),
    #[error("invalid environment `{env}`: {reason}")]
    Invalid { env: String, reason: String },
    #[error("unknown environment `{0}`")]
    UnknownPreset(String),
}

/// A point in the state space of one environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(Vector);

impl State {
    pub fn new(coords: &[f64]) -> Self {
        Self(SmallVec::from_slice(coords))
    }

    pub fn from_vector(coords: Vector) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Deref for State {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for State {
    fn from(v: Vec<f64>) -> Self {
        Self(SmallVec::from_vec(v))
    }
}

impl From<&[f64]> for State {
    fn from(v: &[f64]) -> Self {
        Self::new(v)
    }
}

/// Target margin `l` and safety margin `g` at one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub l: f64,
    pub g: f64,
}

impl Margins {
    pub fn in_target(&self) -> bool {
        self.l <= 0.0
    }

    pub fn in_failure(&self) -> bool {
        self.g > 0.0
    }

    /// Payoff of the trajectory truncated to a single step, `max{l, g}`.
    pub fn one_step(&self) -> f64 {
        self.l.max(self.g)
    }
}

/// Finite list of control vectors; actions are referred to by index.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSet {
    actions: Vec<SmallVec<[f64; 2]>>,
}

impl ControlSet {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&[f64]> {
        self.actions.get(index).map(|a| a.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.actions.iter().map(|a| a.as_slice())
    }

    pub fn index_of(&self, control: &[f64]) -> Option<usize> {
        self.actions.iter().position(|a| {
            a.len() == control.len() && a.iter().zip(control).all(|(x, y)| (x - y).abs() <= 1e-12)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

/// The ordinary differential equation and margin geometry of one benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum System {
    Particle(ParticleParams),
    Dubins(DubinsParams),
    Lander(LanderParams),
    AttackDefense(AttackDefenseParams),
}

impl System {
    pub fn state_dim(&self) -> usize {
        match self {
            System::Particle(_) => 2,
            System::Dubins(_) => 3,
            System::Lander(_) | System::AttackDefense(_) => 6,
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            System::Particle(_) | System::Dubins(_) => 3,
            System::Lander(_) => 4,
            System::AttackDefense(p) => p.n_attacker() * p.n_defender(),
        }
    }

    pub fn control(&self, action: usize) -> SmallVec<[f64; 2]> {
        match self {
            System::Particle(_) => smallvec![PARTICLE_CONTROLS[action]],
            System::Dubins(p) => smallvec![p.control(action)],
            System::Lander(_) => SmallVec::from_slice(&LANDER_CONTROLS[action]),
            System::AttackDefense(p) => {
                let (a, d) = p.split_action(action);
                smallvec![p.attacker_turn_rates[a], p.defender_turn_rates[d]]
            }
        }
    }

    fn derivative(&self, s: &[f64], action: usize, out: &mut [f64]) {
        match self {
            System::Particle(p) => p.derivative(s, PARTICLE_CONTROLS[action], out),
            System::Dubins(p) => dubins::unicycle_derivative(p.v, s[2], p.control(action), out),
            System::Lander(p) => p.derivative(s, LANDER_CONTROLS[action], out),
            System::AttackDefense(p) => {
                let (a, d) = p.split_action(action);
                dubins::unicycle_derivative(p.v, s[2], p.attacker_turn_rates[a], &mut out[..3]);
                dubins::unicycle_derivative(p.v, s[5], p.defender_turn_rates[d], &mut out[3..]);
            }
        }
    }

    fn margins(&self, s: &[f64]) -> Margins {
        match self {
            System::Particle(p) => p.margins(s),
            System::Dubins(p) => p.margins(s),
            System::Lander(p) => p.margins(s),
            System::AttackDefense(p) => p.margins(s),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            System::Particle(p) => p.validate(),
            System::Dubins(p) => p.validate(),
            System::Lander(p) => p.validate(),
            System::AttackDefense(p) => p.validate(),
        }
    }
}

/// One benchmark system together with its integration settings and domain.
///
/// Immutable after construction; `step` and `margins` are pure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub name: String,
    pub system: System,
    pub dt: f64,
    pub integrator: Integrator,
    /// Maximum episode length in steps.
    pub horizon: usize,
    /// Per-dimension `[lo, hi]` bounds of the state domain.
    pub domain: Vec<[f64; 2]>,
    /// Angle dimensions that wrap around `[lo, hi)`.
    pub periodic: Vec<bool>,
}

pub const PRESET_NAMES: [&str; 6] =
    ["particle", "particle-thin", "dubins-high", "dubins-low", "lander", "attack-defense"];

impl EnvironmentSpec {
    pub fn particle() -> Self {
        Self::particle_with(ParticleParams::three_obstacles(), "particle")
    }

    pub fn particle_thin() -> Self {
        Self::particle_with(ParticleParams::thin_obstacles(), "particle-thin")
    }

    fn particle_with(params: ParticleParams, name: &str) -> Self {
        Self {
            name: name.into(),
            system: System::Particle(params),
            dt: 0.05,
            integrator: Integrator::Euler,
            horizon: 200,
            domain: vec![[-2.0, 2.0], [-2.0, 10.0]],
            periodic: vec![false, false],
        }
    }

    pub fn dubins_high_turn() -> Self {
        Self::dubins_with(DubinsParams::high_turn_rate(), "dubins-high")
    }

    pub fn dubins_low_turn() -> Self {
        Self::dubins_with(DubinsParams::low_turn_rate(), "dubins-low")
    }

    fn dubins_with(params: DubinsParams, name: &str) -> Self {
        Self {
            name: name.into(),
            system: System::Dubins(params),
            dt: 0.05,
            integrator: Integrator::Rk4,
            horizon: 300,
            domain: vec![[-1.1, 1.1], [-1.1, 1.1], [0.0, TAU]],
            periodic: vec![false, false, true],
        }
    }

    pub fn lander() -> Self {
        Self {
            name: "lander".into(),
            system: System::Lander(LanderParams::default()),
            dt: 0.05,
            integrator: Integrator::Rk4,
            horizon: 400,
            domain: vec![[0.0, 20.0], [0.0, 13.0], [-0.5, 0.5], [-2.0, 2.0], [-2.0, 2.0], [-1.0, 1.0]],
            periodic: vec![false; 6],
        }
    }

    pub fn attack_defense() -> Self {
        Self {
            name: "attack-defense".into(),
            system: System::AttackDefense(AttackDefenseParams::default()),
            dt: 0.05,
            integrator: Integrator::Rk4,
            horizon: 100,
            domain: vec![[-1.0, 1.0], [-1.0, 1.0], [0.0, TAU], [-1.0, 1.0], [-1.0, 1.0], [0.0, TAU]],
            periodic: vec![false, false, true, false, false, true],
        }
    }

    pub fn preset(name: &str) -> Result<Self, EnvError> {
        match name {
            "particle" => Ok(Self::particle()),
            "particle-thin" => Ok(Self::particle_thin()),
            "dubins-high" => Ok(Self::dubins_high_turn()),
            "dubins-low" => Ok(Self::dubins_low_turn()),
            "lander" => Ok(Self::lander()),
            "attack-defense" => Ok(Self::attack_defense()),
            other => Err(EnvError::UnknownPreset(other.into())),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let invalid = |reason: String| EnvError::Invalid { env: self.name.clone(), reason };
        let n = self.state_dim();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1".into()));
        }
        if self.domain.len() != n || self.periodic.len() != n {
            return Err(invalid(format!("domain and periodic flags must have {n} entries")));
        }
        if let Some([lo, hi]) = self.domain.iter().find(|[lo, hi]| !(lo < hi)) {
            return Err(invalid(format!("domain bounds [{lo}, {hi}] are inverted")));
        }
        self.system.validate().map_err(invalid)
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.system.n_actions()
    }

    pub fn controls(&self) -> ControlSet {
        ControlSet { actions: (0..self.n_actions()).map(|a| self.system.control(a)).collect() }
    }

    fn check_state(&self, s: &[f64]) -> Result<(), EnvError> {
        if s.len() != self.state_dim() {
            return Err(EnvError::DimensionMismatch {
                env: self.name.clone(),
                expected: self.state_dim(),
                got: s.len(),
            });
        }
        if !s.iter().all(|x| x.is_finite()) {
            return Err(EnvError::NonFinite(s.to_vec()));
        }
        Ok(())
    }

    /// Advance `s` by one integrator step under control vector `u`.
    pub fn step(&self, s: &State, u: &[f64]) -> Result<State, EnvError> {
        let action = self.controls().index_of(u).ok_or_else(|| EnvError::UnknownControl {
            env: self.name.clone(),
            control: u.to_vec(),
        })?;
        self.step_action(s, action)
    }

    /// Advance `s` by one integrator step under the control with index `action`.
    pub fn step_action(&self, s: &State, action: usize) -> Result<State, EnvError> {
        self.check_state(s)?;
        if action >= self.n_actions() {
            return Err(EnvError::ActionOutOfRange {
                env: self.name.clone(),
                index: action,
                count: self.n_actions(),
            });
        }
        Ok(self.advance(s, action))
    }

    /// Unchecked step for hot loops; callers guarantee dimension and action range.
    pub fn advance(&self, s: &[f64], action: usize) -> State {
        debug_assert_eq!(s.len(), self.state_dim());
        let mut next = match self.integrator {
            Integrator::Euler => self.euler(s, action),
            Integrator::Rk4 => self.rk4(s, action),
        };
        self.wrap(&mut next);
        State(next)
    }

    fn euler(&self, s: &[f64], action: usize) -> Vector {
        let mut k: Vector = smallvec![0.0; s.len()];
        self.system.derivative(s, action, &mut k);
        s.iter().zip(&k).map(|(x, dx)| x + self.dt * dx).collect()
    }

    fn rk4(&self, s: &[f64], action: usize) -> Vector {
        let n = s.len();
        let h = self.dt;
        let mut k1: Vector = smallvec![0.0; n];
        let mut k2: Vector = smallvec![0.0; n];
        let mut k3: Vector = smallvec![0.0; n];
        let mut k4: Vector = smallvec![0.0; n];
        let mut tmp: Vector = smallvec![0.0; n];
        self.system.derivative(s, action, &mut k1);
        for i in 0..n {
            tmp[i] = s[i] + 0.5 * h * k1[i];
        }
        self.system.derivative(&tmp, action, &mut k2);
        for i in 0..n {
            tmp[i] = s[i] + 0.5 * h * k2[i];
        }
        self.system.derivative(&tmp, action, &mut k3);
        for i in 0..n {
            tmp[i] = s[i] + h * k3[i];
        }
        self.system.derivative(&tmp, action, &mut k4);
        (0..n)
            .map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    /// Map periodic coordinates into `[lo, hi)`.
    pub fn wrap(&self, s: &mut [f64]) {
        for ((x, [lo, hi]), periodic) in s.iter_mut().zip(&self.domain).zip(&self.periodic) {
            if *periodic {
                let period = hi - lo;
                let mut w = (*x - lo).rem_euclid(period) + lo;
                if w >= *hi {
                    w = *lo;
                }
                *x = w;
            }
        }
    }

    pub fn margins(&self, s: &State) -> Result<Margins, EnvError> {
        self.check_state(s)?;
        Ok(self.margins_of(s))
    }

    /// Unchecked margins for hot loops.
    pub fn margins_of(&self, s: &[f64]) -> Margins {
        self.system.margins(s)
    }

    /// Uniform sample over the domain box; angles uniform on their period.
    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        let mut s: Vector = self
            .domain
            .iter()
            .zip(&self.periodic)
            .map(|([lo, hi], periodic)| {
                if *periodic {
                    rng.random_range(*lo..*hi)
                } else {
                    rng.random_range(*lo..=*hi)
                }
            })
            .collect();
        if let System::AttackDefense(p) = &self.system {
            if p.ring_sampling {
                let [ax, ay] = self.sample_disc_point(rng, 0, p.r, p.big_r);
                let [dx, dy] = self.sample_disc_point(rng, 3, 0.0, p.big_r);
                s[0] = ax;
                s[1] = ay;
                s[3] = dx;
                s[4] = dy;
            }
        }
        State(s)
    }

    /// Rejection-sample a planar point with `inner <= |p| <= outer` from the
    /// domain box of dimensions `(dim, dim + 1)`.
    fn sample_disc_point<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize, inner: f64, outer: f64) -> [f64; 2] {
        let [xlo, xhi] = self.domain[dim];
        let [ylo, yhi] = self.domain[dim + 1];
        loop {
            let p = [rng.random_range(xlo..=xhi), rng.random_range(ylo..=yhi)];
            let norm = p[0].hypot(p[1]);
            if norm >= inner && norm <= outer {
                return p;
            }
        }
    }
}
