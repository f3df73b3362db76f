//! Reach-avoid payoff and Bellman backups.
//!
//! Values follow the cost convention: negative means the target is reached
//! safely, the inner optimisation is a minimum over controls and greedy
//! policies take the argmin. Ties go to the lowest action index.

use thiserror::Error;

use crate::env::{EnvError, EnvironmentSpec, State, System};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BellmanError {
    #[error("margin trace is empty")]
    EmptyTrace,
    #[error("margin trace lengths differ: {l} target margins, {g} safety margins")]
    LengthMismatch { l: usize, g: usize },
    #[error("discount factor {0} outside [0, 1]")]
    InvalidDiscount(f64),
    #[error("discount factor 1 does not give a contraction")]
    NotContractive,
    #[error("minimax backup needs the joint attack-defense system")]
    NotAGame,
}

/// Per-step margins `(l_t, g_t)` along one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginTrace {
    l: Vec<f64>,
    g: Vec<f64>,
}

impl MarginTrace {
    pub fn new(l: Vec<f64>, g: Vec<f64>) -> Result<Self, BellmanError> {
        if l.len() != g.len() {
            return Err(BellmanError::LengthMismatch { l: l.len(), g: g.len() });
        }
        if l.is_empty() {
            return Err(BellmanError::EmptyTrace);
        }
        Ok(Self { l, g })
    }

    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn payoff(&self) -> f64 {
        payoff_unchecked(&self.l, &self.g)
    }
}

/// `min_t max{ l_t, max_{k<=t} g_k }`: negative iff the trace reaches the
/// target strictly before any failure.
pub fn payoff(l: &[f64], g: &[f64]) -> Result<f64, BellmanError> {
    if l.len() != g.len() {
        return Err(BellmanError::LengthMismatch { l: l.len(), g: g.len() });
    }
    if l.is_empty() {
        return Err(BellmanError::EmptyTrace);
    }
    Ok(payoff_unchecked(l, g))
}

fn payoff_unchecked(l: &[f64], g: &[f64]) -> f64 {
    let mut worst_g = f64::NEG_INFINITY;
    let mut best = f64::INFINITY;
    for (lt, gt) in l.iter().zip(g) {
        worst_g = worst_g.max(*gt);
        best = best.min(lt.max(worst_g));
    }
    best
}

/// Discount factor in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Discount(f64);

impl Discount {
    pub fn new(gamma: f64) -> Result<Self, BellmanError> {
        if (0.0..=1.0).contains(&gamma) {
            Ok(Self(gamma))
        } else {
            Err(BellmanError::InvalidDiscount(gamma))
        }
    }

    /// A discount strictly below one, as required by fixed-point iteration.
    pub fn contractive(gamma: f64) -> Result<Self, BellmanError> {
        let d = Self::new(gamma)?;
        if gamma == 1.0 {
            return Err(BellmanError::NotContractive);
        }
        Ok(d)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Undiscounted backup `max{ g, min{ l, next } }`.
#[inline]
pub fn rabe(l: f64, g: f64, next: f64) -> f64 {
    g.max(l.min(next))
}

/// Discounted backup `gamma * rabe(l, g, next) + (1 - gamma) * max{l, g}`.
///
/// At `gamma == 1` the result equals [`rabe`] bit for bit.
#[inline]
pub fn drabe(l: f64, g: f64, next: f64, gamma: f64) -> f64 {
    let ra = rabe(l, g, next);
    if gamma == 1.0 {
        return ra;
    }
    gamma * ra + (1.0 - gamma) * l.max(g)
}

/// Safety-only backup `gamma * min{ g, next } + (1 - gamma) * g`.
#[inline]
pub fn safety(g: f64, next: f64, gamma: f64) -> f64 {
    gamma * g.min(next) + (1.0 - gamma) * g
}

/// Lowest index attaining the minimum.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Lowest index attaining the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn min_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Saddle choice on a row-major `attacker x defender` matrix: the defender
/// maximises within each row and the attacker picks the row with the lowest
/// such maximum. Returns `(attacker, defender)`.
pub fn minimax_action(values: &[f64], n_defender: usize) -> (usize, usize) {
    let row_max: Vec<f64> = values.chunks(n_defender).map(|row| row[argmax(row)]).collect();
    let a = argmin(&row_max);
    let d = argmax(&values[a * n_defender..(a + 1) * n_defender]);
    (a, d)
}

/// `min_a max_d values[a, d]` of a row-major matrix.
pub fn minimax_value(values: &[f64], n_defender: usize) -> f64 {
    values
        .chunks(n_defender)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min)
}

fn successor_values<F, E>(value: &mut F, env: &EnvironmentSpec, s: &State) -> Result<Vec<f64>, E>
where
    F: FnMut(&State) -> Result<f64, E>,
    E: From<EnvError>,
{
    (0..env.n_actions())
        .map(|a| {
            let next = env.step_action(s, a)?;
            value(&next)
        })
        .collect()
}

/// Undiscounted reach-avoid backup at `s` for a value function `value`.
pub fn rabe_backup<F, E>(value: &mut F, env: &EnvironmentSpec, s: &State) -> Result<f64, E>
where
    F: FnMut(&State) -> Result<f64, E>,
    E: From<EnvError>,
{
    let m = env.margins(s)?;
    let next = min_value(&successor_values(value, env, s)?);
    Ok(rabe(m.l, m.g, next))
}

pub fn drabe_backup<F, E>(value: &mut F, env: &EnvironmentSpec, s: &State, gamma: Discount) -> Result<f64, E>
where
    F: FnMut(&State) -> Result<f64, E>,
    E: From<EnvError>,
{
    let m = env.margins(s)?;
    let next = min_value(&successor_values(value, env, s)?);
    Ok(drabe(m.l, m.g, next, gamma.value()))
}

pub fn safety_backup<F, E>(value: &mut F, env: &EnvironmentSpec, s: &State, gamma: Discount) -> Result<f64, E>
where
    F: FnMut(&State) -> Result<f64, E>,
    E: From<EnvError>,
{
    let m = env.margins(s)?;
    let next = min_value(&successor_values(value, env, s)?);
    Ok(safety(m.g, next, gamma.value()))
}

/// Discounted backup with the inner minimum replaced by
/// `min_attacker max_defender` over joint successors.
pub fn minimax_drabe_backup<F, E>(
    value: &mut F,
    env: &EnvironmentSpec,
    s: &State,
    gamma: Discount,
) -> Result<f64, E>
where
    F: FnMut(&State) -> Result<f64, E>,
    E: From<EnvError> + From<BellmanError>,
{
    let System::AttackDefense(game) = &env.system else {
        return Err(BellmanError::NotAGame.into());
    };
    let m = env.margins(s)?;
    let next = minimax_value(&successor_values(value, env, s)?, game.n_defender());
    Ok(drabe(m.l, m.g, next, gamma.value()))
}

/// Margins cached with a transition: `(l, g)` at the state and successor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionMargins {
    pub l: f64,
    pub g: f64,
    pub l_next: f64,
    pub g_next: f64,
    pub terminal: bool,
}

/// Double-DQN reach-avoid target. The bootstrap action is the argmin of the
/// online values; its value is read from the target values. Terminal
/// transitions bootstrap from `max{l(s'), g(s')}` instead.
pub fn ddqn_target(m: TransitionMargins, q_online_next: &[f64], q_target_next: &[f64], gamma: f64) -> f64 {
    let bootstrap = if m.terminal {
        m.l_next.max(m.g_next)
    } else {
        q_target_next[argmin(q_online_next)]
    };
    drabe(m.l, m.g, bootstrap, gamma)
}

/// Minimax double-DQN target on row-major `attacker x defender` outputs.
/// Both the attacker and the defender index come from the online matrix.
pub fn minimax_ddqn_target(
    m: TransitionMargins,
    q_online_next: &[f64],
    q_target_next: &[f64],
    n_defender: usize,
    gamma: f64,
) -> f64 {
    let bootstrap = if m.terminal {
        m.l_next.max(m.g_next)
    } else {
        let (a, d) = minimax_action(q_online_next, n_defender);
        q_target_next[a * n_defender + d]
    };
    drabe(m.l, m.g, bootstrap, gamma)
}

/// Sparse cost of the sum-of-costs baseline: `-1` on entering the target,
/// `penalty` on entering the failure set, zero otherwise. Failure takes
/// precedence when both hold.
pub fn sparse_cost(l_next: f64, g_next: f64, penalty: f64) -> f64 {
    if g_next > 0.0 {
        penalty
    } else if l_next <= 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Discounted sum-of-costs double-DQN target.
pub fn sum_cost_target(
    m: TransitionMargins,
    q_online_next: &[f64],
    q_target_next: &[f64],
    gamma: f64,
    penalty: f64,
) -> f64 {
    let cost = sparse_cost(m.l_next, m.g_next, penalty);
    if m.terminal {
        cost
    } else {
        cost + gamma * q_target_next[argmin(q_online_next)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn payoff_examples() {
        assert_eq!(payoff(&[1.0, -0.5], &[-1.0, -1.0]).unwrap(), -0.5);
        assert_eq!(payoff(&[1.0, -0.5], &[0.3, -1.0]).unwrap(), 0.3);
        assert_eq!(payoff(&[0.2], &[-0.7]).unwrap(), 0.2);
        assert_eq!(payoff(&[], &[]), Err(BellmanError::EmptyTrace));
        assert!(matches!(payoff(&[1.0], &[]), Err(BellmanError::LengthMismatch { .. })));
    }

    #[test]
    fn rabe_examples() {
        assert_eq!(rabe(-1.0, -2.0, 0.5), -1.0);
        assert!(rabe(-5.0, 0.4, -9.0) >= 0.4);
        assert_eq!(rabe(-0.1, -0.3, -0.7), -0.3);
    }

    #[test]
    fn drabe_examples() {
        assert_eq!(drabe(0.3, -0.2, -4.0, 0.0), 0.3);
        for (l, g, v) in [(-1.0, -2.0, 0.5), (0.4, -0.1, -0.3), (2.0, 1.0, -1.0)] {
            assert_eq!(drabe(l, g, v, 1.0), rabe(l, g, v));
        }
        assert_abs_diff_eq!(drabe(-1.0, -2.0, 0.5, 0.9), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn safety_examples() {
        assert_eq!(safety(-1.5, 3.0, 0.0), -1.5);
        assert_eq!(safety(-1.0, -3.0, 0.5), -2.0);
        assert_eq!(safety(2.0, 5.0, 0.5), 2.0);
    }

    #[test]
    fn minimax_examples() {
        let v = [1.0, 2.0, 0.0, 3.0];
        assert_eq!(minimax_value(&v, 2), 2.0);
        assert_eq!(minimax_action(&v, 2), (0, 1));
        assert_eq!(rabe(-10.0, -10.0, minimax_value(&v, 2)), -10.0);
        assert_eq!(minimax_value(&[0.7], 1), 0.7);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmin(&[1.0, 0.0, 0.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 0.0]), 0);
        assert_eq!(minimax_action(&[1.0, 1.0, 1.0, 1.0], 2), (0, 0));
    }

    #[test]
    fn ddqn_target_examples() {
        let m = TransitionMargins { l: 0.5, g: -1.0, l_next: -0.2, g_next: -1.0, terminal: true };
        assert_abs_diff_eq!(ddqn_target(m, &[9.0], &[9.0], 0.9), -0.13, epsilon = 1e-15);
        let live = TransitionMargins { terminal: false, ..m };
        assert_eq!(ddqn_target(live, &[3.0, -4.0], &[7.0, 8.0], 0.0), 0.5);
        // decoupling: online picks index 1, target supplies its value
        let y = ddqn_target(live, &[3.0, -4.0], &[-7.0, 0.25], 1.0);
        assert_eq!(y, rabe(0.5, -1.0, 0.25));
    }

    #[test]
    fn minimax_target_decouples_both_indices() {
        let m = TransitionMargins { l: 5.0, g: -5.0, l_next: 0.0, g_next: 0.0, terminal: false };
        // online saddle at (0, 1); target value there is -0.5
        let online = [1.0, 2.0, 0.0, 3.0];
        let target = [9.0, -0.5, -9.0, -9.0];
        assert_eq!(minimax_ddqn_target(m, &online, &target, 2, 1.0), -0.5);
    }

    #[test]
    fn sum_cost_examples() {
        let reach = TransitionMargins { l: 1.0, g: -1.0, l_next: -0.1, g_next: -1.0, terminal: true };
        assert_eq!(sum_cost_target(reach, &[0.0], &[0.0], 0.7, 1.0), -1.0);
        let fail = TransitionMargins { l_next: 0.4, g_next: 0.2, ..reach };
        assert_eq!(sum_cost_target(fail, &[0.0], &[0.0], 0.7, 1.0), 1.0);
        let interior = TransitionMargins { l_next: 0.4, g_next: -0.2, terminal: false, ..reach };
        assert_abs_diff_eq!(sum_cost_target(interior, &[0.3, -0.2], &[0.5, -0.6], 0.95, 0.1), 0.95 * -0.6);
    }

    #[test]
    fn discount_validation() {
        assert!(Discount::new(1.0).is_ok());
        assert_eq!(Discount::contractive(1.0), Err(BellmanError::NotContractive));
        assert_eq!(Discount::new(-0.1), Err(BellmanError::InvalidDiscount(-0.1)));
        assert!(Discount::new(f64::NAN).is_err());
    }

    #[test]
    fn backups_on_environment() {
        let env = EnvironmentSpec::dubins_high_turn();
        let s = State::new(&[0.3, 0.0, 0.0]);
        let mut constant = |_: &State| Ok::<f64, EnvError>(0.5);
        let ra = rabe_backup(&mut constant, &env, &s).unwrap();
        assert_abs_diff_eq!(ra, -0.2, epsilon = 1e-15);
        let dra = drabe_backup(&mut constant, &env, &s, Discount::new(0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(dra, -0.2, epsilon = 1e-15);
        let sb = safety_backup(&mut constant, &env, &s, Discount::new(0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(sb, -0.7, epsilon = 1e-15);
        let bad = State::new(&[0.0, 0.0]);
        assert!(rabe_backup(&mut constant, &env, &bad).is_err());
    }

    #[derive(Debug)]
    enum TestError {
        Env,
        Bellman(BellmanError),
    }

    impl From<EnvError> for TestError {
        fn from(_: EnvError) -> Self {
            TestError::Env
        }
    }

    impl From<BellmanError> for TestError {
        fn from(e: BellmanError) -> Self {
            TestError::Bellman(e)
        }
    }

    #[test]
    fn minimax_backup_requires_game() {
        let env = EnvironmentSpec::dubins_low_turn();
        let mut v = |_: &State| Ok::<f64, TestError>(0.0);
        let s = State::new(&[0.0, 0.0, 0.0]);
        let gamma = Discount::new(0.5).unwrap();
        assert!(matches!(
            minimax_drabe_backup(&mut v, &env, &s, gamma),
            Err(TestError::Bellman(BellmanError::NotAGame))
        ));
        let game = EnvironmentSpec::attack_defense();
        let s = State::new(&[0.7, 0.0, 0.0, -0.5, 0.0, 0.0]);
        // value = attacker x coordinate: inner value is the min over attacker turns
        let mut vx = |s: &State| Ok::<f64, TestError>(s[0]);
        let got = minimax_drabe_backup(&mut vx, &game, &s, Discount::new(1.0).unwrap()).unwrap();
        let next_x = |a| game.advance(&s, game_joint(&game, a, 0))[0];
        let expect = rabe(0.2, -0.3, next_x(0).min(next_x(1)).min(next_x(2)));
        assert_abs_diff_eq!(got, expect, epsilon = 1e-15);
        assert!(matches!(
            minimax_drabe_backup(&mut vx, &game, &State::new(&[0.0]), gamma),
            Err(TestError::Env)
        ));
    }

    fn game_joint(env: &EnvironmentSpec, a: usize, d: usize) -> usize {
        let System::AttackDefense(p) = &env.system else { unreachable!() };
        p.joint_action(a, d)
    }
}
