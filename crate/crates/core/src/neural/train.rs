use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::optim::{soft_update, Adam, OptimizerKind};
use super::pretrain::{margin_pretrain, MarginTarget, PretrainConfig, PretrainReport};
use super::replay::{ReplayBuffer, Transition};
use super::NeuralError;
use crate::bellman;
use crate::env::{EnvironmentSpec, State, System};
use crate::rng::{stream, Stream};
use crate::tabular::Schedule;

/// What the training targets optimise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Objective {
    /// Discounted reach-avoid backup with the argmin decoupled.
    ReachAvoid,
    /// Reach-avoid backup with `min_attacker max_defender` over a joint output matrix.
    Minimax,
    /// Discounted sum of sparse costs: `-1` in the target, `penalty` in the failure set.
    SumCost { penalty: f64 },
}

/// When a training episode ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// On entering the target or the failure set.
    #[default]
    Outcome,
    /// On entering the failure set only.
    Failure,
    /// Only on leaving the domain box.
    Boundary,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    Random,
    Pretrain(MarginTarget),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Total gradient updates `T`.
    pub updates: u64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub lr: Schedule,
    pub epsilon: Schedule,
    pub gamma: Schedule,
    /// Soft-update rate of the target network.
    pub tau: f64,
    pub optimizer: OptimizerKind,
    pub buffer_capacity: usize,
    pub init: InitMode,
    pub objective: Objective,
    pub termination: Termination,
    /// Updates between metric records.
    pub eval_every: u64,
    pub divergence_threshold: f64,
    pub pretrain: PretrainConfig,
    pub seed: u64,
}

impl TrainConfig {
    /// Per-environment defaults.
    pub fn defaults_for(env: &EnvironmentSpec) -> Self {
        let small = Self {
            updates: 400_000,
            batch_size: 64,
            hidden: vec![100, 20],
            lr: Schedule::learning_rate(),
            epsilon: Schedule::exploration(),
            gamma: Schedule::constant(0.9999),
            tau: 0.01,
            optimizer: OptimizerKind::Adam,
            buffer_capacity: 10_000,
            init: InitMode::Random,
            objective: Objective::ReachAvoid,
            termination: Termination::Outcome,
            eval_every: 20_000,
            divergence_threshold: 1e6,
            pretrain: PretrainConfig::default(),
            seed: 0,
        };
        match &env.system {
            System::Particle(_) => Self { termination: Termination::Boundary, ..small },
            System::Dubins(_) => Self {
                optimizer: OptimizerKind::adamw(),
                init: InitMode::Pretrain(MarginTarget::OneStep),
                ..small
            },
            System::Lander(_) => Self {
                updates: 5_000_000,
                hidden: vec![512, 512, 512],
                gamma: Schedule::discount(),
                optimizer: OptimizerKind::adamw(),
                buffer_capacity: 50_000,
                init: InitMode::Pretrain(MarginTarget::Safety),
                ..small
            },
            System::AttackDefense(_) => Self {
                updates: 4_000_000,
                hidden: vec![512, 512, 512],
                gamma: Schedule::discount(),
                optimizer: OptimizerKind::adamw(),
                buffer_capacity: 50_000,
                init: InitMode::Pretrain(MarginTarget::OneStep),
                objective: Objective::Minimax,
                ..small
            },
        }
    }

    pub fn validate(&self, env: &EnvironmentSpec) -> Result<(), NeuralError> {
        let bad = |why: String| Err(NeuralError::InvalidConfig(why));
        if self.updates == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return bad("updates, batch size and evaluation interval must be positive".into());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("soft-update rate {} outside (0, 1]", self.tau));
        }
        if self.buffer_capacity < self.batch_size {
            return bad("replay buffer smaller than one batch".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer of width zero".into());
        }
        for s in [&self.lr, &self.epsilon, &self.gamma] {
            s.validate().map_err(|e| NeuralError::InvalidConfig(e.to_string()))?;
        }
        if self.objective == Objective::Minimax && !matches!(env.system, System::AttackDefense(_)) {
            return bad("minimax objective needs the attack-defense environment".into());
        }
        Ok(())
    }
}

/// One periodic training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub update: u64,
    /// Mean batch loss since the previous record; absent before the first update.
    pub loss: Option<f64>,
    pub lr: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Fraction of validation rollouts that reach the target safely.
    pub success_ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub online: Mlp,
    pub target: Mlp,
    pub metrics: Vec<Metrics>,
    pub pretrain: Option<PretrainReport>,
}

/// Greedy action under `objective` from one row of network outputs.
pub fn greedy_action(env: &EnvironmentSpec, objective: Objective, q: &[f64]) -> usize {
    match (objective, &env.system) {
        (Objective::Minimax, System::AttackDefense(game)) => {
            let (a, d) = bellman::minimax_action(q, game.n_defender());
            game.joint_action(a, d)
        }
        _ => bellman::argmin(q),
    }
}

/// Value of the greedy choice under `objective` from one row of network outputs.
pub fn greedy_value(env: &EnvironmentSpec, objective: Objective, q: &[f64]) -> f64 {
    match (objective, &env.system) {
        (Objective::Minimax, System::AttackDefense(game)) => bellman::minimax_value(q, game.n_defender()),
        _ => bellman::min_value(q),
    }
}

/// Fraction of `starts` whose greedy closed-loop rollout enters the target
/// before the failure set within the environment horizon. All rollouts are
/// advanced in lockstep so the network sees one batch per step.
pub fn greedy_success_ratio(env: &EnvironmentSpec, net: &Mlp, objective: Objective, starts: &[State]) -> f64 {
    if starts.is_empty() {
        return 0.0;
    }
    let n = env.state_dim();
    let mut active: Vec<State> = Vec::with_capacity(starts.len());
    let mut successes = 0usize;
    let classify = |s: &State| {
        let m = env.margins_of(s);
        if m.in_failure() {
            Some(false)
        } else if m.in_target() {
            Some(true)
        } else {
            None
        }
    };
    for s in starts {
        match classify(s) {
            Some(true) => successes += 1,
            Some(false) => {}
            None => active.push(s.clone()),
        }
    }
    let mut xs = Vec::with_capacity(active.len() * n);
    for _ in 0..env.horizon {
        if active.is_empty() {
            break;
        }
        xs.clear();
        for s in &active {
            xs.extend_from_slice(s);
        }
        let q = net.forward_batch(&xs, active.len());
        let mut still = Vec::with_capacity(active.len());
        for (s, row) in active.iter().zip(q.chunks(net.n_outputs())) {
            let next = env.advance(s, greedy_action(env, objective, row));
            match classify(&next) {
                Some(true) => successes += 1,
                Some(false) => {}
                None => still.push(next),
            }
        }
        active = still;
    }
    successes as f64 / starts.len() as f64
}

fn outside_domain(env: &EnvironmentSpec, s: &[f64]) -> bool {
    s.iter()
        .zip(&env.domain)
        .zip(&env.periodic)
        .any(|((x, [lo, hi]), periodic)| !periodic && (*x < *lo || *x > *hi))
}

fn episode_ends(env: &EnvironmentSpec, termination: Termination, next: &State, l_next: f64, g_next: f64) -> bool {
    match termination {
        Termination::Outcome => g_next > 0.0 || l_next <= 0.0,
        Termination::Failure => g_next > 0.0,
        Termination::Boundary => outside_domain(env, next),
    }
}

/// Double-DQN training with replay, soft target updates and the targets
/// selected by `config.objective`. Each metric record is passed to `sink`
/// as soon as it is produced.
pub fn ddqn_train(
    env: &EnvironmentSpec,
    config: &TrainConfig,
    validation: &[State],
    sink: &mut dyn FnMut(&Metrics),
) -> Result<TrainOutcome, NeuralError> {
    config.validate(env)?;
    let n_in = env.state_dim();
    let n_out = env.n_actions();
    let sizes: Vec<usize> = std::iter::once(n_in).chain(config.hidden.iter().copied()).chain(std::iter::once(n_out)).collect();
    let mut init_rng = stream(config.seed, Stream::Init);
    let mut online = Mlp::xavier(&sizes, &mut init_rng)?.with_input_box(&env.domain)?;
    let pretrain = match config.init {
        InitMode::Random => None,
        InitMode::Pretrain(target) => Some(margin_pretrain(&mut online, env, target, &config.pretrain, config.seed)?),
    };
    let mut target = online.clone();
    let mut opt = Adam::new(config.optimizer, online.n_params());
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut resets = stream(config.seed, Stream::Reset);
    let mut explore = stream(config.seed, Stream::Exploration);
    let mut replay = stream(config.seed, Stream::Replay);
    let n_defender = match &env.system {
        System::AttackDefense(game) => game.n_defender(),
        _ => 1,
    };

    let total = config.updates;
    let mut metrics = Vec::new();
    let mut record = |update: u64, loss: Option<f64>, online: &Mlp, metrics: &mut Vec<Metrics>| {
        let m = Metrics {
            update,
            loss,
            lr: config.lr.value(update, total),
            epsilon: config.epsilon.value(update, total),
            gamma: config.gamma.value(update, total),
            success_ratio: (!validation.is_empty()).then(|| greedy_success_ratio(env, online, config.objective, validation)),
        };
        sink(&m);
        metrics.push(m);
    };
    record(0, None, &online, &mut metrics);

    let mut state = env.sample_state(&mut resets);
    let mut steps = 0usize;
    let mut updates = 0u64;
    let mut loss_sum = 0.0;
    let mut loss_count = 0u64;
    let mut grads = vec![0.0; online.n_params()];
    let b = config.batch_size;
    let mut xs = Vec::with_capacity(b * n_in);
    let mut xs_next = Vec::with_capacity(b * n_in);
    let mut ys = vec![0.0; b];
    let mut grad_out = vec![0.0; b * n_out];

    while updates < total {
        let epsilon = config.epsilon.value(updates, total);
        let action = if explore.random::<f64>() < epsilon {
            explore.random_range(0..n_out)
        } else {
            greedy_action(env, config.objective, &online.forward(&state))
        };
        let next = env.advance(&state, action);
        let m = env.margins_of(&state);
        let m_next = env.margins_of(&next);
        steps += 1;
        let done = episode_ends(env, config.termination, &next, m_next.l, m_next.g) || steps >= env.horizon;
        buffer.push(Transition {
            state: state.clone(),
            action,
            next_state: next.clone(),
            terminal: done,
            l: m.l,
            g: m.g,
            l_next: m_next.l,
            g_next: m_next.g,
        });
        if done {
            state = env.sample_state(&mut resets);
            steps = 0;
        } else {
            state = next;
        }
        if buffer.len() < b {
            continue;
        }

        let idx = buffer.sample_indices(&mut replay, b);
        xs.clear();
        xs_next.clear();
        for i in &idx {
            let t = buffer.get(*i);
            xs.extend_from_slice(&t.state);
            xs_next.extend_from_slice(&t.next_state);
        }
        let q_online_next = online.forward_batch(&xs_next, b);
        let q_target_next = target.forward_batch(&xs_next, b);
        let gamma = config.gamma.value(updates, total);
        for (k, i) in idx.iter().enumerate() {
            let t = buffer.get(*i);
            let on = &q_online_next[k * n_out..(k + 1) * n_out];
            let tg = &q_target_next[k * n_out..(k + 1) * n_out];
            ys[k] = match config.objective {
                Objective::ReachAvoid => bellman::ddqn_target(t.margins(), on, tg, gamma),
                Objective::Minimax => bellman::minimax_ddqn_target(t.margins(), on, tg, n_defender, gamma),
                Objective::SumCost { penalty } => bellman::sum_cost_target(t.margins(), on, tg, gamma, penalty),
            };
        }
        let cache = online.forward_train(&xs, b);
        grad_out.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (k, i) in idx.iter().enumerate() {
            let a = buffer.get(*i).action;
            let err = cache.output()[k * n_out + a] - ys[k];
            loss += err * err;
            grad_out[k * n_out + a] = 2.0 * err / b as f64;
        }
        loss /= b as f64;
        if !loss.is_finite() || loss > config.divergence_threshold {
            return Err(NeuralError::Diverged { update: updates, loss });
        }
        grads.iter_mut().for_each(|g| *g = 0.0);
        online.backward(&cache, &grad_out, &mut grads);
        opt.step(online.params_mut(), &grads, config.lr.value(updates, total));
        soft_update(&mut target, &online, config.tau)?;
        updates += 1;
        loss_sum += loss;
        loss_count += 1;
        if updates % config.eval_every == 0 || updates == total {
            record(updates, Some(loss_sum / loss_count as f64), &online, &mut metrics);
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    Ok(TrainOutcome { online, target, metrics, pretrain })
}
