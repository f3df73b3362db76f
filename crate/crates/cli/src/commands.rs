use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reach_avoid::certify::{
    confusion_matrix, exhaustive_validate, gamma_ladder_report, rollout_value, ConfusionReport, GreedyValuePolicy, NetworkAttacker,
    NetworkPolicy, Outcome, Policy,
};
use reach_avoid::env::{EnvironmentSpec, State, System};
use reach_avoid::io::{parse_slice, sample_slice, slice_value_grid, write_grid_csv, zero_contour, Artifact, ArtifactFile, GridSlice};
use reach_avoid::neural::{ddqn_train, greedy_value, Metrics};
use reach_avoid::tabular::{tabular_q_learning, value_iteration, Lookup, TabularError, ValueGrid, ViOptions};
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, ExperimentConfig, SolverKind};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_slice(dir: &Path, stem: &str, slice: &GridSlice) -> Result<()> {
    fs::write(dir.join(format!("{stem}.csv")), write_grid_csv(slice))?;
    write_json(&dir.join(format!("{stem}.contour.json")), &zero_contour(slice))
}

/// Tabular option errors are configuration errors.
fn tabular(e: TabularError) -> anyhow::Error {
    match e {
        TabularError::InvalidOptions(_) | TabularError::InvalidSchedule(_) => ConfigError(format!("tabular_q: {e}")).into(),
        other => other.into(),
    }
}

pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("resolved_config.toml"), cfg.to_toml())?;
    let env = &cfg.environment;
    match cfg.solver {
        SolverKind::ValueIteration => {
            let grid = cfg.grid();
            let opts = ViOptions {
                gamma: cfg.value_iteration.gamma,
                tol: cfg.value_iteration.tol,
                max_sweeps: cfg.value_iteration.max_sweeps,
                lookup: cfg.grid.lookup,
            };
            let (vg, report) = value_iteration(env, &grid, &opts)?;
            let mut log = BufWriter::new(File::create(out.join("residuals.jsonl"))?);
            for (k, r) in report.residuals.iter().enumerate() {
                writeln!(log, "{}", json!({ "sweep": k + 1, "residual": r }))?;
            }
            log.flush()?;
            log::info!("value iteration: {} sweeps, residual {:.3e}", report.sweeps, report.final_residual());
            write_value_outputs(cfg, out, vg.clone())?;
            write_json(
                &out.join("summary.json"),
                &json!({ "sweeps": report.sweeps, "converged": report.converged, "final_residual": report.final_residual(),
                          "ra_cells": vg.ra_mask().iter().filter(|m| **m).count() }),
            )?;
        }
        SolverKind::TabularQ => {
            let result = tabular_q_learning(env, &cfg.grid(), &cfg.tabular_q).map_err(tabular)?;
            let file = ArtifactFile { env: env.name.clone(), artifact: Artifact::QTable(result.table.clone()) };
            file.save(&out.join("q_table.json"))?;
            let vg = result.table.greedy_values();
            write_value_outputs(cfg, out, vg.clone())?;
            let visits = result.cell_visits();
            write_json(
                &out.join("summary.json"),
                &json!({ "episodes": cfg.tabular_q.episodes, "final_gamma": result.final_gamma,
                          "unvisited_cells": visits.iter().filter(|v| **v == 0).count(),
                          "ra_cells": vg.ra_mask().iter().filter(|m| **m).count() }),
            )?;
        }
        SolverKind::Ddqn | SolverKind::MinimaxDdqn | SolverKind::SumBaseline => {
            let validation = cfg.grid_states(&cfg.certify.validation_counts);
            let mut log = BufWriter::new(File::create(out.join("metrics.jsonl"))?);
            let mut write_error = None;
            let mut sink = |m: &Metrics| {
                let line = serde_json::to_string(m).expect("metrics serialize");
                if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
                    write_error.get_or_insert(e);
                }
                log::info!("update {} loss {:?} success {:?}", m.update, m.loss, m.success_ratio);
            };
            let outcome = ddqn_train(env, &cfg.train, &validation, &mut sink);
            drop(sink);
            if let Some(e) = write_error {
                return Err(e).context("writing metrics");
            }
            let outcome = outcome?;
            let save = |name: &str, net| {
                ArtifactFile { env: env.name.clone(), artifact: Artifact::Network { net, objective: cfg.train.objective } }.save(&out.join(name))
            };
            save("network.json", outcome.online.clone())?;
            save("target_network.json", outcome.target)?;
            write_json(
                &out.join("summary.json"),
                &json!({ "updates": cfg.train.updates, "pretrain": outcome.pretrain, "final": outcome.metrics.last() }),
            )?;
        }
    }
    Ok(())
}

fn write_value_outputs(cfg: &ExperimentConfig, out: &Path, vg: ValueGrid) -> Result<()> {
    if vg.grid.dim() == 2 {
        write_slice(out, "value_grid", &slice_value_grid(&vg, &[None, None])?)?;
    }
    ArtifactFile { env: cfg.environment.name.clone(), artifact: Artifact::ValueGrid(vg) }.save(&out.join("value_grid.json"))?;
    Ok(())
}

/// Value predictor and closed-loop policy carried by an artifact.
enum Loaded {
    Table(ValueGrid),
    Network(ArtifactFile),
}

impl Loaded {
    fn from_file(file: ArtifactFile) -> Self {
        match file.artifact {
            Artifact::ValueGrid(vg) => Loaded::Table(vg),
            Artifact::QTable(qt) => Loaded::Table(qt.greedy_values()),
            Artifact::Network { .. } => Loaded::Network(file),
        }
    }

    fn value(&self, env: &EnvironmentSpec, s: &[f64], lookup: Lookup) -> f64 {
        match self {
            Loaded::Table(vg) => vg.value_at(s, lookup),
            Loaded::Network(file) => match &file.artifact {
                Artifact::Network { net, objective } => greedy_value(env, *objective, &net.forward(s)),
                _ => unreachable!("network variant"),
            },
        }
    }

    fn policy<'a>(&'a self, env: &'a EnvironmentSpec, lookup: Lookup) -> Box<dyn Policy + 'a> {
        match self {
            Loaded::Table(vg) => Box::new(GreedyValuePolicy { env, values: vg, lookup }),
            Loaded::Network(file) => match &file.artifact {
                Artifact::Network { net, objective } => Box::new(NetworkPolicy { env, net, objective: *objective }),
                _ => unreachable!("network variant"),
            },
        }
    }
}

fn load(cfg: &ExperimentConfig, path: &Path) -> Result<Loaded> {
    let file = ArtifactFile::load(path).with_context(|| format!("loading {}", path.display()))?;
    file.check_env(&cfg.environment)?;
    Ok(Loaded::from_file(file))
}

fn parse_state(text: &str, env: &EnvironmentSpec) -> Result<State> {
    let coords: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad state coordinate `{x}`")))
        .collect::<Result<_>>()?;
    if coords.len() != env.state_dim() {
        bail!("state has {} coordinates, `{}` needs {}", coords.len(), env.name, env.state_dim());
    }
    Ok(State::new(&coords))
}

pub fn evaluate(cfg: &ExperimentConfig, artifact: &Path, out: &Path, ladder: Option<Vec<f64>>) -> Result<()> {
    let env = &cfg.environment;
    let loaded = load(cfg, artifact)?;
    fs::create_dir_all(out)?;
    let lookup = cfg.grid.lookup;
    let horizon = cfg.certify.horizon;
    let probes = cfg.grid_states(&cfg.certify.probe_counts);
    let policy = loaded.policy(env, lookup);
    let value_report = confusion_matrix(env, |s| loaded.value(env, s, lookup), policy.as_ref(), &probes, horizon)?;
    let rollout_predictor = |s: &State| match rollout_value(env, policy.as_ref(), s, horizon) {
        Ok(r) if r.outcome == Outcome::Success => -1.0,
        _ => 1.0,
    };
    let rollout_report: ConfusionReport = confusion_matrix(env, rollout_predictor, policy.as_ref(), &probes, horizon)?;
    write_json(
        &out.join("confusion.json"),
        &json!({ "probes": probes.len(), "horizon": horizon, "value_predictor": value_report, "rollout_predictor": rollout_report }),
    )?;
    log::info!("value predictor FSR {:.4} FFR {:.4}; rollout predictor FSR {:.4}", value_report.fsr, value_report.ffr, rollout_report.fsr);

    if let Loaded::Table(vg) = &loaded {
        let members: Vec<usize> = vg.ra_mask().iter().enumerate().filter(|(_, m)| **m).map(|(c, _)| c).collect();
        write_json(&out.join("ra_mask.json"), &json!({ "grid": vg.grid, "ra_cells": members.len(), "members": members }))?;
        if vg.grid.dim() == 2 {
            let mask = ValueGrid { grid: vg.grid.clone(), values: vg.ra_mask().iter().map(|m| if *m { -1.0 } else { 1.0 }).collect() };
            write_slice(out, "ra_mask", &slice_value_grid(&mask, &[None, None])?)?;
        }
        let gammas = ladder.unwrap_or_else(|| cfg.certify.gamma_ladder.clone());
        if !gammas.is_empty() {
            let solve = |gamma: f64| {
                let opts = ViOptions { gamma, tol: cfg.value_iteration.tol, max_sweeps: cfg.value_iteration.max_sweeps, lookup };
                value_iteration(env, &vg.grid, &opts).map(|(v, _)| v)
            };
            let rungs = gammas.iter().map(|g| solve(*g)).collect::<Result<Vec<_>, _>>()?;
            let reference = solve(cfg.certify.ladder_reference)?;
            let pairs: Vec<(f64, &ValueGrid)> = gammas.iter().copied().zip(&rungs).collect();
            let report = gamma_ladder_report(&pairs, Some(&reference), cfg.certify.ladder_tol)?;
            log::info!("gamma ladder nested: {}", report.nested);
            write_json(&out.join("nesting.json"), &report)?;
        }
    }

    if let (Loaded::Network(file), System::AttackDefense(game)) = (&loaded, &env.system) {
        if !cfg.certify.exhaustive_starts.is_empty() {
            let Artifact::Network { net, .. } = &file.artifact else { unreachable!("network variant") };
            let attacker = NetworkAttacker { net, n_defender: game.n_defender() };
            let reports = cfg
                .certify
                .exhaustive_starts
                .iter()
                .map(|s| exhaustive_validate(env, &attacker, &State::new(s), cfg.certify.exhaustive))
                .collect::<Result<Vec<_>, _>>()?;
            write_json(&out.join("exhaustive.json"), &reports)?;
        }
    }
    Ok(())
}

pub fn export_grid(cfg: Option<&ExperimentConfig>, artifact: &Path, slice: &str, out: &Path) -> Result<()> {
    let file = ArtifactFile::load(artifact).with_context(|| format!("loading {}", artifact.display()))?;
    let env = match cfg {
        Some(c) => c.environment.clone(),
        None => EnvironmentSpec::preset(&file.env).with_context(|| format!("artifact env `{}` is not a preset; pass --config", file.env))?,
    };
    file.check_env(&env)?;
    let spec = parse_slice(slice, env.state_dim())?;
    let resolution = cfg.map(|c| c.certify.slice_resolution).unwrap_or([101, 101]);
    let table = match file.artifact {
        Artifact::ValueGrid(vg) => slice_value_grid(&vg, &spec)?,
        Artifact::QTable(qt) => slice_value_grid(&qt.greedy_values(), &spec)?,
        Artifact::Network { net, objective } => sample_slice(&env.domain, &spec, resolution, |x| greedy_value(&env, objective, &net.forward(x)))?,
    };
    fs::create_dir_all(out)?;
    write_slice(out, "slice", &table)
}

pub fn rollout(cfg: &ExperimentConfig, artifact: &Path, state: &str, out: &Path) -> Result<Outcome> {
    let env = &cfg.environment;
    let loaded = load(cfg, artifact)?;
    let s = parse_state(state, env)?;
    let policy = loaded.policy(env, cfg.grid.lookup);
    let record = rollout_value(env, policy.as_ref(), &s, cfg.certify.horizon)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("rollout.json"), &record)?;
    println!("{:?} after {} steps, payoff {:.6}", record.outcome, record.steps, record.payoff);
    Ok(record.outcome)
}

pub fn validate_exhaustive(cfg: &ExperimentConfig, artifact: &Path, state: &str, out: &Path) -> Result<()> {
    let env = &cfg.environment;
    let System::AttackDefense(game) = &env.system else {
        return Err(ConfigError("validate-exhaustive needs the attack-defense environment".into()).into());
    };
    let file = ArtifactFile::load(artifact).with_context(|| format!("loading {}", artifact.display()))?;
    file.check_env(env)?;
    let Artifact::Network { net, .. } = &file.artifact else {
        bail!("validate-exhaustive needs a network artifact");
    };
    let s = parse_state(state, env)?;
    let attacker = NetworkAttacker { net, n_defender: game.n_defender() };
    let report = exhaustive_validate(env, &attacker, &s, cfg.certify.exhaustive)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("exhaustive.json"), &report)?;
    let enumerated: u64 = report.rounds.iter().map(|r| r.enumerated).sum();
    println!("{:?} after {} steps over {} rounds ({} defender plans), payoff {:.6}", report.worst.outcome, report.worst.steps, report.rounds.len(), enumerated, report.worst.payoff);
    Ok(())
}

/// Output directory: flag, then `REACH_AVOID_OUT_DIR`, then the config, then a per-run default.
pub fn out_dir(flag: Option<PathBuf>, cfg: Option<&ExperimentConfig>, fallback: impl FnOnce() -> PathBuf) -> PathBuf {
    flag.or_else(|| std::env::var_os("REACH_AVOID_OUT_DIR").map(PathBuf::from))
        .or_else(|| cfg.and_then(|c| c.out_dir.as_ref().map(PathBuf::from)))
        .or_else(|| cfg.map(|c| PathBuf::from(c.default_out_dir())))
        .unwrap_or_else(fallback)
}
