//! Training and testing loops, repeated seeded experiments, sweeps over
//! episode budgets, and CSV export.
//!
//! Everything here is deterministic given (config, master_seed): per-repeat
//! seeds derive from the master seed, per-episode and per-trial generators
//! derive from the repeat seed, and parallel repeats are collected in order.

pub mod config;
pub mod snapshot;

pub use config::{AgentKind, GridSpec, KvDoc, RunConfig};
pub use snapshot::AgentSnapshot;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::envs::{EnvConfig, Transition};
use crate::error::{Error, Result};
use crate::features::{feature_dim, rgd_update, RbfSet, RgdConfig};
use crate::ktd::{build_measurement, kalman_update, predict, state_value, StateModel, WeightBelief};
use crate::mmae::{mmktd_step_detailed, FilterBank};
use crate::policy::{
    active_action, active_action_lookahead, active_action_sampled, greedy_action,
    uniform_random_action, ActiveRule, PolicyKind,
};
use config::fmt_f64;

/// Seed-stream tags: every random decision pulls from a generator seeded by
/// (base, stream, index) so no two purposes share a stream.
pub const STREAM_REPEAT: u64 = 1;
pub const STREAM_TRAIN_EPISODE: u64 = 2;
pub const STREAM_TEST_TRIAL: u64 = 3;
pub const STREAM_POLICY: u64 = 4;

/// SplitMix64 finalizer; a bijection on u64 with good avalanche behavior.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from (base, stream, index). Injective in `index` for a
/// fixed base and stream, so sibling seeds never collide.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base.wrapping_add(splitmix64(stream))).wrapping_add(splitmix64(index)))
}

/// Environment settings for a run: the per-environment defaults with the
/// config's optional step-cap overrides applied.
pub fn env_config(cfg: &RunConfig) -> EnvConfig {
    let mut ec = EnvConfig::for_kind(cfg.env);
    if let Some(n) = cfg.max_steps_train {
        ec.max_steps_train = n;
    }
    if let Some(n) = cfg.max_steps_test {
        ec.max_steps_test = n;
    }
    ec
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub snapshot: AgentSnapshot,
    /// Steps taken in each training episode, in order.
    pub episode_steps: Vec<usize>,
    /// Basis-covariance updates reverted for losing positive definiteness.
    pub rgd_reverts: usize,
}

struct DiagRow {
    step: usize,
    innovation: f64,
    weights: Vec<f64>,
    effective_r: f64,
}

fn initial_belief(cfg: &RunConfig, dim: usize) -> Result<WeightBelief> {
    match &cfg.theta0 {
        None => WeightBelief::isotropic(dim, cfg.p0_scale),
        Some(t0) => WeightBelief::new(
            nalgebra::DVector::from_vec(t0.clone()),
            nalgebra::DMatrix::identity(dim, dim) * cfg.p0_scale,
        ),
    }
}

fn train_impl(
    cfg: &RunConfig,
    repeat_seed: u64,
    mut observer: Option<&mut dyn FnMut(DiagRow)>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let ec = env_config(cfg);
    let set = match &cfg.rbf_sigma_diag {
        Some(diag) => RbfSet::from_grid_diag(
            &cfg.rbf_means,
            diag,
            cfg.env.num_actions(),
            cfg.include_bias,
        )?,
        None => RbfSet::from_grid(
            &cfg.rbf_means,
            cfg.rbf_sigma_scale,
            cfg.env.num_actions(),
            cfg.include_bias,
        )?,
    };
    let dim = feature_dim(&set);
    let belief = initial_belief(cfg, dim)?;
    let model = StateModel::isotropic(dim, cfg.q_scale, cfg.gamma)?;
    let bank = if cfg.agent.uses_bank() {
        Some(FilterBank::new(
            cfg.r_candidates.clone(),
            cfg.weighting_mode,
            cfg.likelihood_form,
        )?)
    } else {
        None
    };
    let rgd = if cfg.rgd_enabled {
        Some(RgdConfig::new(cfg.lambda_mu, cfg.lambda_sigma, cfg.branch_rule)?)
    } else {
        None
    };
    let behavior = cfg.agent.behavior();

    let mut set = set;
    let mut belief = belief;
    let mut bank = bank;
    let mut episode_steps = Vec::with_capacity(cfg.train_episodes);
    let mut rgd_reverts = 0usize;
    let mut global_step = 0usize;

    for episode in 0..cfg.train_episodes {
        let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            repeat_seed,
            STREAM_TRAIN_EPISODE,
            episode as u64,
        ));
        let mut policy_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(repeat_seed, STREAM_POLICY, episode as u64));
        let mut state = cfg.env.reset(&ec, &mut env_rng);
        let mut steps = 0usize;
        loop {
            let action = match behavior {
                PolicyKind::Active => match cfg.active_rule {
                    ActiveRule::Surrogate => active_action(&set, &belief, &state, cfg.gamma)?,
                    ActiveRule::Lookahead => {
                        // The dynamics are deterministic, so each candidate's
                        // successor can be probed without committing to it.
                        let mut candidates = Vec::with_capacity(cfg.env.num_actions());
                        for a in 0..cfg.env.num_actions() {
                            let probe = cfg.env.step(&state, a, &ec)?;
                            candidates.push((probe.next_state, probe.terminal));
                        }
                        active_action_lookahead(&set, &belief, &state, &candidates, cfg.gamma)?
                    }
                    ActiveRule::Greedy => greedy_action(&set, &belief, &state)?,
                    ActiveRule::Sampled => {
                        active_action_sampled(&set, &belief, &state, cfg.gamma, &mut policy_rng)?
                    }
                },
                PolicyKind::Greedy => greedy_action(&set, &belief, &state)?,
                PolicyKind::UniformRandom => {
                    uniform_random_action(&mut policy_rng, cfg.env.num_actions())?
                }
            };
            let out = cfg.env.step(&state, action, &ec)?;
            steps += 1;
            global_step += 1;
            let truncated = !out.terminal && steps >= ec.max_steps_train;
            let transition = Transition {
                state,
                action,
                reward: out.reward,
                next_state: out.next_state,
                terminal: out.terminal,
                truncated,
            };
            let row = build_measurement(&set, &belief, &transition, cfg.gamma)?;
            match bank.as_mut() {
                Some(bank) => {
                    let (fused, details) = mmktd_step_detailed(&belief, &model, &row, bank)?;
                    belief = fused;
                    if let Some(obs) = observer.as_deref_mut() {
                        obs(DiagRow {
                            step: global_step,
                            innovation: details.innovation,
                            weights: details.weights,
                            effective_r: bank.effective_r(),
                        });
                    }
                }
                None => {
                    let prior = predict(&belief, &model)?;
                    let (posterior, innovation, _) = kalman_update(&prior, &row, cfg.single_r)?;
                    belief = posterior;
                    if let Some(obs) = observer.as_deref_mut() {
                        obs(DiagRow {
                            step: global_step,
                            innovation,
                            weights: Vec::new(),
                            effective_r: cfg.single_r,
                        });
                    }
                }
            }
            if let Some(rgd_cfg) = &rgd {
                let report = rgd_update(&mut set, rgd_cfg, &transition, &belief, cfg.gamma)?;
                rgd_reverts += report.reverted;
            }
            if transition.terminal || transition.truncated {
                episode_steps.push(steps);
                break;
            }
            state = transition.next_state;
        }
    }

    Ok(TrainOutcome {
        snapshot: AgentSnapshot {
            env: cfg.env,
            gamma: cfg.gamma,
            set,
            belief,
            bank,
        },
        episode_steps,
        rgd_reverts,
    })
}

/// Train one agent from scratch under the given repeat seed.
pub fn train(cfg: &RunConfig, repeat_seed: u64) -> Result<TrainOutcome> {
    train_impl(cfg, repeat_seed, None)
}

/// Train while recording a per-step diagnostics CSV with columns
/// `step,innovation,w1..wM,effective_r` (no weight columns for the
/// single-filter agent).
pub fn train_with_diagnostics(cfg: &RunConfig, repeat_seed: u64) -> Result<(TrainOutcome, String)> {
    let modes = if cfg.agent.uses_bank() {
        cfg.r_candidates.len()
    } else {
        0
    };
    let mut out = String::from("step,innovation");
    for i in 1..=modes {
        out.push_str(&format!(",w{i}"));
    }
    out.push_str(",effective_r\n");
    let mut record = |row: DiagRow| {
        out.push_str(&row.step.to_string());
        out.push(',');
        out.push_str(&fmt_f64(row.innovation));
        for w in &row.weights {
            out.push(',');
            out.push_str(&fmt_f64(*w));
        }
        out.push(',');
        out.push_str(&fmt_f64(row.effective_r));
        out.push('\n');
    };
    let outcome = train_impl(cfg, repeat_seed, Some(&mut record))?;
    Ok((outcome, out))
}

/// Run greedy test trials against a snapshot; returns the success count.
///
/// No learning of any kind happens here. A pendulum trial succeeds when the
/// pole survives the full test cap; a mountain-car trial succeeds when the
/// goal is reached within the cap.
pub fn test(snapshot: &AgentSnapshot, cfg: &RunConfig, repeat_seed: u64) -> Result<usize> {
    cfg.validate()?;
    let ec = env_config(cfg);
    let mut successes = 0usize;
    for trial in 0..cfg.test_trials {
        if test_trial(snapshot, &ec, derive_seed(repeat_seed, STREAM_TEST_TRIAL, trial as u64))? {
            successes += 1;
        }
    }
    Ok(successes)
}

fn test_trial(snapshot: &AgentSnapshot, ec: &EnvConfig, trial_seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let mut state = snapshot.env.reset(ec, &mut rng);
    let mut reached_terminal = false;
    for _ in 0..ec.max_steps_test {
        let action = greedy_action(&snapshot.set, &snapshot.belief, &state)?;
        let out = snapshot.env.step(&state, action, ec)?;
        if out.terminal {
            reached_terminal = true;
            break;
        }
        state = out.next_state;
    }
    Ok(match snapshot.env {
        crate::envs::EnvKind::Pendulum => !reached_terminal,
        crate::envs::EnvKind::MountainCar => reached_terminal,
    })
}

/// One repeat's contribution to an experiment.
#[derive(Clone, Debug)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    /// Successes out of `test_trials`; `None` when this repeat aborted.
    pub successes: Option<usize>,
    pub error: Option<String>,
    pub episode_steps: Vec<usize>,
    pub rgd_reverts: usize,
    pub wallclock_s: f64,
}

/// Aggregated outcome of `repeats` independent train+test cycles.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub cfg: RunConfig,
    pub repeat_results: Vec<RepeatResult>,
    /// Mean success fraction over completed repeats.
    pub mean_success: f64,
    /// 1.96·std/√n over completed repeats' success fractions.
    pub ci95_halfwidth: f64,
    /// True when fewer than two repeats completed, making the interval
    /// meaningless (reported as zero).
    pub degenerate_ci: bool,
    pub trials: usize,
}

/// Execute `cfg.repeats` independent seeded train+test cycles in parallel and
/// aggregate success statistics. Individual repeat failures are recorded in
/// the report, not fatal; only a fully failed experiment is an error.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.repeats)
        .map(|i| derive_seed(cfg.master_seed, STREAM_REPEAT, i as u64))
        .collect();
    let repeat_results: Vec<RepeatResult> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let start = std::time::Instant::now();
            let run = train(cfg, seed).and_then(|out| {
                let successes = test(&out.snapshot, cfg, seed)?;
                Ok((out, successes))
            });
            match run {
                Ok((out, successes)) => RepeatResult {
                    repeat: i,
                    seed,
                    successes: Some(successes),
                    error: None,
                    episode_steps: out.episode_steps,
                    rgd_reverts: out.rgd_reverts,
                    wallclock_s: start.elapsed().as_secs_f64(),
                },
                Err(e) => RepeatResult {
                    repeat: i,
                    seed,
                    successes: None,
                    error: Some(e.to_string()),
                    episode_steps: Vec::new(),
                    rgd_reverts: 0,
                    wallclock_s: start.elapsed().as_secs_f64(),
                },
            }
        })
        .collect();

    let fractions: Vec<f64> = repeat_results
        .iter()
        .filter_map(|r| r.successes)
        .map(|s| s as f64 / cfg.test_trials as f64)
        .collect();
    if fractions.is_empty() {
        let first = repeat_results
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_else(|| "unknown".to_string());
        return Err(Error::degenerate(format!(
            "all {} repeats failed; first error: {first}",
            cfg.repeats
        )));
    }
    let n = fractions.len();
    let mean = fractions.iter().sum::<f64>() / n as f64;
    let (ci, degenerate) = if n < 2 {
        (0.0, true)
    } else {
        let var = fractions.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (n - 1) as f64;
        (1.96 * var.sqrt() / (n as f64).sqrt(), false)
    };

    Ok(ExperimentReport {
        cfg: cfg.clone(),
        repeat_results,
        mean_success: mean,
        ci95_halfwidth: ci,
        degenerate_ci: degenerate,
        trials: cfg.test_trials,
    })
}

/// One (agent, episode budget) cell of a sweep.
#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub agent: AgentKind,
    pub train_episodes: usize,
    pub report: ExperimentReport,
}

/// Run every (agent, budget) combination from shared base settings.
pub fn sweep(cfg: &RunConfig, agents: &[AgentKind], budgets: &[usize]) -> Result<Vec<SweepEntry>> {
    if agents.is_empty() || budgets.is_empty() {
        return Err(Error::invalid("sweep needs at least one agent and one budget"));
    }
    let mut entries = Vec::with_capacity(agents.len() * budgets.len());
    for &agent in agents {
        for &train_episodes in budgets {
            let mut c = cfg.clone();
            c.agent = agent;
            c.train_episodes = train_episodes;
            entries.push(SweepEntry {
                agent,
                train_episodes,
                report: run_experiment(&c)?,
            });
        }
    }
    Ok(entries)
}

/// Render sweep results as CSV, one row per repeat. The aggregate columns
/// (`mean_success`, `ci95_halfwidth`) repeat the cell's statistics on each of
/// its rows. A failed repeat reports -1 successes. `wallclock_s` is written
/// as 0.000 unless `timing` is set, keeping default output byte-reproducible.
pub fn sweep_csv(entries: &[SweepEntry], timing: bool) -> String {
    let mut out = String::from(
        "env,agent,train_episodes,repeat,successes,trials,mean_success,ci95_halfwidth,wallclock_s\n",
    );
    for entry in entries {
        let report = &entry.report;
        for r in &report.repeat_results {
            let successes: i64 = r.successes.map(|s| s as i64).unwrap_or(-1);
            let wallclock = if timing {
                format!("{:.3}", r.wallclock_s)
            } else {
                "0.000".to_string()
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6},{:.6},{}\n",
                report.cfg.env.name(),
                entry.agent.name(),
                entry.train_episodes,
                r.repeat,
                successes,
                report.trials,
                report.mean_success,
                report.ci95_halfwidth,
                wallclock
            ));
        }
    }
    out
}

/// Evaluate the greedy state value on a rectangular grid and render CSV with
/// columns `s1,s2,V`. The first dimension is the outer loop.
pub fn export_value_surface(snapshot: &AgentSnapshot, grid: &GridSpec) -> Result<String> {
    if grid.dims.len() != snapshot.env.state_dim() {
        return Err(Error::invalid(format!(
            "grid has {} dimensions but {} has {} state dimensions",
            grid.dims.len(),
            snapshot.env.name(),
            snapshot.env.state_dim()
        )));
    }
    if grid.is_empty() {
        return Err(Error::invalid("empty evaluation grid"));
    }
    let xs = grid.dims[0].points();
    let ys = grid.dims[1].points();
    let mut out = String::from("s1,s2,V\n");
    for &x in &xs {
        for &y in &ys {
            let s = nalgebra::DVector::from_vec(vec![x, y]);
            let v = state_value(&snapshot.set, &snapshot.belief, &s)?;
            out.push_str(&format!("{x:.6},{y:.6},{v:.6}\n"));
        }
    }
    Ok(out)
}

/// Roll out one greedy test trial and render it as CSV with columns
/// `step,s1,s2,action,reward`; the state columns show the state in which the
/// action was taken.
pub fn export_trajectory(
    snapshot: &AgentSnapshot,
    cfg: &RunConfig,
    repeat_seed: u64,
    trial: usize,
) -> Result<String> {
    let ec = env_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        repeat_seed,
        STREAM_TEST_TRIAL,
        trial as u64,
    ));
    let mut state = snapshot.env.reset(&ec, &mut rng);
    let mut out = String::from("step,s1,s2,action,reward\n");
    for step in 1..=ec.max_steps_test {
        let action = greedy_action(&snapshot.set, &snapshot.belief, &state)?;
        let outcome = snapshot.env.step(&state, action, &ec)?;
        out.push_str(&format!(
            "{step},{:.6},{:.6},{action},{:.6}\n",
            state[0], state[1], outcome.reward
        ));
        if outcome.terminal {
            break;
        }
        state = outcome.next_state;
    }
    Ok(out)
}
