//! Benchmark environments: an inverted pendulum on a movable base and the
//! classic mountain car, both as pure step functions with seeded resets.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Environment state vector in environment units.
/// Pendulum: (angle rad, angular velocity rad/s). Mountain car: (position, velocity).
pub type EnvState = DVector<f64>;

/// Standard deviation of the pendulum's initial angle draw.
pub const PENDULUM_INIT_STD: f64 = 0.1;
/// Pendulum fails once the angle magnitude exceeds this bound.
pub const PENDULUM_FAIL_ANGLE: f64 = std::f64::consts::FRAC_PI_2;

/// Mountain car constants of the canonical discrete map.
pub const MC_FORCE: f64 = 0.001;
pub const MC_GRAVITY: f64 = 0.0025;
pub const MC_MIN_POS: f64 = -1.2;
pub const MC_GOAL_POS: f64 = 0.5;
pub const MC_MAX_SPEED: f64 = 0.07;
pub const MC_START_LOW: f64 = -0.6;
pub const MC_START_HIGH: f64 = -0.4;

/// Result of one environment step.
///
/// `terminal` and `truncated` are distinct signals: truncation (step cap
/// reached) does not end the underlying task, so TD targets keep their
/// discounted next-state term. The step functions themselves never set
/// `truncated`; the episode runner does when it stops an episode early.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

/// One observed transition, the unit of learning.
#[derive(Clone, Debug)]
pub struct Transition {
    pub state: EnvState,
    pub action: usize,
    pub reward: f64,
    pub next_state: EnvState,
    pub terminal: bool,
    pub truncated: bool,
}

/// Physical constants and episode caps for an environment instance.
///
/// The mass/length/force/gravity fields describe the pendulum; the mountain
/// car uses the canonical map constants above and ignores them. `dt` is
/// metadata for the mountain car, whose map is already a per-decision update.
#[derive(Clone, Debug)]
pub struct EnvConfig {
    pub dt: f64,
    pub max_steps_train: usize,
    pub max_steps_test: usize,
    pub init_seed: u64,
    pub base_mass: f64,
    pub pole_mass: f64,
    pub length: f64,
    pub force: f64,
    pub gravity: f64,
}

impl EnvConfig {
    pub fn pendulum() -> Self {
        EnvConfig {
            dt: 0.01,
            max_steps_train: 3000,
            max_steps_test: 500,
            init_seed: 0,
            base_mass: 8.0,
            pole_mass: 2.0,
            length: 0.5,
            force: 50.0,
            gravity: 9.81,
        }
    }

    pub fn mountain_car() -> Self {
        EnvConfig {
            dt: 0.05,
            max_steps_train: 1000,
            max_steps_test: 200,
            init_seed: 0,
            base_mass: 8.0,
            pole_mass: 2.0,
            length: 0.5,
            force: 50.0,
            gravity: 9.81,
        }
    }

    pub fn for_kind(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Pendulum => EnvConfig::pendulum(),
            EnvKind::MountainCar => EnvConfig::mountain_car(),
        }
    }
}

/// The two supported benchmarks, selectable by name in the run config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Pendulum,
    MountainCar,
}

impl EnvKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "pendulum" => Ok(EnvKind::Pendulum),
            "mountain_car" => Ok(EnvKind::MountainCar),
            other => Err(Error::parse(format!(
                "unknown env {other:?} (expected \"pendulum\" or \"mountain_car\")"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::MountainCar => "mountain_car",
        }
    }

    pub fn state_dim(self) -> usize {
        2
    }

    pub fn num_actions(self) -> usize {
        3
    }

    pub fn reset(self, cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> EnvState {
        match self {
            EnvKind::Pendulum => pendulum_reset(cfg, rng),
            EnvKind::MountainCar => mountain_car_reset(cfg, rng),
        }
    }

    pub fn step(self, s: &EnvState, a: usize, cfg: &EnvConfig) -> Result<StepOutcome> {
        match self {
            EnvKind::Pendulum => pendulum_step(s, a, cfg),
            EnvKind::MountainCar => mountain_car_step(s, a, cfg),
        }
    }
}

fn check_state_action(s: &EnvState, a: usize, what: &str) -> Result<()> {
    if s.len() != 2 {
        return Err(Error::invalid(format!(
            "{what} state must have dimension 2, got {}",
            s.len()
        )));
    }
    if a > 2 {
        return Err(Error::invalid(format!(
            "{what} action index {a} out of range 0..3"
        )));
    }
    Ok(())
}

/// Draw the pendulum's initial state: angle ~ N(0, 0.1²), angular velocity 0.
pub fn pendulum_reset(_cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> EnvState {
    let normal = Normal::new(0.0, PENDULUM_INIT_STD).expect("valid std");
    DVector::from_vec(vec![normal.sample(rng), 0.0])
}

/// One explicit-Euler step of the inverted pendulum.
///
/// Action indices {0, 1, 2} map to base forces {−force, 0, +force} newtons.
/// The episode fails (reward −1, terminal) once |angle| exceeds π/2.
pub fn pendulum_step(s: &EnvState, a: usize, cfg: &EnvConfig) -> Result<StepOutcome> {
    check_state_action(s, a, "pendulum")?;
    let theta = s[0];
    let theta_dot = s[1];
    let u = cfg.force * (a as f64 - 1.0);
    let m = cfg.pole_mass;
    let l = cfg.length;
    let alpha = 1.0 / (m + cfg.base_mass);
    let numer = cfg.gravity * theta.sin()
        - alpha * m * l * theta_dot * theta_dot * (2.0 * theta).sin() / 2.0
        - alpha * theta.cos() * u;
    let denom = 4.0 * l / 3.0 - alpha * m * l * theta.cos() * theta.cos();
    let theta_ddot = numer / denom;

    let next_theta = theta + cfg.dt * theta_dot;
    let next_theta_dot = theta_dot + cfg.dt * theta_ddot;
    let terminal = next_theta.abs() > PENDULUM_FAIL_ANGLE;
    Ok(StepOutcome {
        next_state: DVector::from_vec(vec![next_theta, next_theta_dot]),
        reward: if terminal { -1.0 } else { 0.0 },
        terminal,
        truncated: false,
    })
}

/// Draw the mountain car's initial state: position ~ U(−0.6, −0.4), velocity 0.
pub fn mountain_car_reset(_cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> EnvState {
    DVector::from_vec(vec![rng.random_range(MC_START_LOW..MC_START_HIGH), 0.0])
}

/// One step of the canonical mountain car map.
///
/// Action indices {0, 1, 2} map to pushes {−0.001, 0, +0.001}. The left
/// boundary acts as a wall (velocity zeroed); reaching x ≥ 0.5 is terminal
/// with reward 0, every other step costs −1.
pub fn mountain_car_step(s: &EnvState, a: usize, _cfg: &EnvConfig) -> Result<StepOutcome> {
    check_state_action(s, a, "mountain car")?;
    let x = s[0];
    let v = s[1];
    let mut next_v = v + MC_FORCE * (a as f64 - 1.0) - MC_GRAVITY * (3.0 * x).cos();
    next_v = next_v.clamp(-MC_MAX_SPEED, MC_MAX_SPEED);
    let mut next_x = (x + next_v).clamp(MC_MIN_POS, MC_GOAL_POS);
    if next_x <= MC_MIN_POS {
        next_x = MC_MIN_POS;
        next_v = 0.0;
    }
    let terminal = next_x >= MC_GOAL_POS;
    Ok(StepOutcome {
        next_state: DVector::from_vec(vec![next_x, next_v]),
        reward: if terminal { 0.0 } else { -1.0 },
        terminal,
        truncated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn state(a: f64, b: f64) -> EnvState {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn pendulum_upright_zero_force_is_fixed_point() {
        let cfg = EnvConfig::pendulum();
        let out = pendulum_step(&state(0.0, 0.0), 1, &cfg).unwrap();
        assert_eq!(out.next_state[0], 0.0);
        assert_eq!(out.next_state[1], 0.0);
        assert_eq!(out.reward, 0.0);
        assert!(!out.terminal);
    }

    #[test]
    fn pendulum_euler_step_matches_hand_computed_dynamics() {
        // Independently evaluate the acceleration expression at (0.1, 0), u=0.
        let cfg = EnvConfig::pendulum();
        let theta: f64 = 0.1;
        let alpha = 1.0 / (2.0 + 8.0);
        let expected_acc = (9.81 * theta.sin() - 0.0 - alpha * theta.cos() * 0.0)
            / (4.0 * 0.5 / 3.0 - alpha * 2.0 * 0.5 * theta.cos().powi(2));
        let out = pendulum_step(&state(theta, 0.0), 1, &cfg).unwrap();
        assert!((out.next_state[0] - theta).abs() < 1e-15); // velocity is zero
        assert!((out.next_state[1] - 0.01 * expected_acc).abs() < 1e-12);
    }

    #[test]
    fn pendulum_terminates_past_half_pi() {
        let cfg = EnvConfig::pendulum();
        // Large positive angle and velocity guarantee the next angle exceeds π/2.
        let out = pendulum_step(&state(1.57, 5.0), 2, &cfg).unwrap();
        assert!(out.terminal);
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn pendulum_force_sign_opposes_lean() {
        let cfg = EnvConfig::pendulum();
        let push_right = pendulum_step(&state(0.1, 0.0), 2, &cfg).unwrap();
        let push_left = pendulum_step(&state(0.1, 0.0), 0, &cfg).unwrap();
        // Positive force reduces the angular acceleration at a positive lean.
        assert!(push_right.next_state[1] < push_left.next_state[1]);
    }

    #[test]
    fn pendulum_reset_statistics() {
        let cfg = EnvConfig::pendulum();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| pendulum_reset(&cfg, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        assert!(mean.abs() < 3.0 * PENDULUM_INIT_STD / (n as f64).sqrt());
        assert!(std > 0.097 && std < 0.103, "std = {std}");
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(pendulum_reset(&cfg, &mut rng2)[0], draws[0]);
    }

    #[test]
    fn mountain_car_step_matches_reference_map() {
        // Reference implementation of the canonical map, written separately.
        fn reference(x: f64, v: f64, a: usize) -> (f64, f64) {
            let mut v2 = v + (a as f64 - 1.0) * 0.001 + (3.0 * x).cos() * (-0.0025);
            if v2 < -0.07 {
                v2 = -0.07;
            }
            if v2 > 0.07 {
                v2 = 0.07;
            }
            let mut x2 = x + v2;
            if x2 < -1.2 {
                x2 = -1.2;
                v2 = 0.0;
            }
            if x2 > 0.5 {
                x2 = 0.5;
            }
            (x2, v2)
        }
        let cfg = EnvConfig::mountain_car();
        for &(x, v, a) in &[
            (-0.5, 0.0, 1usize),
            (-0.5, 0.02, 2),
            (-1.19, -0.05, 0),
            (0.45, 0.07, 2),
            (-0.3, -0.07, 1),
        ] {
            let out = mountain_car_step(&state(x, v), a, &cfg).unwrap();
            let (rx, rv) = reference(x, v, a);
            assert!((out.next_state[0] - rx).abs() < 1e-15);
            assert!((out.next_state[1] - rv).abs() < 1e-15);
        }
        // Spot value: from (−0.5, 0), no push.
        let out = mountain_car_step(&state(-0.5, 0.0), 1, &cfg).unwrap();
        let expect_v = -0.0025 * (-1.5f64).cos();
        assert!((out.next_state[1] - expect_v).abs() < 1e-15);
        assert!((out.next_state[0] - (-0.5 + expect_v)).abs() < 1e-15);
    }

    #[test]
    fn mountain_car_goal_is_terminal_with_zero_reward() {
        let cfg = EnvConfig::mountain_car();
        let out = mountain_car_step(&state(0.49, 0.07), 2, &cfg).unwrap();
        assert!(out.terminal);
        assert_eq!(out.reward, 0.0);
        assert!(out.next_state[0] >= MC_GOAL_POS);
    }

    #[test]
    fn mountain_car_left_wall_zeroes_velocity() {
        let cfg = EnvConfig::mountain_car();
        let out = mountain_car_step(&state(-1.19, -0.07), 0, &cfg).unwrap();
        assert_eq!(out.next_state[0], MC_MIN_POS);
        assert_eq!(out.next_state[1], 0.0);
        assert_eq!(out.reward, -1.0);
        assert!(!out.terminal);
    }

    #[test]
    fn mountain_car_reset_bounds() {
        let cfg = EnvConfig::mountain_car();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let s = mountain_car_reset(&cfg, &mut rng);
            assert!(s[0] >= MC_START_LOW && s[0] <= MC_START_HIGH);
            assert_eq!(s[1], 0.0);
        }
    }

    #[test]
    fn mountain_car_states_stay_in_bounds() {
        let cfg = EnvConfig::mountain_car();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = mountain_car_reset(&cfg, &mut rng);
        for i in 0..5000 {
            let out = mountain_car_step(&s, i % 3, &cfg).unwrap();
            s = out.next_state;
            assert!(s[0] >= MC_MIN_POS && s[0] <= MC_GOAL_POS);
            assert!(s[1].abs() <= MC_MAX_SPEED);
            if out.terminal {
                break;
            }
        }
    }

    #[test]
    fn steps_are_pure_functions() {
        let cfg = EnvConfig::pendulum();
        let s = state(0.05, -0.2);
        let a = pendulum_step(&s, 2, &cfg).unwrap();
        let b = pendulum_step(&s, 2, &cfg).unwrap();
        assert_eq!(a.next_state, b.next_state);
        let cfg = EnvConfig::mountain_car();
        let s = state(-0.44, 0.013);
        let a = mountain_car_step(&s, 0, &cfg).unwrap();
        let b = mountain_car_step(&s, 0, &cfg).unwrap();
        assert_eq!(a.next_state, b.next_state);
    }

    #[test]
    fn upright_pendulum_never_terminates_unforced() {
        let cfg = EnvConfig::pendulum();
        let mut s = state(0.0, 0.0);
        for _ in 0..3000 {
            let out = pendulum_step(&s, 1, &cfg).unwrap();
            assert!(!out.terminal);
            s = out.next_state;
        }
    }

    #[test]
    fn invalid_action_rejected() {
        let cfg = EnvConfig::pendulum();
        assert!(pendulum_step(&state(0.0, 0.0), 3, &cfg).is_err());
        let cfg = EnvConfig::mountain_car();
        assert!(mountain_car_step(&state(-0.5, 0.0), 9, &cfg).is_err());
    }

    #[test]
    fn env_kind_parse_roundtrip() {
        assert_eq!(EnvKind::parse("pendulum").unwrap(), EnvKind::Pendulum);
        assert_eq!(EnvKind::parse("mountain_car").unwrap(), EnvKind::MountainCar);
        assert!(EnvKind::parse("lunar_lander").is_err());
        for kind in [EnvKind::Pendulum, EnvKind::MountainCar] {
            assert_eq!(EnvKind::parse(kind.name()).unwrap(), kind);
        }
    }
}
