//! Flat `key = value` run configuration, plus the grid specification used by
//! value-surface export.
//!
//! Document format: one `key = value` pair per line; blank lines and lines
//! whose first non-whitespace character is `#` are ignored; keys must be
//! unique; unknown keys are rejected. Floats are written in shortest-roundtrip
//! form and lists are comma-separated.

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::features::BranchRule;
use crate::mmae::{LikelihoodForm, WeightingMode};
use crate::policy::{ActiveRule, PolicyKind};

/// An ordered flat key-value document.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        KvDoc::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::parse(format!("line {}: empty key", lineno + 1)));
            }
            if doc.get(key).is_some() {
                return Err(Error::parse(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
            doc.entries.push((key.to_string(), value.to_string()));
        }
        Ok(doc)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Append an entry; duplicate keys are a caller bug and rejected.
    pub fn push(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if self.get(key).is_some() {
            return Err(Error::invalid(format!("duplicate key '{key}'")));
        }
        self.entries.push((key.to_string(), value.into()));
        Ok(())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Shortest-roundtrip float formatting shared by configs, snapshots, and
/// anything else that must re-read its own numbers exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_f64_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::parse(format!("key '{key}': invalid float '{raw}'")))
}

fn parse_f64_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    if raw.trim().is_empty() {
        return Err(Error::parse(format!("key '{key}': empty list")));
    }
    raw.split(',')
        .map(|part| parse_f64(key, part.trim()))
        .collect()
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::parse(format!(
            "key '{key}': expected true or false, got '{other}'"
        ))),
    }
}

fn parse_usize(key: &str, raw: &str) -> Result<usize> {
    raw.parse::<usize>()
        .map_err(|_| Error::parse(format!("key '{key}': invalid integer '{raw}'")))
}

fn parse_u64(key: &str, raw: &str) -> Result<u64> {
    raw.parse::<u64>()
        .map_err(|_| Error::parse(format!("key '{key}': invalid integer '{raw}'")))
}

fn require<'a>(doc: &'a KvDoc, key: &str) -> Result<&'a str> {
    doc.get(key)
        .ok_or_else(|| Error::parse(format!("missing required key '{key}'")))
}

/// The three agent variants compared by the benchmark harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    /// Single filter with a fixed noise setting, active behavior policy.
    Ktd,
    /// Full noise bank, active behavior policy.
    Mmktd,
    /// Full noise bank, uniform-random behavior policy (passive).
    MmktdP,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Ktd, AgentKind::Mmktd, AgentKind::MmktdP];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ktd" => Ok(AgentKind::Ktd),
            "mmktd" => Ok(AgentKind::Mmktd),
            "mmktd_p" => Ok(AgentKind::MmktdP),
            other => Err(Error::parse(format!("unknown agent '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Ktd => "ktd",
            AgentKind::Mmktd => "mmktd",
            AgentKind::MmktdP => "mmktd_p",
        }
    }

    /// Behavior policy used while training.
    pub fn behavior(self) -> PolicyKind {
        match self {
            AgentKind::Ktd | AgentKind::Mmktd => PolicyKind::Active,
            AgentKind::MmktdP => PolicyKind::UniformRandom,
        }
    }

    /// Whether this agent runs the multi-mode noise bank.
    pub fn uses_bank(self) -> bool {
        !matches!(self, AgentKind::Ktd)
    }
}

/// Everything needed to reproduce a training/testing run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub env: EnvKind,
    pub agent: AgentKind,
    pub gamma: f64,
    /// Initial weight vector; `None` means all zeros.
    pub theta0: Option<Vec<f64>>,
    /// Initial weight covariance P₀ = p0_scale·I.
    pub p0_scale: f64,
    /// Process noise Q = q_scale·I.
    pub q_scale: f64,
    /// Fixed observation-noise setting for the single-filter agent.
    pub single_r: f64,
    /// Observation-noise candidates for the bank agents.
    pub r_candidates: Vec<f64>,
    pub weighting_mode: WeightingMode,
    pub likelihood_form: LikelihoodForm,
    /// How agents with active behavior score candidate actions during
    /// training: rank measurement rows formed at the current state
    /// (`surrogate`), rank rows formed from each candidate's probed
    /// successor (`lookahead`), or exploit the optimistic value estimate
    /// (`greedy`).
    pub active_rule: ActiveRule,
    /// Whether basis functions adapt online during training.
    pub rgd_enabled: bool,
    pub branch_rule: BranchRule,
    pub lambda_mu: f64,
    pub lambda_sigma: f64,
    /// Grid of basis centers: one list of coordinates per state dimension.
    pub rbf_means: Vec<Vec<f64>>,
    /// Initial basis covariance Σ = rbf_sigma_scale·I.
    pub rbf_sigma_scale: f64,
    /// Optional per-dimension variances; when set, Σ = diag(rbf_sigma_diag)
    /// instead of the isotropic rbf_sigma_scale·I.
    pub rbf_sigma_diag: Option<Vec<f64>>,
    pub include_bias: bool,
    pub train_episodes: usize,
    pub test_trials: usize,
    pub repeats: usize,
    pub master_seed: u64,
    /// Per-episode step-cap overrides; `None` uses the environment default.
    pub max_steps_train: Option<usize>,
    pub max_steps_test: Option<usize>,
}

/// The full observation-noise candidate set used by both benchmark defaults.
pub const DEFAULT_R_CANDIDATES: [f64; 11] = [
    0.01, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0,
];

impl RunConfig {
    /// Inverted-pendulum benchmark defaults.
    pub fn pendulum_default() -> Self {
        RunConfig {
            env: EnvKind::Pendulum,
            agent: AgentKind::Mmktd,
            gamma: 0.95,
            theta0: None,
            p0_scale: 10.0,
            q_scale: 1e-3,
            single_r: 1.0,
            r_candidates: DEFAULT_R_CANDIDATES.to_vec(),
            weighting_mode: WeightingMode::Memoryless,
            likelihood_form: LikelihoodForm::FullGaussian,
            active_rule: ActiveRule::Surrogate,
            rgd_enabled: false,
            branch_rule: BranchRule::AbsResidual,
            lambda_mu: 200.0,
            lambda_sigma: 100.0,
            rbf_means: vec![
                vec![-std::f64::consts::FRAC_PI_4, 0.0, std::f64::consts::FRAC_PI_4],
                vec![-0.5, 0.0, 0.5],
            ],
            rbf_sigma_scale: 1.0,
            rbf_sigma_diag: None,
            include_bias: true,
            train_episodes: 30,
            test_trials: 50,
            repeats: 10,
            master_seed: 7,
            max_steps_train: None,
            max_steps_test: None,
        }
    }

    /// Mountain-car benchmark defaults.
    pub fn mountain_car_default() -> Self {
        RunConfig {
            env: EnvKind::MountainCar,
            agent: AgentKind::Mmktd,
            gamma: 0.95,
            theta0: None,
            p0_scale: 10.0,
            q_scale: 1e-3,
            single_r: 1.0,
            r_candidates: DEFAULT_R_CANDIDATES.to_vec(),
            weighting_mode: WeightingMode::Memoryless,
            likelihood_form: LikelihoodForm::FullGaussian,
            active_rule: ActiveRule::Sampled,
            rgd_enabled: false,
            branch_rule: BranchRule::AbsResidual,
            lambda_mu: 100.0,
            lambda_sigma: 80.0,
            rbf_means: vec![
                vec![-0.775, -0.35, 0.775],
                vec![-0.035, 0.0, 0.035],
            ],
            rbf_sigma_scale: 1.0,
            rbf_sigma_diag: Some(vec![1.0, 0.001225]),
            include_bias: true,
            train_episodes: 10,
            test_trials: 50,
            repeats: 10,
            master_seed: 1,
            max_steps_train: None,
            max_steps_test: None,
        }
    }

    pub fn default_for(env: EnvKind) -> Self {
        match env {
            EnvKind::Pendulum => RunConfig::pendulum_default(),
            EnvKind::MountainCar => RunConfig::mountain_car_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        for (name, v) in [
            ("p0_scale", self.p0_scale),
            ("q_scale", self.q_scale),
            ("single_r", self.single_r),
            ("lambda_mu", self.lambda_mu),
            ("lambda_sigma", self.lambda_sigma),
            ("rbf_sigma_scale", self.rbf_sigma_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if let Some(diag) = &self.rbf_sigma_diag {
            if diag.len() != self.env.state_dim() {
                return Err(Error::invalid(format!(
                    "rbf_sigma_diag needs one variance per state dimension, got {} for {}",
                    diag.len(),
                    self.env.state_dim()
                )));
            }
            if diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::invalid(
                    "rbf_sigma_diag entries must be positive and finite",
                ));
            }
        }
        if self.r_candidates.is_empty()
            || self.r_candidates.iter().any(|r| !(*r > 0.0) || !r.is_finite())
        {
            return Err(Error::invalid(
                "r_candidates must be a non-empty list of positive finite values",
            ));
        }
        if self.rbf_means.len() != self.env.state_dim() {
            return Err(Error::invalid(format!(
                "rbf_means has {} dimensions but {} has {} state dimensions",
                self.rbf_means.len(),
                self.env.name(),
                self.env.state_dim()
            )));
        }
        if self.rbf_means.iter().any(|m| m.is_empty()) {
            return Err(Error::invalid("each rbf_means dimension needs at least one center"));
        }
        if self.train_episodes == 0 {
            return Err(Error::invalid("train_episodes must be at least 1"));
        }
        if self.test_trials == 0 {
            return Err(Error::invalid("test_trials must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if self.max_steps_train == Some(0) || self.max_steps_test == Some(0) {
            return Err(Error::invalid("step caps must be at least 1"));
        }
        if let Some(t0) = &self.theta0 {
            let rbfs: usize = self.rbf_means.iter().map(|m| m.len()).product();
            let block = rbfs + usize::from(self.include_bias);
            let dim = block * self.env.num_actions();
            if t0.len() != dim {
                return Err(Error::invalid(format!(
                    "theta0 has {} entries but the feature dimension is {dim}",
                    t0.len()
                )));
            }
            if t0.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("theta0 entries must be finite"));
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        let push = |doc: &mut KvDoc, k: &str, v: String| {
            doc.push(k, v).expect("config keys are unique by construction");
        };
        push(&mut doc, "env", self.env.name().to_string());
        push(&mut doc, "agent", self.agent.name().to_string());
        push(&mut doc, "gamma", fmt_f64(self.gamma));
        if let Some(t0) = &self.theta0 {
            push(&mut doc, "theta0", fmt_f64_list(t0));
        }
        push(&mut doc, "p0_scale", fmt_f64(self.p0_scale));
        push(&mut doc, "q_scale", fmt_f64(self.q_scale));
        push(&mut doc, "single_r", fmt_f64(self.single_r));
        push(&mut doc, "r_candidates", fmt_f64_list(&self.r_candidates));
        push(&mut doc, "weighting_mode", self.weighting_mode.name().to_string());
        push(&mut doc, "likelihood_form", self.likelihood_form.name().to_string());
        push(&mut doc, "active_rule", self.active_rule.name().to_string());
        push(&mut doc, "rgd_enabled", self.rgd_enabled.to_string());
        push(&mut doc, "branch_rule", self.branch_rule.name().to_string());
        push(&mut doc, "lambda_mu", fmt_f64(self.lambda_mu));
        push(&mut doc, "lambda_sigma", fmt_f64(self.lambda_sigma));
        for (i, means) in self.rbf_means.iter().enumerate() {
            push(&mut doc, &format!("rbf_means_dim{}", i + 1), fmt_f64_list(means));
        }
        push(&mut doc, "rbf_sigma_scale", fmt_f64(self.rbf_sigma_scale));
        if let Some(diag) = &self.rbf_sigma_diag {
            push(&mut doc, "rbf_sigma_diag", fmt_f64_list(diag));
        }
        push(&mut doc, "include_bias", self.include_bias.to_string());
        push(&mut doc, "train_episodes", self.train_episodes.to_string());
        push(&mut doc, "test_trials", self.test_trials.to_string());
        push(&mut doc, "repeats", self.repeats.to_string());
        push(&mut doc, "master_seed", self.master_seed.to_string());
        if let Some(n) = self.max_steps_train {
            push(&mut doc, "max_steps_train", n.to_string());
        }
        if let Some(n) = self.max_steps_test {
            push(&mut doc, "max_steps_test", n.to_string());
        }
        doc
    }

    pub fn serialize(&self) -> String {
        self.to_doc().serialize()
    }

    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        let env = EnvKind::parse(require(doc, "env")?)?;
        let mut allowed: Vec<String> = [
            "env",
            "agent",
            "gamma",
            "theta0",
            "p0_scale",
            "q_scale",
            "single_r",
            "r_candidates",
            "weighting_mode",
            "likelihood_form",
            "active_rule",
            "rgd_enabled",
            "branch_rule",
            "lambda_mu",
            "lambda_sigma",
            "rbf_sigma_scale",
            "rbf_sigma_diag",
            "include_bias",
            "train_episodes",
            "test_trials",
            "repeats",
            "master_seed",
            "max_steps_train",
            "max_steps_test",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for i in 0..env.state_dim() {
            allowed.push(format!("rbf_means_dim{}", i + 1));
        }
        for (k, _) in doc.entries() {
            if !allowed.iter().any(|a| a == k) {
                return Err(Error::parse(format!("unknown key '{k}'")));
            }
        }

        let mut rbf_means = Vec::with_capacity(env.state_dim());
        for i in 0..env.state_dim() {
            let key = format!("rbf_means_dim{}", i + 1);
            rbf_means.push(parse_f64_list(&key, require(doc, &key)?)?);
        }
        let theta0 = match doc.get("theta0") {
            Some(raw) => Some(parse_f64_list("theta0", raw)?),
            None => None,
        };
        let rbf_sigma_diag = match doc.get("rbf_sigma_diag") {
            Some(raw) => Some(parse_f64_list("rbf_sigma_diag", raw)?),
            None => None,
        };
        let cfg = RunConfig {
            env,
            agent: AgentKind::parse(require(doc, "agent")?)?,
            gamma: parse_f64("gamma", require(doc, "gamma")?)?,
            theta0,
            p0_scale: parse_f64("p0_scale", require(doc, "p0_scale")?)?,
            q_scale: parse_f64("q_scale", require(doc, "q_scale")?)?,
            single_r: parse_f64("single_r", require(doc, "single_r")?)?,
            r_candidates: parse_f64_list("r_candidates", require(doc, "r_candidates")?)?,
            weighting_mode: WeightingMode::parse(require(doc, "weighting_mode")?)?,
            likelihood_form: LikelihoodForm::parse(require(doc, "likelihood_form")?)?,
            active_rule: ActiveRule::parse(require(doc, "active_rule")?)?,
            rgd_enabled: parse_bool("rgd_enabled", require(doc, "rgd_enabled")?)?,
            branch_rule: BranchRule::parse(require(doc, "branch_rule")?)?,
            lambda_mu: parse_f64("lambda_mu", require(doc, "lambda_mu")?)?,
            lambda_sigma: parse_f64("lambda_sigma", require(doc, "lambda_sigma")?)?,
            rbf_means,
            rbf_sigma_scale: parse_f64("rbf_sigma_scale", require(doc, "rbf_sigma_scale")?)?,
            rbf_sigma_diag,
            include_bias: parse_bool("include_bias", require(doc, "include_bias")?)?,
            train_episodes: parse_usize("train_episodes", require(doc, "train_episodes")?)?,
            test_trials: match doc.get("test_trials") {
                Some(raw) => parse_usize("test_trials", raw)?,
                None => 50,
            },
            repeats: match doc.get("repeats") {
                Some(raw) => parse_usize("repeats", raw)?,
                None => 10,
            },
            master_seed: parse_u64("master_seed", require(doc, "master_seed")?)?,
            max_steps_train: match doc.get("max_steps_train") {
                Some(raw) => Some(parse_usize("max_steps_train", raw)?),
                None => None,
            },
            max_steps_test: match doc.get("max_steps_test") {
                Some(raw) => Some(parse_usize("max_steps_test", raw)?),
                None => None,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        RunConfig::from_doc(&KvDoc::parse(text)?)
    }
}

/// One axis of a rectangular evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridDim {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridDim {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + step * i as f64).collect()
    }
}

/// Rectangular grid specification, parsed from `min:max:count` per dimension,
/// dimensions separated by commas (e.g. `-1.5:1.5:61,-2:2:41`).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub dims: Vec<GridDim>,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::parse("empty grid specification"));
        }
        let mut dims = Vec::new();
        for part in text.split(',') {
            let fields: Vec<&str> = part.split(':').collect();
            if fields.len() != 3 {
                return Err(Error::parse(format!(
                    "grid dimension '{part}' must be min:max:count"
                )));
            }
            let min = fields[0].trim().parse::<f64>().map_err(|_| {
                Error::parse(format!("grid dimension '{part}': invalid min"))
            })?;
            let max = fields[1].trim().parse::<f64>().map_err(|_| {
                Error::parse(format!("grid dimension '{part}': invalid max"))
            })?;
            let count = fields[2].trim().parse::<usize>().map_err(|_| {
                Error::parse(format!("grid dimension '{part}': invalid count"))
            })?;
            if count == 0 {
                return Err(Error::parse(format!(
                    "grid dimension '{part}': count must be at least 1"
                )));
            }
            if !(min <= max) || !min.is_finite() || !max.is_finite() {
                return Err(Error::parse(format!(
                    "grid dimension '{part}': need finite min <= max"
                )));
            }
            dims.push(GridDim { min, max, count });
        }
        Ok(GridSpec { dims })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().map(|d| d.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kvdoc_parses_comments_blanks_and_pairs() {
        let doc = KvDoc::parse("# header\n\n a = 1 \nb=two words\n   # more\n").unwrap();
        assert_eq!(doc.get("a"), Some("1"));
        assert_eq!(doc.get("b"), Some("two words"));
        assert_eq!(doc.entries().len(), 2);
    }

    #[test]
    fn kvdoc_rejects_duplicates_and_bad_lines() {
        let err = KvDoc::parse("a = 1\na = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        let err = KvDoc::parse("just words\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(KvDoc::parse("= 3\n").is_err());
    }

    #[test]
    fn kvdoc_serialize_parse_roundtrip() {
        let mut doc = KvDoc::new();
        doc.push("x", "1.5").unwrap();
        doc.push("name", "pendulum").unwrap();
        let text = doc.serialize();
        assert_eq!(KvDoc::parse(&text).unwrap(), doc);
        assert!(doc.push("x", "again").is_err());
    }

    #[test]
    fn fmt_f64_roundtrips_exactly() {
        for &x in &[
            0.1,
            1.0 / 3.0,
            -0.775,
            std::f64::consts::FRAC_PI_4,
            1e-300,
            12345.678901234567,
            0.0,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn default_configs_validate_and_roundtrip() {
        for cfg in [RunConfig::pendulum_default(), RunConfig::mountain_car_default()] {
            cfg.validate().unwrap();
            let text = cfg.serialize();
            let back = RunConfig::parse(&text).unwrap();
            assert_eq!(back.serialize(), text);
            assert_eq!(back.env, cfg.env);
            assert_eq!(back.r_candidates, cfg.r_candidates);
            assert_eq!(back.rbf_means, cfg.rbf_means);
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut text = RunConfig::pendulum_default().serialize();
        text.push_str("mystery_knob = 7\n");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("mystery_knob"), "{err}");
    }

    #[test]
    fn missing_required_key_is_rejected() {
        let cfg = RunConfig::pendulum_default();
        let text: String = cfg
            .serialize()
            .lines()
            .filter(|l| !l.starts_with("gamma"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn optional_keys_take_defaults() {
        let cfg = RunConfig::pendulum_default();
        let text: String = cfg
            .serialize()
            .lines()
            .filter(|l| !l.starts_with("test_trials") && !l.starts_with("repeats"))
            .map(|l| format!("{l}\n"))
            .collect();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back.test_trials, 50);
        assert_eq!(back.repeats, 10);
    }

    #[test]
    fn zero_train_episodes_rejected() {
        let mut cfg = RunConfig::pendulum_default();
        cfg.train_episodes = 0;
        assert!(cfg.validate().is_err());
        let text = cfg.serialize();
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn bad_values_name_the_key() {
        let text = RunConfig::pendulum_default()
            .serialize()
            .replace("gamma = 0.95", "gamma = fast");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");

        let text = RunConfig::pendulum_default()
            .serialize()
            .replace("rgd_enabled = false", "rgd_enabled = yes");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("rgd_enabled"), "{err}");
    }

    #[test]
    fn theta0_length_is_checked() {
        let mut cfg = RunConfig::pendulum_default();
        cfg.theta0 = Some(vec![0.0; 7]);
        assert!(cfg.validate().is_err());
        cfg.theta0 = Some(vec![0.0; 30]);
        cfg.validate().unwrap();
        let back = RunConfig::parse(&cfg.serialize()).unwrap();
        assert_eq!(back.theta0.as_deref(), Some(&[0.0; 30][..]));
    }

    #[test]
    fn agent_kind_parse_roundtrip_and_behavior() {
        for kind in AgentKind::ALL {
            assert_eq!(AgentKind::parse(kind.name()).unwrap(), kind);
        }
        assert!(AgentKind::parse("nfq").is_err());
        assert_eq!(AgentKind::Ktd.behavior(), PolicyKind::Active);
        assert_eq!(AgentKind::Mmktd.behavior(), PolicyKind::Active);
        assert_eq!(AgentKind::MmktdP.behavior(), PolicyKind::UniformRandom);
        assert!(!AgentKind::Ktd.uses_bank());
        assert!(AgentKind::Mmktd.uses_bank());
    }

    #[test]
    fn grid_spec_points_and_errors() {
        let g = GridSpec::parse("-1:1:3,0:2:2").unwrap();
        assert_eq!(g.dims.len(), 2);
        assert_eq!(g.dims[0].points(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(g.dims[1].points(), vec![0.0, 2.0]);
        assert_eq!(g.len(), 6);

        let single = GridSpec::parse("0.25:9:1").unwrap();
        assert_eq!(single.dims[0].points(), vec![0.25]);
        assert_eq!(single.len(), 1);

        assert!(GridSpec::parse("").is_err());
        assert!(GridSpec::parse("1:2").is_err());
        assert!(GridSpec::parse("1:2:0").is_err());
        assert!(GridSpec::parse("3:1:5").is_err());
        assert!(GridSpec::parse("a:1:5").is_err());
    }
}
