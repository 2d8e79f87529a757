//! Saving and restoring a trained agent as a flat key-value document.
//!
//! The format reuses the `key = value` syntax of run configs. Floats are
//! written in shortest-roundtrip form, so serialize → parse → serialize is
//! byte-identical.

use nalgebra::{DMatrix, DVector};

use super::config::{fmt_f64, fmt_f64_list, KvDoc};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::features::{feature_dim, Rbf, RbfSet};
use crate::ktd::WeightBelief;
use crate::mmae::{FilterBank, LikelihoodForm, WeightingMode};

const FORMAT_TAG: &str = "mmktd-snapshot-v1";

/// A trained agent: basis set, weight belief, and (for bank agents) the
/// noise bank with its current weights.
#[derive(Clone, Debug)]
pub struct AgentSnapshot {
    pub env: EnvKind,
    pub gamma: f64,
    pub set: RbfSet,
    pub belief: WeightBelief,
    pub bank: Option<FilterBank>,
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

fn parse_usize(key: &str, raw: &str) -> Result<usize> {
    raw.parse::<usize>()
        .map_err(|_| Error::parse(format!("key '{key}': invalid integer '{raw}'")))
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

fn require<'a>(doc: &'a KvDoc, key: &str) -> Result<&'a str> {
    doc.get(key)
        .ok_or_else(|| Error::parse(format!("missing required key '{key}'")))
}

impl AgentSnapshot {
    pub fn to_doc(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        let push = |doc: &mut KvDoc, k: &str, v: String| {
            doc.push(k, v).expect("snapshot keys are unique by construction");
        };
        push(&mut doc, "format", FORMAT_TAG.to_string());
        push(&mut doc, "env", self.env.name().to_string());
        push(&mut doc, "gamma", fmt_f64(self.gamma));
        push(&mut doc, "num_actions", self.set.num_actions().to_string());
        push(&mut doc, "rbfs_per_action", self.set.rbfs_per_action().to_string());
        push(&mut doc, "state_dim", self.set.state_dim().to_string());
        push(&mut doc, "include_bias", self.set.include_bias().to_string());
        for a in 0..self.set.num_actions() {
            for n in 0..self.set.rbfs_per_action() {
                let rbf = self.set.rbf(a, n);
                push(
                    &mut doc,
                    &format!("rbf.a{a}.n{n}.mean"),
                    fmt_f64_list(rbf.mean().as_slice()),
                );
                push(
                    &mut doc,
                    &format!("rbf.a{a}.n{n}.cov"),
                    fmt_f64_list(&row_major(rbf.covariance())),
                );
            }
        }
        push(&mut doc, "theta", fmt_f64_list(self.belief.theta().as_slice()));
        push(&mut doc, "cov", fmt_f64_list(&row_major(self.belief.cov())));
        match &self.bank {
            Some(bank) => {
                push(&mut doc, "bank.present", "true".to_string());
                push(&mut doc, "bank.r_candidates", fmt_f64_list(bank.r_candidates()));
                push(&mut doc, "bank.weights", fmt_f64_list(bank.weights()));
                push(&mut doc, "bank.weighting_mode", bank.weighting_mode().name().to_string());
                push(
                    &mut doc,
                    "bank.likelihood_form",
                    bank.likelihood_form().name().to_string(),
                );
            }
            None => push(&mut doc, "bank.present", "false".to_string()),
        }
        doc
    }

    pub fn serialize(&self) -> String {
        self.to_doc().serialize()
    }

    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        let format = require(doc, "format")?;
        if format != FORMAT_TAG {
            return Err(Error::parse(format!(
                "unsupported snapshot format '{format}', expected '{FORMAT_TAG}'"
            )));
        }
        let env = EnvKind::parse(require(doc, "env")?)?;
        let gamma = parse_f64("gamma", require(doc, "gamma")?)?;
        let num_actions = parse_usize("num_actions", require(doc, "num_actions")?)?;
        let rbfs_per_action = parse_usize("rbfs_per_action", require(doc, "rbfs_per_action")?)?;
        let state_dim = parse_usize("state_dim", require(doc, "state_dim")?)?;
        let include_bias = parse_bool("include_bias", require(doc, "include_bias")?)?;
        if num_actions != env.num_actions() || state_dim != env.state_dim() {
            return Err(Error::parse(format!(
                "snapshot dimensions ({num_actions} actions, {state_dim} state) do not match {}",
                env.name()
            )));
        }
        let bank_present = parse_bool("bank.present", require(doc, "bank.present")?)?;

        let mut allowed: Vec<String> = [
            "format",
            "env",
            "gamma",
            "num_actions",
            "rbfs_per_action",
            "state_dim",
            "include_bias",
            "theta",
            "cov",
            "bank.present",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if bank_present {
            for k in [
                "bank.r_candidates",
                "bank.weights",
                "bank.weighting_mode",
                "bank.likelihood_form",
            ] {
                allowed.push(k.to_string());
            }
        }
        for a in 0..num_actions {
            for n in 0..rbfs_per_action {
                allowed.push(format!("rbf.a{a}.n{n}.mean"));
                allowed.push(format!("rbf.a{a}.n{n}.cov"));
            }
        }
        for (k, _) in doc.entries() {
            if !allowed.iter().any(|a| a == k) {
                return Err(Error::parse(format!("unknown key '{k}'")));
            }
        }

        let mut blocks = Vec::with_capacity(num_actions);
        for a in 0..num_actions {
            let mut block = Vec::with_capacity(rbfs_per_action);
            for n in 0..rbfs_per_action {
                let mean_key = format!("rbf.a{a}.n{n}.mean");
                let cov_key = format!("rbf.a{a}.n{n}.cov");
                let mean = parse_f64_list(&mean_key, require(doc, &mean_key)?)?;
                let cov = parse_f64_list(&cov_key, require(doc, &cov_key)?)?;
                if mean.len() != state_dim {
                    return Err(Error::parse(format!(
                        "key '{mean_key}': expected {state_dim} entries, got {}",
                        mean.len()
                    )));
                }
                if cov.len() != state_dim * state_dim {
                    return Err(Error::parse(format!(
                        "key '{cov_key}': expected {} entries, got {}",
                        state_dim * state_dim,
                        cov.len()
                    )));
                }
                block.push(Rbf::new(
                    DVector::from_vec(mean),
                    DMatrix::from_row_slice(state_dim, state_dim, &cov),
                )?);
            }
            blocks.push(block);
        }
        let set = RbfSet::new(blocks, include_bias)?;

        let dim = feature_dim(&set);
        let theta = parse_f64_list("theta", require(doc, "theta")?)?;
        if theta.len() != dim {
            return Err(Error::parse(format!(
                "key 'theta': expected {dim} entries, got {}",
                theta.len()
            )));
        }
        let cov = parse_f64_list("cov", require(doc, "cov")?)?;
        if cov.len() != dim * dim {
            return Err(Error::parse(format!(
                "key 'cov': expected {} entries, got {}",
                dim * dim,
                cov.len()
            )));
        }
        let belief = WeightBelief::new(
            DVector::from_vec(theta),
            DMatrix::from_row_slice(dim, dim, &cov),
        )?;

        let bank = if bank_present {
            let candidates =
                parse_f64_list("bank.r_candidates", require(doc, "bank.r_candidates")?)?;
            let weights = parse_f64_list("bank.weights", require(doc, "bank.weights")?)?;
            let mode = WeightingMode::parse(require(doc, "bank.weighting_mode")?)?;
            let form = LikelihoodForm::parse(require(doc, "bank.likelihood_form")?)?;
            let mut bank = FilterBank::new(candidates, mode, form)?;
            bank.set_weights(weights)?;
            Some(bank)
        } else {
            None
        };

        Ok(AgentSnapshot {
            env,
            gamma,
            set,
            belief,
            bank,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        AgentSnapshot::from_doc(&KvDoc::parse(text)?)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
