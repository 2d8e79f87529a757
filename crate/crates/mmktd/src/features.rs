//! Radial-basis-function features laid out in per-action blocks, plus
//! restricted gradient-descent adaptation of the basis means and covariances.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::envs::Transition;
use crate::error::{Error, Result};
use crate::ktd::{q_value, WeightBelief};

const COV_SYMMETRY_TOL: f64 = 1e-12;

/// A single Gaussian radial basis function with full covariance.
///
/// The covariance is validated (symmetric, positive definite) at
/// construction; the Cholesky factor is kept alongside it so evaluation and
/// gradient steps never re-factorize.
#[derive(Clone, Debug)]
pub struct Rbf {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Rbf {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != covariance.ncols() {
            return Err(Error::invalid(format!(
                "rbf covariance must be square, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.len() != covariance.nrows() {
            return Err(Error::invalid(format!(
                "rbf mean dimension {} does not match covariance dimension {}",
                mean.len(),
                covariance.nrows()
            )));
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if !(asym <= COV_SYMMETRY_TOL) {
            return Err(Error::invalid(format!(
                "rbf covariance asymmetry {asym:e} exceeds {COV_SYMMETRY_TOL:e}"
            )));
        }
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::degenerate("rbf covariance is not positive definite"))?;
        Ok(Rbf {
            mean,
            covariance,
            chol,
        })
    }

    /// Isotropic Gaussian: covariance = scale·I.
    pub fn isotropic(mean: DVector<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid(format!(
                "rbf covariance scale must be positive, got {scale}"
            )));
        }
        let dim = mean.len();
        Rbf::new(mean, DMatrix::identity(dim, dim) * scale)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Σ⁻¹·d via the cached Cholesky factor.
    fn solve(&self, d: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(d)
    }
}

/// Evaluate one RBF: exp(−½ (s−μ)ᵀ Σ⁻¹ (s−μ)). Exactly 1 at s = μ.
pub fn eval_rbf(rbf: &Rbf, s: &DVector<f64>) -> Result<f64> {
    if s.len() != rbf.mean.len() {
        return Err(Error::invalid(format!(
            "state dimension {} does not match rbf dimension {}",
            s.len(),
            rbf.mean.len()
        )));
    }
    let d = s - &rbf.mean;
    let quad = d.dot(&rbf.solve(&d));
    Ok((-0.5 * quad).exp())
}

/// A per-action bank of RBFs with an optional constant bias entry per block.
///
/// The feature vector for (s, a) places [bias, φ₁(s), …, φ_N(s)] in action
/// a's block and zeros everywhere else.
#[derive(Clone, Debug)]
pub struct RbfSet {
    blocks: Vec<Vec<Rbf>>,
    include_bias: bool,
}

impl RbfSet {
    pub fn new(blocks: Vec<Vec<Rbf>>, include_bias: bool) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("rbf set needs at least one action block"));
        }
        let n = blocks[0].len();
        if n == 0 {
            return Err(Error::invalid("rbf set needs at least one rbf per action"));
        }
        let dim = blocks[0][0].mean.len();
        for (a, block) in blocks.iter().enumerate() {
            if block.len() != n {
                return Err(Error::invalid(format!(
                    "action block {a} holds {} rbfs, expected {n}",
                    block.len()
                )));
            }
            for rbf in block {
                if rbf.mean.len() != dim {
                    return Err(Error::invalid(format!(
                        "action block {a} mixes state dimensions {dim} and {}",
                        rbf.mean.len()
                    )));
                }
            }
        }
        Ok(RbfSet {
            blocks,
            include_bias,
        })
    }

    /// Build identical per-action grids from the cartesian product of
    /// per-dimension center lists, each with covariance sigma_scale·I.
    pub fn from_grid(
        means_per_dim: &[Vec<f64>],
        sigma_scale: f64,
        num_actions: usize,
        include_bias: bool,
    ) -> Result<Self> {
        let variances = vec![sigma_scale; means_per_dim.len()];
        RbfSet::from_grid_diag(means_per_dim, &variances, num_actions, include_bias)
    }

    /// Like `from_grid`, but with one variance per state dimension, so the
    /// basis can resolve dimensions whose natural scales differ by orders of
    /// magnitude. Every RBF gets covariance diag(variances).
    pub fn from_grid_diag(
        means_per_dim: &[Vec<f64>],
        variances: &[f64],
        num_actions: usize,
        include_bias: bool,
    ) -> Result<Self> {
        if means_per_dim.is_empty() || means_per_dim.iter().any(|d| d.is_empty()) {
            return Err(Error::invalid("rbf grid needs at least one center per dimension"));
        }
        if num_actions == 0 {
            return Err(Error::invalid("rbf grid needs at least one action"));
        }
        let dim = means_per_dim.len();
        if variances.len() != dim {
            return Err(Error::invalid(format!(
                "need one variance per state dimension, got {} for {dim} dimensions",
                variances.len()
            )));
        }
        let mut centers: Vec<DVector<f64>> = vec![DVector::zeros(0)];
        for axis in means_per_dim {
            let mut next = Vec::with_capacity(centers.len() * axis.len());
            for prefix in &centers {
                for &c in axis {
                    let mut v = Vec::with_capacity(prefix.len() + 1);
                    v.extend(prefix.iter().copied());
                    v.push(c);
                    next.push(DVector::from_vec(v));
                }
            }
            centers = next;
        }
        debug_assert!(centers.iter().all(|c| c.len() == dim));
        let cov = DMatrix::from_diagonal(&DVector::from_row_slice(variances));
        let block: Vec<Rbf> = centers
            .into_iter()
            .map(|mean| Rbf::new(mean, cov.clone()))
            .collect::<Result<_>>()?;
        let blocks = vec![block; num_actions];
        RbfSet::new(blocks, include_bias)
    }

    pub fn num_actions(&self) -> usize {
        self.blocks.len()
    }

    pub fn rbfs_per_action(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn include_bias(&self) -> bool {
        self.include_bias
    }

    pub fn state_dim(&self) -> usize {
        self.blocks[0][0].mean.len()
    }

    /// Entries per action block: N RBFs plus the optional bias.
    pub fn block_size(&self) -> usize {
        self.rbfs_per_action() + usize::from(self.include_bias)
    }

    /// Index of RBF `n` of action `a` within the full feature vector.
    pub fn feature_index(&self, action: usize, n: usize) -> usize {
        action * self.block_size() + usize::from(self.include_bias) + n
    }

    pub fn rbf(&self, action: usize, n: usize) -> &Rbf {
        &self.blocks[action][n]
    }
}

/// Total feature dimension: (N + bias) · D.
pub fn feature_dim(set: &RbfSet) -> usize {
    set.block_size() * set.num_actions()
}

/// Assemble the block feature vector φ(s, a).
pub fn build_features(set: &RbfSet, s: &DVector<f64>, a: usize) -> Result<DVector<f64>> {
    if a >= set.num_actions() {
        return Err(Error::invalid(format!(
            "action index {a} out of range 0..{}",
            set.num_actions()
        )));
    }
    let mut out = DVector::zeros(feature_dim(set));
    let base = a * set.block_size();
    let mut offset = base;
    if set.include_bias {
        out[offset] = 1.0;
        offset += 1;
    }
    for (n, rbf) in set.blocks[a].iter().enumerate() {
        out[offset + n] = eval_rbf(rbf, s)?;
    }
    Ok(out)
}

/// Which side of the restricted-gradient branch ran for a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgdBranch {
    Covariances,
    Means,
}

/// How the residual factor in the basis-adaptation update is interpreted;
/// see `RgdConfig::branch_rule`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchRule {
    /// Magnitude form: S^½ = |δ|; covariance branch iff S^½·Q > 0.
    AbsResidual,
    /// S^½ replaced by the signed TD error δ in both the branch condition
    /// and the update magnitude.
    SignedResidual,
}

impl BranchRule {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "abs_residual" => Ok(BranchRule::AbsResidual),
            "signed_residual" => Ok(BranchRule::SignedResidual),
            other => Err(Error::parse(format!("unknown branch rule '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchRule::AbsResidual => "abs_residual",
            BranchRule::SignedResidual => "signed_residual",
        }
    }
}

/// Step sizes and branch interpretation for restricted gradient descent.
#[derive(Clone, Copy, Debug)]
pub struct RgdConfig {
    pub lambda_mu: f64,
    pub lambda_sigma: f64,
    pub branch_rule: BranchRule,
}

impl RgdConfig {
    pub fn new(lambda_mu: f64, lambda_sigma: f64, branch_rule: BranchRule) -> Result<Self> {
        if !(lambda_mu > 0.0) || !(lambda_sigma > 0.0) {
            return Err(Error::invalid(format!(
                "rgd step sizes must be positive, got lambda_mu={lambda_mu}, lambda_sigma={lambda_sigma}"
            )));
        }
        Ok(RgdConfig {
            lambda_mu,
            lambda_sigma,
            branch_rule,
        })
    }
}

/// Outcome of one rgd_update call, for diagnostics.
#[derive(Clone, Copy, Debug, Default)]
pub struct RgdReport {
    /// None when the TD residual was exactly zero (no-op).
    pub branch: Option<RgdBranch>,
    /// Covariance updates reverted because they lost positive definiteness.
    pub reverted: usize,
}

/// One restricted gradient step on the RBFs of the taken action's block.
///
/// Computes the squared TD objective S = (Q(s,a) − target)², then updates
/// EITHER every covariance OR every mean of the block — never both. The shared
/// gradient factor is g = 2·sfac·Q(s,a), where sfac is |δ| or δ per the branch
/// rule; each RBF's mean moves along −Σ⁻¹(s−μ) times λ_μ·g and its covariance
/// along −Σ⁻¹(s−μ)(s−μ)ᵀΣ⁻¹ times λ_Σ·g. A covariance update that loses
/// positive definiteness is reverted and tallied, never an error.
pub fn rgd_update(
    set: &mut RbfSet,
    cfg: &RgdConfig,
    t: &Transition,
    belief: &WeightBelief,
    gamma: f64,
) -> Result<RgdReport> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0,1], got {gamma}")));
    }
    if t.action >= set.num_actions() {
        return Err(Error::invalid(format!(
            "transition action {} out of range 0..{}",
            t.action,
            set.num_actions()
        )));
    }
    if belief.theta().len() != feature_dim(set) {
        return Err(Error::invalid(format!(
            "belief dimension {} does not match feature dimension {}",
            belief.theta().len(),
            feature_dim(set)
        )));
    }

    let q = q_value(set, belief, &t.state, t.action)?;
    let target = if t.terminal {
        t.reward
    } else {
        let mut best = f64::NEG_INFINITY;
        for a in 0..set.num_actions() {
            let qa = q_value(set, belief, &t.next_state, a)?;
            if qa > best {
                best = qa;
            }
        }
        t.reward + gamma * best
    };
    let delta = q - target;
    if delta == 0.0 {
        return Ok(RgdReport::default());
    }
    let sfac = match cfg.branch_rule {
        BranchRule::AbsResidual => delta.abs(),
        BranchRule::SignedResidual => delta,
    };
    let covariance_branch = sfac * q > 0.0;
    let mut report = RgdReport {
        branch: Some(if covariance_branch {
            RgdBranch::Covariances
        } else {
            RgdBranch::Means
        }),
        reverted: 0,
    };

    // The displayed update scales every RBF of the taken block by the same
    // scalar; a zero Q value therefore zeroes the whole step.
    let g = 2.0 * sfac * q;
    if g == 0.0 {
        return Ok(report);
    }

    let n_rbfs = set.rbfs_per_action();
    for n in 0..n_rbfs {
        let rbf = &set.blocks[t.action][n];
        let d = &t.state - rbf.mean();
        let y = rbf.solve(&d);
        if covariance_branch {
            let mut candidate = rbf.covariance() - (&y * y.transpose()) * (cfg.lambda_sigma * g);
            candidate = (&candidate + candidate.transpose()) * 0.5;
            match Rbf::new(rbf.mean().clone(), candidate) {
                Ok(updated) => set.blocks[t.action][n] = updated,
                Err(_) => report.reverted += 1,
            }
        } else {
            let new_mean = rbf.mean() - y * (cfg.lambda_mu * g);
            // Only the mean moves; the validated covariance is reused as-is.
            let updated = Rbf {
                mean: new_mean,
                covariance: rbf.covariance.clone(),
                chol: rbf.chol.clone(),
            };
            set.blocks[t.action][n] = updated;
        }
    }
    Ok(report)
}
