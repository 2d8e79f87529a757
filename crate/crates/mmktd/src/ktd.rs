//! Kalman temporal-difference core: the weight belief, the linear state
//! model, TD measurement construction, and the Joseph-form update.

use nalgebra::{DMatrix, DVector};

use crate::envs::Transition;
use crate::error::{Error, Result};
use crate::features::{build_features, feature_dim, RbfSet};

const BELIEF_SYMMETRY_TOL: f64 = 1e-10;

pub(crate) fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Gaussian belief over the value-function weights: mean θ and covariance P.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightBelief {
    theta: DVector<f64>,
    cov: DMatrix<f64>,
}

impl WeightBelief {
    pub fn new(theta: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() != theta.len() {
            return Err(Error::invalid(format!(
                "belief covariance {}x{} does not match weight dimension {}",
                cov.nrows(),
                cov.ncols(),
                theta.len()
            )));
        }
        let asym = (&cov - cov.transpose()).abs().max();
        if !(asym <= BELIEF_SYMMETRY_TOL) {
            return Err(Error::invalid(format!(
                "belief covariance asymmetry {asym:e} exceeds {BELIEF_SYMMETRY_TOL:e}"
            )));
        }
        Ok(WeightBelief {
            theta,
            cov: symmetrized(cov),
        })
    }

    /// Zero weights with covariance scale·I — the standard initial belief.
    pub fn isotropic(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("belief dimension must be positive"));
        }
        if !(scale > 0.0) {
            return Err(Error::invalid(format!(
                "initial covariance scale must be positive, got {scale}"
            )));
        }
        Ok(WeightBelief {
            theta: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * scale,
        })
    }

    /// Internal fast path: trusts the parts, re-symmetrizing only.
    pub(crate) fn from_parts(theta: DVector<f64>, cov: DMatrix<f64>) -> Self {
        WeightBelief {
            theta,
            cov: symmetrized(cov),
        }
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// Linear dynamic model of the weights: θ ← Fθ + w, w ~ N(0, Q), plus the
/// discount used to assemble TD measurements.
#[derive(Clone, Debug)]
pub struct StateModel {
    transition: DMatrix<f64>,
    process_noise: DMatrix<f64>,
    discount: f64,
    /// Identity transitions skip the F·P·Fᵀ products in `predict`.
    identity_transition: bool,
}

impl StateModel {
    pub fn new(transition: DMatrix<f64>, process_noise: DMatrix<f64>, discount: f64) -> Result<Self> {
        if transition.nrows() != transition.ncols() {
            return Err(Error::invalid("transition matrix must be square"));
        }
        if process_noise.nrows() != process_noise.ncols()
            || process_noise.nrows() != transition.nrows()
        {
            return Err(Error::invalid(
                "process noise dimensions must match the transition matrix",
            ));
        }
        let asym = (&process_noise - process_noise.transpose()).abs().max();
        if !(asym <= BELIEF_SYMMETRY_TOL) {
            return Err(Error::invalid(format!(
                "process noise asymmetry {asym:e} exceeds {BELIEF_SYMMETRY_TOL:e}"
            )));
        }
        // PSD check with a tiny diagonal lift so q = 0 passes.
        let dim = process_noise.nrows();
        let lifted = &process_noise + DMatrix::<f64>::identity(dim, dim) * 1e-12;
        if lifted.cholesky().is_none() {
            return Err(Error::invalid("process noise must be positive semidefinite"));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::invalid(format!(
                "discount must lie in [0,1], got {discount}"
            )));
        }
        let identity_transition = transition == DMatrix::identity(dim, dim);
        Ok(StateModel {
            transition,
            process_noise: symmetrized(process_noise),
            discount,
            identity_transition,
        })
    }

    /// Identity transition with process noise q_scale·I — the default model.
    pub fn isotropic(dim: usize, q_scale: f64, discount: f64) -> Result<Self> {
        if q_scale < 0.0 {
            return Err(Error::invalid(format!(
                "process noise scale must be non-negative, got {q_scale}"
            )));
        }
        StateModel::new(
            DMatrix::identity(dim, dim),
            DMatrix::identity(dim, dim) * q_scale,
            discount,
        )
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }
}

/// One TD measurement: reward r observed through the row vector h, where
/// r ≈ hᵀθ. For terminal transitions h is φ(s, a) alone.
#[derive(Clone, Debug)]
pub struct MeasurementRow {
    pub h: DVector<f64>,
    pub reward: f64,
    pub greedy_next_action: usize,
}

/// Greedy argmax of φ(s, a)ᵀθ over actions; ties break to the lowest index.
pub(crate) fn argmax_q(
    set: &RbfSet,
    belief: &WeightBelief,
    s: &DVector<f64>,
    actions: usize,
) -> Result<usize> {
    if actions == 0 || actions > set.num_actions() {
        return Err(Error::invalid(format!(
            "action count {actions} out of range 1..={}",
            set.num_actions()
        )));
    }
    let mut best = 0usize;
    let mut best_q = f64::NEG_INFINITY;
    for a in 0..actions {
        let qa = q_value(set, belief, s, a)?;
        if qa > best_q {
            best_q = qa;
            best = a;
        }
    }
    Ok(best)
}

/// Assemble the TD measurement row for a transition:
/// h = φ(s,a) − γ·φ(s′,a*) with a* the greedy next action, or φ(s,a) alone
/// when s′ is terminal. Truncation keeps the discounted term.
pub fn build_measurement(
    set: &RbfSet,
    belief: &WeightBelief,
    t: &Transition,
    gamma: f64,
) -> Result<MeasurementRow> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0,1], got {gamma}")));
    }
    if belief.dim() != feature_dim(set) {
        return Err(Error::invalid(format!(
            "belief dimension {} does not match feature dimension {}",
            belief.dim(),
            feature_dim(set)
        )));
    }
    let phi_sa = build_features(set, &t.state, t.action)?;
    let a_star = argmax_q(set, belief, &t.next_state, set.num_actions())?;
    let h = if t.terminal {
        phi_sa
    } else {
        let phi_next = build_features(set, &t.next_state, a_star)?;
        phi_sa - phi_next * gamma
    };
    Ok(MeasurementRow {
        h,
        reward: t.reward,
        greedy_next_action: a_star,
    })
}

/// Time update: θ ← Fθ, P ← FPFᵀ + Q, re-symmetrized.
pub fn predict(belief: &WeightBelief, model: &StateModel) -> Result<WeightBelief> {
    if model.dim() != belief.dim() {
        return Err(Error::invalid(format!(
            "model dimension {} does not match belief dimension {}",
            model.dim(),
            belief.dim()
        )));
    }
    if model.identity_transition {
        return Ok(WeightBelief::from_parts(
            belief.theta.clone(),
            &belief.cov + &model.process_noise,
        ));
    }
    let theta = &model.transition * &belief.theta;
    let cov = &model.transition * &belief.cov * model.transition.transpose()
        + &model.process_noise;
    Ok(WeightBelief::from_parts(theta, cov))
}

/// Measurement update for one noise hypothesis.
///
/// Returns the posterior belief, the innovation ν = r − hᵀθ_prior, and the
/// innovation variance S = hᵀPh + R. The covariance uses the Joseph form
/// (I−Khᵀ)P(I−Khᵀ)ᵀ + R·KKᵀ, then is re-symmetrized.
pub fn kalman_update(
    belief: &WeightBelief,
    row: &MeasurementRow,
    r_var: f64,
) -> Result<(WeightBelief, f64, f64)> {
    if row.h.len() != belief.dim() {
        return Err(Error::invalid(format!(
            "measurement dimension {} does not match belief dimension {}",
            row.h.len(),
            belief.dim()
        )));
    }
    if !(r_var > 0.0) {
        return Err(Error::invalid(format!(
            "measurement noise variance must be positive, got {r_var}"
        )));
    }
    let ph = &belief.cov * &row.h;
    let innovation_var = row.h.dot(&ph) + r_var;
    if !(innovation_var > 0.0) || !innovation_var.is_finite() {
        return Err(Error::degenerate(format!(
            "innovation variance {innovation_var} is not positive and finite"
        )));
    }
    let innovation = row.reward - row.h.dot(&belief.theta);
    let gain = &ph / innovation_var;
    let theta = &belief.theta + &gain * innovation;
    // Joseph form expanded with rank-one products: with A = I − K hᵀ,
    // AP = P − K(Ph)ᵀ, APAᵀ = AP − (AP h)Kᵀ, plus R·KKᵀ.
    let ap = &belief.cov - &gain * ph.transpose();
    let aph = &ap * &row.h;
    let cov = ap - aph * gain.transpose() + (&gain * gain.transpose()) * r_var;
    Ok((WeightBelief::from_parts(theta, cov), innovation, innovation_var))
}

/// Q(s, a) = φ(s, a)ᵀθ.
pub fn q_value(set: &RbfSet, belief: &WeightBelief, s: &DVector<f64>, a: usize) -> Result<f64> {
    if belief.dim() != feature_dim(set) {
        return Err(Error::invalid(format!(
            "belief dimension {} does not match feature dimension {}",
            belief.dim(),
            feature_dim(set)
        )));
    }
    let phi = build_features(set, s, a)?;
    Ok(phi.dot(&belief.theta))
}

/// V(s) = max over actions of Q(s, a).
pub fn state_value(set: &RbfSet, belief: &WeightBelief, s: &DVector<f64>) -> Result<f64> {
    let a = argmax_q(set, belief, s, set.num_actions())?;
    q_value(set, belief, s, a)
}
