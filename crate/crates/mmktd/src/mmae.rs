//! Multiple-model adaptive estimation: a bank of mode-matched Kalman updates
//! (one per measurement-noise candidate), likelihood weighting, and fusion
//! with the spread-of-means covariance correction.

use crate::error::{Error, Result};
use crate::ktd::{kalman_update, predict, MeasurementRow, StateModel, WeightBelief};

/// Likelihood sums below this underflow guard fall back to uniform weights.
const UNDERFLOW_GUARD: f64 = 1e-300;

/// Whether weights are recomputed from the current likelihood alone or
/// carry the previous step's weights as a prior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightingMode {
    Memoryless,
    Recursive,
}

impl WeightingMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "memoryless" => Ok(WeightingMode::Memoryless),
            "recursive" => Ok(WeightingMode::Recursive),
            other => Err(Error::parse(format!("unknown weighting mode '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightingMode::Memoryless => "memoryless",
            WeightingMode::Recursive => "recursive",
        }
    }
}

/// Shape of the per-mode measurement likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LikelihoodForm {
    /// L = exp(−½ ν²/S) — the bare exponent.
    ExponentOnly,
    /// L = (2πS)^{−1/2} · exp(−½ ν²/S) — full Gaussian density.
    FullGaussian,
}

impl LikelihoodForm {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "exponent_only" => Ok(LikelihoodForm::ExponentOnly),
            "full_gaussian" => Ok(LikelihoodForm::FullGaussian),
            other => Err(Error::parse(format!("unknown likelihood form '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LikelihoodForm::ExponentOnly => "exponent_only",
            LikelihoodForm::FullGaussian => "full_gaussian",
        }
    }
}

/// A bank of M measurement-noise hypotheses with their current weights.
#[derive(Clone, Debug)]
pub struct FilterBank {
    r_candidates: Vec<f64>,
    weights: Vec<f64>,
    weighting_mode: WeightingMode,
    likelihood_form: LikelihoodForm,
}

impl FilterBank {
    pub fn new(
        r_candidates: Vec<f64>,
        weighting_mode: WeightingMode,
        likelihood_form: LikelihoodForm,
    ) -> Result<Self> {
        if r_candidates.is_empty() {
            return Err(Error::invalid("filter bank needs at least one noise candidate"));
        }
        if let Some(bad) = r_candidates.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::invalid(format!(
                "noise candidates must be positive and finite, got {bad}"
            )));
        }
        let m = r_candidates.len();
        Ok(FilterBank {
            r_candidates,
            weights: vec![1.0 / m as f64; m],
            weighting_mode,
            likelihood_form,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.r_candidates.len()
    }

    pub fn r_candidates(&self) -> &[f64] {
        &self.r_candidates
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weighting_mode(&self) -> WeightingMode {
        self.weighting_mode
    }

    pub fn likelihood_form(&self) -> LikelihoodForm {
        self.likelihood_form
    }

    /// Weighted average of the noise candidates — a diagnostics summary of
    /// which hypothesis the bank currently believes.
    pub fn effective_r(&self) -> f64 {
        self.r_candidates
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| r * w)
            .sum()
    }

    /// Restore previously saved weights (snapshot loading); must be
    /// normalized and of matching length.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.r_candidates.len() {
            return Err(Error::invalid(format!(
                "weight count {} does not match mode count {}",
                weights.len(),
                self.r_candidates.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "weights must be non-negative and sum to 1".to_string(),
            ));
        }
        self.weights = weights;
        Ok(())
    }
}

/// Run the measurement update once per noise candidate against the shared
/// predicted prior. Returns each mode's posterior and innovation variance.
pub fn mode_updates(
    belief_prior: &WeightBelief,
    row: &MeasurementRow,
    bank: &FilterBank,
) -> Result<Vec<(WeightBelief, f64)>> {
    bank.r_candidates
        .iter()
        .map(|&r| kalman_update(belief_prior, row, r).map(|(b, _, s)| (b, s)))
        .collect()
}

/// Normalized mode weights from the shared innovation and the per-mode
/// innovation variances. Memoryless mode uses the likelihoods alone;
/// recursive mode multiplies in the previous weights. If the sum underflows,
/// weights fall back to exactly uniform.
pub fn compute_weights(
    bank: &FilterBank,
    innovation: f64,
    innovation_vars: &[f64],
) -> Result<Vec<f64>> {
    let m = bank.num_modes();
    if innovation_vars.len() != m {
        return Err(Error::invalid(format!(
            "got {} innovation variances for {} modes",
            innovation_vars.len(),
            m
        )));
    }
    if let Some(bad) = innovation_vars.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid(format!(
            "innovation variances must be positive and finite, got {bad}"
        )));
    }
    let likelihood = |s: f64| -> f64 {
        let expo = (-0.5 * innovation * innovation / s).exp();
        match bank.likelihood_form {
            LikelihoodForm::ExponentOnly => expo,
            LikelihoodForm::FullGaussian => expo / (2.0 * std::f64::consts::PI * s).sqrt(),
        }
    };
    let raw: Vec<f64> = match bank.weighting_mode {
        WeightingMode::Memoryless => innovation_vars.iter().map(|&s| likelihood(s)).collect(),
        WeightingMode::Recursive => innovation_vars
            .iter()
            .zip(&bank.weights)
            .map(|(&s, &w)| w * likelihood(s))
            .collect(),
    };
    let sum: f64 = raw.iter().sum();
    if !(sum >= UNDERFLOW_GUARD) || !sum.is_finite() {
        return Ok(vec![1.0 / m as f64; m]);
    }
    Ok(raw.into_iter().map(|l| l / sum).collect())
}

/// Fuse mode posteriors: θ = Σωᵢθᵢ and P = Σωᵢ(Pᵢ + (θᵢ−θ)(θᵢ−θ)ᵀ).
pub fn fuse(mode_beliefs: &[WeightBelief], weights: &[f64]) -> Result<WeightBelief> {
    if mode_beliefs.is_empty() || mode_beliefs.len() != weights.len() {
        return Err(Error::invalid(format!(
            "fuse got {} beliefs and {} weights",
            mode_beliefs.len(),
            weights.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::invalid(format!(
            "fuse weights must be normalized and non-negative, sum = {sum}"
        )));
    }
    let dim = mode_beliefs[0].dim();
    if mode_beliefs.iter().any(|b| b.dim() != dim) {
        return Err(Error::invalid("fuse beliefs must share one dimension"));
    }
    let mut theta = nalgebra::DVector::zeros(dim);
    for (b, &w) in mode_beliefs.iter().zip(weights) {
        theta += b.theta() * w;
    }
    let mut cov = nalgebra::DMatrix::zeros(dim, dim);
    for (b, &w) in mode_beliefs.iter().zip(weights) {
        let d = b.theta() - &theta;
        cov += (b.cov() + &d * d.transpose()) * w;
    }
    Ok(WeightBelief::from_parts(theta, cov))
}

/// Per-step internals exposed for diagnostics.
#[derive(Clone, Debug)]
pub struct StepDetails {
    pub innovation: f64,
    pub innovation_vars: Vec<f64>,
    pub weights: Vec<f64>,
}

/// One full multiple-model step: predict once, update every mode against the
/// shared prior, weight by likelihood, fuse. The bank's stored weights are
/// replaced by this step's normalized weights (they seed the next step in
/// recursive mode and serve as diagnostics in memoryless mode).
pub fn mmktd_step(
    belief: &WeightBelief,
    model: &StateModel,
    row: &MeasurementRow,
    bank: &mut FilterBank,
) -> Result<WeightBelief> {
    mmktd_step_detailed(belief, model, row, bank).map(|(b, _)| b)
}

/// `mmktd_step` variant that also returns the innovation, the per-mode
/// innovation variances, and the normalized weights.
pub fn mmktd_step_detailed(
    belief: &WeightBelief,
    model: &StateModel,
    row: &MeasurementRow,
    bank: &mut FilterBank,
) -> Result<(WeightBelief, StepDetails)> {
    let prior = predict(belief, model)?;
    let modes = mode_updates(&prior, row, bank)?;
    let innovation = row.reward - row.h.dot(prior.theta());
    let innovation_vars: Vec<f64> = modes.iter().map(|(_, s)| *s).collect();
    let weights = compute_weights(bank, innovation, &innovation_vars)?;
    let beliefs: Vec<WeightBelief> = modes.into_iter().map(|(b, _)| b).collect();
    let fused = fuse(&beliefs, &weights)?;
    bank.weights = weights.clone();
    Ok((
        fused,
        StepDetails {
            innovation,
            innovation_vars,
            weights,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bank(rs: &[f64]) -> FilterBank {
        FilterBank::new(rs.to_vec(), WeightingMode::Memoryless, LikelihoodForm::ExponentOnly)
            .unwrap()
    }

    fn row(h: Vec<f64>, reward: f64) -> MeasurementRow {
        MeasurementRow {
            h: DVector::from_vec(h),
            reward,
            greedy_next_action: 0,
        }
    }

    #[test]
    fn bank_rejects_bad_candidates() {
        assert!(FilterBank::new(vec![], WeightingMode::Memoryless, LikelihoodForm::ExponentOnly).is_err());
        assert!(FilterBank::new(vec![1.0, 0.0], WeightingMode::Memoryless, LikelihoodForm::ExponentOnly).is_err());
        assert!(FilterBank::new(vec![-2.0], WeightingMode::Memoryless, LikelihoodForm::ExponentOnly).is_err());
    }

    #[test]
    fn single_mode_weight_is_one() {
        let b = bank(&[0.5]);
        let w = compute_weights(&b, 1.3, &[2.0]).unwrap();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn zero_innovation_gives_uniform_weights() {
        let b = bank(&[0.01, 1.0, 100.0]);
        let w = compute_weights(&b, 0.0, &[0.5, 1.5, 100.5]).unwrap();
        for &wi in &w {
            assert!((wi - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_mode_weights_hand_values() {
        let b = bank(&[1.0, 4.0]);
        let w = compute_weights(&b, 1.0, &[1.0, 4.0]).unwrap();
        let l1 = (-0.5f64).exp();
        let l2 = (-0.125f64).exp();
        assert!((w[0] - l1 / (l1 + l2)).abs() < 1e-15);
        assert!((w[1] - l2 / (l1 + l2)).abs() < 1e-15);
        assert!((w[0] - 0.4073).abs() < 1e-4);
        assert!((w[1] - 0.5927).abs() < 1e-4);
    }

    #[test]
    fn full_gaussian_penalizes_large_variance() {
        let b = FilterBank::new(
            vec![1.0, 4.0],
            WeightingMode::Memoryless,
            LikelihoodForm::FullGaussian,
        )
        .unwrap();
        // At ν = 0 the exponential is 1 for both; the density factor prefers
        // the smaller innovation variance.
        let w = compute_weights(&b, 0.0, &[1.0, 4.0]).unwrap();
        assert!(w[0] > w[1]);
        let expect0 = (1.0f64 / 1.0).sqrt();
        let expect1 = (1.0f64 / 4.0).sqrt();
        assert!((w[0] - expect0 / (expect0 + expect1)).abs() < 1e-12);
    }

    #[test]
    fn recursive_weights_carry_history() {
        let mut b = FilterBank::new(
            vec![1.0, 1.0],
            WeightingMode::Recursive,
            LikelihoodForm::ExponentOnly,
        )
        .unwrap();
        b.set_weights(vec![0.9, 0.1]).unwrap();
        // Identical likelihoods: recursive weights must reproduce the prior.
        let w = compute_weights(&b, 0.7, &[2.0, 2.0]).unwrap();
        assert!((w[0] - 0.9).abs() < 1e-12);
        assert!((w[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn underflow_falls_back_to_uniform() {
        let b = bank(&[0.001, 0.002]);
        // ν²/S astronomically large → both likelihoods underflow to zero.
        let w = compute_weights(&b, 1e200, &[0.001, 0.002]).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn weights_sum_to_one() {
        let b = bank(&[0.01, 0.1, 1.0, 10.0, 100.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let nu: f64 = rng.random_range(-20.0..20.0);
            let vars: Vec<f64> = (0..5).map(|_| rng.random_range(0.01..50.0)).collect();
            let w = compute_weights(&b, nu, &vars).unwrap();
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn mode_updates_match_single_kalman() {
        let belief = WeightBelief::isotropic(3, 4.0).unwrap();
        let r = row(vec![1.0, -0.5, 0.2], 0.7);
        let b = bank(&[0.3]);
        let modes = mode_updates(&belief, &r, &b).unwrap();
        let (expect, _, expect_s) = kalman_update(&belief, &r, 0.3).unwrap();
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].0.theta(), expect.theta());
        assert_eq!(modes[0].0.cov(), expect.cov());
        assert_eq!(modes[0].1, expect_s);
    }

    #[test]
    fn duplicate_candidates_give_identical_posteriors() {
        let belief = WeightBelief::isotropic(3, 4.0).unwrap();
        let r = row(vec![1.0, -0.5, 0.2], 0.7);
        let b = bank(&[0.3, 0.3]);
        let modes = mode_updates(&belief, &r, &b).unwrap();
        assert_eq!(modes[0].0.theta(), modes[1].0.theta());
        assert_eq!(modes[0].0.cov(), modes[1].0.cov());
    }

    #[test]
    fn zero_row_posteriors_equal_prior() {
        let belief = WeightBelief::isotropic(4, 2.0).unwrap();
        let r = row(vec![0.0; 4], -1.0);
        let b = bank(&[0.01, 1.0, 100.0]);
        for (posterior, _) in mode_updates(&belief, &r, &b).unwrap() {
            assert_eq!(posterior.theta(), belief.theta());
            assert_eq!(posterior.cov(), belief.cov());
        }
    }

    #[test]
    fn fuse_identical_inputs_is_identity() {
        let belief = WeightBelief::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 0.5]),
        )
        .unwrap();
        let fused = fuse(
            &[belief.clone(), belief.clone(), belief.clone()],
            &[0.2, 0.3, 0.5],
        )
        .unwrap();
        assert!((fused.theta() - belief.theta()).abs().max() < 1e-15);
        assert!((fused.cov() - belief.cov()).abs().max() < 1e-15);
    }

    #[test]
    fn fuse_two_mode_hand_values() {
        let b0 = WeightBelief::new(DVector::from_vec(vec![0.0]), DMatrix::from_vec(1, 1, vec![1.0])).unwrap();
        let b1 = WeightBelief::new(DVector::from_vec(vec![2.0]), DMatrix::from_vec(1, 1, vec![1.0])).unwrap();
        let fused = fuse(&[b0, b1], &[0.5, 0.5]).unwrap();
        assert!((fused.theta()[0] - 1.0).abs() < 1e-15);
        assert!((fused.cov()[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fuse_single_mode_is_identity() {
        let b0 = WeightBelief::new(
            DVector::from_vec(vec![0.3, 0.4]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]),
        )
        .unwrap();
        let fused = fuse(std::slice::from_ref(&b0), &[1.0]).unwrap();
        assert_eq!(fused.theta(), b0.theta());
        assert_eq!(fused.cov(), b0.cov());
    }

    #[test]
    fn fused_covariance_dominates_weighted_average() {
        // The spread term keeps P_fused − Σω·Pᵢ positive semidefinite.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let dim = 4;
            let beliefs: Vec<WeightBelief> = (0..3)
                .map(|_| {
                    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
                    let p = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.1;
                    let t = DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
                    WeightBelief::new(t, p).unwrap()
                })
                .collect();
            let mut w = vec![
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ];
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let fused = fuse(&beliefs, &w).unwrap();
            let mut avg = DMatrix::zeros(dim, dim);
            for (b, &wi) in beliefs.iter().zip(&w) {
                avg += b.cov() * wi;
            }
            let spread = fused.cov() - avg;
            let eig = spread.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
        }
    }

    #[test]
    fn permuting_modes_leaves_fusion_unchanged() {
        let belief = WeightBelief::isotropic(5, 3.0).unwrap();
        let model = StateModel::isotropic(5, 1e-3, 0.95).unwrap();
        let r = row(vec![0.5, -0.2, 0.1, 0.9, -0.7], -1.0);
        let mut bank_a = bank(&[0.01, 1.0, 100.0]);
        let mut bank_b = bank(&[100.0, 0.01, 1.0]);
        let fused_a = mmktd_step(&belief, &model, &r, &mut bank_a).unwrap();
        let fused_b = mmktd_step(&belief, &model, &r, &mut bank_b).unwrap();
        assert!((fused_a.theta() - fused_b.theta()).abs().max() < 1e-12);
        assert!((fused_a.cov() - fused_b.cov()).abs().max() < 1e-12);
    }

    #[test]
    fn single_mode_step_reduces_to_plain_ktd() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let dim = 6;
        let mut fused = WeightBelief::isotropic(dim, 10.0).unwrap();
        let mut plain = fused.clone();
        let model = StateModel::isotropic(dim, 1e-3, 0.95).unwrap();
        let mut b = bank(&[0.7]);
        for _ in 0..1000 {
            let h = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
            let r = MeasurementRow {
                h,
                reward: rng.random_range(-1.0..1.0),
                greedy_next_action: 0,
            };
            fused = mmktd_step(&fused, &model, &r, &mut b).unwrap();
            let predicted = predict(&plain, &model).unwrap();
            plain = kalman_update(&predicted, &r, 0.7).unwrap().0;
            assert!((fused.theta() - plain.theta()).abs().max() < 1e-10);
            assert!((fused.cov() - plain.cov()).abs().max() < 1e-10);
            assert_eq!(b.weights(), &[1.0]);
        }
    }

    #[test]
    fn zero_row_step_equals_predicted_prior() {
        let belief = WeightBelief::isotropic(3, 2.0).unwrap();
        let model = StateModel::isotropic(3, 1e-3, 0.95).unwrap();
        let r = row(vec![0.0; 3], 0.0);
        let mut b = bank(&[0.01, 1.0, 100.0]);
        let fused = mmktd_step(&belief, &model, &r, &mut b).unwrap();
        let prior = predict(&belief, &model).unwrap();
        assert!((fused.theta() - prior.theta()).abs().max() < 1e-12);
        assert!((fused.cov() - prior.cov()).abs().max() < 1e-12);
        // ν = 0 → exponent-only weights are uniform.
        for &w in b.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_r_is_weight_average() {
        let mut b = bank(&[1.0, 3.0]);
        b.set_weights(vec![0.25, 0.75]).unwrap();
        assert!((b.effective_r() - 2.5).abs() < 1e-15);
    }
}
