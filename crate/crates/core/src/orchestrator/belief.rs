use serde::{Deserialize, Serialize};

use super::OrchestratorError;

/// Signals are kept strictly inside (0, 1) so their log-odds stay finite.
pub const SIGNAL_CLAMP: f64 = 1e-6;
pub const DEFAULT_PRIOR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub role: String,
    /// Probability-of-default signal in [0, 1].
    pub signal: f64,
    pub weight: f64,
}

/// Running estimate of the applicant's probability of default. The posterior
/// is always the fold of the prior and the observations:
/// `logit(posterior) = logit(prior) + Σ weight · logit(clamp(signal))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub prior_default_prob: f64,
    pub observations: Vec<Observation>,
    pub posterior_default_prob: f64,
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn clamp_signal(signal: f64) -> f64 {
    signal.clamp(SIGNAL_CLAMP, 1.0 - SIGNAL_CLAMP)
}

impl BeliefState {
    pub fn new(prior: f64) -> Result<Self, OrchestratorError> {
        if !(prior > 0.0 && prior < 1.0) {
            return Err(OrchestratorError::InvalidBelief(format!("prior {prior} outside (0,1)")));
        }
        Ok(Self {
            prior_default_prob: prior,
            observations: Vec::new(),
            posterior_default_prob: prior,
        })
    }

    /// Recomputes the posterior from scratch. Terms are summed in sorted order,
    /// which makes the result independent of observation order.
    pub fn fold(prior: f64, observations: &[Observation]) -> f64 {
        if observations.is_empty() {
            return prior;
        }
        let mut terms: Vec<f64> = observations
            .iter()
            .map(|o| o.weight * logit(clamp_signal(o.signal)))
            .collect();
        terms.sort_by(f64::total_cmp);
        sigmoid(logit(prior) + terms.iter().sum::<f64>())
    }

    /// Posterior after each observation, starting with the prior.
    pub fn trajectory(&self) -> Vec<f64> {
        (0..=self.observations.len())
            .map(|n| Self::fold(self.prior_default_prob, &self.observations[..n]))
            .collect()
    }
}

pub fn update_belief(
    belief: &BeliefState,
    role: &str,
    signal: f64,
    weight: f64,
) -> Result<BeliefState, OrchestratorError> {
    if !(0.0..=1.0).contains(&signal) {
        return Err(OrchestratorError::InvalidBelief(format!(
            "signal {signal} outside [0,1]"
        )));
    }
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(OrchestratorError::InvalidBelief(format!(
            "weight {weight} must be non-negative"
        )));
    }
    let mut next = belief.clone();
    next.observations.push(Observation {
        role: role.to_string(),
        signal,
        weight,
    });
    next.posterior_default_prob = BeliefState::fold(next.prior_default_prob, &next.observations);
    Ok(next)
}

/// Maps an agent score onto a probability-of-default signal: risk scores pass
/// through, "higher is better" scores are inverted.
pub fn default_signal(score_name: &str, score: f64) -> Option<f64> {
    match score_name {
        "risk_score" => Some(score),
        "income_stability_score" | "loan_feasibility_score" | "overall_reward_score" | "context_confidence_score" => {
            Some(1.0 - score)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_fold_is_the_prior() {
        let b = BeliefState::new(0.3).unwrap();
        assert_eq!(b.posterior_default_prob, 0.3);
        assert_eq!(BeliefState::fold(0.3, &[]), 0.3);
    }

    #[test]
    fn neutral_signal_changes_nothing() {
        let b = BeliefState::new(0.3).unwrap();
        for w in [0.0, 0.5, 1.0, 7.0] {
            let next = update_belief(&b, "r", 0.5, w).unwrap();
            assert!((next.posterior_default_prob - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn even_prior_takes_the_signal() {
        let b = update_belief(&BeliefState::new(0.5).unwrap(), "r", 0.8, 1.0).unwrap();
        assert!((b.posterior_default_prob - 0.8).abs() < 1e-12);
    }

    #[test]
    fn extreme_signals_are_clamped() {
        let b = update_belief(&BeliefState::new(0.5).unwrap(), "r", 1.0, 1.0).unwrap();
        assert!((b.posterior_default_prob - (1.0 - SIGNAL_CLAMP)).abs() < 1e-12);
        assert!(b.posterior_default_prob < 1.0);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let b = BeliefState::new(0.3).unwrap();
        assert!(update_belief(&b, "r", 1.2, 1.0).is_err());
        assert!(update_belief(&b, "r", 0.2, -1.0).is_err());
        assert!(BeliefState::new(0.0).is_err());
        assert!(BeliefState::new(1.0).is_err());
    }

    #[test]
    fn trajectory_ends_at_posterior() {
        let mut b = BeliefState::new(0.3).unwrap();
        for s in [0.2, 0.9, 0.4] {
            b = update_belief(&b, "r", s, 1.0).unwrap();
        }
        let t = b.trajectory();
        assert_eq!(t.len(), 4);
        assert_eq!(t[0], BeliefState::fold(0.3, &[]));
        assert_eq!(*t.last().unwrap(), b.posterior_default_prob);
    }

    #[test]
    fn orientation() {
        assert_eq!(default_signal("risk_score", 0.7), Some(0.7));
        assert!((default_signal("overall_reward_score", 0.7).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(default_signal("risk_reward_ratio", 0.7), None);
    }
}
