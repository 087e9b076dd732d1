//! Planning helpers: how many dimensions a projection needs, and how many
//! prompts a distance estimate needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bi-Lipschitz targets translated into a JL distortion and an output scale.
///
/// A map scaled by `alpha` with relative distortion `epsilon` keeps every
/// pairwise distance inside `[c1 * d, c2 * d]`, because
/// `alpha * (1 - epsilon) == c1` and `alpha * (1 + epsilon) == c2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JlPlan {
    pub c1: f64,
    pub c2: f64,
    pub epsilon: f64,
    pub alpha: f64,
    /// Number of models the guarantee must cover.
    pub k: usize,
    /// Target DNA dimension.
    pub dna_dim: usize,
}

/// Derives `epsilon = (c2 - c1) / (c2 + c1)`, `alpha = (c1 + c2) / 2` and
/// the matching DNA dimension for `k` models.
pub fn plan_from_constants(c1: f64, c2: f64, k: usize) -> Result<JlPlan> {
    if !(c1.is_finite() && c2.is_finite()) {
        return Err(Error::domain("c1 and c2 must be finite"));
    }
    if c1 <= 0.0 {
        return Err(Error::domain("c1 must be positive"));
    }
    if c2 <= c1 {
        return Err(Error::domain("c2 must exceed c1"));
    }
    if k < 2 {
        return Err(Error::domain("k must be at least 2"));
    }
    let epsilon = (c2 - c1) / (c2 + c1);
    let alpha = (c1 + c2) / 2.0;
    Ok(JlPlan {
        c1,
        c2,
        epsilon,
        alpha,
        k,
        dna_dim: jl_dimension(epsilon, k)?,
    })
}

/// Smallest `L` with `L >= 4 ln K / (eps^2/2 - eps^3/3)`.
pub fn jl_dimension(epsilon: f64, k: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if k < 2 {
        return Err(Error::domain("k must be at least 2"));
    }
    let denom = epsilon * epsilon / 2.0 - epsilon.powi(3) / 3.0;
    let bound = 4.0 * (k as f64).ln() / denom;
    Ok(bound.ceil() as usize)
}

/// Prompt-count plan for estimating a mean of bounded terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationPlan {
    pub epsilon: f64,
    pub delta: f64,
    pub c_max: f64,
    /// Number of sampled prompts.
    pub t: usize,
}

impl ConcentrationPlan {
    /// Hoeffding tail bound at this plan's sample size.
    pub fn tail(&self) -> f64 {
        tail_unchecked(self.t, self.epsilon, self.c_max)
    }
}

fn tail_unchecked(t: usize, epsilon: f64, c_max: f64) -> f64 {
    (2.0 * (-2.0 * t as f64 * epsilon * epsilon / (c_max * c_max)).exp()).min(1.0)
}

/// `min(1, 2 exp(-2 t eps^2 / c_max^2))`.
pub fn hoeffding_tail(t: usize, epsilon: f64, c_max: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::domain("t must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain("epsilon must be positive"));
    }
    if !(c_max > 0.0 && c_max.is_finite()) {
        return Err(Error::domain("c_max must be positive"));
    }
    Ok(tail_unchecked(t, epsilon, c_max))
}

/// Smallest `t` whose Hoeffding tail is at most `delta`.
pub fn hoeffding_sample_size(epsilon: f64, delta: f64, c_max: f64) -> Result<ConcentrationPlan> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain("epsilon must be positive"));
    }
    if !(c_max > 0.0 && c_max.is_finite()) {
        return Err(Error::domain("c_max must be positive"));
    }
    let closed_form = c_max * c_max * (2.0 / delta).ln() / (2.0 * epsilon * epsilon);
    let mut t = (closed_form.ceil() as usize).max(1);
    // The closed form can land one off when it is within rounding of an integer.
    while tail_unchecked(t, epsilon, c_max) > delta {
        t += 1;
    }
    while t > 1 && tail_unchecked(t - 1, epsilon, c_max) <= delta {
        t -= 1;
    }
    Ok(ConcentrationPlan {
        epsilon,
        delta,
        c_max,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_to_plan() {
        let p = plan_from_constants(1.0, 3.0, 2).unwrap();
        assert_eq!(p.epsilon, 0.5);
        assert_eq!(p.alpha, 2.0);

        let p = plan_from_constants(0.9, 1.1, 10).unwrap();
        assert_relative_eq!(p.epsilon, 0.1, epsilon = 1e-12);
        assert_relative_eq!(p.alpha, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constants_rejected() {
        let err = plan_from_constants(2.0, 2.0, 10).unwrap_err();
        assert!(err.to_string().contains("c2 must exceed c1"));
        assert!(plan_from_constants(0.0, 1.0, 10).is_err());
        assert!(plan_from_constants(-1.0, 1.0, 10).is_err());
        assert!(plan_from_constants(0.5, 1.0, 1).is_err());
    }

    // Expected values evaluated by hand:
    //   4 ln 100 / (0.125 - 0.0416667) = 18.4207 / 0.0833333 = 221.05 -> 222
    //   4 ln 305 / (0.045 - 0.009)     = 22.8812 / 0.036     = 635.59 -> 636
    #[test]
    fn jl_dimension_values() {
        assert_eq!(jl_dimension(0.5, 100).unwrap(), 222);
        assert_eq!(jl_dimension(0.3, 305).unwrap(), 636);
        assert!(jl_dimension(1.0, 10).is_err());
        assert!(jl_dimension(0.0, 10).is_err());
        assert!(jl_dimension(0.3, 1).is_err());
    }

    #[test]
    fn planner_matches_dimension_formula() {
        let p = plan_from_constants(0.7, 1.3, 305).unwrap();
        assert_relative_eq!(p.epsilon, 0.3, epsilon = 1e-12);
        assert_relative_eq!(p.alpha, 1.0, epsilon = 1e-12);
        assert_eq!(p.dna_dim, 636);
    }

    // ln(40) / 0.02 = 184.44 -> 185, and four times that = 737.78 -> 738.
    #[test]
    fn hoeffding_sizes() {
        assert_eq!(hoeffding_sample_size(0.1, 0.05, 1.0).unwrap().t, 185);
        assert_eq!(hoeffding_sample_size(0.1, 0.05, 2.0).unwrap().t, 738);
        assert!(hoeffding_sample_size(0.1, 2.0, 1.0).is_err());
        assert!(hoeffding_sample_size(0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn hoeffding_tail_behaviour() {
        assert!(hoeffding_tail(185, 0.1, 1.0).unwrap() <= 0.05);
        assert!(hoeffding_tail(184, 0.1, 1.0).unwrap() > 0.05);
        assert_eq!(hoeffding_tail(1, 1e-9, 1.0).unwrap(), 1.0);
        let mut prev = 1.0;
        for t in [10, 100, 1_000, 10_000, 100_000] {
            let v = hoeffding_tail(t, 0.1, 1.0).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        assert!(prev < 1e-100);
        assert!(hoeffding_tail(0, 0.1, 1.0).is_err());
    }

    #[test]
    fn planned_size_is_minimal() {
        for &(eps, delta, c) in &[(0.05, 0.05, 1.0), (0.2, 0.01, 3.0), (0.01, 0.5, 0.5)] {
            let plan = hoeffding_sample_size(eps, delta, c).unwrap();
            assert!(plan.tail() <= delta);
            if plan.t > 1 {
                assert!(hoeffding_tail(plan.t - 1, eps, c).unwrap() > delta);
            }
        }
    }
}
