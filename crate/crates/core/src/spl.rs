//! Minimizer functions and training schedules for self-paced learning.
//!
//! A minimizer function maps a per-sample difficulty signal (its loss, or its
//! predicted confidence) and a threshold parameter to the optimal sample
//! weight `v* ∈ [0, 1]` of the weighted training objective. The classical
//! loss-based closed forms (Hard, Linear, Logarithmic) are implemented next
//! to the confidence-based piecewise root minimizer, together with a
//! brute-force grid oracle used to validate the closed forms.

use crate::error::{Error, Result};
use crate::num::Real;
use serde::{Deserialize, Serialize};

/// Self-paced regularizer family selector.
///
/// The three loss-based variants carry their classical closed-form solutions;
/// `ConfidenceRoot` is the confidence-based piecewise minimizer with root
/// order `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularizerKind {
    Hard,
    Linear,
    Logarithmic,
    ConfidenceRoot { m: u32 },
}

impl RegularizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegularizerKind::Hard => "hard",
            RegularizerKind::Linear => "linear",
            RegularizerKind::Logarithmic => "logarithmic",
            RegularizerKind::ConfidenceRoot { .. } => "confidence-root",
        }
    }
}

/// Direction of a piecewise-linear threshold schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleDirection {
    /// Confidence threshold ξ: starts at ξ0, decreases to 0.
    DecreasingToZero,
    /// Age parameter λ: starts at λ0, increases to 1.
    IncreasingToOne,
}

/// Parameters of the piecewise-linear ξ or λ schedule.
///
/// The schedule holds `start_value` until training progress `e1`, moves
/// linearly over `[e1, e2)`, and saturates (at 0 or 1 depending on the
/// direction) from `e2` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams<F> {
    pub start_value: F,
    pub e1: F,
    pub e2: F,
    pub direction: ScheduleDirection,
}

impl<F: Real> ScheduleParams<F> {
    pub fn new(start_value: F, e1: F, e2: F, direction: ScheduleDirection) -> Result<Self> {
        let zero = F::zero();
        let one = F::one();
        if !(start_value > zero && start_value < one) {
            return Err(Error::domain(format!(
                "schedule start_value must lie in (0,1), got {start_value}"
            )));
        }
        if !(e1 >= zero && e1 < e2 && e2 <= one) {
            return Err(Error::domain(format!(
                "schedule breakpoints must satisfy 0 <= e1 < e2 <= 1, got e1={e1}, e2={e2}"
            )));
        }
        Ok(Self { start_value, e1, e2, direction })
    }

    /// Default confidence schedule: ξ0 = 0.8, e1 = 10%, e2 = 90%.
    pub fn default_xi() -> Self {
        Self {
            start_value: F::from_f64_lossy(0.8),
            e1: F::from_f64_lossy(0.1),
            e2: F::from_f64_lossy(0.9),
            direction: ScheduleDirection::DecreasingToZero,
        }
    }

    /// Default age schedule: λ0 = 0.2, e1 = 10%, e2 = 90%.
    pub fn default_lambda() -> Self {
        Self {
            start_value: F::from_f64_lossy(0.2),
            e1: F::from_f64_lossy(0.1),
            e2: F::from_f64_lossy(0.9),
            direction: ScheduleDirection::IncreasingToOne,
        }
    }
}

/// Per-object sample weights for one batch; every entry lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector<F>(Vec<F>);

impl<F: Real> WeightVector<F> {
    pub fn new(v: Vec<F>) -> Result<Self> {
        for (i, &w) in v.iter().enumerate() {
            if !(w >= F::zero() && w <= F::one()) {
                return Err(Error::domain(format!("weight v[{i}]={w} outside [0,1]")));
            }
        }
        Ok(Self(v))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![F::one(); n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![F::zero(); n])
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, F> {
        self.0.iter()
    }
}

impl<F> std::ops::Index<usize> for WeightVector<F> {
    type Output = F;
    fn index(&self, i: usize) -> &F {
        &self.0[i]
    }
}

fn check_loss_domain<F: Real>(kind: RegularizerKind, sample_loss: F, lambda: F) -> Result<()> {
    if sample_loss < F::zero() {
        return Err(Error::domain(format!("sample_loss must be >= 0, got {sample_loss}")));
    }
    match kind {
        RegularizerKind::Hard | RegularizerKind::Linear => {
            if lambda <= F::zero() {
                return Err(Error::domain(format!(
                    "{} regularizer requires lambda > 0, got {lambda}",
                    kind.name()
                )));
            }
        }
        RegularizerKind::Logarithmic => {
            if !(lambda > F::zero() && lambda < F::one()) {
                return Err(Error::domain(format!(
                    "logarithmic regularizer requires lambda in (0,1), got {lambda}"
                )));
            }
            if sample_loss >= F::one() {
                return Err(Error::domain(format!(
                    "logarithmic regularizer requires sample_loss in [0,1), got {sample_loss}"
                )));
            }
        }
        RegularizerKind::ConfidenceRoot { .. } => {
            return Err(Error::domain(
                "confidence-root minimizer takes a confidence, not a loss".to_string(),
            ));
        }
    }
    Ok(())
}

/// Closed-form optimal weight for the loss-based regularizers.
///
/// Ties at `sample_loss == lambda` fall to the zero branch (strict `<`).
pub fn minimize_weight_loss_based<F: Real>(
    kind: RegularizerKind,
    sample_loss: F,
    lambda: F,
) -> Result<F> {
    check_loss_domain(kind, sample_loss, lambda)?;
    let v = if sample_loss < lambda {
        match kind {
            RegularizerKind::Hard => F::one(),
            RegularizerKind::Linear => F::one() - sample_loss / lambda,
            RegularizerKind::Logarithmic => {
                let zeta = F::one() - lambda;
                ((sample_loss + zeta).ln()) / zeta.ln()
            }
            RegularizerKind::ConfidenceRoot { .. } => unreachable!(),
        }
    } else {
        F::zero()
    };
    Ok(v)
}

/// Confidence-based piecewise minimizer: `conf^(1/m)` above the threshold
/// `xi`, zero otherwise (strict `>`).
pub fn minimize_weight_confidence_based<F: Real>(conf: F, xi: F, m: u32) -> Result<F> {
    if !(conf >= F::zero() && conf <= F::one()) {
        return Err(Error::domain(format!("conf must lie in [0,1], got {conf}")));
    }
    if !(xi >= F::zero() && xi <= F::one()) {
        return Err(Error::domain(format!("xi must lie in [0,1], got {xi}")));
    }
    if m == 0 {
        return Err(Error::domain("root order m must be a positive integer".to_string()));
    }
    if conf > xi {
        Ok(conf.powf(F::one() / F::from_u32(m).unwrap()))
    } else {
        Ok(F::zero())
    }
}

/// Per-sample regularizer value `g(v, λ)` for the loss-based families.
///
/// Used by the brute-force oracle and the optimality checks.
pub fn regularizer_value<F: Real>(kind: RegularizerKind, v: F, lambda: F) -> F {
    match kind {
        RegularizerKind::Hard => -lambda * v,
        RegularizerKind::Linear => {
            let half = F::from_f64_lossy(0.5);
            half * lambda * (v * v - (F::one() + F::one()) * v)
        }
        RegularizerKind::Logarithmic => {
            let zeta = F::one() - lambda;
            zeta * v - zeta.powf(v) / zeta.ln()
        }
        RegularizerKind::ConfidenceRoot { .. } => {
            panic!("confidence-root minimizer has no explicit regularizer")
        }
    }
}

/// Brute-force argmin of `v·l + g(v, λ)` over a uniform grid of
/// `grid_points + 1` weights spanning `[0, 1]`.
///
/// Test oracle for the closed forms; `grid_points` is the number of grid
/// intervals, so the resolution is `1 / grid_points`.
pub fn oracle_argmin_weight<F: Real>(
    kind: RegularizerKind,
    sample_loss: F,
    lambda: F,
    grid_points: usize,
) -> Result<F> {
    check_loss_domain(kind, sample_loss, lambda)?;
    if grid_points < 1000 {
        return Err(Error::domain(format!(
            "oracle grid needs at least 1000 points, got {grid_points}"
        )));
    }
    let step = F::one() / F::from_usize_lossy(grid_points);
    let mut best_v = F::zero();
    let mut best_obj = regularizer_value(kind, F::zero(), lambda);
    for i in 1..=grid_points {
        let v = F::from_usize_lossy(i) * step;
        let obj = v * sample_loss + regularizer_value(kind, v, lambda);
        if obj < best_obj {
            best_obj = obj;
            best_v = v;
        }
    }
    Ok(best_v)
}

/// Confidence threshold ξ as a function of training progress `ep ∈ [0, 1]`.
///
/// ξ0 before `e1`, linear descent to 0 across `[e1, e2)`, 0 afterwards.
pub fn xi_schedule<F: Real>(params: &ScheduleParams<F>, ep: F) -> F {
    debug_assert_eq!(params.direction, ScheduleDirection::DecreasingToZero);
    if ep < params.e1 {
        params.start_value
    } else if ep < params.e2 {
        params.start_value * ((params.e2 - ep) / (params.e2 - params.e1))
    } else {
        F::zero()
    }
}

/// Age parameter λ as a function of training progress `ep ∈ [0, 1]`.
///
/// λ0 before `e1`, monotone linear ascent to 1 across `[e1, e2)`, 1
/// afterwards. See [`lambda_schedule_literal`] for the non-monotone
/// variant kept for audit.
pub fn lambda_schedule<F: Real>(params: &ScheduleParams<F>, ep: F) -> F {
    debug_assert_eq!(params.direction, ScheduleDirection::IncreasingToOne);
    if ep < params.e1 {
        params.start_value
    } else if ep < params.e2 {
        params.start_value
            + (F::one() - params.start_value) * ((ep - params.e1) / (params.e2 - params.e1))
    } else {
        F::one()
    }
}

/// Literal middle-branch variant of the λ schedule.
///
/// The alternate middle branch `(1-λ0)/(e2-e1)·(e2-EP) + 1` jumps to `2-λ0` at
/// `e1` and decreases back to 1 at `e2`; it is discontinuous and decreasing,
/// so it is not used for training. Kept behind this function for audit only.
pub fn lambda_schedule_literal<F: Real>(params: &ScheduleParams<F>, ep: F) -> F {
    if ep < params.e1 {
        params.start_value
    } else if ep < params.e2 {
        (F::one() - params.start_value) / (params.e2 - params.e1) * (params.e2 - ep) + F::one()
    } else {
        F::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: usize = 100_000;

    #[test]
    fn hard_minimizer_matches_table() {
        // (Hard, l=0.5, lambda=0.7) -> 1
        let v = minimize_weight_loss_based(RegularizerKind::Hard, 0.5_f64, 0.7).unwrap();
        assert_eq!(v, 1.0);
        // boundary l == lambda falls to the zero branch
        let v = minimize_weight_loss_based(RegularizerKind::Hard, 0.7_f64, 0.7).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn linear_minimizer_matches_table() {
        let v = minimize_weight_loss_based(RegularizerKind::Linear, 0.25_f64, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn logarithmic_minimizer_in_open_interval_and_matches_oracle() {
        let v = minimize_weight_loss_based(RegularizerKind::Logarithmic, 0.3_f64, 0.5).unwrap();
        assert!(v > 0.0 && v < 1.0);
        let oracle = oracle_argmin_weight(RegularizerKind::Logarithmic, 0.3, 0.5, GRID).unwrap();
        assert!((v - oracle).abs() <= 2.0 / GRID as f64, "v={v} oracle={oracle}");
    }

    #[test]
    fn logarithmic_minimizer_tends_to_one_at_zero_loss() {
        let v = minimize_weight_loss_based(RegularizerKind::Logarithmic, 1e-12_f64, 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_agrees_with_closed_forms() {
        for kind in [RegularizerKind::Hard, RegularizerKind::Linear, RegularizerKind::Logarithmic] {
            for &l in &[0.01_f64, 0.25, 0.5, 0.75, 0.99] {
                for &lam in &[0.1, 0.5, 0.9] {
                    let v = minimize_weight_loss_based(kind, l, lam).unwrap();
                    let oracle = oracle_argmin_weight(kind, l, lam, GRID).unwrap();
                    assert!(
                        (v - oracle).abs() <= 2.0 / GRID as f64,
                        "{:?} l={l} lam={lam}: v={v} oracle={oracle}",
                        kind
                    );
                }
            }
        }
    }

    #[test]
    fn oracle_hard_examples() {
        let v = oracle_argmin_weight(RegularizerKind::Hard, 0.5_f64, 0.7, GRID).unwrap();
        assert!((v - 1.0).abs() <= 1.0 / GRID as f64);
        let v = oracle_argmin_weight(RegularizerKind::Linear, 0.25_f64, 0.5, GRID).unwrap();
        assert!((v - 0.5).abs() <= 1.0 / GRID as f64);
    }

    #[test]
    fn confidence_minimizer_examples() {
        let v = minimize_weight_confidence_based(0.729_f64, 0.5, 3).unwrap();
        assert!((v - 0.9).abs() < 1e-12);
        assert_eq!(minimize_weight_confidence_based(0.4_f64, 0.8, 3).unwrap(), 0.0);
        assert_eq!(minimize_weight_confidence_based(1.0_f64, 0.0, 3).unwrap(), 1.0);
        // tie conf == xi falls to zero
        assert_eq!(minimize_weight_confidence_based(0.8_f64, 0.8, 3).unwrap(), 0.0);
    }

    #[test]
    fn confidence_minimizer_monotone_in_conf() {
        let m = 3;
        let xi = 0.4_f64;
        let mut prev = -1.0;
        for i in 0..=1000 {
            let c = i as f64 / 1000.0;
            let v = minimize_weight_confidence_based(c, xi, m).unwrap();
            assert!(v >= prev, "not monotone at conf={c}");
            if c <= xi {
                assert_eq!(v, 0.0);
            }
            prev = v;
        }
        assert_eq!(minimize_weight_confidence_based(1.0_f64, xi, m).unwrap(), 1.0);
    }

    #[test]
    fn xi_schedule_matches_reference_values() {
        let p = ScheduleParams::<f64>::default_xi();
        assert_eq!(xi_schedule(&p, 0.05), 0.8);
        assert_eq!(xi_schedule(&p, 0.5), 0.4);
        assert_eq!(xi_schedule(&p, 0.95), 0.0);
    }

    #[test]
    fn lambda_schedule_matches_monotone_reading() {
        let p = ScheduleParams::<f64>::default_lambda();
        assert_eq!(lambda_schedule(&p, 0.05), 0.2);
        assert_eq!(lambda_schedule(&p, 0.9), 1.0);
        let mid = lambda_schedule(&p, 0.5);
        assert!((mid - 0.6).abs() < 1e-12);
    }

    #[test]
    fn lambda_schedule_literal_is_the_discontinuous_branch() {
        let p = ScheduleParams::<f64>::default_lambda();
        // At EP = e1 this branch evaluates to 2 - lambda0.
        let v = lambda_schedule_literal(&p, 0.1);
        assert!((v - 1.8).abs() < 1e-12);
        assert_eq!(lambda_schedule_literal(&p, 0.95), 1.0);
    }

    #[test]
    fn schedules_continuous_and_monotone() {
        let xi = ScheduleParams::<f64>::default_xi();
        let lam = ScheduleParams::<f64>::default_lambda();
        let n = 10_000;
        let mut prev_xi = f64::INFINITY;
        let mut prev_lam = -f64::INFINITY;
        let mut last_xi = None::<f64>;
        let mut last_lam = None::<f64>;
        for i in 0..=n {
            let ep = i as f64 / n as f64;
            let x = xi_schedule(&xi, ep);
            let l = lambda_schedule(&lam, ep);
            assert!(x <= prev_xi + 1e-15);
            assert!(l >= prev_lam - 1e-15);
            if let (Some(px), Some(pl)) = (last_xi, last_lam) {
                assert!((x - px).abs() < 1e-3, "xi jump at ep={ep}");
                assert!((l - pl).abs() < 1e-3, "lambda jump at ep={ep}");
            }
            prev_xi = x;
            prev_lam = l;
            last_xi = Some(x);
            last_lam = Some(l);
        }
        assert_eq!(xi_schedule(&xi, 0.0), 0.8);
        assert_eq!(xi_schedule(&xi, 1.0), 0.0);
        assert_eq!(lambda_schedule(&lam, 0.0), 0.2);
        assert_eq!(lambda_schedule(&lam, 1.0), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(minimize_weight_loss_based(RegularizerKind::Logarithmic, 0.5_f64, 1.5).is_err());
        assert!(minimize_weight_loss_based(RegularizerKind::Logarithmic, 1.5_f64, 0.5).is_err());
        assert!(minimize_weight_loss_based(RegularizerKind::Hard, -0.1_f64, 0.5).is_err());
        assert!(minimize_weight_confidence_based(1.5_f64, 0.5, 3).is_err());
        assert!(minimize_weight_confidence_based(0.5_f64, 0.5, 0).is_err());
        assert!(ScheduleParams::new(0.8_f64, 0.9, 0.1, ScheduleDirection::DecreasingToZero).is_err());
    }

    #[test]
    fn weight_vector_validates_range() {
        assert!(WeightVector::new(vec![0.0_f64, 0.5, 1.0]).is_ok());
        assert!(WeightVector::new(vec![1.1_f64]).is_err());
        assert!(WeightVector::new(vec![-0.1_f64]).is_err());
    }
}
