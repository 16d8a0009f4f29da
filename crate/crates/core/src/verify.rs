//! Independent verification sweeps for the weight minimizers.
//!
//! These checks compare the closed-form minimizers against brute-force grid
//! search over the weighted objective, so a regression in either the closed
//! form or the regularizer definition is caught by disagreement rather than
//! by a value the implementation itself produced.

use crate::error::Result;
use crate::spl::{
    minimize_weight_confidence_based, minimize_weight_loss_based, oracle_argmin_weight,
    regularizer_value, RegularizerKind,
};
use crate::Scalar;
use serde::{Deserialize, Serialize};

/// Outcome of one minimizer sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub cases: usize,
    /// Worst objective-value gap of the closed form over the grid minimum.
    pub max_value_slack: Scalar,
    /// Worst |closed-form weight - grid argmin weight|.
    pub max_argmin_deviation: Scalar,
}

impl SweepOutcome {
    pub fn passes(&self, value_tol: Scalar, argmin_tol: Scalar) -> bool {
        self.max_value_slack <= value_tol && self.max_argmin_deviation <= argmin_tol
    }
}

fn objective(kind: RegularizerKind, v: Scalar, loss: Scalar, lambda: Scalar) -> Scalar {
    v * loss + regularizer_value(kind, v, lambda)
}

/// Sweep a candidate closed form for a loss-based minimizer over a grid of
/// (loss, λ) cases, comparing against brute-force search with `grid_points`
/// intervals on [0,1]. The closed form is a parameter so a deliberately
/// wrong candidate can be shown to fail.
pub fn sweep_loss_based<Ff>(
    kind: RegularizerKind,
    closed_form: Ff,
    losses: &[Scalar],
    lambdas: &[Scalar],
    grid_points: usize,
) -> Result<SweepOutcome>
where
    Ff: Fn(Scalar, Scalar) -> Result<Scalar>,
{
    let mut out = SweepOutcome { cases: 0, max_value_slack: 0.0, max_argmin_deviation: 0.0 };
    for &lambda in lambdas {
        for &loss in losses {
            let v = closed_form(loss, lambda)?;
            let v_oracle = oracle_argmin_weight(kind, loss, lambda, grid_points)?;
            // Grid minimum of the objective, independent of the argmin choice.
            let mut grid_min = Scalar::INFINITY;
            for i in 0..=grid_points {
                let g = i as Scalar / grid_points as Scalar;
                grid_min = grid_min.min(objective(kind, g, loss, lambda));
            }
            let slack = objective(kind, v, loss, lambda) - grid_min;
            out.max_value_slack = out.max_value_slack.max(slack);
            out.max_argmin_deviation = out.max_argmin_deviation.max((v - v_oracle).abs());
            out.cases += 1;
        }
    }
    Ok(out)
}

/// Convenience: sweep the library's own closed form for `kind`.
pub fn sweep_loss_based_builtin(
    kind: RegularizerKind,
    losses: &[Scalar],
    lambdas: &[Scalar],
    grid_points: usize,
) -> Result<SweepOutcome> {
    sweep_loss_based(kind, |l, lam| minimize_weight_loss_based(kind, l, lam), losses, lambdas, grid_points)
}

/// Check the confidence-based minimizer against an independently coded
/// rendition of the same piecewise formula (root via exp/ln rather than
/// powf). Returns the worst absolute deviation over a `conf_points`-interval
/// grid of confidences for each (ξ, m) pair.
pub fn sweep_confidence_based(
    xis: &[Scalar],
    ms: &[u32],
    conf_points: usize,
) -> Result<SweepOutcome> {
    let mut out = SweepOutcome { cases: 0, max_value_slack: 0.0, max_argmin_deviation: 0.0 };
    for &xi in xis {
        for &m in ms {
            for i in 0..=conf_points {
                let conf = i as Scalar / conf_points as Scalar;
                let v = minimize_weight_confidence_based(conf, xi, m)?;
                let reference = if conf > xi {
                    if conf == 0.0 { 0.0 } else { (conf.ln() / m as Scalar).exp() }
                } else {
                    0.0
                };
                out.max_argmin_deviation = out.max_argmin_deviation.max((v - reference).abs());
                out.cases += 1;
            }
        }
    }
    Ok(out)
}

/// The loss/λ grids used by the standard verification report.
pub fn standard_loss_grid() -> Vec<Scalar> {
    (1..100).map(|i| i as Scalar / 100.0).collect()
}

pub fn standard_lambda_grid() -> Vec<Scalar> {
    (1..10).map(|i| i as Scalar / 10.0).collect()
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyLine {
    pub name: String,
    pub outcome: SweepOutcome,
    pub pass: bool,
}

/// Full minimizer verification: the three loss-based closed forms against
/// brute-force search, plus the confidence-based formula check.
pub fn verify_all_minimizers(grid_points: usize) -> Result<Vec<VerifyLine>> {
    let losses = standard_loss_grid();
    let lambdas = standard_lambda_grid();
    let mut lines = Vec::new();
    for kind in [RegularizerKind::Hard, RegularizerKind::Linear, RegularizerKind::Logarithmic] {
        let outcome = sweep_loss_based_builtin(kind, &losses, &lambdas, grid_points)?;
        lines.push(VerifyLine {
            name: format!("{kind:?}"),
            pass: outcome.passes(1e-9, 2e-5),
            outcome,
        });
    }
    let outcome = sweep_confidence_based(&[0.0, 0.4, 0.8], &[1, 2, 3], 1000)?;
    lines.push(VerifyLine {
        name: "ConfidenceRoot".to_string(),
        pass: outcome.max_argmin_deviation <= 1e-12,
        outcome,
    });
    Ok(lines)
}
