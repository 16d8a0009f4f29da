//! Anchor-level detection losses and the SPL-weighted batch loss.
//!
//! The confidence term is L2 against the 0/1 anchor target; the regression
//! term is the CIOU loss. The scene total groups anchors into the negative
//! set plus one positive set per object, so per-object weights can scale each
//! object's contribution independently.

use crate::assignment::{AnchorAssignment, AnchorGrid, AnchorLabel, PredictionMaps};
use crate::boxes::{ciou_loss, BBox};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::spl::WeightVector;

/// Loss of a scene, decomposed for logging and SPL weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown<F> {
    /// Weighted confidence loss over all contributing anchors (unnormalized).
    pub conf_loss: F,
    /// Weighted regression loss over positive anchors (unnormalized).
    pub reg_loss: F,
    /// Negative-anchor confidence loss (unnormalized).
    pub negative_loss: F,
    /// Unweighted per-object positive-set losses, one per ground-truth object.
    pub per_object_losses: Vec<F>,
    /// Normalizer used: anchor count of nonzero-weight objects, or `n_fixed`
    /// when no positive anchor participates.
    pub normalizer: F,
    /// `(negative_loss + sum_i v_i * per_object_losses[i]) / normalizer`.
    pub total: F,
}

/// Loss of a single anchor.
///
/// Positive anchors need both boxes: `(conf - 1)^2 + alpha * CIOU`;
/// negative anchors contribute `conf^2`; ignore anchors contribute 0.
pub fn anchor_loss<F: Real>(
    pred_conf: F,
    target_conf: u8,
    pred_box: Option<&BBox<F>>,
    gt_box: Option<&BBox<F>>,
    alpha: F,
) -> Result<F> {
    match target_conf {
        0 => Ok(pred_conf * pred_conf),
        1 => {
            let (pred, gt) = match (pred_box, gt_box) {
                (Some(p), Some(g)) => (p, g),
                _ => return Err(Error::contract("positive anchor requires pred and gt boxes")),
            };
            let d = pred_conf - F::one();
            Ok(d * d + alpha * ciou_loss(gt, pred)?)
        }
        _ => Err(Error::contract("target_conf must be 0 or 1")),
    }
}

fn breakdown<F: Real>(
    maps: &PredictionMaps<F>,
    assignment: &AnchorAssignment,
    gt: &[BBox<F>],
    grid: &AnchorGrid<F>,
    alpha: F,
    n_fixed: F,
    v: &WeightVector<F>,
) -> Result<LossBreakdown<F>> {
    if maps.width != assignment.width || maps.height != assignment.height {
        return Err(Error::contract("prediction maps and assignment shapes differ"));
    }
    if assignment.object_anchors.len() != gt.len() {
        return Err(Error::contract("assignment object count does not match ground truth"));
    }
    if v.len() != gt.len() {
        return Err(Error::contract(format!(
            "weight vector length {} does not match object count {}",
            v.len(),
            gt.len()
        )));
    }

    // Sequential reduce over anchor index keeps the sum bit-reproducible.
    let mut negative_loss = F::zero();
    for (a, label) in assignment.labels.iter().enumerate() {
        if *label == AnchorLabel::Negative {
            let c = maps.conf[a];
            negative_loss = negative_loss + c * c;
        }
    }

    let mut per_object_conf = vec![F::zero(); gt.len()];
    let mut per_object_reg = vec![F::zero(); gt.len()];
    for (i, anchors) in assignment.object_anchors.iter().enumerate() {
        for &a in anchors {
            let c = maps.conf[a];
            let d = c - F::one();
            per_object_conf[i] = per_object_conf[i] + d * d;
            let pred = maps
                .decoded_box(grid, a)
                .ok_or_else(|| Error::contract("collapsed predicted box on positive anchor"))?;
            per_object_reg[i] = per_object_reg[i] + ciou_loss(&gt[i], &pred)?;
        }
    }

    let per_object_losses: Vec<F> = per_object_conf
        .iter()
        .zip(&per_object_reg)
        .map(|(&c, &r)| c + alpha * r)
        .collect();

    // Normalize by the positive anchors that actually participate (their
    // object's weight is nonzero), so excluding samples concentrates rather
    // than dilutes the remaining gradient. With all weights 1 this is the
    // plain positive anchor count.
    let mut active = 0usize;
    for (i, anchors) in assignment.object_anchors.iter().enumerate() {
        if v[i] != F::zero() {
            active += anchors.len();
        }
    }
    let normalizer = if active > 0 { F::from_usize_lossy(active) } else { n_fixed };

    let mut weighted_obj = F::zero();
    let mut conf_loss = negative_loss;
    let mut reg_loss = F::zero();
    for i in 0..gt.len() {
        weighted_obj = weighted_obj + v[i] * per_object_losses[i];
        conf_loss = conf_loss + v[i] * per_object_conf[i];
        reg_loss = reg_loss + v[i] * per_object_reg[i];
    }
    let total = (negative_loss + weighted_obj) / normalizer;

    Ok(LossBreakdown {
        conf_loss,
        reg_loss,
        negative_loss,
        per_object_losses,
        normalizer,
        total,
    })
}

/// Unweighted scene loss (all object weights 1).
pub fn total_loss<F: Real>(
    maps: &PredictionMaps<F>,
    assignment: &AnchorAssignment,
    gt: &[BBox<F>],
    grid: &AnchorGrid<F>,
    alpha: F,
    n_fixed: F,
) -> Result<LossBreakdown<F>> {
    breakdown(maps, assignment, gt, grid, alpha, n_fixed, &WeightVector::ones(gt.len()))
}

/// SPL-weighted scene loss: `(L_neg + sum_i v_i * L_obj_i) / N`.
pub fn weighted_total_loss<F: Real>(
    maps: &PredictionMaps<F>,
    assignment: &AnchorAssignment,
    gt: &[BBox<F>],
    grid: &AnchorGrid<F>,
    alpha: F,
    n_fixed: F,
    v: &WeightVector<F>,
) -> Result<LossBreakdown<F>> {
    breakdown(maps, assignment, gt, grid, alpha, n_fixed, v)
}

/// Per-object sample loss used by the loss-based SPL baselines:
/// mean over the object's anchors of `(|conf - 1| + CIOU/2) / 2`.
///
/// The CIOU term is capped at 2 so the result stays in `[0, 1)` even for
/// degenerate far-off predictions.
pub fn baseline_sample_loss<F: Real>(
    gt_box: &BBox<F>,
    anchors: &[usize],
    maps: &PredictionMaps<F>,
    grid: &AnchorGrid<F>,
) -> Result<F> {
    if anchors.is_empty() {
        return Err(Error::contract("baseline sample loss needs at least one positive anchor"));
    }
    let half = F::from_f64_lossy(0.5);
    let two = F::from_f64_lossy(2.0);
    let mut acc = F::zero();
    for &a in anchors {
        let conf = maps.conf[a];
        let pred = maps
            .decoded_box(grid, a)
            .ok_or_else(|| Error::contract("collapsed predicted box on positive anchor"))?;
        let lc = ciou_loss(gt_box, &pred)?.min(two);
        acc = acc + half * ((conf - F::one()).abs() + half * lc);
    }
    let l = acc / F::from_usize_lossy(anchors.len());
    Ok(l.min(F::one() - F::from_f64_lossy(1e-9)))
}
