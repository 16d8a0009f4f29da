//! Detection evaluation: interpolated average precision and operating-point
//! detection / false-detection rates.

use crate::assignment::{decode_detections, AnchorGrid, Detection};
use crate::boxes::{iou, BBox};
use crate::detector::DetectorParams;
use crate::error::Result;
use crate::synth::Scene;
use crate::Scalar;
use serde::{Deserialize, Serialize};

/// One detection attributed to a scene, for cross-scene ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct DetRecord {
    /// Index into the evaluated scene list.
    pub scene: usize,
    pub bbox: BBox<Scalar>,
    pub score: Scalar,
}

/// Evaluation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Low confidence floor for the detections feeding the AP curve.
    pub ap_conf_threshold: Scalar,
    /// Operating-point confidence for detection / false-detection rates.
    pub rate_conf_threshold: Scalar,
    pub nms_iou: Scalar,
    /// IoU above which a detection counts as hitting a ground-truth box.
    pub match_iou: Scalar,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ap_conf_threshold: 0.05,
            rate_conf_threshold: 0.3,
            nms_iou: 0.3,
            match_iou: 0.5,
        }
    }
}

/// Evaluation summary over a scene set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap50: Scalar,
    pub ap75: Scalar,
    /// Mean AP over IoU thresholds 0.50:0.05:0.95.
    pub ap: Scalar,
    /// Fraction of objects detected at the operating point, per difficulty.
    /// None when no object of that level exists in the set.
    pub detection_rate: [Option<Scalar>; 4],
    /// False positives over total detections at the operating point
    /// (0 when there are no detections).
    pub false_detection_rate: Scalar,
    pub objects_per_difficulty: [usize; 4],
    pub n_detections: usize,
    pub n_false_detections: usize,
}

/// 11-point interpolated average precision at one IoU threshold.
///
/// Detections are ranked by descending score (ties broken by ascending scene
/// index, then input order) and matched greedily one-to-one against the
/// ground truth of their own scene. Returns 0 when there is no ground truth
/// or no detection.
pub fn average_precision(
    detections: &[DetRecord],
    gt_by_scene: &[Vec<BBox<Scalar>>],
    iou_threshold: Scalar,
) -> Scalar {
    let n_gt: usize = gt_by_scene.iter().map(Vec::len).sum();
    if n_gt == 0 || detections.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .score
            .partial_cmp(&detections[a].score)
            .unwrap()
            .then(detections[a].scene.cmp(&detections[b].scene))
            .then(a.cmp(&b))
    });

    let mut matched: Vec<Vec<bool>> = gt_by_scene.iter().map(|g| vec![false; g.len()]).collect();
    let mut tp = 0usize;
    let mut fp = 0usize;
    // Precision at each recall level reached, for the interpolated maximum.
    let mut curve: Vec<(Scalar, Scalar)> = Vec::with_capacity(detections.len());
    for &di in &order {
        let d = &detections[di];
        let gts = &gt_by_scene[d.scene];
        let mut best: Option<(usize, Scalar)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if matched[d.scene][gi] {
                continue;
            }
            let ov = iou(g, &d.bbox);
            if ov >= iou_threshold && best.map_or(true, |(_, b)| ov > b) {
                best = Some((gi, ov));
            }
        }
        match best {
            Some((gi, _)) => {
                matched[d.scene][gi] = true;
                tp += 1;
            }
            None => fp += 1,
        }
        let recall = tp as Scalar / n_gt as Scalar;
        let precision = tp as Scalar / (tp + fp) as Scalar;
        curve.push((recall, precision));
    }

    let mut ap = 0.0;
    for k in 0..=10 {
        let r = k as Scalar / 10.0;
        let p = curve
            .iter()
            .filter(|(rec, _)| *rec >= r - 1e-12)
            .map(|(_, p)| *p)
            .fold(0.0, Scalar::max);
        ap += p;
    }
    ap / 11.0
}

fn to_records(per_scene: &[Vec<Detection<Scalar>>]) -> Vec<DetRecord> {
    per_scene
        .iter()
        .enumerate()
        .flat_map(|(si, dets)| {
            dets.iter().map(move |d| DetRecord { scene: si, bbox: d.bbox, score: d.score })
        })
        .collect()
}

/// Evaluate a detector on a scene set.
pub fn evaluate(
    params: &DetectorParams,
    grid: &AnchorGrid<Scalar>,
    scenes: &[Scene],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let mut ap_dets: Vec<Vec<Detection<Scalar>>> = Vec::with_capacity(scenes.len());
    let mut rate_dets: Vec<Vec<Detection<Scalar>>> = Vec::with_capacity(scenes.len());
    let mut gt_by_scene: Vec<Vec<BBox<Scalar>>> = Vec::with_capacity(scenes.len());
    for s in scenes {
        let maps = params.forward(s, grid)?;
        ap_dets.push(decode_detections(&maps, grid, cfg.ap_conf_threshold, cfg.nms_iou));
        rate_dets.push(decode_detections(&maps, grid, cfg.rate_conf_threshold, cfg.nms_iou));
        gt_by_scene.push(s.gt_boxes());
    }

    let records = to_records(&ap_dets);
    let ap50 = average_precision(&records, &gt_by_scene, 0.5);
    let ap75 = average_precision(&records, &gt_by_scene, 0.75);
    let ap = (0..10)
        .map(|k| average_precision(&records, &gt_by_scene, 0.5 + 0.05 * k as Scalar))
        .sum::<Scalar>()
        / 10.0;

    // Operating-point matching: greedy by score within each scene.
    let mut objects_per_difficulty = [0usize; 4];
    let mut detected_per_difficulty = [0usize; 4];
    let mut n_detections = 0usize;
    let mut n_false = 0usize;
    for (si, scene) in scenes.iter().enumerate() {
        for o in &scene.objects {
            objects_per_difficulty[(o.difficulty - 1) as usize] += 1;
        }
        let mut matched = vec![false; scene.objects.len()];
        // decode_detections already returns score-descending order.
        for d in &rate_dets[si] {
            n_detections += 1;
            let mut best: Option<(usize, Scalar)> = None;
            for (gi, o) in scene.objects.iter().enumerate() {
                if matched[gi] {
                    continue;
                }
                let ov = iou(&o.gt_box, &d.bbox);
                if ov >= cfg.match_iou && best.map_or(true, |(_, b)| ov > b) {
                    best = Some((gi, ov));
                }
            }
            match best {
                Some((gi, _)) => {
                    matched[gi] = true;
                    detected_per_difficulty[(scene.objects[gi].difficulty - 1) as usize] += 1;
                }
                None => n_false += 1,
            }
        }
    }

    Ok(EvalReport {
        ap50,
        ap75,
        ap,
        detection_rate: std::array::from_fn(|k| {
            (objects_per_difficulty[k] > 0)
                .then(|| detected_per_difficulty[k] as Scalar / objects_per_difficulty[k] as Scalar)
        }),
        false_detection_rate: if n_detections > 0 {
            n_false as Scalar / n_detections as Scalar
        } else {
            0.0
        },
        objects_per_difficulty,
        n_detections,
        n_false_detections: n_false,
    })
}
