//! Static anchor labeling and prediction-map utilities.
//!
//! Anchors are the cells of a regular grid over the scene. Each anchor is
//! labeled positive (for exactly one object), ignore, or negative. Positives
//! come from the central `core_fraction`-scaled part of a ground-truth box,
//! the ignore band extends out to the `ignore_fraction`-scaled box, and
//! overlapping claims go to the object with the nearest center.

use crate::boxes::{iou, BBox};
use crate::error::{Error, Result};
use crate::num::Real;
use serde::{Deserialize, Serialize};

/// Regular anchor grid: `width x height` cells of `stride` scene units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorGrid<F> {
    pub width: usize,
    pub height: usize,
    pub stride: F,
}

impl<F: Real> AnchorGrid<F> {
    pub fn new(width: usize, height: usize, stride: F) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract("anchor grid must have width, height >= 1"));
        }
        if !(stride > F::zero()) {
            return Err(Error::contract("anchor grid stride must be positive"));
        }
        Ok(Self { width, height, stride })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scene-unit center of anchor `index` (row-major).
    pub fn center(&self, index: usize) -> (F, F) {
        let half = F::from_f64_lossy(0.5);
        let ix = index % self.width;
        let iy = index / self.width;
        (
            (F::from_usize_lossy(ix) + half) * self.stride,
            (F::from_usize_lossy(iy) + half) * self.stride,
        )
    }

    /// Scene extent in scene units.
    pub fn scene_size(&self) -> (F, F) {
        (
            F::from_usize_lossy(self.width) * self.stride,
            F::from_usize_lossy(self.height) * self.stride,
        )
    }
}

/// Detector output: per-anchor confidence and 4-channel box offsets
/// (left, top, right, bottom from the anchor center, scene units).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMaps<F> {
    pub width: usize,
    pub height: usize,
    pub conf: Vec<F>,
    pub reg: Vec<[F; 4]>,
}

impl<F: Real> PredictionMaps<F> {
    pub fn matches_grid(&self, grid: &AnchorGrid<F>) -> bool {
        self.width == grid.width
            && self.height == grid.height
            && self.conf.len() == grid.len()
            && self.reg.len() == grid.len()
    }

    /// Decoded predicted box at `anchor`, or `None` for a collapsed box.
    pub fn decoded_box(&self, grid: &AnchorGrid<F>, anchor: usize) -> Option<BBox<F>> {
        let (ax, ay) = grid.center(anchor);
        let [l, t, r, b] = self.reg[anchor];
        BBox::from_corners(ax - l, ay - t, ax + r, ay + b).ok()
    }
}

/// Label of one anchor cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    Negative,
    Ignore,
    /// Positive for the object with the given index in the scene's list.
    Positive(usize),
}

/// Full anchor labeling for one scene.
#[derive(Debug, Clone)]
pub struct AnchorAssignment {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<AnchorLabel>,
    /// Anchor indices claimed by each object, ascending.
    pub object_anchors: Vec<Vec<usize>>,
    /// Objects whose core region contained no anchor center; they get no
    /// positive anchors and are reported to the caller.
    pub skipped_objects: Vec<usize>,
}

impl AnchorAssignment {
    pub fn positive_count(&self) -> usize {
        self.object_anchors.iter().map(Vec::len).sum()
    }
}

/// Label every anchor of `grid` against the ground-truth boxes.
pub fn assign_anchors<F: Real>(
    grid: &AnchorGrid<F>,
    gt: &[BBox<F>],
    core_fraction: F,
    ignore_fraction: F,
) -> Result<AnchorAssignment> {
    if !(core_fraction > F::zero() && core_fraction <= ignore_fraction && ignore_fraction <= F::one())
    {
        return Err(Error::contract(format!(
            "need 0 < core_fraction <= ignore_fraction <= 1, got {core_fraction}, {ignore_fraction}"
        )));
    }
    let cores: Vec<BBox<F>> = gt.iter().map(|b| b.scaled(core_fraction)).collect();
    let bands: Vec<BBox<F>> = gt.iter().map(|b| b.scaled(ignore_fraction)).collect();

    let mut labels = vec![AnchorLabel::Negative; grid.len()];
    let mut object_anchors = vec![Vec::new(); gt.len()];
    for a in 0..grid.len() {
        let (ax, ay) = grid.center(a);
        let mut best: Option<(usize, F)> = None;
        for (i, core) in cores.iter().enumerate() {
            if core.contains(ax, ay) {
                let dx = ax - core.cx;
                let dy = ay - core.cy;
                let d2 = dx * dx + dy * dy;
                match best {
                    Some((_, bd)) if bd <= d2 => {}
                    _ => best = Some((i, d2)),
                }
            }
        }
        if let Some((i, _)) = best {
            labels[a] = AnchorLabel::Positive(i);
            object_anchors[i].push(a);
            continue;
        }
        if bands.iter().any(|b| b.contains(ax, ay)) {
            labels[a] = AnchorLabel::Ignore;
        }
    }

    let skipped_objects: Vec<usize> = object_anchors
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_empty())
        .map(|(i, _)| i)
        .collect();

    Ok(AnchorAssignment {
        width: grid.width,
        height: grid.height,
        labels,
        object_anchors,
        skipped_objects,
    })
}

/// Object confidence: maximum predicted confidence over anchors whose
/// centers lie inside the ground-truth box.
pub fn object_confidence<F: Real>(
    gt_box: &BBox<F>,
    maps: &PredictionMaps<F>,
    grid: &AnchorGrid<F>,
) -> Result<F> {
    if !maps.matches_grid(grid) {
        return Err(Error::contract("prediction maps do not match anchor grid"));
    }
    let mut best: Option<F> = None;
    for a in 0..grid.len() {
        let (ax, ay) = grid.center(a);
        if gt_box.contains(ax, ay) {
            let c = maps.conf[a];
            best = Some(match best {
                Some(b) if b >= c => b,
                _ => c,
            });
        }
    }
    best.ok_or_else(|| {
        Error::DegenerateObject("ground-truth box contains no anchor center".to_string())
    })
}

/// One decoded detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection<F> {
    pub bbox: BBox<F>,
    pub score: F,
    pub anchor: usize,
}

/// Threshold, decode, and greedy non-maximum suppression.
///
/// Output scores are non-increasing; ties break on ascending anchor index.
pub fn decode_detections<F: Real>(
    maps: &PredictionMaps<F>,
    grid: &AnchorGrid<F>,
    conf_threshold: F,
    nms_iou: F,
) -> Vec<Detection<F>> {
    let mut cands: Vec<Detection<F>> = (0..grid.len())
        .filter(|&a| maps.conf[a] >= conf_threshold)
        .filter_map(|a| {
            maps.decoded_box(grid, a).map(|bbox| Detection {
                bbox,
                score: maps.conf[a],
                anchor: a,
            })
        })
        .collect();
    cands.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.anchor.cmp(&b.anchor))
    });
    let mut kept: Vec<Detection<F>> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| iou(&k.bbox, &c.bbox) < nms_iou) {
            kept.push(c);
        }
    }
    kept
}
