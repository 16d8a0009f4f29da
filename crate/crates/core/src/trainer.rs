//! Training modes and the two-phase easy-sample-prior orchestration.
//!
//! Seven modes are supported: plain training on all samples (AS), on the
//! easy subset only (ES), online hard-example mining (HEM), and four
//! self-paced variants that pre-train on the easy subset and then train on
//! everything with per-batch sample weights from a minimizer function: the
//! confidence-based minimizer (SPL-ESP-BC) or the Hard / Linear /
//! Logarithmic loss-based closed forms (SPL-ESP-BH / BLine / BLog).
//!
//! Weights are recomputed per batch from the frozen current model: the batch
//! forward pass both yields the weights and is reused for the gradient step.
//! The schedule parameter (ξ or λ) updates once per epoch; training progress
//! EP counts completed SPL-phase epochs over the phase length.

use crate::assignment::{assign_anchors, AnchorAssignment, AnchorGrid, PredictionMaps};
use crate::boxes::BBox;
use crate::detector::{Checkpoint, DetectorConfig, DetectorParams, OptimizerState};
use crate::error::{Error, Result};
use crate::losses::baseline_sample_loss;
use crate::spl::{
    lambda_schedule, minimize_weight_confidence_based, minimize_weight_loss_based, xi_schedule,
    RegularizerKind, ScheduleDirection, ScheduleParams, WeightVector,
};
use crate::synth::{easy_subset, DatasetSpec, Scene};
use crate::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The seven training modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    #[serde(rename = "AS")]
    AllSamples,
    #[serde(rename = "ES")]
    EasySamples,
    #[serde(rename = "HEM")]
    HardExampleMining,
    #[serde(rename = "SPL-ESP-BC")]
    SplEspBc,
    #[serde(rename = "SPL-ESP-BH")]
    SplEspBh,
    #[serde(rename = "SPL-ESP-BLine")]
    SplEspBline,
    #[serde(rename = "SPL-ESP-BLog")]
    SplEspBlog,
}

impl TrainMode {
    pub const ALL: [TrainMode; 7] = [
        TrainMode::AllSamples,
        TrainMode::EasySamples,
        TrainMode::HardExampleMining,
        TrainMode::SplEspBc,
        TrainMode::SplEspBh,
        TrainMode::SplEspBline,
        TrainMode::SplEspBlog,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TrainMode::AllSamples => "AS",
            TrainMode::EasySamples => "ES",
            TrainMode::HardExampleMining => "HEM",
            TrainMode::SplEspBc => "SPL-ESP-BC",
            TrainMode::SplEspBh => "SPL-ESP-BH",
            TrainMode::SplEspBline => "SPL-ESP-BLine",
            TrainMode::SplEspBlog => "SPL-ESP-BLog",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown training mode '{s}'")))
    }

    pub fn is_spl(&self) -> bool {
        matches!(
            self,
            TrainMode::SplEspBc | TrainMode::SplEspBh | TrainMode::SplEspBline | TrainMode::SplEspBlog
        )
    }

    /// Loss-based regularizer for the SPL baseline modes.
    pub fn regularizer(&self) -> Option<RegularizerKind> {
        match self {
            TrainMode::SplEspBh => Some(RegularizerKind::Hard),
            TrainMode::SplEspBline => Some(RegularizerKind::Linear),
            TrainMode::SplEspBlog => Some(RegularizerKind::Logarithmic),
            _ => None,
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs_total: usize,
    /// Easy-sample-prior phase length T0 (SPL modes only).
    pub epochs_esp: usize,
    /// SPL phase length T1.
    pub epochs_spl: usize,
    pub batch_size: usize,
    pub xi0: Scalar,
    pub lambda0: Scalar,
    pub e1: Scalar,
    pub e2: Scalar,
    pub alpha: Scalar,
    pub n_fixed: Scalar,
    /// Root order of the confidence minimizer.
    pub m: u32,
    pub seed: u64,
    pub hem_keep_fraction: Scalar,
    pub learning_rate: Scalar,
    pub lr_decay: Scalar,
    pub core_fraction: Scalar,
    pub ignore_fraction: Scalar,
    pub detector: DetectorConfig,
    /// Test hook: force every sample weight to 1 in the SPL phase. With
    /// `epochs_esp = 0` this makes an SPL mode reproduce AS bit-for-bit.
    pub force_v_one: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::SplEspBc,
            epochs_total: 150,
            epochs_esp: 50,
            epochs_spl: 100,
            batch_size: 8,
            xi0: 0.8,
            lambda0: 0.2,
            e1: 0.1,
            e2: 0.9,
            alpha: 2.0,
            n_fixed: 64.0,
            m: 3,
            seed: 1,
            hem_keep_fraction: 0.4,
            learning_rate: 0.001,
            lr_decay: 0.95,
            core_fraction: 0.5,
            ignore_fraction: 1.0,
            detector: DetectorConfig::default(),
            force_v_one: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode.is_spl() && self.epochs_esp + self.epochs_spl != self.epochs_total {
            return Err(Error::domain(format!(
                "ESP modes need epochs_esp + epochs_spl == epochs_total ({} + {} != {})",
                self.epochs_esp, self.epochs_spl, self.epochs_total
            )));
        }
        if !(self.hem_keep_fraction > 0.0 && self.hem_keep_fraction <= 1.0) {
            return Err(Error::domain("hem_keep_fraction must lie in (0,1]"));
        }
        if self.batch_size == 0 || self.epochs_total == 0 {
            return Err(Error::domain("batch_size and epochs_total must be >= 1"));
        }
        if self.m == 0 {
            return Err(Error::domain("m must be a positive integer"));
        }
        Ok(())
    }

    pub fn xi_params(&self) -> Result<ScheduleParams<Scalar>> {
        ScheduleParams::new(self.xi0, self.e1, self.e2, ScheduleDirection::DecreasingToZero)
    }

    pub fn lambda_params(&self) -> Result<ScheduleParams<Scalar>> {
        ScheduleParams::new(self.lambda0, self.e1, self.e2, ScheduleDirection::IncreasingToOne)
    }
}

/// One structured log record per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub epoch: usize,
    pub mode: String,
    /// "esp", "spl", or "plain".
    pub phase: String,
    pub mean_loss: Scalar,
    /// Mean sample weight per difficulty level (None when the level was absent).
    pub mean_v_per_difficulty: [Option<Scalar>; 4],
    /// Objects that received weight 0 this epoch (counted per occurrence).
    pub zero_weight_objects: usize,
    /// Current ξ (BC) or λ (loss-based SPL), when applicable.
    pub schedule_value: Option<Scalar>,
    pub learning_rate: Scalar,
    /// HEM: number of objects kept this epoch.
    pub hem_selected: Option<usize>,
}

/// Result of a training run.
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Snapshot at the ESP/SPL phase boundary (SPL modes only).
    pub phase_checkpoint: Option<Checkpoint>,
    pub log: Vec<TrainLogRecord>,
}

/// How the per-object weights of a batch are determined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRule {
    AllOnes,
    /// Confidence-based minimizer at threshold ξ.
    ConfidenceBased { xi: Scalar, m: u32 },
    /// Loss-based closed form at age parameter λ.
    LossBased { kind: RegularizerKind, lambda: Scalar },
}

/// Per-object weights of a single scene under the given rule.
pub fn compute_scene_weights(
    rule: WeightRule,
    maps: &PredictionMaps<Scalar>,
    grid: &AnchorGrid<Scalar>,
    gt: &[BBox<Scalar>],
    assignment: &AnchorAssignment,
) -> Result<WeightVector<Scalar>> {
    let mut v = Vec::with_capacity(gt.len());
    for (i, b) in gt.iter().enumerate() {
        if assignment.object_anchors[i].is_empty() {
            // Skipped degenerate object: no positive anchors, weight moot.
            v.push(0.0);
            continue;
        }
        let w = match rule {
            WeightRule::AllOnes => 1.0,
            WeightRule::ConfidenceBased { xi, m } => {
                let conf = crate::assignment::object_confidence(b, maps, grid)?;
                minimize_weight_confidence_based(conf, xi, m)?
            }
            WeightRule::LossBased { kind, lambda } => {
                let l = baseline_sample_loss(b, &assignment.object_anchors[i], maps, grid)?;
                // λ reaches 1 at the end of the schedule; the logarithmic
                // closed form needs λ strictly below 1.
                let lam = if kind == RegularizerKind::Logarithmic {
                    lambda.min(1.0 - 1e-9)
                } else {
                    lambda
                };
                minimize_weight_loss_based(kind, l, lam)?
            }
        };
        v.push(w);
    }
    WeightVector::new(v)
}

/// Weights for every scene of a batch (empty vectors for object-free scenes).
pub fn compute_batch_weights(
    rule: WeightRule,
    batch: &[(&PredictionMaps<Scalar>, &[BBox<Scalar>], &AnchorAssignment)],
    grid: &AnchorGrid<Scalar>,
) -> Result<Vec<WeightVector<Scalar>>> {
    batch
        .iter()
        .map(|(maps, gt, asg)| compute_scene_weights(rule, maps, grid, gt, asg))
        .collect()
}

struct ScenePack {
    scene: Scene,
    gt: Vec<BBox<Scalar>>,
    assignment: AnchorAssignment,
}

fn pack_scenes(scenes: &[Scene], grid: &AnchorGrid<Scalar>, cfg: &TrainConfig) -> Result<Vec<ScenePack>> {
    scenes
        .iter()
        .map(|s| {
            let gt = s.gt_boxes();
            let assignment = assign_anchors(grid, &gt, cfg.core_fraction, cfg.ignore_fraction)?;
            Ok(ScenePack { scene: s.clone(), gt, assignment })
        })
        .collect()
}

/// Keep set for one HEM epoch: top `keep_fraction` of the object pool by
/// baseline sample loss (descending; ties by ascending object id). Returns
/// the kept object ids and the selection size `ceil(fraction * pool)`.
fn hem_keep_set(
    params: &DetectorParams,
    packs: &[ScenePack],
    grid: &AnchorGrid<Scalar>,
    keep_fraction: Scalar,
) -> Result<std::collections::HashSet<u64>> {
    let mut pool: Vec<(Scalar, u64)> = Vec::new();
    for p in packs {
        if p.gt.is_empty() {
            continue;
        }
        let maps = params.forward(&p.scene, grid)?;
        for (i, o) in p.scene.objects.iter().enumerate() {
            if p.assignment.object_anchors[i].is_empty() {
                continue;
            }
            let l = baseline_sample_loss(&o.gt_box, &p.assignment.object_anchors[i], &maps, grid)?;
            pool.push((l, o.object_id));
        }
    }
    let n = pool.len();
    let keep = (keep_fraction * n as Scalar).ceil() as usize;
    pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(pool.into_iter().take(keep).map(|(_, id)| id).collect())
}

/// Run one full training job.
pub fn train(cfg: &TrainConfig, spec: &DatasetSpec, scenes: &[Scene]) -> Result<TrainOutcome> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::contract("training dataset is empty"));
    }
    let grid = spec.grid();
    let full = pack_scenes(scenes, &grid, cfg)?;
    let easy_scenes = easy_subset(scenes);
    let easy = pack_scenes(&easy_scenes, &grid, cfg)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = DetectorParams::init(cfg.detector, &mut init_rng);
    let mut opt = OptimizerState::new(params.data.len(), cfg.learning_rate, cfg.lr_decay);

    let xi_params = cfg.xi_params()?;
    let lambda_params = cfg.lambda_params()?;

    let mut log = Vec::with_capacity(cfg.epochs_total);
    let mut phase_checkpoint = None;

    for epoch in 0..cfg.epochs_total {
        // The two stages are separate training runs: the SPL stage starts
        // with a fresh optimizer and learning-rate schedule.
        if cfg.mode.is_spl() && cfg.epochs_esp > 0 && epoch == cfg.epochs_esp {
            opt = OptimizerState::new(params.data.len(), cfg.learning_rate, cfg.lr_decay);
        }
        // Phase, sample pool and weight rule for this epoch.
        let (phase, packs, rule, schedule_value, hem_ids) = match cfg.mode {
            TrainMode::AllSamples => ("plain", &full, WeightRule::AllOnes, None, None),
            TrainMode::EasySamples => ("plain", &easy, WeightRule::AllOnes, None, None),
            TrainMode::HardExampleMining => {
                let ids = hem_keep_set(&params, &full, &grid, cfg.hem_keep_fraction)?;
                ("plain", &full, WeightRule::AllOnes, None, Some(ids))
            }
            mode => {
                if epoch < cfg.epochs_esp {
                    ("esp", &easy, WeightRule::AllOnes, None, None)
                } else {
                    let ep = (epoch - cfg.epochs_esp) as Scalar / cfg.epochs_spl as Scalar;
                    let (rule, value) = if cfg.force_v_one {
                        (WeightRule::AllOnes, None)
                    } else if mode == TrainMode::SplEspBc {
                        let xi = xi_schedule(&xi_params, ep);
                        (WeightRule::ConfidenceBased { xi, m: cfg.m }, Some(xi))
                    } else {
                        let lambda = lambda_schedule(&lambda_params, ep);
                        let kind = mode.regularizer().expect("loss-based SPL mode");
                        (WeightRule::LossBased { kind, lambda }, Some(lambda))
                    };
                    ("spl", &full, rule, value, None)
                }
            }
        };

        let mut order: Vec<usize> = (0..packs.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut scene_count = 0usize;
        let mut v_sum = [0.0; 4];
        let mut v_count = [0usize; 4];
        let mut zero_weight = 0usize;
        let mut hem_selected = None;
        if let Some(ids) = &hem_ids {
            hem_selected = Some(ids.len());
        }

        for batch in order.chunks(cfg.batch_size) {
            let mut batch_grad = vec![0.0; params.data.len()];
            for &si in batch {
                let p = &packs[si];
                let (maps, cache) = params.forward_cached(&p.scene, &grid)?;
                let v = match &hem_ids {
                    Some(ids) => WeightVector::new(
                        p.scene
                            .objects
                            .iter()
                            .map(|o| if ids.contains(&o.object_id) { 1.0 } else { 0.0 })
                            .collect(),
                    )?,
                    None => compute_scene_weights(rule, &maps, &grid, &p.gt, &p.assignment)?,
                };
                for (o, &w) in p.scene.objects.iter().zip(v.iter()) {
                    let k = (o.difficulty - 1) as usize;
                    v_sum[k] += w;
                    v_count[k] += 1;
                    if w == 0.0 {
                        zero_weight += 1;
                    }
                }
                let (loss, grad) = params.backward(
                    &p.scene,
                    &grid,
                    &maps,
                    &cache,
                    &p.assignment,
                    &p.gt,
                    &v,
                    cfg.alpha,
                    cfg.n_fixed,
                )?;
                if !loss.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        detail: format!("non-finite loss on scene {}", p.scene.scene_id),
                    });
                }
                loss_sum += loss;
                scene_count += 1;
                for (g, b) in grad.iter().zip(batch_grad.iter_mut()) {
                    *b += g;
                }
            }
            let inv = 1.0 / batch.len() as Scalar;
            for g in batch_grad.iter_mut() {
                *g *= inv;
            }
            opt.step(&mut params, &batch_grad).map_err(|e| match e {
                Error::Divergence { detail, .. } => Error::Divergence { epoch, detail },
                other => other,
            })?;
        }

        let record = TrainLogRecord {
            epoch,
            mode: cfg.mode.name().to_string(),
            phase: phase.to_string(),
            mean_loss: loss_sum / scene_count.max(1) as Scalar,
            mean_v_per_difficulty: std::array::from_fn(|k| {
                (v_count[k] > 0).then(|| v_sum[k] / v_count[k] as Scalar)
            }),
            zero_weight_objects: zero_weight,
            schedule_value,
            learning_rate: opt.learning_rate,
            hem_selected,
        };
        log.push(record);

        opt.end_epoch();

        if cfg.mode.is_spl() && cfg.epochs_esp > 0 && epoch + 1 == cfg.epochs_esp {
            phase_checkpoint = Some(Checkpoint {
                epoch: (epoch + 1) as u64,
                params: params.clone(),
                optimizer: opt.clone(),
            });
        }
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            epoch: cfg.epochs_total as u64,
            params,
            optimizer: opt,
        },
        phase_checkpoint,
        log,
    })
}
