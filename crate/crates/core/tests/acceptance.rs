//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! The comparative-training criteria share one set of full training runs
//! (four modes x three seeds) through a lazily initialized fixture.

use once_cell::sync::Lazy;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spl_detect::assignment::{assign_anchors, AnchorGrid, PredictionMaps};
use spl_detect::boxes::{ciou_loss, BBox};
use spl_detect::detector::{DetectorConfig, DetectorParams};
use spl_detect::losses::{baseline_sample_loss, total_loss, weighted_total_loss};
use spl_detect::metrics::{average_precision, evaluate, DetRecord, EvalConfig, EvalReport};
use spl_detect::spl::{
    lambda_schedule, minimize_weight_confidence_based, xi_schedule, ScheduleDirection,
    ScheduleParams, WeightVector,
};
use spl_detect::synth::{generate_dataset, DatasetSpec, Scene};
use spl_detect::trainer::{train, TrainConfig, TrainLogRecord, TrainMode};
use spl_detect::verify::{
    standard_lambda_grid, standard_loss_grid, sweep_confidence_based, sweep_loss_based_builtin,
};
use spl_detect::Scalar;
use std::time::Instant;

fn pass(criterion: usize, name: &str) {
    println!("ACCEPTANCE {criterion} ({name}): PASS");
}

// ---------------------------------------------------------------------------
// Criterion 1: closed-form minimizers are optimal against brute force.
// ---------------------------------------------------------------------------
#[test]
fn criterion_1_minimizer_optimality() {
    use spl_detect::spl::RegularizerKind::*;
    let start = Instant::now();
    let losses = standard_loss_grid();
    let lambdas = standard_lambda_grid();
    for kind in [Hard, Linear, Logarithmic] {
        let o = sweep_loss_based_builtin(kind, &losses, &lambdas, 100_000).unwrap();
        assert_eq!(o.cases, 99 * 9);
        assert!(
            o.max_value_slack <= 1e-9,
            "{kind:?}: objective slack {} over grid minimum",
            o.max_value_slack
        );
        assert!(
            o.max_argmin_deviation <= 2e-5,
            "{kind:?}: argmin deviation {}",
            o.max_argmin_deviation
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "minimizer sweep took {elapsed:.1}s, budget 30s");
    pass(1, "minimizer optimality");
}

// ---------------------------------------------------------------------------
// Criterion 2: confidence-based minimizer is exact, monotone, thresholded.
// ---------------------------------------------------------------------------
#[test]
fn criterion_2_confidence_minimizer_contract() {
    let xis = [0.0, 0.4, 0.8];
    let ms = [1u32, 2, 3];
    let o = sweep_confidence_based(&xis, &ms, 1000).unwrap();
    assert!(o.max_argmin_deviation <= 1e-12, "deviation {}", o.max_argmin_deviation);

    for &xi in &xis {
        for &m in &ms {
            let mut prev = 0.0;
            for i in 0..=1000 {
                let conf = i as Scalar / 1000.0;
                let v = minimize_weight_confidence_based(conf, xi, m).unwrap();
                assert!(v >= prev, "not monotone at conf={conf}, xi={xi}, m={m}");
                assert_eq!(v == 0.0, conf <= xi, "threshold broken at conf={conf}, xi={xi}");
                prev = v;
            }
        }
    }
    pass(2, "confidence-minimizer contract");
}

// ---------------------------------------------------------------------------
// Criterion 3: schedule values and continuity.
// ---------------------------------------------------------------------------
#[test]
fn criterion_3_schedule_tables() {
    let xi = ScheduleParams::new(0.8, 0.1, 0.9, ScheduleDirection::DecreasingToZero).unwrap();
    assert_eq!(xi_schedule(&xi, 0.05), 0.8);
    assert_eq!(xi_schedule(&xi, 0.5), 0.4);
    assert_eq!(xi_schedule(&xi, 0.95), 0.0);

    let lam = ScheduleParams::new(0.2, 0.1, 0.9, ScheduleDirection::IncreasingToOne).unwrap();
    assert_eq!(lambda_schedule(&lam, 0.0), 0.2);
    assert_eq!(lambda_schedule(&lam, 0.9), 1.0);

    type Schedule = fn(&ScheduleParams<Scalar>, Scalar) -> Scalar;
    let checks: [(ScheduleParams<Scalar>, Schedule); 2] =
        [(xi, xi_schedule::<Scalar>), (lam, lambda_schedule::<Scalar>)];
    for (params, f) in checks {
        let mut prev = f(&params, 0.0);
        for i in 1..=10_000 {
            let ep = i as Scalar / 10_000.0;
            let cur = f(&params, ep);
            assert!(
                (cur - prev).abs() < 1e-3,
                "jump {} at EP {ep}",
                (cur - prev).abs()
            );
            prev = cur;
        }
    }
    pass(3, "schedule tables");
}

// ---------------------------------------------------------------------------
// Criterion 4: analytic gradients match central finite differences.
// ---------------------------------------------------------------------------
#[test]
fn criterion_4_gradient_correctness() {
    let start = Instant::now();
    let mut configs = 0;
    for seed in 1u64..=7 {
        let spec = DatasetSpec {
            n_train_scenes: 1,
            n_test_scenes: 1,
            grid_width: 10,
            grid_height: 7,
            seed,
            ..DatasetSpec::default()
        };
        let d = generate_dataset(&spec).unwrap();
        let scene = &d.train[0];
        let grid = spec.grid();
        let gt = scene.gt_boxes();
        let asg = assign_anchors(&grid, &gt, 0.5, 1.0).unwrap();
        for pattern in 0..3 {
            let weights: Vec<Scalar> = (0..gt.len())
                .map(|i| match pattern {
                    0 => 1.0,
                    1 => 0.5,
                    _ => [0.0, 0.5, 1.0][i % 3],
                })
                .collect();
            let v = WeightVector::new(weights).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 101 + pattern as u64);
            let mut params = DetectorParams::init(DetectorConfig::default(), &mut rng);
            let (maps, cache) = params.forward_cached(scene, &grid).unwrap();
            let (_, grad) = params
                .backward(scene, &grid, &maps, &cache, &asg, &gt, &v, 2.0, 64.0)
                .unwrap();
            let eps = 1e-5;
            let loss_at = |p: &DetectorParams| {
                let maps = p.forward(scene, &grid).unwrap();
                weighted_total_loss(&maps, &asg, &gt, &grid, 2.0, 64.0, &v).unwrap().total
            };
            for i in (0..params.data.len()).step_by(5) {
                let orig = params.data[i];
                params.data[i] = orig + eps;
                let lp = loss_at(&params);
                params.data[i] = orig - eps;
                let lm = loss_at(&params);
                params.data[i] = orig;
                let fd = (lp - lm) / (2.0 * eps);
                if grad[i].abs() > 1e-8 || fd.abs() > 1e-8 {
                    let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs());
                    assert!(
                        rel < 1e-4,
                        "seed {seed} pattern {pattern} param {i}: analytic {} vs fd {fd}",
                        grad[i]
                    );
                }
            }
            configs += 1;
        }
    }
    assert!(configs >= 20, "only {configs} configurations checked");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "gradient check took {elapsed:.1}s, budget 60s");
    pass(4, "gradient correctness");
}

// ---------------------------------------------------------------------------
// Criterion 5: loss ranges over random scene-scale samples.
// ---------------------------------------------------------------------------
fn random_scene_box(rng: &mut impl RngCore) -> BBox<Scalar> {
    let w = rng.gen_range(16.0..64.0);
    let h = rng.gen_range(16.0..64.0);
    let cx = rng.gen_range(w / 2.0..384.0 - w / 2.0);
    let cy = rng.gen_range(h / 2.0..216.0 - h / 2.0);
    BBox::new(cx, cy, w, h).unwrap()
}

#[test]
fn criterion_5_loss_ranges() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let grid = AnchorGrid::new(48, 27, 8.0).unwrap();
    for _ in 0..10_000 {
        let a = random_scene_box(&mut rng);
        let b = random_scene_box(&mut rng);
        let l = ciou_loss(&a, &b).unwrap();
        assert!((0.0..2.0).contains(&l), "ciou {l} out of range for {a:?} vs {b:?}");
        assert_eq!(l == 0.0, a == b, "ciou zero without identity");
    }
    let ident = random_scene_box(&mut rng);
    assert_eq!(ciou_loss(&ident, &ident).unwrap(), 0.0);

    for _ in 0..10_000 {
        let gt = random_scene_box(&mut rng);
        let asg = assign_anchors(&grid, &[gt], 0.5, 1.0).unwrap();
        let mut maps = PredictionMaps {
            width: grid.width,
            height: grid.height,
            conf: vec![0.0; grid.len()],
            reg: vec![[1.0; 4]; grid.len()],
        };
        for a in 0..grid.len() {
            maps.conf[a] = rng.gen_range(0.001..0.999);
            for j in 0..4 {
                maps.reg[a][j] = rng.gen_range(0.05..60.0);
            }
        }
        let l = baseline_sample_loss(&gt, &asg.object_anchors[0], &maps, &grid).unwrap();
        assert!((0.0..1.0).contains(&l), "baseline loss {l} out of range");
        assert!(l > 0.0, "baseline loss zero for random predictions");
    }
    // Zero exactly at the trivial identity: conf 1 and exact boxes.
    let gt = BBox::new(96.0, 60.0, 40.0, 40.0).unwrap();
    let asg = assign_anchors(&grid, &[gt], 0.5, 1.0).unwrap();
    let mut maps = PredictionMaps {
        width: grid.width,
        height: grid.height,
        conf: vec![0.0; grid.len()],
        reg: vec![[1.0; 4]; grid.len()],
    };
    let (x1, y1, x2, y2) = gt.corners();
    for &a in &asg.object_anchors[0] {
        let (ax, ay) = grid.center(a);
        maps.conf[a] = 1.0;
        maps.reg[a] = [ax - x1, ay - y1, x2 - ax, y2 - ay];
    }
    assert_eq!(baseline_sample_loss(&gt, &asg.object_anchors[0], &maps, &grid).unwrap(), 0.0);
    pass(5, "loss ranges");
}

// ---------------------------------------------------------------------------
// Criterion 6: unit-weight equivalence, loss-level and training-level.
// ---------------------------------------------------------------------------
#[test]
fn criterion_6_unit_weight_equivalence() {
    // Loss level: bit-equality on detector outputs over synthetic scenes.
    let spec = DatasetSpec {
        n_train_scenes: 6,
        n_test_scenes: 1,
        grid_width: 16,
        grid_height: 12,
        seed: 66,
        ..DatasetSpec::default()
    };
    let d = generate_dataset(&spec).unwrap();
    let grid = spec.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let params = DetectorParams::init(DetectorConfig::default(), &mut rng);
    for scene in &d.train {
        let gt = scene.gt_boxes();
        let asg = assign_anchors(&grid, &gt, 0.5, 1.0).unwrap();
        let maps = params.forward(scene, &grid).unwrap();
        let t = total_loss(&maps, &asg, &gt, &grid, 2.0, 64.0).unwrap();
        let w = weighted_total_loss(&maps, &asg, &gt, &grid, 2.0, 64.0, &WeightVector::ones(gt.len()))
            .unwrap();
        assert_eq!(t.total.to_bits(), w.total.to_bits(), "scene {}", scene.scene_id);
    }

    // Training level: AS and an SPL mode with weights forced to 1 produce
    // identical checkpoints over a 2-epoch smoke run.
    let spec = DatasetSpec {
        n_train_scenes: 12,
        n_test_scenes: 2,
        grid_width: 16,
        grid_height: 12,
        seed: 68,
        ..DatasetSpec::default()
    };
    let d = generate_dataset(&spec).unwrap();
    let as_cfg = TrainConfig {
        mode: TrainMode::AllSamples,
        epochs_total: 2,
        epochs_esp: 1,
        epochs_spl: 1,
        ..TrainConfig::default()
    };
    let spl_cfg = TrainConfig {
        mode: TrainMode::SplEspBc,
        epochs_total: 2,
        epochs_esp: 0,
        epochs_spl: 2,
        force_v_one: true,
        ..TrainConfig::default()
    };
    let a = train(&as_cfg, &spec, &d.train).unwrap();
    let b = train(&spl_cfg, &spec, &d.train).unwrap();
    assert_eq!(a.checkpoint.params, b.checkpoint.params);
    assert_eq!(a.checkpoint.optimizer, b.checkpoint.optimizer);
    pass(6, "unit-weight equivalence");
}

// ---------------------------------------------------------------------------
// Shared fixture for criteria 7 and 8: full comparison runs.
// ---------------------------------------------------------------------------
struct ModeRun {
    report: EvalReport,
    log: Vec<TrainLogRecord>,
}

struct ComparisonRuns {
    /// Indexed `[mode][seed]` with modes AS, ES, HEM, SPL-ESP-BC.
    runs: Vec<Vec<ModeRun>>,
    elapsed_secs: f64,
}

const COMPARED: [TrainMode; 4] = [
    TrainMode::AllSamples,
    TrainMode::EasySamples,
    TrainMode::HardExampleMining,
    TrainMode::SplEspBc,
];
const SEEDS: [u64; 3] = [1, 2, 3];

static COMPARISON: Lazy<ComparisonRuns> = Lazy::new(|| {
    let start = Instant::now();
    let spec = DatasetSpec::default();
    let dataset = generate_dataset(&spec).unwrap();
    let grid = spec.grid();
    let eval_cfg = EvalConfig::default();
    let runs = COMPARED
        .iter()
        .map(|&mode| {
            SEEDS
                .iter()
                .map(|&seed| {
                    let cfg = TrainConfig { mode, seed, ..TrainConfig::default() };
                    let out = train(&cfg, &spec, &dataset.train).unwrap();
                    let report =
                        evaluate(&out.checkpoint.params, &grid, &dataset.test, &eval_cfg).unwrap();
                    ModeRun { report, log: out.log }
                })
                .collect()
        })
        .collect();
    ComparisonRuns { runs, elapsed_secs: start.elapsed().as_secs_f64() }
});

fn seed_mean(xs: impl Iterator<Item = Scalar>) -> Scalar {
    let v: Vec<Scalar> = xs.collect();
    v.iter().sum::<Scalar>() / v.len() as Scalar
}

// ---------------------------------------------------------------------------
// Criterion 7: directional reproduction of the comparative pattern.
// ---------------------------------------------------------------------------
#[test]
fn criterion_7_directional_comparison() {
    let c = &*COMPARISON;
    let d4 = |m: usize, s: usize| {
        c.runs[m][s].report.detection_rate[3].expect("difficulty-4 objects present")
    };
    let fdr = |m: usize, s: usize| c.runs[m][s].report.false_detection_rate;
    let ap50 = |m: usize, s: usize| c.runs[m][s].report.ap50;
    let (as_i, es_i, hem_i, bc_i) = (0usize, 1usize, 2usize, 3usize);

    for (m, mode) in COMPARED.iter().enumerate() {
        for (s, seed) in SEEDS.iter().enumerate() {
            println!(
                "  {:<12} seed {seed}: ap50 {:.3} d4 {:.3} fdr {:.3}",
                mode.name(),
                ap50(m, s),
                d4(m, s),
                fdr(m, s)
            );
        }
    }

    // (a) ES has the lowest difficulty-4 detection rate.
    let es_mean = seed_mean((0..3).map(|s| d4(es_i, s)));
    for m in [as_i, hem_i, bc_i] {
        let other = seed_mean((0..3).map(|s| d4(m, s)));
        assert!(es_mean < other, "(a) seed-mean: ES d4 {es_mean} !< mode {m} d4 {other}");
    }
    let a_seeds = (0..3)
        .filter(|&s| [as_i, hem_i, bc_i].iter().all(|&m| d4(es_i, s) < d4(m, s)))
        .count();
    assert!(a_seeds >= 2, "(a) holds for only {a_seeds} of 3 seeds");

    // (b) HEM has the highest false-detection rate.
    let hem_mean = seed_mean((0..3).map(|s| fdr(hem_i, s)));
    for m in [as_i, es_i, bc_i] {
        let other = seed_mean((0..3).map(|s| fdr(m, s)));
        assert!(hem_mean > other, "(b) seed-mean: HEM fdr {hem_mean} !> mode {m} fdr {other}");
    }
    let b_seeds = (0..3)
        .filter(|&s| [as_i, es_i, bc_i].iter().all(|&m| fdr(hem_i, s) > fdr(m, s)))
        .count();
    assert!(b_seeds >= 2, "(b) holds for only {b_seeds} of 3 seeds");

    // (c) Confidence-based SPL does not raise the false-detection rate over AS.
    let bc_fdr = seed_mean((0..3).map(|s| fdr(bc_i, s)));
    let as_fdr = seed_mean((0..3).map(|s| fdr(as_i, s)));
    assert!(bc_fdr <= as_fdr, "(c) seed-mean: BC fdr {bc_fdr} > AS fdr {as_fdr}");
    let c_seeds = (0..3).filter(|&s| fdr(bc_i, s) <= fdr(as_i, s)).count();
    assert!(c_seeds >= 2, "(c) holds for only {c_seeds} of 3 seeds");

    // (d) Confidence-based SPL keeps AP50 within 0.01 of AS.
    let bc_ap = seed_mean((0..3).map(|s| ap50(bc_i, s)));
    let as_ap = seed_mean((0..3).map(|s| ap50(as_i, s)));
    assert!(bc_ap >= as_ap - 0.01, "(d) seed-mean: BC ap50 {bc_ap} < AS ap50 {as_ap} - 0.01");

    assert!(
        c.elapsed_secs < 1800.0,
        "comparison runs took {:.0}s, budget 1800s",
        c.elapsed_secs
    );
    pass(7, "directional comparison");
}

// ---------------------------------------------------------------------------
// Criterion 8: easy-to-hard weight ordering in the SPL phase.
// ---------------------------------------------------------------------------
#[test]
fn criterion_8_easy_to_hard_ordering() {
    let c = &*COMPARISON;
    for (s, seed) in SEEDS.iter().enumerate() {
        let log = &c.runs[3][s].log; // SPL-ESP-BC
        let mut checked = 0;
        for rec in log.iter().filter(|r| r.phase == "spl") {
            if let (Some(v1), Some(v4)) =
                (rec.mean_v_per_difficulty[0], rec.mean_v_per_difficulty[3])
            {
                assert!(
                    v1 >= v4,
                    "seed {seed} epoch {}: mean v(d1) {v1} < mean v(d4) {v4}",
                    rec.epoch
                );
                checked += 1;
            }
        }
        assert!(checked >= 90, "seed {seed}: only {checked} SPL epochs had both levels");
    }
    pass(8, "easy-to-hard ordering");
}

// ---------------------------------------------------------------------------
// Criterion 9: HEM selects ceil(0.4 n) each epoch.
// ---------------------------------------------------------------------------
#[test]
fn criterion_9_hem_selection_size() {
    // Exactly one object per scene, 50 scenes: a 50-object dataset.
    let spec = DatasetSpec {
        n_train_scenes: 50,
        n_test_scenes: 1,
        objects_per_scene_min: 1,
        objects_per_scene_max: 1,
        seed: 99,
        ..DatasetSpec::default()
    };
    let d = generate_dataset(&spec).unwrap();
    let n: usize = d.train.iter().map(|s| s.objects.len()).sum();
    assert_eq!(n, 50);
    let cfg = TrainConfig {
        mode: TrainMode::HardExampleMining,
        epochs_total: 4,
        epochs_esp: 0,
        epochs_spl: 0,
        ..TrainConfig::default()
    };
    let out = train(&cfg, &spec, &d.train).unwrap();
    assert_eq!(out.log.len(), 4);
    let expect = (0.4f64 * n as f64).ceil() as usize;
    assert_eq!(expect, 20);
    for rec in &out.log {
        assert_eq!(rec.hem_selected, Some(expect), "epoch {}", rec.epoch);
    }
    pass(9, "HEM selection size");
}

// ---------------------------------------------------------------------------
// Criterion 10: metric hand examples and perfect-oracle evaluation.
// ---------------------------------------------------------------------------
#[test]
fn criterion_10_metric_correctness() {
    let b = |cx: f64, cy: f64, w: f64, h: f64| BBox::new(cx, cy, w, h).unwrap();

    // Perfect single detection: AP 1.
    let gt = vec![vec![b(10.0, 10.0, 8.0, 8.0)]];
    let dets = vec![DetRecord { scene: 0, bbox: b(10.0, 10.0, 8.0, 8.0), score: 0.9 }];
    assert_eq!(average_precision(&dets, &gt, 0.5), 1.0);

    // No detections: AP 0.
    assert_eq!(average_precision(&[], &gt, 0.5), 0.0);

    // One ground truth, two detections where only the lower-scored one
    // matches: AP 0.5.
    let dets = vec![
        DetRecord { scene: 0, bbox: b(100.0, 100.0, 8.0, 8.0), score: 0.9 },
        DetRecord { scene: 0, bbox: b(10.0, 10.0, 8.0, 8.0), score: 0.5 },
    ];
    assert_eq!(average_precision(&dets, &gt, 0.5), 0.5);

    // Perfect oracle on a clean generated dataset: ap50 = 1.
    let spec = DatasetSpec {
        n_train_scenes: 1,
        n_test_scenes: 40,
        box_jitter: [0.0; 4],
        seed: 100,
        ..DatasetSpec::default()
    };
    let d = generate_dataset(&spec).unwrap();
    let gt: Vec<Vec<BBox<Scalar>>> = d.test.iter().map(Scene::gt_boxes).collect();
    let dets: Vec<DetRecord> = gt
        .iter()
        .enumerate()
        .flat_map(|(si, boxes)| {
            boxes.iter().map(move |bb| DetRecord { scene: si, bbox: *bb, score: 1.0 })
        })
        .collect();
    assert!(gt.iter().map(Vec::len).sum::<usize>() > 0);
    assert_eq!(average_precision(&dets, &gt, 0.5), 1.0);
    pass(10, "metric correctness");
}
