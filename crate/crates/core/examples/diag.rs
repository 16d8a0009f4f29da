//! Diagnostic dump: per-difficulty confidence and localization statistics of
//! a trained checkpoint on a freshly generated test split.
//!
//! Usage: cargo run --example diag -- <config.toml> <checkpoint>

use spl_detect::assignment::object_confidence;
use spl_detect::boxes::iou;
use spl_detect::config::ExperimentConfig;
use spl_detect::detector::Checkpoint;
use spl_detect::synth::generate_dataset;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = ExperimentConfig::load(args.next().expect("config path").as_ref())?;
    let ckpt = Checkpoint::load(args.next().expect("checkpoint path").as_ref())?;
    let d = generate_dataset(&cfg.dataset)?;
    let grid = cfg.dataset.grid();

    let mut conf_sum = [0.0f64; 4];
    let mut iou_sum = [0.0f64; 4];
    let mut n = [0usize; 4];
    let mut bg_max: Vec<f64> = Vec::new();
    let mut distractor_conf: Vec<f64> = Vec::new();

    for scene in &d.test {
        let maps = ckpt.params.forward(scene, &grid)?;
        for o in &scene.objects {
            let k = (o.difficulty - 1) as usize;
            let c = object_confidence(&o.gt_box, &maps, &grid)?;
            // Best decoded box among anchors inside the GT box.
            let mut best_iou = 0.0f64;
            for a in 0..grid.len() {
                let (ax, ay) = grid.center(a);
                if o.gt_box.contains(ax, ay) {
                    if let Some(b) = maps.decoded_box(&grid, a) {
                        best_iou = best_iou.max(iou(&o.gt_box, &b));
                    }
                }
            }
            conf_sum[k] += c;
            iou_sum[k] += best_iou;
            n[k] += 1;
        }
        for dx in &scene.distractors {
            if let Ok(c) = object_confidence(dx, &maps, &grid) {
                distractor_conf.push(c);
            }
        }
        // Max background confidence away from objects and distractors.
        let mut m = 0.0f64;
        for a in 0..grid.len() {
            let (ax, ay) = grid.center(a);
            let inside = scene.objects.iter().any(|o| o.gt_box.contains(ax, ay))
                || scene.distractors.iter().any(|b| b.contains(ax, ay));
            if !inside {
                m = m.max(maps.conf[a]);
            }
        }
        bg_max.push(m);
    }

    for k in 0..4 {
        if n[k] > 0 {
            println!(
                "difficulty {}: n {:4}  mean conf {:.3}  mean best IoU {:.3}",
                k + 1,
                n[k],
                conf_sum[k] / n[k] as f64,
                iou_sum[k] / n[k] as f64
            );
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!("distractors: n {:4}  mean conf {:.3}", distractor_conf.len(), mean(&distractor_conf));
    println!("background:  mean per-scene max conf {:.3}", mean(&bg_max));
    Ok(())
}
