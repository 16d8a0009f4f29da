//! Command-line front end: dataset generation, training, evaluation,
//! multi-mode comparison, and minimizer verification.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use spl_detect::config::ExperimentConfig;
use spl_detect::detector::Checkpoint;
use spl_detect::metrics::{evaluate, EvalReport};
use spl_detect::synth::{generate_dataset, load_scenes, save_scenes, Scene, Split};
use spl_detect::trainer::{train, TrainLogRecord, TrainMode, TrainOutcome};
use spl_detect::verify::verify_all_minimizers;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "spl-detect", version, about = "Self-paced training strategies for a one-class anchor-grid detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write the train/test splits to disk.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (defaults to the configured out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the dataset seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one model and evaluate it on the test split.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training mode: AS, ES, HEM, SPL-ESP-BC, SPL-ESP-BH, SPL-ESP-BLine, SPL-ESP-BLog.
        #[arg(long)]
        mode: Option<String>,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use a previously generated dataset directory instead of regenerating.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train all (or selected) modes across the configured seeds and print a
    /// comparison table.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated mode names (default: all seven).
        #[arg(long)]
        modes: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed-form weight minimizers against brute-force search.
    VerifyMinimizers {
        /// Grid intervals for the brute-force search.
        #[arg(long, default_value_t = 100_000)]
        grid_points: usize,
    },
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn load_or_generate(
    cfg: &ExperimentConfig,
    dataset_dir: &Option<PathBuf>,
) -> anyhow::Result<(Vec<Scene>, Vec<Scene>)> {
    match dataset_dir {
        Some(dir) => {
            let (spec, split, train) = load_scenes(&dir.join("train.spld"))?;
            if spec != cfg.dataset {
                bail!("dataset on disk was generated with a different spec than the config");
            }
            if split != Split::Train {
                bail!("train.spld does not hold the train split");
            }
            let (_, _, test) = load_scenes(&dir.join("test.spld"))?;
            Ok((train, test))
        }
        None => {
            let d = generate_dataset(&cfg.dataset)?;
            Ok((d.train, d.test))
        }
    }
}

fn write_log(path: &Path, log: &[TrainLogRecord]) -> anyhow::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for rec in log {
        serde_json::to_writer(&mut f, rec)?;
        writeln!(f)?;
    }
    Ok(())
}

fn run_one(
    cfg: &ExperimentConfig,
    mode: TrainMode,
    seed: u64,
    train_scenes: &[Scene],
    test_scenes: &[Scene],
    out_dir: &Path,
) -> anyhow::Result<EvalReport> {
    let mut tc = cfg.train.clone();
    tc.mode = mode;
    tc.seed = seed;
    let run_dir = out_dir.join(format!("{}-seed{}", mode.name(), seed));
    std::fs::create_dir_all(&run_dir)?;

    let mut echo = cfg.clone();
    echo.train = tc.clone();
    echo.save(&run_dir.join("config.toml"))?;

    let TrainOutcome { checkpoint, phase_checkpoint, log } =
        train(&tc, &cfg.dataset, train_scenes)?;
    write_log(&run_dir.join("log.jsonl"), &log)?;
    checkpoint.save(&run_dir.join("final.ckpt"))?;
    if let Some(pc) = phase_checkpoint {
        pc.save(&run_dir.join("phase1.ckpt"))?;
    }

    let grid = cfg.dataset.grid();
    let report = evaluate(&checkpoint.params, &grid, test_scenes, &cfg.eval)?;
    std::fs::write(run_dir.join("eval.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

fn print_report(mode: &str, seed: u64, r: &EvalReport) {
    let rate = |o: Option<f64>| o.map_or("  -  ".to_string(), |v| format!("{v:5.3}"));
    println!(
        "{mode:<14} seed {seed}  ap50 {:5.3}  ap75 {:5.3}  ap {:5.3}  det[d1..d4] {} {} {} {}  fdr {:5.3}",
        r.ap50,
        r.ap75,
        r.ap,
        rate(r.detection_rate[0]),
        rate(r.detection_rate[1]),
        rate(r.detection_rate[2]),
        rate(r.detection_rate[3]),
        r.false_detection_rate
    );
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.dataset.seed = s;
            }
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            std::fs::create_dir_all(&out)?;
            let d = generate_dataset(&cfg.dataset)?;
            save_scenes(&out.join("train.spld"), &cfg.dataset, Split::Train, &d.train)?;
            save_scenes(&out.join("test.spld"), &cfg.dataset, Split::Test, &d.test)?;
            cfg.save(&out.join("config.toml"))?;
            println!(
                "wrote {} train / {} test scenes to {}",
                d.train.len(),
                d.test.len(),
                out.display()
            );
        }
        Command::Train { config, mode, seed, out, dataset } => {
            let cfg = load_config(&config)?;
            let mode = match mode {
                Some(m) => TrainMode::parse(&m)?,
                None => cfg.train.mode,
            };
            let seed = seed.unwrap_or(cfg.train.seed);
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            let (train_scenes, test_scenes) = load_or_generate(&cfg, &dataset)?;
            let report = run_one(&cfg, mode, seed, &train_scenes, &test_scenes, &out)?;
            print_report(mode.name(), seed, &report);
        }
        Command::Evaluate { config, checkpoint, dataset } => {
            let cfg = load_config(&config)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let (_, test_scenes) = load_or_generate(&cfg, &dataset)?;
            let grid = cfg.dataset.grid();
            let report = evaluate(&ckpt.params, &grid, &test_scenes, &cfg.eval)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Compare { config, modes, out } => {
            let cfg = load_config(&config)?;
            let modes: Vec<TrainMode> = match modes {
                Some(list) => list
                    .split(',')
                    .map(|m| TrainMode::parse(m.trim()))
                    .collect::<Result<_, _>>()?,
                None => TrainMode::ALL.to_vec(),
            };
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            std::fs::create_dir_all(&out)?;
            let (train_scenes, test_scenes) = load_or_generate(&cfg, &None)?;
            let mut summary: Vec<(String, u64, EvalReport)> = Vec::new();
            for mode in modes {
                for &seed in &cfg.seeds {
                    let report =
                        run_one(&cfg, mode, seed, &train_scenes, &test_scenes, &out)?;
                    print_report(mode.name(), seed, &report);
                    summary.push((mode.name().to_string(), seed, report));
                }
            }
            std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
            println!("summary written to {}", out.join("summary.json").display());
        }
        Command::VerifyMinimizers { grid_points } => {
            let lines = verify_all_minimizers(grid_points)?;
            let mut all_pass = true;
            for l in &lines {
                println!(
                    "{:<16} cases {:>6}  value slack {:.3e}  argmin dev {:.3e}  {}",
                    l.name,
                    l.outcome.cases,
                    l.outcome.max_value_slack,
                    l.outcome.max_argmin_deviation,
                    if l.pass { "PASS" } else { "FAIL" }
                );
                all_pass &= l.pass;
            }
            if !all_pass {
                bail!("minimizer verification failed");
            }
        }
    }
    Ok(())
}
