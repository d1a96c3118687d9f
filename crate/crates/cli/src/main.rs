use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use reefscan::config::Config;
use reefscan::evaluate::{evaluate_dataset, EvalReport};
use reefscan::experiment::{build_templates, detect_dataset, end_to_end, RunManifest};
use reefscan::io::{load_cloud, save_json, write_atomic};
use reefscan::noisechar::characterize;
use reefscan::simulate::generate_dataset;
use reefscan::templates::TemplateLibrary;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_GATE: u8 = 4;

/// Synthetic MBES reef surveys, template-matching detection and mAP evaluation.
///
/// Settings come from built-in defaults, then the `--config` file, then each
/// `--set key.path=value` in order; later sources win.
#[derive(Parser)]
#[command(name = "reefscan", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Sectioned TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set detect.seabed.clearance=0.05`.
    #[arg(long = "set", value_name = "KEY.PATH=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "REEFSCAN_THREADS", global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of scenes with annotations.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(short = 'n', long, default_value_t = 100)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the template library.
    Templates {
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect objects in every cloud of a directory.
    Detect {
        /// Directory of `.ply`/`.xyz` scene clouds.
        #[arg(long)]
        scenes: PathBuf,
        /// Saved template library; built from the configuration if omitted.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score detections against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Where the report goes; defaults to the prediction directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also report thresholds 0.5, 1, 2 and 4 m.
        #[arg(long)]
        multi_threshold: bool,
        /// Exit with status 4 when mAP at the first threshold falls below this.
        #[arg(long)]
        gate: Option<f64>,
    },
    /// Characterize sensor noise on a near-planar cloud.
    NoiseChar {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, build templates, detect and evaluate in one run.
    EndToEnd {
        #[arg(long)]
        out: PathBuf,
        #[arg(short = 'n', long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        gate: Option<f64>,
    },
}

enum Outcome {
    Done,
    GateFailed(String),
}

fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    save_json(report, &dir.join("eval_report.json"))?;
    write_atomic(&dir.join("eval_report.txt"), report.table().as_bytes())?;
    Ok(())
}

fn check_gate(report: &EvalReport, gate: Option<f64>) -> Outcome {
    match (gate, report.primary_map()) {
        (Some(g), Some(m)) if m < g => Outcome::GateFailed(format!("mAP {m:.4} is below the gate {g}")),
        (Some(g), None) => Outcome::GateFailed(format!("mAP is undefined (no ground truth); gate {g}")),
        _ => Outcome::Done,
    }
}

fn finish(mut manifest: RunManifest, out: &Path, start: Instant) -> Result<()> {
    manifest.record_outputs(out)?;
    manifest.duration_secs = start.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    let start = Instant::now();
    let mut config = Config::load(cli.global.config.as_deref(), &cli.global.overrides)?;
    match cli.command {
        Command::Simulate { out, scenes, seed } => {
            let m = generate_dataset(scenes, &config.simulate, seed, &out)?;
            eprintln!("wrote {} scenes with {} objects to {}", m.scene_count, m.total_objects, out.display());
            finish(RunManifest::new("simulate", &config, Some(seed)), &out, start)?;
        }
        Command::Templates { out } => {
            let lib = build_templates(&config)?;
            lib.save(&out)?;
            eprintln!("wrote {} templates to {}", lib.len(), out.display());
            finish(RunManifest::new("templates", &config, None), &out, start)?;
        }
        Command::Detect { scenes, templates, out } => {
            let lib = match &templates {
                Some(dir) => TemplateLibrary::load(dir)?,
                None => build_templates(&config)?,
            };
            let files = detect_dataset(&scenes, &lib, &config, &out)?;
            eprintln!("wrote detections for {} scenes to {}", files.len(), out.display());
            let mut manifest = RunManifest::new("detect", &config, None);
            manifest.inputs.push(scenes.display().to_string());
            manifest.inputs.extend(templates.map(|t| t.display().to_string()));
            finish(manifest, &out, start)?;
        }
        Command::Evaluate {
            pred,
            gt,
            out,
            multi_threshold,
            gate,
        } => {
            if multi_threshold {
                config.evaluate.thresholds = vec![0.5, 1.0, 2.0, 4.0];
            }
            let report = evaluate_dataset(&pred, &gt, &config.evaluate)?;
            let out = out.unwrap_or_else(|| pred.clone());
            write_report(&report, &out)?;
            print!("{}", report.table());
            let mut manifest = RunManifest::new("evaluate", &config, None);
            manifest.inputs = vec![pred.display().to_string(), gt.display().to_string()];
            manifest.duration_secs = start.elapsed().as_secs_f64();
            manifest.write(&out)?;
            return Ok(check_gate(&report, gate.or(config.evaluate.map_gate)));
        }
        Command::NoiseChar { cloud, out } => {
            let points = load_cloud(&cloud)?;
            let report = characterize(&points, &config.noise)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            save_json(&report, &out.join("noise_stats.json"))?;
            write_atomic(&out.join("histogram_raw.csv"), report.raw_histogram.to_csv().as_bytes())?;
            write_atomic(&out.join("histogram_trimmed.csv"), report.trimmed_histogram.to_csv().as_bytes())?;
            for (label, s) in [("raw", &report.raw), ("trimmed", &report.trimmed)] {
                println!(
                    "{label:<8} n={} mu={:.6} sigma={:.6} skew_z={:.3} p={:.4} normal={}",
                    s.n, s.mu, s.sigma, s.skew_statistic, s.skew_p_value, s.skew_passes
                );
            }
            let mut manifest = RunManifest::new("noise-char", &config, None);
            manifest.inputs.push(cloud.display().to_string());
            finish(manifest, &out, start)?;
        }
        Command::EndToEnd { out, scenes, seed, gate } => {
            let result = end_to_end(&config, scenes, seed, &out)?;
            write_atomic(&out.join("eval_report.txt"), result.report.table().as_bytes())?;
            print!("{}", result.report.table());
            finish(RunManifest::new("end-to-end", &config, Some(seed)), &out, start)?;
            return Ok(check_gate(&result.report, gate.or(config.evaluate.map_gate)));
        }
    }
    Ok(Outcome::Done)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<reefscan::Error>() {
        Some(reefscan::Error::Config(_) | reefscan::Error::InvalidInput(_) | reefscan::Error::UnknownClass(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::GateFailed(msg)) => {
            eprintln!("gate failed: {msg}");
            ExitCode::from(EXIT_GATE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
