//! Command-line front end: dataset generation, the two training stages,
//! Monte-Carlo BER sweeps, and timing benches.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imlink_core::config::{parse_config, FullConfig};
use imlink_core::detect::{AdNet, DetectorKind, SdNet};
use imlink_core::mapping::ImMapper;
use imlink_core::nn::Network;
use imlink_core::rng::{substream, Purpose};
use imlink_core::sim::{bench_table_text, rows_to_csv, run_bench, run_ber_sweep};
use imlink_core::train::{
    evaluate_ad_accuracy, generate_dataset, generate_holdout, load_ad, load_sd, save_ad,
    save_dataset, save_sd, train_ad, train_sd, TrainedDetector,
};

#[derive(Parser)]
#[command(name = "imlink", version, about = "Index-modulation MIMO-OFDM link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Master seed for every random substream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the configured channel model (rayleigh | correlated).
    #[arg(long)]
    channel: Option<String>,
    /// Override the configured CSIR mode (perfect | imperfect).
    #[arg(long)]
    csir: Option<String>,
    #[arg(long)]
    snr_min: Option<f64>,
    #[arg(long)]
    snr_max: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// Frames per sweep point (or bench frame count).
    #[arg(long)]
    frames: Option<u64>,
    /// Activation threshold for the learned detectors.
    #[arg(long)]
    tau: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, String> {
        let mut o = Vec::new();
        if let Some(v) = &self.channel {
            o.push(("channel_model".to_string(), v.clone()));
        }
        if let Some(v) = &self.csir {
            o.push(("csir_mode".to_string(), v.clone()));
        }
        if let Some(v) = self.frames {
            o.push(("frames_per_point".to_string(), v.to_string()));
        }
        if let Some(v) = self.tau {
            o.push(("tau".to_string(), v.to_string()));
        }
        if self.snr_min.is_some() || self.snr_max.is_some() || self.snr_step.is_some() {
            let min = self.snr_min.ok_or("--snr-min is required when sweeping snr flags")?;
            let max = self.snr_max.unwrap_or(min);
            let step = self.snr_step.unwrap_or(5.0);
            if step <= 0.0 || max < min {
                return Err("need snr_step > 0 and snr_max >= snr_min".to_string());
            }
            let mut grid = Vec::new();
            let mut v = min;
            while v <= max + 1e-9 {
                grid.push(format!("{v}"));
                v += step;
            }
            o.push(("snr_grid".to_string(), grid.join(",")));
        }
        Ok(o)
    }

    fn load(&self) -> Result<FullConfig, String> {
        let overrides = self.overrides()?;
        parse_config(&self.config, &overrides).map_err(|e| e.to_string())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a training dataset and write it to a file.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
        /// Record count (defaults to the configured train_records).
        #[arg(long)]
        records: Option<usize>,
    },
    /// Train the antenna-detection subnet and save its weights.
    TrainAd {
        #[command(flatten)]
        common: Common,
        /// Output weights path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the denoising subnet against frozen stage-one weights.
    TrainSd {
        #[command(flatten)]
        common: Common,
        /// Stage-one weights.
        #[arg(long)]
        weights_ad: PathBuf,
        /// Output weights path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a BER sweep and emit CSV rows.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Comma-separated detector list: ml, mf-llr, dlbmp, imnet.
        #[arg(long, default_value = "ml,mf-llr")]
        detectors: String,
        #[arg(long)]
        weights_ad: Option<PathBuf>,
        #[arg(long)]
        weights_sd: Option<PathBuf>,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record detector compute time in the elapsed_ms column
        /// (makes the CSV non-reproducible across runs).
        #[arg(long)]
        timing: bool,
        /// Zero the receiver noise (consistency checks).
        #[arg(long)]
        noiseless: bool,
    },
    /// Time each detector over a fixed frame count at 20 dB.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated detector list.
        #[arg(long, default_value = "ml,mf-llr,imnet")]
        detectors: String,
        #[arg(long)]
        weights_ad: Option<PathBuf>,
        #[arg(long)]
        weights_sd: Option<PathBuf>,
        /// Optional CSV output for the benched points.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_detectors(list: &str) -> Result<Vec<DetectorKind>, String> {
    list.split(',')
        .map(|s| DetectorKind::parse(s.trim()).map_err(|e| e.to_string()))
        .collect()
}

/// Load trained weights as needed; falls back to freshly initialized
/// subnets for timing-only runs when allowed.
fn load_weights_bundle(
    cfg: &FullConfig,
    detectors: &[DetectorKind],
    weights_ad: &Option<PathBuf>,
    weights_sd: &Option<PathBuf>,
    seed: u64,
    allow_random: bool,
) -> Result<Option<TrainedDetector>, String> {
    let needs_ad = detectors.iter().any(|d| d.needs_weights());
    let needs_sd = detectors.iter().any(|d| *d == DetectorKind::Imnet);
    if !needs_ad {
        return Ok(None);
    }
    let im = &cfg.im;
    let (ad, channel) = match weights_ad {
        Some(path) => load_ad(path).map_err(|e| e.to_string())?,
        None if allow_random => {
            eprintln!("note: no --weights-ad given; timing with freshly initialized weights");
            let mut rng = substream(seed, Purpose::WeightInit, 1, 0);
            let net = Network::init(
                imlink_core::detect::ad_subnet_spec(im.n_rx, im.n_sub, im.n_tx),
                &mut rng,
            )
            .map_err(|e| e.to_string())?;
            (AdNet { net, input_rms: 1.0 }, None)
        }
        None => return Err("detectors need --weights-ad".to_string()),
    };
    let sd = match weights_sd {
        Some(path) => load_sd(path).map_err(|e| e.to_string())?,
        None if needs_sd && allow_random => {
            let mut rng = substream(seed, Purpose::WeightInit, 2, 0);
            let net = Network::init(
                imlink_core::detect::sd_subnet_spec(im.k_active, im.n_sub),
                &mut rng,
            )
            .map_err(|e| e.to_string())?;
            SdNet { net }
        }
        None if needs_sd => return Err("the imnet detector needs --weights-sd".to_string()),
        None => SdNet::identity(im.k_active, im.n_sub),
    };
    Ok(Some(TrainedDetector { ad, sd, channel }))
}

fn run() -> Result<(), String> {
    match Cli::parse().command {
        Command::GenData { common, out, records } => {
            let cfg = common.load()?;
            let mapper = ImMapper::new(cfg.im.clone()).map_err(|e| e.to_string())?;
            let mut train_cfg = cfg.train.clone();
            train_cfg.seed = common.seed;
            if let Some(n) = records {
                train_cfg.train_records = n;
            }
            let ds = generate_dataset(&mapper, &cfg.channel, &train_cfg)
                .map_err(|e| e.to_string())?;
            save_dataset(&ds, &cfg.im, &cfg.channel, &out).map_err(|e| e.to_string())?;
            eprintln!("wrote {} records to {}", ds.records.len(), out.display());
            Ok(())
        }
        Command::TrainAd { common, out } => {
            let cfg = common.load()?;
            let mapper = ImMapper::new(cfg.im.clone()).map_err(|e| e.to_string())?;
            let mut train_cfg = cfg.train.clone();
            train_cfg.seed = common.seed;
            let ds = generate_dataset(&mapper, &cfg.channel, &train_cfg)
                .map_err(|e| e.to_string())?;
            let (ad, losses) = train_ad(&mapper, &ds, &train_cfg).map_err(|e| e.to_string())?;
            let holdout = generate_holdout(&mapper, &cfg.channel, &ds, &train_cfg, 20.0)
                .map_err(|e| e.to_string())?;
            let (pattern_acc, antenna_acc) =
                evaluate_ad_accuracy(&mapper, &holdout, &ad, cfg.tau).map_err(|e| e.to_string())?;
            save_ad(&ad, Some(&ds.channel), &out).map_err(|e| e.to_string())?;
            eprintln!(
                "stage one: {} epochs, loss {:.4} -> {:.4}; holdout @20dB pattern accuracy {:.4}, per-antenna {:.4}",
                losses.len(),
                losses.first().unwrap_or(&f64::NAN),
                losses.last().unwrap_or(&f64::NAN),
                pattern_acc,
                antenna_acc
            );
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::TrainSd { common, weights_ad, out } => {
            let cfg = common.load()?;
            let mapper = ImMapper::new(cfg.im.clone()).map_err(|e| e.to_string())?;
            let mut train_cfg = cfg.train.clone();
            train_cfg.seed = common.seed;
            let ds = generate_dataset(&mapper, &cfg.channel, &train_cfg)
                .map_err(|e| e.to_string())?;
            let (ad, stored_channel) = load_ad(&weights_ad).map_err(|e| e.to_string())?;
            if let Some(stored) = &stored_channel {
                let matches = stored.h_true.len() == ds.channel.h_true.len()
                    && stored.h_true.iter().zip(&ds.channel.h_true).all(|(a, b)| {
                        a.data
                            .iter()
                            .zip(&b.data)
                            .all(|(x, y)| (x - y).norm() < 1e-4 * (1.0 + y.norm()))
                    });
                if !matches {
                    return Err(
                        "stage-one weights were trained on a different channel (config or seed differ)"
                            .to_string(),
                    );
                }
            }
            let (sd, losses) = train_sd(&mapper, &ds, &ad, &train_cfg).map_err(|e| e.to_string())?;
            save_sd(&sd, &out).map_err(|e| e.to_string())?;
            eprintln!(
                "stage two: {} epochs, loss {:.5} -> {:.5}",
                losses.len(),
                losses.first().unwrap_or(&f64::NAN),
                losses.last().unwrap_or(&f64::NAN)
            );
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Eval { common, detectors, weights_ad, weights_sd, out, timing, noiseless } => {
            let cfg = common.load()?;
            let mapper = ImMapper::new(cfg.im.clone()).map_err(|e| e.to_string())?;
            let detectors = parse_detectors(&detectors)?;
            let weights =
                load_weights_bundle(&cfg, &detectors, &weights_ad, &weights_sd, common.seed, false)?;
            let mut spec = cfg.sweep_spec(detectors, common.seed);
            spec.record_timing = timing;
            spec.noiseless = noiseless;
            let rows = run_ber_sweep(&mapper, &cfg.channel, &spec, weights.as_ref())
                .map_err(|e| e.to_string())?;
            for row in rows.iter().filter(|r| r.skipped()) {
                eprintln!(
                    "note: {} at {} dB skipped (search space {} over cap {})",
                    row.detector,
                    row.snr_db,
                    imlink_core::detect::ml_search_space(&mapper),
                    spec.ml_cap
                );
            }
            let csv = rows_to_csv(&rows);
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|e| e.to_string())?;
                    eprintln!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Bench { common, detectors, weights_ad, weights_sd, out } => {
            let cfg = common.load()?;
            let mapper = ImMapper::new(cfg.im.clone()).map_err(|e| e.to_string())?;
            let detectors = parse_detectors(&detectors)?;
            let weights =
                load_weights_bundle(&cfg, &detectors, &weights_ad, &weights_sd, common.seed, true)?;
            let mut spec = cfg.sweep_spec(detectors, common.seed);
            spec.frames_per_point = common.frames.unwrap_or(500);
            let (table, rows) =
                run_bench(&mapper, &spec, weights.as_ref()).map_err(|e| e.to_string())?;
            print!("{}", bench_table_text(&table));
            if let Some(path) = out {
                std::fs::write(&path, rows_to_csv(&rows)).map_err(|e| e.to_string())?;
                eprintln!("wrote {} rows to {}", rows.len(), path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
