//! Monte-Carlo BER sweeps and timing benches over the detector suite,
//! with a fixed CSV schema.
//!
//! Every stochastic input of a sweep comes from substreams of one seed,
//! indexed by (SNR point, frame), so detectors at the same point see
//! identical frames and repeated runs are bit-identical. Frames are
//! processed in fixed-size chunks whose internal order never affects the
//! aggregated counts, so results do not depend on worker-thread count.
//!
//! Wall-clock timing is inherently non-reproducible, so the `elapsed_ms`
//! column is written as 0 unless timing capture is explicitly requested;
//! the bench path reports its measurements in a separate table.

use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{
    apply_channel, corrupt_csir, draw_channel, snr_db_to_es, ChannelConfig, ChannelModel,
    ChannelRealization, CsirMode,
};
use crate::detect::{
    dlbmp_detect, imnet_detect, mf_llr_detect, mld_detect, ml_search_space, DetectorKind,
    DEFAULT_ML_CAP, DEFAULT_TAU,
};
use crate::error::{Error, Result};
use crate::mapping::ImMapper;
use crate::rng::{substream, Purpose};
use crate::train::TrainedDetector;

/// Frames per aggregation chunk; the early-stop rule is evaluated only at
/// chunk boundaries so parallel execution stays deterministic.
const SWEEP_CHUNK: u64 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub snr_grid_db: Vec<f64>,
    pub frames_per_point: u64,
    pub detectors: Vec<DetectorKind>,
    pub seed: u64,
    /// Stop a point early once this many bit errors accumulated
    /// (checked at chunk boundaries). `u64::MAX` disables early stopping.
    pub min_bit_errors: u64,
    pub tau: f64,
    pub ml_cap: f64,
    /// Capture detector compute time into `elapsed_ms`. Off by default so
    /// CSV output is byte-identical across runs.
    pub record_timing: bool,
    /// Zero the receiver noise (consistency checks only).
    pub noiseless: bool,
}

impl SweepSpec {
    pub fn new(snr_grid_db: Vec<f64>, frames_per_point: u64, detectors: Vec<DetectorKind>, seed: u64) -> Self {
        Self {
            snr_grid_db,
            frames_per_point,
            detectors,
            seed,
            min_bit_errors: 100,
            tau: DEFAULT_TAU,
            ml_cap: DEFAULT_ML_CAP,
            record_timing: false,
            noiseless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("snr grid must be nonempty".into()));
        }
        if self.frames_per_point == 0 {
            return Err(Error::Config("frames_per_point must be >= 1".into()));
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("detector list must be nonempty".into()));
        }
        Ok(())
    }
}

/// One CSV row. A skipped point (refused exhaustive search) keeps zero
/// counts and a NaN BER.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub detector: String,
    pub channel_model: String,
    pub csir_mode: String,
    pub snr_db: f64,
    pub frames: u64,
    pub total_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub elapsed_ms: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn skipped(&self) -> bool {
        self.frames == 0
    }
}

pub const CSV_HEADER: &str =
    "detector,channel_model,csir_mode,snr_db,frames,total_bits,bit_errors,ber,elapsed_ms,seed";

pub fn model_name(model: ChannelModel) -> &'static str {
    match model {
        ChannelModel::Rayleigh => "rayleigh",
        ChannelModel::Correlated => "correlated",
    }
}

pub fn csir_name(mode: CsirMode) -> &'static str {
    match mode {
        CsirMode::Perfect => "perfect",
        CsirMode::Imperfect => "imperfect",
    }
}

/// Serialize rows under the fixed header.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.detector,
            r.channel_model,
            r.csir_mode,
            r.snr_db,
            r.frames,
            r.total_bits,
            r.bit_errors,
            r.ber,
            r.elapsed_ms,
            r.seed
        ));
    }
    out
}

/// Parse rows written by [`rows_to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!("unexpected CSV header {other:?}")));
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(Error::Config(format!("bad CSV row `{line}`")));
            }
            let parse_f64 = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Config(format!("bad number `{s}`")))
            };
            let parse_u64 = |s: &str| {
                s.parse::<u64>().map_err(|_| Error::Config(format!("bad count `{s}`")))
            };
            Ok(ResultRow {
                detector: f[0].to_string(),
                channel_model: f[1].to_string(),
                csir_mode: f[2].to_string(),
                snr_db: parse_f64(f[3])?,
                frames: parse_u64(f[4])?,
                total_bits: parse_u64(f[5])?,
                bit_errors: parse_u64(f[6])?,
                ber: parse_f64(f[7])?,
                elapsed_ms: parse_f64(f[8])?,
                seed: parse_u64(f[9])?,
            })
        })
        .collect()
}

struct FrameResult {
    bits: u64,
    errors: u64,
    detector_nanos: u64,
}

/// Simulate one frame and run one detector over it.
fn run_frame(
    mapper: &ImMapper,
    ch_cfg: &ChannelConfig,
    static_channel: Option<&ChannelRealization>,
    detector: DetectorKind,
    weights: Option<&TrainedDetector>,
    spec: &SweepSpec,
    point: u64,
    frame_idx: u64,
    snr_db: f64,
) -> Result<FrameResult> {
    let im = mapper.config();
    let mut bits_rng = substream(spec.seed, Purpose::Bits, point, frame_idx);
    let bits = mapper.random_bits(&mut bits_rng);
    let frame = mapper.map_bits_to_frame(&bits);
    let x = mapper.frame_to_signal_matrix(&frame);

    let mut realization = match static_channel {
        Some(ch) => ch.clone(),
        None => {
            let mut ch_rng = substream(spec.seed, Purpose::ChannelDraw, point, frame_idx);
            draw_channel(im, ch_cfg, &mut ch_rng)?
        }
    };
    let es = snr_db_to_es(snr_db);
    let mut csir_rng = substream(spec.seed, Purpose::CsirError, point, frame_idx);
    corrupt_csir(&mut realization, im, ch_cfg, es, &mut csir_rng);

    let y = if spec.noiseless {
        crate::channel::apply_channel_noiseless(&x, &realization, snr_db)?
    } else {
        let mut noise_rng = substream(spec.seed, Purpose::Noise, point, frame_idx);
        apply_channel(&x, &realization, snr_db, &mut noise_rng)?
    };

    let start = Instant::now();
    let out = match detector {
        DetectorKind::Ml => mld_detect(&y, &realization.h_rx, mapper, spec.ml_cap)?,
        DetectorKind::MfLlr => mf_llr_detect(&y, &realization.h_rx, mapper, realization.noise_var)?,
        DetectorKind::Dlbmp => {
            let w = weights.expect("checked before the sweep");
            dlbmp_detect(&y, &realization.h_rx, &w.ad, spec.tau, mapper)?
        }
        DetectorKind::Imnet => {
            let w = weights.expect("checked before the sweep");
            imnet_detect(&y, &realization.h_rx, &w.ad, &w.sd, spec.tau, mapper)?
        }
    };
    let detector_nanos = start.elapsed().as_nanos() as u64;

    let errors = bits.iter().zip(&out.frame.bits).filter(|(a, b)| a != b).count() as u64;
    Ok(FrameResult { bits: bits.len() as u64, errors, detector_nanos })
}

/// Monte-Carlo BER sweep: one row per (detector, SNR) point.
///
/// When trained weights carry a quasi-static channel, every detector in
/// the sweep runs over that realization (noise and estimate errors stay
/// fresh per frame); otherwise each frame fades independently.
pub fn run_ber_sweep(
    mapper: &ImMapper,
    ch_cfg: &ChannelConfig,
    spec: &SweepSpec,
    weights: Option<&TrainedDetector>,
) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    ch_cfg.validate()?;
    for d in &spec.detectors {
        if d.needs_weights() && weights.is_none() {
            return Err(Error::Config(format!(
                "detector `{}` needs trained weights",
                d.as_str()
            )));
        }
    }
    let static_channel = weights.and_then(|w| w.channel.as_ref());
    let mut rows = Vec::new();
    for detector in &spec.detectors {
        for (point, &snr_db) in spec.snr_grid_db.iter().enumerate() {
            let row = run_point(
                mapper,
                ch_cfg,
                static_channel,
                *detector,
                weights,
                spec,
                point as u64,
                snr_db,
            )?;
            rows.push(row);
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn run_point(
    mapper: &ImMapper,
    ch_cfg: &ChannelConfig,
    static_channel: Option<&ChannelRealization>,
    detector: DetectorKind,
    weights: Option<&TrainedDetector>,
    spec: &SweepSpec,
    point: u64,
    snr_db: f64,
) -> Result<ResultRow> {
    let mut row = ResultRow {
        detector: detector.as_str().to_string(),
        channel_model: model_name(ch_cfg.model).to_string(),
        csir_mode: csir_name(ch_cfg.csir).to_string(),
        snr_db,
        frames: 0,
        total_bits: 0,
        bit_errors: 0,
        ber: f64::NAN,
        elapsed_ms: 0.0,
        seed: spec.seed,
    };
    if detector == DetectorKind::Ml && ml_search_space(mapper) > spec.ml_cap {
        // refused: emit the skipped row so the sweep completes
        return Ok(row);
    }
    let mut frames = 0u64;
    let mut bits = 0u64;
    let mut errors = 0u64;
    let mut nanos = 0u64;
    while frames < spec.frames_per_point {
        let chunk = SWEEP_CHUNK.min(spec.frames_per_point - frames);
        let results: Vec<Result<FrameResult>> = (frames..frames + chunk)
            .into_par_iter()
            .map(|idx| {
                run_frame(
                    mapper,
                    ch_cfg,
                    static_channel,
                    detector,
                    weights,
                    spec,
                    point,
                    idx,
                    snr_db,
                )
            })
            .collect();
        for r in results {
            let r = r?;
            bits += r.bits;
            errors += r.errors;
            nanos += r.detector_nanos;
        }
        frames += chunk;
        if errors >= spec.min_bit_errors {
            break;
        }
    }
    row.frames = frames;
    row.total_bits = bits;
    row.bit_errors = errors;
    row.ber = if bits > 0 { errors as f64 / bits as f64 } else { f64::NAN };
    if spec.record_timing {
        row.elapsed_ms = nanos as f64 / 1e6;
    }
    Ok(row)
}

/// One detector's timing summary over a bench run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub detector: String,
    pub frames: u64,
    pub elapsed_s: f64,
    pub per_frame_us: f64,
    /// elapsed / elapsed(imnet), when the learned detector was benched.
    pub ratio_vs_imnet: Option<f64>,
}

/// Wall-clock per-detector totals over `frames` frames at 20 dB, Rayleigh
/// fading, perfect CSIR. One warm-up frame per detector is excluded.
/// Returns the timing table plus the BER rows of the same run.
pub fn run_bench(
    mapper: &ImMapper,
    spec: &SweepSpec,
    weights: Option<&TrainedDetector>,
) -> Result<(Vec<BenchRow>, Vec<ResultRow>)> {
    let ch_cfg = ChannelConfig {
        model: ChannelModel::Rayleigh,
        csir: CsirMode::Perfect,
        ..ChannelConfig::default()
    };
    let bench_spec = SweepSpec {
        snr_grid_db: vec![20.0],
        min_bit_errors: u64::MAX,
        record_timing: false,
        ..spec.clone()
    };
    for d in &bench_spec.detectors {
        if d.needs_weights() && weights.is_none() {
            return Err(Error::Config(format!(
                "detector `{}` needs trained weights",
                d.as_str()
            )));
        }
    }
    let static_channel = weights.and_then(|w| w.channel.as_ref());

    let mut timings: Vec<(DetectorKind, f64)> = Vec::new();
    let mut rows = Vec::new();
    for detector in &bench_spec.detectors {
        // warm-up pass, excluded from the total
        run_frame(mapper, &ch_cfg, static_channel, *detector, weights, &bench_spec, 0, 0, 20.0)?;
        let mut bits = 0u64;
        let mut errors = 0u64;
        let mut nanos = 0u64;
        for idx in 0..bench_spec.frames_per_point {
            let r = run_frame(
                mapper,
                &ch_cfg,
                static_channel,
                *detector,
                weights,
                &bench_spec,
                0,
                idx,
                20.0,
            )?;
            bits += r.bits;
            errors += r.errors;
            nanos += r.detector_nanos;
        }
        timings.push((*detector, nanos as f64 / 1e9));
        rows.push(ResultRow {
            detector: detector.as_str().to_string(),
            channel_model: model_name(ch_cfg.model).to_string(),
            csir_mode: csir_name(ch_cfg.csir).to_string(),
            snr_db: 20.0,
            frames: bench_spec.frames_per_point,
            total_bits: bits,
            bit_errors: errors,
            ber: errors as f64 / bits as f64,
            elapsed_ms: 0.0,
            seed: bench_spec.seed,
        });
    }
    let imnet_time = timings
        .iter()
        .find(|(d, _)| *d == DetectorKind::Imnet)
        .map(|(_, t)| *t);
    let table = timings
        .into_iter()
        .map(|(d, t)| BenchRow {
            detector: d.as_str().to_string(),
            frames: bench_spec.frames_per_point,
            elapsed_s: t,
            per_frame_us: t * 1e6 / bench_spec.frames_per_point as f64,
            ratio_vs_imnet: imnet_time.map(|it| t / it),
        })
        .collect();
    Ok((table, rows))
}

/// Render the bench table the way the CLI prints it.
pub fn bench_table_text(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:>8} {:>12} {:>14} {:>16}\n",
        "detector", "frames", "elapsed_s", "per_frame_us", "ratio_vs_imnet"
    ));
    for r in rows {
        let ratio = r
            .ratio_vs_imnet
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<10} {:>8} {:>12.3} {:>14.1} {:>16}\n",
            r.detector, r.frames, r.elapsed_s, r.per_frame_us, ratio
        ));
    }
    out
}
