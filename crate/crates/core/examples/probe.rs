//! Scratch probe for training throughput and learned-detector quality.

use std::time::Instant;

use imlink_core::channel::{ChannelConfig, CsirMode};
use imlink_core::detect::DetectorKind;
use imlink_core::mapping::{ImConfig, ImMapper};
use imlink_core::sim::{run_ber_sweep, SweepSpec};
use imlink_core::train::{
    evaluate_ad_accuracy, generate_dataset, generate_holdout, train_ad, train_sd,
    training_channel, TrainConfig, TrainedDetector,
};

fn scenario1() -> ImMapper {
    ImMapper::new(ImConfig::new(4, 1, 4, 1, 2, 4, 0.5).unwrap()).unwrap()
}

fn survey(n: u64) {
    let mapper = scenario1();
    let ch_cfg = ChannelConfig::default();
    for seed in 0..n {
        let ch = training_channel(&mapper, &ch_cfg, seed).unwrap();
        let mut amps: Vec<f64> = (0..4).map(|a| {
            let sum: f64 = ch.h_true.iter().map(|h| h.get(0, a).norm_sqr()).sum();
            (sum / ch.h_true.len() as f64).sqrt()
        }).collect();
        amps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "seed {seed}: rms|h| per antenna {:?} min {:.3}",
            amps.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            amps[0]
        );
    }
}

fn train_and_eval(records: usize, epochs_ad: usize, epochs_sd: usize, seed: u64) {
    let mapper = scenario1();
    let ch_cfg = ChannelConfig::default();
    let cfg = TrainConfig {
        epochs_ad,
        epochs_sd,
        train_records: records,
        holdout_records: 2000,
        seed,
        ..TrainConfig::default()
    };

    let ds = generate_dataset(&mapper, &ch_cfg, &cfg).unwrap();
    println!(
        "seed {seed}: |h| = {:?}",
        ds.channel.h_true[0].data.iter().map(|v| (v.norm() * 100.0).round() / 100.0).collect::<Vec<_>>()
    );

    let t1 = Instant::now();
    let (ad, ad_losses) = train_ad(&mapper, &ds, &cfg).unwrap();
    println!(
        "train_ad: {} epochs in {:.1?}, loss {:.4} -> {:.4}",
        epochs_ad, t1.elapsed(), ad_losses.first().unwrap(), ad_losses.last().unwrap()
    );
    let holdout = generate_holdout(&mapper, &ch_cfg, &ds, &cfg, 20.0).unwrap();
    let (pat20, _) = evaluate_ad_accuracy(&mapper, &holdout, &ad, 0.5).unwrap();
    let holdout25 = generate_holdout(&mapper, &ch_cfg, &ds, &cfg, 25.0).unwrap();
    let (pat25, _) = evaluate_ad_accuracy(&mapper, &holdout25, &ad, 0.5).unwrap();
    println!("AD pattern accuracy: {pat20:.4} @20dB, {pat25:.4} @25dB");

    let t2 = Instant::now();
    let (sd, sd_losses) = train_sd(&mapper, &ds, &ad, &cfg).unwrap();
    println!(
        "train_sd: {} epochs in {:.1?}, loss {:.5} -> {:.5}",
        epochs_sd, t2.elapsed(), sd_losses.first().unwrap(), sd_losses.last().unwrap()
    );

    let trained = TrainedDetector { ad, sd, channel: Some(ds.channel.clone()) };
    let mut spec = SweepSpec::new(
        vec![25.0],
        130_000,
        vec![DetectorKind::Imnet, DetectorKind::Dlbmp, DetectorKind::MfLlr],
        seed,
    );
    spec.min_bit_errors = u64::MAX;
    let rows = run_ber_sweep(&mapper, &ch_cfg, &spec, Some(&trained)).unwrap();
    for r in &rows {
        println!("  perfect csir: {} @25dB ber {:.3e}", r.detector, r.ber);
    }

    let imperfect = ChannelConfig { csir: CsirMode::Imperfect, ..ChannelConfig::default() };
    let mut spec2 = SweepSpec::new(
        vec![25.0],
        130_000,
        vec![DetectorKind::Imnet, DetectorKind::MfLlr],
        seed,
    );
    spec2.min_bit_errors = u64::MAX;
    let rows = run_ber_sweep(&mapper, &imperfect, &spec2, Some(&trained)).unwrap();
    for r in &rows {
        println!("  imperfect csir: {} @25dB ber {:.3e}", r.detector, r.ber);
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    match args.get(1).map(String::as_str) {
        Some("survey") => {
            let n = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
            survey(n);
        }
        _ => {
            let records: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
            let epochs_ad: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
            let epochs_sd: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5);
            let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1);
            train_and_eval(records, epochs_ad, epochs_sd, seed);
        }
    }
}
