//! Dataset generation by simulation and the two-stage training procedure:
//! first the antenna-detection subnet on (received matrix, activity label)
//! pairs, then — with those weights frozen — the denoising subnet on
//! (least-squares estimate, clean signal) pairs.
//!
//! Training uses one quasi-static channel realization per run: the
//! realization is drawn once from the seed, shared by every record, and
//! saved with the weights so evaluation can replay it. Receiver noise,
//! bits, SNR draws and (optionally) channel-estimate errors stay fresh
//! per record.

use rayon::prelude::*;

use crate::channel::{
    apply_channel, corrupt_csir, draw_channel, snr_db_to_es, ChannelConfig, ChannelRealization,
    CsirMode, ReceivedMatrix,
};
use crate::detect::{
    ad_subnet_spec, dlbmp_with_probs, legalize_pattern, sd_subnet_spec, threshold_pattern, AdNet,
    SdNet, DEFAULT_TAU,
};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::mapping::{ImMapper, SignalMatrix};
use crate::nn::{
    adam_step, bce_loss, mse_loss, AdamConfig, AdamState, Gradients, Network, Tensor,
};
use crate::rng::{substream, Purpose};

/// Items processed per parallel task inside one mini-batch. Fixed so that
/// gradient reduction order (and thus the result) does not depend on the
/// number of worker threads.
const GRAD_CHUNK: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs_ad: usize,
    pub epochs_sd: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub train_records: usize,
    pub holdout_records: usize,
    /// SNR grid sampled uniformly during dataset generation.
    pub snr_grid_db: Vec<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_ad: 20,
            epochs_sd: 30,
            batch_size: 50,
            learning_rate: 0.001,
            train_records: 50_000,
            holdout_records: 5_000,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("training snr grid must be nonempty".into()));
        }
        if self.train_records == 0 {
            return Err(Error::Config("train_records must be >= 1".into()));
        }
        Ok(())
    }
}

/// One simulated frame: transmitted matrix, received matrix, activity
/// label, the SNR it was drawn at, and the receiver-side channel.
#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub x: SignalMatrix,
    pub y: ReceivedMatrix,
    /// 0/1 per transmit antenna.
    pub antenna_label: Vec<f64>,
    pub snr_db: f64,
    /// Receiver-side channel; `None` means the shared true channel.
    pub h_rx: Option<Vec<CMat>>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub channel: ChannelRealization,
}

impl Dataset {
    pub fn record_h_rx<'a>(&'a self, record: &'a DatasetRecord) -> &'a [CMat] {
        record.h_rx.as_deref().unwrap_or(&self.channel.h_true)
    }
}

/// The quasi-static channel realization a training run works against.
pub fn training_channel(
    mapper: &ImMapper,
    ch_cfg: &ChannelConfig,
    seed: u64,
) -> Result<ChannelRealization> {
    let mut rng = substream(seed, Purpose::StaticChannel, 0, 0);
    draw_channel(mapper.config(), ch_cfg, &mut rng)
}

/// How record SNRs are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SnrPolicy {
    Grid(Vec<f64>),
    Fixed(f64),
}

/// Simulate `count` records over the shared channel. Record indices are
/// offset so train/holdout splits use disjoint substreams.
pub fn generate_records(
    mapper: &ImMapper,
    ch_cfg: &ChannelConfig,
    channel: &ChannelRealization,
    policy: &SnrPolicy,
    count: usize,
    seed: u64,
    index_offset: u64,
) -> Result<Vec<DatasetRecord>> {
    (0..count as u64)
        .map(|i| {
            let idx = index_offset + i;
            let mut bits_rng = substream(seed, Purpose::Bits, idx, 0);
            let bits = mapper.random_bits(&mut bits_rng);
            let frame = mapper.map_bits_to_frame(&bits);
            let x = mapper.frame_to_signal_matrix(&frame);
            let snr_db = match policy {
                SnrPolicy::Fixed(v) => *v,
                SnrPolicy::Grid(grid) => {
                    let mut snr_rng = substream(seed, Purpose::SnrDraw, idx, 0);
                    use rand::Rng;
                    grid[snr_rng.gen_range(0..grid.len())]
                }
            };
            let mut noise_rng = substream(seed, Purpose::Noise, idx, 0);
            let y = apply_channel(&x, channel, snr_db, &mut noise_rng)?;
            let h_rx = match ch_cfg.csir {
                CsirMode::Perfect => None,
                CsirMode::Imperfect => {
                    let mut realization = channel.clone();
                    let mut csir_rng = substream(seed, Purpose::CsirError, idx, 0);
                    corrupt_csir(
                        &mut realization,
                        mapper.config(),
                        ch_cfg,
                        snr_db_to_es(snr_db),
                        &mut csir_rng,
                    );
                    Some(realization.h_rx)
                }
            };
            let mut antenna_label = vec![0.0; mapper.config().n_tx];
            for &a in &frame.antenna_set {
                antenna_label[a] = 1.0;
            }
            Ok(DatasetRecord { x, y, antenna_label, snr_db, h_rx })
        })
        .collect()
}

/// Training dataset: quasi-static channel plus `train_records` records.
pub fn generate_dataset(
    mapper: &ImMapper,
    ch_cfg: &ChannelConfig,
    cfg: &TrainConfig,
) -> Result<Dataset> {
    cfg.validate()?;
    let channel = training_channel(mapper, ch_cfg, cfg.seed)?;
    let records = generate_records(
        mapper,
        ch_cfg,
        &channel,
        &SnrPolicy::Grid(cfg.snr_grid_db.clone()),
        cfg.train_records,
        cfg.seed,
        0,
    )?;
    Ok(Dataset { records, channel })
}

/// Holdout records at a fixed SNR, disjoint from the training indices.
pub fn generate_holdout(
    mapper: &ImMapper,
    ch_cfg: &ChannelConfig,
    dataset: &Dataset,
    cfg: &TrainConfig,
    snr_db: f64,
) -> Result<Vec<DatasetRecord>> {
    generate_records(
        mapper,
        ch_cfg,
        &dataset.channel,
        &SnrPolicy::Fixed(snr_db),
        cfg.holdout_records,
        cfg.seed,
        cfg.train_records as u64,
    )
}

fn fisher_yates(n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Root-mean-square of the packed (real/imaginary) input values.
fn input_rms(records: &[DatasetRecord]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in records {
        for v in &r.y.entries.data {
            sum += v.norm_sqr();
            n += 2;
        }
    }
    (sum / n as f64).sqrt().max(1e-12)
}

struct BatchItem {
    input: Tensor,
    target: Tensor,
}

#[derive(Clone, Copy)]
enum BatchLoss {
    Bce,
    Mse,
}

/// Forward/backward over one mini-batch in deterministic fixed-size
/// chunks; returns the mean loss and mean-scaled gradients.
fn batch_step(net: &Network, items: &[&BatchItem], loss: BatchLoss) -> (f64, Gradients) {
    let chunks: Vec<&[&BatchItem]> = items.chunks(GRAD_CHUNK).collect();
    let partials: Vec<(f64, Gradients)> = chunks
        .par_iter()
        .map(|chunk| {
            let b = chunk.len();
            let shape = chunk[0].input.shape;
            let mut input = Tensor::zeros([b, shape[1], shape[2], shape[3]]);
            let tshape = chunk[0].target.shape;
            let mut target = Tensor::zeros([b, tshape[1], tshape[2], tshape[3]]);
            let per_in = input.numel() / b;
            let per_t = target.numel() / b;
            for (i, item) in chunk.iter().enumerate() {
                input.data[i * per_in..(i + 1) * per_in].copy_from_slice(&item.input.data);
                target.data[i * per_t..(i + 1) * per_t].copy_from_slice(&item.target.data);
            }
            let (pred, cache) = net.forward(&input);
            let (value, grad) = match loss {
                BatchLoss::Bce => bce_loss(&pred, &target),
                BatchLoss::Mse => mse_loss(&pred, &target),
            };
            let (grads, _) = net.backward(&cache, &grad);
            (value, grads)
        })
        .collect();

    let total = items.len() as f64;
    if partials.len() == 1 {
        let (value, grads) = partials.into_iter().next().expect("one chunk");
        return (value, grads);
    }
    let mut loss_acc = 0.0;
    let mut grads = Gradients::zeros_like(net);
    for (chunk, (value, mut g)) in chunks.iter().zip(partials) {
        let weight = chunk.len() as f64 / total;
        loss_acc += weight * value;
        g.scale(weight);
        grads.accumulate(&g);
    }
    (loss_acc, grads)
}

fn run_training(
    mut net: Network,
    items: Vec<BatchItem>,
    loss: BatchLoss,
    epochs: usize,
    cfg: &TrainConfig,
    shuffle_salt: u64,
) -> Result<(Network, Vec<f64>)> {
    let mut adam = AdamState::new(
        net.param_count(),
        AdamConfig { lr: cfg.learning_rate, ..AdamConfig::default() },
    );
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut step = 0usize;
    for epoch in 0..epochs {
        let mut shuffle_rng = substream(cfg.seed, Purpose::Shuffle, shuffle_salt, epoch as u64);
        let order = fisher_yates(items.len(), &mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&BatchItem> = batch_idx.iter().map(|&i| &items[i]).collect();
            let (value, grads) = batch_step(&net, &batch, loss);
            step += 1;
            if !value.is_finite() {
                return Err(Error::Divergence { step, loss: value });
            }
            adam_step(&mut net, &grads, &mut adam);
            epoch_loss += value;
            batches += 1;
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok((net, epoch_losses))
}

/// Stage one: train the antenna-detection subnet with binary cross-entropy.
/// Returns the trained subnet and per-epoch training losses.
pub fn train_ad(
    mapper: &ImMapper,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(AdNet, Vec<f64>)> {
    cfg.validate()?;
    if dataset.records.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let im = mapper.config();
    let rms = input_rms(&dataset.records);
    let spec = ad_subnet_spec(im.n_rx, im.n_sub, im.n_tx);
    let mut init_rng = substream(cfg.seed, Purpose::WeightInit, 1, 0);
    let net = Network::init(spec, &mut init_rng)?;

    let items: Vec<BatchItem> = dataset
        .records
        .iter()
        .map(|r| BatchItem {
            input: crate::detect::pack_complex(&r.y.entries, rms),
            target: Tensor::from_vec([1, im.n_tx, 1, 1], r.antenna_label.clone()),
        })
        .collect();
    let (net, losses) = run_training(net, items, BatchLoss::Bce, cfg.epochs_ad, cfg, 1)?;
    Ok((AdNet { net, input_rms: rms }, losses))
}

/// Clean per-link target rows: the transmitted values on the truly active
/// antennas (data symbols and idle markers), at constellation scale.
pub fn clean_target_rows(record: &DatasetRecord, k_active: usize) -> CMat {
    let n_sub = record.x.entries.cols;
    let active: Vec<usize> = record
        .antenna_label
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v > 0.5).then_some(i))
        .collect();
    debug_assert_eq!(active.len(), k_active);
    CMat::from_fn(k_active, n_sub, |k, i| record.x.entries.get(active[k], i))
}

/// Stage two: freeze the antenna subnet, build least-squares estimates for
/// every record, and train the denoising subnet with mean squared error.
pub fn train_sd(
    mapper: &ImMapper,
    dataset: &Dataset,
    ad: &AdNet,
    cfg: &TrainConfig,
) -> Result<(SdNet, Vec<f64>)> {
    cfg.validate()?;
    let im = mapper.config();
    let items: Vec<BatchItem> = dataset
        .records
        .par_iter()
        .map(|r| {
            let probs = crate::detect::ad_infer(&r.y.entries, ad)?;
            let h_rx = dataset.record_h_rx(r);
            let (_, x_ls, _) = dlbmp_with_probs(&probs, &r.y, h_rx, mapper, DEFAULT_TAU)?;
            let target = clean_target_rows(r, im.k_active);
            Ok(BatchItem {
                input: crate::detect::pack_complex(&x_ls, 1.0),
                target: crate::detect::pack_complex(&target, 1.0),
            })
        })
        .collect::<Result<_>>()?;

    let spec = sd_subnet_spec(im.k_active, im.n_sub);
    let mut init_rng = substream(cfg.seed, Purpose::WeightInit, 2, 0);
    let net = Network::init(spec, &mut init_rng)?;
    let (net, losses) = run_training(net, items, BatchLoss::Mse, cfg.epochs_sd, cfg, 2)?;
    Ok((SdNet { net }, losses))
}

/// Fraction of records whose legalized activity pattern is exactly the
/// true one, plus the per-antenna thresholded accuracy.
pub fn evaluate_ad_accuracy(
    mapper: &ImMapper,
    records: &[DatasetRecord],
    ad: &AdNet,
    tau: f64,
) -> Result<(f64, f64)> {
    let mut pattern_hits = 0usize;
    let mut antenna_hits = 0usize;
    let mut antenna_total = 0usize;
    for r in records {
        let probs = crate::detect::ad_infer(&r.y.entries, ad)?;
        let candidate = threshold_pattern(&probs, tau);
        let pattern = legalize_pattern(&probs, &candidate, mapper.antenna_table().patterns());
        let truth: Vec<usize> = r
            .antenna_label
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v > 0.5).then_some(i))
            .collect();
        if pattern == truth {
            pattern_hits += 1;
        }
        for (i, &label) in r.antenna_label.iter().enumerate() {
            let predicted = probs[i] > tau;
            if predicted == (label > 0.5) {
                antenna_hits += 1;
            }
            antenna_total += 1;
        }
    }
    Ok((
        pattern_hits as f64 / records.len() as f64,
        antenna_hits as f64 / antenna_total as f64,
    ))
}

pub const DATASET_MAGIC: &[u8; 4] = b"IMDS";
pub const DATASET_VERSION: u16 = 1;

fn push_cmat_f32(out: &mut Vec<u8>, m: &CMat) {
    for v in &m.data {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
    }
    for v in &m.data {
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
}

struct F32Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> F32Reader<'a> {
    fn f32(&mut self) -> Result<f64> {
        if self.pos + 4 > self.bytes.len() {
            return Err(Error::DatasetFormat("payload truncated".into()));
        }
        let v = f32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v as f64)
    }

    fn byte(&mut self) -> Result<u8> {
        if self.pos >= self.bytes.len() {
            return Err(Error::DatasetFormat("payload truncated".into()));
        }
        let v = self.bytes[self.pos];
        self.pos += 1;
        Ok(v)
    }

    fn cmat(&mut self, rows: usize, cols: usize) -> Result<CMat> {
        let n = rows * cols;
        let mut re = Vec::with_capacity(n);
        for _ in 0..n {
            re.push(self.f32()?);
        }
        let mut m = CMat::zeros(rows, cols);
        for (i, v) in m.data.iter_mut().enumerate() {
            *v = num_complex::Complex64::new(re[i], 0.0);
        }
        for v in m.data.iter_mut() {
            v.im = self.f32()?;
        }
        Ok(m)
    }
}

/// Export a dataset: header, the shared channel, then per record the
/// transmitted and received matrices (32-bit floats, real then imaginary),
/// the SNR, the activity label bytes, and — for imperfect-CSIR data —
/// the record's channel estimate.
pub fn save_dataset(
    dataset: &Dataset,
    im: &crate::mapping::ImConfig,
    ch_cfg: &ChannelConfig,
    path: &std::path::Path,
) -> Result<()> {
    let per_record_h = dataset.records.iter().any(|r| r.h_rx.is_some());
    let mut header = String::new();
    header.push_str(&format!(
        "im {} {} {} {} {} {} {}\n",
        im.n_tx, im.n_rx, im.n_sub, im.k_active, im.f_active, im.mod_order, im.special_amp_ratio
    ));
    header.push_str(&format!(
        "channel {} {} {} {} {}\n",
        crate::sim::model_name(ch_cfg.model),
        ch_cfg.rho,
        crate::sim::csir_name(ch_cfg.csir),
        ch_cfg.n_pilot.map(|v| v.to_string()).unwrap_or_else(|| "default".into()),
        match ch_cfg.pilot_energy {
            crate::channel::PilotEnergyMode::DataEnergy => "es",
            crate::channel::PilotEnergyMode::Unit => "unit",
        }
    ));
    header.push_str(&format!("records {}\n", dataset.records.len()));
    header.push_str(&format!("per_record_h {}\n", u8::from(per_record_h)));

    let mut bytes = Vec::new();
    bytes.extend_from_slice(DATASET_MAGIC);
    bytes.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(header.as_bytes());
    for hi in &dataset.channel.h_true {
        push_cmat_f32(&mut bytes, hi);
    }
    for r in &dataset.records {
        push_cmat_f32(&mut bytes, &r.x.entries);
        push_cmat_f32(&mut bytes, &r.y.entries);
        bytes.extend_from_slice(&(r.snr_db as f32).to_le_bytes());
        for &l in &r.antenna_label {
            bytes.push(u8::from(l > 0.5));
        }
        if per_record_h {
            let h_rx = r.h_rx.as_deref().unwrap_or(&dataset.channel.h_true);
            for hi in h_rx {
                push_cmat_f32(&mut bytes, hi);
            }
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Read a dataset file back (values at 32-bit precision).
pub fn load_dataset(
    path: &std::path::Path,
) -> Result<(crate::mapping::ImConfig, ChannelConfig, Dataset)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 10 {
        return Err(Error::DatasetFormat("file truncated before header".into()));
    }
    if &bytes[0..4] != DATASET_MAGIC {
        return Err(Error::DatasetFormat("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != DATASET_VERSION {
        return Err(Error::DatasetFormat(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    if bytes.len() < 10 + header_len {
        return Err(Error::DatasetFormat("file truncated inside header".into()));
    }
    let header = std::str::from_utf8(&bytes[10..10 + header_len])
        .map_err(|_| Error::DatasetFormat("header is not UTF-8".into()))?;
    let mut im: Option<crate::mapping::ImConfig> = None;
    let mut ch_cfg = ChannelConfig::default();
    let mut count = 0usize;
    let mut per_record_h = false;
    for line in header.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["im", n_tx, n_rx, n_sub, k, f, m, alpha] => {
                let parse = |s: &str| {
                    s.parse::<usize>().map_err(|_| Error::DatasetFormat(format!("bad im line `{line}`")))
                };
                im = Some(crate::mapping::ImConfig::new(
                    parse(n_tx)?,
                    parse(n_rx)?,
                    parse(n_sub)?,
                    parse(k)?,
                    parse(f)?,
                    parse(m)?,
                    alpha
                        .parse()
                        .map_err(|_| Error::DatasetFormat(format!("bad im line `{line}`")))?,
                )?);
            }
            ["channel", model, rho, csir, n_pilot, pilot_mode] => {
                ch_cfg.model = match *model {
                    "rayleigh" => crate::channel::ChannelModel::Rayleigh,
                    "correlated" => crate::channel::ChannelModel::Correlated,
                    other => {
                        return Err(Error::DatasetFormat(format!("unknown channel model `{other}`")))
                    }
                };
                ch_cfg.rho = rho
                    .parse()
                    .map_err(|_| Error::DatasetFormat(format!("bad channel line `{line}`")))?;
                ch_cfg.csir = match *csir {
                    "perfect" => CsirMode::Perfect,
                    "imperfect" => CsirMode::Imperfect,
                    other => {
                        return Err(Error::DatasetFormat(format!("unknown csir mode `{other}`")))
                    }
                };
                ch_cfg.n_pilot = match *n_pilot {
                    "default" => None,
                    v => Some(v.parse().map_err(|_| {
                        Error::DatasetFormat(format!("bad channel line `{line}`"))
                    })?),
                };
                ch_cfg.pilot_energy = match *pilot_mode {
                    "es" => crate::channel::PilotEnergyMode::DataEnergy,
                    "unit" => crate::channel::PilotEnergyMode::Unit,
                    other => {
                        return Err(Error::DatasetFormat(format!("unknown pilot mode `{other}`")))
                    }
                };
            }
            ["records", n] => {
                count = n
                    .parse()
                    .map_err(|_| Error::DatasetFormat(format!("bad records line `{line}`")))?;
            }
            ["per_record_h", v] => {
                per_record_h = *v == "1";
            }
            [] => {}
            _ => return Err(Error::DatasetFormat(format!("unrecognized header line `{line}`"))),
        }
    }
    let im = im.ok_or_else(|| Error::DatasetFormat("missing im line".into()))?;
    let mut reader = F32Reader { bytes: &bytes[10 + header_len..], pos: 0 };
    let h_true: Vec<CMat> = (0..im.n_sub)
        .map(|_| reader.cmat(im.n_rx, im.n_tx))
        .collect::<Result<_>>()?;
    let channel = ChannelRealization { h_rx: h_true.clone(), h_true, noise_var: 1.0 };
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let x = reader.cmat(im.n_tx, im.n_sub)?;
        let y = reader.cmat(im.n_rx, im.n_sub)?;
        let snr_db = reader.f32()?;
        let mut antenna_label = vec![0.0; im.n_tx];
        for l in antenna_label.iter_mut() {
            *l = f64::from(reader.byte()?);
        }
        let h_rx = if per_record_h {
            Some(
                (0..im.n_sub)
                    .map(|_| reader.cmat(im.n_rx, im.n_tx))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        records.push(DatasetRecord {
            x: SignalMatrix { entries: x },
            y: ReceivedMatrix { entries: y, es: snr_db_to_es(snr_db) },
            antenna_label,
            snr_db,
            h_rx,
        });
    }
    if reader.pos != reader.bytes.len() {
        return Err(Error::DatasetFormat("trailing bytes after last record".into()));
    }
    Ok((im, ch_cfg, Dataset { records, channel }))
}

/// A trained receiver: both subnets plus the channel realization the
/// weights were fitted to.
#[derive(Debug, Clone)]
pub struct TrainedDetector {
    pub ad: AdNet,
    pub sd: SdNet,
    /// The quasi-static channel the subnets were trained against.
    pub channel: Option<ChannelRealization>,
}

fn channel_tensors(ch: &ChannelRealization) -> Vec<crate::nn::NamedTensor> {
    let n_sub = ch.h_true.len();
    let n_rx = ch.h_true[0].rows;
    let n_tx = ch.h_true[0].cols;
    let shape = vec![n_sub, n_rx, n_tx];
    let mut re = Vec::with_capacity(n_sub * n_rx * n_tx);
    let mut im = Vec::with_capacity(n_sub * n_rx * n_tx);
    for hi in &ch.h_true {
        for v in &hi.data {
            re.push(v.re);
            im.push(v.im);
        }
    }
    vec![
        crate::nn::NamedTensor { name: "meta.static_h_re".into(), shape: shape.clone(), data: re },
        crate::nn::NamedTensor { name: "meta.static_h_im".into(), shape, data: im },
    ]
}

fn channel_from_tensors(extras: &[crate::nn::NamedTensor]) -> Option<ChannelRealization> {
    let re = extras.iter().find(|t| t.name == "meta.static_h_re")?;
    let im = extras.iter().find(|t| t.name == "meta.static_h_im")?;
    if re.shape.len() != 3 || im.shape != re.shape {
        return None;
    }
    let (n_sub, n_rx, n_tx) = (re.shape[0], re.shape[1], re.shape[2]);
    let per = n_rx * n_tx;
    let h_true: Vec<CMat> = (0..n_sub)
        .map(|i| {
            CMat::from_fn(n_rx, n_tx, |r, c| {
                let k = i * per + r * n_tx + c;
                num_complex::Complex64::new(re.data[k], im.data[k])
            })
        })
        .collect();
    Some(ChannelRealization { h_rx: h_true.clone(), h_true, noise_var: 1.0 })
}

/// Write the antenna subnet with its input scale and training channel.
pub fn save_ad(ad: &AdNet, channel: Option<&ChannelRealization>, path: &std::path::Path) -> Result<()> {
    let mut extras = vec![crate::nn::NamedTensor::scalar("meta.input_rms", ad.input_rms)];
    if let Some(ch) = channel {
        extras.extend(channel_tensors(ch));
    }
    crate::nn::save_weights(&ad.net, &extras, path)
}

/// Read the antenna subnet back, with the training channel if present.
pub fn load_ad(path: &std::path::Path) -> Result<(AdNet, Option<ChannelRealization>)> {
    let (net, extras) = crate::nn::load_weights(path)?;
    let rms = extras
        .iter()
        .find(|t| t.name == "meta.input_rms")
        .and_then(|t| t.data.first().copied())
        .ok_or_else(|| Error::WeightsFormat("missing meta.input_rms tensor".into()))?;
    let channel = channel_from_tensors(&extras);
    Ok((AdNet { net, input_rms: rms }, channel))
}

/// Write the denoising subnet.
pub fn save_sd(sd: &SdNet, path: &std::path::Path) -> Result<()> {
    crate::nn::save_weights(&sd.net, &[], path)
}

/// Read the denoising subnet back.
pub fn load_sd(path: &std::path::Path) -> Result<SdNet> {
    let (net, _) = crate::nn::load_weights(path)?;
    Ok(SdNet { net })
}
