//! Receivers: exhaustive maximum-likelihood search, the matched-filter +
//! log-likelihood-ratio baseline, least-squares recovery on a detected
//! antenna pattern, the learned antenna-detection stage, and the composed
//! two-stage learned detector.

use num_complex::Complex64;

use crate::channel::ReceivedMatrix;
use crate::error::{Error, Result};
use crate::linalg::{solve, CMat};
use crate::mapping::{combination_to_rank, index_to_bits, rank_to_combination, ImFrame, ImMapper};
use crate::nn::network::{Activation, LayerSpec};
use crate::nn::{Network, NetworkSpec, Tensor};

/// Diagonal loading used when a least-squares normal matrix is singular.
pub const LS_REGULARIZATION: f64 = 1e-9;

/// Variance floor keeping log-likelihood ratios finite in noiseless runs.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// Default activation-probability threshold for the learned stage.
pub const DEFAULT_TAU: f64 = 0.5;

/// Default cap on the exhaustive-search space.
pub const DEFAULT_ML_CAP: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Ml,
    MfLlr,
    Dlbmp,
    Imnet,
}

impl DetectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::MfLlr => "mf-llr",
            DetectorKind::Dlbmp => "dlbmp",
            DetectorKind::Imnet => "imnet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(DetectorKind::Ml),
            "mf-llr" => Ok(DetectorKind::MfLlr),
            "dlbmp" => Ok(DetectorKind::Dlbmp),
            "imnet" => Ok(DetectorKind::Imnet),
            other => Err(Error::Config(format!("unknown detector `{other}`"))),
        }
    }

    pub fn needs_weights(&self) -> bool {
        matches!(self, DetectorKind::Dlbmp | DetectorKind::Imnet)
    }
}

/// What a detector hands back: a legal frame (bits filled by inverse
/// mapping) plus whatever intermediates the detector produced.
#[derive(Debug, Clone)]
pub struct DetectorOutput {
    pub frame: ImFrame,
    /// Per-antenna activation probabilities, when a learned stage ran.
    pub raw_probs: Option<Vec<f64>>,
    /// K x N_f constellation-scale signal estimate, when one was formed.
    pub x_hat: Option<CMat>,
    /// Sum of squared residuals of the decided frame (exhaustive search).
    pub metric: Option<f64>,
    /// True when a singular normal matrix needed diagonal loading.
    pub ls_regularized: bool,
}

/// `sum_i || y_i - H_i x_i sqrt(Es) ||^2` for a candidate frame.
pub fn frame_metric(y: &ReceivedMatrix, h: &[CMat], mapper: &ImMapper, frame: &ImFrame) -> f64 {
    let amp = y.es.sqrt();
    let n_sub = mapper.config().n_sub;
    let n_rx = mapper.config().n_rx;
    let x = mapper.frame_to_signal_matrix(frame);
    let mut metric = 0.0;
    for i in 0..n_sub {
        let hi = &h[i];
        for r in 0..n_rx {
            let mut acc = y.entries.get(r, i);
            for &a in &frame.antenna_set {
                acc -= hi.get(r, a) * (x.entries.get(a, i) * amp);
            }
            metric += acc.norm_sqr();
        }
    }
    metric
}

/// Codebook size of the exhaustive search: `2^C * (2^d1 * M^F)^K`.
pub fn ml_search_space(mapper: &ImMapper) -> f64 {
    let b = mapper.budget();
    let cfg = mapper.config();
    let per_link = 2f64.powi(b.d1_bits as i32) * (cfg.mod_order as f64).powi(cfg.f_active as i32);
    2f64.powi(b.c_bits as i32) * per_link.powi(cfg.k_active as i32)
}

/// Exhaustive maximum-likelihood detection over the legal codebook.
/// Refuses to run when the search space exceeds `cap`.
pub fn mld_detect(
    y: &ReceivedMatrix,
    h: &[CMat],
    mapper: &ImMapper,
    cap: f64,
) -> Result<DetectorOutput> {
    let size = ml_search_space(mapper);
    if size > cap {
        return Err(Error::SearchSpaceExceeded { size, cap });
    }
    let total_bits = mapper.budget().total_bits;
    let mut best_metric = f64::INFINITY;
    let mut best_frame: Option<ImFrame> = None;
    for code in 0..(1u64 << total_bits) {
        let bits = index_to_bits(code as usize, total_bits);
        let frame = mapper.map_bits_to_frame(&bits);
        let metric = frame_metric(y, h, mapper, &frame);
        if metric < best_metric {
            best_metric = metric;
            best_frame = Some(frame);
        }
    }
    let frame = best_frame.expect("codebook is never empty");
    Ok(DetectorOutput {
        frame,
        raw_probs: None,
        x_hat: None,
        metric: Some(best_metric),
        ls_regularized: false,
    })
}

/// Transmit-candidate values at channel scale: every constellation point,
/// the idle marker, and zero (for energy not explained by this antenna).
fn sliced_candidates(mapper: &ImMapper, amp: f64) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = mapper.constellation().points().iter().map(|s| s * amp).collect();
    c.push(mapper.special_symbol() * amp);
    c.push(Complex64::new(0.0, 0.0));
    c
}

/// Per-antenna activity scores: received energy explained by the antenna
/// after matched filtering and slicing to the nearest transmit candidate.
/// An all-zero column scores 0.
pub fn mf_antenna_scores(y: &ReceivedMatrix, h: &[CMat], mapper: &ImMapper) -> Vec<f64> {
    let cfg = mapper.config();
    let amp = y.es.sqrt();
    let candidates = sliced_candidates(mapper, amp);
    let mut scores = vec![0.0; cfg.n_tx];
    for (n, score) in scores.iter_mut().enumerate() {
        for i in 0..cfg.n_sub {
            let hi = &h[i];
            let mut nh = 0.0;
            let mut hy = Complex64::new(0.0, 0.0);
            let mut yy = 0.0;
            for r in 0..cfg.n_rx {
                let hv = hi.get(r, n);
                nh += hv.norm_sqr();
                hy += hv.conj() * y.entries.get(r, i);
                yy += y.entries.get(r, i).norm_sqr();
            }
            if nh == 0.0 {
                continue;
            }
            let u = hy / nh;
            let best = candidates
                .iter()
                .map(|s| (u - s).norm_sqr())
                .fold(f64::INFINITY, f64::min);
            // ||y - h s||^2 = ||y||^2 - nh |u|^2 + nh |u - s|^2
            let residual = yy - nh * u.norm_sqr() + nh * best;
            *score += yy - residual;
        }
    }
    scores
}

/// Pick the legal antenna pattern with the largest summed score; ties go
/// to the lowest table index.
pub fn mf_antenna_detect(y: &ReceivedMatrix, h: &[CMat], mapper: &ImMapper) -> Vec<usize> {
    let scores = mf_antenna_scores(y, h, mapper);
    best_pattern_by(mapper.antenna_table().patterns(), |pattern| {
        pattern.iter().map(|&n| scores[n]).sum::<f64>()
    })
}

fn best_pattern_by(patterns: &[Vec<usize>], mut value: impl FnMut(&[usize]) -> f64) -> Vec<usize> {
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for (idx, p) in patterns.iter().enumerate() {
        let v = value(p);
        if v > best_v {
            best_v = v;
            best = idx;
        }
    }
    patterns[best].clone()
}

/// Channel-scale least squares on the selected antenna columns:
/// per subcarrier, solve (H^H H) x = H^H y. Returns the K x N_f estimate,
/// the per-(link, subcarrier) noise-scaling diagonal `[(H^H H)^-1]_kk`,
/// and whether regularization was needed.
fn ls_solve_raw(
    y: &ReceivedMatrix,
    h: &[CMat],
    pattern: &[usize],
    n_sub: usize,
) -> Result<(CMat, Vec<Vec<f64>>, bool)> {
    let k = pattern.len();
    let mut x = CMat::zeros(k, n_sub);
    let mut diag = vec![vec![0.0; n_sub]; k];
    let mut regularized = false;
    for i in 0..n_sub {
        let hi = h[i].select_cols(pattern);
        let mut gram = hi.gram();
        let rhs = hi.herm_mul_vec(&y.entries.col(i));
        let solved = match solve(&gram, &rhs) {
            Some(s) => s,
            None => {
                regularized = true;
                for d in 0..k {
                    let v = gram.get(d, d) + Complex64::new(LS_REGULARIZATION, 0.0);
                    gram.set(d, d, v);
                }
                solve(&gram, &rhs).ok_or_else(|| {
                    Error::ShapeMismatch("normal matrix singular even after loading".into())
                })?
            }
        };
        for (row, v) in solved.into_iter().enumerate() {
            x.set(row, i, v);
        }
        // diagonal of the inverse Gram, column by column
        for d in 0..k {
            let mut e = vec![Complex64::new(0.0, 0.0); k];
            e[d] = Complex64::new(1.0, 0.0);
            if let Some(col) = solve(&gram, &e) {
                diag[d][i] = col[d].re.max(0.0);
            }
        }
    }
    Ok((x, diag, regularized))
}

/// Constellation-scale least-squares estimate on a detected pattern.
pub fn ls_estimate(
    y: &ReceivedMatrix,
    h: &[CMat],
    pattern: &[usize],
    mapper: &ImMapper,
) -> Result<(CMat, bool)> {
    let (raw, _, reg) = ls_solve_raw(y, h, pattern, mapper.config().n_sub)?;
    let amp = y.es.sqrt();
    let mut out = raw;
    for v in out.data.iter_mut() {
        *v /= amp;
    }
    Ok((out, reg))
}

/// Per-subcarrier activity log-likelihood ratios for one link, given the
/// raw (channel-scale) estimates and their noise scaling.
fn subcarrier_llrs(
    x_raw: &[Complex64],
    sigma_scale: &[f64],
    es: f64,
    mapper: &ImMapper,
    noise_var: f64,
) -> Vec<f64> {
    let cfg = mapper.config();
    let amp = es.sqrt();
    let m = cfg.mod_order as f64;
    let prior = (cfg.f_active as f64 / (cfg.n_sub - cfg.f_active) as f64).ln();
    let marker = mapper.special_symbol() * amp;
    x_raw
        .iter()
        .zip(sigma_scale)
        .map(|(&xh, &scale)| {
            let var = (noise_var * scale).max(SIGMA_FLOOR);
            // log-sum-exp over the data constellation
            let exps: Vec<f64> = mapper
                .constellation()
                .points()
                .iter()
                .map(|s| -(xh - s * amp).norm_sqr() / var)
                .collect();
            let peak = exps.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = peak + exps.iter().map(|e| (e - peak).exp()).sum::<f64>().ln();
            lse - m.ln() + (xh - marker).norm_sqr() / var + prior
        })
        .collect()
}

/// Sequential baseline: matched-filter antenna detection, least squares,
/// LLR-based subcarrier pattern selection, then symbol slicing.
pub fn mf_llr_detect(
    y: &ReceivedMatrix,
    h: &[CMat],
    mapper: &ImMapper,
    noise_var: f64,
) -> Result<DetectorOutput> {
    let cfg = mapper.config();
    if cfg.f_active >= cfg.n_sub {
        return Err(Error::Config(
            "mf-llr needs F < N_f (the activity prior is undefined otherwise)".into(),
        ));
    }
    let pattern = mf_antenna_detect(y, h, mapper);
    let (x_raw, diag, regularized) = ls_solve_raw(y, h, &pattern, cfg.n_sub)?;
    let amp = y.es.sqrt();

    let max_rank = 1u64 << mapper.budget().d1_bits;
    let mut subcarrier_sets = Vec::with_capacity(cfg.k_active);
    let mut symbols = Vec::with_capacity(cfg.k_active);
    for k in 0..cfg.k_active {
        let llrs = subcarrier_llrs(x_raw.row(k), &diag[k], y.es, mapper, noise_var);
        let mut best_rank = 0u64;
        let mut best_sum = f64::NEG_INFINITY;
        for rank in 0..max_rank {
            let set = rank_to_combination(rank, cfg.n_sub, cfg.f_active)?;
            let sum: f64 = set.iter().map(|&i| llrs[i]).sum();
            if sum > best_sum {
                best_sum = sum;
                best_rank = rank;
            }
        }
        let set = rank_to_combination(best_rank, cfg.n_sub, cfg.f_active)?;
        let link_symbols: Vec<Complex64> = set
            .iter()
            .map(|&i| {
                let bits = mapper.constellation().demodulate(x_raw.get(k, i) / amp);
                mapper.constellation().modulate(&bits)
            })
            .collect();
        subcarrier_sets.push(set);
        symbols.push(link_symbols);
    }

    let mut frame = ImFrame { bits: Vec::new(), antenna_set: pattern, subcarrier_sets, symbols };
    frame.bits = mapper.demap_frame_to_bits(&frame)?;
    let mut x_hat = x_raw;
    for v in x_hat.data.iter_mut() {
        *v /= amp;
    }
    Ok(DetectorOutput {
        frame,
        raw_probs: None,
        x_hat: Some(x_hat),
        metric: None,
        ls_regularized: regularized,
    })
}

/// Topology of the antenna-detection subnet for a configuration.
pub fn ad_subnet_spec(n_rx: usize, n_sub: usize, n_tx: usize) -> NetworkSpec {
    NetworkSpec {
        input: [2, n_rx, n_sub],
        layers: vec![
            LayerSpec::Conv { out_channels: 64, activation: Activation::Relu },
            LayerSpec::MaxPool2,
            LayerSpec::Conv { out_channels: 128, activation: Activation::Relu },
            LayerSpec::MaxPool2,
            LayerSpec::Dense { out_units: 128, activation: Activation::Relu },
            LayerSpec::Dense { out_units: n_tx, activation: Activation::Sigmoid },
        ],
    }
}

/// Topology of the signal-denoising subnet for a configuration.
pub fn sd_subnet_spec(k_active: usize, n_sub: usize) -> NetworkSpec {
    let mut layers = vec![LayerSpec::Conv { out_channels: 64, activation: Activation::Relu }];
    for _ in 0..4 {
        layers.push(LayerSpec::Conv { out_channels: 64, activation: Activation::Relu });
    }
    layers.push(LayerSpec::Conv { out_channels: 2, activation: Activation::Linear });
    layers.push(LayerSpec::ResidualOutput);
    NetworkSpec { input: [2, k_active, n_sub], layers }
}

/// Antenna-detection subnet plus its input scale.
#[derive(Debug, Clone)]
pub struct AdNet {
    pub net: Network,
    /// Root-mean-square of the training inputs; divides every input.
    pub input_rms: f64,
}

/// Signal-denoising subnet.
#[derive(Debug, Clone)]
pub struct SdNet {
    pub net: Network,
}

impl SdNet {
    /// Zero residual weights: the subnet passes its input through.
    pub fn identity(k_active: usize, n_sub: usize) -> Self {
        Self { net: Network::zeros(sd_subnet_spec(k_active, n_sub)).expect("valid topology") }
    }
}

/// Pack a complex matrix as a (1, 2, rows, cols) real/imaginary tensor.
pub fn pack_complex(m: &CMat, scale: f64) -> Tensor {
    let mut t = Tensor::zeros([1, 2, m.rows, m.cols]);
    for r in 0..m.rows {
        for c in 0..m.cols {
            let v = m.get(r, c);
            *t.at_mut(0, 0, r, c) = v.re / scale;
            *t.at_mut(0, 1, r, c) = v.im / scale;
        }
    }
    t
}

/// Inverse of [`pack_complex`] with unit scale.
pub fn unpack_complex(t: &Tensor) -> CMat {
    let rows = t.shape[2];
    let cols = t.shape[3];
    CMat::from_fn(rows, cols, |r, c| Complex64::new(t.at(0, 0, r, c), t.at(0, 1, r, c)))
}

/// Per-antenna activation probabilities for one received matrix.
pub fn ad_infer(y: &CMat, ad: &AdNet) -> Result<Vec<f64>> {
    if ad.net.spec.input != [2, y.rows, y.cols] {
        return Err(Error::ShapeMismatch(format!(
            "subnet expects input {:?}, received matrix is {}x{}",
            ad.net.spec.input, y.rows, y.cols
        )));
    }
    let input = pack_complex(y, ad.input_rms);
    let (out, _) = ad.net.forward(&input);
    Ok(out.data)
}

/// Indices whose probability clears the threshold.
pub fn threshold_pattern(probs: &[f64], tau: f64) -> Vec<usize> {
    probs
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| (p > tau).then_some(i))
        .collect()
}

/// Force a probability-derived pattern into the legal table: keep it when
/// it is already a table entry, otherwise take the table pattern with the
/// largest summed log-probability (ties to the lowest index).
pub fn legalize_pattern(probs: &[f64], candidate: &[usize], patterns: &[Vec<usize>]) -> Vec<usize> {
    if patterns.iter().any(|p| p.as_slice() == candidate) {
        return candidate.to_vec();
    }
    best_pattern_by(patterns, |pattern| {
        pattern.iter().map(|&n| probs[n].max(1e-300).ln()).sum::<f64>()
    })
}

/// First learned stage given externally supplied probabilities: threshold,
/// legalize, then least squares on the selected columns.
pub fn dlbmp_with_probs(
    probs: &[f64],
    y: &ReceivedMatrix,
    h: &[CMat],
    mapper: &ImMapper,
    tau: f64,
) -> Result<(Vec<usize>, CMat, bool)> {
    let thresholded = threshold_pattern(probs, tau);
    let pattern = legalize_pattern(probs, &thresholded, mapper.antenna_table().patterns());
    let (x_ls, reg) = ls_estimate(y, h, &pattern, mapper)?;
    Ok((pattern, x_ls, reg))
}

/// Neural antenna detection followed by least squares.
pub fn dlbmp(
    y: &ReceivedMatrix,
    h: &[CMat],
    ad: &AdNet,
    tau: f64,
    mapper: &ImMapper,
) -> Result<(Vec<usize>, CMat, Vec<f64>, bool)> {
    let probs = ad_infer(&y.entries, ad)?;
    let (pattern, x_ls, reg) = dlbmp_with_probs(&probs, y, h, mapper, tau)?;
    Ok((pattern, x_ls, probs, reg))
}

/// Residual denoising of a constellation-scale estimate.
pub fn sd_infer(x_ls: &CMat, sd: &SdNet) -> Result<CMat> {
    if sd.net.spec.input != [2, x_ls.rows, x_ls.cols] {
        return Err(Error::ShapeMismatch(format!(
            "subnet expects input {:?}, estimate is {}x{}",
            sd.net.spec.input, x_ls.rows, x_ls.cols
        )));
    }
    let input = pack_complex(x_ls, 1.0);
    let (out, _) = sd.net.forward(&input);
    Ok(unpack_complex(&out))
}

/// Amplitude-based subcarrier demapping: per link, the F largest-amplitude
/// cells are the active candidates; illegal candidates fall back to the
/// legal pattern maximizing summed amplitude. Symbols slice to the nearest
/// constellation point.
pub fn legalize_and_demap(
    x_hat: &CMat,
    mapper: &ImMapper,
) -> (Vec<Vec<usize>>, Vec<Vec<Complex64>>) {
    let cfg = mapper.config();
    let max_rank = 1u64 << mapper.budget().d1_bits;
    let mut sets = Vec::with_capacity(cfg.k_active);
    let mut symbols = Vec::with_capacity(cfg.k_active);
    for k in 0..x_hat.rows {
        let amps: Vec<f64> = x_hat.row(k).iter().map(|v| v.norm()).collect();
        let mut order: Vec<usize> = (0..cfg.n_sub).collect();
        order.sort_by(|&a, &b| amps[b].partial_cmp(&amps[a]).unwrap().then(a.cmp(&b)));
        let mut candidate: Vec<usize> = order[..cfg.f_active].to_vec();
        candidate.sort_unstable();
        let legal = match combination_to_rank(&candidate, cfg.n_sub, cfg.f_active) {
            Ok(rank) if rank < max_rank => candidate,
            _ => {
                let mut best = Vec::new();
                let mut best_sum = f64::NEG_INFINITY;
                for rank in 0..max_rank {
                    let set =
                        rank_to_combination(rank, cfg.n_sub, cfg.f_active).expect("legal rank");
                    let sum: f64 = set.iter().map(|&i| amps[i]).sum();
                    if sum > best_sum {
                        best_sum = sum;
                        best = set;
                    }
                }
                best
            }
        };
        let link_symbols: Vec<Complex64> = legal
            .iter()
            .map(|&i| {
                let bits = mapper.constellation().demodulate(x_hat.get(k, i));
                mapper.constellation().modulate(&bits)
            })
            .collect();
        sets.push(legal);
        symbols.push(link_symbols);
    }
    (sets, symbols)
}

/// Stage one alone as a detector: antenna detection, least squares, and
/// amplitude demapping without the denoising subnet.
pub fn dlbmp_detect(
    y: &ReceivedMatrix,
    h: &[CMat],
    ad: &AdNet,
    tau: f64,
    mapper: &ImMapper,
) -> Result<DetectorOutput> {
    let (pattern, x_ls, probs, reg) = dlbmp(y, h, ad, tau, mapper)?;
    let (subcarrier_sets, symbols) = legalize_and_demap(&x_ls, mapper);
    let mut frame = ImFrame { bits: Vec::new(), antenna_set: pattern, subcarrier_sets, symbols };
    frame.bits = mapper.demap_frame_to_bits(&frame)?;
    Ok(DetectorOutput {
        frame,
        raw_probs: Some(probs),
        x_hat: Some(x_ls),
        metric: None,
        ls_regularized: reg,
    })
}

/// The composed learned detector: antenna detection, least squares,
/// residual denoising, amplitude demapping, inverse mapping.
pub fn imnet_detect(
    y: &ReceivedMatrix,
    h: &[CMat],
    ad: &AdNet,
    sd: &SdNet,
    tau: f64,
    mapper: &ImMapper,
) -> Result<DetectorOutput> {
    let (pattern, x_ls, probs, reg) = dlbmp(y, h, ad, tau, mapper)?;
    imnet_refine(pattern, x_ls, Some(probs), reg, sd, mapper)
}

/// Second stage shared by [`imnet_detect`] and genie-probability runs.
pub fn imnet_refine(
    pattern: Vec<usize>,
    x_ls: CMat,
    probs: Option<Vec<f64>>,
    ls_regularized: bool,
    sd: &SdNet,
    mapper: &ImMapper,
) -> Result<DetectorOutput> {
    let x_sd = sd_infer(&x_ls, sd)?;
    let (subcarrier_sets, symbols) = legalize_and_demap(&x_sd, mapper);
    let mut frame = ImFrame { bits: Vec::new(), antenna_set: pattern, subcarrier_sets, symbols };
    frame.bits = mapper.demap_frame_to_bits(&frame)?;
    Ok(DetectorOutput {
        frame,
        raw_probs: probs,
        x_hat: Some(x_sd),
        metric: None,
        ls_regularized,
    })
}

/// Genie activation probabilities for a known frame: 1 on active antennas.
pub fn oracle_probs(frame: &ImFrame, n_tx: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_tx];
    for &a in &frame.antenna_set {
        p[a] = 1.0;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, ChannelRealization};
    use crate::mapping::ImConfig;
    use crate::rng::{substream, Purpose};
    use rand::Rng;

    fn scenario1() -> ImMapper {
        ImMapper::new(ImConfig::new(4, 1, 4, 1, 2, 4, 0.5).unwrap()).unwrap()
    }

    fn draw(seed: u64, idx: u64, mapper: &ImMapper) -> (Vec<bool>, ImFrame, ChannelRealization) {
        let im = mapper.config();
        let ch_cfg = crate::channel::ChannelConfig::default();
        let mut bits_rng = substream(seed, Purpose::Bits, idx, 0);
        let bits = mapper.random_bits(&mut bits_rng);
        let frame = mapper.map_bits_to_frame(&bits);
        let mut ch_rng = substream(seed, Purpose::ChannelDraw, idx, 0);
        let h = crate::channel::draw_channel(im, &ch_cfg, &mut ch_rng).unwrap();
        (bits, frame, h)
    }

    fn noiseless(
        mapper: &ImMapper,
        frame: &ImFrame,
        h: &ChannelRealization,
        snr_db: f64,
    ) -> ReceivedMatrix {
        let x = mapper.frame_to_signal_matrix(frame);
        crate::channel::apply_channel_noiseless(&x, h, snr_db).unwrap()
    }

    #[test]
    fn mld_recovers_noiseless_frames_exactly() {
        let mapper = scenario1();
        for idx in 0..20 {
            let (bits, frame, h) = draw(100, idx, &mapper);
            let y = noiseless(&mapper, &frame, &h, 10.0);
            let out = mld_detect(&y, &h.h_rx, &mapper, DEFAULT_ML_CAP).unwrap();
            assert_eq!(out.frame.bits, bits);
            assert!(out.metric.unwrap() < 1e-18);
        }
    }

    // Independent enumerator: walks antenna patterns, subcarrier patterns
    // and symbol tuples directly rather than through bit strings.
    fn brute_force_ml(y: &ReceivedMatrix, h: &[CMat], mapper: &ImMapper) -> (ImFrame, f64) {
        let cfg = mapper.config();
        let b = mapper.budget();
        let m = cfg.mod_order;
        let points = mapper.constellation().points().to_vec();
        let mut best: Option<(ImFrame, f64)> = None;
        for a_idx in 0..(1usize << b.c_bits) {
            let antenna_set = mapper.antenna_table().pattern(a_idx).to_vec();
            let ranks = 1u64 << b.d1_bits;
            let tuples = (m as u64).pow(cfg.f_active as u32);
            let per_link = ranks * tuples;
            let total = per_link.pow(cfg.k_active as u32);
            for combo in 0..total {
                let mut rem = combo;
                let mut sets = Vec::new();
                let mut syms = Vec::new();
                for _ in 0..cfg.k_active {
                    let link = rem % per_link;
                    rem /= per_link;
                    let rank = link / tuples;
                    let mut tup = link % tuples;
                    let set = rank_to_combination(rank, cfg.n_sub, cfg.f_active).unwrap();
                    let mut s = Vec::new();
                    for _ in 0..cfg.f_active {
                        s.push(points[(tup % m as u64) as usize]);
                        tup /= m as u64;
                    }
                    sets.push(set);
                    syms.push(s);
                }
                let mut frame = ImFrame {
                    bits: Vec::new(),
                    antenna_set: antenna_set.clone(),
                    subcarrier_sets: sets,
                    symbols: syms,
                };
                let metric = frame_metric(y, h, mapper, &frame);
                if best.as_ref().map_or(true, |(_, bm)| metric < *bm) {
                    frame.bits = mapper.demap_frame_to_bits(&frame).unwrap();
                    best = Some((frame, metric));
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn mld_matches_independent_enumerator() {
        let mapper = scenario1();
        for idx in 0..10 {
            let (_, frame, h) = draw(200, idx, &mapper);
            let x = mapper.frame_to_signal_matrix(&frame);
            let mut noise = substream(200, Purpose::Noise, idx, 0);
            let y = apply_channel(&x, &h, 8.0, &mut noise).unwrap();
            let ours = mld_detect(&y, &h.h_rx, &mapper, DEFAULT_ML_CAP).unwrap();
            let (oracle_frame, oracle_metric) = brute_force_ml(&y, &h.h_rx, &mapper);
            assert!((ours.metric.unwrap() - oracle_metric).abs() <= 1e-12 * (1.0 + oracle_metric));
            assert_eq!(ours.frame.bits, oracle_frame.bits);
        }
    }

    #[test]
    fn mld_refuses_oversized_search() {
        let mapper = ImMapper::new(ImConfig::new(8, 2, 8, 2, 6, 4, 0.5).unwrap()).unwrap();
        let size = ml_search_space(&mapper);
        assert!(size > DEFAULT_ML_CAP);
        let (_, frame, h) = draw(300, 0, &mapper);
        let y = noiseless(&mapper, &frame, &h, 10.0);
        match mld_detect(&y, &h.h_rx, &mapper, DEFAULT_ML_CAP) {
            Err(Error::SearchSpaceExceeded { size: s, cap }) => {
                assert_eq!(s, size);
                assert_eq!(cap, DEFAULT_ML_CAP);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn mf_scores_match_direct_formula() {
        let mapper = scenario1();
        let (_, frame, h) = draw(400, 3, &mapper);
        let x = mapper.frame_to_signal_matrix(&frame);
        let mut noise = substream(400, Purpose::Noise, 3, 0);
        let y = apply_channel(&x, &h, 15.0, &mut noise).unwrap();
        let scores = mf_antenna_scores(&y, &h.h_rx, &mapper);
        // direct evaluation: explained energy with explicit residuals
        let cfg = mapper.config();
        let amp = y.es.sqrt();
        let mut cands: Vec<Complex64> =
            mapper.constellation().points().iter().map(|s| s * amp).collect();
        cands.push(mapper.special_symbol() * amp);
        cands.push(Complex64::new(0.0, 0.0));
        for n in 0..cfg.n_tx {
            let mut expect = 0.0;
            for i in 0..cfg.n_sub {
                let hv = h.h_rx[i].get(0, n);
                let yv = y.entries.get(0, i);
                let best = cands
                    .iter()
                    .map(|s| (yv - hv * s).norm_sqr())
                    .fold(f64::INFINITY, f64::min);
                expect += yv.norm_sqr() - best;
            }
            assert!((scores[n] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn mf_antenna_noiseless_scenario1_and_orthogonal() {
        let mapper = scenario1();
        for idx in 0..50 {
            let (_, frame, h) = draw(500, idx, &mapper);
            let y = noiseless(&mapper, &frame, &h, 20.0);
            assert_eq!(mf_antenna_detect(&y, &h.h_rx, &mapper), frame.antenna_set);
        }
        // orthogonal columns, N_r = 4
        let mapper4 = ImMapper::new(ImConfig::new(4, 4, 4, 1, 2, 4, 0.5).unwrap()).unwrap();
        let h = ChannelRealization {
            h_true: (0..4).map(|_| CMat::identity(4)).collect(),
            h_rx: (0..4).map(|_| CMat::identity(4)).collect(),
            noise_var: 1.0,
        };
        for idx in 0..10 {
            let mut bits_rng = substream(501, Purpose::Bits, idx, 0);
            let bits = mapper4.random_bits(&mut bits_rng);
            let frame = mapper4.map_bits_to_frame(&bits);
            let y = noiseless(&mapper4, &frame, &h, 10.0);
            assert_eq!(mf_antenna_detect(&y, &h.h_rx, &mapper4), frame.antenna_set);
        }
    }

    #[test]
    fn mf_zero_input_takes_first_table_pattern() {
        let mapper = scenario1();
        let (_, _, h) = draw(502, 0, &mapper);
        let y = ReceivedMatrix { entries: CMat::zeros(1, 4), es: 1.0 };
        let pattern = mf_antenna_detect(&y, &h.h_rx, &mapper);
        assert_eq!(pattern, mapper.antenna_table().pattern(0));
    }

    #[test]
    fn ls_estimate_identity_and_scalar() {
        let mapper4 = ImMapper::new(ImConfig::new(4, 4, 4, 4, 2, 4, 0.5).unwrap()).unwrap();
        let h = ChannelRealization {
            h_true: (0..4).map(|_| CMat::identity(4)).collect(),
            h_rx: (0..4).map(|_| CMat::identity(4)).collect(),
            noise_var: 1.0,
        };
        let mut bits_rng = substream(503, Purpose::Bits, 0, 0);
        let bits = mapper4.random_bits(&mut bits_rng);
        let frame = mapper4.map_bits_to_frame(&bits);
        let x = mapper4.frame_to_signal_matrix(&frame);
        let y = noiseless(&mapper4, &frame, &h, 0.0);
        let (xh, reg) = ls_estimate(&y, &h.h_rx, &[0, 1, 2, 3], &mapper4).unwrap();
        assert!(!reg);
        for r in 0..4 {
            for c in 0..4 {
                assert!((xh.get(r, c) - x.entries.get(r, c)).norm() < 1e-12);
            }
        }

        // scalar case: h = 2, y = 4, Es = 1 -> x = 2
        let mapper1 = ImMapper::new(ImConfig::new(1, 1, 1, 1, 1, 4, 0.5).unwrap()).unwrap();
        let h1 = vec![CMat::from_fn(1, 1, |_, _| Complex64::new(2.0, 0.0))];
        let y1 = ReceivedMatrix {
            entries: CMat::from_fn(1, 1, |_, _| Complex64::new(4.0, 0.0)),
            es: 1.0,
        };
        let (xh, _) = ls_estimate(&y1, &h1, &[0], &mapper1).unwrap();
        assert!((xh.get(0, 0) - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ls_matches_independent_normal_equations() {
        // random well-conditioned 4x2 system
        let mut rng = substream(504, Purpose::ChannelDraw, 0, 0);
        let h0 = CMat::from_fn(4, 2, |_, _| crate::rng::complex_gaussian(&mut rng, 1.0));
        let y0: Vec<Complex64> =
            (0..4).map(|_| crate::rng::complex_gaussian(&mut rng, 1.0)).collect();
        let mapper = ImMapper::new(ImConfig::new(2, 4, 1, 2, 1, 4, 0.5).unwrap()).unwrap();
        let mut ym = CMat::zeros(4, 1);
        for (r, v) in y0.iter().enumerate() {
            ym.set(r, 0, *v);
        }
        let y = ReceivedMatrix { entries: ym, es: 1.0 };
        let (xh, _) = ls_estimate(&y, &[h0.clone()], &[0, 1], &mapper).unwrap();
        // oracle: explicit 2x2 inverse of the Gram matrix
        let g = h0.gram();
        let det = g.get(0, 0) * g.get(1, 1) - g.get(0, 1) * g.get(1, 0);
        let rhs = h0.herm_mul_vec(&y0);
        let x0 = (g.get(1, 1) * rhs[0] - g.get(0, 1) * rhs[1]) / det;
        let x1 = (g.get(0, 0) * rhs[1] - g.get(1, 0) * rhs[0]) / det;
        assert!((xh.get(0, 0) - x0).norm() < 1e-10);
        assert!((xh.get(1, 0) - x1).norm() < 1e-10);
    }

    #[test]
    fn mf_llr_noiseless_recovery_and_prior() {
        let mapper = scenario1();
        for idx in 0..50 {
            let (bits, frame, h) = draw(505, idx, &mapper);
            let y = noiseless(&mapper, &frame, &h, 20.0);
            let out = mf_llr_detect(&y, &h.h_rx, &mapper, 1.0).unwrap();
            assert_eq!(out.frame.bits, bits, "frame {idx}");
        }
        // F = N_f / 2 makes the activity prior vanish
        let m = scenario1();
        let prior =
            (m.config().f_active as f64 / (m.config().n_sub - m.config().f_active) as f64).ln();
        assert_eq!(prior, 0.0);
        // F = N_f is refused
        let full = ImMapper::new(ImConfig::new(4, 1, 4, 1, 4, 4, 0.5).unwrap()).unwrap();
        let (_, frame, h) = draw(506, 0, &full);
        let y = noiseless(&full, &frame, &h, 10.0);
        assert!(mf_llr_detect(&y, &h.h_rx, &full, 1.0).is_err());
    }

    #[test]
    fn threshold_and_legalize_examples() {
        let probs = [0.9, 0.1, 0.8, 0.1];
        assert_eq!(threshold_pattern(&probs, 0.5), vec![0, 2]);
        // all six 2-subsets as the legal table
        let all: Vec<Vec<usize>> =
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]];
        assert_eq!(legalize_pattern(&probs, &[0, 2], &all), vec![0, 2]);

        let probs = [0.9, 0.6, 0.8, 0.55];
        let over = threshold_pattern(&probs, 0.5);
        assert_eq!(over, vec![0, 1, 2, 3]);
        assert_eq!(legalize_pattern(&probs, &over, &all), vec![0, 2]);
    }

    #[test]
    fn raising_tau_never_adds_antennas() {
        let mut rng = substream(507, Purpose::WeightInit, 0, 0);
        for _ in 0..100 {
            let probs: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let lo = threshold_pattern(&probs, 0.3);
            let hi = threshold_pattern(&probs, 0.7);
            assert!(hi.iter().all(|i| lo.contains(i)));
        }
    }

    #[test]
    fn genie_probs_reduce_to_true_pattern_ls() {
        let mapper = scenario1();
        let (_, frame, h) = draw(508, 1, &mapper);
        let x = mapper.frame_to_signal_matrix(&frame);
        let mut noise = substream(508, Purpose::Noise, 1, 0);
        let y = apply_channel(&x, &h, 12.0, &mut noise).unwrap();
        let probs = oracle_probs(&frame, 4);
        let (pattern, x_dlbmp, _) = dlbmp_with_probs(&probs, &y, &h.h_rx, &mapper, 0.5).unwrap();
        assert_eq!(pattern, frame.antenna_set);
        let (x_ls, _) = ls_estimate(&y, &h.h_rx, &frame.antenna_set, &mapper).unwrap();
        assert_eq!(x_dlbmp, x_ls);
    }

    #[test]
    fn untrained_ad_outputs_half_everywhere() {
        let mapper = scenario1();
        let ad = AdNet { net: Network::zeros(ad_subnet_spec(1, 4, 4)).unwrap(), input_rms: 1.0 };
        let (_, frame, h) = draw(509, 0, &mapper);
        let y = noiseless(&mapper, &frame, &h, 10.0);
        let probs = ad_infer(&y.entries, &ad).unwrap();
        assert_eq!(probs.len(), 4);
        for p in probs {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn sd_identity_passes_through_and_checks_shape() {
        let x = CMat::from_fn(1, 4, |_, c| Complex64::new(c as f64, -(c as f64)));
        let sd = SdNet::identity(1, 4);
        let out = sd_infer(&x, &sd).unwrap();
        assert_eq!(out, x);
        assert!(sd_infer(&CMat::zeros(2, 4), &sd).is_err());
    }

    #[test]
    fn amplitude_demap_examples() {
        let mapper = scenario1();
        let row = [1.0, 0.4, 0.9, 0.2];
        let x = CMat::from_fn(1, 4, |_, c| Complex64::new(row[c], 0.0));
        let (sets, _) = legalize_and_demap(&x, &mapper);
        assert_eq!(sets[0], vec![0, 2]);
    }

    #[test]
    fn amplitude_demap_falls_back_to_legal_pattern() {
        // n_sub = 5, F = 2: binom = 10, d1 = 3, so ranks 8 and 9 are illegal.
        let cfg = ImConfig::new(4, 1, 5, 1, 2, 4, 0.5).unwrap();
        let mapper = ImMapper::new(cfg).unwrap();
        let amps = [0.1, 0.2, 0.9, 0.15, 1.0];
        let x = CMat::from_fn(1, 5, |_, c| Complex64::new(amps[c], 0.0));
        assert_eq!(combination_to_rank(&[2, 4], 5, 2).unwrap(), 8);
        let (sets, _) = legalize_and_demap(&x, &mapper);
        // brute-force oracle over legal ranks
        let mut best = Vec::new();
        let mut best_sum = f64::NEG_INFINITY;
        for rank in 0..8u64 {
            let set = rank_to_combination(rank, 5, 2).unwrap();
            let sum: f64 = set.iter().map(|&i| amps[i]).sum();
            if sum > best_sum {
                best_sum = sum;
                best = set;
            }
        }
        assert_eq!(sets[0], best);
    }

    #[test]
    fn genie_pipeline_is_exact_noiseless() {
        let mapper = scenario1();
        let sd = SdNet::identity(1, 4);
        for idx in 0..50 {
            let (bits, frame, h) = draw(510, idx, &mapper);
            let y = noiseless(&mapper, &frame, &h, 15.0);
            let probs = oracle_probs(&frame, 4);
            let (pattern, x_ls, reg) = dlbmp_with_probs(&probs, &y, &h.h_rx, &mapper, 0.5).unwrap();
            let out = imnet_refine(pattern, x_ls, Some(probs), reg, &sd, &mapper).unwrap();
            assert_eq!(out.frame.bits, bits, "frame {idx}");
        }
    }

    #[test]
    fn ml_metric_never_exceeds_truth_or_baseline() {
        let mapper = scenario1();
        for idx in 0..20 {
            let (_, frame, h) = draw(511, idx, &mapper);
            let x = mapper.frame_to_signal_matrix(&frame);
            let mut noise = substream(511, Purpose::Noise, idx, 0);
            let y = apply_channel(&x, &h, 5.0, &mut noise).unwrap();
            let ml = mld_detect(&y, &h.h_rx, &mapper, DEFAULT_ML_CAP).unwrap();
            let truth_metric = frame_metric(&y, &h.h_rx, &mapper, &frame);
            assert!(ml.metric.unwrap() <= truth_metric + 1e-12);
            let baseline = mf_llr_detect(&y, &h.h_rx, &mapper, 1.0).unwrap();
            let baseline_metric = frame_metric(&y, &h.h_rx, &mapper, &baseline.frame);
            assert!(ml.metric.unwrap() <= baseline_metric + 1e-12);
        }
    }
}
