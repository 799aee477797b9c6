//! Per-subcarrier MIMO channel generation and application.
//!
//! Channels are flat per subcarrier: the receive vector at subcarrier `i`
//! is `y_i = H_i (sqrt(Es) x_i) + w_i` with unit-variance complex AWGN.
//! Rayleigh entries are i.i.d. CN(0, 1/N_t); the correlated model colors
//! an i.i.d. draw with exponential transmit/receive correlation.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::mapping::{ImConfig, SignalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    Rayleigh,
    Correlated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsirMode {
    Perfect,
    Imperfect,
}

/// How pilot energy scales when forming the channel-estimate error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotEnergyMode {
    /// Pilots transmitted at the data symbol energy (tracks the SNR sweep).
    DataEnergy,
    /// Unit pilot energy regardless of SNR.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    /// Exponential correlation coefficient, used by the correlated model.
    pub rho: f64,
    pub csir: CsirMode,
    /// Pilot count for the estimate-error variance; defaults to N_t.
    pub n_pilot: Option<usize>,
    pub pilot_energy: PilotEnergyMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            model: ChannelModel::Rayleigh,
            rho: 0.5,
            csir: CsirMode::Perfect,
            n_pilot: None,
            pilot_energy: PilotEnergyMode::DataEnergy,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0,1) (got {})", self.rho)));
        }
        if let Some(np) = self.n_pilot {
            if np == 0 {
                return Err(Error::Config("n_pilot must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn pilots(&self, im: &ImConfig) -> usize {
        self.n_pilot.unwrap_or(im.n_tx)
    }

    pub fn pilot_energy_value(&self, es: f64) -> f64 {
        match self.pilot_energy {
            PilotEnergyMode::DataEnergy => es,
            PilotEnergyMode::Unit => 1.0,
        }
    }
}

/// True and receiver-side channel matrices for every subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// True frequency response per subcarrier, each N_r x N_t.
    pub h_true: Vec<CMat>,
    /// Receiver-side estimate; equals `h_true` under perfect CSIR.
    pub h_rx: Vec<CMat>,
    /// AWGN variance (fixed at 1; SNR scales the transmit side).
    pub noise_var: f64,
}

/// Received antenna-by-subcarrier matrix plus the symbol energy used.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedMatrix {
    pub entries: CMat,
    pub es: f64,
}

/// Exponential correlation matrix: `rho^|i-j|`.
pub fn exp_correlation_matrix(n: usize, rho: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Config(format!("rho must lie in [0,1) (got {rho})")));
    }
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = rho.powi((i as i32 - j as i32).abs());
        }
    }
    Ok(m)
}

fn draw_iid(n_rx: usize, n_tx: usize, rng: &mut impl Rng) -> CMat {
    let variance = 1.0 / n_tx as f64;
    let mut m = CMat::zeros(n_rx, n_tx);
    for v in m.data.iter_mut() {
        *v = crate::rng::complex_gaussian(rng, variance);
    }
    m
}

/// Draw one channel realization (all subcarriers, independently faded).
pub fn draw_channel(im: &ImConfig, ch: &ChannelConfig, rng: &mut impl Rng) -> Result<ChannelRealization> {
    ch.validate()?;
    let factors = match ch.model {
        ChannelModel::Rayleigh => None,
        ChannelModel::Correlated => {
            let theta_rx = exp_correlation_matrix(im.n_rx, ch.rho)?;
            let theta_tx = exp_correlation_matrix(im.n_tx, ch.rho)?;
            let l_rx = linalg::cholesky_lower(im.n_rx, &theta_rx)
                .ok_or_else(|| Error::Config("receive correlation matrix not SPD".into()))?;
            let l_tx = linalg::cholesky_lower(im.n_tx, &theta_tx)
                .ok_or_else(|| Error::Config("transmit correlation matrix not SPD".into()))?;
            Some((l_rx, l_tx))
        }
    };
    let h_true: Vec<CMat> = (0..im.n_sub)
        .map(|_| {
            let a = draw_iid(im.n_rx, im.n_tx, rng);
            match &factors {
                None => a,
                Some((l_rx, l_tx)) => linalg::color_kronecker(&a, l_rx, l_tx),
            }
        })
        .collect();
    Ok(ChannelRealization { h_rx: h_true.clone(), h_true, noise_var: 1.0 })
}

/// Replace the receiver-side estimate with `H + dH`, where `dH` entries are
/// i.i.d. CN(0, N_t * noise_var / (N_p * E_p)). Perfect mode is a no-op.
pub fn corrupt_csir(
    realization: &mut ChannelRealization,
    im: &ImConfig,
    ch: &ChannelConfig,
    es: f64,
    rng: &mut impl Rng,
) {
    match ch.csir {
        CsirMode::Perfect => {
            realization.h_rx = realization.h_true.clone();
        }
        CsirMode::Imperfect => {
            let n_p = ch.pilots(im) as f64;
            let e_p = ch.pilot_energy_value(es);
            let err_var = im.n_tx as f64 * realization.noise_var / (n_p * e_p);
            realization.h_rx = realization
                .h_true
                .iter()
                .map(|h| {
                    let mut est = h.clone();
                    for v in est.data.iter_mut() {
                        *v += crate::rng::complex_gaussian(rng, err_var);
                    }
                    est
                })
                .collect();
        }
    }
}

/// Symbol energy for a given SNR in dB (AWGN variance is fixed at 1).
pub fn snr_db_to_es(snr_db: f64) -> f64 {
    10.0_f64.powf(snr_db / 10.0)
}

fn apply_channel_inner(
    x: &SignalMatrix,
    ch: &ChannelRealization,
    snr_db: f64,
    mut noise: Option<&mut dyn rand::RngCore>,
) -> Result<ReceivedMatrix> {
    let n_sub = ch.h_true.len();
    if x.entries.cols != n_sub {
        return Err(Error::ShapeMismatch(format!(
            "signal has {} subcarriers, channel has {n_sub}",
            x.entries.cols
        )));
    }
    let n_rx = ch.h_true[0].rows;
    if ch.h_true[0].cols != x.entries.rows {
        return Err(Error::ShapeMismatch(format!(
            "channel expects {} transmit antennas, signal has {}",
            ch.h_true[0].cols,
            x.entries.rows
        )));
    }
    let es = snr_db_to_es(snr_db);
    let amp = es.sqrt();
    let mut y = CMat::zeros(n_rx, n_sub);
    for i in 0..n_sub {
        let xi: Vec<Complex64> = (0..x.entries.rows).map(|t| x.entries.get(t, i) * amp).collect();
        let hx = ch.h_true[i].mul_vec(&xi);
        for (r, v) in hx.into_iter().enumerate() {
            let w = match noise.as_deref_mut() {
                Some(rng) => crate::rng::complex_gaussian(rng, ch.noise_var),
                None => Complex64::new(0.0, 0.0),
            };
            y.set(r, i, v + w);
        }
    }
    Ok(ReceivedMatrix { entries: y, es })
}

/// Push a signal matrix through the channel at the given SNR with AWGN.
pub fn apply_channel(
    x: &SignalMatrix,
    ch: &ChannelRealization,
    snr_db: f64,
    noise: &mut impl Rng,
) -> Result<ReceivedMatrix> {
    apply_channel_inner(x, ch, snr_db, Some(noise))
}

/// The zero-noise hook: `y_i = H_i x_i sqrt(Es)` exactly.
pub fn apply_channel_noiseless(
    x: &SignalMatrix,
    ch: &ChannelRealization,
    snr_db: f64,
) -> Result<ReceivedMatrix> {
    apply_channel_inner(x, ch, snr_db, None)
}
