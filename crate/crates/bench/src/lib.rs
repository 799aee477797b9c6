//! Shared fixtures for the criterion benchmarks.

use imlink_core::channel::{apply_channel, draw_channel, ChannelConfig, ChannelRealization, ReceivedMatrix};
use imlink_core::mapping::{ImConfig, ImFrame, ImMapper};
use imlink_core::rng::{substream, Purpose};

/// The small reference configuration used by the per-frame benchmarks.
pub fn small_mapper() -> ImMapper {
    ImMapper::new(ImConfig::new(4, 1, 4, 1, 2, 4, 0.5).unwrap()).unwrap()
}

/// One simulated frame at the given SNR.
pub fn sample_frame(
    mapper: &ImMapper,
    seed: u64,
    snr_db: f64,
) -> (ImFrame, ChannelRealization, ReceivedMatrix) {
    let ch_cfg = ChannelConfig::default();
    let mut bits_rng = substream(seed, Purpose::Bits, 0, 0);
    let bits = mapper.random_bits(&mut bits_rng);
    let frame = mapper.map_bits_to_frame(&bits);
    let x = mapper.frame_to_signal_matrix(&frame);
    let mut ch_rng = substream(seed, Purpose::ChannelDraw, 0, 0);
    let h = draw_channel(mapper.config(), &ch_cfg, &mut ch_rng).unwrap();
    let mut noise_rng = substream(seed, Purpose::Noise, 0, 0);
    let y = apply_channel(&x, &h, snr_db, &mut noise_rng).unwrap();
    (frame, h, y)
}
