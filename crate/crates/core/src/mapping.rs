//! Bit-to-frame mapping for index modulation over space and frequency.
//!
//! A frame's bits split into an antenna-pattern field, and per active link
//! a subcarrier-pattern field plus modulated symbol bits. Patterns are
//! addressed through lexicographic combination ranking, so the mapping is
//! a bijection between bit strings and legal frames.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// System parameters for one index-modulation MIMO-OFDM configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ImConfig {
    /// Transmit antenna count.
    pub n_tx: usize,
    /// Receive antenna count.
    pub n_rx: usize,
    /// Subcarriers per frame.
    pub n_sub: usize,
    /// Active transmit antennas per frame.
    pub k_active: usize,
    /// Active subcarriers per link.
    pub f_active: usize,
    /// Constellation size.
    pub mod_order: usize,
    /// Amplitude of the idle-subcarrier marker symbol relative to the
    /// smallest constellation amplitude. Must stay below 1 so amplitude
    /// sorting can tell data cells from marker cells.
    pub special_amp_ratio: f64,
}

impl ImConfig {
    pub fn new(
        n_tx: usize,
        n_rx: usize,
        n_sub: usize,
        k_active: usize,
        f_active: usize,
        mod_order: usize,
        special_amp_ratio: f64,
    ) -> Result<Self> {
        let cfg = Self { n_tx, n_rx, n_sub, k_active, f_active, mod_order, special_amp_ratio };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_active == 0 || self.k_active > self.n_tx {
            return Err(Error::Config(format!(
                "k_active must satisfy 1 <= K <= n_tx (got K={}, n_tx={})",
                self.k_active, self.n_tx
            )));
        }
        if self.f_active == 0 || self.f_active > self.n_sub {
            return Err(Error::Config(format!(
                "f_active must satisfy 1 <= F <= n_sub (got F={}, n_sub={})",
                self.f_active, self.n_sub
            )));
        }
        if !matches!(self.mod_order, 2 | 4 | 16 | 64) {
            return Err(Error::Config(format!(
                "mod_order must be one of 2, 4, 16, 64 (got {})",
                self.mod_order
            )));
        }
        if self.n_rx < self.k_active {
            return Err(Error::Config(format!(
                "n_rx must be >= k_active for least-squares recovery (got n_rx={}, K={})",
                self.n_rx, self.k_active
            )));
        }
        if !(self.special_amp_ratio > 0.0 && self.special_amp_ratio < 1.0) {
            return Err(Error::Config(format!(
                "special_amp_ratio must lie in (0,1) (got {})",
                self.special_amp_ratio
            )));
        }
        Ok(())
    }

    /// The marker symbol transmitted on idle subcarriers of active links.
    pub fn special_symbol(&self) -> Complex64 {
        let min_amp = Constellation::new(self.mod_order)
            .expect("validated mod_order")
            .min_amplitude();
        let unit = Complex64::new(1.0, 1.0) / 2.0_f64.sqrt();
        self.special_amp_ratio * min_amp * unit
    }
}

/// How the frame's bits are split across index and symbol fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitBudget {
    /// Antenna-pattern bits.
    pub c_bits: usize,
    /// Subcarrier-pattern bits per link.
    pub d1_bits: usize,
    /// Symbol bits per link.
    pub d2_bits: usize,
    /// Bits per frame.
    pub total_bits: usize,
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(result).expect("binomial exceeds u64")
}

fn floor_log2(v: u64) -> usize {
    if v <= 1 {
        0
    } else {
        (63 - v.leading_zeros()) as usize
    }
}

/// Split the frame's bit budget across the index and symbol fields.
pub fn derive_bit_budget(cfg: &ImConfig) -> BitBudget {
    let c_bits = floor_log2(binomial(cfg.n_tx, cfg.k_active));
    let d1_bits = floor_log2(binomial(cfg.n_sub, cfg.f_active));
    let d2_bits = cfg.f_active * floor_log2(cfg.mod_order as u64);
    BitBudget { c_bits, d1_bits, d2_bits, total_bits: c_bits + cfg.k_active * (d1_bits + d2_bits) }
}

/// Lexicographic unranking: the `rank`-th k-subset of `[0, n)`.
pub fn rank_to_combination(rank: u64, n: usize, k: usize) -> Result<Vec<usize>> {
    let count = binomial(n, k);
    if rank >= count {
        return Err(Error::RankOutOfRange { rank, n, k, count });
    }
    let mut remaining = rank;
    let mut comb = Vec::with_capacity(k);
    let mut candidate = 0;
    for pos in 0..k {
        loop {
            let below = binomial(n - candidate - 1, k - pos - 1);
            if remaining < below {
                comb.push(candidate);
                candidate += 1;
                break;
            }
            remaining -= below;
            candidate += 1;
        }
    }
    Ok(comb)
}

/// Lexicographic ranking; inverse of [`rank_to_combination`].
pub fn combination_to_rank(comb: &[usize], n: usize, k: usize) -> Result<u64> {
    if comb.len() != k
        || comb.iter().any(|&c| c >= n)
        || comb.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::BadCombination { n, k });
    }
    let mut rank = 0u64;
    let mut prev = 0usize;
    for (pos, &c) in comb.iter().enumerate() {
        for v in prev..c {
            rank += binomial(n - v - 1, k - pos - 1);
        }
        prev = c + 1;
    }
    Ok(rank)
}

/// Lookup table from antenna-field bit values to activation patterns:
/// the lexicographically first `2^c_bits` K-subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntennaPatternTable {
    patterns: Vec<Vec<usize>>,
}

impl AntennaPatternTable {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn pattern(&self, index: usize) -> &[usize] {
        &self.patterns[index]
    }

    pub fn patterns(&self) -> &[Vec<usize>] {
        &self.patterns
    }

    /// Index of a pattern, if it is in the table. Patterns are stored in
    /// lexicographic order, so this is a binary search.
    pub fn index_of(&self, pattern: &[usize]) -> Option<usize> {
        self.patterns.binary_search_by(|p| p.as_slice().cmp(pattern)).ok()
    }
}

/// Build the antenna lookup table for `2^c_bits` patterns of k-of-n.
pub fn build_antenna_table(n: usize, k: usize, c_bits: usize) -> Result<AntennaPatternTable> {
    let needed = 1u64 << c_bits;
    let available = binomial(n, k);
    if needed > available {
        return Err(Error::TableCapacity { needed, available });
    }
    let patterns = (0..needed)
        .map(|r| rank_to_combination(r, n, k).expect("rank < binomial"))
        .collect();
    Ok(AntennaPatternTable { patterns })
}

/// Gray-coded square QAM (or BPSK for order 2) with unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    bits_per_symbol: usize,
}

impl Constellation {
    pub fn new(m: usize) -> Result<Self> {
        if !matches!(m, 2 | 4 | 16 | 64) {
            return Err(Error::Config(format!("unsupported constellation size {m}")));
        }
        let bits_per_symbol = floor_log2(m as u64);
        if m == 2 {
            return Ok(Self {
                points: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
                bits_per_symbol,
            });
        }
        let axis_bits = bits_per_symbol / 2;
        let levels = 1usize << axis_bits;
        // mean of level^2 over {±1, ±3, ...}, doubled for the two axes
        let mean_sq: f64 = (0..levels)
            .map(|i| {
                let l = (levels as f64 - 1.0) - 2.0 * i as f64;
                l * l
            })
            .sum::<f64>()
            / levels as f64;
        let norm = (2.0 * mean_sq).sqrt();
        let axis_level = |label: usize| -> f64 {
            // Gray label -> position index -> amplitude level
            let mut idx = label;
            let mut shift = 1;
            while shift < axis_bits {
                idx ^= idx >> shift;
                shift <<= 1;
            }
            ((levels - 1) as f64 - 2.0 * idx as f64) / norm
        };
        let points = (0..m)
            .map(|label| {
                let i_label = label >> axis_bits;
                let q_label = label & (levels - 1);
                Complex64::new(axis_level(i_label), axis_level(q_label))
            })
            .collect();
        Ok(Self { points, bits_per_symbol })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn min_amplitude(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Map `bits_per_symbol` bits (MSB first) to a constellation point.
    pub fn modulate(&self, bits: &[bool]) -> Complex64 {
        assert_eq!(bits.len(), self.bits_per_symbol, "wrong bit count for symbol");
        self.points[bits_to_index(bits)]
    }

    /// Nearest-point hard decision; ties resolve to the lowest bit label.
    pub fn demodulate(&self, z: Complex64) -> Vec<bool> {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        index_to_bits(best, self.bits_per_symbol)
    }
}

/// Convenience wrappers matching the operation-level identifiers.
pub fn qam_modulate(bits: &[bool], m: usize) -> Result<Complex64> {
    Ok(Constellation::new(m)?.modulate(bits))
}

pub fn qam_demodulate(z: Complex64, m: usize) -> Result<Vec<bool>> {
    Ok(Constellation::new(m)?.demodulate(z))
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

pub fn index_to_bits(value: usize, n: usize) -> Vec<bool> {
    (0..n).rev().map(|i| (value >> i) & 1 == 1).collect()
}

/// One frame: its source bits and the decoded index/symbol structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ImFrame {
    pub bits: Vec<bool>,
    /// Sorted indices of the active transmit antennas.
    pub antenna_set: Vec<usize>,
    /// Per link, sorted indices of its active subcarriers.
    pub subcarrier_sets: Vec<Vec<usize>>,
    /// Per link, the modulated symbols in subcarrier order.
    pub symbols: Vec<Vec<Complex64>>,
}

/// Transmitted signal matrix, antennas by subcarriers. Active rows carry
/// data symbols on active subcarriers and the marker symbol elsewhere;
/// inactive rows are zero, so every column shares one K-sized support.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub entries: crate::linalg::CMat,
}

impl SignalMatrix {
    /// Support of column `i` (row indices of nonzero entries).
    pub fn column_support(&self, i: usize) -> Vec<usize> {
        (0..self.entries.rows)
            .filter(|&r| self.entries.get(r, i).norm_sqr() > 0.0)
            .collect()
    }
}

/// Bit/frame/matrix mapper with the derived tables cached.
#[derive(Debug, Clone)]
pub struct ImMapper {
    cfg: ImConfig,
    budget: BitBudget,
    table: AntennaPatternTable,
    constellation: Constellation,
    special: Complex64,
}

impl ImMapper {
    pub fn new(cfg: ImConfig) -> Result<Self> {
        cfg.validate()?;
        let budget = derive_bit_budget(&cfg);
        let table = build_antenna_table(cfg.n_tx, cfg.k_active, budget.c_bits)?;
        let constellation = Constellation::new(cfg.mod_order)?;
        let special = cfg.special_symbol();
        Ok(Self { cfg, budget, table, constellation, special })
    }

    pub fn config(&self) -> &ImConfig {
        &self.cfg
    }

    pub fn budget(&self) -> BitBudget {
        self.budget
    }

    pub fn antenna_table(&self) -> &AntennaPatternTable {
        &self.table
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn special_symbol(&self) -> Complex64 {
        self.special
    }

    /// Draw one frame's worth of uniform source bits.
    pub fn random_bits<R: rand::Rng>(&self, rng: &mut R) -> Vec<bool> {
        (0..self.budget.total_bits).map(|_| rng.gen::<bool>()).collect()
    }

    /// Decode a bit string into its frame structure.
    pub fn map_bits_to_frame(&self, bits: &[bool]) -> ImFrame {
        assert_eq!(bits.len(), self.budget.total_bits, "wrong frame bit count");
        let c = self.budget.c_bits;
        let d1 = self.budget.d1_bits;
        let bits_per_symbol = self.constellation.bits_per_symbol();
        let antenna_set = self.table.pattern(bits_to_index(&bits[..c])).to_vec();

        let mut subcarrier_sets = Vec::with_capacity(self.cfg.k_active);
        let mut symbols = Vec::with_capacity(self.cfg.k_active);
        let mut cursor = c;
        for _ in 0..self.cfg.k_active {
            let rank = bits_to_index(&bits[cursor..cursor + d1]) as u64;
            cursor += d1;
            let set = rank_to_combination(rank, self.cfg.n_sub, self.cfg.f_active)
                .expect("d1 bits always index a legal combination");
            let mut link_symbols = Vec::with_capacity(self.cfg.f_active);
            for _ in 0..self.cfg.f_active {
                link_symbols.push(self.constellation.modulate(&bits[cursor..cursor + bits_per_symbol]));
                cursor += bits_per_symbol;
            }
            subcarrier_sets.push(set);
            symbols.push(link_symbols);
        }
        ImFrame { bits: bits.to_vec(), antenna_set, subcarrier_sets, symbols }
    }

    /// Recover the bit string from a legal frame structure.
    pub fn demap_frame_to_bits(&self, frame: &ImFrame) -> Result<Vec<bool>> {
        let antenna_index = self
            .table
            .index_of(&frame.antenna_set)
            .ok_or_else(|| Error::IllegalFrame(format!("antenna set {:?} not in table", frame.antenna_set)))?;
        let mut bits = index_to_bits(antenna_index, self.budget.c_bits);
        let max_rank = 1u64 << self.budget.d1_bits;
        for (set, link_symbols) in frame.subcarrier_sets.iter().zip(&frame.symbols) {
            let rank = combination_to_rank(set, self.cfg.n_sub, self.cfg.f_active)?;
            if rank >= max_rank {
                return Err(Error::IllegalFrame(format!(
                    "subcarrier set {set:?} has rank {rank} >= 2^d1 = {max_rank}"
                )));
            }
            bits.extend(index_to_bits(rank as usize, self.budget.d1_bits));
            for &s in link_symbols {
                bits.extend(self.constellation.demodulate(s));
            }
        }
        Ok(bits)
    }

    /// Place a frame on the antenna-by-subcarrier grid.
    pub fn frame_to_signal_matrix(&self, frame: &ImFrame) -> SignalMatrix {
        let mut m = crate::linalg::CMat::zeros(self.cfg.n_tx, self.cfg.n_sub);
        for (link, &antenna) in frame.antenna_set.iter().enumerate() {
            for sub in 0..self.cfg.n_sub {
                m.set(antenna, sub, self.special);
            }
            for (j, &sub) in frame.subcarrier_sets[link].iter().enumerate() {
                m.set(antenna, sub, frame.symbols[link][j]);
            }
        }
        SignalMatrix { entries: m }
    }
}
