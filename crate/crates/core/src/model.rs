//! Configuration, signal-domain types, channel draws and additive noise.
//!
//! Everything downstream works on double-precision complex numbers. Random
//! generation always takes an explicit generator so that results are a pure
//! function of the seed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use nalgebra::Complex;

/// Complex double.
pub type C64 = Complex<f64>;
/// Dense column-major complex matrix.
pub type CMatrix = DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = DVector<C64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// How the SNR axis maps to the per-receive-element noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrConvention {
    /// `sigma^2 = 10^(-snr/10)`: SNR per unit-energy symbol through a
    /// unit-variance channel coefficient.
    #[default]
    UnitSymbol,
    /// `sigma^2 = n_active * 10^(-snr/10)`: SNR per receive element measured
    /// against the superposed power of a shared subcarrier.
    SharedPower,
}

impl SnrConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            SnrConvention::UnitSymbol => "unit_symbol",
            SnrConvention::SharedPower => "shared_power",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unit_symbol" => Some(SnrConvention::UnitSymbol),
            "shared_power" => Some(SnrConvention::SharedPower),
            _ => None,
        }
    }
}

/// Scalar system parameters plus the simulation knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Total transmit antennas.
    pub n_transmit: usize,
    /// Active antennas, one per RF chain.
    pub n_active: usize,
    pub n_subcarriers: usize,
    /// Communication receive antennas.
    pub n_receive: usize,
    /// Bits per data symbol (2 for QPSK, the only supported constellation).
    pub bits_per_symbol: usize,
    pub snr_db: f64,
    pub subcarrier_spacing_hz: f64,
    /// OFDM symbol duration, cyclic prefix included.
    pub ofdm_symbol_duration_s: f64,
    pub n_ofdm_symbols: usize,
    /// The threshold gets `threshold_offset_coeff * n_receive` added to it.
    pub threshold_offset_coeff: f64,
    pub branch_factor: usize,
    pub base_seed: u64,
    pub snr_convention: SnrConvention,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::table1()
    }
}

/// Non-fatal findings from [`SystemConfig::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigWarning {
    /// `n_receive <= max(n_active, n_transmit / 2)`: half-array subspaces
    /// overlap and the binary search cannot separate them.
    DegenerateReceiveArray { n_receive: usize, bound: String },
}

impl std::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigWarning::DegenerateReceiveArray { n_receive, bound } => write!(
                f,
                "n_receive = {n_receive} does not exceed {bound}; private subcarrier detection will degrade"
            ),
        }
    }
}

impl SystemConfig {
    /// Reference parameters: 32 transmit antennas, 6 active, 64 subcarriers
    /// at 0.25 MHz spacing, 5 us symbols, QPSK; M = 32 and 0 dB.
    pub fn table1() -> Self {
        SystemConfig {
            n_transmit: 32,
            n_active: 6,
            n_subcarriers: 64,
            n_receive: 32,
            bits_per_symbol: 2,
            snr_db: 0.0,
            subcarrier_spacing_hz: 0.25e6,
            ofdm_symbol_duration_s: 5e-6,
            n_ofdm_symbols: 1,
            threshold_offset_coeff: 0.01,
            branch_factor: 2,
            base_seed: 0x5eed_df2c,
            snr_convention: SnrConvention::UnitSymbol,
        }
    }

    pub fn with_receive(mut self, m: usize) -> Self {
        self.n_receive = m;
        self
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    /// Rejects inconsistent parameters; returns warnings for the degenerate
    /// receive regime, which is still simulated.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        for (name, v) in [
            ("n_transmit", self.n_transmit),
            ("n_active", self.n_active),
            ("n_subcarriers", self.n_subcarriers),
            ("n_receive", self.n_receive),
            ("bits_per_symbol", self.bits_per_symbol),
            ("n_ofdm_symbols", self.n_ofdm_symbols),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.n_active >= self.n_transmit {
            return bad(format!(
                "n_active ({}) must be smaller than n_transmit ({})",
                self.n_active, self.n_transmit
            ));
        }
        if self.n_active > self.n_subcarriers {
            return bad(format!(
                "n_active ({}) must not exceed n_subcarriers ({})",
                self.n_active, self.n_subcarriers
            ));
        }
        if self.bits_per_symbol != 2 {
            return bad(format!(
                "bits_per_symbol = {} is unsupported (QPSK only, 2)",
                self.bits_per_symbol
            ));
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if !(self.threshold_offset_coeff >= 0.0) || !self.threshold_offset_coeff.is_finite() {
            return bad("threshold_offset_coeff must be a finite nonnegative number".into());
        }
        if self.branch_factor < 2 {
            return bad("branch_factor must be at least 2".into());
        }
        if !(self.subcarrier_spacing_hz > 0.0) || !self.subcarrier_spacing_hz.is_finite() {
            return bad("subcarrier_spacing_hz must be positive".into());
        }
        if !(self.ofdm_symbol_duration_s > 0.0) || !self.ofdm_symbol_duration_s.is_finite() {
            return bad("ofdm_symbol_duration_s must be positive".into());
        }

        let mut warnings = Vec::new();
        // Nt/2 is compared as a real number: 2M <= Nt.
        if self.n_receive <= self.n_active || 2 * self.n_receive <= self.n_transmit {
            warnings.push(ConfigWarning::DegenerateReceiveArray {
                n_receive: self.n_receive,
                bound: format!(
                    "max(n_active = {}, n_transmit / 2 = {})",
                    self.n_active,
                    self.n_transmit as f64 / 2.0
                ),
            });
        }
        Ok(warnings)
    }
}

/// Per-receive-element noise variance for the configured SNR.
pub fn noise_variance_from_snr(cfg: &SystemConfig) -> f64 {
    let base = 10f64.powf(-cfg.snr_db / 10.0);
    match cfg.snr_convention {
        SnrConvention::UnitSymbol => base,
        SnrConvention::SharedPower => cfg.n_active as f64 * base,
    }
}

/// Channel matrices for all subcarriers, `M x Nt` each.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    n_receive: usize,
    n_transmit: usize,
    slices: Vec<CMatrix>,
}

impl ChannelTensor {
    pub fn from_slices(slices: Vec<CMatrix>) -> Result<Self, ModelError> {
        let first = slices
            .first()
            .ok_or_else(|| ModelError::DimensionMismatch("channel tensor needs at least one subcarrier".into()))?;
        let (m, n) = first.shape();
        if let Some(bad) = slices.iter().position(|s| s.shape() != (m, n)) {
            return Err(ModelError::DimensionMismatch(format!(
                "subcarrier {bad} has shape {:?}, expected {:?}",
                slices[bad].shape(),
                (m, n)
            )));
        }
        if slices.iter().any(|s| s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(ModelError::InvalidConfig("channel entries must be finite".into()));
        }
        Ok(ChannelTensor {
            n_receive: m,
            n_transmit: n,
            slices,
        })
    }

    /// `(M, Nt, L)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_receive, self.n_transmit, self.slices.len())
    }

    pub fn slice(&self, subcarrier: usize) -> &CMatrix {
        &self.slices[subcarrier]
    }

    pub fn entry(&self, m: usize, n: usize, subcarrier: usize) -> C64 {
        self.slices[subcarrier][(m, n)]
    }

    pub fn slices(&self) -> &[CMatrix] {
        &self.slices
    }

    /// FNV-1a over the raw bits of every entry.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in &self.slices {
            for z in s.iter() {
                for w in [z.re.to_bits(), z.im.to_bits()] {
                    for b in w.to_le_bytes() {
                        h ^= b as u64;
                        h = h.wrapping_mul(0x0100_0000_01b3);
                    }
                }
            }
        }
        h
    }
}

/// Transmit symbols of one OFDM symbol, `Nt x L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix(pub CMatrix);

impl SymbolMatrix {
    pub fn column(&self, subcarrier: usize) -> CVector {
        self.0.column(subcarrier).into_owned()
    }

    /// Number of nonzero entries in a column.
    pub fn column_support(&self, subcarrier: usize) -> usize {
        self.0.column(subcarrier).iter().filter(|z| z.norm_sqr() > 0.0).count()
    }
}

/// Received symbols `Y` (`M x L`) together with the noise variance used.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub y: CMatrix,
    pub noise_variance: f64,
}

impl ReceivedFrame {
    pub fn column(&self, subcarrier: usize) -> CVector {
        self.y.column(subcarrier).into_owned()
    }
}

/// One circularly-symmetric complex Gaussian draw with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// I.i.d. unit-variance Rayleigh coefficients for every antenna pair and
/// subcarrier.
pub fn generate_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelTensor {
    let (m, nt) = (cfg.n_receive, cfg.n_transmit);
    let slices = (0..cfg.n_subcarriers)
        .map(|_| CMatrix::from_fn(m, nt, |_, _| complex_gaussian(rng, 1.0)))
        .collect();
    ChannelTensor {
        n_receive: m,
        n_transmit: nt,
        slices,
    }
}

/// `y + w` with `w` i.i.d. complex Gaussian of variance `sigma2`.
pub fn add_awgn<R: Rng + ?Sized>(y: &CVector, sigma2: f64, rng: &mut R) -> CVector {
    if sigma2 == 0.0 {
        return y.clone();
    }
    y.map(|v| v + complex_gaussian(rng, sigma2))
}

/// What a random substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Channel = 1,
    IndexBits = 2,
    Payload = 3,
    Noise = 4,
    /// Free-form draws in tests and demos.
    Auxiliary = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent ChaCha substream for a `(base_seed, trial, purpose)` triple.
///
/// The key mixes the base seed and the trial index; the ChaCha stream id
/// carries the purpose. Draw order inside one trial therefore never affects
/// another trial or another purpose.
pub fn substream(base_seed: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut a = base_seed;
    let mut b = trial ^ 0xd1b5_4a32_d192_ed03;
    let words = [
        splitmix64(&mut a),
        splitmix64(&mut a),
        splitmix64(&mut b),
        splitmix64(&mut b),
    ];
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose as u64);
    rng
}
