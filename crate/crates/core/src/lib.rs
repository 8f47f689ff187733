//! Link-level simulator for OFDM subcarrier-sharing DFRC communication.
//!
//! Bits are carried by QPSK symbols on shared and private subcarriers and,
//! additionally, by the choice of active antennas together with the
//! permutation of private subcarriers paired with them. The receiver finds
//! the private subcarriers with a binary search over channel sub-matrices
//! and orthogonal projections, then recovers the symbols.

pub mod detector;
pub mod experiments;
pub mod index_codec;
pub mod linalg;
pub mod model;
pub mod ssr_baseline;
pub mod transmitter;

pub use detector::{
    classify_subcarrier, decode_frame, detect_frame, estimate_private_symbol, estimate_shared_symbols, make_epsilon,
    DetectionResult, DetectorParams, FailureReason, SubcarrierClass,
};
pub use index_codec::{capacity_bits, IndexCodec, IndexMessage};
pub use linalg::projection_residual;
pub use model::{
    generate_channel, noise_variance_from_snr, ChannelTensor, ReceivedFrame, SnrConvention, SymbolMatrix, SystemConfig,
};
