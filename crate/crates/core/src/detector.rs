//! Binary-search + projection receiver.
//!
//! Each subcarrier is classified by repeatedly splitting the candidate
//! antenna columns into contiguous groups and measuring the distance from
//! `y_i` to each group's column space. A 1-sparse (private) column leaves
//! only noise in exactly one group at every level, so the search narrows to
//! a single antenna. A shared column either fits several groups at once or
//! none of them. Once the active antennas are known, shared-subcarrier
//! symbols are recovered by projecting out the other active antennas and
//! matched filtering.

use std::ops::Range;

use thiserror::Error;
use web_time::Instant;

use crate::index_codec::{CodecError, IndexCodec, IndexMessage};
use crate::linalg::{dotc, norm_sqr, residual_of_columns, PivotedQr};
use crate::model::{CMatrix, CVector, ChannelTensor, ReceivedFrame, SystemConfig, C64};
use crate::transmitter::{bits_from_symbols, shared_subcarriers};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("antenna {antenna} lies numerically inside the span of the other active antennas")]
    DegenerateProjection { antenna: usize },
    #[error("zero channel vector")]
    ZeroChannel,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubcarrierClass {
    Shared,
    Private(usize),
}

/// Why a frame could not be turned into an index message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureReason {
    None,
    WrongPrivateCount,
    DuplicateAntenna,
    UnencodableRank,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::None => "none",
            FailureReason::WrongPrivateCount => "wrong_private_count",
            FailureReason::DuplicateAntenna => "duplicate_antenna",
            FailureReason::UnencodableRank => "unencodable_rank",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            FailureReason::None,
            FailureReason::WrongPrivateCount,
            FailureReason::DuplicateAntenna,
            FailureReason::UnencodableRank,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub classes: Vec<SubcarrierClass>,
    /// Present iff `failure == FailureReason::None`.
    pub recovered_message: Option<IndexMessage>,
    /// Index bits decoded from the recovered message.
    pub recovered_bits: Option<Vec<bool>>,
    pub failure: FailureReason,
    /// Wall-clock time to classify all subcarriers.
    pub elapsed_detection_s: f64,
    /// Detection plus symbol estimation and demodulation.
    pub elapsed_total_s: f64,
}

impl DetectionResult {
    pub fn success(&self) -> bool {
        self.failure == FailureReason::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub epsilon: f64,
    pub branch_factor: usize,
}

impl DetectorParams {
    pub fn from_config(cfg: &SystemConfig, sigma2: f64) -> Self {
        DetectorParams {
            epsilon: make_epsilon(cfg, sigma2),
            branch_factor: cfg.branch_factor,
        }
    }
}

/// `sqrt(M sigma2)`, the expected noise length, plus `coeff * M`.
pub fn make_epsilon(cfg: &SystemConfig, sigma2: f64) -> f64 {
    let m = cfg.n_receive as f64;
    (m * sigma2).sqrt() + cfg.threshold_offset_coeff * m
}

/// Splits `range` into `branches` contiguous groups, larger groups first.
/// For two branches the first group has `ceil(k / 2)` columns.
pub fn split_groups(range: Range<usize>, branches: usize) -> Vec<Range<usize>> {
    let k = range.len();
    let g = branches.min(k);
    let base = k / g;
    let extra = k % g;
    let mut start = range.start;
    (0..g)
        .map(|j| {
            let len = base + usize::from(j < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn group_residual(h: &CMatrix, cols: Range<usize>, y: &[C64]) -> f64 {
    let m = h.nrows();
    let data = h.as_slice();
    residual_of_columns(m, cols.map(|j| &data[j * m..(j + 1) * m]), y)
}

/// One level of the search: the groups tried and their residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub groups: Vec<Range<usize>>,
    pub residuals: Vec<f64>,
}

/// Full record of one classification, for diagnostics and visualisation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyTrace {
    pub steps: Vec<SearchStep>,
    /// Residual of the final single column, when the search got there.
    pub terminal_residual: Option<f64>,
    pub class: SubcarrierClass,
}

fn search(h: &CMatrix, y: &[C64], params: &DetectorParams, mut record: Option<&mut Vec<SearchStep>>) -> (SubcarrierClass, Option<f64>) {
    let eps = params.epsilon;
    let mut cols = 0..h.ncols();
    let mut last_single: Option<f64> = None;
    while cols.len() > 1 {
        let groups = split_groups(cols.clone(), params.branch_factor);
        let residuals: Vec<f64> = groups.iter().map(|g| group_residual(h, g.clone(), y)).collect();
        let passing: Vec<usize> = (0..groups.len()).filter(|&j| residuals[j] <= eps).collect();
        if let Some(rec) = record.as_deref_mut() {
            rec.push(SearchStep {
                groups: groups.clone(),
                residuals: residuals.clone(),
            });
        }
        if passing.len() != 1 {
            return (SubcarrierClass::Shared, None);
        }
        let j = passing[0];
        last_single = (groups[j].len() == 1).then_some(residuals[j]);
        cols = groups[j].clone();
    }
    if cols.is_empty() {
        return (SubcarrierClass::Shared, None);
    }
    // A column reached by a split has already been tested; a lone starting
    // column still needs its own test.
    let terminal = last_single.unwrap_or_else(|| group_residual(h, cols.clone(), y));
    if terminal <= eps {
        (SubcarrierClass::Private(cols.start), Some(terminal))
    } else {
        (SubcarrierClass::Shared, Some(terminal))
    }
}

/// Classifies one subcarrier as shared or private (with its antenna).
///
/// Residuals equal to the threshold count as captured. A subcarrier whose
/// received vector fits two or more groups, or none, is shared.
pub fn classify_subcarrier(h: &CMatrix, y: &CVector, params: &DetectorParams) -> SubcarrierClass {
    search(h, y.as_slice(), params, None).0
}

pub fn classify_subcarrier_traced(h: &CMatrix, y: &CVector, params: &DetectorParams) -> ClassifyTrace {
    let mut steps = Vec::new();
    let (class, terminal_residual) = search(h, y.as_slice(), params, Some(&mut steps));
    ClassifyTrace {
        steps,
        terminal_residual,
        class,
    }
}

fn check_dims(y: &ReceivedFrame, h: &ChannelTensor) -> Result<(), DetectError> {
    let (m, _, l) = h.dims();
    if y.y.shape() != (m, l) {
        return Err(DetectError::DimensionMismatch(format!(
            "received frame is {:?}, channel expects {:?}",
            y.y.shape(),
            (m, l)
        )));
    }
    Ok(())
}

/// Frame-level validation shared by every classifier: exactly `Nx` private
/// subcarriers mapped to `Nx` distinct antennas, and a decodable rank.
pub(crate) fn assemble_result(classes: Vec<SubcarrierClass>, codec: &IndexCodec, n_active: usize, elapsed: f64) -> DetectionResult {
    let mut pairs: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c {
            SubcarrierClass::Private(a) => Some((*a, i)),
            SubcarrierClass::Shared => None,
        })
        .collect();
    let fail = |failure| DetectionResult {
        classes: classes.clone(),
        recovered_message: None,
        recovered_bits: None,
        failure,
        elapsed_detection_s: elapsed,
        elapsed_total_s: elapsed,
    };
    if pairs.len() != n_active {
        return fail(FailureReason::WrongPrivateCount);
    }
    pairs.sort_unstable();
    if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
        return fail(FailureReason::DuplicateAntenna);
    }
    let msg = IndexMessage {
        active_antennas: pairs.iter().map(|p| p.0).collect(),
        private_subcarriers: pairs.iter().map(|p| p.1).collect(),
    };
    match codec.decode(&msg) {
        Ok(bits) => DetectionResult {
            classes,
            recovered_message: Some(msg),
            recovered_bits: Some(bits),
            failure: FailureReason::None,
            elapsed_detection_s: elapsed,
            elapsed_total_s: elapsed,
        },
        Err(CodecError::UnencodableMessage { .. }) => fail(FailureReason::UnencodableRank),
        // Any other codec error means a malformed message, which the checks
        // above already rule out.
        Err(_) => fail(FailureReason::DuplicateAntenna),
    }
}

/// Classifies every subcarrier and recovers the index message.
pub fn detect_frame(y: &ReceivedFrame, h: &ChannelTensor, cfg: &SystemConfig, params: &DetectorParams) -> Result<DetectionResult, DetectError> {
    check_dims(y, h)?;
    let codec = IndexCodec::from_config(cfg).map_err(|e| DetectError::DimensionMismatch(e.to_string()))?;
    let (_, _, l) = h.dims();
    let start = Instant::now();
    let classes: Vec<SubcarrierClass> = (0..l)
        .map(|i| search(h.slice(i), y.y.column(i).as_slice(), params, None).0)
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    Ok(assemble_result(classes, &codec, cfg.n_active, elapsed))
}

/// Zero-forcing matched filter per active antenna: project out the other
/// active antennas, then `h^H P y / ||P h||^2`.
///
/// Output `k` is the estimate for `antennas[k]`. Estimates are unsliced.
pub fn estimate_shared_symbols(h: &CMatrix, y: &CVector, antennas: &[usize]) -> Result<Vec<C64>, DetectError> {
    let m = h.nrows();
    if y.len() != m {
        return Err(DetectError::DimensionMismatch(format!("y has {} rows, channel has {m}", y.len())));
    }
    let data = h.as_slice();
    let column = |j: usize| &data[j * m..(j + 1) * m];
    antennas
        .iter()
        .map(|&n| {
            let others = antennas.iter().copied().filter(|&a| a != n);
            let qr = PivotedQr::from_columns(m, others.map(column));
            let ph = qr.complement_coords(column(n));
            let denom = norm_sqr(&ph);
            if denom < 1e-12 {
                return Err(DetectError::DegenerateProjection { antenna: n });
            }
            let py = qr.complement_coords(y.as_slice());
            Ok(dotc(&ph, &py) / denom)
        })
        .collect()
}

/// Matched filter for a single active antenna: `h^H y / ||h||^2`.
pub fn estimate_private_symbol(h: &[C64], y: &[C64]) -> Result<C64, DetectError> {
    let denom = norm_sqr(h);
    if denom == 0.0 {
        return Err(DetectError::ZeroChannel);
    }
    Ok(dotc(h, y) / denom)
}

/// Detection result together with the full recovered bit stream
/// (index, private, shared), when detection succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecode {
    pub result: DetectionResult,
    pub bits: Option<Vec<bool>>,
}

/// Symbol estimation and demodulation for a known index message.
pub fn recover_payload(y: &ReceivedFrame, h: &ChannelTensor, msg: &IndexMessage, cfg: &SystemConfig) -> Result<(Vec<bool>, Vec<bool>), DetectError> {
    let (m, _, l) = h.dims();
    let private = msg
        .active_antennas
        .iter()
        .zip(&msg.private_subcarriers)
        .map(|(&a, &s)| {
            let hs = h.slice(s).as_slice();
            estimate_private_symbol(&hs[a * m..(a + 1) * m], y.y.column(s).as_slice())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let shared = shared_subcarriers(msg, l)
        .into_iter()
        .map(|s| estimate_shared_symbols(h.slice(s), &y.column(s), &msg.active_antennas))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(bits_from_symbols(&private, &shared, cfg.n_active))
}

/// Full receiver chain: detection, symbol estimation and bit recovery.
pub fn decode_frame(y: &ReceivedFrame, h: &ChannelTensor, cfg: &SystemConfig, params: &DetectorParams) -> Result<FrameDecode, DetectError> {
    let start = Instant::now();
    let mut result = detect_frame(y, h, cfg, params)?;
    let bits = finish_decode(y, h, cfg, &result);
    result.elapsed_total_s = start.elapsed().as_secs_f64();
    Ok(FrameDecode { result, bits })
}

/// Payload recovery after any successful detection. Degenerate projections
/// (fewer receive antennas than active ones) yield no bits.
pub(crate) fn finish_decode(y: &ReceivedFrame, h: &ChannelTensor, cfg: &SystemConfig, result: &DetectionResult) -> Option<Vec<bool>> {
    let msg = result.recovered_message.as_ref()?;
    let (private_bits, shared_bits) = recover_payload(y, h, msg, cfg).ok()?;
    let mut bits = result.recovered_bits.clone()?;
    bits.extend(private_bits);
    bits.extend(shared_bits);
    Some(bits)
}
