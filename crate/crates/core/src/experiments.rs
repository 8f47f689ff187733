//! Monte Carlo harness: trials, sweeps over receive antennas and SNR, the
//! paired comparison against the sparse-recovery baseline, rate accounting
//! and CSV output.
//!
//! Every trial derives its channel, index bits, payload and noise from
//! independent substreams of `(base_seed, trial_index)`, so results do not
//! depend on scheduling or worker count. Only detection is timed.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::detector::{detect_frame, finish_decode, DetectError, DetectionResult, DetectorParams, FailureReason};
use crate::index_codec::{CodecError, IndexCodec, IndexMessage};
use crate::model::{generate_channel, noise_variance_from_snr, substream, ChannelTensor, ModelError, Purpose, ReceivedFrame, SystemConfig};
use crate::ssr_baseline::{ssr_detect_frame, BpdnSettings, SsrError};
use crate::transmitter::{build_symbol_matrix, transmit_frame, PayloadBits, PayloadSizes, TxError};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Rates quoted in the original evaluation, shown next to ours.
pub const REPORTED_LOSS_BPS: f64 = 11.44e6;
pub const REPORTED_RECOVERED_BPS: f64 = 8.01e6;

pub const SWEEP_HEADER: [&str; 9] = [
    "m",
    "snr_db",
    "method",
    "n_trials",
    "detection_probability",
    "ci_low",
    "ci_high",
    "mean_runtime_s",
    "runtime_stddev_s",
];

pub const TRIAL_HEADER: [&str; 10] = [
    "trial_index",
    "method",
    "m",
    "snr_db",
    "success",
    "failure_reason",
    "detection_time_s",
    "index_bits_correct",
    "payload_bit_errors",
    "payload_bits_total",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Tx(#[from] TxError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Ssr(#[from] SsrError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Projection,
    Ssr,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Projection => "projection",
            Method::Ssr => "ssr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "projection" => Some(Method::Projection),
            "ssr" => Some(Method::Ssr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub method: Method,
    pub m: usize,
    pub snr_db: f64,
    pub success: bool,
    pub failure_reason: FailureReason,
    pub detection_time_s: f64,
    pub index_bits_correct: bool,
    /// Errors over the payload bits. Failed detections decode no payload and
    /// record zero of zero.
    pub payload_bit_errors: usize,
    pub payload_bits_total: usize,
    /// Fingerprint of the channel tensor the trial used; not serialized.
    pub channel_checksum: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub m: usize,
    pub snr_db: f64,
    pub method: Method,
    pub n_trials: usize,
    pub detection_probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_runtime_s: f64,
    pub runtime_stddev_s: f64,
}

/// Knobs that are not part of the physical configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessSettings {
    pub n_trials: usize,
    /// `Some(1)` runs serially; `None` uses every available core.
    pub workers: Option<usize>,
    /// Overrides the SNR-derived noise variance, e.g. `Some(0.0)`.
    pub noise_variance: Option<f64>,
    /// Overrides the detection threshold.
    pub epsilon: Option<f64>,
    pub bpdn: BpdnSettings,
    /// Run one discarded trial per grid point before timing.
    pub warmup: bool,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        HarnessSettings {
            n_trials: 1000,
            workers: None,
            noise_variance: None,
            epsilon: None,
            bpdn: BpdnSettings::default(),
            warmup: true,
        }
    }
}

impl HarnessSettings {
    pub fn with_trials(mut self, n: usize) -> Self {
        self.n_trials = n;
        self
    }
}

/// One draw of everything a trial transmits and receives.
#[derive(Debug, Clone)]
pub struct Realization {
    pub channel: ChannelTensor,
    pub message: IndexMessage,
    pub payload: PayloadBits,
    pub frame: ReceivedFrame,
}

impl Realization {
    pub fn draw(cfg: &SystemConfig, sigma2: f64, trial_index: u64) -> Result<Self, ExperimentError> {
        let codec = IndexCodec::from_config(cfg)?;
        let channel = generate_channel(cfg, &mut substream(cfg.base_seed, trial_index, Purpose::Channel));
        let sizes = PayloadSizes::new(cfg, codec.capacity());
        let mut payload = PayloadBits::random(sizes, &mut substream(cfg.base_seed, trial_index, Purpose::Payload));
        let mut index_rng = substream(cfg.base_seed, trial_index, Purpose::IndexBits);
        payload.index_bits = (0..codec.capacity()).map(|_| rand::Rng::random::<bool>(&mut index_rng)).collect();
        let message = codec.encode(&payload.index_bits)?;
        let d = build_symbol_matrix(&payload, &message, cfg)?;
        let frame = transmit_frame(&d, &channel, sigma2, &mut substream(cfg.base_seed, trial_index, Purpose::Noise))?;
        Ok(Realization {
            channel,
            message,
            payload,
            frame,
        })
    }
}

fn trial_noise(cfg: &SystemConfig, settings: &HarnessSettings) -> f64 {
    settings.noise_variance.unwrap_or_else(|| noise_variance_from_snr(cfg))
}

fn detector_params(cfg: &SystemConfig, settings: &HarnessSettings, sigma2: f64) -> DetectorParams {
    let mut p = DetectorParams::from_config(cfg, sigma2);
    if let Some(eps) = settings.epsilon {
        p.epsilon = eps;
    }
    p
}

/// Decodes an existing realization with one method.
pub fn evaluate(
    cfg: &SystemConfig,
    settings: &HarnessSettings,
    real: &Realization,
    method: Method,
    trial_index: u64,
) -> Result<TrialRecord, ExperimentError> {
    let sigma2 = real.frame.noise_variance;
    let result: DetectionResult = match method {
        Method::Projection => detect_frame(&real.frame, &real.channel, cfg, &detector_params(cfg, settings, sigma2))?,
        Method::Ssr => ssr_detect_frame(&real.frame, &real.channel, cfg, &settings.bpdn)?,
    };
    let index_bits_correct = result.recovered_bits.as_deref() == Some(real.payload.index_bits.as_slice());
    let success = result.recovered_message.as_ref() == Some(&real.message);
    let (mut errors, mut total) = (0, 0);
    if success {
        let sent = real.payload.concat();
        let n_index = real.payload.index_bits.len();
        total = sent.len() - n_index;
        errors = match finish_decode(&real.frame, &real.channel, cfg, &result) {
            Some(bits) => bits[n_index..].iter().zip(&sent[n_index..]).filter(|(a, b)| a != b).count(),
            None => total,
        };
    }
    Ok(TrialRecord {
        trial_index,
        method,
        m: cfg.n_receive,
        snr_db: cfg.snr_db,
        success,
        failure_reason: result.failure,
        detection_time_s: result.elapsed_detection_s,
        index_bits_correct,
        payload_bit_errors: errors,
        payload_bits_total: total,
        channel_checksum: real.channel.checksum(),
    })
}

/// Draws a fresh realization for `trial_index` and decodes it.
pub fn run_trial(cfg: &SystemConfig, settings: &HarnessSettings, method: Method, trial_index: u64) -> Result<TrialRecord, ExperimentError> {
    let real = Realization::draw(cfg, trial_noise(cfg, settings), trial_index)?;
    evaluate(cfg, settings, &real, method, trial_index)
}

/// All methods on the same realization, in the given order.
pub fn run_paired_trial(
    cfg: &SystemConfig,
    settings: &HarnessSettings,
    methods: &[Method],
    trial_index: u64,
) -> Result<Vec<TrialRecord>, ExperimentError> {
    let real = Realization::draw(cfg, trial_noise(cfg, settings), trial_index)?;
    methods.iter().map(|&m| evaluate(cfg, settings, &real, m, trial_index)).collect()
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    ((center - half).clamp(0.0, 1.0).min(p), (center + half).clamp(0.0, 1.0).max(p))
}

/// Aggregates the records of one `(m, snr, method)` cell.
pub fn summarize(m: usize, snr_db: f64, method: Method, records: &[TrialRecord]) -> SweepPoint {
    let n = records.len();
    let k = records.iter().filter(|r| r.success).count();
    let (ci_low, ci_high) = wilson_interval(k, n);
    let times: Vec<f64> = records.iter().map(|r| r.detection_time_s).collect();
    let mean = if n > 0 { times.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let var = if n > 1 {
        times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    SweepPoint {
        m,
        snr_db,
        method,
        n_trials: n,
        detection_probability: if n > 0 { k as f64 / n as f64 } else { 0.0 },
        ci_low,
        ci_high,
        mean_runtime_s: mean,
        runtime_stddev_s: var.sqrt(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutput {
    /// Sorted by `(m, snr_db, method)`.
    pub points: Vec<SweepPoint>,
    /// Sorted by `(m, snr_db, trial_index, method)`.
    pub records: Vec<TrialRecord>,
}

impl SweepOutput {
    pub fn point(&self, m: usize, snr_db: f64, method: Method) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.m == m && p.snr_db == snr_db && p.method == method)
    }
}

fn run_indexed<T, F>(n: usize, workers: Option<usize>, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, ExperimentError> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers != Some(1) {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                builder = builder.num_threads(w);
            }
            let pool = builder.build().map_err(|e| ExperimentError::Pool(e.to_string()))?;
            return pool.install(|| (0..n as u64).into_par_iter().map(&f).collect());
        }
    }
    let _ = workers;
    (0..n as u64).map(f).collect()
}

/// Runs `methods` on paired realizations at every `(m, snr)` grid cell.
pub fn run_grid(
    cfg_base: &SystemConfig,
    grid: &[(usize, f64)],
    methods: &[Method],
    settings: &HarnessSettings,
) -> Result<SweepOutput, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::EmptyGrid("grid"));
    }
    if methods.is_empty() {
        return Err(ExperimentError::EmptyGrid("methods"));
    }
    let mut out = SweepOutput::default();
    for &(m, snr) in grid {
        let cfg = cfg_base.clone().with_receive(m).with_snr(snr);
        cfg.validate()?;
        if settings.warmup {
            run_paired_trial(&cfg, settings, methods, u64::MAX)?;
        }
        let per_trial = run_indexed(settings.n_trials, settings.workers, |t| run_paired_trial(&cfg, settings, methods, t))?;
        let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
        for &method in methods {
            let cell: Vec<TrialRecord> = records.iter().filter(|r| r.method == method).cloned().collect();
            out.points.push(summarize(m, snr, method, &cell));
        }
        out.records.extend(records);
    }
    out.points
        .sort_by(|a, b| a.m.cmp(&b.m).then(a.snr_db.total_cmp(&b.snr_db)).then(a.method.cmp(&b.method)));
    out.records.sort_by(|a, b| {
        a.m.cmp(&b.m)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.trial_index.cmp(&b.trial_index))
            .then(a.method.cmp(&b.method))
    });
    Ok(out)
}

/// Receive antennas swept in the first experiment, 16 to 64 in steps of 2.
pub fn default_m_grid() -> Vec<usize> {
    (16..=64).step_by(2).collect()
}

/// SNR grid for the second experiment, -5 dB to 10 dB.
pub fn default_snr_grid() -> Vec<f64> {
    (-5..=10).map(f64::from).collect()
}

/// Receive-antenna grid for the second experiment.
pub fn default_snr_m_grid() -> Vec<usize> {
    vec![16, 32, 48, 64]
}

/// Projection method over `m_values` at the configured SNR.
pub fn sweep_m(cfg_base: &SystemConfig, m_values: &[usize], settings: &HarnessSettings) -> Result<SweepOutput, ExperimentError> {
    if m_values.is_empty() {
        return Err(ExperimentError::EmptyGrid("m_values"));
    }
    let grid: Vec<(usize, f64)> = m_values.iter().map(|&m| (m, cfg_base.snr_db)).collect();
    run_grid(cfg_base, &grid, &[Method::Projection], settings)
}

/// Projection method over the full `snr x m` grid.
pub fn sweep_snr(
    cfg_base: &SystemConfig,
    snr_values: &[f64],
    m_values: &[usize],
    settings: &HarnessSettings,
) -> Result<SweepOutput, ExperimentError> {
    if snr_values.is_empty() || m_values.is_empty() {
        return Err(ExperimentError::EmptyGrid("snr_values x m_values"));
    }
    let grid: Vec<(usize, f64)> = m_values
        .iter()
        .flat_map(|&m| snr_values.iter().map(move |&s| (m, s)))
        .collect();
    run_grid(cfg_base, &grid, &[Method::Projection], settings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub output: SweepOutput,
    /// `(snr_db, mean ssr runtime / mean projection runtime)`.
    pub runtime_ratios: Vec<(f64, f64)>,
    /// Every trial fed both methods the same channel.
    pub paired: bool,
}

/// Both methods on identical realizations at the configured `M`.
pub fn compare_ssr(cfg_base: &SystemConfig, snr_values: &[f64], settings: &HarnessSettings) -> Result<Comparison, ExperimentError> {
    if snr_values.is_empty() {
        return Err(ExperimentError::EmptyGrid("snr_values"));
    }
    if cfg_base.n_receive >= cfg_base.n_transmit {
        log::warn!(
            "comparison at M = {} >= Nt = {}: the sparse-recovery baseline targets M < Nt",
            cfg_base.n_receive,
            cfg_base.n_transmit
        );
    }
    let grid: Vec<(usize, f64)> = snr_values.iter().map(|&s| (cfg_base.n_receive, s)).collect();
    let output = run_grid(cfg_base, &grid, &[Method::Projection, Method::Ssr], settings)?;
    let runtime_ratios = snr_values
        .iter()
        .map(|&s| {
            let p = output.point(cfg_base.n_receive, s, Method::Projection).map_or(0.0, |p| p.mean_runtime_s);
            let q = output.point(cfg_base.n_receive, s, Method::Ssr).map_or(0.0, |p| p.mean_runtime_s);
            (s, if p > 0.0 { q / p } else { f64::INFINITY })
        })
        .collect();
    let paired = output.records.chunks(2).all(|pair| match pair {
        [a, b] => a.trial_index == b.trial_index && a.snr_db == b.snr_db && a.channel_checksum == b.channel_checksum,
        _ => false,
    });
    Ok(Comparison {
        output,
        runtime_ratios,
        paired,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub capacity_bits_per_symbol: usize,
    pub rate_loss_bits_per_symbol: usize,
    pub recovered_rate_bps: f64,
    pub loss_rate_bps: f64,
    pub reported_recovered_bps: f64,
    pub reported_loss_bps: f64,
    pub ofdm_symbol_duration_s: f64,
    pub n_ofdm_symbols: usize,
}

pub fn rate_report(cfg: &SystemConfig) -> Result<RateReport, ExperimentError> {
    cfg.validate()?;
    let capacity = IndexCodec::from_config(cfg)?.capacity();
    let loss = cfg.bits_per_symbol * cfg.n_active * (cfg.n_active - 1);
    let tp = cfg.ofdm_symbol_duration_s;
    Ok(RateReport {
        capacity_bits_per_symbol: capacity,
        rate_loss_bits_per_symbol: loss,
        recovered_rate_bps: capacity as f64 / tp,
        loss_rate_bps: loss as f64 / tp,
        reported_recovered_bps: REPORTED_RECOVERED_BPS,
        reported_loss_bps: REPORTED_LOSS_BPS,
        ofdm_symbol_duration_s: tp,
        n_ofdm_symbols: cfg.n_ofdm_symbols,
    })
}

impl RateReport {
    /// Whether the computed rates differ from the quoted ones by more than
    /// 0.5%.
    pub fn loss_discrepancy(&self) -> bool {
        (self.loss_rate_bps - self.reported_loss_bps).abs() > 5e-3 * self.reported_loss_bps
    }

    pub fn recovered_discrepancy(&self) -> bool {
        (self.recovered_rate_bps - self.reported_recovered_bps).abs() > 5e-3 * self.reported_recovered_bps
    }

    pub fn key_values(&self) -> String {
        format!(
            "capacity_bits_per_symbol={} rate_loss_bits_per_symbol={} recovered_rate_bps={:.3} loss_rate_bps={:.3} \
             reported_recovered_bps={:.3} reported_loss_bps={:.3} recovered_discrepancy={} loss_discrepancy={}",
            self.capacity_bits_per_symbol,
            self.rate_loss_bits_per_symbol,
            self.recovered_rate_bps,
            self.loss_rate_bps,
            self.reported_recovered_bps,
            self.reported_loss_bps,
            self.recovered_discrepancy(),
            self.loss_discrepancy(),
        )
    }

    pub fn to_text(&self) -> String {
        let flag = |d: bool| if d { "MISMATCH" } else { "ok" };
        let mut s = String::new();
        let _ = writeln!(s, "quantity                 bits/symbol   computed Mbit/s   reported Mbit/s   status");
        let _ = writeln!(
            s,
            "index capacity (recov.)  {:>11}   {:>15.3}   {:>15.3}   {}",
            self.capacity_bits_per_symbol,
            self.recovered_rate_bps / 1e6,
            self.reported_recovered_bps / 1e6,
            flag(self.recovered_discrepancy())
        );
        let _ = writeln!(
            s,
            "sharing rate loss        {:>11}   {:>15.3}   {:>15.3}   {}",
            self.rate_loss_bits_per_symbol,
            self.loss_rate_bps / 1e6,
            self.reported_loss_bps / 1e6,
            flag(self.loss_discrepancy())
        );
        let _ = writeln!(
            s,
            "symbol duration {} s; index bits per {}-symbol block: {}",
            self.ofdm_symbol_duration_s,
            self.n_ofdm_symbols,
            self.capacity_bits_per_symbol * self.n_ofdm_symbols
        );
        if self.recovered_discrepancy() || self.loss_discrepancy() {
            let _ = writeln!(
                s,
                "note: the reported rates do not follow from capacity/Tp and Q*Nx*(Nx-1)/Tp; both are shown unchanged."
            );
        }
        let _ = writeln!(s, "{}", self.key_values());
        s
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer_for(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ExperimentError> {
    let file = File::create(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<(), ExperimentError> {
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_sweep_csv(points: &[SweepPoint], path: &Path) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer_for(path)?;
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.m.to_string(),
            fmt_f64(p.snr_db),
            p.method.as_str().to_string(),
            p.n_trials.to_string(),
            fmt_f64(p.detection_probability),
            fmt_f64(p.ci_low),
            fmt_f64(p.ci_high),
            fmt_f64(p.mean_runtime_s),
            fmt_f64(p.runtime_stddev_s),
        ])
        .map_err(csv_err)?;
    }
    finish(w, path)
}

pub fn write_trial_csv(records: &[TrialRecord], path: &Path) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer_for(path)?;
    w.write_record(TRIAL_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.trial_index.to_string(),
            r.method.as_str().to_string(),
            r.m.to_string(),
            fmt_f64(r.snr_db),
            r.success.to_string(),
            r.failure_reason.as_str().to_string(),
            fmt_f64(r.detection_time_s),
            r.index_bits_correct.to_string(),
            r.payload_bit_errors.to_string(),
            r.payload_bits_total.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w, path)
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, ExperimentError> {
    let file = File::open(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file));
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let found = r.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(ExperimentError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, ExperimentError> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| ExperimentError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad value for {name}"),
    })
}

fn method_field(path: &Path, line: u64, rec: &csv::StringRecord, i: usize) -> Result<Method, ExperimentError> {
    rec.get(i).and_then(Method::parse).ok_or_else(|| ExperimentError::Parse {
        path: path.to_path_buf(),
        line,
        message: "bad value for method".into(),
    })
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepPoint>, ExperimentError> {
    read_rows(path, &SWEEP_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(SweepPoint {
                m: field(path, line, &rec, 0, "m")?,
                snr_db: field(path, line, &rec, 1, "snr_db")?,
                method: method_field(path, line, &rec, 2)?,
                n_trials: field(path, line, &rec, 3, "n_trials")?,
                detection_probability: field(path, line, &rec, 4, "detection_probability")?,
                ci_low: field(path, line, &rec, 5, "ci_low")?,
                ci_high: field(path, line, &rec, 6, "ci_high")?,
                mean_runtime_s: field(path, line, &rec, 7, "mean_runtime_s")?,
                runtime_stddev_s: field(path, line, &rec, 8, "runtime_stddev_s")?,
            })
        })
        .collect()
}

/// Reads a trial CSV. The channel checksum is not stored and reads as 0.
pub fn read_trial_csv(path: &Path) -> Result<Vec<TrialRecord>, ExperimentError> {
    read_rows(path, &TRIAL_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let reason = rec.get(5).and_then(FailureReason::parse).ok_or_else(|| ExperimentError::Parse {
                path: path.to_path_buf(),
                line,
                message: "bad value for failure_reason".into(),
            })?;
            Ok(TrialRecord {
                trial_index: field(path, line, &rec, 0, "trial_index")?,
                method: method_field(path, line, &rec, 1)?,
                m: field(path, line, &rec, 2, "m")?,
                snr_db: field(path, line, &rec, 3, "snr_db")?,
                success: field(path, line, &rec, 4, "success")?,
                failure_reason: reason,
                detection_time_s: field(path, line, &rec, 6, "detection_time_s")?,
                index_bits_correct: field(path, line, &rec, 7, "index_bits_correct")?,
                payload_bit_errors: field(path, line, &rec, 8, "payload_bit_errors")?,
                payload_bits_total: field(path, line, &rec, 9, "payload_bits_total")?,
                channel_checksum: 0,
            })
        })
        .collect()
}
