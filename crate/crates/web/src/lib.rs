//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated type
//! definitions. Errors come back as `{"error": "..."}`.

use serde_json::{json, Value};
use ssdfrc_core::detector::{classify_subcarrier_traced, DetectorParams, SubcarrierClass};
use ssdfrc_core::experiments::{run_grid, HarnessSettings, Method, Realization};
use ssdfrc_core::index_codec::IndexCodec;
use ssdfrc_core::model::{noise_variance_from_snr, SystemConfig};
use ssdfrc_core::transmitter::shared_subcarriers;
use wasm_bindgen::prelude::wasm_bindgen;

fn config(m: usize, snr_db: f64, seed: u64) -> Result<SystemConfig, String> {
    let mut cfg = SystemConfig::table1().with_receive(m).with_snr(snr_db);
    cfg.base_seed = seed;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn class_json(c: SubcarrierClass) -> Value {
    match c {
        SubcarrierClass::Shared => json!({ "kind": "shared" }),
        SubcarrierClass::Private(a) => json!({ "kind": "private", "antenna": a }),
    }
}

fn render(result: Result<Value, String>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Binary-search trace for one subcarrier of a random frame: the groups
/// tried at each level with their residuals, the threshold, and the
/// outcome next to the ground truth.
#[wasm_bindgen]
pub fn trace_subcarrier(m: usize, snr_db: f64, seed: u64, private: bool) -> String {
    render((|| {
        let cfg = config(m, snr_db, seed)?;
        let sigma2 = noise_variance_from_snr(&cfg);
        let real = Realization::draw(&cfg, sigma2, 0).map_err(|e| e.to_string())?;
        let (subcarrier, truth) = if private {
            (real.message.private_subcarriers[0], SubcarrierClass::Private(real.message.active_antennas[0]))
        } else {
            let shared = shared_subcarriers(&real.message, cfg.n_subcarriers);
            (shared[0], SubcarrierClass::Shared)
        };
        let params = DetectorParams::from_config(&cfg, sigma2);
        let trace = classify_subcarrier_traced(real.channel.slice(subcarrier), &real.frame.column(subcarrier), &params);
        let steps: Vec<Value> = trace
            .steps
            .iter()
            .map(|s| {
                json!({
                    "groups": s.groups.iter().map(|g| [g.start, g.end]).collect::<Vec<_>>(),
                    "residuals": s.residuals,
                })
            })
            .collect();
        Ok(json!({
            "subcarrier": subcarrier,
            "n_transmit": cfg.n_transmit,
            "epsilon": params.epsilon,
            "noise_variance": sigma2,
            "steps": steps,
            "terminal_residual": trace.terminal_residual,
            "class": class_json(trace.class),
            "truth": class_json(truth),
        }))
    })())
}

/// Detection probability with 95% Wilson bounds at each SNR on a grid.
#[wasm_bindgen]
pub fn detection_curve(m: usize, snr_from: f64, snr_to: f64, snr_step: f64, trials: usize, seed: u64) -> String {
    render((|| {
        if !(snr_step > 0.0) || snr_to < snr_from {
            return Err("need snr_step > 0 and snr_to >= snr_from".into());
        }
        if trials == 0 {
            return Err("need at least one trial".into());
        }
        let cfg = config(m, snr_from, seed)?;
        let n = ((snr_to - snr_from) / snr_step + 1e-9).floor() as usize + 1;
        let grid: Vec<(usize, f64)> = (0..n).map(|i| (m, snr_from + i as f64 * snr_step)).collect();
        let settings = HarnessSettings {
            n_trials: trials,
            workers: Some(1),
            warmup: false,
            ..Default::default()
        };
        let out = run_grid(&cfg, &grid, &[Method::Projection], &settings).map_err(|e| e.to_string())?;
        let points: Vec<Value> = out
            .points
            .iter()
            .map(|p| {
                json!({
                    "snr_db": p.snr_db,
                    "probability": p.detection_probability,
                    "ci_low": p.ci_low,
                    "ci_high": p.ci_high,
                    "mean_runtime_s": p.mean_runtime_s,
                })
            })
            .collect();
        Ok(json!({ "m": m, "trials": trials, "points": points }))
    })())
}

/// Maps a string of `0`/`1` characters to active antennas and their
/// private subcarriers at the reference sizes. Shorter inputs are
/// left-padded with zeros.
#[wasm_bindgen]
pub fn encode_index_bits(bits: &str) -> String {
    render((|| {
        let cfg = SystemConfig::table1();
        let codec = IndexCodec::from_config(&cfg).map_err(|e| e.to_string())?;
        let width = codec.capacity();
        let mut parsed = Vec::with_capacity(width);
        for c in bits.chars().filter(|c| !c.is_whitespace()) {
            match c {
                '0' => parsed.push(false),
                '1' => parsed.push(true),
                other => return Err(format!("unexpected character {other:?}")),
            }
        }
        if parsed.len() > width {
            return Err(format!("at most {width} bits fit in one symbol"));
        }
        let mut padded = vec![false; width - parsed.len()];
        padded.extend(parsed);
        let msg = codec.encode(&padded).map_err(|e| e.to_string())?;
        let back = codec.decode(&msg).map_err(|e| e.to_string())?;
        Ok(json!({
            "capacity": width,
            "n_transmit": cfg.n_transmit,
            "n_subcarriers": cfg.n_subcarriers,
            "bits": padded.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>(),
            "active_antennas": msg.active_antennas,
            "private_subcarriers": msg.private_subcarriers,
            "roundtrip": back == padded,
        }))
    })())
}
