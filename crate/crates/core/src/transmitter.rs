//! Payload layout, QPSK mapping and the per-subcarrier channel `y_i = H_i d_i + w`.
//!
//! Layout: the `k`-th active antenna carries the `k`-th shared stream on the
//! shared subcarriers in ascending order, and the `k`-th private symbol on
//! `private_subcarriers[k]`.

use rand::Rng;
use thiserror::Error;

use crate::index_codec::IndexMessage;
use crate::model::{add_awgn, CMatrix, CVector, ChannelTensor, ReceivedFrame, SymbolMatrix, SystemConfig, C64};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TxError {
    #[error("QPSK needs an even number of bits, got {0}")]
    OddBitCount(usize),
    #[error("{what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The `Nx + 1` source streams of one OFDM symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadBits {
    /// `Nx` streams back to back, `(L - Nx) * Q` bits each.
    pub shared_bits: Vec<bool>,
    /// `Q` bits per private subcarrier, in pairing order.
    pub private_bits: Vec<bool>,
    /// Index-modulation bits.
    pub index_bits: Vec<bool>,
}

/// Bit counts per stream for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadSizes {
    pub shared: usize,
    pub private: usize,
    pub index: usize,
}

impl PayloadSizes {
    pub fn new(cfg: &SystemConfig, index_bits: usize) -> Self {
        let q = cfg.bits_per_symbol;
        PayloadSizes {
            shared: (cfg.n_subcarriers - cfg.n_active) * cfg.n_active * q,
            private: cfg.n_active * q,
            index: index_bits,
        }
    }

    /// Symbol-carried bits, excluding the index stream.
    pub fn symbol_bits(&self) -> usize {
        self.shared + self.private
    }
}

impl PayloadBits {
    pub fn random<R: Rng + ?Sized>(sizes: PayloadSizes, rng: &mut R) -> Self {
        let mut draw = |n: usize| (0..n).map(|_| rng.random::<bool>()).collect::<Vec<_>>();
        let index_bits = draw(sizes.index);
        let private_bits = draw(sizes.private);
        let shared_bits = draw(sizes.shared);
        PayloadBits {
            shared_bits,
            private_bits,
            index_bits,
        }
    }

    pub fn check(&self, sizes: PayloadSizes) -> Result<(), TxError> {
        for (what, expected, got) in [
            ("shared bits", sizes.shared, self.shared_bits.len()),
            ("private bits", sizes.private, self.private_bits.len()),
            ("index bits", sizes.index, self.index_bits.len()),
        ] {
            if expected != got {
                return Err(TxError::LengthMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    /// Index, private, then shared bits: the receiver's output order.
    pub fn concat(&self) -> Vec<bool> {
        let mut out = self.index_bits.clone();
        out.extend_from_slice(&self.private_bits);
        out.extend_from_slice(&self.shared_bits);
        out
    }
}

/// Gray-mapped unit-energy QPSK: the first bit of a pair selects the sign of
/// the imaginary part, the second the sign of the real part.
pub fn qpsk_modulate(bits: &[bool]) -> Result<Vec<C64>, TxError> {
    if bits.len() % 2 != 0 {
        return Err(TxError::OddBitCount(bits.len()));
    }
    Ok(bits.chunks_exact(2).map(|p| qpsk_symbol(p[0], p[1])).collect())
}

#[inline]
pub fn qpsk_symbol(b0: bool, b1: bool) -> C64 {
    let re = if b1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    let im = if b0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    C64::new(re, im)
}

/// Minimum-distance hard decision. Zero components decide bit 0.
pub fn qpsk_demodulate(symbols: &[C64]) -> Vec<bool> {
    symbols.iter().flat_map(|s| [s.im < 0.0, s.re < 0.0]).collect()
}

/// Shared subcarrier indices (those not in the message) in ascending order.
pub fn shared_subcarriers(msg: &IndexMessage, n_subcarriers: usize) -> Vec<usize> {
    let mut private = vec![false; n_subcarriers];
    for &s in &msg.private_subcarriers {
        private[s] = true;
    }
    (0..n_subcarriers).filter(|&i| !private[i]).collect()
}

pub fn build_symbol_matrix(payload: &PayloadBits, msg: &IndexMessage, cfg: &SystemConfig) -> Result<SymbolMatrix, TxError> {
    let sizes = PayloadSizes::new(cfg, payload.index_bits.len());
    payload.check(sizes)?;
    msg.validate(cfg.n_transmit, cfg.n_active, cfg.n_subcarriers)
        .map_err(|e| TxError::DimensionMismatch(e.to_string()))?;

    let mut d = CMatrix::zeros(cfg.n_transmit, cfg.n_subcarriers);
    let private_syms = qpsk_modulate(&payload.private_bits)?;
    for (k, (&ant, &sub)) in msg.active_antennas.iter().zip(&msg.private_subcarriers).enumerate() {
        d[(ant, sub)] = private_syms[k];
    }

    let shared = shared_subcarriers(msg, cfg.n_subcarriers);
    let per_stream = shared.len() * cfg.bits_per_symbol;
    for (k, &ant) in msg.active_antennas.iter().enumerate() {
        let stream = qpsk_modulate(&payload.shared_bits[k * per_stream..(k + 1) * per_stream])?;
        for (&sub, s) in shared.iter().zip(stream) {
            d[(ant, sub)] = s;
        }
    }
    Ok(SymbolMatrix(d))
}

/// Demodulates per-antenna symbol estimates back into (private, shared) bits.
///
/// `private[k]` is the estimate on `private_subcarriers[k]`; `shared[j][k]`
/// is antenna `k`'s estimate on the `j`-th shared subcarrier.
pub fn bits_from_symbols(private: &[C64], shared: &[Vec<C64>], n_active: usize) -> (Vec<bool>, Vec<bool>) {
    let private_bits = qpsk_demodulate(private);
    let mut shared_bits = Vec::with_capacity(shared.len() * n_active * 2);
    for k in 0..n_active {
        let stream: Vec<C64> = shared.iter().map(|col| col[k]).collect();
        shared_bits.extend(qpsk_demodulate(&stream));
    }
    (private_bits, shared_bits)
}

/// Reads the payload back out of a symbol matrix at the positions dictated
/// by `msg`.
pub fn read_payload(d: &SymbolMatrix, msg: &IndexMessage, index_bits: Vec<bool>, cfg: &SystemConfig) -> PayloadBits {
    let private: Vec<C64> = msg
        .active_antennas
        .iter()
        .zip(&msg.private_subcarriers)
        .map(|(&a, &s)| d.0[(a, s)])
        .collect();
    let shared: Vec<Vec<C64>> = shared_subcarriers(msg, cfg.n_subcarriers)
        .into_iter()
        .map(|s| msg.active_antennas.iter().map(|&a| d.0[(a, s)]).collect())
        .collect();
    let (private_bits, shared_bits) = bits_from_symbols(&private, &shared, cfg.n_active);
    PayloadBits {
        shared_bits,
        private_bits,
        index_bits,
    }
}

/// `y_i = H_i d_i + w` for every subcarrier, noise drawn in subcarrier order.
pub fn transmit_frame<R: Rng + ?Sized>(
    d: &SymbolMatrix,
    h: &ChannelTensor,
    sigma2: f64,
    rng: &mut R,
) -> Result<ReceivedFrame, TxError> {
    let (m, nt, l) = h.dims();
    if d.0.shape() != (nt, l) {
        return Err(TxError::DimensionMismatch(format!(
            "symbol matrix is {:?}, channel expects {:?}",
            d.0.shape(),
            (nt, l)
        )));
    }
    let mut y = CMatrix::zeros(m, l);
    for i in 0..l {
        let hi = h.slice(i);
        let mut col = CVector::zeros(m);
        for n in 0..nt {
            let s = d.0[(n, i)];
            if s.norm_sqr() > 0.0 {
                col.axpy(s, &hi.column(n), C64::new(1.0, 0.0));
            }
        }
        let noisy = add_awgn(&col, sigma2, rng);
        y.set_column(i, &noisy);
    }
    Ok(ReceivedFrame {
        y,
        noise_variance: sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_codec::IndexCodec;
    use crate::model::{generate_channel, substream, Purpose};

    fn pairs() -> [[bool; 2]; 4] {
        [[false, false], [false, true], [true, true], [true, false]]
    }

    #[test]
    fn gray_map() {
        let s = FRAC_1_SQRT_2;
        let expected = [C64::new(s, s), C64::new(-s, s), C64::new(-s, -s), C64::new(s, -s)];
        for (p, e) in pairs().iter().zip(expected) {
            let got = qpsk_modulate(p).unwrap()[0];
            assert_eq!(got, e);
            assert!((got.norm() - 1.0).abs() < 1e-15);
            assert_eq!(qpsk_demodulate(&[got]), p.to_vec());
        }
        assert_eq!(qpsk_modulate(&[true]), Err(TxError::OddBitCount(1)));
    }

    #[test]
    fn demod_decisions() {
        assert_eq!(qpsk_demodulate(&[C64::new(0.9, 0.8) * FRAC_1_SQRT_2]), vec![false, false]);
        assert_eq!(qpsk_demodulate(&[C64::new(0.0, 0.0)]), vec![false, false]);
        assert_eq!(qpsk_demodulate(&[C64::new(-0.2, -3.0)]), vec![true, true]);
    }

    #[test]
    fn single_antenna_layout() {
        let cfg = SystemConfig {
            n_transmit: 3,
            n_active: 1,
            n_subcarriers: 2,
            ..SystemConfig::table1()
        };
        let msg = IndexMessage {
            active_antennas: vec![0],
            private_subcarriers: vec![1],
        };
        let payload = PayloadBits {
            shared_bits: vec![true, false],
            private_bits: vec![false, true],
            index_bits: vec![],
        };
        let d = build_symbol_matrix(&payload, &msg, &cfg).unwrap();
        assert_eq!(d.column_support(1), 1);
        assert_eq!(d.column_support(0), 1);
        assert!(d.0[(0, 1)].norm() > 0.0 && d.0[(0, 0)].norm() > 0.0);
        assert!(d.0.row(1).iter().chain(d.0.row(2).iter()).all(|z| z.norm() == 0.0));
    }

    fn table1_frame(trial: u64) -> (SystemConfig, IndexMessage, PayloadBits, SymbolMatrix) {
        let cfg = SystemConfig::table1();
        let codec = IndexCodec::from_config(&cfg).unwrap();
        let sizes = PayloadSizes::new(&cfg, codec.capacity());
        let payload = PayloadBits::random(sizes, &mut substream(11, trial, Purpose::Payload));
        let msg = codec.encode(&payload.index_bits).unwrap();
        let d = build_symbol_matrix(&payload, &msg, &cfg).unwrap();
        (cfg, msg, payload, d)
    }

    #[test]
    fn column_sparsity_and_readback() {
        for trial in 0..50 {
            let (cfg, msg, payload, d) = table1_frame(trial);
            for i in 0..cfg.n_subcarriers {
                let expected = if msg.private_subcarriers.contains(&i) { 1 } else { cfg.n_active };
                assert_eq!(d.column_support(i), expected);
                for n in 0..cfg.n_transmit {
                    let z = d.0[(n, i)];
                    if msg.active_antennas.contains(&n) {
                        assert!(z.norm() == 0.0 || (z.norm() - 1.0).abs() < 1e-14);
                    } else {
                        assert_eq!(z.norm(), 0.0);
                    }
                }
            }
            let back = read_payload(&d, &msg, payload.index_bits.clone(), &cfg);
            assert_eq!(back, payload);
        }
    }

    #[test]
    fn noiseless_channel_products() {
        let (cfg, msg, _, d) = table1_frame(3);
        let cfg = cfg.with_receive(20);
        let h = generate_channel(&cfg, &mut substream(3, 0, Purpose::Channel));
        let frame = transmit_frame(&d, &h, 0.0, &mut substream(3, 0, Purpose::Noise)).unwrap();
        // Private: a single scaled channel column.
        let sub = msg.private_subcarriers[2];
        let ant = msg.active_antennas[2];
        let expected = h.slice(sub).column(ant) * d.0[(ant, sub)];
        assert!((frame.column(sub) - expected).norm() < 1e-14);
        // Shared: explicit term-by-term sum.
        let sub = shared_subcarriers(&msg, cfg.n_subcarriers)[5];
        let mut sum = vec![C64::new(0.0, 0.0); cfg.n_receive];
        for &a in &msg.active_antennas {
            for (m, acc) in sum.iter_mut().enumerate() {
                *acc += h.entry(m, a, sub) * d.0[(a, sub)];
            }
        }
        let got = frame.column(sub);
        for m in 0..cfg.n_receive {
            assert!((got[m] - sum[m]).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let cfg = SystemConfig::table1();
        let h = generate_channel(&cfg, &mut substream(1, 0, Purpose::Channel));
        let d = SymbolMatrix(CMatrix::zeros(32, 64));
        let f = transmit_frame(&d, &h, 0.0, &mut substream(1, 0, Purpose::Noise)).unwrap();
        assert!(f.y.iter().all(|z| z.norm() == 0.0));
        let wrong = SymbolMatrix(CMatrix::zeros(31, 64));
        assert!(transmit_frame(&wrong, &h, 0.0, &mut substream(1, 0, Purpose::Noise)).is_err());
    }

    #[test]
    fn channel_is_linear_in_symbols() {
        let (cfg, _, _, d1) = table1_frame(5);
        let (_, _, _, d2) = table1_frame(6);
        let h = generate_channel(&cfg, &mut substream(8, 0, Purpose::Channel));
        let (a, b) = (C64::new(0.7, -1.1), C64::new(-2.0, 0.4));
        let combo = SymbolMatrix(d1.0.map(|z| z * a) + d2.0.map(|z| z * b));
        let run = |d: &SymbolMatrix| transmit_frame(d, &h, 0.0, &mut substream(0, 0, Purpose::Noise)).unwrap().y;
        let lhs = run(&combo);
        let rhs = run(&d1).map(|z| z * a) + run(&d2).map(|z| z * b);
        assert!((lhs - rhs).norm() < 1e-11);
    }

    #[test]
    fn received_energy_accounting() {
        // E||y_i||^2 = M * (support + sigma2).
        let cfg = SystemConfig::table1().with_receive(16);
        let sigma2 = 0.5;
        let (mut shared_e, mut private_e, mut ns, mut np) = (0.0, 0.0, 0usize, 0usize);
        let trials = 200;
        for t in 0..trials {
            let (_, msg, _, d) = table1_frame(100 + t);
            let h = generate_channel(&cfg, &mut substream(21, t, Purpose::Channel));
            let f = transmit_frame(&d, &h, sigma2, &mut substream(21, t, Purpose::Noise)).unwrap();
            for i in 0..cfg.n_subcarriers {
                let e = f.column(i).norm_squared();
                if msg.private_subcarriers.contains(&i) {
                    private_e += e;
                    np += 1;
                } else {
                    shared_e += e;
                    ns += 1;
                }
            }
        }
        let m = cfg.n_receive as f64;
        let want_s = m * (6.0 + sigma2);
        let want_p = m * (1.0 + sigma2);
        // ||y||^2 is a sum of M exponentials with mean (support + sigma2).
        let tol_s = 3.0 * want_s / (m * ns as f64).sqrt();
        let tol_p = 3.0 * want_p / (m * np as f64).sqrt();
        assert!((shared_e / ns as f64 - want_s).abs() < tol_s);
        assert!((private_e / np as f64 - want_p).abs() < tol_p);
    }
}
