//! Bijection between index bits and (active-antenna set, private-subcarrier
//! permutation).
//!
//! A capacity-length bit block is read as a big-endian integer `m`. The
//! quotient `m / P(L, Nx)` ranks the antenna combination lexicographically;
//! the remainder ranks the ordered private subcarriers with a Lehmer code.
//! Position `k` of the subcarrier list is paired with the `k`-th smallest
//! active antenna.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::model::SystemConfig;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("expected {expected} index bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("message rank is not below 2^{capacity}")]
    UnencodableMessage { capacity: usize },
}

/// Active antennas and their paired private subcarriers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexMessage {
    /// Strictly increasing antenna indices in `[0, Nt)`.
    pub active_antennas: Vec<usize>,
    /// `private_subcarriers[k]` belongs to `active_antennas[k]`.
    pub private_subcarriers: Vec<usize>,
}

impl IndexMessage {
    pub fn validate(&self, n_transmit: usize, n_active: usize, n_subcarriers: usize) -> Result<(), CodecError> {
        if self.active_antennas.len() != n_active || self.private_subcarriers.len() != n_active {
            return Err(CodecError::Domain(format!(
                "message must list {n_active} antennas and subcarriers, got {} and {}",
                self.active_antennas.len(),
                self.private_subcarriers.len()
            )));
        }
        check_increasing(&self.active_antennas, n_transmit)?;
        check_distinct(&self.private_subcarriers, n_subcarriers)?;
        Ok(())
    }

    /// The antenna paired with `subcarrier`, if it is private.
    pub fn antenna_for(&self, subcarrier: usize) -> Option<usize> {
        self.private_subcarriers
            .iter()
            .position(|&s| s == subcarrier)
            .map(|k| self.active_antennas[k])
    }
}

fn check_increasing(set: &[usize], n: usize) -> Result<(), CodecError> {
    if set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CodecError::Domain(format!("{set:?} is not strictly increasing")));
    }
    if set.last().is_some_and(|&x| x >= n) {
        return Err(CodecError::Domain(format!("{set:?} has entries outside [0, {n})")));
    }
    Ok(())
}

fn check_distinct(seq: &[usize], n: usize) -> Result<(), CodecError> {
    let mut seen = vec![false; n];
    for &x in seq {
        if x >= n {
            return Err(CodecError::Domain(format!("{x} is outside [0, {n})")));
        }
        if std::mem::replace(&mut seen[x], true) {
            return Err(CodecError::Domain(format!("{x} repeats in {seq:?}")));
        }
    }
    Ok(())
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // Exact at every step: acc * (n - i) is divisible by (i + 1).
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `P(n, k) = n! / (n - k)!`, zero when `k > n`.
pub fn falling_factorial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(n - i))
}

/// `floor(log2(C(nt, nx) * P(l, nx)))`, computed exactly.
pub fn capacity_bits(n_transmit: usize, n_active: usize, n_subcarriers: usize) -> Result<usize, CodecError> {
    if n_active > n_transmit || n_active > n_subcarriers {
        return Err(CodecError::Domain(format!(
            "need n_active <= n_transmit and n_active <= n_subcarriers, got ({n_transmit}, {n_active}, {n_subcarriers})"
        )));
    }
    let total = binomial(n_transmit, n_active) * falling_factorial(n_subcarriers, n_active);
    Ok(total.bits() as usize - 1)
}

/// Lexicographic rank of a strictly increasing `set` among `|set|`-subsets
/// of `[0, n)`.
pub fn rank_combination(set: &[usize], n: usize) -> Result<BigUint, CodecError> {
    check_increasing(set, n)?;
    let k = set.len();
    let mut rank = BigUint::zero();
    let mut next = 0;
    for (j, &v) in set.iter().enumerate() {
        for skipped in next..v {
            rank += binomial(n - 1 - skipped, k - 1 - j);
        }
        next = v + 1;
    }
    Ok(rank)
}

pub fn unrank_combination(rank: &BigUint, n: usize, k: usize) -> Result<Vec<usize>, CodecError> {
    if k > n || *rank >= binomial(n, k) {
        return Err(CodecError::Domain(format!("rank {rank} out of range for C({n}, {k})")));
    }
    let mut rem = rank.clone();
    let mut out = Vec::with_capacity(k);
    let mut v = 0;
    for j in 0..k {
        loop {
            let block = binomial(n - 1 - v, k - 1 - j);
            if rem < block {
                break;
            }
            rem -= block;
            v += 1;
        }
        out.push(v);
        v += 1;
    }
    Ok(out)
}

/// Lehmer rank of a `k`-permutation of `[0, n)` in lexicographic order.
pub fn rank_kperm(seq: &[usize], n: usize) -> Result<BigUint, CodecError> {
    check_distinct(seq, n)?;
    let mut used = vec![false; n];
    let mut rank = BigUint::zero();
    for (j, &v) in seq.iter().enumerate() {
        let digit = (0..v).filter(|&u| !used[u]).count();
        used[v] = true;
        rank = rank * BigUint::from(n - j) + BigUint::from(digit);
    }
    // Horner over radices n, n-1, ..., n-k+1 weights digit j by P(n-1-j, k-1-j).
    Ok(rank)
}

pub fn unrank_kperm(rank: &BigUint, n: usize, k: usize) -> Result<Vec<usize>, CodecError> {
    if k > n || *rank >= falling_factorial(n, k) {
        return Err(CodecError::Domain(format!("rank {rank} out of range for P({n}, {k})")));
    }
    // Peel mixed-radix digits, least significant (radix n-k+1) first.
    let mut rem = rank.clone();
    let mut digits = vec![0usize; k];
    for j in (0..k).rev() {
        let radix = BigUint::from(n - j);
        digits[j] = (&rem % &radix).to_usize().expect("digit fits in usize");
        rem /= radix;
    }
    let mut free: Vec<usize> = (0..n).collect();
    Ok(digits.into_iter().map(|d| free.remove(d)).collect())
}

/// Big-endian bits to integer.
pub fn bits_to_biguint(bits: &[bool]) -> BigUint {
    bits.iter()
        .fold(BigUint::zero(), |acc, &b| (acc << 1u32) + if b { BigUint::one() } else { BigUint::zero() })
}

/// Integer to exactly `width` big-endian bits. The caller guarantees
/// `value < 2^width`.
pub fn biguint_to_bits(value: &BigUint, width: usize) -> Vec<bool> {
    (0..width).rev().map(|i| value.bit(i as u64)).collect()
}

/// Precomputed codec for one `(Nt, Nx, L)` triple.
#[derive(Debug, Clone)]
pub struct IndexCodec {
    n_transmit: usize,
    n_active: usize,
    n_subcarriers: usize,
    capacity: usize,
    perm_count: BigUint,
}

impl IndexCodec {
    pub fn new(n_transmit: usize, n_active: usize, n_subcarriers: usize) -> Result<Self, CodecError> {
        let capacity = capacity_bits(n_transmit, n_active, n_subcarriers)?;
        Ok(IndexCodec {
            n_transmit,
            n_active,
            n_subcarriers,
            capacity,
            perm_count: falling_factorial(n_subcarriers, n_active),
        })
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self, CodecError> {
        Self::new(cfg.n_transmit, cfg.n_active, cfg.n_subcarriers)
    }

    /// Index bits per OFDM symbol.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn encode(&self, bits: &[bool]) -> Result<IndexMessage, CodecError> {
        if bits.len() != self.capacity {
            return Err(CodecError::LengthMismatch {
                expected: self.capacity,
                got: bits.len(),
            });
        }
        let value = bits_to_biguint(bits);
        let antenna_rank = &value / &self.perm_count;
        let perm_rank = &value % &self.perm_count;
        Ok(IndexMessage {
            active_antennas: unrank_combination(&antenna_rank, self.n_transmit, self.n_active)?,
            private_subcarriers: unrank_kperm(&perm_rank, self.n_subcarriers, self.n_active)?,
        })
    }

    pub fn decode(&self, msg: &IndexMessage) -> Result<Vec<bool>, CodecError> {
        msg.validate(self.n_transmit, self.n_active, self.n_subcarriers)?;
        let value = rank_combination(&msg.active_antennas, self.n_transmit)? * &self.perm_count
            + rank_kperm(&msg.private_subcarriers, self.n_subcarriers)?;
        if value.bits() as usize > self.capacity {
            return Err(CodecError::UnencodableMessage {
                capacity: self.capacity,
            });
        }
        Ok(biguint_to_bits(&value, self.capacity))
    }
}

pub fn encode_index_message(bits: &[bool], cfg: &SystemConfig) -> Result<IndexMessage, CodecError> {
    IndexCodec::from_config(cfg)?.encode(bits)
}

pub fn decode_index_message(msg: &IndexMessage, cfg: &SystemConfig) -> Result<Vec<bool>, CodecError> {
    IndexCodec::from_config(cfg)?.decode(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    /// All k-subsets of [0, n) in lexicographic order.
    fn enumerate_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for v in start..n {
                cur.push(v);
                rec(v + 1, n, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, k, &mut Vec::new(), &mut out);
        out
    }

    /// All k-permutations of [0, n) in lexicographic order.
    fn enumerate_kperms(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for v in 0..n {
                if !cur.contains(&v) {
                    cur.push(v);
                    rec(n, k, cur, out);
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        rec(n, k, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity_bits(2, 1, 1).unwrap(), 1);
        assert_eq!(binomial(32, 6), big(906_192));
        assert_eq!(falling_factorial(64, 6), big(53_981_544_960));
        assert_eq!(capacity_bits(32, 6, 64).unwrap(), 55);
        assert_eq!(binomial(32, 8).bits() - 1, 23);
        assert_eq!(capacity_bits(4, 2, 4).unwrap(), 6);
        assert!(capacity_bits(3, 4, 8).is_err());
        assert!(capacity_bits(8, 4, 3).is_err());
    }

    #[test]
    fn capacity_handles_large_parameters() {
        // C(64,16) * P(4096,16) is far beyond u128.
        let bits = capacity_bits(64, 16, 4096).unwrap();
        let approx = (binomial(64, 16).to_f64().unwrap()).log2()
            + (0..16).map(|i| ((4096 - i) as f64).log2()).sum::<f64>();
        assert_eq!(bits, approx.floor() as usize);
    }

    #[test]
    fn capacity_is_monotone() {
        for nx in 1..5 {
            for nt in (nx + 1)..12 {
                for l in nx..20 {
                    let c = capacity_bits(nt, nx, l).unwrap();
                    assert!(capacity_bits(nt + 1, nx, l).unwrap() >= c);
                    assert!(capacity_bits(nt, nx, l + 1).unwrap() >= c);
                }
            }
        }
    }

    #[test]
    fn combination_rank_matches_enumeration() {
        let all = enumerate_combinations(5, 3);
        assert_eq!(all.len(), 10);
        assert_eq!(unrank_combination(&big(0), 5, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(rank_combination(&[2, 3, 4], 5).unwrap(), big(9));
        for (r, set) in all.iter().enumerate() {
            assert_eq!(rank_combination(set, 5).unwrap(), big(r as u64));
        }
        for r in 0..20u64 {
            let set = unrank_combination(&big(r), 6, 3).unwrap();
            assert_eq!(rank_combination(&set, 6).unwrap(), big(r));
        }
        assert!(unrank_combination(&big(20), 6, 3).is_err());
        assert!(rank_combination(&[1, 1], 4).is_err());
        assert!(rank_combination(&[3, 1], 4).is_err());
        assert!(rank_combination(&[1, 4], 4).is_err());
    }

    #[test]
    fn kperm_rank_matches_enumeration() {
        let all = enumerate_kperms(4, 2);
        assert_eq!(all.len(), 12);
        assert_eq!(unrank_kperm(&big(0), 4, 2).unwrap(), vec![0, 1]);
        assert_eq!(rank_kperm(&[3, 2], 4).unwrap(), big(11));
        for (r, seq) in all.iter().enumerate() {
            assert_eq!(rank_kperm(seq, 4).unwrap(), big(r as u64));
        }
        let all53 = enumerate_kperms(5, 3);
        assert_eq!(all53.len(), 60);
        for (r, seq) in all53.iter().enumerate() {
            assert_eq!(unrank_kperm(&big(r as u64), 5, 3).unwrap(), *seq);
            assert_eq!(rank_kperm(seq, 5).unwrap(), big(r as u64));
        }
        assert!(unrank_kperm(&big(60), 5, 3).is_err());
        assert!(rank_kperm(&[2, 2], 5).is_err());
    }

    #[test]
    fn all_zero_bits_map_to_rank_zero() {
        let codec = IndexCodec::new(4, 2, 4).unwrap();
        let msg = codec.encode(&[false; 6]).unwrap();
        assert_eq!(msg.active_antennas, vec![0, 1]);
        assert_eq!(msg.private_subcarriers, vec![0, 1]);
        assert_eq!(codec.decode(&msg).unwrap(), vec![false; 6]);
    }

    #[test]
    fn small_codec_is_exhaustively_bijective() {
        let codec = IndexCodec::new(4, 2, 4).unwrap();
        let mut seen = HashSet::new();
        for v in 0..64u64 {
            let bits = biguint_to_bits(&big(v), 6);
            let msg = codec.encode(&bits).unwrap();
            assert!(seen.insert(msg.clone()));
            assert_eq!(codec.decode(&msg).unwrap(), bits);
        }
        // The remaining 72 - 64 messages are unencodable.
        let mut rejected = 0;
        for ants in enumerate_combinations(4, 2) {
            for subs in enumerate_kperms(4, 2) {
                let msg = IndexMessage {
                    active_antennas: ants.clone(),
                    private_subcarriers: subs,
                };
                match codec.decode(&msg) {
                    Ok(bits) => assert_eq!(codec.encode(&bits).unwrap(), msg),
                    Err(CodecError::UnencodableMessage { .. }) => rejected += 1,
                    Err(e) => panic!("{e}"),
                }
            }
        }
        assert_eq!(rejected, 8);
    }

    #[test]
    fn rank_at_capacity_boundary_is_unencodable() {
        let codec = IndexCodec::new(4, 2, 4).unwrap();
        // Combined rank 64 = 5 * 12 + 4.
        let msg = IndexMessage {
            active_antennas: unrank_combination(&big(5), 4, 2).unwrap(),
            private_subcarriers: unrank_kperm(&big(4), 4, 2).unwrap(),
        };
        assert_eq!(
            codec.decode(&msg),
            Err(CodecError::UnencodableMessage { capacity: 6 })
        );
    }

    #[test]
    fn length_mismatch_rejected() {
        let codec = IndexCodec::new(4, 2, 4).unwrap();
        assert_eq!(
            codec.encode(&[true; 5]),
            Err(CodecError::LengthMismatch { expected: 6, got: 5 })
        );
    }

    #[test]
    fn pairing_carries_information() {
        let codec = IndexCodec::new(32, 6, 64).unwrap();
        let bits: Vec<bool> = (0..55).map(|i| i % 3 == 0).collect();
        let msg = codec.encode(&bits).unwrap();
        let mut swapped = msg.clone();
        swapped.private_subcarriers.swap(0, 1);
        let other = codec.decode(&swapped);
        assert!(other.map(|b| b != bits).unwrap_or(true));
    }

    proptest! {
        #[test]
        fn table1_roundtrip(bits in proptest::collection::vec(any::<bool>(), 55)) {
            let codec = IndexCodec::new(32, 6, 64).unwrap();
            let msg = codec.encode(&bits).unwrap();
            msg.validate(32, 6, 64).unwrap();
            prop_assert_eq!(codec.decode(&msg).unwrap(), bits);
        }
    }
}
