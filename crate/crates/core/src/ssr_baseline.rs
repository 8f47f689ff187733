//! Sparse-recovery baseline: per-subcarrier basis pursuit denoising
//!
//! ```text
//! min ||d||_1   s.t.  ||y - H d||^2 <= radius2
//! ```
//!
//! solved through the penalised form `1/2 ||y - H d||^2 + lambda ||d||_1`
//! with a monotone accelerated proximal-gradient method, and `lambda`
//! bisected on a log scale until the residual sits on the constraint.
//! Complex entries shrink jointly by modulus.
//!
//! Also holds the exhaustive subspace search used as ground truth on small
//! instances.

use thiserror::Error;
use web_time::Instant;

use crate::detector::{assemble_result, DetectError, DetectionResult, SubcarrierClass};
use crate::index_codec::{binomial, unrank_combination, IndexCodec};
use crate::linalg::PivotedQr;
use crate::model::{CMatrix, CVector, ChannelTensor, ReceivedFrame, SystemConfig, C64};
use num_bigint::BigUint;
use num_traits::ToPrimitive;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsrError {
    #[error("exhaustive search over C({n}, {k}) patterns exceeds the budget of {budget}")]
    BudgetExceeded { n: usize, k: usize, budget: u64 },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// Maximum number of antenna patterns the exhaustive oracle will visit.
pub const ORACLE_BUDGET: u64 = 1_000_000;

/// Relative floor on the residual target, `(10 tol)^2 ||y||^2`, so that a
/// zero radius still gives the bisection a reachable target.
const RESIDUAL_FLOOR_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnSettings {
    /// Iteration cap for each penalised solve.
    pub max_iterations: usize,
    /// Proximal step as a fraction of `1 / L`, in `(0, 1]`.
    pub penalty_parameter: f64,
    /// Relative tolerance on the primal step and the optimality residual.
    pub convergence_tol: f64,
    /// Support entries are those with modulus at least this fraction of the
    /// largest modulus.
    pub support_threshold: f64,
}

impl Default for BpdnSettings {
    fn default() -> Self {
        BpdnSettings {
            max_iterations: 2000,
            penalty_parameter: 1.0,
            convergence_tol: 1e-6,
            support_threshold: 0.3,
        }
    }
}

impl BpdnSettings {
    pub fn validate(&self) -> Result<(), SsrError> {
        let bad = |m: &str| Err(SsrError::InvalidSettings(m.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.penalty_parameter > 0.0 && self.penalty_parameter <= 1.0) {
            return bad("penalty_parameter must lie in (0, 1]");
        }
        if !(self.convergence_tol > 0.0) {
            return bad("convergence_tol must be positive");
        }
        if !(self.support_threshold > 0.0) {
            return bad("support_threshold must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpdnSolution {
    pub x: Vec<C64>,
    /// `||y - H x||^2`.
    pub residual2: f64,
    /// Final penalty weight `lambda`.
    pub penalty: f64,
    /// False when an inner solve hit the iteration cap or the bisection did
    /// not land on the constraint.
    pub converged: bool,
    /// Total proximal iterations over all penalised solves.
    pub iterations: usize,
}

/// Quadratic model of one subcarrier: Gram matrix and correlations.
struct Problem {
    n: usize,
    gram: CMatrix,
    corr: Vec<C64>,
    y_norm2: f64,
    lipschitz: f64,
}

impl Problem {
    fn new(h: &CMatrix, y: &CVector) -> Self {
        let gram = h.adjoint() * h;
        let corr: Vec<C64> = (h.adjoint() * y).iter().copied().collect();
        let n = h.ncols();
        // Power iteration on the Gram matrix, then a safety margin.
        let mut v = CVector::from_element(n, C64::new(1.0, 0.0));
        let mut est = 0.0;
        for _ in 0..100 {
            let w = &gram * &v;
            let nw = w.norm();
            if nw == 0.0 {
                break;
            }
            est = nw / v.norm();
            v = w / C64::new(nw, 0.0);
        }
        Problem {
            n,
            gram,
            corr,
            y_norm2: y.norm_squared(),
            lipschitz: est * 1.05,
        }
    }

    fn gram_times(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for (j, &xj) in x.iter().enumerate() {
            if xj.re == 0.0 && xj.im == 0.0 {
                continue;
            }
            let col = &self.gram.as_slice()[j * self.n..(j + 1) * self.n];
            for (o, g) in out.iter_mut().zip(col) {
                *o += g * xj;
            }
        }
        out
    }

    /// `||y - H x||^2` from `x` and `G x`.
    fn residual2(&self, x: &[C64], gx: &[C64]) -> f64 {
        let quad: f64 = x.iter().zip(gx).map(|(a, b)| (a.conj() * b).re).sum();
        let lin: f64 = x.iter().zip(&self.corr).map(|(a, c)| (c.conj() * a).re).sum();
        (self.y_norm2 - 2.0 * lin + quad).max(0.0)
    }

    fn objective(&self, x: &[C64], gx: &[C64], lambda: f64) -> f64 {
        0.5 * self.residual2(x, gx) + lambda * x.iter().map(|z| z.norm()).sum::<f64>()
    }

    fn lambda_max(&self) -> f64 {
        self.corr.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

#[inline]
fn soft_threshold(z: C64, t: f64) -> C64 {
    let r = z.norm();
    if r <= t {
        C64::new(0.0, 0.0)
    } else {
        z * ((r - t) / r)
    }
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct InnerResult {
    x: Vec<C64>,
    gx: Vec<C64>,
    iterations: usize,
    converged: bool,
}

/// Monotone FISTA on the penalised problem, warm-started at `x0`.
fn solve_penalised(
    p: &Problem,
    lambda: f64,
    x0: &[C64],
    settings: &BpdnSettings,
    mut objective_log: Option<&mut Vec<f64>>,
) -> InnerResult {
    let n = p.n;
    let zero = C64::new(0.0, 0.0);
    if p.lipschitz == 0.0 {
        return InnerResult {
            x: vec![zero; n],
            gx: vec![zero; n],
            iterations: 0,
            converged: true,
        };
    }
    let step = settings.penalty_parameter / p.lipschitz;
    let tol = settings.convergence_tol;
    let corr_norm = vnorm(&p.corr).max(f64::MIN_POSITIVE);

    let mut x = x0.to_vec();
    let mut gx = p.gram_times(&x);
    let mut fx = p.objective(&x, &gx, lambda);
    let mut w = x.clone();
    let mut gw = gx.clone();
    let mut t = 1.0f64;
    if let Some(log) = objective_log.as_deref_mut() {
        log.push(fx);
    }

    for it in 1..=settings.max_iterations {
        // Candidate z = prox(w - step * grad(w)).
        let z: Vec<C64> = (0..n)
            .map(|j| soft_threshold(w[j] - (gw[j] - p.corr[j]) * step, lambda * step))
            .collect();
        let gz = p.gram_times(&z);
        let fz = p.objective(&z, &gz, lambda);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());

        let x_prev = x.clone();
        let gx_prev = gx.clone();
        let accepted = fz <= fx;
        if accepted {
            x = z.clone();
            gx = gz.clone();
            fx = fz;
        }
        // w = x + (t / t_next)(z - x) + ((t - 1) / t_next)(x - x_prev)
        let a = t / t_next;
        let b = (t - 1.0) / t_next;
        for j in 0..n {
            w[j] = x[j] + (z[j] - x[j]) * a + (x[j] - x_prev[j]) * b;
            gw[j] = gx[j] + (gz[j] - gx[j]) * a + (gx[j] - gx_prev[j]) * b;
        }
        t = t_next;
        if let Some(log) = objective_log.as_deref_mut() {
            log.push(fx);
        }

        let step_norm = x.iter().zip(&x_prev).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let primal_ok = step_norm <= tol * vnorm(&x).max(f64::MIN_POSITIVE);
        if primal_ok {
            // Distance from -grad to the scaled subdifferential of ||x||_1.
            let mut opt = 0.0;
            for j in 0..n {
                let g = gx[j] - p.corr[j];
                let d = if x[j].norm() > 0.0 {
                    (g + x[j] / x[j].norm() * lambda).norm()
                } else {
                    (g.norm() - lambda).max(0.0)
                };
                opt += d * d;
            }
            if opt.sqrt() <= tol * corr_norm {
                return InnerResult {
                    x,
                    gx,
                    iterations: it,
                    converged: true,
                };
            }
            if !accepted {
                // Restart the momentum once the accepted iterate stalls.
                w.clone_from(&x);
                gw.clone_from(&gx);
                t = 1.0;
            }
        }
    }
    InnerResult {
        x,
        gx,
        iterations: settings.max_iterations,
        converged: false,
    }
}

/// Approximate minimiser of `||d||_1` subject to `||y - H d||^2 <= radius2`.
pub fn bpdn_solve(h: &CMatrix, y: &CVector, radius2: f64, settings: &BpdnSettings) -> BpdnSolution {
    let p = Problem::new(h, y);
    let n = p.n;
    let zero = vec![C64::new(0.0, 0.0); n];
    let floor = (RESIDUAL_FLOOR_FACTOR * settings.convergence_tol).powi(2) * p.y_norm2;
    let target = radius2.max(floor);

    if p.y_norm2 <= target || p.lambda_max() == 0.0 {
        return BpdnSolution {
            x: zero,
            residual2: p.y_norm2,
            penalty: p.lambda_max(),
            converged: true,
            iterations: 0,
        };
    }

    let mut total_iters = 0;
    let mut all_converged = true;
    let solve = |lambda: f64, x0: &[C64], total: &mut usize, ok: &mut bool| {
        let r = solve_penalised(&p, lambda, x0, settings, None);
        *total += r.iterations;
        *ok &= r.converged;
        let res = p.residual2(&r.x, &r.gx);
        (r.x, res)
    };

    // Continuation downwards from lambda_max until the constraint holds.
    let lambda_max = p.lambda_max();
    let min_lambda = lambda_max * 1e-12;
    let mut hi = lambda_max;
    let mut x_lo = zero;
    let mut res_lo;
    loop {
        let cand = hi * 0.1;
        let (x, res) = solve(cand, &x_lo, &mut total_iters, &mut all_converged);
        x_lo = x;
        res_lo = res;
        if res <= target {
            break;
        }
        if cand < min_lambda {
            // The constraint cannot be met: return the least-residual point.
            return BpdnSolution {
                x: x_lo,
                residual2: res_lo,
                penalty: cand,
                converged: false,
                iterations: total_iters,
            };
        }
        hi = cand;
    }
    let mut lo = hi * 0.1;

    // Bisection on log(lambda): `lo` is feasible, `hi` is not.
    let mut best = (x_lo.clone(), res_lo, lo);
    let mut landed = (res_lo - target).abs() <= 0.01 * target;
    for _ in 0..60 {
        if landed {
            break;
        }
        let mid = (lo * hi).sqrt();
        let (x, res) = solve(mid, &best.0, &mut total_iters, &mut all_converged);
        if res <= target * 1.01 {
            lo = mid;
            best = (x, res, mid);
            landed = (res - target).abs() <= 0.01 * target;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-9 {
            break;
        }
    }
    BpdnSolution {
        x: best.0,
        residual2: best.1,
        penalty: best.2,
        converged: all_converged && landed,
        iterations: total_iters,
    }
}

/// Objective values of one penalised solve, one per iteration (plus the
/// starting point).
pub fn penalised_objective_trace(h: &CMatrix, y: &CVector, lambda: f64, settings: &BpdnSettings) -> Vec<f64> {
    let p = Problem::new(h, y);
    let mut log = Vec::new();
    solve_penalised(&p, lambda, &vec![C64::new(0.0, 0.0); p.n], settings, Some(&mut log));
    log
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsrClassification {
    pub class: SubcarrierClass,
    /// `(antenna, estimate)` over the extracted support.
    pub estimates: Vec<(usize, C64)>,
    pub converged: bool,
}

/// Runs the constrained recovery with radius `M sigma2` and reads the class
/// off the size of the thresholded support.
pub fn ssr_classify_subcarrier(h: &CMatrix, y: &CVector, sigma2: f64, settings: &BpdnSettings) -> SsrClassification {
    let m = h.nrows();
    let sol = bpdn_solve(h, y, m as f64 * sigma2, settings);
    let peak = sol.x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let estimates: Vec<(usize, C64)> = if peak > 0.0 {
        sol.x
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() >= settings.support_threshold * peak)
            .map(|(j, z)| (j, *z))
            .collect()
    } else {
        Vec::new()
    };
    let class = match estimates.as_slice() {
        [(j, _)] => SubcarrierClass::Private(*j),
        _ => SubcarrierClass::Shared,
    };
    SsrClassification {
        class,
        estimates,
        converged: sol.converged,
    }
}

/// Frame detection with the sparse-recovery classifier on every subcarrier.
pub fn ssr_detect_frame(y: &ReceivedFrame, h: &ChannelTensor, cfg: &SystemConfig, settings: &BpdnSettings) -> Result<DetectionResult, SsrError> {
    settings.validate()?;
    let (m, nt, l) = h.dims();
    if y.y.shape() != (m, l) {
        return Err(DetectError::DimensionMismatch(format!(
            "received frame is {:?}, channel expects {:?}",
            y.y.shape(),
            (m, l)
        ))
        .into());
    }
    if m >= nt {
        log::warn!("sparse recovery with M = {m} >= Nt = {nt}: the ell-1 baseline is not meant for this regime");
    }
    let codec = IndexCodec::from_config(cfg).map_err(|e| SsrError::InvalidSettings(e.to_string()))?;
    let start = Instant::now();
    let classes: Vec<SubcarrierClass> = (0..l)
        .map(|i| ssr_classify_subcarrier(h.slice(i), &y.column(i), y.noise_variance, settings).class)
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    Ok(assemble_result(classes, &codec, cfg.n_active, elapsed))
}

/// The size-`n_active` antenna set whose channel columns are closest to
/// `y`, by exhaustive search. Ties go to the lexicographically first set.
pub fn exhaustive_subspace_oracle(h: &CMatrix, y: &CVector, n_active: usize) -> Result<Vec<usize>, SsrError> {
    let n = h.ncols();
    let count = binomial(n, n_active);
    if count > BigUint::from(ORACLE_BUDGET) {
        return Err(SsrError::BudgetExceeded {
            n,
            k: n_active,
            budget: ORACLE_BUDGET,
        });
    }
    let count = count.to_u64().expect("within budget");
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut set = unrank_combination(&BigUint::from(0u32), n, n_active).map_err(|e| SsrError::InvalidSettings(e.to_string()))?;
    for _ in 0..count {
        let r = PivotedQr::from_selected(h, &set).residual_norm(y.as_slice());
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, set.clone()));
        }
        next_combination(&mut set, n);
    }
    Ok(best.map(|b| b.1).unwrap_or_default())
}

/// Advances to the lexicographic successor; leaves the last set unchanged.
fn next_combination(set: &mut [usize], n: usize) {
    let k = set.len();
    for j in (0..k).rev() {
        if set[j] < n - k + j {
            set[j] += 1;
            for i in j + 1..k {
                set[i] = set[i - 1] + 1;
            }
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{classify_subcarrier, DetectorParams};
    use crate::model::{complex_gaussian, substream, Purpose};

    fn random(m: usize, k: usize, seed: u64) -> CMatrix {
        let mut rng = substream(seed, 0, Purpose::Auxiliary);
        CMatrix::from_fn(m, k, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    fn qpsk(k: u64) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [C64::new(s, s), C64::new(-s, s), C64::new(-s, -s), C64::new(s, -s)][(k % 4) as usize]
    }

    #[test]
    fn zero_observation_gives_zero() {
        let h = random(6, 8, 1);
        let sol = bpdn_solve(&h, &CVector::zeros(6), 0.0, &BpdnSettings::default());
        assert!(sol.x.iter().all(|z| z.norm() == 0.0));
        assert!(sol.converged);
    }

    #[test]
    fn large_radius_gives_zero() {
        let h = random(6, 8, 2);
        let y = random(6, 1, 3).column(0).into_owned();
        let sol = bpdn_solve(&h, &y, y.norm_squared(), &BpdnSettings::default());
        assert!(sol.x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn noiseless_one_sparse_support() {
        let settings = BpdnSettings::default();
        let trials = 500;
        let mut hits = 0;
        for t in 0..trials {
            let h = random(28, 32, 1000 + t);
            let n = (t * 7 % 32) as usize;
            let y = h.column(n) * qpsk(t);
            let sol = bpdn_solve(&h, &y, 1e-8, &settings);
            let peak = sol.x.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let support: Vec<usize> = (0..32).filter(|&j| sol.x[j].norm() >= 0.3 * peak).collect();
            hits += usize::from(support == vec![n]);
        }
        assert!(hits as f64 >= 0.99 * trials as f64, "{hits}/{trials}");
    }

    #[test]
    fn solution_is_feasible() {
        let settings = BpdnSettings::default();
        for t in 0..50 {
            let h = random(28, 32, 2000 + t);
            let mut rng = substream(t, 1, Purpose::Noise);
            let mut y = h.column(3) * qpsk(t) + h.column(17) * qpsk(t + 1);
            y = y.map(|v| v + complex_gaussian(&mut rng, 0.5));
            let radius2 = 28.0 * 0.5;
            let sol = bpdn_solve(&h, &y, radius2, &settings);
            let res = (&y - &h * CVector::from_vec(sol.x.clone())).norm_squared();
            assert!((res - sol.residual2).abs() < 1e-8 * res.max(1.0));
            if sol.converged {
                assert!(res <= 1.05 * radius2, "{res} vs {radius2}");
            }
        }
    }

    #[test]
    fn objective_never_increases() {
        let h = random(28, 32, 9);
        let y = random(28, 1, 10).column(0).into_owned();
        let settings = BpdnSettings::default();
        for lambda in [0.01, 0.3, 2.0] {
            let trace = penalised_objective_trace(&h, &y, lambda, &settings);
            assert!(trace.len() > 1);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn ssr_classification_noiseless() {
        let settings = BpdnSettings::default();
        for t in 0..20 {
            let h = random(28, 32, 3000 + t);
            let n = (t * 5 % 32) as usize;
            let c = ssr_classify_subcarrier(&h, &(h.column(n) * qpsk(t)), 0.0, &settings);
            assert_eq!(c.class, SubcarrierClass::Private(n));
            assert!((c.estimates[0].1 - qpsk(t)).norm() < 1e-3);
            let ants = [1usize, 6, 11, 19, 25, 30];
            let mut y = CVector::zeros(28);
            for (k, &a) in ants.iter().enumerate() {
                y += h.column(a) * qpsk(t + k as u64);
            }
            let c = ssr_classify_subcarrier(&h, &y, 0.0, &settings);
            assert_eq!(c.class, SubcarrierClass::Shared);
            let support: Vec<usize> = c.estimates.iter().map(|e| e.0).collect();
            assert_eq!(support, ants.to_vec());
        }
    }

    #[test]
    fn pure_noise_does_not_crash() {
        let h = random(28, 32, 4);
        let y = random(28, 1, 5).column(0).into_owned();
        let c = ssr_classify_subcarrier(&h, &y, 1.0, &BpdnSettings::default());
        assert!(matches!(c.class, SubcarrierClass::Shared | SubcarrierClass::Private(_)));
    }

    #[test]
    fn oracle_examples() {
        let h = random(10, 8, 6);
        let y = h.column(1) * qpsk(0) + h.column(5) * qpsk(1);
        assert_eq!(exhaustive_subspace_oracle(&h, &y, 2).unwrap(), vec![1, 5]);
        let y = h.column(3) * qpsk(2);
        assert_eq!(exhaustive_subspace_oracle(&h, &y, 1).unwrap(), vec![3]);
        let big = random(4, 30, 1);
        assert!(matches!(
            exhaustive_subspace_oracle(&big, &CVector::zeros(4), 10),
            Err(SsrError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn oracle_ties_prefer_lexicographic_first() {
        // y = 0 fits every pattern equally.
        let h = random(6, 5, 7);
        assert_eq!(exhaustive_subspace_oracle(&h, &CVector::zeros(6), 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn methods_agree_on_small_private_subcarriers() {
        let settings = BpdnSettings::default();
        let params = DetectorParams {
            epsilon: 1e-8,
            branch_factor: 2,
        };
        for t in 0..50 {
            let h = random(10, 8, 5000 + t);
            let n = (t % 8) as usize;
            let y = h.column(n) * qpsk(t);
            assert_eq!(classify_subcarrier(&h, &y, &params), SubcarrierClass::Private(n));
            assert_eq!(ssr_classify_subcarrier(&h, &y, 0.0, &settings).class, SubcarrierClass::Private(n));
            assert_eq!(exhaustive_subspace_oracle(&h, &y, 1).unwrap(), vec![n]);
        }
    }

    #[test]
    fn settings_validation() {
        assert!(BpdnSettings::default().validate().is_ok());
        let bad = BpdnSettings {
            penalty_parameter: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = BpdnSettings {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
