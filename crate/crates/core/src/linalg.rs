//! Complex Householder QR with column pivoting, used for every orthogonal
//! projection in the receiver.
//!
//! Only the reflectors are kept. Projecting onto the orthogonal complement of
//! `span(B)` is then `Q^H y` with the first `rank` coordinates dropped, so no
//! projector or inverse Gram matrix is ever formed.

use crate::model::{CMatrix, CVector, C64};

/// Pivoted QR factor of an `m x k` matrix.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    m: usize,
    /// Householder vector `j` lives in `reflectors[j]`, length `m - j`.
    reflectors: Vec<Vec<C64>>,
    betas: Vec<f64>,
    rank: usize,
}

impl PivotedQr {
    /// Factors `cols` (each of length `m`) as the columns of a matrix.
    pub fn from_columns<'a, I>(m: usize, cols: I) -> Self
    where
        I: IntoIterator<Item = &'a [C64]>,
    {
        let mut work: Vec<Vec<C64>> = cols
            .into_iter()
            .map(|c| {
                debug_assert_eq!(c.len(), m);
                c.to_vec()
            })
            .collect();
        let k = work.len();
        let steps = m.min(k);
        let mut norms: Vec<f64> = work.iter().map(|c| norm_sqr(c)).collect();
        let first = norms.iter().cloned().fold(0.0, f64::max).sqrt();
        let tol = first * (m.max(k) as f64) * f64::EPSILON * 10.0;

        let mut reflectors = Vec::with_capacity(steps);
        let mut betas = Vec::with_capacity(steps);
        for j in 0..steps {
            let (p, best) = norms[j..]
                .iter()
                .enumerate()
                .fold((j, -1.0), |acc, (i, &v)| if v > acc.1 { (i + j, v) } else { acc });
            if best.sqrt() <= tol || first == 0.0 {
                break;
            }
            work.swap(j, p);
            norms.swap(j, p);

            let x = &work[j][j..];
            let xnorm = norm_sqr(x).sqrt();
            let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { C64::new(1.0, 0.0) };
            let alpha = -phase * xnorm;
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vnorm2 = norm_sqr(&v);
            let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };

            for col in work.iter_mut().skip(j) {
                apply_reflector(&v, beta, &mut col[j..]);
            }
            for (i, col) in work.iter().enumerate().skip(j + 1) {
                norms[i] = norm_sqr(&col[j + 1..]);
            }
            reflectors.push(v);
            betas.push(beta);
        }
        let rank = reflectors.len();
        PivotedQr {
            m,
            reflectors,
            betas,
            rank,
        }
    }

    pub fn new(b: &CMatrix) -> Self {
        let m = b.nrows();
        Self::from_columns(m, (0..b.ncols()).map(|j| &b.as_slice()[j * m..(j + 1) * m]))
    }

    /// Factors the listed columns of `h`.
    pub fn from_selected(h: &CMatrix, cols: &[usize]) -> Self {
        let m = h.nrows();
        Self::from_columns(m, cols.iter().map(|&j| &h.as_slice()[j * m..(j + 1) * m]))
    }

    /// Numerical rank of the factored matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `Q^H v`.
    pub fn apply_qh(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.m, "vector length must match the factored row count");
        let mut z = v.to_vec();
        for (j, (r, &beta)) in self.reflectors.iter().zip(&self.betas).enumerate() {
            apply_reflector(r, beta, &mut z[j..]);
        }
        z
    }

    /// Coordinates of `v` in an orthonormal basis of the orthogonal
    /// complement of the column space.
    pub fn complement_coords(&self, v: &[C64]) -> Vec<C64> {
        let mut z = self.apply_qh(v);
        z.drain(..self.rank);
        z
    }

    /// `||(I - P) v||` with `P` the orthogonal projector onto the column space.
    pub fn residual_norm(&self, v: &[C64]) -> f64 {
        norm_sqr(&self.apply_qh(v)[self.rank..]).sqrt()
    }

    /// `(I - P) v`.
    pub fn project_out(&self, v: &[C64]) -> Vec<C64> {
        let mut z = self.apply_qh(v);
        z[..self.rank].iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
        for j in (0..self.rank).rev() {
            apply_reflector(&self.reflectors[j], self.betas[j], &mut z[j..]);
        }
        z
    }
}

#[inline]
fn apply_reflector(v: &[C64], beta: f64, z: &mut [C64]) {
    if beta == 0.0 {
        return;
    }
    let mut dot = C64::new(0.0, 0.0);
    for (a, b) in v.iter().zip(z.iter()) {
        dot += a.conj() * b;
    }
    let s = dot * beta;
    for (a, b) in v.iter().zip(z.iter_mut()) {
        *b -= a * s;
    }
}

/// `||(I - P) y||` for the span of `cols`, without keeping the factor.
///
/// Same pivoted Householder scheme and rank tolerance as [`PivotedQr`], on
/// split real/imaginary storage with downdated column norms. This is the
/// detector's inner loop.
pub fn residual_of_columns<'a, I>(m: usize, cols: I, y: &[C64]) -> f64
where
    I: IntoIterator<Item = &'a [C64]>,
{
    assert_eq!(y.len(), m, "vector length must match the column length");
    let cols = cols.into_iter();
    let hint = cols.size_hint().0 * m;
    let mut re: Vec<f64> = Vec::with_capacity(hint);
    let mut im: Vec<f64> = Vec::with_capacity(hint);
    for c in cols {
        debug_assert_eq!(c.len(), m);
        re.extend(c.iter().map(|z| z.re));
        im.extend(c.iter().map(|z| z.im));
    }
    let k = if m == 0 { 0 } else { re.len() / m };
    let mut yr: Vec<f64> = y.iter().map(|z| z.re).collect();
    let mut yi: Vec<f64> = y.iter().map(|z| z.im).collect();

    let sq = |r: &[f64], i: &[f64]| r.iter().zip(i).map(|(a, b)| a * a + b * b).sum::<f64>();
    let mut norms: Vec<f64> = (0..k).map(|j| sq(&re[j * m..(j + 1) * m], &im[j * m..(j + 1) * m])).collect();
    let mut exact = norms.clone();
    let first = norms.iter().cloned().fold(0.0, f64::max).sqrt();
    let tol = first * (m.max(k) as f64) * f64::EPSILON * 10.0;

    let mut rank = 0;
    for j in 0..m.min(k) {
        let (p, best) = norms[j..]
            .iter()
            .enumerate()
            .fold((j, -1.0), |acc, (i, &v)| if v > acc.1 { (i + j, v) } else { acc });
        if first == 0.0 || best.sqrt() <= tol {
            break;
        }
        if p != j {
            let (a, b) = re.split_at_mut(p * m);
            a[j * m..(j + 1) * m].swap_with_slice(&mut b[..m]);
            let (a, b) = im.split_at_mut(p * m);
            a[j * m..(j + 1) * m].swap_with_slice(&mut b[..m]);
            norms.swap(j, p);
            exact.swap(j, p);
        }
        // Reflector v overwrites rows j.. of column j.
        let (head_re, tail_re) = re.split_at_mut((j + 1) * m);
        let (head_im, tail_im) = im.split_at_mut((j + 1) * m);
        let vr = &mut head_re[j * m + j..];
        let vi = &mut head_im[j * m + j..];
        let xnorm = sq(vr, vi).sqrt();
        let x0 = C64::new(vr[0], vi[0]);
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        vr[0] -= alpha.re;
        vi[0] -= alpha.im;
        let vnorm2 = sq(vr, vi);
        if vnorm2 == 0.0 {
            break;
        }
        let beta = 2.0 / vnorm2;
        let (vr, vi) = (&*vr, &*vi);
        let rows = m - j;
        for i in 0..k - j - 1 {
            let cr = &mut tail_re[i * m + j..i * m + m];
            let ci = &mut tail_im[i * m + j..i * m + m];
            reflect(vr, vi, beta, cr, ci);
            // Drop the eliminated entry from the running norm; recompute
            // when cancellation has eaten most of it.
            let col = j + 1 + i;
            norms[col] -= cr[0] * cr[0] + ci[0] * ci[0];
            if norms[col] <= 1e-6 * exact[col] {
                norms[col] = sq(&cr[1..], &ci[1..]);
                exact[col] = norms[col];
            }
            debug_assert_eq!(cr.len(), rows);
        }
        reflect(vr, vi, beta, &mut yr[j..], &mut yi[j..]);
        rank += 1;
    }
    sq(&yr[rank..], &yi[rank..]).sqrt()
}

/// `z -= beta v (v^H z)` on split storage.
#[inline]
fn reflect(vr: &[f64], vi: &[f64], beta: f64, zr: &mut [f64], zi: &mut [f64]) {
    const W: usize = 4;
    let (mut sr, mut si) = ([0.0f64; W], [0.0f64; W]);
    let body = vr.len() - vr.len() % W;
    for (((a, b), c), d) in vr[..body]
        .chunks_exact(W)
        .zip(vi[..body].chunks_exact(W))
        .zip(zr[..body].chunks_exact(W))
        .zip(zi[..body].chunks_exact(W))
    {
        for l in 0..W {
            sr[l] += a[l] * c[l] + b[l] * d[l];
            si[l] += a[l] * d[l] - b[l] * c[l];
        }
    }
    let mut dr: f64 = sr.iter().sum();
    let mut di: f64 = si.iter().sum();
    for t in body..vr.len() {
        dr += vr[t] * zr[t] + vi[t] * zi[t];
        di += vr[t] * zi[t] - vi[t] * zr[t];
    }
    let (dr, di) = (dr * beta, di * beta);
    for (((a, b), c), d) in vr.iter().zip(vi).zip(zr.iter_mut()).zip(zi.iter_mut()) {
        *c -= a * dr - b * di;
        *d -= a * di + b * dr;
    }
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b`.
pub(crate) fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// Distance from `y` to the column space of `b`, `||(I - P) y||`.
///
/// Rank-deficient `b` is handled: the projection targets the numerical
/// column space found by the pivoted factorization. A matrix with no columns
/// (or only zero columns) has the trivial column space.
pub fn projection_residual(b: &CMatrix, y: &CVector) -> f64 {
    let m = b.nrows();
    residual_of_columns(m, (0..b.ncols()).map(|j| &b.as_slice()[j * m..(j + 1) * m]), y.as_slice())
}
