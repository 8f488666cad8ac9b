//! Row-wise kernels with explicit backward passes.

use super::real::{gemm, MatMut, MatRef};
use super::Real;

pub(crate) const LN_EPS: f64 = 1e-5;

/// `y = x·W + b` with `W` stored `(in × out)` row-major.
pub(crate) fn linear<F: Real>(
    x: &[F],
    rows: usize,
    w: &[F],
    b: &[F],
    d_in: usize,
    d_out: usize,
) -> Vec<F> {
    let mut y = Vec::with_capacity(rows * d_out);
    for _ in 0..rows {
        y.extend_from_slice(b);
    }
    gemm(
        F::one(),
        MatRef::new(x, rows, d_in),
        MatRef::new(w, d_in, d_out),
        F::one(),
        MatMut::new(&mut y, rows, d_out),
    );
    y
}

/// Accumulates `dW += xᵀ·dy`, `db += Σ dy`, and returns `dx = dy·Wᵀ`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<F: Real>(
    x: &[F],
    dy: &[F],
    rows: usize,
    w: &[F],
    d_in: usize,
    d_out: usize,
    dw: &mut [F],
    db: &mut [F],
) -> Vec<F> {
    gemm(
        F::one(),
        MatRef::new(x, rows, d_in).t(),
        MatRef::new(dy, rows, d_out),
        F::one(),
        MatMut::new(dw, d_in, d_out),
    );
    for r in 0..rows {
        for (acc, g) in db.iter_mut().zip(&dy[r * d_out..(r + 1) * d_out]) {
            *acc += *g;
        }
    }
    let mut dx = vec![F::zero(); rows * d_in];
    gemm(
        F::one(),
        MatRef::new(dy, rows, d_out),
        MatRef::new(w, d_in, d_out).t(),
        F::zero(),
        MatMut::new(&mut dx, rows, d_in),
    );
    dx
}

pub(crate) struct NormCache<F> {
    pub xhat: Vec<F>,
    pub rstd: Vec<F>,
}

pub(crate) fn layer_norm<F: Real>(
    x: &[F],
    rows: usize,
    d: usize,
    gamma: &[F],
    beta: &[F],
) -> (Vec<F>, NormCache<F>) {
    let eps = F::lit(LN_EPS);
    let n = F::from_usize(d).unwrap();
    let mut y = vec![F::zero(); rows * d];
    let mut xhat = vec![F::zero(); rows * d];
    let mut rstd = vec![F::zero(); rows];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<F>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
        let rs = F::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (row[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * gamma[j] + beta[j];
        }
    }
    (y, NormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward<F: Real>(
    dy: &[F],
    cache: &NormCache<F>,
    rows: usize,
    d: usize,
    gamma: &[F],
    dgamma: &mut [F],
    dbeta: &mut [F],
) -> Vec<F> {
    let n = F::from_usize(d).unwrap();
    let mut dx = vec![F::zero(); rows * d];
    let mut g = vec![F::zero(); d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        for j in 0..d {
            dgamma[j] += dyr[j] * xh[j];
            dbeta[j] += dyr[j];
            g[j] = dyr[j] * gamma[j];
        }
        let mean_g = g.iter().copied().sum::<F>() / n;
        let mean_gx = g.iter().zip(xh).map(|(&a, &b)| a * b).sum::<F>() / n;
        let rs = cache.rstd[r];
        for j in 0..d {
            dx[r * d + j] = rs * (g[j] - mean_g - xh[j] * mean_gx);
        }
    }
    dx
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub(crate) fn gelu<F: Real>(x: F) -> F {
    let half = F::lit(0.5);
    let inner = F::lit(SQRT_2_OVER_PI) * (x + F::lit(GELU_C) * x * x * x);
    half * x * (F::one() + inner.tanh())
}

pub(crate) fn gelu_grad<F: Real>(x: F) -> F {
    let half = F::lit(0.5);
    let c = F::lit(SQRT_2_OVER_PI);
    let inner = c * (x + F::lit(GELU_C) * x * x * x);
    let t = inner.tanh();
    let dinner = c * (F::one() + F::lit(3.0 * GELU_C) * x * x);
    half * (F::one() + t) + half * x * (F::one() - t * t) * dinner
}

/// Numerically stable in-place softmax over one row. Entries with
/// `allowed[j] == false` get probability zero.
pub(crate) fn softmax_row<F: Real>(row: &mut [F], allowed: Option<&[bool]>) {
    let ok = |j: usize| allowed.is_none_or(|a| a[j]);
    let max = row
        .iter()
        .enumerate()
        .filter(|(j, _)| ok(*j))
        .map(|(_, &v)| v)
        .fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        row.iter_mut().for_each(|v| *v = F::zero());
        return;
    }
    let mut sum = F::zero();
    for (j, v) in row.iter_mut().enumerate() {
        *v = if ok(j) { (*v - max).exp() } else { F::zero() };
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Mean cross-entropy of row-wise logits against targets. Returns the loss
/// and `d loss / d logits` scaled by `scale`.
pub(crate) fn cross_entropy<F: Real>(
    logits: &[F],
    classes: usize,
    targets: &[usize],
    scale: F,
) -> (F, Vec<F>, Vec<F>) {
    let rows = targets.len();
    let mut probs = logits.to_vec();
    let mut loss = F::zero();
    for (r, &t) in targets.iter().enumerate() {
        let row = &mut probs[r * classes..(r + 1) * classes];
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
        loss += lse - row[t];
        softmax_row(row, None);
    }
    let n = F::from_usize(rows.max(1)).unwrap();
    loss /= n;
    let mut grad = probs.clone();
    for (r, &t) in targets.iter().enumerate() {
        grad[r * classes + t] -= F::one();
    }
    let k = scale / n;
    grad.iter_mut().for_each(|g| *g *= k);
    (loss, grad, probs)
}
