//! Forward and backward kernels for every layer kind.
//!
//! Batched kernels parallelize over fixed-size groups of batch items and
//! reduce parameter gradients group by group in index order, so results are
//! bit-identical regardless of the thread count.

use rand::Rng;
use rayon::prelude::*;

use super::tensor::{Scalar, Tensor};
use super::Mode;
use crate::error::{Error, Result};

/// Batch items per parallel work unit.
const GROUP: usize = 16;

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the previous running statistic in the exponential average.
pub const BN_DECAY: f64 = 0.9;

fn dims4(t: &Tensor<impl Scalar>, what: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [b, h, w, c] => Ok([b, h, w, c]),
        ref s => Err(Error::shape(format!("{what} must be batch×h×w×c, got {s:?}"))),
    }
}

fn add_into<T: Scalar>(acc: &mut [T], part: &[T]) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += *p;
    }
}

#[derive(Clone, Copy)]
struct ConvGeom {
    h: usize,
    w: usize,
    c: usize,
    kh: usize,
    kw: usize,
    f: usize,
}

impl ConvGeom {
    fn pad_top(&self) -> usize {
        (self.kh - 1) / 2
    }

    fn pad_left(&self) -> usize {
        (self.kw - 1) / 2
    }

    /// Valid kernel rows for output row `oh` (input row `oh + ky − pad` in range).
    fn rows(&self, oh: usize) -> std::ops::Range<usize> {
        let pt = self.pad_top();
        pt.saturating_sub(oh)..self.kh.min(self.h + pt - oh)
    }

    fn cols(&self, ow: usize) -> std::ops::Range<usize> {
        let pl = self.pad_left();
        pl.saturating_sub(ow)..self.kw.min(self.w + pl - ow)
    }
}

fn conv_item<T: Scalar>(g: ConvGeom, x: &[T], wts: &[T], bias: &[T], y: &mut [T]) {
    let (pt, pl) = (g.pad_top(), g.pad_left());
    for oh in 0..g.h {
        for ow in 0..g.w {
            let pos = oh * g.w + ow;
            let out = &mut y[pos * g.f..(pos + 1) * g.f];
            out.copy_from_slice(bias);
            for ky in g.rows(oh) {
                let ih = oh + ky - pt;
                for kx in g.cols(ow) {
                    let iw = ow + kx - pl;
                    let xin = &x[(ih * g.w + iw) * g.c..][..g.c];
                    let wk = &wts[(ky * g.kw + kx) * g.c * g.f..][..g.c * g.f];
                    for (xv, wrow) in xin.iter().zip(wk.chunks_exact(g.f)) {
                        for (o, wv) in out.iter_mut().zip(wrow) {
                            *o += *xv * *wv;
                        }
                    }
                }
            }
        }
    }
}

fn conv_item_backward<T: Scalar>(
    g: ConvGeom,
    x: &[T],
    wts: &[T],
    gy: &[T],
    gx: &mut [T],
    gw: &mut [T],
    gb: &mut [T],
) {
    let (pt, pl) = (g.pad_top(), g.pad_left());
    for oh in 0..g.h {
        for ow in 0..g.w {
            let pos = oh * g.w + ow;
            let go = &gy[pos * g.f..(pos + 1) * g.f];
            add_into(gb, go);
            for ky in g.rows(oh) {
                let ih = oh + ky - pt;
                for kx in g.cols(ow) {
                    let iw = ow + kx - pl;
                    let base = (ih * g.w + iw) * g.c;
                    let koff = (ky * g.kw + kx) * g.c * g.f;
                    let xin = &x[base..base + g.c];
                    let gxin = &mut gx[base..base + g.c];
                    let wk = &wts[koff..koff + g.c * g.f];
                    let gwk = &mut gw[koff..koff + g.c * g.f];
                    for ci in 0..g.c {
                        let xv = xin[ci];
                        let gwrow = &mut gwk[ci * g.f..(ci + 1) * g.f];
                        for (gwv, gov) in gwrow.iter_mut().zip(go) {
                            *gwv += xv * *gov;
                        }
                        let wrow = &wk[ci * g.f..(ci + 1) * g.f];
                        let mut acc = T::zero();
                        for (wv, gov) in wrow.iter().zip(go) {
                            acc += *wv * *gov;
                        }
                        gxin[ci] += acc;
                    }
                }
            }
        }
    }
}

fn conv_geom<T: Scalar>(x: &Tensor<T>, weights: &Tensor<T>, bias: &[T]) -> Result<(usize, ConvGeom)> {
    let [b, h, w, c] = dims4(x, "convolution input")?;
    let [kh, kw, kc, f] = match *weights.shape() {
        [kh, kw, kc, f] => [kh, kw, kc, f],
        ref s => return Err(Error::shape(format!("conv weights must be kh×kw×c×f, got {s:?}"))),
    };
    if kc != c {
        return Err(Error::shape(format!("conv weights expect {kc} channels, input has {c}")));
    }
    if bias.len() != f {
        return Err(Error::shape(format!("conv bias has {} entries for {f} filters", bias.len())));
    }
    if kh == 0 || kw == 0 || f == 0 {
        return Err(Error::shape("empty convolution kernel"));
    }
    Ok((b, ConvGeom { h, w, c, kh, kw, f }))
}

/// 'Same'-padded unit-stride cross-correlation.
/// `x`: `b×h×w×c`, `weights`: `kh×kw×c×f`, output `b×h×w×f`.
pub fn conv_forward<T: Scalar>(x: &Tensor<T>, weights: &Tensor<T>, bias: &[T]) -> Result<Tensor<T>> {
    let (b, g) = conv_geom(x, weights, bias)?;
    let in_len = g.h * g.w * g.c;
    let out_len = g.h * g.w * g.f;
    let mut y = vec![T::zero(); b * out_len];
    if b > 0 {
        y.par_chunks_mut(out_len)
            .zip(x.data().par_chunks(in_len))
            .for_each(|(yi, xi)| conv_item(g, xi, weights.data(), bias, yi));
    }
    Tensor::new(vec![b, g.h, g.w, g.f], y)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

/// Exact gradients of [`conv_forward`]; `x` is the forward input.
pub fn conv_backward<T: Scalar>(grad_out: &Tensor<T>, x: &Tensor<T>, weights: &Tensor<T>) -> Result<ConvGrads<T>> {
    let f = *weights.shape().last().unwrap_or(&0);
    let zero_bias = vec![T::zero(); f];
    let (b, g) = conv_geom(x, weights, &zero_bias)?;
    if grad_out.shape() != [b, g.h, g.w, g.f] {
        return Err(Error::shape(format!(
            "conv upstream gradient {:?} does not match output {:?}",
            grad_out.shape(),
            [b, g.h, g.w, g.f]
        )));
    }
    let in_len = g.h * g.w * g.c;
    let out_len = g.h * g.w * g.f;
    let wlen = weights.len();
    let mut gx = vec![T::zero(); x.len()];
    let partials: Vec<(Vec<T>, Vec<T>)> = gx
        .par_chunks_mut(in_len * GROUP)
        .zip(x.data().par_chunks(in_len * GROUP))
        .zip(grad_out.data().par_chunks(out_len * GROUP))
        .map(|((gxg, xg), gyg)| {
            let mut gw = vec![T::zero(); wlen];
            let mut gb = vec![T::zero(); g.f];
            for ((gxi, xi), gyi) in gxg
                .chunks_mut(in_len)
                .zip(xg.chunks(in_len))
                .zip(gyg.chunks(out_len))
            {
                conv_item_backward(g, xi, weights.data(), gyi, gxi, &mut gw, &mut gb);
            }
            (gw, gb)
        })
        .collect();
    let mut gw = vec![T::zero(); wlen];
    let mut gb = vec![T::zero(); g.f];
    for (pw, pb) in &partials {
        add_into(&mut gw, pw);
        add_into(&mut gb, pb);
    }
    Ok(ConvGrads {
        input: Tensor::new(x.shape().to_vec(), gx)?,
        weights: Tensor::new(weights.shape().to_vec(), gw)?,
        bias: gb,
    })
}

/// Per-channel affine parameters plus running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    /// `(mean, variance)`; absent until the first training batch.
    pub running: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    /// Normalized input before the affine transform.
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Normalizes over every axis but the last (channel) one. Train mode uses
/// batch statistics and folds them into the running averages; infer mode
/// uses the running statistics.
pub fn batchnorm_forward<T: Scalar>(
    x: &Tensor<T>,
    bn: &mut BatchNorm<T>,
    mode: Mode,
) -> Result<(Tensor<T>, Option<BatchNormCache<T>>)> {
    let c = *x.shape().last().ok_or_else(|| Error::shape("batch norm on a scalar"))?;
    if c != bn.channels() {
        return Err(Error::shape(format!(
            "batch norm has {} channels, input has {c}",
            bn.channels()
        )));
    }
    let count = x.len() / c.max(1);
    match mode {
        Mode::Infer => {
            let (mean, var) = bn.running.as_ref().ok_or(Error::MissingStatistics)?;
            let scale: Vec<T> = (0..c)
                .map(|k| bn.gamma[k] / (var[k] + T::of(BN_EPSILON)).sqrt())
                .collect();
            let shift: Vec<T> = (0..c).map(|k| bn.beta[k] - mean[k] * scale[k]).collect();
            let mut y = x.data().to_vec();
            for row in y.chunks_exact_mut(c) {
                for k in 0..c {
                    row[k] = row[k] * scale[k] + shift[k];
                }
            }
            Ok((Tensor::new(x.shape().to_vec(), y)?, None))
        }
        Mode::Train => {
            if count == 0 {
                return Err(Error::shape("batch norm needs a non-empty batch"));
            }
            let mut sum = vec![0f64; c];
            for row in x.data().chunks_exact(c) {
                for k in 0..c {
                    sum[k] += row[k].f64();
                }
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
            let mut sq = vec![0f64; c];
            for row in x.data().chunks_exact(c) {
                for k in 0..c {
                    let d = row[k].f64() - mean[k];
                    sq[k] += d * d;
                }
            }
            let var: Vec<f64> = sq.iter().map(|s| s / count as f64).collect();
            let inv_std: Vec<T> = var.iter().map(|v| T::of(1.0 / (v + BN_EPSILON).sqrt())).collect();
            let mean_t: Vec<T> = mean.iter().map(|&m| T::of(m)).collect();
            let mut xhat = x.data().to_vec();
            let mut y = x.data().to_vec();
            for (hr, yr) in xhat.chunks_exact_mut(c).zip(y.chunks_exact_mut(c)) {
                for k in 0..c {
                    hr[k] = (hr[k] - mean_t[k]) * inv_std[k];
                    yr[k] = hr[k] * bn.gamma[k] + bn.beta[k];
                }
            }
            bn.running = Some(match bn.running.take() {
                None => (mean_t, var.iter().map(|&v| T::of(v)).collect()),
                Some((rm, rv)) => {
                    let d = T::of(BN_DECAY);
                    let e = T::one() - d;
                    (
                        rm.iter().zip(&mean).map(|(&r, &m)| d * r + e * T::of(m)).collect(),
                        rv.iter().zip(&var).map(|(&r, &v)| d * r + e * T::of(v)).collect(),
                    )
                }
            });
            Ok((Tensor::new(x.shape().to_vec(), y)?, Some(BatchNormCache { xhat, inv_std })))
        }
    }
}

/// Returns `(grad_x, grad_gamma, grad_beta)` for a train-mode forward pass.
pub fn batchnorm_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &BatchNormCache<T>,
    gamma: &[T],
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let c = gamma.len();
    if grad_out.len() != cache.xhat.len() || c == 0 || grad_out.len() % c != 0 {
        return Err(Error::shape("batch norm gradient does not match cached forward pass"));
    }
    let count = (grad_out.len() / c) as f64;
    let mut dgamma = vec![0f64; c];
    let mut dbeta = vec![0f64; c];
    for (gr, hr) in grad_out.data().chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
        for k in 0..c {
            dbeta[k] += gr[k].f64();
            dgamma[k] += gr[k].f64() * hr[k].f64();
        }
    }
    // dx = γ·inv_std/n · (n·dy − Σdy − x̂·Σ(dy·x̂))
    let mut gx = grad_out.data().to_vec();
    for (gr, hr) in gx.chunks_exact_mut(c).zip(cache.xhat.chunks_exact(c)) {
        for k in 0..c {
            let v = gamma[k].f64() * cache.inv_std[k].f64() / count
                * (count * gr[k].f64() - dbeta[k] - hr[k].f64() * dgamma[k]);
            gr[k] = T::of(v);
        }
    }
    Ok((
        Tensor::new(grad_out.shape().to_vec(), gx)?,
        dgamma.into_iter().map(T::of).collect(),
        dbeta.into_iter().map(T::of).collect(),
    ))
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().map(|&v| v.max(T::zero())).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// `x` is the forward input; the gradient at exactly zero is taken as zero.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, x: &Tensor<T>) -> Tensor<T> {
    let data = grad_out
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Non-overlapping `ph × pw` max pooling. Also returns, per output element,
/// the flat input index that won (first occurrence on ties).
pub fn maxpool_forward<T: Scalar>(x: &Tensor<T>, ph: usize, pw: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    let [b, h, w, c] = dims4(x, "max pool input")?;
    if ph == 0 || pw == 0 || h % ph != 0 || w % pw != 0 {
        return Err(Error::domain(format!("cannot pool {h}×{w} with {ph}×{pw} windows")));
    }
    let (oh, ow) = (h / ph, w / pw);
    let mut y = Vec::with_capacity(b * oh * ow * c);
    let mut idx = Vec::with_capacity(y.capacity());
    let xd = x.data();
    for bi in 0..b {
        for i in 0..oh {
            for j in 0..ow {
                for k in 0..c {
                    let mut best = usize::MAX;
                    for dy in 0..ph {
                        for dx in 0..pw {
                            let at = ((bi * h + i * ph + dy) * w + j * pw + dx) * c + k;
                            if best == usize::MAX || xd[at] > xd[best] {
                                best = at;
                            }
                        }
                    }
                    y.push(xd[best]);
                    idx.push(best);
                }
            }
        }
    }
    Ok((Tensor::new(vec![b, oh, ow, c], y)?, idx))
}

pub fn maxpool_backward<T: Scalar>(grad_out: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape("max pool gradient does not match cached indices"));
    }
    let mut gx = Tensor::zeros(input_shape.to_vec());
    let gd = gx.data_mut();
    for (&g, &i) in grad_out.data().iter().zip(argmax) {
        gd[i] += g;
    }
    Ok(gx)
}

/// Inverted dropout. In train mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1 − rate)`; the scale mask is
/// returned for the backward pass. Infer mode (or rate 0) is the identity.
pub fn dropout<T: Scalar>(x: &Tensor<T>, rate: f32, mode: Mode, rng: &mut impl Rng) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::domain(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - f64::from(rate)));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.random::<f32>() < rate { T::zero() } else { keep })
        .collect();
    let y = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::new(x.shape().to_vec(), y)?, Some(mask)))
}

fn flat_dims<T: Scalar>(x: &Tensor<T>) -> (usize, usize) {
    (x.batch(), x.item_len())
}

/// `y = x·W + b` with `x` flattened per batch item; `weights` is `d × u`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, weights: &Tensor<T>, bias: &[T]) -> Result<Tensor<T>> {
    let (b, d) = flat_dims(x);
    let (wd, u) = match *weights.shape() {
        [wd, u] => (wd, u),
        ref s => return Err(Error::shape(format!("dense weights must be d×u, got {s:?}"))),
    };
    if wd != d || bias.len() != u {
        return Err(Error::shape(format!(
            "dense layer {wd}→{u} (bias {}) cannot take {d} inputs",
            bias.len()
        )));
    }
    let mut y = vec![T::zero(); b * u];
    if b > 0 {
        y.par_chunks_mut(u).zip(x.data().par_chunks(d)).for_each(|(yi, xi)| {
            yi.copy_from_slice(bias);
            for (xv, wrow) in xi.iter().zip(weights.data().chunks_exact(u)) {
                for (o, wv) in yi.iter_mut().zip(wrow) {
                    *o += *xv * *wv;
                }
            }
        });
    }
    Tensor::new(vec![b, u], y)
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

pub fn dense_backward<T: Scalar>(grad_out: &Tensor<T>, x: &Tensor<T>, weights: &Tensor<T>) -> Result<DenseGrads<T>> {
    let (b, d) = flat_dims(x);
    let u = weights.shape().get(1).copied().unwrap_or(0);
    if grad_out.len() != b * u || weights.len() != d * u {
        return Err(Error::shape("dense gradient does not match forward pass"));
    }
    let mut gx = vec![T::zero(); b * d];
    let partials: Vec<(Vec<T>, Vec<T>)> = gx
        .par_chunks_mut(d * GROUP)
        .zip(x.data().par_chunks(d * GROUP))
        .zip(grad_out.data().par_chunks(u * GROUP))
        .map(|((gxg, xg), gyg)| {
            let mut gw = vec![T::zero(); d * u];
            let mut gb = vec![T::zero(); u];
            for ((gxi, xi), gyi) in gxg.chunks_mut(d).zip(xg.chunks(d)).zip(gyg.chunks(u)) {
                add_into(&mut gb, gyi);
                for ((gxv, xv), (gwrow, wrow)) in gxi
                    .iter_mut()
                    .zip(xi)
                    .zip(gw.chunks_exact_mut(u).zip(weights.data().chunks_exact(u)))
                {
                    for (gwv, gv) in gwrow.iter_mut().zip(gyi) {
                        *gwv += *xv * *gv;
                    }
                    let mut acc = T::zero();
                    for (wv, gv) in wrow.iter().zip(gyi) {
                        acc += *wv * *gv;
                    }
                    *gxv = acc;
                }
            }
            (gw, gb)
        })
        .collect();
    let mut gw = vec![T::zero(); d * u];
    let mut gb = vec![T::zero(); u];
    for (pw, pb) in &partials {
        add_into(&mut gw, pw);
        add_into(&mut gb, pb);
    }
    Ok(DenseGrads {
        input: Tensor::new(x.shape().to_vec(), gx)?,
        weights: Tensor::new(weights.shape().to_vec(), gw)?,
        bias: gb,
    })
}

/// Row-wise softmax of `b × u` logits (max-shifted).
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let (b, u) = flat_dims(logits);
    let mut p = logits.data().to_vec();
    for row in p.chunks_exact_mut(u.max(1)) {
        let m = row.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
        let mut s = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v = *v / s;
        }
    }
    Tensor::new(vec![b, u], p).expect("same size")
}

/// Mean cross-entropy of softmax(logits) against integer labels.
/// Returns `(loss, probs, grad_logits)`.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>, Tensor<T>)> {
    let (b, u) = flat_dims(logits);
    if labels.len() != b {
        return Err(Error::shape(format!("{} labels for a batch of {b}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= u) {
        return Err(Error::domain(format!("label {bad} outside {u} classes")));
    }
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    for (row, &l) in logits.data().chunks_exact(u).zip(labels) {
        let m = row.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.f64()));
        let lse = m + row.iter().map(|v| (v.f64() - m).exp()).sum::<f64>().ln();
        loss += lse - row[l].f64();
    }
    loss /= b as f64;
    let inv_b = T::of(1.0 / b as f64);
    let mut grad = probs.data().to_vec();
    for (row, &l) in grad.chunks_exact_mut(u).zip(labels) {
        row[l] -= T::one();
        for v in row.iter_mut() {
            *v *= inv_b;
        }
    }
    Ok((loss, probs, Tensor::new(vec![b, u], grad)?))
}

/// Dense layer followed by softmax cross-entropy: `(loss, probs)`.
pub fn dense_softmax_xent<T: Scalar>(
    x: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
    labels: &[usize],
) -> Result<(f64, Tensor<T>)> {
    let logits = dense_forward(x, weights, bias)?;
    let (loss, probs, _) = softmax_xent(&logits, labels)?;
    Ok((loss, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = t(&[2, 3, 2, 2], (0..24).map(|v| v as f64 * 0.5 - 3.0).collect());
        // 1×1 kernel mapping channel c to filter c
        let w = t(&[1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let y = conv_forward(&x, &w, &[0.0, 0.0]).unwrap();
        assert_eq!(y, x);
        let g = conv_backward(&y, &x, &w).unwrap();
        assert_eq!(g.input, y);
    }

    #[test]
    fn box_kernel_with_same_padding() {
        let x = t(&[1, 6, 1, 1], vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let w = t(&[3, 1, 1, 1], vec![1.0, 1.0, 1.0]);
        let y = conv_forward(&x, &w, &[0.0]).unwrap();
        assert_eq!(y.data(), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn conv_rejects_mismatched_channels() {
        let x = t(&[1, 4, 1, 2], vec![0.0; 8]);
        let w = t(&[3, 1, 1, 1], vec![1.0; 3]);
        assert!(conv_forward(&x, &w, &[0.0]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = t(&[2, 5, 1, 2], (0..20).map(|v| (v as f64).sin()).collect());
        let w = t(&[3, 1, 2, 3], (0..18).map(|v| (v as f64).cos()).collect());
        let g = conv_backward(&Tensor::zeros(vec![2, 5, 1, 3]), &x, &w).unwrap();
        assert!(g.input.data().iter().chain(g.weights.data()).chain(&g.bias).all(|&v| v == 0.0));
    }

    #[test]
    fn maxpool_examples() {
        let x = t(&[1, 4, 1, 1], vec![1.0, 3.0, 2.0, 8.0]);
        let (y, idx) = maxpool_forward(&x, 2, 1).unwrap();
        assert_eq!(y.data(), &[3.0, 8.0]);
        let gx = maxpool_backward(&t(&[1, 2, 1, 1], vec![1.0, 1.0]), &idx, x.shape()).unwrap();
        assert_eq!(gx.data(), &[0.0, 1.0, 0.0, 1.0]);
        let tie = t(&[1, 2, 1, 1], vec![5.0, 5.0]);
        let (_, idx) = maxpool_forward(&tie, 2, 1).unwrap();
        assert_eq!(idx, vec![0]);
        assert!(maxpool_forward(&t(&[1, 3, 1, 1], vec![0.0; 3]), 2, 1).is_err());
    }

    #[test]
    fn dropout_modes() {
        let x = t(&[1, 10, 1, 1], (0..10).map(f64::from).collect());
        let mut r = rng::seeded(1);
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut r).unwrap().0, x);
        assert_eq!(dropout(&x, 0.7, Mode::Infer, &mut r).unwrap().0, x);
        assert!(dropout(&x, 1.0, Mode::Train, &mut r).is_err());
    }

    #[test]
    fn dropout_statistics() {
        let n = 1_000_000;
        let x: Tensor<f32> = Tensor::new(vec![1, n, 1, 1], vec![1.0; n]).unwrap();
        let (y, _) = dropout(&x, 0.5, Mode::Train, &mut rng::seeded(2)).unwrap();
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((survivors - 0.5).abs() < 0.002);
        let mean = y.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01);
    }

    #[test]
    fn batchnorm_train_statistics() {
        let data: Vec<f64> = (0..60).map(|v| ((v * 7) % 13) as f64 * 1.5 - 4.0).collect();
        let x = t(&[5, 4, 1, 3], data);
        let mut bn = BatchNorm::<f64>::new(3);
        let (y, _) = batchnorm_forward(&x, &mut bn, Mode::Train).unwrap();
        for k in 0..3 {
            let vals: Vec<f64> = y.data().iter().skip(k).step_by(3).copied().collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn batchnorm_degenerate_and_uninitialised() {
        let x = t(&[4, 2, 1, 1], vec![3.0; 8]);
        let mut bn = BatchNorm::<f64>::new(1);
        assert!(matches!(batchnorm_forward(&x, &mut bn, Mode::Infer), Err(Error::MissingStatistics)));
        let (y, _) = batchnorm_forward(&x, &mut bn, Mode::Train).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        let (mean, var) = bn.running.clone().unwrap();
        assert_eq!(mean, vec![3.0]);
        assert_eq!(var, vec![0.0]);
    }

    #[test]
    fn batchnorm_running_average_decay() {
        let mut bn = BatchNorm::<f64>::new(1);
        batchnorm_forward(&t(&[2, 1, 1, 1], vec![0.0, 2.0]), &mut bn, Mode::Train).unwrap();
        batchnorm_forward(&t(&[2, 1, 1, 1], vec![10.0, 10.0]), &mut bn, Mode::Train).unwrap();
        let (mean, var) = bn.running.unwrap();
        assert!((mean[0] - (0.9 * 1.0 + 0.1 * 10.0)).abs() < 1e-12);
        assert!((var[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn softmax_loss_examples() {
        let logits = t(&[3, 128], vec![0.25; 384]);
        let (loss, probs, _) = softmax_xent(&logits, &[0, 5, 127]).unwrap();
        assert!((loss - 128f64.ln()).abs() < 1e-12);
        for row in probs.data().chunks(128) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let mut sharp = vec![0.0; 4];
        sharp[2] = 1000.0;
        let (loss, _, _) = softmax_xent(&t(&[1, 4], sharp), &[2]).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(softmax_xent(&t(&[1, 4], vec![0.0; 4]), &[4]).is_err());
    }

    #[test]
    fn dense_softmax_xent_uniform_weights() {
        let x = t(&[2, 3, 1, 1], vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]);
        let w = Tensor::zeros(vec![3, 2]);
        let (loss, probs) = dense_softmax_xent(&x, &w, &[0.0, 0.0], &[1, 0]).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert!(probs.data().iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }
}
