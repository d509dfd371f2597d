use rand::Rng;
use rand_distr::StandardNormal;

use super::layers::{self, BatchNorm, BatchNormCache};
use super::spec::{LayerSpec, NetworkSpec, Shape3};
use super::tensor::{Scalar, Tensor};
use super::Mode;
use crate::error::{Error, Result};

/// A layer with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv { weights: Tensor<T>, bias: Vec<T> },
    BatchNorm(BatchNorm<T>),
    Relu,
    MaxPool { ph: usize, pw: usize },
    Dropout { rate: f32 },
    Dense { weights: Tensor<T>, bias: Vec<T> },
    Softmax,
}

/// Which regularization applies to a parameter slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Convolution or dense weights; L2 applies.
    Weight,
    Bias,
    /// Batch-norm scale and shift.
    Affine,
}

enum Cache<T> {
    Input(Tensor<T>),
    BatchNorm(BatchNormCache<T>),
    Pool { argmax: Vec<usize>, input_shape: Vec<usize> },
    Dropout(Option<Vec<T>>),
    None,
}

/// Forward activations kept for the backward pass.
pub struct ForwardTrace<T> {
    caches: Vec<Cache<T>>,
    pub logits: Tensor<T>,
}

/// Gradients for one layer, aligned with [`Network::params_mut`].
#[derive(Debug, Clone)]
pub enum LayerGrads<T> {
    Conv { weights: Vec<T>, bias: Vec<T> },
    BatchNorm { gamma: Vec<T>, beta: Vec<T> },
    Dense { weights: Vec<T>, bias: Vec<T> },
    None,
}

impl<T> LayerGrads<T> {
    pub fn slices(&self) -> Vec<&[T]> {
        match self {
            LayerGrads::Conv { weights, bias } | LayerGrads::Dense { weights, bias } => vec![weights, bias],
            LayerGrads::BatchNorm { gamma, beta } => vec![gamma, beta],
            LayerGrads::None => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    spec: NetworkSpec,
    layers: Vec<Layer<T>>,
}

fn he_normal<T: Scalar>(len: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..len)
        .map(|_| T::of(rng.sample::<f64, _>(StandardNormal) * std))
        .collect()
}

impl<T: Scalar> Network<T> {
    /// Zero biases, unit/zero batch-norm affine, He-normal weights.
    pub fn init(spec: &NetworkSpec, rng: &mut impl Rng) -> Result<Self> {
        let shapes = spec.infer_shapes()?;
        let layers = spec
            .layers
            .iter()
            .zip(&shapes)
            .map(|(l, x)| match *l {
                LayerSpec::Conv { filters, kh, kw } => {
                    let fan_in = kh * kw * x.c;
                    Layer::Conv {
                        weights: Tensor::new(vec![kh, kw, x.c, filters], he_normal(fan_in * filters, fan_in, rng))
                            .expect("sized"),
                        bias: vec![T::zero(); filters],
                    }
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(x.c)),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool { ph, pw } => Layer::MaxPool { ph, pw },
                LayerSpec::Dropout { rate } => Layer::Dropout { rate },
                LayerSpec::Dense { units } => {
                    let fan_in = x.len();
                    Layer::Dense {
                        weights: Tensor::new(vec![fan_in, units], he_normal(fan_in * units, fan_in, rng))
                            .expect("sized"),
                        bias: vec![T::zero(); units],
                    }
                }
                LayerSpec::Softmax => Layer::Softmax,
            })
            .collect();
        Ok(Self { spec: spec.clone(), layers })
    }

    /// Assembles a network from explicit layers, checking them against `spec`.
    pub fn from_layers(spec: NetworkSpec, layers: Vec<Layer<T>>) -> Result<Self> {
        let shapes = spec.infer_shapes()?;
        if layers.len() != spec.layers.len() {
            return Err(Error::shape("layer count differs from spec"));
        }
        for (i, ((l, s), x)) in layers.iter().zip(&spec.layers).zip(&shapes).enumerate() {
            let ok = match (l, *s) {
                (Layer::Conv { weights, bias }, LayerSpec::Conv { filters, kh, kw }) => {
                    weights.shape() == [kh, kw, x.c, filters] && bias.len() == filters
                }
                (Layer::BatchNorm(bn), LayerSpec::BatchNorm) => {
                    bn.channels() == x.c
                        && bn.beta.len() == x.c
                        && bn.running.as_ref().is_none_or(|(m, v)| m.len() == x.c && v.len() == x.c)
                }
                (Layer::Relu, LayerSpec::Relu) | (Layer::Softmax, LayerSpec::Softmax) => true,
                (Layer::MaxPool { ph, pw }, LayerSpec::MaxPool { ph: sh, pw: sw }) => *ph == sh && *pw == sw,
                (Layer::Dropout { rate }, LayerSpec::Dropout { rate: sr }) => *rate == sr,
                (Layer::Dense { weights, bias }, LayerSpec::Dense { units }) => {
                    weights.shape() == [x.len(), units] && bias.len() == units
                }
                _ => false,
            };
            if !ok {
                return Err(Error::shape(format!("layer {i} does not match its spec ({})", s.name())));
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> Shape3 {
        self.spec.input_shape
    }

    pub fn classes(&self) -> usize {
        self.spec.classes().expect("validated at construction")
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let cv = |v: &[T]| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv { weights, bias } => Layer::Conv { weights: weights.cast(), bias: cv(bias) },
                Layer::BatchNorm(bn) => Layer::BatchNorm(BatchNorm {
                    gamma: cv(&bn.gamma),
                    beta: cv(&bn.beta),
                    running: bn.running.as_ref().map(|(m, v)| (cv(m), cv(v))),
                }),
                Layer::Relu => Layer::Relu,
                Layer::MaxPool { ph, pw } => Layer::MaxPool { ph: *ph, pw: *pw },
                Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
                Layer::Dense { weights, bias } => Layer::Dense { weights: weights.cast(), bias: cv(bias) },
                Layer::Softmax => Layer::Softmax,
            })
            .collect();
        Network { spec: self.spec.clone(), layers }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = self.spec.input_shape;
        if x.shape().len() != 4 || x.shape()[1..] != s.dims() {
            return Err(Error::shape(format!(
                "network expects batch×{s}, got {:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    /// Train-mode forward pass: batch statistics (running averages are
    /// updated), active dropout. Returns the logits plus the trace needed by
    /// [`Network::backward`].
    pub fn forward_train(&mut self, x: &Tensor<T>, rng: &mut impl Rng) -> Result<ForwardTrace<T>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in self.layers.iter_mut() {
            let (next, cache) = match layer {
                Layer::Conv { weights, bias } => (layers::conv_forward(&cur, weights, bias)?, Cache::Input(cur)),
                Layer::BatchNorm(bn) => {
                    let (y, c) = layers::batchnorm_forward(&cur, bn, Mode::Train)?;
                    (y, Cache::BatchNorm(c.expect("train mode caches")))
                }
                Layer::Relu => (layers::relu_forward(&cur), Cache::Input(cur)),
                Layer::MaxPool { ph, pw } => {
                    let (y, argmax) = layers::maxpool_forward(&cur, *ph, *pw)?;
                    (y, Cache::Pool { argmax, input_shape: cur.shape().to_vec() })
                }
                Layer::Dropout { rate } => {
                    let (y, mask) = layers::dropout(&cur, *rate, Mode::Train, rng)?;
                    (y, Cache::Dropout(mask))
                }
                Layer::Dense { weights, bias } => (layers::dense_forward(&cur, weights, bias)?, Cache::Input(cur)),
                Layer::Softmax => (cur, Cache::None),
            };
            cur = next;
            caches.push(cache);
        }
        Ok(ForwardTrace { caches, logits: cur })
    }

    /// Backpropagates `grad_logits` through a train-mode trace.
    pub fn backward(&self, trace: ForwardTrace<T>, grad_logits: Tensor<T>) -> Result<Vec<LayerGrads<T>>> {
        let mut grads: Vec<LayerGrads<T>> = Vec::with_capacity(self.layers.len());
        let mut g = grad_logits;
        for (layer, cache) in self.layers.iter().zip(trace.caches).rev() {
            let (next, lg) = match (layer, cache) {
                (Layer::Conv { weights, .. }, Cache::Input(x)) => {
                    let cg = layers::conv_backward(&g, &x, weights)?;
                    (cg.input, LayerGrads::Conv { weights: cg.weights.into_data(), bias: cg.bias })
                }
                (Layer::BatchNorm(bn), Cache::BatchNorm(c)) => {
                    let (gx, gamma, beta) = layers::batchnorm_backward(&g, &c, &bn.gamma)?;
                    (gx, LayerGrads::BatchNorm { gamma, beta })
                }
                (Layer::Relu, Cache::Input(x)) => (layers::relu_backward(&g, &x), LayerGrads::None),
                (Layer::MaxPool { .. }, Cache::Pool { argmax, input_shape }) => {
                    (layers::maxpool_backward(&g, &argmax, &input_shape)?, LayerGrads::None)
                }
                (Layer::Dropout { .. }, Cache::Dropout(mask)) => {
                    if let Some(mask) = mask {
                        for (v, m) in g.data_mut().iter_mut().zip(&mask) {
                            *v *= *m;
                        }
                    }
                    (g, LayerGrads::None)
                }
                (Layer::Dense { weights, .. }, Cache::Input(x)) => {
                    let dg = layers::dense_backward(&g, &x, weights)?;
                    (dg.input, LayerGrads::Dense { weights: dg.weights.into_data(), bias: dg.bias })
                }
                (Layer::Softmax, Cache::None) => (g, LayerGrads::None),
                _ => return Err(Error::shape("forward trace does not match network")),
            };
            g = next;
            grads.push(lg);
        }
        grads.reverse();
        Ok(grads)
    }

    /// Inference-mode logits for a batch `b × h × w × c`.
    pub fn logits(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::Conv { weights, bias } => layers::conv_forward(&cur, weights, bias)?,
                Layer::BatchNorm(bn) => {
                    // infer mode never mutates; clone only the small parameter vectors
                    let mut frozen = bn.clone();
                    layers::batchnorm_forward(&cur, &mut frozen, Mode::Infer)?.0
                }
                Layer::Relu => layers::relu_forward(&cur),
                Layer::MaxPool { ph, pw } => layers::maxpool_forward(&cur, *ph, *pw)?.0,
                Layer::Dropout { .. } | Layer::Softmax => cur,
                Layer::Dense { weights, bias } => layers::dense_forward(&cur, weights, bias)?,
            };
        }
        Ok(cur)
    }

    /// Class probabilities, `b × classes`.
    pub fn predict_proba(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(layers::softmax_rows(&self.logits(x)?))
    }

    /// Argmax class and probability vector for every batch item.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<(usize, Vec<T>)>> {
        let probs = self.predict_proba(x)?;
        let u = probs.item_len();
        Ok(probs
            .data()
            .chunks_exact(u)
            .map(|row| {
                let mut best = 0;
                for (i, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = i;
                    }
                }
                (best, row.to_vec())
            })
            .collect())
    }

    /// Mutable parameter slices in declaration order, each tagged with its kind.
    pub fn params_mut(&mut self) -> Vec<(&mut [T], ParamKind)> {
        let mut out = Vec::new();
        for layer in self.layers.iter_mut() {
            match layer {
                Layer::Conv { weights, bias } | Layer::Dense { weights, bias } => {
                    out.push((weights.data_mut(), ParamKind::Weight));
                    out.push((bias.as_mut_slice(), ParamKind::Bias));
                }
                Layer::BatchNorm(bn) => {
                    out.push((bn.gamma.as_mut_slice(), ParamKind::Affine));
                    out.push((bn.beta.as_mut_slice(), ParamKind::Affine));
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv { weights, bias } | Layer::Dense { weights, bias } => weights.len() + bias.len(),
                Layer::BatchNorm(bn) => 2 * bn.channels(),
                _ => 0,
            })
            .sum()
    }

    pub fn has_running_stats(&self) -> bool {
        self.layers.iter().all(|l| match l {
            Layer::BatchNorm(bn) => bn.running.is_some(),
            _ => true,
        })
    }
}
