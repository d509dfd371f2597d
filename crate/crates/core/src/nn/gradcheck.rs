//! Central-difference gradient checks in `f64`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::layers;
use super::network::Network;
use super::spec::NetworkSpec;
use super::tensor::Tensor;
use crate::error::Result;
use crate::rng;

/// Step used for the central differences.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const GRADCHECK_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub checked: usize,
}

impl GradCheck {
    fn merge(self, other: GradCheck) -> GradCheck {
        GradCheck {
            max_rel_error: self.max_rel_error.max(other.max_rel_error),
            checked: self.checked + other.checked,
        }
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR)
}

fn compare(analytic: &[f64], numeric: &[f64]) -> GradCheck {
    GradCheck {
        max_rel_error: analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| rel_error(a, n))
            .fold(0.0, f64::max),
        checked: analytic.len(),
    }
}

fn numeric_grad(values: &mut [f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let orig = values[i];
            values[i] = orig + GRADCHECK_STEP;
            let up = loss(values);
            values[i] = orig - GRADCHECK_STEP;
            let down = loss(values);
            values[i] = orig;
            (up - down) / (2.0 * GRADCHECK_STEP)
        })
        .collect()
}

pub fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor<f64> {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new(shape, data).expect("consistent shape")
}

/// Checks every trainable parameter of a freshly initialised network under
/// softmax cross-entropy on a random batch. Dropout masks are held fixed by
/// replaying the same random stream on every evaluation.
pub fn network_gradient_check(spec: &NetworkSpec, batch: usize, seed: u64) -> Result<GradCheck> {
    let mut data_rng = rng::stream(seed, 0);
    let mut net = Network::<f64>::init(spec, &mut rng::stream(seed, 1))?;
    // perturb the affine parameters so they are not trivially 1 and 0
    for (p, kind) in net.params_mut() {
        if kind != super::network::ParamKind::Weight {
            for v in p.iter_mut() {
                *v += 0.3 * data_rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let mut dims = vec![batch];
    dims.extend(spec.input_shape.dims());
    let x = random_tensor(dims, &mut data_rng);
    let classes = spec.classes()?;
    let labels: Vec<usize> = (0..batch).map(|_| data_rng.random_range(0..classes)).collect();

    let loss = |n: &Network<f64>| -> Result<f64> {
        let mut n = n.clone();
        let trace = n.forward_train(&x, &mut rng::stream(seed, 2))?;
        Ok(layers::softmax_xent(&trace.logits, &labels)?.0)
    };

    let analytic: Vec<Vec<f64>> = {
        let mut n = net.clone();
        let trace = n.forward_train(&x, &mut rng::stream(seed, 2))?;
        let (_, _, grad) = layers::softmax_xent(&trace.logits, &labels)?;
        let grads = n.backward(trace, grad)?;
        grads.iter().flat_map(|g| g.slices()).map(|s| s.to_vec()).collect()
    };

    let mut result = GradCheck { max_rel_error: 0.0, checked: 0 };
    for (pi, a) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(a.len());
        for j in 0..a.len() {
            let orig = net.params_mut()[pi].0[j];
            net.params_mut()[pi].0[j] = orig + GRADCHECK_STEP;
            let up = loss(&net)?;
            net.params_mut()[pi].0[j] = orig - GRADCHECK_STEP;
            let down = loss(&net)?;
            net.params_mut()[pi].0[j] = orig;
            numeric.push((up - down) / (2.0 * GRADCHECK_STEP));
        }
        result = result.merge(compare(a, &numeric));
    }
    Ok(result)
}

/// Checks input, weight and bias gradients of a single convolution against a
/// random linear read-out of its output.
pub fn conv_gradient_check(x_shape: [usize; 4], kh: usize, kw: usize, filters: usize, seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, 0);
    let x = random_tensor(x_shape.to_vec(), &mut r);
    let w = random_tensor(vec![kh, kw, x_shape[3], filters], &mut r);
    let b = random_tensor(vec![filters], &mut r).into_data();
    let y = layers::conv_forward(&x, &w, &b)?;
    let proj = random_tensor(y.shape().to_vec(), &mut r);
    let dot = |t: &Tensor<f64>| t.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum::<f64>();
    let g = layers::conv_backward(&proj, &x, &w)?;

    let shape_w = w.shape().to_vec();
    let shape_x = x.shape().to_vec();
    let mut xs = x.data().to_vec();
    let nx = numeric_grad(&mut xs, |v| {
        dot(&layers::conv_forward(&Tensor::new(shape_x.clone(), v.to_vec()).unwrap(), &w, &b).unwrap())
    });
    let mut ws = w.data().to_vec();
    let nw = numeric_grad(&mut ws, |v| {
        dot(&layers::conv_forward(&x, &Tensor::new(shape_w.clone(), v.to_vec()).unwrap(), &b).unwrap())
    });
    let mut bs = b.clone();
    let nb = numeric_grad(&mut bs, |v| dot(&layers::conv_forward(&x, &w, v).unwrap()));
    Ok(compare(g.input.data(), &nx)
        .merge(compare(g.weights.data(), &nw))
        .merge(compare(&g.bias, &nb)))
}

/// Checks input, scale and shift gradients of train-mode batch norm.
pub fn batchnorm_gradient_check(x_shape: [usize; 4], seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, 0);
    let x = random_tensor(x_shape.to_vec(), &mut r);
    let c = x_shape[3];
    let mut bn = layers::BatchNorm::<f64>::new(c);
    bn.gamma = random_tensor(vec![c], &mut r).into_data();
    bn.beta = random_tensor(vec![c], &mut r).into_data();
    let proj = random_tensor(x_shape.to_vec(), &mut r);
    let dot = |t: &Tensor<f64>| t.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum::<f64>();
    let eval = |x: &Tensor<f64>, bn: &layers::BatchNorm<f64>| {
        let mut bn = bn.clone();
        dot(&layers::batchnorm_forward(x, &mut bn, super::Mode::Train).unwrap().0)
    };
    let (_, cache) = layers::batchnorm_forward(&x, &mut bn.clone(), super::Mode::Train)?;
    let (gx, gg, gb) = layers::batchnorm_backward(&proj, &cache.expect("train cache"), &bn.gamma)?;

    let mut xs = x.data().to_vec();
    let nx = numeric_grad(&mut xs, |v| eval(&Tensor::new(x_shape.to_vec(), v.to_vec()).unwrap(), &bn));
    let mut gs = bn.gamma.clone();
    let ng = numeric_grad(&mut gs, |v| {
        let mut b2 = bn.clone();
        b2.gamma = v.to_vec();
        eval(&x, &b2)
    });
    let mut bs = bn.beta.clone();
    let nb = numeric_grad(&mut bs, |v| {
        let mut b2 = bn.clone();
        b2.beta = v.to_vec();
        eval(&x, &b2)
    });
    Ok(compare(gx.data(), &nx).merge(compare(&gg, &ng)).merge(compare(&gb, &nb)))
}

/// Checks input, weight and bias gradients of a dense layer.
pub fn dense_gradient_check(x_shape: [usize; 4], units: usize, seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, 0);
    let x = random_tensor(x_shape.to_vec(), &mut r);
    let d = x_shape[1] * x_shape[2] * x_shape[3];
    let w = random_tensor(vec![d, units], &mut r);
    let b = random_tensor(vec![units], &mut r).into_data();
    let y = layers::dense_forward(&x, &w, &b)?;
    let proj = random_tensor(y.shape().to_vec(), &mut r);
    let dot = |t: &Tensor<f64>| t.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum::<f64>();
    let g = layers::dense_backward(&proj, &x, &w)?;

    let mut xs = x.data().to_vec();
    let nx = numeric_grad(&mut xs, |v| {
        dot(&layers::dense_forward(&Tensor::new(x_shape.to_vec(), v.to_vec()).unwrap(), &w, &b).unwrap())
    });
    let mut ws = w.data().to_vec();
    let nw = numeric_grad(&mut ws, |v| {
        dot(&layers::dense_forward(&x, &Tensor::new(vec![d, units], v.to_vec()).unwrap(), &b).unwrap())
    });
    let mut bs = b.clone();
    let nb = numeric_grad(&mut bs, |v| dot(&layers::dense_forward(&x, &w, v).unwrap()));
    Ok(compare(g.input.data(), &nx)
        .merge(compare(g.weights.data(), &nw))
        .merge(compare(&g.bias, &nb)))
}

/// Checks the input gradient of ReLU followed by max pooling.
pub fn relu_pool_gradient_check(x_shape: [usize; 4], ph: usize, pw: usize, seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, 0);
    let x = random_tensor(x_shape.to_vec(), &mut r);
    let fwd = |x: &Tensor<f64>| layers::maxpool_forward(&layers::relu_forward(x), ph, pw).unwrap();
    let (y, argmax) = fwd(&x);
    let proj = random_tensor(y.shape().to_vec(), &mut r);
    let dot = |t: &Tensor<f64>| t.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum::<f64>();
    let g_pool = layers::maxpool_backward(&proj, &argmax, x.shape())?;
    let gx = layers::relu_backward(&g_pool, &x);
    let mut xs = x.data().to_vec();
    let nx = numeric_grad(&mut xs, |v| dot(&fwd(&Tensor::new(x_shape.to_vec(), v.to_vec()).unwrap()).0));
    Ok(compare(gx.data(), &nx))
}

/// Checks the logit gradient of softmax cross-entropy.
pub fn softmax_xent_gradient_check(batch: usize, classes: usize, seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, 0);
    let logits = random_tensor(vec![batch, classes], &mut r);
    let labels: Vec<usize> = (0..batch).map(|_| r.random_range(0..classes)).collect();
    let (_, _, grad) = layers::softmax_xent(&logits, &labels)?;
    let mut ls = logits.data().to_vec();
    let n = numeric_grad(&mut ls, |v| {
        layers::softmax_xent(&Tensor::new(logits.shape().to_vec(), v.to_vec()).unwrap(), &labels)
            .unwrap()
            .0
    });
    Ok(compare(grad.data(), &n))
}
