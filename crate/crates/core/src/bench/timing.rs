use std::time::Instant;

use num_complex::Complex64;

use super::draw_trials;
use crate::error::{Error, Result};
use crate::models::{self, Architecture, TrainedModel};
use crate::nn::{LayerSpec, NetworkSpec};
use crate::phy::LoraParams;
use crate::rng;

/// Symbols per inference call inside a timing run.
const TIMING_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingPoint {
    pub network: Architecture,
    pub num_symbols: usize,
    /// Median over the repeats.
    pub wall_time_s: f64,
}

/// Multiply-accumulate count of the convolution layers for `num_symbols`
/// symbols: per layer, input channels × kernel elements × filters × output
/// spatial positions. Pooling, dropout and dense layers are not counted.
pub fn theoretical_cost(spec: &NetworkSpec, num_symbols: u64) -> Result<u64> {
    let shapes = spec.infer_shapes()?;
    let per_symbol: u64 = spec
        .layers
        .iter()
        .zip(shapes.windows(2))
        .filter_map(|(l, io)| match *l {
            LayerSpec::Conv { filters, kh, kw } => {
                let (x, y) = (io[0], io[1]);
                Some((x.c * kh * kw * filters * y.h * y.w) as u64)
            }
            _ => None,
        })
        .sum();
    Ok(num_symbols * per_symbol)
}

/// Least-squares line `time = slope·n + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 2 {
        return Err(Error::domain("a line fit needs at least two points"));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("a line fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time to featurize and classify `n` symbols, for every model
/// and count. Runs on a dedicated single-thread pool; weights do not affect
/// timing, so untrained networks with running statistics are fine.
pub fn timing_bench(
    models: &[(Architecture, TrainedModel)],
    symbol_counts: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<TimingPoint>> {
    if repeats == 0 || symbol_counts.is_empty() {
        return Err(Error::domain("timing needs at least one repeat and one symbol count"));
    }
    let params = LoraParams::sf7();
    let max = symbol_counts.iter().copied().max().unwrap_or(0);
    let trials = draw_trials(max, 10.0, -15.0, 7, &params, &mut rng::seeded(seed))?;
    let symbols: Vec<&[Complex64]> = trials.iter().map(|t| t.received.as_slice()).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::domain(format!("cannot build timing pool: {e}")))?;

    let run = |model: &TrainedModel, n: usize| -> Result<f64> {
        let start = Instant::now();
        for chunk in symbols[..n].chunks(TIMING_BATCH) {
            std::hint::black_box(model.classify(chunk, &params)?);
        }
        Ok(start.elapsed().as_secs_f64())
    };

    pool.install(|| {
        let mut out = Vec::new();
        for (arch, model) in models {
            if model.modality != arch.modality() {
                return Err(Error::domain(format!("{arch} model consumes {} features", model.modality)));
            }
            run(model, symbol_counts[0].clamp(1, max.max(1)))?;
            for &n in symbol_counts {
                let times = (0..repeats).map(|_| run(model, n)).collect::<Result<Vec<_>>>()?;
                out.push(TimingPoint {
                    network: *arch,
                    num_symbols: n,
                    wall_time_s: median(times),
                });
            }
        }
        Ok(out)
    })
}

/// Randomly initialised model with batch-norm statistics from one pass over
/// random frames; enough for timing.
pub fn timing_model(arch: Architecture, seed: u64) -> Result<TrainedModel> {
    let params = LoraParams::sf7();
    let mut net = crate::nn::Network::<f32>::init(&arch.spec(), &mut rng::seeded(seed))?;
    let trials = draw_trials(16, 10.0, -15.0, 7, &params, &mut rng::seeded(seed + 1))?;
    let symbols: Vec<&[Complex64]> = trials.iter().map(|t| t.received.as_slice()).collect();
    let x = models::Featurizer::new(arch.modality(), &params).batch(&symbols)?;
    net.forward_train(&x, &mut rng::seeded(seed + 2))?;
    TrainedModel::new(arch.modality(), net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn fft_cnn_cost_matches_hand_arithmetic() {
        let spec = models::build_fft_cnn();
        let first = NetworkSpec::new(spec.input_shape, spec.layers[..1].to_vec()).unwrap();
        assert_eq!(theoretical_cost(&first, 1).unwrap(), 19_456);
        assert_eq!(theoretical_cost(&spec, 1).unwrap(), 19_456 + 3 * 8 * 19 * 8 * 128);
        assert_eq!(theoretical_cost(&spec, 1).unwrap(), 486_400);
        assert_eq!(theoretical_cost(&spec, 1000).unwrap(), 486_400_000);
        let stft = theoretical_cost(&models::build_stft_cnn(), 1).unwrap();
        assert!(stft > 10 * 486_400);
    }

    #[test]
    fn line_fit() {
        let f = linear_fit(&[(1.0, 3.0), (2.0, 5.0), (4.0, 9.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[(1.0, 1.0)]).is_err());
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
