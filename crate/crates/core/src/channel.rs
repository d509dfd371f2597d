//! Received-signal synthesis: synchronized target + delayed LoRa interferer + AWGN.
//!
//! With target power fixed at 1, INR `α = p_I/σ²` and SINR `γ = 1/(p_I + σ²)`
//! pin both powers: `p_I = α/(γ(1+α))` and `σ² = 1/(γ(1+α))`. An INR of
//! `-inf` dB removes the interferer and leaves a noise-only mixture; an SINR
//! of `+inf` dB removes both interferer and noise.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phy::{self, LoraParams, SymbolValue};
use crate::rng::{self, SimRng};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub inr_db: f64,
    pub sinr_db: f64,
    pub interferer_sf: u8,
    /// Sample index inside the target frame at which an interferer symbol
    /// boundary falls; `< 2^interferer_sf` at critical sampling.
    pub interferer_offset_samples: usize,
    pub rng_seed: u64,
}

impl ChannelConfig {
    pub fn interferer_params(&self, target: &LoraParams) -> Result<LoraParams> {
        target.with_sf(self.interferer_sf)
    }

    pub fn validate(&self, target: &LoraParams) -> Result<()> {
        if self.sinr_db.is_nan() || self.sinr_db == f64::NEG_INFINITY {
            return Err(Error::domain("SINR must be finite or +inf"));
        }
        if self.inr_db.is_nan() || self.inr_db == f64::INFINITY {
            return Err(Error::domain("INR must be finite or -inf"));
        }
        let ip = self.interferer_params(target)?;
        if self.interferer_offset_samples >= ip.samples_per_symbol {
            return Err(Error::domain(format!(
                "interferer offset {} exceeds symbol length {}",
                self.interferer_offset_samples, ip.samples_per_symbol
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> SimRng {
        rng::seeded(self.rng_seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureCoefficients {
    pub interferer_amp: f64,
    pub noise_amp: f64,
}

impl MixtureCoefficients {
    pub fn interferer_power(&self) -> f64 {
        self.interferer_amp * self.interferer_amp
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_amp * self.noise_amp
    }
}

pub fn mixture_coefficients(cfg: &ChannelConfig) -> MixtureCoefficients {
    let alpha = db_to_linear(cfg.inr_db);
    let gamma = db_to_linear(cfg.sinr_db);
    let denom = gamma * (1.0 + alpha);
    MixtureCoefficients {
        interferer_amp: (alpha / denom).sqrt(),
        noise_amp: (1.0 / denom).sqrt(),
    }
}

/// Interferer waveform built from an explicit symbol stream. The stream is
/// delayed so that a symbol boundary lands at `offset`; the output is the
/// first `num_samples` samples of the delayed stream. Needs
/// `symbols.len() · N_I >= num_samples + (N_I − offset) mod N_I`.
pub fn interferer_from_symbols(
    interferer: &LoraParams,
    offset: usize,
    symbols: &[SymbolValue],
    num_samples: usize,
) -> Result<Vec<Complex64>> {
    let n_i = interferer.samples_per_symbol;
    if offset >= n_i {
        return Err(Error::domain(format!("offset {offset} >= interferer symbol length {n_i}")));
    }
    let lead = (n_i - offset) % n_i;
    if symbols.len() * n_i < lead + num_samples {
        return Err(Error::domain("interferer symbol stream too short"));
    }
    let stream = phy::modulate_message(symbols, interferer)?;
    Ok(stream[lead..lead + num_samples].to_vec())
}

/// Unit-power interferer at `cfg.interferer_sf` with i.i.d. uniform symbols,
/// covering `num_target_samples` with the configured offset.
pub fn make_interferer(
    cfg: &ChannelConfig,
    target: &LoraParams,
    num_target_samples: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    cfg.validate(target)?;
    let ip = cfg.interferer_params(target)?;
    let n_i = ip.samples_per_symbol;
    let count = (num_target_samples + n_i).div_ceil(n_i);
    let symbols: Vec<SymbolValue> = (0..count)
        .map(|_| SymbolValue::new(rng.random_range(0..ip.alphabet_size), &ip))
        .collect::<Result<_>>()?;
    interferer_from_symbols(&ip, cfg.interferer_offset_samples, &symbols, num_target_samples)
}

/// `CN(0, 1)` samples: each component has variance 1/2.
pub fn complex_awgn(len: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// The three additive components of a mixture, kept separate for analysis.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub received: Vec<Complex64>,
    /// Unscaled (unit-power) interferer; empty when the INR is `-inf`.
    pub interferer: Vec<Complex64>,
    /// Unscaled `CN(0,1)` noise.
    pub noise: Vec<Complex64>,
    pub coefficients: MixtureCoefficients,
}

/// `target + a_I·x_I + a_n·n`. The interferer is drawn first, then the noise.
pub fn mix_components(
    target: &[Complex64],
    cfg: &ChannelConfig,
    params: &LoraParams,
    rng: &mut impl Rng,
) -> Result<Mixture> {
    cfg.validate(params)?;
    let coefficients = mixture_coefficients(cfg);
    let interferer = if coefficients.interferer_amp > 0.0 {
        make_interferer(cfg, params, target.len(), rng)?
    } else {
        Vec::new()
    };
    let noise = complex_awgn(target.len(), rng);
    let mut received = target.to_vec();
    if !interferer.is_empty() {
        for (r, i) in received.iter_mut().zip(&interferer) {
            *r += i * coefficients.interferer_amp;
        }
    }
    if coefficients.noise_amp > 0.0 {
        for (r, n) in received.iter_mut().zip(&noise) {
            *r += n * coefficients.noise_amp;
        }
    }
    Ok(Mixture {
        received,
        interferer,
        noise,
        coefficients,
    })
}

pub fn mix(
    target: &[Complex64],
    cfg: &ChannelConfig,
    params: &LoraParams,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    Ok(mix_components(target, cfg, params, rng)?.received)
}

/// [`mix`] driven by the generator seeded from `cfg.rng_seed`.
pub fn mix_seeded(target: &[Complex64], cfg: &ChannelConfig, params: &LoraParams) -> Result<Vec<Complex64>> {
    mix(target, cfg, params, &mut cfg.rng())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn cfg(inr: f64, sinr: f64) -> ChannelConfig {
        ChannelConfig {
            inr_db: inr,
            sinr_db: sinr,
            interferer_sf: 7,
            interferer_offset_samples: 0,
            rng_seed: 1,
        }
    }

    #[test]
    fn coefficient_examples() {
        let c = mixture_coefficients(&cfg(0.0, 0.0));
        assert_relative_eq!(c.interferer_amp, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(c.noise_amp, 0.5f64.sqrt(), epsilon = 1e-12);

        // α = 10, γ = 10^-1.5: p_I = α/(γ(1+α)), σ² = 1/(γ(1+α))
        let c = mixture_coefficients(&cfg(10.0, -15.0));
        let g = 10f64.powf(-1.5);
        assert_relative_eq!(c.interferer_amp, (10.0 / (g * 11.0)).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(c.interferer_amp, 5.3617, epsilon = 5e-5);
        assert_relative_eq!(c.noise_amp, 1.6955, epsilon = 5e-5);
        assert_relative_eq!(c.interferer_power() / c.noise_power(), 10.0, max_relative = 1e-12);
        assert_relative_eq!(1.0 / (c.interferer_power() + c.noise_power()), g, max_relative = 1e-12);

        let c = mixture_coefficients(&cfg(-100.0, -15.0));
        assert_relative_eq!(c.noise_amp, 10f64.powf(0.75), max_relative = 1e-9);
        assert_relative_eq!(c.interferer_amp, 5.62e-5, max_relative = 1e-3);

        let c = mixture_coefficients(&cfg(f64::NEG_INFINITY, -15.0));
        assert_eq!(c.interferer_amp, 0.0);
        assert_relative_eq!(c.noise_amp, 10f64.powf(0.75), max_relative = 1e-12);

        let c = mixture_coefficients(&cfg(20.0, f64::INFINITY));
        assert_eq!((c.interferer_amp, c.noise_amp), (0.0, 0.0));
        assert!(cfg(20.0, f64::INFINITY).validate(&LoraParams::sf7()).is_ok());
        assert!(cfg(20.0, f64::NEG_INFINITY).validate(&LoraParams::sf7()).is_err());
    }

    #[test]
    fn same_stream_interferer_reproduces_target() {
        let p = LoraParams::sf7();
        let syms: Vec<SymbolValue> = [3, 90, 17].iter().map(|&m| SymbolValue::new(m, &p).unwrap()).collect();
        let target = phy::modulate_message(&syms[..2], &p).unwrap();
        let x = interferer_from_symbols(&p, 0, &syms, 256).unwrap();
        assert_eq!(x, target);
    }

    #[test]
    fn offset_places_symbol_boundary_exactly() {
        let p = LoraParams::sf7();
        let syms: Vec<SymbolValue> = [5, 60, 111].iter().map(|&m| SymbolValue::new(m, &p).unwrap()).collect();
        let x = interferer_from_symbols(&p, 37, &syms, 128).unwrap();
        let s0 = phy::modulate_symbol(syms[0], &p).unwrap();
        let s1 = phy::modulate_symbol(syms[1], &p).unwrap();
        assert_eq!(&x[..37], &s0[128 - 37..]);
        assert_eq!(&x[37..], &s1[..128 - 37]);
    }

    #[test]
    fn sf8_interferer_spans_two_symbols_at_most() {
        let p = LoraParams::sf7();
        let ip = p.with_sf(8).unwrap();
        assert_eq!(ip.samples_per_symbol, 256);
        let c = ChannelConfig { interferer_sf: 8, interferer_offset_samples: 200, ..cfg(0.0, 0.0) };
        let mut rng = rng::seeded(3);
        let x = make_interferer(&c, &p, 128, &mut rng).unwrap();
        assert_eq!(x.len(), 128);
        let bad = ChannelConfig { interferer_offset_samples: 256, ..c };
        assert!(make_interferer(&bad, &p, 128, &mut rng).is_err());
    }

    #[test]
    fn interferer_is_unit_power() {
        let p = LoraParams::sf7();
        let mut rng = rng::seeded(9);
        for sf in [7u8, 9, 12] {
            let c = ChannelConfig { interferer_sf: sf, interferer_offset_samples: 11, ..cfg(0.0, 0.0) };
            let x = make_interferer(&c, &p, 10_000, &mut rng).unwrap();
            let pw = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
            assert!((pw - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn zero_amplitudes_return_target() {
        let p = LoraParams::sf7();
        let target = phy::modulate_symbol(SymbolValue::new(9, &p).unwrap(), &p).unwrap();
        let c = cfg(f64::NEG_INFINITY, 300.0);
        let out = mix_seeded(&target, &c, &p).unwrap();
        for (a, b) in out.iter().zip(target.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn seeded_mix_is_deterministic() {
        let p = LoraParams::sf7();
        let target = phy::modulate_symbol(SymbolValue::new(1, &p).unwrap(), &p).unwrap();
        let c = ChannelConfig { interferer_offset_samples: 50, ..cfg(5.0, -10.0) };
        assert_eq!(mix_seeded(&target, &c, &p).unwrap(), mix_seeded(&target, &c, &p).unwrap());
    }

    #[test]
    fn residual_noise_variance_matches_coefficient() {
        let p = LoraParams::sf7();
        let target = vec![Complex64::new(1.0, 0.0); 100_000];
        let c = ChannelConfig { interferer_offset_samples: 17, ..cfg(3.0, -5.0) };
        let mut rng = SimRng::seed_from_u64(4);
        let m = mix_components(&target, &c, &p, &mut rng).unwrap();
        let resid: Vec<Complex64> = (0..target.len())
            .map(|i| m.received[i] - target[i] - m.interferer[i] * m.coefficients.interferer_amp)
            .collect();
        let var = resid.iter().map(|v| v.norm_sqr()).sum::<f64>() / resid.len() as f64;
        assert!((var / m.coefficients.noise_power() - 1.0).abs() < 0.03);
    }
}
