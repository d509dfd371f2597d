//! Monte-Carlo BER sweeps, the HybNet envelope check, complexity estimates
//! and timing.

mod envelope;
mod report;
pub mod theory;
mod timing;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{self, ChannelConfig};
use crate::classic::{self, ser_to_ber};
use crate::error::{Error, Result};
use crate::models::{self, Architecture, Modality, TrainedModel, INTERFERENCE};
use crate::phy::{self, Dechirper, LoraParams, SymbolValue};
use crate::rng;

pub use envelope::{hybnet_envelope_check, EnvelopeReport, EnvelopeRow};
pub use report::{read_ber_csv, write_ber_csv, write_timing_csv, BER_CSV_HEADER};
pub use timing::{linear_fit, theoretical_cost, timing_bench, timing_model, LinearFit, TimingPoint};

/// Smallest accepted number of trials per grid point.
pub const MIN_TRIALS: usize = 1_000;

/// Trials per independently seeded work unit.
const CHUNK: usize = 1_000;

const SWEEP_STREAM_TAG: u16 = 0x5357;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Coherent,
    Noncoherent,
    IqCnn,
    StftCnn,
    FftCnn,
    Hybnet,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Coherent,
        DetectorKind::Noncoherent,
        DetectorKind::IqCnn,
        DetectorKind::StftCnn,
        DetectorKind::FftCnn,
        DetectorKind::Hybnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Coherent => "coherent",
            DetectorKind::Noncoherent => "noncoherent",
            DetectorKind::IqCnn => "iq_cnn",
            DetectorKind::StftCnn => "stft_cnn",
            DetectorKind::FftCnn => "fft_cnn",
            DetectorKind::Hybnet => "hybnet",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.name() == key || d.name().trim_end_matches("_cnn") == key)
            .ok_or_else(|| Error::domain(format!("unknown detector '{s}'")))
    }
}

/// Trained networks available to a sweep.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub iq_cnn: Option<TrainedModel>,
    pub stft_cnn: Option<TrainedModel>,
    pub fft_cnn: Option<TrainedModel>,
    pub interference_detector: Option<TrainedModel>,
}

impl ModelSet {
    pub fn get(&self, arch: Architecture) -> Option<&TrainedModel> {
        match arch {
            Architecture::IqCnn => self.iq_cnn.as_ref(),
            Architecture::StftCnn => self.stft_cnn.as_ref(),
            Architecture::FftCnn => self.fft_cnn.as_ref(),
            Architecture::InterferenceDetector => self.interference_detector.as_ref(),
        }
    }

    pub fn insert(&mut self, arch: Architecture, model: TrainedModel) {
        let slot = match arch {
            Architecture::IqCnn => &mut self.iq_cnn,
            Architecture::StftCnn => &mut self.stft_cnn,
            Architecture::FftCnn => &mut self.fft_cnn,
            Architecture::InterferenceDetector => &mut self.interference_detector,
        };
        *slot = Some(model);
    }

    fn require(&self, arch: Architecture, params: &LoraParams) -> Result<&TrainedModel> {
        let m = self
            .get(arch)
            .ok_or_else(|| Error::MissingModel(format!("no trained {arch} model was supplied")))?;
        if m.modality != arch.modality() {
            return Err(Error::domain(format!("{arch} model consumes {} features", m.modality)));
        }
        if m.network.input_shape() != m.modality.input_shape_for(params) {
            return Err(Error::domain(format!("{arch} model does not match SF{} symbols", params.sf)));
        }
        if !m.network.has_running_stats() {
            return Err(Error::MissingModel(format!("{arch} model has not been trained")));
        }
        Ok(m)
    }

    /// Fails unless every network needed by `detectors` is present and trained.
    pub fn check(&self, detectors: &[DetectorKind], params: &LoraParams) -> Result<()> {
        for d in detectors {
            for arch in needed(*d) {
                self.require(*arch, params)?;
            }
        }
        Ok(())
    }
}

fn needed(d: DetectorKind) -> &'static [Architecture] {
    match d {
        DetectorKind::Coherent | DetectorKind::Noncoherent => &[],
        DetectorKind::IqCnn => &[Architecture::IqCnn],
        DetectorKind::StftCnn => &[Architecture::StftCnn],
        DetectorKind::FftCnn => &[Architecture::FftCnn],
        DetectorKind::Hybnet => &[Architecture::FftCnn, Architecture::InterferenceDetector],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub inr_grid_db: Vec<f64>,
    pub sinr_db: f64,
    pub interferer_sf: u8,
    pub trials_per_point: usize,
    pub seed: u64,
}

impl SweepConfig {
    /// −10 dB to +30 dB in 2.5 dB steps at SINR −15 dB, SF7 interferer,
    /// 20,000 trials per point.
    pub fn standard(seed: u64) -> Self {
        Self {
            inr_grid_db: inr_grid(-10.0, 30.0, 2.5).expect("valid grid"),
            sinr_db: -15.0,
            interferer_sf: 7,
            trials_per_point: 20_000,
            seed,
        }
    }
}

/// Inclusive arithmetic grid `from, from+step, …, to`.
pub fn inr_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() || to < from {
        return Err(Error::domain(format!("bad grid {from}..{to} step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub detector: DetectorKind,
    pub inr_db: f64,
    pub sinr_db: f64,
    pub interferer_sf: u8,
    pub trials: usize,
    pub symbol_errors: usize,
    pub ber: f64,
    /// Binomial standard error of `ber`.
    pub ber_sigma: f64,
}

impl BerPoint {
    pub fn new(
        detector: DetectorKind,
        inr_db: f64,
        sinr_db: f64,
        interferer_sf: u8,
        trials: usize,
        symbol_errors: usize,
        alphabet_size: usize,
    ) -> Self {
        let ser = symbol_errors as f64 / trials as f64;
        let sigma = (ser * (1.0 - ser) / trials as f64).sqrt();
        Self {
            detector,
            inr_db,
            sinr_db,
            interferer_sf,
            trials,
            symbol_errors,
            ber: ser_to_ber(ser, alphabet_size),
            ber_sigma: ser_to_ber(sigma, alphabet_size),
        }
    }

    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.trials as f64
    }
}

/// One simulated frame: the transmitted symbol and the received samples.
#[derive(Debug, Clone)]
pub struct Trial {
    pub symbol: usize,
    pub received: Vec<Complex64>,
}

/// Draws `count` frames at one operating point from `rng`: uniform target
/// symbol, uniform interferer offset, then the mixture.
pub fn draw_trials(
    count: usize,
    inr_db: f64,
    sinr_db: f64,
    interferer_sf: u8,
    params: &LoraParams,
    rng: &mut impl Rng,
) -> Result<Vec<Trial>> {
    let n_i = params.with_sf(interferer_sf)?.samples_per_symbol;
    (0..count)
        .map(|_| {
            let m = rng.random_range(0..params.alphabet_size);
            let cfg = ChannelConfig {
                inr_db,
                sinr_db,
                interferer_sf,
                interferer_offset_samples: rng.random_range(0..n_i),
                rng_seed: 0,
            };
            let target = phy::modulate_symbol(SymbolValue::new(m, params)?, params)?;
            Ok(Trial {
                symbol: m,
                received: channel::mix(&target, &cfg, params, rng)?,
            })
        })
        .collect()
}

/// Symbol errors of each requested detector over a batch of shared frames.
fn count_errors(
    trials: &[Trial],
    detectors: &[DetectorKind],
    models: &ModelSet,
    params: &LoraParams,
) -> Result<Vec<usize>> {
    let symbols: Vec<&[Complex64]> = trials.iter().map(|t| t.received.as_slice()).collect();
    let truth: Vec<usize> = trials.iter().map(|t| t.symbol).collect();
    let errors = |decisions: &[usize]| decisions.iter().zip(&truth).filter(|(d, t)| d != t).count();

    let dechirper = Dechirper::new(params);
    let spectra: Vec<Vec<Complex64>> = symbols
        .par_iter()
        .map(|s| dechirper.dechirped_spectrum(s))
        .collect::<Result<_>>()?;
    let coherent: Vec<usize> = spectra
        .iter()
        .map(|s| classic::coherent_from_spectrum(s, params).symbol.value())
        .collect();

    let dl = |arch: Architecture, modality: Modality| -> Result<Vec<usize>> {
        let model = models.require(arch, params)?;
        Ok(models::detect_dl_batch(model, &symbols, modality, params)?
            .into_iter()
            .map(|r| r.symbol.value())
            .collect())
    };
    let needs_fft = detectors
        .iter()
        .any(|d| matches!(d, DetectorKind::FftCnn | DetectorKind::Hybnet));
    let fft = if needs_fft { Some(dl(Architecture::FftCnn, Modality::Fft)?) } else { None };

    detectors
        .iter()
        .map(|d| {
            Ok(match d {
                DetectorKind::Coherent => errors(&coherent),
                DetectorKind::Noncoherent => {
                    let nc: Vec<usize> = spectra
                        .iter()
                        .map(|s| classic::noncoherent_from_spectrum(s, params).symbol.value())
                        .collect();
                    errors(&nc)
                }
                DetectorKind::IqCnn => errors(&dl(Architecture::IqCnn, Modality::Iq)?),
                DetectorKind::StftCnn => errors(&dl(Architecture::StftCnn, Modality::Stft)?),
                DetectorKind::FftCnn => errors(fft.as_ref().expect("computed above")),
                DetectorKind::Hybnet => {
                    let det = models.require(Architecture::InterferenceDetector, params)?;
                    let routes = det.classify(&symbols, params)?;
                    let fft = fft.as_ref().expect("computed above");
                    let hyb: Vec<usize> = routes
                        .iter()
                        .enumerate()
                        .map(|(i, (class, _))| if *class == INTERFERENCE { fft[i] } else { coherent[i] })
                        .collect();
                    errors(&hyb)
                }
            })
        })
        .collect()
}

/// BER of every detector at every INR grid point.
///
/// Each trial's mixture is shared by all detectors (paired noise). Trials are
/// drawn in chunks of 1,000 from streams keyed by the master seed, the grid
/// index and the chunk index, so the output is fully determined by
/// `cfg.seed` regardless of scheduling. Missing or untrained networks are
/// reported before any simulation starts.
pub fn ber_sweep(
    detectors: &[DetectorKind],
    models: &ModelSet,
    cfg: &SweepConfig,
    params: &LoraParams,
) -> Result<Vec<BerPoint>> {
    if detectors.is_empty() {
        return Err(Error::domain("no detectors requested"));
    }
    if cfg.trials_per_point < MIN_TRIALS {
        return Err(Error::domain(format!(
            "{} trials per point is below the minimum of {MIN_TRIALS}",
            cfg.trials_per_point
        )));
    }
    if cfg.inr_grid_db.is_empty() {
        return Err(Error::domain("empty INR grid"));
    }
    for &inr in &cfg.inr_grid_db {
        ChannelConfig {
            inr_db: inr,
            sinr_db: cfg.sinr_db,
            interferer_sf: cfg.interferer_sf,
            interferer_offset_samples: 0,
            rng_seed: 0,
        }
        .validate(params)?;
    }
    models.check(detectors, params)?;

    let chunks = cfg.trials_per_point.div_ceil(CHUNK);
    let units: Vec<(usize, usize)> = (0..cfg.inr_grid_db.len())
        .flat_map(|p| (0..chunks).map(move |c| (p, c)))
        .collect();
    let per_unit: Vec<Vec<usize>> = units
        .par_iter()
        .map(|&(p, c)| {
            let count = CHUNK.min(cfg.trials_per_point - c * CHUNK);
            let mut r = rng::stream(cfg.seed, rng::stream_id(SWEEP_STREAM_TAG, ((p as u64) << 24) | c as u64));
            let trials = draw_trials(count, cfg.inr_grid_db[p], cfg.sinr_db, cfg.interferer_sf, params, &mut r)?;
            count_errors(&trials, detectors, models, params)
        })
        .collect::<Result<_>>()?;

    let mut totals = vec![vec![0usize; detectors.len()]; cfg.inr_grid_db.len()];
    for ((p, _), errs) in units.iter().zip(&per_unit) {
        for (t, e) in totals[*p].iter_mut().zip(errs) {
            *t += e;
        }
    }
    let mut out = Vec::with_capacity(detectors.len() * cfg.inr_grid_db.len());
    for (di, d) in detectors.iter().enumerate() {
        for (p, &inr) in cfg.inr_grid_db.iter().enumerate() {
            out.push(BerPoint::new(
                *d,
                inr,
                cfg.sinr_db,
                cfg.interferer_sf,
                cfg.trials_per_point,
                totals[p][di],
                params.alphabet_size,
            ));
        }
    }
    Ok(out)
}

/// Fraction of frames the interference detector sends to the CNN branch at
/// one operating point.
pub fn routing_fraction(
    models: &ModelSet,
    inr_db: f64,
    sinr_db: f64,
    interferer_sf: u8,
    trials: usize,
    seed: u64,
    params: &LoraParams,
) -> Result<f64> {
    let det = models.require(Architecture::InterferenceDetector, params)?;
    let mut r = rng::stream(seed, rng::stream_id(SWEEP_STREAM_TAG + 1, 0));
    let frames = draw_trials(trials, inr_db, sinr_db, interferer_sf, params, &mut r)?;
    let symbols: Vec<&[Complex64]> = frames.iter().map(|t| t.received.as_slice()).collect();
    let to_cnn = det
        .classify(&symbols, params)?
        .iter()
        .filter(|(c, _)| *c == INTERFERENCE)
        .count();
    Ok(to_cnn as f64 / trials.max(1) as f64)
}
