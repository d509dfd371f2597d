//! LoRa CSS signal mathematics: modulation, dechirping, FFT spectrum and STFT.
//!
//! All signals are complex baseband; the carrier never appears. A symbol
//! `m` is the linear up-chirp whose instantaneous frequency starts at
//! `m·Δf − B/2`, rises at `β = B/Ts` and folds back by `B` when it reaches
//! `+B/2`. Phase is the exact integral of that folded frequency evaluated at
//! the sample instants, so it is continuous across the fold.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::Deref;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Static modulation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoraParams {
    pub sf: u8,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub symbol_time_s: f64,
    pub samples_per_symbol: usize,
    pub alphabet_size: usize,
    pub freq_step_hz: f64,
    pub chirp_rate_hz_per_s: f64,
}

impl LoraParams {
    pub const MIN_SF: u8 = 7;
    pub const MAX_SF: u8 = 12;

    pub fn new(sf: u8, bandwidth_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(Self::MIN_SF..=Self::MAX_SF).contains(&sf) {
            return Err(Error::domain(format!("spreading factor {sf} outside 7..=12")));
        }
        if !(bandwidth_hz > 0.0 && sample_rate_hz > 0.0) {
            return Err(Error::domain("bandwidth and sample rate must be positive"));
        }
        let alphabet_size = 1usize << sf;
        let n = alphabet_size as f64 * sample_rate_hz / bandwidth_hz;
        if (n - n.round()).abs() > 1e-9 || n < 1.0 {
            return Err(Error::domain(format!(
                "sample rate {sample_rate_hz} Hz gives a non-integer {n} samples per symbol"
            )));
        }
        let symbol_time_s = alphabet_size as f64 / bandwidth_hz;
        Ok(Self {
            sf,
            bandwidth_hz,
            sample_rate_hz,
            symbol_time_s,
            samples_per_symbol: n.round() as usize,
            alphabet_size,
            freq_step_hz: bandwidth_hz / alphabet_size as f64,
            chirp_rate_hz_per_s: bandwidth_hz / symbol_time_s,
        })
    }

    /// SF7, 125 kHz bandwidth, critically sampled: N = 128, Ts = 1.024 ms.
    pub fn sf7() -> Self {
        Self::new(7, 125e3, 125e3).expect("valid constants")
    }

    /// Same bandwidth and sample rate, different spreading factor.
    pub fn with_sf(&self, sf: u8) -> Result<Self> {
        Self::new(sf, self.bandwidth_hz, self.sample_rate_hz)
    }
}

/// A data symbol value, `0 <= value < M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolValue(u16);

impl SymbolValue {
    pub fn new(value: usize, params: &LoraParams) -> Result<Self> {
        if value >= params.alphabet_size {
            return Err(Error::domain(format!(
                "symbol {value} outside alphabet of size {}",
                params.alphabet_size
            )));
        }
        Ok(Self(value as u16))
    }

    pub fn value(self) -> usize {
        usize::from(self.0)
    }
}

/// One symbol worth of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSymbol(Vec<Complex64>);

impl IqSymbol {
    pub fn from_samples(samples: Vec<Complex64>, params: &LoraParams) -> Result<Self> {
        if samples.len() != params.samples_per_symbol {
            return Err(Error::shape(format!(
                "symbol has {} samples, expected {}",
                samples.len(),
                params.samples_per_symbol
            )));
        }
        Ok(Self(samples))
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.0
    }
}

impl Deref for IqSymbol {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

/// Phase (radians) of symbol `m` at time `t` within the symbol, `0 <= t < Ts`.
fn chirp_phase(m: usize, t: f64, params: &LoraParams) -> f64 {
    let b = params.bandwidth_hz;
    let beta = params.chirp_rate_hz_per_s;
    let zeta = m as f64 * params.freq_step_hz;
    // instant at which (βt + ζ) reaches B and folds
    let t_fold = (b - zeta) / beta;
    let folded = (t - t_fold).max(0.0);
    2.0 * PI * (0.5 * beta * t * t + (zeta - 0.5 * b) * t - b * folded)
}

fn chirp(m: usize, params: &LoraParams) -> Vec<Complex64> {
    let fs = params.sample_rate_hz;
    (0..params.samples_per_symbol)
        .map(|n| Complex64::from_polar(1.0, chirp_phase(m, n as f64 / fs, params)))
        .collect()
}

pub fn modulate_symbol(m: SymbolValue, params: &LoraParams) -> Result<IqSymbol> {
    if m.value() >= params.alphabet_size {
        return Err(Error::domain(format!(
            "symbol {} outside alphabet of size {}",
            m.value(),
            params.alphabet_size
        )));
    }
    Ok(IqSymbol(chirp(m.value(), params)))
}

/// Concatenates `ms.len()` symbols; symbol `k` occupies `[k·N, (k+1)·N)`.
pub fn modulate_message(ms: &[SymbolValue], params: &LoraParams) -> Result<Vec<Complex64>> {
    if ms.is_empty() {
        return Err(Error::domain("cannot modulate an empty message"));
    }
    let mut out = Vec::with_capacity(ms.len() * params.samples_per_symbol);
    for &m in ms {
        out.extend_from_slice(&modulate_symbol(m, params)?);
    }
    Ok(out)
}

/// Zero-shift inverted chirp: the complex conjugate of symbol 0.
pub fn downchirp(params: &LoraParams) -> IqSymbol {
    IqSymbol(chirp(0, params).into_iter().map(|s| s.conj()).collect())
}

pub fn dechirp(r: &[Complex64], params: &LoraParams) -> Result<IqSymbol> {
    if r.len() != params.samples_per_symbol {
        return Err(Error::shape(format!(
            "dechirp input has {} samples, expected {}",
            r.len(),
            params.samples_per_symbol
        )));
    }
    let down = downchirp(params);
    Ok(IqSymbol(r.iter().zip(down.iter()).map(|(a, b)| a * b).collect()))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// Unnormalized forward DFT: `Z[i] = Σ z[n]·exp(−j2π i n / N)`.
/// Bin `i` sits at `i·fs/N` Hz.
pub fn spectrum(z: &[Complex64]) -> Vec<Complex64> {
    let mut buf = z.to_vec();
    if !buf.is_empty() {
        forward_fft(buf.len()).process(&mut buf);
    }
    buf
}

/// Maps an FFT bin to a symbol value: round half away from zero of the bin
/// frequency over Δf, reduced mod M.
pub fn bin_to_symbol(bin: usize, params: &LoraParams) -> usize {
    let bin_hz = params.sample_rate_hz / params.samples_per_symbol as f64;
    let ratio = bin as f64 * bin_hz / params.freq_step_hz;
    (ratio.round() as usize) % params.alphabet_size
}

/// Cached dechirp + FFT pipeline for hot loops.
#[derive(Clone)]
pub struct Dechirper {
    params: LoraParams,
    down: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dechirper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dechirper").field("params", &self.params).finish()
    }
}

impl Dechirper {
    pub fn new(params: &LoraParams) -> Self {
        Self {
            params: *params,
            down: downchirp(params).into_samples(),
            fft: forward_fft(params.samples_per_symbol),
        }
    }

    pub fn params(&self) -> &LoraParams {
        &self.params
    }

    /// `FFT(r · downchirp)`.
    pub fn dechirped_spectrum(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        if r.len() != self.down.len() {
            return Err(Error::shape(format!(
                "symbol has {} samples, expected {}",
                r.len(),
                self.down.len()
            )));
        }
        let mut buf: Vec<Complex64> = r.iter().zip(&self.down).map(|(a, b)| a * b).collect();
        self.fft.process(&mut buf);
        Ok(buf)
    }
}

/// Short-time Fourier transform, `window_len` rows by `frames` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Row-major: `bins[row * frames + col]`, row = frequency bin, col = frame.
    pub bins: Vec<Complex64>,
    pub window_len: usize,
    pub overlap: usize,
    pub frames: usize,
}

impl Spectrogram {
    pub fn get(&self, row: usize, frame: usize) -> Complex64 {
        self.bins[row * self.frames + frame]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.window_len, self.frames)
    }
}

/// Symmetric Hamming window `0.54 − 0.46·cos(2πn/(W−1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

/// Hamming-windowed STFT with hop `window_len − overlap`. Frame `p` covers
/// samples `[p·hop, p·hop + window_len)`; there are `(N − L)/(W − L)` frames.
pub fn stft(r: &[Complex64], window_len: usize, overlap: usize) -> Result<Spectrogram> {
    if window_len == 0 || window_len <= overlap {
        return Err(Error::domain(format!(
            "window length {window_len} must exceed overlap {overlap}"
        )));
    }
    if r.len() < window_len {
        return Err(Error::domain(format!(
            "signal of {} samples shorter than window {window_len}",
            r.len()
        )));
    }
    let hop = window_len - overlap;
    if (r.len() - overlap) % hop != 0 {
        return Err(Error::domain(format!(
            "(N − L) = {} not divisible by (W − L) = {hop}",
            r.len() - overlap
        )));
    }
    let frames = (r.len() - overlap) / hop;
    let window = hamming(window_len);
    let fft = forward_fft(window_len);
    let mut bins = vec![Complex64::new(0.0, 0.0); window_len * frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); window_len];
    for p in 0..frames {
        let start = p * hop;
        for (k, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
            *b = r[start + k] * *w;
        }
        fft.process(&mut buf);
        for (row, v) in buf.iter().enumerate() {
            bins[row * frames + p] = *v;
        }
    }
    Ok(Spectrogram {
        bins,
        window_len,
        overlap,
        frames,
    })
}
