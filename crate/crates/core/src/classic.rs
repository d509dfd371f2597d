//! Conventional MFSK detection of dechirped LoRa symbols.
//!
//! Both detectors take the FFT of the dechirped symbol. The noncoherent
//! detector picks the bin of largest magnitude; the coherent detector, which
//! assumes zero carrier phase offset, picks the bin of largest real part.
//! Ties resolve to the lowest bin.

use num_complex::Complex64;

use crate::error::Result;
use crate::phy::{self, Dechirper, LoraParams, SymbolValue};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    pub symbol: SymbolValue,
    /// The winning metric: magnitude, real part or class probability.
    pub score: f64,
}

/// Index and value of the first maximum.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn decide(spectrum: &[Complex64], metric: impl Fn(&Complex64) -> f64, params: &LoraParams) -> DetectionResult {
    let (bin, score) = argmax(spectrum.iter().map(metric));
    let symbol = SymbolValue::new(phy::bin_to_symbol(bin, params), params).expect("reduced mod M");
    DetectionResult { symbol, score }
}

pub fn noncoherent_from_spectrum(spectrum: &[Complex64], params: &LoraParams) -> DetectionResult {
    decide(spectrum, |v| v.norm(), params)
}

pub fn coherent_from_spectrum(spectrum: &[Complex64], params: &LoraParams) -> DetectionResult {
    decide(spectrum, |v| v.re, params)
}

/// `argmax |FFT(dechirp(r))|`.
pub fn detect_noncoherent(r: &[Complex64], params: &LoraParams) -> Result<DetectionResult> {
    let spec = Dechirper::new(params).dechirped_spectrum(r)?;
    Ok(noncoherent_from_spectrum(&spec, params))
}

/// `argmax Re[FFT(dechirp(r))]`.
pub fn detect_coherent(r: &[Complex64], params: &LoraParams) -> Result<DetectionResult> {
    let spec = Dechirper::new(params).dechirped_spectrum(r)?;
    Ok(coherent_from_spectrum(&spec, params))
}

/// Orthogonal M-ary signalling: `BER = SER · (M/2)/(M − 1)`.
pub fn ser_to_ber(ser: f64, alphabet_size: usize) -> f64 {
    let m = alphabet_size as f64;
    ser * (m / 2.0) / (m - 1.0)
}
