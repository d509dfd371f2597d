use std::collections::BTreeMap;

use super::{BerPoint, DetectorKind};
use crate::error::{Error, Result};

/// One grid point of the envelope comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeRow {
    pub inr_db: f64,
    pub sinr_db: f64,
    pub interferer_sf: u8,
    pub coherent: f64,
    pub fft_cnn: f64,
    pub hybnet: f64,
    /// `(1 + margin)·min(coherent, fft_cnn) + 3σ` of the HybNet estimate.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub margin: f64,
    pub rows: Vec<EnvelopeRow>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.pass).count()
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.passed() as f64 / self.rows.len() as f64
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn key(p: &BerPoint) -> (u64, u64, u8) {
    (p.inr_db.to_bits(), p.sinr_db.to_bits(), p.interferer_sf)
}

/// Flags every operating point where HybNet is worse than the better of its
/// two branches by more than the relative `margin` plus three standard
/// errors. The coherent, FFT-CNN and HybNet rows must cover the same points
/// with equal trial counts; rows of other detectors are ignored.
pub fn hybnet_envelope_check(points: &[BerPoint], margin: f64) -> Result<EnvelopeReport> {
    if !(margin >= 0.0) {
        return Err(Error::domain(format!("margin {margin} must be non-negative")));
    }
    let mut by_point: BTreeMap<(u64, u64, u8), [Option<&BerPoint>; 3]> = BTreeMap::new();
    let mut order = Vec::new();
    for p in points {
        let slot = match p.detector {
            DetectorKind::Coherent => 0,
            DetectorKind::FftCnn => 1,
            DetectorKind::Hybnet => 2,
            _ => continue,
        };
        let entry = by_point.entry(key(p)).or_insert_with(|| {
            order.push(key(p));
            [None; 3]
        });
        if entry[slot].replace(p).is_some() {
            return Err(Error::Unpaired(format!(
                "duplicate {} row at INR {} dB, SINR {} dB",
                p.detector, p.inr_db, p.sinr_db
            )));
        }
    }
    if order.is_empty() {
        return Err(Error::Unpaired("no coherent, fft_cnn or hybnet rows".into()));
    }
    let mut rows = Vec::with_capacity(order.len());
    for k in order {
        let [coh, fft, hyb] = by_point[&k];
        let (Some(coh), Some(fft), Some(hyb)) = (coh, fft, hyb) else {
            return Err(Error::Unpaired(format!(
                "INR {} dB, SINR {} dB lacks one of coherent, fft_cnn, hybnet",
                f64::from_bits(k.0),
                f64::from_bits(k.1)
            )));
        };
        if coh.trials != fft.trials || fft.trials != hyb.trials {
            return Err(Error::Unpaired(format!(
                "trial counts differ at INR {} dB ({}, {}, {})",
                hyb.inr_db, coh.trials, fft.trials, hyb.trials
            )));
        }
        let bound = (1.0 + margin) * coh.ber.min(fft.ber) + 3.0 * hyb.ber_sigma;
        rows.push(EnvelopeRow {
            inr_db: hyb.inr_db,
            sinr_db: hyb.sinr_db,
            interferer_sf: hyb.interferer_sf,
            coherent: coh.ber,
            fft_cnn: fft.ber,
            hybnet: hyb.ber,
            bound,
            pass: hyb.ber <= bound,
        });
    }
    Ok(EnvelopeReport { margin, rows })
}
