//! Feature extractors, the concrete detector networks and the HybNet
//! switching detector.
//!
//! Three input modalities feed the CNN detectors:
//!
//! | modality | features                                        | shape     |
//! |----------|-------------------------------------------------|-----------|
//! | IQ       | Re/Im of the raw symbol                         | 128×1×2   |
//! | STFT     | Re/Im of the 64-point, 63-overlap STFT (raw)    | 64×65×2   |
//! | FFT      | Re of the FFT of the dechirped symbol           | 128×1×1   |
//!
//! Features are not normalized per frame; batch normalization inside the
//! networks is the only scaling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::MixtureCoefficients;
use crate::classic::{self, DetectionResult};
use crate::error::{Error, Result};
use crate::nn::{self, LabeledSet, LayerSpec, Network, NetworkSpec, Shape3, Tensor, TrainingConfig, TrainingOutcome};
use crate::phy::{self, Dechirper, LoraParams, SymbolValue};

pub const STFT_WINDOW: usize = 64;
pub const STFT_OVERLAP: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Iq,
    Stft,
    Fft,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Iq, Modality::Stft, Modality::Fft];

    /// Network input shape for SF7 at critical sampling.
    pub fn input_shape(self) -> Shape3 {
        self.input_shape_for(&LoraParams::sf7())
    }

    pub fn input_shape_for(self, params: &LoraParams) -> Shape3 {
        let n = params.samples_per_symbol;
        match self {
            Modality::Iq => Shape3::new(n, 1, 2),
            Modality::Stft => Shape3::new(STFT_WINDOW, (n - STFT_OVERLAP) / (STFT_WINDOW - STFT_OVERLAP), 2),
            Modality::Fft => Shape3::new(n, 1, 1),
        }
    }

    /// Byte stored in checkpoints and dataset headers.
    pub fn tag(self) -> u8 {
        match self {
            Modality::Iq => 1,
            Modality::Stft => 2,
            Modality::Fft => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Modality::Iq),
            2 => Ok(Modality::Stft),
            3 => Ok(Modality::Fft),
            t => Err(Error::domain(format!("unknown modality tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Iq => "iq",
            Modality::Stft => "stft",
            Modality::Fft => "fft",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iq" => Ok(Modality::Iq),
            "stft" => Ok(Modality::Stft),
            "fft" => Ok(Modality::Fft),
            _ => Err(Error::domain(format!("unknown modality '{s}' (expected iq, stft or fft)"))),
        }
    }
}

/// Turns synchronized symbols into network inputs for one modality.
#[derive(Debug, Clone)]
pub struct Featurizer {
    modality: Modality,
    dechirper: Dechirper,
}

impl Featurizer {
    pub fn new(modality: Modality, params: &LoraParams) -> Self {
        Self {
            modality,
            dechirper: Dechirper::new(params),
        }
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn params(&self) -> &LoraParams {
        self.dechirper.params()
    }

    pub fn shape(&self) -> Shape3 {
        self.modality.input_shape_for(self.params())
    }

    /// Flat `h·w·c` feature vector in channel-last order.
    pub fn features(&self, r: &[Complex64]) -> Result<Vec<f32>> {
        let n = self.params().samples_per_symbol;
        if r.len() != n {
            return Err(Error::shape(format!("symbol has {} samples, expected {n}", r.len())));
        }
        Ok(match self.modality {
            Modality::Iq => r.iter().flat_map(|v| [v.re as f32, v.im as f32]).collect(),
            Modality::Stft => {
                let s = phy::stft(r, STFT_WINDOW, STFT_OVERLAP)?;
                s.bins.iter().flat_map(|v| [v.re as f32, v.im as f32]).collect()
            }
            Modality::Fft => self
                .dechirper
                .dechirped_spectrum(r)?
                .iter()
                .map(|v| v.re as f32)
                .collect(),
        })
    }

    /// `b × h × w × c` batch, featurized in parallel.
    pub fn batch<S: AsRef<[Complex64]> + Sync>(&self, symbols: &[S]) -> Result<Tensor> {
        let shape = self.shape();
        let rows: Vec<Vec<f32>> = symbols
            .par_iter()
            .map(|s| self.features(s.as_ref()))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(rows.len() * shape.len());
        for row in rows {
            data.extend(row);
        }
        Tensor::new(vec![symbols.len(), shape.h, shape.w, shape.c], data)
    }
}

/// Single-symbol featurization as an `h × w × c` tensor.
pub fn featurize(r: &[Complex64], modality: Modality, params: &LoraParams) -> Result<Tensor> {
    let f = Featurizer::new(modality, params);
    let s = f.shape();
    Tensor::new(vec![s.h, s.w, s.c], f.features(r)?)
}

/// The four trainable networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    IqCnn,
    StftCnn,
    FftCnn,
    InterferenceDetector,
}

/// Class index of the interference detector meaning "no significant interferer".
pub const NOISE_ONLY: usize = 0;
/// Class index of the interference detector meaning "interference-dominated".
pub const INTERFERENCE: usize = 1;

fn conv_stack(input: Shape3, blocks: usize, filters: usize, kh: usize, kw: usize, dropout: f32, classes: usize) -> NetworkSpec {
    let mut layers = Vec::with_capacity(3 * blocks + 4);
    for _ in 0..blocks {
        layers.push(LayerSpec::Conv { filters, kh, kw });
        layers.push(LayerSpec::BatchNorm);
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::MaxPool { ph: 2, pw: 1 });
    layers.push(LayerSpec::Dropout { rate: dropout });
    layers.push(LayerSpec::Dense { units: classes });
    layers.push(LayerSpec::Softmax);
    NetworkSpec::new(input, layers).expect("fixed architecture is consistent")
}

pub fn build_iq_cnn() -> NetworkSpec {
    conv_stack(Modality::Iq.input_shape(), 4, 8, 5, 1, 0.36, 128)
}

pub fn build_stft_cnn() -> NetworkSpec {
    conv_stack(Modality::Stft.input_shape(), 3, 9, 7, 7, 0.37, 128)
}

pub fn build_fft_cnn() -> NetworkSpec {
    conv_stack(Modality::Fft.input_shape(), 4, 8, 19, 1, 0.24, 128)
}

pub fn build_interference_detector() -> NetworkSpec {
    conv_stack(Modality::Fft.input_shape(), 2, 4, 19, 1, 0.30, 2)
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::IqCnn,
        Architecture::StftCnn,
        Architecture::FftCnn,
        Architecture::InterferenceDetector,
    ];

    pub fn spec(self) -> NetworkSpec {
        match self {
            Architecture::IqCnn => build_iq_cnn(),
            Architecture::StftCnn => build_stft_cnn(),
            Architecture::FftCnn => build_fft_cnn(),
            Architecture::InterferenceDetector => build_interference_detector(),
        }
    }

    pub fn modality(self) -> Modality {
        match self {
            Architecture::IqCnn => Modality::Iq,
            Architecture::StftCnn => Modality::Stft,
            Architecture::FftCnn | Architecture::InterferenceDetector => Modality::Fft,
        }
    }

    /// Tuned initial learning rate. The interference detector has no tuned
    /// value and uses the default schedule rate.
    pub fn learning_rate(self) -> f64 {
        match self {
            Architecture::IqCnn => 0.015,
            Architecture::StftCnn => 0.001,
            Architecture::FftCnn => 0.0056,
            Architecture::InterferenceDetector => TrainingConfig::default().lr_initial,
        }
    }

    pub fn training_config(self) -> TrainingConfig {
        TrainingConfig::with_lr(self.learning_rate())
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::IqCnn => "iq",
            Architecture::StftCnn => "stft",
            Architecture::FftCnn => "fft",
            Architecture::InterferenceDetector => "intdet",
        }
    }

    pub fn train(self, data: &LabeledSet, validation: Option<&LabeledSet>, cfg: &TrainingConfig) -> Result<(TrainedModel, TrainingOutcome)> {
        let outcome = nn::train(&self.spec(), data, validation, cfg)?;
        let model = TrainedModel::new(self.modality(), outcome.network.clone())?;
        Ok((model, outcome))
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iq" | "iq_cnn" | "iq-cnn" => Ok(Architecture::IqCnn),
            "stft" | "stft_cnn" | "stft-cnn" => Ok(Architecture::StftCnn),
            "fft" | "fft_cnn" | "fft-cnn" => Ok(Architecture::FftCnn),
            "intdet" | "interference" => Ok(Architecture::InterferenceDetector),
            _ => Err(Error::domain(format!("unknown network '{s}' (expected iq, stft, fft or intdet)"))),
        }
    }
}

/// A network bound to the modality it consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub modality: Modality,
    pub network: Network<f32>,
}

impl TrainedModel {
    pub fn new(modality: Modality, network: Network<f32>) -> Result<Self> {
        let want = modality.input_shape_for(&params_for_input(modality, network.input_shape())?);
        if network.input_shape() != want {
            return Err(Error::domain(format!(
                "network input {} does not fit the {modality} modality",
                network.input_shape()
            )));
        }
        Ok(Self { modality, network })
    }

    pub fn classes(&self) -> usize {
        self.network.classes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        nn::save_checkpoint(path, &self.network, self.modality.tag())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (network, tag) = nn::load_checkpoint(path)?;
        Self::new(Modality::from_tag(tag)?, network)
    }

    fn check_params(&self, params: &LoraParams) -> Result<()> {
        if self.network.input_shape() != self.modality.input_shape_for(params) {
            return Err(Error::domain(format!(
                "model input {} does not match SF{} symbols",
                self.network.input_shape(),
                params.sf
            )));
        }
        Ok(())
    }

    /// Class probabilities for a batch of symbols, `b × classes`.
    pub fn probabilities<S: AsRef<[Complex64]> + Sync>(&self, symbols: &[S], params: &LoraParams) -> Result<Tensor> {
        self.check_params(params)?;
        let x = Featurizer::new(self.modality, params).batch(symbols)?;
        self.network.predict_proba(&x)
    }

    /// Argmax class and its probability for every symbol.
    pub fn classify<S: AsRef<[Complex64]> + Sync>(&self, symbols: &[S], params: &LoraParams) -> Result<Vec<(usize, f64)>> {
        let probs = self.probabilities(symbols, params)?;
        let k = self.classes();
        Ok(probs
            .data()
            .chunks_exact(k)
            .map(|row| classic::argmax(row.iter().map(|&p| f64::from(p))))
            .collect())
    }
}

/// Recovers the LoRa parameters implied by a network input shape.
pub(crate) fn params_for_input(modality: Modality, shape: Shape3) -> Result<LoraParams> {
    let n = match modality {
        Modality::Iq | Modality::Fft => shape.h,
        Modality::Stft => shape.w + STFT_OVERLAP,
    };
    let sf = n.trailing_zeros();
    if !n.is_power_of_two() || !(7..=12).contains(&sf) {
        return Err(Error::domain(format!("input {shape} does not correspond to a LoRa symbol length")));
    }
    LoraParams::sf7().with_sf(sf as u8)
}

fn symbol_detector_check(model: &TrainedModel, params: &LoraParams) -> Result<()> {
    if model.classes() != params.alphabet_size {
        return Err(Error::domain(format!(
            "model has {} classes, SF{} needs {}",
            model.classes(),
            params.sf,
            params.alphabet_size
        )));
    }
    Ok(())
}

/// Featurize, predict, and read the winning class as the symbol value.
pub fn detect_dl(model: &TrainedModel, r: &[Complex64], modality: Modality, params: &LoraParams) -> Result<DetectionResult> {
    Ok(detect_dl_batch(model, &[r], modality, params)?.remove(0))
}

pub fn detect_dl_batch<S: AsRef<[Complex64]> + Sync>(
    model: &TrainedModel,
    symbols: &[S],
    modality: Modality,
    params: &LoraParams,
) -> Result<Vec<DetectionResult>> {
    if model.modality != modality {
        return Err(Error::domain(format!(
            "model consumes {} features, asked for {modality}",
            model.modality
        )));
    }
    symbol_detector_check(model, params)?;
    model
        .classify(symbols, params)?
        .into_iter()
        .map(|(class, p)| {
            Ok(DetectionResult {
                symbol: SymbolValue::new(class, params)?,
                score: p,
            })
        })
        .collect()
}

/// Interference-detector label: interference when the interferer power
/// exceeds target plus noise power (`p_I > 1 + σ²`), noise-only when it is
/// below. Exact ties have no label.
pub fn interference_label(coefficients: &MixtureCoefficients) -> Option<usize> {
    let p_i = coefficients.interferer_power();
    let rest = 1.0 + coefficients.noise_power();
    if p_i > rest {
        Some(INTERFERENCE)
    } else if p_i < rest {
        Some(NOISE_ONLY)
    } else {
        None
    }
}

/// `10·log10(p_I / (1 + σ²))`: how far a frame sits from the labelling
/// boundary. `-inf` without an interferer.
pub fn interference_margin_db(coefficients: &MixtureCoefficients) -> f64 {
    10.0 * (coefficients.interferer_power() / (1.0 + coefficients.noise_power())).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Coherent,
    Cnn,
}

/// Interference detector plus FFT-CNN; routes each symbol to the coherent
/// detector or the CNN.
#[derive(Debug, Clone, PartialEq)]
pub struct HybnetModel {
    pub interference_detector: TrainedModel,
    pub fft_cnn: TrainedModel,
}

impl HybnetModel {
    pub fn new(interference_detector: TrainedModel, fft_cnn: TrainedModel) -> Result<Self> {
        if interference_detector.modality != Modality::Fft || fft_cnn.modality != Modality::Fft {
            return Err(Error::domain("both HybNet sub-models must consume FFT features"));
        }
        if interference_detector.classes() != 2 {
            return Err(Error::domain("the interference detector must have two classes"));
        }
        if interference_detector.network.input_shape() != fft_cnn.network.input_shape() {
            return Err(Error::domain("HybNet sub-models were built for different symbol lengths"));
        }
        Ok(Self {
            interference_detector,
            fft_cnn,
        })
    }

    /// Branch chosen for each symbol (argmax of the two-class output).
    pub fn route<S: AsRef<[Complex64]> + Sync>(&self, symbols: &[S], params: &LoraParams) -> Result<Vec<Branch>> {
        Ok(self
            .interference_detector
            .classify(symbols, params)?
            .into_iter()
            .map(|(class, _)| if class == INTERFERENCE { Branch::Cnn } else { Branch::Coherent })
            .collect())
    }
}

/// Runs the chosen branch on one symbol.
pub fn detect_on_branch(h: &HybnetModel, r: &[Complex64], branch: Branch, params: &LoraParams) -> Result<DetectionResult> {
    match branch {
        Branch::Coherent => classic::detect_coherent(r, params),
        Branch::Cnn => detect_dl(&h.fft_cnn, r, Modality::Fft, params),
    }
}

pub fn hybnet_detect(h: &HybnetModel, r: &[Complex64], params: &LoraParams) -> Result<DetectionResult> {
    let branch = h.route(&[r], params)?[0];
    detect_on_branch(h, r, branch, params)
}

/// Batch HybNet detection. Each symbol's result is exactly the output of the
/// branch it was routed to.
pub fn hybnet_detect_batch<S: AsRef<[Complex64]> + Sync>(
    h: &HybnetModel,
    symbols: &[S],
    params: &LoraParams,
) -> Result<Vec<(Branch, DetectionResult)>> {
    symbol_detector_check(&h.fft_cnn, params)?;
    let routes = h.route(symbols, params)?;
    let cnn_idx: Vec<usize> = (0..symbols.len()).filter(|&i| routes[i] == Branch::Cnn).collect();
    let cnn_syms: Vec<&[Complex64]> = cnn_idx.iter().map(|&i| symbols[i].as_ref()).collect();
    let mut cnn_out = if cnn_syms.is_empty() {
        Vec::new()
    } else {
        detect_dl_batch(&h.fft_cnn, &cnn_syms, Modality::Fft, params)?
    }
    .into_iter();
    let dechirper = Dechirper::new(params);
    routes
        .into_iter()
        .zip(symbols)
        .map(|(branch, s)| {
            let result = match branch {
                Branch::Coherent => classic::coherent_from_spectrum(&dechirper.dechirped_spectrum(s.as_ref())?, params),
                Branch::Cnn => cnn_out.next().expect("one CNN result per routed symbol"),
            };
            Ok((branch, result))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn clean(m: usize) -> Vec<Complex64> {
        let p = LoraParams::sf7();
        phy::modulate_symbol(SymbolValue::new(m, &p).unwrap(), &p).unwrap().into_samples()
    }

    #[test]
    fn feature_shapes_and_contents() {
        let p = LoraParams::sf7();
        assert_eq!(Modality::Iq.input_shape(), Shape3::new(128, 1, 2));
        assert_eq!(Modality::Stft.input_shape(), Shape3::new(64, 65, 2));
        assert_eq!(Modality::Fft.input_shape(), Shape3::new(128, 1, 1));
        let r = clean(5);
        let iq = featurize(&r, Modality::Iq, &p).unwrap();
        assert_eq!(iq.shape(), [128, 1, 2]);
        for (n, v) in r.iter().enumerate() {
            assert_eq!(iq.data()[2 * n], v.re as f32);
            assert_eq!(iq.data()[2 * n + 1], v.im as f32);
        }
        let zeros = vec![Complex64::new(0.0, 0.0); 128];
        let st = featurize(&zeros, Modality::Stft, &p).unwrap();
        assert_eq!(st.shape(), [64, 65, 2]);
        assert!(st.data().iter().all(|&v| v == 0.0));
        assert!(featurize(&r[..64], Modality::Fft, &p).is_err());
    }

    #[test]
    fn fft_feature_peaks_at_symbol() {
        let p = LoraParams::sf7();
        for m in 0..128 {
            let f = featurize(&clean(m), Modality::Fft, &p).unwrap();
            let (best, v) = classic::argmax(f.data().iter().map(|&x| f64::from(x)));
            assert_eq!(best, m);
            assert!((v - 128.0).abs() < 1e-3);
        }
    }

    #[test]
    fn stft_feature_matches_spectrogram_layout() {
        let p = LoraParams::sf7();
        let r = clean(40);
        let f = featurize(&r, Modality::Stft, &p).unwrap();
        let s = phy::stft(&r, 64, 63).unwrap();
        for (row, frame) in [(0, 0), (17, 3), (63, 64)] {
            let v = s.get(row, frame);
            let at = (row * 65 + frame) * 2;
            assert_eq!(f.data()[at], v.re as f32);
            assert_eq!(f.data()[at + 1], v.im as f32);
        }
    }

    #[test]
    fn architecture_shapes_and_parameter_counts() {
        let fft = build_fft_cnn();
        assert_eq!(fft.input_shape, Shape3::new(128, 1, 1));
        let dense = fft.layers.iter().position(|l| matches!(l, LayerSpec::Dense { .. })).unwrap();
        assert_eq!(fft.layer_params(dense).unwrap(), 65_664);
        assert_eq!(fft.conv_depth(), 4);
        assert_eq!(build_iq_cnn().conv_depth(), 4);
        assert_eq!(build_stft_cnn().conv_depth(), 3);
        assert_eq!(build_stft_cnn().input_shape, Shape3::new(64, 65, 2));
        let det = build_interference_detector();
        let dense = det.layers.iter().position(|l| matches!(l, LayerSpec::Dense { .. })).unwrap();
        assert_eq!(det.layer_params(dense).unwrap(), 514);
        assert_eq!(det.conv_depth(), 2);
        assert_eq!(det.input_shape, Modality::Fft.input_shape());
        for a in Architecture::ALL {
            assert_eq!(a.spec().input_shape, a.modality().input_shape());
        }
        assert_eq!(Architecture::FftCnn.learning_rate(), 0.0056);
    }

    #[test]
    fn interference_labels_follow_dominance() {
        let c = |i: f64, n: f64| MixtureCoefficients {
            interferer_amp: i.sqrt(),
            noise_amp: n.sqrt(),
        };
        assert_eq!(interference_label(&c(0.0, 5.0)), Some(NOISE_ONLY));
        assert_eq!(interference_label(&c(2.0, 0.5)), Some(INTERFERENCE));
        assert_eq!(interference_label(&c(2.0, 3.0)), Some(NOISE_ONLY));
        let tie = MixtureCoefficients {
            interferer_amp: 1.25,
            noise_amp: 0.75,
        };
        assert_eq!(interference_label(&tie), None);
        assert_eq!(interference_margin_db(&c(0.0, 1.0)), f64::NEG_INFINITY);
    }

    fn untrained(arch: Architecture, seed: u64) -> TrainedModel {
        // one training-mode pass so batch norm has running statistics
        let mut net = Network::<f32>::init(&arch.spec(), &mut rng::seeded(seed)).unwrap();
        let p = LoraParams::sf7();
        let syms: Vec<Vec<Complex64>> = (0..8).map(|m| clean(m * 9)).collect();
        let x = Featurizer::new(arch.modality(), &p).batch(&syms).unwrap();
        net.forward_train(&x, &mut rng::seeded(seed + 1)).unwrap();
        TrainedModel::new(arch.modality(), net).unwrap()
    }

    #[test]
    fn modality_mismatch_is_rejected() {
        let p = LoraParams::sf7();
        let m = untrained(Architecture::FftCnn, 1);
        assert!(detect_dl(&m, &clean(3), Modality::Iq, &p).is_err());
        assert!(detect_dl(&m, &clean(3), Modality::Fft, &p).is_ok());
        let det = untrained(Architecture::InterferenceDetector, 2);
        assert!(detect_dl(&det, &clean(3), Modality::Fft, &p).is_err());
        assert!(HybnetModel::new(m.clone(), det.clone()).is_err());
        assert!(HybnetModel::new(det, m).is_ok());
    }

    #[test]
    fn hybnet_output_is_exactly_one_branch() {
        let p = LoraParams::sf7();
        let h = HybnetModel::new(untrained(Architecture::InterferenceDetector, 3), untrained(Architecture::FftCnn, 4)).unwrap();
        let mut r = rng::seeded(5);
        let syms: Vec<Vec<Complex64>> = (0..24)
            .map(|i| {
                let cfg = crate::channel::ChannelConfig {
                    inr_db: if i % 2 == 0 { 20.0 } else { -10.0 },
                    sinr_db: -5.0,
                    interferer_sf: 7,
                    interferer_offset_samples: (i * 5) % 128,
                    rng_seed: i as u64,
                };
                crate::channel::mix(&clean((i * 11) % 128), &cfg, &p, &mut r).unwrap()
            })
            .collect();
        let batch = hybnet_detect_batch(&h, &syms, &p).unwrap();
        for (s, (branch, res)) in syms.iter().zip(&batch) {
            assert_eq!(*res, hybnet_detect(&h, s, &p).unwrap());
            assert_eq!(detect_on_branch(&h, s, Branch::Coherent, &p).unwrap(), classic::detect_coherent(s, &p).unwrap());
            assert_eq!(
                detect_on_branch(&h, s, Branch::Cnn, &p).unwrap(),
                detect_dl(&h.fft_cnn, s, Modality::Fft, &p).unwrap()
            );
            assert_eq!(*res, detect_on_branch(&h, s, *branch, &p).unwrap());
        }
    }

    #[test]
    fn model_file_round_trip_keeps_modality() {
        let m = untrained(Architecture::IqCnn, 6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("iq.ckpt");
        m.save(&path).unwrap();
        assert_eq!(TrainedModel::load(&path).unwrap(), m);
    }
}
