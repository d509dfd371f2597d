//! Labelled training corpora and the `LDS1` container.
//!
//! Every record is a pure function of the master seed, the split and the
//! record index: the conditions (INR, SINR, interferer SF and offset) come
//! from one random stream and the symbol plus mixture from a second, so a
//! record can be re-synthesized from its stored metadata alone. Train and
//! validation records use distinct stream tags and never overlap.
//!
//! `LDS1` layout (little-endian):
//!
//! ```text
//! magic "LDS1" | modality u8 | h, w, c u32 | count u64 | label arity u32
//! | spec echo: u32 byte length + UTF-8 key=value text
//! | count × ( h·w·c f32 features | u32 label
//!            | f32 inr_db | f32 sinr_db | u32 interferer_sf (0 = none) | u32 offset )
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::binio::{put_f32, put_f32s, put_u32, put_u64, put_u8, to_u32, ByteReader};
use crate::channel::{self, ChannelConfig};
use crate::error::{Error, Result};
use crate::models::{self, Featurizer, Modality};
use crate::nn::{LabeledSet, Shape3, Tensor};
use crate::phy::{self, LoraParams, SymbolValue};
use crate::rng;

pub const DATASET_MAGIC: [u8; 4] = *b"LDS1";

/// Bytes stored per record besides the features.
pub const RECORD_OVERHEAD: usize = 20;

/// Upper bound on rejection draws when forcing the class balance.
const MAX_LABEL_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Label is the transmitted symbol value.
    Symbols,
    /// Label is noise-only (0) or interference (1), classes balanced 50/50.
    Interference,
}

impl Task {
    fn name(self) -> &'static str {
        match self {
            Task::Symbols => "symbols",
            Task::Interference => "interference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    fn tags(self) -> (u16, u16) {
        match self {
            Split::Train => (1, 2),
            Split::Validation => (3, 4),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub task: Task,
    pub modality: Modality,
    pub sf: u8,
    pub num_train: usize,
    pub num_val: usize,
    pub sinr_range_db: (f64, f64),
    pub inr_range_db: (f64, f64),
    pub interferer_sfs: Vec<u8>,
    /// Probability that a record carries an interferer.
    pub interference_fraction: f64,
    pub rng_seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            task: Task::Symbols,
            modality: Modality::Fft,
            sf: 7,
            num_train: 20_000,
            num_val: 5_000,
            sinr_range_db: (-20.0, 0.0),
            inr_range_db: (-10.0, 30.0),
            interferer_sfs: vec![7, 8, 9, 10, 11, 12],
            interference_fraction: 0.5,
            rng_seed: 1,
        }
    }
}

impl DatasetSpec {
    /// Full-size corpus: 110,000 training and 30,000 validation records.
    pub fn full_scale(self) -> Self {
        Self {
            num_train: 110_000,
            num_val: 30_000,
            ..self
        }
    }

    pub fn params(&self) -> Result<LoraParams> {
        LoraParams::sf7().with_sf(self.sf)
    }

    pub fn label_arity(&self) -> Result<usize> {
        Ok(match self.task {
            Task::Symbols => self.params()?.alphabet_size,
            Task::Interference => 2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.num_train == 0 || self.num_val == 0 {
            return Err(Error::domain("record counts must be positive"));
        }
        for (name, (lo, hi)) in [("SINR", self.sinr_range_db), ("INR", self.inr_range_db)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::domain(format!("{name} range [{lo}, {hi}] is empty or not finite")));
            }
        }
        if !(0.0..=1.0).contains(&self.interference_fraction) {
            return Err(Error::domain("interference fraction outside [0, 1]"));
        }
        if self.interference_fraction > 0.0 && self.interferer_sfs.is_empty() {
            return Err(Error::domain("interferers requested but no interferer SFs given"));
        }
        if let Some(sf) = self.interferer_sfs.iter().find(|sf| !(7..=12).contains(*sf)) {
            return Err(Error::domain(format!("interferer SF {sf} outside 7..=12")));
        }
        if self.task == Task::Interference && self.modality != Modality::Fft {
            return Err(Error::domain("interference labels are defined on FFT features"));
        }
        Ok(())
    }

    /// `key=value` lines describing the spec.
    pub fn to_manifest(&self) -> String {
        let sfs: Vec<String> = self.interferer_sfs.iter().map(u8::to_string).collect();
        let mut s = String::new();
        let _ = writeln!(s, "task={}", self.task.name());
        let _ = writeln!(s, "modality={}", self.modality);
        let _ = writeln!(s, "sf={}", self.sf);
        let _ = writeln!(s, "num_train={}", self.num_train);
        let _ = writeln!(s, "num_val={}", self.num_val);
        let _ = writeln!(s, "sinr_min_db={}", self.sinr_range_db.0);
        let _ = writeln!(s, "sinr_max_db={}", self.sinr_range_db.1);
        let _ = writeln!(s, "inr_min_db={}", self.inr_range_db.0);
        let _ = writeln!(s, "inr_max_db={}", self.inr_range_db.1);
        let _ = writeln!(s, "interferer_sfs={}", sfs.join(","));
        let _ = writeln!(s, "interference_fraction={}", self.interference_fraction);
        let _ = writeln!(s, "seed={}", self.rng_seed);
        s
    }

    /// Parses `key=value` lines; blank lines and `#` comments are ignored and
    /// missing keys keep their defaults.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut spec = DatasetSpec::default();
        let mut seen = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::domain(format!("manifest line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), ()).is_some() {
                return Err(Error::domain(format!("manifest line {}: duplicate key '{key}'", lineno + 1)));
            }
            let bad = |what: &str| Error::domain(format!("manifest line {}: bad {what} '{value}'", lineno + 1));
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(key));
            match key {
                "task" => {
                    spec.task = match value {
                        "symbols" => Task::Symbols,
                        "interference" => Task::Interference,
                        _ => return Err(bad("task")),
                    }
                }
                "modality" => spec.modality = value.parse()?,
                "sf" => spec.sf = value.parse().map_err(|_| bad(key))?,
                "num_train" => spec.num_train = value.parse().map_err(|_| bad(key))?,
                "num_val" => spec.num_val = value.parse().map_err(|_| bad(key))?,
                "sinr_min_db" => spec.sinr_range_db.0 = num(value)?,
                "sinr_max_db" => spec.sinr_range_db.1 = num(value)?,
                "inr_min_db" => spec.inr_range_db.0 = num(value)?,
                "inr_max_db" => spec.inr_range_db.1 = num(value)?,
                "interferer_sfs" => {
                    spec.interferer_sfs = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|s| s.trim().parse::<u8>().map_err(|_| bad(key)))
                            .collect::<Result<_>>()?
                    }
                }
                "interference_fraction" => spec.interference_fraction = num(value)?,
                "seed" => spec.rng_seed = value.parse().map_err(|_| bad(key))?,
                "scale" => {
                    if value == "full" {
                        spec = spec.full_scale();
                    } else if value != "desk" {
                        return Err(bad("scale"));
                    }
                }
                _ => return Err(Error::domain(format!("manifest line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Conditions a record was synthesized under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordMeta {
    /// `-inf` when no interferer is present.
    pub inr_db: f32,
    pub sinr_db: f32,
    /// 0 when no interferer is present.
    pub interferer_sf: u8,
    pub offset: u32,
}

impl RecordMeta {
    pub fn has_interferer(&self) -> bool {
        self.interferer_sf != 0
    }

    pub fn channel(&self, rng_seed: u64) -> ChannelConfig {
        ChannelConfig {
            inr_db: f64::from(self.inr_db),
            sinr_db: f64::from(self.sinr_db),
            interferer_sf: if self.has_interferer() { self.interferer_sf } else { 7 },
            interferer_offset_samples: self.offset as usize,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub features: Vec<f32>,
    pub label: u32,
    pub meta: RecordMeta,
}

/// A materialized split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub modality: Modality,
    pub shape: Shape3,
    pub label_arity: usize,
    /// Generation spec echo stored in the header.
    pub provenance: String,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_labeled_set(&self) -> Result<LabeledSet> {
        let mut data = Vec::with_capacity(self.len() * self.shape.len());
        for r in &self.records {
            data.extend_from_slice(&r.features);
        }
        let s = self.shape;
        LabeledSet::new(
            Tensor::new(vec![self.len(), s.h, s.w, s.c], data)?,
            self.records.iter().map(|r| r.label as usize).collect(),
        )
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.label_arity];
        for r in &self.records {
            h[r.label as usize] += 1;
        }
        h
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&DATASET_MAGIC)?;
        put_u8(w, self.modality.tag())?;
        for d in self.shape.dims() {
            put_u32(w, to_u32(d, "feature dimension")?)?;
        }
        put_u64(w, self.len() as u64)?;
        put_u32(w, to_u32(self.label_arity, "label arity")?)?;
        put_u32(w, to_u32(self.provenance.len(), "spec echo length")?)?;
        w.write_all(self.provenance.as_bytes())?;
        for r in &self.records {
            if r.features.len() != self.shape.len() {
                return Err(Error::shape(format!(
                    "record has {} features, dataset shape {} needs {}",
                    r.features.len(),
                    self.shape,
                    self.shape.len()
                )));
            }
            put_f32s(w, &r.features)?;
            put_u32(w, r.label)?;
            put_f32(w, r.meta.inr_db)?;
            put_f32(w, r.meta.sinr_db)?;
            put_u32(w, u32::from(r.meta.interferer_sf))?;
            put_u32(w, r.meta.offset)?;
        }
        Ok(())
    }

    pub fn read(r: impl Read) -> Result<Self> {
        let mut r = ByteReader::new(r);
        let mut magic = [0u8; 4];
        r.bytes(&mut magic, "magic")?;
        if magic != DATASET_MAGIC {
            return Err(Error::format(0, format!("bad dataset magic {magic:?}")));
        }
        let at = r.offset();
        let modality = Modality::from_tag(r.u8("modality")?).map_err(|e| Error::format(at, e.to_string()))?;
        let at = r.offset();
        let shape = Shape3::new(r.u32("height")? as usize, r.u32("width")? as usize, r.u32("channels")? as usize);
        let fits = models::params_for_input(modality, shape).is_ok_and(|p| modality.input_shape_for(&p) == shape);
        if !fits {
            return Err(Error::format(at, format!("shape {shape} does not match {modality} features")));
        }
        let at = r.offset();
        let count = r.u64("record count")?;
        let arity = r.u32("label arity")? as usize;
        if arity == 0 {
            return Err(Error::format(at + 8, "label arity is zero"));
        }
        let at = r.offset();
        let echo_len = r.u32("spec echo length")? as usize;
        if echo_len > 1 << 20 {
            return Err(Error::format(at, format!("implausible spec echo length {echo_len}")));
        }
        let mut echo = vec![0u8; echo_len];
        r.bytes(&mut echo, "spec echo")?;
        let provenance = String::from_utf8(echo).map_err(|_| Error::format(at + 4, "spec echo is not UTF-8"))?;
        let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
        for _ in 0..count {
            let features = r.f32s(shape.len(), "features")?;
            let at = r.offset();
            let label = r.u32("label")?;
            if label as usize >= arity {
                return Err(Error::format(at, format!("label {label} outside {arity} classes")));
            }
            let inr_db = r.f32("INR")?;
            let sinr_db = r.f32("SINR")?;
            let at = r.offset();
            let sf = r.u32("interferer SF")?;
            if sf != 0 && !(7..=12).contains(&sf) {
                return Err(Error::format(at, format!("bad interferer SF {sf}")));
            }
            let offset = r.u32("offset")?;
            records.push(DatasetRecord {
                features,
                label,
                meta: RecordMeta {
                    inr_db,
                    sinr_db,
                    interferer_sf: sf as u8,
                    offset,
                },
            });
        }
        r.expect_end()?;
        Ok(Self {
            modality,
            shape,
            label_arity: arity,
            provenance,
            records,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    /// Exact file size of a dataset with this header and `count` records.
    pub fn file_size(&self) -> usize {
        4 + 1 + 12 + 8 + 4 + 4 + self.provenance.len() + self.len() * (4 * self.shape.len() + RECORD_OVERHEAD)
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws one set of conditions. INR and SINR are rounded to `f32` so the
/// stored metadata reproduces the mixture exactly.
fn draw_conditions(spec: &DatasetSpec, params: &LoraParams, rng: &mut impl Rng) -> Result<RecordMeta> {
    let sinr_db = uniform(rng, spec.sinr_range_db) as f32;
    if rng.random::<f64>() >= spec.interference_fraction {
        return Ok(RecordMeta {
            inr_db: f32::NEG_INFINITY,
            sinr_db,
            interferer_sf: 0,
            offset: 0,
        });
    }
    let inr_db = uniform(rng, spec.inr_range_db) as f32;
    let sf = spec.interferer_sfs[rng.random_range(0..spec.interferer_sfs.len())];
    let n_i = params.with_sf(sf)?.samples_per_symbol;
    Ok(RecordMeta {
        inr_db,
        sinr_db,
        interferer_sf: sf,
        offset: rng.random_range(0..n_i) as u32,
    })
}

/// Symbol value and received samples for a record, from the record's
/// mixture stream and its metadata.
fn synthesize(params: &LoraParams, meta: &RecordMeta, rng: &mut impl Rng) -> Result<(usize, Vec<num_complex::Complex64>)> {
    let m = rng.random_range(0..params.alphabet_size);
    let target = phy::modulate_symbol(SymbolValue::new(m, params)?, params)?;
    let cfg = meta.channel(0);
    let received = channel::mix(&target, &cfg, params, rng)?;
    Ok((m, received))
}

fn record(spec: &DatasetSpec, params: &LoraParams, featurizer: &Featurizer, split: Split, index: usize) -> Result<DatasetRecord> {
    let (cond_tag, mix_tag) = split.tags();
    let mut cond_rng = rng::stream(spec.rng_seed, rng::stream_id(cond_tag, index as u64));
    let (meta, wanted) = match spec.task {
        Task::Symbols => (draw_conditions(spec, params, &mut cond_rng)?, None),
        Task::Interference => {
            let want = index % 2;
            let mut found = None;
            for _ in 0..MAX_LABEL_DRAWS {
                let meta = draw_conditions(spec, params, &mut cond_rng)?;
                let coeffs = channel::mixture_coefficients(&meta.channel(0));
                if models::interference_label(&coeffs) == Some(want) {
                    found = Some(meta);
                    break;
                }
            }
            let meta = found.ok_or_else(|| {
                Error::domain(format!("the condition ranges never produce interference class {want}"))
            })?;
            (meta, Some(want))
        }
    };
    let mut mix_rng = rng::stream(spec.rng_seed, rng::stream_id(mix_tag, index as u64));
    let (m, received) = synthesize(params, &meta, &mut mix_rng)?;
    Ok(DatasetRecord {
        features: featurizer.features(&received)?,
        label: wanted.unwrap_or(m) as u32,
        meta,
    })
}

/// Re-creates a record's features from its metadata and the mixture stream
/// of `(seed, split, index)`.
pub fn resynthesize(spec: &DatasetSpec, split: Split, index: usize, meta: &RecordMeta) -> Result<Vec<f32>> {
    let params = spec.params()?;
    let mut mix_rng = rng::stream(spec.rng_seed, rng::stream_id(split.tags().1, index as u64));
    let (_, received) = synthesize(&params, meta, &mut mix_rng)?;
    Featurizer::new(spec.modality, &params).features(&received)
}

/// Generates one split in parallel; the result does not depend on the
/// thread count.
pub fn generate_split(spec: &DatasetSpec, split: Split) -> Result<Dataset> {
    spec.validate()?;
    let params = spec.params()?;
    let featurizer = Featurizer::new(spec.modality, &params);
    let count = match split {
        Split::Train => spec.num_train,
        Split::Validation => spec.num_val,
    };
    let records = (0..count)
        .into_par_iter()
        .map(|i| record(spec, &params, &featurizer, split, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        modality: spec.modality,
        shape: featurizer.shape(),
        label_arity: spec.label_arity()?,
        provenance: format!("split={}\n{}", split.name(), spec.to_manifest()),
        records,
    })
}

/// Training and validation splits.
pub fn generate(spec: &DatasetSpec) -> Result<(Dataset, Dataset)> {
    Ok((generate_split(spec, Split::Train)?, generate_split(spec, Split::Validation)?))
}

/// Balanced noise-only / interference corpus on FFT features.
pub fn generate_interference_labels(spec: &DatasetSpec) -> Result<(Dataset, Dataset)> {
    let spec = DatasetSpec {
        task: Task::Interference,
        modality: Modality::Fft,
        ..spec.clone()
    };
    generate(&spec)
}

/// File names used for a generated corpus rooted at `out`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub train: PathBuf,
    pub val: PathBuf,
    pub manifest: PathBuf,
}

impl CorpusPaths {
    pub fn new(out: impl AsRef<Path>) -> Self {
        let out = out.as_ref();
        let with_suffix = |suffix: &str| {
            let mut s = out.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        Self {
            train: out.to_path_buf(),
            val: with_suffix(".val"),
            manifest: with_suffix(".manifest"),
        }
    }
}

/// Generates both splits and writes them next to a sidecar manifest.
pub fn generate_to(spec: &DatasetSpec, out: impl AsRef<Path>) -> Result<CorpusPaths> {
    let paths = CorpusPaths::new(out);
    let (train, val) = generate(spec)?;
    train.save(&paths.train)?;
    val.save(&paths.val)?;
    fs::write(&paths.manifest, spec.to_manifest())?;
    Ok(paths)
}
