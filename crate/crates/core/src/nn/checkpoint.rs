//! Versioned model checkpoint.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "HNCK"
//! version      u32      1
//! tag          u8       caller-defined (the model layer stores the modality)
//! input shape  3 × u32  h, w, c
//! layer count  u32
//! per layer    u8 kind, then
//!                conv    u32 filters, u32 kh, u32 kw
//!                maxpool u32 ph, u32 pw
//!                dropout f32 rate
//!                dense   u32 units
//!                (batchnorm / relu / softmax have no fields)
//! parameters   per layer in declaration order, f32:
//!                conv    weights (kh·kw·c·f, layout kh,kw,c,f) then bias (f)
//!                bn      gamma (c) then beta (c)
//!                dense   weights (d·u, layout d,u) then bias (u)
//! running      per batch-norm layer: u8 present, then mean (c), var (c) if present
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::layers::BatchNorm;
use super::network::{Layer, Network};
use super::spec::{LayerSpec, NetworkSpec, Shape3};
use super::tensor::Tensor;
use crate::binio::{put_f32, put_f32s, put_u32, put_u8, to_u32, ByteReader};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"HNCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const KIND_CONV: u8 = 1;
const KIND_BN: u8 = 2;
const KIND_RELU: u8 = 3;
const KIND_POOL: u8 = 4;
const KIND_DROPOUT: u8 = 5;
const KIND_DENSE: u8 = 6;
const KIND_SOFTMAX: u8 = 7;

pub fn write_checkpoint(w: &mut impl Write, net: &Network<f32>, tag: u8) -> Result<()> {
    let spec = net.spec();
    w.write_all(&CHECKPOINT_MAGIC)?;
    put_u32(w, CHECKPOINT_VERSION)?;
    put_u8(w, tag)?;
    for d in spec.input_shape.dims() {
        put_u32(w, to_u32(d, "input dimension")?)?;
    }
    put_u32(w, to_u32(spec.layers.len(), "layer count")?)?;
    for l in &spec.layers {
        match *l {
            LayerSpec::Conv { filters, kh, kw } => {
                put_u8(w, KIND_CONV)?;
                for v in [filters, kh, kw] {
                    put_u32(w, to_u32(v, "conv parameter")?)?;
                }
            }
            LayerSpec::BatchNorm => put_u8(w, KIND_BN)?,
            LayerSpec::Relu => put_u8(w, KIND_RELU)?,
            LayerSpec::MaxPool { ph, pw } => {
                put_u8(w, KIND_POOL)?;
                put_u32(w, to_u32(ph, "pool height")?)?;
                put_u32(w, to_u32(pw, "pool width")?)?;
            }
            LayerSpec::Dropout { rate } => {
                put_u8(w, KIND_DROPOUT)?;
                put_f32(w, rate)?;
            }
            LayerSpec::Dense { units } => {
                put_u8(w, KIND_DENSE)?;
                put_u32(w, to_u32(units, "dense units")?)?;
            }
            LayerSpec::Softmax => put_u8(w, KIND_SOFTMAX)?,
        }
    }
    for layer in net.layers() {
        match layer {
            Layer::Conv { weights, bias } | Layer::Dense { weights, bias } => {
                put_f32s(w, weights.data())?;
                put_f32s(w, bias)?;
            }
            Layer::BatchNorm(bn) => {
                put_f32s(w, &bn.gamma)?;
                put_f32s(w, &bn.beta)?;
            }
            _ => {}
        }
    }
    for layer in net.layers() {
        if let Layer::BatchNorm(bn) = layer {
            match &bn.running {
                Some((mean, var)) => {
                    put_u8(w, 1)?;
                    put_f32s(w, mean)?;
                    put_f32s(w, var)?;
                }
                None => put_u8(w, 0)?,
            }
        }
    }
    Ok(())
}

fn dim(r: &mut ByteReader<impl Read>, what: &str) -> Result<usize> {
    let at = r.offset();
    let v = r.u32(what)? as usize;
    if v == 0 || v > 1 << 24 {
        return Err(Error::format(at, format!("implausible {what} {v}")));
    }
    Ok(v)
}

/// Reads a checkpoint, returning the network and its tag byte.
pub fn read_checkpoint(r: impl Read) -> Result<(Network<f32>, u8)> {
    let mut r = ByteReader::new(r);
    let mut magic = [0u8; 4];
    r.bytes(&mut magic, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::format(0, format!("bad checkpoint magic {magic:?}")));
    }
    let at = r.offset();
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(at, format!("unsupported checkpoint version {version}")));
    }
    let tag = r.u8("tag")?;
    let input_shape = Shape3::new(dim(&mut r, "input height")?, dim(&mut r, "input width")?, dim(&mut r, "input channels")?);
    let at = r.offset();
    let count = r.u32("layer count")? as usize;
    if count > 4096 {
        return Err(Error::format(at, format!("implausible layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.offset();
        let spec = match r.u8("layer kind")? {
            KIND_CONV => LayerSpec::Conv {
                filters: dim(&mut r, "filter count")?,
                kh: dim(&mut r, "kernel height")?,
                kw: dim(&mut r, "kernel width")?,
            },
            KIND_BN => LayerSpec::BatchNorm,
            KIND_RELU => LayerSpec::Relu,
            KIND_POOL => LayerSpec::MaxPool {
                ph: dim(&mut r, "pool height")?,
                pw: dim(&mut r, "pool width")?,
            },
            KIND_DROPOUT => LayerSpec::Dropout { rate: r.f32("dropout rate")? },
            KIND_DENSE => LayerSpec::Dense { units: dim(&mut r, "dense units")? },
            KIND_SOFTMAX => LayerSpec::Softmax,
            k => return Err(Error::format(at, format!("unknown layer kind {k}"))),
        };
        layers.push(spec);
    }
    let at = r.offset();
    let spec = NetworkSpec::new(input_shape, layers).map_err(|e| Error::format(at, e.to_string()))?;
    let shapes = spec.infer_shapes()?;
    let mut built = Vec::with_capacity(count);
    for (l, x) in spec.layers.iter().zip(&shapes) {
        built.push(match *l {
            LayerSpec::Conv { filters, kh, kw } => {
                let wlen = kh * kw * x.c * filters;
                let weights = Tensor::new(vec![kh, kw, x.c, filters], r.f32s(wlen, "conv weights")?)?;
                Layer::Conv { weights, bias: r.f32s(filters, "conv bias")? }
            }
            LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm {
                gamma: r.f32s(x.c, "batch norm scale")?,
                beta: r.f32s(x.c, "batch norm shift")?,
                running: None,
            }),
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::MaxPool { ph, pw } => Layer::MaxPool { ph, pw },
            LayerSpec::Dropout { rate } => Layer::Dropout { rate },
            LayerSpec::Dense { units } => {
                let d = x.len();
                let weights = Tensor::new(vec![d, units], r.f32s(d * units, "dense weights")?)?;
                Layer::Dense { weights, bias: r.f32s(units, "dense bias")? }
            }
            LayerSpec::Softmax => Layer::Softmax,
        });
    }
    for layer in built.iter_mut() {
        if let Layer::BatchNorm(bn) = layer {
            let at = r.offset();
            match r.u8("running statistics flag")? {
                0 => {}
                1 => {
                    let c = bn.channels();
                    let mean = r.f32s(c, "running mean")?;
                    let var = r.f32s(c, "running variance")?;
                    bn.running = Some((mean, var));
                }
                f => return Err(Error::format(at, format!("bad running statistics flag {f}"))),
            }
        }
    }
    r.expect_end()?;
    Ok((Network::from_layers(spec, built)?, tag))
}

pub fn save_checkpoint(path: impl AsRef<Path>, net: &Network<f32>, tag: u8) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, net, tag)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network<f32>, u8)> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small_spec() -> NetworkSpec {
        NetworkSpec::new(
            Shape3::new(6, 1, 2),
            vec![
                LayerSpec::Conv { filters: 3, kh: 3, kw: 1 },
                LayerSpec::BatchNorm,
                LayerSpec::Relu,
                LayerSpec::MaxPool { ph: 2, pw: 1 },
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Dense { units: 4 },
                LayerSpec::Softmax,
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut net = Network::<f32>::init(&small_spec(), &mut rng::seeded(3)).unwrap();
        if let Layer::BatchNorm(bn) = &mut net.layers_mut()[1] {
            bn.running = Some((vec![0.1, -0.2, 0.3], vec![1.5, 0.25, 2.0]));
            bn.gamma[1] = f32::from_bits(0x3f80_0001);
        }
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net, 7).unwrap();
        let (back, tag) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(tag, 7);
        assert_eq!(back, net);
        let mut again = Vec::new();
        write_checkpoint(&mut again, &back, 7).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn rejects_corruption_with_offsets() {
        let net = Network::<f32>::init(&small_spec(), &mut rng::seeded(3)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net, 0).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(Error::Format { offset: 0, .. })));

        let cut = &buf[..buf.len() - 3];
        match read_checkpoint(cut) {
            Err(Error::Format { offset, .. }) => assert!(offset > 20),
            other => panic!("expected format error, got {other:?}"),
        }

        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint(extra.as_slice()).is_err());
    }
}
