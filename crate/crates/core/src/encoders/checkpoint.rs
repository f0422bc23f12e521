//! XMDL checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! magic      "XMDL"
//! version    u16
//! precision  u8            0 = f32, 1 = f64
//! 2 × tower  u32 count, count × u32 dims (input, hidden.., output), f64 dropout rate
//! tensors    declaration order; u32 rank, rank × u32 dims, values
//! ```

use std::fs;
use std::path::Path;

use crate::encoders::{Tower, TowerSpec, TwoTowerModel};
use crate::error::{Error, Result};
use crate::nn::{DenseLayer, Matrix};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"XMDL";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    fn tag(self) -> u8 {
        match self {
            Precision::F32 => 0,
            Precision::F64 => 1,
        }
    }
}

pub fn checkpoint_write(model: &TwoTowerModel, precision: Precision) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(precision.tag());
    for tower in [model.audio_tower(), model.visual_tower()] {
        let dims = tower.spec().dims();
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&tower.spec().dropout_rate.to_le_bytes());
    }
    for tower in [model.audio_tower(), model.visual_tower()] {
        for layer in tower.layers() {
            let w = layer.weights();
            write_tensor(&mut out, &[w.rows(), w.cols()], w.data(), precision);
            let b = layer.bias();
            write_tensor(&mut out, &[b.cols()], b.data(), precision);
        }
    }
    out
}

fn write_tensor(out: &mut Vec<u8>, dims: &[usize], values: &[f64], precision: Precision) {
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match precision {
        Precision::F64 => values
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        Precision::F32 => values
            .iter()
            .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
}

pub fn checkpoint_save(
    model: &TwoTowerModel,
    path: impl AsRef<Path>,
    precision: Precision,
) -> Result<()> {
    fs::write(path, checkpoint_write(model, precision))?;
    Ok(())
}

pub fn checkpoint_load(path: impl AsRef<Path>) -> Result<(TwoTowerModel, Precision)> {
    checkpoint_read(&fs::read(path)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.buf.len() as u64,
                message: format!(
                    "truncated while reading {what}: need {n} bytes at offset {}",
                    self.pos
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn err(&self, message: String) -> Error {
        Error::Format {
            offset: self.pos as u64,
            message,
        }
    }
}

fn read_spec(r: &mut Reader<'_>, name: &str) -> Result<TowerSpec> {
    let count = r.u32(&format!("{name} spec"))? as usize;
    if !(3..=64).contains(&count) {
        return Err(r.err(format!("{name} spec has implausible layer count {count}")));
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        dims.push(r.u32(&format!("{name} spec"))? as usize);
    }
    let dropout_rate = r.f64(&format!("{name} dropout rate"))?;
    let spec = TowerSpec {
        input_dim: dims[0],
        hidden_dims: dims[1..count - 1].to_vec(),
        output_dim: dims[count - 1],
        dropout_rate,
    };
    spec.validate().map_err(|e| r.err(format!("{name} spec invalid: {e}")))?;
    Ok(spec)
}

fn read_tensor(
    r: &mut Reader<'_>,
    name: &str,
    expect: &[usize],
    precision: Precision,
) -> Result<Vec<f64>> {
    let rank = r.u32(&format!("tensor {name}"))? as usize;
    if rank != expect.len() {
        return Err(r.err(format!("tensor {name}: rank {rank}, expected {}", expect.len())));
    }
    for &e in expect {
        let d = r.u32(&format!("tensor {name}"))? as usize;
        if d != e {
            return Err(r.err(format!("tensor {name}: dim {d}, expected {e}")));
        }
    }
    let n: usize = expect.iter().product();
    let width = match precision {
        Precision::F32 => 4,
        Precision::F64 => 8,
    };
    let bytes = r.take(n * width, &format!("tensor {name}"))?;
    let values: Vec<f64> = match precision {
        Precision::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Precision::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(r.err(format!("tensor {name} contains non-finite values")));
    }
    Ok(values)
}

/// Parse a checkpoint image. Errors carry the byte offset where parsing stopped.
pub fn checkpoint_read(buf: &[u8]) -> Result<(TwoTowerModel, Precision)> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected \"XMDL\""),
        });
    }
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let precision = match r.u8("precision tag")? {
        0 => Precision::F32,
        1 => Precision::F64,
        t => return Err(r.err(format!("unknown precision tag {t}"))),
    };
    let specs = [read_spec(&mut r, "audio")?, read_spec(&mut r, "visual")?];
    let mut towers = Vec::with_capacity(2);
    for (spec, name) in specs.into_iter().zip(["audio", "visual"]) {
        let dims = spec.dims();
        let last = dims.len() - 2;
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, w) in dims.windows(2).enumerate() {
            let wv = read_tensor(
                &mut r,
                &format!("{name}.layer{i}.weights"),
                &[w[0], w[1]],
                precision,
            )?;
            let bv = read_tensor(&mut r, &format!("{name}.layer{i}.bias"), &[w[1]], precision)?;
            let act = if i == last {
                crate::nn::Activation::Identity
            } else {
                crate::nn::Activation::Relu
            };
            layers.push(DenseLayer::new(
                Matrix::from_vec(w[0], w[1], wv)?,
                Matrix::from_vec(1, w[1], bv)?,
                act,
            )?);
        }
        towers.push(Tower::from_layers(spec, layers)?);
    }
    if r.pos != buf.len() {
        return Err(r.err(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    let visual = towers.pop().unwrap();
    let audio = towers.pop().unwrap();
    let model =
        TwoTowerModel::from_towers(audio, visual).map_err(|e| r.err(format!("towers: {e}")))?;
    Ok((model, precision))
}
