//! Binary checkpoint layout, all integers `u32` and floats `f64`, little-endian:
//!
//! ```text
//! magic  b"DXCK"
//! version
//! n_nets
//!   name_len, name bytes (utf-8)
//!   output activation (0 = tanh, 1 = identity)
//!   n_sizes, sizes..
//!   per layer: weights (in x out, row-major), biases (out)
//! n_normalizers
//!   name_len, name bytes
//!   dim, clip, std_floor, count, mean[dim], m2[dim]
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{Layer, Mlp, NnError, Normalizer, OutputActivation};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DXCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named networks and normalizers saved together.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub nets: Vec<(String, Mlp)>,
    pub normalizers: Vec<(String, Normalizer)>,
}

impl Checkpoint {
    pub fn net(&self, name: &str) -> Option<&Mlp> {
        self.nets.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn normalizer(&self, name: &str) -> Option<&Normalizer> {
        self.normalizers.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_name<W: Write>(w: &mut W, name: &str) -> std::io::Result<()> {
    put_u32(w, name.len() as u32)?;
    w.write_all(name.as_bytes())
}

pub fn save_checkpoint<W: Write>(ck: &Checkpoint, mut w: W) -> Result<(), NnError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(&mut w, CHECKPOINT_VERSION)?;
    put_u32(&mut w, ck.nets.len() as u32)?;
    for (name, net) in &ck.nets {
        put_name(&mut w, name)?;
        w.write_all(&[match net.output {
            OutputActivation::Tanh => 0,
            OutputActivation::Identity => 1,
        }])?;
        put_u32(&mut w, net.sizes.len() as u32)?;
        for s in &net.sizes {
            put_u32(&mut w, *s as u32)?;
        }
        for layer in &net.layers {
            for v in layer.w.iter() {
                put_f64(&mut w, *v)?;
            }
            for v in layer.b.iter() {
                put_f64(&mut w, *v)?;
            }
        }
    }
    put_u32(&mut w, ck.normalizers.len() as u32)?;
    for (name, n) in &ck.normalizers {
        put_name(&mut w, name)?;
        put_u32(&mut w, n.dim() as u32)?;
        for v in [n.clip, n.std_floor, n.count].into_iter().chain(n.mean.iter().copied()).chain(n.m2.iter().copied()) {
            put_f64(&mut w, v)?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, NnError> {
        let mut buf = vec![0; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| NnError::Checkpoint("unexpected end of data".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn len(&mut self, limit: u32, what: &str) -> Result<usize, NnError> {
        let n = self.u32()?;
        if n > limit {
            return Err(NnError::Checkpoint(format!("implausible {what} {n}")));
        }
        Ok(n as usize)
    }

    fn name(&mut self) -> Result<String, NnError> {
        let n = self.len(1 << 16, "name length")?;
        String::from_utf8(self.bytes(n)?).map_err(|_| NnError::Checkpoint("name is not utf-8".into()))
    }
}

pub fn load_checkpoint<R: Read>(input: R) -> Result<Checkpoint, NnError> {
    let mut r = Reader { inner: input };
    if r.bytes(4)? != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut ck = Checkpoint::default();
    for _ in 0..r.len(1 << 10, "network count")? {
        let name = r.name()?;
        let output = match r.bytes(1)?[0] {
            0 => OutputActivation::Tanh,
            1 => OutputActivation::Identity,
            other => return Err(NnError::Checkpoint(format!("unknown activation {other}"))),
        };
        let n_sizes = r.len(1 << 10, "layer count")?;
        let sizes = (0..n_sizes).map(|_| r.len(1 << 20, "layer width")).collect::<Result<Vec<_>, _>>()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::Checkpoint("invalid layer sizes".into()));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let w = (0..pair[0] * pair[1]).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            let b = (0..pair[1]).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            layers.push(Layer {
                w: Array2::from_shape_vec((pair[0], pair[1]), w).unwrap(),
                b: Array1::from_vec(b),
            });
        }
        ck.nets.push((name, Mlp { sizes, layers, output }));
    }
    for _ in 0..r.len(1 << 10, "normalizer count")? {
        let name = r.name()?;
        let dim = r.len(1 << 20, "normalizer width")?;
        let (clip, std_floor, count) = (r.f64()?, r.f64()?, r.f64()?);
        let mean = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let m2 = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        ck.normalizers.push((
            name,
            Normalizer {
                count,
                mean,
                m2,
                clip,
                std_floor,
            },
        ));
    }
    Ok(ck)
}
