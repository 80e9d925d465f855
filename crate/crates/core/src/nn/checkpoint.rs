use std::path::Path;

use super::layer::{Conv2d, Dense, Layer};
use super::network::Network;
use super::tensor::Shape;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DTEXNET\0";
const VERSION: u32 = 1;

const TAG_CONV: u8 = 0;
const TAG_RELU: u8 = 1;
const TAG_POOL: u8 = 2;
const TAG_DENSE: u8 = 3;

/// Little-endian binary encoder shared by the on-disk formats.
#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn len_u32(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length fits in u32"));
    }

    pub fn str(&mut self, s: &str) {
        self.len_u32(s.len());
        self.bytes(s.as_bytes());
    }

    pub fn f32s(&mut self, v: &[f32]) {
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Parse("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn expect(&mut self, magic: &[u8]) -> Result<()> {
        if self.take(magic.len())? != magic {
            return Err(Error::Parse("bad magic bytes".into()));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Parse("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Parse(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn write_layer(w: &mut ByteWriter, layer: &Layer<f32>) {
    match layer {
        Layer::Conv(c) => {
            w.u8(TAG_CONV);
            for d in [c.in_channels, c.out_channels, c.kernel_h, c.kernel_w] {
                w.len_u32(d);
            }
            w.f32s(&c.weight);
            w.f32s(&c.bias);
        }
        Layer::Relu => w.u8(TAG_RELU),
        Layer::MaxPool => w.u8(TAG_POOL),
        Layer::Dense(d) => {
            w.u8(TAG_DENSE);
            w.len_u32(d.inputs);
            w.len_u32(d.outputs);
            w.f32s(&d.weight);
            w.f32s(&d.bias);
        }
    }
}

fn read_layer(r: &mut ByteReader<'_>) -> Result<Layer<f32>> {
    Ok(match r.u8()? {
        TAG_CONV => {
            let (i, o, kh, kw) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
            let weight = r.f32s(o * i * kh * kw)?;
            let bias = r.f32s(o)?;
            Layer::Conv(Conv2d {
                in_channels: i,
                out_channels: o,
                kernel_h: kh,
                kernel_w: kw,
                weight,
                bias,
            })
        }
        TAG_RELU => Layer::Relu,
        TAG_POOL => Layer::MaxPool,
        TAG_DENSE => {
            let (i, o) = (r.usize()?, r.usize()?);
            let weight = r.f32s(i * o)?;
            let bias = r.f32s(o)?;
            Layer::Dense(Dense {
                inputs: i,
                outputs: o,
                weight,
                bias,
            })
        }
        t => return Err(Error::Parse(format!("unknown layer tag {t}"))),
    })
}

/// Serializes a network: magic, version, total layer count, architecture
/// tag, seed, input shapes, then per-branch and head layer records with
/// little-endian f32 parameters.
pub fn network_to_bytes(net: &Network<f32>) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.len_u32(net.layers().count());
    w.str(net.arch());
    w.u64(net.seed());
    w.len_u32(net.input_shapes().len());
    for s in net.input_shapes() {
        w.len_u32(s.channels);
        w.len_u32(s.height);
        w.len_u32(s.width);
    }
    for branch in net.branches() {
        w.len_u32(branch.len());
        branch.iter().for_each(|l| write_layer(&mut w, l));
    }
    w.len_u32(net.head().len());
    net.head().iter().for_each(|l| write_layer(&mut w, l));
    w.finish()
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<Network<f32>> {
    let mut r = ByteReader::new(bytes);
    r.expect(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }
    let total = r.usize()?;
    let arch = r.str()?;
    let seed = r.u64()?;
    let n_inputs = r.usize()?;
    let mut inputs = Vec::with_capacity(n_inputs.min(16));
    for _ in 0..n_inputs {
        inputs.push(Shape::new(r.usize()?, r.usize()?, r.usize()?));
    }
    let mut branches = Vec::with_capacity(n_inputs.min(16));
    for _ in 0..n_inputs {
        let n = r.usize()?;
        branches.push((0..n).map(|_| read_layer(&mut r)).collect::<Result<Vec<_>>>()?);
    }
    let n = r.usize()?;
    let head = (0..n).map(|_| read_layer(&mut r)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let net = Network::new(arch, seed, inputs, branches, head)?;
    if net.layers().count() != total {
        return Err(Error::Parse(format!(
            "header declares {total} layers, found {}",
            net.layers().count()
        )));
    }
    Ok(net)
}

pub fn save_network(net: &Network<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, network_to_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<Network<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    network_from_bytes(&bytes)
}
