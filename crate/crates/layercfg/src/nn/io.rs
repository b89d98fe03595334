//! Flat binary weight files.
//!
//! Layout, all integers little-endian:
//!   magic "FMDL" | version u32 (=1) | adam lr f64
//!   input ndim u32 | input dims u32...
//!   layer count u32
//!   per layer: tag u8
//!     0 = dense: in u32, out u32, activation u8 (0 relu, 1 identity, 2 softmax)
//!     1 = conv:  in_ch u32, out_ch u32, kh u32, kw u32, stride u32, padding u32
//!     2 = pool:  wh u32, ww u32
//!   then every parameter tensor as f64 values in declaration order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, Network};

pub const MAGIC: &[u8; 4] = b"FMDL";
pub const VERSION: u32 = 1;

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&net.adam().lr.to_le_bytes())?;
    write_dims(&mut w, net.input_shape())?;
    w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for layer in net.layers() {
        match layer.spec() {
            LayerSpec::Dense {
                in_dim,
                out_dim,
                activation,
            } => {
                w.write_all(&[0u8])?;
                w.write_all(&(in_dim as u32).to_le_bytes())?;
                w.write_all(&(out_dim as u32).to_le_bytes())?;
                w.write_all(&[activation_tag(activation)])?;
            }
            LayerSpec::Conv2D {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => {
                w.write_all(&[1u8])?;
                for v in [in_ch, out_ch, kernel.0, kernel.1, stride, padding] {
                    w.write_all(&(v as u32).to_le_bytes())?;
                }
            }
            LayerSpec::MaxPool2D { window } => {
                w.write_all(&[2u8])?;
                w.write_all(&(window.0 as u32).to_le_bytes())?;
                w.write_all(&(window.1 as u32).to_le_bytes())?;
            }
        }
    }
    for v in net.params_flat() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::CorruptWeights("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::CorruptWeights("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::CorruptWeights(format!(
            "unsupported version {version}"
        )));
    }
    let lr = read_f64(&mut r)?;
    let input_shape = read_dims(&mut r)?;
    let n_layers = read_u32(&mut r)? as usize;
    let mut specs = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)
            .map_err(|_| Error::CorruptWeights("truncated layer table".into()))?;
        let spec = match tag[0] {
            0 => {
                let in_dim = read_u32(&mut r)? as usize;
                let out_dim = read_u32(&mut r)? as usize;
                let mut act = [0u8; 1];
                r.read_exact(&mut act)
                    .map_err(|_| Error::CorruptWeights("truncated layer table".into()))?;
                LayerSpec::Dense {
                    in_dim,
                    out_dim,
                    activation: activation_from_tag(act[0])?,
                }
            }
            1 => {
                let mut v = [0usize; 6];
                for slot in &mut v {
                    *slot = read_u32(&mut r)? as usize;
                }
                LayerSpec::Conv2D {
                    in_ch: v[0],
                    out_ch: v[1],
                    kernel: (v[2], v[3]),
                    stride: v[4],
                    padding: v[5],
                }
            }
            2 => {
                let wh = read_u32(&mut r)? as usize;
                let ww = read_u32(&mut r)? as usize;
                LayerSpec::MaxPool2D { window: (wh, ww) }
            }
            t => return Err(Error::CorruptWeights(format!("unknown layer tag {t}"))),
        };
        specs.push(spec);
    }
    let mut net = Network::new(&input_shape, &specs, lr, 0)?;
    let mut params = vec![0.0; net.param_count()];
    for p in &mut params {
        *p = read_f64(&mut r)?;
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::CorruptWeights("trailing bytes".into()));
    }
    net.set_params_flat(&params)?;
    Ok(net)
}

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Identity => 1,
        Activation::Softmax => 2,
    }
}

fn activation_from_tag(t: u8) -> Result<Activation> {
    match t {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Identity),
        2 => Ok(Activation::Softmax),
        _ => Err(Error::CorruptWeights(format!("unknown activation tag {t}"))),
    }
}

fn write_dims<W: Write>(w: &mut W, dims: &[usize]) -> Result<()> {
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    Ok(())
}

fn read_dims<R: Read>(r: &mut R) -> Result<Vec<usize>> {
    let n = read_u32(r)? as usize;
    if n > 8 {
        return Err(Error::CorruptWeights(format!("implausible ndim {n}")));
    }
    (0..n).map(|_| Ok(read_u32(r)? as usize)).collect()
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::CorruptWeights("unexpected end of file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::CorruptWeights("unexpected end of file".into()))?;
    Ok(f64::from_le_bytes(buf))
}
