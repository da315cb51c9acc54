//! Versioned binary container for networks and optimizer state.
//!
//! All integers and floats are little-endian; every real is stored as an
//! IEEE-754 `f64`, so `f64` values round-trip bit-exactly and `f32`
//! values round-trip exactly through widening.
//!
//! ```text
//! file     := magic "NEARCKPT" (8 bytes) | version u32 (= 1)
//!             | section_count u32 | section*
//! section  := tag [u8; 4] | payload_len u64 | payload
//!
//! network  := layer_count u32 | layer*
//! layer    := in u32 | out u32 | activation u8
//!             | weights f64[out*in] (row-major) | bias f64[out]
//!             (activation: 0 identity, 1 relu, 2 elu, 3 tanh, 4 sigmoid)
//! adam     := lr f64 | beta1 f64 | beta2 f64 | eps f64 | step u64
//!             | n u64 | first f64[n] | second f64[n]
//! ema      := decay f64 | n u64 | shadow f64[n]
//! vector   := n u64 | f64[n]
//! flags    := u32
//! ```
//!
//! Section tags are chosen by the owner of the file (for example `NET `
//! for an energy network and `PNET`/`VNET` for policy and value nets).
//! Sections are written in insertion order; readers look tags up by name.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::{Activation, AdamConfig, AdamState, Dense, DenseNetwork, EmaState};
use crate::error::{Error, Result};
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"NEARCKPT";
pub const VERSION: u32 = 1;

pub type Tag = [u8; 4];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    sections: Vec<(Tag, Vec<u8>)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn tags(&self) -> impl Iterator<Item = &Tag> {
        self.sections.iter().map(|(t, _)| t)
    }

    fn put(&mut self, tag: Tag, payload: Vec<u8>) {
        if let Some(slot) = self.sections.iter_mut().find(|(t, _)| *t == tag) {
            slot.1 = payload;
        } else {
            self.sections.push((tag, payload));
        }
    }

    fn get(&self, tag: Tag) -> Result<Cursor<&[u8]>> {
        self.sections
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, p)| Cursor::new(p.as_slice()))
            .ok_or_else(|| Error::Format(format!("missing section {}", String::from_utf8_lossy(&tag))))
    }

    pub fn has(&self, tag: Tag) -> bool {
        self.sections.iter().any(|(t, _)| *t == tag)
    }

    pub fn put_network<T: Scalar>(&mut self, tag: Tag, net: &DenseNetwork<T>) {
        let mut buf = Vec::new();
        buf.write_u32::<LE>(net.layers().len() as u32).unwrap();
        for l in net.layers() {
            buf.write_u32::<LE>(l.in_dim() as u32).unwrap();
            buf.write_u32::<LE>(l.out_dim() as u32).unwrap();
            buf.write_u8(l.activation.code()).unwrap();
            for &w in l.weights.iter() {
                buf.write_f64::<LE>(w.f64()).unwrap();
            }
            for &b in l.bias.iter() {
                buf.write_f64::<LE>(b.f64()).unwrap();
            }
        }
        self.put(tag, buf);
    }

    pub fn network<T: Scalar>(&self, tag: Tag) -> Result<DenseNetwork<T>> {
        let mut r = self.get(tag)?;
        let n = r.read_u32::<LE>()? as usize;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let input = r.read_u32::<LE>()? as usize;
            let out = r.read_u32::<LE>()? as usize;
            let code = r.read_u8()?;
            let act = Activation::from_code(code)
                .ok_or_else(|| Error::Format(format!("unknown activation code {code}")))?;
            let weights = read_reals::<T>(&mut r, out * input)?;
            let bias = read_reals::<T>(&mut r, out)?;
            let weights = Array2::from_shape_vec((out, input), weights).expect("sized");
            layers.push(Dense::new(weights, Array1::from(bias), act)?);
        }
        expect_end(&r, tag)?;
        DenseNetwork::new(layers)
    }

    pub fn put_adam<T: Scalar>(&mut self, tag: Tag, st: &AdamState<T>) {
        let mut buf = Vec::new();
        let c = st.config;
        for v in [c.lr, c.beta1, c.beta2, c.eps] {
            buf.write_f64::<LE>(v).unwrap();
        }
        buf.write_u64::<LE>(st.step).unwrap();
        buf.write_u64::<LE>(st.len() as u64).unwrap();
        for &v in st.first_moment.iter().chain(&st.second_moment) {
            buf.write_f64::<LE>(v.f64()).unwrap();
        }
        self.put(tag, buf);
    }

    pub fn adam<T: Scalar>(&self, tag: Tag) -> Result<AdamState<T>> {
        let mut r = self.get(tag)?;
        let config = AdamConfig {
            lr: r.read_f64::<LE>()?,
            beta1: r.read_f64::<LE>()?,
            beta2: r.read_f64::<LE>()?,
            eps: r.read_f64::<LE>()?,
        };
        let step = r.read_u64::<LE>()?;
        let n = r.read_u64::<LE>()? as usize;
        let first_moment = read_reals(&mut r, n)?;
        let second_moment = read_reals(&mut r, n)?;
        expect_end(&r, tag)?;
        Ok(AdamState {
            first_moment,
            second_moment,
            step,
            config,
        })
    }

    pub fn put_ema<T: Scalar>(&mut self, tag: Tag, ema: &EmaState<T>) {
        let mut buf = Vec::new();
        buf.write_f64::<LE>(ema.decay).unwrap();
        write_vec(&mut buf, &ema.shadow);
        self.put(tag, buf);
    }

    pub fn ema<T: Scalar>(&self, tag: Tag) -> Result<EmaState<T>> {
        let mut r = self.get(tag)?;
        let decay = r.read_f64::<LE>()?;
        let n = r.read_u64::<LE>()? as usize;
        let shadow = read_reals(&mut r, n)?;
        expect_end(&r, tag)?;
        EmaState::new(shadow, decay)
    }

    pub fn put_vector<T: Scalar>(&mut self, tag: Tag, values: &[T]) {
        let mut buf = Vec::new();
        write_vec(&mut buf, values);
        self.put(tag, buf);
    }

    pub fn vector<T: Scalar>(&self, tag: Tag) -> Result<Vec<T>> {
        let mut r = self.get(tag)?;
        let n = r.read_u64::<LE>()? as usize;
        let v = read_reals(&mut r, n)?;
        expect_end(&r, tag)?;
        Ok(v)
    }

    pub fn put_flags(&mut self, tag: Tag, flags: u32) {
        let mut buf = Vec::new();
        buf.write_u32::<LE>(flags).unwrap();
        self.put(tag, buf);
    }

    pub fn flags(&self, tag: Tag) -> Result<u32> {
        let mut r = self.get(tag)?;
        let f = r.read_u32::<LE>()?;
        expect_end(&r, tag)?;
        Ok(f)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LE>(VERSION).unwrap();
        out.write_u32::<LE>(self.sections.len() as u32).unwrap();
        for (tag, payload) in &self.sections {
            out.extend_from_slice(tag);
            out.write_u64::<LE>(payload.len() as u64).unwrap();
            out.extend_from_slice(payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.read_u32::<LE>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = r.read_u32::<LE>()?;
        let mut sections = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut tag = [0u8; 4];
            r.read_exact(&mut tag)?;
            let len = r.read_u64::<LE>()? as usize;
            let start = r.position() as usize;
            let end = start
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::Format("section overruns file".into()))?;
            sections.push((tag, bytes[start..end].to_vec()));
            r.set_position(end as u64);
        }
        if r.position() as usize != bytes.len() {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(Checkpoint { sections })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::from_bytes(&fs::read(path)?)
    }
}

fn write_vec<T: Scalar>(buf: &mut Vec<u8>, values: &[T]) {
    buf.write_u64::<LE>(values.len() as u64).unwrap();
    for &v in values {
        buf.write_f64::<LE>(v.f64()).unwrap();
    }
}

fn read_reals<T: Scalar>(r: &mut Cursor<&[u8]>, n: usize) -> Result<Vec<T>> {
    let remaining = r.get_ref().len() - r.position() as usize;
    if n.checked_mul(8).is_none_or(|b| b > remaining) {
        return Err(Error::Format("payload shorter than declared length".into()));
    }
    (0..n).map(|_| Ok(T::of(r.read_f64::<LE>()?))).collect()
}

fn expect_end(r: &Cursor<&[u8]>, tag: Tag) -> Result<()> {
    if r.position() as usize != r.get_ref().len() {
        return Err(Error::Format(format!(
            "section {} has trailing bytes",
            String::from_utf8_lossy(&tag)
        )));
    }
    Ok(())
}
