use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Tensor;

/// How a parameter's initial values were drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform on ±√(6 / fan_in).
    HeUniform { fan_in: usize, seed: u64 },
    Zeros,
    /// Explicit values supplied by the caller.
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    /// Accumulated gradient, same length as `value`.
    pub grad: Vec<f64>,
    pub init: Init,
}

/// Every learnable tensor of one model, in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

/// Derives a per-parameter seed from a model seed and registration index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 step
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn he_uniform(shape: Vec<usize>, fan_in: usize, seed: u64) -> Tensor {
    let limit = (6.0 / fan_in.max(1) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::new(shape, data).expect("shape and data agree")
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: String, value: Tensor, init: Init) -> Result<ParamId> {
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        let grad = vec![0.0; value.len()];
        self.params.push(Parameter { name, value, grad, init });
        Ok(ParamId(self.params.len() - 1))
    }

    /// He-uniform weights; the draw depends only on `seed` and the
    /// registration index.
    pub fn add_he_uniform(&mut self, name: &str, shape: Vec<usize>, fan_in: usize, seed: u64) -> Result<ParamId> {
        let s = derive_seed(seed, self.params.len() as u64);
        self.push(name.to_string(), he_uniform(shape, fan_in, s), Init::HeUniform { fan_in, seed: s })
    }

    pub fn add_zeros(&mut self, name: &str, shape: Vec<usize>) -> Result<ParamId> {
        self.push(name.to_string(), Tensor::zeros(shape), Init::Zeros)
    }

    pub fn add_tensor(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        self.push(name.to_string(), value, Init::Given)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Total number of learnable scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Copies of all parameter values, for best-epoch restoration.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor]) {
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            p.value = v.clone();
        }
    }

    /// Writes a versioned named-tensor archive.
    ///
    /// ```text
    /// magic "CFANCKPT", version u32 = 1, count u32,
    /// per tensor: name (u16 length + UTF-8), rank u32, dims u64 × rank,
    ///             values f64 × Π dims
    /// ```
    /// All integers and floats are little-endian.
    pub fn save_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            let name = p.name.as_bytes();
            buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
            buf.extend_from_slice(name);
            buf.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
            for &d in p.value.shape() {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in p.value.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads an archive and copies its tensors into same-named parameters.
    /// Names and shapes must match exactly.
    pub fn load_checkpoint(&mut self, r: &mut impl Read) -> Result<()> {
        let tensors = read_checkpoint(r)?;
        if tensors.len() != self.params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, model has {}",
                tensors.len(),
                self.params.len()
            )));
        }
        for (name, t) in tensors {
            let id = self
                .find(&name)
                .ok_or_else(|| Error::Format(format!("checkpoint tensor {name:?} not in model")))?;
            let p = &mut self.params[id.0];
            if p.value.shape() != t.shape() {
                return Err(Error::Format(format!(
                    "{name}: checkpoint shape {:?}, model shape {:?}",
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t;
        }
        Ok(())
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CFANCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn read_checkpoint(r: &mut impl Read) -> Result<Vec<(String, Tensor)>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(nlen)?.to_vec()).map_err(|e| Error::Format(e.to_string()))?;
        let rank = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
        }
        let n: usize = shape.iter().product();
        let data = take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(out)
}
