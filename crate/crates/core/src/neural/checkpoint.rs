//! Binary parameter records, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes   "LFOEQNN1"
//! act      u8        0 = tanh, 1 = relu
//! n_sizes  u32
//! sizes    n_sizes × u64
//! layers   per layer: W row-major (out × in) then b, as f64
//! n_extra  u32, then n_extra × f64        (policy log_std; 0 otherwise)
//! n_norm   u32, then if n_norm > 0:       (input normalizer)
//!          count u64, clip f64, mean n_norm × f64, m2 n_norm × f64
//! n_feat   u32, then n_feat bytes         (angle mask, 1 = angular)
//! ```

use std::path::Path;

use nalgebra::DVector;

use super::{Activation, AngleFeatures, GaussianPolicy, Mlp, NeuralError, RunningNormalizer};

pub const MAGIC: &[u8; 8] = b"LFOEQNN1";

fn put_f64s(out: &mut Vec<u8>, xs: impl IntoIterator<Item = f64>) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(net: &Mlp, extra: &[f64], norm: Option<&RunningNormalizer>, features: Option<&AngleFeatures>) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * (net.n_params() + extra.len()));
    out.extend_from_slice(MAGIC);
    out.push(match net.activation() {
        Activation::Tanh => 0,
        Activation::Relu => 1,
    });
    out.extend_from_slice(&(net.layer_sizes().len() as u32).to_le_bytes());
    for &s in net.layer_sizes() {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for l in 0..net.n_layers() {
        let w = net.weight(l);
        for r in 0..w.nrows() {
            put_f64s(&mut out, (0..w.ncols()).map(|c| w[(r, c)]));
        }
        put_f64s(&mut out, net.bias(l).iter().copied());
    }
    out.extend_from_slice(&(extra.len() as u32).to_le_bytes());
    put_f64s(&mut out, extra.iter().copied());
    match norm {
        Some(n) => {
            out.extend_from_slice(&(n.dim() as u32).to_le_bytes());
            out.extend_from_slice(&n.count.to_le_bytes());
            put_f64s(&mut out, [n.clip]);
            put_f64s(&mut out, n.mean.iter().copied());
            put_f64s(&mut out, n.m2.iter().copied());
        }
        None => out.extend_from_slice(&0u32.to_le_bytes()),
    }
    let mask = features.map_or(&[][..], |f| &f.angular[..]);
    out.extend_from_slice(&(mask.len() as u32).to_le_bytes());
    out.extend(mask.iter().map(|&a| a as u8));
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            NeuralError::Checkpoint(format!("truncated record at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NeuralError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| NeuralError::Checkpoint("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

type Decoded = (Mlp, Vec<f64>, Option<RunningNormalizer>, Option<AngleFeatures>);

pub fn decode(bytes: &[u8]) -> Result<Decoded, NeuralError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(NeuralError::Checkpoint("bad magic".into()));
    }
    let activation = match r.take(1)?[0] {
        0 => Activation::Tanh,
        1 => Activation::Relu,
        other => return Err(NeuralError::Checkpoint(format!("unknown activation tag {other}"))),
    };
    let n_sizes = r.u32()? as usize;
    let sizes = (0..n_sizes).map(|_| r.u64().map(|s| s as usize)).collect::<Result<Vec<_>, _>>()?;
    let mut net = Mlp::zeros(&sizes, activation)?;
    for l in 0..net.n_layers() {
        let (rows, cols) = (sizes[l + 1], sizes[l]);
        let w = r.f64s(rows * cols)?;
        let b = r.f64s(rows)?;
        let range = net.weight_range(l);
        let params = net.params_mut();
        for row in 0..rows {
            for col in 0..cols {
                params[range.start + col * rows + row] = w[row * cols + col];
            }
        }
        params[range.end..range.end + rows].copy_from_slice(&b);
    }
    let n_extra = r.u32()? as usize;
    let extra = r.f64s(n_extra)?;
    let n_norm = r.u32()? as usize;
    let norm = if n_norm > 0 {
        let count = r.u64()?;
        let clip = r.f64s(1)?[0];
        let mean = DVector::from_vec(r.f64s(n_norm)?);
        let m2 = DVector::from_vec(r.f64s(n_norm)?);
        Some(RunningNormalizer { count, mean, m2, clip })
    } else {
        None
    };
    let n_feat = r.u32()? as usize;
    let features = if n_feat > 0 {
        let mask = r
            .take(n_feat)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(NeuralError::Checkpoint(format!("bad angle flag {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Some(AngleFeatures::new(mask))
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(NeuralError::Checkpoint("trailing bytes".into()));
    }
    Ok((net, extra, norm, features))
}

impl GaussianPolicy {
    pub fn to_bytes(&self) -> Vec<u8> {
        encode(&self.mean_net, self.log_std.as_slice(), self.obs_norm.as_ref(), self.features.as_ref())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NeuralError> {
        let (mean_net, log_std, obs_norm, features) = decode(bytes)?;
        if log_std.len() != mean_net.output_dim() {
            return Err(NeuralError::Checkpoint("log_std length differs from action dimension".into()));
        }
        if obs_norm.as_ref().is_some_and(|n| n.dim() != mean_net.input_dim()) {
            return Err(NeuralError::Checkpoint("normalizer dimension differs from state dimension".into()));
        }
        if features.as_ref().is_some_and(|f| f.output_dim() != mean_net.input_dim()) {
            return Err(NeuralError::Checkpoint("angle mask does not match the network input".into()));
        }
        Ok(Self {
            mean_net,
            log_std: DVector::from_vec(log_std),
            obs_norm,
            features,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
