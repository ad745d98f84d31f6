//! Binary model checkpoints: `MUSN`, u32 version, spec text, normalization
//! constants, then every parameter as a little-endian f64.

use std::path::Path;

use super::arch::ArchitectureSpec;
use super::model::{InputNorm, LayerParams, NetworkModel};
use crate::numerics::Normalization;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MUSN";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(model: &NetworkModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    let text = model.spec.to_text();
    put_u32(&mut buf, text.len() as u32);
    buf.extend_from_slice(text.as_bytes());
    put_u32(&mut buf, model.input_norm.mean.len() as u32);
    put_f64s(&mut buf, &model.input_norm.mean);
    put_f64s(&mut buf, &model.input_norm.std);
    put_u32(&mut buf, model.target_norm.len() as u32);
    for n in &model.target_norm {
        put_f64s(&mut buf, &[n.mean, n.std]);
    }
    for p in &model.params {
        put_f64s(&mut buf, &p.weights);
        put_f64s(&mut buf, &p.biases);
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::CorruptDataset(format!(
                "checkpoint truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::CorruptDataset("length overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<NetworkModel> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::NotADataset(path.to_path_buf()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CorruptDataset(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(n)?)
        .map_err(|_| Error::CorruptDataset("spec text is not UTF-8".into()))?
        .to_string();
    let spec = ArchitectureSpec::from_text(&text)?;
    let n_in = r.u32()? as usize;
    if n_in == 0 || n_in > spec.input().len() || spec.input().len() % n_in != 0 {
        return Err(Error::InconsistentDataset(format!(
            "{n_in} input normalization constants for {} inputs",
            spec.input().len()
        )));
    }
    let input_norm = InputNorm {
        mean: r.f64s(n_in)?,
        std: r.f64s(n_in)?,
    };
    let n_out = r.u32()? as usize;
    if n_out != spec.outputs() {
        return Err(Error::InconsistentDataset(format!(
            "{n_out} target normalizations for {} outputs",
            spec.outputs()
        )));
    }
    let mut target_norm = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let v = r.f64s(2)?;
        target_norm.push(Normalization { mean: v[0], std: v[1] });
    }
    let mut params = Vec::new();
    for i in 0..spec.layers().len() {
        let (nw, nb) = spec.param_counts(i);
        params.push(LayerParams {
            weights: r.f64s(nw)?,
            biases: r.f64s(nb)?,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptDataset(format!(
            "{} trailing bytes after parameters",
            bytes.len() - r.pos
        )));
    }
    let velocity = params
        .iter()
        .map(|p| LayerParams::zeros(p.weights.len(), p.biases.len()))
        .collect();
    Ok(NetworkModel {
        spec,
        params,
        velocity,
        input_norm,
        target_norm,
    })
}

pub fn save_checkpoint(model: &NetworkModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::{ArchOptions, Shape3};
    use crate::nn::model::initialize_network;
    use crate::numerics::SeededRng;

    fn model() -> NetworkModel {
        let spec =
            ArchitectureSpec::from_layer_string("c-4 p-2x2 fc-5 fc-3", Shape3::new(2, 9, 7), &ArchOptions::default())
                .unwrap();
        let mut m = initialize_network(&spec, &mut SeededRng::new(8));
        m.input_norm = InputNorm {
            mean: vec![0.1],
            std: vec![0.3],
        };
        m.target_norm = vec![
            Normalization {
                mean: 1.0 / 3.0,
                std: 2.0,
            },
            Normalization { mean: -5.0, std: 0.1 },
            Normalization::IDENTITY,
        ];
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.musn");
        let m = model();
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), m);
    }

    #[test]
    fn per_channel_constants_round_trip() {
        let mut m = model();
        m.input_norm = InputNorm {
            mean: vec![0.1, -0.2],
            std: vec![0.3, 0.05],
        };
        assert_eq!(decode_checkpoint(&encode_checkpoint(&m), Path::new("x")).unwrap(), m);
        m.input_norm = InputNorm {
            mean: vec![0.0; 4],
            std: vec![1.0; 4],
        };
        let err = decode_checkpoint(&encode_checkpoint(&m), Path::new("x")).unwrap_err();
        assert_eq!(err.kind(), "inconsistent-dataset");
    }

    #[test]
    fn corrupt_inputs() {
        let p = Path::new("x");
        let bytes = encode_checkpoint(&model());
        assert_eq!(decode_checkpoint(b"NOPE1234", p).unwrap_err().kind(), "not-a-dataset");
        assert_eq!(
            decode_checkpoint(&bytes[..bytes.len() - 3], p).unwrap_err().kind(),
            "corrupt-dataset"
        );
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(decode_checkpoint(&extra, p).unwrap_err().kind(), "corrupt-dataset");
    }
}
