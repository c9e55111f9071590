//! On-disk tensor container.
//!
//! Layout: a 4-byte little-endian header length, a UTF-8 JSON header
//! (`dtype`, `shape`, `byte_order`, `tag`), then the raw payload.
//! Complex data is stored as interleaved re/im pairs. `c64` is the
//! canonical dtype for complex arrays (8 bytes per element, two f32);
//! `f64` is used where bit-exactness matters (checkpoints, oracles).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "c64")]
    C64,
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "f64")]
    F64,
}

impl Dtype {
    pub fn byte_size(self) -> usize {
        match self {
            Dtype::C64 => 8,
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    dtype: Dtype,
    shape: Vec<usize>,
    byte_order: String,
    tag: String,
}

/// A loaded or to-be-saved array together with its semantic tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub data: TensorData,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    C64(ArrayD<Complex32>),
    F32(ArrayD<f32>),
    F64(ArrayD<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::C64(_) => Dtype::C64,
            TensorData::F32(_) => Dtype::F32,
            TensorData::F64(_) => Dtype::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            TensorData::C64(a) => a.shape(),
            TensorData::F32(a) => a.shape(),
            TensorData::F64(a) => a.shape(),
        }
    }
}

impl Tensor {
    pub fn new(data: TensorData, tag: impl Into<String>) -> Self {
        Tensor {
            data,
            tag: tag.into(),
        }
    }
}

fn payload_bytes(data: &TensorData) -> Vec<u8> {
    match data {
        TensorData::C64(a) => {
            let mut out = Vec::with_capacity(a.len() * 8);
            for z in a.iter() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
            out
        }
        TensorData::F32(a) => {
            let mut out = Vec::with_capacity(a.len() * 4);
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
        TensorData::F64(a) => {
            let mut out = Vec::with_capacity(a.len() * 8);
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
    }
}

/// Write a tensor to `path`. The result round-trips bit-exactly through
/// [`load_tensor`].
pub fn save_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        dtype: tensor.data.dtype(),
        shape: tensor.data.shape().to_vec(),
        byte_order: "little".to_string(),
        tag: tensor.tag.clone(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::validation(format!("header serialization: {e}")))?;
    let len: u32 = header_json
        .len()
        .try_into()
        .map_err(|_| Error::validation("header too large"))?;

    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&len.to_le_bytes())
        .and_then(|_| file.write_all(&header_json))
        .and_then(|_| file.write_all(&payload_bytes(&tensor.data)))
        .map_err(|e| Error::io(path, e))
}

/// Read a tensor written by [`save_tensor`], validating header/payload
/// consistency.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;

    if bytes.len() < 4 {
        return Err(Error::format(path, "file shorter than header length field"));
    }
    let header_len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    if bytes.len() < 4 + header_len {
        return Err(Error::format(path, "truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[4..4 + header_len])
        .map_err(|e| Error::format(path, format!("header parse: {e}")))?;
    if header.byte_order != "little" {
        return Err(Error::format(
            path,
            format!("unsupported byte order {:?}", header.byte_order),
        ));
    }

    let n_elems: usize = header.shape.iter().product();
    let expected = n_elems * header.dtype.byte_size();
    let payload = &bytes[4 + header_len..];
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "payload size mismatch: header implies {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }

    let shape = IxDyn(&header.shape);
    let data = match header.dtype {
        Dtype::C64 => {
            let mut vals = Vec::with_capacity(n_elems);
            for chunk in payload.chunks_exact(8) {
                let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
                let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
                vals.push(Complex32::new(re, im));
            }
            TensorData::C64(ArrayD::from_shape_vec(shape, vals).unwrap())
        }
        Dtype::F32 => {
            let vals = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            TensorData::F32(ArrayD::from_shape_vec(shape, vals).unwrap())
        }
        Dtype::F64 => {
            let vals = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            TensorData::F64(ArrayD::from_shape_vec(shape, vals).unwrap())
        }
    };

    Ok(Tensor {
        data,
        tag: header.tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayD;

    #[test]
    fn zero_c64_payload_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.tns");
        let data = TensorData::C64(ArrayD::zeros(IxDyn(&[2, 2])));
        save_tensor(&Tensor::new(data, "test"), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        assert_eq!(bytes.len() - 4 - header_len, 32);
    }

    #[test]
    fn roundtrip_c64_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let vals: Vec<Complex32> = (0..64 * 64)
            .map(|_| Complex32::new(rng.random::<f32>(), rng.random::<f32>()))
            .collect();
        let arr = ArrayD::from_shape_vec(IxDyn(&[64, 64]), vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.tns");
        save_tensor(&Tensor::new(TensorData::C64(arr.clone()), "img"), &path).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(back.tag, "img");
        match back.data {
            TensorData::C64(b) => assert_eq!(arr, b),
            _ => panic!("dtype changed"),
        }
    }

    #[test]
    fn shape_payload_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tns");
        let header = br#"{"dtype":"f32","shape":[4,4],"byte_order":"little","tag":"x"}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        bytes.extend_from_slice(&[0u8; 100]);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_tensor(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn c64_header_with_f32_length_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad2.tns");
        let header = br#"{"dtype":"c64","shape":[4,4],"byte_order":"little","tag":"x"}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        bytes.extend_from_slice(&vec![0u8; 16 * 4]); // f32-sized payload for a c64 header
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_tensor(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_tensor("/nonexistent/nowhere.tns"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn malformed_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad3.tns");
        let header = b"{not json";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_tensor(&path), Err(Error::Format { .. })));
    }
}
