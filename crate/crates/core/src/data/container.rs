//! The SFT1 tensor container.
//!
//! A file is one UTF-8 JSON header line followed by a raw little-endian
//! payload:
//!
//! ```text
//! {"magic":"SFT1","dtype":"f32","shape":[N,F,T],"order":"C","role":"values"}\n
//! <N*F*T little-endian elements>
//! ```
//!
//! A dataset is a directory holding `train_values.sft`, `train_mask.sft`,
//! `test_values.sft`, `test_mask.sft` and `meta.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{Dataset, Spectrogram};
use crate::error::{Error, Result};

const MAGIC: &str = "SFT1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    U8,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorRole {
    Values,
    Mask,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    magic: String,
    dtype: DType,
    shape: [usize; 3],
    order: String,
    role: TensorRole,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

/// A rank-3 tensor as stored in an SFT1 file.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: [usize; 3],
    pub role: TensorRole,
    pub data: TensorData,
}

impl Tensor {
    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F32(_) => DType::F32,
            TensorData::U8(_) => DType::U8,
        }
    }

    fn len(&self) -> usize {
        match &self.data {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    /// Stacks equally shaped 2-D real grids into an `[N, F, T]` tensor.
    pub fn from_grids_f32<'a>(
        grids: impl IntoIterator<Item = ArrayView2<'a, f32>>,
        dim: (usize, usize),
    ) -> Self {
        let mut data = Vec::new();
        let mut n = 0;
        for g in grids {
            data.extend(g.iter().copied());
            n += 1;
        }
        Tensor {
            shape: [n, dim.0, dim.1],
            role: TensorRole::Values,
            data: TensorData::F32(data),
        }
    }

    /// Stacks equally shaped binary grids into an `[N, F, T]` u8 tensor.
    pub fn from_grids_u8<'a>(
        grids: impl IntoIterator<Item = ArrayView2<'a, u8>>,
        dim: (usize, usize),
        role: TensorRole,
    ) -> Self {
        let mut data = Vec::new();
        let mut n = 0;
        for g in grids {
            data.extend(g.iter().copied());
            n += 1;
        }
        Tensor {
            shape: [n, dim.0, dim.1],
            role,
            data: TensorData::U8(data),
        }
    }
}

/// Writes one tensor. Non-finite floats are refused.
pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let expected: usize = t.shape.iter().product();
    if t.len() != expected {
        return Err(Error::Shape(format!(
            "tensor declares {:?} ({expected} elements) but holds {}",
            t.shape,
            t.len()
        )));
    }
    let header = Header {
        magic: MAGIC.into(),
        dtype: t.dtype(),
        shape: t.shape,
        order: "C".into(),
        role: t.role,
    };
    let mut buf = serde_json::to_vec(&header).map_err(|e| Error::json(path, e))?;
    buf.push(b'\n');
    match &t.data {
        TensorData::F32(v) => {
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    path: path.into(),
                    index,
                });
            }
            buf.reserve(v.len() * 4);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        TensorData::U8(v) => buf.extend_from_slice(v),
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Reads one tensor, validating header, payload length and finiteness.
pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = Vec::new();
    reader
        .read_until(b'\n', &mut line)
        .map_err(|e| Error::io(path, e))?;
    if line.last() != Some(&b'\n') {
        return Err(malformed(path, "missing header terminator"));
    }
    line.pop();
    let raw: serde_json::Value =
        serde_json::from_slice(&line).map_err(|e| malformed(path, e.to_string()))?;
    match raw.get("magic").and_then(|m| m.as_str()) {
        Some(MAGIC) => {}
        Some(other) if other.starts_with("SFT") => {
            return Err(Error::UnsupportedVersion {
                path: path.into(),
                found: other.into(),
            })
        }
        _ => return Err(malformed(path, "bad magic")),
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| malformed(path, e.to_string()))?;
    if header.order != "C" {
        return Err(malformed(
            path,
            format!("unsupported order {:?}", header.order),
        ));
    }
    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| malformed(path, "shape overflows"))?;
    let expected = count * header.dtype.width();
    let mut payload = Vec::with_capacity(expected);
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            path: path.into(),
            expected,
            actual: payload.len(),
        });
    }
    let data = match header.dtype {
        DType::F32 => {
            let v: Vec<f32> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    path: path.into(),
                    index,
                });
            }
            TensorData::F32(v)
        }
        DType::U8 => TensorData::U8(payload),
    };
    Ok(Tensor {
        shape: header.shape,
        role: header.role,
        data,
    })
}

#[derive(Serialize, Deserialize)]
struct Meta {
    seed: Option<u64>,
    train: Vec<BTreeMap<String, String>>,
    test: Vec<BTreeMap<String, String>>,
}

fn split_paths(dir: &Path, split: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{split}_values.sft")),
        dir.join(format!("{split}_mask.sft")),
    )
}

fn write_split(dir: &Path, split: &str, specs: &[Spectrogram]) -> Result<()> {
    let dim = specs.first().map(|s| s.dim()).unwrap_or((0, 0));
    if specs.iter().any(|s| s.dim() != dim) {
        return Err(Error::Dimension(format!(
            "{split} split mixes spectrogram sizes"
        )));
    }
    let (vp, mp) = split_paths(dir, split);
    write_tensor(
        &vp,
        &Tensor::from_grids_f32(specs.iter().map(|s| s.values.view()), dim),
    )?;
    let masks: Vec<Array2<u8>> = specs.iter().map(|s| s.mask.mapv(u8::from)).collect();
    write_tensor(
        &mp,
        &Tensor::from_grids_u8(masks.iter().map(|m| m.view()), dim, TensorRole::Mask),
    )
}

fn read_split(dir: &Path, split: &str) -> Result<Vec<Spectrogram>> {
    let (vp, mp) = split_paths(dir, split);
    let values = read_tensor(&vp)?;
    let mask = read_tensor(&mp)?;
    if values.shape != mask.shape {
        return Err(Error::Shape(format!(
            "{split}: values {:?} vs mask {:?}",
            values.shape, mask.shape
        )));
    }
    let (TensorData::F32(v), TensorData::U8(m)) = (values.data, mask.data) else {
        return Err(malformed(&vp, "expected f32 values and u8 mask"));
    };
    if let Some(i) = m.iter().position(|&b| b > 1) {
        return Err(malformed(&mp, format!("mask element {i} is not 0/1")));
    }
    let [n, f, t] = values.shape;
    let stride = f * t;
    (0..n)
        .map(|k| {
            let vals = Array2::from_shape_vec((f, t), v[k * stride..(k + 1) * stride].to_vec())
                .expect("payload length already checked");
            let msk = Array2::from_shape_vec(
                (f, t),
                m[k * stride..(k + 1) * stride]
                    .iter()
                    .map(|&b| b == 1)
                    .collect(),
            )
            .expect("payload length already checked");
            Spectrogram::new(vals, msk)
        })
        .collect()
}

/// Writes a dataset directory, creating it if needed.
pub fn write_container(d: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_split(dir, "train", &d.train)?;
    write_split(dir, "test", &d.test)?;
    let meta = Meta {
        seed: d.seed,
        train: d.train.iter().map(|s| s.meta.clone()).collect(),
        test: d.test.iter().map(|s| s.meta.clone()).collect(),
    };
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Reads a dataset directory written by [`write_container`].
pub fn read_container(dir: &Path) -> Result<Dataset> {
    let mut train = read_split(dir, "train")?;
    let mut test = read_split(dir, "test")?;
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: Meta = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    for (s, m) in train.iter_mut().zip(meta.train) {
        s.meta = m;
    }
    for (s, m) in test.iter_mut().zip(meta.test) {
        s.meta = m;
    }
    Ok(Dataset {
        train,
        test,
        seed: meta.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate_synthetic(8, 32, 64, 0.03, 11).unwrap();
        write_container(&d, dir.path()).unwrap();
        let back = read_container(dir.path()).unwrap();
        assert_eq!(back, d);
        for (a, b) in back.train.iter().zip(&d.train) {
            let bits_a: Vec<u32> = a.values.iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u32> = b.values.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    fn write_raw(path: &Path, header: &str, payload: &[u8]) {
        let mut bytes = header.as_bytes().to_vec();
        bytes.push(b'\n');
        bytes.extend_from_slice(payload);
        fs::write(path, bytes).unwrap();
    }

    #[test]
    fn short_payload_names_expected_and_actual() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.sft");
        // 1 x 2 x 3 = 6 floats declared, 5 present
        let payload: Vec<u8> = (0..5).flat_map(|i| (i as f32).to_le_bytes()).collect();
        write_raw(
            &path,
            r#"{"magic":"SFT1","dtype":"f32","shape":[1,2,3],"order":"C","role":"values"}"#,
            &payload,
        );
        match read_tensor(&path) {
            Err(Error::PayloadLength {
                expected, actual, ..
            }) => {
                assert_eq!(expected, 24);
                assert_eq!(actual, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_dataset_file() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate_synthetic(4, 32, 32, 0.03, 1).unwrap();
        write_container(&d, dir.path()).unwrap();
        let vp = dir.path().join("train_values.sft");
        let bytes = fs::read(&vp).unwrap();
        fs::write(&vp, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(
            read_container(dir.path()),
            Err(Error::PayloadLength { .. })
        ));
    }

    #[test]
    fn bad_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.sft");
        write_raw(&path, "not json", &[]);
        assert!(matches!(
            read_tensor(&path),
            Err(Error::MalformedHeader { .. })
        ));
        write_raw(
            &path,
            r#"{"magic":"SFT2","dtype":"f32","shape":[0,0,0],"order":"C","role":"values"}"#,
            &[],
        );
        assert!(matches!(
            read_tensor(&path),
            Err(Error::UnsupportedVersion { .. })
        ));
        write_raw(
            &path,
            r#"{"magic":"SFT1","dtype":"f64","shape":[0,0,0],"order":"C","role":"values"}"#,
            &[],
        );
        assert!(matches!(
            read_tensor(&path),
            Err(Error::MalformedHeader { .. })
        ));
        fs::write(&path, b"{\"magic\":\"SFT1\"").unwrap();
        assert!(matches!(
            read_tensor(&path),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn non_finite_rejected_on_read_and_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.sft");
        let payload: Vec<u8> = [1.0f32, f32::NAN]
            .iter()
            .flat_map(|x| x.to_le_bytes())
            .collect();
        write_raw(
            &path,
            r#"{"magic":"SFT1","dtype":"f32","shape":[1,1,2],"order":"C","role":"values"}"#,
            &payload,
        );
        assert!(matches!(
            read_tensor(&path),
            Err(Error::NonFinite { index: 1, .. })
        ));
        let t = Tensor {
            shape: [1, 1, 1],
            role: TensorRole::Values,
            data: TensorData::F32(vec![f32::INFINITY]),
        };
        assert!(matches!(
            write_tensor(&path, &t),
            Err(Error::NonFinite { index: 0, .. })
        ));
    }
}
