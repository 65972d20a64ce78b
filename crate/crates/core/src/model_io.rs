//! JSON model files with an embedded sha256 checksum.
//!
//! The checksum covers the compact serialization (sorted keys) of the document
//! without its `checksum` field. Floats are written in shortest round-trip form.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::covariance::CovarianceSurrogate;
use crate::dictionary::Dictionary;
use crate::dynamics::AxisBox;
use crate::edmd::{KoopmanModel, ParamSampling};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    shape: [usize; 2],
    data: Vec<f64>,
}

impl MatrixRepr {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            shape: [m.nrows(), m.ncols()],
            data: m.transpose().as_slice().to_vec(),
        }
    }

    fn to_matrix(&self, what: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        if self.shape != [rows, cols] {
            return Err(Error::Schema(format!(
                "{what}: expected shape {rows}x{cols}, found {}x{}",
                self.shape[0], self.shape[1]
            )));
        }
        if self.data.len() != rows * cols {
            return Err(Error::Schema(format!(
                "{what}: expected {} entries, found {}",
                rows * cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(rows, cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct Domains {
    state: Option<AxisBox>,
    param: Option<AxisBox>,
}

#[derive(Serialize, Deserialize)]
struct CovarianceRepr {
    blocks: Vec<MatrixRepr>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    system: Option<String>,
    dictionary: Dictionary,
    t: f64,
    m: usize,
    n_features: usize,
    domains: Domains,
    param_sampling: Option<ParamSampling>,
    feature_scale: Vec<f64>,
    blocks: Vec<MatrixRepr>,
    covariance: Option<CovarianceRepr>,
}

/// Hex sha256 of the compact document without its `checksum` field.
pub fn compute_checksum(doc: &Value) -> Result<String> {
    let mut doc = doc.clone();
    if let Value::Object(map) = &mut doc {
        map.remove("checksum");
    }
    let bytes = serde_json::to_vec(&doc)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Sets the `checksum` field of `doc` to match its content.
pub fn sign(doc: &mut Value) -> Result<()> {
    let sum = compute_checksum(doc)?;
    match doc {
        Value::Object(map) => {
            map.insert("checksum".into(), Value::String(sum));
            Ok(())
        }
        _ => Err(Error::Schema("model document must be an object".into())),
    }
}

/// The signed JSON document for `model` and optional `q`.
pub fn model_document(model: &KoopmanModel, q: Option<&CovarianceSurrogate>) -> Result<Value> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        system: model.system.clone(),
        dictionary: model.dict.clone(),
        t: model.t,
        m: model.m(),
        n_features: model.n_features(),
        domains: Domains {
            state: model.state_domain.clone(),
            param: model.param_domain.clone(),
        },
        param_sampling: model.param_sampling.clone(),
        feature_scale: model.feature_scale.as_slice().to_vec(),
        blocks: model.blocks.iter().map(MatrixRepr::from_matrix).collect(),
        covariance: q.map(|q| CovarianceRepr {
            blocks: q.blocks().iter().map(MatrixRepr::from_matrix).collect(),
        }),
    };
    let mut doc = serde_json::to_value(&file)?;
    sign(&mut doc)?;
    Ok(doc)
}

/// Serializes the model document as pretty-printed JSON.
pub fn model_to_string(model: &KoopmanModel, q: Option<&CovarianceSurrogate>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&model_document(model, q)?)?;
    s.push('\n');
    Ok(s)
}

/// Writes the model file atomically (temporary file, then rename).
pub fn save_model(
    model: &KoopmanModel,
    q: Option<&CovarianceSurrogate>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_atomic(path.as_ref(), model_to_string(model, q)?.as_bytes())
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(KoopmanModel, Option<CovarianceSurrogate>)> {
    model_from_str(&fs::read_to_string(path)?)
}

pub fn model_from_str(text: &str) -> Result<(KoopmanModel, Option<CovarianceSurrogate>)> {
    let doc: Value = serde_json::from_str(text)?;
    let version = doc
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Schema("missing format_version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: u32::try_from(version).unwrap_or(u32::MAX),
        });
    }
    let stored = doc
        .get("checksum")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Schema("missing checksum".into()))?
        .to_string();
    let computed = compute_checksum(&doc)?;
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let mut doc = doc;
    if let Value::Object(map) = &mut doc {
        map.remove("checksum");
    }
    let file: ModelFile = serde_json::from_value(doc)?;

    let n = file.dictionary.len();
    if file.n_features != n {
        return Err(Error::Schema(format!(
            "n_features: dictionary has M = {n}, file declares {}",
            file.n_features
        )));
    }
    if file.blocks.len() != file.m + 1 {
        return Err(Error::Schema(format!(
            "blocks: expected m + 1 = {} blocks, found {}",
            file.m + 1,
            file.blocks.len()
        )));
    }
    if !(file.t > 0.0) {
        return Err(Error::Schema(format!(
            "t must be positive, found {}",
            file.t
        )));
    }
    if file.feature_scale.len() != n {
        return Err(Error::Schema(format!(
            "feature_scale: expected {n} entries, found {}",
            file.feature_scale.len()
        )));
    }
    let blocks = file
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| b.to_matrix(&format!("blocks[{i}]"), n, n))
        .collect::<Result<Vec<_>>>()?;
    let check_box = |b: Option<AxisBox>, what: &str, dim: usize| -> Result<Option<AxisBox>> {
        b.map(|b| {
            let b = AxisBox::new(b.lo, b.hi)?;
            if b.dim() != dim {
                return Err(Error::Schema(format!(
                    "{what} domain: expected dimension {dim}, found {}",
                    b.dim()
                )));
            }
            Ok(b)
        })
        .transpose()
    };
    let state_domain = check_box(file.domains.state, "state", file.dictionary.dim())?;
    let param_domain = check_box(file.domains.param, "parameter", file.m)?;

    let q = file
        .covariance
        .map(|c| {
            let s = file.m + 1;
            if c.blocks.len() != s * s {
                return Err(Error::Schema(format!(
                    "covariance: expected {} blocks, found {}",
                    s * s,
                    c.blocks.len()
                )));
            }
            let blocks = c
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| b.to_matrix(&format!("covariance.blocks[{i}]"), n, n))
                .collect::<Result<Vec<_>>>()?;
            CovarianceSurrogate::from_blocks(file.m, blocks)
        })
        .transpose()?;

    let model = KoopmanModel {
        blocks,
        dict: file.dictionary,
        t: file.t,
        feature_scale: DVector::from_vec(file.feature_scale),
        system: file.system,
        state_domain,
        param_domain,
        param_sampling: file.param_sampling,
    };
    Ok((model, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> (KoopmanModel, CovarianceSurrogate) {
        let dict = Dictionary::full(1, 2).unwrap();
        let b0 = DMatrix::from_fn(3, 3, |i, j| 0.1 / (1.0 + i as f64 + 3.0 * j as f64));
        let b1 = DMatrix::from_fn(3, 3, |i, j| (i as f64 - j as f64) / 7.0 + 1e-300);
        let mut model = KoopmanModel::from_blocks(dict, vec![b0, b1], 0.1).unwrap();
        model.system = Some("pitchfork".into());
        model.state_domain = Some(AxisBox::cube(1, -2.0, 2.0));
        model.param_domain = Some(AxisBox::cube(1, -2.0, 2.0));
        model.param_sampling = Some(ParamSampling::Uniform);
        model.feature_scale = DVector::from_vec(vec![2.0, 1.0, 4.0]);
        let q = CovarianceSurrogate::from_blocks(
            1,
            (0..4)
                .map(|k| DMatrix::from_fn(3, 3, |i, j| ((i + j + k) as f64).sqrt() / 3.0))
                .collect(),
        )
        .unwrap();
        (model, q)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (model, q) = sample_model();
        let text = model_to_string(&model, Some(&q)).unwrap();
        let (m2, q2) = model_from_str(&text).unwrap();
        assert_eq!(m2, model);
        assert_eq!(q2.as_ref(), Some(&q));
        for (a, b) in model.blocks.iter().zip(&m2.blocks) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(model_to_string(&m2, q2.as_ref()).unwrap(), text);
    }

    #[test]
    fn missing_covariance_is_absent() {
        let (model, _) = sample_model();
        let (_, q) = model_from_str(&model_to_string(&model, None).unwrap()).unwrap();
        assert!(q.is_none());
    }

    #[test]
    fn tampering_fails_checksum() {
        let (model, q) = sample_model();
        let text = model_to_string(&model, Some(&q)).unwrap();
        let tampered = text.replacen("\"t\": 0.1", "\"t\": 0.2", 1);
        assert_ne!(tampered, text);
        assert!(matches!(
            model_from_str(&tampered),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn wrong_version() {
        let (model, _) = sample_model();
        let mut doc = model_document(&model, None).unwrap();
        doc["format_version"] = 7.into();
        sign(&mut doc).unwrap();
        assert!(matches!(
            model_from_str(&doc.to_string()),
            Err(Error::VersionMismatch {
                expected: 1,
                found: 7
            })
        ));
    }

    #[test]
    fn wrong_block_size_names_dims() {
        let (model, _) = sample_model();
        let mut doc = model_document(&model, None).unwrap();
        doc["blocks"][1] = serde_json::json!({"shape": [2, 2], "data": [1.0, 0.0, 0.0, 1.0]});
        sign(&mut doc).unwrap();
        match model_from_str(&doc.to_string()) {
            Err(Error::Schema(msg)) => {
                assert!(
                    msg.contains("expected shape 3x3") && msg.contains("found 2x2"),
                    "{msg}"
                )
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(
            model_from_str("{not json"),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn atomic_save_and_load() {
        let (model, q) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, Some(&q), &path).unwrap();
        let (m2, q2) = load_model(&path).unwrap();
        assert_eq!((m2, q2.unwrap()), (model, q));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
