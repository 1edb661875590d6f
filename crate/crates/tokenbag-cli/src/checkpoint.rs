//! Single-file model checkpoints with bit-exact tensor round-trips.
//!
//! Layout: a magic line, a JSON header (format version, outcome, config,
//! training provenance digests, vocabulary digests, tensor index), one
//! embedded vocabulary JSON line per source, hex-encoded f64 tensor
//! sections, and a trailing SHA-256 checksum over everything above it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ModelHyper;
use crate::formats::{vocab_from_json, vocab_to_json};
use crate::manifest::{sha256_bytes, write_atomic};
use tokenbag::dataset::Outcome;
use tokenbag::nncore::{DenseLayer, Mat, Model, Parameters};
use tokenbag::vocab::Vocabulary;
use tokenbag::SourceKind;

const MAGIC: &str = "tokenbag-model v1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint was written by format version {found}, this build reads {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptFile(String),
}

/// Training provenance recorded beside the weights.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub split_digest: String,
    pub corpus_digest: String,
    pub min_count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    outcome: String,
    sources: Vec<String>,
    config: ModelHyper,
    meta: CheckpointMeta,
    vocab_digests: BTreeMap<String, String>,
    tensors: Vec<TensorMeta>,
}

fn hex_encode(values: &[f64], out: &mut String) {
    for v in values {
        out.push_str(&format!("{:016x}", v.to_bits()));
    }
    out.push('\n');
}

fn hex_decode(line: &str, expected: usize) -> Result<Vec<f64>, CheckpointError> {
    let line = line.trim_end();
    if line.len() != expected * 16 {
        return Err(CheckpointError::CorruptFile(format!(
            "tensor section has {} hex chars, expected {}",
            line.len(),
            expected * 16
        )));
    }
    let bytes = line.as_bytes();
    let mut out = Vec::with_capacity(expected);
    for chunk in bytes.chunks(16) {
        let s = std::str::from_utf8(chunk)
            .map_err(|_| CheckpointError::CorruptFile("non-ascii tensor data".into()))?;
        let bits = u64::from_str_radix(s, 16)
            .map_err(|_| CheckpointError::CorruptFile("bad hex in tensor data".into()))?;
        out.push(f64::from_bits(bits));
    }
    Ok(out)
}

fn tensor_list(params: &Parameters, sources: &[SourceKind]) -> Vec<(String, usize, usize)> {
    let mut list = Vec::new();
    for (i, e) in params.embeddings.iter().enumerate() {
        list.push((
            format!("embedding.{}", sources[i].table_name()),
            e.rows,
            e.cols,
        ));
    }
    for (l, layer) in params.dense.iter().enumerate() {
        list.push((format!("dense.{l}.weight"), layer.weight.rows, layer.weight.cols));
        list.push((format!("dense.{l}.bias"), 1, layer.bias.len()));
    }
    list.push(("out.weight".to_string(), 1, params.out_weight.len()));
    list.push(("out.bias".to_string(), 1, 1));
    list
}

/// Serializes a model plus provenance to one file, atomically.
pub fn save_model(model: &Model, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let sources = &model.config.sources;
    let mut vocab_digests = BTreeMap::new();
    let mut vocab_lines = Vec::new();
    for source in sources {
        let vocab = model
            .vocabs
            .get(source)
            .ok_or_else(|| anyhow!("model lacks a vocabulary for {}", source.table_name()))?;
        let json = vocab_to_json(vocab)?;
        vocab_digests.insert(source.table_name().to_string(), sha256_bytes(json.as_bytes()));
        vocab_lines.push((source.table_name(), json));
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        outcome: model.outcome.name().to_string(),
        sources: sources.iter().map(|s| s.table_name().to_string()).collect(),
        config: ModelHyper::from_model_config(&model.config),
        meta: meta.clone(),
        vocab_digests,
        tensors: tensor_list(&model.params, sources)
            .into_iter()
            .map(|(name, rows, cols)| TensorMeta { name, rows, cols })
            .collect(),
    };

    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&serde_json::to_string(&header)?);
    out.push('\n');
    for (table, json) in &vocab_lines {
        out.push_str(&format!("VOCAB {table}\n"));
        out.push_str(json);
        out.push('\n');
    }
    for (i, e) in model.params.embeddings.iter().enumerate() {
        out.push_str(&format!(
            "TENSOR embedding.{} {} {}\n",
            sources[i].table_name(),
            e.rows,
            e.cols
        ));
        hex_encode(&e.data, &mut out);
    }
    for (l, layer) in model.params.dense.iter().enumerate() {
        out.push_str(&format!(
            "TENSOR dense.{l}.weight {} {}\n",
            layer.weight.rows, layer.weight.cols
        ));
        hex_encode(&layer.weight.data, &mut out);
        out.push_str(&format!("TENSOR dense.{l}.bias 1 {}\n", layer.bias.len()));
        hex_encode(&layer.bias, &mut out);
    }
    out.push_str(&format!("TENSOR out.weight 1 {}\n", model.params.out_weight.len()));
    hex_encode(&model.params.out_weight, &mut out);
    out.push_str("TENSOR out.bias 1 1\n");
    hex_encode(&[model.params.out_bias], &mut out);

    let checksum = sha256_bytes(out.as_bytes());
    out.push_str(&format!("CHECKSUM sha256 {checksum}\n"));
    write_atomic(path, out.as_bytes())
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    n: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, CheckpointError> {
        self.n += 1;
        self.inner
            .next()
            .ok_or_else(|| CheckpointError::CorruptFile(format!("truncated at line {}", self.n)))
    }
}

/// Reads a checkpoint back; tensors are bit-exact.
pub fn load_model(path: &Path) -> Result<(Model, CheckpointMeta)> {
    let raw = fs::read_to_string(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;

    // verify trailing checksum over everything before its line
    let tail = raw
        .trim_end_matches('\n')
        .rsplit('\n')
        .next()
        .unwrap_or_default();
    let body_len = raw
        .trim_end_matches('\n')
        .len()
        .saturating_sub(tail.len());
    let (prefix, expected) = match tail.strip_prefix("CHECKSUM sha256 ") {
        Some(digest) => (&raw[..body_len], digest.trim()),
        None => {
            return Err(CheckpointError::CorruptFile(
                "missing trailing checksum".into(),
            )
            .into())
        }
    };
    let actual = sha256_bytes(prefix.as_bytes());
    if actual != expected {
        return Err(CheckpointError::CorruptFile("checksum mismatch".into()).into());
    }

    let mut lines = Lines {
        inner: raw.lines(),
        n: 0,
    };
    if lines.next()? != MAGIC {
        return Err(CheckpointError::CorruptFile("bad magic line".into()).into());
    }
    let header: Header = serde_json::from_str(lines.next()?)
        .map_err(|e| CheckpointError::CorruptFile(format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: header.format_version,
            supported: FORMAT_VERSION,
        }
        .into());
    }
    let outcome = Outcome::from_name(&header.outcome)
        .ok_or_else(|| CheckpointError::CorruptFile(format!("bad outcome {:?}", header.outcome)))?;
    let sources: Vec<SourceKind> = header
        .sources
        .iter()
        .map(|n| {
            SourceKind::from_table_name(n)
                .ok_or_else(|| CheckpointError::CorruptFile(format!("bad source {n:?}")))
        })
        .collect::<Result<_, _>>()?;

    let mut vocabs: BTreeMap<SourceKind, Vocabulary> = BTreeMap::new();
    for source in &sources {
        let tag = lines.next()?;
        let expected_tag = format!("VOCAB {}", source.table_name());
        if tag != expected_tag {
            return Err(
                CheckpointError::CorruptFile(format!("expected {expected_tag:?}, got {tag:?}")).into(),
            );
        }
        let json = lines.next()?;
        let digest = sha256_bytes(json.as_bytes());
        let recorded = header
            .vocab_digests
            .get(source.table_name())
            .ok_or_else(|| CheckpointError::CorruptFile("missing vocab digest".into()))?;
        if &digest != recorded {
            return Err(CheckpointError::CorruptFile(format!(
                "vocabulary digest mismatch for {}",
                source.table_name()
            ))
            .into());
        }
        vocabs.insert(*source, vocab_from_json(json)?);
    }

    let mut read_tensor = |name: &str| -> Result<(usize, usize, Vec<f64>)> {
        let tag = lines.next()?;
        let mut parts = tag.split(' ');
        if parts.next() != Some("TENSOR") {
            return Err(CheckpointError::CorruptFile(format!("expected tensor, got {tag:?}")).into());
        }
        let found = parts
            .next()
            .ok_or_else(|| CheckpointError::CorruptFile("tensor tag missing name".into()))?;
        if found != name {
            return Err(
                CheckpointError::CorruptFile(format!("expected tensor {name}, got {found}")).into(),
            );
        }
        let rows: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CheckpointError::CorruptFile("bad tensor rows".into()))?;
        let cols: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CheckpointError::CorruptFile("bad tensor cols".into()))?;
        let data = hex_decode(lines.next()?, rows * cols)?;
        Ok((rows, cols, data))
    };

    let mut embeddings = Vec::with_capacity(sources.len());
    for source in &sources {
        let (rows, cols, data) = read_tensor(&format!("embedding.{}", source.table_name()))?;
        embeddings.push(Mat { rows, cols, data });
    }
    let mut dense = Vec::with_capacity(header.config.n_dense);
    for l in 0..header.config.n_dense {
        let (rows, cols, data) = read_tensor(&format!("dense.{l}.weight"))?;
        let weight = Mat { rows, cols, data };
        let (_, _, bias) = read_tensor(&format!("dense.{l}.bias"))?;
        dense.push(DenseLayer { weight, bias });
    }
    let (_, _, out_weight) = read_tensor("out.weight")?;
    let (_, _, out_bias) = read_tensor("out.bias")?;
    let params = Parameters {
        embeddings,
        dense,
        out_weight,
        out_bias: out_bias[0],
    };

    let model = Model {
        outcome,
        config: header.config.clone().into_model_config(sources),
        params,
        vocabs,
    };
    Ok((model, header.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tokenbag::nncore::ModelConfig;
    use tokenbag::tokenizer::{AdmissionDocument, Token};

    fn tiny_model() -> Model {
        let sources = vec![SourceKind::ChartEvents, SourceKind::NoteEvents];
        let mut vocabs = BTreeMap::new();
        for &s in &sources {
            let mut doc = AdmissionDocument::empty(1, 1);
            doc.tokens_by_source.insert(
                s,
                ["alpha", "alpha", "beta", "beta"]
                    .iter()
                    .map(|t| Token::new(*t).unwrap())
                    .collect(),
            );
            vocabs.insert(s, Vocabulary::build(&[doc], s, 2));
        }
        let config = ModelConfig {
            sources: sources.clone(),
            embedding_dim: 3,
            embedding_dropout: 0.1,
            n_dense: 2,
            neurons_per_layer: 16,
            hidden_dropout: 0.25,
            learning_rate: 0.004,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = Parameters::init(&config, &[4, 4], &mut rng);
        Model {
            outcome: Outcome::Los,
            config,
            params,
            vocabs,
        }
    }

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            seed: 99,
            split_digest: "abc".into(),
            corpus_digest: "def".into(),
            min_count: 2,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = tiny_model();
        save_model(&model, &meta(), &path).unwrap();
        let (loaded, loaded_meta) = load_model(&path).unwrap();
        assert_eq!(loaded_meta, meta());
        assert_eq!(loaded.outcome, model.outcome);
        assert_eq!(loaded.config, model.config);
        assert_eq!(loaded.params, model.params);
        for (s, v) in &model.vocabs {
            assert_eq!(loaded.vocabs[s].id_of("alpha"), v.id_of("alpha"));
        }
        // byte-determinism of the writer itself
        let bytes_a = fs::read(&path).unwrap();
        save_model(&model, &meta(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes_a);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_model(&tiny_model(), &meta(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(
            err.downcast_ref::<CheckpointError>()
                .map(|e| matches!(e, CheckpointError::CorruptFile(_)))
                .unwrap_or(false),
            "unexpected error {err:?}"
        );
    }

    #[test]
    fn flipped_bit_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_model(&tiny_model(), &meta(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] = if bytes[mid] == b'0' { b'1' } else { b'0' };
        fs::write(&path, &bytes).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn newer_format_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_model(&tiny_model(), &meta(), &path).unwrap();
        let raw = fs::read_to_string(&path).unwrap();
        // bump the version in the header, fix up the checksum
        let raw = raw.replace("\"format_version\":1", "\"format_version\":2");
        let body_end = raw.rfind("CHECKSUM").unwrap();
        let body = &raw[..body_end];
        let tampered = format!("{body}CHECKSUM sha256 {}\n", sha256_bytes(body.as_bytes()));
        fs::write(&path, tampered).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(
            err.downcast_ref::<CheckpointError>(),
            Some(CheckpointError::VersionMismatch { found: 2, .. })
        ));
    }
}
