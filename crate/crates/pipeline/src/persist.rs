//! On-disk forms of fitted alignment maps and toy decoders.
//!
//! An alignment map is `W` as an f64 EMB1 file plus a JSON sidecar with its
//! diagnostics. A toy decoder is a single file: one JSON header line, then
//! the five parameter tensors as consecutive f64 EMB1 blocks.

use std::fs;
use std::path::{Path, PathBuf};

use embinv_core::alignment::AlignmentDiagnostics;
use embinv_core::generator::{DecoderParams, ToyDecoder, Vocab};
use embinv_core::metrics::Tokenizer;
use embinv_core::AlignmentMap;
use serde::{Deserialize, Serialize};

use crate::emb1::{self, Emb1Matrix};
use crate::error::{PipelineError, Result};
use crate::io::{read_json, write_json};

pub fn alignment_sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_alignment(path: &Path, map: &AlignmentMap) -> Result<()> {
    emb1::write_f64(path, &map.w)?;
    write_json(&alignment_sidecar(path), &map.diagnostics())
}

pub fn load_alignment(path: &Path) -> Result<AlignmentMap> {
    let w = emb1::read_f64(path)?;
    let diag: AlignmentDiagnostics = read_json(&alignment_sidecar(path))?;
    Ok(AlignmentMap::from_parts(w, &diag)?)
}

const DECODER_FORMAT: &str = "embinv-toy-decoder";

#[derive(Debug, Serialize, Deserialize)]
struct DecoderHeader {
    format: String,
    version: u32,
    vocab: Vocab,
    tokenizer: Tokenizer,
    embed_dim: usize,
    hidden: usize,
    max_len: usize,
    blocks: Vec<String>,
    /// Training settings, kept for provenance only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
}

pub fn encode_decoder(dec: &ToyDecoder, config: Option<serde_json::Value>) -> Result<Vec<u8>> {
    let header = DecoderHeader {
        format: DECODER_FORMAT.into(),
        version: 1,
        vocab: dec.vocab().clone(),
        tokenizer: dec.tokenizer(),
        embed_dim: dec.embed_dim(),
        hidden: dec.hidden(),
        max_len: dec.max_len(),
        blocks: DecoderParams::NAMES.iter().map(|s| s.to_string()).collect(),
        config,
    };
    let mut out = serde_json::to_vec(&header).expect("serializable");
    out.push(b'\n');
    for block in dec.params().blocks() {
        out.extend(emb1::encode_f64(block)?);
    }
    Ok(out)
}

pub fn decode_decoder(bytes: &[u8]) -> Result<ToyDecoder> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| PipelineError::Format("decoder file has no header line".into()))?;
    let header: DecoderHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| PipelineError::Format(format!("decoder header: {e}")))?;
    if header.format != DECODER_FORMAT || header.version != 1 {
        return Err(PipelineError::Format(format!(
            "unsupported decoder format {} v{}",
            header.format, header.version
        )));
    }
    if header.blocks != DecoderParams::NAMES {
        return Err(PipelineError::Format(format!("unexpected blocks {:?}", header.blocks)));
    }
    let mut rest = &bytes[nl + 1..];
    let mut blocks = Vec::with_capacity(5);
    for name in DecoderParams::NAMES {
        let (m, used) = emb1::decode_prefix(rest)
            .map_err(|e| PipelineError::Format(format!("block {name}: {e}")))?;
        blocks.push(match m {
            Emb1Matrix::F64(m) => m,
            Emb1Matrix::F32(_) => {
                return Err(PipelineError::Format(format!("block {name} must be f64")))
            }
        });
        rest = &rest[used..];
    }
    if !rest.is_empty() {
        return Err(PipelineError::Format("trailing bytes after decoder blocks".into()));
    }
    let mut it = blocks.into_iter();
    let mut next = || it.next().expect("five blocks");
    let params = DecoderParams {
        token_embedding: next(),
        hidden_weights: next(),
        hidden_bias: next(),
        output_weights: next(),
        output_bias: next(),
    };
    if params.hidden_bias.cols() != header.hidden {
        return Err(PipelineError::Format("hidden size disagrees with header".into()));
    }
    Ok(ToyDecoder::from_parts(
        header.vocab,
        header.tokenizer,
        header.embed_dim,
        header.max_len,
        params,
    )?)
}

pub fn save_decoder(path: &Path, dec: &ToyDecoder, config: Option<serde_json::Value>) -> Result<()> {
    fs::write(path, encode_decoder(dec, config)?).map_err(|e| PipelineError::io(path, e))
}

pub fn load_decoder(path: &Path) -> Result<ToyDecoder> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    decode_decoder(&bytes)
}
