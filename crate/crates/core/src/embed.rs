//! Frozen text embedder: signed feature hashing of lowercase alphanumeric
//! tokens into a unit-norm vector. It has no trainable state.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("text has no alphanumeric tokens")]
    EmptyText,
    #[error("token contributions cancel to the zero vector")]
    ZeroVector,
    #[error("{id}: {source}")]
    InRecord {
        id: String,
        #[source]
        source: Box<EmbedError>,
    },
    #[error("embedding dimension must be at least 8, got {0}")]
    BadDimension(usize),
    #[error("embedding table io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashEmbedderConfig {
    pub d: usize,
    pub hash_seed: u64,
}

impl HashEmbedderConfig {
    pub fn new(d: usize, hash_seed: u64) -> Result<Self, EmbedError> {
        if d < 8 {
            return Err(EmbedError::BadDimension(d));
        }
        Ok(Self { d, hash_seed })
    }
}

/// Unit-norm vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values`. Returns `None` for a zero or non-finite vector.
    pub fn try_normalized(values: Vec<f64>) -> Option<Self> {
        let n = linalg::norm(&values);
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(Self(values.into_iter().map(|v| v / n).collect()))
    }

    /// Wraps a vector the caller guarantees is already unit norm.
    pub fn from_unit(values: Vec<f64>) -> Self {
        debug_assert!((linalg::norm(&values) - 1.0).abs() < 1e-9);
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        linalg::dot(&self.0, &other.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Lowercase runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn token_hash(seed: u64, token: &str) -> u64 {
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = 0xcbf2_9ce4_8422_2325 ^ splitmix64(seed);
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

pub fn embed_text(cfg: &HashEmbedderConfig, text: &str) -> Result<EmbeddingVector, EmbedError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut acc = vec![0.0; cfg.d];
    for token in &tokens {
        let h = token_hash(cfg.hash_seed, token);
        let bucket = (h % cfg.d as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }
    EmbeddingVector::try_normalized(acc).ok_or(EmbedError::ZeroVector)
}

/// Hex SHA-256 of a text; the persistent key of an [`EmbeddingTable`] entry.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Deduplicated text → vector cache keyed by text hash.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    pub config: Option<HashEmbedderConfig>,
    entries: BTreeMap<String, EmbeddingVector>,
}

#[derive(Serialize, Deserialize)]
struct TableLine {
    text_hash: String,
    vector: Vec<f64>,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&EmbeddingVector> {
        self.entries.get(&text_hash(text))
    }

    pub fn get_by_hash(&self, hash: &str) -> Option<&EmbeddingVector> {
        self.entries.get(hash)
    }

    /// Embeds `text` unless already present.
    pub fn insert(&mut self, cfg: &HashEmbedderConfig, text: &str) -> Result<&EmbeddingVector, EmbedError> {
        let key = text_hash(text);
        if !self.entries.contains_key(&key) {
            let v = embed_text(cfg, text)?;
            self.entries.insert(key.clone(), v);
        }
        Ok(&self.entries[&key])
    }

    /// SHA-256 over every `(hash, vector bits)` entry in key order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            for x in v.values() {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let io = |e: std::io::Error| EmbedError::Io(e.to_string());
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        for (k, v) in &self.entries {
            let line = TableLine {
                text_hash: k.clone(),
                vector: v.values().to_vec(),
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| EmbedError::Io(e.to_string()))?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let io = |e: std::io::Error| EmbedError::Io(e.to_string());
        let mut entries = BTreeMap::new();
        for line in BufReader::new(File::open(path).map_err(io)?).lines() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TableLine = serde_json::from_str(&line).map_err(|e| EmbedError::Io(e.to_string()))?;
            entries.insert(rec.text_hash, EmbeddingVector(rec.vector));
        }
        Ok(Self {
            config: None,
            entries,
        })
    }
}

/// Embeds every text field of the corpus, one entry per distinct string.
pub fn embed_corpus(cfg: &HashEmbedderConfig, c: &Corpus) -> Result<EmbeddingTable, EmbedError> {
    let mut table = EmbeddingTable {
        config: Some(*cfg),
        entries: BTreeMap::new(),
    };
    let tag = |id: &str| {
        let id = id.to_owned();
        move |e: EmbedError| EmbedError::InRecord {
            id,
            source: Box::new(e),
        }
    };
    for clip in c.clips.values() {
        let texts = std::iter::once(&clip.narration)
            .chain(clip.before.iter())
            .chain(clip.after.iter())
            .chain(clip.sc_cf.iter());
        for t in texts {
            table.insert(cfg, t).map_err(tag(&clip.clip_id))?;
        }
    }
    for video in c.videos.values() {
        for t in std::iter::once(&video.summary).chain(video.counterfactuals()) {
            table.insert(cfg, t).map_err(tag(&video.video_id))?;
        }
    }
    Ok(table)
}
