//! SCU text encoders and pairwise distances.
//!
//! Vectors are L2-normalized by default and compared with euclidean
//! distance. On the unit sphere euclidean distance is `sqrt(2 - 2 cos)`, a
//! monotone function of cosine distance, and the clustering epsilon is an
//! absolute distance in this metric.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cache::{Cache, CacheKey, CacheKind};
use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};
use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { values, norm }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Unit-length copy; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        if self.norm == 0.0 {
            return self.clone();
        }
        Self::new(self.values.iter().map(|v| v / self.norm).collect())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn cosine(&self, other: &Self) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        self.dot(other) / (self.norm * other.norm)
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    fn from_le_bytes(bytes: &[u8], dimension: usize) -> Option<Self> {
        if bytes.len() != dimension * 8 {
            return None;
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        values
            .iter()
            .all(|v| v.is_finite())
            .then(|| Self::new(values))
    }
}

pub trait Encoder: Send + Sync {
    fn model_id(&self) -> &str;
    fn dimension(&self) -> usize;
    /// One raw (not necessarily normalized) vector per text, in order.
    fn encode(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

// 64-bit FNV-1a.
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Signed feature hashing of lowercased character trigrams.
///
/// Each trigram hashes (FNV-1a, seeded) to bucket `h % d` with sign taken
/// from the top bit of `h`. Texts with no trigrams, or whose trigrams cancel
/// exactly, map to the unit vector on bucket `seed % d`.
pub fn offline_hash_encode(text: &str, dimension: usize, seed: u64) -> EmbeddingVector {
    assert!(dimension >= 8, "offline encoder dimension must be >= 8");
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut values = vec![0.0; dimension];
    let mut buf = [0u8; 12];
    for w in chars.windows(3) {
        let mut len = 0;
        for c in w {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let h = fnv1a(seed, &buf[..len]);
        let bucket = (h % dimension as u64) as usize;
        values[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
    }
    let v = EmbeddingVector::new(values);
    if v.norm() == 0.0 {
        let mut unit = vec![0.0; dimension];
        unit[(seed % dimension as u64) as usize] = 1.0;
        return EmbeddingVector::new(unit);
    }
    v.normalized()
}

#[derive(Debug, Clone)]
pub struct OfflineHashEncoder {
    model_id: String,
    dimension: usize,
    seed: u64,
}

impl OfflineHashEncoder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self> {
        if dimension < 8 {
            return Err(Error::Config(format!(
                "offline encoder dimension must be >= 8, got {dimension}"
            )));
        }
        Ok(Self {
            model_id: format!("offline-trigram-hash:seed={seed}"),
            dimension,
            seed,
        })
    }
}

impl Encoder for OfflineHashEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn encode(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts
            .iter()
            .map(|t| offline_hash_encode(t, self.dimension, self.seed))
            .collect())
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedItem {
    index: usize,
    embedding: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedItem>,
    #[serde(default)]
    #[allow(dead_code)]
    model: Option<String>,
    dim: usize,
}

/// Client for the `/embed` bridge service.
pub struct BridgeEncoder {
    url: String,
    model_id: String,
    dimension: usize,
    batch_size: usize,
    client: JsonClient,
}

impl BridgeEncoder {
    pub fn new(
        endpoint: &str,
        model_id: &str,
        dimension: usize,
        batch_size: usize,
        retry: RetryPolicy,
    ) -> Result<Self> {
        if dimension == 0 || batch_size == 0 {
            return Err(Error::Config("dimension and batch size must be > 0".into()));
        }
        Ok(Self {
            url: format!("{}/embed", endpoint.trim_end_matches('/')),
            model_id: model_id.to_string(),
            dimension,
            batch_size,
            client: JsonClient::new(retry, None, Duration::from_secs(300))?,
        })
    }

    fn encode_chunk(&self, chunk: &[String]) -> Result<Vec<EmbeddingVector>> {
        let resp: EmbedResponse = self.client.post(
            &self.url,
            &EmbedRequest {
                model: &self.model_id,
                input: chunk,
            },
        )?;
        decode_embed_response(resp, chunk.len(), self.dimension)
    }
}

fn decode_embed_response(
    resp: EmbedResponse,
    n: usize,
    dimension: usize,
) -> Result<Vec<EmbeddingVector>> {
    if resp.dim != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            actual: resp.dim,
        });
    }
    if resp.data.len() != n {
        return Err(Error::Encoder(format!(
            "bridge returned {} embeddings for {n} inputs",
            resp.data.len()
        )));
    }
    let mut slots: Vec<Option<EmbeddingVector>> = vec![None; n];
    for item in resp.data {
        if item.embedding.len() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                actual: item.embedding.len(),
            });
        }
        let slot = slots.get_mut(item.index).ok_or_else(|| {
            Error::Encoder(format!("embedding index {} out of range", item.index))
        })?;
        if slot.is_some() {
            return Err(Error::Encoder(format!(
                "duplicate embedding index {}",
                item.index
            )));
        }
        *slot = Some(EmbeddingVector::new(item.embedding));
    }
    // n entries, all distinct and in range, so every slot is filled.
    Ok(slots.into_iter().map(Option::unwrap).collect())
}

impl Encoder for BridgeEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn encode(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            out.extend(self.encode_chunk(chunk)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderBackend {
    BridgeHttp { endpoint: String },
    OfflineHash { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub backend: EncoderBackend,
    pub model_id: String,
    pub dimension: usize,
    pub normalize: bool,
    pub batch_size: usize,
    pub retry: RetryPolicy,
}

impl EncoderConfig {
    pub fn offline(dimension: usize, seed: u64) -> Self {
        Self {
            backend: EncoderBackend::OfflineHash { seed },
            model_id: format!("offline-trigram-hash:seed={seed}"),
            dimension,
            normalize: true,
            batch_size: 64,
            retry: RetryPolicy::default(),
        }
    }

    pub fn bridge(endpoint: impl Into<String>) -> Self {
        Self {
            backend: EncoderBackend::BridgeHttp {
                endpoint: endpoint.into(),
            },
            model_id: "sentence-transformers/all-mpnet-base-v2".into(),
            dimension: 768,
            normalize: true,
            batch_size: 64,
            retry: RetryPolicy::default(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Encoder>> {
        if self.dimension == 0 {
            return Err(Error::Config("encoder dimension must be > 0".into()));
        }
        Ok(match &self.backend {
            EncoderBackend::OfflineHash { seed } => {
                Box::new(OfflineHashEncoder::new(self.dimension, *seed)?)
            }
            EncoderBackend::BridgeHttp { endpoint } => Box::new(BridgeEncoder::new(
                endpoint,
                &self.model_id,
                self.dimension,
                self.batch_size,
                self.retry.clone(),
            )?),
        })
    }
}

fn embedding_key(model_id: &str, dimension: usize, text: &str) -> CacheKey {
    let mut payload = (dimension as u64).to_le_bytes().to_vec();
    payload.extend_from_slice(text.as_bytes());
    CacheKey::new(CacheKind::Embedding, model_id, &payload)
}

/// Encodes `texts`, consulting and filling the per-text cache, and
/// normalizes each vector when `normalize` is set.
pub fn encode_batch(
    texts: &[String],
    encoder: &dyn Encoder,
    normalize: bool,
    cache: Option<&Cache>,
) -> Result<Vec<EmbeddingVector>> {
    let dim = encoder.dimension();
    let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
    let mut missing = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        if text.is_empty() {
            return Err(Error::Encoder(format!("input {i} is an empty string")));
        }
        let hit = match cache {
            Some(c) => c.get_decoded(&embedding_key(encoder.model_id(), dim, text), |b| {
                EmbeddingVector::from_le_bytes(b, dim)
            })?,
            None => None,
        };
        match hit {
            Some(v) => out[i] = Some(v),
            None => missing.push(i),
        }
    }
    if !missing.is_empty() {
        let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
        let fresh = encoder.encode(&batch)?;
        if fresh.len() != batch.len() {
            return Err(Error::Encoder(format!(
                "encoder returned {} vectors for {} texts",
                fresh.len(),
                batch.len()
            )));
        }
        for (&i, v) in missing.iter().zip(fresh) {
            if v.dimension() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.dimension(),
                });
            }
            if let Some(c) = cache {
                c.put(
                    &embedding_key(encoder.model_id(), dim, &texts[i]),
                    &v.to_le_bytes(),
                )?;
            }
            out[i] = Some(v);
        }
    }
    Ok(out
        .into_iter()
        .map(|v| {
            let v = v.expect("every slot filled");
            if normalize {
                v.normalized()
            } else {
                v
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

pub fn pairwise_distances(vectors: &[EmbeddingVector], metric: Metric) -> Result<SquareMatrix> {
    if let Some(first) = vectors.first() {
        for v in vectors {
            if v.dimension() != first.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: first.dimension(),
                    actual: v.dimension(),
                });
            }
        }
    }
    Ok(SquareMatrix::symmetric_from_fn(vectors.len(), |i, j| {
        let (a, b) = (&vectors[i], &vectors[j]);
        match metric {
            Metric::Euclidean => a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                if a.norm == 0.0 || b.norm == 0.0 {
                    1.0
                } else {
                    (1.0 - a.cosine(b)).max(0.0)
                }
            }
        }
    }))
}
