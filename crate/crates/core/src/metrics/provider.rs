//! Token embedding providers for the semantic metric.
//!
//! Providers are looked up by name in a [`ProviderRegistry`]; the built-in
//! ones are `remote` (HTTP), `lookup` (precomputed vectors on disk), and the
//! deterministic test providers `onehot` and `hashed`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MetricError;
use crate::text::TokenSeq;

pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("unknown embedding provider {0:?}")]
    UnknownProvider(String),
    #[error("provider {provider} needs setting `{setting}`")]
    MissingSetting { provider: &'static str, setting: &'static str },
    #[error("token {0:?} has no embedding")]
    UnknownToken(String),
    #[error("one-hot vocabulary is full ({0} types)")]
    VocabularyFull(usize),
    #[error("embedding for {token:?} has norm {norm}, expected 1")]
    NotUnitNorm { token: String, norm: f64 },
    #[error("embedding for {token:?} has dimension {got}, expected {expected}")]
    Dimension { token: String, got: usize, expected: usize },
    #[error("lookup file {path}: {message}")]
    Lookup { path: PathBuf, message: String },
    #[error("embedding request failed: {0}")]
    Http(String),
    #[error("embedding server returned {got} vectors for {expected} tokens")]
    CountMismatch { got: usize, expected: usize },
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    /// One unit-norm vector per token, in order.
    fn embed(&self, tokens: &TokenSeq) -> Result<Vec<Vec<f64>>, ProviderError>;
}

impl fmt::Debug for dyn EmbeddingProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EmbeddingProvider({}, dim={})", self.name(), self.dimension())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_unit(token: &str, v: &[f64], dim: usize) -> Result<(), ProviderError> {
    if v.len() != dim {
        return Err(ProviderError::Dimension {
            token: token.to_string(),
            got: v.len(),
            expected: dim,
        });
    }
    let n = norm(v);
    if n.is_nan() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(ProviderError::NotUnitNorm {
            token: token.to_string(),
            norm: n,
        });
    }
    Ok(())
}

/// Validates provider output before it is used for scoring.
pub(crate) fn check_embeddings(vectors: &[Vec<f64>], count: usize, dim: usize) -> Result<(), MetricError> {
    if vectors.len() != count {
        return Err(ProviderError::CountMismatch {
            got: vectors.len(),
            expected: count,
        }
        .into());
    }
    for (i, v) in vectors.iter().enumerate() {
        check_unit(&format!("#{i}"), v, dim)?;
    }
    Ok(())
}

/// Basis vector per token type, vocabulary assigned on first sight. Cosine
/// similarity is 1 for equal tokens and 0 otherwise.
pub struct OneHotProvider {
    capacity: usize,
    vocab: Mutex<HashMap<String, usize>>,
}

impl OneHotProvider {
    pub fn with_capacity(capacity: usize) -> Self {
        OneHotProvider {
            capacity: capacity.max(1),
            vocab: Mutex::new(HashMap::new()),
        }
    }

    fn index(&self, token: &str) -> Result<usize, ProviderError> {
        let mut vocab = self.vocab.lock().expect("vocab lock");
        if let Some(&i) = vocab.get(token) {
            return Ok(i);
        }
        let next = vocab.len();
        if next >= self.capacity {
            return Err(ProviderError::VocabularyFull(self.capacity));
        }
        vocab.insert(token.to_string(), next);
        Ok(next)
    }
}

impl EmbeddingProvider for OneHotProvider {
    fn name(&self) -> &str {
        "onehot"
    }

    fn dimension(&self) -> usize {
        self.capacity
    }

    fn embed(&self, tokens: &TokenSeq) -> Result<Vec<Vec<f64>>, ProviderError> {
        tokens
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.capacity];
                v[self.index(t)?] = 1.0;
                Ok(v)
            })
            .collect()
    }
}

/// Pseudo-random unit vector per token type, derived from SHA-256 of the seed
/// and the token. Same seed and token always give the same vector.
pub struct HashedProvider {
    seed: u64,
    dim: usize,
}

impl HashedProvider {
    pub fn new(seed: u64, dim: usize) -> Self {
        HashedProvider { seed, dim: dim.max(1) }
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = norm(&v);
            if n > 1e-9 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }
}

impl EmbeddingProvider for HashedProvider {
    fn name(&self) -> &str {
        "hashed"
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &TokenSeq) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(tokens.iter().map(|t| self.vector(t)).collect())
    }
}

/// One line of a lookup file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LookupRecord {
    pub token: String,
    pub vector: Vec<f64>,
}

/// Precomputed embeddings, one JSONL record per token type. Every vector must
/// already be unit length; the file is rejected otherwise.
pub struct LookupProvider {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl LookupProvider {
    pub fn from_records(records: Vec<LookupRecord>) -> Result<Self, ProviderError> {
        let dim = records.first().map(|r| r.vector.len()).unwrap_or(0);
        if dim == 0 {
            return Err(ProviderError::Lookup {
                path: PathBuf::new(),
                message: "no vectors".into(),
            });
        }
        let mut table = HashMap::with_capacity(records.len());
        for rec in records {
            check_unit(&rec.token, &rec.vector, dim)?;
            table.insert(rec.token, rec.vector);
        }
        Ok(LookupProvider { dim, table })
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let lookup_err = |message: String| ProviderError::Lookup {
            path: path.to_path_buf(),
            message,
        };
        let records: Vec<LookupRecord> = crate::jsonl::read_jsonl(path).map_err(|e| lookup_err(e.to_string()))?;
        LookupProvider::from_records(records).map_err(|e| match e {
            ProviderError::Lookup { message, .. } => lookup_err(message),
            other => lookup_err(other.to_string()),
        })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl EmbeddingProvider for LookupProvider {
    fn name(&self) -> &str {
        "lookup"
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &TokenSeq) -> Result<Vec<Vec<f64>>, ProviderError> {
        tokens
            .iter()
            .map(|t| {
                self.table
                    .get(t)
                    .cloned()
                    .ok_or_else(|| ProviderError::UnknownToken(t.to_string()))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an embedding server: `POST {base}/embed` with
/// `{"tokens": [...]}`, answered by `{"vectors": [[...], ...]}`.
///
/// Each call is an independent request/response exchange, so the provider
/// may be shared across threads.
pub struct RemoteProvider {
    endpoint: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(base_url: &str, dim: usize, timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Http(e.to_string()))?;
        Ok(RemoteProvider {
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            dim,
            client,
        })
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &TokenSeq) -> Result<Vec<Vec<f64>>, ProviderError> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { tokens: &tokens.tokens })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| ProviderError::Http(e.to_string()))?;
        let body: EmbedResponse = response.json().map_err(|e| ProviderError::Http(e.to_string()))?;
        if body.vectors.len() != tokens.len() {
            return Err(ProviderError::CountMismatch {
                got: body.vectors.len(),
                expected: tokens.len(),
            });
        }
        for (t, v) in tokens.iter().zip(&body.vectors) {
            check_unit(t, v, self.dim)?;
        }
        Ok(body.vectors)
    }
}

/// Everything a provider factory may need; unused fields are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSettings {
    pub seed: u64,
    pub dim: usize,
    pub capacity: usize,
    pub lookup_file: Option<PathBuf>,
    pub url: Option<String>,
    pub timeout_secs: u64,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings {
            seed: 0,
            dim: 64,
            capacity: 4096,
            lookup_file: None,
            url: None,
            timeout_secs: 30,
        }
    }
}

pub type ProviderFactory =
    Box<dyn Fn(&ProviderSettings) -> Result<Box<dyn EmbeddingProvider>, ProviderError> + Send + Sync>;

/// Name-keyed provider constructors.
pub struct ProviderRegistry {
    factories: HashMap<String, ProviderFactory>,
}

impl ProviderRegistry {
    pub fn empty() -> Self {
        ProviderRegistry {
            factories: HashMap::new(),
        }
    }

    /// Registry with the built-in providers.
    pub fn builtin() -> Self {
        let mut reg = ProviderRegistry::empty();
        reg.register("onehot", |s| Ok(Box::new(OneHotProvider::with_capacity(s.capacity))));
        reg.register("hashed", |s| Ok(Box::new(HashedProvider::new(s.seed, s.dim))));
        reg.register("lookup", |s| {
            let path = s.lookup_file.as_deref().ok_or(ProviderError::MissingSetting {
                provider: "lookup",
                setting: "lookup_file",
            })?;
            Ok(Box::new(LookupProvider::from_file(path)?))
        });
        reg.register("remote", |s| {
            let url = s.url.as_deref().ok_or(ProviderError::MissingSetting {
                provider: "remote",
                setting: "url",
            })?;
            Ok(Box::new(RemoteProvider::new(url, s.dim, Duration::from_secs(s.timeout_secs))?))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&ProviderSettings) -> Result<Box<dyn EmbeddingProvider>, ProviderError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, settings: &ProviderSettings) -> Result<Box<dyn EmbeddingProvider>, ProviderError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| ProviderError::UnknownProvider(name.to_string()))?;
        factory(settings)
    }

    pub fn names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.factories.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }
}

impl Default for ProviderRegistry {
    fn default() -> Self {
        ProviderRegistry::builtin()
    }
}
