//! Profile embeddings, exact cosine top-N retrieval and a trainable bilinear
//! reranker `f(q, c) = φ(q)ᵀ W φ(c) + bias` fitted with the listwise
//! negative log-likelihood of the gold profile over its candidate pool.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, RemoteBackend};

pub const DEFAULT_DIMENSION: usize = 64;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("text has no tokens")]
    ZeroTokens,
    #[error("similarity undefined for a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("duplicate scene `{0}` in index")]
    DuplicateScene(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector {
            values,
            normalized: false,
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn normalize(mut self) -> Result<Self, RetrievalError> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(RetrievalError::ZeroVector);
        }
        for v in &mut self.values {
            *v /= norm;
        }
        self.normalized = true;
        Ok(self)
    }
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError>;
}

/// Bag-of-tokens embedder: each token is hashed (64-bit FNV-1a) into one of
/// `dimension` buckets and the bucket counts are L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashingEmbedder { dimension }
    }

    pub fn bucket(&self, token: &str) -> usize {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in token.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        (hash % self.dimension as u64) as usize
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_DIMENSION)
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        let mut values = vec![0.0; self.dimension];
        let mut any = false;
        for token in tokenize(text) {
            values[self.bucket(&token)] += 1.0;
            any = true;
        }
        if !any {
            return Err(RetrievalError::ZeroTokens);
        }
        EmbeddingVector::new(values).normalize()
    }
}

/// Embeddings served by a remote model server.
pub struct RemoteEmbedder<'a> {
    pub backend: &'a RemoteBackend,
    pub dimension: usize,
}

impl Embedder for RemoteEmbedder<'_> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        if tokenize(text).next().is_none() {
            return Err(RetrievalError::ZeroTokens);
        }
        let values = self.backend.embed(text, self.dimension)?;
        if values.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dimension,
                found: values.len(),
            });
        }
        EmbeddingVector::new(values).normalize()
    }
}

fn check_dims(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<(), RetrievalError> {
    if u.dimension() != v.dimension() {
        return Err(RetrievalError::DimensionMismatch {
            expected: u.dimension(),
            found: v.dimension(),
        });
    }
    Ok(())
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `u·v / (‖u‖‖v‖)`, clamped to [-1, 1].
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, RetrievalError> {
    check_dims(u, v)?;
    let nu = if u.normalized { 1.0 } else { u.norm() };
    let nv = if v.normalized { 1.0 } else { v.norm() };
    if nu == 0.0 || nv == 0.0 || u.norm() == 0.0 || v.norm() == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok((dot(&u.values, &v.values) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    dimension: usize,
    entries: Vec<(String, EmbeddingVector)>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        VectorIndex {
            dimension,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(
        dimension: usize,
        entries: impl IntoIterator<Item = (String, EmbeddingVector)>,
    ) -> Result<Self, RetrievalError> {
        let mut index = VectorIndex::new(dimension);
        for (id, v) in entries {
            index.insert(id, v)?;
        }
        Ok(index)
    }

    /// Embeds `(scene_id, text)` pairs.
    pub fn build<'a>(
        embedder: &dyn Embedder,
        texts: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, RetrievalError> {
        let mut index = VectorIndex::new(embedder.dimension());
        for (id, text) in texts {
            index.insert(id.to_string(), embedder.embed(text)?)?;
        }
        Ok(index)
    }

    pub fn insert(
        &mut self,
        scene_id: String,
        vector: EmbeddingVector,
    ) -> Result<(), RetrievalError> {
        if vector.dimension() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dimension,
                found: vector.dimension(),
            });
        }
        if self.entries.iter().any(|(id, _)| *id == scene_id) {
            return Err(RetrievalError::DuplicateScene(scene_id));
        }
        self.entries.push((scene_id, vector));
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, EmbeddingVector)] {
        &self.entries
    }

    pub fn get(&self, scene_id: &str) -> Option<&EmbeddingVector> {
        self.entries
            .iter()
            .find(|(id, _)| id == scene_id)
            .map(|(_, v)| v)
    }

    /// One row per scene: `scene_id<TAB>v1 v2 ... vd`, 17 significant digits.
    pub fn write_cache(&self, mut out: impl Write) -> Result<(), RetrievalError> {
        for (id, v) in &self.entries {
            if id.contains(['\t', '\n']) {
                return Err(RetrievalError::Contract(format!(
                    "scene id `{id}` contains a tab or newline"
                )));
            }
            let row: Vec<String> = v.values.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{id}\t{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_cache(input: impl BufRead) -> Result<Self, RetrievalError> {
        let mut index: Option<VectorIndex> = None;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, rest) = line.split_once('\t').ok_or(RetrievalError::Format {
                line: n + 1,
                message: "missing tab separator".into(),
            })?;
            let values = rest
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| RetrievalError::Format {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            let index = index.get_or_insert_with(|| VectorIndex::new(values.len()));
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            let vector = EmbeddingVector {
                normalized: (norm - 1.0).abs() < 1e-9,
                values,
            };
            index.insert(id.to_string(), vector)?;
        }
        index.ok_or(RetrievalError::EmptyIndex)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredScene {
    pub scene_id: String,
    pub score: f64,
}

/// Exact scan: the `n` best scenes by cosine, ties by ascending scene id.
pub fn coarse_retrieve(
    query: &EmbeddingVector,
    index: &VectorIndex,
    n: usize,
) -> Result<Vec<ScoredScene>, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    if query.dimension() != index.dimension() {
        return Err(RetrievalError::DimensionMismatch {
            expected: index.dimension(),
            found: query.dimension(),
        });
    }
    let mut scored = index
        .entries()
        .iter()
        .map(|(id, v)| {
            Ok(ScoredScene {
                scene_id: id.clone(),
                score: cosine(query, v)?,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.scene_id.cmp(&b.scene_id))
    });
    scored.truncate(n);
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.05,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Coarse cut N.
    pub n: usize,
    pub dimension: usize,
    pub training: TrainingConfig,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            n: 10,
            dimension: DEFAULT_DIMENSION,
            training: TrainingConfig::default(),
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.n == 0 {
            return Err(RetrievalError::Parameter("N must be at least 1".into()));
        }
        if self.dimension == 0 {
            return Err(RetrievalError::Parameter(
                "dimension must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Bilinear cross-scorer parameters; `w` is row-major `d × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankerParams {
    pub dimension: usize,
    pub w: Vec<f64>,
    pub bias: f64,
}

impl RerankerParams {
    pub fn zeros(dimension: usize) -> Self {
        RerankerParams {
            dimension,
            w: vec![0.0; dimension * dimension],
            bias: 0.0,
        }
    }

    pub fn identity(dimension: usize) -> Self {
        let mut p = Self::zeros(dimension);
        for i in 0..dimension {
            p.w[i * dimension + i] = 1.0;
        }
        p
    }

    /// Uniform(-0.01, 0.01) entries, zero bias.
    pub fn init(dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RerankerParams {
            dimension,
            w: (0..dimension * dimension)
                .map(|_| rng.random_range(-0.01..0.01))
                .collect(),
            bias: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.w.iter().all(|v| v.is_finite())
    }

    /// `qᵀ W`.
    fn left(&self, q: &[f64]) -> Vec<f64> {
        let d = self.dimension;
        let mut out = vec![0.0; d];
        for (a, &qa) in q.iter().enumerate() {
            if qa == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(&self.w[a * d..(a + 1) * d]) {
                *o += qa * w;
            }
        }
        out
    }

    /// `qᵀ W c + bias`.
    pub fn score_vectors(
        &self,
        q: &EmbeddingVector,
        c: &EmbeddingVector,
    ) -> Result<f64, RetrievalError> {
        for v in [q, c] {
            if v.dimension() != self.dimension {
                return Err(RetrievalError::DimensionMismatch {
                    expected: self.dimension,
                    found: v.dimension(),
                });
            }
        }
        Ok(dot(&self.left(&q.values), &c.values) + self.bias)
    }

    /// Header `dimension <d>`, then `d` rows of `W`, then the bias;
    /// 17 significant digits throughout.
    pub fn write(&self, mut out: impl Write) -> Result<(), RetrievalError> {
        writeln!(out, "dimension {}", self.dimension)?;
        for row in self.w.chunks(self.dimension) {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(" "))?;
        }
        writeln!(out, "{:.16e}", self.bias)?;
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self, RetrievalError> {
        let mut lines = input.lines().enumerate();
        let fmt_err = |line: usize, message: String| RetrievalError::Format { line, message };
        let (_, header) = lines
            .next()
            .ok_or_else(|| fmt_err(1, "empty file".into()))?;
        let header = header?;
        let dimension: usize = header
            .strip_prefix("dimension ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| fmt_err(1, format!("bad header `{header}`")))?;
        let mut w = Vec::with_capacity(dimension * dimension);
        for _ in 0..dimension {
            let (n, line) = lines
                .next()
                .ok_or_else(|| fmt_err(dimension + 1, "truncated matrix".into()))?;
            let row = line?
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| fmt_err(n + 1, e.to_string()))?;
            if row.len() != dimension {
                return Err(fmt_err(
                    n + 1,
                    format!("expected {dimension} values, found {}", row.len()),
                ));
            }
            w.extend(row);
        }
        let (n, line) = lines
            .next()
            .ok_or_else(|| fmt_err(dimension + 2, "missing bias".into()))?;
        let bias = line?
            .trim()
            .parse::<f64>()
            .map_err(|e| fmt_err(n + 1, e.to_string()))?;
        let params = RerankerParams { dimension, w, bias };
        if !params.is_finite() {
            return Err(RetrievalError::Contract(
                "non-finite reranker parameter".into(),
            ));
        }
        Ok(params)
    }
}

pub fn rerank_score(
    params: &RerankerParams,
    embedder: &dyn Embedder,
    query_text: &str,
    candidate_text: &str,
) -> Result<f64, RetrievalError> {
    params.score_vectors(
        &embedder.embed(query_text)?,
        &embedder.embed(candidate_text)?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankTrainingExample {
    pub query_profile_text: String,
    pub candidate_texts: Vec<String>,
    pub gold_text: String,
}

/// An embedded example: the pool is `candidates ∪ {gold}` and `gold` indexes it.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub query: EmbeddingVector,
    pub pool: Vec<EmbeddingVector>,
    pub gold: usize,
}

impl PreparedExample {
    pub fn new(
        query: EmbeddingVector,
        pool: Vec<EmbeddingVector>,
        gold: usize,
    ) -> Result<Self, RetrievalError> {
        if gold >= pool.len() {
            return Err(RetrievalError::Contract(format!(
                "gold index {gold} missing from pool of {}",
                pool.len()
            )));
        }
        if pool.len() < 2 {
            return Err(RetrievalError::Contract(
                "pool needs at least two profiles".into(),
            ));
        }
        Ok(PreparedExample { query, pool, gold })
    }

    pub fn prepare(
        example: &RerankTrainingExample,
        embedder: &dyn Embedder,
    ) -> Result<Self, RetrievalError> {
        let mut texts: Vec<&str> = Vec::new();
        let mut seen = HashSet::new();
        for t in &example.candidate_texts {
            if seen.insert(t.as_str()) {
                texts.push(t);
            }
        }
        let gold = match texts.iter().position(|t| *t == example.gold_text) {
            Some(g) => g,
            None => {
                texts.push(&example.gold_text);
                texts.len() - 1
            }
        };
        let pool = texts
            .iter()
            .map(|t| embedder.embed(t))
            .collect::<Result<Vec<_>, _>>()?;
        PreparedExample::new(embedder.embed(&example.query_profile_text)?, pool, gold)
    }
}

/// `-log softmax(scores)[gold]`.
pub fn listwise_nll(scores: &[f64], gold: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    max + sum.ln() - scores[gold]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w: Vec<f64>,
    pub bias: f64,
}

/// Pool scores without the bias: a shared bias shifts every score in the pool
/// equally and drops out of the softmax.
fn pool_scores(params: &RerankerParams, example: &PreparedExample) -> Vec<f64> {
    let left = params.left(&example.query.values);
    example.pool.iter().map(|c| dot(&left, &c.values)).collect()
}

/// Mean listwise NLL over `examples`.
pub fn mean_loss(params: &RerankerParams, examples: &[PreparedExample]) -> f64 {
    let total: f64 = examples
        .iter()
        .map(|e| listwise_nll(&pool_scores(params, e), e.gold))
        .sum();
    total / examples.len() as f64
}

/// Mean loss and its analytic gradient.
pub fn loss_and_gradient(params: &RerankerParams, examples: &[PreparedExample]) -> (f64, Gradient) {
    let d = params.dimension;
    let scale = 1.0 / examples.len() as f64;
    let mut grad = Gradient {
        w: vec![0.0; d * d],
        bias: 0.0,
    };
    let mut total = 0.0;
    for example in examples {
        let scores = pool_scores(params, example);
        total += listwise_nll(&scores, example.gold);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        // dL/ds_j = p_j - [j == gold]
        let mut weighted = vec![0.0; d];
        for (j, (c, e)) in example.pool.iter().zip(&exps).enumerate() {
            let g = e / z - if j == example.gold { 1.0 } else { 0.0 };
            grad.bias += g * scale;
            for (acc, cv) in weighted.iter_mut().zip(&c.values) {
                *acc += g * cv;
            }
        }
        for (a, &qa) in example.query.values.iter().enumerate() {
            if qa == 0.0 {
                continue;
            }
            for (gw, wv) in grad.w[a * d..(a + 1) * d].iter_mut().zip(&weighted) {
                *gw += scale * qa * wv;
            }
        }
    }
    (total * scale, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub params: RerankerParams,
    /// Mean loss at the start of each epoch.
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
}

/// Full-batch gradient descent from a seeded small-uniform initialization.
pub fn train_reranker(
    examples: &[RerankTrainingExample],
    embedder: &dyn Embedder,
    config: &TrainingConfig,
) -> Result<TrainingOutcome, RetrievalError> {
    let prepared = examples
        .iter()
        .map(|e| PreparedExample::prepare(e, embedder))
        .collect::<Result<Vec<_>, _>>()?;
    train_prepared(&prepared, embedder.dimension(), config)
}

pub fn train_prepared(
    examples: &[PreparedExample],
    dimension: usize,
    config: &TrainingConfig,
) -> Result<TrainingOutcome, RetrievalError> {
    if examples.is_empty() {
        return Err(RetrievalError::Contract("no training examples".into()));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(RetrievalError::Parameter(
            "learning rate must be positive".into(),
        ));
    }
    let mut params = RerankerParams::init(dimension, config.seed);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grad) = loss_and_gradient(&params, examples);
        if !loss.is_finite() {
            return Err(RetrievalError::Divergence { epoch, loss });
        }
        trace.push(loss);
        for (w, g) in params.w.iter_mut().zip(&grad.w) {
            *w -= config.learning_rate * g;
        }
        params.bias -= config.learning_rate * grad.bias;
    }
    let final_loss = mean_loss(&params, examples);
    if !final_loss.is_finite() {
        return Err(RetrievalError::Divergence {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    Ok(TrainingOutcome {
        params,
        loss_trace: trace,
        final_loss,
    })
}

/// Largest element-wise relative error between the analytic gradient and
/// central finite differences with step `h`; the denominator is
/// `max(1e-8, |analytic| + |numeric|)`.
pub fn reranker_grad_check(
    params: &RerankerParams,
    examples: &[PreparedExample],
    h: f64,
) -> Result<f64, RetrievalError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(RetrievalError::Parameter(format!(
            "step h={h} must be positive"
        )));
    }
    let (_, analytic) = loss_and_gradient(params, examples);
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for i in 0..params.w.len() {
        let orig = probe.w[i];
        probe.w[i] = orig + h;
        let up = mean_loss(&probe, examples);
        probe.w[i] = orig - h;
        let down = mean_loss(&probe, examples);
        probe.w[i] = orig;
        worst = worst.max(rel(analytic.w[i], (up - down) / (2.0 * h)));
    }
    probe.bias = params.bias + h;
    let up = mean_loss(&probe, examples);
    probe.bias = params.bias - h;
    let down = mean_loss(&probe, examples);
    worst = worst.max(rel(analytic.bias, (up - down) / (2.0 * h)));
    Ok(worst)
}

/// Training set whose gold profiles all carry a shared marker token that the
/// queries also mention; negatives are drawn from a disjoint vocabulary.
pub fn separable_examples(count: usize, pool_size: usize, seed: u64) -> Vec<RerankTrainingExample> {
    const WORDS: [&str; 16] = [
        "denim", "linen", "wool", "canvas", "leather", "velvet", "cotton", "silk", "suede",
        "tweed", "satin", "nylon", "fleece", "jersey", "corduroy", "chiffon",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut word = || WORDS[rng.random_range(0..WORDS.len())];
    (0..count)
        .map(|_| {
            let negatives = (1..pool_size.max(2))
                .map(|_| format!("{} {}", word(), word()))
                .collect();
            RerankTrainingExample {
                query_profile_text: "marker".to_string(),
                candidate_texts: negatives,
                gold_text: format!("marker marker marker {}", word()),
            }
        })
        .collect()
}

/// Seeded gradient-check fixture: parameters and unit vectors drawn
/// uniformly from [-1, 1) per coordinate.
pub fn grad_check_fixture(
    dimension: usize,
    examples: usize,
    pool_size: usize,
    seed: u64,
) -> Result<(RerankerParams, Vec<PreparedExample>), RetrievalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| {
        EmbeddingVector::new(
            (0..dimension)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .normalize()
    };
    let prepared = (0..examples)
        .map(|_| {
            let query = unit(&mut rng)?;
            let pool = (0..pool_size)
                .map(|_| unit(&mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            let gold = rng.random_range(0..pool_size);
            PreparedExample::new(query, pool, gold)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let params = RerankerParams {
        dimension,
        w: (0..dimension * dimension)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
        bias: rng.random_range(-1.0..1.0),
    };
    Ok((params, prepared))
}
