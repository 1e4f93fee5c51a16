//! Deterministic add-k n-gram model used as an in-process backend.
//!
//! Tokens are whitespace-separated words; the punctuation characters in
//! [`PUNCTUATION`] always form their own tokens so that the entity delimiter
//! `", "` and the sentence terminator are single tokens.
//!
//! Scoring uses the longest context suffix (at most `order - 1` tokens) that
//! was observed during training and applies add-k smoothing over the full
//! token inventory there:
//!
//! ```text
//! P(w | ctx) = (count(ctx, w) + k) / (count(ctx) + k * |V|)
//! ```
//!
//! Falling back to shorter contexts keeps the distribution informative after
//! unseen contexts (the calibration prompt is one), while every distribution
//! stays exactly normalized.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_context, LmBackend, TokenDistribution, TokenId};
use crate::error::{Error, Result};

pub const UNKNOWN: &str = "<unk>";
pub const PUNCTUATION: [char; 6] = [',', '.', ':', ';', '!', '?'];

const FORMAT_TAG: &str = "setexpand-toy-lm";
const FORMAT_VERSION: u32 = 1;
const DEFAULT_CONTEXT_LIMIT: usize = 2048;

#[derive(Debug, Clone)]
struct ContextCounts {
    total: u64,
    // sorted by token id
    next: Vec<(TokenId, u64)>,
}

#[derive(Debug, Clone)]
pub struct ToyLm {
    order: usize,
    smoothing: f64,
    context_limit: usize,
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    contexts: HashMap<Box<[TokenId]>, ContextCounts>,
    delimiter: Vec<TokenId>,
    tokenizer_id: String,
}

fn is_punctuation(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

/// Splits text into word and punctuation pieces.
pub(crate) fn split_words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut start = 0;
        for (i, c) in chunk.char_indices() {
            if is_punctuation(c) {
                if start < i {
                    out.push(&chunk[start..i]);
                }
                out.push(&chunk[i..i + c.len_utf8()]);
                start = i + c.len_utf8();
            }
        }
        if start < chunk.len() {
            out.push(&chunk[start..]);
        }
    }
    out
}

struct Inventory {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Inventory {
    fn new() -> Self {
        let mut inv = Inventory {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        inv.intern(UNKNOWN);
        for p in PUNCTUATION {
            inv.intern(&p.to_string());
        }
        inv
    }

    fn intern(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(word.to_string());
        self.index.insert(word.to_string(), id);
        id
    }
}

impl ToyLm {
    pub fn train(corpus: &str, order: usize, smoothing: f64) -> Result<Self> {
        Self::train_with_vocabulary(corpus, std::iter::empty::<&str>(), order, smoothing)
    }

    /// Trains on `corpus`; `extra` words join the token inventory even if the
    /// corpus never uses them (they only receive smoothing mass).
    pub fn train_with_vocabulary<'a, I>(
        corpus: &str,
        extra: I,
        order: usize,
        smoothing: f64,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if order < 1 {
            return Err(Error::InvalidArgument("n-gram order must be at least 1".into()));
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must be a finite non-negative number, got {smoothing}"
            )));
        }
        let words = split_words(corpus);
        if words.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut inv = Inventory::new();
        let stream: Vec<TokenId> = words.iter().map(|w| inv.intern(w)).collect();
        for word in extra {
            for piece in split_words(word) {
                inv.intern(piece);
            }
        }

        let mut raw: HashMap<Box<[TokenId]>, HashMap<TokenId, u64>> = HashMap::new();
        for (i, &tok) in stream.iter().enumerate() {
            for len in 0..order.min(i + 1) {
                let ctx: Box<[TokenId]> = stream[i - len..i].into();
                *raw.entry(ctx).or_default().entry(tok).or_insert(0) += 1;
            }
        }
        let contexts = raw
            .into_iter()
            .map(|(ctx, next)| {
                let mut next: Vec<(TokenId, u64)> = next.into_iter().collect();
                next.sort_unstable();
                let total = next.iter().map(|&(_, c)| c).sum();
                (ctx, ContextCounts { total, next })
            })
            .collect();

        Ok(Self::assemble(
            order,
            smoothing,
            DEFAULT_CONTEXT_LIMIT,
            inv.tokens,
            inv.index,
            contexts,
        ))
    }

    fn assemble(
        order: usize,
        smoothing: f64,
        context_limit: usize,
        tokens: Vec<String>,
        index: HashMap<String, TokenId>,
        contexts: HashMap<Box<[TokenId]>, ContextCounts>,
    ) -> Self {
        let mut hasher = Sha256::new();
        for t in &tokens {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        let delimiter = vec![index[","]];
        ToyLm {
            order,
            smoothing,
            context_limit,
            tokens,
            index,
            contexts,
            delimiter,
            tokenizer_id: format!("toy-ngram/{hex}"),
        }
    }

    pub fn with_context_limit(mut self, limit: usize) -> Self {
        self.context_limit = limit;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn token_text(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn token_id(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    /// Raw count of `next` after exactly `context` (no backoff).
    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        self.contexts
            .get(context)
            .and_then(|c| c.next.binary_search_by_key(&next, |&(t, _)| t).ok().map(|i| c.next[i].1))
            .unwrap_or(0)
    }

    fn lookup_context(&self, prefix: &[TokenId]) -> &ContextCounts {
        let max_len = (self.order - 1).min(prefix.len());
        for len in (0..=max_len).rev() {
            if let Some(c) = self.contexts.get(&prefix[prefix.len() - len..]) {
                if c.total > 0 {
                    return c;
                }
            }
        }
        // the empty context always exists for a non-empty corpus
        &self.contexts[&[][..]]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file()).map_err(|e| Error::ModelFormat(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
        Self::from_file(file)
    }

    fn to_file(&self) -> ModelFile {
        let mut contexts: Vec<ContextEntry> = self
            .contexts
            .iter()
            .map(|(ctx, c)| ContextEntry {
                context: ctx.to_vec(),
                next: c.next.clone(),
            })
            .collect();
        contexts.sort_by(|a, b| a.context.cmp(&b.context));
        ModelFile {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            order: self.order,
            smoothing: self.smoothing,
            context_limit: self.context_limit,
            tokens: self.tokens.clone(),
            contexts,
        }
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.format != FORMAT_TAG {
            return Err(Error::ModelFormat(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        if file.order < 1 || file.tokens.first().map(String::as_str) != Some(UNKNOWN) {
            return Err(Error::ModelFormat("corrupt header".into()));
        }
        let n = file.tokens.len() as TokenId;
        let index: HashMap<String, TokenId> = file
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        if !index.contains_key(",") {
            return Err(Error::ModelFormat("token inventory lacks the delimiter".into()));
        }
        let mut contexts = HashMap::with_capacity(file.contexts.len());
        for entry in file.contexts {
            if entry.context.iter().chain(entry.next.iter().map(|(t, _)| t)).any(|&t| t >= n) {
                return Err(Error::ModelFormat("token id out of range".into()));
            }
            let total = entry.next.iter().map(|&(_, c)| c).sum();
            contexts.insert(
                entry.context.into_boxed_slice(),
                ContextCounts {
                    total,
                    next: entry.next,
                },
            );
        }
        if !contexts.contains_key(&[][..]) {
            return Err(Error::ModelFormat("missing unigram table".into()));
        }
        Ok(Self::assemble(
            file.order,
            file.smoothing,
            file.context_limit,
            file.tokens,
            index,
            contexts,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    smoothing: f64,
    context_limit: usize,
    tokens: Vec<String>,
    contexts: Vec<ContextEntry>,
}

#[derive(Serialize, Deserialize)]
struct ContextEntry {
    context: Vec<TokenId>,
    next: Vec<(TokenId, u64)>,
}

impl LmBackend for ToyLm {
    fn tokenizer_id(&self) -> String {
        self.tokenizer_id.clone()
    }

    fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    fn context_limit(&self) -> usize {
        self.context_limit
    }

    fn tokenize(&self, text: &str, _in_continuation: bool) -> Result<Vec<TokenId>> {
        Ok(split_words(text)
            .into_iter()
            .map(|w| self.index.get(w).copied().unwrap_or(0))
            .collect())
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String> {
        let mut out = String::new();
        for &t in tokens {
            let word = self.token_text(t).ok_or(Error::UnknownTokenId(t))?;
            let punct = word.chars().count() == 1 && word.chars().all(is_punctuation);
            if !punct && !out.is_empty() {
                out.push(' ');
            }
            out.push_str(word);
        }
        Ok(out)
    }

    fn delimiter_tokens(&self) -> &[TokenId] {
        &self.delimiter
    }

    fn unknown_token(&self) -> Option<TokenId> {
        Some(0)
    }

    /// Always materializes the full distribution, like a forward pass of a
    /// neural model would.
    fn next_token_logprobs(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        check_context(prefix.len(), self.context_limit)?;
        let ctx = self.lookup_context(prefix);
        let vocab = self.tokens.len() as f64;
        let denom = (ctx.total as f64 + self.smoothing * vocab).ln();
        let floor = self.smoothing.ln() - denom;
        let mut logprobs = vec![floor; self.tokens.len()];
        for &(tok, c) in &ctx.next {
            logprobs[tok as usize] = (c as f64 + self.smoothing).ln() - denom;
        }
        Ok(TokenDistribution::new(logprobs))
    }
}
