//! Autoregressive scoring contract.
//!
//! A backend maps a token prefix to the log-probability distribution of the
//! next token. Everything downstream (trie masking, calibration, template
//! scoring) works in log space on top of this one call.

mod remote;
pub mod synthetic;
mod toy;

pub use remote::{decode_f32le, encode_f32le, RemoteLm, RemoteLmConfig, ServerInfo, BINARY_ENCODING, ENCODING_HEADER};
pub use toy::ToyLm;

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Log-probabilities indexed by token id. Entries are finite or `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    logprobs: Vec<f64>,
}

impl TokenDistribution {
    pub fn new(logprobs: Vec<f64>) -> Self {
        Self { logprobs }
    }

    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }

    pub fn get(&self, token: TokenId) -> f64 {
        self.logprobs
            .get(token as usize)
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.logprobs
    }

    pub fn logsumexp(&self) -> f64 {
        logsumexp(&self.logprobs)
    }

    /// Highest-probability token; ties go to the lowest id.
    pub fn argmax(&self) -> Option<TokenId> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &lp) in self.logprobs.iter().enumerate() {
            if lp.is_nan() {
                continue;
            }
            match best {
                Some((_, b)) if lp <= b => {}
                _ => best = Some((i, lp)),
            }
        }
        best.map(|(i, _)| i as TokenId)
    }

    /// Picks the entries for `ids`, in order.
    pub fn project(&self, ids: &[TokenId]) -> Vec<f64> {
        ids.iter().map(|&t| self.get(t)).collect()
    }
}

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// One element of a batched restricted scoring call.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub prefix: &'a [TokenId],
    pub ids: &'a [TokenId],
}

/// The scoring contract every backend implements.
///
/// `next_token_logprobs` must be a pure function of the prefix. The
/// restricted variants exist so remote backends can avoid shipping full
/// vocabulary vectors; their values must equal the projection of the full
/// distribution.
pub trait LmBackend: Send + Sync {
    /// Identifies the tokenizer; used to key trie caches.
    fn tokenizer_id(&self) -> String;

    fn vocab_size(&self) -> usize;

    fn context_limit(&self) -> usize;

    fn tokenize(&self, text: &str, in_continuation: bool) -> Result<Vec<TokenId>>;

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String>;

    /// Tokens of the entity delimiter `", "` in continuation context.
    fn delimiter_tokens(&self) -> &[TokenId];

    /// Token the tokenizer falls back to for out-of-vocabulary input, if any.
    fn unknown_token(&self) -> Option<TokenId> {
        None
    }

    fn next_token_logprobs(&self, prefix: &[TokenId]) -> Result<TokenDistribution>;

    fn restricted_logprobs(&self, prefix: &[TokenId], ids: &[TokenId]) -> Result<Vec<f64>> {
        Ok(self.next_token_logprobs(prefix)?.project(ids))
    }

    fn restricted_logprobs_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<Vec<f64>>> {
        requests
            .iter()
            .map(|r| self.restricted_logprobs(r.prefix, r.ids))
            .collect()
    }
}

pub(crate) fn check_context(prefix_len: usize, limit: usize) -> Result<()> {
    if prefix_len > limit {
        return Err(Error::ContextOverflow {
            len: prefix_len,
            limit,
        });
    }
    Ok(())
}

impl<T: LmBackend + ?Sized> LmBackend for &T {
    fn tokenizer_id(&self) -> String {
        (**self).tokenizer_id()
    }
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn context_limit(&self) -> usize {
        (**self).context_limit()
    }
    fn tokenize(&self, text: &str, in_continuation: bool) -> Result<Vec<TokenId>> {
        (**self).tokenize(text, in_continuation)
    }
    fn detokenize(&self, tokens: &[TokenId]) -> Result<String> {
        (**self).detokenize(tokens)
    }
    fn delimiter_tokens(&self) -> &[TokenId] {
        (**self).delimiter_tokens()
    }
    fn unknown_token(&self) -> Option<TokenId> {
        (**self).unknown_token()
    }
    fn next_token_logprobs(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        (**self).next_token_logprobs(prefix)
    }
    fn restricted_logprobs(&self, prefix: &[TokenId], ids: &[TokenId]) -> Result<Vec<f64>> {
        (**self).restricted_logprobs(prefix, ids)
    }
    fn restricted_logprobs_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<Vec<f64>>> {
        (**self).restricted_logprobs_batch(requests)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_of_normalized_vector_is_zero() {
        let v = [0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()];
        assert!(logsumexp(&v).abs() < 1e-12);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn argmax_breaks_ties_toward_lowest_id() {
        let d = TokenDistribution::new(vec![-2.0, -1.0, -1.0, f64::NEG_INFINITY]);
        assert_eq!(d.argmax(), Some(1));
        assert_eq!(d.project(&[3, 0, 9]), vec![f64::NEG_INFINITY, -2.0, f64::NEG_INFINITY]);
    }
}
