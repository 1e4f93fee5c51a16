#![allow(dead_code)]

use std::sync::Mutex;

use setexpand::lm::{LmBackend, ScoreRequest, TokenDistribution, TokenId};
use setexpand::{Error, Result};

/// Token 0 is the delimiter `","`; every other token is spelled `t<id>`.
pub const DELIM: TokenId = 0;

/// Deterministic pseudo-random LM: the logits for a prefix come from hashing
/// the whole prefix, so every context gets its own distribution.
pub struct HashLm {
    pub tokens: usize,
    pub seed: u64,
    pub uniform: bool,
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl HashLm {
    pub fn new(tokens: usize, seed: u64) -> Self {
        Self {
            tokens,
            seed,
            uniform: false,
        }
    }

    pub fn uniform(tokens: usize) -> Self {
        Self {
            tokens,
            seed: 0,
            uniform: true,
        }
    }

    pub fn spell(tokens: &[TokenId]) -> String {
        tokens.iter().map(|t| format!("t{t}")).collect::<Vec<_>>().join(" ")
    }
}

impl LmBackend for HashLm {
    fn tokenizer_id(&self) -> String {
        format!("hash-{}-{}-{}", self.tokens, self.seed, self.uniform)
    }

    fn vocab_size(&self) -> usize {
        self.tokens
    }

    fn context_limit(&self) -> usize {
        4096
    }

    fn tokenize(&self, text: &str, _in_continuation: bool) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| {
                if w == "," {
                    return Ok(DELIM);
                }
                w.strip_prefix('t')
                    .and_then(|n| n.parse::<TokenId>().ok())
                    .filter(|&t| (t as usize) < self.tokens)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown word {w:?}")))
            })
            .collect()
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String> {
        Ok(Self::spell(tokens))
    }

    fn delimiter_tokens(&self) -> &[TokenId] {
        &[DELIM]
    }

    fn next_token_logprobs(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        if self.uniform {
            return Ok(TokenDistribution::new(vec![-(self.tokens as f64).ln(); self.tokens]));
        }
        let mut h = mix(self.seed);
        for &t in prefix {
            h = mix(h ^ t as u64);
        }
        let logits: Vec<f64> = (0..self.tokens)
            .map(|j| (mix(h ^ (j as u64).wrapping_mul(0x1000_0000_01b3)) >> 11) as f64 / (1u64 << 53) as f64 * 6.0)
            .collect();
        let z = setexpand::lm::logsumexp(&logits);
        Ok(TokenDistribution::new(logits.into_iter().map(|l| l - z).collect()))
    }
}

/// Records every restricted scoring request before delegating.
pub struct Recorder<'a, B: LmBackend> {
    pub inner: &'a B,
    pub calls: Mutex<Vec<(Vec<TokenId>, Vec<TokenId>)>>,
}

impl<'a, B: LmBackend> Recorder<'a, B> {
    pub fn new(inner: &'a B) -> Self {
        Self {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn take(&self) -> Vec<(Vec<TokenId>, Vec<TokenId>)> {
        std::mem::take(&mut *self.calls.lock().unwrap())
    }
}

impl<B: LmBackend> LmBackend for Recorder<'_, B> {
    fn tokenizer_id(&self) -> String {
        self.inner.tokenizer_id()
    }
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }
    fn context_limit(&self) -> usize {
        self.inner.context_limit()
    }
    fn tokenize(&self, text: &str, c: bool) -> Result<Vec<TokenId>> {
        self.inner.tokenize(text, c)
    }
    fn detokenize(&self, t: &[TokenId]) -> Result<String> {
        self.inner.detokenize(t)
    }
    fn delimiter_tokens(&self) -> &[TokenId] {
        self.inner.delimiter_tokens()
    }
    fn next_token_logprobs(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        self.inner.next_token_logprobs(prefix)
    }
    fn restricted_logprobs(&self, prefix: &[TokenId], ids: &[TokenId]) -> Result<Vec<f64>> {
        self.calls.lock().unwrap().push((prefix.to_vec(), ids.to_vec()));
        self.inner.restricted_logprobs(prefix, ids)
    }
    fn restricted_logprobs_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<Vec<f64>>> {
        requests.iter().map(|r| self.restricted_logprobs(r.prefix, r.ids)).collect()
    }
}
