//! HTTP client for a logits server.
//!
//! Wire protocol (JSON bodies):
//!
//! * `GET /info` -> `{model_id, vocab_size, context_limit, delimiter_ids}`
//! * `POST /tokenize {text, in_continuation}` -> `{token_ids}`
//! * `POST /detokenize {token_ids}` -> `{text}`
//! * `POST /logprobs {prefix_ids, restrict_ids?}` -> `{logprobs}` or `{logprobs_b64}`
//! * `POST /logprobs/batch {requests: [...]}` -> `{results: [...]}`
//!
//! With [`RemoteLmConfig::binary_logprobs`] the client sends
//! `X-Logprob-Encoding: f32le-base64`, and the server may answer with
//! base64-encoded little-endian `f32` vectors instead of JSON arrays.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{check_context, LmBackend, ScoreRequest, TokenDistribution, TokenId};
use crate::error::{Error, Result};

pub const ENCODING_HEADER: &str = "X-Logprob-Encoding";
pub const BINARY_ENCODING: &str = "f32le-base64";

#[derive(Debug, Clone)]
pub struct RemoteLmConfig {
    pub base_url: String,
    pub max_in_flight: usize,
    /// Extra attempts after the first for 503s and transport failures.
    pub retries: u32,
    pub retry_backoff: Duration,
    pub timeout: Duration,
    pub binary_logprobs: bool,
}

impl RemoteLmConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            ..Self::default()
        }
    }
}

impl Default for RemoteLmConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            max_in_flight: 4,
            retries: 3,
            retry_backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
            binary_logprobs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerInfo {
    pub model_id: String,
    pub vocab_size: usize,
    pub context_limit: usize,
    pub delimiter_ids: Vec<TokenId>,
}

#[derive(Serialize)]
struct TokenizeBody<'a> {
    text: &'a str,
    in_continuation: bool,
}

#[derive(Deserialize)]
struct TokenizeReply {
    token_ids: Vec<TokenId>,
}

#[derive(Serialize)]
struct DetokenizeBody<'a> {
    token_ids: &'a [TokenId],
}

#[derive(Deserialize)]
struct DetokenizeReply {
    text: String,
}

#[derive(Serialize)]
struct LogprobsBody<'a> {
    prefix_ids: &'a [TokenId],
    #[serde(skip_serializing_if = "Option::is_none")]
    restrict_ids: Option<&'a [TokenId]>,
}

#[derive(Deserialize)]
struct LogprobsReply {
    #[serde(default)]
    logprobs: Option<Vec<Option<f64>>>,
    #[serde(default)]
    logprobs_b64: Option<String>,
}

#[derive(Serialize)]
struct BatchBody<'a> {
    requests: Vec<LogprobsBody<'a>>,
}

#[derive(Deserialize)]
struct BatchReply {
    results: Vec<LogprobsReply>,
}

/// Counting semaphore bounding concurrent HTTP requests.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteLm {
    cfg: RemoteLmConfig,
    agent: ureq::Agent,
    info: ServerInfo,
    permits: Permits,
    batch_supported: AtomicBool,
}

impl std::fmt::Debug for RemoteLm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteLm")
            .field("base_url", &self.cfg.base_url)
            .field("info", &self.info)
            .finish()
    }
}

// ureq's error type is large; it never leaves this module.
#[allow(clippy::result_large_err)]
impl RemoteLm {
    /// Fetches `/info`; fails with `BackendUnavailable` once retries run out.
    pub fn connect(cfg: RemoteLmConfig) -> Result<Self> {
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
        let mut lm = Self {
            permits: Permits::new(cfg.max_in_flight),
            cfg,
            agent,
            info: ServerInfo {
                model_id: String::new(),
                vocab_size: 0,
                context_limit: 0,
                delimiter_ids: Vec::new(),
            },
            batch_supported: AtomicBool::new(true),
        };
        let info: ServerInfo = lm.call(|a, url| a.get(&format!("{url}/info")).call())?;
        if info.vocab_size == 0 || info.delimiter_ids.is_empty() {
            return Err(Error::Backend(format!("server reported unusable metadata: {info:?}")));
        }
        lm.info = info;
        Ok(lm)
    }

    pub fn info(&self) -> &ServerInfo {
        &self.info
    }

    fn call<T: serde::de::DeserializeOwned>(
        &self,
        send: impl Fn(&ureq::Agent, &str) -> std::result::Result<ureq::Response, ureq::Error>,
    ) -> Result<T> {
        let url = self.cfg.base_url.trim_end_matches('/');
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(self.cfg.retry_backoff * attempt);
            }
            let outcome = {
                let _permit = self.permits.acquire();
                send(&self.agent, url)
            };
            match outcome {
                Ok(resp) => {
                    return resp
                        .into_json::<T>()
                        .map_err(|e| Error::Backend(format!("malformed response: {e}")))
                }
                Err(ureq::Error::Status(413, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    return Err(parse_overflow(&body, self.info.context_limit));
                }
                Err(ureq::Error::Status(503, _)) => last = "server not ready (503)".into(),
                Err(ureq::Error::Status(code, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    return Err(Error::Backend(format!("HTTP {code}: {}", body.trim())));
                }
                Err(ureq::Error::Transport(t)) => last = t.to_string(),
            }
            log::debug!("logits server attempt {} failed: {last}", attempt + 1);
        }
        Err(Error::BackendUnavailable(format!("{}: {last}", self.cfg.base_url)))
    }

    fn post<B: Serialize, T: serde::de::DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let body = serde_json::to_value(body).map_err(|e| Error::Backend(e.to_string()))?;
        self.call(|a, url| {
            let mut req = a.post(&format!("{url}{path}"));
            if self.cfg.binary_logprobs {
                req = req.set(ENCODING_HEADER, BINARY_ENCODING);
            }
            req.send_json(body.clone())
        })
    }

    fn decode_reply(&self, reply: LogprobsReply, expected: usize) -> Result<Vec<f64>> {
        let values: Vec<f64> = match (reply.logprobs, reply.logprobs_b64) {
            (Some(v), _) => v.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect(),
            (None, Some(b)) => decode_f32le(&b)?,
            (None, None) => return Err(Error::Backend("response carries no logprobs".into())),
        };
        if values.len() != expected {
            return Err(Error::LengthMismatch(values.len(), expected));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Backend("server returned non-finite logprobs".into()));
        }
        Ok(values)
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|&&t| t as usize >= self.info.vocab_size) {
            Some(&t) => Err(Error::UnknownTokenId(t)),
            None => Ok(()),
        }
    }
}

fn parse_overflow(body: &str, limit: usize) -> Error {
    #[derive(Deserialize)]
    struct Overflow {
        len: usize,
        limit: usize,
    }
    match serde_json::from_str::<Overflow>(body) {
        Ok(o) => Error::ContextOverflow { len: o.len, limit: o.limit },
        Err(_) => Error::ContextOverflow { len: limit + 1, limit },
    }
}

pub fn encode_f32le(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    B64.encode(bytes)
}

pub fn decode_f32le(text: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(text.trim())
        .map_err(|e| Error::Backend(format!("bad base64 logprobs: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Backend("base64 logprobs not a whole number of f32".into()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

impl LmBackend for RemoteLm {
    fn tokenizer_id(&self) -> String {
        format!("remote/{}", self.info.model_id)
    }

    fn vocab_size(&self) -> usize {
        self.info.vocab_size
    }

    fn context_limit(&self) -> usize {
        self.info.context_limit
    }

    fn tokenize(&self, text: &str, in_continuation: bool) -> Result<Vec<TokenId>> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        let reply: TokenizeReply = self.post("/tokenize", &TokenizeBody { text, in_continuation })?;
        Ok(reply.token_ids)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String> {
        self.check_ids(tokens)?;
        let reply: DetokenizeReply = self.post("/detokenize", &DetokenizeBody { token_ids: tokens })?;
        Ok(reply.text)
    }

    fn delimiter_tokens(&self) -> &[TokenId] {
        &self.info.delimiter_ids
    }

    fn next_token_logprobs(&self, prefix: &[TokenId]) -> Result<TokenDistribution> {
        check_context(prefix.len(), self.info.context_limit)?;
        self.check_ids(prefix)?;
        let reply: LogprobsReply = self.post(
            "/logprobs",
            &LogprobsBody {
                prefix_ids: prefix,
                restrict_ids: None,
            },
        )?;
        Ok(TokenDistribution::new(self.decode_reply(reply, self.info.vocab_size)?))
    }

    fn restricted_logprobs(&self, prefix: &[TokenId], ids: &[TokenId]) -> Result<Vec<f64>> {
        check_context(prefix.len(), self.info.context_limit)?;
        self.check_ids(prefix)?;
        self.check_ids(ids)?;
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let reply: LogprobsReply = self.post(
            "/logprobs",
            &LogprobsBody {
                prefix_ids: prefix,
                restrict_ids: Some(ids),
            },
        )?;
        self.decode_reply(reply, ids.len())
    }

    fn restricted_logprobs_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<Vec<f64>>> {
        for r in requests {
            check_context(r.prefix.len(), self.info.context_limit)?;
            self.check_ids(r.prefix)?;
            self.check_ids(r.ids)?;
        }
        if requests.len() > 1 && self.batch_supported.load(Ordering::Relaxed) {
            let body = BatchBody {
                requests: requests
                    .iter()
                    .map(|r| LogprobsBody {
                        prefix_ids: r.prefix,
                        restrict_ids: Some(r.ids),
                    })
                    .collect(),
            };
            match self.post::<_, BatchReply>("/logprobs/batch", &body) {
                Ok(reply) => {
                    if reply.results.len() != requests.len() {
                        return Err(Error::LengthMismatch(reply.results.len(), requests.len()));
                    }
                    return reply
                        .results
                        .into_iter()
                        .zip(requests)
                        .map(|(res, r)| self.decode_reply(res, r.ids.len()))
                        .collect();
                }
                Err(Error::Backend(msg)) if msg.starts_with("HTTP 404") || msg.starts_with("HTTP 405") => {
                    log::warn!("logits server has no batch endpoint; scoring prefixes one by one");
                    self.batch_supported.store(false, Ordering::Relaxed);
                }
                Err(e) => return Err(e),
            }
        }
        requests
            .iter()
            .map(|r| self.restricted_logprobs(r.prefix, r.ids))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32le_round_trip() {
        let v = [0.0, -1.5, -20.25, f64::NEG_INFINITY];
        assert_eq!(decode_f32le(&encode_f32le(&v)).unwrap(), v.to_vec());
        assert!(decode_f32le("AAA=").is_err());
        assert!(decode_f32le("!!!").is_err());
    }

    #[test]
    fn permits_bound_concurrency() {
        use std::sync::atomic::AtomicUsize;
        let permits = Permits::new(2);
        let active = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = permits.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn unreachable_server_is_unavailable() {
        let cfg = RemoteLmConfig {
            base_url: "http://127.0.0.1:9".into(),
            retries: 1,
            retry_backoff: Duration::from_millis(1),
            timeout: Duration::from_millis(200),
            ..RemoteLmConfig::default()
        };
        assert!(matches!(RemoteLm::connect(cfg), Err(Error::BackendUnavailable(_))));
    }
}
