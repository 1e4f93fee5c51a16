//! Prefix-constrained beam search with prior calibration, and greedy class
//! name decoding.
//!
//! Scores are summed token log-probabilities (no length normalization). At an
//! entity's terminal node the hypothesis competes between extending into a
//! longer entity and emitting the delimiter; the delimiter's calibrated
//! log-probability is part of the finished entity's score.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{check_context, LmBackend, ScoreRequest, TokenDistribution, TokenId};
use crate::trie::{NodeId, PrefixTrie};
use crate::vocab::{EntityId, EntityVocabulary};

/// Prior log-probabilities below this are clamped before calibration, so a
/// token the null context never predicts gets a bounded boost.
pub const PRIOR_FLOOR: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Prior follows the generated tokens: null prompt ∥ generated so far.
    #[default]
    PerStep,
    /// Prior is the null prompt's next-token distribution, reused at every step.
    FirstToken,
}

#[derive(Debug)]
pub struct CalibrationState {
    mu: f64,
    mode: CalibrationMode,
    null_prefix: Vec<TokenId>,
    first_token_prior: OnceLock<TokenDistribution>,
}

impl CalibrationState {
    pub fn new(mu: f64, mode: CalibrationMode, null_prefix: Vec<TokenId>) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidArgument(format!("mu must lie in [0, 1], got {mu}")));
        }
        Ok(Self {
            mu,
            mode,
            null_prefix,
            first_token_prior: OnceLock::new(),
        })
    }

    /// Tokenizes the meaningless prompt into the null context.
    pub fn from_prompt(backend: &dyn LmBackend, calib_prompt: &str, mu: f64, mode: CalibrationMode) -> Result<Self> {
        Self::new(mu, mode, backend.tokenize(calib_prompt, false)?)
    }

    pub fn disabled() -> Self {
        Self::new(0.0, CalibrationMode::PerStep, Vec::new()).expect("zero mu is valid")
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mode(&self) -> CalibrationMode {
        self.mode
    }

    pub fn null_prefix(&self) -> &[TokenId] {
        &self.null_prefix
    }

    pub fn is_active(&self) -> bool {
        self.mu > 0.0
    }

    fn prior_prefix(&self, generated: &[TokenId]) -> Vec<TokenId> {
        let mut p = self.null_prefix.clone();
        if self.mode == CalibrationMode::PerStep {
            p.extend_from_slice(generated);
        }
        p
    }

    fn cached_first_token(&self, backend: &dyn LmBackend) -> Result<&TokenDistribution> {
        if let Some(d) = self.first_token_prior.get() {
            return Ok(d);
        }
        let d = backend.next_token_logprobs(&self.null_prefix)?;
        Ok(self.first_token_prior.get_or_init(|| d))
    }
}

/// Prior distribution for the next token after `generated`.
pub fn compute_prior(backend: &dyn LmBackend, calib: &CalibrationState, generated: &[TokenId]) -> Result<TokenDistribution> {
    match calib.mode {
        CalibrationMode::FirstToken => calib.cached_first_token(backend).cloned(),
        CalibrationMode::PerStep => backend.next_token_logprobs(&calib.prior_prefix(generated)),
    }
}

#[inline]
fn calibrated(logprob: f64, prior: f64, mu: f64) -> f64 {
    if mu == 0.0 {
        logprob
    } else {
        logprob - mu * prior.max(PRIOR_FLOOR)
    }
}

/// `out[t] = logp[t] - mu * prior[t]`; a ranking score, not renormalized.
pub fn calibrate_step(dist: &[f64], prior: &[f64], mu: f64) -> Result<Vec<f64>> {
    if dist.len() != prior.len() {
        return Err(Error::LengthMismatch(dist.len(), prior.len()));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!("mu must lie in [0, 1], got {mu}")));
    }
    Ok(dist.iter().zip(prior).map(|(&p, &q)| calibrated(p, q, mu)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedEntity {
    pub entity: EntityId,
    pub log_score: f64,
    /// Calibrated increment of each entity token plus the closing delimiter.
    pub token_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodeResult {
    /// Distinct entities, best first; ties by surface then id.
    pub entities: Vec<DecodedEntity>,
    pub beam_size_used: usize,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    OutsideEntity,
    InsideEntity,
}

#[derive(Debug, Clone)]
pub struct BeamHypothesis {
    pub generated: Vec<TokenId>,
    pub log_score: f64,
    pub cursor: NodeId,
    token_scores: Vec<f64>,
}

impl BeamHypothesis {
    fn start(root: NodeId) -> Self {
        Self {
            generated: Vec::new(),
            log_score: 0.0,
            cursor: root,
            token_scores: Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        if self.generated.is_empty() {
            Phase::OutsideEntity
        } else {
            Phase::InsideEntity
        }
    }
}

#[derive(Clone, Copy)]
enum Move {
    Extend(NodeId),
    Finish(EntityId),
}

struct Extension {
    score: f64,
    step: f64,
    hyp: usize,
    token: TokenId,
    child: NodeId,
}

/// Nodes whose every entity is excluded.
struct Exclusions<'a> {
    trie: &'a PrefixTrie,
    set: &'a HashSet<EntityId>,
    counts: HashMap<NodeId, u32>,
}

impl<'a> Exclusions<'a> {
    fn new(trie: &'a PrefixTrie, vocab: &EntityVocabulary, set: &'a HashSet<EntityId>) -> Self {
        let mut counts = HashMap::new();
        for &e in set {
            let Some(rec) = vocab.get(e) else { continue };
            let mut node = trie.root();
            *counts.entry(node).or_insert(0) += 1;
            for &t in &rec.tokens {
                match trie.child(node, t) {
                    Some(n) => node = n,
                    None => break,
                }
                *counts.entry(node).or_insert(0) += 1;
            }
        }
        Self { trie, set, counts }
    }

    fn dead(&self, node: NodeId) -> bool {
        self.counts.get(&node).is_some_and(|&c| c >= self.trie.subtree_terminals(node))
    }

    fn excluded(&self, e: EntityId) -> bool {
        self.set.contains(&e)
    }
}

pub fn constrained_beam_search(
    backend: &dyn LmBackend,
    vocab: &EntityVocabulary,
    trie: &PrefixTrie,
    prompt: &str,
    beam: usize,
    calib: &CalibrationState,
    excluded: &HashSet<EntityId>,
) -> Result<DecodeResult> {
    if beam == 0 {
        return Err(Error::InvalidArgument("beam size must be at least 1".into()));
    }
    if prompt.trim().is_empty() {
        return Err(Error::InvalidArgument("empty prompt".into()));
    }
    let prompt_tokens = backend.tokenize(prompt, false)?;
    let delimiter = *backend
        .delimiter_tokens()
        .first()
        .ok_or_else(|| Error::Backend("backend reports no delimiter tokens".into()))?;
    check_context(prompt_tokens.len() + trie.max_depth(), backend.context_limit())?;
    if calib.is_active() && calib.mode == CalibrationMode::PerStep {
        check_context(calib.null_prefix.len() + trie.max_depth(), backend.context_limit())?;
    }

    let exclusions = Exclusions::new(trie, vocab, excluded);
    if exclusions.dead(trie.root()) {
        return Ok(DecodeResult {
            entities: Vec::new(),
            beam_size_used: beam,
            diagnostic: Some("every vocabulary entity is excluded".into()),
        });
    }
    let first_prior = match (calib.is_active(), calib.mode) {
        (true, CalibrationMode::FirstToken) => Some(calib.cached_first_token(backend)?),
        _ => None,
    };

    let mu = calib.mu;
    let mut live = vec![BeamHypothesis::start(trie.root())];
    let mut finished: Vec<DecodedEntity> = Vec::new();
    let mut done: HashSet<EntityId> = HashSet::new();

    while !live.is_empty() {
        let mut ids: Vec<Vec<TokenId>> = Vec::with_capacity(live.len());
        let mut moves: Vec<Vec<Move>> = Vec::with_capacity(live.len());
        for h in &live {
            let next = trie.allowed_next(h.cursor);
            let mut hid = Vec::with_capacity(next.children.len() + 1);
            let mut hmv = Vec::with_capacity(next.children.len() + 1);
            for edge in next.children {
                if !exclusions.dead(edge.child) {
                    hid.push(edge.token);
                    hmv.push(Move::Extend(edge.child));
                }
            }
            if let Some(e) = next.terminal {
                if !exclusions.excluded(e) && !done.contains(&e) {
                    hid.push(delimiter);
                    hmv.push(Move::Finish(e));
                }
            }
            ids.push(hid);
            moves.push(hmv);
        }

        let prefixes: Vec<Vec<TokenId>> = live
            .iter()
            .map(|h| {
                let mut p = Vec::with_capacity(prompt_tokens.len() + h.generated.len());
                p.extend_from_slice(&prompt_tokens);
                p.extend_from_slice(&h.generated);
                p
            })
            .collect();
        let requests: Vec<ScoreRequest<'_>> = prefixes
            .iter()
            .zip(&ids)
            .map(|(p, i)| ScoreRequest { prefix: p, ids: i })
            .collect();
        let scores = backend.restricted_logprobs_batch(&requests)?;

        let priors: Option<Vec<Vec<f64>>> = if !calib.is_active() {
            None
        } else if let Some(d) = first_prior {
            Some(ids.iter().map(|i| d.project(i)).collect())
        } else {
            let null_prefixes: Vec<Vec<TokenId>> = live.iter().map(|h| calib.prior_prefix(&h.generated)).collect();
            let reqs: Vec<ScoreRequest<'_>> = null_prefixes
                .iter()
                .zip(&ids)
                .map(|(p, i)| ScoreRequest { prefix: p, ids: i })
                .collect();
            Some(backend.restricted_logprobs_batch(&reqs)?)
        };

        let mut extensions = Vec::new();
        for (hi, h) in live.iter().enumerate() {
            if scores[hi].len() != ids[hi].len() {
                return Err(Error::LengthMismatch(scores[hi].len(), ids[hi].len()));
            }
            for (j, mv) in moves[hi].iter().enumerate() {
                let prior = priors.as_ref().map_or(0.0, |p| p[hi][j]);
                let step = calibrated(scores[hi][j], prior, mu);
                if step.is_nan() || step == f64::NEG_INFINITY {
                    continue;
                }
                let score = h.log_score + step;
                match *mv {
                    Move::Finish(e) => {
                        if done.insert(e) {
                            let mut token_scores = h.token_scores.clone();
                            token_scores.push(step);
                            finished.push(DecodedEntity {
                                entity: e,
                                log_score: score,
                                token_scores,
                            });
                        }
                    }
                    Move::Extend(child) => extensions.push(Extension {
                        score,
                        step,
                        hyp: hi,
                        token: ids[hi][j],
                        child,
                    }),
                }
            }
        }

        let by_rank = |a: &Extension, b: &Extension| {
            b.score
                .total_cmp(&a.score)
                .then(a.hyp.cmp(&b.hyp))
                .then(a.token.cmp(&b.token))
        };
        if extensions.len() > beam {
            extensions.select_nth_unstable_by(beam - 1, by_rank);
            extensions.truncate(beam);
        }
        extensions.sort_by(by_rank);

        live = extensions
            .iter()
            .map(|x| {
                let parent = &live[x.hyp];
                let mut generated = parent.generated.clone();
                generated.push(x.token);
                let mut token_scores = parent.token_scores.clone();
                token_scores.push(x.step);
                BeamHypothesis {
                    generated,
                    log_score: x.score,
                    cursor: x.child,
                    token_scores,
                }
            })
            .collect();

        // Without calibration every increment is <= 0, so once `beam` entities
        // beat every live hypothesis nothing better can appear.
        if mu == 0.0 && finished.len() >= beam {
            if let Some(best_live) = live.first().map(|h| h.log_score) {
                let mut scores: Vec<f64> = finished.iter().map(|f| f.log_score).collect();
                scores.sort_by(|a, b| b.total_cmp(a));
                if best_live < scores[beam - 1] {
                    break;
                }
            }
        }
    }

    finished.sort_by(|a, b| {
        b.log_score
            .total_cmp(&a.log_score)
            .then_with(|| vocab.surface(a.entity).cmp(vocab.surface(b.entity)))
            .then(a.entity.cmp(&b.entity))
    });
    finished.truncate(beam);
    let diagnostic = finished
        .is_empty()
        .then(|| "no reachable entity under the trie constraint".to_string());
    Ok(DecodeResult {
        entities: finished,
        beam_size_used: beam,
        diagnostic,
    })
}

pub const DEFAULT_CLASS_NAME_TOKENS: usize = 10;

/// Greedy, unconstrained and uncalibrated decoding of a class name. Stops at
/// `.` or a newline, or after `max_tokens`.
pub fn generate_class_name(backend: &dyn LmBackend, prompt: &str, max_tokens: usize) -> Result<String> {
    if max_tokens == 0 {
        return Err(Error::InvalidArgument("max_tokens must be at least 1".into()));
    }
    let mut prefix = backend.tokenize(prompt, false)?;
    let limit = backend.context_limit();
    if prefix.len() + max_tokens > limit {
        let keep = limit.saturating_sub(max_tokens);
        if keep == 0 {
            return Err(Error::ContextOverflow {
                len: prefix.len() + max_tokens,
                limit,
            });
        }
        log::warn!("class name prompt exceeds the context limit; keeping its last {keep} tokens");
        prefix.drain(..prefix.len() - keep);
    }
    let start = prefix.len();
    let mut text = String::new();
    for _ in 0..max_tokens {
        let dist = backend.next_token_logprobs(&prefix)?;
        let Some(tok) = dist.argmax() else { break };
        prefix.push(tok);
        text = backend.detokenize(&prefix[start..])?;
        if let Some(cut) = text.find(['.', '\n']) {
            text.truncate(cut);
            break;
        }
    }
    let name = text.trim();
    if name.is_empty() {
        return Err(Error::ClassNameGeneration);
    }
    Ok(name.to_string())
}
