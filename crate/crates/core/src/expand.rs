//! Iterative expansion: permuted-seed decoding, reciprocal-rank aggregation,
//! seed growth, and the final generative re-ranking.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decode::{
    constrained_beam_search, generate_class_name, CalibrationMode, CalibrationState, DEFAULT_CLASS_NAME_TOKENS,
};
use crate::error::{Error, Result};
use crate::lm::{LmBackend, ScoreRequest};
use crate::prompt::{self, PromptConfig};
use crate::trie::PrefixTrie;
use crate::vocab::{EntityId, EntityVocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    pub iterations: usize,
    pub permutations: usize,
    pub growth_k: usize,
    pub beam: usize,
    pub target_size: usize,
    pub lambda: f64,
    pub rerank_pool: usize,
    pub mu: f64,
    pub calibration: CalibrationMode,
    /// Divide template log-probabilities by the suffix length instead of the
    /// full template length.
    pub normalize_by_suffix: bool,
    /// Regenerate the class name from the grown seed set every iteration.
    pub regenerate_class_name: bool,
    pub class_name_max_tokens: usize,
    pub rng_seed: u64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            permutations: 5,
            growth_k: 5,
            beam: 30,
            target_size: 50,
            lambda: 0.9,
            rerank_pool: 100,
            mu: 0.5,
            calibration: CalibrationMode::PerStep,
            normalize_by_suffix: false,
            regenerate_class_name: false,
            class_name_max_tokens: DEFAULT_CLASS_NAME_TOKENS,
            rng_seed: 0,
        }
    }
}

impl ExpansionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.permutations == 0 {
            return bad("permutations must be at least 1".into());
        }
        if self.beam == 0 {
            return bad("beam must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad(format!("mu must lie in [0, 1], got {}", self.mu));
        }
        if self.rerank_pool < self.target_size {
            return bad(format!(
                "rerank_pool ({}) must be at least target_size ({})",
                self.rerank_pool, self.target_size
            ));
        }
        if self.class_name_max_tokens == 0 {
            return bad("class_name_max_tokens must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExpansionState {
    /// Original seeds first, then grown entities in the order they were added.
    pub seeds: Vec<EntityId>,
    pub original_seed_count: usize,
    pub class_name: Option<String>,
    pub mrr_m1: BTreeMap<EntityId, f64>,
    pub per_iteration_ranks: BTreeMap<(usize, EntityId), usize>,
    pub rng_seed: u64,
}

impl ExpansionState {
    pub fn new(seeds: Vec<EntityId>, rng_seed: u64) -> Self {
        Self {
            original_seed_count: seeds.len(),
            seeds,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn original_seeds(&self) -> &[EntityId] {
        &self.seeds[..self.original_seed_count]
    }

    pub fn m1(&self, e: EntityId) -> f64 {
        self.mrr_m1.get(&e).copied().unwrap_or(0.0)
    }
}

/// Adds `1/r` to each entity's M1, `r` being its 1-based position in `ranked`.
pub fn update_m1(state: &mut ExpansionState, iteration: usize, ranked: &[EntityId]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ranked.len());
    if let Some(&dup) = ranked.iter().find(|&&e| !seen.insert(e)) {
        return Err(Error::DuplicateRank(dup));
    }
    for (i, &e) in ranked.iter().enumerate() {
        let r = i + 1;
        *state.mrr_m1.entry(e).or_insert(0.0) += 1.0 / r as f64;
        state.per_iteration_ranks.insert((iteration, e), r);
    }
    Ok(())
}

/// `L = -(1/N) * sum_{i >= M} log p(y_i | y_<i)` over the template's `N`
/// tokens; the first `M` tokens are conditioning only. With
/// `normalize_by_suffix` the divisor is `N - M`.
pub fn template_logprob(
    backend: &dyn LmBackend,
    template_text: &str,
    conditioning_len: usize,
    normalize_by_suffix: bool,
) -> Result<f64> {
    let tokens = backend.tokenize(template_text, false)?;
    template_logprob_tokens(backend, &tokens, conditioning_len, normalize_by_suffix)
}

pub fn template_logprob_tokens(
    backend: &dyn LmBackend,
    tokens: &[crate::lm::TokenId],
    conditioning_len: usize,
    normalize_by_suffix: bool,
) -> Result<f64> {
    let n = tokens.len();
    if conditioning_len >= n {
        return Err(Error::TemplateTooShort {
            conditioning: conditioning_len,
            total: n,
        });
    }
    let requests: Vec<ScoreRequest<'_>> = (conditioning_len..n)
        .map(|i| ScoreRequest {
            prefix: &tokens[..i],
            ids: &tokens[i..=i],
        })
        .collect();
    let scores = backend.restricted_logprobs_batch(&requests)?;
    let sum: f64 = scores.iter().map(|s| s[0]).sum();
    let divisor = if normalize_by_suffix { n - conditioning_len } else { n };
    Ok(-sum / divisor as f64)
}

/// Reciprocal competition ranks of ascending `l`: equal values share a rank,
/// `rank = 1 + #{j : l[j] < l[i]}`.
pub fn reciprocal_ranks(l: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..l.len()).collect();
    order.sort_by(|&a, &b| l[a].total_cmp(&l[b]));
    let mut out = vec![0.0; l.len()];
    let mut rank = 1;
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 && l[order[pos - 1]].total_cmp(&l[i]).is_lt() {
            rank = pos + 1;
        }
        out[i] = 1.0 / rank as f64;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankInput {
    pub entity: EntityId,
    pub surface: String,
    pub m1: f64,
    /// Mean pair-template L over the original seeds.
    pub pair_l: f64,
    pub isa_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub entity: EntityId,
    pub surface: String,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub score: f64,
}

/// `C = (1 - lambda) * M1 + lambda * (M2 + M3)`, sorted by C descending, then
/// higher M1, then surface, then id.
pub fn fuse_scores(inputs: &[RerankInput], lambda: f64) -> Vec<RankedEntry> {
    let pair: Vec<f64> = inputs.iter().map(|c| c.pair_l).collect();
    let isa: Vec<f64> = inputs.iter().map(|c| c.isa_l).collect();
    let m2 = reciprocal_ranks(&pair);
    let m3 = reciprocal_ranks(&isa);
    let mut out: Vec<RankedEntry> = inputs
        .iter()
        .enumerate()
        .map(|(i, c)| RankedEntry {
            entity: c.entity,
            surface: c.surface.clone(),
            m1: c.m1,
            m2: m2[i],
            m3: m3[i],
            score: (1.0 - lambda) * c.m1 + lambda * (m2[i] + m3[i]),
        })
        .collect();
    sort_entries(&mut out);
    out
}

fn sort_entries(entries: &mut [RankedEntry]) {
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.m1.total_cmp(&a.m1))
            .then_with(|| a.surface.cmp(&b.surface))
            .then(a.entity.cmp(&b.entity))
    });
}

/// Scores both ranking templates for every candidate and fuses with M1.
/// Without a class name every isa score ties, which leaves M3 neutral.
#[allow(clippy::too_many_arguments)]
pub fn generative_rank(
    backend: &dyn LmBackend,
    vocab: &EntityVocabulary,
    candidates: &[(EntityId, f64)],
    seeds: &[EntityId],
    class_name: Option<&str>,
    lambda: f64,
    prompt_cfg: &PromptConfig,
    normalize_by_suffix: bool,
) -> Result<Vec<RankedEntry>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("generative ranking needs at least one seed".into()));
    }
    let mut seen = HashSet::new();
    if let Some(&(dup, _)) = candidates.iter().find(|(e, _)| !seen.insert(*e)) {
        return Err(Error::DuplicateRank(dup));
    }
    let inputs: Vec<RerankInput> = candidates
        .par_iter()
        .map(|&(e, m1)| {
            let surface = vocab.surface(e);
            let cond = backend.tokenize(surface, false)?.len();
            let mut pair_sum = 0.0;
            for &s in seeds {
                let text = prompt::pair_template(surface, vocab.surface(s), prompt_cfg);
                pair_sum += template_logprob(backend, &text, cond, normalize_by_suffix)?;
            }
            let isa_l = match class_name {
                Some(c) => template_logprob(backend, &prompt::isa_template(surface, c), cond, normalize_by_suffix)?,
                None => 0.0,
            };
            Ok(RerankInput {
                entity: e,
                surface: surface.to_string(),
                m1,
                pair_l: pair_sum / seeds.len() as f64,
                isa_l,
            })
        })
        .collect::<Result<_>>()?;
    Ok(fuse_scores(&inputs, lambda))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedExpansion {
    pub query_id: String,
    pub class_name: Option<String>,
    pub seeds: Vec<String>,
    /// Entities appended to the seed set during expansion, in order.
    pub grown: Vec<String>,
    pub iterations_run: usize,
    pub entries: Vec<RankedEntry>,
    pub elapsed: Duration,
}

impl RankedExpansion {
    pub fn surfaces(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.surface.as_str()).collect()
    }

    /// Structured result. Wall time is only included on request so repeated
    /// runs can be compared byte for byte.
    pub fn to_json(&self, include_timing: bool) -> serde_json::Value {
        let mut v = serde_json::json!({
            "query_id": self.query_id,
            "class_name": self.class_name,
            "seeds": self.seeds,
            "grown_seeds": self.grown,
            "iterations_run": self.iterations_run,
            "entities": self.entries,
        });
        if include_timing {
            v["elapsed_ms"] = serde_json::json!(self.elapsed.as_secs_f64() * 1e3);
        }
        v
    }
}

pub struct Expander<'a> {
    pub backend: &'a dyn LmBackend,
    pub vocab: &'a EntityVocabulary,
    pub trie: &'a PrefixTrie,
    pub prompt: &'a PromptConfig,
    pub config: &'a ExpansionConfig,
}

impl<'a> Expander<'a> {
    pub fn new(
        backend: &'a dyn LmBackend,
        vocab: &'a EntityVocabulary,
        trie: &'a PrefixTrie,
        prompt: &'a PromptConfig,
        config: &'a ExpansionConfig,
    ) -> Result<Self> {
        config.validate()?;
        prompt.validate()?;
        if !trie.is_built_from(vocab) {
            return Err(Error::Cache("trie was not built from this vocabulary".into()));
        }
        Ok(Self {
            backend,
            vocab,
            trie,
            prompt,
            config,
        })
    }

    pub fn resolve_seeds<S: AsRef<str>>(&self, seeds: &[S]) -> Result<Vec<EntityId>> {
        let mut ids = Vec::new();
        let mut missing = Vec::new();
        for s in seeds {
            match self.vocab.lookup(s.as_ref()) {
                Some(id) if !ids.contains(&id) => ids.push(id),
                Some(_) => {}
                None => missing.push(s.as_ref().to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::UnresolvedSeeds(missing));
        }
        if ids.is_empty() {
            return Err(Error::InvalidArgument("no seeds given".into()));
        }
        Ok(ids)
    }

    fn class_name_for(&self, seeds: &[EntityId]) -> Result<Option<String>> {
        let surfaces: Vec<&str> = seeds.iter().map(|&s| self.vocab.surface(s)).collect();
        let attempt = if surfaces.len() >= 2 {
            let p = prompt::class_name_prompt(&surfaces, self.prompt)?;
            generate_class_name(self.backend, &p, self.config.class_name_max_tokens)
        } else {
            Err(Error::ClassNameGeneration)
        };
        match attempt {
            Ok(name) => Ok(Some(name)),
            Err(Error::ClassNameGeneration) if self.prompt.allow_class_agnostic_fallback => {
                log::warn!("no class name generated; using the class-agnostic prompt");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Prompt text for one seed ordering, dropping the earliest mentions
    /// while the prompt plus the deepest entity would overflow the context.
    fn fit_prompt(&self, order: &[EntityId], class_name: Option<&str>) -> Result<(String, usize)> {
        let limit = self.backend.context_limit();
        let depth = self.trie.max_depth();
        let mut start = 0;
        loop {
            let surfaces: Vec<&str> = order[start..].iter().map(|&s| self.vocab.surface(s)).collect();
            let text = match class_name {
                Some(c) => prompt::generation_prompt(&surfaces, c, self.prompt)?,
                None => prompt::class_agnostic_prompt(&surfaces, self.prompt)?,
            };
            let len = self.backend.tokenize(&text, false)?.len();
            if len + depth <= limit {
                if start > 0 {
                    log::warn!("prompt exceeds the context limit; dropped the {start} earliest seed mentions");
                }
                return Ok((text, surfaces.len()));
            }
            if start + 1 >= order.len() {
                return Err(Error::ContextOverflow { len: len + depth, limit });
            }
            start += 1;
        }
    }

    pub fn expand<S: AsRef<str>>(&self, query_id: &str, seeds: &[S]) -> Result<RankedExpansion> {
        let started = Instant::now();
        let cfg = self.config;
        let seed_ids = self.resolve_seeds(seeds)?;
        let mut state = ExpansionState::new(seed_ids, cfg.rng_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        state.class_name = self.class_name_for(&state.seeds)?;

        let mut iterations_run = 0;
        for iteration in 0..cfg.iterations {
            if iteration > 0 && cfg.regenerate_class_name {
                state.class_name = self.class_name_for(&state.seeds)?;
            }
            let orders = distinct_permutations(&state.seeds, cfg.permutations, &mut rng);
            let excluded: HashSet<EntityId> = state.seeds.iter().copied().collect();
            let class_name = state.class_name.as_deref();

            let results = orders
                .par_iter()
                .map(|order| {
                    let (text, n_mentions) = self.fit_prompt(order, class_name)?;
                    let calib = CalibrationState::from_prompt(
                        self.backend,
                        &prompt::meaningless_prompt(n_mentions, self.prompt),
                        cfg.mu,
                        cfg.calibration,
                    )?;
                    constrained_beam_search(self.backend, self.vocab, self.trie, &text, cfg.beam, &calib, &excluded)
                })
                .collect::<Result<Vec<_>>>()?;

            let mut best: HashMap<EntityId, f64> = HashMap::new();
            for r in &results {
                for d in &r.entities {
                    best.entry(d.entity)
                        .and_modify(|s| *s = s.max(d.log_score))
                        .or_insert(d.log_score);
                }
            }
            if best.is_empty() {
                log::warn!("iteration {} decoded no entities; stopping early", iteration + 1);
                break;
            }
            let mut pooled: Vec<(EntityId, f64)> = best.into_iter().collect();
            pooled.sort_by(|a, b| {
                b.1.total_cmp(&a.1)
                    .then_with(|| self.vocab.surface(a.0).cmp(self.vocab.surface(b.0)))
                    .then(a.0.cmp(&b.0))
            });
            let ranked: Vec<EntityId> = pooled.iter().map(|p| p.0).collect();
            update_m1(&mut state, iteration, &ranked)?;
            state.seeds.extend(ranked.iter().take(cfg.growth_k));
            iterations_run += 1;
        }

        let original: HashSet<EntityId> = state.original_seeds().iter().copied().collect();
        let mut candidates: Vec<(EntityId, f64)> = state
            .mrr_m1
            .iter()
            .filter(|(e, _)| !original.contains(e))
            .map(|(&e, &m)| (e, m))
            .collect();
        candidates.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.vocab.surface(a.0).cmp(self.vocab.surface(b.0)))
                .then(a.0.cmp(&b.0))
        });
        candidates.truncate(cfg.rerank_pool);

        let entries = generative_rank(
            self.backend,
            self.vocab,
            &candidates,
            state.original_seeds(),
            state.class_name.as_deref(),
            cfg.lambda,
            self.prompt,
            cfg.normalize_by_suffix,
        )?;
        if entries.len() < cfg.target_size {
            log::warn!(
                "query {query_id}: {} entities expanded, fewer than the target of {}",
                entries.len(),
                cfg.target_size
            );
        }
        let surface = |&e: &EntityId| self.vocab.surface(e).to_string();
        Ok(RankedExpansion {
            query_id: query_id.to_string(),
            class_name: state.class_name.clone(),
            seeds: state.original_seeds().iter().map(surface).collect(),
            grown: state.seeds[state.original_seed_count..].iter().map(surface).collect(),
            iterations_run,
            entries,
            elapsed: started.elapsed(),
        })
    }
}

/// Up to `m` distinct orderings of `items`, fewer when `items` has fewer
/// than `m` permutations. Deterministic for a given RNG state.
pub fn distinct_permutations<T: Clone + Eq + std::hash::Hash>(items: &[T], m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let mut available = 1usize;
    for i in 2..=items.len() {
        available = available.saturating_mul(i);
        if available >= m {
            break;
        }
    }
    let want = m.min(available);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(want);
    let mut attempts = 0;
    while out.len() < want && attempts < want * 64 {
        let mut p = items.to_vec();
        p.shuffle(rng);
        if seen.insert(p.clone()) {
            out.push(p);
        }
        attempts += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{LmBackend, TokenDistribution, TokenId};

    #[test]
    fn m1_accumulates_reciprocal_ranks() {
        let mut s = ExpansionState::new(vec![], 0);
        update_m1(&mut s, 0, &[7, 3]).unwrap();
        update_m1(&mut s, 1, &[3, 7]).unwrap();
        assert_eq!(s.m1(7), 1.5);
        assert_eq!(s.m1(3), 1.5);
        assert_eq!(s.m1(9), 0.0);
        assert_eq!(s.per_iteration_ranks[&(1, 7)], 2);
        assert!(matches!(update_m1(&mut s, 2, &[1, 1]), Err(Error::DuplicateRank(1))));
    }

    #[test]
    fn m1_bounded_by_iterations() {
        let mut s = ExpansionState::new(vec![], 0);
        for i in 0..5 {
            update_m1(&mut s, i, &[4, 5, 6]).unwrap();
        }
        assert_eq!(s.m1(4), 5.0);
    }

    #[test]
    fn competition_ranks() {
        assert_eq!(reciprocal_ranks(&[0.3, 0.1, 0.3, 0.2]), vec![1.0 / 3.0, 1.0, 1.0 / 3.0, 0.5]);
        assert_eq!(reciprocal_ranks(&[1.0]), vec![1.0]);
        assert!(reciprocal_ranks(&[]).is_empty());
    }

    fn input(e: EntityId, m1: f64, pair_l: f64, isa_l: f64) -> RerankInput {
        RerankInput {
            entity: e,
            surface: format!("e{e}"),
            m1,
            pair_l,
            isa_l,
        }
    }

    #[test]
    fn single_candidate_gets_full_template_credit() {
        let out = fuse_scores(&[input(0, 1.25, 3.0, 4.0)], 0.9);
        assert_eq!(out[0].m2, 1.0);
        assert_eq!(out[0].m3, 1.0);
        assert!((out[0].score - (0.1 * 1.25 + 1.8)).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_fusion() {
        // pair ranks: a=1, b=3, c=2 ; isa ranks: a=3, b=1, c=2
        let cands = [input(0, 1.0, 0.5, 2.0), input(1, 0.5, 1.5, 0.2), input(2, 2.0, 1.0, 1.0)];
        let out = fuse_scores(&cands, 0.5);
        let c_a = 0.5 * 1.0 + 0.5 * (1.0 + 1.0 / 3.0);
        let c_b = 0.5 * 0.5 + 0.5 * (1.0 / 3.0 + 1.0);
        let c_c = 0.5 * 2.0 + 0.5 * (0.5 + 0.5);
        assert_eq!(out.iter().map(|e| e.entity).collect::<Vec<_>>(), vec![2, 0, 1]);
        assert!((out[0].score - c_c).abs() < 1e-15);
        assert!((out[1].score - c_a).abs() < 1e-15);
        assert!((out[2].score - c_b).abs() < 1e-15);
    }

    #[test]
    fn fusion_tie_break() {
        let out = fuse_scores(&[input(5, 1.0, 1.0, 1.0), input(2, 1.0, 1.0, 1.0), input(9, 2.0, 1.0, 1.0)], 1.0);
        // all C equal: higher M1 first, then surface
        assert_eq!(out.iter().map(|e| e.entity).collect::<Vec<_>>(), vec![9, 2, 5]);
    }

    /// Backend with fixed per-position log-probabilities over a 4-token
    /// vocabulary, for exercising template arithmetic.
    struct Fixed;

    impl LmBackend for Fixed {
        fn tokenizer_id(&self) -> String {
            "fixed".into()
        }
        fn vocab_size(&self) -> usize {
            4
        }
        fn context_limit(&self) -> usize {
            16
        }
        fn tokenize(&self, text: &str, _: bool) -> Result<Vec<TokenId>> {
            Ok(text.split_whitespace().map(|w| w.parse().unwrap()).collect())
        }
        fn detokenize(&self, t: &[TokenId]) -> Result<String> {
            Ok(t.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
        }
        fn delimiter_tokens(&self) -> &[TokenId] {
            &[3]
        }
        fn next_token_logprobs(&self, _: &[TokenId]) -> Result<TokenDistribution> {
            // token 1 has probability 1/e
            let p1 = (-1.0f64).exp();
            let rest = ((1.0 - p1) / 3.0).ln();
            Ok(TokenDistribution::new(vec![rest, -1.0, rest, rest]))
        }
    }

    #[test]
    fn template_arithmetic() {
        let l = template_logprob(&Fixed, "0 1 1", 1, false).unwrap();
        assert!((l - 2.0 / 3.0).abs() < 1e-12);
        let l = template_logprob(&Fixed, "0 1 1", 1, true).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        assert!(matches!(
            template_logprob(&Fixed, "0 1", 2, false),
            Err(Error::TemplateTooShort { conditioning: 2, total: 2 })
        ));
    }

    #[test]
    fn permutations_are_distinct_and_reproducible() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let pa = distinct_permutations(&[1, 2, 3, 4], 5, &mut a);
        assert_eq!(pa, distinct_permutations(&[1, 2, 3, 4], 5, &mut b));
        assert_eq!(pa.len(), 5);
        assert_eq!(pa.iter().collect::<HashSet<_>>().len(), 5);
        assert_eq!(distinct_permutations(&[1, 2], 5, &mut a).len(), 2);
        assert_eq!(distinct_permutations(&[1], 5, &mut a), vec![vec![1]]);
    }

    #[test]
    fn config_validation() {
        assert!(ExpansionConfig::default().validate().is_ok());
        for bad in [
            ExpansionConfig { iterations: 0, ..Default::default() },
            ExpansionConfig { permutations: 0, ..Default::default() },
            ExpansionConfig { lambda: 1.5, ..Default::default() },
            ExpansionConfig { rerank_pool: 10, ..Default::default() },
            ExpansionConfig { mu: -0.1, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
