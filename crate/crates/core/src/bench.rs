//! Planted-class fixtures and the vocabulary-size timing benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::Query;
use crate::expand::{ExpansionConfig, Expander};
use crate::lm::synthetic::{self, ClassSpec};
use crate::lm::{LmBackend, ToyLm};
use crate::prompt::PromptConfig;
use crate::trie::PrefixTrie;
use crate::vocab::EntityVocabulary;

/// A toy LM trained on a planted-class corpus, with queries over its classes.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub classes: Vec<ClassSpec>,
    pub corpus: String,
    pub lm: ToyLm,
    pub queries: Vec<Query>,
}

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub classes: usize,
    pub members_per_class: usize,
    pub queries_per_class: usize,
    pub seeds_per_query: usize,
    pub order: usize,
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            members_per_class: 30,
            queries_per_class: 5,
            seeds_per_query: 3,
            order: 3,
            smoothing: 0.1,
            seed: 42,
        }
    }
}

impl SyntheticWorld {
    /// The LM's inventory also carries every distractor syllable, so the same
    /// model serves vocabularies of any size.
    pub fn build(cfg: &WorldConfig) -> Result<Self> {
        let classes = synthetic::planted_classes(cfg.classes, cfg.members_per_class, cfg.seed);
        let corpus = synthetic::generate_synthetic_corpus(&classes, cfg.seed.wrapping_add(1))?;
        let syllables = synthetic::syllables();
        let lm = ToyLm::train_with_vocabulary(&corpus, syllables.iter().map(String::as_str), cfg.order, cfg.smoothing)?;
        let queries = synthetic::planted_queries(
            &classes,
            cfg.queries_per_class,
            cfg.seeds_per_query,
            cfg.seed.wrapping_add(2),
        );
        Ok(Self {
            classes,
            corpus,
            lm,
            queries,
        })
    }

    pub fn members(&self) -> Vec<String> {
        self.classes.iter().flat_map(|c| c.members.iter().cloned()).collect()
    }

    /// All planted members followed by distractors, `size` entries in total.
    pub fn vocabulary_surfaces(&self, size: usize, seed: u64) -> Result<Vec<String>> {
        let mut out = self.members();
        if size < out.len() {
            return Err(Error::InvalidArgument(format!(
                "vocabulary size {size} is smaller than the {} planted members",
                out.len()
            )));
        }
        out.extend(synthetic::distractor_entities(size - out.len(), seed));
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub vocab_size: usize,
    pub trie_nodes: usize,
    pub trie_build_ms: f64,
    pub queries: usize,
    pub total_ms: f64,
    pub per_query_ms: f64,
}

/// For each size: tokenize a vocabulary, build its trie, then expand every
/// query one after another and record wall time.
pub fn run_benchmark(
    backend: &dyn LmBackend,
    world: &SyntheticWorld,
    sizes: &[usize],
    expansion: &ExpansionConfig,
    prompt: &PromptConfig,
    distractor_seed: u64,
) -> Result<Vec<BenchRow>> {
    if world.queries.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one query".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let surfaces = world.vocabulary_surfaces(size, distractor_seed)?;
        let vocab = EntityVocabulary::from_surfaces(&surfaces, backend)?;
        let t = Instant::now();
        let trie = PrefixTrie::build(&vocab)?;
        let trie_build_ms = t.elapsed().as_secs_f64() * 1e3;
        let expander = Expander::new(backend, &vocab, &trie, prompt, expansion)?;
        let t = Instant::now();
        for q in &world.queries {
            expander.expand(&q.id, &q.seeds)?;
        }
        let total_ms = t.elapsed().as_secs_f64() * 1e3;
        log::info!("benchmark |V|={size}: {total_ms:.1} ms for {} queries", world.queries.len());
        rows.push(BenchRow {
            vocab_size: vocab.len(),
            trie_nodes: trie.node_count(),
            trie_build_ms,
            queries: world.queries.len(),
            total_ms,
            per_query_ms: total_ms / world.queries.len() as f64,
        });
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("vocab_size,trie_nodes,trie_build_ms,queries,total_ms,per_query_ms\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.3},{},{:.3},{:.3}",
            r.vocab_size, r.trie_nodes, r.trie_build_ms, r.queries, r.total_ms, r.per_query_ms
        );
    }
    s
}

pub fn rows_to_table(rows: &[BenchRow]) -> String {
    let mut s = format!(
        "{:>10} {:>10} {:>12} {:>8} {:>12} {:>14}\n",
        "|V|", "nodes", "trie ms", "queries", "total ms", "per query ms"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>10} {:>10} {:>12.1} {:>8} {:>12.1} {:>14.1}",
            r.vocab_size, r.trie_nodes, r.trie_build_ms, r.queries, r.total_ms, r.per_query_ms
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_world() -> SyntheticWorld {
        SyntheticWorld::build(&WorldConfig {
            classes: 2,
            members_per_class: 8,
            queries_per_class: 1,
            ..WorldConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn vocabulary_sizes() {
        let w = small_world();
        assert_eq!(w.vocabulary_surfaces(16, 1).unwrap().len(), 16);
        assert_eq!(w.vocabulary_surfaces(200, 1).unwrap().len(), 200);
        assert!(w.vocabulary_surfaces(3, 1).is_err());
    }

    #[test]
    fn single_size_gives_one_row() {
        let w = small_world();
        let cfg = ExpansionConfig {
            iterations: 1,
            permutations: 1,
            beam: 4,
            target_size: 4,
            rerank_pool: 8,
            ..ExpansionConfig::default()
        };
        let rows = run_benchmark(&w.lm, &w, &[100], &cfg, &PromptConfig::default(), 3).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].vocab_size, 100);
        let csv = rows_to_csv(&rows);
        assert_eq!(csv.lines().count(), 2);
        assert!(rows_to_table(&rows).contains("per query"));
    }
}
