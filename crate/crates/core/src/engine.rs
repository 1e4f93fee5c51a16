//! An owned bundle of backend, vocabulary, trie and configuration.

use crate::error::{Error, Result};
use crate::eval::{self, ApConvention, EvalReport, Query};
use crate::expand::{ExpansionConfig, Expander, RankedExpansion};
use crate::lm::LmBackend;
use crate::prompt::PromptConfig;
use crate::trie::PrefixTrie;
use crate::vocab::EntityVocabulary;

pub struct Engine {
    backend: Box<dyn LmBackend>,
    vocab: EntityVocabulary,
    trie: PrefixTrie,
    pub prompt: PromptConfig,
    pub expansion: ExpansionConfig,
}

impl Engine {
    pub fn new(
        backend: Box<dyn LmBackend>,
        vocab: EntityVocabulary,
        trie: PrefixTrie,
        prompt: PromptConfig,
        expansion: ExpansionConfig,
    ) -> Result<Self> {
        if !trie.is_built_from(&vocab) {
            return Err(Error::Cache("trie was not built from this vocabulary".into()));
        }
        if vocab.tokenizer_id() != backend.tokenizer_id() {
            return Err(Error::InvalidArgument(format!(
                "vocabulary was tokenized by {:?}, backend is {:?}",
                vocab.tokenizer_id(),
                backend.tokenizer_id()
            )));
        }
        Ok(Self {
            backend,
            vocab,
            trie,
            prompt,
            expansion,
        })
    }

    /// Tokenizes `surfaces` with `backend` and builds the trie.
    pub fn from_surfaces<S: AsRef<str>>(
        backend: Box<dyn LmBackend>,
        surfaces: &[S],
        prompt: PromptConfig,
        expansion: ExpansionConfig,
    ) -> Result<Self> {
        let vocab = EntityVocabulary::from_surfaces(surfaces, &*backend)?;
        let trie = PrefixTrie::build(&vocab)?;
        Self::new(backend, vocab, trie, prompt, expansion)
    }

    pub fn backend(&self) -> &dyn LmBackend {
        &*self.backend
    }

    pub fn vocab(&self) -> &EntityVocabulary {
        &self.vocab
    }

    pub fn trie(&self) -> &PrefixTrie {
        &self.trie
    }

    pub fn expander(&self) -> Result<Expander<'_>> {
        Expander::new(&*self.backend, &self.vocab, &self.trie, &self.prompt, &self.expansion)
    }

    pub fn expand<S: AsRef<str>>(&self, query_id: &str, seeds: &[S]) -> Result<RankedExpansion> {
        self.expander()?.expand(query_id, seeds)
    }

    pub fn evaluate(&self, queries: &[Query], ks: &[usize], convention: ApConvention) -> Result<EvalReport> {
        eval::evaluate(&self.expander()?, queries, ks, convention)
    }
}
