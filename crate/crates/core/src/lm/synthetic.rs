//! Seeded generators for planted-class corpora, vocabularies and queries.
//!
//! Each round of the corpus mentions every class member exactly once in a
//! list sentence, once in a naming sentence and once in a membership
//! sentence, so all members end up with identical unigram frequency. Class
//! membership is then the only signal the n-gram model can pick up.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::Query;

pub const MIN_CLASS_MEMBERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSpec {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub rounds: usize,
    pub min_list_len: usize,
    pub max_list_len: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            rounds: 40,
            min_list_len: 4,
            max_list_len: 8,
        }
    }
}

pub fn generate_synthetic_corpus(classes: &[ClassSpec], seed: u64) -> Result<String> {
    generate_synthetic_corpus_with(classes, seed, &CorpusConfig::default())
}

pub fn generate_synthetic_corpus_with(classes: &[ClassSpec], seed: u64, cfg: &CorpusConfig) -> Result<String> {
    if classes.is_empty() {
        return Err(Error::InvalidArgument("no classes given".into()));
    }
    for class in classes {
        if class.members.len() < MIN_CLASS_MEMBERS {
            return Err(Error::InvalidArgument(format!(
                "class {:?} has {} members; at least {MIN_CLASS_MEMBERS} are required",
                class.name,
                class.members.len()
            )));
        }
    }
    if cfg.rounds == 0 || cfg.min_list_len == 0 || cfg.min_list_len > cfg.max_list_len {
        return Err(Error::InvalidArgument("invalid corpus configuration".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for _ in 0..cfg.rounds {
        let mut sentences = Vec::new();
        for class in classes {
            let mut members: Vec<&str> = class.members.iter().map(String::as_str).collect();

            members.shuffle(&mut rng);
            let mut rest = &members[..];
            while !rest.is_empty() {
                let len = rng.gen_range(cfg.min_list_len..=cfg.max_list_len).min(rest.len());
                let (chunk, tail) = rest.split_at(len);
                sentences.push(format!("They are {}: {}, etc.", class.name, chunk.join(", ")));
                rest = tail;
            }

            members.shuffle(&mut rng);
            for chunk in members.chunks(3) {
                sentences.push(format!("{} are {}.", and_join(chunk), class.name));
            }

            members.shuffle(&mut rng);
            for m in &members {
                sentences.push(format!("{m} is one of {}.", class.name));
            }
        }
        sentences.shuffle(&mut rng);
        for s in sentences {
            out.push_str(&s);
            out.push('\n');
        }
    }
    Ok(out)
}

fn and_join(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => (*one).to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// All consonant-vowel syllables, in a fixed order.
pub fn syllables() -> Vec<String> {
    let mut out = Vec::with_capacity(CONSONANTS.len() * VOWELS.len());
    for &c in CONSONANTS {
        for &v in VOWELS {
            out.push(String::from_utf8(vec![c, v]).unwrap());
        }
    }
    out
}

/// Distinct capitalized three-syllable words, e.g. `Bokari`.
pub fn synthetic_names(count: usize, seed: u64) -> Vec<String> {
    let syl = syllables();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let word: String = (0..3).map(|_| syl[rng.gen_range(0..syl.len())].as_str()).collect();
        let mut chars = word.chars();
        let name: String = chars
            .next()
            .map(|c| c.to_ascii_uppercase())
            .into_iter()
            .chain(chars)
            .collect();
        if seen.insert(name.clone()) {
            out.push(name);
        }
    }
    out
}

/// `n_classes` planted classes with single-token member names that are
/// unique across the whole set. Class names are lowercase words.
pub fn planted_classes(n_classes: usize, members_per_class: usize, seed: u64) -> Vec<ClassSpec> {
    let names = synthetic_names(n_classes * (members_per_class + 1), seed);
    names
        .chunks(members_per_class + 1)
        .map(|chunk| ClassSpec {
            name: format!("{}s", chunk[0].to_lowercase()),
            members: chunk[1..].to_vec(),
        })
        .collect()
}

/// Distinct multi-token filler entities (`"ka lo mi"`) built from
/// [`syllables`]; the token inventory stays fixed however many are drawn.
pub fn distractor_entities(count: usize, seed: u64) -> Vec<String> {
    let syl = syllables();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let len = rng.gen_range(2..=3);
        let parts: Vec<&str> = (0..len).map(|_| syl[rng.gen_range(0..syl.len())].as_str()).collect();
        let entity = parts.join(" ");
        if seen.insert(entity.clone()) {
            out.push(entity);
        }
    }
    out
}

/// Queries drawing `seeds_per_query` random members per class; gold is the
/// full member list.
pub fn planted_queries(
    classes: &[ClassSpec],
    queries_per_class: usize,
    seeds_per_query: usize,
    seed: u64,
) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for class in classes {
        for q in 0..queries_per_class {
            let seeds: Vec<String> = class
                .members
                .choose_multiple(&mut rng, seeds_per_query)
                .cloned()
                .collect();
            out.push(Query {
                id: format!("{}-{q}", class.name),
                seeds,
                gold: class.members.clone(),
                class_hint: Some(class.name.clone()),
            });
        }
    }
    out
}
