//! Entity set expansion by constrained generation.
//!
//! Given a few seed entities, a causal language model names their class and
//! then decodes further class members, restricted by a prefix trie to an
//! entity vocabulary. Decoding is calibrated against a content-free prompt,
//! repeated over seed permutations, and the results are re-ranked with
//! template likelihoods.
//!
//! ```no_run
//! use setexpand::{Engine, ExpansionConfig, PromptConfig, ToyLm};
//!
//! let lm = ToyLm::load("toy.json".as_ref())?;
//! let surfaces = ["Nevada", "Texas", "Ohio", "Florida", "Utah"];
//! let engine = Engine::from_surfaces(Box::new(lm), &surfaces, PromptConfig::default(), ExpansionConfig::default())?;
//! let result = engine.expand("q1", &["Nevada", "Texas", "Ohio"])?;
//! for e in &result.entries {
//!     println!("{} {:.3}", e.surface, e.score);
//! }
//! # Ok::<(), setexpand::Error>(())
//! ```

pub mod bench;
pub mod config;
pub mod decode;
mod engine;
pub mod error;
pub mod eval;
pub mod expand;
pub mod lm;
pub mod prompt;
pub mod trie;
pub mod vocab;

pub use config::EngineConfig;
pub use decode::{CalibrationMode, CalibrationState};
pub use engine::Engine;
pub use error::{Error, Result};
pub use eval::{ApConvention, Query};
pub use expand::{ExpansionConfig, RankedEntry, RankedExpansion};
pub use lm::{LmBackend, RemoteLm, RemoteLmConfig, ToyLm};
pub use prompt::PromptConfig;
pub use trie::PrefixTrie;
pub use vocab::EntityVocabulary;
