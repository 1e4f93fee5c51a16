//! Candidate entity vocabulary, tokenized in continuation context.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lm::{LmBackend, TokenId};

pub type EntityId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    pub id: EntityId,
    pub surface: String,
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Clone)]
pub struct EntityVocabulary {
    entities: Vec<EntityRecord>,
    by_surface: HashMap<String, EntityId>,
    tokenizer_id: String,
}

/// Surfaces may not contain the non-whitespace part of the delimiter.
const DELIMITER_CHAR: char = ',';

impl EntityVocabulary {
    /// Reads one surface per line (LF or CRLF); blank lines are skipped and
    /// later duplicates are dropped.
    pub fn load(path: &Path, backend: &dyn LmBackend) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let vocab = Self::from_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)), backend)?;
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary(path.to_path_buf()));
        }
        Ok(vocab)
    }

    pub fn from_surfaces<S: AsRef<str>>(surfaces: &[S], backend: &dyn LmBackend) -> Result<Self> {
        let vocab = Self::from_lines(
            surfaces.iter().enumerate().map(|(i, s)| (i + 1, s.as_ref())),
            backend,
        )?;
        if vocab.is_empty() {
            return Err(Error::InvalidArgument("empty entity list".into()));
        }
        Ok(vocab)
    }

    fn from_lines<'a>(
        lines: impl Iterator<Item = (usize, &'a str)>,
        backend: &dyn LmBackend,
    ) -> Result<Self> {
        let mut entities: Vec<EntityRecord> = Vec::new();
        let mut by_surface = HashMap::new();
        let mut by_tokens: HashMap<Vec<TokenId>, (usize, EntityId)> = HashMap::new();
        let unk = backend.unknown_token();
        for (line, raw) in lines {
            let surface = raw.trim();
            if surface.is_empty() || by_surface.contains_key(surface) {
                continue;
            }
            if surface.contains(DELIMITER_CHAR) {
                return Err(Error::VocabularyLine {
                    line,
                    message: format!("{surface:?} contains the entity delimiter"),
                });
            }
            let tokens = backend
                .tokenize(surface, true)
                .map_err(|e| Error::VocabularyLine {
                    line,
                    message: format!("cannot tokenize {surface:?}: {e}"),
                })?;
            if tokens.is_empty() || unk.is_some_and(|u| tokens.contains(&u)) {
                return Err(Error::VocabularyLine {
                    line,
                    message: format!("{surface:?} has no in-vocabulary tokenization"),
                });
            }
            let id = entities.len() as EntityId;
            if let Some(&(first_line, other)) = by_tokens.get(&tokens) {
                return Err(Error::VocabularyLine {
                    line,
                    message: format!(
                        "{surface:?} tokenizes identically to {:?} (line {first_line})",
                        entities[other as usize].surface
                    ),
                });
            }
            by_tokens.insert(tokens.clone(), (line, id));
            by_surface.insert(surface.to_string(), id);
            entities.push(EntityRecord {
                id,
                surface: surface.to_string(),
                tokens,
            });
        }
        Ok(EntityVocabulary {
            entities,
            by_surface,
            tokenizer_id: backend.tokenizer_id(),
        })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, id: EntityId) -> Option<&EntityRecord> {
        self.entities.get(id as usize)
    }

    pub fn surface(&self, id: EntityId) -> &str {
        &self.entities[id as usize].surface
    }

    pub fn tokens(&self, id: EntityId) -> &[TokenId] {
        &self.entities[id as usize].tokens
    }

    pub fn lookup(&self, surface: &str) -> Option<EntityId> {
        self.by_surface.get(surface.trim()).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.iter()
    }

    pub fn tokenizer_id(&self) -> &str {
        &self.tokenizer_id
    }

    /// SHA-256 over the ordered surfaces.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for e in &self.entities {
            h.update(e.surface.as_bytes());
            h.update(b"\n");
        }
        h.finalize().into()
    }

    pub fn mean_tokens(&self) -> f64 {
        if self.entities.is_empty() {
            return 0.0;
        }
        self.entities.iter().map(|e| e.tokens.len()).sum::<usize>() as f64 / self.entities.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::ToyLm;
    use std::io::Write;

    fn lm() -> ToyLm {
        ToyLm::train("Nevada Texas Ohio Florida State China", 2, 0.1).unwrap()
    }

    #[test]
    fn duplicates_collapse_first_wins() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "Nevada\r\nTexas\n\nNevada\n").unwrap();
        let v = EntityVocabulary::load(f.path(), &lm()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.lookup("Nevada"), Some(0));
        assert_eq!(v.lookup("Texas"), Some(1));
        assert_eq!(v.lookup("texas"), None);
    }

    #[test]
    fn empty_file_is_error() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(
            EntityVocabulary::load(f.path(), &lm()),
            Err(Error::EmptyVocabulary(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = EntityVocabulary::load(Path::new("/nonexistent/vocab.txt"), &lm()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn bad_lines_report_line_numbers() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "Nevada\nAtlantis\n").unwrap();
        match EntityVocabulary::load(f.path(), &lm()) {
            Err(Error::VocabularyLine { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let err = EntityVocabulary::from_surfaces(&["Texas", "Nevada, Ohio"], &lm()).unwrap_err();
        assert!(matches!(err, Error::VocabularyLine { line: 2, .. }));
    }

    #[test]
    fn tokenization_collisions_are_rejected() {
        let err = EntityVocabulary::from_surfaces(&["Florida State", "Florida  State"], &lm());
        // second surface differs as bytes but tokenizes identically
        assert!(matches!(err, Err(Error::VocabularyLine { line: 2, .. })));
    }

    #[test]
    fn multi_token_entities_tokenize() {
        let v = EntityVocabulary::from_surfaces(&["Florida", "Florida State", "China"], &lm()).unwrap();
        assert_eq!(v.tokens(1).len(), 2);
        assert_eq!(&v.tokens(1)[..1], v.tokens(0));
        assert!((v.mean_tokens() - 4.0 / 3.0).abs() < 1e-12);
    }
}
