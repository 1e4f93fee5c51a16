//! Text templates for class naming, entity generation, calibration and
//! generative ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub entities: Vec<String>,
    pub class_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub demonstrations: Vec<Demonstration>,
    pub blank_text: String,
    pub delimiter: String,
    /// Terminates each in-context demonstration.
    pub demonstration_separator: String,
    /// Use "They are: ..." when no class name could be generated.
    pub allow_class_agnostic_fallback: bool,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            demonstrations: vec![
                Demonstration {
                    entities: vec!["IPad".into(), "Iphone".into(), "MacBook Pro".into()],
                    class_name: "Apple products".into(),
                },
                Demonstration {
                    entities: vec!["Juliet".into(), "Mars".into(), "Moon".into()],
                    class_name: "Natural satellites".into(),
                },
            ],
            blank_text: " ".into(),
            delimiter: ", ".into(),
            demonstration_separator: ". ".into(),
            allow_class_agnostic_fallback: true,
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delimiter.trim().is_empty() {
            return Err(Error::InvalidConfig("prompt delimiter must contain a visible character".into()));
        }
        if self.blank_text.is_empty() {
            return Err(Error::InvalidConfig("blank_text must not be empty".into()));
        }
        Ok(())
    }

    /// The delimiter without trailing whitespace, as it ends a prompt.
    pub fn delimiter_stem(&self) -> &str {
        self.delimiter.trim_end()
    }

    fn and_list<S: AsRef<str>>(&self, items: &[S]) -> String {
        match items {
            [] => String::new(),
            [one] => one.as_ref().to_string(),
            [init @ .., last] => {
                let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
                format!("{} and {}", head.join(&self.delimiter), last.as_ref())
            }
        }
    }
}

/// `"<demos>s1, s2 and s3 are"`, with no trailing space.
pub fn class_name_prompt<S: AsRef<str>>(seeds: &[S], cfg: &PromptConfig) -> Result<String> {
    if seeds.len() < 2 {
        return Err(Error::InvalidArgument(
            "class name prompt needs at least two seeds".into(),
        ));
    }
    let mut out = String::new();
    for demo in &cfg.demonstrations {
        out.push_str(&cfg.and_list(&demo.entities));
        out.push_str(" are ");
        out.push_str(&demo.class_name);
        out.push_str(&cfg.demonstration_separator);
    }
    out.push_str(&cfg.and_list(seeds));
    out.push_str(" are");
    Ok(out)
}

/// `"They are <class>: s1, s2, ..., sn,"`. Ends with the delimiter so decoding
/// starts outside any entity.
pub fn generation_prompt<S: AsRef<str>>(seeds: &[S], class_name: &str, cfg: &PromptConfig) -> Result<String> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("generation prompt needs at least one seed".into()));
    }
    if class_name.trim().is_empty() {
        return Err(Error::InvalidArgument("empty class name".into()));
    }
    Ok(shape(seeds, class_name, cfg))
}

/// `"They are: s1, ..., sn,"`, used when no class name is available.
pub fn class_agnostic_prompt<S: AsRef<str>>(seeds: &[S], cfg: &PromptConfig) -> Result<String> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("generation prompt needs at least one seed".into()));
    }
    let list: Vec<&str> = seeds.iter().map(AsRef::as_ref).collect();
    Ok(format!("They are: {}{}", list.join(&cfg.delimiter), cfg.delimiter_stem()))
}

fn shape<S: AsRef<str>>(seeds: &[S], class_name: &str, cfg: &PromptConfig) -> String {
    let list: Vec<&str> = seeds.iter().map(AsRef::as_ref).collect();
    format!(
        "They are {class_name}: {}{}",
        list.join(&cfg.delimiter),
        cfg.delimiter_stem()
    )
}

/// The generation prompt with the class and every seed replaced by the blank.
pub fn meaningless_prompt(n_seeds: usize, cfg: &PromptConfig) -> String {
    let blanks = vec![cfg.blank_text.as_str(); n_seeds.max(1)];
    shape(&blanks, &cfg.blank_text, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingTemplates {
    pub pair: String,
    pub isa: String,
}

/// `("<candidate>, <seed>", "<candidate> is one of <class>")`. The candidate
/// always opens the template; its tokens are the conditioning region.
pub fn ranking_templates(candidate: &str, seed: &str, class_name: &str, cfg: &PromptConfig) -> RankingTemplates {
    RankingTemplates {
        pair: pair_template(candidate, seed, cfg),
        isa: isa_template(candidate, class_name),
    }
}

pub fn pair_template(candidate: &str, seed: &str, cfg: &PromptConfig) -> String {
    format!("{candidate}{}{seed}", cfg.delimiter)
}

pub fn isa_template(candidate: &str, class_name: &str) -> String {
    format!("{candidate} is one of {class_name}")
}
