//! Query datasets and MAP@K scoring.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expand::Expander;
use crate::vocab::EntityVocabulary;

pub const DEFAULT_KS: [usize; 3] = [10, 20, 50];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    pub id: String,
    pub seeds: Vec<String>,
    pub gold: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_hint: Option<String>,
}

impl Query {
    /// Drops gold entities missing from `vocab`, returning them.
    pub fn retain_known_gold(&mut self, vocab: &EntityVocabulary) -> Vec<String> {
        let (known, missing): (Vec<String>, Vec<String>) =
            self.gold.drain(..).partition(|g| vocab.lookup(g).is_some());
        self.gold = known;
        missing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApConvention {
    /// Divide by the number of gold hits within the top K.
    #[default]
    HitCount,
    /// Divide by `min(K, |gold|)`.
    MinKGold,
}

/// AP@K of `ranked` against `gold`. Seeds should already be removed from both
/// (see [`score_ranking`]).
pub fn average_precision_at_k<S: AsRef<str>>(
    ranked: &[S],
    gold: &HashSet<&str>,
    k: usize,
    convention: ApConvention,
) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, e) in ranked.iter().take(k).enumerate() {
        if gold.contains(e.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    let denom = match convention {
        ApConvention::HitCount => hits,
        ApConvention::MinKGold => k.min(gold.len()),
    };
    if denom == 0 {
        0.0
    } else {
        sum / denom as f64
    }
}

/// AP@K after removing `seeds` from the ranking and from gold.
pub fn score_ranking<S: AsRef<str>>(
    ranked: &[S],
    gold: &[String],
    seeds: &[String],
    k: usize,
    convention: ApConvention,
) -> f64 {
    let seeds: HashSet<&str> = seeds.iter().map(String::as_str).collect();
    let gold: HashSet<&str> = gold.iter().map(String::as_str).filter(|g| !seeds.contains(g)).collect();
    let ranked: Vec<&str> = ranked
        .iter()
        .map(AsRef::as_ref)
        .filter(|e| !seeds.contains(e))
        .collect();
    average_precision_at_k(&ranked, &gold, k, convention)
}

pub fn mean_average_precision(aps: &[f64]) -> f64 {
    if aps.is_empty() {
        return 0.0;
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}

/// One JSON object per line: `{"id", "seeds", "gold", "class_hint"?}`. Blank
/// lines are skipped.
pub fn load_dataset(path: &Path) -> Result<Vec<Query>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Vec<Query>> {
    let diag = |line: usize, message: String| Error::Dataset {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let q: Query = serde_json::from_str(raw).map_err(|e| diag(line, e.to_string()))?;
        if q.seeds.is_empty() {
            return Err(diag(line, format!("query {:?} has no seeds", q.id)));
        }
        if q.gold.is_empty() {
            return Err(diag(line, format!("query {:?} has no gold entities", q.id)));
        }
        if !ids.insert(q.id.clone()) {
            return Err(diag(line, format!("duplicate query id {:?}", q.id)));
        }
        out.push(q);
    }
    if out.is_empty() {
        return Err(diag(0, "dataset contains no queries".into()));
    }
    Ok(out)
}

pub fn write_dataset(queries: &[Query]) -> String {
    let mut out = String::new();
    for q in queries {
        out.push_str(&serde_json::to_string(q).expect("query serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryReport {
    pub id: String,
    pub class_name: Option<String>,
    /// `(K, AP@K)` pairs.
    pub ap: Vec<(usize, f64)>,
    pub elapsed_ms: f64,
    pub dropped_gold: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub convention: ApConvention,
    pub ks: Vec<usize>,
    pub map: Vec<(usize, f64)>,
    pub queries: Vec<QueryReport>,
    pub total_elapsed_ms: f64,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn map_at(&self, k: usize) -> Option<f64> {
        self.map.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    pub fn mean_query_ms(&self) -> f64 {
        if self.queries.is_empty() {
            return 0.0;
        }
        self.queries.iter().map(|q| q.elapsed_ms).sum::<f64>() / self.queries.len() as f64
    }

    /// MAP table followed by a timing table.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = self.ks.iter().map(|k| format!("MAP@{k:<4}")).collect();
        let _ = writeln!(s, "{:<24} {}", "query", header.join(" "));
        for q in &self.queries {
            let cells: Vec<String> = q.ap.iter().map(|(_, v)| format!("{v:<8.4}")).collect();
            let _ = writeln!(s, "{:<24} {}", truncate(&q.id, 24), cells.join(" "));
        }
        let cells: Vec<String> = self.map.iter().map(|(_, v)| format!("{v:<8.4}")).collect();
        let _ = writeln!(s, "{:<24} {}", "MEAN", cells.join(" "));
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<24} {:>12}", "timing", "ms");
        let _ = writeln!(s, "{:<24} {:>12.1}", "total", self.total_elapsed_ms);
        let _ = writeln!(s, "{:<24} {:>12.1}", "per query", self.mean_query_ms());
        s
    }
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        s.chars().take(n - 1).chain(['~']).collect()
    }
}

/// Expands every query and scores it at each K. Gold entities absent from the
/// vocabulary are dropped with a warning; queries run in parallel.
pub fn evaluate(
    expander: &Expander<'_>,
    queries: &[Query],
    ks: &[usize],
    convention: ApConvention,
) -> Result<EvalReport> {
    let started = Instant::now();
    let reports = queries
        .par_iter()
        .map(|q| {
            let mut q = q.clone();
            let dropped = q.retain_known_gold(expander.vocab);
            if !dropped.is_empty() {
                log::warn!("query {}: {} gold entities not in vocabulary", q.id, dropped.len());
            }
            let t = Instant::now();
            let result = expander.expand(&q.id, &q.seeds)?;
            let elapsed = t.elapsed();
            let ranked = result.surfaces();
            let ap = ks
                .iter()
                .map(|&k| (k, score_ranking(&ranked, &q.gold, &q.seeds, k, convention)))
                .collect();
            Ok(QueryReport {
                id: q.id.clone(),
                class_name: result.class_name,
                ap,
                elapsed_ms: ms(elapsed),
                dropped_gold: dropped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let map = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let aps: Vec<f64> = reports.iter().map(|r| r.ap[i].1).collect();
            (k, mean_average_precision(&aps))
        })
        .collect();
    Ok(EvalReport {
        convention,
        ks: ks.to_vec(),
        map,
        queries: reports,
        total_elapsed_ms: ms(started.elapsed()),
        config: serde_json::to_value(expander.config).unwrap_or_default(),
    })
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}
