//! Candidate filtering: minimum length, overlap with the original, and
//! agreement of a domain classifier with the intended destination.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_word, Document, DomainId, DomainRegistry};
use crate::error::{Error, Result};
use crate::math::{exp, ln};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_words: usize,
    pub min_overlap: f64,
    pub require_domain_agreement: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_words: 4,
            min_overlap: 0.25,
            require_domain_agreement: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_overlap) {
            return Err(Error::config("minimum overlap must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    TooShort,
    LowOverlap,
    DomainMismatch,
}

impl RejectReason {
    pub const ALL: [RejectReason; 3] = [
        RejectReason::TooShort,
        RejectReason::LowOverlap,
        RejectReason::DomainMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::TooShort => "too-short",
            RejectReason::LowOverlap => "low-overlap",
            RejectReason::DomainMismatch => "domain-mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
    pub predicted_domain: DomainId,
    pub overlap: f64,
}

/// Multinomial Naive Bayes over stemmed unigrams with add-k smoothing.
/// Tokens outside the training vocabulary share one extra smoothed bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainClassifier {
    registry: DomainRegistry,
    smoothing: f64,
    vocabulary: BTreeMap<String, usize>,
    log_priors: Vec<f64>,
    /// Per domain, one entry per vocabulary word plus the unknown bucket.
    log_likelihoods: Vec<Vec<f64>>,
}

impl DomainClassifier {
    pub fn train<'a, I>(registry: &DomainRegistry, docs: I, smoothing: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Document>,
    {
        if !(smoothing.is_finite() && smoothing > 0.0) {
            return Err(Error::config("smoothing must be positive"));
        }
        let n = registry.len();
        let mut doc_counts = vec![0u64; n];
        let mut counts: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for doc in docs {
            registry.check(doc.domain())?;
            let d = doc.domain().index();
            doc_counts[d] += 1;
            for s in doc.stems() {
                counts.entry(s.clone()).or_insert_with(|| vec![0; n])[d] += 1;
            }
        }
        if let Some(d) = doc_counts.iter().position(|&c| c == 0) {
            return Err(Error::Config(alloc::format!(
                "domain {:?} has no training documents",
                registry.names()[d]
            )));
        }
        let total_docs: u64 = doc_counts.iter().sum();
        let log_priors = doc_counts
            .iter()
            .map(|&c| ln(c as f64 / total_docs as f64))
            .collect();

        let v = counts.len();
        let mut token_totals = vec![0u64; n];
        for c in counts.values() {
            for (t, x) in token_totals.iter_mut().zip(c) {
                *t += x;
            }
        }
        let mut log_likelihoods = vec![Vec::with_capacity(v + 1); n];
        for (d, row) in log_likelihoods.iter_mut().enumerate() {
            let denom = token_totals[d] as f64 + smoothing * (v + 1) as f64;
            row.extend(
                counts
                    .values()
                    .map(|c| ln((c[d] as f64 + smoothing) / denom)),
            );
            row.push(ln(smoothing / denom));
        }
        let vocabulary = counts
            .into_keys()
            .enumerate()
            .map(|(i, k)| (k, i))
            .collect();
        Ok(DomainClassifier {
            registry: registry.clone(),
            smoothing,
            vocabulary,
            log_priors,
            log_likelihoods,
        })
    }

    pub fn registry(&self) -> &DomainRegistry {
        &self.registry
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    /// Argmax of the per-domain log scores, lowest id on ties.
    pub fn predict(&self, stems: &[String]) -> (DomainId, Vec<f64>) {
        let unknown = self.vocabulary.len();
        let mut scores = self.log_priors.clone();
        for s in stems {
            let i = self.vocabulary.get(s).copied().unwrap_or(unknown);
            for (score, row) in scores.iter_mut().zip(&self.log_likelihoods) {
                *score += row[i];
            }
        }
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        (DomainId(best as u16), scores)
    }

    pub fn predict_document(&self, doc: &Document) -> DomainId {
        self.predict(doc.stems()).0
    }

    /// Sanity checks after deserializing a stored model.
    pub fn validate(&self) -> Result<()> {
        let n = self.registry.len();
        let v = self.vocabulary.len() + 1;
        if self.log_priors.len() != n
            || self.log_likelihoods.len() != n
            || self.log_likelihoods.iter().any(|r| r.len() != v)
        {
            return Err(Error::format("classifier tables have inconsistent shapes"));
        }
        let mut seen = vec![false; v - 1];
        for &i in self.vocabulary.values() {
            if i >= v - 1 || core::mem::replace(&mut seen[i], true) {
                return Err(Error::format("classifier vocabulary indices are not dense"));
            }
        }
        Ok(())
    }
}

/// Normalized probabilities from log scores.
pub fn softmax(log_scores: &[f64]) -> Vec<f64> {
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = log_scores.iter().map(|s| exp(s - max)).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Share of the original's distinct stems that also occur in the candidate.
pub fn word_overlap(original: &Document, candidate_stems: &[String]) -> Result<f64> {
    let orig: BTreeSet<&str> = original.stems().iter().map(String::as_str).collect();
    if orig.is_empty() {
        return Err(Error::UndefinedInput("overlap with an empty original"));
    }
    let cand: BTreeSet<&str> = candidate_stems.iter().map(String::as_str).collect();
    Ok(orig.intersection(&cand).count() as f64 / orig.len() as f64)
}

/// Evaluate all three rules; `reasons` lists every failed rule.
pub fn apply_filter(
    tokens: &[String],
    stems: &[String],
    destination: DomainId,
    original: &Document,
    model: &DomainClassifier,
    config: &FilterConfig,
) -> Result<FilterVerdict> {
    model.registry().check(destination)?;
    let mut reasons = Vec::new();
    if tokens.iter().filter(|t| is_word(t)).count() < config.min_words {
        reasons.push(RejectReason::TooShort);
    }
    let overlap = word_overlap(original, stems).unwrap_or(0.0);
    if overlap < config.min_overlap {
        reasons.push(RejectReason::LowOverlap);
    }
    let (predicted, _) = model.predict(stems);
    if config.require_domain_agreement && predicted != destination {
        reasons.push(RejectReason::DomainMismatch);
    }
    Ok(FilterVerdict {
        accepted: reasons.is_empty(),
        reasons,
        predicted_domain: predicted,
        overlap,
    })
}
