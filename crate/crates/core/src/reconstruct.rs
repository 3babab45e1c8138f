//! Filling masked templates.
//!
//! The destination vocabulary admits a unigram `w` when
//! `max_i m(w, D', D_i) > tau`, plus every stem of the original example. The
//! native filler samples slot words from the score-admitted part of that
//! vocabulary; the external reconstructor (see the `domcf` crate) sends the
//! template to a generation service using the [`wire`] types.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_word, Document, DomainId};
use crate::corruption::{MaskedTemplate, Segment};
use crate::error::{Error, Result};
use crate::orientation::{OrientationDescriptor, OrientationSet};
use crate::stats::StatsSnapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllowedVocabulary {
    pub destination: DomainId,
    pub tau: f64,
    /// Unigram stems admitted by score.
    pub words: BTreeSet<String>,
    /// Stems of the source example; always admitted.
    pub original: BTreeSet<String>,
}

impl AllowedVocabulary {
    pub fn allows(&self, stem: &str) -> bool {
        self.words.contains(stem) || self.original.contains(stem)
    }

    /// Effective allowed set, sorted.
    pub fn all(&self) -> Vec<String> {
        self.words.union(&self.original).cloned().collect()
    }
}

/// `max` over the other domains of `m(w, destination, D_i)`.
pub fn destination_score(snapshot: &StatsSnapshot, key: &str, destination: DomainId) -> f64 {
    let rho = snapshot.affinities(key);
    let own = rho[destination.index()];
    rho.iter()
        .enumerate()
        .filter(|(i, _)| *i != destination.index())
        .map(|(_, r)| own - r)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn build_allowed_vocabulary(
    snapshot: &StatsSnapshot,
    destination: DomainId,
    original: &Document,
    tau: f64,
) -> Result<AllowedVocabulary> {
    snapshot.registry().check(destination)?;
    let words = snapshot
        .unigrams()
        .filter(|(k, _)| destination_score(snapshot, k, destination) > tau)
        .map(|(k, _)| String::from(k))
        .collect();
    Ok(AllowedVocabulary {
        destination,
        tau,
        words,
        original: original.stems().iter().cloned().collect(),
    })
}

/// Which reconstructor produces candidate text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ReconstructorKind {
    NativeOriented {
        boost: f64,
    },
    NativeUnoriented,
    ExternalService {
        url: String,
        beam_size: u32,
        enforce_vocabulary: bool,
        max_length: u32,
        timeout_ms: u64,
    },
}

impl Default for ReconstructorKind {
    fn default() -> Self {
        ReconstructorKind::NativeOriented {
            boost: NativeFillConfig::DEFAULT_BOOST,
        }
    }
}

/// Stems that share at least one document of a domain with that domain's
/// orientation words.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CooccurrenceTable {
    table: BTreeMap<(DomainId, String), BTreeSet<String>>,
}

impl CooccurrenceTable {
    pub fn build<'a, I>(orientations: &OrientationSet, docs: I) -> Self
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let mut table: BTreeMap<(DomainId, String), BTreeSet<String>> = BTreeMap::new();
        for doc in docs {
            if !orientations.registry().contains(doc.domain()) {
                continue;
            }
            for o in orientations.descriptors(doc.domain()) {
                if doc.stems().contains(&o.stem) {
                    table
                        .entry((doc.domain(), o.stem.clone()))
                        .or_default()
                        .extend(doc.stems().iter().filter(|s| **s != o.stem).cloned());
                }
            }
        }
        CooccurrenceTable { table }
    }

    pub fn partners(&self, domain: DomainId, stem: &str) -> Option<&BTreeSet<String>> {
        self.table.get(&(domain, String::from(stem)))
    }
}

/// Most frequent surface spelling of each stem, for rendering generated
/// words. Ties go to the lexicographically smallest spelling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfaceForms {
    forms: BTreeMap<String, String>,
}

impl SurfaceForms {
    pub fn build<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let mut counts: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
        let docs: Vec<&Document> = docs.into_iter().collect();
        for doc in &docs {
            for (t, s) in doc.tokens().iter().zip(doc.stems()) {
                if is_word(t) {
                    *counts
                        .entry(s)
                        .or_default()
                        .entry(t.to_lowercase())
                        .or_default() += 1;
                }
            }
        }
        let forms = counts
            .into_iter()
            .map(|(stem, spellings)| {
                let mut best: Option<(&String, usize)> = None;
                for (w, &n) in &spellings {
                    if best.is_none_or(|(_, m)| n > m) {
                        best = Some((w, n));
                    }
                }
                (
                    String::from(stem),
                    best.map(|(w, _)| w.clone()).unwrap_or_default(),
                )
            })
            .collect();
        SurfaceForms { forms }
    }

    /// Surface form of `stem`, or the stem itself when it was never seen.
    pub fn render<'s>(&'s self, stem: &'s str) -> &'s str {
        self.forms.get(stem).map_or(stem, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillVocabulary {
    /// Score-admitted destination words weighted by representing score.
    Constrained,
    /// Every word unigram of the snapshot weighted by total document
    /// frequency, with no destination restriction.
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeFillConfig {
    /// Weight multiplier for words co-occurring with the orientation word.
    /// `None` disables orientation.
    pub boost: Option<f64>,
    pub vocabulary: FillVocabulary,
}

impl NativeFillConfig {
    pub const DEFAULT_BOOST: f64 = 4.0;

    pub fn oriented(boost: f64) -> Self {
        NativeFillConfig {
            boost: Some(boost),
            vocabulary: FillVocabulary::Constrained,
        }
    }

    pub fn unoriented() -> Self {
        NativeFillConfig {
            boost: None,
            vocabulary: FillVocabulary::Constrained,
        }
    }

    pub fn unconstrained() -> Self {
        NativeFillConfig {
            boost: None,
            vocabulary: FillVocabulary::Unconstrained,
        }
    }
}

impl Default for NativeFillConfig {
    fn default() -> Self {
        Self::oriented(Self::DEFAULT_BOOST)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeFill {
    pub tokens: Vec<String>,
    /// Words written into each slot, in slot order.
    pub slot_fills: Vec<Vec<String>>,
    /// Set when no score-admitted word existed and the original stems were
    /// used instead.
    pub degenerate: bool,
}

impl NativeFill {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Fill every slot with as many sampled words as the span it replaces.
pub fn fill_native<R: Rng + ?Sized>(
    template: &MaskedTemplate,
    orientation: Option<&OrientationDescriptor>,
    snapshot: &StatsSnapshot,
    vocab: &AllowedVocabulary,
    cooccurrence: Option<&CooccurrenceTable>,
    config: &NativeFillConfig,
    rng: &mut R,
) -> Result<NativeFill> {
    let dest = template.destination_domain;
    snapshot.registry().check(dest)?;
    if let (Some(o), Some(_)) = (orientation, config.boost) {
        if o.domain != dest {
            return Err(Error::config(
                "orientation belongs to a different domain than the destination",
            ));
        }
    }
    if let Some(b) = config.boost {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::config("co-occurrence boost must be positive"));
        }
    }

    let partners = match (orientation, config.boost, cooccurrence) {
        (Some(o), Some(_), Some(c)) => c.partners(dest, &o.stem),
        _ => None,
    };

    let mut degenerate = false;
    let (pool, weights): (Vec<&str>, Vec<f64>) = match config.vocabulary {
        FillVocabulary::Constrained => vocab
            .words
            .iter()
            .map(|w| {
                let mut weight = snapshot.representing_score(w, dest);
                if let (Some(p), Some(b)) = (partners, config.boost) {
                    if p.contains(w) {
                        weight *= b;
                    }
                }
                (w.as_str(), weight)
            })
            .unzip(),
        FillVocabulary::Unconstrained => snapshot
            .unigrams()
            .filter(|(k, _)| is_word(k))
            .map(|(k, c)| (k, c.iter().map(|&x| x as f64).sum::<f64>()))
            .unzip(),
    };

    let sampler = Sampler::new(&pool, &weights).or_else(|| {
        degenerate = true;
        let fallback: Vec<&str> = vocab.original.iter().map(String::as_str).collect();
        let ones: Vec<f64> = fallback.iter().map(|_| 1.0).collect();
        Sampler::new(&fallback, &ones)
    });

    let mut tokens = Vec::with_capacity(template.n_tokens);
    let mut slot_fills = Vec::with_capacity(template.slot_count());
    for seg in &template.segments {
        match seg {
            Segment::Keep(t) => tokens.extend(t.iter().cloned()),
            Segment::Slot { start, end, .. } => {
                let fill: Vec<String> = match &sampler {
                    Some(s) => (*start..*end)
                        .map(|_| String::from(s.sample(rng)))
                        .collect(),
                    None => Vec::new(),
                };
                tokens.extend(fill.iter().cloned());
                slot_fills.push(fill);
            }
        }
    }
    Ok(NativeFill {
        tokens,
        slot_fills,
        degenerate,
    })
}

struct Sampler<'a> {
    items: Vec<&'a str>,
    dist: Option<WeightedIndex<f64>>,
}

impl<'a> Sampler<'a> {
    /// Uniform when every weight is zero; `None` for an empty pool.
    fn new(items: &[&'a str], weights: &[f64]) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let dist = if weights.iter().any(|&w| w > 0.0) {
            let clean: Vec<f64> = weights.iter().map(|&w| w.max(0.0)).collect();
            WeightedIndex::new(clean).ok()
        } else {
            None
        };
        Some(Sampler {
            items: items.to_vec(),
            dist,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &'a str {
        let i = match &self.dist {
            Some(d) => d.sample(rng),
            None => rng.gen_range(0..self.items.len()),
        };
        self.items[i]
    }
}

/// Request and response bodies of the `POST /generate` endpoint.
pub mod wire {
    use alloc::string::String;
    use alloc::vec::Vec;

    use serde::{Deserialize, Serialize};

    pub const DEFAULT_BEAM_SIZE: u32 = 4;

    fn default_beam() -> u32 {
        DEFAULT_BEAM_SIZE
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct GenerateRequest {
        pub template: String,
        pub orientation_domain: String,
        pub orientation_word: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub allowed_words: Option<Vec<String>>,
        pub enforce_vocabulary: bool,
        pub max_length: u32,
        #[serde(default = "default_beam")]
        pub beam_size: u32,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct GenerateResponse {
        pub text: String,
        pub slot_fills: Vec<String>,
        pub model_version: String,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ErrorBody {
        pub error: String,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct Health {
        pub status: String,
        pub model_version: String,
    }
}

/// Word stems of `stems` (parallel to `tokens`) that fall outside `vocab`.
pub fn vocabulary_violations(
    tokens: &[String],
    stems: &[String],
    vocab: &AllowedVocabulary,
) -> Vec<String> {
    let mut bad: Vec<String> = tokens
        .iter()
        .zip(stems)
        .filter(|(t, s)| is_word(t) && !vocab.allows(s))
        .map(|(t, _)| t.clone())
        .collect();
    bad.dedup();
    bad
}
