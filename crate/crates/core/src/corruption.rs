//! Hierarchical n-gram masking.
//!
//! Unigrams whose masking score exceeds `tau` are masked first. Bigrams are
//! then considered only when neither of their tokens is masked yet, and
//! trigrams likewise. Within a pass, candidates go in descending score order
//! (leftmost first on ties) and a candidate touching a position already
//! masked in that pass is skipped. Optional extra noise masks further random
//! positions after the threshold passes. Adjacent masked positions form a
//! single slot.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, DomainId};
use crate::error::{Error, Result};
use crate::math::round;
use crate::stats::StatsSnapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub tau: f64,
    pub extra_mask_fraction: f64,
    pub max_order: usize,
    pub rng_seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self::inference(0)
    }
}

impl CorruptionConfig {
    pub fn inference(seed: u64) -> Self {
        CorruptionConfig {
            tau: 0.08,
            extra_mask_fraction: 0.0,
            max_order: 3,
            rng_seed: seed,
        }
    }

    /// Inference settings plus 5% extra noise per example.
    pub fn training(seed: u64) -> Self {
        CorruptionConfig {
            extra_mask_fraction: 0.05,
            ..Self::inference(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > -1.0 && self.tau < 1.0) {
            return Err(Error::config("tau must lie in (-1, 1)"));
        }
        if !(0.0..=1.0).contains(&self.extra_mask_fraction) {
            return Err(Error::config("extra mask fraction must lie in [0, 1]"));
        }
        if !(1..=3).contains(&self.max_order) {
            return Err(Error::config("n-gram order must be between 1 and 3"));
        }
        Ok(())
    }
}

/// Random stream for one document: the run seed selects the key, the
/// document id selects the stream.
pub fn doc_rng(seed: u64, doc_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(doc_id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskReason {
    Threshold,
    ExtraNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedSpan {
    pub start: usize,
    pub end: usize,
    pub key: String,
    pub order: usize,
    pub score: f64,
    pub reason: MaskReason,
    /// Original surface tokens of the span.
    pub surface: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Keep(Vec<String>),
    Slot {
        index: usize,
        start: usize,
        end: usize,
    },
}

/// A corrupted example: kept token runs interleaved with fill slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedTemplate {
    pub origin_doc: u64,
    pub origin_domain: DomainId,
    pub destination_domain: DomainId,
    pub n_tokens: usize,
    pub segments: Vec<Segment>,
    /// Sorted by start position.
    pub spans: Vec<MaskedSpan>,
}

impl MaskedTemplate {
    fn assemble(
        doc: &Document,
        destination: DomainId,
        mut spans: Vec<MaskedSpan>,
    ) -> MaskedTemplate {
        spans.sort_by_key(|s| s.start);
        let n = doc.len();
        let mut masked = vec![false; n];
        for s in &spans {
            masked[s.start..s.end].iter_mut().for_each(|m| *m = true);
        }
        let mut segments = Vec::new();
        let mut i = 0;
        let mut slot = 0;
        while i < n {
            let j = (i..n).find(|&j| masked[j] != masked[i]).unwrap_or(n);
            if masked[i] {
                segments.push(Segment::Slot {
                    index: slot,
                    start: i,
                    end: j,
                });
                slot += 1;
            } else {
                segments.push(Segment::Keep(doc.tokens()[i..j].to_vec()));
            }
            i = j;
        }
        MaskedTemplate {
            origin_doc: doc.id(),
            origin_domain: doc.domain(),
            destination_domain: destination,
            n_tokens: n,
            segments,
            spans,
        }
    }

    pub fn slot_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Slot { .. }))
            .count()
    }

    /// `(start, end)` of each slot in index order.
    pub fn slots(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot { start, end, .. } => Some((*start, *end)),
            Segment::Keep(_) => None,
        })
    }

    pub fn masked_token_count(&self) -> usize {
        self.spans.iter().map(|s| s.end - s.start).sum()
    }

    pub fn kept_tokens(&self) -> impl Iterator<Item = &str> + '_ {
        self.segments
            .iter()
            .flat_map(|s| match s {
                Segment::Keep(t) => t.as_slice(),
                Segment::Slot { .. } => &[],
            })
            .map(String::as_str)
    }

    /// Kept tokens space-joined with slots rendered as `<extra_id_k>`.
    pub fn sentinel_text(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        for s in &self.segments {
            match s {
                Segment::Keep(t) => parts.extend(t.iter().cloned()),
                Segment::Slot { index, .. } => parts.push(format!("<extra_id_{index}>")),
            }
        }
        parts.join(" ")
    }

    /// Put the masked surface tokens back.
    pub fn original_tokens(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::with_capacity(self.n_tokens);
        let mut spans = self.spans.iter().peekable();
        for seg in &self.segments {
            match seg {
                Segment::Keep(t) => out.extend(t.iter().cloned()),
                Segment::Slot { end, .. } => {
                    while let Some(s) = spans.next_if(|s| s.start < *end) {
                        out.extend(s.surface.iter().cloned());
                    }
                }
            }
        }
        out
    }
}

/// Inference-time masking of `doc` toward `destination`. The random stream
/// for extra noise is derived from `config.rng_seed` and the document id.
pub fn mask(
    doc: &Document,
    destination: DomainId,
    snapshot: &StatsSnapshot,
    config: &CorruptionConfig,
) -> Result<MaskedTemplate> {
    let mut rng = doc_rng(config.rng_seed, doc.id());
    mask_with_rng(doc, destination, snapshot, config, &mut rng)
}

pub fn mask_with_rng<R: Rng + ?Sized>(
    doc: &Document,
    destination: DomainId,
    snapshot: &StatsSnapshot,
    config: &CorruptionConfig,
    rng: &mut R,
) -> Result<MaskedTemplate> {
    config.validate()?;
    snapshot.registry().check(destination)?;
    snapshot.registry().check(doc.domain())?;
    let origin = doc.domain();
    let stems = doc.stems();
    let n = stems.len();
    let mut masked = vec![false; n];
    let mut spans: Vec<MaskedSpan> = Vec::new();

    for order in 1..=config.max_order.min(n) {
        let mut candidates: Vec<(usize, String, f64)> = (0..=n - order)
            .filter(|&s| !masked[s..s + order].iter().any(|&m| m))
            .filter_map(|s| {
                let key = stems[s..s + order].join(" ");
                let score = snapshot.masking_score(&key, origin, destination);
                (score > config.tau).then_some((s, key, score))
            })
            .collect();
        candidates.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        for (start, key, score) in candidates {
            let end = start + order;
            if masked[start..end].iter().any(|&m| m) {
                continue;
            }
            masked[start..end].iter_mut().for_each(|m| *m = true);
            spans.push(MaskedSpan {
                start,
                end,
                key,
                order,
                score,
                reason: MaskReason::Threshold,
                surface: doc.tokens()[start..end].to_vec(),
            });
        }
    }

    if config.extra_mask_fraction > 0.0 {
        let mut free: Vec<usize> = (0..n).filter(|&i| !masked[i]).collect();
        let want = (round(config.extra_mask_fraction * n as f64) as usize).min(free.len());
        let (picked, _) = free.partial_shuffle(rng, want);
        for &i in picked.iter() {
            let key = stems[i].clone();
            let score = snapshot.masking_score(&key, origin, destination);
            spans.push(MaskedSpan {
                start: i,
                end: i + 1,
                key,
                order: 1,
                score,
                reason: MaskReason::ExtraNoise,
                surface: vec![doc.tokens()[i].clone()],
            });
        }
    }

    Ok(MaskedTemplate::assemble(doc, destination, spans))
}

/// Training-time masking: the origin domain is the reconstruction target, so
/// masking scores are computed against a random other domain instead.
/// Returns the template (destination set back to the origin) and the sampled
/// stand-in destination. Pass [`CorruptionConfig::training`] for the default
/// training noise.
pub fn mask_for_training<R: Rng + ?Sized>(
    doc: &Document,
    snapshot: &StatsSnapshot,
    config: &CorruptionConfig,
    rng: &mut R,
) -> Result<(MaskedTemplate, DomainId)> {
    let n = snapshot.n_domains();
    snapshot.registry().check(doc.domain())?;
    let origin = doc.domain().index();
    let mut pick = rng.gen_range(0..n - 1);
    if pick >= origin {
        pick += 1;
    }
    let fake = DomainId(pick as u16);
    let mut template = mask_with_rng(doc, fake, snapshot, config, rng)?;
    template.destination_domain = doc.domain();
    Ok((template, fake))
}

/// Mask `round(fraction * len)` uniformly random positions.
pub fn mask_random<R: Rng + ?Sized>(
    doc: &Document,
    fraction: f64,
    rng: &mut R,
) -> Result<MaskedTemplate> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config("mask fraction must lie in [0, 1]"));
    }
    let n = doc.len();
    let want = (round(fraction * n as f64) as usize).min(n);
    let mut positions: Vec<usize> = (0..n).collect();
    let (picked, _) = positions.partial_shuffle(rng, want);
    let spans = picked
        .iter()
        .map(|&i| MaskedSpan {
            start: i,
            end: i + 1,
            key: doc.stems()[i].clone(),
            order: 1,
            score: 0.0,
            reason: MaskReason::ExtraNoise,
            surface: vec![doc.tokens()[i].clone()],
        })
        .collect();
    Ok(MaskedTemplate::assemble(doc, doc.domain(), spans))
}

/// Percentage of token positions masked across `templates`.
pub fn masking_rate<'a, I>(templates: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a MaskedTemplate>,
{
    let mut any = false;
    let (mut masked, mut total) = (0usize, 0usize);
    for t in templates {
        any = true;
        masked += t.masked_token_count();
        total += t.n_tokens;
    }
    if !any {
        return Err(Error::UndefinedInput("masking rate of an empty collection"));
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * masked as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusConfig, DomainRegistry, IdentityStemmer};
    use crate::stats::{build_stats, StatsConfig};

    fn doc(id: u64, d: u16, text: &str) -> Document {
        Document::from_text(
            id,
            DomainId(d),
            text,
            None,
            &CorpusConfig::default(),
            &IdentityStemmer,
        )
    }

    fn stats(docs: &[Document]) -> StatsSnapshot {
        let reg = DomainRegistry::new(["src", "dst"]).unwrap();
        let cfg = StatsConfig {
            min_doc_frequency: 1,
            ..StatsConfig::default()
        };
        build_stats(&reg, docs, &cfg).unwrap()
    }

    /// "blade" scores ~0.233 (4/0 of 10), "bent" ~0.094 (2/0 of 10).
    fn blade_corpus() -> Vec<Document> {
        let mut docs = Vec::new();
        for i in 0..10 {
            let s = match i {
                0..=3 => "blade the is",
                4..=5 => "bent the is",
                _ => "the is",
            };
            docs.push(doc(i, 0, s));
            docs.push(doc(100 + i, 1, "the is"));
        }
        docs
    }

    #[test]
    fn masks_high_scoring_unigrams() {
        let s = stats(&blade_corpus());
        let m_blade = s.masking_score("blade", DomainId(0), DomainId(1));
        let m_bent = s.masking_score("bent", DomainId(0), DomainId(1));
        assert!((m_blade - 0.23331838556776396).abs() < 1e-12);
        assert!(m_bent > 0.08 && m_bent < m_blade, "{m_bent}");
        assert_eq!(s.masking_score("the", DomainId(0), DomainId(1)), 0.0);

        let d = doc(7, 0, "the blade is bent");
        let t = mask(&d, DomainId(1), &s, &CorruptionConfig::inference(1)).unwrap();
        assert_eq!(t.sentinel_text(), "the <extra_id_0> is <extra_id_1>");
        assert_eq!(t.original_tokens(), d.tokens());
        assert!(t.spans.iter().all(|sp| sp.reason == MaskReason::Threshold));
    }

    #[test]
    fn same_domain_statistics_mask_nothing() {
        let s = stats(&blade_corpus());
        let d = doc(7, 0, "the blade is bent");
        let t = mask(&d, DomainId(0), &s, &CorruptionConfig::inference(1)).unwrap();
        assert_eq!(t.slot_count(), 0);
        assert_eq!(t.sentinel_text(), "the blade is bent");
    }

    #[test]
    fn unknown_destination_is_an_error() {
        let s = stats(&blade_corpus());
        let d = doc(7, 0, "the blade");
        assert!(matches!(
            mask(&d, DomainId(5), &s, &CorruptionConfig::default()),
            Err(Error::UnknownDomain(_))
        ));
    }

    #[test]
    fn adjacent_masks_merge() {
        let s = stats(&blade_corpus());
        let d = doc(7, 0, "blade bent the");
        let t = mask(&d, DomainId(1), &s, &CorruptionConfig::inference(1)).unwrap();
        assert_eq!(t.slot_count(), 1);
        assert_eq!(t.sentinel_text(), "<extra_id_0> the");
        assert_eq!(t.spans.len(), 2);
    }

    #[test]
    fn extra_noise_fraction() {
        let s = stats(&blade_corpus());
        let words: Vec<String> = (0..20).map(|_| String::from("the")).collect();
        let d = doc(3, 0, &words.join(" "));
        let t = mask(&d, DomainId(1), &s, &CorruptionConfig::training(4)).unwrap();
        assert_eq!(t.masked_token_count(), 1);
        assert_eq!(t.spans[0].reason, MaskReason::ExtraNoise);
        let again = mask(&d, DomainId(1), &s, &CorruptionConfig::training(4)).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn training_mask_targets_origin() {
        let s = stats(&blade_corpus());
        let d = doc(2, 0, "the blade is bent");
        let mut rng = doc_rng(9, 0);
        let (t, fake) =
            mask_for_training(&d, &s, &CorruptionConfig::training(0), &mut rng).unwrap();
        assert_eq!(fake, DomainId(1));
        assert_eq!(t.destination_domain, DomainId(0));
        assert!(t.slot_count() >= 2);
    }

    #[test]
    fn random_masking_counts() {
        let words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let d = doc(0, 0, &words.join(" "));
        let mut rng = doc_rng(1, 0);
        assert_eq!(mask_random(&d, 0.0, &mut rng).unwrap().slot_count(), 0);
        let full = mask_random(&d, 1.0, &mut rng).unwrap();
        assert_eq!(full.slot_count(), 1);
        assert_eq!(full.sentinel_text(), "<extra_id_0>");
        let t = mask_random(&d, 0.15, &mut rng).unwrap();
        assert_eq!(t.masked_token_count(), 3);
        assert!(t.spans.iter().all(|s| s.score == 0.0));
        assert_eq!(t.original_tokens(), d.tokens());
        assert!(mask_random(&d, 1.5, &mut rng).is_err());
    }

    #[test]
    fn rate_arithmetic() {
        let d = doc(0, 0, "a b c d");
        let mut rng = doc_rng(1, 0);
        let none = mask_random(&d, 0.0, &mut rng).unwrap();
        assert_eq!(masking_rate([&none]).unwrap(), 0.0);
        let one = mask_random(&d, 0.25, &mut rng).unwrap();
        assert_eq!(masking_rate([&one]).unwrap(), 25.0);
        assert!(matches!(
            masking_rate(core::iter::empty()),
            Err(Error::UndefinedInput(_))
        ));
    }

    #[test]
    fn empty_document() {
        let s = stats(&blade_corpus());
        let d = doc(0, 0, "");
        let t = mask(&d, DomainId(1), &s, &CorruptionConfig::training(0)).unwrap();
        assert_eq!(t.n_tokens, 0);
        assert_eq!(t.sentinel_text(), "");
    }
}
