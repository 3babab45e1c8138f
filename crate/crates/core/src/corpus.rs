//! Domain registry, documents, word tokenization and n-gram enumeration.
//!
//! All corpus statistics are computed over word-level tokens: maximal runs of
//! alphanumeric characters, with every other non-whitespace character kept as
//! a token of its own. Each surface token carries a parallel lowercase stem.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense domain index, `0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(pub u16);

impl DomainId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered set of domain names. Ids are positions in the list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct DomainRegistry {
    names: Vec<String>,
}

impl DomainRegistry {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<String> = Vec::new();
        for name in names {
            let name = name.as_ref().to_lowercase();
            if name.is_empty() {
                return Err(Error::config("domain names must be non-empty"));
            }
            if out.contains(&name) {
                return Err(Error::Config(alloc::format!(
                    "duplicate domain name {name:?}"
                )));
            }
            out.push(name);
        }
        if out.len() < 2 {
            return Err(Error::config("at least two domains are required"));
        }
        if out.len() > u16::MAX as usize {
            return Err(Error::config("too many domains"));
        }
        Ok(DomainRegistry { names: out })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: DomainId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn id_of(&self, name: &str) -> Option<DomainId> {
        let name = name.to_lowercase();
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| DomainId(i as u16))
    }

    pub fn contains(&self, id: DomainId) -> bool {
        id.index() < self.names.len()
    }

    pub fn check(&self, id: DomainId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownDomain(alloc::format!("id {id}")))
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = DomainId> + '_ {
        (0..self.names.len()).map(|i| DomainId(i as u16))
    }

    pub fn iter(&self) -> impl Iterator<Item = (DomainId, &str)> + '_ {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (DomainId(i as u16), n.as_str()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl TryFrom<Vec<String>> for DomainRegistry {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        DomainRegistry::new(names)
    }
}

impl From<DomainRegistry> for Vec<String> {
    fn from(r: DomainRegistry) -> Self {
        r.names
    }
}

/// A word stemmer. Implementations receive lowercase word tokens only;
/// punctuation never reaches the stemmer.
pub trait Stemmer: Sync {
    fn stem(&self, word: &str) -> String;
}

/// Leaves words untouched. Useful for tests and pre-stemmed input.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityStemmer;

impl Stemmer for IdentityStemmer {
    fn stem(&self, word: &str) -> String {
        word.to_owned()
    }
}

impl<S: Stemmer + ?Sized> Stemmer for &S {
    fn stem(&self, word: &str) -> String {
        (**self).stem(word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub truncation_limit: usize,
    pub lowercase: bool,
    pub stemmer: String,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            truncation_limit: 96,
            lowercase: true,
            stemmer: "snowball-english".to_owned(),
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truncation_limit == 0 {
            return Err(Error::config("truncation limit must be at least 1"));
        }
        Ok(())
    }
}

/// True for tokens that carry at least one alphanumeric character.
pub fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

/// Split `text` into surface tokens and their stems.
///
/// Word tokens are maximal alphanumeric runs; any other non-whitespace
/// character is its own token and is its own stem.
pub fn tokenize(
    text: &str,
    config: &CorpusConfig,
    stemmer: &dyn Stemmer,
) -> (Vec<String>, Vec<String>) {
    let mut surface = Vec::new();
    let mut stems = Vec::new();
    let mut push = |tok: &str| {
        let folded = tok.to_lowercase();
        let stem = if is_word(tok) {
            stemmer.stem(&folded).to_lowercase()
        } else {
            folded.clone()
        };
        surface.push(if config.lowercase {
            folded
        } else {
            tok.to_owned()
        });
        stems.push(stem);
    };

    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        if let Some(s) = word_start.take() {
            push(&text[s..i]);
        }
        if !c.is_whitespace() {
            push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(s) = word_start {
        push(&text[s..]);
    }
    (surface, stems)
}

/// A tokenized, stemmed, truncated example tagged with its domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    id: u64,
    domain: DomainId,
    text: String,
    tokens: Vec<String>,
    stems: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl Document {
    /// Tokenize `text` and keep the first `truncation_limit` tokens.
    pub fn from_text(
        id: u64,
        domain: DomainId,
        text: &str,
        label: Option<String>,
        config: &CorpusConfig,
        stemmer: &dyn Stemmer,
    ) -> Self {
        let (mut tokens, mut stems) = tokenize(text, config, stemmer);
        tokens.truncate(config.truncation_limit);
        stems.truncate(config.truncation_limit);
        Document {
            id,
            domain,
            text: text.to_owned(),
            tokens,
            stems,
            label,
        }
    }

    /// Build from already tokenized input. Stems are lowercased.
    pub fn from_tokens(
        id: u64,
        domain: DomainId,
        tokens: Vec<String>,
        stems: Vec<String>,
        label: Option<String>,
    ) -> Result<Self> {
        if tokens.len() != stems.len() {
            return Err(Error::config("surface and stem sequences differ in length"));
        }
        let stems = stems.into_iter().map(|s| s.to_lowercase()).collect();
        let text = tokens.join(" ");
        Ok(Document {
            id,
            domain,
            text,
            tokens,
            stems,
            label,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn stems(&self) -> &[String] {
        &self.stems
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }
}

/// One contiguous n-gram of a stem sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGram {
    pub order: usize,
    /// Space-joined stems.
    pub key: String,
    /// Token positions `start..end`.
    pub start: usize,
    pub end: usize,
}

/// All contiguous n-grams of orders `1..=max_order`, lower orders first and
/// left to right within an order.
pub fn ngrams(stems: &[String], max_order: usize) -> impl Iterator<Item = NGram> + '_ {
    (1..=max_order).flat_map(move |order| {
        stems
            .windows(order)
            .enumerate()
            .map(move |(start, w)| NGram {
                order,
                key: w.join(" "),
                start,
                end: start + order,
            })
    })
}

/// Order of an n-gram key (number of space-separated stems).
pub fn key_order(key: &str) -> usize {
    key.split(' ').count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn empty_text_has_no_tokens() {
        let (s, t) = tokenize("", &CorpusConfig::default(), &IdentityStemmer);
        assert!(s.is_empty() && t.is_empty());
    }

    #[test]
    fn punctuation_is_its_own_token() {
        let (s, t) = tokenize("good knife!", &CorpusConfig::default(), &IdentityStemmer);
        assert_eq!(s, toks("good knife !"));
        assert_eq!(t, toks("good knife !"));
        let (s, _) = tokenize("well,then...ok", &CorpusConfig::default(), &IdentityStemmer);
        assert_eq!(s, toks("well , then . . . ok"));
    }

    #[test]
    fn case_is_folded_before_stemming() {
        let cfg = CorpusConfig {
            lowercase: false,
            ..CorpusConfig::default()
        };
        let (s, t) = tokenize("Knife KNIFE", &cfg, &IdentityStemmer);
        assert_eq!(s, toks("Knife KNIFE"));
        assert_eq!(t, toks("knife knife"));
    }

    #[test]
    fn truncation_keeps_leading_tokens() {
        let text: Vec<String> = (0..150).map(|i| alloc::format!("w{i}")).collect();
        let doc = Document::from_text(
            0,
            DomainId(0),
            &text.join(" "),
            None,
            &CorpusConfig::default(),
            &IdentityStemmer,
        );
        assert_eq!(doc.len(), 96);
        assert_eq!(doc.tokens(), &text[..96]);
        assert_eq!(doc.stems().len(), 96);
    }

    #[test]
    fn ngram_enumeration() {
        let s = toks("a b c");
        let keys: Vec<String> = ngrams(&s, 2).map(|g| g.key).collect();
        assert_eq!(
            keys,
            toks("a b c")
                .into_iter()
                .chain([String::from("a b"), String::from("b c")])
                .collect::<Vec<_>>()
        );

        let one = toks("a");
        let grams: Vec<NGram> = ngrams(&one, 3).collect();
        assert_eq!(grams.len(), 1);
        assert_eq!(grams[0].order, 1);

        let long: Vec<String> = (0..96).map(|i| alloc::format!("t{i}")).collect();
        assert_eq!(ngrams(&long, 3).count(), 96 + 95 + 94);
    }

    #[test]
    fn ngram_positions() {
        let s = toks("x y z w");
        let tri: Vec<NGram> = ngrams(&s, 3).filter(|g| g.order == 3).collect();
        assert_eq!(tri[1].key, "y z w");
        assert_eq!((tri[1].start, tri[1].end), (1, 4));
        assert_eq!(key_order("y z w"), 3);
    }

    #[test]
    fn registry_rules() {
        assert!(DomainRegistry::new(["a"]).is_err());
        assert!(DomainRegistry::new(["a", "A"]).is_err());
        assert!(DomainRegistry::new(["a", ""]).is_err());
        let r = DomainRegistry::new(["Airline", "dvd"]).unwrap();
        assert_eq!(r.id_of("AIRLINE"), Some(DomainId(0)));
        assert_eq!(r.name(DomainId(1)), Some("dvd"));
        assert!(r.check(DomainId(2)).is_err());
    }

    #[test]
    fn from_tokens_checks_lengths() {
        assert!(Document::from_tokens(0, DomainId(0), vec!["a".into()], vec![], None).is_err());
    }

    proptest::proptest! {
        #[test]
        fn tokenize_is_deterministic_and_parallel(text in "\\PC{0,60}") {
            let cfg = CorpusConfig::default();
            let a = tokenize(&text, &cfg, &IdentityStemmer);
            let b = tokenize(&text, &cfg, &IdentityStemmer);
            proptest::prop_assert_eq!(&a, &b);
            proptest::prop_assert_eq!(a.0.len(), a.1.len());
            for s in &a.1 {
                proptest::prop_assert_eq!(s, &s.to_lowercase());
            }
        }

        #[test]
        fn ngram_counts_per_order(n in 0usize..40, k in 1usize..=3) {
            let s: Vec<String> = (0..n).map(|i| alloc::format!("t{i}")).collect();
            let got = ngrams(&s, k).filter(|g| g.order == k).count();
            proptest::prop_assert_eq!(got, n.saturating_sub(k - 1));
        }
    }
}
