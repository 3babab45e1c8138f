//! Per-domain n-gram document frequencies and the scores derived from them.
//!
//! For an n-gram `w` seen in `c[D]` of the `n[D]` documents of domain `D`,
//! with equal domain priors:
//!
//! ```text
//! P(D | w)   = u[D] / sum(u),  u[D] = (c[D] + alpha(order(w))) / n[D]
//! H(D | w)   = -sum_D P(D | w) ln P(D | w)
//! rho(w, D)  = P(D | w) * (1 - H(D | w) / ln N)
//! m(w, D, E) = rho(w, D) - rho(w, E)
//! ```
//!
//! N-grams missing from the table score 0 everywhere.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{key_order, ngrams, Document, DomainId, DomainRegistry};
use crate::error::{Error, Result};
use crate::math::ln;

/// Canonical encoding version. Bump when the byte layout changes.
pub const CANONICAL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    /// Smoothing for uni-, bi- and tri-grams.
    pub alpha: [f64; 3],
    pub min_doc_frequency: u32,
    pub max_order: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            alpha: [1.0, 5.0, 7.0],
            min_doc_frequency: 10,
            max_order: 3,
        }
    }
}

impl StatsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.iter().all(|a| a.is_finite() && *a > 0.0) {
            return Err(Error::config("smoothing values must be positive"));
        }
        if self.min_doc_frequency < 1 {
            return Err(Error::config(
                "minimum document frequency must be at least 1",
            ));
        }
        if !(1..=3).contains(&self.max_order) {
            return Err(Error::config("n-gram order must be between 1 and 3"));
        }
        Ok(())
    }

    pub fn alpha_for(&self, order: usize) -> f64 {
        self.alpha[order.clamp(1, 3) - 1]
    }
}

/// Accumulates document frequencies. Counters built over disjoint shards of
/// documents can be merged before [`DocFreqCounter::finish`].
#[derive(Debug, Clone)]
pub struct DocFreqCounter {
    n_domains: usize,
    max_order: usize,
    n_docs: Vec<u32>,
    counts: BTreeMap<String, Vec<u32>>,
}

impl DocFreqCounter {
    pub fn new(n_domains: usize, max_order: usize) -> Self {
        DocFreqCounter {
            n_domains,
            max_order,
            n_docs: vec![0; n_domains],
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, doc: &Document) -> Result<()> {
        let d = doc.domain().index();
        if d >= self.n_domains {
            return Err(Error::UnknownDomain(alloc::format!("id {}", doc.domain())));
        }
        self.n_docs[d] += 1;
        let seen: BTreeSet<String> = ngrams(doc.stems(), self.max_order).map(|g| g.key).collect();
        for key in seen {
            let n = self.n_domains;
            self.counts.entry(key).or_insert_with(|| vec![0; n])[d] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: DocFreqCounter) {
        debug_assert_eq!(self.n_domains, other.n_domains);
        for (a, b) in self.n_docs.iter_mut().zip(&other.n_docs) {
            *a += b;
        }
        for (key, counts) in other.counts {
            match self.counts.get_mut(&key) {
                Some(mine) => {
                    for (a, b) in mine.iter_mut().zip(&counts) {
                        *a += b;
                    }
                }
                None => {
                    self.counts.insert(key, counts);
                }
            }
        }
    }

    pub fn finish(self, registry: DomainRegistry, config: StatsConfig) -> Result<StatsSnapshot> {
        config.validate()?;
        if registry.len() != self.n_domains {
            return Err(Error::config("registry size does not match counter"));
        }
        if let Some(d) = self.n_docs.iter().position(|&n| n == 0) {
            return Err(Error::Config(alloc::format!(
                "domain {:?} has no documents",
                registry.names()[d]
            )));
        }
        let min = config.min_doc_frequency;
        let table = self
            .counts
            .into_iter()
            .filter(|(_, c)| c.iter().map(|&x| x as u64).sum::<u64>() >= min as u64)
            .collect();
        Ok(StatsSnapshot::assemble(
            registry,
            self.n_docs,
            table,
            config,
        ))
    }
}

/// Build a snapshot from documents of every registry domain.
pub fn build_stats<'a, I>(
    registry: &DomainRegistry,
    docs: I,
    config: &StatsConfig,
) -> Result<StatsSnapshot>
where
    I: IntoIterator<Item = &'a Document>,
{
    config.validate()?;
    let mut counter = DocFreqCounter::new(registry.len(), config.max_order);
    for doc in docs {
        counter.add(doc)?;
    }
    counter.finish(registry.clone(), config.clone())
}

/// Frozen document-frequency table with derived domain scores.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsSnapshot {
    registry: DomainRegistry,
    n_docs: Vec<u32>,
    table: BTreeMap<String, Vec<u32>>,
    config: StatsConfig,
    fingerprint: [u8; 32],
}

impl StatsSnapshot {
    fn assemble(
        registry: DomainRegistry,
        n_docs: Vec<u32>,
        table: BTreeMap<String, Vec<u32>>,
        config: StatsConfig,
    ) -> Self {
        let mut s = StatsSnapshot {
            registry,
            n_docs,
            table,
            config,
            fingerprint: [0; 32],
        };
        s.fingerprint = s.compute_fingerprint();
        s
    }

    pub fn registry(&self) -> &DomainRegistry {
        &self.registry
    }

    pub fn config(&self) -> &StatsConfig {
        &self.config
    }

    pub fn n_docs(&self) -> &[u32] {
        &self.n_docs
    }

    pub fn n_domains(&self) -> usize {
        self.registry.len()
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn fingerprint_hex(&self) -> String {
        use core::fmt::Write;
        let mut s = String::with_capacity(64);
        for b in self.fingerprint {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn doc_freq(&self, key: &str) -> Option<&[u32]> {
        self.table.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    /// Every retained n-gram key with its per-domain counts, in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &[u32])> + '_ {
        self.table.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn unigrams(&self) -> impl Iterator<Item = (&str, &[u32])> + '_ {
        self.entries().filter(|(k, _)| !k.contains(' '))
    }

    /// `P(D | w)` for every domain, or `None` when `w` is not in the table.
    pub fn posterior(&self, key: &str) -> Option<Vec<f64>> {
        let counts = self.table.get(key)?;
        let alpha = self.config.alpha_for(key_order(key));
        Some(posterior_from_counts(counts, &self.n_docs, alpha))
    }

    /// `rho(w, D)` for every domain; all zeros for unknown n-grams.
    pub fn affinities(&self, key: &str) -> Vec<f64> {
        match self.posterior(key) {
            Some(p) => affinities_from_posterior(&p),
            None => vec![0.0; self.n_domains()],
        }
    }

    pub fn affinity(&self, key: &str, domain: DomainId) -> f64 {
        self.affinities(key)[domain.index()]
    }

    /// `m(w, origin, destination) = rho(w, origin) - rho(w, destination)`.
    pub fn masking_score(&self, key: &str, origin: DomainId, destination: DomainId) -> f64 {
        if origin == destination {
            return 0.0;
        }
        let rho = self.affinities(key);
        rho[origin.index()] - rho[destination.index()]
    }

    /// `ln(c[D] + 1) * rho(w, D)`.
    pub fn representing_score(&self, key: &str, domain: DomainId) -> f64 {
        match self.table.get(key) {
            Some(c) => ln(c[domain.index()] as f64 + 1.0) * self.affinity(key, domain),
            None => 0.0,
        }
    }

    /// Top unigrams of `domain` by representing score, descending, ties in
    /// lexicographic order. Only unigrams with a positive score qualify.
    pub fn representing_words(&self, domain: DomainId, top_k: usize) -> Vec<(String, f64)> {
        let mut scored: Vec<(String, f64)> = self
            .unigrams()
            .map(|(k, _)| (String::from(k), self.representing_score(k, domain)))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        scored.truncate(top_k);
        scored
    }

    /// Deterministic byte encoding; the fingerprint is its SHA-256.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, CANONICAL_VERSION);
        for a in self.config.alpha {
            out.extend_from_slice(&a.to_bits().to_le_bytes());
        }
        put_u32(&mut out, self.config.min_doc_frequency);
        put_u32(&mut out, self.config.max_order as u32);
        put_u32(&mut out, self.registry.len() as u32);
        for name in self.registry.names() {
            put_str(&mut out, name);
        }
        for &n in &self.n_docs {
            put_u32(&mut out, n);
        }
        put_u64(&mut out, self.table.len() as u64);
        for (key, counts) in &self.table {
            put_str(&mut out, key);
            for &c in counts {
                put_u32(&mut out, c);
            }
        }
        out
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let version = r.u32()?;
        if version != CANONICAL_VERSION {
            return Err(Error::Format(alloc::format!(
                "unsupported snapshot encoding version {version}"
            )));
        }
        let mut alpha = [0.0; 3];
        for a in &mut alpha {
            *a = f64::from_bits(r.u64()?);
        }
        let config = StatsConfig {
            alpha,
            min_doc_frequency: r.u32()?,
            max_order: r.u32()? as usize,
        };
        config
            .validate()
            .map_err(|e| Error::Format(alloc::format!("invalid config block: {e}")))?;
        let n = r.u32()? as usize;
        if n > u16::MAX as usize {
            return Err(Error::format("domain count out of range"));
        }
        let mut names = Vec::with_capacity(n);
        for _ in 0..n {
            names.push(r.string()?);
        }
        let registry = DomainRegistry::new(names)
            .map_err(|e| Error::Format(alloc::format!("invalid domain table: {e}")))?;
        let mut n_docs = Vec::with_capacity(n);
        for _ in 0..n {
            n_docs.push(r.u32()?);
        }
        if n_docs.contains(&0) {
            return Err(Error::format("domain with zero documents"));
        }
        let entries = r.u64()?;
        let mut table = BTreeMap::new();
        let mut prev: Option<String> = None;
        for _ in 0..entries {
            let key = r.string()?;
            if key.is_empty() || key_order(&key) > config.max_order {
                return Err(Error::format("invalid n-gram key"));
            }
            if prev.as_ref().is_some_and(|p| *p >= key) {
                return Err(Error::format("n-gram keys out of order"));
            }
            let mut counts = Vec::with_capacity(n);
            let mut total = 0u64;
            for &size in &n_docs {
                let c = r.u32()?;
                if c > size {
                    return Err(Error::format("document frequency exceeds domain size"));
                }
                total += c as u64;
                counts.push(c);
            }
            if total < config.min_doc_frequency as u64 {
                return Err(Error::format("entry below minimum document frequency"));
            }
            prev = Some(key.clone());
            table.insert(key, counts);
        }
        if r.pos != bytes.len() {
            return Err(Error::format("trailing bytes after snapshot body"));
        }
        Ok(StatsSnapshot::assemble(registry, n_docs, table, config))
    }

    fn compute_fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_bytes()).into()
    }
}

/// Normalized `(c[D] + alpha) / n[D]`.
pub fn posterior_from_counts(counts: &[u32], n_docs: &[u32], alpha: f64) -> Vec<f64> {
    let u: Vec<f64> = counts
        .iter()
        .zip(n_docs)
        .map(|(&c, &n)| (c as f64 + alpha) / n as f64)
        .collect();
    let z: f64 = u.iter().sum();
    u.into_iter().map(|x| x / z).collect()
}

/// `rho` for each domain from a posterior, natural log.
pub fn affinities_from_posterior(p: &[f64]) -> Vec<f64> {
    affinities_with_log(p, ln)
}

/// Same as [`affinities_from_posterior`] with an arbitrary logarithm. The
/// entropy ratio `H / log N` does not depend on the base.
pub fn affinities_with_log(p: &[f64], log: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = p.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: f64 = -p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * log(x))
        .sum::<f64>();
    let spread = (1.0 - h / log(n as f64)).clamp(0.0, 1.0);
    p.iter().map(|&x| (x * spread).clamp(0.0, 1.0)).collect()
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::format("unexpected end of snapshot data"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        core::str::from_utf8(b)
            .map(String::from)
            .map_err(|_| Error::format("invalid utf-8 in snapshot"))
    }
}
