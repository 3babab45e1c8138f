//! Per-domain orientation handles.
//!
//! Each domain gets `K` descriptors: its own name at index 0 followed by its
//! top `K - 1` representing words. The reconstruction step is steered toward
//! a destination domain by picking one of that domain's descriptors.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, DomainId, DomainRegistry, Stemmer};
use crate::error::{Error, Result};
use crate::reconstruct::SurfaceForms;
use crate::stats::StatsSnapshot;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationDescriptor {
    pub domain: DomainId,
    pub word: String,
    /// Stem used for presence tests against documents.
    pub stem: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationSet {
    registry: DomainRegistry,
    k: usize,
    table: Vec<Vec<OrientationDescriptor>>,
}

impl OrientationSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn registry(&self) -> &DomainRegistry {
        &self.registry
    }

    pub fn descriptors(&self, domain: DomainId) -> &[OrientationDescriptor] {
        &self.table[domain.index()]
    }

    pub fn get(&self, domain: DomainId, index: usize) -> Option<&OrientationDescriptor> {
        self.table.get(domain.index())?.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &OrientationDescriptor> + '_ {
        self.table.iter().flatten()
    }

    /// Replace computed descriptor words that are bare stems with readable
    /// spellings. Stems and the domain-name entries are untouched.
    pub fn render_words(&mut self, forms: &SurfaceForms) {
        for desc in self.table.iter_mut().flatten().filter(|d| d.index > 0) {
            if desc.word == desc.stem {
                desc.word = String::from(forms.render(&desc.stem));
            }
        }
    }

    /// Re-check the table shape, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.table.len() != self.registry.len() {
            return Err(Error::config(
                "orientation table does not match its registry",
            ));
        }
        for (d, row) in self.table.iter().enumerate() {
            if row.len() != self.k {
                return Err(Error::config("every domain needs exactly K descriptors"));
            }
            for (i, desc) in row.iter().enumerate() {
                if desc.index != i || desc.domain.index() != d {
                    return Err(Error::config("orientation descriptors out of order"));
                }
                if row[..i].iter().any(|o| o.stem == desc.stem) {
                    return Err(Error::Config(format!(
                        "duplicate orientation word {:?}",
                        desc.word
                    )));
                }
            }
            if row[0].word != self.registry.names()[d] {
                return Err(Error::config("descriptor 0 must be the domain name"));
            }
        }
        Ok(())
    }
}

/// Build `K` descriptors per domain. `overrides` maps a domain name to the
/// `K - 1` words that replace its computed representing words.
pub fn build_orientations(
    snapshot: &StatsSnapshot,
    k: usize,
    overrides: Option<&BTreeMap<String, Vec<String>>>,
    stemmer: &dyn Stemmer,
) -> Result<OrientationSet> {
    if k == 0 {
        return Err(Error::config("K must be at least 1"));
    }
    let registry = snapshot.registry().clone();
    if let Some(o) = overrides {
        if let Some(unknown) = o.keys().find(|name| registry.id_of(name).is_none()) {
            return Err(Error::Config(format!(
                "orientation override for unknown domain {unknown:?}"
            )));
        }
    }
    let stem = |w: &str| stemmer.stem(&w.to_lowercase()).to_lowercase();

    let mut table = Vec::with_capacity(registry.len());
    for (domain, name) in registry.iter() {
        let mut row = Vec::with_capacity(k);
        row.push(OrientationDescriptor {
            domain,
            word: String::from(name),
            stem: stem(name),
            index: 0,
        });
        let given = overrides.and_then(|o| {
            o.iter()
                .find(|(n, _)| n.to_lowercase() == name)
                .map(|(_, v)| v)
        });
        match given {
            Some(words) => {
                if words.len() != k - 1 {
                    return Err(Error::Config(format!(
                        "override for {name:?} lists {} words, expected {}",
                        words.len(),
                        k - 1
                    )));
                }
                for w in words {
                    let s = stem(w);
                    if row.iter().any(|d: &OrientationDescriptor| d.stem == s) {
                        return Err(Error::Config(format!(
                            "duplicate orientation word {w:?} for {name:?}"
                        )));
                    }
                    row.push(OrientationDescriptor {
                        domain,
                        index: row.len(),
                        word: w.to_lowercase(),
                        stem: s,
                    });
                }
            }
            None => {
                // One extra in case the domain name is itself a top word.
                for (w, _) in snapshot.representing_words(domain, k) {
                    if row.len() == k {
                        break;
                    }
                    if row.iter().any(|d| d.stem == w) {
                        continue;
                    }
                    row.push(OrientationDescriptor {
                        domain,
                        index: row.len(),
                        stem: w.clone(),
                        word: w,
                    });
                }
                if row.len() < k {
                    return Err(Error::Config(format!(
                        "domain {name:?} has only {} representing words, K = {k} needs {}",
                        row.len() - 1,
                        k - 1
                    )));
                }
            }
        }
        table.push(row);
    }
    Ok(OrientationSet { registry, k, table })
}

/// Pick the orientation used when training on `doc`: the domain name, or a
/// representing word whose stem occurs in the document, uniformly.
pub fn sample_training_orientation<'s, R: Rng + ?Sized>(
    doc: &Document,
    set: &'s OrientationSet,
    rng: &mut R,
) -> Result<&'s OrientationDescriptor> {
    set.registry.check(doc.domain())?;
    let row = set.descriptors(doc.domain());
    let eligible: Vec<&OrientationDescriptor> = row
        .iter()
        .filter(|d| d.index == 0 || doc.stems().contains(&d.stem))
        .collect();
    Ok(eligible[rng.gen_range(0..eligible.len())])
}
