//! Augmentation runs: for every labeled example, `K` candidates toward each
//! destination domain, optional filtering, and a summary report.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_word, Document, DomainId};
use crate::corruption::{doc_rng, mask, mask_random, CorruptionConfig, MaskedTemplate, Segment};
use crate::error::{Error, Result};
use crate::filter::{apply_filter, DomainClassifier, FilterConfig, FilterVerdict, RejectReason};
use crate::math::{ln, sqrt};
use crate::orientation::{OrientationDescriptor, OrientationSet};
use crate::reconstruct::{
    build_allowed_vocabulary, fill_native, AllowedVocabulary, CooccurrenceTable, NativeFillConfig,
    ReconstructorKind, SurfaceForms,
};
use crate::stats::StatsSnapshot;

/// Masking rate of the random-masking ablations.
pub const RANDOM_MASK_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMode {
    /// Threshold masking, oriented constrained reconstruction.
    Docogen,
    /// `Docogen` followed by the filter.
    FDocogen,
    /// Threshold masking, reconstruction without orientation.
    NoOv,
    /// Random masking, oriented reconstruction.
    RmOv,
    /// Random masking, unconstrained unoriented reconstruction.
    RmRr,
    /// Most similar same-label example of the destination domain.
    Oracle,
}

impl GenerationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GenerationMode::Docogen => "docogen",
            GenerationMode::FDocogen => "f-docogen",
            GenerationMode::NoOv => "no-ov",
            GenerationMode::RmOv => "rm-ov",
            GenerationMode::RmRr => "rm-rr",
            GenerationMode::Oracle => "oracle",
        }
    }

    pub fn random_masking(self) -> bool {
        matches!(self, GenerationMode::RmOv | GenerationMode::RmRr)
    }

    pub fn oriented(self) -> bool {
        matches!(
            self,
            GenerationMode::Docogen | GenerationMode::FDocogen | GenerationMode::RmOv
        )
    }
}

impl core::str::FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "docogen" => GenerationMode::Docogen,
            "f-docogen" => GenerationMode::FDocogen,
            "no-ov" => GenerationMode::NoOv,
            "rm-ov" => GenerationMode::RmOv,
            "rm-rr" => GenerationMode::RmRr,
            "oracle" => GenerationMode::Oracle,
            other => return Err(Error::Config(format!("unknown generation mode {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub mode: GenerationMode,
    pub k: usize,
    pub destinations: Vec<DomainId>,
    pub reconstructor: ReconstructorKind,
    pub filter: Option<FilterConfig>,
    /// Threshold masking settings; `rng_seed` is ignored in favour of `seed`.
    pub corruption: CorruptionConfig,
    pub seed: u64,
    /// Repeat each original this many times in the emitted dataset. Off
    /// (`None`) unless asked for.
    pub duplicate_originals: Option<usize>,
}

impl GenerationPlan {
    /// Plan with the reconstructor and filter that `mode` implies.
    pub fn new(mode: GenerationMode, k: usize, destinations: Vec<DomainId>, seed: u64) -> Self {
        let reconstructor = if mode.oriented() {
            ReconstructorKind::default()
        } else {
            ReconstructorKind::NativeUnoriented
        };
        GenerationPlan {
            mode,
            k,
            destinations,
            reconstructor,
            filter: (mode == GenerationMode::FDocogen).then(FilterConfig::default),
            corruption: CorruptionConfig::inference(seed),
            seed,
            duplicate_originals: None,
        }
    }

    pub fn validate(&self, ctx: &AugmentContext<'_>) -> Result<()> {
        let registry = ctx.snapshot.registry();
        if self.k == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        if self.destinations.is_empty() {
            return Err(Error::config("at least one destination domain is required"));
        }
        for (i, d) in self.destinations.iter().enumerate() {
            registry.check(*d)?;
            if self.destinations[..i].contains(d) {
                return Err(Error::config("destination domains must be distinct"));
            }
        }
        self.corruption.validate()?;
        if self.mode == GenerationMode::FDocogen && self.filter.is_none() {
            return Err(Error::config("f-docogen requires a filter"));
        }
        if let Some(f) = &self.filter {
            f.validate()?;
            if ctx.classifier.is_none() {
                return Err(Error::config("filtering requires a domain classifier"));
            }
        }
        if self.mode == GenerationMode::Oracle && ctx.target_pool.is_none() {
            return Err(Error::config("oracle mode requires a labeled target pool"));
        }
        if self.mode != GenerationMode::Oracle {
            if self.k > ctx.orientations.k() {
                return Err(Error::Config(format!(
                    "K = {} exceeds the {} orientation descriptors per domain",
                    self.k,
                    ctx.orientations.k()
                )));
            }
            if ctx.orientations.registry() != registry {
                return Err(Error::config(
                    "orientation set and snapshot disagree on domains",
                ));
            }
        }
        match (&self.reconstructor, self.mode) {
            (_, GenerationMode::Oracle | GenerationMode::RmRr) => {}
            (ReconstructorKind::NativeOriented { .. }, m) if !m.oriented() => {
                return Err(Error::Config(format!(
                    "{} does not use orientation; use the unoriented reconstructor",
                    m.as_str()
                )))
            }
            (ReconstructorKind::NativeUnoriented, m) if m.oriented() => {
                return Err(Error::Config(format!(
                    "{} needs an oriented reconstructor",
                    m.as_str()
                )))
            }
            (ReconstructorKind::ExternalService { .. }, _) if ctx.external.is_none() => {
                return Err(Error::config(
                    "external reconstructor selected but no client given",
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Reconstruction delegated to a generation service.
pub trait ExternalReconstructor: Sync {
    /// Returns surface tokens and their stems.
    fn reconstruct(
        &self,
        template: &MaskedTemplate,
        orientation: &OrientationDescriptor,
        vocab: &AllowedVocabulary,
    ) -> Result<(Vec<String>, Vec<String>)>;
}

/// Read-only inputs shared by every augmentation step.
#[derive(Clone, Copy)]
pub struct AugmentContext<'a> {
    pub snapshot: &'a StatsSnapshot,
    pub orientations: &'a OrientationSet,
    pub cooccurrence: Option<&'a CooccurrenceTable>,
    pub classifier: Option<&'a DomainClassifier>,
    pub target_pool: Option<&'a [Document]>,
    pub external: Option<&'a dyn ExternalReconstructor>,
    /// Spellings for words emitted by the native filler. Without it the
    /// filler emits stems.
    pub surface: Option<&'a SurfaceForms>,
}

impl<'a> AugmentContext<'a> {
    pub fn new(snapshot: &'a StatsSnapshot, orientations: &'a OrientationSet) -> Self {
        AugmentContext {
            snapshot,
            orientations,
            cooccurrence: None,
            classifier: None,
            target_pool: None,
            external: None,
            surface: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualCandidate {
    pub origin: u64,
    pub origin_domain: DomainId,
    pub label: Option<String>,
    pub destination: DomainId,
    pub orientation_index: usize,
    pub orientation: Option<OrientationDescriptor>,
    pub source: GenerationMode,
    pub text: String,
    pub tokens: Vec<String>,
    pub stems: Vec<String>,
    pub template: Option<MaskedTemplate>,
    pub slot_fills: Vec<Vec<String>>,
    pub degenerate: bool,
    pub verdict: Option<FilterVerdict>,
}

impl CounterfactualCandidate {
    /// Unfiltered candidates count as accepted.
    pub fn is_accepted(&self) -> bool {
        self.verdict.as_ref().is_none_or(|v| v.accepted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub destination: String,
    pub orientation_index: usize,
    pub generated: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: GenerationMode,
    pub k: usize,
    pub destinations: Vec<String>,
    pub seed: u64,
    pub snapshot_fingerprint: String,
    pub corruption: CorruptionConfig,
    pub filter: Option<FilterConfig>,
    pub reconstructor: ReconstructorKind,
    pub duplicate_originals: Option<usize>,
    pub originals: usize,
    pub candidates_per_example: usize,
    pub generated: usize,
    pub accepted: usize,
    pub cells: Vec<CellCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDataset {
    pub originals: Vec<Document>,
    /// Every generated candidate, in generation order, with its verdict.
    pub candidates: Vec<CounterfactualCandidate>,
    pub manifest: Manifest,
}

impl AugmentedDataset {
    pub fn accepted(&self) -> impl Iterator<Item = &CounterfactualCandidate> + '_ {
        self.candidates.iter().filter(|c| c.is_accepted())
    }
}

/// Score-admitted destination words; independent of the example.
fn admitted_words(
    snapshot: &StatsSnapshot,
    destinations: &[DomainId],
    tau: f64,
) -> Result<BTreeMap<DomainId, AllowedVocabulary>> {
    let empty = Document::from_tokens(0, DomainId(0), Vec::new(), Vec::new(), None)?;
    destinations
        .iter()
        .map(|&d| Ok((d, build_allowed_vocabulary(snapshot, d, &empty, tau)?)))
        .collect()
}

/// Stems of the kept positions of `template`, interleaved with `fills`.
fn candidate_stems(
    doc: &Document,
    template: &MaskedTemplate,
    fills: &[Vec<String>],
) -> Vec<String> {
    let mut out = Vec::with_capacity(doc.len());
    let mut pos = 0;
    let mut slot = 0;
    for seg in &template.segments {
        match seg {
            Segment::Keep(t) => {
                out.extend(doc.stems()[pos..pos + t.len()].iter().cloned());
                pos += t.len();
            }
            Segment::Slot { end, .. } => {
                out.extend(fills[slot].iter().cloned());
                slot += 1;
                pos = *end;
            }
        }
    }
    out
}

/// Kept tokens of `template` with slot fills spelled via `forms`.
fn render_fill(
    template: &MaskedTemplate,
    fills: &[Vec<String>],
    forms: &SurfaceForms,
) -> Vec<String> {
    let mut out = Vec::with_capacity(template.n_tokens);
    let mut slot = 0;
    for seg in &template.segments {
        match seg {
            Segment::Keep(t) => out.extend(t.iter().cloned()),
            Segment::Slot { .. } => {
                out.extend(fills[slot].iter().map(|w| String::from(forms.render(w))));
                slot += 1;
            }
        }
    }
    out
}

/// Candidates for one labeled example, in `(destination, orientation)` order.
pub fn generate_for_example(
    doc: &Document,
    plan: &GenerationPlan,
    ctx: &AugmentContext<'_>,
    admitted: &BTreeMap<DomainId, AllowedVocabulary>,
) -> Result<Vec<CounterfactualCandidate>> {
    let snapshot = ctx.snapshot;
    if plan.destinations.contains(&doc.domain()) {
        return Err(Error::Config(format!(
            "example {} already belongs to destination domain {}",
            doc.id(),
            doc.domain()
        )));
    }
    let mut rng = doc_rng(plan.seed, doc.id());
    let corruption = CorruptionConfig {
        rng_seed: plan.seed,
        ..plan.corruption.clone()
    };
    let fill_config = match (&plan.reconstructor, plan.mode) {
        (_, GenerationMode::RmRr) => NativeFillConfig::unconstrained(),
        (ReconstructorKind::NativeOriented { boost }, _) => NativeFillConfig::oriented(*boost),
        _ => NativeFillConfig::unoriented(),
    };
    let original_stems: BTreeSet<String> = doc.stems().iter().cloned().collect();

    let mut out = Vec::with_capacity(plan.k * plan.destinations.len());
    for &dest in &plan.destinations {
        if plan.mode == GenerationMode::Oracle {
            let pool = ctx.target_pool.unwrap_or(&[]);
            let in_domain: Vec<Document> = pool
                .iter()
                .filter(|d| d.domain() == dest)
                .cloned()
                .collect();
            let ranked = oracle_rank(doc, &in_domain, &TfIdfEmbedder)?;
            for k in 0..plan.k {
                let m = ranked[k % ranked.len()];
                out.push(CounterfactualCandidate {
                    origin: doc.id(),
                    origin_domain: doc.domain(),
                    label: doc.label().map(String::from),
                    destination: dest,
                    orientation_index: k,
                    orientation: None,
                    source: plan.mode,
                    text: String::from(m.text()),
                    tokens: m.tokens().to_vec(),
                    stems: m.stems().to_vec(),
                    template: None,
                    slot_fills: Vec::new(),
                    degenerate: false,
                    verdict: None,
                });
            }
            continue;
        }

        let mut vocab = admitted[&dest].clone();
        vocab.original = original_stems.clone();
        let threshold_template = if plan.mode.random_masking() {
            None
        } else {
            Some(mask(doc, dest, snapshot, &corruption)?)
        };

        for k in 0..plan.k {
            let template = match &threshold_template {
                Some(t) => t.clone(),
                None => {
                    let mut t = mask_random(doc, RANDOM_MASK_FRACTION, &mut rng)?;
                    t.destination_domain = dest;
                    t
                }
            };
            let descriptor = ctx.orientations.get(dest, k).cloned();
            let oriented = plan.mode.oriented();

            let (tokens, stems, slot_fills, degenerate) = match (&plan.reconstructor, ctx.external)
            {
                (ReconstructorKind::ExternalService { .. }, Some(ext))
                    if plan.mode != GenerationMode::RmRr =>
                {
                    let o = descriptor
                        .clone()
                        .ok_or_else(|| Error::config("missing orientation descriptor"))?;
                    let (t, s) = ext.reconstruct(&template, &o, &vocab)?;
                    (t, s, Vec::new(), false)
                }
                _ => {
                    let fill = fill_native(
                        &template,
                        descriptor.as_ref().filter(|_| oriented),
                        snapshot,
                        &vocab,
                        ctx.cooccurrence,
                        &fill_config,
                        &mut rng,
                    )?;
                    let stems = candidate_stems(doc, &template, &fill.slot_fills);
                    let tokens = match ctx.surface {
                        Some(forms) => render_fill(&template, &fill.slot_fills, forms),
                        None => fill.tokens,
                    };
                    (tokens, stems, fill.slot_fills, fill.degenerate)
                }
            };
            out.push(CounterfactualCandidate {
                origin: doc.id(),
                origin_domain: doc.domain(),
                label: doc.label().map(String::from),
                destination: dest,
                orientation_index: k,
                orientation: descriptor.filter(|_| oriented),
                source: plan.mode,
                text: tokens.join(" "),
                tokens,
                stems,
                template: Some(template),
                slot_fills,
                degenerate,
                verdict: None,
            });
        }
    }

    if let (Some(cfg), Some(model)) = (&plan.filter, ctx.classifier) {
        for c in &mut out {
            c.verdict = Some(apply_filter(
                &c.tokens,
                &c.stems,
                c.destination,
                doc,
                model,
                cfg,
            )?);
        }
    }
    Ok(out)
}

/// Shared per-run state that can be computed once before fanning out over
/// examples.
pub struct PreparedRun {
    admitted: BTreeMap<DomainId, AllowedVocabulary>,
}

impl PreparedRun {
    pub fn new(plan: &GenerationPlan, ctx: &AugmentContext<'_>) -> Result<Self> {
        plan.validate(ctx)?;
        let admitted = if plan.mode == GenerationMode::Oracle {
            BTreeMap::new()
        } else {
            admitted_words(ctx.snapshot, &plan.destinations, plan.corruption.tau)?
        };
        Ok(PreparedRun { admitted })
    }

    pub fn generate(
        &self,
        doc: &Document,
        plan: &GenerationPlan,
        ctx: &AugmentContext<'_>,
    ) -> Result<Vec<CounterfactualCandidate>> {
        generate_for_example(doc, plan, ctx, &self.admitted)
    }
}

/// Generate, filter and package candidates for every labeled example.
pub fn augment(
    labeled: &[Document],
    plan: &GenerationPlan,
    ctx: &AugmentContext<'_>,
) -> Result<AugmentedDataset> {
    let prepared = PreparedRun::new(plan, ctx)?;
    let mut candidates = Vec::with_capacity(labeled.len() * plan.k * plan.destinations.len());
    for doc in labeled {
        candidates.extend(prepared.generate(doc, plan, ctx)?);
    }
    assemble_dataset(labeled.to_vec(), candidates, plan, ctx.snapshot)
}

/// Attach the manifest. Candidates must be in example order.
pub fn assemble_dataset(
    originals: Vec<Document>,
    candidates: Vec<CounterfactualCandidate>,
    plan: &GenerationPlan,
    snapshot: &StatsSnapshot,
) -> Result<AugmentedDataset> {
    for doc in &originals {
        if doc.label().is_none() {
            return Err(Error::Config(format!(
                "example {} has no task label",
                doc.id()
            )));
        }
    }
    let registry = snapshot.registry();
    let name = |d: DomainId| String::from(registry.name(d).unwrap_or("?"));
    let mut cells: BTreeMap<(DomainId, usize), (usize, usize)> = BTreeMap::new();
    for &d in &plan.destinations {
        for k in 0..plan.k {
            cells.insert((d, k), (0, 0));
        }
    }
    for c in &candidates {
        let e = cells
            .entry((c.destination, c.orientation_index))
            .or_default();
        e.0 += 1;
        e.1 += c.is_accepted() as usize;
    }
    let manifest = Manifest {
        mode: plan.mode,
        k: plan.k,
        destinations: plan.destinations.iter().map(|&d| name(d)).collect(),
        seed: plan.seed,
        snapshot_fingerprint: snapshot.fingerprint_hex(),
        corruption: CorruptionConfig {
            rng_seed: plan.seed,
            ..plan.corruption.clone()
        },
        filter: plan.filter.clone(),
        reconstructor: plan.reconstructor.clone(),
        duplicate_originals: plan.duplicate_originals,
        originals: originals.len(),
        candidates_per_example: plan.k * plan.destinations.len(),
        generated: candidates.len(),
        accepted: candidates.iter().filter(|c| c.is_accepted()).count(),
        cells: cells
            .into_iter()
            .map(|((d, k), (g, a))| CellCount {
                destination: name(d),
                orientation_index: k,
                generated: g,
                accepted: a,
            })
            .collect(),
    };
    Ok(AugmentedDataset {
        originals,
        candidates,
        manifest,
    })
}

/// Similarity of a query to each of several documents.
pub trait Embedder {
    fn similarities(&self, query: &Document, pool: &[&Document]) -> Vec<f64>;
}

/// TF-IDF cosine over stemmed unigrams, with smoothed
/// `idf = ln((1 + n) / (1 + df)) + 1` fit on the pool plus the query.
#[derive(Debug, Default, Clone, Copy)]
pub struct TfIdfEmbedder;

impl TfIdfEmbedder {
    fn term_counts(doc: &Document) -> BTreeMap<&str, f64> {
        let mut tf = BTreeMap::new();
        for s in doc.stems() {
            *tf.entry(s.as_str()).or_insert(0.0) += 1.0;
        }
        tf
    }
}

impl Embedder for TfIdfEmbedder {
    fn similarities(&self, query: &Document, pool: &[&Document]) -> Vec<f64> {
        let n = (pool.len() + 1) as f64;
        let tfs: Vec<BTreeMap<&str, f64>> = pool.iter().map(|d| Self::term_counts(d)).collect();
        let qtf = Self::term_counts(query);
        let mut df: BTreeMap<&str, f64> = BTreeMap::new();
        for tf in tfs.iter().chain(core::iter::once(&qtf)) {
            for &w in tf.keys() {
                *df.entry(w).or_insert(0.0) += 1.0;
            }
        }
        let weigh = |tf: &BTreeMap<&str, f64>| -> BTreeMap<String, f64> {
            tf.iter()
                .map(|(w, c)| (String::from(*w), c * (ln((1.0 + n) / (1.0 + df[w])) + 1.0)))
                .collect()
        };
        let q = weigh(&qtf);
        let qn = sqrt(q.values().map(|x| x * x).sum());
        tfs.iter()
            .map(|tf| {
                let v = weigh(tf);
                let vn = sqrt(v.values().map(|x| x * x).sum());
                if qn == 0.0 || vn == 0.0 {
                    return 0.0;
                }
                let dot: f64 = q
                    .iter()
                    .map(|(w, x)| x * v.get(w).copied().unwrap_or(0.0))
                    .sum();
                dot / (qn * vn)
            })
            .collect()
    }
}

/// Same-label pool members ordered by similarity, lowest doc id on ties.
pub fn oracle_rank<'p>(
    example: &Document,
    pool: &'p [Document],
    embedder: &dyn Embedder,
) -> Result<Vec<&'p Document>> {
    let same: Vec<&Document> = pool
        .iter()
        .filter(|d| d.label().is_some() && d.label() == example.label())
        .collect();
    if same.is_empty() {
        return Err(Error::Config(format!(
            "no pool example with label {:?}",
            example.label().unwrap_or("")
        )));
    }
    let sims = embedder.similarities(example, &same);
    let mut order: Vec<usize> = (0..same.len()).collect();
    order.sort_by(|&a, &b| {
        sims[b]
            .partial_cmp(&sims[a])
            .unwrap_or(Ordering::Equal)
            .then(same[a].id().cmp(&same[b].id()))
    });
    Ok(order.into_iter().map(|i| same[i]).collect())
}

/// The most similar same-label example of `pool`.
pub fn oracle_match<'p>(
    example: &Document,
    pool: &'p [Document],
    embedder: &dyn Embedder,
) -> Result<&'p Document> {
    Ok(oracle_rank(example, pool, embedder)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationSummary {
    pub destination: String,
    pub generated: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub mean_destination_affinity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub domains: Vec<String>,
    /// `[origin][destination]` percentage of original tokens masked by the
    /// threshold masker; 0 where no originals exist.
    pub masking_rate: Vec<Vec<f64>>,
    pub masking_counts: Vec<Vec<usize>>,
    pub generated: usize,
    pub accepted: usize,
    /// Candidates failing each rule; a candidate may fail several.
    pub rejections_by_reason: BTreeMap<String, usize>,
    /// Each rejected candidate counted once, under its first failed rule.
    pub rejections_by_first_reason: BTreeMap<String, usize>,
    pub destinations: Vec<DestinationSummary>,
    pub mean_destination_affinity: f64,
}

/// Mean `rho(w, destination)` over the word stems of `stems`.
pub fn mean_destination_affinity(
    snapshot: &StatsSnapshot,
    stems: &[String],
    destination: DomainId,
) -> f64 {
    let words: Vec<&String> = stems.iter().filter(|s| is_word(s)).collect();
    if words.is_empty() {
        return 0.0;
    }
    words
        .iter()
        .map(|w| snapshot.affinity(w, destination))
        .sum::<f64>()
        / words.len() as f64
}

/// Percent masked and token totals, indexed `[origin][destination]`.
pub type MaskingMatrix = (Vec<Vec<f64>>, Vec<Vec<usize>>);

/// Per `(origin, destination)` masking rates of `docs` under the threshold
/// masker, destination = origin included.
pub fn masking_rate_matrix(
    docs: &[Document],
    snapshot: &StatsSnapshot,
    config: &CorruptionConfig,
) -> Result<MaskingMatrix> {
    let n = snapshot.n_domains();
    let mut masked = vec![vec![0usize; n]; n];
    let mut total = vec![vec![0usize; n]; n];
    for doc in docs {
        let o = doc.domain();
        snapshot.registry().check(o)?;
        for dest in snapshot.registry().ids() {
            let t = mask(doc, dest, snapshot, config)?;
            masked[o.index()][dest.index()] += t.masked_token_count();
            total[o.index()][dest.index()] += t.n_tokens;
        }
    }
    let rates = masked
        .iter()
        .zip(&total)
        .map(|(m, t)| {
            m.iter()
                .zip(t)
                .map(|(&m, &t)| {
                    if t == 0 {
                        0.0
                    } else {
                        100.0 * m as f64 / t as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok((rates, total))
}

pub fn report(dataset: &AugmentedDataset, snapshot: &StatsSnapshot) -> Result<Report> {
    let registry = snapshot.registry();
    let config = CorruptionConfig {
        extra_mask_fraction: 0.0,
        ..dataset.manifest.corruption.clone()
    };
    let (masking_rate, masking_counts) =
        masking_rate_matrix(&dataset.originals, snapshot, &config)?;

    let mut by_reason: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_first: BTreeMap<String, usize> = BTreeMap::new();
    for r in RejectReason::ALL {
        by_reason.insert(String::from(r.as_str()), 0);
        by_first.insert(String::from(r.as_str()), 0);
    }
    let mut per_dest: BTreeMap<DomainId, (usize, usize, f64)> = BTreeMap::new();
    let mut affinity_sum = 0.0;
    let mut accepted = 0;
    for c in &dataset.candidates {
        let e = per_dest.entry(c.destination).or_default();
        e.0 += 1;
        if c.is_accepted() {
            let a = mean_destination_affinity(snapshot, &c.stems, c.destination);
            e.1 += 1;
            e.2 += a;
            affinity_sum += a;
            accepted += 1;
        } else if let Some(v) = &c.verdict {
            for r in &v.reasons {
                *by_reason.entry(String::from(r.as_str())).or_default() += 1;
            }
            if let Some(r) = v.reasons.first() {
                *by_first.entry(String::from(r.as_str())).or_default() += 1;
            }
        }
    }
    let destinations = per_dest
        .into_iter()
        .map(|(d, (g, a, s))| DestinationSummary {
            destination: String::from(registry.name(d).unwrap_or("?")),
            generated: g,
            accepted: a,
            acceptance_rate: if g == 0 { 0.0 } else { a as f64 / g as f64 },
            mean_destination_affinity: if a == 0 { 0.0 } else { s / a as f64 },
        })
        .collect();
    Ok(Report {
        domains: registry.names().to_vec(),
        masking_rate,
        masking_counts,
        generated: dataset.candidates.len(),
        accepted,
        rejections_by_reason: by_reason,
        rejections_by_first_reason: by_first,
        destinations,
        mean_destination_affinity: if accepted == 0 {
            0.0
        } else {
            affinity_sum / accepted as f64
        },
    })
}

impl Report {
    /// Plain-text rendering for terminals and logs.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let width = self
            .domains
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(8);
        let _ = writeln!(
            s,
            "masking rate (% of tokens), rows = origin, columns = destination"
        );
        let _ = write!(s, "{:width$}", "");
        for d in &self.domains {
            let _ = write!(s, " {d:>width$}");
        }
        let _ = writeln!(s);
        for (name, row) in self.domains.iter().zip(&self.masking_rate) {
            let _ = write!(s, "{name:width$}");
            for v in row {
                let _ = write!(s, " {v:>width$.1}");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "generated {} / accepted {}",
            self.generated, self.accepted
        );
        for (r, n) in &self.rejections_by_first_reason {
            let _ = writeln!(
                s,
                "  rejected ({r}): {n} first reason, {} total",
                self.rejections_by_reason.get(r).copied().unwrap_or(0)
            );
        }
        for d in &self.destinations {
            let _ = writeln!(
                s,
                "  -> {}: {}/{} accepted ({:.1}%), mean affinity {:.4}",
                d.destination,
                d.accepted,
                d.generated,
                100.0 * d.acceptance_rate,
                d.mean_destination_affinity
            );
        }
        let _ = writeln!(
            s,
            "mean destination affinity of accepted: {:.4}",
            self.mean_destination_affinity
        );
        s
    }
}
