//! The `domcf` command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use domcf_core::{apply_filter, AugmentContext, SurfaceForms};
use domcf_core::{
    build_orientations, mask, mask_for_training, report, CooccurrenceTable, CorpusConfig,
    CorruptionConfig, CounterfactualCandidate, Document, DomainClassifier, DomainId, FilterConfig,
    GenerationMode, GenerationPlan, MaskedTemplate, OrientationSet, ReconstructorKind, StatsConfig,
    StatsSnapshot, Stemmer,
};
use serde::Serialize;

use crate::client::{ClientConfig, RegisteredClient, ServiceClient, SERVICE_URL_ENV};
use crate::files::{self, read_jsonl, write_json, write_jsonl};
use crate::parallel;
use crate::stemmer::stemmer_for;

#[derive(Debug, Parser)]
#[command(
    name = "domcf",
    version,
    about = "Domain-counterfactual text augmentation"
)]
pub struct Cli {
    /// Masking threshold, strictly between -1 and 1.
    #[arg(
        long,
        global = true,
        default_value_t = 0.08,
        allow_negative_numbers = true
    )]
    pub tau: f64,
    /// Random seed. Recorded in every output that depends on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for statistics and generation.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count n-gram document frequencies over per-domain corpora.
    BuildStats(BuildStatsArgs),
    /// Mask domain-specific n-grams of documents toward a destination.
    Mask(MaskArgs),
    /// Compute per-domain orientation words.
    Orient(OrientArgs),
    /// Train the naive Bayes domain classifier used for filtering.
    TrainClassifier(TrainClassifierArgs),
    /// Generate counterfactual candidates without filtering.
    Generate(GenerateArgs),
    /// Apply the acceptance filter to generated candidates.
    Filter(FilterArgs),
    /// Run a full augmentation and write the dataset and manifest.
    Augment(AugmentArgs),
    /// Summarize an augmented dataset.
    Report(ReportArgs),
}

/// `NAME=PATH` pair naming a domain corpus.
#[derive(Debug, Clone)]
pub struct NamedPath {
    pub name: String,
    pub path: PathBuf,
}

fn parse_named_path(s: &str) -> std::result::Result<NamedPath, String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=PATH, got {s:?}"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected NAME=PATH, got {s:?}"));
    }
    Ok(NamedPath {
        name: name.to_lowercase(),
        path: PathBuf::from(path),
    })
}

#[derive(Debug, Args)]
pub struct BuildStatsArgs {
    /// Domain corpus as NAME=PATH (JSONL). Repeat once per domain.
    #[arg(long = "corpus", required = true, value_parser = parse_named_path)]
    pub corpora: Vec<NamedPath>,
    /// Output snapshot file.
    #[arg(long)]
    pub out: PathBuf,
    /// Smoothing for uni-, bi- and tri-grams.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0, 5.0, 7.0])]
    pub alpha: Vec<f64>,
    /// Drop n-grams occurring in fewer documents than this.
    #[arg(long, default_value_t = 10)]
    pub min_df: u32,
    #[arg(long, default_value_t = 3)]
    pub max_order: usize,
    /// Keep at most this many tokens per document.
    #[arg(long, default_value_t = 96)]
    pub truncate: usize,
    #[arg(long, default_value = "snowball-english")]
    pub stemmer: String,
    /// Keep surface case (stems are always lowercase).
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Statistics snapshot from build-stats.
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Input JSONL documents.
    #[arg(long)]
    pub input: PathBuf,
    /// Domain of the input documents.
    #[arg(long)]
    pub domain: String,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Destination domain. Repeatable; defaults to every other domain.
    #[arg(long = "to")]
    pub destinations: Vec<String>,
    /// Training-style masking against a random other domain.
    #[arg(long)]
    pub training: bool,
    /// Fraction of extra random positions to mask (default 0, or 0.05 with --training).
    #[arg(long)]
    pub extra_mask: Option<f64>,
    /// Output JSONL of masked templates.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OrientationArgs {
    /// Descriptors per domain, including the domain name.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Precomputed orientation file from `orient`.
    #[arg(long, conflicts_with = "overrides")]
    pub orientations: Option<PathBuf>,
    /// JSON object mapping domain names to K-1 orientation words.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OrientArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    /// Domain corpora as NAME=PATH, used to spell stemmed words readably.
    #[arg(long = "corpus", value_parser = parse_named_path)]
    pub corpora: Vec<NamedPath>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainClassifierArgs {
    /// Snapshot whose domains and tokenizer settings the model follows.
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long = "corpus", required = true, value_parser = parse_named_path)]
    pub corpora: Vec<NamedPath>,
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReconstructorChoice {
    Native,
    NativeUnoriented,
    Service,
}

#[derive(Debug, Args)]
pub struct ReconstructorArgs {
    /// Slot filler. Defaults to `service` when a service URL is set, else `native`.
    #[arg(long, value_enum)]
    pub reconstructor: Option<ReconstructorChoice>,
    /// Generation service base URL.
    #[arg(long, env = SERVICE_URL_ENV)]
    pub service: Option<String>,
    /// Weight multiplier for words co-occurring with the orientation word.
    #[arg(long, default_value_t = 4.0)]
    pub boost: f64,
    #[arg(long, default_value_t = 4)]
    pub beam_size: u32,
    #[arg(long, default_value_t = 128)]
    pub max_length: u32,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    /// Do not ask the service to restrict its vocabulary.
    #[arg(long)]
    pub no_enforce_vocabulary: bool,
}

#[derive(Debug, Args)]
pub struct FilterRuleArgs {
    #[arg(long, default_value_t = 4)]
    pub min_words: usize,
    #[arg(long, default_value_t = 0.25)]
    pub min_overlap: f64,
    /// Skip the classifier agreement rule.
    #[arg(long)]
    pub no_domain_check: bool,
    /// Trained classifier from train-classifier.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long = "to")]
    pub destinations: Vec<String>,
    #[command(flatten)]
    pub orientation: OrientationArgs,
    #[command(flatten)]
    pub reconstructor: ReconstructorArgs,
    /// Unlabeled domain corpora as NAME=PATH, used for orientation co-occurrence.
    #[arg(long = "corpus", value_parser = parse_named_path)]
    pub corpora: Vec<NamedPath>,
    /// Output JSONL of candidates.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Candidates JSONL from generate.
    #[arg(long)]
    pub candidates: PathBuf,
    #[command(flatten)]
    pub rules: FilterRuleArgs,
    /// Corpora as NAME=PATH to train the classifier when --classifier is absent.
    #[arg(long = "corpus", value_parser = parse_named_path)]
    pub corpora: Vec<NamedPath>,
    /// Output JSONL of candidates with verdicts.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long = "to")]
    pub destinations: Vec<String>,
    #[arg(long, default_value = "docogen")]
    pub mode: GenerationMode,
    #[command(flatten)]
    pub orientation: OrientationArgs,
    #[command(flatten)]
    pub reconstructor: ReconstructorArgs,
    #[command(flatten)]
    pub rules: FilterRuleArgs,
    /// Unlabeled domain corpora as NAME=PATH for co-occurrence and the classifier.
    #[arg(long = "corpus", value_parser = parse_named_path)]
    pub corpora: Vec<NamedPath>,
    /// Labeled target-domain examples as NAME=PATH for oracle mode.
    #[arg(long = "target", value_parser = parse_named_path)]
    pub targets: Vec<NamedPath>,
    /// Record that originals should be repeated this many times downstream.
    #[arg(long)]
    pub duplicate_originals: Option<usize>,
    /// Directory for augmented.jsonl, manifest.json and dataset.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// dataset.json from augment, or the directory containing it.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    if !(cli.tau > -1.0 && cli.tau < 1.0) {
        bail!("--tau must lie strictly between -1 and 1, got {}", cli.tau);
    }
    if cli.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    match &cli.command {
        Command::BuildStats(a) => build_stats(&cli, a),
        Command::Mask(a) => mask_cmd(&cli, a),
        Command::Orient(a) => orient(a),
        Command::TrainClassifier(a) => train_classifier(a),
        Command::Generate(a) => generate(&cli, a),
        Command::Filter(a) => filter(a),
        Command::Augment(a) => augment(&cli, a),
        Command::Report(a) => report_cmd(a),
    }
}

struct Session {
    snapshot: StatsSnapshot,
    corpus: CorpusConfig,
    stemmer: Box<dyn Stemmer>,
}

impl Session {
    fn open(path: &Path) -> Result<Self> {
        let (snapshot, corpus) = files::read_snapshot(path)?;
        let stemmer = stemmer_for(&corpus.stemmer)?;
        Ok(Session {
            snapshot,
            corpus,
            stemmer,
        })
    }

    fn domain(&self, name: &str) -> Result<DomainId> {
        self.snapshot
            .registry()
            .id_of(&name.to_lowercase())
            .ok_or_else(|| {
                anyhow!(
                    "unknown domain {name:?}; snapshot has {}",
                    self.snapshot.registry().names().join(", ")
                )
            })
    }

    fn load(&self, path: &Path, domain: DomainId, first_id: u64) -> Result<Vec<Document>> {
        Ok(files::load_corpus(path, domain, first_id, &self.corpus, self.stemmer.as_ref())?.docs)
    }

    fn input(&self, a: &InputArgs) -> Result<(DomainId, Vec<Document>)> {
        let d = self.domain(&a.domain)?;
        Ok((d, self.load(&a.input, d, 0)?))
    }

    /// Load named corpora with ids that do not collide with the input's.
    fn named(&self, paths: &[NamedPath]) -> Result<Vec<Document>> {
        let mut out: Vec<Document> = Vec::new();
        for np in paths {
            let d = self.domain(&np.name)?;
            let first = (1u64 << 40) + out.len() as u64;
            out.extend(self.load(&np.path, d, first)?);
        }
        Ok(out)
    }

    fn destinations(&self, names: &[String], origin: DomainId) -> Result<Vec<DomainId>> {
        if names.is_empty() {
            return Ok(self
                .snapshot
                .registry()
                .ids()
                .filter(|&d| d != origin)
                .collect());
        }
        names.iter().map(|n| self.domain(n)).collect()
    }

    fn orientations(&self, a: &OrientationArgs) -> Result<OrientationSet> {
        if let Some(p) = &a.orientations {
            return Ok(files::read_orientations(p, &self.snapshot)?);
        }
        let overrides = a
            .overrides
            .as_deref()
            .map(files::read_overrides)
            .transpose()?;
        Ok(build_orientations(
            &self.snapshot,
            a.k,
            overrides.as_ref(),
            self.stemmer.as_ref(),
        )?)
    }

    fn classifier(
        &self,
        rules: &FilterRuleArgs,
        corpora: &[NamedPath],
    ) -> Result<DomainClassifier> {
        if let Some(p) = &rules.classifier {
            let (model, _) = files::read_classifier(p)?;
            if model.registry() != self.snapshot.registry() {
                bail!(
                    "{}: classifier domains differ from the snapshot",
                    p.display()
                );
            }
            return Ok(model);
        }
        if corpora.is_empty() {
            bail!("filtering needs --classifier or --corpus NAME=PATH to train one");
        }
        let docs = self.named(corpora)?;
        Ok(DomainClassifier::train(
            self.snapshot.registry(),
            &docs,
            rules.smoothing,
        )?)
    }

    fn client(&self, a: &ReconstructorArgs) -> Result<Option<ServiceClient>> {
        if self.reconstructor_choice(a) != ReconstructorChoice::Service {
            return Ok(None);
        }
        let url = a.service.clone().ok_or_else(|| {
            anyhow!("the service reconstructor needs --service or {SERVICE_URL_ENV}")
        })?;
        let config = ClientConfig {
            timeout_ms: a.timeout_ms,
            beam_size: a.beam_size,
            enforce_vocabulary: !a.no_enforce_vocabulary,
            max_length: a.max_length,
            ..ClientConfig::new(url)
        };
        Ok(Some(ServiceClient::new(
            config,
            self.corpus.clone(),
            stemmer_for(&self.corpus.stemmer)?,
        )))
    }

    fn reconstructor_choice(&self, a: &ReconstructorArgs) -> ReconstructorChoice {
        a.reconstructor.unwrap_or(if a.service.is_some() {
            ReconstructorChoice::Service
        } else {
            ReconstructorChoice::Native
        })
    }

    fn reconstructor_kind(&self, a: &ReconstructorArgs, mode: GenerationMode) -> ReconstructorKind {
        match self.reconstructor_choice(a) {
            ReconstructorChoice::Service => ReconstructorKind::ExternalService {
                url: a.service.clone().unwrap_or_default(),
                beam_size: a.beam_size,
                enforce_vocabulary: !a.no_enforce_vocabulary,
                max_length: a.max_length,
                timeout_ms: a.timeout_ms,
            },
            ReconstructorChoice::Native if mode.oriented() => {
                ReconstructorKind::NativeOriented { boost: a.boost }
            }
            _ => ReconstructorKind::NativeUnoriented,
        }
    }
}

fn build_stats(cli: &Cli, a: &BuildStatsArgs) -> Result<()> {
    let stats = StatsConfig {
        alpha: [a.alpha[0], a.alpha[1], a.alpha[2]],
        min_doc_frequency: a.min_df,
        max_order: a.max_order,
    };
    stats.validate()?;
    let corpus = CorpusConfig {
        truncation_limit: a.truncate,
        lowercase: !a.keep_case,
        stemmer: a.stemmer.clone(),
    };
    corpus.validate()?;
    let stemmer = stemmer_for(&corpus.stemmer)?;
    for np in &a.corpora {
        if !np.path.is_file() {
            bail!("{}: no such file", np.path.display());
        }
    }
    let registry = domcf_core::DomainRegistry::new(a.corpora.iter().map(|c| c.name.as_str()))?;

    let mut docs = Vec::new();
    for np in &a.corpora {
        let d = registry.id_of(&np.name).expect("registered");
        let first = docs.len() as u64;
        docs.extend(files::load_corpus(&np.path, d, first, &corpus, stemmer.as_ref())?.docs);
    }
    let snapshot = parallel::build_stats_parallel(&registry, &docs, &stats, cli.jobs)?;
    files::write_snapshot(&a.out, &snapshot, &corpus)?;
    println!("domains: {}", snapshot.n_domains());
    for (d, name) in registry.iter() {
        println!("  {name}: {} documents", snapshot.n_docs()[d.index()]);
    }
    println!(
        "vocabulary: {} unigrams, {} n-grams",
        snapshot.unigrams().count(),
        snapshot.len()
    );
    println!("fingerprint: {}", snapshot.fingerprint_hex());
    Ok(())
}

#[derive(Serialize)]
struct MaskRecord<'a> {
    origin_id: u64,
    origin_domain: &'a str,
    /// Domain the masking scores were computed against.
    masked_toward: &'a str,
    /// Domain the template should be reconstructed into.
    destination: &'a str,
    seed: u64,
    masked_tokens: usize,
    n_tokens: usize,
    text: String,
    template: &'a MaskedTemplate,
}

fn mask_cmd(cli: &Cli, a: &MaskArgs) -> Result<()> {
    let s = Session::open(&a.input.snapshot)?;
    let (origin, docs) = s.input(&a.input)?;
    let extra = a.extra_mask.unwrap_or(if a.training { 0.05 } else { 0.0 });
    let config = CorruptionConfig {
        tau: cli.tau,
        extra_mask_fraction: extra,
        max_order: s.snapshot.config().max_order,
        rng_seed: cli.seed,
    };
    config.validate()?;
    let reg = s.snapshot.registry();
    let name = |d: DomainId| reg.name(d).unwrap_or("?");

    let mut rows: Vec<(DomainId, DomainId, MaskedTemplate)> = Vec::new();
    if a.training {
        for doc in &docs {
            let mut rng = domcf_core::corruption::doc_rng(cli.seed, doc.id());
            let (t, fake) = mask_for_training(doc, &s.snapshot, &config, &mut rng)?;
            rows.push((fake, origin, t));
        }
    } else {
        let dests = s.destinations(&a.destinations, origin)?;
        for doc in &docs {
            for &d in &dests {
                rows.push((d, d, mask(doc, d, &s.snapshot, &config)?));
            }
        }
    }
    let masked: usize = rows.iter().map(|r| r.2.masked_token_count()).sum();
    let total: usize = rows.iter().map(|r| r.2.n_tokens).sum();
    write_jsonl(
        &a.out,
        rows.iter().map(|(toward, dest, t)| MaskRecord {
            origin_id: t.origin_doc,
            origin_domain: name(t.origin_domain),
            masked_toward: name(*toward),
            destination: name(*dest),
            seed: cli.seed,
            masked_tokens: t.masked_token_count(),
            n_tokens: t.n_tokens,
            text: t.sentinel_text(),
            template: t,
        }),
    )?;
    let rate = if total == 0 {
        0.0
    } else {
        masked as f64 / total as f64
    };
    println!(
        "templates: {}, masked tokens: {masked}/{total} ({:.1}%)",
        rows.len(),
        100.0 * rate
    );
    Ok(())
}

fn orient(a: &OrientArgs) -> Result<()> {
    let s = Session::open(&a.snapshot)?;
    let overrides = a
        .overrides
        .as_deref()
        .map(files::read_overrides)
        .transpose()?;
    let mut set = build_orientations(&s.snapshot, a.k, overrides.as_ref(), s.stemmer.as_ref())?;
    set.render_words(&SurfaceForms::build(&s.named(&a.corpora)?));
    files::write_orientations(&a.out, &set, &s.snapshot)?;
    for (d, name) in s.snapshot.registry().iter() {
        let words: Vec<&str> = set.descriptors(d).iter().map(|o| o.word.as_str()).collect();
        println!("{name}: {}", words.join(", "));
    }
    Ok(())
}

fn train_classifier(a: &TrainClassifierArgs) -> Result<()> {
    let s = Session::open(&a.snapshot)?;
    let docs = s.named(&a.corpora)?;
    let model = DomainClassifier::train(s.snapshot.registry(), &docs, a.smoothing)?;
    files::write_classifier(&a.out, &model, &s.corpus)?;
    println!(
        "trained on {} documents, vocabulary {}",
        docs.len(),
        model.vocabulary_size()
    );
    Ok(())
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let s = Session::open(&a.input.snapshot)?;
    let (origin, docs) = s.input(&a.input)?;
    let destinations = s.destinations(&a.destinations, origin)?;
    let choice = s.reconstructor_choice(&a.reconstructor);
    let mode = if choice == ReconstructorChoice::NativeUnoriented {
        GenerationMode::NoOv
    } else {
        GenerationMode::Docogen
    };
    let k = a.orientation.k;
    let mut plan = GenerationPlan::new(mode, k, destinations, cli.seed);
    plan.corruption.tau = cli.tau;
    plan.corruption.max_order = s.snapshot.config().max_order;
    plan.reconstructor = s.reconstructor_kind(&a.reconstructor, mode);

    let corpora = s.named(&a.corpora)?;
    let forms = SurfaceForms::build(docs.iter().chain(&corpora));
    let mut orientations = s.orientations(&a.orientation)?;
    orientations.render_words(&forms);
    let cooc = (!corpora.is_empty()).then(|| CooccurrenceTable::build(&orientations, &corpora));
    let client = s.client(&a.reconstructor)?;
    let names = s.snapshot.registry().names().to_vec();
    let external = client.as_ref().map(|c| RegisteredClient {
        client: c,
        domain_names: &names,
    });

    let mut ctx = AugmentContext::new(&s.snapshot, &orientations);
    ctx.cooccurrence = cooc.as_ref();
    ctx.surface = Some(&forms);
    ctx.external = external.as_ref().map(|e| e as _);
    let candidates =
        parallel::generate_parallel(&docs, &plan, &ctx, cli.jobs).context("generation failed")?;
    write_jsonl(&a.out, &candidates)?;
    println!(
        "generated {} candidates from {} documents (seed {})",
        candidates.len(),
        docs.len(),
        cli.seed
    );
    Ok(())
}

fn filter(a: &FilterArgs) -> Result<()> {
    let s = Session::open(&a.input.snapshot)?;
    let (_, docs) = s.input(&a.input)?;
    let config = FilterConfig {
        min_words: a.rules.min_words,
        min_overlap: a.rules.min_overlap,
        require_domain_agreement: !a.rules.no_domain_check,
    };
    config.validate()?;
    let model = s.classifier(&a.rules, &a.corpora)?;
    let by_id: BTreeMap<u64, &Document> = docs.iter().map(|d| (d.id(), d)).collect();
    let mut candidates: Vec<CounterfactualCandidate> = read_jsonl(&a.candidates)?;
    let mut rejected: BTreeMap<&'static str, usize> = BTreeMap::new();
    for c in &mut candidates {
        let original = by_id.get(&c.origin).ok_or_else(|| {
            anyhow!(
                "{}: candidate refers to document {} missing from {}",
                a.candidates.display(),
                c.origin,
                a.input.input.display()
            )
        })?;
        let v = apply_filter(
            &c.tokens,
            &c.stems,
            c.destination,
            original,
            &model,
            &config,
        )?;
        for r in &v.reasons {
            *rejected.entry(r.as_str()).or_default() += 1;
        }
        c.verdict = Some(v);
    }
    write_jsonl(&a.out, &candidates)?;
    let accepted = candidates.iter().filter(|c| c.is_accepted()).count();
    println!("accepted {accepted} of {} candidates", candidates.len());
    for (reason, n) in rejected {
        println!("  {reason}: {n}");
    }
    Ok(())
}

fn augment(cli: &Cli, a: &AugmentArgs) -> Result<()> {
    let s = Session::open(&a.input.snapshot)?;
    let (origin, docs) = s.input(&a.input)?;
    let destinations = s.destinations(&a.destinations, origin)?;
    let k = a.orientation.k;
    let mut plan = GenerationPlan::new(a.mode, k, destinations, cli.seed);
    plan.corruption.tau = cli.tau;
    plan.corruption.max_order = s.snapshot.config().max_order;
    plan.reconstructor = s.reconstructor_kind(&a.reconstructor, a.mode);
    plan.duplicate_originals = a.duplicate_originals;
    if let Some(f) = &mut plan.filter {
        f.min_words = a.rules.min_words;
        f.min_overlap = a.rules.min_overlap;
        f.require_domain_agreement = !a.rules.no_domain_check;
    }

    let corpora = s.named(&a.corpora)?;
    let forms = SurfaceForms::build(docs.iter().chain(&corpora));
    let mut orientations = if a.mode == GenerationMode::Oracle {
        build_orientations(&s.snapshot, 1, None, s.stemmer.as_ref())?
    } else {
        s.orientations(&a.orientation)?
    };
    orientations.render_words(&forms);
    let cooc = (!corpora.is_empty()).then(|| CooccurrenceTable::build(&orientations, &corpora));
    let classifier = if plan.filter.is_some() {
        Some(s.classifier(&a.rules, &a.corpora)?)
    } else {
        None
    };
    let targets = s.named(&a.targets)?;
    let client = s.client(&a.reconstructor)?;
    let names = s.snapshot.registry().names().to_vec();
    let external = client.as_ref().map(|c| RegisteredClient {
        client: c,
        domain_names: &names,
    });

    let mut ctx = AugmentContext::new(&s.snapshot, &orientations);
    ctx.cooccurrence = cooc.as_ref();
    ctx.surface = Some(&forms);
    ctx.classifier = classifier.as_ref();
    ctx.target_pool = (a.mode == GenerationMode::Oracle).then_some(targets.as_slice());
    ctx.external = external.as_ref().map(|e| e as _);

    let dataset =
        parallel::augment_parallel(&docs, &plan, &ctx, cli.jobs).context("augmentation failed")?;
    files::write_dataset(&a.out_dir, &dataset, s.snapshot.registry())?;
    let m = &dataset.manifest;
    println!(
        "{}: {} originals, {} candidates ({} per example), {} accepted, seed {}",
        m.mode.as_str(),
        m.originals,
        m.generated,
        m.candidates_per_example,
        m.accepted,
        m.seed
    );
    Ok(())
}

fn report_cmd(a: &ReportArgs) -> Result<()> {
    let s = Session::open(&a.snapshot)?;
    let path = if a.dataset.is_dir() {
        a.dataset.join("dataset.json")
    } else {
        a.dataset.clone()
    };
    let dataset: domcf_core::AugmentedDataset = files::read_json(&path)?;
    if dataset.manifest.snapshot_fingerprint != s.snapshot.fingerprint_hex() {
        bail!(
            "{}: dataset was built from a different snapshot",
            path.display()
        );
    }
    let r = report(&dataset, &s.snapshot)?;
    if let Some(out) = &a.out {
        write_json(out, &r)?;
    }
    print!("{}", r.render_text());
    Ok(())
}

/// Parse arguments, run, and map failures to exit code 1.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
