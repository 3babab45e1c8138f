//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use domcf::SnowballStemmer;
use domcf_core::pipeline::masking_rate_matrix;
use domcf_core::{
    apply_filter, augment, build_orientations, build_stats, mask, word_overlap, AugmentContext,
    CooccurrenceTable, CorpusConfig, CorruptionConfig, Document, DomainClassifier, DomainId,
    DomainRegistry, FilterConfig, GenerationMode, GenerationPlan, IdentityStemmer, MaskReason,
    RejectReason, StatsConfig, StatsSnapshot, Stemmer,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        if let false = $cond {
            return Err(format!($($msg)*));
        }
    };
}

fn doc(id: u64, d: u16, text: &str, stemmer: &dyn Stemmer) -> Document {
    Document::from_text(
        id,
        DomainId(d),
        text,
        Some(if id.is_multiple_of(2) {
            "pos".into()
        } else {
            "neg".into()
        }),
        &CorpusConfig::default(),
        stemmer,
    )
}

/// Random corpus with per-domain word preferences.
struct RandomCorpus {
    registry: DomainRegistry,
    docs: Vec<Document>,
    config: StatsConfig,
}

fn random_corpus(rng: &mut ChaCha8Rng) -> RandomCorpus {
    let n = rng.gen_range(2..=6);
    let vocab = rng.gen_range(4..=25);
    let names: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
    let registry = DomainRegistry::new(names).unwrap();
    let mut docs = Vec::new();
    for d in 0..n {
        let weights: Vec<f64> = (0..vocab).map(|_| rng.gen::<f64>().powi(3)).collect();
        let total: f64 = weights.iter().sum();
        for _ in 0..rng.gen_range(1..=50) {
            let len = rng.gen_range(0..=12);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let mut x = rng.gen::<f64>() * total;
                    for (i, w) in weights.iter().enumerate() {
                        x -= w;
                        if x <= 0.0 {
                            return format!("w{i}");
                        }
                    }
                    format!("w{}", vocab - 1)
                })
                .collect();
            let id = docs.len() as u64;
            docs.push(doc(id, d as u16, &words.join(" "), &IdentityStemmer));
        }
    }
    let alpha = if rng.gen_bool(0.5) {
        [1.0, 5.0, 7.0]
    } else {
        [
            rng.gen_range(0.1..3.0),
            rng.gen_range(0.1..8.0),
            rng.gen_range(0.1..10.0),
        ]
    };
    let config = StatsConfig {
        alpha,
        min_doc_frequency: rng.gen_range(1..=3),
        max_order: 3,
    };
    RandomCorpus {
        registry,
        docs,
        config,
    }
}

/// Direct evaluation of the score formulas from raw documents.
struct Oracle<'a> {
    c: &'a RandomCorpus,
}

impl Oracle<'_> {
    fn n_docs(&self, d: usize) -> f64 {
        self.c
            .docs
            .iter()
            .filter(|x| x.domain().index() == d)
            .count() as f64
    }

    fn df(&self, gram: &[String], d: usize) -> f64 {
        self.c
            .docs
            .iter()
            .filter(|x| x.domain().index() == d && x.stems().windows(gram.len()).any(|w| w == gram))
            .count() as f64
    }

    fn posterior(&self, gram: &[String]) -> Vec<f64> {
        let alpha = self.c.config.alpha[gram.len() - 1];
        let raw: Vec<f64> = (0..self.c.registry.len())
            .map(|d| (self.df(gram, d) + alpha) / self.n_docs(d))
            .collect();
        let z: f64 = raw.iter().sum();
        raw.iter().map(|r| r / z).collect()
    }

    fn affinity(&self, gram: &[String]) -> Vec<f64> {
        let p = self.posterior(gram);
        let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
        let n = p.len() as f64;
        p.iter()
            .map(|&x| (x * (1.0 - h / n.ln())).clamp(0.0, 1.0))
            .collect()
    }

    /// Every n-gram in the corpus whose total document frequency passes the cut.
    fn vocabulary(&self) -> BTreeSet<Vec<String>> {
        let mut all = BTreeSet::new();
        for d in &self.c.docs {
            for k in 1..=3 {
                for w in d.stems().windows(k) {
                    all.insert(w.to_vec());
                }
            }
        }
        all.into_iter()
            .filter(|g| {
                let total: f64 = (0..self.c.registry.len()).map(|d| self.df(g, d)).sum();
                total >= self.c.config.min_doc_frequency as f64
            })
            .collect()
    }
}

fn snapshot_of(c: &RandomCorpus) -> StatsSnapshot {
    build_stats(&c.registry, &c.docs, &c.config).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut grams = 0usize;
    let mut worst = 0.0f64;
    let corpora = 120;
    for i in 0..corpora {
        let c = random_corpus(&mut rng);
        let s = snapshot_of(&c);
        let o = Oracle { c: &c };
        let vocab = o.vocabulary();
        let keys: BTreeSet<Vec<String>> = s
            .entries()
            .map(|(k, _)| k.split(' ').map(String::from).collect())
            .collect();
        check!(
            keys == vocab,
            "corpus {i}: retained n-grams differ from the oracle"
        );
        let n = c.registry.len();
        for g in &vocab {
            let key = g.join(" ");
            let p = s.posterior(&key).unwrap();
            let rho = s.affinities(&key);
            let (op, orho) = (o.posterior(g), o.affinity(g));
            for d in 0..n {
                worst = worst
                    .max((p[d] - op[d]).abs())
                    .max((rho[d] - orho[d]).abs());
                for e in 0..n {
                    let m = s.masking_score(&key, DomainId(d as u16), DomainId(e as u16));
                    worst = worst.max((m - (orho[d] - orho[e])).abs());
                }
            }
            grams += 1;
        }
    }
    let elapsed = start.elapsed();
    check!(worst <= 1e-9, "max deviation {worst:e} exceeds 1e-9");
    check!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "{corpora} corpora, {grams} n-grams, max deviation {worst:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_2() -> Outcome {
    // Reference values computed independently for P = (5/6, 1/6), N = 2.
    const RHO: [f64; 2] = [0.2916479819597049, 0.05832959639194098];
    const M: f64 = 0.23331838556776396;
    let reg = DomainRegistry::new(["a", "b"]).unwrap();
    let mut docs = Vec::new();
    for i in 0..10 {
        let t = if i < 4 { "w x" } else { "x y" };
        docs.push(doc(i, 0, t, &IdentityStemmer));
        docs.push(doc(100 + i, 1, "y z", &IdentityStemmer));
    }
    let cfg = StatsConfig {
        alpha: [1.0, 5.0, 7.0],
        min_doc_frequency: 1,
        max_order: 3,
    };
    let s = build_stats(&reg, &docs, &cfg).unwrap();
    let p = s.posterior("w").unwrap();
    check!(
        (p[0] - 5.0 / 6.0).abs() < 1e-12 && (p[1] - 1.0 / 6.0).abs() < 1e-12,
        "P = {p:?}"
    );
    let rho = s.affinities("w");
    for d in 0..2 {
        check!((rho[d] - RHO[d]).abs() < 1e-4, "rho = {rho:?}");
    }
    let m = s.masking_score("w", DomainId(0), DomainId(1));
    check!((m - M).abs() < 1e-4, "m = {m}");
    check!(m > 0.08, "m below threshold");
    let t = mask(&docs[0], DomainId(1), &s, &CorruptionConfig::inference(0)).unwrap();
    check!(
        t.spans
            .iter()
            .any(|sp| sp.key == "w" && sp.reason == MaskReason::Threshold),
        "w was not masked"
    );
    Ok(format!(
        "P = ({:.5}, {:.5}), rho = ({:.5}, {:.5}), m = {m:.5}, masked",
        p[0], p[1], rho[0], rho[1]
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut pairs = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..60 {
        let c = random_corpus(&mut rng);
        let s = snapshot_of(&c);
        let n = c.registry.len() as u16;
        for (key, _) in s.entries() {
            for r in s.affinities(key) {
                check!((0.0..=1.0).contains(&r), "rho({key}) = {r}");
            }
            for a in 0..n {
                let da = DomainId(a);
                check!(s.masking_score(key, da, da) == 0.0, "m({key}, D, D) != 0");
                for b in 0..n {
                    let m = s.masking_score(key, DomainId(a), DomainId(b));
                    let back = s.masking_score(key, DomainId(b), DomainId(a));
                    check!((-1.0..=1.0).contains(&m), "m({key}) = {m}");
                    worst = worst.max((m + back).abs());
                    pairs += 1;
                }
            }
        }
    }
    check!(worst <= 1e-12, "antisymmetry deviation {worst:e}");
    Ok(format!(
        "{pairs} ordered pairs, antisymmetry deviation {worst:.1e}"
    ))
}

fn entertainment_scenario() -> Outcome {
    let st = SnowballStemmer::english();
    let reg = DomainRegistry::new(["airline", "kitchen"]).unwrap();
    let mut docs = Vec::new();
    for i in 0..10 {
        let a = if i < 6 {
            "the entertainment system was broken"
        } else {
            "the seat was fine"
        };
        let k = if i < 6 {
            "the cooling system works"
        } else {
            "the oven works"
        };
        docs.push(doc(i, 0, a, &st));
        docs.push(doc(100 + i, 1, k, &st));
    }
    let cfg = StatsConfig {
        min_doc_frequency: 2,
        ..StatsConfig::default()
    };
    let s = build_stats(&reg, &docs, &cfg).unwrap();
    let x = doc(999, 0, "the entertainment system was broken", &st);
    let t = mask(&x, DomainId(1), &s, &CorruptionConfig::inference(0)).unwrap();
    let ent = x.stems()[1].clone();
    let m_ent = s.masking_score(&ent, DomainId(0), DomainId(1));
    let m_sys = s.masking_score("system", DomainId(0), DomainId(1));
    check!(m_ent > 0.08 && m_sys <= 0.08, "scores {m_ent} / {m_sys}");
    check!(
        t.spans.iter().any(|sp| sp.start == 1 && sp.end == 2),
        "'entertainment' not masked"
    );
    check!(
        !t.spans.iter().any(|sp| sp.start <= 2 && sp.end > 2),
        "'system' was masked"
    );
    Ok(format!(
        "m(entertainment) = {m_ent:.3}, m(system) = {m_sys:.3}"
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut checked = 0usize;
    let mut spans = 0usize;
    let mut threshold = 0usize;
    while checked < 1200 {
        let c = random_corpus(&mut rng);
        let s = snapshot_of(&c);
        let n = c.registry.len() as u16;
        for (i, d) in c.docs.iter().enumerate() {
            let dest = loop {
                let x = DomainId(rng.gen_range(0..n));
                if x != d.domain() {
                    break x;
                }
            };
            let mut cfg = CorruptionConfig::inference(i as u64);
            if i % 2 == 1 {
                cfg.extra_mask_fraction = 0.05;
            }
            let t = mask(d, dest, &s, &cfg).map_err(|e| e.to_string())?;
            let mut covered = vec![false; d.len()];
            for sp in &t.spans {
                if sp.reason == MaskReason::Threshold {
                    let key = d.stems()[sp.start..sp.end].join(" ");
                    check!(key == sp.key, "span key {} != {key}", sp.key);
                    let m = s.masking_score(&key, d.domain(), dest);
                    check!(m > cfg.tau, "masked {key} rescored {m}");
                    threshold += 1;
                }
                for (p, seen) in covered.iter_mut().enumerate().take(sp.end).skip(sp.start) {
                    check!(!*seen, "overlapping spans at {p}");
                    *seen = true;
                }
                spans += 1;
            }
            check!(
                t.original_tokens() == d.tokens(),
                "reconstruction identity broken"
            );
            check!(
                t.masked_token_count() + t.kept_tokens().count() == d.len(),
                "masked + kept != length"
            );
            checked += 1;
        }
    }
    let scenario = entertainment_scenario()?;
    check!(threshold > 0, "no threshold spans were produced");
    Ok(format!(
        "{checked} documents, {spans} spans ({threshold} by threshold); {scenario}"
    ))
}

const THEMES: [&[&str]; 5] = [
    &[
        "flight", "seat", "crew", "pilot", "luggage", "gate", "boarding", "plane",
    ],
    &[
        "knife", "blade", "pan", "oven", "spatula", "handle", "steel", "kettle",
    ],
    &[
        "novel", "author", "plot", "chapter", "story", "page", "reader", "ending",
    ],
    &[
        "album", "song", "guitar", "lyrics", "band", "track", "drummer", "chorus",
    ],
    &[
        "hose", "soil", "seeds", "shovel", "lawn", "plants", "compost", "rake",
    ],
];
const SHARED: &[&str] = &[
    "the", "was", "very", "good", "bad", "really", "not", "and", "it", "great",
];

fn themed_docs(
    n_domains: usize,
    per_domain: usize,
    seed: u64,
    stemmer: &dyn Stemmer,
) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    for (d, theme) in THEMES.iter().take(n_domains).enumerate() {
        for _ in 0..per_domain {
            let len = rng.gen_range(6..=14);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.gen_bool(0.4) {
                        *theme.choose(&mut rng).unwrap()
                    } else {
                        *SHARED.choose(&mut rng).unwrap()
                    }
                })
                .collect();
            let id = docs.len() as u64;
            docs.push(doc(id, d as u16, &words.join(" "), stemmer));
        }
    }
    docs
}

fn themed_registry(n: usize) -> DomainRegistry {
    DomainRegistry::new(
        ["airline", "kitchen", "books", "music", "garden"]
            .into_iter()
            .take(n),
    )
    .unwrap()
}

fn key(c: &domcf_core::CounterfactualCandidate) -> (u64, DomainId, usize, String) {
    (c.origin, c.destination, c.orientation_index, c.text.clone())
}

fn criterion_5() -> Outcome {
    let st = SnowballStemmer::english();
    let reg = themed_registry(5);
    let docs = themed_docs(5, 40, 55, &st);
    let cfg = StatsConfig {
        min_doc_frequency: 3,
        ..StatsConfig::default()
    };
    let s = build_stats(&reg, &docs, &cfg).unwrap();
    let set = build_orientations(&s, 4, None, &st).map_err(|e| e.to_string())?;
    let model = DomainClassifier::train(&reg, &docs, 1.0).unwrap();
    let cooc = CooccurrenceTable::build(&set, &docs);
    let mut ctx = AugmentContext::new(&s, &set);
    ctx.classifier = Some(&model);
    ctx.cooccurrence = Some(&cooc);
    let labeled: Vec<Document> = docs
        .iter()
        .filter(|d| d.domain() == DomainId(0))
        .take(25)
        .cloned()
        .collect();
    let dests: Vec<DomainId> = (1..5).map(DomainId).collect();

    let plain = GenerationPlan::new(GenerationMode::Docogen, 4, dests.clone(), 9);
    let filtered = GenerationPlan::new(GenerationMode::FDocogen, 4, dests, 9);
    let a = augment(&labeled, &plain, &ctx).map_err(|e| e.to_string())?;
    let b = augment(&labeled, &filtered, &ctx).map_err(|e| e.to_string())?;
    for ds in [&a, &b] {
        check!(
            ds.manifest.candidates_per_example == 16,
            "manifest says {}",
            ds.manifest.candidates_per_example
        );
        check!(
            ds.candidates.len() == 16 * labeled.len(),
            "{} candidates",
            ds.candidates.len()
        );
        for x in &labeled {
            let n = ds.candidates.iter().filter(|c| c.origin == x.id()).count();
            check!(n == 16, "example {} has {n} candidates", x.id());
        }
    }
    let generated: BTreeSet<_> = a.candidates.iter().map(key).collect();
    let accepted: Vec<_> = b.accepted().map(key).collect();
    check!(
        accepted.iter().all(|k| generated.contains(k)),
        "accepted set not a subset"
    );
    Ok(format!(
        "{} examples x 16 candidates, {} accepted after filtering, all within the unfiltered set",
        labeled.len(),
        accepted.len()
    ))
}

fn criterion_6() -> Outcome {
    let st = SnowballStemmer::english();
    let reg = themed_registry(2);
    let docs = themed_docs(2, 200, 66, &st);
    let model = DomainClassifier::train(&reg, &docs, 1.0).unwrap();
    let cfg = FilterConfig::default();
    let tok = |t: &str| domcf_core::tokenize(t, &CorpusConfig::default(), &st);

    let original = doc(1, 0, "the pilot said our flight was late again", &st);
    let distinct: BTreeSet<&String> = original.stems().iter().collect();
    check!(distinct.len() == 8, "original has {} stems", distinct.len());

    let (t, s) = tok("knife blade pan !");
    let v = apply_filter(&t, &s, DomainId(1), &original, &model, &cfg).unwrap();
    check!(
        v.reasons.contains(&RejectReason::TooShort),
        "3-word candidate: {:?}",
        v.reasons
    );

    let (t, s) = tok("pilot knife blade pan oven spatula kettle steel");
    let overlap = word_overlap(&original, &s).unwrap();
    check!((overlap - 0.125).abs() < 1e-12, "overlap {overlap}");
    let v = apply_filter(&t, &s, DomainId(1), &original, &model, &cfg).unwrap();
    check!(
        v.reasons == [RejectReason::LowOverlap],
        "overlap case: {:?}",
        v.reasons
    );

    let (t, s) = tok("the pilot said our flight was late again");
    let v = apply_filter(&t, &s, DomainId(1), &original, &model, &cfg).unwrap();
    check!(
        v.reasons == [RejectReason::DomainMismatch],
        "mismatch case: {:?}",
        v.reasons
    );
    let relaxed = FilterConfig {
        require_domain_agreement: false,
        ..cfg.clone()
    };
    let v = apply_filter(&t, &s, DomainId(1), &original, &model, &relaxed).unwrap();
    check!(v.accepted, "agreement rule applied while disabled");

    let (t, s) = tok("the knife said our pan was late again");
    let v = apply_filter(&t, &s, DomainId(1), &original, &model, &cfg).unwrap();
    check!(v.accepted, "good candidate rejected: {:?}", v.reasons);
    Ok("too-short, low-overlap (0.125), domain-mismatch and acceptance cases".into())
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let n = 4u16;
    // Each domain: 90 exclusive words and 10 words shared by all domains.
    let vocab: Vec<Vec<String>> = (0..n)
        .map(|d| {
            (0..90)
                .map(|i| format!("d{d}w{i}"))
                .chain((0..10).map(|i| format!("shared{i}")))
                .collect()
        })
        .collect();
    let reg = DomainRegistry::new((0..n).map(|d| format!("domain{d}"))).unwrap();
    let mut make = |count: usize, base: u64| -> Vec<Document> {
        let mut out = Vec::new();
        for d in 0..n {
            for i in 0..count {
                let len = rng.gen_range(5..=20);
                let words: Vec<&str> = (0..len)
                    .map(|_| vocab[d as usize].choose(&mut rng).unwrap().as_str())
                    .collect();
                out.push(doc(
                    base + (d as usize * count + i) as u64,
                    d,
                    &words.join(" "),
                    &IdentityStemmer,
                ));
            }
        }
        out
    };
    let train = make(1000, 0);
    let test = make(250, 1_000_000);
    let model = DomainClassifier::train(&reg, &train, 1.0).map_err(|e| e.to_string())?;
    let correct = test
        .iter()
        .filter(|d| model.predict_document(d) == d.domain())
        .count();
    let acc = correct as f64 / test.len() as f64;
    let elapsed = start.elapsed();
    check!(acc >= 0.95, "accuracy {acc:.4}");
    check!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "held-out accuracy {:.2}% on {} documents, {:.2}s",
        100.0 * acc,
        test.len(),
        elapsed.as_secs_f64()
    ))
}

fn criterion_8() -> Outcome {
    let st = SnowballStemmer::english();
    let reg = themed_registry(4);
    let docs = themed_docs(4, 60, 88, &st);
    let cfg = StatsConfig {
        min_doc_frequency: 3,
        ..StatsConfig::default()
    };
    let s = build_stats(&reg, &docs, &cfg).unwrap();
    let set = build_orientations(&s, 4, None, &st).map_err(|e| e.to_string())?;
    let cooc = CooccurrenceTable::build(&set, &docs);
    let mut ctx = AugmentContext::new(&s, &set);
    ctx.cooccurrence = Some(&cooc);
    let tau = 0.08;
    let mut emitted = 0usize;
    for origin in 0..4u16 {
        let labeled: Vec<Document> = docs
            .iter()
            .filter(|d| d.domain() == DomainId(origin))
            .take(20)
            .cloned()
            .collect();
        let dests: Vec<DomainId> = (0..4).filter(|&d| d != origin).map(DomainId).collect();
        for mode in [
            GenerationMode::Docogen,
            GenerationMode::NoOv,
            GenerationMode::RmOv,
        ] {
            let plan = GenerationPlan::new(mode, 4, dests.clone(), 8 + origin as u64);
            let ds = augment(&labeled, &plan, &ctx).map_err(|e| e.to_string())?;
            for c in &ds.candidates {
                let original = labeled.iter().find(|d| d.id() == c.origin).unwrap();
                for w in c.slot_fills.iter().flatten() {
                    if original.stems().contains(w) {
                        continue;
                    }
                    let best = (0..4u16)
                        .filter(|&i| DomainId(i) != c.destination)
                        .map(|i| s.masking_score(w, c.destination, DomainId(i)))
                        .fold(f64::NEG_INFINITY, f64::max);
                    check!(best > tau, "{mode:?} emitted {w:?} with max m = {best}");
                    emitted += 1;
                }
            }
        }
    }
    check!(emitted > 0, "no non-original words were emitted");
    Ok(format!(
        "{emitted} non-original emitted words checked, all admitted"
    ))
}

fn criterion_9() -> Outcome {
    let st = SnowballStemmer::english();
    let n = 4;
    let reg = themed_registry(n);
    let docs = themed_docs(n, 80, 99, &st);
    let cfg = StatsConfig {
        min_doc_frequency: 3,
        ..StatsConfig::default()
    };
    let s = build_stats(&reg, &docs, &cfg).unwrap();
    let mut lines = Vec::new();
    for (label, c) in [
        ("inference", CorruptionConfig::inference(3)),
        ("training noise", CorruptionConfig::training(3)),
    ] {
        let (rates, _) = masking_rate_matrix(&docs, &s, &c).map_err(|e| e.to_string())?;
        let diag: Vec<f64> = (0..n).map(|i| rates[i][i]).collect();
        let off: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| rates[i][j])
            .collect();
        let max_diag = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_off = off.iter().cloned().fold(f64::INFINITY, f64::min);
        check!(
            min_off > max_diag,
            "{label}: off-diagonal min {min_off} <= diagonal max {max_diag}"
        );
        lines.push(format!(
            "{label}: diagonal <= {max_diag:.1}%, off-diagonal >= {min_off:.1}%"
        ));
    }
    Ok(lines.join("; "))
}

fn write_corpus(path: &Path, docs: &[Document], domain: u16) {
    let mut f = fs::File::create(path).unwrap();
    for d in docs.iter().filter(|d| d.domain() == DomainId(domain)) {
        writeln!(
            f,
            "{}",
            serde_json::json!({"text": d.text(), "label": d.label()})
        )
        .unwrap();
    }
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let docs = themed_docs(3, 40, 1010, &IdentityStemmer);
    let names = ["airline", "kitchen", "books"];
    let mut corpus_flags = Vec::new();
    for (d, name) in names.iter().enumerate() {
        let p = dir.path().join(format!("{name}.jsonl"));
        write_corpus(&p, &docs, d as u16);
        corpus_flags.push("--corpus".to_string());
        corpus_flags.push(format!("{name}={}", p.display()));
    }
    let mut results = Vec::new();
    for (run, jobs) in [(0, "1"), (1, "1"), (2, "3")] {
        let out = dir.path().join(format!("run{run}"));
        fs::create_dir(&out).unwrap();
        let snap = out.join("stats.snap");
        let status = Command::new(env!("CARGO_BIN_EXE_domcf"))
            .args(["build-stats", "--min-df", "3", "--jobs", jobs, "--out"])
            .arg(&snap)
            .args(&corpus_flags)
            .output()
            .map_err(|e| e.to_string())?;
        check!(
            status.status.success(),
            "build-stats failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
        let status = Command::new(env!("CARGO_BIN_EXE_domcf"))
            .args([
                "augment",
                "--mode",
                "f-docogen",
                "--k",
                "3",
                "--seed",
                "42",
                "--jobs",
                jobs,
                "--domain",
                "airline",
                "--snapshot",
            ])
            .arg(&snap)
            .arg("--input")
            .arg(dir.path().join("airline.jsonl"))
            .arg("--out-dir")
            .arg(out.join("aug"))
            .args(&corpus_flags)
            .env_remove("DOMCF_SERVICE_URL")
            .output()
            .map_err(|e| e.to_string())?;
        check!(
            status.status.success(),
            "augment failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
        let (s, _) = domcf::read_snapshot(&snap).map_err(|e| e.to_string())?;
        results.push((
            s.fingerprint_hex(),
            fs::read(&snap).unwrap(),
            fs::read(out.join("aug/manifest.json")).unwrap(),
            fs::read(out.join("aug/augmented.jsonl")).unwrap(),
        ));
    }
    check!(
        results.iter().all(|r| r.0 == results[0].0),
        "snapshot fingerprints differ"
    );
    check!(
        results.iter().all(|r| r.1 == results[0].1),
        "snapshot files differ"
    );
    check!(
        results.iter().all(|r| r.2 == results[0].2),
        "manifests differ"
    );
    check!(
        results.iter().all(|r| r.3 == results[0].3),
        "datasets differ"
    );
    Ok(format!(
        "3 runs (jobs 1, 1, 3) identical, fingerprint {}",
        &results[0].0[..16]
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "formula oracle equivalence", criterion_1),
        (2, "worked scalar case", criterion_2),
        (3, "identity and antisymmetry", criterion_3),
        (4, "masking invariants", criterion_4),
        (5, "augmentation arithmetic", criterion_5),
        (6, "filter rules", criterion_6),
        (7, "domain classifier accuracy", criterion_7),
        (8, "constrained vocabulary", criterion_8),
        (9, "masking rate direction", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id:>2} ({name}): {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
