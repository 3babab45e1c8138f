//! Multi-threaded drivers. Results are identical to the sequential core
//! functions for any number of jobs.

use domcf_core::pipeline::{assemble_dataset, PreparedRun};
use domcf_core::{
    AugmentContext, AugmentedDataset, CounterfactualCandidate, DocFreqCounter, Document,
    DomainRegistry, GenerationPlan, Result, StatsConfig, StatsSnapshot,
};
use rayon::prelude::*;

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

/// Count document frequencies over `jobs` shards and merge them.
pub fn build_stats_parallel(
    registry: &DomainRegistry,
    docs: &[Document],
    config: &StatsConfig,
    jobs: usize,
) -> Result<StatsSnapshot> {
    config.validate()?;
    let n = registry.len();
    let chunk = docs.len().div_ceil(jobs.max(1)).max(1);
    let counter = pool(jobs).install(|| {
        docs.par_chunks(chunk)
            .map(|shard| {
                let mut c = DocFreqCounter::new(n, config.max_order);
                for d in shard {
                    c.add(d)?;
                }
                Ok::<_, domcf_core::Error>(c)
            })
            .try_reduce(
                || DocFreqCounter::new(n, config.max_order),
                |mut a, b| {
                    a.merge(b);
                    Ok(a)
                },
            )
    })?;
    counter.finish(registry.clone(), config.clone())
}

/// Candidates for every document in example order, without a manifest.
/// Unlike [`augment_parallel`], inputs need no task labels.
pub fn generate_parallel(
    docs: &[Document],
    plan: &GenerationPlan,
    ctx: &AugmentContext<'_>,
    jobs: usize,
) -> Result<Vec<CounterfactualCandidate>> {
    let prepared = PreparedRun::new(plan, ctx)?;
    let per_example: Vec<_> = pool(jobs).install(|| {
        docs.par_iter()
            .map(|d| prepared.generate(d, plan, ctx))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_example.into_iter().flatten().collect())
}

/// Run augmentation with per-example work spread over `jobs` threads.
pub fn augment_parallel(
    labeled: &[Document],
    plan: &GenerationPlan,
    ctx: &AugmentContext<'_>,
    jobs: usize,
) -> Result<AugmentedDataset> {
    let candidates = generate_parallel(labeled, plan, ctx, jobs)?;
    assemble_dataset(labeled.to_vec(), candidates, plan, ctx.snapshot)
}
