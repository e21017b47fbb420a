use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use xmc_core::dataset::{
    load_associations, load_concreteness, load_manifest, load_taxonomy, MultimodalSample, Split,
};
use xmc_core::eval::{
    all_classes_baseline, build_class_map, clustering_fscore, concreteness_eval, localization_eval,
    mean_association_strength, model_clustering, multilabel_eval, pearson, random_box_baseline,
    random_clustering_baseline, textonly_concreteness, textonly_kmeans_clustering, token_frequencies, LabeledImage,
    MetricsReport, Prf, DEFAULT_BUCKETS,
};
use xmc_core::text::{load_counts, CooccurrenceTable};
use xmc_core::trainer::{render_config, tokenize, TrainConfig};
use xmc_core::visual::{load_checkpoint, Network};

use crate::train::CONFIG_FILE;
use crate::{manifest_path, read_config, sha256_hex, usage, RunManifest};

/// Random clusterings averaged by the clustering baseline.
pub const RANDOM_CLUSTERING_TRIALS: usize = 1000;
/// Representatives per pole for the text-only concreteness baseline.
pub const TEXTONLY_REPRESENTATIVES: usize = 20;
/// Representatives must occur more than this many times.
pub const TEXTONLY_MIN_COUNT: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Clustering,
    Association,
    Concreteness,
    Classification,
    Localization,
    Baselines,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Clustering => "clustering",
            Task::Association => "association",
            Task::Concreteness => "concreteness",
            Task::Classification => "classification",
            Task::Localization => "localization",
            Task::Baselines => "baselines",
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Network checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Counts file.
    #[arg(long)]
    pub counts: PathBuf,
    /// Dataset directory or manifest file; gold files are read from its directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Output directory for reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Config file; defaults to config.txt beside the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for the random baselines.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Frozen model state plus the dataset it is evaluated on.
pub struct EvalContext {
    pub config: TrainConfig,
    pub config_digest: String,
    pub net: Network<f32>,
    pub table: CooccurrenceTable,
    pub samples: Vec<MultimodalSample>,
    pub data_dir: PathBuf,
    pub seed: u64,
}

impl EvalContext {
    pub fn load(ckpt: &Path, counts: &Path, data: &Path, config: Option<&Path>, seed: u64) -> Result<Self> {
        let net = load_checkpoint(ckpt)?;
        let sibling = ckpt.parent().map(|d| d.join(CONFIG_FILE));
        let config = match (config, sibling) {
            (Some(path), _) => read_config(path, TrainConfig::default())?,
            (None, Some(path)) if path.is_file() => read_config(&path, TrainConfig::default())?,
            _ => {
                let mut c = TrainConfig::default();
                c.encoder.n_clusters = net.n_clusters();
                c.encoder.channels = net.channels().to_vec();
                c
            }
        };
        if !net.matches(&config.encoder) {
            bail!(
                "checkpoint has {} clusters and widths {:?}, config has {} and {:?}",
                net.n_clusters(),
                net.channels(),
                config.encoder.n_clusters,
                config.encoder.channels
            );
        }
        let table = load_counts(counts).with_context(|| format!("loading {}", counts.display()))?;
        if table.n_clusters() != net.n_clusters() {
            bail!(
                "counts file has {} clusters, checkpoint has {}",
                table.n_clusters(),
                net.n_clusters()
            );
        }
        let manifest = manifest_path(data);
        let samples = load_manifest(&manifest)?;
        let data_dir = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
        Ok(Self {
            config_digest: sha256_hex(render_config(&config).as_bytes()),
            config,
            net,
            table,
            samples,
            data_dir,
            seed,
        })
    }

    fn report(&self, task: &str) -> MetricsReport {
        MetricsReport::new(task, self.seed, self.config_digest.clone())
    }

    fn captions(&self, split: Split) -> Vec<Vec<String>> {
        self.samples
            .iter()
            .filter(|s| s.split == split)
            .map(|s| tokenize(&s.caption))
            .collect()
    }

    /// Test images, or every image when the manifest has no test split.
    fn images(&self) -> Result<Vec<LabeledImage>> {
        let has_test = self.samples.iter().any(|s| s.split == Split::Test);
        let chosen: Vec<&MultimodalSample> = self
            .samples
            .iter()
            .filter(|s| !has_test || s.split == Split::Test)
            .collect();
        Ok(chosen
            .par_iter()
            .map(|s| LabeledImage::load(s))
            .collect::<Result<_, _>>()?)
    }

    /// Class vocabulary: every class named anywhere in the manifest.
    fn class_words(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.samples.iter().flat_map(|s| &s.classes).collect();
        set.into_iter().cloned().collect()
    }

    fn taxonomy(&self) -> Result<BTreeMap<String, String>> {
        Ok(load_taxonomy(&self.data_dir.join("taxonomy.tsv"))?)
    }
}

fn push_prf(report: &mut MetricsReport, prefix: &str, prf: &Prf) {
    report
        .push(format!("{prefix}precision"), Some(prf.precision()))
        .push(format!("{prefix}recall"), Some(prf.recall()))
        .push(format!("{prefix}f1"), Some(prf.f1()))
        .push(format!("{prefix}true_positives"), Some(prf.true_positives as f64))
        .push(format!("{prefix}false_positives"), Some(prf.false_positives as f64))
        .push(format!("{prefix}false_negatives"), Some(prf.false_negatives as f64));
}

/// Run one task; returns the reports it produces.
pub fn evaluate(ctx: &EvalContext, task: Task) -> Result<Vec<MetricsReport>> {
    let theta_t = ctx.config.text.text_threshold;
    let theta_v = ctx.config.encoder.visual_threshold;
    let mut reports = Vec::new();
    match task {
        Task::Clustering => {
            let gold = ctx.taxonomy()?;
            let words: Vec<&String> = gold.keys().collect();
            let clusters = model_clustering(&ctx.table, &words, theta_t);
            let assigned: BTreeSet<usize> = clusters
                .values()
                .copied()
                .filter(|&c| c < ctx.table.n_clusters())
                .collect();
            let unassigned = clusters.values().filter(|&&c| c >= ctx.table.n_clusters()).count();
            let mut r = ctx.report("clustering");
            r.push("fscore", Some(clustering_fscore(&gold, &clusters)?))
                .push("gold_words", Some(words.len() as f64))
                .push("clusters_used", Some(assigned.len() as f64))
                .push("unassigned_words", Some(unassigned as f64));
            reports.push(r);
        }
        Task::Association => {
            let gold = ctx.taxonomy()?;
            let assoc = load_associations(&ctx.data_dir.join("assoc.tsv"))?;
            let words: Vec<&String> = gold.keys().collect();
            let clusters = model_clustering(&ctx.table, &words, theta_t);
            let mut r = ctx.report("association");
            r.push("mas", mean_association_strength(&clusters, &assoc, &words));
            reports.push(r);
        }
        Task::Concreteness => {
            let gold = load_concreteness(&ctx.data_dir.join("concreteness.tsv"))?;
            let captions = ctx.captions(Split::Train);
            let freq = token_frequencies(&captions);
            let mut r = ctx.report("concreteness");
            for b in concreteness_eval(&ctx.table, &gold, &freq, &DEFAULT_BUCKETS)? {
                r.push(format!("pearson_min_freq_{}", b.min_freq), b.pearson)
                    .push(format!("words_min_freq_{}", b.min_freq), Some(b.words as f64));
            }
            let mean_at = |pick: fn(f64, f64) -> f64| {
                let level = gold.values().copied().reduce(pick)?;
                let scores: Vec<f64> = gold
                    .iter()
                    .filter(|(_, &g)| g == level)
                    .map(|(w, _)| ctx.table.concreteness(w))
                    .collect();
                Some(scores.iter().sum::<f64>() / scores.len() as f64)
            };
            r.push("mean_concreteness_top_rated", mean_at(f64::max))
                .push("mean_concreteness_bottom_rated", mean_at(f64::min));
            let textonly = textonly_concreteness(&captions, &gold, TEXTONLY_REPRESENTATIVES, TEXTONLY_MIN_COUNT)
                .ok()
                .and_then(|scores| {
                    let (xs, ys): (Vec<f64>, Vec<f64>) = gold
                        .iter()
                        .filter_map(|(w, &g)| scores.get(w).map(|&s| (s, g)))
                        .unzip();
                    pearson(&xs, &ys).ok()
                });
            r.push("textonly_pearson", textonly);
            reports.push(r);
        }
        Task::Classification => {
            let classes = ctx.class_words();
            let map = build_class_map(&classes, &ctx.table, theta_t);
            let images = ctx.images()?;
            let prf = multilabel_eval(&images, &ctx.net, &map, theta_v)?;
            let mapped: usize = map.values().map(BTreeSet::len).sum();
            let mut r = ctx.report("classification");
            push_prf(&mut r, "", &prf);
            r.push("mapped_classes", Some(mapped as f64))
                .push("images", Some(images.len() as f64));
            push_prf(&mut r, "all_classes_", &all_classes_baseline(&images, &classes));
            reports.push(r);
        }
        Task::Localization => {
            let images = ctx.images()?;
            let prf = localization_eval(&images, &ctx.net, theta_v)?;
            let mut r = ctx.report("localization");
            push_prf(&mut r, "", &prf);
            reports.push(r);
        }
        Task::Baselines => {
            let gold = ctx.taxonomy()?;
            let assoc = load_associations(&ctx.data_dir.join("assoc.tsv"))?;
            let k = gold.values().collect::<BTreeSet<_>>().len();
            let random = random_clustering_baseline(&gold, &assoc, k, ctx.seed, RANDOM_CLUSTERING_TRIALS)?;
            let mut r = ctx.report("baseline-random-clustering");
            r.push("fscore", Some(random.mean_fscore))
                .push("mas", random.mean_mas)
                .push("k", Some(k as f64))
                .push("trials", Some(random.trials as f64));
            reports.push(r);

            let words: Vec<&String> = gold.keys().collect();
            let captions = ctx.captions(Split::Train);
            let clusters = textonly_kmeans_clustering(&captions, &words, k, ctx.seed)?;
            let mut r = ctx.report("baseline-kmeans-text");
            r.push("fscore", Some(clustering_fscore(&gold, &clusters)?))
                .push("mas", mean_association_strength(&clusters, &assoc, &words))
                .push("k", Some(k as f64));
            reports.push(r);

            let images = ctx.images()?;
            let mut r = ctx.report("baseline-random-boxes");
            push_prf(&mut r, "", &random_box_baseline(&images, ctx.seed)?);
            reports.push(r);
        }
    }
    Ok(reports)
}

pub fn run(args: EvalArgs) -> Result<()> {
    if !args.ckpt.is_file() {
        return Err(usage(format!("--ckpt {} is not a file", args.ckpt.display())));
    }
    let ctx = EvalContext::load(&args.ckpt, &args.counts, &args.data, args.config.as_deref(), args.seed)?;
    let names: &[&str] = match args.task {
        Task::Baselines => &["baseline-random-clustering", "baseline-kmeans-text", "baseline-random-boxes"],
        t => &[t.name()],
    };
    let mut run = RunManifest::new(&format!("eval {}", args.task.name()), args.seed)
        .config_text(&render_config(&ctx.config))
        .input(&args.ckpt)?
        .input(&args.counts)?
        .input(&manifest_path(&args.data))?;
    for name in names {
        run = run.output(&format!("{name}.txt")).output(&format!("{name}.csv"));
    }
    run.write(&args.out, &format!("eval-{}", args.task.name()))?;

    for report in evaluate(&ctx, args.task)? {
        for (ext, text) in [("txt", report.to_key_values()), ("csv", report.to_csv())] {
            let path = args.out.join(format!("{}.{ext}", report.task));
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        print!("{}", report.to_key_values());
    }
    Ok(())
}
