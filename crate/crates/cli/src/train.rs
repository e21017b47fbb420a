use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use xmc_core::dataset::{load_manifest, Split};
use xmc_core::text::save_counts;
use xmc_core::trainer::{fit, load_train_samples, render_config, TrainConfig};
use xmc_core::visual::save_checkpoint;

use crate::{manifest_path, read_config, RunManifest};

pub const NETWORK_FILE: &str = "net.xmck";
pub const COUNTS_FILE: &str = "counts.tsv";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    /// Flat key = value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for checkpoints and logs.
    #[arg(long)]
    pub ckpt_dir: PathBuf,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => read_config(path, TrainConfig::default())?,
        None => TrainConfig::default(),
    };
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate().map_err(|e| crate::usage(e.to_string()))?;
    let rendered = render_config(&config);

    let manifest = manifest_path(&args.data);
    let mut run = RunManifest::new("train", config.seed)
        .config_text(&rendered)
        .input(&manifest)?;
    if let Some(path) = &args.config {
        run = run.input(path)?;
    }
    run.output(CONFIG_FILE)
        .output(NETWORK_FILE)
        .output(COUNTS_FILE)
        .output("train_log.csv")
        .output("epochs.csv")
        .write(&args.ckpt_dir, "train")?;

    let samples: Vec<_> = load_manifest(&manifest)?
        .into_iter()
        .filter(|s| s.split == Split::Train)
        .collect();
    if samples.is_empty() {
        bail!("{} has no training samples", manifest.display());
    }
    let data = load_train_samples(&samples)?;
    let size = config.encoder.image_size;
    if let Some((i, s)) = data.iter().enumerate().find(|(_, s)| s.image.shape()[2..] != [size, size]) {
        bail!(
            "{}: image is {:?}, config expects {size}x{size}",
            samples[i].image_path.display(),
            &s.image.shape()[2..]
        );
    }

    let dir = &args.ckpt_dir;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write(CONFIG_FILE, rendered.clone())?;
    let result = fit(&data, &config, Some(dir), |_| {})?;
    save_checkpoint(&result.model.net, &dir.join(NETWORK_FILE))?;
    save_counts(&result.model.table, &dir.join(COUNTS_FILE))?;
    write("train_log.csv", result.log.steps_csv())?;
    write("epochs.csv", result.log.epochs_csv())?;
    if let Some(last) = result.log.epochs.last() {
        println!(
            "trained {} epochs, {} steps; final mean loss {:.4}",
            config.epochs,
            result.log.steps.len(),
            last.mean_loss
        );
    }
    Ok(())
}
