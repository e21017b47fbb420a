use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use xmc_core::dataset::{generate_dataset, WorldSpec};

use crate::{usage, RunManifest};

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of training scenes.
    #[arg(long, default_value_t = 2000)]
    pub train: usize,
    /// Number of test scenes.
    #[arg(long, default_value_t = 500)]
    pub test: usize,
    /// Number of scene themes, 1 to 3.
    #[arg(long, default_value_t = 3)]
    pub themes: usize,
}

pub fn run(args: GenArgs) -> Result<()> {
    if !(1..=3).contains(&args.themes) {
        return Err(usage(format!("--themes must be 1, 2 or 3, got {}", args.themes)));
    }
    let spec = WorldSpec::shapes_world(args.themes);
    RunManifest::new("gen", args.seed)
        .config("train", args.train)
        .config("test", args.test)
        .config("themes", args.themes)
        .output("manifest.tsv")
        .output("images/")
        .output("taxonomy.tsv")
        .output("assoc.tsv")
        .output("concreteness.tsv")
        .write(&args.out, "gen")?;
    let ds = generate_dataset(&spec, args.train, args.test, args.seed, &args.out)?;
    println!("wrote {} samples to {}", ds.samples.len(), ds.manifest.display());
    Ok(())
}
