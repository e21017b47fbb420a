use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use xmc_core::text::{load_counts, CooccurrenceTable, TextConfig};

use crate::{usage, RunManifest};

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// Counts file.
    #[arg(long)]
    pub counts: PathBuf,
    /// Assignment threshold on P(c|w).
    #[arg(long, default_value_t = TextConfig::default().text_threshold)]
    pub threshold: f64,
    /// Output directory; the listing goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `Cluster <id>: w1; w2; ...` for every cluster with at least one assigned
/// word, members by descending P(c|w) with ties in alphabetical order.
pub fn render_clusters(table: &CooccurrenceTable, threshold: f64) -> String {
    let mut members: BTreeMap<usize, Vec<(f64, &str)>> = BTreeMap::new();
    for word in table.vocabulary() {
        let a = table.assign_word(word, threshold);
        if let Some(c) = a.cluster {
            members.entry(c).or_default().push((a.max_probability, word));
        }
    }
    let mut out = String::new();
    for (c, mut words) in members {
        words.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        let names: Vec<&str> = words.iter().map(|(_, w)| *w).collect();
        let _ = writeln!(out, "Cluster {c}: {}", names.join("; "));
    }
    out
}

pub fn run(args: DumpArgs) -> Result<()> {
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(usage(format!("--threshold must lie in (0, 1), got {}", args.threshold)));
    }
    let table = load_counts(&args.counts).with_context(|| format!("loading {}", args.counts.display()))?;
    let listing = render_clusters(&table, args.threshold);
    match &args.out {
        Some(dir) => {
            RunManifest::new("dump-clusters", 0)
                .config("threshold", args.threshold)
                .input(&args.counts)?
                .output("clusters.txt")
                .write(dir, "dump-clusters")?;
            let path = dir.join("clusters.txt");
            fs::write(&path, &listing).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{listing}"),
    }
    Ok(())
}
