use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use xmc_core::dataset::load_image;
use xmc_core::trainer::{render_config, TrainConfig};
use xmc_core::visual::{compute_cam, extract_box, load_checkpoint, predict_clusters, Heatmap};

use crate::train::CONFIG_FILE;
use crate::{read_config, usage, RunManifest};

#[derive(Debug, Args)]
pub struct CamArgs {
    /// Network checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// PPM image.
    #[arg(long)]
    pub image: PathBuf,
    /// Output directory for heatmaps and the box listing.
    #[arg(long)]
    pub out: PathBuf,
    /// Config file; defaults to config.txt beside the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Clusters to render instead of the predicted ones.
    #[arg(long, value_delimiter = ',')]
    pub clusters: Option<Vec<usize>>,
}

/// 8-bit binary PGM of the heatmap scaled so its minimum maps to 0 and its
/// maximum to 255. A flat map renders all zeros.
pub fn heatmap_pgm(map: &Heatmap) -> Vec<u8> {
    let (lo, hi) = (map.min(), map.max());
    let mut out = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    out.extend(map.values.iter().map(|&v| {
        if hi > lo {
            ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    out
}

pub fn run(args: CamArgs) -> Result<()> {
    let net = load_checkpoint(&args.ckpt)?;
    let sibling = args.ckpt.parent().map(|d| d.join(CONFIG_FILE));
    let config = match (&args.config, sibling) {
        (Some(p), _) => read_config(p, TrainConfig::default())?,
        (None, Some(p)) if p.is_file() => read_config(&p, TrainConfig::default())?,
        _ => {
            let mut c = TrainConfig::default();
            c.encoder.n_clusters = net.n_clusters();
            c.encoder.channels = net.channels().to_vec();
            c
        }
    };
    if let Some(c) = args.clusters.iter().flatten().find(|&&c| c >= net.n_clusters()) {
        return Err(usage(format!("cluster {c} out of range for {} clusters", net.n_clusters())));
    }
    let image = load_image(&args.image)?;
    let clusters: Vec<usize> = match &args.clusters {
        Some(c) => c.clone(),
        None => {
            let probs = net.forward(&image)?;
            predict_clusters(probs.data(), config.encoder.visual_threshold)
                .clusters()
                .collect()
        }
    };

    let mut run = RunManifest::new("cam", config.seed)
        .config_text(&render_config(&config))
        .input(&args.ckpt)?
        .input(&args.image)?
        .output("boxes.txt");
    for c in &clusters {
        run = run.output(&format!("cam-{c}.pgm"));
    }
    run.write(&args.out, "cam")?;

    let mut listing = String::new();
    for &c in &clusters {
        let cam = compute_cam(&image, &net, c)?;
        let path = args.out.join(format!("cam-{c}.pgm"));
        fs::write(&path, heatmap_pgm(&cam.upsampled)).with_context(|| format!("writing {}", path.display()))?;
        match extract_box(&cam) {
            Some(b) => writeln!(listing, "cluster {c} box {b}")?,
            None => writeln!(listing, "cluster {c} no-box")?,
        }
    }
    let path = args.out.join("boxes.txt");
    fs::write(&path, &listing).with_context(|| format!("writing {}", path.display()))?;
    print!("{listing}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_spans_full_range() {
        let map = Heatmap::new(3, 1, vec![-1.0, 0.5, 2.0]);
        let bytes = heatmap_pgm(&map);
        assert!(bytes.starts_with(b"P5\n3 1\n255\n"));
        assert_eq!(&bytes[bytes.len() - 3..], &[0, 128, 255]);
        let flat = heatmap_pgm(&Heatmap::new(2, 1, vec![4.0, 4.0]));
        assert_eq!(&flat[flat.len() - 2..], &[0, 0]);
    }
}
