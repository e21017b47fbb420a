use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use rayon::prelude::*;

use super::{tokenize, StepLog, TrainConfig, TrainError, TrainLog};
use crate::clusters::BinaryClusterVector;
use crate::dataset::{load_image, MultimodalSample};
use crate::grad::{Adam, Tensor};
use crate::text::{save_counts, CooccurrenceTable};
use crate::trainer::EpochLog;
use crate::visual::{predict_clusters, save_checkpoint, train_batch, Network};

/// A decoded image with its tokenized caption.
#[derive(Debug, Clone)]
pub struct TrainSample {
    /// `[1, 3, S, S]`.
    pub image: Tensor<f32>,
    pub tokens: Vec<String>,
}

impl TrainSample {
    pub fn new(image: Tensor<f32>, caption: &str) -> Self {
        Self {
            image,
            tokens: tokenize(caption),
        }
    }
}

/// Decode every image of `samples` (in parallel) and tokenize the captions.
pub fn load_train_samples(samples: &[MultimodalSample]) -> Result<Vec<TrainSample>, TrainError> {
    samples
        .par_iter()
        .map(|s| Ok(TrainSample::new(load_image(&s.image_path)?, &s.caption)))
        .collect()
}

/// Everything that changes during training.
#[derive(Debug, Clone)]
pub struct Model {
    pub net: Network<f32>,
    pub table: CooccurrenceTable,
    pub adam: Adam<f32>,
}

impl Model {
    /// Fresh network seeded with `config.seed` and an empty table.
    pub fn new(config: &TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let net = Network::new(&config.encoder, config.seed)?;
        let adam = Adam::new(config.adam, net.params());
        Ok(Self {
            table: CooccurrenceTable::new(config.encoder.n_clusters),
            net,
            adam,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Mean binary cross entropy before the parameter update.
    pub loss: f32,
    /// Image-side predictions, which were observed into the table.
    pub visual: Vec<BinaryClusterVector>,
    /// Caption-side predictions, which were the network's targets.
    pub targets: Vec<BinaryClusterVector>,
}

/// One mutual-supervision step: image inference and caption inference on
/// pre-step state, then the table update, then the network update.
pub fn train_step(
    batch: &[&TrainSample],
    model: &mut Model,
    config: &TrainConfig,
) -> Result<StepOutcome, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch("train_step needs at least one sample"));
    }
    let images: Vec<&Tensor<f32>> = batch.iter().map(|s| &s.image).collect();
    let images = Tensor::stack(&images)?;
    let n = model.net.n_clusters();

    let probs = model.net.forward(&images)?;
    let visual: Vec<BinaryClusterVector> = probs
        .data()
        .chunks(n)
        .map(|row| predict_clusters(row, config.encoder.visual_threshold))
        .collect();
    let targets: Vec<BinaryClusterVector> = batch
        .iter()
        .map(|s| model.table.encode_sentence(&s.tokens, config.text.text_threshold))
        .collect();

    for (sample, prediction) in batch.iter().zip(&visual) {
        model.table.observe(&sample.tokens, prediction)?;
    }
    let loss = train_batch(&images, &targets, &mut model.net, &mut model.adam)?;
    Ok(StepOutcome {
        loss,
        visual,
        targets,
    })
}

/// What [`fit`] reports to its observer after each step.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub step: usize,
    pub epoch: usize,
    /// Indices into the training data, in batch order.
    pub indices: &'a [usize],
    pub outcome: &'a StepOutcome,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: Model,
    pub log: TrainLog,
}

/// Run `config.epochs` epochs of [`train_step`] over `data`, reshuffled each
/// epoch with a stream seeded by `seed + epoch`. When `checkpoint_dir` is
/// given and `checkpoint_interval > 0`, `epoch-NNN.xmck` and
/// `epoch-NNN.counts` are written there every interval.
pub fn fit(
    data: &[TrainSample],
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
    mut observer: impl FnMut(&StepEvent<'_>),
) -> Result<FitResult, TrainError> {
    config.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyBatch("training data is empty"));
    }
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|source| TrainError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let mut model = Model::new(config)?;
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.sort_unstable();
        order.shuffle(&mut Pcg64::seed_from_u64(config.seed.wrapping_add(epoch as u64)));
        let mut loss_sum = 0.0f64;
        let mut steps = 0usize;
        for indices in order.chunks(config.batch_size) {
            let batch: Vec<&TrainSample> = indices.iter().map(|&i| &data[i]).collect();
            let outcome = train_step(&batch, &mut model, config)?;
            let step = log.steps.len() + 1;
            observer(&StepEvent {
                step,
                epoch,
                indices,
                outcome: &outcome,
            });
            log.steps.push(StepLog {
                step,
                epoch,
                loss: outcome.loss,
            });
            loss_sum += outcome.loss as f64;
            steps += 1;
        }
        log.epochs.push(EpochLog {
            epoch,
            mean_loss: loss_sum / steps as f64,
            table_entries: model.table.nonzero_joint_entries(),
            vocabulary: model.table.vocabulary_size(),
            seconds: started.elapsed().as_secs_f64(),
        });
        if let Some(dir) = checkpoint_dir {
            if config.checkpoint_interval > 0 && epoch % config.checkpoint_interval == 0 {
                save_checkpoint(&model.net, &dir.join(format!("epoch-{epoch:03}.xmck")))?;
                save_counts(&model.table, &dir.join(format!("epoch-{epoch:03}.counts")))?;
            }
        }
    }
    Ok(FitResult { model, log })
}
