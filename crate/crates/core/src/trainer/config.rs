//! Flat `key = value` configuration. `#` starts a comment; blank lines are
//! ignored; every key is optional and defaults as in [`TrainConfig::default`].

use std::collections::BTreeSet;

use thiserror::Error;

use crate::grad::AdamConfig;
use crate::text::TextConfig;
use crate::visual::{EncoderConfig, HeadInit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown config key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: {key} set twice")]
    Duplicate { line: usize, key: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub text: TextConfig,
    pub adam: AdamConfig,
    /// Write a checkpoint pair every this many epochs; 0 disables.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            epochs: 40,
            seed: 0,
            encoder: EncoderConfig::default(),
            text: TextConfig::default(),
            adam: AdamConfig::default(),
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.batch_size == 0 {
            return invalid("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return invalid("epochs must be at least 1".into());
        }
        self.encoder.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.text.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return invalid(format!("learning_rate must be positive, got {}", a.learning_rate));
        }
        for (name, b) in [("beta1", a.beta1), ("beta2", a.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return invalid(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(a.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", a.epsilon));
        }
        Ok(())
    }
}

fn head_init_name(h: HeadInit) -> &'static str {
    match h {
        HeadInit::Zero => "zero",
        HeadInit::HeUniform => "he_uniform",
    }
}

/// Canonical text form: every key, fixed order. Parsing it back yields an
/// equal config.
pub fn render_config(c: &TrainConfig) -> String {
    let channels: Vec<String> = c.encoder.channels.iter().map(|w| w.to_string()).collect();
    [
        format!("batch_size = {}", c.batch_size),
        format!("epochs = {}", c.epochs),
        format!("seed = {}", c.seed),
        format!("checkpoint_interval = {}", c.checkpoint_interval),
        format!("n_clusters = {}", c.encoder.n_clusters),
        format!("visual_threshold = {:?}", c.encoder.visual_threshold),
        format!("image_size = {}", c.encoder.image_size),
        format!("channels = {}", channels.join(",")),
        format!("head_init = {}", head_init_name(c.encoder.head_init)),
        format!("text_threshold = {:?}", c.text.text_threshold),
        format!("learning_rate = {:?}", c.adam.learning_rate),
        format!("beta1 = {:?}", c.adam.beta1),
        format!("beta2 = {:?}", c.adam.beta2),
        format!("epsilon = {:?}", c.adam.epsilon),
    ]
    .join("\n")
        + "\n"
}

/// Parse config text on top of `base`. The result is validated.
pub fn parse_config(text: &str, base: TrainConfig) -> Result<TrainConfig, ConfigError> {
    let mut c = base;
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or(ConfigError::Syntax { line })?;
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.into(),
            });
        }
        let bad = |reason: &str| ConfigError::BadValue {
            line,
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        };
        let int = || value.parse::<usize>().map_err(|_| bad("expected a non-negative integer"));
        let real = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad("expected a finite number"))
        };
        match key {
            "batch_size" => c.batch_size = int()?,
            "epochs" => c.epochs = int()?,
            "seed" => c.seed = value.parse().map_err(|_| bad("expected a 64-bit unsigned integer"))?,
            "checkpoint_interval" => c.checkpoint_interval = int()?,
            "n_clusters" => c.encoder.n_clusters = int()?,
            "visual_threshold" => c.encoder.visual_threshold = real()?,
            "image_size" => c.encoder.image_size = int()?,
            "channels" => {
                c.encoder.channels = value
                    .split(',')
                    .map(|w| w.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("expected a comma-separated list of integers"))?
            }
            "head_init" => {
                c.encoder.head_init = match value {
                    "zero" => HeadInit::Zero,
                    "he_uniform" => HeadInit::HeUniform,
                    _ => return Err(bad("expected zero or he_uniform")),
                }
            }
            "text_threshold" => c.text.text_threshold = real()?,
            "learning_rate" => c.adam.learning_rate = real()?,
            "beta1" => c.adam.beta1 = real()?,
            "beta2" => c.adam.beta2 = real()?,
            "epsilon" => c.adam.epsilon = real()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                })
            }
        }
    }
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = TrainConfig::default();
        assert_eq!((c.batch_size, c.epochs), (50, 40));
        assert_eq!(c.adam.learning_rate, 1e-4);
        assert_eq!(c.text.text_threshold, 0.08);
        c.validate().unwrap();
    }

    #[test]
    fn render_parse_round_trip() {
        let mut c = TrainConfig::default();
        c.encoder.channels = vec![8, 16];
        c.encoder.head_init = HeadInit::Zero;
        c.adam.learning_rate = 3e-4;
        c.seed = u64::MAX;
        let text = render_config(&c);
        assert_eq!(parse_config(&text, TrainConfig::default()).unwrap(), c);
    }

    #[test]
    fn overrides_and_comments() {
        let c = parse_config("# tiny\nepochs = 3 # short\n\nn_clusters=24\n", TrainConfig::default()).unwrap();
        assert_eq!((c.epochs, c.encoder.n_clusters, c.batch_size), (3, 24, 50));
    }

    #[test]
    fn errors_name_the_key() {
        let err = parse_config("epochs = 2\nlearnign_rate = 1\n", TrainConfig::default()).unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                key: "learnign_rate".into()
            }
        );
        assert!(err.to_string().contains("learnign_rate"));
        let err = parse_config("epochs = -1", TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("epochs"));
        assert!(matches!(parse_config("epochs = 0", TrainConfig::default()), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("epochs", TrainConfig::default()), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(
            parse_config("seed = 1\nseed = 2", TrainConfig::default()),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
    }
}
