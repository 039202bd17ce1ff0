use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::config::ModelConfig;
use super::network::{argmax, backward, forward, glyph_batch, softmax_cross_entropy, ModelParams};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// A val loss counts as an improvement only if it beats the best so
    /// far by more than this.
    pub min_delta: f64,
    pub shuffle_seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            patience: 5,
            batch_size: 32,
            min_delta: 1e-6,
            shuffle_seed: 0x5EED_0004,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "train: max_epochs, patience and batch_size must be >= 1".into(),
            ));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::Config("train.min_delta must be >= 0".into()));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.get(self.best_epoch.checked_sub(1)?)
    }

    /// Per-epoch CSV without timing, so equal seeds give identical files.
    /// Floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_accuracy\n");
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{}",
                r.epoch, r.train_loss, r.val_loss, r.val_accuracy
            )
            .expect("string write");
        }
        s
    }

    /// The timing-free trajectory used to compare runs.
    pub fn trajectory(&self) -> Vec<(usize, u64, u64, u64)> {
        self.records
            .iter()
            .map(|r| {
                (
                    r.epoch,
                    r.train_loss.to_bits(),
                    r.val_loss.to_bits(),
                    r.val_accuracy.to_bits(),
                )
            })
            .collect()
    }

    pub fn total_secs(&self) -> f64 {
        self.records.iter().map(|r| r.wall_secs).sum()
    }
}

const EVAL_CHUNK: usize = 128;

/// Mean cross-entropy, accuracy and predicted class per sample.
pub fn evaluate(
    config: &ModelConfig,
    params: &ModelParams,
    samples: &[Sample],
) -> Result<(f64, f64, Vec<usize>)> {
    if samples.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty sample set".into()));
    }
    check_labels(config, samples)?;
    let c = config.num_classes;
    let mut total = 0.0;
    let mut preds = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_CHUNK) {
        let batch = glyph_batch(chunk.iter().map(|s| &s.image), config.input_side)?;
        let (_, cache) = forward(config, params, &batch)?;
        let labels: Vec<usize> = chunk.iter().map(|s| s.class_id).collect();
        let (loss, _) = softmax_cross_entropy(&cache.logits, c, &labels)?;
        total += loss * chunk.len() as f64;
        preds.extend(cache.logits.chunks(c).map(argmax));
    }
    let correct = preds
        .iter()
        .zip(samples)
        .filter(|(p, s)| **p == s.class_id)
        .count();
    Ok((
        total / samples.len() as f64,
        correct as f64 / samples.len() as f64,
        preds,
    ))
}

fn check_labels(config: &ModelConfig, samples: &[Sample]) -> Result<()> {
    match samples.iter().find(|s| s.class_id >= config.num_classes) {
        Some(s) => Err(Error::Input(format!(
            "sample class {} out of range for {} classes",
            s.class_id, config.num_classes
        ))),
        None => Ok(()),
    }
}

/// Trains with early stopping on validation loss and returns the
/// parameters from the best epoch.
pub fn train(
    config: &ModelConfig,
    params0: ModelParams,
    train_set: &[Sample],
    val_set: &[Sample],
    tconfig: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    if val_set.is_empty() {
        return Err(Error::Input("validation set is empty".into()));
    }
    check_labels(config, val_set)?;
    train_with_monitor(config, params0, train_set, tconfig, |_, p| {
        let (loss, acc, _) = evaluate(config, p, val_set)?;
        Ok((loss, acc))
    })
}

/// [`train`] with the validation step supplied by `monitor`, which
/// receives the 1-based epoch and current parameters and returns
/// (val loss, val accuracy).
pub fn train_with_monitor<F>(
    config: &ModelConfig,
    params0: ModelParams,
    train_set: &[Sample],
    tconfig: &TrainConfig,
    mut monitor: F,
) -> Result<(ModelParams, TrainLog)>
where
    F: FnMut(usize, &ModelParams) -> Result<(f64, f64)>,
{
    tconfig.validate()?;
    config.validate()?;
    params0.check(config)?;
    if train_set.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    check_labels(config, train_set)?;

    let c = config.num_classes;
    let mut params = params0;
    let mut adam = AdamState::new(config, tconfig.adam)?;
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=tconfig.max_epochs {
        let start = Instant::now();
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(
            tconfig.shuffle_seed,
            epoch as u64,
        )));
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(tconfig.batch_size).enumerate() {
            let batch = glyph_batch(idx.iter().map(|&i| &train_set[i].image), config.input_side)?;
            let labels: Vec<usize> = idx.iter().map(|&i| train_set[i].class_id).collect();
            let (_, cache) = forward(config, &params, &batch)?;
            let (loss, grad) = softmax_cross_entropy(&cache.logits, c, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite training loss at epoch {epoch}, batch {}; log so far:\n{}",
                    b + 1,
                    log.to_csv()
                )));
            }
            loss_sum += loss * idx.len() as f64;
            let grads = backward(config, &params, &cache, &grad)?;
            adam_step(&mut params, &grads, &mut adam, config).map_err(|e| match e {
                Error::Training(msg) => Error::Training(format!("epoch {epoch}, batch {}: {msg}", b + 1)),
                other => other,
            })?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_loss, val_accuracy) = monitor(epoch, &params)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite validation loss at epoch {epoch}; log so far:\n{}",
                log.to_csv()
            )));
        }
        log.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
            wall_secs: start.elapsed().as_secs_f64(),
        });
        let improved = best
            .as_ref()
            .is_none_or(|(b, _)| val_loss < b - tconfig.min_delta);
        if improved {
            best = Some((val_loss, params.clone()));
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= tconfig.patience {
                break;
            }
        }
    }
    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::GlyphImage;

    fn tiny() -> (ModelConfig, Vec<Sample>) {
        let cfg = ModelConfig::new_default(8, 2, 3);
        let samples = (0..8)
            .map(|i| {
                let mut g = GlyphImage::blank(8);
                let class_id = i % 2;
                for k in 0..8 {
                    if class_id == 0 {
                        g.set(k, 3, true);
                    } else {
                        g.set(3, k, true);
                    }
                }
                Sample {
                    image: g,
                    class_id,
                    variant_id: i,
                    augment_id: 0,
                }
            })
            .collect();
        (cfg, samples)
    }

    #[test]
    fn injected_plateau_stops_after_patience() {
        let (cfg, samples) = tiny();
        let seq = [1.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.1, 0.1];
        let mut at_epoch2 = None;
        let (best, log) = train_with_monitor(
            &cfg,
            ModelParams::init(&cfg).unwrap(),
            &samples,
            &TrainConfig::default(),
            |e, p| {
                if e == 2 {
                    at_epoch2 = Some(p.clone());
                }
                Ok((seq[e - 1], 0.5))
            },
        )
        .unwrap();
        assert_eq!(log.records.len(), 7);
        assert_eq!(log.best_epoch, 2);
        assert_eq!(Some(best), at_epoch2);
    }

    #[test]
    fn single_epoch_budget() {
        let (cfg, samples) = tiny();
        let t = TrainConfig {
            max_epochs: 1,
            ..Default::default()
        };
        let (_, log) = train(&cfg, ModelParams::init(&cfg).unwrap(), &samples, &samples, &t).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].epoch, 1);
    }

    #[test]
    fn bad_labels_and_empty_sets() {
        let (cfg, mut samples) = tiny();
        let p = ModelParams::init(&cfg).unwrap();
        let t = TrainConfig::default();
        assert!(train(&cfg, p.clone(), &[], &samples, &t).is_err());
        samples[0].class_id = 7;
        assert!(matches!(
            train(&cfg, p, &samples, &samples, &t),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn nan_val_loss_is_a_training_error() {
        let (cfg, samples) = tiny();
        let r = train_with_monitor(
            &cfg,
            ModelParams::init(&cfg).unwrap(),
            &samples,
            &TrainConfig::default(),
            |_, _| Ok((f64::NAN, 0.0)),
        );
        assert!(matches!(r, Err(Error::Training(_))));
    }
}
