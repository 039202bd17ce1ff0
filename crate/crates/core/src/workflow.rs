//! End-to-end steps shared by the command-line tool and the C interface.

use std::path::Path;

use crate::config::RunConfig;
use crate::dataset::Sample;
use crate::dataset::{
    build_samples, load_class_catalog, load_masters, split_dataset, Dataset, DatasetSplit, SplitSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{confusion, report, MetricsReport};
use crate::nn::{
    evaluate, gradcheck, random_instance, randomize, train, GradCheckReport, Model, ModelConfig, ModelParams,
    TrainLog,
};

/// Loads the catalog, derives variants and augmentations, and splits.
pub fn build_dataset(catalog: &Path, cfg: &RunConfig) -> Result<Dataset> {
    let classes = load_class_catalog(catalog)?;
    let seg = &cfg.segmentation;
    let masters = load_masters(&classes, seg.glyph_size, seg.glyph_margin, seg.polarity)?;
    let samples = build_samples(&masters, &cfg.dataset)?;
    Ok(Dataset {
        glyph_size: seg.glyph_size,
        class_names: classes.into_iter().map(|c| c.sign_name).collect(),
        split: split_dataset(&samples, &cfg.split)?,
    })
}

/// Pools all samples of `ds` and splits them again under `spec`.
pub fn resplit(ds: &Dataset, spec: &SplitSpec) -> Result<Dataset> {
    let mut all: Vec<Sample> = ds
        .split
        .parts()
        .iter()
        .flat_map(|(_, s)| s.iter().cloned())
        .collect();
    all.sort_by_key(|s| (s.class_id, s.variant_id, s.augment_id));
    Ok(Dataset {
        glyph_size: ds.glyph_size,
        class_names: ds.class_names.clone(),
        split: split_dataset(&all, spec)?,
    })
}

/// Trains the configured model on the train split, early-stopping on val.
pub fn train_model(ds: &Dataset, cfg: &RunConfig) -> Result<(Model, TrainLog)> {
    let DatasetSplit { train: tr, val, .. } = &ds.split;
    if tr.is_empty() || val.is_empty() {
        return Err(Error::Input("dataset needs nonempty train and val splits".into()));
    }
    let config = cfg.model_config(ds.glyph_size, &ds.class_names)?;
    let params0 = ModelParams::init(&config)?;
    let (params, log) = train(&config, params0, tr, val, &cfg.train)?;
    Ok((Model { config, params }, log))
}

/// Metrics of `model` on `samples` of glyph size `glyph_size`.
pub fn evaluate_model(model: &Model, samples: &[Sample], glyph_size: usize) -> Result<MetricsReport> {
    if model.config.input_side != glyph_size {
        return Err(Error::Shape {
            layer: 0,
            msg: format!(
                "model expects {0}x{0} glyphs, dataset has {1}x{1}",
                model.config.input_side, glyph_size
            ),
        });
    }
    let (_, _, preds) = evaluate(&model.config, &model.params, samples)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.class_id).collect();
    report(&confusion(&preds, &labels, model.config.num_classes)?)
}

/// Gradient check of the configured stack, then of the random stacks.
/// `inject_fault` applies to the configured stack only.
pub fn run_gradcheck(cfg: &RunConfig, inject_fault: Option<usize>) -> Result<Vec<(String, GradCheckReport)>> {
    let g = &cfg.gradcheck;
    let names: Vec<String> = (0..g.num_classes).map(|i| format!("c{i}")).collect();
    let config: ModelConfig = cfg.model_config(g.input_side, &names)?;
    let (params, batch, labels) = randomize(&config, g.batch, g.check.seed)?;
    let mut out = vec![(
        "configured stack".to_string(),
        gradcheck(&config, &params, &batch, &labels, &g.check, inject_fault)?,
    )];
    for i in 0..g.random_instances {
        let (c, p, x, y) = random_instance(crate::seed::mix(g.check.seed, i as u64));
        out.push((
            format!("random stack {i}"),
            gradcheck(&c, &p, &x, &y, &g.check, None)?,
        ));
    }
    Ok(out)
}
