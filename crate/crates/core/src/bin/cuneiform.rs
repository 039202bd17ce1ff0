use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cuneiform::config::RunConfig;
use cuneiform::dataset::{load_class_catalog, load_dir, save_dir, Dataset};
use cuneiform::imaging::io::{read_gray, write_pgm};
use cuneiform::imaging::{otsu_threshold, resize_to_width, Polarity};
use cuneiform::lexicon::{load_ground_truth, load_lexicon, translate_page, translate_sequence};
use cuneiform::metrics::REPORT_CSV_HEADER;
use cuneiform::nn::Model;
use cuneiform::seed::mix;
use cuneiform::segmentation::{segment_page, write_segmentation};
use cuneiform::synth::{sign_name, stamp_page, synthetic_signs, write_catalog, StampLayout};
use cuneiform::workflow::{build_dataset, evaluate_model, resplit, run_gradcheck, train_model};
use cuneiform::{Error, Result};

const CONFIG_HELP: &str = "\
Configuration (--config, TOML; every key optional, unknown keys rejected):
  [paths]         catalog, dataset, model, lexicon
  [segmentation]  target_width, polarity (ink_is_dark|ink_is_light),
                  dilation_shape (rectangle|cross), dilation_radius,
                  dilation_iterations, connectivity (four|eight),
                  min_component_pixels, line_overlap_ratio, glyph_size,
                  glyph_margin
  [dataset]       variants_per_class, augmentations_per_variant, variant_seed
  [dataset.augmentation]
                  rotation_max, translate_max, scale_range, noise_flip_prob, seed
  [split]         train_fraction, val_fraction, test_fraction, seed
  [model]         init_seed, layers (list of {kind = conv2d|maxpool|relu|
                  flatten|dense|softmax, ...})
  [train]         max_epochs, patience, batch_size, min_delta, shuffle_seed
  [train.adam]    lr, beta1, beta2, epsilon
  [gradcheck]     input_side, num_classes, batch, random_instances
  [gradcheck.check]
                  step, tolerance, coords_per_tensor, seed, floor

Exit codes: 0 success, 2 configuration or structural error, 3 I/O or file
format error, 4 training failure, 5 failed verification.";

/// Cuneiform sign recognition: datasets, training, segmentation,
/// recognition and translation.
#[derive(Parser)]
#[command(name = "cuneiform", version, after_help = CONFIG_HELP)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces every seed in the configuration with streams derived from this value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dataset from a catalog, or re-split an existing one.
    #[command(subcommand, after_help = CONFIG_HELP)]
    Dataset(DatasetCmd),
    /// Train the classifier with early stopping; writes model.cnnm and trainlog.csv.
    #[command(after_help = CONFIG_HELP)]
    Train(TrainArgs),
    /// Accuracy and macro precision, recall and F1 on a dataset split.
    #[command(after_help = CONFIG_HELP)]
    Eval(EvalArgs),
    /// Segment a page scan into ordered, normalized glyphs.
    #[command(after_help = CONFIG_HELP)]
    Segment(SegmentArgs),
    /// Segment, recognize and translate a page, with an optional truth comparison.
    #[command(after_help = CONFIG_HELP)]
    Recognize(RecognizeArgs),
    /// Translate a sign sequence with a lexicon.
    #[command(after_help = CONFIG_HELP)]
    Translate(TranslateArgs),
    /// Check analytic gradients against finite differences.
    #[command(after_help = CONFIG_HELP)]
    Gradcheck(GradcheckArgs),
    /// Generate synthetic catalogs and stamped pages.
    #[command(subcommand, after_help = CONFIG_HELP)]
    Synth(SynthCmd),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Load the catalog, derive variants and augmentations, split, and save.
    #[command(after_help = CONFIG_HELP)]
    Build {
        /// Catalog manifest; defaults to paths.catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Pool an existing dataset and split it again under [split].
    #[command(after_help = CONFIG_HELP)]
    Split {
        /// Dataset directory; defaults to paths.dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory; defaults to paths.dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file; defaults to paths.model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset directory; defaults to paths.dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Which split to evaluate.
    #[arg(long, default_value = "test", value_parser = ["train", "val", "test"])]
    split: String,
    /// Model name written in the CSV row.
    #[arg(long, default_value = "cnn")]
    name: String,
}

#[derive(Args)]
struct SegmentArgs {
    /// Page scan (PNG, PGM or PPM).
    #[arg(long)]
    scan: PathBuf,
}

#[derive(Args)]
struct RecognizeArgs {
    /// Model file; defaults to paths.model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Lexicon TSV; defaults to paths.lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Page scan (PNG, PGM or PPM).
    #[arg(long)]
    scan: PathBuf,
    /// Ground-truth sign names in reading order.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct TranslateArgs {
    /// Lexicon TSV; defaults to paths.lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Sign names, in order.
    #[arg(required = true)]
    signs: Vec<String>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Scale the analytic gradient of this layer by 1.01 (self-test of the check).
    #[arg(long)]
    inject_fault: Option<usize>,
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Write a catalog of distinct synthetic wedge signs.
    #[command(after_help = CONFIG_HELP)]
    Catalog {
        #[arg(long, default_value_t = 20)]
        classes: usize,
    },
    /// Stamp a page from catalog signs; writes page.pgm and truth.txt.
    #[command(after_help = CONFIG_HELP)]
    Page {
        /// Catalog manifest; defaults to paths.catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        lines: usize,
        #[arg(long, default_value_t = 5)]
        per_line: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<&Path> {
    let dir = out
        .as_deref()
        .ok_or_else(|| Error::Config("this command needs --out <dir>".into()))?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    Ok(dir)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn summarize(ds: &Dataset) {
    let (tr, va, te) = ds.split.sizes();
    println!("classes\t{}", ds.num_classes());
    println!("samples\t{}", ds.split.len());
    println!("train\t{tr}\nval\t{va}\ntest\t{te}");
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seeds(seed);
    }
    match cli.command {
        Command::Dataset(DatasetCmd::Build { catalog }) => {
            let catalog = cfg.path(catalog, "catalog")?;
            let out = out_dir(&cli.out)?;
            let ds = build_dataset(&catalog, &cfg)?;
            save_dir(out, &ds)?;
            summarize(&ds);
        }
        Command::Dataset(DatasetCmd::Split { dataset }) => {
            let ds = load_dir(&cfg.path(dataset, "dataset")?)?;
            let out = out_dir(&cli.out)?;
            let ds = resplit(&ds, &cfg.split)?;
            save_dir(out, &ds)?;
            summarize(&ds);
        }
        Command::Train(a) => {
            let ds = load_dir(&cfg.path(a.dataset, "dataset")?)?;
            let out = out_dir(&cli.out)?;
            let (model, log) = train_model(&ds, &cfg)?;
            model.save(&out.join("model.cnnm"))?;
            write(&out.join("trainlog.csv"), &log.to_csv())?;
            let best = log.best().expect("training ran at least one epoch");
            println!("epochs\t{}", log.records.len());
            println!("best_epoch\t{}", best.epoch);
            println!("best_val_loss\t{:.6}", best.val_loss);
            println!("best_val_accuracy\t{:.4}", best.val_accuracy);
        }
        Command::Eval(a) => {
            let model = Model::load(&cfg.path(a.model, "model")?)?;
            let ds = load_dir(&cfg.path(a.dataset, "dataset")?)?;
            let samples = match a.split.as_str() {
                "train" => &ds.split.train,
                "val" => &ds.split.val,
                _ => &ds.split.test,
            };
            let report = evaluate_model(&model, samples, ds.glyph_size)?;
            print!("{}", report.text(|k| model.config.class_name(k)));
            let row = report.csv_row(&a.name);
            println!("{REPORT_CSV_HEADER}\n{row}");
            if cli.out.is_some() {
                let out = out_dir(&cli.out)?;
                write(&out.join("metrics.csv"), &format!("{REPORT_CSV_HEADER}\n{row}\n"))?;
            }
        }
        Command::Segment(a) => {
            let scan = read_gray(&a.scan)?;
            let out = out_dir(&cli.out)?;
            let (seg, glyphs) = segment_page(&scan, &cfg.segmentation)?;
            let page = resize_to_width(&scan, cfg.segmentation.target_width)?;
            write_segmentation(out, &seg, &glyphs, Some(&page))?;
            let lines = seg.boxes.iter().map(|b| b.line_index + 1).max().unwrap_or(0);
            println!("lines\t{lines}\nglyphs\t{}", seg.boxes.len());
        }
        Command::Recognize(a) => {
            let model = Model::load(&cfg.path(a.model, "model")?)?;
            let lex = load_lexicon(&cfg.path(a.lexicon, "lexicon")?, None)?;
            let scan = read_gray(&a.scan)?;
            let truth = a.truth.as_deref().map(load_ground_truth).transpose()?;
            let out = out_dir(&cli.out)?;
            let result = translate_page(&scan, &model, &lex, &cfg.segmentation, truth.as_deref())?;
            result.write(out)?;
            print!("{}", result.report.summary);
            let english = result.translation.english().join(" ");
            println!("english\t{english}");
        }
        Command::Translate(a) => {
            let lex = load_lexicon(&cfg.path(a.lexicon, "lexicon")?, None)?;
            let result = translate_sequence(&a.signs, &lex);
            let tsv = result.to_tsv();
            print!("{tsv}");
            if cli.out.is_some() {
                write(&out_dir(&cli.out)?.join("translation.tsv"), &tsv)?;
            }
        }
        Command::Gradcheck(a) => {
            let reports = run_gradcheck(&cfg, a.inject_fault)?;
            let mut worst = 0.0f64;
            for (name, r) in &reports {
                println!("== {name}");
                print!("{}", r.summary());
                worst = worst.max(r.max_rel_error());
            }
            let tol = cfg.gradcheck.check.tolerance;
            println!(
                "max relative error {worst:.3e} over {} stacks (tolerance {tol:.0e})",
                reports.len()
            );
            if reports.iter().any(|(_, r)| !r.passed()) {
                return Err(Error::Verification(format!(
                    "max relative error {worst:.3e} exceeds {tol:.0e}"
                )));
            }
        }
        Command::Synth(SynthCmd::Catalog { classes }) => {
            let out = out_dir(&cli.out)?;
            let signs = synthetic_signs(classes, cli.seed.unwrap_or(1));
            let names: Vec<String> = (0..classes).map(sign_name).collect();
            write_catalog(out, &names, &signs)?;
            println!(
                "classes\t{classes}\ncatalog\t{}",
                out.join("catalog.tsv").display()
            );
        }
        Command::Synth(SynthCmd::Page {
            catalog,
            lines,
            per_line,
        }) => {
            let classes = load_class_catalog(&cfg.path(catalog, "catalog")?)?;
            let out = out_dir(&cli.out)?;
            let signs = classes
                .iter()
                .map(|c| Ok(otsu_threshold(&read_gray(&c.source_path)?, Polarity::InkIsDark).image))
                .collect::<Result<Vec<_>>>()?;
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cli.seed.unwrap_or(1), 0x9A6E));
            let mut picks = Vec::with_capacity(lines * per_line);
            for _ in 0..lines * per_line {
                picks.push(
                    *(0..classes.len())
                        .collect::<Vec<_>>()
                        .choose(&mut rng)
                        .expect("catalog nonempty"),
                );
            }
            let rows: Vec<Vec<_>> = picks
                .chunks(per_line.max(1))
                .map(|r| r.iter().map(|&k| &signs[k]).collect())
                .collect();
            let page = stamp_page(&rows, StampLayout::default())?;
            write_pgm(out.join("page.pgm"), &page.image)?;
            let mut truth = String::new();
            for r in picks.chunks(per_line.max(1)) {
                let names: Vec<&str> = r.iter().map(|&k| classes[k].sign_name.as_str()).collect();
                truth += &names.join(" ");
                truth.push('\n');
            }
            write(&out.join("truth.txt"), &truth)?;
            println!("glyphs\t{}", picks.len());
        }
    }
    Ok(())
}
