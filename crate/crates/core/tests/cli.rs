use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cuneiform::imaging::io::write_pgm;
use cuneiform::imaging::GrayImage;

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cuneiform"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "\
[dataset]
variants_per_class = 2
augmentations_per_variant = 2

[segmentation]
glyph_size = 24

[train]
max_epochs = 3
";

/// Catalog of four synthetic signs, a small dataset, and a config.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("small.toml"), SMALL).unwrap();
    assert_eq!(
        code(&cli(&["synth", "catalog", "--classes", "4", "--out", "cat"], p)),
        0
    );
    let o = cli(
        &[
            "--config",
            "small.toml",
            "dataset",
            "build",
            "--catalog",
            "cat/catalog.tsv",
            "--out",
            "ds",
        ],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_exits_zero_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let subcommands: &[&[&str]] = &[
        &[],
        &["dataset"],
        &["dataset", "build"],
        &["dataset", "split"],
        &["train"],
        &["eval"],
        &["segment"],
        &["recognize"],
        &["translate"],
        &["gradcheck"],
        &["synth", "catalog"],
        &["synth", "page"],
    ];
    for sub in subcommands {
        let mut args = sub.to_vec();
        args.push("--help");
        let o = cli(&args, dir.path());
        assert_eq!(code(&o), 0, "{sub:?}");
        let text = stdout(&o);
        for key in [
            "max_epochs",
            "glyph_size",
            "train_fraction",
            "init_seed",
            "coords_per_tensor",
        ] {
            assert!(text.contains(key), "{sub:?} help lacks {key}");
        }
    }
}

#[test]
fn dataset_summary_and_determinism() {
    let ws = workspace();
    let p = ws.path();
    let o = cli(
        &[
            "--config",
            "small.toml",
            "dataset",
            "build",
            "--catalog",
            "cat/catalog.tsv",
            "--out",
            "ds2",
        ],
        p,
    );
    let s = stdout(&o);
    assert!(s.contains("classes\t4") && s.contains("samples\t24"), "{s}");
    assert_eq!(tree(&p.join("ds")), tree(&p.join("ds2")));

    let o = cli(
        &[
            "--config",
            "small.toml",
            "--seed",
            "5",
            "dataset",
            "split",
            "--dataset",
            "ds",
            "--out",
            "ds3",
        ],
        p,
    );
    assert_eq!(code(&o), 0);
    assert_ne!(tree(&p.join("ds")), tree(&p.join("ds3")));
}

#[test]
fn train_eval_and_one_epoch_log() {
    let ws = workspace();
    let p = ws.path();
    let o = cli(
        &["--config", "small.toml", "train", "--dataset", "ds", "--out", "m"],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("best_epoch"));
    let again = cli(
        &[
            "--config",
            "small.toml",
            "train",
            "--dataset",
            "ds",
            "--out",
            "m2",
        ],
        p,
    );
    assert_eq!(code(&again), 0);
    assert_eq!(tree(&p.join("m")), tree(&p.join("m2")));

    fs::write(
        p.join("one.toml"),
        SMALL.replace("max_epochs = 3", "max_epochs = 1"),
    )
    .unwrap();
    assert_eq!(
        code(&cli(
            &["--config", "one.toml", "train", "--dataset", "ds", "--out", "m1"],
            p
        )),
        0
    );
    let log = fs::read_to_string(p.join("m1/trainlog.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let o = cli(
        &[
            "eval",
            "--model",
            "m/model.cnnm",
            "--dataset",
            "ds",
            "--out",
            "ev",
        ],
        p,
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(p.join("ev/metrics.csv")).unwrap();
    assert!(csv.starts_with("model,accuracy,precision,recall,f1\ncnn,"));

    // A model for 32-px glyphs against the 24-px dataset.
    fs::write(
        p.join("big.toml"),
        SMALL.replace("glyph_size = 24", "glyph_size = 32"),
    )
    .unwrap();
    let o = cli(
        &[
            "--config",
            "big.toml",
            "dataset",
            "build",
            "--catalog",
            "cat/catalog.tsv",
            "--out",
            "ds32",
        ],
        p,
    );
    assert_eq!(code(&o), 0);
    assert_eq!(
        code(&cli(
            &[
                "--config",
                "one.toml",
                "train",
                "--dataset",
                "ds32",
                "--out",
                "m32"
            ],
            p
        )),
        0
    );
    assert_eq!(
        code(&cli(&["eval", "--model", "m32/model.cnnm", "--dataset", "ds"], p)),
        2
    );
}

#[test]
fn recognize_with_truth_and_blank_scan() {
    let ws = workspace();
    let p = ws.path();
    assert_eq!(
        code(&cli(
            &["--config", "small.toml", "train", "--dataset", "ds", "--out", "m"],
            p
        )),
        0
    );
    assert_eq!(
        code(&cli(
            &["synth", "page", "--catalog", "cat/catalog.tsv", "--out", "page"],
            p
        )),
        0
    );
    fs::write(p.join("lex.tsv"), "s00,s01\tab\tfirst\ns02\tc\tsecond\n").unwrap();
    let args = [
        "--config",
        "small.toml",
        "recognize",
        "--model",
        "m/model.cnnm",
        "--lexicon",
        "lex.tsv",
        "--scan",
        "page/page.pgm",
        "--truth",
        "page/truth.txt",
        "--out",
        "rec",
    ];
    let o = cli(&args, p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("relative_accuracy\t"));
    for f in [
        "overlay.ppm",
        "report.tsv",
        "summary.txt",
        "translation.tsv",
        "segmentation/manifest.tsv",
    ] {
        assert!(p.join("rec").join(f).exists(), "{f}");
    }
    let report = fs::read_to_string(p.join("rec/report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 16);

    write_pgm(p.join("blank.pgm"), &GrayImage::filled(300, 200, 255).unwrap()).unwrap();
    let mut blank = args;
    blank[8] = "blank.pgm";
    blank[9] = "--out";
    blank[10] = "blank";
    let o = cli(&blank[..11], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("glyphs\t0"));
    assert_eq!(
        fs::read_to_string(p.join("blank/report.tsv"))
            .unwrap()
            .lines()
            .count(),
        1
    );

    let mut missing = args;
    missing[6] = "nope.tsv";
    assert_eq!(code(&cli(&missing, p)), 3);

    // Default 64-px segmentation against a 24-px model.
    let o = cli(&args[2..], p);
    assert_eq!(code(&o), 2);
}

#[test]
fn segment_and_translate() {
    let ws = workspace();
    let p = ws.path();
    assert_eq!(
        code(&cli(
            &[
                "synth",
                "page",
                "--catalog",
                "cat/catalog.tsv",
                "--lines",
                "2",
                "--per-line",
                "4",
                "--out",
                "pg"
            ],
            p
        )),
        0
    );
    let o = cli(&["segment", "--scan", "pg/page.pgm", "--out", "seg"], p);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("lines\t2\nglyphs\t8"));
    assert_eq!(
        fs::read_to_string(p.join("seg/manifest.tsv"))
            .unwrap()
            .lines()
            .count(),
        9
    );

    fs::write(p.join("lex.tsv"), "a,b\tab\tfirst\nc\tc\tsecond\n").unwrap();
    let o = cli(&["translate", "--lexicon", "lex.tsv", "a", "b", "z", "c"], p);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(
        s.contains("0\ta,b\tab\tfirst") && s.contains("2\tz\t") && s.contains("3\tc\tc\tsecond"),
        "{s}"
    );
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        code(&cli(
            &["dataset", "build", "--catalog", "missing.tsv", "--out", "x"],
            p
        )),
        3
    );
    assert_eq!(
        code(&cli(&["dataset", "build", "--catalog", "missing.tsv"], p)),
        2
    );
    fs::write(p.join("bad.toml"), "[train]\nepochs = 3\n").unwrap();
    assert_eq!(code(&cli(&["--config", "bad.toml", "gradcheck"], p)), 2);
    fs::write(p.join("empty.toml"), "[model]\nlayers = []\n").unwrap();
    assert_eq!(code(&cli(&["--config", "empty.toml", "gradcheck"], p)), 2);
    fs::write(p.join("lr.toml"), "[train.adam]\nlr = -1.0\n").unwrap();
    assert_eq!(code(&cli(&["--config", "lr.toml", "gradcheck"], p)), 2);
}

#[test]
fn gradcheck_pass_and_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("g.toml"), "[gradcheck]\nrandom_instances = 3\n").unwrap();
    let o = cli(&["--config", "g.toml", "gradcheck"], p);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("max relative error"));
    let o = cli(&["--config", "g.toml", "gradcheck", "--inject-fault", "0"], p);
    assert_eq!(code(&o), 5);
    assert_eq!(
        code(&cli(
            &["--config", "g.toml", "gradcheck", "--inject-fault", "1"],
            p
        )),
        2
    );
}

#[test]
fn training_divergence_exits_four() {
    let ws = workspace();
    let p = ws.path();
    fs::write(p.join("div.toml"), format!("{SMALL}\n[train.adam]\nlr = 1e300\n")).unwrap();
    let o = cli(
        &["--config", "div.toml", "train", "--dataset", "ds", "--out", "m"],
        p,
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
