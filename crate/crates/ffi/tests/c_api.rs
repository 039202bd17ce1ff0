use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use cuneiform::imaging::io::write_pgm;
use cuneiform::nn::{Model, ModelConfig, ModelParams};
use cuneiform::synth::{sign_name, stamp_page, synthetic_signs, StampLayout};
use cuneiform_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn c_path(p: &Path) -> CString {
    c(p.to_str().unwrap())
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    cnf_string_free(s);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cnf_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn tiny_model(dir: &Path, side: usize, classes: usize) -> std::path::PathBuf {
    let mut config = ModelConfig::new_default(side, classes, 3);
    config.class_names = (0..classes).map(sign_name).collect();
    let params = ModelParams::init(&config).unwrap();
    let path = dir.join("tiny.cnnm");
    Model::new(config, params).unwrap().save(&path).unwrap();
    path
}

#[test]
fn model_handle_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = tiny_model(dir.path(), 16, 4);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(cnf_model_load(c_path(&path).as_ptr(), &mut model), CnfStatus::Ok);
        assert_eq!(cnf_model_input_side(model), 16);
        assert_eq!(cnf_model_num_classes(model), 4);

        let mut name = ptr::null_mut();
        assert_eq!(cnf_model_class_name(model, 2, &mut name), CnfStatus::Ok);
        assert_eq!(take(name), "s02");
        assert_eq!(cnf_model_class_name(model, 4, &mut name), CnfStatus::InvalidInput);
        assert!(name.is_null());

        let pixels = vec![1u8; 256];
        let (mut k, mut p) = (99u32, 0f32);
        assert_eq!(
            cnf_model_predict(model, pixels.as_ptr(), 256, &mut k, &mut p),
            CnfStatus::Ok
        );
        assert!(k < 4 && p > 0.0 && p <= 1.0);
        assert_eq!(
            cnf_model_predict(model, pixels.as_ptr(), 255, &mut k, &mut p),
            CnfStatus::InvalidInput
        );
        assert!(last_error().contains("256"));

        let copy = dir.path().join("copy.cnnm");
        assert_eq!(cnf_model_save(model, c_path(&copy).as_ptr()), CnfStatus::Ok);
        assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(&path).unwrap());
        cnf_model_free(model);
        cnf_model_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = tiny_model(dir.path(), 12, 3);
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let bad = dir.path().join("bad.cnnm");
    std::fs::write(&bad, bytes).unwrap();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(cnf_model_load(c_path(&bad).as_ptr(), &mut model), CnfStatus::Io);
        assert!(model.is_null());
        assert!(!last_error().is_empty());
        let missing = dir.path().join("missing.cnnm");
        assert_eq!(
            cnf_model_load(c_path(&missing).as_ptr(), &mut model),
            CnfStatus::Io
        );
        assert_eq!(cnf_model_load(ptr::null(), &mut model), CnfStatus::NullArgument);
        assert_eq!(
            cnf_model_load(c_path(&path).as_ptr(), ptr::null_mut()),
            CnfStatus::NullArgument
        );
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            cnf_model_load(invalid.as_ptr().cast(), &mut model),
            CnfStatus::InvalidUtf8
        );

        assert_eq!(cnf_model_load(c_path(&path).as_ptr(), &mut model), CnfStatus::Ok);
        assert_eq!(last_error(), "");
        cnf_model_free(model);

        let lex = dir.path().join("dup.tsv");
        std::fs::write(&lex, "a\tx\ty\na\tx\tz\n").unwrap();
        let mut handle = ptr::null_mut();
        assert_eq!(
            cnf_lexicon_load(c_path(&lex).as_ptr(), &mut handle),
            CnfStatus::Io
        );
        assert!(last_error().contains("line 2"));
    }
}

#[test]
fn lexicon_translation() {
    let dir = tempfile::tempdir().unwrap();
    let lex_path = dir.path().join("lex.tsv");
    std::fs::write(
        &lex_path,
        "šum,ma\tšumma\tif\nid,da,ak\tiddâk\texecuted\nla\tlā\tnot\n",
    )
    .unwrap();
    unsafe {
        let mut lex = ptr::null_mut();
        assert_eq!(
            cnf_lexicon_load(c_path(&lex_path).as_ptr(), &mut lex),
            CnfStatus::Ok
        );
        assert_eq!(cnf_lexicon_len(lex), 3);
        let (mut tsv, mut english) = (ptr::null_mut(), ptr::null_mut());
        let signs = c("šum ma id da ak la x");
        assert_eq!(
            cnf_translate(lex, signs.as_ptr(), &mut tsv, &mut english),
            CnfStatus::Ok
        );
        assert_eq!(take(english), "if executed not");
        let table = take(tsv);
        assert_eq!(table.lines().count(), 5);
        assert!(table.lines().last().unwrap().starts_with("6\tx\t"));
        assert_eq!(
            cnf_translate(lex, signs.as_ptr(), &mut tsv, ptr::null_mut()),
            CnfStatus::Ok
        );
        cnf_string_free(tsv);
        cnf_lexicon_free(lex);

        let mut acc = 0.0;
        assert_eq!(
            cnf_relative_accuracy(c("a b c").as_ptr(), c("a x c d").as_ptr(), &mut acc),
            CnfStatus::Ok
        );
        assert_eq!(acc, 0.5);
        assert_eq!(
            cnf_relative_accuracy(c("").as_ptr(), c(" ").as_ptr(), &mut acc),
            CnfStatus::InvalidInput
        );
    }
}

fn stamped(lines: usize, per_line: usize) -> (cuneiform::imaging::GrayImage, Vec<String>) {
    let signs = synthetic_signs(per_line, 5);
    let rows: Vec<Vec<_>> = (0..lines)
        .map(|l| (0..per_line).map(|i| &signs[(i + l) % per_line]).collect())
        .collect();
    let page = stamp_page(&rows, StampLayout::default()).unwrap();
    let truth = (0..lines)
        .flat_map(|l| (0..per_line).map(move |i| sign_name((i + l) % per_line)))
        .collect();
    (page.image, truth)
}

#[test]
fn segmentation_handle() {
    let (img, _) = stamped(3, 5);
    unsafe {
        let mut seg = ptr::null_mut();
        let st = cnf_segment_gray(
            img.data().as_ptr(),
            img.width() as u32,
            img.height() as u32,
            24,
            &mut seg,
        );
        assert_eq!(st, CnfStatus::Ok, "{}", last_error());
        assert_eq!(cnf_segmentation_len(seg), 15);
        for i in 0..15 {
            let mut b = CnfBox::default();
            assert_eq!(cnf_segmentation_box(seg, i, &mut b), CnfStatus::Ok);
            assert_eq!((b.line_index, b.column_index), (i / 5, i % 5));
            assert!(b.x0 <= b.x1 && b.y0 <= b.y1);
        }
        let mut b = CnfBox::default();
        assert_eq!(cnf_segmentation_box(seg, 15, &mut b), CnfStatus::InvalidInput);
        let mut glyph = vec![0u8; 24 * 24];
        assert_eq!(
            cnf_segmentation_glyph(seg, 0, glyph.as_mut_ptr(), glyph.len()),
            CnfStatus::Ok
        );
        assert!(glyph.contains(&1) && glyph.iter().all(|&v| v <= 1));
        assert_eq!(
            cnf_segmentation_glyph(seg, 0, glyph.as_mut_ptr(), 10),
            CnfStatus::InvalidInput
        );
        cnf_segmentation_free(seg);
    }
}

#[test]
fn page_recognition_report_agrees_with_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = tiny_model(dir.path(), 16, 5);
    let (img, truth) = stamped(2, 5);
    let scan = dir.path().join("page.pgm");
    write_pgm(&scan, &img).unwrap();
    let truth_path = dir.path().join("truth.txt");
    std::fs::write(&truth_path, truth.join(" ")).unwrap();
    let lex_path = dir.path().join("lex.tsv");
    std::fs::write(&lex_path, "s00,s01\tab\tAB\n").unwrap();
    let out = dir.path().join("report");
    unsafe {
        let (mut model, mut lex, mut page) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            cnf_model_load(c_path(&model_path).as_ptr(), &mut model),
            CnfStatus::Ok
        );
        assert_eq!(
            cnf_lexicon_load(c_path(&lex_path).as_ptr(), &mut lex),
            CnfStatus::Ok
        );
        let st = cnf_recognize_page(
            model,
            lex,
            c_path(&scan).as_ptr(),
            c_path(&truth_path).as_ptr(),
            c_path(&out).as_ptr(),
            &mut page,
        );
        assert_eq!(st, CnfStatus::Ok, "{}", last_error());
        assert_eq!(cnf_page_glyph_count(page), 10);
        let (mut acc, mut green) = (0.0, 0u32);
        assert_eq!(cnf_page_accuracy(page, &mut acc, &mut green), CnfStatus::Ok);
        let mut signs = ptr::null_mut();
        assert_eq!(cnf_page_signs(page, &mut signs), CnfStatus::Ok);
        let signs = take(signs);
        let matches = signs.split(' ').zip(&truth).filter(|(p, t)| p == t).count();
        assert_eq!(green as usize, matches);
        assert_eq!(acc, matches as f64 / 10.0);
        let mut tsv = ptr::null_mut();
        assert_eq!(cnf_page_translation_tsv(page, &mut tsv), CnfStatus::Ok);
        assert!(take(tsv).starts_with("position\t"));
        for f in [
            "overlay.ppm",
            "report.tsv",
            "summary.txt",
            "translation.tsv",
            "segmentation/manifest.tsv",
        ] {
            assert!(out.join(f).exists(), "{f}");
        }
        cnf_page_free(page);

        let st = cnf_recognize_page(
            model,
            lex,
            c_path(&scan).as_ptr(),
            ptr::null(),
            ptr::null(),
            &mut page,
        );
        assert_eq!(st, CnfStatus::Ok);
        assert_eq!(cnf_page_accuracy(page, &mut acc, &mut green), CnfStatus::Io);
        cnf_page_free(page);
        cnf_lexicon_free(lex);
        cnf_model_free(model);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(cnf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
