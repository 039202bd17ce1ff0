//! C interface to the cuneiform toolkit.
//!
//! Objects are opaque handles created by `cnf_*_load` or `cnf_*_new`
//! functions and released with the matching `cnf_*_free`. Every fallible
//! call returns a [`CnfStatus`]; on failure, [`cnf_last_error_message`]
//! describes the error for the calling thread. Strings returned through
//! out-parameters are owned by the caller and released with
//! [`cnf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cuneiform::imaging::io::read_gray;
use cuneiform::imaging::GrayImage;
use cuneiform::lexicon::{
    load_ground_truth, load_lexicon, parse_ground_truth, relative_accuracy, translate_page,
    translate_sequence, Lexicon, PageTranslation,
};
use cuneiform::nn::Model;
use cuneiform::segmentation::{segment_page, GlyphImage, PageSegmentation, SegmentationParams};
use cuneiform::Error;

/// Result of every fallible call. Values 2 to 5 match the command-line
/// exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Configuration, shape or other structural error in the input.
    InvalidInput = 2,
    /// File could not be read or written, or its format is invalid.
    Io = 3,
    Training = 4,
    Verification = 5,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 6,
    /// Internal panic; the library state is unchanged.
    Internal = 7,
}

impl From<&Error> for CnfStatus {
    fn from(e: &Error) -> Self {
        match e.exit_code() {
            2 => CnfStatus::InvalidInput,
            4 => CnfStatus::Training,
            5 => CnfStatus::Verification,
            _ => CnfStatus::Io,
        }
    }
}

/// A trained classifier.
pub struct CnfModel(Model);

/// A sign-sequence lexicon.
pub struct CnfLexicon(Lexicon);

/// Boxes and glyphs of a segmented page.
pub struct CnfSegmentation {
    seg: PageSegmentation,
    glyphs: Vec<GlyphImage>,
}

/// Recognition, translation and report of one page.
pub struct CnfPage(PageTranslation);

/// A character box in working-page coordinates (inclusive corners).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CnfBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub line_index: u32,
    pub column_index: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes replaced"));
}

enum Fail {
    Status(CnfStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn null(name: &str) -> Fail {
    Fail::Status(CnfStatus::NullArgument, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CnfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CnfStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            CnfStatus::from(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            CnfStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(CnfStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes replaced")
        .into_raw()
}

/// Message for the most recent failed call on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cnf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cnf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cnf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnf_model_load(path: *const c_char, out: *mut *mut CnfModel) -> CnfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = Model::load(&PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(CnfModel(model)));
        Ok(())
    })
}

/// Writes a model file.
///
/// # Safety
/// `model` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn cnf_model_save(model: *const CnfModel, path: *const c_char) -> CnfStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        m.0.save(&PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnf_model_free(model: *mut CnfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Side length of the square glyphs the model classifies; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cnf_model_input_side(model: *const CnfModel) -> u32 {
    model.as_ref().map_or(0, |m| m.0.config.input_side as u32)
}

/// Number of classes; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cnf_model_num_classes(model: *const CnfModel) -> u32 {
    model.as_ref().map_or(0, |m| m.0.config.num_classes as u32)
}

/// Sign name of class `class_id`, to be released with [`cnf_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnf_model_class_name(
    model: *const CnfModel,
    class_id: u32,
    out: *mut *mut c_char,
) -> CnfStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if class_id as usize >= m.0.config.num_classes {
            return Err(Error::Input(format!("class {class_id} out of range")).into());
        }
        *out = c_string(m.0.config.class_name(class_id as usize));
        Ok(())
    })
}

/// Classifies one glyph given as `side * side` bytes in row-major order,
/// nonzero meaning ink.
///
/// # Safety
/// `pixels` must point to `len` readable bytes; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cnf_model_predict(
    model: *const CnfModel,
    pixels: *const u8,
    len: usize,
    class_id: *mut u32,
    probability: *mut f32,
) -> CnfStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        let class_id = out_arg(class_id, "class_id")?;
        let probability = out_arg(probability, "probability")?;
        let side = m.0.config.input_side;
        if len != side * side {
            return Err(Error::Input(format!("expected {} pixels, got {len}", side * side)).into());
        }
        let data = std::slice::from_raw_parts(pixels, len)
            .iter()
            .map(|&p| p != 0)
            .collect();
        let (k, p) = m.0.predict(&GlyphImage::new(side, data)?)?;
        *class_id = k as u32;
        *probability = p;
        Ok(())
    })
}

/// Loads a lexicon TSV.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnf_lexicon_load(path: *const c_char, out: *mut *mut CnfLexicon) -> CnfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let lex = load_lexicon(&PathBuf::from(str_arg(path, "path")?), None)?;
        *out = Box::into_raw(Box::new(CnfLexicon(lex)));
        Ok(())
    })
}

/// # Safety
/// `lexicon` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnf_lexicon_free(lexicon: *mut CnfLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Number of entries; 0 for null.
///
/// # Safety
/// `lexicon` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cnf_lexicon_len(lexicon: *const CnfLexicon) -> u32 {
    lexicon.as_ref().map_or(0, |l| l.0.len() as u32)
}

/// Translates whitespace-separated sign names by greedy longest match.
/// `out_tsv` receives one row per word or unmatched sign; `out_english`,
/// if not null, receives the English glosses joined by single spaces.
///
/// # Safety
/// `lexicon` must be a live handle, `signs` a valid C string, and the out
/// pointers valid (`out_english` may be null).
#[no_mangle]
pub unsafe extern "C" fn cnf_translate(
    lexicon: *const CnfLexicon,
    signs: *const c_char,
    out_tsv: *mut *mut c_char,
    out_english: *mut *mut c_char,
) -> CnfStatus {
    guard(|| {
        let lex = ref_arg(lexicon, "lexicon")?;
        let signs: Vec<&str> = str_arg(signs, "signs")?.split_whitespace().collect();
        let out_tsv = out_arg(out_tsv, "out_tsv")?;
        let r = translate_sequence(&signs, &lex.0);
        *out_tsv = c_string(r.to_tsv());
        if let Some(e) = out_english.as_mut() {
            *e = c_string(r.english().join(" "));
        }
        Ok(())
    })
}

/// Positional agreement of two whitespace-separated sign sequences.
///
/// # Safety
/// Both strings must be valid C strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnf_relative_accuracy(
    predicted: *const c_char,
    truth: *const c_char,
    out: *mut f64,
) -> CnfStatus {
    guard(|| {
        let p = parse_ground_truth(str_arg(predicted, "predicted")?);
        let t = parse_ground_truth(str_arg(truth, "truth")?);
        let out = out_arg(out, "out")?;
        *out = relative_accuracy(&p, &t)?;
        Ok(())
    })
}

/// Segments an 8-bit grayscale page of `width * height` bytes using
/// default parameters with glyphs of `glyph_side` pixels.
///
/// # Safety
/// `pixels` must point to `width * height` readable bytes and `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnf_segment_gray(
    pixels: *const u8,
    width: u32,
    height: u32,
    glyph_side: u32,
    out: *mut *mut CnfSegmentation,
) -> CnfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        let (w, h) = (width as usize, height as usize);
        let data = std::slice::from_raw_parts(pixels, w * h).to_vec();
        let scan = GrayImage::new(w, h, data)?;
        let params = SegmentationParams {
            glyph_size: glyph_side as usize,
            ..SegmentationParams::default()
        };
        let (seg, glyphs) = segment_page(&scan, &params)?;
        *out = Box::into_raw(Box::new(CnfSegmentation { seg, glyphs }));
        Ok(())
    })
}

/// # Safety
/// `seg` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnf_segmentation_free(seg: *mut CnfSegmentation) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

/// Number of character boxes; 0 for null.
///
/// # Safety
/// `seg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cnf_segmentation_len(seg: *const CnfSegmentation) -> u32 {
    seg.as_ref().map_or(0, |s| s.seg.boxes.len() as u32)
}

/// Box `index` in reading order.
///
/// # Safety
/// `seg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnf_segmentation_box(
    seg: *const CnfSegmentation,
    index: u32,
    out: *mut CnfBox,
) -> CnfStatus {
    guard(|| {
        let s = ref_arg(seg, "seg")?;
        let out = out_arg(out, "out")?;
        let b = s
            .seg
            .boxes
            .get(index as usize)
            .ok_or_else(|| Error::Bounds(format!("box {index} of {}", s.seg.boxes.len())))?;
        *out = CnfBox {
            x0: b.bbox.x0 as u32,
            y0: b.bbox.y0 as u32,
            x1: b.bbox.x1 as u32,
            y1: b.bbox.y1 as u32,
            line_index: b.line_index as u32,
            column_index: b.column_index as u32,
        };
        Ok(())
    })
}

/// Copies glyph `index` (side * side bytes, 1 for ink) into `buf`.
///
/// # Safety
/// `seg` must be a live handle and `buf` must have `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cnf_segmentation_glyph(
    seg: *const CnfSegmentation,
    index: u32,
    buf: *mut u8,
    len: usize,
) -> CnfStatus {
    guard(|| {
        let s = ref_arg(seg, "seg")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let g = s
            .glyphs
            .get(index as usize)
            .ok_or_else(|| Error::Bounds(format!("glyph {index} of {}", s.glyphs.len())))?;
        if len != g.data().len() {
            return Err(
                Error::Input(format!("buffer holds {len} bytes, glyph has {}", g.data().len())).into(),
            );
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        for (d, &v) in dst.iter_mut().zip(g.data()) {
            *d = v as u8;
        }
        Ok(())
    })
}

/// Segments, recognizes and translates the page at `scan_path`. With a
/// non-null `truth_path` the report compares against that ground truth.
/// With a non-null `out_dir` the report files are written there.
///
/// # Safety
/// Handles must be live, strings valid or null where allowed, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cnf_recognize_page(
    model: *const CnfModel,
    lexicon: *const CnfLexicon,
    scan_path: *const c_char,
    truth_path: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut CnfPage,
) -> CnfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = ref_arg(model, "model")?;
        let lex = ref_arg(lexicon, "lexicon")?;
        let scan = read_gray(str_arg(scan_path, "scan_path")?)?;
        let truth = if truth_path.is_null() {
            None
        } else {
            Some(load_ground_truth(&PathBuf::from(str_arg(
                truth_path,
                "truth_path",
            )?))?)
        };
        let params = SegmentationParams {
            glyph_size: m.0.config.input_side,
            ..SegmentationParams::default()
        };
        let page = translate_page(&scan, &m.0, &lex.0, &params, truth.as_deref())?;
        if !out_dir.is_null() {
            page.write(&PathBuf::from(str_arg(out_dir, "out_dir")?))?;
        }
        *out = Box::into_raw(Box::new(CnfPage(page)));
        Ok(())
    })
}

/// # Safety
/// `page` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnf_page_free(page: *mut CnfPage) {
    if !page.is_null() {
        drop(Box::from_raw(page));
    }
}

/// Number of recognized glyphs; 0 for null.
///
/// # Safety
/// `page` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cnf_page_glyph_count(page: *const CnfPage) -> u32 {
    page.as_ref().map_or(0, |p| p.0.predictions.len() as u32)
}

/// Relative accuracy against the ground truth given at recognition, and
/// the number of green (matching) boxes in the overlay.
///
/// # Safety
/// `page` must be a live handle and the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn cnf_page_accuracy(
    page: *const CnfPage,
    accuracy: *mut f64,
    green: *mut u32,
) -> CnfStatus {
    guard(|| {
        let p = ref_arg(page, "page")?;
        let accuracy = out_arg(accuracy, "accuracy")?;
        let green = out_arg(green, "green")?;
        let acc =
            p.0.report
                .accuracy
                .ok_or_else(|| Error::Report("page was recognized without ground truth".into()))?;
        *accuracy = acc;
        *green = p.0.report.green as u32;
        Ok(())
    })
}

/// Predicted sign names in reading order, separated by single spaces.
///
/// # Safety
/// `page` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnf_page_signs(page: *const CnfPage, out: *mut *mut c_char) -> CnfStatus {
    guard(|| {
        let p = ref_arg(page, "page")?;
        let out = out_arg(out, "out")?;
        let signs: Vec<&str> = p.0.predictions.iter().map(|q| q.sign.as_str()).collect();
        *out = c_string(signs.join(" "));
        Ok(())
    })
}

/// Translation table of the recognized sequence.
///
/// # Safety
/// `page` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnf_page_translation_tsv(page: *const CnfPage, out: *mut *mut c_char) -> CnfStatus {
    guard(|| {
        let p = ref_arg(page, "page")?;
        let out = out_arg(out, "out")?;
        *out = c_string(p.0.translation.to_tsv());
        Ok(())
    })
}
