//! Sign-sequence lexicon, greedy longest-match translation, positional
//! accuracy against ground truth, and annotated page reports.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::draw::{draw_box, draw_text, BLUE, GLYPH_H, GREEN, RED};
use crate::imaging::io::write_ppm;
use crate::imaging::{resize, GrayImage, RgbImage};
use crate::nn::Model;
use crate::segmentation::{
    segment_page, write_segmentation, GlyphImage, PageSegmentation, SegmentationParams,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub sign_sequence: Vec<String>,
    pub akkadian: String,
    pub english: String,
    pub arabic_translit: String,
    pub arabic: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<Vec<String>, usize>,
    max_len: usize,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, e) in entries.into_iter().enumerate() {
            lex.insert(e, i + 1)?;
        }
        Ok(lex)
    }

    fn insert(&mut self, entry: LexiconEntry, line: usize) -> Result<()> {
        if entry.sign_sequence.is_empty() || entry.sign_sequence.iter().any(|s| s.is_empty()) {
            return Err(Error::Lexicon {
                line,
                msg: "sign sequence is empty or has an empty sign".into(),
            });
        }
        if self.index.contains_key(&entry.sign_sequence) {
            return Err(Error::Lexicon {
                line,
                msg: format!("duplicate sign sequence `{}`", entry.sign_sequence.join(",")),
            });
        }
        self.max_len = self.max_len.max(entry.sign_sequence.len());
        self.index.insert(entry.sign_sequence.clone(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, signs: &[String]) -> Option<&LexiconEntry> {
        self.index.get(signs).map(|&i| &self.entries[i])
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# signs\takkadian\tenglish\tarabic_translit\tarabic\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                e.sign_sequence.join(","),
                e.akkadian,
                e.english,
                e.arabic_translit,
                e.arabic
            );
        }
        s
    }
}

/// Parses lexicon TSV: `signs` (comma-joined sign names), `akkadian`,
/// `english`, then optional `arabic_translit` and `arabic`. Blank lines
/// and `#` comments are skipped. With a catalog, every sign must be in it.
pub fn parse_lexicon(text: &str, catalog: Option<&[String]>) -> Result<Lexicon> {
    let known: Option<HashSet<&str>> = catalog.map(|c| c.iter().map(String::as_str).collect());
    let mut lex = Lexicon::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if !(3..=5).contains(&cols.len()) {
            return Err(Error::Lexicon {
                line,
                msg: format!("expected 3 to 5 tab-separated columns, found {}", cols.len()),
            });
        }
        let signs: Vec<String> = cols[0].split(',').map(|s| s.trim().to_string()).collect();
        if let Some(known) = &known {
            if let Some(bad) = signs.iter().find(|s| !known.contains(s.as_str())) {
                return Err(Error::Lexicon {
                    line,
                    msg: format!("unknown sign `{bad}`"),
                });
            }
        }
        let col = |k: usize| cols.get(k).map_or(String::new(), |s| s.trim().to_string());
        lex.insert(
            LexiconEntry {
                sign_sequence: signs,
                akkadian: col(1),
                english: col(2),
                arabic_translit: col(3),
                arabic: col(4),
            },
            line,
        )?;
    }
    Ok(lex)
}

pub fn load_lexicon(path: &Path, catalog: Option<&[String]>) -> Result<Lexicon> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&text, catalog)
}

pub fn save_lexicon(path: &Path, lex: &Lexicon) -> Result<()> {
    fs::write(path, lex.to_tsv()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    /// Position of the first sign in the input sequence.
    pub start: usize,
    pub signs: Vec<String>,
    pub akkadian: String,
    pub english: String,
    pub arabic_translit: String,
    pub arabic: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TranslationResult {
    pub words: Vec<Word>,
    /// (position, sign) for signs not covered by any word.
    pub unmatched: Vec<(usize, String)>,
}

impl TranslationResult {
    pub fn english(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.english.as_str()).collect()
    }

    pub fn akkadian(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.akkadian.as_str()).collect()
    }

    /// The input sequence, rebuilt from words and unmatched signs.
    pub fn reconstruct(&self) -> Vec<String> {
        let mut parts: Vec<(usize, Vec<String>)> = self
            .words
            .iter()
            .map(|w| (w.start, w.signs.clone()))
            .chain(self.unmatched.iter().map(|(p, s)| (*p, vec![s.clone()])))
            .collect();
        parts.sort_by_key(|(p, _)| *p);
        parts.into_iter().flat_map(|(_, s)| s).collect()
    }

    /// Rows in input order: `position signs akkadian english arabic_translit arabic`;
    /// unmatched signs have empty translation fields.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(usize, String)> = self
            .words
            .iter()
            .map(|w| {
                (
                    w.start,
                    format!(
                        "{}\t{}\t{}\t{}\t{}\t{}",
                        w.start,
                        w.signs.join(","),
                        w.akkadian,
                        w.english,
                        w.arabic_translit,
                        w.arabic
                    ),
                )
            })
            .chain(
                self.unmatched
                    .iter()
                    .map(|(p, s)| (*p, format!("{p}\t{s}\t\t\t\t"))),
            )
            .collect();
        rows.sort_by_key(|(p, _)| *p);
        let mut s = String::from("position\tsigns\takkadian\tenglish\tarabic_translit\tarabic\n");
        for (_, r) in rows {
            s += &r;
            s.push('\n');
        }
        s
    }
}

/// Greedy left-to-right longest match.
pub fn translate_sequence<S: AsRef<str>>(signs: &[S], lex: &Lexicon) -> TranslationResult {
    let signs: Vec<String> = signs.iter().map(|s| s.as_ref().to_string()).collect();
    let mut out = TranslationResult::default();
    let mut i = 0;
    while i < signs.len() {
        let longest = (1..=lex.max_len.min(signs.len() - i))
            .rev()
            .find_map(|n| lex.lookup(&signs[i..i + n]).map(|e| (n, e)));
        match longest {
            Some((n, e)) => {
                out.words.push(Word {
                    start: i,
                    signs: signs[i..i + n].to_vec(),
                    akkadian: e.akkadian.clone(),
                    english: e.english.clone(),
                    arabic_translit: e.arabic_translit.clone(),
                    arabic: e.arabic.clone(),
                });
                i += n;
            }
            None => {
                out.unmatched.push((i, signs[i].clone()));
                i += 1;
            }
        }
    }
    out
}

/// Positional agreement: matching positions over the longer length.
pub fn relative_accuracy<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], truth: &[T]) -> Result<f64> {
    let n = predicted.len().max(truth.len());
    if n == 0 {
        return Err(Error::Input(
            "relative accuracy of two empty sequences is undefined".into(),
        ));
    }
    Ok(matches(predicted, truth) as f64 / n as f64)
}

fn matches<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], truth: &[T]) -> usize {
    predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.as_ref() == t.as_ref())
        .count()
}

/// Ground truth file: sign names separated by whitespace or commas, in
/// reading order; `#` starts a comment line.
pub fn parse_ground_truth(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','))
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_ground_truth(&text))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub sign: String,
    pub probability: f32,
}

#[derive(Debug, Clone)]
pub struct PageReport {
    /// One row per glyph.
    pub tsv: String,
    pub overlay: RgbImage,
    pub summary: String,
    pub green: usize,
    pub red: usize,
    /// Present when ground truth was supplied.
    pub accuracy: Option<f64>,
}

impl PageReport {
    /// Writes `report.tsv`, `overlay.ppm` and `summary.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: &str| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        put("report.tsv", &self.tsv)?;
        put("summary.txt", &self.summary)?;
        write_ppm(dir.join("overlay.ppm"), &self.overlay)
    }
}

/// Builds the glyph table and color overlay. With ground truth, boxes are
/// green where the prediction matches and red otherwise, the prediction is
/// drawn above each box and the truth below. Without it, boxes are blue.
pub fn render_report(
    page: &PageSegmentation,
    predicted: &[Prediction],
    truth: Option<&[String]>,
    scan: &GrayImage,
) -> Result<PageReport> {
    if predicted.len() != page.boxes.len() {
        return Err(Error::Report(format!(
            "{} predictions for {} segmented boxes",
            predicted.len(),
            page.boxes.len()
        )));
    }
    let (w, h) = page.page_size;
    let working = if (scan.width(), scan.height()) == (w, h) {
        scan.clone()
    } else {
        resize(scan, w, h)
    };
    let mut overlay = RgbImage::from_gray(&working);
    let mut tsv = String::from("line\tcolumn\tpredicted\ttruth\tprobability\tcorrect\n");
    let (mut green, mut red) = (0, 0);
    for (i, (b, p)) in page.boxes.iter().zip(predicted).enumerate() {
        let t = truth.map(|t| t.get(i).map_or("", String::as_str));
        let correct = t.map(|t| t == p.sign);
        let color = match correct {
            Some(true) => GREEN,
            Some(false) => RED,
            None => BLUE,
        };
        match correct {
            Some(true) => green += 1,
            Some(false) => red += 1,
            None => {}
        }
        draw_box(&mut overlay, b.bbox, color);
        let label_y = b.bbox.y0 as i64 - GLYPH_H as i64 - 2;
        draw_text(&mut overlay, b.bbox.x0 as i64, label_y, &p.sign, color);
        if let Some(t) = t {
            draw_text(&mut overlay, b.bbox.x0 as i64, b.bbox.y1 as i64 + 3, t, color);
        }
        let _ = writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{:.4}\t{}",
            b.line_index,
            b.column_index,
            p.sign,
            t.unwrap_or(""),
            p.probability,
            correct.map_or("", |c| if c { "1" } else { "0" })
        );
    }
    let mut summary = format!("glyphs\t{}\n", predicted.len());
    let accuracy = match truth {
        Some(t) if !(t.is_empty() && predicted.is_empty()) => {
            let signs: Vec<&str> = predicted.iter().map(|p| p.sign.as_str()).collect();
            let acc = relative_accuracy(&signs, t)?;
            let _ = writeln!(summary, "truth\t{}", t.len());
            let _ = writeln!(summary, "correct\t{green}");
            let _ = writeln!(summary, "relative_accuracy\t{acc:.4}");
            Some(acc)
        }
        _ => None,
    };
    Ok(PageReport {
        tsv,
        overlay,
        summary,
        green,
        red,
        accuracy,
    })
}

#[derive(Debug, Clone)]
pub struct PageTranslation {
    pub segmentation: PageSegmentation,
    pub glyphs: Vec<GlyphImage>,
    pub predictions: Vec<Prediction>,
    pub translation: TranslationResult,
    pub report: PageReport,
}

impl PageTranslation {
    /// Writes the report files, `translation.tsv`, and the segmentation
    /// manifest and glyphs under `segmentation/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.report.write(dir)?;
        let p = dir.join("translation.tsv");
        fs::write(&p, self.translation.to_tsv()).map_err(|e| Error::io(&p, e))?;
        write_segmentation(&dir.join("segmentation"), &self.segmentation, &self.glyphs, None)
    }
}

/// Segments the scan, recognizes every glyph, translates the sign sequence
/// and renders the report.
pub fn translate_page(
    scan: &GrayImage,
    model: &Model,
    lex: &Lexicon,
    params: &SegmentationParams,
    truth: Option<&[String]>,
) -> Result<PageTranslation> {
    if model.config.input_side != params.glyph_size {
        return Err(Error::Shape {
            layer: 0,
            msg: format!(
                "model input side {} differs from segmentation glyph_size {}",
                model.config.input_side, params.glyph_size
            ),
        });
    }
    let (segmentation, glyphs) = segment_page(scan, params)?;
    let predictions: Vec<Prediction> = if glyphs.is_empty() {
        Vec::new()
    } else {
        model
            .predict_batch(&glyphs)?
            .into_iter()
            .map(|(k, p)| Prediction {
                sign: model.config.class_name(k),
                probability: p,
            })
            .collect()
    };
    let signs: Vec<&str> = predictions.iter().map(|p| p.sign.as_str()).collect();
    let translation = translate_sequence(&signs, lex);
    let report = render_report(&segmentation, &predictions, truth, scan)?;
    Ok(PageTranslation {
        segmentation,
        glyphs,
        predictions,
        translation,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::BBox;
    use crate::segmentation::CharBox;
    use proptest::prelude::*;

    const TABLE: &str = "# signs\takkadian\tenglish\n\
        šum,ma\tšumma\tif\n\
        id,da,ak\tiddâk\texecuted\n\
        la\tlā\tnot\n";

    #[test]
    fn three_row_table() {
        let lex = parse_lexicon(TABLE, None).unwrap();
        assert_eq!(lex.len(), 3);
        let r = translate_sequence(&["šum", "ma", "x", "id", "da", "ak", "la"], &lex);
        assert_eq!(r.english(), ["if", "executed", "not"]);
        assert_eq!(r.akkadian(), ["šumma", "iddâk", "lā"]);
        assert_eq!(r.unmatched, [(2, "x".to_string())]);
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        assert!(parse_lexicon("", None).unwrap().is_empty());
        let dup = format!("{TABLE}la\tlā\tnot again\n");
        match parse_lexicon(&dup, None) {
            Err(Error::Lexicon { line: 5, msg }) => assert!(msg.contains("duplicate")),
            other => panic!("{other:?}"),
        }
        let catalog: Vec<String> = ["šum", "ma", "la"].map(String::from).to_vec();
        match parse_lexicon(TABLE, Some(&catalog)) {
            Err(Error::Lexicon { line: 3, msg }) => assert!(msg.contains("`id`")),
            other => panic!("{other:?}"),
        }
        assert!(parse_lexicon("a\tonly two\n", None).is_err());
    }

    #[test]
    fn save_load_fixed_point() {
        let text = "a,b\tab\tAB\tab-tr\tأب\nc\tc\tC\n";
        let lex = parse_lexicon(text, None).unwrap();
        let again = parse_lexicon(&lex.to_tsv(), None).unwrap();
        assert_eq!(again, lex);
        assert_eq!(again.to_tsv(), lex.to_tsv());
    }

    #[test]
    fn longest_match_wins() {
        let lex = parse_lexicon("A,B\tab\t1\nA,B,C\tabc\t2\n", None).unwrap();
        let r = translate_sequence(&["A", "B", "C", "A", "B"], &lex);
        let words: Vec<Vec<String>> = r.words.iter().map(|w| w.signs.clone()).collect();
        assert_eq!(words, [vec!["A", "B", "C"], vec!["A", "B"]]);
        assert!(translate_sequence::<&str>(&[], &lex).words.is_empty());
    }

    #[test]
    fn relative_accuracy_cases() {
        let t: Vec<String> = (0..35).map(|i| format!("s{i}")).collect();
        assert_eq!(relative_accuracy(&t, &t).unwrap(), 1.0);
        let mut p = t.clone();
        p[7] = "zz".into();
        assert!((relative_accuracy(&p, &t).unwrap() - 34.0 / 35.0).abs() < 1e-15);
        let mut p = t.clone();
        p[0] = "zz".into();
        p[1] = "zz".into();
        p.extend(["x".to_string(), "y".to_string()]);
        assert_eq!(relative_accuracy(&p, &t).unwrap(), 33.0 / 37.0);
        assert!(relative_accuracy::<&str, &str>(&[], &[]).is_err());
    }

    #[test]
    fn ground_truth_parsing() {
        let g = parse_ground_truth("# law 1\nšum ma, id\n\n da ak\n");
        assert_eq!(g, ["šum", "ma", "id", "da", "ak"]);
    }

    fn fifteen_box_page() -> PageSegmentation {
        let boxes = (0..15)
            .map(|i| CharBox {
                bbox: BBox::new(
                    20 + (i % 5) * 40,
                    20 + (i / 5) * 50,
                    40 + (i % 5) * 40,
                    45 + (i / 5) * 50,
                ),
                line_index: i / 5,
                column_index: i % 5,
                pixel_count: 50,
            })
            .collect();
        PageSegmentation {
            source_size: (240, 180),
            page_size: (240, 180),
            boxes,
            params_used: SegmentationParams::default(),
        }
    }

    fn count_color(img: &RgbImage, c: [u8; 3]) -> usize {
        img.data().chunks(3).filter(|p| *p == c).count()
    }

    #[test]
    fn report_colors_follow_matches() {
        let page = fifteen_box_page();
        let scan = GrayImage::filled(240, 180, 255).unwrap();
        let truth: Vec<String> = (0..15).map(|i| format!("s{}", i % 4)).collect();
        let mut preds: Vec<Prediction> = truth
            .iter()
            .map(|s| Prediction {
                sign: s.clone(),
                probability: 0.9,
            })
            .collect();
        let all = render_report(&page, &preds, Some(&truth), &scan).unwrap();
        assert_eq!((all.green, all.red, all.accuracy), (15, 0, Some(1.0)));
        assert_eq!(count_color(&all.overlay, RED), 0);

        for i in [2, 7, 11] {
            preds[i].sign = "wrong".into();
        }
        let r = render_report(&page, &preds, Some(&truth), &scan).unwrap();
        assert_eq!((r.green, r.red), (12, 3));
        assert_eq!(r.accuracy, Some(0.8));
        assert_eq!(r.tsv.lines().filter(|l| l.ends_with("\t1")).count(), 12);

        let wrong: Vec<Prediction> = preds
            .iter()
            .map(|_| Prediction {
                sign: "q".into(),
                probability: 0.1,
            })
            .collect();
        let none = render_report(&page, &wrong, Some(&truth), &scan).unwrap();
        assert_eq!((none.green, none.accuracy), (0, Some(0.0)));
        assert_eq!(count_color(&none.overlay, GREEN), 0);

        assert!(matches!(
            render_report(&page, &preds[..3], Some(&truth), &scan),
            Err(Error::Report(_))
        ));
    }

    /// Oracle: enumerate every segmentation of the input into lexicon words
    /// and single unmatched signs; the greedy result is the one whose
    /// sequence of piece lengths is lexicographically greatest when pieces
    /// are taken left to right.
    fn oracle(signs: &[String], lex: &Lexicon) -> Vec<usize> {
        fn rec(signs: &[String], lex: &Lexicon) -> Vec<Vec<usize>> {
            if signs.is_empty() {
                return vec![vec![]];
            }
            let mut all = Vec::new();
            for n in 1..=signs.len() {
                let is_word = lex.lookup(&signs[..n]).is_some();
                if is_word || n == 1 {
                    for mut rest in rec(&signs[n..], lex) {
                        rest.insert(0, n);
                        all.push(rest);
                    }
                }
            }
            all
        }
        rec(signs, lex).into_iter().max().unwrap()
    }

    proptest! {
        #[test]
        fn greedy_matches_oracle_and_covers_input(
            words in proptest::collection::vec(proptest::collection::vec(0u8..3, 1..4), 0..6),
            input in proptest::collection::vec(0u8..3, 0..9),
        ) {
            let name = |v: &[u8]| v.iter().map(|c| ["A", "B", "C"][*c as usize].to_string()).collect::<Vec<_>>();
            let mut text = String::new();
            let mut seen = HashSet::new();
            for w in &words {
                if seen.insert(w.clone()) {
                    text += &format!("{}\tx\ty\n", name(w).join(","));
                }
            }
            let lex = parse_lexicon(&text, None).unwrap();
            let signs = name(&input);
            let r = translate_sequence(&signs, &lex);
            prop_assert_eq!(r.reconstruct(), signs.clone());
            let mut pieces: Vec<(usize, usize)> = r.words.iter().map(|w| (w.start, w.signs.len()))
                .chain(r.unmatched.iter().map(|(p, _)| (*p, 1))).collect();
            pieces.sort();
            let lens: Vec<usize> = pieces.into_iter().map(|(_, n)| n).collect();
            prop_assert_eq!(lens, oracle(&signs, &lex));
        }
    }
}
