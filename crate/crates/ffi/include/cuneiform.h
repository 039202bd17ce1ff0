#ifndef CUNEIFORM_H
#define CUNEIFORM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Values 2 to 5 match the command-line
 * exit codes.
 */
typedef enum CnfStatus {
  CNF_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CNF_STATUS_NULL_ARGUMENT = 1,
  /**
   * Configuration, shape or other structural error in the input.
   */
  CNF_STATUS_INVALID_INPUT = 2,
  /**
   * File could not be read or written, or its format is invalid.
   */
  CNF_STATUS_IO = 3,
  CNF_STATUS_TRAINING = 4,
  CNF_STATUS_VERIFICATION = 5,
  /**
   * A string argument was not valid UTF-8.
   */
  CNF_STATUS_INVALID_UTF8 = 6,
  /**
   * Internal panic; the library state is unchanged.
   */
  CNF_STATUS_INTERNAL = 7,
} CnfStatus;

/**
 * A sign-sequence lexicon.
 */
typedef struct CnfLexicon CnfLexicon;

/**
 * A trained classifier.
 */
typedef struct CnfModel CnfModel;

/**
 * Recognition, translation and report of one page.
 */
typedef struct CnfPage CnfPage;

/**
 * Boxes and glyphs of a segmented page.
 */
typedef struct CnfSegmentation CnfSegmentation;

/**
 * A character box in working-page coordinates (inclusive corners).
 */
typedef struct CnfBox {
  uint32_t x0;
  uint32_t y0;
  uint32_t x1;
  uint32_t y1;
  uint32_t line_index;
  uint32_t column_index;
} CnfBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread; empty after a
 * success. Valid until the next call on the same thread.
 */
const char *cnf_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *cnf_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cnf_string_free(char *s);

/**
 * Loads a model file.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum CnfStatus cnf_model_load(const char *path, struct CnfModel **out);

/**
 * Writes a model file.
 *
 * # Safety
 * `model` must be a live handle and `path` a valid C string.
 */
enum CnfStatus cnf_model_save(const struct CnfModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a live handle, which is invalid afterwards.
 */
void cnf_model_free(struct CnfModel *model);

/**
 * Side length of the square glyphs the model classifies; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uint32_t cnf_model_input_side(const struct CnfModel *model);

/**
 * Number of classes; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uint32_t cnf_model_num_classes(const struct CnfModel *model);

/**
 * Sign name of class `class_id`, to be released with [`cnf_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum CnfStatus cnf_model_class_name(const struct CnfModel *model, uint32_t class_id, char **out);

/**
 * Classifies one glyph given as `side * side` bytes in row-major order,
 * nonzero meaning ink.
 *
 * # Safety
 * `pixels` must point to `len` readable bytes; the out pointers must be valid.
 */
enum CnfStatus cnf_model_predict(const struct CnfModel *model,
                                 const uint8_t *pixels,
                                 size_t len,
                                 uint32_t *class_id,
                                 float *probability);

/**
 * Loads a lexicon TSV.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum CnfStatus cnf_lexicon_load(const char *path, struct CnfLexicon **out);

/**
 * # Safety
 * `lexicon` must be null or a live handle, which is invalid afterwards.
 */
void cnf_lexicon_free(struct CnfLexicon *lexicon);

/**
 * Number of entries; 0 for null.
 *
 * # Safety
 * `lexicon` must be null or a live handle.
 */
uint32_t cnf_lexicon_len(const struct CnfLexicon *lexicon);

/**
 * Translates whitespace-separated sign names by greedy longest match.
 * `out_tsv` receives one row per word or unmatched sign; `out_english`,
 * if not null, receives the English glosses joined by single spaces.
 *
 * # Safety
 * `lexicon` must be a live handle, `signs` a valid C string, and the out
 * pointers valid (`out_english` may be null).
 */
enum CnfStatus cnf_translate(const struct CnfLexicon *lexicon,
                             const char *signs,
                             char **out_tsv,
                             char **out_english);

/**
 * Positional agreement of two whitespace-separated sign sequences.
 *
 * # Safety
 * Both strings must be valid C strings and `out` a valid pointer.
 */
enum CnfStatus cnf_relative_accuracy(const char *predicted, const char *truth, double *out);

/**
 * Segments an 8-bit grayscale page of `width * height` bytes using
 * default parameters with glyphs of `glyph_side` pixels.
 *
 * # Safety
 * `pixels` must point to `width * height` readable bytes and `out` must
 * be a valid pointer.
 */
enum CnfStatus cnf_segment_gray(const uint8_t *pixels,
                                uint32_t width,
                                uint32_t height,
                                uint32_t glyph_side,
                                struct CnfSegmentation **out);

/**
 * # Safety
 * `seg` must be null or a live handle, which is invalid afterwards.
 */
void cnf_segmentation_free(struct CnfSegmentation *seg);

/**
 * Number of character boxes; 0 for null.
 *
 * # Safety
 * `seg` must be null or a live handle.
 */
uint32_t cnf_segmentation_len(const struct CnfSegmentation *seg);

/**
 * Box `index` in reading order.
 *
 * # Safety
 * `seg` must be a live handle and `out` a valid pointer.
 */
enum CnfStatus cnf_segmentation_box(const struct CnfSegmentation *seg,
                                    uint32_t index,
                                    struct CnfBox *out);

/**
 * Copies glyph `index` (side * side bytes, 1 for ink) into `buf`.
 *
 * # Safety
 * `seg` must be a live handle and `buf` must have `len` writable bytes.
 */
enum CnfStatus cnf_segmentation_glyph(const struct CnfSegmentation *seg,
                                      uint32_t index,
                                      uint8_t *buf,
                                      size_t len);

/**
 * Segments, recognizes and translates the page at `scan_path`. With a
 * non-null `truth_path` the report compares against that ground truth.
 * With a non-null `out_dir` the report files are written there.
 *
 * # Safety
 * Handles must be live, strings valid or null where allowed, `out` valid.
 */
enum CnfStatus cnf_recognize_page(const struct CnfModel *model,
                                  const struct CnfLexicon *lexicon,
                                  const char *scan_path,
                                  const char *truth_path,
                                  const char *out_dir,
                                  struct CnfPage **out);

/**
 * # Safety
 * `page` must be null or a live handle, which is invalid afterwards.
 */
void cnf_page_free(struct CnfPage *page);

/**
 * Number of recognized glyphs; 0 for null.
 *
 * # Safety
 * `page` must be null or a live handle.
 */
uint32_t cnf_page_glyph_count(const struct CnfPage *page);

/**
 * Relative accuracy against the ground truth given at recognition, and
 * the number of green (matching) boxes in the overlay.
 *
 * # Safety
 * `page` must be a live handle and the out pointers valid.
 */
enum CnfStatus cnf_page_accuracy(const struct CnfPage *page, double *accuracy, uint32_t *green);

/**
 * Predicted sign names in reading order, separated by single spaces.
 *
 * # Safety
 * `page` must be a live handle and `out` a valid pointer.
 */
enum CnfStatus cnf_page_signs(const struct CnfPage *page, char **out);

/**
 * Translation table of the recognized sequence.
 *
 * # Safety
 * `page` must be a live handle and `out` a valid pointer.
 */
enum CnfStatus cnf_page_translation_tsv(const struct CnfPage *page, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUNEIFORM_H */
