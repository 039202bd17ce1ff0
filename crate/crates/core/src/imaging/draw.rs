//! Overlay drawing: box outlines and a 5x7 bitmap font for labels.

use super::{BBox, RgbImage};

pub const GREEN: [u8; 3] = [0, 255, 0];
pub const RED: [u8; 3] = [255, 0, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const DARK: [u8; 3] = [40, 40, 40];

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// One-pixel outline exactly on the box boundary.
pub fn draw_box(img: &mut RgbImage, b: BBox, color: [u8; 3]) {
    for x in b.x0..=b.x1 {
        img.put_clipped(x as i64, b.y0 as i64, color);
        img.put_clipped(x as i64, b.y1 as i64, color);
    }
    for y in b.y0..=b.y1 {
        img.put_clipped(b.x0 as i64, y as i64, color);
        img.put_clipped(b.x1 as i64, y as i64, color);
    }
}

/// Draws `text` with its top-left corner at (x, y). Lowercase folds to
/// uppercase, common Latin diacritics fold to their base letter, anything
/// else without a bitmap renders as `?`.
pub fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, color: [u8; 3]) {
    let mut cx = x;
    for ch in text.chars() {
        let rows = bitmap(fold(ch));
        for (r, row) in rows.iter().enumerate() {
            for (c, px) in row.bytes().enumerate() {
                if px == b'#' {
                    img.put_clipped(cx + c as i64, y + r as i64, color);
                }
            }
        }
        cx += GLYPH_W as i64 + 1;
    }
}

pub fn text_width(text: &str) -> usize {
    text.chars().count() * (GLYPH_W + 1)
}

fn fold(ch: char) -> char {
    let base = match ch {
        'á' | 'à' | 'â' | 'ā' | 'ä' | 'Á' | 'À' | 'Â' | 'Ā' => 'A',
        'é' | 'è' | 'ê' | 'ē' | 'É' | 'Ê' | 'Ē' => 'E',
        'í' | 'ì' | 'î' | 'ī' | 'Í' | 'Î' | 'Ī' => 'I',
        'ó' | 'ò' | 'ô' | 'ō' | 'Ó' | 'Ô' | 'Ō' => 'O',
        'ú' | 'ù' | 'û' | 'ū' | 'Ú' | 'Û' | 'Ū' => 'U',
        'š' | 'Š' | 'ṣ' | 'Ṣ' | 'ś' => 'S',
        'ṭ' | 'Ṭ' => 'T',
        'ḫ' | 'Ḫ' | 'ḥ' => 'H',
        'ĝ' | 'Ĝ' => 'G',
        other => other,
    };
    base.to_ascii_uppercase()
}

fn bitmap(ch: char) -> [&'static str; GLYPH_H] {
    match ch {
        'A' => [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
        'B' => ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."],
        'C' => [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."],
        'D' => ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."],
        'E' => ["#####", "#....", "#....", "####.", "#....", "#....", "#####"],
        'F' => ["#####", "#....", "#....", "####.", "#....", "#....", "#...."],
        'G' => [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"],
        'H' => ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
        'I' => [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."],
        'J' => ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."],
        'K' => ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"],
        'L' => ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
        'M' => ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"],
        'N' => ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"],
        'O' => [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
        'P' => ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."],
        'Q' => [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
        'R' => ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"],
        'S' => [".####", "#....", "#....", ".###.", "....#", "....#", "####."],
        'T' => ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
        'U' => ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
        'V' => ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
        'W' => ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."],
        'X' => ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
        'Y' => ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."],
        'Z' => ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
        '0' => [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
        '1' => ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
        '2' => [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
        '3' => ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
        '4' => ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
        '5' => ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
        '6' => ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
        '7' => ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
        '8' => [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
        '9' => [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
        '-' => [".....", ".....", ".....", "#####", ".....", ".....", "....."],
        '_' => [".....", ".....", ".....", ".....", ".....", ".....", "#####"],
        '.' => [".....", ".....", ".....", ".....", ".....", ".##..", ".##.."],
        ':' => [".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."],
        '/' => [".....", "....#", "...#.", "..#..", ".#...", "#....", "....."],
        '%' => ["##...", "##..#", "...#.", "..#..", ".#...", "#..##", "...##"],
        '(' => ["...#.", "..#..", ".#...", ".#...", ".#...", "..#..", "...#."],
        ')' => [".#...", "..#..", "...#.", "...#.", "...#.", "..#..", ".#..."],
        ' ' => [".....", ".....", ".....", ".....", ".....", ".....", "....."],
        _ => [".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#.."],
    }
}
