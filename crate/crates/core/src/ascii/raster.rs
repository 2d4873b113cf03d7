use image::{GrayImage, Luma};

use super::GlyphFont;

const BACKGROUND: Luma<u8> = Luma([255]);
const INK: Luma<u8> = Luma([0]);

fn rows(art: &str) -> Vec<&str> {
    if art.is_empty() {
        return Vec::new();
    }
    art.split('\n')
        .map(|row| row.strip_suffix('\r').unwrap_or(row))
        .collect()
}

/// Renders text verbatim with a fixed-cell font: black glyphs on white,
/// ragged rows padded with spaces, `margin_px` of white on every side.
///
/// Output size is `(longest_row * cell_w + 2m, rows * cell_h + 2m)`.
pub fn rasterize_ascii(art: &str, font: &GlyphFont, margin_px: u32) -> GrayImage {
    let rows = rows(art);
    let (cw, ch) = (font.cell_width(), font.cell_height());
    let cols = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0) as u32;
    let width = cols * cw + 2 * margin_px;
    let height = rows.len() as u32 * ch + 2 * margin_px;
    let mut img = GrayImage::from_pixel(width, height, BACKGROUND);

    for (r, row) in rows.iter().enumerate() {
        let top = margin_px + r as u32 * ch;
        for (c, character) in row.chars().enumerate() {
            let left = margin_px + c as u32 * cw;
            let glyph = font.glyph(character);
            for (i, on) in glyph.iter().enumerate() {
                if *on {
                    let (x, y) = (i as u32 % cw, i as u32 / cw);
                    img.put_pixel(left + x, top + y, INK);
                }
            }
        }
    }
    img
}
