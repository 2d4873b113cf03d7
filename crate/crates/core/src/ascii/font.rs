use std::sync::OnceLock;

const FIRST_PRINTABLE: u8 = 32;
const LAST_PRINTABLE: u8 = 126;
const GLYPH_COUNT: usize = (LAST_PRINTABLE - FIRST_PRINTABLE + 1) as usize;

/// Fixed-cell bitmap font covering printable ASCII (codes 32 to 126).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphFont {
    cell_width: u32,
    cell_height: u32,
    // Row-major on/off pixels, one entry per printable code.
    glyphs: Vec<Vec<bool>>,
}

impl GlyphFont {
    /// Builds a font from one bitmap per printable code, in code order.
    pub fn new(cell_width: u32, cell_height: u32, glyphs: Vec<Vec<bool>>) -> Result<Self, String> {
        if cell_width == 0 || cell_height == 0 {
            return Err("cell dimensions must be positive".into());
        }
        if glyphs.len() != GLYPH_COUNT {
            return Err(format!("expected {GLYPH_COUNT} glyphs, got {}", glyphs.len()));
        }
        let cell = (cell_width * cell_height) as usize;
        if let Some(bad) = glyphs.iter().position(|g| g.len() != cell) {
            return Err(format!(
                "glyph for code {} has {} pixels, expected {cell}",
                bad + FIRST_PRINTABLE as usize,
                glyphs[bad].len()
            ));
        }
        Ok(Self {
            cell_width,
            cell_height,
            glyphs,
        })
    }

    /// The built-in 8x16 font: the public-domain 8x8 basic Latin set with
    /// every row doubled. Compiled into the binary, so renders are identical
    /// on every platform.
    pub fn embedded() -> &'static GlyphFont {
        static FONT: OnceLock<GlyphFont> = OnceLock::new();
        FONT.get_or_init(|| {
            let glyphs = (FIRST_PRINTABLE..=LAST_PRINTABLE)
                .map(|code| {
                    let rows = font8x8::legacy::BASIC_LEGACY[code as usize];
                    let mut pixels = Vec::with_capacity(8 * 16);
                    for row in rows {
                        let bits: Vec<bool> = (0..8).map(|x| row & (1 << x) != 0).collect();
                        pixels.extend_from_slice(&bits);
                        pixels.extend_from_slice(&bits);
                    }
                    pixels
                })
                .collect();
            GlyphFont::new(8, 16, glyphs).expect("embedded font is well formed")
        })
    }

    pub fn cell_width(&self) -> u32 {
        self.cell_width
    }

    pub fn cell_height(&self) -> u32 {
        self.cell_height
    }

    /// Bitmap for `c`; anything outside printable ASCII uses the space glyph.
    pub fn glyph(&self, c: char) -> &[bool] {
        let code = u32::from(c);
        let index = if (u32::from(FIRST_PRINTABLE)..=u32::from(LAST_PRINTABLE)).contains(&code) {
            (code - u32::from(FIRST_PRINTABLE)) as usize
        } else {
            0
        };
        &self.glyphs[index]
    }
}
