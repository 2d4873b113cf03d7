//! Published reference accuracies (percent) for side-by-side reports.
//!
//! Values are display-only context from a single run of a hosted model; no
//! test asserts measured numbers against them.

use serde::Serialize;

use crate::strategy::StrategyKind;

pub const REFERENCE_VERSION: &str = "1";
pub const REFERENCE_MODEL: &str = "gpt-4o-2024-05-13";

/// Fixed rendering of word ASCII art as an image, answered directly.
pub const FIXED_RENDER_WORD: f64 = 22.0;
/// Accuracy on the original MNIST images, the ceiling for the ASCII digits.
pub const REAL_MNIST_UPPER_BOUND: f64 = 80.8;

pub const TABLE1_COLUMNS: [&str; 3] = ["mnist", "word", "kanji"];
pub const TABLE1: [(StrategyKind, [f64; 3]); 3] = [
    (StrategyKind::Direct, [19.6, 24.8, 1.1]),
    (StrategyKind::Cot, [21.6, 27.2, 1.1]),
    (StrategyKind::Wot, [66.0, 66.4, 73.8]),
];

/// Word accuracy by font category.
pub const TABLE2_COLUMNS: [&str; 5] = ["three_d", "basic", "bubble", "doh", "dot_matrix"];
pub const TABLE2: [(StrategyKind, [f64; 5]); 3] = [
    (StrategyKind::Direct, [0.0, 0.0, 100.0, 50.0, 0.0]),
    (StrategyKind::Cot, [0.0, 0.0, 100.0, 62.5, 0.0]),
    (StrategyKind::Wot, [92.1, 78.0, 42.1, 89.6, 11.8]),
];

/// Navigation accuracy by geometry, whole percents.
pub const TABLE3_COLUMNS: [&str; 6] = ["circle", "hexagon", "triangle", "square", "rhombus", "avg"];
pub const TABLE3: [(StrategyKind, [f64; 6]); 3] = [
    (StrategyKind::Direct, [14.0, 3.0, 16.0, 68.0, 63.0, 33.0]),
    (StrategyKind::Cot, [25.0, 8.0, 26.0, 98.0, 51.0, 42.0]),
    (StrategyKind::Wot, [41.0, 61.0, 55.0, 50.0, 52.0, 52.0]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceTable {
    Ascii,
    WordFonts,
    Navigation,
}

impl ReferenceTable {
    pub fn title(self) -> &'static str {
        match self {
            ReferenceTable::Ascii => "ASCII recognition accuracy",
            ReferenceTable::WordFonts => "ASCII word accuracy by font",
            ReferenceTable::Navigation => "Spatial navigation accuracy",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ReferenceTable::Ascii => &TABLE1_COLUMNS,
            ReferenceTable::WordFonts => &TABLE2_COLUMNS,
            ReferenceTable::Navigation => &TABLE3_COLUMNS,
        }
    }

    /// Digits after the point as published.
    pub fn decimals(self) -> usize {
        match self {
            ReferenceTable::Navigation => 0,
            _ => 1,
        }
    }

    pub fn row(self, strategy: StrategyKind) -> Option<&'static [f64]> {
        match self {
            ReferenceTable::Ascii => TABLE1.iter().find(|(s, _)| *s == strategy).map(|(_, r)| &r[..]),
            ReferenceTable::WordFonts => TABLE2.iter().find(|(s, _)| *s == strategy).map(|(_, r)| &r[..]),
            ReferenceTable::Navigation => TABLE3.iter().find(|(s, _)| *s == strategy).map(|(_, r)| &r[..]),
        }
    }

    pub fn strategies(self) -> [StrategyKind; 3] {
        [StrategyKind::Direct, StrategyKind::Cot, StrategyKind::Wot]
    }
}

/// One published cell, or `None` when no reference exists for the pair.
pub fn reference_cell(table: ReferenceTable, strategy: StrategyKind, column: &str) -> Option<f64> {
    if table == ReferenceTable::WordFonts && strategy == StrategyKind::FixedRender {
        return None;
    }
    if table == ReferenceTable::Ascii && strategy == StrategyKind::FixedRender && column == "word" {
        return Some(FIXED_RENDER_WORD);
    }
    let idx = table.columns().iter().position(|c| *c == column)?;
    table.row(strategy).map(|row| row[idx])
}

pub fn format_cell(table: ReferenceTable, value: f64) -> String {
    format!("{value:.*}", table.decimals())
}
