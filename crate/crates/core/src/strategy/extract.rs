const FENCE: &str = "```";

const QUOTES: &[char] = &['"', '\'', '`', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}'];

/// Collects every fenced block opened by ```` ```{fence_tag} ```` and closed
/// by the next ```` ``` ````, scanning left to right without overlap.
///
/// This is the `findall` semantics of the pattern
/// ```` ```python(.*?)``` ```` with dot matching newlines: the tag is matched
/// as a prefix, so ```` ```python3 ```` also opens a block whose body starts
/// with `3`. Each body has surrounding line breaks trimmed; bodies are joined
/// with a single newline. `None` when nothing matches.
pub fn extract_code(text: &str, fence_tag: &str) -> Option<String> {
    let opener = format!("{FENCE}{fence_tag}");
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(&opener) {
        let body_start = start + opener.len();
        let Some(len) = rest[body_start..].find(FENCE) else {
            break;
        };
        blocks.push(trim_line_breaks(&rest[body_start..body_start + len]));
        rest = &rest[body_start + len + FENCE.len()..];
    }
    if blocks.is_empty() {
        None
    } else {
        Some(blocks.join("\n"))
    }
}

pub(crate) fn trim_line_breaks(s: &str) -> &str {
    s.trim_matches(|c| c == '\n' || c == '\r')
}

/// Text after the last `marker`, with whitespace and surrounding quote
/// characters removed. Without a marker, the whole text trimmed.
pub fn extract_final_answer(text: &str, marker: &str) -> String {
    let tail = if marker.is_empty() {
        text
    } else {
        match text.rfind(marker) {
            Some(pos) => &text[pos + marker.len()..],
            None => text,
        }
    };
    tail.trim_matches(|c: char| c.is_whitespace() || QUOTES.contains(&c))
        .to_string()
}
