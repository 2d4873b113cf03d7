//! Every prompt string the strategies send, in one place.
//!
//! Bump [`PROMPT_SET_VERSION`] whenever any template changes; run records
//! carry it so results from different prompt sets are never mixed silently.

pub const PROMPT_SET_VERSION: &str = "1";

/// Default answer marker the scorers look for.
pub const DEFAULT_ANSWER_MARKER: &str = "Answer:";

/// Whiteboard system prompt. `{tool}` is replaced by the task profile's
/// visualization library name.
pub const WOT_SYSTEM_TEMPLATE: &str = "You write code to create visualizations using the {tool} library in Python, which the user will run and provide as images. Do NOT produce a final answer to the query until considering the visualization.";

/// Direct-answer system prompt. `{marker}` is the answer marker.
pub const DIRECT_SYSTEM_TEMPLATE: &str =
    "You are given a task to solve. Make sure to output an answer after \"{marker}\" without any explanation.";

/// Appended to the query in the first chain-of-thought turn.
pub const COT_ELICITATION: &str = "Let's think step by step.";

/// Second chain-of-thought turn, sent after the model's reasoning.
pub const COT_EXTRACTION_TEMPLATE: &str =
    "Therefore, what is the final answer? Make sure to output an answer after \"{marker}\" without any explanation.";

/// Follows the rendered image in the whiteboard answer turn.
pub const WOT_IMAGE_TEMPLATE: &str = "The image above was produced by running your visualization code. Considering the visualization, answer the query. Make sure to output an answer after \"{marker}\" without any explanation.";

/// Follows the directly rendered query in the fixed-render baseline.
pub const FIXED_RENDER_TEMPLATE: &str = "The image above shows the query rendered as text. Answer the query. Make sure to output an answer after \"{marker}\" without any explanation.";

pub fn wot_system(tool: &str) -> String {
    WOT_SYSTEM_TEMPLATE.replace("{tool}", tool)
}

pub fn direct_system(marker: &str) -> String {
    DIRECT_SYSTEM_TEMPLATE.replace("{marker}", marker)
}

pub fn cot_extraction(marker: &str) -> String {
    COT_EXTRACTION_TEMPLATE.replace("{marker}", marker)
}

pub fn wot_image_instruction(marker: &str) -> String {
    WOT_IMAGE_TEMPLATE.replace("{marker}", marker)
}

pub fn fixed_render_instruction(marker: &str) -> String {
    FIXED_RENDER_TEMPLATE.replace("{marker}", marker)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_prompt_with_default_marker() {
        assert_eq!(
            direct_system(DEFAULT_ANSWER_MARKER),
            "You are given a task to solve. Make sure to output an answer after \"Answer:\" without any explanation."
        );
    }

    #[test]
    fn wot_prompt_names_tool() {
        let s = wot_system("Turtle");
        assert!(s.starts_with("You write code to create visualizations using the Turtle library in Python, which the user will run and provide as images."));
        assert!(s.ends_with("Do NOT produce a final answer to the query until considering the visualization."));
    }
}
