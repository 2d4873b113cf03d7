use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::extract::{extract_code, extract_final_answer};
use super::transcript::{ImageRef, MessageRecord, Transcript, TranscriptEntry};
use super::{prompts, Strategy, StrategyKind, TaskProfile};
use crate::client::{ChatMessage, Completion, ContentPart, ImagePayload, Role};
use crate::sandbox::{ExecStatus, ExecutionResult};
use crate::task::{ErrorCategory, TaskInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Start,
    AwaitingCode,
    AwaitingExecution,
    AwaitingImageAnswer,
    AwaitingCotExtraction,
    Done,
    Failed,
}

impl Stage {
    pub fn is_terminal(self) -> bool {
        matches!(self, Stage::Done | Stage::Failed)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("stage {stage:?} is not legal for strategy {strategy}")]
    IllegalStage { strategy: StrategyKind, stage: Stage },
    #[error("{event} is not accepted by {strategy} at stage {stage:?}")]
    IllegalTransition {
        strategy: StrategyKind,
        stage: Stage,
        event: &'static str,
    },
    #[error("missing context for the next turn: {0}")]
    MissingContext(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub category: ErrorCategory,
    pub detail: String,
}

/// A post-processed image ready for the model, plus where it was archived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedImage {
    pub payload: ImagePayload,
    pub image: ImageRef,
}

#[derive(Debug, Clone)]
pub enum Event {
    Completion(Completion),
    Execution(ExecutionResult),
    ImageReady(PreparedImage),
}

impl Event {
    fn name(&self) -> &'static str {
        match self {
            Event::Completion(_) => "completion",
            Event::Execution(_) => "execution_result",
            Event::ImageReady(_) => "image_ready",
        }
    }
}

/// Immutable-in, immutable-out state of one instance's pipeline.
#[derive(Debug, Clone)]
pub struct PipelineState {
    pub strategy: Strategy,
    pub stage: Stage,
    pub transcript: Transcript,
    pub pending_script: Option<String>,
    pub pending_image: Option<PreparedImage>,
    pub prediction: Option<String>,
    pub failure: Option<Failure>,
    fence_tag: String,
    answer_marker: String,
}

impl PipelineState {
    pub fn new(strategy: Strategy, profile: &TaskProfile) -> Self {
        Self {
            strategy,
            stage: Stage::Start,
            transcript: Transcript::default(),
            pending_script: None,
            pending_image: None,
            prediction: None,
            failure: None,
            fence_tag: profile.fence_tag.clone(),
            answer_marker: profile.answer_marker.clone(),
        }
    }

    /// Number of provider turns issued so far.
    pub fn turn(&self) -> u32 {
        self.transcript.requests().count() as u32
    }

    /// Logs an outgoing request. A whiteboard run moves from `Start` to
    /// `AwaitingCode` once its first request is out.
    pub fn record_request(&mut self, messages: &[ChatMessage]) {
        let turn = self.turn();
        self.transcript.push(TranscriptEntry::Request {
            turn,
            messages: messages.iter().map(MessageRecord::from).collect(),
        });
        if self.strategy.kind == StrategyKind::Wot && self.stage == Stage::Start {
            self.stage = Stage::AwaitingCode;
        }
    }

    /// Terminates a live pipeline with the given category (provider errors,
    /// content filtering, post-processing failures).
    pub fn fail(mut self, category: ErrorCategory, detail: impl Into<String>) -> Self {
        if !self.stage.is_terminal() {
            self.stage = Stage::Failed;
            self.failure = Some(Failure {
                category,
                detail: detail.into(),
            });
        }
        self
    }

    fn illegal(&self, event: &Event) -> PipelineError {
        PipelineError::IllegalTransition {
            strategy: self.strategy.kind,
            stage: self.stage,
            event: event.name(),
        }
    }

    fn record_completion(&mut self, completion: &Completion) {
        let turn = self.transcript.completion_count();
        self.transcript.push(TranscriptEntry::Completion {
            turn,
            text: completion.response.text.clone(),
            finish_reason: completion.response.finish_reason,
            usage: completion.response.usage,
            attempts: completion.attempts,
        });
    }

    fn finish(mut self, completion: &Completion) -> Self {
        self.record_completion(completion);
        self.prediction = Some(extract_final_answer(&completion.response.text, &self.answer_marker));
        self.stage = Stage::Done;
        self
    }
}

/// Applies one event. Each strategy follows a fixed path:
///
/// - direct: `Start -> Done`
/// - cot: `Start -> AwaitingCotExtraction -> Done`
/// - wot: `Start/AwaitingCode -> AwaitingExecution -> AwaitingImageAnswer -> Done`,
///   with `Failed(no_code)` when no script is found and
///   `Failed(code_execution)` when the runner produces no image
/// - fixed_render: `Start` (image attached) `-> Done`
pub fn advance(state: PipelineState, event: Event) -> Result<PipelineState, PipelineError> {
    use StrategyKind::*;

    let mut state = state;
    match (state.strategy.kind, state.stage, &event) {
        (Direct, Stage::Start, Event::Completion(c)) => Ok(state.finish(c)),

        (Cot, Stage::Start, Event::Completion(c)) => {
            state.record_completion(c);
            state.stage = Stage::AwaitingCotExtraction;
            Ok(state)
        }
        (Cot, Stage::AwaitingCotExtraction, Event::Completion(c)) => Ok(state.finish(c)),

        (Wot, Stage::Start | Stage::AwaitingCode, Event::Completion(c)) => {
            state.record_completion(c);
            match extract_code(&c.response.text, &state.fence_tag) {
                Some(script) if !script.trim().is_empty() => {
                    state.transcript.push(TranscriptEntry::Script { text: script.clone() });
                    state.pending_script = Some(script);
                    state.stage = Stage::AwaitingExecution;
                    Ok(state)
                }
                _ => {
                    let detail = format!("no ```{} block in the completion", state.fence_tag);
                    Ok(state.fail(ErrorCategory::NoCode, detail))
                }
            }
        }
        (Wot, Stage::AwaitingExecution, Event::Execution(result)) => {
            state.pending_script = None;
            state.transcript.push(TranscriptEntry::Execution {
                status: result.status,
                images: result.images.iter().map(|a| a.to_ref()).collect(),
                stdout: result.stdout.clone(),
                stderr: result.stderr.clone(),
                wall_seconds: result.wall_seconds,
            });
            if result.status == ExecStatus::Ok && !result.images.is_empty() {
                state.stage = Stage::AwaitingImageAnswer;
                Ok(state)
            } else {
                let detail = match result.stderr.lines().last() {
                    Some(line) => format!("{}: {line}", result.status.as_str()),
                    None => result.status.as_str().to_string(),
                };
                Ok(state.fail(ErrorCategory::CodeExecution, detail))
            }
        }
        (Wot, Stage::AwaitingImageAnswer, Event::ImageReady(image))
        | (FixedRender, Stage::Start, Event::ImageReady(image))
            if state.pending_image.is_none() =>
        {
            state.transcript.push(TranscriptEntry::Image {
                image: image.image.clone(),
            });
            state.pending_image = Some(image.clone());
            Ok(state)
        }
        (Wot, Stage::AwaitingImageAnswer, Event::Completion(c)) | (FixedRender, Stage::Start, Event::Completion(c))
            if state.pending_image.is_some() =>
        {
            Ok(state.finish(c))
        }
        _ => Err(state.illegal(&event)),
    }
}

fn with_suffixes(input: &str, suffixes: &[String]) -> String {
    if suffixes.is_empty() {
        input.to_string()
    } else {
        format!("{input}\n\n{}", suffixes.join("\n"))
    }
}

fn image_message(parts: Vec<ContentPart>) -> ChatMessage {
    ChatMessage::new(Role::User, parts).expect("user message with nonempty parts")
}

/// Messages for the next provider turn of `strategy` at `stage`.
///
/// `image` is required for the whiteboard answer turn and the fixed-render
/// turn; `prior` supplies earlier completions (chain-of-thought reasoning,
/// the whiteboard code turn when history is replayed).
pub fn build_messages(
    strategy: &Strategy,
    stage: Stage,
    instance: &TaskInstance,
    profile: &TaskProfile,
    prior: &Transcript,
    image: Option<&ImagePayload>,
) -> Result<Vec<ChatMessage>, PipelineError> {
    use StrategyKind::*;
    let marker = profile.answer_marker.as_str();
    let illegal = PipelineError::IllegalStage {
        strategy: strategy.kind,
        stage,
    };

    match (strategy.kind, stage) {
        (Direct, Stage::Start) => Ok(vec![
            ChatMessage::system(prompts::direct_system(marker)),
            ChatMessage::user(instance.input.clone()),
        ]),
        (Cot, Stage::Start) => Ok(vec![ChatMessage::user(cot_first_turn(&instance.input))]),
        (Cot, Stage::AwaitingCotExtraction) => {
            let reasoning = prior
                .completions()
                .next()
                .ok_or(PipelineError::MissingContext("chain-of-thought reasoning"))?;
            Ok(vec![
                ChatMessage::user(cot_first_turn(&instance.input)),
                ChatMessage::assistant(reasoning),
                ChatMessage::user(prompts::cot_extraction(marker)),
            ])
        }
        (Wot, Stage::Start | Stage::AwaitingCode) => Ok(vec![
            ChatMessage::system(prompts::wot_system(&profile.viz_tool_name)),
            ChatMessage::user(with_suffixes(&instance.input, &profile.user_prompt_suffixes)),
        ]),
        (Wot, Stage::AwaitingImageAnswer) => {
            let image = image.ok_or(PipelineError::MissingContext("rendered image"))?;
            let system = ChatMessage::system(prompts::wot_system(&profile.viz_tool_name));
            let instruction = ContentPart::Text(prompts::wot_image_instruction(marker));
            if strategy.include_history_in_image_turn {
                let code_turn = prior
                    .completions()
                    .next()
                    .ok_or(PipelineError::MissingContext("code completion"))?;
                Ok(vec![
                    system,
                    ChatMessage::user(with_suffixes(&instance.input, &profile.user_prompt_suffixes)),
                    ChatMessage::assistant(code_turn),
                    image_message(vec![ContentPart::Image(image.clone()), instruction]),
                ])
            } else {
                Ok(vec![
                    system,
                    image_message(vec![
                        ContentPart::Text(instance.input.clone()),
                        ContentPart::Image(image.clone()),
                        instruction,
                    ]),
                ])
            }
        }
        (FixedRender, Stage::Start) => {
            let image = image.ok_or(PipelineError::MissingContext("rendered query image"))?;
            Ok(vec![
                ChatMessage::system(prompts::direct_system(marker)),
                image_message(vec![
                    ContentPart::Image(image.clone()),
                    ContentPart::Text(prompts::fixed_render_instruction(marker)),
                ]),
            ])
        }
        _ => Err(illegal),
    }
}

fn cot_first_turn(input: &str) -> String {
    format!("{input}\n\n{}", prompts::COT_ELICITATION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{CompletionResponse, FinishReason, Usage};
    use crate::sandbox::RasterArtifact;
    use crate::task::TaskKind;
    use std::path::PathBuf;

    fn completion(text: &str) -> Event {
        Event::Completion(Completion {
            response: CompletionResponse {
                text: text.into(),
                finish_reason: FinishReason::Stop,
                usage: Usage {
                    prompt_tokens: 10,
                    completion_tokens: 2,
                },
            },
            attempts: 1,
        })
    }

    fn execution(status: ExecStatus, images: usize) -> Event {
        Event::Execution(ExecutionResult {
            status,
            images: (0..images)
                .map(|k| RasterArtifact {
                    path: PathBuf::from(format!("artifacts/q/fig_{k}.png")),
                    width: 600,
                    height: 600,
                })
                .collect(),
            stdout: String::new(),
            stderr: if status == ExecStatus::Ok {
                String::new()
            } else {
                "Traceback (most recent call last):\nNameError: x".into()
            },
            wall_seconds: 0.1,
        })
    }

    fn image_ready() -> Event {
        Event::ImageReady(PreparedImage {
            payload: ImagePayload::png(vec![1, 2, 3]),
            image: ImageRef {
                artifact: None,
                width: 664,
                height: 664,
                sha256: None,
            },
        })
    }

    fn instance() -> TaskInstance {
        TaskInstance {
            id: "q1".into(),
            kind: TaskKind::Word,
            input: " _ \n|_|".into(),
            target: "o".into(),
            group: None,
        }
    }

    fn state(kind: StrategyKind) -> PipelineState {
        PipelineState::new(Strategy::new(kind), &TaskProfile::ascii())
    }

    #[test]
    fn direct_finishes_in_one_completion() {
        let s = advance(state(StrategyKind::Direct), completion("Answer: 3")).unwrap();
        assert_eq!(s.stage, Stage::Done);
        assert_eq!(s.prediction.as_deref(), Some("3"));
    }

    #[test]
    fn cot_takes_two_completions() {
        let s = advance(state(StrategyKind::Cot), completion("It has a loop...")).unwrap();
        assert_eq!(s.stage, Stage::AwaitingCotExtraction);
        let s = advance(s, completion("Answer: o")).unwrap();
        assert_eq!(s.stage, Stage::Done);
        assert_eq!(s.prediction.as_deref(), Some("o"));
        assert_eq!(s.transcript.completion_count(), 2);
    }

    #[test]
    fn wot_happy_path() {
        let mut s = state(StrategyKind::Wot);
        s.record_request(&[ChatMessage::user("x")]);
        assert_eq!(s.stage, Stage::AwaitingCode);
        let s = advance(s, completion("```python\nimport matplotlib\n```")).unwrap();
        assert_eq!(s.stage, Stage::AwaitingExecution);
        assert_eq!(s.pending_script.as_deref(), Some("import matplotlib"));
        let s = advance(s, execution(ExecStatus::Ok, 1)).unwrap();
        assert_eq!(s.stage, Stage::AwaitingImageAnswer);
        // Answering before the image is attached is not allowed.
        assert!(advance(s.clone(), completion("Answer: o")).is_err());
        let s = advance(s, image_ready()).unwrap();
        let s = advance(s, completion("Answer: o")).unwrap();
        assert_eq!(s.stage, Stage::Done);
        assert_eq!(s.prediction.as_deref(), Some("o"));
    }

    #[test]
    fn wot_without_code_fails_no_code() {
        let mut s = state(StrategyKind::Wot);
        s.record_request(&[ChatMessage::user("x")]);
        let s = advance(s, completion("The answer is 7.")).unwrap();
        assert_eq!(s.stage, Stage::Failed);
        assert_eq!(s.failure.unwrap().category, ErrorCategory::NoCode);
    }

    #[test]
    fn wot_timeout_fails_code_execution() {
        let s = advance(state(StrategyKind::Wot), completion("```python\nx\n```")).unwrap();
        let s = advance(s, execution(ExecStatus::Timeout, 0)).unwrap();
        assert_eq!(s.stage, Stage::Failed);
        assert_eq!(s.failure.unwrap().category, ErrorCategory::CodeExecution);
    }

    #[test]
    fn terminal_states_reject_events() {
        let s = advance(state(StrategyKind::Direct), completion("Answer: 1")).unwrap();
        assert!(matches!(
            advance(s.clone(), completion("Answer: 2")),
            Err(PipelineError::IllegalTransition { .. })
        ));
        let failed = s.fail(ErrorCategory::ProviderError, "late");
        assert_eq!(failed.stage, Stage::Done);
    }

    #[test]
    fn wrong_event_for_stage() {
        assert!(advance(state(StrategyKind::Direct), execution(ExecStatus::Ok, 1)).is_err());
        assert!(advance(state(StrategyKind::Cot), image_ready()).is_err());
    }

    #[test]
    fn wot_first_turn_prompt() {
        let msgs = build_messages(
            &Strategy::new(StrategyKind::Wot),
            Stage::Start,
            &instance(),
            &TaskProfile::ascii(),
            &Transcript::default(),
            None,
        )
        .unwrap();
        assert_eq!(msgs.len(), 2);
        assert!(msgs[0]
            .text()
            .contains("Do NOT produce a final answer to the query until considering the visualization."));
        assert!(msgs[0].text().contains("using the Matplotlib library"));
        let user = msgs[1].text();
        assert!(user.starts_with(" _ \n|_|\n\n"));
        assert!(user.ends_with("Remember not all rows are necessarily the same length."));
    }

    #[test]
    fn direct_prompt_exact() {
        let msgs = build_messages(
            &Strategy::new(StrategyKind::Direct),
            Stage::Start,
            &instance(),
            &TaskProfile::ascii(),
            &Transcript::default(),
            None,
        )
        .unwrap();
        assert_eq!(
            msgs[0].text(),
            "You are given a task to solve. Make sure to output an answer after \"Answer:\" without any explanation."
        );
        assert_eq!(msgs[1].text(), instance().input);
    }

    #[test]
    fn cot_prompts() {
        let strategy = Strategy::new(StrategyKind::Cot);
        let first = build_messages(
            &strategy,
            Stage::Start,
            &instance(),
            &TaskProfile::ascii(),
            &Transcript::default(),
            None,
        )
        .unwrap();
        assert!(first.last().unwrap().text().ends_with("Let's think step by step."));

        let s = advance(state(StrategyKind::Cot), completion("Reasoning here.")).unwrap();
        let second = build_messages(
            &strategy,
            s.stage,
            &instance(),
            &TaskProfile::ascii(),
            &s.transcript,
            None,
        )
        .unwrap();
        assert_eq!(second.len(), 3);
        assert_eq!(second[1].role(), Role::Assistant);
        assert_eq!(second[1].text(), "Reasoning here.");
    }

    #[test]
    fn image_turn_with_and_without_history() {
        let s = advance(state(StrategyKind::Wot), completion("```python\nx\n```")).unwrap();
        let payload = ImagePayload::png(vec![9]);
        let plain = build_messages(
            &Strategy::new(StrategyKind::Wot),
            Stage::AwaitingImageAnswer,
            &instance(),
            &TaskProfile::ascii(),
            &s.transcript,
            Some(&payload),
        )
        .unwrap();
        assert_eq!(plain.len(), 2);
        assert!(plain[1].has_image());
        assert!(plain[1].text().starts_with(&instance().input));

        let history = build_messages(
            &Strategy::wot_with_history(),
            Stage::AwaitingImageAnswer,
            &instance(),
            &TaskProfile::ascii(),
            &s.transcript,
            Some(&payload),
        )
        .unwrap();
        assert_eq!(history.len(), 4);
        assert_eq!(history[2].text(), "```python\nx\n```");
        assert!(history[3].has_image());
    }

    #[test]
    fn illegal_stage() {
        let err = build_messages(
            &Strategy::new(StrategyKind::Direct),
            Stage::AwaitingCotExtraction,
            &instance(),
            &TaskProfile::ascii(),
            &Transcript::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::IllegalStage { .. }));
    }

    #[test]
    fn messages_are_deterministic() {
        let build = || {
            build_messages(
                &Strategy::new(StrategyKind::Wot),
                Stage::Start,
                &instance(),
                &TaskProfile::navigation(),
                &Transcript::default(),
                None,
            )
            .unwrap()
        };
        assert_eq!(build(), build());
    }
}
