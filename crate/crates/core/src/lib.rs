//! Whiteboard-of-thought evaluation harness.
//!
//! The crate drives a multimodal chat model through three prompting
//! strategies (direct answer, zero-shot chain of thought, and
//! whiteboard-of-thought), executes model-written visualization scripts in an
//! external runner process, feeds the rendered image back to the model, and
//! scores the final answer.
//!
//! Module map:
//!
//! - [`client`]: chat-completion client with text+image messages, retries,
//!   rate limiting, and a fixture-backed mock provider.
//! - [`strategy`]: prompt assembly, code/answer extraction, and the
//!   per-instance pipeline state machine.
//! - [`sandbox`]: runner process orchestration and image post-processing.
//! - [`ascii`]: ASCII recognition tasks (loaders, scorers, fixed rasterizer).
//! - [`nav`]: spatial navigation worlds, ground-truth simulator, generator.
//! - [`harness`]: run orchestration, persistence, aggregation, reporting.
//!
//! Navigation geometry is generic over the coordinate scalar (any
//! [`num_traits::Float`]); the aliases below pin the `f64` instantiation used
//! by the rest of the harness.

pub mod ascii;
pub mod client;
pub mod harness;
pub mod nav;
pub mod sandbox;
pub mod strategy;
pub mod task;

pub use client::{ChatMessage, Client, CompletionResponse, GenerationParams, ProviderConfig};
pub use harness::{RunConfig, RunRecord};
pub use strategy::{Strategy, StrategyKind, TaskProfile};
pub use task::{TaskInstance, TaskKind};

/// Planar point with `f64` coordinates.
pub type Point = nav::Point<f64>;
/// Navigation world with `f64` node positions.
pub type NavWorld = nav::World<f64>;
/// Navigation instance with `f64` node positions.
pub type NavInstance = nav::NavInstance<f64>;
/// Single-precision navigation world, mostly useful for compact corpora.
pub type NavWorldF32 = nav::World<f32>;
