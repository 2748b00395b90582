//! Question-driven email reply engine.
//!
//! An incoming email is turned into a small set of multiple-choice questions,
//! each anchored to the sentence of the email it is about. The user's answers
//! and reply preferences are then folded into a prompt that produces an
//! editable reply draft.

pub mod anchor;
pub mod config;
pub mod domain;
pub mod draft;
pub mod gateway;
pub mod ingest;
pub mod metrics;
pub mod prompt;
pub mod questions;
pub mod schema;
pub mod session;
pub mod validate;

pub use anchor::{resolve_anchor, resolve_anchor_with, AnchorMode, AnchorResolution};
pub use config::EngineConfig;
pub use domain::*;
pub use draft::{apply_edit, build_draft_prompt, generate_draft, DraftError, QATranscript};
pub use gateway::{mock_complete, CompletionProvider, MockProvider, ProviderConfig, ProviderError};
pub use ingest::{parse_email_value, parse_json_email, parse_mail_file, IngestConfig, IngestError};
pub use metrics::{efficiency, prompt_char_count, raw_tlx, MetricsError};
pub use prompt::{build_question_prompt, PromptKind, PromptText};
pub use questions::{generate_questions, parse_llm_questions, QuestionError, QuestionGeneration};
pub use session::{Session, SessionError};
pub use validate::{validate_answers, validate_question_set, AnswerError, ValidationError};
