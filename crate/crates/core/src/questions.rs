//! Parsing model output into question sets and the end-to-end generation
//! pipeline.

use serde_json::Value;
use thiserror::Error;

use crate::config::EngineConfig;
use crate::domain::{EmailMessage, Question, QuestionSet, QuestionSource, UserIdentity};
use crate::gateway::{CompletionProvider, ProviderError};
use crate::prompt::{build_question_prompt, PromptError};
use crate::validate::{validate_question_set, ValidationError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no JSON object with a \"questions\" field found")]
    NoJsonFound,
    #[error("schema mismatch at {path}: {reason}")]
    SchemaMismatch { path: String, reason: String },
}

fn mismatch(path: impl Into<String>, reason: impl Into<String>) -> ParseError {
    ParseError::SchemaMismatch {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Finds the first JSON object in `text` that has a `"questions"` key.
///
/// Candidates are tried at every `{` in order, so surrounding prose, code
/// fences, and wrapper objects are tolerated.
fn find_questions_object(text: &str) -> Option<Value> {
    text.match_indices('{').find_map(|(at, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[at..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) if value.get("questions").is_some() => Some(value),
            _ => None,
        }
    })
}

/// Extracts an unvalidated question set from raw model output.
pub fn parse_llm_questions(response: &str) -> Result<QuestionSet, ParseError> {
    let value = find_questions_object(response).ok_or(ParseError::NoJsonFound)?;
    let items = value["questions"]
        .as_array()
        .ok_or_else(|| mismatch("questions", "expected an array"))?;
    let questions = items
        .iter()
        .enumerate()
        .map(|(i, item)| question_from_value(item, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuestionSet {
        questions,
        source: QuestionSource::Imported,
        raw_response: response.to_string(),
    })
}

fn question_from_value(item: &Value, index: usize) -> Result<Question, ParseError> {
    let path = format!("questions[{index}]");
    let obj = item.as_object().ok_or_else(|| mismatch(&path, "expected an object"))?;
    let string_field = |name: &str| -> Result<String, ParseError> {
        match obj.get(name) {
            None => Err(mismatch(format!("{path}.{name}"), "missing required field")),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(mismatch(format!("{path}.{name}"), "expected a string")),
        }
    };
    let choices = match obj.get("choices") {
        None => return Err(mismatch(format!("{path}.choices"), "missing required field")),
        Some(Value::Array(values)) => values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| mismatch(format!("{path}.choices[{j}]"), "expected a string"))
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(mismatch(format!("{path}.choices"), "expected an array")),
    };
    Ok(Question::new(
        string_field("id")?,
        string_field("question")?,
        choices,
        string_field("corresponding_part")?,
    ))
}

/// Parses and validates in one step.
pub fn questions_from_response(
    response: &str,
    email: &EmailMessage,
    config: &EngineConfig,
) -> Result<QuestionSet, QuestionError> {
    let raw = parse_llm_questions(response)?;
    validate_question_set(raw, email, config).map_err(QuestionError::Validation)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuestionError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("provider failed after {attempts} attempts: {source}")]
    Provider { attempts: u32, source: ProviderError },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("question set failed validation: {}", join_errors(.0))]
    Validation(Vec<ValidationError>),
}

fn join_errors(errors: &[ValidationError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionGeneration {
    pub questions: QuestionSet,
    pub attempts: u32,
    pub prompt_digest: String,
}

/// Prompt, call, parse, validate. Provider and parse failures are retried
/// with fresh calls up to `config.max_attempts` in total; validation failures
/// and authentication errors are returned immediately.
pub async fn generate_questions(
    email: &EmailMessage,
    user: &UserIdentity,
    provider: &dyn CompletionProvider,
    config: &EngineConfig,
) -> Result<QuestionGeneration, QuestionError> {
    let prompt = build_question_prompt(email, user)?;
    let max_attempts = config.max_attempts.max(1);
    let mut last_error = None;
    for attempt in 1..=max_attempts {
        let completion = match provider.complete(&prompt).await {
            Ok(c) => c,
            Err(source) if !source.is_retryable() => {
                return Err(QuestionError::Provider {
                    attempts: attempt,
                    source,
                })
            }
            Err(source) => {
                tracing::debug!(attempt, code = source.code(), "question generation provider failure");
                last_error = Some(QuestionError::Provider {
                    attempts: attempt,
                    source,
                });
                continue;
            }
        };
        match parse_llm_questions(&completion.text) {
            Ok(mut raw) => {
                raw.source = provider.source();
                let questions = validate_question_set(raw, email, config).map_err(QuestionError::Validation)?;
                return Ok(QuestionGeneration {
                    questions,
                    attempts: attempt,
                    prompt_digest: prompt.digest,
                });
            }
            Err(e) => {
                tracing::debug!(attempt, "question generation parse failure");
                last_error = Some(e.into());
            }
        }
    }
    Err(last_error.expect("at least one attempt"))
}
