//! Draft synthesis from a session's answers and preferences.

use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::EngineConfig;
use crate::domain::{Answer, AnswerSet, DraftReply, Question, QuestionSet, SessionState};
use crate::gateway::{CompletionProvider, ProviderError};
use crate::prompt::{
    one_line, push_email_details, push_incoming_mail, push_thread, PromptKind, PromptText, ANSWER_ARROW,
    DRAFT_DIRECTIVE, TRANSCRIPT_HEADER,
};
use crate::session::{Session, SessionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DraftError {
    #[error("questions have not been generated yet")]
    NotReady,
    #[error("no answered question and no instruction to draft from")]
    NothingToSay,
    #[error("no draft exists yet")]
    NoDraft,
    #[error("regeneration limit of {0} drafts reached")]
    RegenerationLimit(u32),
    #[error("session is already finalized")]
    AlreadyFinalized,
    #[error("provider returned an empty draft")]
    EmptyReply,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl DraftError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NotReady => "not_ready",
            Self::NothingToSay => "nothing_to_say",
            Self::NoDraft => "no_draft",
            Self::RegenerationLimit(_) => "regeneration_limit",
            Self::AlreadyFinalized => "already_finalized",
            Self::EmptyReply => "empty_reply",
            Self::Provider(e) => e.code(),
        }
    }
}

impl From<SessionError> for DraftError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::AlreadyFinalized => Self::AlreadyFinalized,
            _ => Self::NotReady,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub question_id: String,
    pub question: String,
    pub corresponding_part: String,
    pub answer: String,
}

impl TranscriptEntry {
    /// The `question → answer` line as it appears in the prompt.
    pub fn line(&self) -> String {
        format!("{}{ANSWER_ARROW}{}", one_line(&self.question), one_line(&self.answer))
    }
}

/// Answered questions in question order; everything else is listed as
/// unanswered by id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QATranscript {
    pub entries: Vec<TranscriptEntry>,
    pub unanswered: Vec<String>,
}

impl QATranscript {
    pub fn build(questions: &QuestionSet, answers: &AnswerSet) -> Self {
        let mut transcript = Self::default();
        for question in &questions.questions {
            match answers.get(&question.id).filter(|a| a.has_content()) {
                Some(answer) => transcript.entries.push(TranscriptEntry {
                    question_id: question.id.clone(),
                    question: question.question.clone(),
                    corresponding_part: question.corresponding_part.clone(),
                    answer: render_answer(question, answer),
                }),
                None => transcript.unanswered.push(question.id.clone()),
            }
        }
        transcript
    }
}

/// Selected choice texts in choice order, then custom options, comma-separated.
pub fn render_answer(question: &Question, answer: &Answer) -> String {
    answer
        .selected
        .iter()
        .filter_map(|&i| question.choices.get(i).map(String::as_str))
        .chain(answer.custom_options.iter().map(String::as_str))
        .collect::<Vec<_>>()
        .join(", ")
}

fn json_string(text: &str) -> String {
    serde_json::to_string(text).expect("strings serialize")
}

pub fn build_draft_prompt(session: &Session) -> Result<PromptText, DraftError> {
    let questions = session.question_set.as_ref().ok_or(DraftError::NotReady)?;
    let transcript = QATranscript::build(questions, &session.answers);
    let prefs = &session.preferences;
    if transcript.entries.is_empty() && prefs.free_instruction.trim().is_empty() {
        return Err(DraftError::NothingToSay);
    }

    let email = &session.email;
    let mut text = String::with_capacity(email.body.len() * 2 + 1024);
    text.push_str(DRAFT_DIRECTIVE);
    push_incoming_mail(&mut text, &email.body);
    push_email_details(&mut text, email);
    push_thread(&mut text, &email.thread);

    let _ = write!(text, "\n{TRANSCRIPT_HEADER} ({} answered)\n", transcript.entries.len());
    for (i, entry) in transcript.entries.iter().enumerate() {
        let _ = writeln!(text, "Q{} quote: {}", i + 1, one_line(&entry.corresponding_part));
        let _ = writeln!(text, "Q{}: {}", i + 1, entry.line());
    }

    text.push_str("\n###Reply Preferences###\n");
    let _ = writeln!(text, "Relationship to sender: {}", json_string(&prefs.relationship));
    let _ = writeln!(text, "Formality: {}", prefs.formality);
    let _ = writeln!(text, "Tone: {}", prefs.tone);
    let _ = writeln!(text, "Length: {}", prefs.length);
    let _ = writeln!(text, "Additional instruction: {}", json_string(&prefs.free_instruction));

    let user = &session.user;
    text.push_str("\n###User###\n");
    let _ = writeln!(text, "Name: {}", one_line(&user.name));
    let _ = writeln!(text, "Address: {}", one_line(&user.address));
    let _ = writeln!(text, "Language: {}", one_line(&user.locale));
    text.push_str("Write the reply in the user's voice and sign it with the user's name.\n");
    text.push_str("Output format: a JSON object {\"reply\": \"<reply text>\"}.\n");

    Ok(PromptText::new(PromptKind::DraftGen, text))
}

/// Accepts `{"reply": "..."}` anywhere in the output, otherwise the raw text.
pub fn parse_draft_response(raw: &str) -> Result<String, DraftError> {
    let from_json = raw.match_indices('{').find_map(|(at, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[at..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(obj))) => obj.get("reply").and_then(Value::as_str).map(str::to_string),
            _ => None,
        }
    });
    let text = match from_json {
        Some(reply) => reply,
        None => strip_fences(raw.trim()).to_string(),
    };
    if text.trim().is_empty() {
        return Err(DraftError::EmptyReply);
    }
    Ok(text)
}

fn strip_fences(text: &str) -> &str {
    let Some(inner) = text.strip_prefix("```") else {
        return text;
    };
    let inner = inner.split_once('\n').map_or("", |(_, rest)| rest);
    inner.strip_suffix("```").unwrap_or(inner).trim()
}

/// Generates and appends a new draft. The session is untouched on error.
pub async fn generate_draft(
    session: &mut Session,
    provider: &dyn CompletionProvider,
    config: &EngineConfig,
    now: DateTime<Utc>,
) -> Result<DraftReply, DraftError> {
    session.ensure_open()?;
    if session.drafts.len() >= config.regeneration_limit as usize {
        return Err(DraftError::RegenerationLimit(config.regeneration_limit));
    }
    let prompt = build_draft_prompt(session)?;
    let completion = provider.complete(&prompt).await?;
    let text = parse_draft_response(&completion.text)?;
    let next_index = session.drafts.iter().map(|d| d.generation_index).max().unwrap_or(0) + 1;
    let draft = DraftReply {
        text,
        generation_index: next_index,
        created_at: now,
        prompt_digest: prompt.digest,
        edited: false,
    };
    session.drafts.push(draft.clone());
    session.advance(SessionState::Drafted);
    Ok(draft)
}

/// Replaces the latest draft's text in place.
pub fn apply_edit(session: &mut Session, new_text: impl Into<String>) -> Result<DraftReply, DraftError> {
    session.ensure_open()?;
    let latest = session.drafts.last_mut().ok_or(DraftError::NoDraft)?;
    latest.text = new_text.into();
    latest.edited = true;
    Ok(latest.clone())
}
