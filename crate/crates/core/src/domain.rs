//! Domain types shared by every stage of the reply workflow.
//!
//! All character offsets in this crate are Unicode scalar value indices into
//! `EmailMessage::body`, never byte offsets.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the `char_index`-th scalar value, or `text.len()` when the
/// index equals the character length. `None` past the end.
pub fn byte_offset(text: &str, char_index: usize) -> Option<usize> {
    if char_index == 0 {
        return Some(0);
    }
    let mut seen = 0;
    for (byte, _) in text.char_indices() {
        if seen == char_index {
            return Some(byte);
        }
        seen += 1;
    }
    (seen == char_index).then_some(text.len())
}

/// Slices `text` by scalar offsets.
pub fn char_slice(text: &str, start: usize, length: usize) -> Option<&str> {
    let from = byte_offset(text, start)?;
    let to = from + byte_offset(&text[from..], length)?;
    Some(&text[from..to])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailMessage {
    pub subject: String,
    pub sender_name: String,
    pub sender_address: String,
    /// The exact string handed to the model; anchors index into it.
    pub body: String,
    /// Prior messages in the conversation, oldest first.
    #[serde(default)]
    pub thread: Vec<EmailMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub received_at: Option<DateTime<Utc>>,
}

pub const DEFAULT_LOCALE: &str = "en";

fn default_locale() -> String {
    DEFAULT_LOCALE.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserIdentity {
    pub name: String,
    pub address: String,
    #[serde(default = "default_locale")]
    pub locale: String,
}

impl UserIdentity {
    pub fn new(name: impl Into<String>, address: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            address: address.into(),
            locale: default_locale(),
        }
    }

    pub fn with_locale(mut self, locale: impl Into<String>) -> Self {
        self.locale = locale.into();
        self
    }
}

/// A `(start, length)` pair over the body's scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnchorSpan {
    pub start: usize,
    pub length: usize,
}

impl AnchorSpan {
    pub fn end(&self) -> usize {
        self.start + self.length
    }

    pub fn slice<'a>(&self, body: &'a str) -> Option<&'a str> {
        if self.length == 0 {
            return None;
        }
        char_slice(body, self.start, self.length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionFlag {
    /// The quoted part occurs more than once; the first occurrence is used.
    AmbiguousAnchor,
    /// The span was found by whitespace-normalized or fuzzy matching and may
    /// differ from the quote character-for-character.
    FuzzyAnchor,
    /// A choice looks like an "other" catch-all option.
    OtherLikeChoice,
    /// No span could be resolved; the question is still answerable.
    Unanchored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub corresponding_part: String,
    #[serde(default)]
    pub anchor: Option<AnchorSpan>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<QuestionFlag>,
}

impl Question {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        choices: Vec<String>,
        corresponding_part: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            question: question.into(),
            choices,
            corresponding_part: corresponding_part.into(),
            anchor: None,
            flags: BTreeSet::new(),
        }
    }

    pub fn has_flag(&self, flag: QuestionFlag) -> bool {
        self.flags.contains(&flag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionSource {
    LiveLlm,
    Mock,
    #[default]
    Imported,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuestionSet {
    pub questions: Vec<Question>,
    #[serde(default)]
    pub source: QuestionSource,
    #[serde(default)]
    pub raw_response: String,
}

impl QuestionSet {
    pub fn empty(source: QuestionSource) -> Self {
        Self {
            questions: Vec::new(),
            source,
            raw_response: String::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Answer {
    pub question_id: String,
    #[serde(default)]
    pub selected: BTreeSet<usize>,
    #[serde(default)]
    pub custom_options: Vec<String>,
    #[serde(default)]
    pub skipped: bool,
}

impl Answer {
    pub fn select(question_id: impl Into<String>, indices: impl IntoIterator<Item = usize>) -> Self {
        Self {
            question_id: question_id.into(),
            selected: indices.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn skip(question_id: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            skipped: true,
            ..Self::default()
        }
    }

    pub fn with_custom(mut self, text: impl Into<String>) -> Self {
        self.custom_options.push(text.into());
        self
    }

    /// True when the answer carries at least one selection or custom option.
    pub fn has_content(&self) -> bool {
        !self.skipped && (!self.selected.is_empty() || !self.custom_options.is_empty())
    }
}

/// Serialized as a plain JSON array of answers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerSet(pub Vec<Answer>);

impl AnswerSet {
    pub fn get(&self, question_id: &str) -> Option<&Answer> {
        self.0.iter().find(|a| a.question_id == question_id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Answer> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<Answer>> for AnswerSet {
    fn from(answers: Vec<Answer>) -> Self {
        Self(answers)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formality {
    Casual,
    #[default]
    Neutral,
    Formal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tone {
    Friendly,
    #[default]
    Neutral,
    Apologetic,
    Assertive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyLength {
    Short,
    #[default]
    Medium,
    Long,
}

macro_rules! display_as_serde_name {
    ($($ty:ty),*) => {$(
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let value = serde_json::to_value(self).map_err(|_| fmt::Error)?;
                f.write_str(value.as_str().unwrap_or_default())
            }
        }
    )*};
}

display_as_serde_name!(
    QuestionFlag,
    Formality,
    Tone,
    ReplyLength,
    QuestionSource,
    SessionState,
    Condition
);

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplyPreferences {
    pub relationship: String,
    pub formality: Formality,
    pub tone: Tone,
    pub length: ReplyLength,
    pub free_instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftReply {
    pub text: String,
    pub generation_index: u32,
    pub created_at: DateTime<Utc>,
    /// Hex SHA-256 of the prompt that produced this draft.
    pub prompt_digest: String,
    #[serde(default)]
    pub edited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    Questioned,
    Answered,
    Drafted,
    Finalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    NoAi,
    PromptBased,
    QaBased,
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "no_ai" => Ok(Self::NoAi),
            "prompt_based" => Ok(Self::PromptBased),
            "qa_based" => Ok(Self::QaBased),
            other => Err(format!("unknown condition {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub condition: Condition,
    pub final_char_count: u64,
    pub elapsed_seconds: f64,
    pub prompt_char_count: u64,
}
