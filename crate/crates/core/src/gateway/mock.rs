//! Offline providers.
//!
//! [`mock_complete`] is a pure function of the prompt text. For question
//! prompts it turns every request-like sentence of the incoming mail into a
//! yes/no question quoting that sentence; for draft prompts it writes a fixed
//! template that repeats each answer line of the transcript.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::Serialize;

use super::{Completion, CompletionProvider, ProviderError};
use crate::domain::QuestionSource;
use crate::prompt::{extract_incoming_mail, PromptText, DRAFT_DIRECTIVE, QUESTION_INSTRUCTION, TRANSCRIPT_HEADER};

pub const MOCK_REQUEST_KEYWORDS: &[&str] = &["please", "could you", "お願い"];
pub const MOCK_ACCEPTANCE_SENTENCE: &str = "Thank you for your email. I am happy to respond as follows.";

const SENTENCE_ENDS: &[char] = &['.', '?', '!', '。', '？', '！', '\n'];

pub fn mock_complete(prompt: &PromptText) -> String {
    mock_complete_with(&prompt.text, MOCK_REQUEST_KEYWORDS)
}

fn mock_complete_with<K: AsRef<str>>(prompt: &str, keywords: &[K]) -> String {
    if prompt.starts_with(QUESTION_INSTRUCTION) {
        let body = extract_incoming_mail(prompt).map_or("", |(body, _)| body);
        mock_questions(body, keywords)
    } else if prompt.starts_with(DRAFT_DIRECTIVE) {
        mock_draft(prompt)
    } else {
        r#"{"questions":[]}"#.to_string()
    }
}

#[derive(Serialize)]
struct MockQuestion<'a> {
    id: String,
    question: String,
    choices: [&'static str; 2],
    corresponding_part: &'a str,
}

#[derive(Serialize)]
struct MockQuestions<'a> {
    questions: Vec<MockQuestion<'a>>,
}

/// Trimmed sentences of `body`, split after terminal punctuation and at
/// line breaks. Every returned slice is a substring of `body`.
pub(crate) fn sentences(body: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in body.char_indices() {
        if SENTENCE_ENDS.contains(&c) {
            let end = if c == '\n' { i } else { i + c.len_utf8() };
            out.push(body[start..end].trim());
            start = i + c.len_utf8();
        }
    }
    out.push(body[start..].trim());
    out.retain(|s| !s.is_empty());
    out
}

fn is_request<K: AsRef<str>>(sentence: &str, keywords: &[K]) -> bool {
    let lower = sentence.to_lowercase();
    sentence.ends_with('?')
        || sentence.ends_with('？')
        || keywords.iter().any(|k| lower.contains(&k.as_ref().to_lowercase()))
}

fn mock_questions<K: AsRef<str>>(body: &str, keywords: &[K]) -> String {
    let questions = sentences(body)
        .into_iter()
        .filter(|s| is_request(s, keywords))
        .enumerate()
        .map(|(i, sentence)| MockQuestion {
            id: (i + 1).to_string(),
            question: if sentence.ends_with('?') || sentence.ends_with('？') {
                sentence.to_string()
            } else {
                format!("Will you do as asked in \"{sentence}\"?")
            },
            choices: ["Yes", "No"],
            corresponding_part: sentence,
        })
        .collect();
    serde_json::to_string_pretty(&MockQuestions { questions }).expect("plain strings serialize")
}

struct DraftFacts<'a> {
    sender: &'a str,
    answer_lines: Vec<&'a str>,
    instruction: String,
    user: &'a str,
}

/// Walks the draft prompt layout written by `draft::build_draft_prompt`.
fn read_draft_facts(prompt: &str) -> Option<DraftFacts<'_>> {
    let (_, tail) = extract_incoming_mail(prompt)?;
    let mut lines = LineCursor { rest: tail };
    let sender_line = lines.find_prefix("Sender: ")?;
    let sender = sender_line.rsplit_once(" <").map_or(sender_line, |(name, _)| name);

    let mut line = lines.next_line()?;
    while !line.starts_with(TRANSCRIPT_HEADER) {
        if let Some(count) = line
            .strip_prefix("Body (")
            .and_then(|r| r.strip_suffix(" characters):"))
            .and_then(|n| n.parse::<usize>().ok())
        {
            lines.skip_chars(count)?;
        }
        line = lines.next_line()?;
    }
    let mut answer_lines = Vec::new();
    let mut line = lines.next_line()?;
    while !line.is_empty() {
        if let Some((label, rest)) = line.split_once(": ") {
            if label.starts_with('Q') && label[1..].chars().all(|c| c.is_ascii_digit()) {
                answer_lines.push(rest);
            }
        }
        line = lines.next_line()?;
    }
    let instruction = lines
        .find_prefix("Additional instruction: ")
        .and_then(|raw| serde_json::from_str::<String>(raw).ok())
        .unwrap_or_default();
    let user = lines.find_prefix("Name: ")?;
    Some(DraftFacts {
        sender,
        answer_lines,
        instruction,
        user,
    })
}

struct LineCursor<'a> {
    rest: &'a str,
}

impl<'a> LineCursor<'a> {
    fn next_line(&mut self) -> Option<&'a str> {
        if self.rest.is_empty() {
            return None;
        }
        let (line, rest) = self.rest.split_once('\n').unwrap_or((self.rest, ""));
        self.rest = rest;
        Some(line)
    }

    fn find_prefix(&mut self, prefix: &str) -> Option<&'a str> {
        loop {
            if let Some(value) = self.next_line()?.strip_prefix(prefix) {
                return Some(value);
            }
        }
    }

    /// Skips `count` scalars plus the newline that terminates them.
    fn skip_chars(&mut self, count: usize) -> Option<()> {
        let at = crate::domain::byte_offset(self.rest, count)?;
        self.rest = self.rest[at..].strip_prefix('\n')?;
        Some(())
    }
}

#[derive(Serialize)]
struct MockReply {
    reply: String,
}

fn mock_draft(prompt: &str) -> String {
    let Some(facts) = read_draft_facts(prompt) else {
        return serde_json::to_string(&MockReply {
            reply: MOCK_ACCEPTANCE_SENTENCE.to_string(),
        })
        .expect("plain strings serialize");
    };
    let mut reply = format!("Dear {},\n\n{MOCK_ACCEPTANCE_SENTENCE}\n", facts.sender);
    if !facts.answer_lines.is_empty() {
        reply.push('\n');
        for line in &facts.answer_lines {
            reply.push_str(line);
            reply.push('\n');
        }
    }
    if !facts.instruction.trim().is_empty() {
        reply.push_str(&format!("\nNote: {}\n", facts.instruction.trim()));
    }
    reply.push_str(&format!("\nBest regards,\n{}", facts.user));
    serde_json::to_string(&MockReply { reply }).expect("plain strings serialize")
}

/// Deterministic provider backed by [`mock_complete`].
#[derive(Debug, Clone)]
pub struct MockProvider {
    keywords: Vec<String>,
}

impl Default for MockProvider {
    fn default() -> Self {
        Self {
            keywords: MOCK_REQUEST_KEYWORDS.iter().map(|k| k.to_string()).collect(),
        }
    }
}

impl MockProvider {
    pub fn with_keywords(keywords: Vec<String>) -> Self {
        Self { keywords }
    }
}

#[async_trait]
impl CompletionProvider for MockProvider {
    async fn complete(&self, prompt: &PromptText) -> Result<Completion, ProviderError> {
        Ok(Completion {
            text: mock_complete_with(&prompt.text, &self.keywords),
            attempts: 1,
            latency: Duration::ZERO,
        })
    }

    fn source(&self) -> QuestionSource {
        QuestionSource::Mock
    }
}

/// Replays a fixed sequence of outcomes, then falls back to the mock.
/// Used for fault injection.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    script: Mutex<VecDeque<Result<String, ProviderError>>>,
    calls: AtomicU32,
}

impl ScriptedProvider {
    pub fn new(script: impl IntoIterator<Item = Result<String, ProviderError>>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().collect()),
            calls: AtomicU32::new(0),
        }
    }

    pub fn push(&self, outcome: Result<String, ProviderError>) {
        self.script.lock().expect("script lock").push_back(outcome);
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl CompletionProvider for ScriptedProvider {
    async fn complete(&self, prompt: &PromptText) -> Result<Completion, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let next = self.script.lock().expect("script lock").pop_front();
        let text = match next {
            Some(outcome) => outcome?,
            None => mock_complete(prompt),
        };
        Ok(Completion {
            text,
            attempts: 1,
            latency: Duration::ZERO,
        })
    }

    fn source(&self) -> QuestionSource {
        QuestionSource::Mock
    }
}
