//! Deterministic prompt assembly.
//!
//! Both prompts open with a fixed preamble (the vendored instruction text)
//! followed immediately by the incoming mail, framed with an explicit
//! character count so the body can be recovered exactly from the prompt.
//! Every other context field is flattened to a single line. Prior messages
//! always come last.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{char_len, EmailMessage, UserIdentity};

/// The question-generation instruction block, bit-exact.
pub const QUESTION_INSTRUCTION: &str = include_str!("../prompts/question_instruction.txt");
/// Hex SHA-256 of [`QUESTION_INSTRUCTION`].
pub const QUESTION_INSTRUCTION_DIGEST: &str = include_str!("../prompts/question_instruction.sha256");
/// Opening directive of the draft prompt, bit-exact.
pub const DRAFT_DIRECTIVE: &str = include_str!("../prompts/draft_directive.txt");

pub(crate) const INCOMING_HEADER: &str = "###Incoming Mail###";
pub(crate) const INCOMING_FOOTER: &str = "###End of Incoming Mail###";
pub(crate) const TRANSCRIPT_HEADER: &str = "###Questions and Answers###";
pub(crate) const ANSWER_ARROW: &str = " → ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    QuestionGen,
    DraftGen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub digest: String,
    pub kind: PromptKind,
}

impl PromptText {
    pub fn new(kind: PromptKind, text: String) -> Self {
        let digest = sha256_hex(&text);
        Self { text, digest, kind }
    }

    pub fn verify_digest(&self) -> bool {
        sha256_hex(&self.text) == self.digest
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("email body is empty")]
    EmptyBody,
}

/// Replaces line breaks so a value occupies exactly one prompt line.
pub(crate) fn one_line(text: &str) -> String {
    text.replace("\r\n", " ").replace(['\r', '\n'], " ")
}

pub(crate) fn push_incoming_mail(out: &mut String, body: &str) {
    let _ = write!(out, "\n\n{INCOMING_HEADER} ({} characters)\n", char_len(body));
    out.push_str(body);
    let _ = write!(out, "\n{INCOMING_FOOTER}\n");
}

pub(crate) fn push_email_details(out: &mut String, email: &EmailMessage) {
    out.push_str("\n###Email Details###\n");
    let _ = writeln!(out, "Subject: {}", one_line(&email.subject));
    let _ = writeln!(
        out,
        "Sender: {} <{}>",
        one_line(&email.sender_name),
        one_line(&email.sender_address)
    );
    if let Some(at) = email.received_at {
        let _ = writeln!(out, "Received: {}", at.to_rfc3339());
    }
}

pub(crate) fn push_thread(out: &mut String, thread: &[EmailMessage]) {
    if thread.is_empty() {
        return;
    }
    let _ = write!(out, "\n###Prior Messages### ({}, oldest first)\n", thread.len());
    for (i, message) in thread.iter().enumerate() {
        let _ = writeln!(out, "--- Prior message {} ---", i + 1);
        let _ = writeln!(out, "Subject: {}", one_line(&message.subject));
        let _ = writeln!(
            out,
            "Sender: {} <{}>",
            one_line(&message.sender_name),
            one_line(&message.sender_address)
        );
        let _ = writeln!(out, "Body ({} characters):", char_len(&message.body));
        out.push_str(&message.body);
        out.push('\n');
    }
    out.push_str("--- End of prior messages ---\n");
}

/// Builds the question-generation prompt for `email` as read by `user`.
pub fn build_question_prompt(email: &EmailMessage, user: &UserIdentity) -> Result<PromptText, PromptError> {
    if email.body.trim().is_empty() {
        return Err(PromptError::EmptyBody);
    }
    let mut text = String::with_capacity(QUESTION_INSTRUCTION.len() + email.body.len() * 2 + 512);
    text.push_str(QUESTION_INSTRUCTION);
    push_incoming_mail(&mut text, &email.body);
    push_email_details(&mut text, email);
    text.push_str("\n###Your Audience###\n");
    let _ = writeln!(text, "Name: {}", one_line(&user.name));
    let _ = writeln!(text, "Address: {}", one_line(&user.address));
    let _ = writeln!(text, "Native language: {}", one_line(&user.locale));
    push_thread(&mut text, &email.thread);
    Ok(PromptText::new(PromptKind::QuestionGen, text))
}

/// Recovers the incoming mail body from a prompt built by this module.
/// Returns the body and the remainder of the prompt after the mail footer.
pub fn extract_incoming_mail(prompt: &str) -> Option<(&str, &str)> {
    let marker = format!("\n\n{INCOMING_HEADER} (");
    let at = prompt.find(&marker)? + marker.len();
    let rest = &prompt[at..];
    let close = rest.find(" characters)\n")?;
    let count: usize = rest[..close].parse().ok()?;
    let body_start = close + " characters)\n".len();
    let body_and_more = &rest[body_start..];
    let body_end = crate::domain::byte_offset(body_and_more, count)?;
    let body = &body_and_more[..body_end];
    let footer = format!("\n{INCOMING_FOOTER}\n");
    let tail = body_and_more[body_end..].strip_prefix(footer.as_str())?;
    Some((body, tail))
}
