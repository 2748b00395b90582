//! Builds [`EmailMessage`] values from `.eml` files or JSON payloads.
//!
//! MIME decoding is delegated to `mail-parser`. Text parts have CRLF line
//! endings converted to LF; HTML-only messages are flattened to plain text
//! with line-break tags turned into newlines.

use chrono::{DateTime, Utc};
use mail_parser::{MessageParser, PartType};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::domain::{char_len, EmailMessage, DEFAULT_LOCALE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub max_body_chars: usize,
    pub strip_quoted_trail: bool,
    pub default_locale: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            max_body_chars: 20_000,
            strip_quoted_trail: false,
            default_locale: DEFAULT_LOCALE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("malformed message headers: {0}")]
    MalformedHeaders(String),
    #[error("message has no text or html part")]
    NoTextPart,
    #[error("body has {chars} characters, limit is {limit}")]
    BodyTooLarge { chars: usize, limit: usize },
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}` must be {expected}")]
    WrongType { field: String, expected: &'static str },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MalformedHeaders(_) => "malformed_headers",
            Self::NoTextPart => "no_text_part",
            Self::BodyTooLarge { .. } => "body_too_large",
            Self::InvalidJson(_) => "invalid_json",
            Self::MissingField(_) => "missing_field",
            Self::WrongType { .. } => "wrong_type",
        }
    }
}

/// Parses an RFC 5322 message, possibly MIME multipart.
pub fn parse_mail_file(raw: &[u8], config: &IngestConfig) -> Result<EmailMessage, IngestError> {
    check_header_block(raw)?;
    let message = MessageParser::default()
        .parse(raw)
        .ok_or_else(|| IngestError::MalformedHeaders("unparseable message".into()))?;

    let plain = message.text_body.iter().find_map(|&id| match &message.part(id)?.body {
        PartType::Text(text) => Some(text.to_string()),
        _ => None,
    });
    let body = match plain {
        Some(text) => normalize_newlines(&text),
        None => message
            .html_body
            .iter()
            .find_map(|&id| match &message.part(id)?.body {
                PartType::Html(html) => Some(flatten_html(html)),
                _ => None,
            })
            .ok_or(IngestError::NoTextPart)?,
    };
    let body = if config.strip_quoted_trail {
        strip_quoted_trail(&body)
    } else {
        body
    };
    check_size(&body, config)?;

    let attachments = message.attachment_count();
    if attachments > 0 {
        tracing::warn!(attachments, "ignoring attachments");
    }

    let sender = message.from().and_then(|from| from.first());
    Ok(EmailMessage {
        subject: message.subject().unwrap_or_default().to_string(),
        sender_name: sender.and_then(|a| a.name()).unwrap_or_default().to_string(),
        sender_address: sender.and_then(|a| a.address()).unwrap_or_default().to_string(),
        body,
        thread: Vec::new(),
        received_at: message
            .date()
            .and_then(|d| DateTime::<Utc>::from_timestamp(d.to_timestamp(), 0)),
    })
}

/// The first line must be a header field and a header section must exist.
fn check_header_block(raw: &[u8]) -> Result<(), IngestError> {
    let text = String::from_utf8_lossy(raw);
    let first = text.lines().next().unwrap_or_default();
    let Some((name, _)) = first.split_once(':') else {
        return Err(IngestError::MalformedHeaders("first line is not a header field".into()));
    };
    if name.is_empty() || !name.bytes().all(|b| (33..=126).contains(&b)) {
        return Err(IngestError::MalformedHeaders(format!("invalid field name {name:?}")));
    }
    Ok(())
}

fn check_size(body: &str, config: &IngestConfig) -> Result<(), IngestError> {
    let chars = char_len(body);
    if chars > config.max_body_chars {
        return Err(IngestError::BodyTooLarge {
            chars,
            limit: config.max_body_chars,
        });
    }
    Ok(())
}

fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n")
}

/// Drops a trailing block of `>`-quoted lines and the attribution line
/// ("On ... wrote:") that introduces it.
pub fn strip_quoted_trail(body: &str) -> String {
    let lines: Vec<&str> = body.split('\n').collect();
    let mut keep = lines.len();
    while keep > 0 {
        let line = lines[keep - 1].trim();
        if line.starts_with('>') || line.is_empty() {
            keep -= 1;
        } else {
            break;
        }
    }
    if keep == lines.len() || keep == 0 {
        return body.to_string();
    }
    if lines[keep - 1].trim_end().ends_with("wrote:") {
        keep -= 1;
    }
    let mut out = lines[..keep].join("\n");
    while out.ends_with('\n') {
        out.pop();
    }
    out
}

const BLOCK_TAGS: &[&str] = &["p", "div", "li", "tr", "h1", "h2", "h3", "h4", "h5", "h6", "blockquote"];

/// Renders HTML as text: tags removed, `<br>` and block ends become `\n`,
/// script/style content dropped, common entities decoded.
pub fn flatten_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(lt) = rest.find('<') {
        out.push_str(&decode_entities(&rest[..lt]));
        let after = &rest[lt..];
        let Some(gt) = after.find('>') else {
            out.push_str(&decode_entities(after));
            rest = "";
            break;
        };
        let tag = &after[1..gt];
        rest = &after[gt + 1..];
        let closing = tag.starts_with('/');
        let name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if name == "br" {
            out.push('\n');
        } else if (name == "script" || name == "style") && !closing {
            let end = format!("</{name}");
            match rest.to_ascii_lowercase().find(&end) {
                Some(pos) => {
                    rest = &rest[pos..];
                    rest = rest.find('>').map_or("", |p| &rest[p + 1..]);
                }
                None => rest = "",
            }
        } else if closing && BLOCK_TAGS.contains(&name.as_str()) && !out.ends_with('\n') && !out.is_empty() {
            out.push('\n');
        }
    }
    out.push_str(&decode_entities(rest));
    out.trim_end().to_string()
}

fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp..];
        let decoded = after.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let entity = &after[1..semi];
            let ch = match entity {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" | "#39" => Some('\''),
                "nbsp" => Some('\u{a0}'),
                _ if entity.starts_with("#x") || entity.starts_with("#X") => {
                    u32::from_str_radix(&entity[2..], 16).ok().and_then(char::from_u32)
                }
                _ if entity.starts_with('#') => entity[1..].parse().ok().and_then(char::from_u32),
                _ => None,
            };
            ch.map(|c| (c, semi))
        });
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &after[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &after[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Parses the JSON email payload. The body is taken verbatim.
pub fn parse_json_email(text: &str, config: &IngestConfig) -> Result<EmailMessage, IngestError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IngestError::InvalidJson(e.to_string()))?;
    let email = email_from_value(&value, "")?;
    check_size(&email.body, config)?;
    Ok(email)
}

/// Like [`parse_json_email`] for a payload nested under `path` in a larger
/// document; error fields carry the prefix.
pub fn parse_email_value(value: &Value, path: &str, config: &IngestConfig) -> Result<EmailMessage, IngestError> {
    let email = email_from_value(value, path)?;
    check_size(&email.body, config)?;
    Ok(email)
}

/// Maps an already-parsed JSON value; `path` prefixes field names in errors.
pub fn email_from_value(value: &Value, path: &str) -> Result<EmailMessage, IngestError> {
    let obj = value.as_object().ok_or_else(|| IngestError::WrongType {
        field: if path.is_empty() { "$".into() } else { path.to_string() },
        expected: "an object",
    })?;
    let field = |name: &str| format!("{path}{name}");
    let thread = match obj.get("thread") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| email_from_value(item, &format!("{}[{i}].", field("thread"))))
            .collect::<Result<_, _>>()?,
        Some(_) => {
            return Err(IngestError::WrongType {
                field: field("thread"),
                expected: "an array",
            })
        }
    };
    let received_at = match obj.get("received_at") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(
            DateTime::parse_from_rfc3339(s)
                .map_err(|_| IngestError::WrongType {
                    field: field("received_at"),
                    expected: "an RFC 3339 timestamp",
                })?
                .with_timezone(&Utc),
        ),
        Some(_) => {
            return Err(IngestError::WrongType {
                field: field("received_at"),
                expected: "a string",
            })
        }
    };
    Ok(EmailMessage {
        subject: required_str(obj, "subject", path)?,
        sender_name: required_str(obj, "sender_name", path)?,
        sender_address: required_str(obj, "sender_address", path)?,
        body: required_str(obj, "body", path)?,
        thread,
        received_at,
    })
}

fn required_str(obj: &Map<String, Value>, name: &str, path: &str) -> Result<String, IngestError> {
    match obj.get(name) {
        None => Err(IngestError::MissingField(format!("{path}{name}"))),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(IngestError::WrongType {
            field: format!("{path}{name}"),
            expected: "a string",
        }),
    }
}
