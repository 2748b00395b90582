use proptest::prelude::*;
use qareply_core::ingest::{parse_json_email, parse_mail_file, IngestConfig, IngestError};
use qareply_core::{char_len, EmailMessage};

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn parse(name: &str) -> Result<EmailMessage, IngestError> {
    parse_mail_file(&fixture(name), &IngestConfig::default())
}

// Expected bodies below were produced with Python's `email` package
// (policy.default, get_body(("plain",)), CRLF -> LF).

#[test]
fn single_part_plain_text() {
    let email = parse("plain.eml").unwrap();
    assert_eq!(email.subject, "Meeting");
    assert_eq!(email.sender_name, "Alice Example");
    assert_eq!(email.sender_address, "alice@example.com");
    assert_eq!(
        email.body,
        "Hi Bob,\n\nCan you join the meeting on Thursday at 3pm? Please bring the Q3 numbers.\n\nThanks,\nAlice"
    );
    assert_eq!(char_len(&email.body), 97);
    assert!(email.thread.is_empty());
    assert_eq!(email.received_at.unwrap().to_rfc3339(), "2025-10-14T09:30:00+00:00");
}

#[test]
fn multipart_prefers_text_plain() {
    let email = parse("multipart.eml").unwrap();
    assert_eq!(email.sender_name, "Event Office");
    assert_eq!(
        email.body,
        "Dear members,\nWe will hold an event on October 24th. Please let us know your available dates within a week."
    );
    assert_eq!(char_len(&email.body), 107);
    assert!(!email.body.contains("<b>"));
}

#[test]
fn base64_japanese_body_decodes_to_oracle_count() {
    let email = parse("japanese_base64.eml").unwrap();
    assert_eq!(email.subject, "会議のご案内");
    assert_eq!(email.sender_name, "佐藤");
    assert_eq!(char_len(&email.body), 53);
    assert!(email.body.contains("来週の会議に参加できますか？"));
}

#[test]
fn html_only_is_flattened_with_breaks() {
    let email = parse("html_only.eml").unwrap();
    assert_eq!(email.body, "Hello & welcome,\nCould you confirm by Friday?\nThanks");
}

#[test]
fn attachment_only_has_no_text_part() {
    assert_eq!(parse("attachment_only.eml"), Err(IngestError::NoTextPart));
}

#[test]
fn oversized_body_is_rejected() {
    let cfg = IngestConfig {
        max_body_chars: 50,
        ..IngestConfig::default()
    };
    assert_eq!(
        parse_mail_file(&fixture("plain.eml"), &cfg),
        Err(IngestError::BodyTooLarge { chars: 97, limit: 50 })
    );
}

fn email_strategy() -> impl Strategy<Value = EmailMessage> {
    let leaf = (".{0,20}", ".{0,10}", "[a-z]{1,8}@[a-z]{1,8}\\.org", "(?s).{0,80}").prop_map(
        |(subject, sender_name, sender_address, body)| EmailMessage {
            subject,
            sender_name,
            sender_address,
            body,
            thread: vec![],
            received_at: None,
        },
    );
    (
        leaf.clone(),
        proptest::collection::vec(leaf, 0..3),
        proptest::option::of(0i64..2_000_000_000),
    )
        .prop_map(|(mut email, thread, ts)| {
            email.thread = thread;
            email.received_at = ts.and_then(|t| chrono::DateTime::from_timestamp(t, 0));
            email
        })
}

proptest! {
    #[test]
    fn json_round_trip_is_identity(email in email_strategy()) {
        let json = serde_json::to_string(&email).unwrap();
        let cfg = IngestConfig { max_body_chars: usize::MAX, ..IngestConfig::default() };
        prop_assert_eq!(parse_json_email(&json, &cfg).unwrap(), email);
    }
}
