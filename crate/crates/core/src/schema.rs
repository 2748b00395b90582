//! Machine-readable JSON schemas for the wire formats.

pub const QUESTION_SET: &str = include_str!("../schemas/question_set.schema.json");
pub const ANSWERS: &str = include_str!("../schemas/answers.schema.json");
pub const PREFERENCES: &str = include_str!("../schemas/preferences.schema.json");
pub const EMAIL: &str = include_str!("../schemas/email.schema.json");

/// `(name, schema)` pairs for every published schema.
pub const ALL: [(&str, &str); 4] = [
    ("question_set", QUESTION_SET),
    ("answers", ANSWERS),
    ("preferences", PREFERENCES),
    ("email", EMAIL),
];
