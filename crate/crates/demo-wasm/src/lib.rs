//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain strings and numbers and returns a JSON string,
//! so the page needs no generated type bindings beyond the loader.

use qareply_core::{
    build_question_prompt, char_len, efficiency, mock_complete, parse_llm_questions, prompt_char_count, resolve_anchor,
    validate_question_set, EmailMessage, EngineConfig, UserIdentity,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn demo_email(body: &str) -> EmailMessage {
    EmailMessage {
        subject: "Demo".into(),
        sender_name: "Sender".into(),
        sender_address: "sender@example.org".into(),
        body: body.into(),
        thread: vec![],
        received_at: None,
    }
}

/// Locates `quote` in `body`: mode, span, similarity, and the text split
/// around the span for rendering.
pub fn locate(body: &str, quote: &str) -> Value {
    let found = resolve_anchor(quote, body);
    let segments = found.span.map(|span| {
        let before: String = body.chars().take(span.start).collect();
        let marked = span.slice(body).unwrap_or_default();
        let after: String = body.chars().skip(span.end()).collect();
        json!({ "before": before, "marked": marked, "after": after })
    });
    json!({
        "mode": found.mode,
        "span": found.span,
        "similarity": found.similarity,
        "occurrences": found.occurrences,
        "segments": segments,
    })
}

/// Runs the deterministic mock pipeline over `body`.
pub fn questions(body: &str) -> Value {
    let email = demo_email(body);
    let user = UserIdentity::new("Demo User", "user@example.org");
    let prompt = match build_question_prompt(&email, &user) {
        Ok(p) => p,
        Err(e) => return json!({ "error": e.to_string() }),
    };
    let outcome = parse_llm_questions(&mock_complete(&prompt))
        .map_err(|e| e.to_string())
        .and_then(|raw| {
            validate_question_set(raw, &email, &EngineConfig::default())
                .map_err(|errors| errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
        });
    match outcome {
        Ok(set) => json!({ "prompt_digest": prompt.digest, "questions": set.questions }),
        Err(e) => json!({ "error": e }),
    }
}

/// Efficiency and prompt effort for a finished reply; `custom_options` is
/// one option per line.
pub fn reply_metrics(final_text: &str, elapsed_seconds: f64, instruction: &str, custom_options: &str) -> Value {
    let options: Vec<&str> = custom_options.lines().filter(|l| !l.trim().is_empty()).collect();
    let final_chars = char_len(final_text) as u64;
    let prompt_chars = prompt_char_count(char_len(instruction) as u64, &options);
    match efficiency(final_chars, elapsed_seconds) {
        Ok(cps) => json!({
            "final_char_count": final_chars,
            "elapsed_seconds": elapsed_seconds,
            "chars_per_second": cps,
            "prompt_char_count": prompt_chars,
        }),
        Err(e) => json!({ "error": e.to_string(), "prompt_char_count": prompt_chars }),
    }
}

#[wasm_bindgen(js_name = locateQuote)]
pub fn locate_quote(body: &str, quote: &str) -> String {
    locate(body, quote).to_string()
}

#[wasm_bindgen(js_name = mockQuestions)]
pub fn mock_questions(body: &str) -> String {
    questions(body).to_string()
}

#[wasm_bindgen(js_name = replyMetrics)]
pub fn reply_metrics_json(final_text: &str, elapsed_seconds: f64, instruction: &str, custom_options: &str) -> String {
    reply_metrics(final_text, elapsed_seconds, instruction, custom_options).to_string()
}
