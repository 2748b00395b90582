use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    char_len, AnswerSet, Condition, DraftReply, EmailMessage, MetricsRecord, QuestionSet, ReplyPreferences,
    SessionState, UserIdentity,
};
use crate::metrics::prompt_char_count;
use crate::validate::{validate_answers, AnswerError};

/// Floor for elapsed time so efficiency stays defined.
pub const MIN_ELAPSED_SECONDS: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("session is already finalized")]
    AlreadyFinalized,
    #[error("questions have not been generated yet")]
    NotQuestioned,
    #[error("questions were already generated")]
    AlreadyQuestioned,
    #[error("session has no answers or draft to finalize")]
    NotReady,
    #[error("final text is empty")]
    EmptyFinalText,
    #[error(transparent)]
    Answer(#[from] AnswerError),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::AlreadyFinalized => "already_finalized",
            Self::NotQuestioned => "not_questioned",
            Self::AlreadyQuestioned => "already_questioned",
            Self::NotReady => "not_ready",
            Self::EmptyFinalText => "empty_final_text",
            Self::Answer(e) => e.code(),
        }
    }
}

/// One email's reply workflow from receipt to final text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub email: EmailMessage,
    pub user: UserIdentity,
    pub question_set: Option<QuestionSet>,
    pub answers: AnswerSet,
    pub preferences: ReplyPreferences,
    pub drafts: Vec<DraftReply>,
    pub final_text: Option<String>,
    pub opened_at: DateTime<Utc>,
    pub finalized_at: Option<DateTime<Utc>>,
    pub state: SessionState,
}

impl Session {
    pub fn new(id: impl Into<String>, email: EmailMessage, user: UserIdentity, opened_at: DateTime<Utc>) -> Self {
        Self {
            id: id.into(),
            email,
            user,
            question_set: None,
            answers: AnswerSet::default(),
            preferences: ReplyPreferences::default(),
            drafts: Vec::new(),
            final_text: None,
            opened_at,
            finalized_at: None,
            state: SessionState::Created,
        }
    }

    /// Moves forward to `state`; never backward.
    pub(crate) fn advance(&mut self, state: SessionState) {
        self.state = self.state.max(state);
    }

    pub fn ensure_open(&self) -> Result<(), SessionError> {
        if self.state == SessionState::Finalized {
            Err(SessionError::AlreadyFinalized)
        } else {
            Ok(())
        }
    }

    pub fn attach_questions(&mut self, questions: QuestionSet) -> Result<(), SessionError> {
        self.ensure_open()?;
        if self.question_set.is_some() {
            return Err(SessionError::AlreadyQuestioned);
        }
        self.question_set = Some(questions);
        self.advance(SessionState::Questioned);
        Ok(())
    }

    /// Replaces the stored answers atomically; nothing changes on error.
    pub fn submit_answers(&mut self, answers: AnswerSet) -> Result<(), SessionError> {
        self.ensure_open()?;
        let questions = self.question_set.as_ref().ok_or(SessionError::NotQuestioned)?;
        validate_answers(questions, &answers)?;
        self.answers = answers;
        self.advance(SessionState::Answered);
        Ok(())
    }

    pub fn set_preferences(&mut self, preferences: ReplyPreferences) -> Result<(), SessionError> {
        self.ensure_open()?;
        self.preferences = preferences;
        Ok(())
    }

    /// Characters the user typed to steer generation: the free-text
    /// instruction plus every custom option.
    pub fn prompt_char_count(&self) -> u64 {
        let added: Vec<&str> = self
            .answers
            .iter()
            .flat_map(|a| a.custom_options.iter().map(String::as_str))
            .collect();
        prompt_char_count(char_len(&self.preferences.free_instruction) as u64, &added)
    }

    pub fn finalize(
        &mut self,
        final_text: impl Into<String>,
        now: DateTime<Utc>,
    ) -> Result<MetricsRecord, SessionError> {
        self.ensure_open()?;
        let final_text = final_text.into();
        if final_text.trim().is_empty() {
            return Err(SessionError::EmptyFinalText);
        }
        if self.state < SessionState::Answered {
            return Err(SessionError::NotReady);
        }
        let now = now.max(self.opened_at);
        let elapsed = (now - self.opened_at)
            .to_std()
            .map(|d| d.as_secs_f64())
            .unwrap_or_default()
            .max(MIN_ELAPSED_SECONDS);
        let record = MetricsRecord {
            condition: Condition::QaBased,
            final_char_count: char_len(&final_text) as u64,
            elapsed_seconds: elapsed,
            prompt_char_count: self.prompt_char_count(),
        };
        self.final_text = Some(final_text);
        self.finalized_at = Some(now);
        self.advance(SessionState::Finalized);
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Answer, Question, QuestionSource};
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t(secs: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + secs, 0).unwrap()
    }

    fn session() -> Session {
        let email = EmailMessage {
            subject: "s".into(),
            sender_name: "a".into(),
            sender_address: "a@x".into(),
            body: "Can you come? Please reply.".into(),
            thread: vec![],
            received_at: None,
        };
        Session::new("sid", email, UserIdentity::new("u", "u@x"), t(0))
    }

    fn questions() -> QuestionSet {
        QuestionSet {
            questions: vec![
                Question::new("1", "Can you come?", vec!["Yes".into(), "No".into()], "Can you come?"),
                Question::new("2", "Reply?", vec!["Yes".into(), "No".into()], "Please reply."),
            ],
            source: QuestionSource::Mock,
            raw_response: String::new(),
        }
    }

    #[test]
    fn happy_path_produces_metrics() {
        let mut s = session();
        s.attach_questions(questions()).unwrap();
        assert_eq!(s.state, SessionState::Questioned);
        s.submit_answers(vec![Answer::select("1", [0]).with_custom("by bus")].into())
            .unwrap();
        s.preferences.free_instruction = "Keep it short".into();
        let text = "x".repeat(300);
        let record = s.finalize(text, t(150)).unwrap();
        assert_eq!(record.final_char_count, 300);
        assert_eq!(record.elapsed_seconds, 150.0);
        assert_eq!(record.prompt_char_count, 13 + 6);
        assert_eq!(record.condition, Condition::QaBased);
        assert_eq!(s.state, SessionState::Finalized);
        assert_eq!(s.finalize("again", t(200)), Err(SessionError::AlreadyFinalized));
    }

    #[test]
    fn rejected_answers_leave_previous_ones() {
        let mut s = session();
        s.attach_questions(questions()).unwrap();
        s.submit_answers(vec![Answer::select("1", [1])].into()).unwrap();
        let err = s.submit_answers(vec![Answer::select("1", [0]), Answer::select("2", [5])].into());
        assert!(matches!(
            err,
            Err(SessionError::Answer(AnswerError::IndexOutOfRange { index: 5, .. }))
        ));
        assert_eq!(s.answers, vec![Answer::select("1", [1])].into());
        s.submit_answers(vec![Answer::select("1", [0])].into()).unwrap();
        assert_eq!(s.answers, vec![Answer::select("1", [0])].into());
    }

    #[test]
    fn finalize_preconditions() {
        let mut s = session();
        assert_eq!(s.finalize("hi", t(1)), Err(SessionError::NotReady));
        s.attach_questions(questions()).unwrap();
        assert_eq!(s.finalize("  ", t(1)), Err(SessionError::EmptyFinalText));
        assert_eq!(s.attach_questions(questions()), Err(SessionError::AlreadyQuestioned));
        assert_eq!(s.submit_answers(AnswerSet::default()), Ok(()));
        let record = s.finalize("hi", t(0)).unwrap();
        assert_eq!(record.elapsed_seconds, MIN_ELAPSED_SECONDS);
        assert!(s.finalized_at.unwrap() >= s.opened_at);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Attach,
        Answer(usize),
        Prefs,
        Finalize,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            Just(Op::Attach),
            (0usize..4).prop_map(Op::Answer),
            Just(Op::Prefs),
            Just(Op::Finalize),
        ]
    }

    proptest! {
        #[test]
        fn state_never_moves_backward(ops in proptest::collection::vec(op(), 0..30)) {
            let mut s = session();
            let mut last = s.state;
            for (i, op) in ops.into_iter().enumerate() {
                let _ = match op {
                    Op::Attach => s.attach_questions(questions()),
                    Op::Answer(idx) => s.submit_answers(vec![Answer::select("1", [idx])].into()),
                    Op::Prefs => s.set_preferences(ReplyPreferences::default()),
                    Op::Finalize => s.finalize("done", t(i as i64)).map(|_| ()),
                };
                prop_assert!(s.state >= last);
                last = s.state;
                if let Some(fin) = s.finalized_at {
                    prop_assert!(fin >= s.opened_at);
                }
            }
        }
    }
}
