//! `qareply`: file-in/file-out question generation, drafting, metrics
//! reporting, and a local session-service launcher.

mod config;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use qareply_core::gateway::LiveProvider;
use qareply_core::metrics::{read_csv, summarize};
use qareply_core::questions::parse_llm_questions;
use qareply_core::{
    generate_draft, generate_questions, parse_json_email, parse_mail_file, validate_question_set, AnswerSet,
    CompletionProvider, DraftError, EmailMessage, MockProvider, ProviderConfig, QuestionError, QuestionSet,
    ReplyPreferences, Session, SessionError, UserIdentity,
};
use qareply_service::persist::ENV_STORE_KEY;
use qareply_service::{serve, AppState, EncryptedDir, StoreMode, SystemClock};
use thiserror::Error;

use crate::config::{FileConfig, OutputFormat, ProviderKind};

#[derive(Debug, Parser)]
#[command(name = "qareply", version, about = "Question-driven email reply assistant")]
struct Cli {
    /// Completion provider; `mock` needs no credentials.
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Pretty)]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate anchored multiple-choice questions for an email.
    Questions {
        #[command(flatten)]
        email: EmailArgs,
        #[command(flatten)]
        user: UserArgs,
        /// Write the question set JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a reply draft from questions, answers, and preferences.
    Draft {
        #[command(flatten)]
        email: EmailArgs,
        #[command(flatten)]
        user: UserArgs,
        #[arg(long)]
        questions: PathBuf,
        /// JSON array of answers.
        #[arg(long)]
        answers: PathBuf,
        #[arg(long)]
        prefs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-condition efficiency and prompt-effort means from a records CSV.
    Metrics {
        #[arg(long)]
        records: PathBuf,
    },
    /// Run the HTTP session service until interrupted.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Keep encrypted session snapshots here (key from QAREPLY_STORE_KEY).
        #[arg(long)]
        store_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct EmailArgs {
    /// RFC 5322 message, or a JSON email payload with --json.
    #[arg(long)]
    email: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct UserArgs {
    #[arg(long, env = "QAREPLY_USER_NAME", default_value = "User")]
    user_name: String,
    #[arg(long, env = "QAREPLY_USER_ADDRESS", default_value = "")]
    user_address: String,
    /// Language of the audience, such as `en` or `ja`.
    #[arg(long)]
    locale: Option<String>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Provider(_) => 3,
            Self::Invalid(_) => 4,
        }
    }
}

impl From<QuestionError> for CliError {
    fn from(e: QuestionError) -> Self {
        match e {
            QuestionError::Prompt(_) => Self::Input(e.to_string()),
            QuestionError::Provider { .. } | QuestionError::Parse(_) => Self::Provider(e.to_string()),
            QuestionError::Validation(_) => Self::Invalid(e.to_string()),
        }
    }
}

impl From<DraftError> for CliError {
    fn from(e: DraftError) -> Self {
        match e {
            DraftError::Provider(_) | DraftError::EmptyReply => Self::Provider(e.to_string()),
            _ => Self::Invalid(e.to_string()),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        Self::Invalid(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(CliError::Input)?,
        None => FileConfig::default(),
    };
    let kind = cli.provider.or(file.provider).unwrap_or(ProviderKind::Live);
    let provider = make_provider(kind, file.llm.clone())?;
    match cli.command {
        Command::Questions { email, user, out } => {
            let email = load_email(&email, &file)?;
            let user = user.identity(&file);
            let generated = block_on(generate_questions(&email, &user, provider.as_ref(), &file.engine))?;
            eprintln!("prompt digest: {}", generated.prompt_digest);
            let json = to_json(&generated.questions);
            match out {
                Some(path) => write_file(&path, &json)?,
                None if cli.format == OutputFormat::Json => print(&json),
                None => print(&render_questions(&generated.questions, &email)),
            }
            Ok(())
        }
        Command::Draft {
            email,
            user,
            questions,
            answers,
            prefs,
            out,
        } => {
            let email = load_email(&email, &file)?;
            let mut session = Session::new("cli", email, user.identity(&file), chrono::Utc::now());
            let raw: QuestionSet = read_json(&questions).or_else(|_| {
                let text = read_text(&questions)?;
                parse_llm_questions(&text).map_err(|e| CliError::Input(format!("{}: {e}", questions.display())))
            })?;
            let source = raw.source;
            let mut set =
                validate_question_set(raw, &session.email, &file.engine).map_err(QuestionError::Validation)?;
            set.source = source;
            session.attach_questions(set)?;
            session.submit_answers(read_json::<AnswerSet>(&answers)?)?;
            if let Some(path) = prefs {
                session.set_preferences(read_json::<ReplyPreferences>(&path)?)?;
            }
            let draft = block_on(generate_draft(
                &mut session,
                provider.as_ref(),
                &file.engine,
                chrono::Utc::now(),
            ))?;
            eprintln!("prompt digest: {}", draft.prompt_digest);
            let text = match cli.format {
                OutputFormat::Json => to_json(&draft),
                OutputFormat::Pretty => format!("{}\n", draft.text),
            };
            match out {
                Some(path) => write_file(&path, &text),
                None => {
                    print(&text);
                    Ok(())
                }
            }
        }
        Command::Metrics { records } => {
            let file =
                std::fs::File::open(&records).map_err(|e| CliError::Input(format!("{}: {e}", records.display())))?;
            let records = read_csv(file).map_err(|e| CliError::Input(e.to_string()))?;
            let summary = summarize(&records).map_err(|e| CliError::Input(e.to_string()))?;
            match cli.format {
                OutputFormat::Json => print(&to_json(&summary)),
                OutputFormat::Pretty => {
                    let mut out = format!(
                        "{:<12} {:>7} {:>22} {:>22}\n",
                        "condition", "records", "mean_chars_per_second", "mean_prompt_char_count"
                    );
                    for row in &summary {
                        out.push_str(&format!(
                            "{:<12} {:>7} {:>22.6} {:>22.6}\n",
                            row.condition.to_string(),
                            row.records,
                            row.mean_chars_per_second,
                            row.mean_prompt_char_count
                        ));
                    }
                    print(&out);
                }
            }
            Ok(())
        }
        Command::Serve { port, host, store_dir } => run_server(&host, port, store_dir, provider, &file),
    }
}

fn make_provider(kind: ProviderKind, llm: ProviderConfig) -> Result<Arc<dyn CompletionProvider>, CliError> {
    Ok(match kind {
        ProviderKind::Mock => Arc::new(MockProvider::default()),
        ProviderKind::Live => {
            Arc::new(LiveProvider::new(llm.with_env()).map_err(|e| CliError::Provider(e.to_string()))?)
        }
    })
}

impl UserArgs {
    fn identity(&self, file: &FileConfig) -> UserIdentity {
        let locale = self
            .locale
            .clone()
            .unwrap_or_else(|| file.engine.default_locale.clone());
        UserIdentity::new(&self.user_name, &self.user_address).with_locale(locale)
    }
}

fn block_on<F: std::future::Future>(future: F) -> F::Output {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .expect("runtime starts")
        .block_on(future)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_email(args: &EmailArgs, file: &FileConfig) -> Result<EmailMessage, CliError> {
    let raw = std::fs::read(&args.email).map_err(|e| CliError::Input(format!("{}: {e}", args.email.display())))?;
    let is_json = args.json || args.email.extension().is_some_and(|ext| ext == "json");
    let parsed = if is_json {
        let text =
            String::from_utf8(raw).map_err(|_| CliError::Input(format!("{}: not UTF-8", args.email.display())))?;
        parse_json_email(&text, &file.ingest)
    } else {
        parse_mail_file(&raw, &file.ingest)
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", args.email.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("domain types serialize");
    text.push('\n');
    text
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn print(text: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes());
    let _ = stdout.flush();
}

fn render_questions(set: &QuestionSet, email: &EmailMessage) -> String {
    let mut out = String::new();
    for q in &set.questions {
        out.push_str(&format!("[{}] {}\n", q.id, q.question));
        for (i, choice) in q.choices.iter().enumerate() {
            out.push_str(&format!("    {i}. {choice}\n"));
        }
        match q.anchor.and_then(|a| a.slice(&email.body).map(|s| (a, s))) {
            Some((a, text)) => out.push_str(&format!("    anchor {}+{}: {:?}\n", a.start, a.length, text)),
            None => out.push_str("    no anchor\n"),
        }
        for flag in &q.flags {
            out.push_str(&format!("    flag: {flag}\n"));
        }
    }
    out
}

fn run_server(
    host: &str,
    port: u16,
    store_dir: Option<PathBuf>,
    provider: Arc<dyn CompletionProvider>,
    file: &FileConfig,
) -> Result<(), CliError> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let mode = match store_dir {
        None => StoreMode::Ephemeral,
        Some(dir) => {
            let key = std::env::var(ENV_STORE_KEY)
                .map_err(|_| CliError::Input(format!("--store-dir requires {ENV_STORE_KEY}")))?;
            StoreMode::EncryptedFile(
                EncryptedDir::open_with_hex_key(dir, &key).map_err(|e| CliError::Input(e.to_string()))?,
            )
        }
    };
    let service = file.service.clone();
    let state = Arc::new(AppState::new(&service, provider, Arc::new(SystemClock), mode));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Input(e.to_string()))?;
    runtime.block_on(async move {
        let addr: SocketAddr = format!("{host}:{port}")
            .parse()
            .map_err(|e| CliError::Input(format!("{host}:{port}: {e}")))?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Input(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Input(e.to_string()))?;
        print(&format!("listening on http://{local}\n"));
        serve(listener, state, &service, shutdown_signal())
            .await
            .map_err(|e| CliError::Input(e.to_string()))
    })
}

async fn shutdown_signal() {
    let interrupt = tokio::signal::ctrl_c();
    #[cfg(unix)]
    {
        let mut terminate =
            tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("signal handler installs");
        tokio::select! {
            _ = interrupt => {}
            _ = terminate.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = interrupt.await;
    tracing::info!("shutdown requested");
}
