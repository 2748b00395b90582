#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qareply"));
    cmd.env_remove("QAREPLY_API_KEY")
        .env_remove("QAREPLY_USER_NAME")
        .env_remove("QAREPLY_USER_ADDRESS")
        .env_remove("RUST_LOG");
    cmd
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

pub fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

/// A `qareply serve` child process with its output captured.
pub struct Server {
    pub child: Child,
    pub base: String,
    stdout: Arc<Mutex<String>>,
    stderr: Arc<Mutex<String>>,
    readers: Vec<JoinHandle<()>>,
}

fn drain(mut source: impl Read + Send + 'static, sink: Arc<Mutex<String>>) -> JoinHandle<()> {
    std::thread::spawn(move || {
        let mut buf = [0u8; 4096];
        while let Ok(n) = source.read(&mut buf) {
            if n == 0 {
                break;
            }
            sink.lock().unwrap().push_str(&String::from_utf8_lossy(&buf[..n]));
        }
    })
}

impl Server {
    /// Starts on an ephemeral port in `dir`, with TMPDIR and HOME inside it.
    pub fn start(dir: &Path, extra_args: &[&str], log_filter: &str) -> Self {
        let home = dir.join("home");
        let tmp = dir.join("tmp");
        std::fs::create_dir_all(&home).unwrap();
        std::fs::create_dir_all(&tmp).unwrap();
        let mut child = bin()
            .args(["--provider", "mock", "serve", "--port", "0"])
            .args(extra_args)
            .current_dir(dir)
            .env("HOME", &home)
            .env("TMPDIR", &tmp)
            .env("RUST_LOG", log_filter)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .expect("server starts");
        let mut out = BufReader::new(child.stdout.take().unwrap());
        let mut first = String::new();
        out.read_line(&mut first).unwrap();
        let base = first
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {first:?}"))
            .to_string();
        let stdout = Arc::new(Mutex::new(first.clone()));
        let stderr = Arc::new(Mutex::new(String::new()));
        let readers = vec![
            drain(out, stdout.clone()),
            drain(child.stderr.take().unwrap(), stderr.clone()),
        ];
        Self {
            child,
            base,
            stdout,
            stderr,
            readers,
        }
    }

    pub fn port(&self) -> u16 {
        self.base.rsplit(':').next().unwrap().parse().unwrap()
    }

    /// Sends SIGINT and waits; returns the exit code and all captured output.
    pub fn interrupt(mut self) -> (Option<i32>, String) {
        let status = Command::new("kill")
            .args(["-INT", &self.child.id().to_string()])
            .status()
            .unwrap();
        assert!(status.success());
        let code = self.child.wait().unwrap().code();
        for reader in self.readers.drain(..) {
            reader.join().unwrap();
        }
        let logs = format!("{}{}", self.stdout.lock().unwrap(), self.stderr.lock().unwrap());
        (code, logs)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
    }
}

/// Every file under `dir`, recursively.
pub fn all_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(next) = pending.pop() {
        for entry in std::fs::read_dir(next).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                pending.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files
}
