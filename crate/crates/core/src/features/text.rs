use std::io::Write;
use std::process::{Command, Stdio};

/// English stoplist applied before topic modeling.
pub const STOPWORDS: [&str; 40] = [
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "he", "in", "is", "it",
    "its", "of", "on", "that", "the", "to", "was", "were", "will", "with", "this", "or", "not",
    "but", "can", "you", "your", "we", "our", "all", "also", "into", "which", "use", "using",
];

/// Lowercase, split on non-alphanumerics, drop short tokens and stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2 && !STOPWORDS.contains(t))
        .map(str::to_string)
        .collect()
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Maps free text into the comparison language before measuring it.
pub trait TextTranslator: Send + Sync {
    fn translate(&self, text: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl TextTranslator for IdentityTranslator {
    fn translate(&self, text: &str) -> String {
        text.to_string()
    }
}

/// Pipes each text through an external command (stdin → stdout). On any
/// failure the original text is kept.
#[derive(Debug, Clone)]
pub struct CommandTranslator {
    program: String,
    args: Vec<String>,
}

impl CommandTranslator {
    /// Splits `cmd` on whitespace into program and arguments.
    pub fn parse(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(CommandTranslator {
            program,
            args: parts.collect(),
        })
    }

    fn run(&self, text: &str) -> std::io::Result<String> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(text.as_bytes())?;
        let out = child.wait_with_output()?;
        if !out.status.success() {
            return Err(std::io::Error::other(format!("translator exited with {}", out.status)));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim_end_matches('\n').to_string())
    }
}

impl TextTranslator for CommandTranslator {
    fn translate(&self, text: &str) -> String {
        match self.run(text) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("translator `{}` failed: {e}", self.program);
                text.to_string()
            }
        }
    }
}
