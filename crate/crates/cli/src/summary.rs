//! Run summaries: a line-based `key = value` file echoing the configuration,
//! a content hash of the inputs, and per-operation results.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    /// The run completed but the mathematics says no (certificate failed,
    /// inequality violated, surgery not applicable).
    CertifiedFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::CertifiedFailure => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExitStatus::Success => "success",
            ExitStatus::CertifiedFailure => "certified_failure",
        }
    }
}

/// SHA-256 of `blob <len>\0<content>`.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    /// Configuration echo, without the output directory.
    pub config: Vec<(String, String)>,
    pub input_hash: String,
    /// Result lines, each `key = value`.
    pub results: Vec<String>,
    /// Written files and their content hashes, in write order.
    pub files: Vec<(String, String)>,
    pub status: ExitStatus,
    /// Seconds; kept out of [`RunSummary::render`] so reruns compare equal.
    pub wall_clock: f64,
}

impl RunSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k} = {v}");
        }
        let _ = writeln!(out, "input_hash = {}", self.input_hash);
        for line in &self.results {
            let _ = writeln!(out, "{line}");
        }
        for (name, hash) in &self.files {
            let _ = writeln!(out, "file.{name} = {hash}");
        }
        let _ = writeln!(out, "status = {}", self.status.as_str());
        let _ = writeln!(out, "exit_code = {}", self.status.code());
        out
    }

    /// Value of a result line by key.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.results.iter().find_map(|l| {
            let (k, v) = l.split_once(" = ")?;
            (k == key).then_some(v)
        })
    }
}
