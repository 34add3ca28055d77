//! Text front end: configuration and scenario files, the batch runner and
//! trace export.

mod document;
mod parse;
mod run;
mod scenario;

use std::fmt;

pub use document::{ConfigDocument, ConfiguredSession};
pub use parse::{list, parse_sections, Entry, Section};
pub use run::{export_trace, run, AssertionResult, Report, RunOutput};
pub use scenario::{Assertion, Bound, Check, Payload, PacketFilter, Quantifier, Scenario, ScenarioEvent, ScenarioEventKind};

/// A problem found in an input file. Line 0 means the file as a whole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }

    /// `file:line: message`.
    pub fn located(&self, file: &str) -> String {
        format!("{file}:{}: {}", self.line, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}
