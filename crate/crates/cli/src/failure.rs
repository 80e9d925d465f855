//! Error type carrying the process exit code.

use std::fmt;

/// Bad input, configuration or files.
pub const EXIT_INPUT: u8 = 2;
/// The computation itself failed.
pub const EXIT_COMPUTE: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    message: String,
}

pub type Outcome<T> = Result<T, Failure>;

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn compute(message: impl Into<String>) -> Self {
        Self { code: EXIT_COMPUTE, message: message.into() }
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn code_of(e: &dtex::Error) -> u8 {
    use dtex::Error::*;
    match e {
        Io { .. } | Image(_) | Parse(_) | DimensionMismatch { .. } | InvalidParameter(_) | InvalidScene(_)
        | UnsupportedNetwork(_) | Empty(_) => EXIT_INPUT,
        Shape(_) | DegenerateFit(_) | Diverged { .. } | MissingRegion(_) => EXIT_COMPUTE,
    }
}

/// Attaches context to library errors, keeping their exit class.
pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> Outcome<T>;
}

impl<T> Context<T> for dtex::Result<T> {
    fn context(self, what: impl fmt::Display) -> Outcome<T> {
        self.map_err(|e| Failure { code: code_of(&e), message: format!("{what}: {e}") })
    }
}
