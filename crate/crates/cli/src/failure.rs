use std::fmt;

use fieldmap::Error;

/// A failed command, classified by the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Output(String),
    Input(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Output(_) => 3,
            Failure::Input(_) => 4,
        }
    }

    /// Reading a config file: unreadable is an input problem, anything else
    /// is a config problem.
    pub fn config(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Input(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }

    pub fn input(e: Error) -> Self {
        Failure::Input(e.to_string())
    }

    pub fn output(e: Error) -> Self {
        Failure::Output(e.to_string())
    }

    /// Errors raised while processing already-loaded inputs.
    pub fn stage(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            Error::MissingInput(_)
            | Error::FrameMismatch(_)
            | Error::NoGroundTruth
            | Error::MissingGroundTruth(_)
            | Error::Io { .. }
            | Error::Parse { .. } => Failure::Input(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Output(m) => write!(f, "cannot write output: {m}"),
            Failure::Input(m) => write!(f, "cannot read input: {m}"),
            Failure::Runtime(m) => write!(f, "{m}"),
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;
