use std::process::ExitCode;

use margin_sparse::{Error, ErrorClass};
use serde::Serialize;

pub type CliResult<T> = Result<T, CliError>;

/// A failure reported as JSON on stderr, with an exit code per class:
/// 2 usage, 3 data, 4 numerical.
#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Data,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Numerical,
            message: message.into(),
        }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self.class {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        })
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            schema: &'static str,
            error: Detail<'a>,
        }
        #[derive(Serialize)]
        struct Detail<'a> {
            class: &'static str,
            exit_code: u8,
            message: &'a str,
        }
        let (class, exit_code) = match self.class {
            ErrorClass::Usage => ("usage", 2),
            ErrorClass::Data => ("data", 3),
            ErrorClass::Numerical => ("numerical", 4),
        };
        let body = Body {
            schema: crate::commands::SCHEMA,
            error: Detail {
                class,
                exit_code,
                message: &self.message,
            },
        };
        serde_json::to_string(&body).unwrap_or_else(|_| format!("{{\"error\":{:?}}}", self.message))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            class: e.class(),
            message: e.to_string(),
        }
    }
}
