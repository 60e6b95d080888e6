//! Exit codes: 0 success, 1 usage, 2 data, 3 numerical failure.

use std::fmt;

use gesture_dbn::Error;

pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: USAGE, msg: msg.into() }
}

pub fn data(msg: impl Into<String>) -> Failure {
    Failure { code: DATA, msg: msg.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) => USAGE,
            Error::Numeric(_) => NUMERIC,
            _ => DATA,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        data(e.to_string())
    }
}

/// Attaches what was being done when `r` failed, keeping its exit code.
pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn context(self, what: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| {
            let f = e.into();
            Failure { code: f.code, msg: format!("{what}: {}", f.msg) }
        })
    }
}
