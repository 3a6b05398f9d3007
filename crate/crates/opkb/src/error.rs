use std::path::Path;

use thiserror::Error;

pub type Result<T, E = Failure> = std::result::Result<T, E>;

/// Pipeline failure, classified by the exit status it maps to.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Failure::Data(msg.into())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Failure::Data(format!("{}: {err}", path.display()))
    }

    /// A core error raised while reading `what`; always a data error unless
    /// the values are non-finite.
    pub fn in_data(what: impl std::fmt::Display, err: opkb_core::Error) -> Self {
        match err {
            opkb_core::Error::NonFinite(_) => Failure::Numerical(format!("{what}: {err}")),
            _ => Failure::Data(format!("{what}: {err}")),
        }
    }
}

impl From<opkb_core::Error> for Failure {
    fn from(err: opkb_core::Error) -> Self {
        use opkb_core::Error as E;
        match err {
            E::NonFinite(_) => Failure::Numerical(err.to_string()),
            E::InvalidArgument(_) => Failure::Config(err.to_string()),
            _ => Failure::Data(err.to_string()),
        }
    }
}
