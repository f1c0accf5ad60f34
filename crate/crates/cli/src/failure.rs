//! Exit-code classification: 1 for bad input or usage, 2 for host failures.

use std::fmt;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Input,
    Infrastructure,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            kind: Kind::Input,
            error: error.into(),
        }
    }

    pub fn infra(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            kind: Kind::Infrastructure,
            error: error.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self.kind {
            Kind::Input => ExitCode::from(1),
            Kind::Infrastructure => ExitCode::from(2),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<passweight::Error> for Failure {
    fn from(e: passweight::Error) -> Self {
        use passweight::Error as E;
        match e {
            E::Infrastructure(_) | E::NonFinite(_) => Failure::infra(e),
            _ => Failure::input(e),
        }
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

/// Attaches context to library and I/O errors while keeping their class.
pub trait Context<T> {
    fn input_ctx(self, msg: impl FnOnce() -> String) -> CmdResult<T>;
    fn infra_ctx(self, msg: impl FnOnce() -> String) -> CmdResult<T>;
}

impl<T, E> Context<T> for std::result::Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn input_ctx(self, msg: impl FnOnce() -> String) -> CmdResult<T> {
        self.map_err(|e| Failure::input(e.into().context(msg())))
    }

    fn infra_ctx(self, msg: impl FnOnce() -> String) -> CmdResult<T> {
        self.map_err(|e| Failure::infra(e.into().context(msg())))
    }
}

/// Library errors with extra context, classified by their variant.
pub fn lib_ctx<T>(r: passweight::Result<T>, msg: impl FnOnce() -> String) -> CmdResult<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.error = f.error.context(msg());
        f
    })
}
