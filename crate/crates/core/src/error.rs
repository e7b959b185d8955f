use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("graph is not connected")]
    Disconnected,
    #[error("vertex {vertex} has degree {degree}, above the bound {bound}")]
    DegreeBound {
        vertex: u32,
        degree: usize,
        bound: usize,
    },
    #[error("size limit exceeded: {what} is {value}, limit {limit}")]
    SizeLimit {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("two rings at the same instant {time} near site {site}")]
    SimultaneousRings { time: f64, site: String },
    #[error("particles must be distinct")]
    RepeatedParticles,
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
