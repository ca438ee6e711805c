use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid deck size {0}: a deck needs at least one card")]
    InvalidDeckSize(usize),
    #[error("entries are not a permutation of 1..={0}")]
    NotAPermutation(usize),
    #[error("card {pick} is outside the deck 1..={n}")]
    PickOutOfRange { pick: u32, n: usize },
    #[error("index {index} is outside {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("test {kind} is not applicable: {reason}")]
    IncompatibleTest {
        kind: &'static str,
        reason: &'static str,
    },
    #[error("malformed selection sequence: {0}")]
    Parse(String),
    #[error("empty sample")]
    EmptySample,
    #[error("unknown {kind} tag {tag:?}")]
    UnknownTag { kind: &'static str, tag: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
