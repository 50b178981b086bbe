use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("vocabulary target size {0} is below the byte alphabet (256)")]
    VocabTooSmall(usize),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("cannot decode token ids: {0}")]
    Decode(String),
    #[error("invalid code dictionary entry: {0}")]
    Dictionary(String),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("patient record has no events")]
    EmptyRecord,
    #[error("event has no tokens")]
    EmptyEvent,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("AUPRC is undefined without positive labels")]
    NoPositives,
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("client {client}: {reason}")]
    Client { client: u32, reason: String },
    #[error("missing Local baseline for {0}")]
    MissingBaseline(String),
}
