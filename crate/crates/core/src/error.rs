use std::fmt;

use thiserror::Error;

/// The eight bit streams of a partition, in on-disk order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamId {
    /// Matching position guide array.
    MaPGA,
    /// Matching position array.
    MaPA,
    /// Mismatch position guide array (also carries counts and indel flags).
    MPGA,
    /// Mismatch position array (also carries count payloads and indel lengths).
    MPA,
    /// Mismatching base and type array.
    MBTA,
    /// Per-read flags: literal escape, rev, chimeric, corner.
    RFlags,
    /// Original read index, fixed width (preserve-order mode only).
    Order,
    /// Whole reads stored verbatim (unmappable or N-containing).
    Literals,
}

impl StreamId {
    pub const ALL: [StreamId; 8] = [
        StreamId::MaPGA,
        StreamId::MaPA,
        StreamId::MPGA,
        StreamId::MPA,
        StreamId::MBTA,
        StreamId::RFlags,
        StreamId::Order,
        StreamId::Literals,
    ];

    pub const COUNT: usize = 8;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamId::MaPGA => "MaPGA",
            StreamId::MaPA => "MaPA",
            StreamId::MPGA => "MPGA",
            StreamId::MPA => "MPA",
            StreamId::MBTA => "MBTA",
            StreamId::RFlags => "rflags",
            StreamId::Order => "order_idx",
            StreamId::Literals => "literals",
        }
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in record {record}: {message}")]
    Parse { record: u64, message: String },

    #[error("FASTA error: {0}")]
    Fasta(String),

    #[error("alignment error: {0}")]
    Align(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("class scheme error: {0}")]
    Scheme(String),

    #[error("corrupt {stream} stream at bit {bit_offset}: {message}")]
    Corrupt {
        stream: StreamId,
        bit_offset: u64,
        message: String,
    },

    #[error("checksum mismatch in partition {partition}")]
    Checksum { partition: usize },

    #[error("not a container file (bad magic)")]
    BadMagic,

    #[error("unsupported container version {found} (this build reads version {supported})")]
    Version { found: u8, supported: u8 },

    #[error("consensus digest mismatch: container expects {expected}, supplied consensus hashes to {found}")]
    ConsensusMismatch { expected: String, found: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("streaming audit failed: {0}")]
    Audit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn corrupt(stream: StreamId, bit_offset: u64, message: impl Into<String>) -> Self {
        Error::Corrupt {
            stream,
            bit_offset,
            message: message.into(),
        }
    }

    /// Process exit code for this error class: parse=2, align=3, format=4, io=5.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Fasta(_) => 2,
            Error::Align(_) => 3,
            Error::Io(_) => 5,
            _ => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
