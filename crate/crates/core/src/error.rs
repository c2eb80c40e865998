use thiserror::Error;

pub type Result<T> = std::result::Result<T, FapError>;

#[derive(Debug, Error)]
pub enum FapError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("assignment is empty")]
    EmptyAssignment,

    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),

    #[error("frequency must be positive, got {0} MHz")]
    NonPositiveFrequency(f64),

    /// Transmitter of `source` and receiver of `victim` sit on the same spot.
    #[error("co-located nodes: tx of link {source_link} and rx of link {victim_link}")]
    CoLocatedNodes { source_link: u32, victim_link: u32 },

    #[error("degenerate mask: co-channel power integrates to zero")]
    DegenerateMask,

    #[error("unreachable NFD target {required_db:.3} dB (curve maximum {max_db:.3} dB){}", pair_suffix(.pair))]
    UnreachableTarget {
        required_db: f64,
        max_db: f64,
        pair: Option<(u32, u32)>,
    },

    #[error("graph has no live vertices")]
    EmptyGraph,

    #[error("unknown or removed vertex {0}")]
    UnknownVertex(usize),

    #[error("infeasible instance: link {link} blocked by neighbors {neighbors:?}")]
    Infeasible { link: u32, neighbors: Vec<u32> },

    #[error("all {0} replications were infeasible")]
    AllReplicationsInfeasible(usize),

    #[error("genome length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("placement failed: {0}")]
    PlacementFailure(String),

    #[error("{source_name}:{line}: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn pair_suffix(pair: &Option<(u32, u32)>) -> String {
    match pair {
        Some((i, j)) => format!(" for links ({i}, {j})"),
        None => String::new(),
    }
}

impl FapError {
    pub(crate) fn parse(source_name: &str, line: usize, msg: impl Into<String>) -> Self {
        FapError::Parse {
            source_name: source_name.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
