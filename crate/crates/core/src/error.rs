use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical blow-up at node {node}{}{}", fmt_time(.time), fmt_stage(.stage))]
    Blowup {
        node: usize,
        time: Option<f64>,
        stage: Option<usize>,
    },

    #[error("thin-film height {value:e} at node {node} fell below the positivity floor {floor:e}")]
    Positivity { node: usize, value: f64, floor: f64 },

    #[error("pressure law evaluated outside its domain: tau = {tau} at node {node}")]
    Domain { node: usize, tau: f64 },

    #[error("{name}({value}) is undefined outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("degenerate shock: left and right states are both {0}")]
    DegenerateShock(f64),

    #[error("unresolved wave structure: {0}")]
    Unresolved(String),

    #[error("run aborted at t = {time} after {snapshots} snapshot(s): {source}")]
    Aborted {
        time: f64,
        snapshots: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_time(t: &Option<f64>) -> String {
    t.map(|t| format!(", t = {t}")).unwrap_or_default()
}

fn fmt_stage(s: &Option<usize>) -> String {
    s.map(|s| format!(", stage {s}")).unwrap_or_default()
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// The innermost error, looking through [`Error::Aborted`].
    pub fn root(&self) -> &Error {
        match self {
            Error::Aborted { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_)
            | Error::OutOfRange { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 1,
            Error::Unresolved(_) => 3,
            _ => 2,
        }
    }
}
