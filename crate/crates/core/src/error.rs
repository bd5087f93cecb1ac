use thiserror::Error;

/// Errors surfaced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema must have at least one column")]
    EmptySchema,

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("row has {got} values, schema expects {expected}")]
    RowArity { expected: usize, got: usize },

    #[error("{path}:{line}: {reason}")]
    Csv {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("target selectivity {selectivity} unachievable: {reason}")]
    Selectivity { selectivity: f64, reason: String },

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("keep column has {keep} entries for {rows} rows")]
    KeepLength { keep: usize, rows: usize },

    #[error("keep column drops a valid tuple at row {0}")]
    KeepInvariant(usize),

    #[error("join output size {left} x {right} overflows the row-count type")]
    JoinOverflow { left: usize, right: usize },

    #[error("SUM aggregate overflowed 64-bit range for group key {key}")]
    SumOverflow { key: i64 },

    #[error("plan node `{kind}` expects {expected} children, got {got}")]
    PlanArity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("a resizer may not be the plan root")]
    ResizerAtRoot,

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("no size information for operator {0}")]
    MissingSizes(String),

    #[error("observation series is empty")]
    EmptySeries,

    #[error("round search exceeded ceiling of {0}")]
    ExceedsCeiling(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
