use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("arm index {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("budget too small: {0}")]
    BudgetTooSmall(String),

    #[error("arm {arm} has no pulls in stage {stage}; its stage mean is undefined")]
    UnpulledArm { arm: usize, stage: usize },

    #[error("cannot keep {keep} of {available} arms")]
    InvalidKeep { keep: usize, available: usize },

    #[error("variance bound undefined: {pulls} pulls, need pulls - 1 > 4 log(1/delta) = {threshold:.6}")]
    VarianceBoundUndefined { pulls: u64, threshold: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0} contains no data")]
    EmptyInput(PathBuf),

    #[error("singular normal equations while solving for {0}")]
    SingularSystem(String),

    #[error("could not draw an instance with a unique best arm after {0} attempts")]
    ResampleLimit(usize),

    #[error("run {run} of {algorithm} (K={arms}, n={budget}) failed: {source}")]
    Run {
        algorithm: String,
        arms: usize,
        budget: u64,
        run: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
