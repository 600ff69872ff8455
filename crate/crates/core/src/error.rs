use thiserror::Error;

use crate::contexts::ContextError;
use crate::cwpds::SolverError;
use crate::model::ModelError;
use crate::permgen::PermGenError;
use crate::policygen::PolicyParseError;
use crate::weights::WeightError;

/// Umbrella error for the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    PermGen(#[from] PermGenError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    PolicyParse(#[from] PolicyParseError),
}

impl Error {
    /// True when the failure is a resource cap rather than bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::Weight(WeightError::TupleCapExceeded { .. })
                | Error::Solver(SolverError::Weight(WeightError::TupleCapExceeded { .. }))
                | Error::Solver(SolverError::IterationCap { .. })
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
