use thiserror::Error;

use crate::case_io::CaseError;
use crate::dc::DcError;
use crate::grid::GridError;
use crate::milp::MilpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Dc(#[from] DcError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}
