use thiserror::Error;

use crate::crystal::CrystalError;
use crate::ed::EdError;
use crate::lightforce::CouplingError;
use crate::phonons::PhononError;
use crate::spinphonon::DynamicsError;

/// Any failure raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Crystal(#[from] CrystalError),
    #[error(transparent)]
    Phonon(#[from] PhononError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Ed(#[from] EdError),
}
