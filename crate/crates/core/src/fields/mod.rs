//! Periodic grid, spectral and physical velocity fields, transforms, Leray
//! projection, norms and binary snapshots.

mod grid;
mod physical;
pub mod snapshot;
mod spectral;
mod transform;

pub use grid::{PeriodicGrid, DEFAULT_DEALIAS_FRACTION};
pub use physical::PhysicalField;
pub use spectral::{CVec3, SpectralField};

pub(crate) use transform::{scalars_to_physical, scalars_to_spectral};
