//! Direct and inverse spectral problems for canonical systems with rational
//! dependence on the spectral parameter, and their sine-Gordon application.

pub mod error;
pub mod linalg;
pub mod model;
pub mod direct;
pub mod snode;
pub mod presets;
pub mod inverse;
pub mod sgordon;

pub use error::{Error, Result};
pub use linalg::{Mat2, C64};
pub use model::{gauge_q, GridSpec, PoleSet, PotentialField, Row, SpectralPoint};
