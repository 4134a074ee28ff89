//! Module-valued coherent states over matrix C*-algebras.

pub mod cstar;
pub mod cuntz;
pub mod dilation;
pub mod engine;
pub mod error;
pub mod families;
pub mod module;
pub mod quadrature;
pub mod suite;

pub use cstar::{CMatrix, CStarMatrix, SpectralTolerance, C64};
pub use error::{Error, Result};
pub use module::{Frame, ModuleElement, ModuleSpace};
pub use quadrature::{Node, QuadratureRule};
