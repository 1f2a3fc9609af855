//! Parametric reduced-order modeling of unsteady aerodynamic responses.
//!
//! The toolkit identifies linear and higher-order diagonal Volterra kernels
//! from step-type response data, interpolates the kernel coefficients
//! across a (Mach, alpha_0) parameter space with Gaussian-process and
//! neural-network regressors, and reconstructs step and harmonic responses
//! at unseen parameter points. A synthetic aerodynamic plant ships as a
//! self-contained data generator and verification oracle.

pub mod convmat;
pub mod error;
pub mod fcnn;
pub mod gpr;
pub mod identification;
pub mod laguerre;
pub mod linalg;
mod optimize;
pub mod pipeline;
pub mod sampling;
pub mod signals;
pub mod synthaero;

pub use error::{Result, RomError};
pub use identification::KernelSet;
pub use signals::{TimeGrid, TimeSignal};
pub use synthaero::{ParameterPoint, PlantConfig};
