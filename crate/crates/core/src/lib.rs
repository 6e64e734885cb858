//! Numerical laboratory for scaled fractional Sobolev energies of planar
//! vector fields and their vortex limits.
//!
//! Everything lives on a uniform node-centred grid ([`Grid2`]). The main
//! pieces are:
//!
//! * [`riesz`]: truncated Riesz potentials and fractional gradients (FFT),
//! * [`energy`]: Gagliardo seminorms, the scaled energy `F_s`, Ginzburg–Landau
//!   terms and the potential/seminorm comparison chain,
//! * [`topology`]: Jacobians, currents and degrees,
//! * [`flatnorm`]: certified flat norms by min-cost flow,
//! * [`vortex`]: Dirac sums and the explicit vortex fields,
//! * [`lab`]: configurable experiments and reports.

pub mod constants;
pub mod energy;
mod error;
pub mod fft;
pub mod field;
pub mod flatnorm;
pub mod lab;
pub mod quadrature;
pub mod riesz;
pub mod topology;
pub mod vortex;

pub use constants::{bbm_weight, gamma_fn, make_params, FracParams};
pub use energy::EnergyBreakdown;
pub use error::{Error, Result};
pub use field::{DomainSpec, Grid2, S1Report, ScalarField, VectorField2};
pub use flatnorm::{FlatBall, FlatInput, FlatNormResult, FlatVariant};
pub use riesz::{FracGradField, Normalization, RieszKernel};
pub use topology::{DegreeReport, JacobianField};
pub use vortex::{DiracSum, RecoveryConfig};
