//! Numerical laboratory for the subcritical fourth-order equation
//!
//! ```text
//! ε⁴Δ²u − ε²b Δu + a u = (u⁺)^q   on a flat torus Tⁿ
//! ```
//!
//! arising from the constant Q-curvature problem on Riemannian products
//! `(M × X, g + ε²h)` with an Einstein fiber. The crate covers the product
//! coefficients, a Fourier-spectral calculus on tori, the Nehari-constrained
//! energy and its exact radial projection, the limit ground state on `Rⁿ`
//! (approximated on a large periodic box), the photography map, multistart
//! search for positive solutions, and concentration / center-of-mass
//! diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod functional;
pub mod grid;
pub mod groundstate;
pub mod io;
pub mod solver;

pub use coefficients::{BaseKind, GeometryConstants, ProductSpec};
pub use error::{Error, Result};
pub use functional::{EnergyParams, LinearCoefficients, NehariPoint};
pub use grid::{Field, TorusGrid, TorusPoint};
pub use groundstate::{GroundState, GroundStateProblem};
pub use solver::{Seed, Solution, SolverConfig};
