//! Steklov-type eigenvalues of the weighted Laplacian `Lu = Δu − ⟨∇φ, ∇u⟩`
//! on domains in Euclidean and hyperbolic space.
//!
//! The crate has two independent numerical routes:
//!
//! * [`radial`] solves the separated radial ODE on geodesic balls by
//!   shooting, which gives the ball eigenvalues to near machine accuracy;
//! * [`steklov2d`] and [`axisym3d`] discretize general planar and
//!   axisymmetric domains with P1 finite elements, reduce to the boundary
//!   (Dirichlet-to-Neumann Schur complement) and solve a dense pencil.
//!
//! [`verify`] combines both routes into isoperimetric reports: it matches
//! the weighted volume of a domain with a ball about the weight origin and
//! compares sums of reciprocal eigenvalues.

pub mod axisym3d;
pub mod error;
pub mod geometry;
pub mod mesh2d;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod sparse;
pub mod spectrum;
pub mod steklov2d;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Curvature, PropertyIReport, RadialWeight, SpaceForm, WeightTable};
pub use mesh2d::{Domain2D, DomainKind, TriMesh};
pub use radial::{GhProfile, RadialConfig, RadialSolution};
pub use spectrum::SteklovSpectrum;
pub use verify::{TestDomain, VerificationReport, VerifyConfig};
