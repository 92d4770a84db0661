//! Persistent states of neural field equations with finite-rank
//! (Pincherle-Goursat) connectivity: multistart enumeration, pseudo-arclength
//! continuation in (λ, μ, ε), local bifurcation analysis and time integration.

pub mod bifurcation;
pub mod continuation;
pub mod dynamics;
pub mod eig;
pub mod error;
pub mod expr;
pub mod model;
pub mod model_zoo;
pub mod pg_kernel;
pub mod quadrature;
pub mod sigmoid;
pub mod stationary;

pub use error::{Error, Result};
pub use expr::Expr;
pub use model::{Bounds, FieldModel, Homotopy, Linearization, Param, ReducedState, Variant};
pub use pg_kernel::{Eigenpair, PGKernel, SpectrumReport};
pub use quadrature::QuadratureGrid;
pub use sigmoid::Nonlinearity;
pub use nalgebra::{Complex, DMatrix, DVector};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
