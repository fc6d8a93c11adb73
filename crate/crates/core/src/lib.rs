//! Symplectic Runge–Kutta stepping and backward error analysis for
//! semilinear Hamiltonian PDEs on the circle.

pub mod bea;
pub mod error;
pub mod fd;
pub mod hjet;
pub mod models;
pub mod ode;
pub mod quadrature;
pub mod rk;
pub mod series;
pub mod spectral;
pub mod tableau;

pub use error::{Error, Result};
