//! Numerical laboratory for Lorentzian geometry with Bakry-Emery-Ricci curvature.
//!
//! The crate computes `Ric_f^m = Ric + Hess f - (1/m) df ⊗ df` from a metric
//! field, integrates geodesics with parallel frames and Jacobi tensor fields
//! along them, and checks the resulting expansion, focusing and comparison
//! statements against closed-form and brute-force references.

pub mod comparison;
pub mod congruence;
pub mod jacobi;
pub mod manifold;
pub mod ode;
pub mod runner;
pub mod scenario;
