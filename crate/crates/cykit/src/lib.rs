//! Exact symbolic computation for differential graded categories presented
//! by finite graded quivers: standard bimodule resolutions, duals with sign
//! formulas, X-complexes and the lifted Connes operator, (deformed, relative,
//! localized) Calabi-Yau completions, Baues-Lemaire cylinders, perversely
//! thickened categories, and bounded-degree exact homology checks.
//!
//! No floating point anywhere: coefficients are exact rationals, with a
//! prime-field mode for large linear-algebra runs.

pub mod error;
pub mod scalar;
pub mod quiver;
pub mod expr;
pub mod pres;
pub mod parse;
pub mod bimod;
pub mod hoch;
pub mod bar;
pub mod cycomp;
pub mod cyl;
pub mod hlin;
pub mod topo;
pub mod report;
pub mod par;

pub use error::CykError;
