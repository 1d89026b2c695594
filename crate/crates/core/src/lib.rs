//! Exact, truncated computations with completed differential operators on
//! `p`-adic polydisks: level-norm operator algebras, Spencer and de Rham
//! complexes, side-changing, tensor and duality, Kashiwara push/pull, smooth
//! pullback, Čech complexes, left-heart strictness diagnostics, and the
//! constructive Mittag-Leffler preimage for pre-nuclear towers.

pub mod diffop;
pub mod dmods;
pub mod error;
pub mod functors;
pub mod homalg;
pub mod linalg;
pub mod padic;
pub mod sample;
pub mod tate;
mod text;

pub use error::{Error, Result};
pub use padic::{GlobalField, LogNorm, Prime, Scalar, Valuation};
pub use tate::{MultiIndex, TateSeries};
