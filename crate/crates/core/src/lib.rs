//! S¹-equivariant Morse cohomology of closed embedded manifolds with a circle
//! action, computed over Z2[T] from numerically counted gradient flow lines
//! and jumping flow lines.

pub mod error;
pub mod geometry;
pub mod z2t;

pub use error::{Error, Result};
pub mod equivariant;
pub mod export;
pub mod flow;
pub mod jump;
pub mod morse;
pub mod pipeline;
pub mod scenario;
