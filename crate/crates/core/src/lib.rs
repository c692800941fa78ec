//! Numerical input-to-state stability toolkit for coupled 1-D
//! reaction-diffusion systems.
//!
//! The crate is organised bottom-up: comparison functions ([`kfun`]), gain
//! operators and small-gain checks ([`gains`]), a method-of-lines simulator
//! ([`pde`]), Lyapunov certificates ([`lyapunov`]), runnable reproductions of
//! classical worked examples ([`examples`]) and the command-line front end
//! ([`cli`]).

pub mod certificate;
pub mod cli;
pub mod error;
pub mod examples;
pub mod gains;
pub mod kfun;
mod linalg;
pub mod lyapunov;
pub mod output;
pub mod pde;

pub use certificate::Certificate;
pub use error::{Error, Result};
pub use gains::{GainMatrix, OmegaPath};
pub use kfun::{KFun, KLFun};
pub use lyapunov::LyapunovFn;
