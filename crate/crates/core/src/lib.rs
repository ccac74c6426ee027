//! Replica-permutation toolkit for out-of-time-order correlators in brickwork
//! circuits coupled to a chaotic bath.

pub mod channel;
pub mod circuit;
pub mod eth;
pub mod experiments;
pub mod gates;
pub mod ncperm;
pub mod replica;
pub mod spacetime;
pub mod spectral;
mod tensor;

pub use num_complex::Complex64 as C64;
