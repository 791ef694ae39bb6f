//! The XOR grid as a linear code over GF(2).

pub mod bitmatrix;
pub mod erasure;
pub mod hk;

pub use bitmatrix::{f2_rank, f2_solve, BitMatrix, BitVector, SolveOutcome};
pub use erasure::{
    erasure_mc_error_bound, erasure_ml_fails, failure_witness, ErasureEstimate, ErasurePattern,
};
pub use hk::{
    binom_parity, build_hk, check_omega, omega, Edge, EdgeIndex, EdgeSlot, ParityCheck,
    MAX_HK_LEVEL,
};
