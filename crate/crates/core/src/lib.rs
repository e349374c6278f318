//! Hybrid classical/adiabatic factoring of odd, square-free bi-primes.
//!
//! The pipeline lays out the binary multiplication table for a candidate
//! bit-length split, reduces the column equations classically, compiles what
//! is left into a diagonal spin Hamiltonian and finds its ground state by a
//! simulated adiabatic sweep. The sweep can be exported as an OpenQASM 2.0
//! circuit and read out through simulated single-qubit tomography.

pub mod adia;
pub mod bitplan;
pub mod gatedec;
pub mod hamcomp;
pub mod pipeline;
pub mod poly;
pub mod reducer;
pub mod tomo;
