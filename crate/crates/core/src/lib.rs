pub mod algebra;
pub mod cli;
pub mod coupling;
pub mod exactnum;
pub mod hamiltonian;
pub mod quasichar;
pub mod rep;
pub mod wigner;
