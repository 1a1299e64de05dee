//! Spiking neural P systems, a linear-function construction on top of them,
//! and a private evaluation protocol that runs that construction over
//! ElGamal ciphertext components.

pub mod dsl;
pub mod elgamal;
pub mod linfun;
pub mod numtheory;
pub mod protocol;
pub mod selftest;
pub mod snp;
