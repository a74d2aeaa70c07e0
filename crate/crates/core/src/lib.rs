//! Stein and zero-bias couplings for isolated vertices in `ER(n, m)` and for
//! the alpha-content of a Jack-distributed partition.

pub mod er_model;
pub mod exactnum;
pub mod jack_model;
pub mod normal;
pub mod rng;
pub mod stein_core;
