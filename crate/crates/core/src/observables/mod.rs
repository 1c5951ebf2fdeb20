//! Measurements on circuits and chains.

pub mod entropy;
pub mod lrb;
pub mod spectrum;
pub mod tails;
pub mod telescopic;
pub mod timeavg;

pub use entropy::{
    circuit_eigenstate, circuit_entropies, entanglement_entropy, spectrum_entropies, swap_extremal_state, EntropySample,
    EntropyScan,
};
pub use lrb::{log_times, lrb_commutator, FrontFits, LightconeGrid, LrbOptions};
pub use spectrum::Spectrum;
pub use tails::{collar_bound, tail_profile, TailOptions, TailProfile};
pub use telescopic::{telescopic_decompose, TelescopicDecomposition, TelescopicNorms};
pub use timeavg::{
    collar_hamiltonian, finite_average_dense, infinite_average_dense, patch_commutators, split_into_patches,
    time_average_finite, time_average_infinite, PatchReport,
};
