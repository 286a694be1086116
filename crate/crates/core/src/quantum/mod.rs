//! States, channels, distances, entropies and physicality projections.

pub mod channel;
pub mod entropy;
pub mod projection;
pub mod random;
pub mod state;

pub use channel::{reshuffle, reshuffle_inverse, ChoiMatrix, SuperoperatorMatrix};
pub use entropy::{entropies, relative_entropy, trace_distance, von_neumann_entropy, Entropies};
pub use projection::{project_choi_cptp, project_state_physical};
pub use state::{
    bloch_of, devectorize, partial_trace, partial_trace_bipartite, reduce_qubits, vectorize,
    DensityMatrix, Ket, Subsystem,
};
