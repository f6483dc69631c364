//! Bounded-degree network formation games.
//!
//! Every node buys `k` directed links and pays the weighted sum of its
//! shortest-path distances, with a fixed penalty for unreachable nodes.
//! The crate computes exact best responses, certifies pure Nash equilibria,
//! builds stable wirings for uniform games, runs best-response dynamics and
//! assembles the standard no-equilibrium gadgets.

pub mod graph;
pub mod game;
pub mod construct;
pub mod dynamics;
pub mod cayley;
pub mod gadgets;
pub mod formats;
pub mod experiment;

pub use game::{
    best_response, check_stability, cost_vector, is_stable, node_cost, residual_distances, social_cost,
    unstable_nodes, utopian_cost, utopian_cost_nk, BestResponse, Deviation, GameError, GameInstance, Stability,
};
pub use graph::{
    all_pairs_distances, diameter, eccentricity, hamiltonian_cycle, is_strongly_connected, reach, reach_all,
    single_source_distances, strongly_connected_components, Condensation, DistanceMatrix, DistanceRow, GraphError,
    NodeId, Wiring, UNREACHABLE,
};
