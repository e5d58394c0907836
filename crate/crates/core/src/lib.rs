//! Explicit-state model checking of Markov decision processes: qualitative
//! preprocessing, value iteration, optimistic value iteration, policy
//! iteration and linear programming, solved monolithically or one strongly
//! connected component at a time.

pub mod cli;
pub mod engine;
pub mod gen;
pub mod graph;
pub mod io;
pub mod lp;
pub mod model;
pub mod numeric;
pub mod pi;
pub mod result;
pub mod system;
pub mod topo;
pub mod vi;
