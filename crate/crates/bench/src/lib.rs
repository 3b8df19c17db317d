//! Benchmark-only crate; see `benches/simulation.rs`. The ensemble runner is
//! the performance-critical path, so its hot pieces (single step, trajectory
//! loop, metrics) are tracked individually.
