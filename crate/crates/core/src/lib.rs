//! Experimental toolkit for the 3x+k maps `T_k(n) = (3n+k)/2` (n odd),
//! `n/2` (n even), `k ≡ ±1 (mod 6)`.
//!
//! - [`map`]: the map, its inverse, bounded forward iteration
//! - [`cycles`]: cycle search and attractor classification
//! - [`inverse`]: backward orbits, trichotomy verdicts, partition refinement
//! - [`residue`]: residue classes mod `|k|` under ×2 and ×3
//! - [`verdicts`]: rationality windows, zero-pattern detection, natural
//!   boundary certificates and the exceptional-set search
//! - [`genfun`]: exact rational generating functions
//! - [`census`] and [`cache`]: membership census, persistence and encodings

pub mod cache;
pub mod census;
pub mod cycles;
pub mod error;
pub mod exec;
pub mod genfun;
pub mod inverse;
pub mod map;
pub mod poly;
pub mod residue;
pub mod verdicts;

pub use cycles::{Cycle, CycleId, CycleSet, Domain};
pub use error::{OrbitError, Result};
pub use exec::Execution;
pub use inverse::{enumerate_backward, trichotomy, OrbitSample, Relation};
pub use map::{inverse_step, iterate, t_apply, MapParam, Trajectory, TrajectoryOutcome};
