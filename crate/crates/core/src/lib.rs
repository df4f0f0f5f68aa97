//! Reaction networks simulated three ways: the exact jump process, its
//! large-volume ODE limit, and a hybrid piecewise-deterministic process.

pub mod conservation;
pub mod dsl;
pub mod ensemble;
pub mod error;
pub mod kinetics;
pub mod models;
pub mod network;
pub mod ode;
pub mod partition;
pub mod pdmp;
pub mod rng;
pub mod ssa;
pub mod table;

pub use dsl::{parse_model, serialize_model, validate_model, Diagnostic, ModelDocument, Severity};
pub use error::{ModelError, SimError};
pub use kinetics::{Kinetics, ScaledNetwork};
pub use network::{NetworkBuilder, ReactionNetwork, ReactionSpec, SystemState};
pub use ode::{simulate_ode, IntegratorConfig};
pub use partition::{classify_reactions, Partition, ReactionClass};
pub use pdmp::{simulate_pdmp, HybridModel, PdmpConfig};
pub use ssa::{simulate_ssa, SsaOptions};
pub use table::{uniform_grid, SampleTable};
