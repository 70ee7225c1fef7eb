//! Joint partial/full charging and sub-class dispatching for a single service
//! zone of an autonomous electric mobility-on-demand fleet.
//!
//! The crate is organised around five pieces:
//!
//! * [`zone`] holds the domain types and the analytical flow and stability
//!   relations (per-class vehicle rates, effective service rates, queue
//!   stability, the fleet-rate bound).
//! * [`optimizer`] maximises the minimum response-rate margin over the
//!   charging vector `q` and the dispatch matrix `Π`, certifies candidates
//!   through KKT residuals, enumerates closed-form branch candidates and
//!   provides a brute-force grid oracle.
//! * [`policies`] builds the fixed baseline policies and the two optimised ones.
//! * [`simulator`] is a discrete-event simulation of the zone's queueing network.
//! * [`harness`] loads JSON experiment specs, runs sweeps and writes CSV.

pub mod error;
pub mod harness;
pub mod optimizer;
pub mod policies;
pub mod simulator;
pub mod zone;

pub use error::{Error, Result};
pub use optimizer::{
    brute_force_oracle, objective_min_margin, solve, solve_same_class, suggest_and_improve,
    SolveResult, SolverConfig,
};
pub use policies::{build_policy, PolicyKind};
pub use simulator::{simulate, SimConfig, SimMode, SimReport};
pub use zone::{
    analytic_response_times, check_stability, effective_service_rates, fleet_rate_bound,
    vehicle_class_rates, DecisionSet, RateProfile, StabilityReport, ZoneConfig,
};
