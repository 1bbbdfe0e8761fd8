//! Lane-choice equilibria on a two-lane freeway where lane 1 is tolled and
//! shared by human-driven and autonomous vehicles of low and high occupancy.
//!
//! High-occupancy autonomous vehicles ride lane 1 for free. The other three
//! classes pick the lane with the lower cost (delay plus toll). Autonomous
//! vehicles keep shorter headways, so they load a lane less than
//! human-driven ones. The crate computes the resulting equilibria, searches
//! for good tolls, thresholds and lane policies, and studies how the system
//! copes with vehicles that use lane 1 without paying.
//!
//! ```
//! use lanechoice::{
//!     solve_equilibrium, Bpr, CommuterDemand, DelayModel, HeadwayRatio,
//!     OccupancyProfile, PerClass, Scenario, Toll,
//! };
//!
//! let bpr = Bpr::new(3.0, 1.0, 1.0, 10.0)?;
//! let scenario = Scenario::new(
//!     CommuterDemand::new(PerClass::new(5.0, 4.0, 3.0, 4.0))?,
//!     OccupancyProfile::new(1.0, 4.0)?,
//!     HeadwayRatio::new(0.5)?,
//!     DelayModel::bpr(bpr, bpr)?,
//!     Toll::Uniform(0.5),
//! )?;
//! let eq = solve_equilibrium(&scenario)?;
//! assert!((eq.phi_1_star - 1.5).abs() < 1e-12);
//! # Ok::<(), lanechoice::Error>(())
//! ```

pub mod equilibrium;
pub mod error;
pub mod hetero;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod resilience;
pub mod roots;

pub use equilibrium::{
    solve_equilibrium, solve_equilibrium_pinned, solve_phi1_star, uniqueness_thresholds, verify_equilibrium,
    EquilibriumKind, EquilibriumResult, UniquenessThresholds,
};
pub use error::{Error, Result};
pub use hetero::{differentiate_tolls, solve_hetero_equilibrium, Differentiation, HeteroEquilibrium, TollVector};
pub use model::{
    Bpr, CommuterDemand, DelayModel, FlowDistribution, HeadwayRatio, Lane, LaneDelay, OccupancyProfile, PerClass,
    PerDecision, Scenario, Toll, VehicleClass,
};
pub use policy::{
    compare_policies, optimize_occupancy_threshold, optimize_uniform_toll, CarpoolModel, DesignObjective, LanePolicy,
    SweepRow, SweepTable,
};
pub use resilience::{
    primary_resilient_region, resilience_report, secondary_resilient_regions, sweep_misbehavior, DelayVariation,
    MisbehaviorSweep, ResilienceReport, ResilientRegion,
};
