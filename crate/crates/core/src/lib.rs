//! Joint spectrum allocation, user association and power control for
//! dense downlink wireless networks.
//!
//! The pipeline: [`scenario`] draws a network, [`channel`] turns it into
//! link gains and pruned neighborhoods, [`pursuit`] builds a piecewise-flat
//! allocation plan by repeatedly calling the per-profile solver in
//! [`affine`], and [`simulator`] replays the plan packet by packet.

pub mod affine;
pub mod baselines;
pub mod channel;
pub mod cli;
pub mod error;
pub mod par;
pub mod pursuit;
pub mod rates;
pub mod scenario;
pub mod simulator;
pub mod utility;

pub use affine::{solve_affine, AffineOptions, AffineSolveReport, PowerMode};
pub use baselines::{compare_chain, run_scheme, Scheme};
pub use channel::{build_gains, build_neighborhoods, LinkGains, Neighborhoods, Network};
pub use error::{Error, Result};
pub use par::Execution;
pub use pursuit::{optimize_beta, pursue, pursue_from, PursuitOptions, PursuitState};
pub use rates::{plan_rates, profile_rates, sinr, AllocationPlan, PowerProfile};
pub use scenario::{generate_scenario, load_scenario, save_scenario, NetworkScenario, ScenarioParams};
pub use simulator::{analytic_delays, simulate, Horizon, SimConfig, SimOutcome};
pub use utility::{delay_gradient, delay_utility, energy_cost, UtilitySpec};
