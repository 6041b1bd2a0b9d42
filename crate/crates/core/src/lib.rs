//! Storage expansion planning for microgrids under probabilistic grid-outage models.

pub mod config;
pub mod error;
pub mod mdp;
pub mod outage;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::{Exact, FieldScalar, Scalar};

pub type OutageModelF64 = outage::OutageModel<f64>;
pub type CostTableF64 = sim::CostTable<f64>;
pub type MicrogridF64 = sim::Microgrid<f64>;
pub type PlanningConfigF64 = mdp::PlanningConfig<f64>;
pub type QTableF64 = solver::QTable<f64>;
pub type ResolvedConfigF64 = config::ResolvedConfig<f64>;
pub type PolicyTraceF64 = scenario::PolicyTrace<f64>;
pub type ComparisonReportF64 = scenario::ComparisonReport<f64>;
