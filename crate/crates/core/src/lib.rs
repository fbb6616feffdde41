//! Placement design and evaluation for coded caching with heterogeneous file
//! lengths, popularities and cache sizes.
//!
//! The crate builds linear programs for several placement families, solves
//! them, computes exact expected delivery rates by demand enumeration and
//! checks placements end to end with a bit-level XOR delivery simulator.
//!
//! ```
//! use cachecraft::evaluator::expected_rate;
//! use cachecraft::{Backend, Method, SystemConfig};
//!
//! let cfg = SystemConfig::from_json_str(r#"{"K": 3, "N": 3, "F": [2, 1, 1], "zipf_s": 0.8, "M": 1}"#)?;
//! let sol = Method::General.build(&cfg)?.solve(Backend::Auto)?;
//! let check = expected_rate(&cfg, &sol.placement)?.expected_rate;
//! assert!((check - sol.objective).abs() < 1e-9);
//! # Ok::<(), cachecraft::Error>(())
//! ```

pub mod delivery;
pub mod error;
pub mod evaluator;
pub mod formulations;
pub mod lp;
pub mod model;
pub mod probability;
pub mod schemes;
pub mod subset;

pub use delivery::{BitCatalog, DecodeReport, SimulationSummary, TransmissionLog};
pub use error::{Error, Result};
pub use evaluator::{CurveMethod, CurvePoint};
pub use formulations::{BuiltProblem, FormulationSolution, Method};
pub use lp::{Backend, LinearProgram, LpSolution};
pub use model::{
    load_config, validate_placement, zipf_popularities, CacheClasses, Demand, FeasibilityReport,
    GroupedScheme, Placement, RateResult, SubsetClass, SystemConfig, Violation,
};
pub use subset::Subset;
