//! Level-set traversal: GOV steps, the RIPV driver, beginning-pulse
//! optimization, the optional correcting step and interpolation of the
//! resulting pulse family.

mod correct;
mod gov;
mod interp;
mod optimize;
mod ripv;

pub use correct::{correcting_step, target_gate, CorrectionOutcome};
pub use gov::{gov_step, GovStep, DEFAULT_EPS_IRR, RANK_TOL};
pub use interp::{interpolate, PulseInterpolator};
pub use optimize::{optimize_beginning, BeginningWeights, OptimizeOutcome, StopCriteria};
pub use ripv::{
    ripv_run, Constraint, Correction, Traversal, TraversalConfig, TraversalError, TraversalProblem, TraversalRecord,
};
