//! Random logarithmic-height trees: exact profile statistics, asymptotic
//! width and mode predictions, and seeded Monte Carlo checks.
//!
//! Families: random recursive trees, plane-oriented recursive trees, point
//! quad trees, grid trees, generalized m-ary search trees, polynomial
//! varieties of increasing trees and mobile trees. Binary search trees
//! appear as `quad:d=1`, `mary:m=2,t=0` or `increasing:phi=1,2,1`.

pub mod asympt;
pub mod error;
pub mod exact;
pub mod generate;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use model::{parse_model_spec, Profile, TreeModelSpec, WidthSummary};
