//! Adversarial examples, robustness certificates and robust learning for
//! degree-≤2 polynomial threshold functions and two-layer ReLU networks
//! under ℓ∞ perturbations.

pub mod attack;
pub mod boxmax;
pub mod error;
pub mod hardness;
pub mod io;
pub mod learner;
pub mod neural;
pub mod par;
pub mod poly;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use poly::{Label, LabeledPoint, LabeledSet, PtfClassifier, QuadPoly};
