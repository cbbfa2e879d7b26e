//! Numerical study of the Feigenbaum fixed-point map: the renormalization
//! fixed point itself, its inverse branch, the invariant access curve to
//! the critical point, the rescaling-invariant Markov partition of the
//! dynamical plane, and Hausdorff-dimension estimates of the limit curve.

pub mod dimension;
pub mod error;
pub mod geometry;
pub mod ifs;
pub mod inverse;
pub mod map;
pub mod partition;

pub use error::{FeigError, Result};
pub use geometry::CurveApprox;
pub use map::{alpha_oracle, eval_g, eval_g_prime, find_x0, solve_feigenbaum};
pub use map::{ContinuationPolicy, FeigenbaumMap};
