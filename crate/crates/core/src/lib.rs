//! Model-free adaptive predictive control for MIMO discrete-time plants.
//!
//! The toolkit is organized around an incremental linear model whose block
//! gains are estimated from data:
//!
//! - [`edlm`]: the block gain matrix, increment stacks, shift operators and
//!   a finite-difference gain oracle;
//! - [`predictor`]: stacked multi-step prediction operators;
//! - [`controller`]: the receding-horizon law plus PID-shaped and
//!   iterative variants;
//! - [`estimators`]: feedforward and radial-basis gain estimators and an
//!   online move-weight tuner;
//! - [`stability`]: closed-loop characteristic polynomial, root location
//!   and static-error diagnostics;
//! - [`simkit`]: plants, references, closed-loop execution and traces.

pub mod controller;
pub mod edlm;
pub mod error;
pub mod estimators;
pub mod predictor;
pub mod simkit;
pub mod stability;

pub use error::{Error, Result};
