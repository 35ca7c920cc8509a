//! Pan-CDN short-video streaming simulator and the PIRA range/CDN controller.

// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod controller;
pub mod error;
pub mod experiment;
pub mod link;
pub mod model;
pub mod planner;
pub mod predictor;
pub mod session;
pub mod sim;
pub mod traces;
pub mod workload;

pub use error::{Error, Result};
