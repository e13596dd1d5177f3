#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birth_death;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod markov;
pub mod pgf;
pub mod polling;
pub mod queues;
pub mod sim;

pub use error::{Error, Result};
