#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod influence;
pub mod models;
pub mod numkit;
pub mod selection;
pub mod validation;

pub use error::{Error, Result};
