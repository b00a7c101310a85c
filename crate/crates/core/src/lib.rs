// tensor code reads best with explicit index loops
#![allow(clippy::needless_range_loop)]

pub mod carroll;
pub mod classify;
pub mod cli;
pub mod connection;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod sample;
pub mod surface;
pub mod tolerance;
pub mod verdict;

pub use error::{Error, Result};
