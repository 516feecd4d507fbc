#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod expr;
pub mod error;
pub mod grid;
pub mod linalg;

pub use error::{Error, Result};
pub mod media;
pub mod cell;
pub mod tensor;
pub mod fp;
pub mod edi;
pub mod metric;
pub mod gamma;
