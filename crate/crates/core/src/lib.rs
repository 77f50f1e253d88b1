#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constitutive;
pub mod error;
pub mod io;
pub mod kernels;
pub mod network;
pub mod protocols;
pub mod qlv;
pub mod special;

pub use error::{Error, Result};
