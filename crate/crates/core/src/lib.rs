#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod entanglement;
pub mod linalg;
pub mod model;
pub mod scenarios;
pub mod spectral;
