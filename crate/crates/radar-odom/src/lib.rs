//! File formats, run configuration, plotting and subcommands around
//! [`radar_odom_core`].
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod formats;
pub mod plot;
