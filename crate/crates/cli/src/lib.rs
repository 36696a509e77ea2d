//! Command line and HTTP front-end for tab2bot.

pub mod commands;
pub mod service;
