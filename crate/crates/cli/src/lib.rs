pub mod config;
mod expr;
pub mod run;
