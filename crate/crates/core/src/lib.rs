//! Toolkit for building and evaluating code-generation resources for an
//! emerging programming language.

pub mod cli;
pub mod client;
pub mod corpus;
pub mod eval;
pub mod plan;
pub mod remote;
pub mod review;
pub mod service;
pub mod sft;
pub mod store;
pub mod text;
pub mod translate;
pub mod workflow;
