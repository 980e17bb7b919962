//! Scenario runner behind the `powershape` binary.

pub mod config;
pub mod output;
pub mod pattern;
pub mod scenario;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
