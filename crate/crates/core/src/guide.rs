//! The user guide in `book/`, compiled here so its snippets run as doctests.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/trees.md")]
pub mod trees {}

#[doc = include_str!("../../../book/src/representation.md")]
pub mod representation {}

#[doc = include_str!("../../../book/src/optimizers.md")]
pub mod optimizers {}

#[doc = include_str!("../../../book/src/meanfield.md")]
pub mod meanfield {}

#[doc = include_str!("../../../book/src/stability.md")]
pub mod stability {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
