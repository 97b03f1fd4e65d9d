//! Runs the code blocks of the guide in `book/` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/free-convolution.md")]
pub mod free_convolution {}

#[doc = include_str!("../../../book/src/ensembles.md")]
pub mod ensembles {}

#[doc = include_str!("../../../book/src/fluctuations.md")]
pub mod fluctuations {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
