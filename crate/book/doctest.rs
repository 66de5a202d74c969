// mdbook cannot run listings that depend on an external crate, so every
// chapter is pulled in as the doc comment of a module here and the listings
// run under `cargo test --doc`. One module per chapter keeps failures easy
// to trace back to a file.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/covariance.md")]
pub mod covariance {}
#[doc = include_str!("src/eigenvectors.md")]
pub mod eigenvectors {}
#[doc = include_str!("src/detectors.md")]
pub mod detectors {}
#[doc = include_str!("src/feature-learning.md")]
pub mod feature_learning {}
#[doc = include_str!("src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("src/calibration.md")]
pub mod calibration {}
#[doc = include_str!("src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
