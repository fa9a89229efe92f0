// mdbook cannot test listings against a workspace crate, so every chapter is
// pulled in as the docs of an empty module and `cargo test --doc` runs the
// listings. One module per chapter keeps failures traceable to a file.

#[doc = include_str!("../README.md")]
pub mod readme {}
#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/scale.md")]
pub mod scale {}
#[doc = include_str!("src/semigroup.md")]
pub mod semigroup {}
#[doc = include_str!("src/drivers.md")]
pub mod drivers {}
#[doc = include_str!("src/controlled.md")]
pub mod controlled {}
#[doc = include_str!("src/sewing.md")]
pub mod sewing {}
#[doc = include_str!("src/solver.md")]
pub mod solver {}
#[doc = include_str!("src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
