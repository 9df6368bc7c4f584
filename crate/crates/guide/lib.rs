// mdbook can't run listings that depend on a crate, so each chapter is pulled
// in as the doc comment of an empty module and `cargo test` runs the listings
// as doctests. One module per chapter keeps failures traceable.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/flows.md")]
pub mod flows {}
#[doc = include_str!("../../book/src/matrix-form.md")]
pub mod matrix_form {}
#[doc = include_str!("../../book/src/baselines.md")]
pub mod baselines {}
#[doc = include_str!("../../book/src/models.md")]
pub mod models {}
#[doc = include_str!("../../book/src/datasets.md")]
pub mod datasets {}
#[doc = include_str!("../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../book/src/cli.md")]
pub mod cli {}
