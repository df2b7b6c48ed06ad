//! The `oilrf` guide. Each module holds one chapter so its examples run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[doc = include_str!("../../../book/src/preparation.md")]
pub mod preparation {}

#[doc = include_str!("../../../book/src/transforms.md")]
pub mod transforms {}

#[doc = include_str!("../../../book/src/boosting.md")]
pub mod boosting {}

#[doc = include_str!("../../../book/src/tuning.md")]
pub mod tuning {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/explaining.md")]
pub mod explaining {}

#[doc = include_str!("../../../book/src/workflow.md")]
pub mod workflow {}
