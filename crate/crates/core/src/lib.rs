//! Measure Python source with 22 structural metrics and tell human-written
//! code from LLM-generated code.
//!
//! The guide in `book/` walks through each module with runnable examples.

pub mod corpus;
pub mod explain;
pub mod llmgen;
pub mod metrics;
pub mod models;
pub mod pyparse;
pub mod stats;
pub mod table;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/parsing.md")]
    mod parsing {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/explain.md")]
    mod explain {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
