//! Building a spoiler question-answering dataset from clickbait posts and
//! scoring spoiler generators against it.
//!
//! The pipeline runs `corpus` (ingest) → `cleaner` → `spanlab` (answer span
//! labeling) → `review` (human check of fuzzy spans) → `dataset` (split and
//! export) → `evalrun` (score predictions with `metrics`).

pub mod cleaner;
pub mod corpus;
pub mod dataset;
pub mod evalrun;
pub mod jsonl;
pub mod metrics;
pub mod review;
pub mod spanlab;
pub mod text;
