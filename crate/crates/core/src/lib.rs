//! End-to-end pipeline that turns scalar C loop kernels into AVX2-intrinsic
//! vectorized C through a pluggable LLM backend, screens candidates with
//! checksum-based differential testing, and establishes correctness with a
//! staged formal-equivalence driver on top of an external translation
//! validator. Benchmarking and pass@k evaluation round out the toolkit.

pub mod agents;
pub mod bench;
pub mod cli;
pub mod csubset;
pub mod difftest;
pub mod llm_client;
pub mod loop_model;
pub mod tools;
pub mod transforms;
pub mod verify;
