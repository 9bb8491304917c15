//! Acceptance checks for `dlrrf` live in `tests/acceptance.rs`; run them with
//! `cargo test -p dlrrf-acceptance`.
