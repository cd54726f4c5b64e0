//! Acceptance suite and independent oracles; all content lives under `tests/`.
